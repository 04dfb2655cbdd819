//! Seeded two-source test mixtures: harmonic tones whose partials nearly
//! collide, plus a little white noise in each source.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::signal::{StftConfig, Waveform};

pub const SAMPLE_RATE: u32 = 8000;
pub const WINDOW: usize = 512;
pub const HOP: usize = 128;
/// Gives 80 frames with [`WINDOW`] and [`HOP`].
pub const LENGTH: usize = 79 * HOP - (WINDOW - HOP) + 1;

#[derive(Debug, Clone)]
pub struct SyntheticMixture {
    pub sources: Vec<Waveform>,
    pub mixture: Waveform,
    pub config: StftConfig,
}

struct Note {
    start: usize,
    end: usize,
    f0: f64,
    gain: f64,
}

fn render(notes: &[Note], amps: &[f64], noise_db: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; LENGTH];
    let ramp = 200.0;
    for note in notes {
        let phases: Vec<f64> = amps.iter().map(|_| rng.random_range(0.0..TAU)).collect();
        for (n, o) in out.iter_mut().enumerate().take(note.end).skip(note.start) {
            let edge = ((n - note.start) as f64 / ramp).min((note.end - n) as f64 / ramp).min(1.0);
            let mut s = 0.0;
            for (h, (&a, &p)) in amps.iter().zip(&phases).enumerate() {
                let f = note.f0 * (h + 1) as f64 / SAMPLE_RATE as f64;
                s += a * (TAU * f * n as f64 + p).cos();
            }
            *o += note.gain * edge * s;
        }
    }
    let sigma = 10f64.powf(noise_db / 20.0);
    for x in &mut out {
        *x += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

fn notes(rng: &mut ChaCha8Rng, pitches: &[f64]) -> Vec<Note> {
    let mut out = Vec::new();
    let mut start = rng.random_range(0..LENGTH / 10);
    while start < LENGTH {
        let len = rng.random_range(LENGTH / 5..LENGTH / 2);
        let end = (start + len).min(LENGTH);
        out.push(Note {
            start,
            end,
            f0: pitches[rng.random_range(0..pitches.len())],
            gain: rng.random_range(0.5..1.0),
        });
        start = end + rng.random_range(0..LENGTH / 20);
    }
    out
}

/// Source A is a three-partial tone on one of two pitches. Source B sits a
/// fifth above with a small detuning, so its second partial lands within a
/// couple of bins of A's third.
pub fn two_source_mixture(seed: u64) -> Result<SyntheticMixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(180.0..320.0);
    let pitches_a = [base, base * 1.25];
    let detune = rng.random_range(8.0..25.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let pitches_b = [base * 1.5 + detune, base * 1.25 * 1.5 + detune];
    let a = render(&notes(&mut rng, &pitches_a), &[1.0, 0.6, 0.4], -40.0, &mut rng);
    let b = render(&notes(&mut rng, &pitches_b), &[0.8, 0.7, 0.3], -40.0, &mut rng);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    Ok(SyntheticMixture {
        sources: vec![Waveform::new(a, SAMPLE_RATE)?, Waveform::new(b, SAMPLE_RATE)?],
        mixture: Waveform::new(mix, SAMPLE_RATE)?,
        config: StftConfig::new(WINDOW, HOP)?,
    })
}
