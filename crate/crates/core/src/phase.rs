//! Sinusoidal phase model: QIFFT peak frequencies, regions of influence,
//! frame-to-frame phase unwrapping and the Markov-chain phase log-prior.

use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;

use crate::circular::wrap_angle;
use crate::error::{Error, Result};

/// Default peak threshold, in dB below the frame maximum.
pub const DEFAULT_PEAK_THRESHOLD_DB: f64 = 40.0;

/// Frames whose largest power is below this are treated as silent.
pub const SILENCE_POWER: f64 = 1e-10;

/// Normalized frequencies (cycles per sample, `[0, 0.5]`), one per TF bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField(Array2<f64>);

impl FrequencyField {
    pub fn new(nu: Array2<f64>) -> Result<Self> {
        if nu.iter().any(|x| !(0.0..=0.5).contains(x)) {
            return Err(Error::invalid("nu", "frequencies must lie in [0, 0.5]"));
        }
        Ok(FrequencyField(nu))
    }

    /// Each bin at its own center frequency `f / window_length`.
    pub fn bin_centers(bins: usize, frames: usize) -> Self {
        let n = window_length_for(bins) as f64;
        FrequencyField(Array2::from_shape_fn((bins, frames), |(f, _)| {
            (f as f64 / n).min(0.5)
        }))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Phase locations, stored wrapped to `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField(Array2<f64>);

impl PhaseField {
    pub fn new(mu: Array2<f64>) -> Result<Self> {
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("mu", "phases must be finite"));
        }
        Ok(PhaseField(mu.mapv_into(wrap_angle)))
    }

    /// Phase of every entry of a complex grid (0 where the entry is 0).
    pub fn from_complex(data: &Array2<Complex64>) -> Self {
        PhaseField(data.mapv(|z| wrap_angle(z.arg())))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// A spectral peak: refined normalized frequency and the integer bin it sits on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub bin: usize,
}

fn window_length_for(bins: usize) -> usize {
    2 * (bins.max(2) - 1)
}

/// Strict local maxima of a log-magnitude frame (in dB) lying within
/// `threshold_db` of the frame maximum, each refined by a parabola through
/// its two neighbours. Edge maxima are kept at their bin center.
pub fn qifft_peaks(log_frame: &[f64], threshold_db: f64) -> Vec<Peak> {
    let bins = log_frame.len();
    if bins < 3 {
        return Vec::new();
    }
    let n = window_length_for(bins) as f64;
    let top = log_frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = top - threshold_db;
    let mut peaks = Vec::new();
    for k in 0..bins {
        let b = log_frame[k];
        if b < floor {
            continue;
        }
        let left = k.checked_sub(1).map(|i| log_frame[i]);
        let right = log_frame.get(k + 1).copied();
        let is_max = left.is_none_or(|a| b > a) && right.is_none_or(|c| b > c);
        if !is_max {
            continue;
        }
        let delta = match (left, right) {
            (Some(a), Some(c)) => 0.5 * (a - c) / (a - 2.0 * b + c),
            _ => 0.0,
        };
        peaks.push(Peak {
            frequency: ((k as f64 + delta) / n).clamp(0.0, 0.5),
            bin: k,
        });
    }
    peaks
}

/// For every bin, the index of the peak whose region it falls in. Region
/// boundaries sit at the midpoint between consecutive peak bins, a tie going
/// to the lower peak. `None` everywhere when there are no peaks.
pub fn regions_of_influence(peaks: &[Peak], bins: usize) -> Vec<Option<usize>> {
    if peaks.is_empty() {
        return vec![None; bins];
    }
    let mut out = Vec::with_capacity(bins);
    let mut p = 0;
    for f in 0..bins {
        while p + 1 < peaks.len() && f > (peaks[p].bin + peaks[p + 1].bin) / 2 {
            p += 1;
        }
        out.push(Some(p));
    }
    out
}

/// Per-frame QIFFT on `10 log10 V`, spread over regions of influence.
/// Silent frames fall back to bin centers.
pub fn estimate_frequencies(v: &Array2<f64>, threshold_db: f64) -> FrequencyField {
    let (bins, frames) = v.dim();
    let n = window_length_for(bins) as f64;
    let mut nu = Array2::zeros((bins, frames));
    for (t, col) in v.axis_iter(Axis(1)).enumerate() {
        let assigned = frame_frequencies(col, threshold_db);
        for f in 0..bins {
            nu[[f, t]] = assigned
                .as_ref()
                .map_or((f as f64 / n).min(0.5), |a| a[f]);
        }
    }
    FrequencyField(nu)
}

fn frame_frequencies(col: ArrayView1<f64>, threshold_db: f64) -> Option<Vec<f64>> {
    let top = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top >= SILENCE_POWER) {
        return None;
    }
    let log: Vec<f64> = col.iter().map(|&p| 10.0 * p.max(f64::MIN_POSITIVE).log10()).collect();
    let peaks = qifft_peaks(&log, threshold_db);
    if peaks.is_empty() {
        return None;
    }
    let regions = regions_of_influence(&peaks, col.len());
    Some(regions.iter().map(|r| peaks[r.unwrap()].frequency).collect())
}

/// `mu_prev + 2 pi hop nu`, wrapped.
pub fn unwrap_step(mu_prev: f64, nu: f64, hop: usize) -> f64 {
    wrap_angle(mu_prev + TAU * hop as f64 * nu)
}

/// Phases obtained by unwrapping forward from `start` (one angle per bin)
/// with the frequencies of `nu`. Column 0 is `start` itself.
pub fn unwrapped_phases(start: &[f64], nu: &FrequencyField, hop: usize) -> Result<PhaseField> {
    let (bins, frames) = nu.dim();
    if start.len() != bins {
        return Err(Error::ShapeMismatch(format!(
            "{} starting phases for {bins} bins",
            start.len()
        )));
    }
    let mut mu = Array2::zeros((bins, frames));
    for f in 0..bins {
        let mut cur = wrap_angle(start[f]);
        for t in 0..frames {
            if t > 0 {
                cur = unwrap_step(cur, nu.values()[[f, t]], hop);
            }
            mu[[f, t]] = cur;
        }
    }
    Ok(PhaseField(mu))
}

/// One-step unwrapping from an anchor field: frame 0 is copied and frame
/// `t` is `anchor[t - 1]` advanced by `nu[t]`. Anchoring on the previous
/// mixture frame keeps frequency errors from accumulating over time.
pub fn predicted_phases(anchor: &PhaseField, nu: &FrequencyField, hop: usize) -> Result<PhaseField> {
    if anchor.dim() != nu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "anchor {:?} vs frequency field {:?}",
            anchor.dim(),
            nu.dim()
        )));
    }
    let (a, v) = (anchor.values(), nu.values());
    let mut mu = a.clone();
    for ((f, t), out) in mu.indexed_iter_mut() {
        if t > 0 {
            *out = unwrap_step(a[[f, t - 1]], v[[f, t]], hop);
        }
    }
    Ok(PhaseField(mu))
}

/// `tau * sum_{f, t >= 1} cos(mu_t - mu_{t-1} - 2 pi hop nu_t)` for one source.
pub fn phase_log_prior(mu: &PhaseField, nu: &FrequencyField, tau: f64, hop: usize) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "phase field {:?} vs frequency field {:?}",
            mu.dim(),
            nu.dim()
        )));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let (bins, frames) = mu.dim();
    let (m, v) = (mu.values(), nu.values());
    let l = hop as f64;
    let mut sum = 0.0;
    for f in 0..bins {
        for t in 1..frames {
            sum += (m[[f, t]] - m[[f, t - 1]] - TAU * l * v[[f, t]]).cos();
        }
    }
    Ok(tau * sum)
}
