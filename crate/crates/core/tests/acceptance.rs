//! Acceptance suite. Prints one line per criterion and exits nonzero when any
//! of them fails. Run with `cargo test -p cisnmf --test acceptance`.

// `check!` negates its condition so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cisnmf::circular::{
    anisotropy_params, chi2_2_cdf, chi2_normalize, ks_distance, rvm_moments, sample_ag, sample_rvm,
    AnisotropyCoefficients,
};
use cisnmf::em::{
    ag_moments_from, e_step, m_step_nmf, majorizer_w, nmf_functional, run_complex_isnmf, warm_start, AGMoments,
    EmConfig, PhaseUpdateRule,
};
use cisnmf::metrics::{bss_eval, SCORE_CAP};
use cisnmf::nmf::{learn_dictionary, NmfFactors};
use cisnmf::phase::{estimate_frequencies, qifft_peaks, unwrap_step, PhaseField};
use cisnmf::pipeline::{separate, Method, SeparationConfig};
use cisnmf::signal::{istft, stft, ComplexSpectrogram, StftConfig, Waveform};
use cisnmf::synthetic::{two_source_mixture, SyntheticMixture};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
    }
}

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// shared synthetic setup

const BENCH_SEEDS: u64 = 20;
const RANK: usize = 8;
const LEARN_ITERS: usize = 100;

fn dictionaries(m: &SyntheticMixture, seed: u64) -> Result<Vec<Array2<f64>>, String> {
    m.sources
        .iter()
        .map(|s| learn_dictionary(&stft(s, &m.config), RANK, LEARN_ITERS, seed).map_err(fail))
        .collect()
}

fn waveforms(est: &[ComplexSpectrogram]) -> Result<Vec<Vec<f64>>, String> {
    est.iter().map(|e| istft(e).map(|w| w.into_samples()).map_err(fail)).collect()
}

struct BenchRow {
    sdr: [f64; 3],
    sir: [f64; 3],
    conservativity: Vec<f64>,
    q_clamped: usize,
}

struct Bench {
    rows: Vec<BenchRow>,
    elapsed: Duration,
}

fn run_bench() -> Result<Bench, String> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for seed in 0..BENCH_SEEDS {
        let m = two_source_mixture(seed).map_err(fail)?;
        let dicts = dictionaries(&m, seed)?;
        let x = stft(&m.mixture, &m.config);
        let refs: Vec<Vec<f64>> = m.sources.iter().map(|s| s.samples().to_vec()).collect();
        let mut row = BenchRow {
            sdr: [0.0; 3],
            sir: [0.0; 3],
            conservativity: Vec::new(),
            q_clamped: 0,
        };
        for (i, method) in [Method::Cisnmf, Method::Wiener, Method::AnisotropicWiener].into_iter().enumerate() {
            let mut cfg = SeparationConfig { method, ..SeparationConfig::default() };
            cfg.em.seed = seed;
            let out = separate(&x, &dicts, &cfg).map_err(fail)?;
            if let Some(report) = out.report {
                row.conservativity = report.conservativity;
                row.q_clamped = report.q_clamped;
            }
            let mean = bss_eval(&waveforms(&out.estimates)?, &refs).map_err(fail)?.mean();
            row.sdr[i] = mean.sdr;
            row.sir[i] = mean.sir;
        }
        rows.push(row);
    }
    Ok(Bench {
        rows,
        elapsed: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// 1. kappa = 0 degeneracy

/// Isotropic EM on fixed dictionaries followed by a Wiener filter, written
/// from scratch: posterior power `P = V_j (1 - G) + |G x|^2` with the Wiener
/// gain `G = V_j / sum V`, then a square-root multiplicative update of `H`.
fn isotropic_em_oracle(x: &Array2<Complex64>, mut factors: Vec<NmfFactors>, iters: usize) -> Vec<Array2<Complex64>> {
    let floor = |a: f64| a.max(1e-12);
    let variances = |fs: &[NmfFactors]| -> Vec<Array2<f64>> {
        fs.iter().map(|f| f.w.dot(&f.h).mapv(floor)).collect()
    };
    for _ in 0..iters {
        let v = variances(&factors);
        let total = v.iter().fold(Array2::<f64>::zeros(x.dim()), |acc, a| acc + a);
        for (f, vj) in factors.iter_mut().zip(&v) {
            let mut p = Array2::<f64>::zeros(x.dim());
            Zip::from(&mut p).and(vj).and(&total).and(x).for_each(|p, &vj, &s, &x| {
                let g = vj / s;
                *p = vj * (1.0 - g) + (x * g).norm_sqr();
            });
            let num = Zip::from(&p).and(vj).map_collect(|&p, &v| p / (v * v));
            let den = vj.mapv(|v| 1.0 / v);
            let ratio = f.w.t().dot(&num) / f.w.t().dot(&den);
            Zip::from(&mut f.h).and(&ratio).for_each(|h, &r| *h = floor(*h * r.sqrt()));
        }
    }
    let v = variances(&factors);
    let total = v.iter().fold(Array2::<f64>::zeros(x.dim()), |acc, a| acc + a);
    v.iter()
        .map(|vj| Zip::from(vj).and(&total).and(x).map_collect(|&vj, &s, &x| x * (vj / s)))
        .collect()
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = two_source_mixture(7).map_err(fail)?;
    let dicts = dictionaries(&m, 7)?;
    let x = stft(&m.mixture, &m.config);
    check!((x.bins(), x.frames()) == (257, 80), "geometry {}x{}", x.bins(), x.frames());

    let mut em = EmConfig { kappa: 0.0, tau: 0.0, seed: 7, ..EmConfig::default() };
    let wiener_cfg = SeparationConfig {
        method: Method::Wiener,
        em: em.clone(),
        baseline_iters: em.warm_start_iters,
        ..SeparationConfig::default()
    };
    let wiener = waveforms(&separate(&x, &dicts, &wiener_cfg).map_err(fail)?.estimates)?;

    em.em_iters = 0;
    let no_em = waveforms(&run_complex_isnmf(&x, &dicts, &em).map_err(fail)?.estimates)?;
    let d0 = max_abs_diff(&no_em, &wiener);

    em.em_iters = EmConfig::default().em_iters;
    let full = waveforms(&run_complex_isnmf(&x, &dicts, &em).map_err(fail)?.estimates)?;
    let factors = warm_start(&x.power(), &dicts, em.warm_start_iters, em.seed).map_err(fail)?;
    let oracle: Vec<ComplexSpectrogram> = isotropic_em_oracle(x.data(), factors, em.em_iters)
        .into_iter()
        .map(|d| x.with_data(d).map_err(fail))
        .collect::<Result<_, _>>()?;
    let d1 = max_abs_diff(&full, &waveforms(&oracle)?);

    check!(d0 < 1e-5, "0 EM iterations vs Wiener: max abs diff {d0:.3e}");
    check!(d1 < 1e-5, "{} EM iterations vs isotropic oracle: max abs diff {d1:.3e}", em.em_iters);
    within(start.elapsed(), 30.0, "criterion")?;
    Ok(format!(
        "max |diff| {d0:.2e} (0 iters vs Wiener), {d1:.2e} ({} iters vs isotropic EM oracle)",
        em.em_iters
    ))
}

// ---------------------------------------------------------------------------
// 2. conservativity

fn criterion_2(bench: &Result<Bench, String>) -> Outcome {
    let bench = bench.as_ref().map_err(Clone::clone)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for row in &bench.rows {
        check!(!row.conservativity.is_empty(), "no E-step recorded");
        for &e in &row.conservativity {
            worst = worst.max(e);
            count += 1;
        }
    }
    check!(worst <= 1e-10, "worst relative error {worst:.3e}");
    Ok(format!("worst relative per-bin error {worst:.2e} over {count} E-steps"))
}

// ---------------------------------------------------------------------------
// 3. majorizer

fn h_oracle(v: &Array2<f64>, p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for ((i, j), &v) in v.indexed_iter() {
        s += v.ln() + p[[i, j]] / v - q[[i, j]] / v.sqrt();
    }
    s
}

/// Sum of the three per-term bounds: Jensen on `p / v`, tangent planes on
/// `log v` and on `-q / sqrt(v)` (slope `q v~^{-3/2} / 2`).
fn g_oracle(w: &Array2<f64>, h: &Array2<f64>, wt: &Array2<f64>, p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let (f_dim, k_dim) = w.dim();
    let t_dim = h.ncols();
    let mut s = 0.0;
    for f in 0..f_dim {
        for t in 0..t_dim {
            let vt: f64 = (0..k_dim).map(|k| wt[[f, k]] * h[[k, t]]).sum();
            let v: f64 = (0..k_dim).map(|k| w[[f, k]] * h[[k, t]]).sum();
            let jensen: f64 = (0..k_dim)
                .map(|k| {
                    let phi = wt[[f, k]] * h[[k, t]] / vt;
                    phi * phi * p[[f, t]] / (w[[f, k]] * h[[k, t]])
                })
                .sum();
            let log_bound = vt.ln() + (v - vt) / vt;
            let sqrt_bound = -q[[f, t]] / vt.sqrt() + 0.5 * q[[f, t]] * vt.powf(-1.5) * (v - vt);
            s += jensen + log_bound + sqrt_bound;
        }
    }
    s
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(lo..hi))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap: f64 = 0.0;
    let mut worst_touch: f64 = 0.0;
    for draw in 0..1000 {
        let (f, k, t) = (rng.random_range(1..8), rng.random_range(1..5), rng.random_range(1..8));
        let h = random_matrix(&mut rng, k, t, 0.05, 2.0);
        let wt = random_matrix(&mut rng, f, k, 0.05, 2.0);
        let w = random_matrix(&mut rng, f, k, 0.01, 4.0);
        let p = random_matrix(&mut rng, f, t, 0.0, 3.0);
        let q = random_matrix(&mut rng, f, t, 0.0, 2.0);
        let g = g_oracle(&w, &h, &wt, &p, &q);
        let hv = h_oracle(&w.dot(&h), &p, &q);
        let g_lib = majorizer_w(&w, &h, &wt, &p, &q);
        let scale = hv.abs().max(1.0);
        check!((g - g_lib).abs() <= 1e-10 * scale, "draw {draw}: library bound {g_lib} vs oracle {g}");
        check!(g >= hv - 1e-10 * scale, "draw {draw}: G {g} < H {hv}");
        worst_gap = worst_gap.min((g - hv) / scale);
        let touch = (g_oracle(&wt, &h, &wt, &p, &q) - h_oracle(&wt.dot(&h), &p, &q)).abs() / scale;
        check!(touch <= 1e-10, "draw {draw}: G(t,t) - H(t) = {touch:.3e}");
        worst_touch = worst_touch.max(touch);
    }

    let mut sweeps = 0;
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + instance);
        let (f, k, t) = (rng.random_range(4..20), rng.random_range(1..6), rng.random_range(4..20));
        let mut factors = NmfFactors::new(
            random_matrix(&mut rng, f, k, 0.05, 2.0),
            random_matrix(&mut rng, k, t, 0.05, 2.0),
        )
        .map_err(fail)?;
        let p = random_matrix(&mut rng, f, t, 0.0, 4.0);
        let q = random_matrix(&mut rng, f, t, 0.0, 2.0);
        let blind = instance % 2 == 0;
        let mut prev = h_oracle(&factors.product(), &p, &q);
        for sweep in 0..30 {
            factors = m_step_nmf(&factors, &p, &q, 1, blind).map_err(fail)?;
            let cur = h_oracle(&factors.product(), &p, &q);
            check!(
                cur <= prev + 1e-9 * prev.abs(),
                "instance {instance} sweep {sweep}: {prev} -> {cur}"
            );
            let lib = nmf_functional(&factors.product(), &p, &q);
            check!((lib - cur).abs() <= 1e-10 * cur.abs().max(1.0), "functional mismatch {lib} vs {cur}");
            prev = cur;
            sweeps += 1;
        }
    }
    within(start.elapsed(), 60.0, "criterion")?;
    Ok(format!(
        "1000 draws, min (G-H)/|H| {worst_gap:.1e}, max touch gap {worst_touch:.1e}; {sweeps} monotone sweeps on 50 instances"
    ))
}

// ---------------------------------------------------------------------------
// 4. EM monotonicity

fn small_instance(seed: u64) -> Result<(ComplexSpectrogram, Vec<Array2<f64>>), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = StftConfig::new(32, 8).map_err(fail)?;
    let len = 400;
    let source = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let partials: Vec<(f64, f64, f64)> = (0..2)
            .map(|_| (rng.random_range(0.03..0.45), rng.random_range(0.3..1.0), rng.random_range(0.0..TAU)))
            .collect();
        (0..len)
            .map(|n| {
                let tone: f64 = partials.iter().map(|&(f, a, p)| a * (TAU * f * n as f64 + p).cos()).sum();
                tone + 0.01 * rng.random_range(-1.0..1.0)
            })
            .collect()
    };
    let a = source(&mut rng);
    let b = source(&mut rng);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let dicts = [a, b]
        .into_iter()
        .map(|s| {
            let w = Waveform::new(s, 8000).map_err(fail)?;
            learn_dictionary(&stft(&w, &cfg), 3, 50, seed).map_err(fail)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let x = stft(&Waveform::new(mix, 8000).map_err(fail)?, &cfg);
    Ok((x, dicts))
}

fn criterion_4() -> Outcome {
    let iters = 100;
    let mut worst_drop: f64 = 0.0;
    let mut approx_events = 0;
    for seed in 0..10u64 {
        let (x, dicts) = small_instance(seed)?;
        let mut cfg = EmConfig {
            em_iters: iters,
            warm_start_iters: 20,
            seed,
            phase_rule: PhaseUpdateRule::ExactGrid,
            ..EmConfig::default()
        };
        let exact = run_complex_isnmf(&x, &dicts, &cfg).map_err(fail)?.report;
        check!(exact.objective.len() == iters + 1, "trace length {}", exact.objective.len());
        for (i, pair) in exact.objective.windows(2).enumerate() {
            let drop = (pair[0] - pair[1]) / pair[0].abs();
            worst_drop = worst_drop.max(drop);
            check!(
                pair[1] >= pair[0] - 1e-9 * pair[0].abs(),
                "seed {seed} iteration {}: objective {} -> {}",
                i + 1,
                pair[0],
                pair[1]
            );
        }
        cfg.phase_rule = PhaseUpdateRule::Approximate;
        approx_events += run_complex_isnmf(&x, &dicts, &cfg).map_err(fail)?.report.decrease_events;
    }
    let total = 10 * iters;
    let rate = approx_events as f64 / total as f64;
    check!(rate < 0.01, "approximate rule: {approx_events} decreases in {total} iterations");
    Ok(format!(
        "exact rule: worst relative drop {worst_drop:.1e}; approximate rule: {approx_events}/{total} decrease events"
    ))
}

// ---------------------------------------------------------------------------
// 5. E-step oracle

/// 2x2 real covariance of a complex variable from its variance and relation.
fn real_cov(gamma: f64, c: Complex64) -> [[f64; 2]; 2] {
    [
        [0.5 * (gamma + c.re), 0.5 * c.im],
        [0.5 * c.im, 0.5 * (gamma - c.re)],
    ]
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn inverse(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Conditioning of the stacked real vector `(Re s_1, Im s_1, ..., Re s_J, Im s_J)`
/// on `x = sum_j s_j`. Returns `(m', gamma', c')` for every source.
fn conditioning_oracle(x: Complex64, sources: &[(Complex64, f64, Complex64)]) -> Vec<(Complex64, f64, Complex64)> {
    let covs: Vec<_> = sources.iter().map(|&(_, g, c)| real_cov(g, c)).collect();
    let mut sx = [[0.0; 2]; 2];
    for s in &covs {
        for i in 0..2 {
            for j in 0..2 {
                sx[i][j] += s[i][j];
            }
        }
    }
    let mx: Complex64 = sources.iter().map(|s| s.0).sum();
    let inv = inverse(sx);
    let e = [x.re - mx.re, x.im - mx.im];
    sources
        .iter()
        .zip(&covs)
        .map(|(&(m, _, _), &s)| {
            let k = mat_mul(s, inv);
            let mean = c64(m.re + k[0][0] * e[0] + k[0][1] * e[1], m.im + k[1][0] * e[0] + k[1][1] * e[1]);
            let ks = mat_mul(k, s);
            let post = [[s[0][0] - ks[0][0], s[0][1] - ks[0][1]], [s[1][0] - ks[1][0], s[1][1] - ks[1][1]]];
            let gamma = post[0][0] + post[1][1];
            let rel = c64(post[0][0] - post[1][1], post[0][1] + post[1][0]);
            (mean, gamma, rel)
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let kappas = [0.0, 0.5, 5.0];
    let bins = 10_000;
    for b in 0..bins {
        let j_count = 2 + b % 2;
        let coeffs = anisotropy_params(kappas[(b / 2) % 3]).map_err(fail)?;
        let mut moments = Vec::new();
        let mut triples = Vec::new();
        for _ in 0..j_count {
            let v = Array2::from_elem((1, 1), rng.random_range(0.01..3.0));
            let mu = PhaseField::new(Array2::from_elem((1, 1), rng.random_range(0.0..TAU))).map_err(fail)?;
            let ag: AGMoments = ag_moments_from(&v, &mu, &coeffs).map_err(fail)?;
            triples.push((ag.m[[0, 0]], ag.gamma[[0, 0]], ag.c[[0, 0]]));
            moments.push(ag);
        }
        let x = c64(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let posts = e_step(&Array2::from_elem((1, 1), x), &moments).map_err(fail)?;
        for (post, want) in posts.iter().zip(conditioning_oracle(x, &triples)) {
            let errs = [
                (post.m[[0, 0]] - want.0).norm() / want.0.norm().max(1.0),
                (post.gamma[[0, 0]] - want.1).abs() / want.1.abs().max(1.0),
                (post.c[[0, 0]] - want.2).norm() / want.2.norm().max(1.0),
            ];
            let e = errs.into_iter().fold(0.0, f64::max);
            check!(e <= 1e-10, "bin {b}: error {e:.3e}");
            worst = worst.max(e);
        }
    }
    Ok(format!("{bins} bins, worst error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 6. moment matching

struct Stat {
    name: &'static str,
    estimate: f64,
    expected: f64,
    se: f64,
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn criterion_6() -> Outcome {
    let n = 1_000_000;
    let grid = [(1.0, PI / 3.0, 50.0), (1.0, PI / 3.0, 0.5), (2.0, 1.0, 5.0), (0.5, 4.0, 1.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_z: f64 = 0.0;
    for &(v, mu, kappa) in &grid {
        let coeffs = anisotropy_params(kappa).map_err(fail)?;
        let mom = rvm_moments(v, mu, &coeffs).map_err(fail)?;
        let s = sample_rvm(v, mu, kappa, n, &mut rng).map_err(fail)?;
        let centred: Vec<Complex64> = s.iter().map(|z| z - mom.mean).collect();
        let (re, re_se) = mean_and_se(s.iter().map(|z| z.re));
        let (im, im_se) = mean_and_se(s.iter().map(|z| z.im));
        let (g, g_se) = mean_and_se(centred.iter().map(|z| z.norm_sqr()));
        let (cr, cr_se) = mean_and_se(centred.iter().map(|z| (z * z).re));
        let (ci, ci_se) = mean_and_se(centred.iter().map(|z| (z * z).im));
        let stats = [
            Stat { name: "Re m", estimate: re, expected: mom.mean.re, se: re_se },
            Stat { name: "Im m", estimate: im, expected: mom.mean.im, se: im_se },
            Stat { name: "gamma", estimate: g, expected: mom.variance, se: g_se },
            Stat { name: "Re c", estimate: cr, expected: mom.relation.re, se: cr_se },
            Stat { name: "Im c", estimate: ci, expected: mom.relation.im, se: ci_se },
        ];
        for st in &stats {
            let z = (st.estimate - st.expected).abs() / st.se;
            check!(
                z <= 3.0,
                "(v={v}, mu={mu:.4}, kappa={kappa}) {}: {} vs {} ({z:.2} SE)",
                st.name,
                st.estimate,
                st.expected
            );
            worst_z = worst_z.max(z);
        }
    }
    let iso = rvm_moments(2.0, 1.3, &AnisotropyCoefficients::isotropic()).map_err(fail)?;
    check!(
        iso.mean == c64(0.0, 0.0) && iso.relation == c64(0.0, 0.0) && iso.variance == 2.0,
        "kappa = 0 moments {iso:?}"
    );
    Ok(format!("{} grid points x {n} samples, worst deviation {worst_z:.2} SE; kappa = 0 exact", grid.len()))
}

// ---------------------------------------------------------------------------
// 7. chi-squared self-consistency

fn mixture_moments(vs: &[f64], mus: &[f64], coeffs: &AnisotropyCoefficients) -> Result<(Complex64, f64, Complex64), String> {
    let mut out = (c64(0.0, 0.0), 0.0, c64(0.0, 0.0));
    for (&v, &mu) in vs.iter().zip(mus) {
        let m = rvm_moments(v, mu, coeffs).map_err(fail)?;
        out.0 += m.mean;
        out.1 += m.variance;
        out.2 += m.relation;
    }
    Ok(out)
}

fn ks_for(generate: f64, check_at: f64, bins: usize, seed: u64) -> Result<f64, String> {
    let gen = anisotropy_params(generate).map_err(fail)?;
    let chk = anisotropy_params(check_at).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys = Vec::with_capacity(bins);
    for _ in 0..bins {
        let vs = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
        let mus = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
        let (m, g, c) = mixture_moments(&vs, &mus, &gen)?;
        let x = sample_ag(m, g, c, 1, &mut rng).map_err(fail)?[0];
        let (m, g, c) = mixture_moments(&vs, &mus, &chk)?;
        ys.push(chi2_normalize(x, m, g, c).map_err(fail)?);
    }
    Ok(ks_distance(&ys, chi2_2_cdf))
}

fn criterion_7() -> Outcome {
    let bins = 100_000;
    let matched_half = ks_for(0.5, 0.5, bins, 71)?;
    check!(matched_half < 0.01, "kappa 0.5: KS {matched_half:.4}");
    let matched = ks_for(5.0, 5.0, bins, 72)?;
    check!(matched < 0.01, "kappa 5: KS {matched:.4}");
    let wrong = ks_for(5.0, 0.0, bins, 72)?;
    check!(wrong >= 3.0 * matched, "misspecified KS {wrong:.4} vs matched {matched:.4}");
    Ok(format!(
        "KS {matched_half:.4} (kappa 0.5), {matched:.4} (kappa 5), misspecified {wrong:.4} = {:.0}x",
        wrong / matched
    ))
}

// ---------------------------------------------------------------------------
// 8. STFT round trip

fn criterion_8() -> Outcome {
    let sr = 44_100;
    let cfg = StftConfig::from_duration(92.0, sr).map_err(fail)?;
    check!(cfg.hop() * 4 == cfg.window_length(), "hop {} for window {}", cfg.hop(), cfg.window_length());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let len = rng.random_range(sr as usize / 2..2 * sr as usize);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = istft(&stft(&Waveform::new(x.clone(), sr).map_err(fail)?, &cfg)).map_err(fail)?;
        check!(y.len() == len, "length {} vs {len}", y.len());
        let err: f64 = x.iter().zip(y.samples()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    check!(worst < 1e-10, "relative error {worst:.3e}");
    let ten: Vec<f64> = (0..10 * sr as usize).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = stft(&Waveform::new(ten, sr).map_err(fail)?, &cfg);
    check!(s.bins() == 2049, "F = {}", s.bins());
    check!((431..=435).contains(&s.frames()), "T = {}", s.frames());
    Ok(format!("worst relative error {worst:.2e}; 10 s gives F = {}, T = {}", s.bins(), s.frames()))
}

// ---------------------------------------------------------------------------
// 9. QIFFT and unwrapping

fn sinusoid(len: usize, nu: f64, phase: f64, sr: u32) -> Result<Waveform, String> {
    Waveform::new((0..len).map(|n| (TAU * nu * n as f64 + phase).cos()).collect(), sr).map_err(fail)
}

fn criterion_9() -> Outcome {
    let sr = 44_100;
    let cfg = StftConfig::from_duration(92.0, sr).map_err(fail)?;
    let n = cfg.window_length() as f64;
    let mut worst_freq: f64 = 0.0;
    for (i, delta) in [0.1, 0.25, 0.5, 0.75, 0.9].into_iter().enumerate() {
        let nu0 = (150.0 + 40.0 * i as f64 + delta) / n;
        let spec = stft(&sinusoid(sr as usize, nu0, 0.7, sr)?, &cfg);
        let t = spec.frames() / 2;
        let frame: Vec<f64> = (0..spec.bins())
            .map(|f| 10.0 * spec.data()[[f, t]].norm_sqr().max(1e-300).log10())
            .collect();
        let peaks = qifft_peaks(&frame, 40.0);
        let best = peaks
            .iter()
            .min_by(|a, b| (a.frequency - nu0).abs().total_cmp(&(b.frequency - nu0).abs()))
            .ok_or("no peak found")?;
        worst_freq = worst_freq.max((best.frequency - nu0).abs());
    }
    check!(worst_freq < 1e-4, "frequency error {worst_freq:.3e}");

    let mut worst_phase: f64 = 0.0;
    let nu0 = 321.37 / n;
    let spec = stft(&sinusoid(3 * sr as usize, nu0, 0.4, sr)?, &cfg);
    let nu = estimate_frequencies(&spec.power(), 40.0);
    let truth = PhaseField::from_complex(spec.data());
    let k = (nu0 * n).round() as usize;
    for f in k - 2..=k + 2 {
        for t in 4..spec.frames() - 4 {
            let predicted = unwrap_step(truth.values()[[f, t - 1]], nu.values()[[f, t]], cfg.hop());
            let err = ((predicted - truth.values()[[f, t]] + PI).rem_euclid(TAU) - PI).abs();
            worst_phase = worst_phase.max(err);
        }
    }
    check!(worst_phase < 0.05, "phase error {worst_phase:.4} rad");
    Ok(format!("worst frequency error {worst_freq:.2e}, worst phase step error {worst_phase:.4} rad"))
}

// ---------------------------------------------------------------------------
// 10. directional benchmark

fn criterion_10(bench: &Result<Bench, String>) -> Outcome {
    let bench = bench.as_ref().map_err(Clone::clone)?;
    let n = bench.rows.len() as f64;
    let mean = |f: &dyn Fn(&BenchRow) -> f64| bench.rows.iter().map(f).sum::<f64>() / n;
    let sdr = [mean(&|r| r.sdr[0]), mean(&|r| r.sdr[1]), mean(&|r| r.sdr[2])];
    let sir = [mean(&|r| r.sir[0]), mean(&|r| r.sir[1]), mean(&|r| r.sir[2])];
    let clamped: usize = bench.rows.iter().map(|r| r.q_clamped).sum();
    let summary = format!(
        "mean SDR cisnmf {:.2} / Wiener {:.2}; mean SIR AW {:.2} / Wiener {:.2}; {:.1} s, {clamped} q clamps",
        sdr[0],
        sdr[1],
        sir[2],
        sir[1],
        bench.elapsed.as_secs_f64()
    );
    check!(sdr[0] >= sdr[1], "{summary}");
    check!(sir[2] >= sir[1], "{summary}");
    within(bench.elapsed, 300.0, "benchmark")?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 11. BSS metrics fixtures

fn criterion_11() -> Outcome {
    const N: usize = 1000;
    let tone = |k: usize| -> Vec<f64> { (0..N).map(|n| (TAU * (k * n) as f64 / N as f64).sin()).collect() };
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let refs = vec![tone(5), tone(11)];
    let close = |got: f64, want: f64, what: &str| -> Result<(), String> {
        if (got - want).abs() <= 1e-6 {
            Ok(())
        } else {
            Err(format!("{what}: {got} dB, expected {want}"))
        }
    };

    let scaled = vec![tone(5).iter().map(|x| 2.0 * x).collect(), tone(11)];
    let s = bss_eval(&scaled, &refs).map_err(fail)?.scores[0];
    close(s.sdr, SCORE_CAP, "rescaled SDR")?;
    close(s.sir, SCORE_CAP, "rescaled SIR")?;
    close(s.sar, SCORE_CAP, "rescaled SAR")?;

    let noise: Vec<f64> = tone(23).iter().map(|x| 0.1 * x).collect();
    let s = bss_eval(&[add(&tone(5), &noise, 1.0), tone(11)], &refs).map_err(fail)?.scores[0];
    close(s.sdr, 20.0, "noise SDR")?;
    close(s.sar, 20.0, "noise SAR")?;
    close(s.sir, SCORE_CAP, "noise SIR")?;

    let s = bss_eval(&[add(&tone(5), &tone(11), 0.1), tone(11)], &refs).map_err(fail)?.scores[0];
    close(s.sdr, 20.0, "leak SDR")?;
    close(s.sir, 20.0, "leak SIR")?;
    close(s.sar, SCORE_CAP, "leak SAR")?;
    Ok(format!("leak fixture SDR {:.4} / SIR {:.4} / SAR {:.0}", s.sdr, s.sir, s.sar))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let bench = run_bench();
    let criteria: [Criterion; 11] = [
        ("kappa = 0 degeneracy", Box::new(criterion_1)),
        ("conservativity", Box::new(|| criterion_2(&bench))),
        ("majorizer suite", Box::new(criterion_3)),
        ("EM monotonicity", Box::new(criterion_4)),
        ("E-step oracle", Box::new(criterion_5)),
        ("moment matching", Box::new(criterion_6)),
        ("chi-squared fit", Box::new(criterion_7)),
        ("STFT round trip", Box::new(criterion_8)),
        ("QIFFT and unwrapping", Box::new(criterion_9)),
        ("directional benchmark", Box::new(|| criterion_10(&bench))),
        ("BSS metrics fixtures", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} [{tag}] {name}: {detail} ({:.2} s)",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
