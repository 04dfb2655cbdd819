use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::estep::PosteriorMoments;
use crate::circular::{wrap_angle, AnisotropyCoefficients};
use crate::error::{Error, Result};
use crate::nmf::{floor, normalize_in_place, NmfFactors};
use crate::phase::{FrequencyField, PhaseField};

/// `sum log v + p / v - q / sqrt(v)`, the part of the EM surrogate that
/// depends on one source's NMF factors (negated).
pub fn nmf_functional(v: &Array2<f64>, p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    Zip::from(v)
        .and(p)
        .and(q)
        .fold(0.0, |acc, &v, &p, &q| acc + v.ln() + p / v - q / v.sqrt())
}

/// Auxiliary function for the `W` update at the point `w_tilde`, with `H`
/// held fixed. Jensen's inequality bounds `p / v`, tangents bound `log v` and
/// `-q / sqrt(v)`; the constants make the bound touch at `w = w_tilde`.
pub fn majorizer_w(
    w: &Array2<f64>,
    h: &Array2<f64>,
    w_tilde: &Array2<f64>,
    p: &Array2<f64>,
    q: &Array2<f64>,
) -> f64 {
    let vt = w_tilde.dot(h);
    let v = w.dot(h);
    let mut total = 0.0;
    for ((f, t), &vt_ft) in vt.indexed_iter() {
        let (p, q) = (p[[f, t]], q[[f, t]]);
        let mut jensen = 0.0;
        for k in 0..w.ncols() {
            let wt = w_tilde[[f, k]];
            jensen += wt * wt / w[[f, k]] * h[[k, t]];
        }
        let v_ft = v[[f, t]];
        total += p * jensen / (vt_ft * vt_ft)
            + v_ft * (1.0 / vt_ft + 0.5 * q * vt_ft.powf(-1.5))
            + vt_ft.ln()
            - 1.0
            - 1.5 * q / vt_ft.sqrt();
    }
    total
}

fn update_h(f: &mut NmfFactors, p: &Array2<f64>, q: &Array2<f64>) {
    let v = f.product();
    let (num, den) = ratio_terms(&v, p, q);
    let ratio = f.w.t().dot(&num) / f.w.t().dot(&den);
    Zip::from(&mut f.h).and(&ratio).for_each(|h, &r| *h = floor(*h * r.sqrt()));
}

fn update_w(f: &mut NmfFactors, p: &Array2<f64>, q: &Array2<f64>) {
    let v = f.product();
    let (num, den) = ratio_terms(&v, p, q);
    let ratio = num.dot(&f.h.t()) / den.dot(&f.h.t());
    Zip::from(&mut f.w).and(&ratio).for_each(|w, &r| *w = floor(*w * r.sqrt()));
}

fn ratio_terms(v: &Array2<f64>, p: &Array2<f64>, q: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let num = Zip::from(v).and(p).map_collect(|&v, &p| p / (v * v));
    let den = Zip::from(v)
        .and(q)
        .map_collect(|&v, &q| 1.0 / v + 0.5 * q / (v * v.sqrt()));
    (num, den)
}

/// Majorize-minimize sweeps on `H` (and `W` unless it is a fixed dictionary),
/// followed by column normalisation when `W` moves. `q` must be `>= 0`.
pub fn m_step_nmf(
    factors: &NmfFactors,
    p: &Array2<f64>,
    q: &Array2<f64>,
    n_inner: usize,
    update_dictionary: bool,
) -> Result<NmfFactors> {
    let dim = (factors.w.nrows(), factors.h.ncols());
    if p.dim() != dim || q.dim() != dim {
        return Err(Error::ShapeMismatch(format!(
            "factors give {dim:?}, P is {:?}, Q is {:?}",
            p.dim(),
            q.dim()
        )));
    }
    if q.iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("q", "must be clamped to nonnegative values"));
    }
    let mut f = factors.clone();
    for _ in 0..n_inner {
        update_h(&mut f, p, q);
        if update_dictionary {
            update_w(&mut f, p, q);
        }
    }
    if update_dictionary {
        normalize_in_place(&mut f);
    }
    Ok(f)
}

/// How each phase location is chosen inside the sequential sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseUpdateRule {
    /// `mu = arg(beta_tilde)`, ignoring the `alpha` term.
    #[default]
    Approximate,
    /// Numerical maximisation of the full per-bin functional. Slow; meant for
    /// checking the approximate rule and the monotonicity of the algorithm.
    ExactGrid,
}

/// Which frames the phase sweep visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseFrameRange {
    /// Frames `1..T`, the last one using only its backward neighbour.
    #[default]
    Full,
    /// Frames `1..T-1`, leaving the last frame untouched.
    SkipLast,
}

/// The per-bin coefficients of `Re(alpha e^{-2i mu} + beta e^{-i mu})`:
/// `alpha = rho (c' + m'^2) / (D v)` and
/// `beta = 2 l (1 - l^2 - rho) m' / (D sqrt(v))`.
pub fn phase_coefficients(
    post: &PosteriorMoments,
    v: &Array2<f64>,
    coeffs: &AnisotropyCoefficients,
) -> (Array2<Complex64>, Array2<Complex64>) {
    let (l, r) = (coeffs.lambda(), coeffs.rho());
    let d = coeffs.determinant_factor();
    let alpha = Zip::from(&post.m)
        .and(&post.c)
        .and(v)
        .map_collect(|&m, &c, &v| (c + m * m) * (r / (d * v)));
    let bscale = 2.0 * l * (1.0 - l * l - r) / d;
    let beta = Zip::from(&post.m)
        .and(v)
        .map_collect(|&m, &v| m * (bscale / v.sqrt()));
    (alpha, beta)
}

/// `Re(alpha e^{-2i mu} + beta e^{-i mu})`.
pub fn phase_functional(alpha: Complex64, beta: Complex64, mu: f64) -> f64 {
    (alpha * Complex64::from_polar(1.0, -2.0 * mu) + beta * Complex64::from_polar(1.0, -mu)).re
}

const GRID: usize = 256;

/// Global maximiser of [`phase_functional`]: grid scan, golden-section
/// refinement of every grid-local maximum, and `current` kept unless beaten.
pub fn maximize_phase_functional(alpha: Complex64, beta: Complex64, current: f64) -> f64 {
    let g = |mu: f64| phase_functional(alpha, beta, mu);
    let step = TAU / GRID as f64;
    let vals: Vec<f64> = (0..GRID).map(|i| g(i as f64 * step)).collect();
    let mut best = (g(current), current);
    for i in 0..GRID {
        let (prev, next) = (vals[(i + GRID - 1) % GRID], vals[(i + 1) % GRID]);
        if vals[i] >= prev && vals[i] >= next {
            let mu = golden_max(&g, (i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
            let val = g(mu);
            if val > best.0 {
                best = (val, mu);
            }
        }
    }
    wrap_angle(best.1)
}

fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > 1e-12 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

/// Sequential phase update over frames for one source. `v` must be the
/// source variance after the NMF step. Frame 0 is never changed; a zero
/// `beta_tilde` keeps the previous value.
#[allow(clippy::too_many_arguments)]
pub fn m_step_phase(
    mu: &PhaseField,
    nu: &FrequencyField,
    v: &Array2<f64>,
    post: &PosteriorMoments,
    coeffs: &AnisotropyCoefficients,
    tau: f64,
    hop: usize,
    rule: PhaseUpdateRule,
    range: PhaseFrameRange,
) -> Result<PhaseField> {
    let dim = mu.dim();
    if nu.dim() != dim || v.dim() != dim || post.m.dim() != dim {
        return Err(Error::ShapeMismatch(format!(
            "phase {dim:?}, frequency {:?}, variance {:?}, posterior {:?}",
            nu.dim(),
            v.dim(),
            post.m.dim()
        )));
    }
    let (bins, frames) = dim;
    let (alpha, beta) = phase_coefficients(post, v, coeffs);
    let mut out = mu.values().clone();
    let nu = nu.values();
    let shift = TAU * hop as f64;
    let last = match range {
        PhaseFrameRange::Full => frames,
        PhaseFrameRange::SkipLast => frames.saturating_sub(1),
    };
    for f in 0..bins {
        for t in 1..last {
            let mut bt = beta[[f, t]];
            if tau != 0.0 {
                bt += Complex64::from_polar(tau, out[[f, t - 1]] + shift * nu[[f, t]]);
                if t + 1 < frames {
                    bt += Complex64::from_polar(tau, out[[f, t + 1]] - shift * nu[[f, t + 1]]);
                }
            }
            out[[f, t]] = match rule {
                PhaseUpdateRule::Approximate => {
                    if bt.norm_sqr() == 0.0 {
                        out[[f, t]]
                    } else {
                        wrap_angle(bt.arg())
                    }
                }
                PhaseUpdateRule::ExactGrid => {
                    maximize_phase_functional(alpha[[f, t]], bt, out[[f, t]])
                }
            };
        }
    }
    PhaseField::new(out)
}
