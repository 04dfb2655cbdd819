use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::moments::{mix_moments, AGMoments};
use crate::circular::AnisotropyCoefficients;
use crate::error::{Error, Result};
use crate::phase::PhaseField;

/// Relative floor on the mixture determinant, as a fraction of `gamma_x^2`.
pub const DET_FLOOR: f64 = 1e-24;

/// Posterior mean, variance and relation term of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub m: Array2<Complex64>,
    pub gamma: Array2<f64>,
    pub c: Array2<Complex64>,
}

/// `gamma_x^2 - |c_x|^2`, floored relative to `gamma_x^2`.
#[inline]
pub(crate) fn mixture_determinant(gamma: f64, c: Complex64) -> f64 {
    (gamma * gamma - c.norm_sqr()).max(DET_FLOOR * gamma * gamma)
}

/// Anisotropic Wiener conditioning of every source on the mixture.
///
/// With `G = Gamma_j Gamma_x^{-1}` acting as `z -> u z + w conj(z)`, the
/// posterior mean is `m_j + G (x - m_x)` and the posterior covariance is
/// `G Gamma_o` where `Gamma_o = Gamma_x - Gamma_j` gathers the other sources.
pub fn e_step(x: &Array2<Complex64>, moments: &[AGMoments]) -> Result<Vec<PosteriorMoments>> {
    let mix = mix_moments(moments)?;
    if x.dim() != mix.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mixture {:?} vs moments {:?}",
            x.dim(),
            mix.dim()
        )));
    }
    if let Some((g, c)) = Zip::from(&mix.gamma)
        .and(&mix.c)
        .fold(None, |bad, &g, &c| bad.or((!(g > 0.0) || !(g * g > c.norm_sqr())).then_some((g, c))))
    {
        return Err(Error::NotPositiveDefinite {
            gamma: g,
            relation_abs: c.norm(),
        });
    }

    let dim = x.dim();
    let mut out: Vec<PosteriorMoments> = moments
        .iter()
        .map(|_| PosteriorMoments {
            m: Array2::zeros(dim),
            gamma: Array2::zeros(dim),
            c: Array2::zeros(dim),
        })
        .collect();

    for ((f, t), &xv) in x.indexed_iter() {
        let (gx, cx) = (mix.gamma[[f, t]], mix.c[[f, t]]);
        let det = mixture_determinant(gx, cx);
        let e = xv - mix.m[[f, t]];
        for (src, post) in moments.iter().zip(out.iter_mut()) {
            let (g, c) = (src.gamma[[f, t]], src.c[[f, t]]);
            let u = (g * gx - (c * cx.conj()).re) / det;
            let u = Complex64::new(u, (-(c * cx.conj()).im) / det);
            let w = (c * gx - cx * g) / det;
            let (go, co) = (gx - g, cx - c);
            post.m[[f, t]] = src.m[[f, t]] + u * e + w * e.conj();
            post.gamma[[f, t]] = (u * go + w * co.conj()).re;
            post.c[[f, t]] = u * co + w * go;
        }
    }
    Ok(out)
}

/// Largest per-bin `|sum_j m'_j - x| / max(|x|, sum_j |m'_j|)`.
pub fn conservativity_error(x: &Array2<Complex64>, posts: &[PosteriorMoments]) -> f64 {
    let mut worst = 0.0f64;
    for ((f, t), &xv) in x.indexed_iter() {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut scale = xv.norm();
        let mut mags = 0.0;
        for p in posts {
            sum += p.m[[f, t]];
            mags += p.m[[f, t]].norm();
        }
        scale = scale.max(mags);
        if scale > 0.0 {
            worst = worst.max((sum - xv).norm() / scale);
        }
    }
    worst
}

/// The two statistics the NMF step needs from a posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCorrectedStats {
    /// Phase-corrected posterior power, `>= 0`.
    pub p: Array2<f64>,
    /// Phase-corrected posterior magnitude, clamped at 0.
    pub q: Array2<f64>,
    /// Number of entries of `q` that were negative before clamping.
    pub clamped: usize,
}

/// `p = [(1 - l^2)(gamma' + |m'|^2) - rho Re(e^{-2i mu}(c' + m'^2))] / D` and
/// `q = 2 l / (1 - l^2 + rho) Re(e^{-i mu} m')`, with `D = (1 - l^2)^2 - rho^2`.
pub fn phase_corrected_stats(
    post: &PosteriorMoments,
    mu: &PhaseField,
    coeffs: &AnisotropyCoefficients,
) -> Result<PhaseCorrectedStats> {
    if post.m.dim() != mu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "posterior {:?} vs phase field {:?}",
            post.m.dim(),
            mu.dim()
        )));
    }
    let (l, r) = (coeffs.lambda(), coeffs.rho());
    let a = 1.0 - l * l;
    let d = coeffs.determinant_factor();
    let qscale = 2.0 * l / (a + r);
    let p = Zip::from(&post.m)
        .and(&post.gamma)
        .and(&post.c)
        .and(mu.values())
        .map_collect(|&m, &g, &c, &mu| {
            let rot = Complex64::from_polar(1.0, -2.0 * mu);
            let p = (a * (g + m.norm_sqr()) - r * (rot * (c + m * m)).re) / d;
            debug_assert!(p >= -1e-9 * (g.abs() + m.norm_sqr()) - 1e-30, "p = {p}");
            p.max(0.0)
        });
    let mut clamped = 0;
    let q = Zip::from(&post.m).and(mu.values()).map_collect(|&m, &mu| {
        let q = qscale * (Complex64::from_polar(1.0, -mu) * m).re;
        if q < 0.0 {
            clamped += 1;
            0.0
        } else {
            q
        }
    });
    Ok(PhaseCorrectedStats { p, q, clamped })
}
