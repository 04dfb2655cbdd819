use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use super::estep::mixture_determinant;
use super::moments::{ag_moments, mix_moments, AGMoments, SourceModel};
use crate::circular::AnisotropyCoefficients;
use crate::error::{Error, Result};
use crate::phase::phase_log_prior;

/// Log-density of the mixture under the summed source moments:
/// `sum -log pi - log(det)/2 - y/2` with
/// `y = 2 (gamma |e|^2 - Re(conj(c) e^2)) / det` and `e = x - m`.
pub fn log_likelihood(x: &Array2<Complex64>, mix: &AGMoments) -> Result<f64> {
    if x.dim() != mix.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mixture {:?} vs moments {:?}",
            x.dim(),
            mix.dim()
        )));
    }
    let mut total = 0.0;
    for ((f, t), &xv) in x.indexed_iter() {
        let (g, c) = (mix.gamma[[f, t]], mix.c[[f, t]]);
        if !(g > 0.0) || !(g * g > c.norm_sqr()) {
            return Err(Error::NotPositiveDefinite {
                gamma: g,
                relation_abs: c.norm(),
            });
        }
        let det = mixture_determinant(g, c);
        let e = xv - mix.m[[f, t]];
        let y = 2.0 * (g * e.norm_sqr() - (c.conj() * e * e).re) / det;
        total += -PI.ln() - 0.5 * det.ln() - 0.5 * y;
    }
    Ok(total)
}

/// Log-posterior (up to a constant) of the model given the mixture: the
/// mixture log-likelihood plus every source's phase log-prior.
pub fn map_objective(
    x: &Array2<Complex64>,
    models: &[SourceModel],
    coeffs: &AnisotropyCoefficients,
    tau: f64,
    hop: usize,
) -> Result<f64> {
    let moments: Vec<AGMoments> = models.iter().map(|m| ag_moments(m, coeffs)).collect();
    let mut total = log_likelihood(x, &mix_moments(&moments)?)?;
    for m in models {
        total += phase_log_prior(&m.mu, &m.nu, tau, hop)?;
    }
    Ok(total)
}
