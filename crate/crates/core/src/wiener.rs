//! Wiener and anisotropic Wiener filtering of a mixture from per-source
//! variances.

use ndarray::{Array2, Zip};

use crate::circular::anisotropy_params;
use crate::em::{ag_moments, e_step, SourceModel};
use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

/// Which single-shot filter to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Wiener,
    AnisotropicWiener { kappa: f64 },
}

/// `s_j = v_j / sum_k v_k * x` per bin.
pub fn wiener_filter(x: &ComplexSpectrogram, variances: &[Array2<f64>]) -> Result<Vec<ComplexSpectrogram>> {
    if variances.is_empty() {
        return Err(Error::invalid("variances", "at least one source is required"));
    }
    for v in variances {
        if v.dim() != x.data().dim() {
            return Err(Error::ShapeMismatch(format!(
                "variance {:?} vs mixture {:?}",
                v.dim(),
                x.data().dim()
            )));
        }
        if v.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::invalid("variances", "entries must be positive"));
        }
    }
    let mut total = variances[0].clone();
    for v in &variances[1..] {
        total += v;
    }
    variances
        .iter()
        .map(|v| {
            let data = Zip::from(x.data())
                .and(v)
                .and(&total)
                .map_collect(|&x, &v, &t| x * (v / t));
            x.with_data(data)
        })
        .collect()
}

/// Posterior means of anisotropic Gaussian sources built from `models` with
/// concentration `kappa`. No parameter is re-estimated.
pub fn anisotropic_wiener(
    x: &ComplexSpectrogram,
    models: &[SourceModel],
    kappa: f64,
) -> Result<Vec<ComplexSpectrogram>> {
    let coeffs = anisotropy_params(kappa)?;
    let moments: Vec<_> = models.iter().map(|m| ag_moments(m, &coeffs)).collect();
    e_step(x.data(), &moments)?
        .into_iter()
        .map(|p| x.with_data(p.m))
        .collect()
}

/// Applies `kind` using the variances (and, for the anisotropic filter, the
/// phases) carried by `models`.
pub fn apply_filter(
    x: &ComplexSpectrogram,
    models: &[SourceModel],
    kind: FilterKind,
) -> Result<Vec<ComplexSpectrogram>> {
    match kind {
        FilterKind::Wiener => {
            let v: Vec<_> = models.iter().map(|m| m.variance()).collect();
            wiener_filter(x, &v)
        }
        FilterKind::AnisotropicWiener { kappa } => anisotropic_wiener(x, models, kappa),
    }
}
