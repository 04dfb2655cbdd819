use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::circular::AnisotropyCoefficients;
use crate::error::{Error, Result};
use crate::nmf::NmfFactors;
use crate::phase::{FrequencyField, PhaseField};

/// One source of the model: NMF factors for its variance, a phase location
/// field and the frequency field used by the phase prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub name: String,
    pub factors: NmfFactors,
    pub mu: PhaseField,
    pub nu: FrequencyField,
}

impl SourceModel {
    pub fn new(
        name: impl Into<String>,
        factors: NmfFactors,
        mu: PhaseField,
        nu: FrequencyField,
    ) -> Result<Self> {
        let dim = (factors.w.nrows(), factors.h.ncols());
        if mu.dim() != dim || nu.dim() != dim {
            return Err(Error::ShapeMismatch(format!(
                "factors give {dim:?}, phase field {:?}, frequency field {:?}",
                mu.dim(),
                nu.dim()
            )));
        }
        Ok(SourceModel {
            name: name.into(),
            factors,
            mu,
            nu,
        })
    }

    /// `W H`, floored.
    pub fn variance(&self) -> Array2<f64> {
        self.factors.product()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mu.dim()
    }
}

/// Per-bin mean, variance and relation term of an anisotropic Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct AGMoments {
    pub m: Array2<Complex64>,
    pub gamma: Array2<f64>,
    pub c: Array2<Complex64>,
}

impl AGMoments {
    pub fn dim(&self) -> (usize, usize) {
        self.gamma.dim()
    }

    /// Smallest `gamma^2 - |c|^2` over the grid.
    pub fn min_determinant(&self) -> f64 {
        Zip::from(&self.gamma)
            .and(&self.c)
            .fold(f64::INFINITY, |acc, &g, c| acc.min(g * g - c.norm_sqr()))
    }
}

/// Moments of a source from its variance grid and phase locations:
/// `m = lambda sqrt(v) e^{i mu}`, `gamma = (1 - lambda^2) v`, `c = rho v e^{2 i mu}`.
pub fn ag_moments_from(
    v: &Array2<f64>,
    mu: &PhaseField,
    coeffs: &AnisotropyCoefficients,
) -> Result<AGMoments> {
    if v.dim() != mu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "variance {:?} vs phase field {:?}",
            v.dim(),
            mu.dim()
        )));
    }
    let (l, r) = (coeffs.lambda(), coeffs.rho());
    let m = Zip::from(v)
        .and(mu.values())
        .map_collect(|&v, &mu| Complex64::from_polar(l * v.sqrt(), mu));
    let gamma = v.mapv(|v| (1.0 - l * l) * v);
    let c = Zip::from(v)
        .and(mu.values())
        .map_collect(|&v, &mu| Complex64::from_polar(r * v, 2.0 * mu));
    Ok(AGMoments { m, gamma, c })
}

pub fn ag_moments(model: &SourceModel, coeffs: &AnisotropyCoefficients) -> AGMoments {
    ag_moments_from(&model.variance(), &model.mu, coeffs).expect("SourceModel shapes are checked")
}

/// Entrywise sums over sources.
pub fn mix_moments(per_source: &[AGMoments]) -> Result<AGMoments> {
    let first = per_source
        .first()
        .ok_or_else(|| Error::invalid("per_source", "at least one source is required"))?;
    let mut mix = first.clone();
    for s in &per_source[1..] {
        if s.dim() != mix.dim() {
            return Err(Error::ShapeMismatch(format!(
                "source moments {:?} vs {:?}",
                s.dim(),
                mix.dim()
            )));
        }
        mix.m += &s.m;
        mix.gamma += &s.gamma;
        mix.c += &s.c;
    }
    Ok(mix)
}
