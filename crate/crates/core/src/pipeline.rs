//! End-to-end separation of a mixture spectrogram with one of the three
//! methods, from per-source dictionaries.

use std::str::FromStr;

use ndarray::Array2;

use crate::em::{initial_models, run_complex_isnmf, warm_start, EmConfig, RunReport, SourceModel};
use crate::error::{Error, Result};
use crate::phase::{predicted_phases, PhaseField};
use crate::signal::ComplexSpectrogram;
use crate::wiener::{anisotropic_wiener, wiener_filter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cisnmf,
    Wiener,
    AnisotropicWiener,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cisnmf => "cisnmf",
            Method::Wiener => "wiener",
            Method::AnisotropicWiener => "aw",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cisnmf" => Ok(Method::Cisnmf),
            "wiener" => Ok(Method::Wiener),
            "aw" => Ok(Method::AnisotropicWiener),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Settings shared by the three methods. `em.warm_start_iters` drives the
/// complex ISNMF warm start, `baseline_iters` the IS-NMF run the two filters
/// take their variances from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub method: Method,
    pub em: EmConfig,
    pub baseline_iters: usize,
    /// Concentration used by the anisotropic Wiener filter.
    pub aw_kappa: f64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            method: Method::Cisnmf,
            em: EmConfig::default(),
            baseline_iters: 150,
            aw_kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparationOutput {
    pub estimates: Vec<ComplexSpectrogram>,
    /// Present for complex ISNMF only.
    pub report: Option<RunReport>,
}

/// Warm-start models for the filters: IS-NMF variances, frequencies from
/// them, and phases unwrapped one step from the previous mixture frame.
pub fn baseline_models(
    x: &ComplexSpectrogram,
    dictionaries: &[Array2<f64>],
    iters: usize,
    seed: u64,
    peak_threshold_db: f64,
) -> Result<Vec<SourceModel>> {
    let factors = warm_start(&x.power(), dictionaries, iters, seed)?;
    let mut models = initial_models(x, factors, peak_threshold_db)?;
    let anchor = PhaseField::from_complex(x.data());
    for m in &mut models {
        m.mu = predicted_phases(&anchor, &m.nu, x.config().hop())?;
    }
    Ok(models)
}

pub fn separate(
    x: &ComplexSpectrogram,
    dictionaries: &[Array2<f64>],
    cfg: &SeparationConfig,
) -> Result<SeparationOutput> {
    match cfg.method {
        Method::Cisnmf => {
            let out = run_complex_isnmf(x, dictionaries, &cfg.em)?;
            Ok(SeparationOutput {
                estimates: out.estimates,
                report: Some(out.report),
            })
        }
        Method::Wiener => {
            let factors = warm_start(&x.power(), dictionaries, cfg.baseline_iters, cfg.em.seed)?;
            let v: Vec<_> = factors.iter().map(|f| f.product()).collect();
            Ok(SeparationOutput {
                estimates: wiener_filter(x, &v)?,
                report: None,
            })
        }
        Method::AnisotropicWiener => {
            let models = baseline_models(
                x,
                dictionaries,
                cfg.baseline_iters,
                cfg.em.seed,
                cfg.em.peak_threshold_db,
            )?;
            Ok(SeparationOutput {
                estimates: anisotropic_wiener(x, &models, cfg.aw_kappa)?,
                report: None,
            })
        }
    }
}
