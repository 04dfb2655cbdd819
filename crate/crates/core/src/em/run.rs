use ndarray::{concatenate, s, Array2, Axis};
use num_complex::Complex64;

use super::estep::{conservativity_error, e_step, phase_corrected_stats, PosteriorMoments};
use super::moments::{ag_moments, AGMoments, SourceModel};
use super::mstep::{m_step_nmf, m_step_phase, PhaseFrameRange, PhaseUpdateRule};
use super::objective::map_objective;
use crate::circular::{anisotropy_params, AnisotropyCoefficients};
use crate::error::{Error, Result};
use crate::nmf::{isnmf_fit, NmfFactors};
use crate::phase::{estimate_frequencies, PhaseField, DEFAULT_PEAK_THRESHOLD_DB};
use crate::signal::ComplexSpectrogram;

/// Relative slack below which a drop of the objective is not counted.
pub const DECREASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub kappa: f64,
    pub tau: f64,
    pub em_iters: usize,
    pub warm_start_iters: usize,
    pub seed: u64,
    /// Multiplicative sweeps per NMF M-step.
    pub inner_sweeps: usize,
    /// Re-estimate the dictionaries too (blind mode).
    pub update_dictionaries: bool,
    pub phase_rule: PhaseUpdateRule,
    pub phase_range: PhaseFrameRange,
    pub peak_threshold_db: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            kappa: 0.5,
            tau: 5.0,
            em_iters: 100,
            warm_start_iters: 50,
            seed: 0,
            inner_sweeps: 1,
            update_dictionaries: false,
            phase_rule: PhaseUpdateRule::Approximate,
            phase_range: PhaseFrameRange::Full,
            peak_threshold_db: DEFAULT_PEAK_THRESHOLD_DB,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<AnisotropyCoefficients> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau", format!("{} must be finite and >= 0", self.tau)));
        }
        if !(self.peak_threshold_db >= 0.0) {
            return Err(Error::invalid(
                "peak_threshold_db",
                format!("{} must be >= 0", self.peak_threshold_db),
            ));
        }
        anisotropy_params(self.kappa)
    }
}

/// Diagnostics collected while iterating.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    /// Log-posterior before the first iteration and after each one.
    pub objective: Vec<f64>,
    /// Negative `q` entries clamped over the whole run.
    pub q_clamped: usize,
    /// Worst per-bin conservativity error of every E-step, final one included.
    pub conservativity: Vec<f64>,
    /// Iterations where the objective dropped by more than [`DECREASE_TOLERANCE`].
    pub decrease_events: usize,
}

#[derive(Debug, Clone)]
pub struct Separation {
    pub models: Vec<SourceModel>,
    pub estimates: Vec<ComplexSpectrogram>,
    pub report: RunReport,
}

/// IS-NMF on the mixture power with the dictionaries stacked side by side
/// and held fixed; returns one factor pair per source.
pub fn warm_start(
    power: &Array2<f64>,
    dictionaries: &[Array2<f64>],
    iters: usize,
    seed: u64,
) -> Result<Vec<NmfFactors>> {
    if dictionaries.is_empty() {
        return Err(Error::invalid("dictionaries", "at least one source is required"));
    }
    for (j, w) in dictionaries.iter().enumerate() {
        if w.nrows() != power.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "dictionary {j} has {} bins, mixture has {}",
                w.nrows(),
                power.nrows()
            )));
        }
    }
    let views: Vec<_> = dictionaries.iter().map(|w| w.view()).collect();
    let stacked = concatenate(Axis(1), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let fit = isnmf_fit(power, stacked.ncols(), iters, seed, Some(&stacked))?;
    let mut out = Vec::with_capacity(dictionaries.len());
    let mut row = 0;
    for w in dictionaries {
        let k = w.ncols();
        out.push(NmfFactors::new(
            fit.w.slice(s![.., row..row + k]).to_owned(),
            fit.h.slice(s![row..row + k, ..]).to_owned(),
        )?);
        row += k;
    }
    Ok(out)
}

/// Source models from warm-start factors: frequencies estimated once on each
/// source variance, phases set to the mixture phase.
pub fn initial_models(
    x: &ComplexSpectrogram,
    factors: Vec<NmfFactors>,
    peak_threshold_db: f64,
) -> Result<Vec<SourceModel>> {
    let mu = PhaseField::from_complex(x.data());
    factors
        .into_iter()
        .enumerate()
        .map(|(j, f)| {
            let nu = estimate_frequencies(&f.product(), peak_threshold_db);
            SourceModel::new(format!("source{j}"), f, mu.clone(), nu)
        })
        .collect()
}

/// Full pipeline: warm start, model initialisation and the EM iterations.
pub fn run_complex_isnmf(
    x: &ComplexSpectrogram,
    dictionaries: &[Array2<f64>],
    cfg: &EmConfig,
) -> Result<Separation> {
    cfg.validate()?;
    let factors = warm_start(&x.power(), dictionaries, cfg.warm_start_iters, cfg.seed)?;
    let models = initial_models(x, factors, cfg.peak_threshold_db)?;
    run_em(x, models, cfg)
}

fn moments_of(models: &[SourceModel], coeffs: &AnisotropyCoefficients) -> Vec<AGMoments> {
    models.iter().map(|m| ag_moments(m, coeffs)).collect()
}

/// The EM iterations from given starting models, ending with one extra
/// E-step whose posterior means are the source estimates.
pub fn run_em(x: &ComplexSpectrogram, mut models: Vec<SourceModel>, cfg: &EmConfig) -> Result<Separation> {
    let coeffs = cfg.validate()?;
    let data = x.data();
    for m in &models {
        if m.dim() != data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "model {} is {:?}, mixture is {:?}",
                m.name,
                m.dim(),
                data.dim()
            )));
        }
    }
    let hop = x.config().hop();
    let mut report = RunReport::default();
    report
        .objective
        .push(map_objective(data, &models, &coeffs, cfg.tau, hop)?);

    for _ in 0..cfg.em_iters {
        let posts = e_step(data, &moments_of(&models, &coeffs))?;
        report.conservativity.push(conservativity_error(data, &posts));
        for (model, post) in models.iter_mut().zip(&posts) {
            update_source(model, post, &coeffs, cfg, hop, &mut report)?;
        }
        let value = map_objective(data, &models, &coeffs, cfg.tau, hop)?;
        let prev = *report.objective.last().unwrap();
        if value < prev - DECREASE_TOLERANCE * prev.abs() {
            report.decrease_events += 1;
        }
        report.objective.push(value);
    }

    let posts = e_step(data, &moments_of(&models, &coeffs))?;
    report.conservativity.push(conservativity_error(data, &posts));
    let estimates = posts
        .into_iter()
        .map(|p| x.with_data(p.m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Separation {
        models,
        estimates,
        report,
    })
}

fn update_source(
    model: &mut SourceModel,
    post: &PosteriorMoments,
    coeffs: &AnisotropyCoefficients,
    cfg: &EmConfig,
    hop: usize,
    report: &mut RunReport,
) -> Result<()> {
    let stats = phase_corrected_stats(post, &model.mu, coeffs)?;
    report.q_clamped += stats.clamped;
    model.factors = m_step_nmf(
        &model.factors,
        &stats.p,
        &stats.q,
        cfg.inner_sweeps,
        cfg.update_dictionaries,
    )?;
    let v = model.variance();
    model.mu = m_step_phase(
        &model.mu,
        &model.nu,
        &v,
        post,
        coeffs,
        cfg.tau,
        hop,
        cfg.phase_rule,
        cfg.phase_range,
    )?;
    Ok(())
}

/// Sum of the source estimates, for checking against the mixture.
pub fn sum_estimates(estimates: &[ComplexSpectrogram]) -> Option<Array2<Complex64>> {
    let mut it = estimates.iter();
    let mut acc = it.next()?.data().clone();
    for e in it {
        acc += e.data();
    }
    Some(acc)
}
