//! Complex ISNMF: anisotropic Gaussian source moments built from NMF
//! variances and phase fields, and their generalized EM estimation.

mod estep;
mod moments;
mod mstep;
mod objective;
mod run;

pub use estep::{
    conservativity_error, e_step, phase_corrected_stats, PhaseCorrectedStats, PosteriorMoments,
    DET_FLOOR,
};
pub use moments::{ag_moments, ag_moments_from, mix_moments, AGMoments, SourceModel};
pub use mstep::{
    m_step_nmf, m_step_phase, majorizer_w, maximize_phase_functional, nmf_functional,
    phase_coefficients, phase_functional, PhaseFrameRange, PhaseUpdateRule,
};
pub use objective::{log_likelihood, map_objective};
pub use run::{
    initial_models, run_complex_isnmf, run_em, sum_estimates, warm_start, EmConfig, RunReport,
    Separation, DECREASE_TOLERANCE,
};
