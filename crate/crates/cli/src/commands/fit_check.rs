use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use cisnmf::circular::{chi2_2_cdf, chi2_normalize, ks_distance};
use cisnmf::em::{ag_moments, initial_models, mix_moments, run_em, warm_start, EmConfig};
use cisnmf::phase::{PhaseField, DEFAULT_PEAK_THRESHOLD_DB};
use cisnmf::signal::{read_wav, stft, ComplexSpectrogram};
use ndarray::Zip;

use crate::commands::load_dictionaries;
use crate::config::{keys, ConfigFile, StftArgs};
use crate::error::{CliError, Result};
use crate::output::{emit, OutputSet};

pub const HISTOGRAM_BINS: usize = 64;
pub const HISTOGRAM_MAX: f64 = 12.0;

/// Comma-separated list of concentrations.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaList(pub Vec<f64>);

impl FromStr for KappaList {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|k| {
                k.trim().parse::<f64>().map_err(|e| CliError::Value {
                    key: "kappas".into(),
                    detail: format!("`{k}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(KappaList)
    }
}

impl fmt::Display for KappaList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Check how well the model fits a mixture: run the separation from the
/// true source phases with no unwrapping prior, normalise every bin by the
/// fitted mixture covariance and compare with a chi-squared law on two
/// degrees of freedom.
#[derive(Debug, Args)]
pub struct FitCheckArgs {
    /// Mixture WAV file
    pub mixture: PathBuf,
    /// Isolated source WAVs, in the same order as the dictionaries
    #[arg(long = "source", required = true)]
    pub sources: Vec<PathBuf>,
    /// Dictionary files, one per source
    #[arg(long = "dict", required = true)]
    pub dictionaries: Vec<PathBuf>,
    /// Concentrations to test [default: 0,0.5,1,5]
    #[arg(long)]
    pub kappas: Option<KappaList>,
    /// EM iterations [default: 100]
    #[arg(long)]
    pub em_iters: Option<usize>,
    /// IS-NMF iterations before EM [default: 50]
    #[arg(long)]
    pub warm_start_iters: Option<usize>,
    /// [default: 40]
    #[arg(long)]
    pub peak_threshold_db: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub stft: StftArgs,
    /// Write the CSV here instead of stdout
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Optional `key = value` file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// KS distance and histogram of the normalised variable for one `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub kappa: f64,
    pub ks: f64,
    /// Fraction of all bins falling in each of [`HISTOGRAM_BINS`] equal cells
    /// over `[0, HISTOGRAM_MAX)`.
    pub histogram: Vec<f64>,
}

pub fn histogram(ys: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; HISTOGRAM_BINS];
    let width = HISTOGRAM_MAX / HISTOGRAM_BINS as f64;
    for &y in ys {
        let cell = (y / width).floor();
        if (0.0..HISTOGRAM_BINS as f64).contains(&cell) {
            h[cell as usize] += 1.0;
        }
    }
    let n = ys.len().max(1) as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

pub fn fit_row(
    x: &ComplexSpectrogram,
    dictionaries: &[ndarray::Array2<f64>],
    true_phases: &[PhaseField],
    base: &EmConfig,
    kappa: f64,
) -> Result<FitRow> {
    let cfg = EmConfig { kappa, tau: 0.0, ..base.clone() };
    let coeffs = cfg.validate()?;
    let factors = warm_start(&x.power(), dictionaries, cfg.warm_start_iters, cfg.seed)?;
    let mut models = initial_models(x, factors, cfg.peak_threshold_db)?;
    for (m, mu) in models.iter_mut().zip(true_phases) {
        m.mu = mu.clone();
    }
    let fit = run_em(x, models, &cfg)?;
    let moments: Vec<_> = fit.models.iter().map(|m| ag_moments(m, &coeffs)).collect();
    let mix = mix_moments(&moments)?;
    let mut ys = Vec::with_capacity(x.data().len());
    let mut failure = None;
    Zip::from(x.data())
        .and(&mix.m)
        .and(&mix.gamma)
        .and(&mix.c)
        .for_each(|&x, &m, &g, &c| match chi2_normalize(x, m, g, c) {
            Ok(y) => ys.push(y),
            Err(e) => failure = Some(e),
        });
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(FitRow {
        kappa,
        ks: ks_distance(&ys, chi2_2_cdf),
        histogram: histogram(&ys),
    })
}

pub fn run(args: &FitCheckArgs) -> Result<()> {
    let file = ConfigFile::load(
        args.config.as_deref(),
        &keys(&["kappas", "em-iters", "warm-start-iters", "peak-threshold-db", "seed"]),
    )?;
    let defaults = EmConfig::default();
    let kappas = file.resolve(args.kappas.clone(), "kappas", KappaList(vec![0.0, 0.5, 1.0, 5.0]))?;
    let base = EmConfig {
        em_iters: file.resolve(args.em_iters, "em-iters", defaults.em_iters)?,
        warm_start_iters: file.resolve(args.warm_start_iters, "warm-start-iters", defaults.warm_start_iters)?,
        peak_threshold_db: file.resolve(args.peak_threshold_db, "peak-threshold-db", DEFAULT_PEAK_THRESHOLD_DB)?,
        seed: file.resolve(args.seed, "seed", defaults.seed)?,
        ..defaults
    };
    let stft_settings = args.stft.resolve(&file)?;
    if args.sources.len() != args.dictionaries.len() {
        return Err(CliError::Usage(format!(
            "{} sources for {} dictionaries",
            args.sources.len(),
            args.dictionaries.len()
        )));
    }

    let wave = read_wav(&args.mixture)?;
    let cfg = stft_settings.config(wave.sample_rate())?;
    let x = stft(&wave, &cfg);
    let dictionaries = load_dictionaries(&args.dictionaries, &x)?;
    let mut true_phases = Vec::new();
    for p in &args.sources {
        let s = read_wav(p)?;
        if s.len() != wave.len() {
            return Err(CliError::Usage(format!(
                "{} has {} samples, the mixture {}",
                p.display(),
                s.len(),
                wave.len()
            )));
        }
        true_phases.push(PhaseField::from_complex(stft(&s, &cfg).data()));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["kappa".to_string(), "ks".to_string()];
    header.extend((0..HISTOGRAM_BINS).map(|i| format!("bin_{i}")));
    csv.write_record(&header)?;
    for &kappa in &kappas.0 {
        let row = fit_row(&x, &dictionaries, &true_phases, &base, kappa)?;
        let mut record = vec![row.kappa.to_string(), row.ks.to_string()];
        record.extend(row.histogram.iter().map(f64::to_string));
        csv.write_record(&record)?;
    }
    let bytes = csv.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))?;
    let mut outputs = OutputSet::new();
    emit(&mut outputs, args.output.as_deref(), &bytes)?;
    outputs.commit();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_list_parses() {
        assert_eq!("0, 0.5,1,5".parse::<KappaList>().unwrap().0, vec![0.0, 0.5, 1.0, 5.0]);
        assert!("0,x".parse::<KappaList>().is_err());
        assert_eq!(KappaList(vec![0.0, 0.5]).to_string(), "0,0.5");
    }

    #[test]
    fn histogram_cells_and_mass() {
        let h = histogram(&[0.0, 0.1, 11.99, 12.0, 30.0]);
        assert_eq!(h.len(), HISTOGRAM_BINS);
        assert_eq!(h[0], 0.4);
        assert_eq!(h[HISTOGRAM_BINS - 1], 0.2);
        assert!((h.iter().sum::<f64>() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn reference_cdf_at_two() {
        assert!((chi2_2_cdf(2.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((chi2_2_cdf(2.0) - 0.6321).abs() < 1e-4);
    }
}
