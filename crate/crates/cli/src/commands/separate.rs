use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use cisnmf::em::{EmConfig, PhaseFrameRange};
use cisnmf::phase::DEFAULT_PEAK_THRESHOLD_DB;
use cisnmf::pipeline::{separate, Method, SeparationConfig};
use cisnmf::signal::{istft, read_wav, stft, SampleFormat};
use serde::Serialize;

use crate::commands::load_dictionaries;
use crate::config::{display_paths, keys, source_name, unique_names, ConfigFile, StftArgs, StftSettings};
use crate::error::{CliError, Result};
use crate::output::OutputSet;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

/// Separate a mixture into one waveform per dictionary.
#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Mixture WAV file
    pub mixture: PathBuf,
    /// Dictionary files, one per source, in output order
    #[arg(long = "dict", required = true)]
    pub dictionaries: Vec<PathBuf>,
    /// Directory receiving `<name>.wav`, `manifest.json` and `timing.json`
    #[arg(long, short = 'o', default_value = ".")]
    pub output_dir: PathBuf,
    /// cisnmf, wiener or aw [default: cisnmf]
    #[arg(long)]
    pub method: Option<Method>,
    /// Phase concentration of the source model [default: 0.5]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Weight of the phase-unwrapping prior [default: 5]
    #[arg(long)]
    pub tau: Option<f64>,
    /// EM iterations [default: 100]
    #[arg(long)]
    pub em_iters: Option<usize>,
    /// IS-NMF iterations before EM [default: 50]
    #[arg(long)]
    pub warm_start_iters: Option<usize>,
    /// IS-NMF iterations behind the wiener and aw filters [default: 150]
    #[arg(long)]
    pub wiener_iters: Option<usize>,
    /// Phase concentration used by the aw filter [default: 1]
    #[arg(long)]
    pub aw_kappa: Option<f64>,
    /// Peaks further than this below the frame maximum are ignored [default: 40]
    #[arg(long)]
    pub peak_threshold_db: Option<f64>,
    /// Leave the last frame's phase untouched during the phase update
    #[arg(long, alias = "paper-exact-phase-range")]
    pub skip_last_phase_frame: bool,
    /// Seed for every random initialisation [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Float width of the written WAV files, 32 or 64 [default: 32]
    #[arg(long)]
    pub output_bits: Option<u16>,
    #[command(flatten)]
    pub stft: StftArgs,
    /// Optional `key = value` file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const KEYS: [&str; 11] = [
    "method",
    "kappa",
    "tau",
    "em-iters",
    "warm-start-iters",
    "wiener-iters",
    "aw-kappa",
    "peak-threshold-db",
    "skip-last-phase-frame",
    "seed",
    "output-bits",
];

/// Resolved settings, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct SeparateSettings {
    pub mixture: String,
    pub dictionaries: Vec<String>,
    pub method: &'static str,
    pub kappa: f64,
    pub tau: f64,
    pub em_iters: usize,
    pub warm_start_iters: usize,
    pub wiener_iters: usize,
    pub aw_kappa: f64,
    pub peak_threshold_db: f64,
    pub skip_last_phase_frame: bool,
    pub seed: u64,
    pub output_bits: u16,
    #[serde(flatten)]
    pub stft: StftSettings,
}

#[derive(Debug, Serialize)]
struct StftShape {
    sample_rate: u32,
    window_length: usize,
    hop: usize,
    bins: usize,
    frames: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a SeparateSettings,
    seed: u64,
    stft: StftShape,
    sources: Vec<String>,
    outputs: Vec<String>,
    objective: Vec<f64>,
    q_clamped: usize,
    decrease_events: usize,
    max_conservativity_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Timing {
    load_s: f64,
    separate_s: f64,
    write_s: f64,
    total_s: f64,
}

impl SeparateArgs {
    pub fn resolve(&self) -> Result<SeparateSettings> {
        let file = ConfigFile::load(self.config.as_deref(), &keys(&KEYS))?;
        let em = EmConfig::default();
        let base = SeparationConfig::default();
        Ok(SeparateSettings {
            mixture: self.mixture.display().to_string(),
            dictionaries: display_paths(&self.dictionaries),
            method: file.resolve(self.method, "method", base.method)?.as_str(),
            kappa: file.resolve(self.kappa, "kappa", em.kappa)?,
            tau: file.resolve(self.tau, "tau", em.tau)?,
            em_iters: file.resolve(self.em_iters, "em-iters", em.em_iters)?,
            warm_start_iters: file.resolve(self.warm_start_iters, "warm-start-iters", em.warm_start_iters)?,
            wiener_iters: file.resolve(self.wiener_iters, "wiener-iters", base.baseline_iters)?,
            aw_kappa: file.resolve(self.aw_kappa, "aw-kappa", base.aw_kappa)?,
            peak_threshold_db: file.resolve(self.peak_threshold_db, "peak-threshold-db", DEFAULT_PEAK_THRESHOLD_DB)?,
            skip_last_phase_frame: file.resolve_switch(self.skip_last_phase_frame, "skip-last-phase-frame")?,
            seed: file.resolve(self.seed, "seed", em.seed)?,
            output_bits: file.resolve(self.output_bits, "output-bits", 32)?,
            stft: self.stft.resolve(&file)?,
        })
    }
}

impl SeparateSettings {
    pub fn sample_format(&self) -> Result<SampleFormat> {
        match self.output_bits {
            32 => Ok(SampleFormat::Float32),
            64 => Ok(SampleFormat::Float64),
            other => Err(CliError::Value {
                key: "output-bits".into(),
                detail: format!("{other} is not 32 or 64"),
            }),
        }
    }

    pub fn separation_config(&self) -> Result<SeparationConfig> {
        let em = EmConfig {
            kappa: self.kappa,
            tau: self.tau,
            em_iters: self.em_iters,
            warm_start_iters: self.warm_start_iters,
            seed: self.seed,
            peak_threshold_db: self.peak_threshold_db,
            phase_range: if self.skip_last_phase_frame {
                PhaseFrameRange::SkipLast
            } else {
                PhaseFrameRange::Full
            },
            ..EmConfig::default()
        };
        em.validate()?;
        Ok(SeparationConfig {
            method: self.method.parse()?,
            em,
            baseline_iters: self.wiener_iters,
            aw_kappa: self.aw_kappa,
        })
    }
}

pub fn run(args: &SeparateArgs) -> Result<()> {
    let start = Instant::now();
    let settings = args.resolve()?;
    let cfg = settings.separation_config()?;
    let format = settings.sample_format()?;
    let names: Vec<String> = args.dictionaries.iter().map(|p| source_name(p)).collect();
    unique_names(&names, "dictionaries")?;

    let wave = read_wav(&args.mixture)?;
    let x = stft(&wave, &settings.stft.config(wave.sample_rate())?);
    let dictionaries = load_dictionaries(&args.dictionaries, &x)?;
    let loaded = Instant::now();

    let out = separate(&x, &dictionaries, &cfg)?;
    let separated = Instant::now();

    OutputSet::create_dir(&args.output_dir)?;
    let mut outputs = OutputSet::new();
    let mut files = Vec::new();
    for (name, est) in names.iter().zip(&out.estimates) {
        let file = format!("{name}.wav");
        outputs.write_wav(&args.output_dir.join(&file), &istft(est)?, format)?;
        files.push(file);
    }
    let report = out.report.unwrap_or_default();
    let manifest = Manifest {
        command: "separate",
        version: env!("CARGO_PKG_VERSION"),
        config: &settings,
        seed: settings.seed,
        stft: StftShape {
            sample_rate: x.sample_rate(),
            window_length: x.config().window_length(),
            hop: x.config().hop(),
            bins: x.bins(),
            frames: x.frames(),
        },
        sources: names.clone(),
        outputs: files,
        max_conservativity_error: report.conservativity.iter().copied().reduce(f64::max),
        objective: report.objective,
        q_clamped: report.q_clamped,
        decrease_events: report.decrease_events,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    outputs.write_bytes(&args.output_dir.join(MANIFEST), text.as_bytes())?;
    let written = Instant::now();
    let timing = Timing {
        load_s: (loaded - start).as_secs_f64(),
        separate_s: (separated - loaded).as_secs_f64(),
        write_s: (written - separated).as_secs_f64(),
        total_s: (written - start).as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&timing)? + "\n";
    outputs.write_bytes(&args.output_dir.join(TIMING), text.as_bytes())?;
    outputs.commit();
    if report.decrease_events > 0 {
        eprintln!("warning: objective decreased in {} iterations", report.decrease_events);
    }
    for n in &names {
        println!("{}", args.output_dir.join(format!("{n}.wav")).display());
    }
    Ok(())
}
