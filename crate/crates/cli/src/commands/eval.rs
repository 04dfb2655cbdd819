use std::path::{Path, PathBuf};

use clap::Args;
use cisnmf::metrics::{bss_eval, BssScores};
use cisnmf::signal::read_wav;
use serde::Serialize;

use crate::config::{file_stem, unique_names};
use crate::error::{CliError, Result};
use crate::output::{emit, OutputSet};

/// Score estimated sources against references with SDR, SIR and SAR.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated source WAVs
    #[arg(long, num_args = 1.., required = true)]
    pub estimates: Vec<PathBuf>,
    /// Reference source WAVs; paired with estimates by file stem
    #[arg(long, num_args = 1.., required = true)]
    pub references: Vec<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceScores {
    pub name: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub per_source: Vec<SourceScores>,
    pub mean: Scores,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

impl From<BssScores> for Scores {
    fn from(s: BssScores) -> Self {
        Scores {
            sdr: round4(s.sdr),
            sir: round4(s.sir),
            sar: round4(s.sar),
        }
    }
}

/// Orders `estimates` to follow `references`, matching file stems.
fn pair_by_name<'a>(estimates: &'a [PathBuf], references: &[PathBuf]) -> Result<Vec<(String, &'a Path)>> {
    if estimates.len() != references.len() {
        return Err(CliError::Usage(format!(
            "{} estimates for {} references",
            estimates.len(),
            references.len()
        )));
    }
    let est_names: Vec<String> = estimates.iter().map(|p| file_stem(p)).collect();
    let ref_names: Vec<String> = references.iter().map(|p| file_stem(p)).collect();
    unique_names(&est_names, "estimates")?;
    unique_names(&ref_names, "references")?;
    ref_names
        .into_iter()
        .map(|name| {
            let i = est_names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| CliError::Usage(format!("no estimate named `{name}`")))?;
            Ok((name, estimates[i].as_path()))
        })
        .collect()
}

pub fn evaluate(estimates: &[PathBuf], references: &[PathBuf]) -> Result<Report> {
    let pairs = pair_by_name(estimates, references)?;
    let mut est = Vec::new();
    for (_, path) in &pairs {
        est.push(read_wav(path)?.into_samples());
    }
    let refs = references
        .iter()
        .map(|p| Ok(read_wav(p)?.into_samples()))
        .collect::<Result<Vec<_>>>()?;
    let lengths: Vec<usize> = est.iter().chain(&refs).map(Vec::len).collect();
    let shortest = lengths.iter().copied().min().unwrap_or(0);
    if lengths.iter().any(|&l| l != shortest) {
        eprintln!(
            "warning: signal lengths differ (shortest {shortest}, longest {}); trimming to {shortest} samples",
            lengths.iter().max().unwrap_or(&0)
        );
    }
    let eval = bss_eval(&est, &refs)?;
    Ok(Report {
        per_source: pairs
            .into_iter()
            .zip(&eval.scores)
            .map(|((name, _), s)| SourceScores { name, scores: (*s).into() })
            .collect(),
        mean: eval.mean().into(),
    })
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let report = evaluate(&args.estimates, &args.references)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    let mut outputs = OutputSet::new();
    emit(&mut outputs, args.output.as_deref(), text.as_bytes())?;
    outputs.commit();
    Ok(())
}
