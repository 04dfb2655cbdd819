//! SDR / SIR / SAR with a rescaled (not filtered) target.

use crate::error::{Error, Result};

/// Scores are clipped to `[-SCORE_CAP, SCORE_CAP]` dB so exact matches stay
/// finite.
pub const SCORE_CAP: f64 = 200.0;

/// Ridge added to a singular Gram matrix.
pub const GRAM_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BssScores {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BssEvaluation {
    pub scores: Vec<BssScores>,
    /// Length every signal was trimmed to.
    pub length: usize,
    /// Set when some interference Gram matrix needed the ridge.
    pub regularized: bool,
}

impl BssEvaluation {
    pub fn mean(&self) -> BssScores {
        let n = self.scores.len().max(1) as f64;
        let sum = |f: fn(&BssScores) -> f64| self.scores.iter().map(f).sum::<f64>() / n;
        BssScores {
            sdr: sum(|s| s.sdr),
            sir: sum(|s| s.sir),
            sar: sum(|s| s.sar),
        }
    }
}

/// The three parts of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub target: Vec<f64>,
    pub interference: Vec<f64>,
    pub artifacts: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(a: &[f64]) -> f64 {
    dot(a, a)
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return if num > 0.0 { SCORE_CAP } else { 0.0 };
    }
    if num <= 0.0 {
        return -SCORE_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-SCORE_CAP, SCORE_CAP)
}

/// Solves a small symmetric positive system by Cholesky. `None` if it is not
/// numerically positive definite.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 1e-14 * a[i][i].abs()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Splits `estimate` into target, interference and artifacts relative to
/// `references[j]`. The boolean reports whether the ridge was needed.
pub fn decompose(estimate: &[f64], references: &[&[f64]], j: usize) -> Result<(Decomposition, bool)> {
    let target_ref = references[j];
    let norm = energy(target_ref);
    if !(norm > 0.0) {
        return Err(Error::invalid("references", format!("reference {j} is silent")));
    }
    let scale = dot(estimate, target_ref) / norm;
    let target: Vec<f64> = target_ref.iter().map(|s| scale * s).collect();
    let rest: Vec<f64> = estimate.iter().zip(&target).map(|(e, t)| e - t).collect();

    let others: Vec<&[f64]> = references
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, r)| *r)
        .collect();
    let mut interference = vec![0.0; estimate.len()];
    let mut regularized = false;
    if !others.is_empty() {
        let gram: Vec<Vec<f64>> = others
            .iter()
            .map(|a| others.iter().map(|b| dot(a, b)).collect())
            .collect();
        let rhs: Vec<f64> = others.iter().map(|a| dot(a, &rest)).collect();
        let coef = match cholesky_solve(&gram, &rhs) {
            Some(c) => c,
            None => {
                regularized = true;
                let ridged: Vec<Vec<f64>> = gram
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let mut row = row.clone();
                        row[i] += GRAM_RIDGE * row[i].abs().max(1.0);
                        row
                    })
                    .collect();
                cholesky_solve(&ridged, &rhs).unwrap_or_else(|| vec![0.0; others.len()])
            }
        };
        for (c, r) in coef.iter().zip(&others) {
            for (i, s) in interference.iter_mut().zip(r.iter()) {
                *i += c * s;
            }
        }
    }
    let artifacts = rest.iter().zip(&interference).map(|(r, i)| r - i).collect();
    Ok((
        Decomposition {
            target,
            interference,
            artifacts,
        },
        regularized,
    ))
}

/// Scores every estimate against the reference with the same index. Signals
/// are trimmed to the shortest length.
pub fn bss_eval(estimates: &[Vec<f64>], references: &[Vec<f64>]) -> Result<BssEvaluation> {
    if estimates.len() != references.len() || estimates.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimates for {} references",
            estimates.len(),
            references.len()
        )));
    }
    let length = estimates
        .iter()
        .chain(references)
        .map(Vec::len)
        .min()
        .unwrap_or(0);
    if length == 0 {
        return Err(Error::EmptyWaveform);
    }
    let refs: Vec<&[f64]> = references.iter().map(|r| &r[..length]).collect();
    let mut scores = Vec::with_capacity(estimates.len());
    let mut regularized = false;
    for (j, est) in estimates.iter().enumerate() {
        let (d, reg) = decompose(&est[..length], &refs, j)?;
        regularized |= reg;
        let t = energy(&d.target);
        let i = energy(&d.interference);
        let a = energy(&d.artifacts);
        let noise: Vec<f64> = d.interference.iter().zip(&d.artifacts).map(|(x, y)| x + y).collect();
        let signal: Vec<f64> = d.target.iter().zip(&d.interference).map(|(x, y)| x + y).collect();
        scores.push(BssScores {
            sdr: ratio_db(t, energy(&noise)),
            sir: ratio_db(t, i),
            sar: ratio_db(energy(&signal), a),
        });
    }
    Ok(BssEvaluation {
        scores,
        length,
        regularized,
    })
}
