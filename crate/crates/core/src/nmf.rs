//! Itakura-Saito NMF: divergence, multiplicative-update fitting, column
//! normalisation and the dictionary text format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

/// Floor applied to data, factors and model products.
pub const EPS: f64 = 1e-12;

/// `W` (bins x rank) and `H` (rank x frames), both entrywise `>= EPS`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl NmfFactors {
    /// Floors both factors at [`EPS`] and checks the inner dimensions agree.
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "W is {:?} but H is {:?}",
                w.dim(),
                h.dim()
            )));
        }
        if w.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("factors", "non-finite entry"));
        }
        Ok(NmfFactors {
            w: w.mapv_into(floor),
            h: h.mapv_into(floor),
        })
    }

    /// Uniform(0.1, 1.1) entries drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(bins: usize, rank: usize, frames: usize, rng: &mut R) -> Self {
        let w = Array2::from_shape_simple_fn((bins, rank), || rng.random_range(0.1..1.1));
        let h = Array2::from_shape_simple_fn((rank, frames), || rng.random_range(0.1..1.1));
        NmfFactors { w, h }
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// `W H`, floored at [`EPS`].
    pub fn product(&self) -> Array2<f64> {
        self.w.dot(&self.h).mapv_into(floor)
    }
}

#[inline]
pub(crate) fn floor(v: f64) -> f64 {
    if v > EPS {
        v
    } else {
        EPS
    }
}

/// `sum p/v - log(p/v) - 1`, with `p` floored at [`EPS`].
pub fn is_divergence(p: &Array2<f64>, v: &Array2<f64>) -> Result<f64> {
    if p.dim() != v.dim() {
        return Err(Error::ShapeMismatch(format!(
            "P is {:?} but V is {:?}",
            p.dim(),
            v.dim()
        )));
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("V", "entries must be positive"));
    }
    Ok(p
        .iter()
        .zip(v)
        .map(|(&p, &v)| {
            let r = floor(p) / v;
            r - r.ln() - 1.0
        })
        .sum())
}

/// One multiplicative IS-NMF sweep: `H` first, then `W` unless it is fixed.
pub fn isnmf_step(v: &Array2<f64>, f: &mut NmfFactors, update_w: bool) {
    let vh = f.product();
    let num = Zip::from(v).and(&vh).map_collect(|&v, &m| v / (m * m));
    let den = vh.mapv(|m| 1.0 / m);
    let ratio = f.w.t().dot(&num) / f.w.t().dot(&den);
    Zip::from(&mut f.h).and(&ratio).for_each(|h, &r| *h = floor(*h * r));

    if update_w {
        let vh = f.product();
        let num = Zip::from(v).and(&vh).map_collect(|&v, &m| v / (m * m));
        let den = vh.mapv(|m| 1.0 / m);
        let ratio = num.dot(&f.h.t()) / den.dot(&f.h.t());
        Zip::from(&mut f.w).and(&ratio).for_each(|w, &r| *w = floor(*w * r));
    }
}

/// Fits `V ~ W H` under the IS divergence with multiplicative updates from a
/// seeded uniform(0.1, 1.1) start. With `fixed_w` only `H` is estimated.
pub fn isnmf_fit(
    v: &Array2<f64>,
    rank: usize,
    iters: usize,
    seed: u64,
    fixed_w: Option<&Array2<f64>>,
) -> Result<NmfFactors> {
    isnmf_fit_with_trace(v, rank, iters, seed, fixed_w).map(|(f, _)| f)
}

/// As [`isnmf_fit`], also returning the divergence before the first and after
/// every iteration (`iters + 1` values).
pub fn isnmf_fit_with_trace(
    v: &Array2<f64>,
    rank: usize,
    iters: usize,
    seed: u64,
    fixed_w: Option<&Array2<f64>>,
) -> Result<(NmfFactors, Vec<f64>)> {
    if rank == 0 {
        return Err(Error::invalid("rank", "must be at least 1"));
    }
    let (bins, frames) = v.dim();
    let v = v.mapv(floor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = NmfFactors::random(bins, rank, frames, &mut rng);
    if let Some(w) = fixed_w {
        if w.dim() != (bins, rank) {
            return Err(Error::ShapeMismatch(format!(
                "fixed W is {:?}, expected ({bins}, {rank})",
                w.dim()
            )));
        }
        f.w = w.mapv(floor);
    }
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(is_divergence(&v, &f.product())?);
    for _ in 0..iters {
        isnmf_step(&v, &mut f, fixed_w.is_none());
        trace.push(is_divergence(&v, &f.product())?);
    }
    Ok((f, trace))
}

/// Rescales every column of `W` to unit l2 norm and the matching row of `H`
/// by the inverse factor, leaving `W H` unchanged.
pub fn normalize(f: &NmfFactors) -> NmfFactors {
    let mut out = f.clone();
    normalize_in_place(&mut out);
    out
}

pub fn normalize_in_place(f: &mut NmfFactors) {
    let norms: Array1<f64> = f
        .w
        .axis_iter(Axis(1))
        .map(|col| col.dot(&col).sqrt())
        .collect();
    for (k, &n) in norms.iter().enumerate() {
        if n > 0.0 && n != 1.0 {
            f.w.column_mut(k).mapv_inplace(|x| x / n);
            f.h.row_mut(k).mapv_inplace(|x| x * n);
        }
    }
}

/// Learns a normalised spectral dictionary from an isolated source's power
/// spectrogram. Activations are discarded.
pub fn learn_dictionary(
    source: &ComplexSpectrogram,
    rank: usize,
    iters: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let f = isnmf_fit(&source.power(), rank, iters, seed, None)?;
    Ok(normalize(&f).w)
}

/// File name used for a source's dictionary.
pub fn dictionary_file_name(source: &str) -> String {
    format!("dict_{source}.txt")
}

/// Text encoding: `F K` on the first line, then `F` lines of `K`
/// space-separated values with 17 significant digits.
pub fn format_dictionary(w: &Array2<f64>) -> String {
    let mut out = format!("{} {}\n", w.nrows(), w.ncols());
    for row in w.rows() {
        let mut first = true;
        for x in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{x:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_dictionary(text: &str) -> Result<Array2<f64>> {
    let bad = |m: String| Error::MalformedDictionary(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [bins, rank] = dims[..] else {
        return Err(bad(format!("header `{header}` must be `F K`")));
    };
    let mut values = Vec::with_capacity(bins * rank);
    for (i, line) in lines.by_ref().take(bins).enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("line {}: bad value `{t}`", i + 2))))
            .collect::<Result<_>>()?;
        if row.len() != rank {
            return Err(bad(format!("line {}: {} values, expected {rank}", i + 2, row.len())));
        }
        if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(bad(format!("line {}: entries must be finite and nonnegative", i + 2)));
        }
        values.extend(row);
    }
    if values.len() != bins * rank {
        return Err(bad(format!("expected {bins} rows, got {}", values.len() / rank.max(1))));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing content after last row".into()));
    }
    Array2::from_shape_vec((bins, rank), values).map_err(|e| bad(e.to_string()))
}

pub fn write_dictionary(w: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_dictionary(w)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dictionary(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dictionary(&text)
}
