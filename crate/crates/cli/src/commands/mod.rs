pub mod eval;
pub mod fit_check;
pub mod learn;
pub mod sample;
pub mod separate;

use std::path::{Path, PathBuf};

use cisnmf::nmf::read_dictionary;
use cisnmf::signal::ComplexSpectrogram;
use ndarray::Array2;

use crate::error::{CliError, Result};

/// Reads every dictionary and checks its row count against the mixture STFT.
pub fn load_dictionaries(paths: &[PathBuf], x: &ComplexSpectrogram) -> Result<Vec<Array2<f64>>> {
    paths
        .iter()
        .map(|p| {
            let w = read_dictionary(p)?;
            check_bins(p, &w, x)?;
            Ok(w)
        })
        .collect()
}

fn check_bins(path: &Path, w: &Array2<f64>, x: &ComplexSpectrogram) -> Result<()> {
    if w.nrows() != x.bins() {
        return Err(CliError::BinMismatch {
            path: path.to_path_buf(),
            dictionary: w.nrows(),
            mixture: x.bins(),
        });
    }
    Ok(())
}
