use std::io::Write;
use std::path::{Path, PathBuf};

use cisnmf::signal::{write_wav_as, SampleFormat, Waveform};

use crate::error::{CliError, Result};

/// Files written by one command. Unless [`OutputSet::commit`] is called, every
/// file is removed again when the set is dropped, so a failing command leaves
/// nothing half-written behind.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new() -> Self {
        OutputSet::default()
    }

    pub fn create_dir(dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
    }

    pub fn write_bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.written.push(path.to_path_buf());
        let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn write_wav(&mut self, path: &Path, w: &Waveform, format: SampleFormat) -> Result<()> {
        self.written.push(path.to_path_buf());
        Ok(write_wav_as(w, path, format)?)
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Writes to `path` through `outputs`, or to stdout when there is no path.
pub fn emit(outputs: &mut OutputSet, path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => outputs.write_bytes(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}
