//! Flat `key = value` configuration files. Keys are long flag names without
//! the leading dashes; `_` and `-` are interchangeable. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use cisnmf::signal::StftConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    /// Reads `path` if given, rejecting keys outside `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path, allowed)
    }

    fn parse(text: &str, path: &Path, allowed: &[&str]) -> Result<Self> {
        let err = |line: usize, detail: String| CliError::Config {
            path: path.to_path_buf(),
            line,
            detail,
        };
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let key = normalize_key(key);
            if !allowed.contains(&key.as_str()) {
                return Err(err(i + 1, format!("unknown key `{key}`")));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(err(i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile { values })
    }

    /// The flag if given, else the file value, else `default`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|e: T::Err| CliError::Value {
                key: key.to_string(),
                detail: format!("`{raw}`: {e}"),
            }),
            None => Ok(default),
        }
    }

    /// Boolean switch: set by the flag, or by `true`/`false` in the file.
    pub fn resolve_switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.resolve(None, key, false)
    }
}

pub const DEFAULT_WINDOW_MS: f64 = 92.0;
pub const DEFAULT_OVERLAP: f64 = 0.75;
pub const STFT_KEYS: [&str; 2] = ["window-ms", "overlap"];

#[derive(Debug, Clone, Args)]
pub struct StftArgs {
    /// Analysis window duration in milliseconds, rounded to a power-of-two length [default: 92]
    #[arg(long)]
    pub window_ms: Option<f64>,
    /// Fraction of the window shared by consecutive frames [default: 0.75]
    #[arg(long)]
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StftSettings {
    pub window_ms: f64,
    pub overlap: f64,
}

impl StftArgs {
    pub fn resolve(&self, file: &ConfigFile) -> Result<StftSettings> {
        Ok(StftSettings {
            window_ms: file.resolve(self.window_ms, "window-ms", DEFAULT_WINDOW_MS)?,
            overlap: file.resolve(self.overlap, "overlap", DEFAULT_OVERLAP)?,
        })
    }
}

impl StftSettings {
    pub fn config(&self, sample_rate: u32) -> Result<StftConfig> {
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(CliError::Value {
                key: "overlap".into(),
                detail: format!("{} must lie in [0, 1)", self.overlap),
            });
        }
        let window = StftConfig::from_duration(self.window_ms, sample_rate)?.window_length();
        let hop = ((window as f64 * (1.0 - self.overlap)).round() as usize).max(1);
        Ok(StftConfig::new(window, hop)?)
    }
}

/// The command's own keys followed by the shared STFT keys.
pub fn keys<'a>(own: &[&'a str]) -> Vec<&'a str> {
    own.iter().copied().chain(STFT_KEYS).collect()
}

/// Source name for a dictionary file: its stem without the `dict_` prefix.
pub fn source_name(path: &Path) -> String {
    let stem = file_stem(path);
    stem.strip_prefix("dict_").map(str::to_string).unwrap_or(stem)
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Rejects repeated names, which would overwrite each other's outputs.
pub fn unique_names(names: &[String], what: &str) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::Usage(format!("two {what} share the name `{n}`")));
        }
    }
    Ok(())
}

pub fn display_paths(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
