use anyhow::{bail, Context, Result};
use clap::Args;
use scorecheck_core::config::{parse_config, Preset};
use scorecheck_core::Twp;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    /// A requested check found a violation.
    Violation,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Clean => ExitCode::SUCCESS,
            Status::Violation => ExitCode::from(1),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Built-in parameter set: eth, eth-37.72, filecoin, pathological, good.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<Preset>,
    /// JSON parameter file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Reject configs with any validation finding.
    #[arg(long)]
    pub strict: bool,
}

impl ConfigArgs {
    pub fn load_or(&self, fallback: Preset) -> Result<Twp> {
        match (&self.preset, &self.config) {
            (_, Some(path)) => {
                let text = read(path)?;
                parse_config(&text, self.strict).with_context(|| format!("loading {}", path.display()))
            }
            (Some(p), None) => Ok(p.build()),
            (None, None) => Ok(fallback.build()),
        }
    }

    pub fn is_set(&self) -> bool {
        self.preset.is_some() || self.config.is_some()
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Splits `a,b,c`, rejecting empty items.
pub fn split_list(s: &str) -> Result<Vec<String>> {
    let items: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
    if items.iter().any(String::is_empty) {
        bail!("empty item in list {s:?}");
    }
    Ok(items)
}
