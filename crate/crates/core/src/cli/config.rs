use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmap::EvalConfig;
use crate::fusion::EnsembleConfig;
use crate::refine::SubdivisionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Identity,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineSettings {
    pub subdivision_k: usize,
    pub target_side: usize,
    pub start_side: usize,
    pub predictor: PredictorKind,
}

impl Default for RefineSettings {
    fn default() -> Self {
        let sub = SubdivisionConfig::default();
        Self {
            subdivision_k: sub.subdivision_k,
            target_side: sub.target_side,
            start_side: sub.start_side,
            predictor: PredictorKind::Oracle,
        }
    }
}

impl RefineSettings {
    pub fn subdivision(&self) -> SubdivisionConfig {
        SubdivisionConfig {
            subdivision_k: self.subdivision_k,
            target_side: self.target_side,
            start_side: self.start_side,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsSettings {
    pub bin_width: f64,
    pub sample_n: usize,
}

impl Default for StatsSettings {
    fn default() -> Self {
        Self {
            bin_width: 10.0,
            sample_n: 10_000,
        }
    }
}

/// Every tunable of every subcommand. Loaded from a TOML file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub refine: RefineSettings,
    pub ensemble: EnsembleConfig,
    pub eval: EvalConfig,
    pub stats: StatsSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_path_to_error::deserialize(toml::Deserializer::new(&text)).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let (line, column) = inner.span().map_or((0, 0), |span| {
                let before = &text[..span.start];
                let line_start = before.rfind('\n').map_or(0, |i| i + 1);
                (before.matches('\n').count() + 1, span.start - line_start + 1)
            });
            Error::Schema {
                path: path.to_path_buf(),
                field,
                message: inner.message().to_string(),
                line,
                column,
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.refine.subdivision().steps()?;
        self.ensemble.validate()?;
        self.eval.validate()?;
        if !self.stats.bin_width.is_finite() || self.stats.bin_width <= 0.0 {
            return Err(Error::InvalidConfig("bin_width must be positive".into()));
        }
        Ok(())
    }
}

/// Resolved configuration written next to every output.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<String>,
    pub settings: &'a T,
}

impl<'a, T: Serialize> Sidecar<'a, T> {
    pub fn write(&self, output: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))?;
        let path = sidecar_path(output);
        std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }
}

pub fn sidecar_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    output.with_file_name(name)
}
