//! Run configuration: a TOML file, then `RAYLIGN_SEED`, then flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use raylign::intersection::IntersectionMode;
use raylign::{RecallMetric, SamplerKind, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "RAYLIGN_SEED";
pub const CONFIG_ECHO: &str = "config.toml";

/// Registration method. The last three are line-loss variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    LineLoss,
    Cd,
    CdW,
    Icp,
    SvdSurrogate,
    /// Line loss with every candidate point kept as an intersection.
    Insec1,
    /// Line loss with box-point-plus-direction lines.
    Sample1,
    /// Line loss with lines through perturbed source/target points.
    Sample2,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::LineLoss => "line-loss",
            Method::Cd => "cd",
            Method::CdW => "cd-w",
            Method::Icp => "icp",
            Method::SvdSurrogate => "svd-surrogate",
            Method::Insec1 => "insec1",
            Method::Sample1 => "sample1",
            Method::Sample2 => "sample2",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        <Self as ValueEnum>::from_str(s.trim(), true)
            .map_err(|_| CliError::Usage(format!("unknown method `{s}`")))
    }

    /// Solver settings this method overrides on top of the shared config.
    pub fn adjust(&self, config: &SolverConfig) -> SolverConfig {
        let mut c = config.clone();
        match self {
            Method::Insec1 => c.intersection_mode = IntersectionMode::AllCandidates,
            Method::Sample1 => c.sampler = SamplerKind::BoxPointDirection,
            Method::Sample2 => c.sampler = SamplerKind::CloudPairPerturbed,
            _ => {}
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads for batch runs; 0 lets rayon decide.
    pub jobs: usize,
    pub alphas: Vec<f64>,
    pub recall_metric: RecallMetric,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::LineLoss,
            source: None,
            target: None,
            out: None,
            jobs: 0,
            alphas: (1..=20).map(|i| i as f64 * 0.01).collect(),
            recall_metric: RecallMetric::PwL2,
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path` if given, then applies the seed from the environment.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Ok(seed) = std::env::var(SEED_ENV) {
            config.solver.seed = seed.trim().parse().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV}={seed} is not an unsigned integer"))
            })?;
        }
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(CliError::Usage("alphas must be finite".into()));
        }
        Ok(())
    }

    /// Writes the effective config into `dir`.
    pub fn echo(&self, dir: &Path) -> CliResult<()> {
        raylign::io::write_atomic(&dir.join(CONFIG_ECHO), self.to_toml().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use raylign::solvers::LearningRateSchedule;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig {
            method: Method::Sample2,
            out: Some("runs/a".into()),
            ..RunConfig::default()
        };
        c.solver.delta = Some(0.03);
        c.solver.nu0 = 0.01;
        c.solver.schedule = LearningRateSchedule::Cosine { floor: 0.1 };
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(
            RunConfig::from_toml(&RunConfig::default().to_toml()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("method = \"icp\"\n[solver]\nmax_iterations = 7\n").unwrap();
        assert_eq!(c.method, Method::Icp);
        assert_eq!(c.solver.max_iterations, 7);
        assert_eq!(
            c.solver.lines_per_iteration,
            SolverConfig::default().lines_per_iteration
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("methd = \"icp\"").is_err());
        assert!(RunConfig::from_toml("[solver]\nlr = 1.0").is_err());
    }

    #[test]
    fn method_names_parse_back() {
        for m in Method::value_variants() {
            assert_eq!(Method::parse(m.name()).unwrap(), *m);
        }
        assert!(Method::parse("sgd").is_err());
    }
}
