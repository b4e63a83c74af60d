use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allen_cahn::LinearMode;
use crate::error::{Error, Result};
use crate::switching::Regime;
use crate::trajectory::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sparse1d,
    Table1,
    Class1d,
    Class2d,
    LambdaStudy,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sparse1d => "sparse1d",
            ExperimentKind::Table1 => "table1",
            ExperimentKind::Class1d => "class1d",
            ExperimentKind::Class2d => "class2d",
            ExperimentKind::LambdaStudy => "lambda_study",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// Problem instance for `simulate` and `lambda_study`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `½(θ - 4)² + |θ|`.
    Sparse1d,
    /// Gaussian design of shape `synthetic_shape`.
    Synthetic,
    /// Design and data from `design_path` / `data_path`.
    SparseCsv,
    /// The bundled n = 200 classification fixture.
    Class1d,
    /// Its n = 50 subsample.
    Class1dSmall,
    /// The bundled 2D fixture at `side`.
    Class2d,
}

impl ProblemKind {
    pub fn is_classification(self) -> bool {
        matches!(self, ProblemKind::Class1d | ProblemKind::Class1dSmall | ProblemKind::Class2d)
    }
}

/// A single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ladder {
    One(f64),
    Many(Vec<f64>),
}

impl Ladder {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Ladder::One(v) => vec![*v],
            Ladder::Many(v) => v.clone(),
        }
    }
}

/// Either a number of uniform points on `[0, horizon]` or explicit times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(usize),
    Times(Vec<f64>),
}

/// Experiment configuration. Every field is optional in the JSON file;
/// unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub problem: Option<ProblemKind>,
    pub lambda: Option<Ladder>,
    pub epsilon: Option<Ladder>,
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub grid: Option<GridSpec>,
    pub seeds: Option<u64>,
    pub master_seed: u64,
    pub initial_regime: Option<Regime>,
    pub linear_mode: Option<LinearMode>,
    /// Longest single Crank–Nicolson step; longer events are subdivided.
    pub dt_max: Option<f64>,
    /// Euler step of the deterministic baselines.
    pub det_step: Option<f64>,
    /// Side of the 2D grid (50 or 200).
    pub side: Option<usize>,
    pub truth_path: Option<PathBuf>,
    pub design_path: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
    pub synthetic_shape: Option<[usize; 2]>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// `false` forces sequential execution.
    pub parallel: Option<bool>,
    /// Caps seeds and dimensions for quick checks.
    pub smoke: bool,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    /// Field-level checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        if self.seeds == Some(0) {
            return Err(config_err("seeds must be at least 1"));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) || !h.is_finite() {
                return Err(config_err(format!("horizon must be positive, got {h}")));
            }
        }
        for (name, ladder) in [("lambda", &self.lambda), ("epsilon", &self.epsilon)] {
            if let Some(l) = ladder {
                let v = l.values();
                if v.is_empty() {
                    return Err(config_err(format!("{name} list is empty")));
                }
                if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(config_err(format!("{name} values must be positive")));
                }
            }
        }
        if let Some(l) = &self.lambda {
            if l.values().windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err("lambda ladder must be strictly increasing"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("dt_max", self.dt_max), ("det_step", self.det_step)] {
            if let Some(x) = v {
                if !(x > 0.0) || !x.is_finite() {
                    return Err(config_err(format!("{name} must be positive, got {x}")));
                }
            }
        }
        match &self.grid {
            Some(GridSpec::Points(n)) if *n < 2 => return Err(config_err("grid needs at least 2 points")),
            Some(GridSpec::Times(t)) => {
                TimeGrid::new(t.clone()).map_err(|e| config_err(e.to_string()))?;
            }
            _ => {}
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be at least 1"));
        }
        if let Some([m, n]) = self.synthetic_shape {
            if n == 0 || m < n {
                return Err(config_err("synthetic_shape must be [m, n] with m >= n >= 1"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds_or(&self, default: u64) -> u64 {
        let s = self.seeds.unwrap_or(default);
        if self.smoke {
            s.min(2)
        } else {
            s
        }
    }

    pub fn lambdas_or(&self, default: &[f64]) -> Vec<f64> {
        self.lambda.as_ref().map_or_else(|| default.to_vec(), Ladder::values)
    }

    pub fn epsilons_or(&self, default: &[f64]) -> Vec<f64> {
        self.epsilon.as_ref().map_or_else(|| default.to_vec(), Ladder::values)
    }

    pub fn initial_regime(&self) -> Regime {
        self.initial_regime.unwrap_or(Regime::Linear)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Observation grid on `[0, horizon]`.
    pub fn time_grid(&self, horizon: f64, default_points: usize) -> Result<TimeGrid> {
        match &self.grid {
            Some(GridSpec::Times(t)) => {
                let g = TimeGrid::new(t.clone()).map_err(|e| config_err(e.to_string()))?;
                if g.end() > horizon {
                    return Err(config_err(format!("grid ends at {} beyond horizon {horizon}", g.end())));
                }
                Ok(g)
            }
            Some(GridSpec::Points(n)) => TimeGrid::uniform(horizon, *n).map_err(|e| config_err(e.to_string())),
            None => TimeGrid::uniform(horizon, default_points).map_err(|e| config_err(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"experiment": "table1", "lambda": [0.25, 2.5], "seeds": 100, "master_seed": 7, "linear_mode": "cn"}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(ExperimentKind::Table1));
        assert_eq!(cfg.lambdas_or(&[1.0]), vec![0.25, 2.5]);
        assert_eq!(cfg.linear_mode, Some(LinearMode::Cn));
        assert_eq!(cfg.seeds_or(5), 100);
        let one = ExperimentConfig::from_json_str(r#"{"lambda": 10, "grid": [0, 1, 2]}"#).unwrap();
        assert_eq!(one.lambdas_or(&[1.0]), vec![10.0]);
        assert_eq!(one.time_grid(2.0, 5).unwrap().times(), &[0.0, 1.0, 2.0]);
        assert!(one.time_grid(1.5, 5).is_err());
        let empty = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(empty.initial_regime(), Regime::Linear);
        assert_eq!(empty.time_grid(20.0, 5).unwrap().times(), &[0.0, 5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn smoke_caps_seeds() {
        let cfg = ExperimentConfig {
            smoke: true,
            ..Default::default()
        };
        assert_eq!(cfg.seeds_or(10_000), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"seeds": 0}"#,
            r#"{"horizon": -1}"#,
            r#"{"lambda": [2.5, 0.25]}"#,
            r#"{"lambda": []}"#,
            r#"{"epsilon": 0}"#,
            r#"{"grid": 1}"#,
            r#"{"grid": [1, 0.5]}"#,
            r#"{"unknown_field": 1}"#,
            r#"{"linear_mode": "rk4"}"#,
            "not json",
        ] {
            let err = ExperimentConfig::from_json_str(bad).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json_str(r#"{"seeds": 3}"#).unwrap();
        let b = ExperimentConfig::from_json_str(r#"{ "seeds" : 3 }"#).unwrap();
        let c = ExperimentConfig::from_json_str(r#"{"seeds": 4}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
