//! Batch experiments over `(n, q)` grids.

mod output;
pub mod search;
mod sweeps;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::PhaseLabError;

pub use output::{format_decimal, ExperimentResult, Metadata, ResultRow, CSV_HEADER};
pub use search::{adversarial_search, SearchOutcome, SearchSettings};
pub use sweeps::{
    run_adversarial_search, run_bound_sweep, run_cemm_curve, run_counter_scan, run_epr_check, run_reduction_check,
};

/// Leakage above this counts as a violation.
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;
/// Slack allowed on top of a success bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Largest `n` the adversarial search accepts.
pub const MAX_SEARCH_N: usize = 16;
/// Largest `n` a counter scan accepts.
pub const MAX_COUNTER_N: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{kind}: observed {observed} exceeds bound {bound} at n={n}, q={q}, trial={trial}, seed={seed}")]
    BoundViolation { kind: String, n: usize, q: usize, trial: usize, seed: u64, observed: f64, bound: f64 },
    #[error("{kind}: counter leakage {leakage:e} at n={n}, q={q}, trial={trial}, seed={seed}")]
    LeakageViolation { kind: String, n: usize, q: usize, trial: usize, seed: u64, leakage: f64 },
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Core(#[from] PhaseLabError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Whether the failure is a numerical violation rather than bad input.
    pub fn is_violation(&self) -> bool {
        matches!(self, Self::BoundViolation { .. } | Self::LeakageViolation { .. } | Self::CheckFailed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BoundSweep,
    CounterScan,
    RandomStress,
    CemmCurve,
    EprCheck,
    ReductionCheck,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::BoundSweep => "bound-sweep",
            Self::CounterScan => "counter-scan",
            Self::RandomStress => "random-stress",
            Self::CemmCurve => "cemm-curve",
            Self::EprCheck => "epr-check",
            Self::ReductionCheck => "reduction-check",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub n_values: Vec<usize>,
    /// Empty means every `q` in `0..n`.
    #[serde(default)]
    pub q_values: Vec<usize>,
    /// Haar draws per `n`; search iterations for `random-stress`; samples per
    /// cell for `reduction-check`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, n_values: Vec<usize>) -> Self {
        Self {
            kind,
            n_values,
            q_values: Vec::new(),
            trials: 1,
            seed: 0,
            theta_grid: None,
            p_values: None,
            output_path: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_values.is_empty() {
            return bad("n_values is empty".into());
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n == 0) {
            return bad(format!("n must be at least 1, got {n}"));
        }
        let max_n = *self.n_values.iter().max().expect("non-empty");
        if let Some(&q) = self.q_values.iter().find(|&&q| q >= max_n) {
            return bad(format!("q = {q} needs n > {q}, largest n is {max_n}"));
        }
        match self.kind {
            ExperimentKind::RandomStress if max_n > MAX_SEARCH_N => {
                return bad(format!("adversarial search supports n <= {MAX_SEARCH_N}"));
            }
            ExperimentKind::CounterScan if max_n > MAX_COUNTER_N => {
                return bad(format!("counter scans support n <= {MAX_COUNTER_N}"));
            }
            ExperimentKind::CemmCurve => {
                if self.n_values.iter().any(|&n| n < 2) {
                    return bad("cemm-curve needs n >= 2".into());
                }
                match &self.theta_grid {
                    None => return bad("cemm-curve needs theta_grid".into()),
                    Some(g) if g.is_empty() => return bad("theta_grid is empty".into()),
                    Some(g) if g.iter().any(|t| !(0.0..1.0).contains(t)) => {
                        return bad("theta values must lie in [0, 1)".into());
                    }
                    _ => {}
                }
            }
            ExperimentKind::ReductionCheck => {
                if self.n_values.iter().any(|&n| n < 2) {
                    return bad("reduction-check needs N >= 2".into());
                }
                match &self.p_values {
                    None => return bad("reduction-check needs p_values".into()),
                    Some(p) if p.is_empty() => return bad("p_values is empty".into()),
                    Some(p) if p.iter().any(|p| !(0.0..=1.0).contains(p)) => {
                        return bad("p values must lie in [0, 1]".into());
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Query counts evaluated at `n`, ascending.
    pub fn q_values_for(&self, n: usize) -> Vec<usize> {
        if self.q_values.is_empty() {
            return (0..n).collect();
        }
        let mut qs: Vec<usize> = self.q_values.iter().copied().filter(|&q| q < n).collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }
}

/// splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one task, independent of scheduling.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ p))
}

/// Runs the experiment named by `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    match config.kind {
        ExperimentKind::BoundSweep => run_bound_sweep(config),
        ExperimentKind::CounterScan => run_counter_scan(config),
        ExperimentKind::RandomStress => run_adversarial_search(config),
        ExperimentKind::CemmCurve => run_cemm_curve(config),
        ExperimentKind::EprCheck => run_epr_check(config),
        ExperimentKind::ReductionCheck => run_reduction_check(config),
    }
}

/// One-line human summary.
pub fn summarize(result: &ExperimentResult) -> String {
    let cfg = &result.metadata.config;
    let total = result.rows.len();
    match cfg.kind {
        ExperimentKind::BoundSweep => {
            let ok = result.rows.iter().filter(|r| r.gap >= -BOUND_SLACK).count();
            format!("bound-sweep: {ok}/{total} rows within bound; max gap deficit {:.1e}", result.max_gap_deficit())
        }
        ExperimentKind::CounterScan => {
            let ok = result.rows.iter().filter(|r| r.max_leakage <= LEAKAGE_TOLERANCE).count();
            format!(
                "counter-scan: {ok}/{total} rows within leakage tolerance; max leakage {:.1e}",
                result.max_leakage()
            )
        }
        ExperimentKind::RandomStress => {
            let ok = result.rows.iter().filter(|r| r.gap >= -BOUND_SLACK).count();
            let closest = result.rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
            format!("random-stress: {ok}/{total} searches within bound; smallest gap {closest:.3e}")
        }
        ExperimentKind::CemmCurve => {
            let worst = result
                .rows
                .iter()
                .filter(|r| r.kind == "cemm-worst")
                .map(|r| r.observed_probability)
                .fold(f64::INFINITY, f64::min);
            format!("cemm-curve: {total} rows; worst-case window probability {worst:.6}")
        }
        ExperimentKind::EprCheck => {
            format!("epr-check: {total} sizes checked; max entrywise deviation {:.1e}", result.max_leakage())
        }
        ExperimentKind::ReductionCheck => {
            format!("reduction-check: {total}/{total} (N, p) cells at or above p - 2 SE")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_fields() {
        let err = ExperimentConfig::from_json_str(r#"{"kind":"bound-sweep","n_values":[4],"bogus":1}"#).unwrap_err();
        assert!(matches!(err, ExperimentError::Config(_)));
    }

    #[test]
    fn config_defaults() {
        let cfg = ExperimentConfig::from_json_str(r#"{"kind":"epr-check","n_values":[1,2]}"#).unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.format, OutputFormat::Csv);
        cfg.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BoundSweep, vec![4]);
        cfg.q_values = vec![9];
        assert!(cfg.validate().is_err());
        cfg.q_values = vec![3];
        cfg.validate().unwrap();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(ExperimentKind::CemmCurve, vec![4]);
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::new(ExperimentKind::CounterScan, vec![128]).validate().is_err());
        assert!(ExperimentConfig::new(ExperimentKind::RandomStress, vec![32]).validate().is_err());
    }

    #[test]
    fn q_values_skip_pairs_beyond_n() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BoundSweep, vec![2, 8]);
        cfg.q_values = vec![5, 0, 1, 5];
        assert_eq!(cfg.q_values_for(2), vec![0, 1]);
        assert_eq!(cfg.q_values_for(8), vec![0, 1, 5]);
        cfg.q_values.clear();
        assert_eq!(cfg.q_values_for(3), vec![0, 1, 2]);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }
}
