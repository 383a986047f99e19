use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError};

pub const CSV_HEADER: [&str; 10] =
    ["n", "q", "kind", "trial", "seed", "observed_probability", "bound_value", "gap", "max_leakage", "wall_time_ms"];

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub q: usize,
    pub kind: String,
    pub trial: usize,
    pub seed: u64,
    pub observed_probability: f64,
    pub bound_value: f64,
    /// `bound_value − observed_probability`.
    pub gap: f64,
    pub max_leakage: f64,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn new(n: usize, q: usize, kind: impl Into<String>, trial: usize, seed: u64) -> Self {
        Self {
            n,
            q,
            kind: kind.into(),
            trial,
            seed,
            observed_probability: 0.0,
            bound_value: 0.0,
            gap: 0.0,
            max_leakage: 0.0,
            wall_time_ms: 0.0,
        }
    }

    pub fn with_probability(mut self, observed: f64, bound: f64) -> Self {
        self.observed_probability = observed;
        self.bound_value = bound;
        self.gap = bound - observed;
        self
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.max_leakage = leakage.max(0.0);
        self
    }

    pub fn with_wall_time(mut self, ms: f64) -> Self {
        self.wall_time_ms = ms;
        self
    }

    fn csv_record(&self) -> [String; 10] {
        [
            self.n.to_string(),
            self.q.to_string(),
            self.kind.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            format_decimal(self.observed_probability),
            format_decimal(self.bound_value),
            format_decimal(self.gap),
            format_decimal(self.max_leakage),
            format_decimal(self.wall_time_ms),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub config: ExperimentConfig,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn new(config: ExperimentConfig, rows: Vec<ResultRow>) -> Self {
        let timestamp =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { metadata: Metadata { tool_version: env!("CARGO_PKG_VERSION").to_string(), config, timestamp }, rows }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        writer.write_record(CSV_HEADER)?;
        for row in &self.rows {
            writer.write_record(row.csv_record())?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, ExperimentError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ASCII"))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Largest `observed − bound` over rows, floored at zero.
    pub fn max_gap_deficit(&self) -> f64 {
        self.rows.iter().map(|r| -r.gap).fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.rows.iter().map(|r| r.max_leakage).fold(0.0, f64::max)
    }
}

/// Fixed-point rendering with 12 significant digits.
pub fn format_decimal(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}
