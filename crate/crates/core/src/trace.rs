//! Population traces: estimated and oracle diagonals over a time grid, with
//! tabular and structured output writers and error metrics.

use serde::{Serialize, Serializer};

use crate::experiment::ExperimentConfig;

/// Which repetition a row belongs to; `Mean` is the across-repetition
/// average (the final estimate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repetition {
    Index(u32),
    Mean,
}

impl std::fmt::Display for Repetition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Repetition::Index(i) => write!(f, "{i}"),
            Repetition::Mean => write!(f, "mean"),
        }
    }
}

impl Serialize for Repetition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Repetition::Index(i) => serializer.serialize_u32(*i),
            Repetition::Mean => serializer.serialize_str("mean"),
        }
    }
}

/// One time point of one repetition: estimated and oracle populations per
/// basis state.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    /// Time, seconds.
    pub t: f64,
    /// The ε value (or comma-joined ε list when extrapolated).
    pub epsilon_label: String,
    pub repetition: Repetition,
    pub estimated: Vec<f64>,
    pub oracle: Vec<f64>,
    /// Shots per circuit; 0 in exact mode.
    pub shots: u64,
}

/// Time-indexed estimated and oracle populations with the generating config.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationTrace {
    pub config: ExperimentConfig,
    pub dim: usize,
    pub rows: Vec<TraceRow>,
}

/// 17 significant digits, enough to round-trip any f64.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

impl PopulationTrace {
    /// Rows holding the final (across-repetition mean) estimates.
    pub fn mean_rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.repetition == Repetition::Mean)
    }

    /// Tab-delimited table, one line per (row, basis index), full double
    /// precision. Byte-identical across runs of the same config.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t_ns\tbasis_index\tpop_est\tpop_oracle\tepsilon\tshots\trepetition\n");
        for row in &self.rows {
            for j in 0..self.dim {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    full(row.t * 1e9),
                    j,
                    full(row.estimated[j]),
                    full(row.oracle[j]),
                    row.epsilon_label,
                    row.shots,
                    row.repetition,
                ));
            }
        }
        out
    }

    /// Structured document: config echo plus all rows.
    pub fn to_json(&self) -> crate::error::Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Serialization(e.to_string()))
    }
}

/// Error metrics of the mean-row estimates against the oracle columns.
#[derive(Debug, Clone, Serialize)]
pub struct TraceMetrics {
    /// Mean over grid points and basis states of |estimated - oracle|.
    pub mae: f64,
    pub max_abs_err: f64,
    /// Per time point: mean absolute residual over basis states.
    pub per_time: Vec<(f64, f64)>,
}

/// Compare the final estimates of a trace to its oracle columns.
pub fn compare_to_oracle(trace: &PopulationTrace) -> TraceMetrics {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut max_abs = 0.0f64;
    let mut per_time = Vec::new();
    for row in trace.mean_rows() {
        let mut row_sum = 0.0;
        for (e, o) in row.estimated.iter().zip(&row.oracle) {
            let err = (e - o).abs();
            total += err;
            row_sum += err;
            max_abs = max_abs.max(err);
            count += 1;
        }
        per_time.push((row.t, row_sum / row.estimated.len() as f64));
    }
    TraceMetrics {
        mae: if count == 0 { 0.0 } else { total / count as f64 },
        max_abs_err: max_abs,
        per_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelFamily;
    use crate::experiment::{run_trace, ExperimentConfig};

    #[test]
    fn tsv_layout_and_determinism() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![0.0, 1.0e-9];
        let trace = run_trace(&config).unwrap();
        let text = trace.to_tsv();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t_ns\tbasis_index\tpop_est\tpop_oracle\tepsilon\tshots\trepetition"
        );
        // 2 times × (1 repetition + 1 mean) × 2 basis states
        assert_eq!(lines.count(), 8);
        assert_eq!(text, run_trace(&config).unwrap().to_tsv());
    }

    #[test]
    fn json_contains_config_echo() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![0.0];
        let trace = run_trace(&config).unwrap();
        let text = trace.to_json().unwrap();
        assert!(text.contains("\"config\""));
        assert!(text.contains("\"rows\""));
        assert!(text.contains("\"amp-damp-zero-T\""));
    }

    #[test]
    fn metrics_zero_when_estimates_equal_oracle() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![0.0];
        let mut trace = run_trace(&config).unwrap();
        for row in &mut trace.rows {
            row.estimated = row.oracle.clone();
        }
        let metrics = compare_to_oracle(&trace);
        assert_eq!(metrics.mae, 0.0);
        assert_eq!(metrics.max_abs_err, 0.0);
    }

    #[test]
    fn mae_counts_only_mean_rows() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![0.0, 0.5e-9, 1.5e-9];
        let trace = run_trace(&config).unwrap();
        let metrics = compare_to_oracle(&trace);
        assert_eq!(metrics.per_time.len(), 3);
        assert!(metrics.mae > 0.0 && metrics.mae < 0.05);
    }
}
