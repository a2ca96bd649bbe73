//! Aggregation of run records into the mean/stderr CSV series.

use std::path::Path;

use nortonq_core::learner::RunRecord;

pub const CSV_HEADER: &str = "t,mean_regret,stderr_regret,mean_threshold";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub t: Vec<f64>,
    pub mean_regret: Vec<f64>,
    pub stderr_regret: Vec<f64>,
    pub mean_threshold: Vec<f64>,
}

/// Folds completed runs into per-time means. Pure and order-independent:
/// callers sort the records by seed so the output bytes never depend on
/// completion order. All runs must share the same sampling grid.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateSeries, String> {
    if records.is_empty() {
        return Err("no runs to aggregate".to_string());
    }
    let grid: Vec<f64> = records[0].points.iter().map(|p| p.t as f64).collect();
    for record in records {
        let this: Vec<f64> = record.points.iter().map(|p| p.t as f64).collect();
        if this != grid {
            return Err(format!(
                "run with seed {} has a different sampling grid",
                record.seed
            ));
        }
        for p in &record.points {
            let expected = record.gain_star * p.t as f64 - p.cum_reward;
            if (p.regret - expected).abs() > 1e-9 * p.t as f64 {
                return Err(format!(
                    "run with seed {}: regret at t = {} inconsistent with its cumulative reward",
                    record.seed, p.t
                ));
            }
        }
    }
    let n = records.len() as f64;
    let mut series = AggregateSeries {
        t: grid.clone(),
        mean_regret: vec![0.0; grid.len()],
        stderr_regret: vec![0.0; grid.len()],
        mean_threshold: vec![0.0; grid.len()],
    };
    for (i, _) in grid.iter().enumerate() {
        let regrets: Vec<f64> = records.iter().map(|r| r.points[i].regret).collect();
        let mean = regrets.iter().sum::<f64>() / n;
        series.mean_regret[i] = mean;
        if records.len() > 1 {
            let var =
                regrets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            series.stderr_regret[i] = (var / n).sqrt();
        }
        series.mean_threshold[i] = records
            .iter()
            .map(|r| r.points[i].threshold as f64)
            .sum::<f64>()
            / n;
    }
    Ok(series)
}

impl AggregateSeries {
    /// Rescales both axes by `1 / tau_mix` (module-count comparison plots).
    pub fn rescaled(&self, tau_mix: usize) -> AggregateSeries {
        let tau = tau_mix as f64;
        AggregateSeries {
            t: self.t.iter().map(|&t| t / tau).collect(),
            mean_regret: self.mean_regret.iter().map(|r| r / tau).collect(),
            stderr_regret: self.stderr_regret.iter().map(|r| r / tau).collect(),
            mean_threshold: self.mean_threshold.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.t[i], self.mean_regret[i], self.stderr_regret[i], self.mean_threshold[i]
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), String> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    /// Parses an aggregate CSV, naming any missing column.
    pub fn read_csv(path: &Path) -> Result<AggregateSeries, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse_csv(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse_csv(text: &str) -> Result<AggregateSeries, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty CSV")?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        for required in CSV_HEADER.split(',') {
            if !columns.contains(&required) {
                return Err(format!("missing column \"{required}\""));
            }
        }
        let index = |name: &str| columns.iter().position(|c| *c == name).unwrap();
        let (it, ir, is, ith) = (
            index("t"),
            index("mean_regret"),
            index("stderr_regret"),
            index("mean_threshold"),
        );
        let mut series = AggregateSeries {
            t: Vec::new(),
            mean_regret: Vec::new(),
            stderr_regret: Vec::new(),
            mean_threshold: Vec::new(),
        };
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |i: usize| -> Result<f64, String> {
                fields
                    .get(i)
                    .ok_or(format!("row {}: too few fields", row + 2))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("row {}: {e}", row + 2))
            };
            series.t.push(parse(it)?);
            series.mean_regret.push(parse(ir)?);
            series.stderr_regret.push(parse(is)?);
            series.mean_threshold.push(parse(ith)?);
        }
        if series.t.is_empty() {
            return Err("CSV has no data rows".to_string());
        }
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nortonq_core::learner::{RunPoint, RunRecord, RunSummary};

    fn record(seed: u64, regrets: &[f64]) -> RunRecord {
        RunRecord {
            seed,
            horizon: regrets.len() as u64 * 10,
            tau_mix: 1,
            gain_star: 1.0,
            points: regrets
                .iter()
                .enumerate()
                .map(|(i, &regret)| {
                    let t = (i as u64 + 1) * 10;
                    RunPoint {
                        t,
                        cum_reward: t as f64 - regret, // gain_star = 1
                        regret,
                        threshold: 2,
                    }
                })
                .collect(),
            expected_regret: None,
            episodes: Vec::new(),
            summary: RunSummary {
                total_regret: *regrets.last().unwrap(),
                final_cum_reward: 0.0,
                episode_count: 1,
                modal_threshold_last_quarter: 2,
                discarded_steps: 0,
            },
            regions: None,
        }
    }

    #[test]
    fn aggregate_of_single_run_is_the_run() {
        let series = aggregate(&[record(1, &[1.0, 2.0])]).unwrap();
        assert_eq!(series.mean_regret, vec![1.0, 2.0]);
        assert_eq!(series.stderr_regret, vec![0.0, 0.0]);
    }

    #[test]
    fn csv_roundtrip_and_missing_column() {
        let series = aggregate(&[record(1, &[1.0, 2.0]), record(2, &[3.0, 4.0])]).unwrap();
        assert_eq!(series.mean_regret, vec![2.0, 3.0]);
        let text = series.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        let back = AggregateSeries::parse_csv(&text).unwrap();
        assert_eq!(back, series);

        let broken = text.replace("stderr_regret", "stderr");
        let err = AggregateSeries::parse_csv(&broken).unwrap_err();
        assert!(err.contains("stderr_regret"), "{err}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = record(1, &[1.0, 2.0]);
        let mut b = record(2, &[3.0, 4.0]);
        b.points[1].t = 999;
        assert!(aggregate(&[a, b]).is_err());
    }

    #[test]
    fn rescaling_divides_both_axes() {
        let series = aggregate(&[record(1, &[3.0, 6.0])]).unwrap();
        let rescaled = series.rescaled(3);
        assert_eq!(rescaled.t, vec![10.0 / 3.0, 20.0 / 3.0]);
        assert_eq!(rescaled.mean_regret, vec![1.0, 2.0]);
    }
}
