use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{MetricsConfig, MetricsRecord};
use crate::control::ControlSystem;
use crate::error::{Error, Result};

/// Mean and standard error (sample standard deviation over √n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub system: ControlSystem,
    pub scenario: String,
    pub completion_time: Stat,
    pub mode_switches: Stat,
    pub pauses: Stat,
    pub success_rate: f64,
}

/// Percent change of Point-and-Go relative to a baseline; positive is a reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub scenario: String,
    pub baseline: ControlSystem,
    pub metric: String,
    pub percent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub reductions: Vec<Reduction>,
}

impl Summary {
    pub fn cell(&self, system: ControlSystem, scenario: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.system == system && c.scenario == scenario)
    }
}

/// Groups records by system and scenario, in first-seen scenario order.
pub fn summarize(records: &[MetricsRecord]) -> Summary {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, ControlSystem), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        let idx = match order.iter().position(|s| *s == r.scenario) {
            Some(i) => i,
            None => {
                order.push(&r.scenario);
                order.len() - 1
            }
        };
        groups.entry((idx, r.system)).or_default().push(r);
    }
    let mut cells = Vec::new();
    for ((idx, system), rs) in &groups {
        let col = |f: fn(&MetricsRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
        let (Some(ct), Some(ms), Some(ps)) = (
            Stat::of(&col(|r| r.completion_time)),
            Stat::of(&col(|r| r.mode_switches as f64)),
            Stat::of(&col(|r| r.pauses as f64)),
        ) else {
            warn!(scenario = order[*idx], %system, "empty cell omitted");
            continue;
        };
        cells.push(CellSummary {
            system: *system,
            scenario: order[*idx].to_string(),
            completion_time: ct,
            mode_switches: ms,
            pauses: ps,
            success_rate: rs.iter().filter(|r| r.success).count() as f64 / rs.len() as f64,
        });
    }
    let mut reductions = Vec::new();
    for scenario in &order {
        let Some(png) = cells
            .iter()
            .find(|c| c.system == ControlSystem::PointAndGo && c.scenario == *scenario)
        else {
            continue;
        };
        for base in cells
            .iter()
            .filter(|c| c.system != ControlSystem::PointAndGo && c.scenario == *scenario)
        {
            let metrics = [
                ("completion_time", png.completion_time.mean, base.completion_time.mean),
                ("mode_switches", png.mode_switches.mean, base.mode_switches.mean),
                ("pauses", png.pauses.mean, base.pauses.mean),
            ];
            for (metric, p, b) in metrics {
                if b > 0.0 {
                    reductions.push(Reduction {
                        scenario: scenario.to_string(),
                        baseline: base.system,
                        metric: metric.to_string(),
                        percent: (b - p) / b * 100.0,
                    });
                }
            }
        }
    }
    Summary { cells, reductions }
}

/// Settings that every report carries so its numbers can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub epsilon: f64,
    pub tau: f64,
    pub gains_hash: String,
    pub seed: u64,
    pub dt: f64,
}

impl ReportConfig {
    pub fn new(metrics: &MetricsConfig, gains_hash: impl Into<String>, seed: u64, dt: f64) -> Self {
        Self {
            epsilon: metrics.epsilon,
            tau: metrics.tau,
            gains_hash: gains_hash.into(),
            seed,
            dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    system: ControlSystem,
    scenario: &'a str,
    seed: u64,
    success: bool,
    completion_time: f64,
    mode_switches: usize,
    pauses: usize,
    epsilon: f64,
    tau: f64,
    gains_hash: &'a str,
    base_seed: u64,
}

impl Report {
    pub fn new(config: ReportConfig, records: Vec<MetricsRecord>) -> Self {
        let summary = summarize(&records);
        Self {
            config,
            records,
            summary,
        }
    }

    /// One row per record; every row repeats the report config.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(CsvRow {
                system: r.system,
                scenario: &r.scenario,
                seed: r.seed,
                success: r.success,
                completion_time: r.completion_time,
                mode_switches: r.mode_switches,
                pauses: r.pauses,
                epsilon: self.config.epsilon,
                tau: self.config.tau,
                gains_hash: &self.config.gains_hash,
                base_seed: self.config.seed,
            })
            .map_err(|e| Error::Log(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Log(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `records.csv` and `report.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("records.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let json_path = dir.join("report.json");
        std::fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(system: ControlSystem, scenario: &str, t: f64, switches: usize) -> MetricsRecord {
        MetricsRecord {
            system,
            scenario: scenario.into(),
            seed: 0,
            success: true,
            completion_time: t,
            mode_switches: switches,
            pauses: 0,
            phase_timestamps: Vec::new(),
            input_log: None,
            trajectory_log: None,
        }
    }

    #[test]
    fn single_record_has_zero_se() {
        let s = Stat::of(&[4.0]).unwrap();
        assert_eq!((s.mean, s.se), (4.0, 0.0));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn two_records_closed_form() {
        let s = Stat::of(&[10.0, 20.0]).unwrap();
        assert_eq!(s.mean, 15.0);
        assert!((s.se - 5.0).abs() < 1e-12);
    }

    #[test]
    fn reductions_against_each_baseline() {
        let recs = vec![
            rec(ControlSystem::PointAndGo, "goalpost", 8.0, 0),
            rec(ControlSystem::Cartesian, "goalpost", 10.0, 2),
            rec(ControlSystem::Pilot, "goalpost", 16.0, 2),
        ];
        let s = summarize(&recs);
        assert_eq!(s.cells.len(), 3);
        let r = s
            .reductions
            .iter()
            .find(|r| r.baseline == ControlSystem::Cartesian && r.metric == "completion_time")
            .unwrap();
        assert!((r.percent - 20.0).abs() < 1e-12);
        let r = s
            .reductions
            .iter()
            .find(|r| r.baseline == ControlSystem::Pilot && r.metric == "mode_switches")
            .unwrap();
        assert_eq!(r.percent, 100.0);
        // Zero baseline pauses give no pause reduction.
        assert!(!s.reductions.iter().any(|r| r.metric == "pauses"));
    }

    #[test]
    fn csv_embeds_config() {
        let report = Report::new(
            ReportConfig::new(&MetricsConfig::default(), "abc123", 42, 0.01),
            vec![rec(ControlSystem::Pilot, "hinge_arc", 3.5, 1)],
        );
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("gains_hash"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("pilot,hinge_arc,0,true,3.5,1,0,0.05,0.3,abc123,42"));
        let json = report.to_json().unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
