//! Run summary: region counts, preservation and repair counts, and per-region
//! minimum robustness statistics.

use serde::{Deserialize, Serialize};

use crate::region::{PartitionState, RegionClass};

pub const REPORT_FORMAT: &str = "isar-report";
pub const REPORT_VERSION: u32 = 1;

/// `count` out of `of`, rendered as `count (pct%)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub count: usize,
    pub of: usize,
}

impl Count {
    pub fn percent(&self) -> f64 {
        if self.of == 0 {
            0.0
        } else {
            100.0 * self.count as f64 / self.of as f64
        }
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt(), n: values.len() })
    }
}

/// Minimum sampled robustness per region, summarised over failed regions,
/// over verified and unknown regions, and over all regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinRobStats {
    pub failed: Option<Stat>,
    pub safe: Option<Stat>,
    pub overall: Option<Stat>,
}

impl MinRobStats {
    pub fn from_state(state: &PartitionState) -> Self {
        let mins: Vec<(RegionClass, f64)> = (0..state.regions.len())
            .map(|i| {
                let min = state.robustness[i].iter().copied().fold(f64::INFINITY, f64::min);
                (state.class_of(i), min)
            })
            .collect();
        let pick = |keep: &dyn Fn(RegionClass) -> bool| {
            let v: Vec<f64> = mins.iter().filter(|(c, _)| keep(*c)).map(|&(_, m)| m).collect();
            Stat::of(&v)
        };
        MinRobStats {
            failed: pick(&|c| c == RegionClass::Failed),
            safe: pick(&|c| c != RegionClass::Failed),
            overall: pick(&|_| true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub verified: usize,
    pub unknown: usize,
    pub failed: usize,
    pub broken: Option<Count>,
    pub repaired: Option<Count>,
    pub min_rob: Option<MinRobStats>,
}

impl ReportRow {
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.verified, self.unknown, self.failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub format: String,
    pub version: u32,
    pub plant: String,
    pub method: String,
    pub regions: usize,
    pub rows: Vec<ReportRow>,
    pub rounds: usize,
    /// Regions verified before repair that fail verification afterwards.
    pub broken_regions: Vec<usize>,
    /// Regions failing before repair with no failing sample afterwards.
    pub repaired_regions: Vec<usize>,
}

impl RepairReport {
    pub fn new(plant: &str, method: &str, regions: usize) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            plant: plant.into(),
            method: method.into(),
            regions,
            rows: Vec::new(),
            rounds: 0,
            broken_regions: Vec::new(),
            repaired_regions: Vec::new(),
        }
    }

    pub fn check_header(&self) -> std::result::Result<(), String> {
        if self.format != REPORT_FORMAT {
            return Err(format!("expected format `{REPORT_FORMAT}`, found `{}`", self.format));
        }
        if self.version != REPORT_VERSION {
            return Err(format!("unsupported report version {}", self.version));
        }
        Ok(())
    }

    /// Row for the state before any repair.
    pub fn before_row(state: &PartitionState, with_stats: bool) -> ReportRow {
        let (v, u, f) = state.triple();
        ReportRow {
            label: "Before repair".into(),
            verified: v,
            unknown: u,
            failed: f,
            broken: None,
            repaired: None,
            min_rob: with_stats.then(|| MinRobStats::from_state(state)),
        }
    }

    /// Row for the final state, compared against `initial`.
    pub fn after_row(label: &str, initial: &PartitionState, fin: &PartitionState) -> (ReportRow, Vec<usize>, Vec<usize>) {
        let broken: Vec<usize> = initial.protected.iter().copied().filter(|&i| !fin.verified[i]).collect();
        let mut repaired: Vec<usize> = initial
            .failed
            .iter()
            .copied()
            .filter(|&i| fin.robustness[i].iter().all(|&r| r >= 0.0))
            .collect();
        repaired.sort_unstable();
        let (v, u, f) = fin.triple();
        let row = ReportRow {
            label: label.into(),
            verified: v,
            unknown: u,
            failed: f,
            broken: Some(Count { count: broken.len(), of: initial.protected.len() }),
            repaired: Some(Count { count: repaired.len(), of: initial.failed.len() }),
            min_rob: Some(MinRobStats::from_state(fin)),
        };
        (row, broken, repaired)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (2.0, 1.0, 2));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn percentages() {
        assert_eq!(Count { count: 0, of: 0 }.percent(), 0.0);
        assert!((Count { count: 730, of: 897 }.percent() - 81.382).abs() < 1e-3);
    }
}
