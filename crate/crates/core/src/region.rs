//! Rectangular partitions of the initial-state box, per-region sampling and
//! the verified / unknown / failed classification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Relative slack when counting cells, so `extent / step` that lands a hair
/// above an integer does not create a sliver cell.
const COUNT_SLACK: f64 = 1e-9;

/// Axis-aligned cell over the free initial-state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Closed-box membership.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    /// Uniform sub-boxes, `splits` per dimension, in lexicographic order.
    /// Sub-box ids are local indices.
    pub fn subdivide(&self, splits: usize) -> Vec<Region> {
        let splits = splits.max(1);
        let mut out = Vec::with_capacity(splits.pow(self.dim() as u32));
        let mut index = vec![0usize; self.dim()];
        loop {
            let (lower, upper) = index
                .iter()
                .enumerate()
                .map(|(d, &k)| {
                    let (l, u) = (self.lower[d], self.upper[d]);
                    let w = (u - l) / splits as f64;
                    let lo = if k == 0 { l } else { l + w * k as f64 };
                    let hi = if k + 1 == splits { u } else { l + w * (k + 1) as f64 };
                    (lo, hi)
                })
                .unzip();
            out.push(Region { id: out.len(), lower, upper });
            if !advance(&mut index, &vec![splits; self.dim()]) {
                return out;
            }
        }
    }
}

/// Odometer increment over a mixed-radix index; last coordinate fastest.
fn advance(index: &mut [usize], counts: &[usize]) -> bool {
    for d in (0..index.len()).rev() {
        index[d] += 1;
        if index[d] < counts[d] {
            return true;
        }
        index[d] = 0;
    }
    false
}

/// Grid partition of a box. Cells are `step` wide per dimension, with the last
/// cell truncated at the boundary when the step does not divide the extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub steps: Vec<f64>,
    pub counts: Vec<usize>,
    pub regions: Vec<Region>,
}

impl Partition {
    pub fn new(lower: &[f64], upper: &[f64], steps: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != steps.len() {
            return Err(Error::DimensionMismatch {
                context: "partition bounds and steps",
                expected: lower.len(),
                got: if lower.len() != upper.len() { upper.len() } else { steps.len() },
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("partition", "box has no dimensions"));
        }
        for d in 0..lower.len() {
            if !(lower[d].is_finite() && upper[d].is_finite()) || lower[d] >= upper[d] {
                return Err(Error::invalid(
                    "partition",
                    format!("empty box in dimension {d}: [{}, {}]", lower[d], upper[d]),
                ));
            }
            if !(steps[d] > 0.0) || !steps[d].is_finite() {
                return Err(Error::invalid(
                    "partition",
                    format!("step in dimension {d} must be positive, got {}", steps[d]),
                ));
            }
        }
        let counts: Vec<usize> = (0..lower.len())
            .map(|d| {
                let ratio = (upper[d] - lower[d]) / steps[d];
                ((ratio - COUNT_SLACK * ratio.max(1.0)).ceil() as usize).max(1)
            })
            .collect();
        let mut partition = Partition {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            steps: steps.to_vec(),
            counts,
            regions: Vec::new(),
        };
        let total: usize = partition.counts.iter().product();
        let mut regions = Vec::with_capacity(total);
        let mut index = vec![0usize; lower.len()];
        loop {
            let (lo, hi) = (0..lower.len())
                .map(|d| (partition.cell_lower(d, index[d]), partition.cell_upper(d, index[d])))
                .unzip();
            regions.push(Region { id: regions.len(), lower: lo, upper: hi });
            if !advance(&mut index, &partition.counts) {
                break;
            }
        }
        partition.regions = regions;
        Ok(partition)
    }

    fn cell_lower(&self, d: usize, k: usize) -> f64 {
        if k == 0 {
            self.lower[d]
        } else {
            self.lower[d] + self.steps[d] * k as f64
        }
    }

    fn cell_upper(&self, d: usize, k: usize) -> f64 {
        if k + 1 >= self.counts[d] {
            self.upper[d]
        } else {
            self.lower[d] + self.steps[d] * (k + 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Region containing `point`; points on a shared face go to the lower id.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.lower.len() {
            return None;
        }
        let mut id = 0;
        for (d, &x) in point.iter().enumerate() {
            if !(self.lower[d] <= x && x <= self.upper[d]) {
                return None;
            }
            let n = self.counts[d];
            let mut k = (((x - self.lower[d]) / self.steps[d]).floor().max(0.0) as usize).min(n - 1);
            while k > 0 && x <= self.cell_lower(d, k) {
                k -= 1;
            }
            while k + 1 < n && x > self.cell_upper(d, k) {
                k += 1;
            }
            id = id * n + k;
        }
        Some(id)
    }
}

/// Convenience wrapper returning only the regions.
pub fn partition(lower: &[f64], upper: &[f64], steps: &[f64]) -> Result<Vec<Region>> {
    Partition::new(lower, upper, steps).map(|p| p.regions)
}

/// `k` uniform points strictly inside the box, drawn from `rng`.
pub fn sample_box<R: Rng + ?Sized>(lower: &[f64], upper: &[f64], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| loop {
                    let x = l + (u - l) * rng.random::<f64>();
                    if l < x && x < u {
                        break x;
                    }
                })
                .collect()
        })
        .collect()
}

/// The `k` region samples keyed by `(seed, region id)`.
pub fn sample_region(region: &Region, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::invalid("K", "at least one sample per region is required"));
    }
    let mut rng = stream(seed, Purpose::Sampling, region.id as u64);
    Ok(sample_box(&region.lower, &region.upper, k, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionClass {
    Verified,
    Unknown,
    Failed,
}

impl RegionClass {
    pub fn label(self) -> &'static str {
        match self {
            RegionClass::Verified => "verified",
            RegionClass::Unknown => "unknown",
            RegionClass::Failed => "failed",
        }
    }
}

/// Sum of a region's sampled robustness, the key the failed set is sorted by.
pub fn robustness_sum(robs: &[f64]) -> f64 {
    robs.iter().sum()
}

/// Sorts region ids by decreasing robustness sum, ties by id ascending.
pub fn sort_failed(ids: &mut [usize], robustness: &[Vec<f64>]) {
    ids.sort_by(|&a, &b| {
        robustness_sum(&robustness[b])
            .total_cmp(&robustness_sum(&robustness[a]))
            .then(a.cmp(&b))
    });
}

/// Regions with their samples, robustness values and verification flags,
/// split three ways.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    pub regions: Vec<Region>,
    pub samples: Vec<Vec<Vec<f64>>>,
    pub robustness: Vec<Vec<f64>>,
    pub verified: Vec<bool>,
    pub protected: Vec<usize>,
    pub unknown: Vec<usize>,
    /// Sorted by decreasing robustness sum.
    pub failed: Vec<usize>,
}

impl PartitionState {
    pub fn class_of(&self, id: usize) -> RegionClass {
        classify_one(self.verified[id], &self.robustness[id])
    }

    pub fn triple(&self) -> (usize, usize, usize) {
        (self.protected.len(), self.unknown.len(), self.failed.len())
    }

    pub fn snapshot(&self) -> Vec<RegionRecord> {
        self.regions
            .iter()
            .map(|r| RegionRecord {
                id: r.id,
                lower: r.lower.clone(),
                upper: r.upper.clone(),
                class: self.class_of(r.id),
                verified: self.verified[r.id],
                samples: self.samples[r.id].clone(),
                robustness: self.robustness[r.id].clone(),
            })
            .collect()
    }
}

fn classify_one(verified: bool, robs: &[f64]) -> RegionClass {
    if verified {
        RegionClass::Verified
    } else if robs.iter().any(|&r| r < 0.0) {
        RegionClass::Failed
    } else {
        RegionClass::Unknown
    }
}

pub fn classify(
    regions: Vec<Region>,
    samples: Vec<Vec<Vec<f64>>>,
    verified: Vec<bool>,
    robustness: Vec<Vec<f64>>,
) -> Result<PartitionState> {
    let m = regions.len();
    for (what, len) in [("samples", samples.len()), ("verification flags", verified.len()), ("robustness", robustness.len())] {
        if len != m {
            return Err(Error::DimensionMismatch { context: what, expected: m, got: len });
        }
    }
    let (mut protected, mut unknown, mut failed) = (Vec::new(), Vec::new(), Vec::new());
    for (i, region) in regions.iter().enumerate() {
        if region.id != i {
            return Err(Error::invalid("regions", format!("region at position {i} has id {}", region.id)));
        }
        if samples[i].len() != robustness[i].len() {
            return Err(Error::DimensionMismatch {
                context: "region samples vs robustness",
                expected: samples[i].len(),
                got: robustness[i].len(),
            });
        }
        let worst = robustness[i].iter().copied().fold(f64::INFINITY, f64::min);
        if verified[i] && worst < 0.0 {
            return Err(Error::VerifierInconsistency { region: i, rho: worst });
        }
        match classify_one(verified[i], &robustness[i]) {
            RegionClass::Verified => protected.push(i),
            RegionClass::Unknown => unknown.push(i),
            RegionClass::Failed => failed.push(i),
        }
    }
    sort_failed(&mut failed, &robustness);
    Ok(PartitionState { regions, samples, robustness, verified, protected, unknown, failed })
}

/// One region in a classification snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub class: RegionClass,
    pub verified: bool,
    pub samples: Vec<Vec<f64>>,
    pub robustness: Vec<f64>,
}

impl RegionRecord {
    pub fn min_robustness(&self) -> f64 {
        self.robustness.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub const SNAPSHOT_FORMAT: &str = "isar-regions";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSnapshot {
    pub format: String,
    pub version: u32,
    pub plant: String,
    /// Names of the free coordinates the region bounds refer to.
    pub coordinates: Vec<String>,
    pub regions: Vec<RegionRecord>,
}

impl ClassificationSnapshot {
    pub fn new(plant: &str, coordinates: Vec<String>, regions: Vec<RegionRecord>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            plant: plant.into(),
            coordinates,
            regions,
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |c| self.regions.iter().filter(|r| r.class == c).count();
        (count(RegionClass::Verified), count(RegionClass::Unknown), count(RegionClass::Failed))
    }

    pub fn check_header(&self) -> std::result::Result<(), String> {
        if self.format != SNAPSHOT_FORMAT {
            return Err(format!("expected format `{SNAPSHOT_FORMAT}`, found `{}`", self.format));
        }
        if self.version != SNAPSHOT_VERSION {
            return Err(format!("unsupported version {}", self.version));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uuv_grid_has_2000_regions() {
        let p = Partition::new(&[12.0, 10.0], &[22.0, 30.0], &[0.1, 1.0]).unwrap();
        assert_eq!(p.counts, vec![100, 20]);
        assert_eq!(p.len(), 2000);
        assert_eq!(p.regions[0].lower, vec![12.0, 10.0]);
        assert_eq!(p.regions[1].lower[1], 11.0);
        assert_eq!(p.regions[1999].upper, vec![22.0, 30.0]);
    }

    #[test]
    fn mc_grid_has_900_regions() {
        let p = Partition::new(&[-0.505, -0.055], &[0.395, 0.045], &[0.01, 0.01]).unwrap();
        assert_eq!(p.counts, vec![90, 10]);
        assert_eq!(p.len(), 900);
    }

    #[test]
    fn unit_interval_halves() {
        let r = partition(&[0.0], &[1.0], &[0.5]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].lower[0], r[0].upper[0]), (0.0, 0.5));
        assert_eq!((r[1].lower[0], r[1].upper[0]), (0.5, 1.0));
    }

    #[test]
    fn non_dividing_step_truncates_last_cell() {
        let r = partition(&[0.0], &[1.0], &[0.4]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[2].upper[0], 1.0);
        assert!((r[2].volume() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bad_partitions_are_rejected() {
        assert!(partition(&[0.0], &[1.0], &[0.0]).is_err());
        assert!(partition(&[0.0], &[1.0], &[-0.1]).is_err());
        assert!(partition(&[1.0], &[1.0], &[0.1]).is_err());
        assert!(partition(&[0.0, 0.0], &[1.0], &[0.1]).is_err());
    }

    #[test]
    fn locate_prefers_lower_region_on_faces() {
        let p = Partition::new(&[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(p.locate(&[0.5, 0.5]), Some(0));
        assert_eq!(p.locate(&[0.75, 0.5]), Some(2));
        assert_eq!(p.locate(&[0.75, 0.75]), Some(3));
        assert_eq!(p.locate(&[1.0, 1.0]), Some(3));
        assert_eq!(p.locate(&[1.5, 0.0]), None);
    }

    #[test]
    fn sampling_is_deterministic_and_interior() {
        let r = Region { id: 7, lower: vec![0.0, 5.0], upper: vec![1e-9, 5.0 + 1e-9] };
        let a = sample_region(&r, 50, 3).unwrap();
        assert_eq!(a, sample_region(&r, 50, 3).unwrap());
        assert_ne!(a, sample_region(&r, 50, 4).unwrap());
        assert!(a.iter().all(|p| p.iter().zip(r.lower.iter().zip(&r.upper)).all(|(x, (l, u))| l < x && x < u)));
        assert_eq!(sample_region(&r, 1, 0).unwrap().len(), 1);
        assert!(sample_region(&r, 0, 0).is_err());
    }

    fn toy_regions(n: usize) -> Vec<Region> {
        partition(&[0.0], &[n as f64], &[1.0]).unwrap()
    }

    #[test]
    fn classification_rules() {
        let regions = toy_regions(4);
        let samples = vec![vec![vec![0.5]]; 4];
        let state = classify(
            regions,
            samples,
            vec![true, false, false, false],
            vec![vec![1.0], vec![0.0], vec![-1.0, 0.0], vec![3.0, -0.5]],
        )
        .unwrap_err();
        // Sample and robustness lengths disagree for region 2.
        assert_eq!(state.kind(), "dimension_mismatch");

        let state = classify(
            toy_regions(4),
            vec![vec![vec![0.5], vec![0.6]]; 4],
            vec![true, false, false, false],
            vec![vec![1.0, 2.0], vec![0.0, 0.1], vec![-1.0, 0.0], vec![3.5, -0.5]],
        )
        .unwrap();
        assert_eq!(state.protected, vec![0]);
        assert_eq!(state.unknown, vec![1]);
        assert_eq!(state.failed, vec![3, 2]);
        assert_eq!(state.triple(), (1, 1, 2));
    }

    #[test]
    fn all_verified_means_nothing_failed() {
        let state = classify(toy_regions(3), vec![vec![vec![0.5]]; 3], vec![true; 3], vec![vec![0.2]; 3]).unwrap();
        assert!(state.failed.is_empty() && state.unknown.is_empty());
    }

    #[test]
    fn failed_sort_ties_by_id() {
        let robs = vec![vec![-1.0], vec![3.0], vec![-1.0], vec![3.0]];
        let mut ids = vec![2, 0, 3, 1];
        sort_failed(&mut ids, &robs);
        assert_eq!(ids, vec![1, 3, 0, 2]);
    }

    #[test]
    fn verified_failing_region_is_inconsistent() {
        let err = classify(toy_regions(1), vec![vec![vec![0.5]]], vec![true], vec![vec![-0.1]]).unwrap_err();
        assert!(matches!(err, Error::VerifierInconsistency { region: 0, .. }));
    }

    #[test]
    fn subdivide_covers_region() {
        let r = Region { id: 0, lower: vec![0.0, 1.0], upper: vec![1.0, 3.0] };
        let parts = r.subdivide(4);
        assert_eq!(parts.len(), 16);
        let vol: f64 = parts.iter().map(Region::volume).sum();
        assert!((vol - r.volume()).abs() < 1e-12);
        assert_eq!(parts[15].upper, r.upper);
    }
}
