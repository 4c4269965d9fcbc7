//! Slice-level uncertainty from a co-registered ensemble of probability
//! maps: consensus aggregation, the type-1/2/3 measures, and their
//! correlation with GT-based metrics.
//!
//! Foreground for type-1/2 is the consensus label (mean probability
//! >= 0.5). Type-2 uses the population standard deviation across members.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::dice_slices;
use crate::records::SliceRecord;
use crate::volume::{ElementKind, Volume};

pub const CONSENSUS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Type1,
    Type2,
    Type3,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [MeasureKind::Type1, MeasureKind::Type2, MeasureKind::Type3];

    pub fn of(self, r: &SliceRecord) -> Option<f64> {
        match self {
            MeasureKind::Type1 => r.type1,
            MeasureKind::Type2 => r.type2,
            MeasureKind::Type3 => r.type3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Dsc,
    HdMm,
}

impl TargetKind {
    pub const ALL: [TargetKind; 2] = [TargetKind::Dsc, TargetKind::HdMm];

    pub fn of(self, r: &SliceRecord) -> Option<f64> {
        match self {
            TargetKind::Dsc => r.dsc,
            TargetKind::HdMm => r.hd_mm,
        }
    }
}

/// Ordered, co-registered probability maps for one case.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub case_id: String,
    pub members: Vec<Volume>,
}

impl Ensemble {
    pub fn new(case_id: impl Into<String>, members: Vec<Volume>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidArgument("ensemble needs >= 2 members".into()));
        }
        for m in &members[1..] {
            if !m.same_grid(&members[0]) {
                return Err(Error::DimsMismatch("ensemble members on different grids".into()));
            }
        }
        for m in &members {
            if !m.is_probability() {
                return Err(Error::InvalidArgument("member values outside [0,1]".into()));
            }
        }
        Ok(Ensemble { case_id: case_id.into(), members })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.members[0].dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.members[0].spacing
    }

    pub fn n_pairs(&self) -> usize {
        let m = self.members.len();
        m * (m - 1) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceUncertainty {
    pub slice_index: usize,
    /// Consensus foreground pixel count on the slice.
    pub n_fg: usize,
    pub type1: f64,
    pub type2: f64,
    pub type3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub measure: MeasureKind,
    pub target: TargetKind,
    pub r: f64,
    pub n: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn get(&self, measure: MeasureKind, target: TargetKind) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.measure == measure && e.target == target)
    }

    /// The measure most correlated (by |r|) with `target`.
    pub fn most_correlated(&self, target: TargetKind) -> Option<MeasureKind> {
        self.entries
            .iter()
            .filter(|e| e.target == target)
            .max_by(|a, b| a.r.abs().partial_cmp(&b.r.abs()).unwrap())
            .map(|e| e.measure)
    }
}

/// Voxelwise mean across members and its thresholded consensus label.
pub fn aggregate(e: &Ensemble) -> (Volume, Volume) {
    let dims = e.dims();
    let mut mean = Volume::zeros(dims, e.spacing(), ElementKind::Float32);
    let m = e.members.len() as f64;
    // accumulate in f64 so the threshold decision is stable
    let mut label = Volume::zeros(dims, e.spacing(), ElementKind::Uint8);
    for i in 0..mean.len() {
        let s: f64 = e.members.iter().map(|mb| mb.data[i] as f64).sum();
        let mu = s / m;
        mean.data[i] = mu as f32;
        label.data[i] = (mu >= CONSENSUS_THRESHOLD) as u8 as f32;
    }
    (mean, label)
}

fn consensus_fg_pixels(e: &Ensemble, z: usize) -> Vec<usize> {
    let (_, ny, nx) = e.dims();
    let n = ny * nx;
    let m = e.members.len() as f64;
    let base = z * n;
    (0..n)
        .filter(|&i| {
            let s: f64 = e.members.iter().map(|mb| mb.data[base + i] as f64).sum();
            s / m >= CONSENSUS_THRESHOLD
        })
        .collect()
}

/// Type-1: mean cross-member probability over consensus-FG pixels.
pub fn type1_mean_prob(e: &Ensemble, slice_index: usize) -> Result<f64> {
    let fg = consensus_fg_pixels(e, slice_index);
    type1_on_pixels(e, slice_index, &fg)
}

fn type1_on_pixels(e: &Ensemble, z: usize, fg: &[usize]) -> Result<f64> {
    if fg.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (_, ny, nx) = e.dims();
    let base = z * ny * nx;
    let m = e.members.len() as f64;
    let sum: f64 = fg
        .iter()
        .map(|&i| e.members.iter().map(|mb| mb.data[base + i] as f64).sum::<f64>() / m)
        .sum();
    Ok(sum / fg.len() as f64)
}

/// Type-2: mean cross-member population standard deviation over
/// consensus-FG pixels.
pub fn type2_prob_variation(e: &Ensemble, slice_index: usize) -> Result<f64> {
    let fg = consensus_fg_pixels(e, slice_index);
    type2_on_pixels(e, slice_index, &fg)
}

fn type2_on_pixels(e: &Ensemble, z: usize, fg: &[usize]) -> Result<f64> {
    if fg.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (_, ny, nx) = e.dims();
    let base = z * ny * nx;
    let m = e.members.len() as f64;
    let sum: f64 = fg
        .iter()
        .map(|&i| {
            let mean = e.members.iter().map(|mb| mb.data[base + i] as f64).sum::<f64>() / m;
            let var = e
                .members
                .iter()
                .map(|mb| {
                    let d = mb.data[base + i] as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / m;
            var.sqrt()
        })
        .sum();
    Ok(sum / fg.len() as f64)
}

/// Type-3: mean pairwise pseudo-DSC between thresholded member labels on
/// the slice. Both-empty pairs score 1.0; undefined only when every
/// member label is empty there.
pub fn type3_pairwise_dsc(e: &Ensemble, slice_index: usize) -> Result<f64> {
    let labels: Vec<Vec<f32>> = e
        .members
        .iter()
        .map(|mb| {
            mb.slice(slice_index)
                .iter()
                .map(|&p| (p as f64 >= CONSENSUS_THRESHOLD) as u8 as f32)
                .collect()
        })
        .collect();
    if labels.iter().all(|l| l.iter().all(|&v| v == 0.0)) {
        return Err(Error::EmptyMask);
    }
    let m = labels.len();
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            sum += dice_slices(&labels[i], &labels[j]);
        }
    }
    Ok(sum / (m * (m - 1) / 2) as f64)
}

/// All three measures on every slice with consensus foreground.
pub fn slice_uncertainty(e: &Ensemble) -> Result<Vec<SliceUncertainty>> {
    let (nz, _, _) = e.dims();
    let mut out = Vec::new();
    for z in 0..nz {
        let fg = consensus_fg_pixels(e, z);
        if fg.is_empty() {
            continue;
        }
        out.push(SliceUncertainty {
            slice_index: z,
            n_fg: fg.len(),
            type1: type1_on_pixels(e, z, &fg)?,
            type2: type2_on_pixels(e, z, &fg)?,
            type3: type3_pairwise_dsc(e, z)?,
        });
    }
    Ok(out)
}

/// Standard Pearson correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("need >= 3 samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("zero-variance input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson r for every (measure, target) pair over joined slice records,
/// dropping rows where either side is undefined.
pub fn correlate(records: &[SliceRecord]) -> Result<CorrelationReport> {
    let mut entries = Vec::with_capacity(6);
    for measure in MeasureKind::ALL {
        for target in TargetKind::ALL {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter_map(|r| Some((measure.of(r)?, target.of(r)?)))
                .collect();
            let dropped = records.len() - pairs.len();
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let r = pearson_r(&xs, &ys)?;
            entries.push(CorrelationEntry { measure, target, r, n: pairs.len(), dropped });
        }
    }
    Ok(CorrelationReport { entries })
}
