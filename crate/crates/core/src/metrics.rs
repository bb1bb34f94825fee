//! Evaluation: streamline classification scores (accuracy, macro F1) and
//! tract-level measures (identification rate, distance to atlas, weighted
//! Dice of voxelized tracts).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{dist, mdf_points, Point3, ResampledStreamline, Streamline};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{truth} truth labels vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} outside [0, {class_count})")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("tract has no streamlines")]
    EmptyTract,
    #[error("atlas tract has no streamlines")]
    EmptyAtlasTract,
    #[error("streamlines resampled to {0} and {1} points")]
    ResamplingMismatch(usize, usize),
    #[error("degenerate voxel grid bounds")]
    DegenerateBounds,
    #[error("voxel grids differ in origin, voxel size or dims")]
    GridMismatch,
    #[error("voxel grid has no visits")]
    EmptyGrid,
}

/// Rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self, MetricsError> {
        if truth.len() != pred.len() {
            return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<(), MetricsError> {
        for label in [truth, pred] {
            if label >= self.classes {
                return Err(MetricsError::LabelOutOfRange { label, class_count: self.classes });
            }
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|j| self.get(c, j)).sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, c)).sum()
    }

    /// Per-class F1; `None` for classes absent from both truth and prediction.
    pub fn per_class_f1(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let tp = self.get(c, c);
                let (actual, predicted) = (self.row_sum(c), self.col_sum(c));
                if actual == 0 && predicted == 0 {
                    return None;
                }
                // 2tp / (2tp + fp + fn)
                let denom = actual + predicted;
                Some(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
            })
            .collect()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / total as f64)
}

pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let present: Vec<f64> = cm.per_class_f1().into_iter().flatten().collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Predicted streamline count per class.
pub fn class_counts(pred: &[usize], classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for &p in pred {
        if p < classes {
            counts[p] += 1;
        }
    }
    counts
}

/// A tract counts as identified when at least `threshold` streamlines are
/// assigned to it.
pub fn is_identified(count: usize, threshold: usize) -> bool {
    count >= threshold
}

/// Fraction of `classes` (the anatomical ones, not "other") identified.
pub fn tir(pred: &[usize], classes: &[usize], threshold: usize) -> f64 {
    if classes.is_empty() {
        return 0.0;
    }
    let max = classes.iter().copied().max().unwrap_or(0) + 1;
    let counts = class_counts(pred, max);
    let hit = classes.iter().filter(|&&c| is_identified(counts[c], threshold)).count();
    hit as f64 / classes.len() as f64
}

/// Mean over tract streamlines of the smallest MDF to any atlas streamline.
pub fn tda(tract: &[ResampledStreamline], atlas: &[ResampledStreamline]) -> Result<f64, MetricsError> {
    if tract.is_empty() {
        return Err(MetricsError::EmptyTract);
    }
    if atlas.is_empty() {
        return Err(MetricsError::EmptyAtlasTract);
    }
    let m = atlas[0].m();
    if let Some(s) = tract.iter().chain(atlas).find(|s| s.m() != m) {
        return Err(MetricsError::ResamplingMismatch(m, s.m()));
    }
    let mins: Vec<f64> = tract
        .par_iter()
        .map(|s| atlas.iter().map(|a| mdf_points(s.points(), a.points())).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(mins.iter().sum::<f64>() / mins.len() as f64)
}

/// One row of a per-subject tract report.
#[derive(Debug, Clone, PartialEq)]
pub struct TractRow {
    pub class: usize,
    pub name: String,
    pub count: usize,
    pub identified: bool,
    /// Present for identified tracts that have atlas streamlines.
    pub tda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectReport {
    pub rows: Vec<TractRow>,
    pub tir: f64,
    /// Mean TDA over identified tracts; `None` when no tract was identified.
    pub tda: Option<f64>,
}

/// Groups streamlines by label.
pub fn group_by_class(streamlines: &[ResampledStreamline], labels: &[usize], classes: usize) -> Vec<Vec<ResampledStreamline>> {
    let mut groups = vec![Vec::new(); classes];
    for (s, &l) in streamlines.iter().zip(labels) {
        if l < classes {
            groups[l].push(s.clone());
        }
    }
    groups
}

/// TIR and TDA for one subject. `tract_classes` lists the anatomical
/// classes; the atlas is given as streamlines plus their labels.
pub fn subject_report(
    streamlines: &[ResampledStreamline],
    pred: &[usize],
    atlas: &[ResampledStreamline],
    atlas_labels: &[usize],
    tract_classes: &[usize],
    names: &BTreeMap<usize, String>,
    threshold: usize,
) -> Result<SubjectReport, MetricsError> {
    if streamlines.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: streamlines.len(), pred: pred.len() });
    }
    if atlas.len() != atlas_labels.len() {
        return Err(MetricsError::LengthMismatch { truth: atlas.len(), pred: atlas_labels.len() });
    }
    let classes = tract_classes
        .iter()
        .chain(pred)
        .chain(atlas_labels)
        .copied()
        .max()
        .map_or(0, |c| c + 1);
    let subject = group_by_class(streamlines, pred, classes);
    let reference = group_by_class(atlas, atlas_labels, classes);

    let mut rows = Vec::with_capacity(tract_classes.len());
    for &c in tract_classes {
        let count = subject[c].len();
        let identified = is_identified(count, threshold);
        let tda = if identified && count > 0 {
            match tda(&subject[c], &reference[c]) {
                Ok(v) => Some(v),
                Err(MetricsError::EmptyAtlasTract) => {
                    warn!("class {c}: no atlas streamlines, TDA skipped");
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let name = names.get(&c).cloned().unwrap_or_else(|| format!("class_{c}"));
        rows.push(TractRow { class: c, name, count, identified, tda });
    }
    let tir = tir(pred, tract_classes, threshold);
    let tdas: Vec<f64> = rows.iter().filter_map(|r| r.tda).collect();
    let tda = (!tdas.is_empty()).then(|| tdas.iter().sum::<f64>() / tdas.len() as f64);
    Ok(SubjectReport { rows, tir, tda })
}

/// Dataset TDA: mean over subjects of their per-subject TDA.
pub fn dataset_tda(reports: &[SubjectReport]) -> Option<f64> {
    let v: Vec<f64> = reports.iter().filter_map(|r| r.tda).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn dataset_tir(reports: &[SubjectReport]) -> Option<f64> {
    (!reports.is_empty()).then(|| reports.iter().map(|r| r.tir).sum::<f64>() / reports.len() as f64)
}

/// Axis-aligned box in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point3,
    pub max: Point3,
}

impl Bounds {
    /// Smallest box holding every point, grown by `margin` on each side.
    pub fn of<'a>(streamlines: impl IntoIterator<Item = &'a Streamline>, margin: f64) -> Option<Self> {
        let mut b: Option<Bounds> = None;
        for s in streamlines {
            for p in s.points() {
                let bb = b.get_or_insert(Bounds { min: *p, max: *p });
                for a in 0..3 {
                    bb.min[a] = bb.min[a].min(p[a]);
                    bb.max[a] = bb.max[a].max(p[a]);
                }
            }
        }
        b.map(|mut b| {
            for a in 0..3 {
                b.min[a] -= margin;
                b.max[a] += margin;
            }
            b
        })
    }
}

/// Per-voxel count of distinct streamlines visiting the voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Point3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub counts: Vec<u32>,
}

impl VoxelGrid {
    pub fn empty(bounds: &Bounds, voxel_size: f64) -> Result<Self, MetricsError> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(MetricsError::DegenerateBounds);
        }
        let mut dims = [0; 3];
        for a in 0..3 {
            let extent = bounds.max[a] - bounds.min[a];
            if !(extent.is_finite() && extent >= 0.0 && bounds.min[a].is_finite()) {
                return Err(MetricsError::DegenerateBounds);
            }
            dims[a] = ((extent / voxel_size).floor() as usize) + 1;
        }
        let n = dims[0].checked_mul(dims[1]).and_then(|v| v.checked_mul(dims[2])).ok_or(MetricsError::DegenerateBounds)?;
        Ok(Self { origin: bounds.min, voxel_size, dims, counts: vec![0; n] })
    }

    /// Flat index of the voxel holding `p`, if inside the grid.
    pub fn index_of(&self, p: &Point3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2])
    }

    pub fn voxel_of(&self, index: usize) -> [usize; 3] {
        let z = index % self.dims[2];
        let y = (index / self.dims[2]) % self.dims[1];
        [index / (self.dims[1] * self.dims[2]), y, z]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn visited(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.origin == other.origin && self.voxel_size == other.voxel_size && self.dims == other.dims
    }
}

/// Sorted, deduplicated voxels entered by one streamline, sampled every
/// `voxel_size / 4` mm along its arc length.
fn streamline_voxels(grid: &VoxelGrid, s: &Streamline) -> Vec<usize> {
    let step = grid.voxel_size / 4.0;
    let pts = s.points();
    let mut out = Vec::new();
    out.extend(grid.index_of(&pts[0]));
    for w in pts.windows(2) {
        let len = dist(&w[0], &w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            let p = [
                w[0][0] + t * (w[1][0] - w[0][0]),
                w[0][1] + t * (w[1][1] - w[0][1]),
                w[0][2] + t * (w[1][2] - w[0][2]),
            ];
            out.extend(grid.index_of(&p));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Voxelizes a tract; points outside `bounds` are ignored.
pub fn voxelize(tract: &[Streamline], voxel_size: f64, bounds: &Bounds) -> Result<VoxelGrid, MetricsError> {
    let mut grid = VoxelGrid::empty(bounds, voxel_size)?;
    let visits: Vec<Vec<usize>> = tract.par_iter().map(|s| streamline_voxels(&grid, s)).collect();
    for v in visits {
        for i in v {
            grid.counts[i] += 1;
        }
    }
    Ok(grid)
}

/// Weighted Dice with per-grid normalized visitation weights.
pub fn wdice(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, MetricsError> {
    if !a.same_layout(b) {
        return Err(MetricsError::GridMismatch);
    }
    let (ta, tb) = (a.total(), b.total());
    if ta == 0 || tb == 0 {
        return Err(MetricsError::EmptyGrid);
    }
    let (mut sa, mut sb) = (0u64, 0u64);
    for (&ca, &cb) in a.counts.iter().zip(&b.counts) {
        if ca > 0 && cb > 0 {
            sa += ca as u64;
            sb += cb as u64;
        }
    }
    // integer sums keep the result symmetric
    let wa = sa as f64 / ta as f64;
    let wb = sb as f64 / tb as f64;
    Ok((wa + wb) / 2.0)
}

/// `tract,count,identified,tda` rows plus a summary row.
pub fn report_csv(report: &SubjectReport) -> String {
    let mut s = String::from("tract,count,identified,tda\n");
    for r in &report.rows {
        let tda = r.tda.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(s, "{},{},{},{}", r.name, r.count, r.identified as u8, tda).unwrap();
    }
    let tda = report.tda.map_or(String::new(), |v| format!("{v:.6}"));
    writeln!(s, "summary,{},{:.6},{}", report.rows.iter().map(|r| r.count).sum::<usize>(), report.tir, tda).unwrap();
    s
}

/// `tract,wdice` rows for two parcellations; empty cells where either
/// side has no streamlines.
pub fn wdice_csv(rows: &[(String, Option<f64>)]) -> String {
    let mut s = String::from("tract,wdice\n");
    for (name, v) in rows {
        writeln!(s, "{name},{}", v.map_or(String::new(), |v| format!("{v:.6}"))).unwrap();
    }
    s
}
