//! Labeled synthetic tractography: bundles of jittered Bézier curves plus
//! an "other" class of random curves, and transformed subjects derived from
//! an atlas.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{resample, sample_transform, transform_tractogram, GeometryError, Point3, Streamline, TransformRanges};
use crate::metrics::Bounds;
use crate::rng::rng_for;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("spec line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundlePrototype {
    pub name: String,
    /// Bézier control points in mm; at least 4.
    pub control: Vec<Point3>,
    pub count: usize,
    /// Std. dev. of a whole-curve offset, mm.
    pub radial_sigma: f64,
    /// Std. dev. of independent offsets of the first and last control points, mm.
    pub endpoint_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAtlasSpec {
    /// Bundle `i` gets class id `i`; the "other" class is last.
    pub bundles: Vec<BundlePrototype>,
    /// Share of all streamlines that belong to the "other" class.
    pub outlier_fraction: f64,
    pub bounds: Bounds,
    pub seed: u64,
    /// Points per emitted streamline.
    pub m: usize,
}

/// Generated streamlines with their labels and class catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTractogram {
    pub streamlines: Vec<Streamline>,
    pub labels: Vec<usize>,
    pub class_names: BTreeMap<usize, String>,
}

/// De Casteljau evaluation at `t` in [0, 1].
pub fn bezier_point(control: &[Point3], t: f64) -> Point3 {
    let mut buf = control.to_vec();
    for level in (1..buf.len()).rev() {
        for i in 0..level {
            for a in 0..3 {
                buf[i][a] = (1.0 - t) * buf[i][a] + t * buf[i + 1][a];
            }
        }
    }
    buf[0]
}

const DENSE: usize = 64;

fn curve(control: &[Point3], m: usize) -> Result<Streamline, GeometryError> {
    let dense: Vec<Point3> = (0..DENSE).map(|i| bezier_point(control, i as f64 / (DENSE - 1) as f64)).collect();
    Ok(resample(&Streamline::new(dense)?, m)?.to_streamline())
}

fn normal(sigma: f64) -> Normal<f64> {
    // sigma is validated non-negative and finite
    Normal::new(0.0, sigma).unwrap()
}

fn jitter<R: Rng>(rng: &mut R, sigma: f64) -> Point3 {
    if sigma == 0.0 {
        return [0.0; 3];
    }
    let n = normal(sigma);
    [n.sample(rng), n.sample(rng), n.sample(rng)]
}

impl SyntheticAtlasSpec {
    pub fn class_count(&self) -> usize {
        self.bundles.len() + 1
    }

    pub fn other_class(&self) -> usize {
        self.bundles.len()
    }

    pub fn outlier_count(&self) -> usize {
        let n: usize = self.bundles.iter().map(|b| b.count).sum();
        (self.outlier_fraction / (1.0 - self.outlier_fraction) * n as f64).round() as usize
    }

    pub fn class_names(&self) -> BTreeMap<usize, String> {
        let mut names: BTreeMap<usize, String> = self.bundles.iter().enumerate().map(|(i, b)| (i, b.name.clone())).collect();
        names.insert(self.other_class(), "Other".to_string());
        names
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |s: String| Err(SynthError::InvalidSpec(s));
        if self.bundles.is_empty() {
            return bad("no bundles".into());
        }
        if self.m < 2 {
            return bad(format!("m = {} (need >= 2)", self.m));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier_fraction {} outside [0, 1)", self.outlier_fraction));
        }
        for a in 0..3 {
            if !(self.bounds.min[a].is_finite() && self.bounds.max[a].is_finite() && self.bounds.min[a] < self.bounds.max[a]) {
                return bad("bounds must satisfy min < max on every axis".into());
            }
        }
        for (i, b) in self.bundles.iter().enumerate() {
            if b.control.len() < 4 {
                return bad(format!("bundle {i}: {} control points (need >= 4)", b.control.len()));
            }
            if b.control.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("bundle {i}: non-finite control point"));
            }
            for (what, s) in [("radial_sigma", b.radial_sigma), ("endpoint_sigma", b.endpoint_sigma)] {
                if !(s >= 0.0 && s.is_finite()) {
                    return bad(format!("bundle {i}: {what} = {s}"));
                }
            }
            if b.name.contains(['\t', '\n']) {
                return bad(format!("bundle {i}: name contains a tab or newline"));
            }
        }
        Ok(())
    }

    /// Eight bundles (left/right pairs and two commissural arches) with
    /// 200 streamlines each, plus 200 "other" streamlines.
    pub fn demo() -> Self {
        let b = |name: &str, control: [Point3; 4]| BundlePrototype {
            name: name.to_string(),
            control: control.to_vec(),
            count: 200,
            radial_sigma: 2.0,
            endpoint_sigma: 2.0,
        };
        let bundles = vec![
            b("CST_left", [[-25.0, -15.0, -40.0], [-20.0, -10.0, 0.0], [-25.0, -15.0, 40.0], [-30.0, -20.0, 70.0]]),
            b("CST_right", [[25.0, -15.0, -40.0], [20.0, -10.0, 0.0], [25.0, -15.0, 40.0], [30.0, -20.0, 70.0]]),
            b("AF_left", [[-40.0, -60.0, 10.0], [-45.0, -30.0, 45.0], [-45.0, 10.0, 40.0], [-40.0, 30.0, 5.0]]),
            b("AF_right", [[40.0, -60.0, 10.0], [45.0, -30.0, 45.0], [45.0, 10.0, 40.0], [40.0, 30.0, 5.0]]),
            b("ILF_left", [[-40.0, -90.0, 0.0], [-45.0, -60.0, -10.0], [-45.0, -20.0, -20.0], [-40.0, 10.0, -30.0]]),
            b("ILF_right", [[40.0, -90.0, 0.0], [45.0, -60.0, -10.0], [45.0, -20.0, -20.0], [40.0, 10.0, -30.0]]),
            b("CC_body", [[-50.0, -10.0, 40.0], [-20.0, -10.0, 15.0], [20.0, -10.0, 15.0], [50.0, -10.0, 40.0]]),
            b("CC_genu", [[-35.0, 35.0, 10.0], [-15.0, 50.0, 15.0], [15.0, 50.0, 15.0], [35.0, 35.0, 10.0]]),
        ];
        Self {
            bundles,
            outlier_fraction: 1.0 / 9.0,
            bounds: Bounds { min: [-70.0, -100.0, -50.0], max: [70.0, 70.0, 80.0] },
            seed: 0,
            m: 15,
        }
    }

    /// Parses `key = value` text with `bundle.<i>.*` groups:
    /// `name`, `control` (`x,y,z; x,y,z; ...`), `count`, `radial_sigma`,
    /// `endpoint_sigma`. Top-level keys: `seed`, `m`, `outlier_fraction`,
    /// `bounds` (`xmin,ymin,zmin,xmax,ymax,zmax`).
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut spec = Self { bundles: Vec::new(), ..Self::demo() };
        let mut bundles: BTreeMap<usize, BundlePrototype> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |detail: String| SynthError::Parse { line: i + 1, detail };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| err(format!("{key}: bad number {v:?}")));
            let int = |v: &str| v.trim().parse::<u64>().map_err(|_| err(format!("{key}: bad integer {v:?}")));
            if let Some(rest) = key.strip_prefix("bundle.") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| err(format!("malformed key {key:?}")))?;
                let idx: usize = idx.parse().map_err(|_| err(format!("bad bundle index in {key:?}")))?;
                let b = bundles.entry(idx).or_insert_with(|| BundlePrototype {
                    name: format!("bundle_{idx}"),
                    control: Vec::new(),
                    count: 200,
                    radial_sigma: 2.0,
                    endpoint_sigma: 2.0,
                });
                match field {
                    "name" => b.name = value.to_string(),
                    "count" => b.count = int(value)? as usize,
                    "radial_sigma" => b.radial_sigma = num(value)?,
                    "endpoint_sigma" => b.endpoint_sigma = num(value)?,
                    "control" => {
                        b.control = value
                            .split(';')
                            .map(|p| {
                                let v: Vec<f64> = p.split(',').map(num).collect::<Result<_, _>>()?;
                                <[f64; 3]>::try_from(v).map_err(|_| err(format!("control point {p:?} needs 3 coordinates")))
                            })
                            .collect::<Result<_, _>>()?;
                    }
                    _ => return Err(err(format!("unknown key {key:?}"))),
                }
                continue;
            }
            match key {
                "seed" => spec.seed = int(value)?,
                "m" => spec.m = int(value)? as usize,
                "outlier_fraction" => spec.outlier_fraction = num(value)?,
                "bounds" => {
                    let v: Vec<f64> = value.split(',').map(num).collect::<Result<_, _>>()?;
                    if v.len() != 6 {
                        return Err(err("bounds needs 6 numbers".into()));
                    }
                    spec.bounds = Bounds { min: [v[0], v[1], v[2]], max: [v[3], v[4], v[5]] };
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        if bundles.keys().copied().ne(0..bundles.len()) {
            return Err(SynthError::InvalidSpec("bundle indices must be 0..n without gaps".into()));
        }
        spec.bundles = bundles.into_values().collect();
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self, SynthError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "m = {}", self.m).unwrap();
        writeln!(s, "outlier_fraction = {:?}", self.outlier_fraction).unwrap();
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        writeln!(s, "bounds = {:?},{:?},{:?},{:?},{:?},{:?}", lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]).unwrap();
        for (i, b) in self.bundles.iter().enumerate() {
            let control: Vec<String> = b.control.iter().map(|p| format!("{:?},{:?},{:?}", p[0], p[1], p[2])).collect();
            writeln!(s, "bundle.{i}.name = {}", b.name).unwrap();
            writeln!(s, "bundle.{i}.control = {}", control.join("; ")).unwrap();
            writeln!(s, "bundle.{i}.count = {}", b.count).unwrap();
            writeln!(s, "bundle.{i}.radial_sigma = {:?}", b.radial_sigma).unwrap();
            writeln!(s, "bundle.{i}.endpoint_sigma = {:?}", b.endpoint_sigma).unwrap();
        }
        s
    }
}

fn bundle_streamlines(b: &BundlePrototype, m: usize, seed: u64, index: u64) -> Result<Vec<Streamline>, GeometryError> {
    let mut rng = rng_for(seed, &[1, index]);
    let last = b.control.len() - 1;
    (0..b.count)
        .map(|_| {
            let shift = jitter(&mut rng, b.radial_sigma);
            let start = jitter(&mut rng, b.endpoint_sigma);
            let end = jitter(&mut rng, b.endpoint_sigma);
            let control: Vec<Point3> = b
                .control
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let e = if i == 0 { start } else if i == last { end } else { [0.0; 3] };
                    [p[0] + shift[0] + e[0], p[1] + shift[1] + e[1], p[2] + shift[2] + e[2]]
                })
                .collect();
            let s = curve(&control, m)?;
            Ok(if rng.random::<bool>() { s.reversed() } else { s })
        })
        .collect()
}

fn outlier_streamlines(spec: &SyntheticAtlasSpec, count: usize) -> Result<Vec<Streamline>, GeometryError> {
    let mut rng = rng_for(spec.seed, &[2]);
    let (lo, hi) = (spec.bounds.min, spec.bounds.max);
    (0..count)
        .map(|_| {
            let control: Vec<Point3> = (0..4)
                .map(|_| [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])])
                .collect();
            curve(&control, spec.m)
        })
        .collect()
}

/// Bundle-major order: all of bundle 0, then bundle 1, ..., then "other".
pub fn generate_atlas(spec: &SyntheticAtlasSpec) -> Result<LabeledTractogram, SynthError> {
    spec.validate()?;
    let per_bundle: Vec<Vec<Streamline>> = spec
        .bundles
        .par_iter()
        .enumerate()
        .map(|(i, b)| bundle_streamlines(b, spec.m, spec.seed, i as u64))
        .collect::<Result<_, _>>()?;
    let mut streamlines = Vec::new();
    let mut labels = Vec::new();
    for (c, group) in per_bundle.into_iter().enumerate() {
        labels.extend(std::iter::repeat_n(c, group.len()));
        streamlines.extend(group);
    }
    let other = outlier_streamlines(spec, spec.outlier_count())?;
    labels.extend(std::iter::repeat_n(spec.other_class(), other.len()));
    streamlines.extend(other);
    Ok(LabeledTractogram { streamlines, labels, class_names: spec.class_names() })
}

/// One transform sampled from `ranges`, applied about the tractogram's
/// centroid, plus independent Gaussian noise of std. dev. `noise_sigma` on
/// every coordinate. Labels are carried over unchanged.
pub fn generate_subject<R: Rng + ?Sized>(
    atlas: &LabeledTractogram,
    ranges: &TransformRanges,
    noise_sigma: f64,
    m: usize,
    rng: &mut R,
) -> Result<LabeledTractogram, SynthError> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SynthError::InvalidSpec(format!("noise sigma {noise_sigma}")));
    }
    let t = sample_transform(ranges, rng)?;
    let moved = transform_tractogram(&t, &atlas.streamlines, m)?;
    let streamlines = if noise_sigma == 0.0 {
        moved
    } else {
        let n = normal(noise_sigma);
        moved
            .into_iter()
            .map(|s| {
                let pts = s.into_points().into_iter().map(|p| [p[0] + n.sample(rng), p[1] + n.sample(rng), p[2] + n.sample(rng)]).collect();
                Streamline::new(pts)
            })
            .collect::<Result<_, _>>()?
    };
    Ok(LabeledTractogram { streamlines, labels: atlas.labels.clone(), class_names: atlas.class_names.clone() })
}
