//! Streamline geometry: arc-length resampling, the minimum average
//! direct-flip distance (MDF), centroids and whole-brain affine transforms.

use rand::Rng;
use thiserror::Error;

/// A point in world space (RAS, millimetres).
pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("streamline has zero total arc length")]
    DegenerateStreamline,
    #[error("streamline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("streamline contains a non-finite coordinate")]
    NonFinite,
    #[error("resample count must be at least 2, got {0}")]
    InvalidCount(usize),
    #[error("streamlines have different point counts ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("tractogram is empty")]
    EmptyTractogram,
    #[error("affine linear part is singular (det = {0:e})")]
    SingularTransform(f64),
    #[error("invalid transform range `{name}`: [{lo}, {hi}]")]
    InvalidRange { name: &'static str, lo: f64, hi: f64 },
}

#[inline]
pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn norm(v: &Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub(crate) fn dist(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

/// A raw tractography polyline: at least two finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    points: Vec<Point3>,
}

impl Streamline {
    pub fn new(points: Vec<Point3>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// A brain's streamlines, in file order.
pub type Tractogram = Vec<Streamline>;

/// A streamline sampled at `m` points equally spaced in arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledStreamline {
    points: Vec<Point3>,
}

impl ResampledStreamline {
    /// Wraps points that are already uniformly spaced (e.g. generator output).
    pub fn from_points(points: Vec<Point3>) -> Result<Self, GeometryError> {
        Streamline::new(points).map(|s| Self { points: s.points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// Mean of the points.
    pub fn centroid(&self) -> Point3 {
        let mut c = [0.0; 3];
        for p in &self.points {
            for d in 0..3 {
                c[d] += p[d];
            }
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn translated(&self, offset: &Point3) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
                .collect(),
        }
    }

    pub fn to_streamline(&self) -> Streamline {
        Streamline { points: self.points.clone() }
    }
}

/// Resamples `s` to `m` points at equal arc-length intervals by linear
/// interpolation. Endpoints are copied exactly.
pub fn resample(s: &Streamline, m: usize) -> Result<ResampledStreamline, GeometryError> {
    if m < 2 {
        return Err(GeometryError::InvalidCount(m));
    }
    let pts = s.points();
    let mut cumulative = Vec::with_capacity(pts.len());
    cumulative.push(0.0);
    for w in pts.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + dist(&w[0], &w[1]));
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return Err(GeometryError::DegenerateStreamline);
    }

    let mut out = Vec::with_capacity(m);
    out.push(pts[0]);
    let mut seg = 0;
    for j in 1..m - 1 {
        let target = total * j as f64 / (m - 1) as f64;
        while seg + 1 < pts.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 { (target - cumulative[seg]) / seg_len } else { 0.0 };
        let t = t.clamp(0.0, 1.0);
        let (a, b) = (&pts[seg], &pts[seg + 1]);
        out.push([
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]);
    }
    out.push(pts[pts.len() - 1]);
    Ok(ResampledStreamline { points: out })
}

// Sums f(0..m) pairing index p with m-1-p. Reversing the term order yields
// the same pairs, so MDF is bitwise symmetric and flip invariant.
#[inline]
fn paired_sum(m: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for p in 0..m / 2 {
        s += f(p) + f(m - 1 - p);
    }
    if m % 2 == 1 {
        s += f(m / 2);
    }
    s
}

/// MDF on raw point slices of equal length. Callers guarantee the lengths.
#[inline]
pub(crate) fn mdf_points(a: &[Point3], b: &[Point3]) -> f64 {
    let m = a.len();
    debug_assert_eq!(m, b.len());
    let direct = paired_sum(m, |p| dist(&a[p], &b[p]));
    let flipped = paired_sum(m, |p| dist(&a[p], &b[m - 1 - p]));
    direct.min(flipped) / m as f64
}

/// Minimum average direct-flip distance between two resampled streamlines.
pub fn mdf(a: &ResampledStreamline, b: &ResampledStreamline) -> Result<f64, GeometryError> {
    if a.m() != b.m() {
        return Err(GeometryError::LengthMismatch(a.m(), b.m()));
    }
    Ok(mdf_points(a.points(), b.points()))
}

/// Mean of all points of all streamlines; each streamline contributes its
/// `m` points.
pub fn centroid(streamlines: &[ResampledStreamline]) -> Result<Point3, GeometryError> {
    if streamlines.is_empty() {
        return Err(GeometryError::EmptyTractogram);
    }
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for s in streamlines {
        for p in s.points() {
            for d in 0..3 {
                sum[d] += p[d];
            }
        }
        count += s.m();
    }
    let n = count as f64;
    Ok([sum[0] / n, sum[1] / n, sum[2] / n])
}

/// Translates every point so the tractogram centroid lands on `reference`.
pub fn center_to_reference(
    streamlines: &[ResampledStreamline],
    reference: &Point3,
) -> Result<Vec<ResampledStreamline>, GeometryError> {
    let c = centroid(streamlines)?;
    let shift = sub(reference, &c);
    Ok(streamlines.iter().map(|s| s.translated(&shift)).collect())
}

pub type Matrix3 = [[f64; 3]; 3];

pub const IDENTITY3: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Matrix3, v: &Point3) -> Point3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn det3(a: &Matrix3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Right-handed rotation about the left-right (x) axis.
pub fn rotation_lr(degrees: f64) -> Matrix3 {
    let (s, c) = degrees.to_radians().sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

/// Right-handed rotation about the anterior-posterior (y) axis.
pub fn rotation_ap(degrees: f64) -> Matrix3 {
    let (s, c) = degrees.to_radians().sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// Right-handed rotation about the superior-inferior (z) axis.
pub fn rotation_si(degrees: f64) -> Matrix3 {
    let (s, c) = degrees.to_radians().sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Affine map `p -> linear * (p - pivot) + pivot + translation`; the pivot
/// is supplied when the transform is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub linear: Matrix3,
    pub translation: Point3,
}

impl AffineTransform {
    pub fn new(linear: Matrix3, translation: Point3) -> Result<Self, GeometryError> {
        let det = det3(&linear);
        if !(det.abs() > 1e-9) {
            return Err(GeometryError::SingularTransform(det));
        }
        Ok(Self { linear, translation })
    }

    pub fn identity() -> Self {
        Self { linear: IDENTITY3, translation: [0.0; 3] }
    }

    pub fn translation(t: Point3) -> Self {
        Self { linear: IDENTITY3, translation: t }
    }

    /// `R_lr * R_ap * R_si * diag(1 + scale)`.
    pub fn from_params(params: &TransformParams) -> Result<Self, GeometryError> {
        let rot = mat_mul(
            &mat_mul(&rotation_lr(params.rotation_deg[0]), &rotation_ap(params.rotation_deg[1])),
            &rotation_si(params.rotation_deg[2]),
        );
        let mut linear = rot;
        for row in linear.iter_mut() {
            for (d, v) in row.iter_mut().enumerate() {
                *v *= 1.0 + params.scale[d];
            }
        }
        Self::new(linear, params.translation_mm)
    }

    pub fn apply_point(&self, p: &Point3, pivot: &Point3) -> Point3 {
        if self.linear == IDENTITY3 {
            // exact for pure translations
            return [p[0] + self.translation[0], p[1] + self.translation[1], p[2] + self.translation[2]];
        }
        let q = mat_vec(&self.linear, &sub(p, pivot));
        [
            q[0] + pivot[0] + self.translation[0],
            q[1] + pivot[1] + self.translation[1],
            q[2] + pivot[2] + self.translation[2],
        ]
    }
}

/// Applies `t` to every point of `s` about `pivot`.
pub fn apply_transform(t: &AffineTransform, s: &Streamline, pivot: &Point3) -> Streamline {
    Streamline { points: s.points().iter().map(|p| t.apply_point(p, pivot)).collect() }
}

/// Applies `t` to a whole tractogram, pivoting about its centroid
/// (computed on the streamlines resampled to `m`).
pub fn transform_tractogram(
    t: &AffineTransform,
    streamlines: &[Streamline],
    m: usize,
) -> Result<Vec<Streamline>, GeometryError> {
    let resampled = streamlines.iter().map(|s| resample(s, m)).collect::<Result<Vec<_>, _>>()?;
    let pivot = centroid(&resampled)?;
    Ok(streamlines.iter().map(|s| apply_transform(t, s, &pivot)).collect())
}

/// Sampled STA parameters, in draw order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    /// LR, AP, SI rotation in degrees.
    pub rotation_deg: [f64; 3],
    pub translation_mm: [f64; 3],
    /// Fractional scale change per axis; the factor is `1 + scale`.
    pub scale: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Sampling ranges for synthetic transform augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRanges {
    pub rot_lr: Interval,
    pub rot_ap: Interval,
    pub rot_si: Interval,
    pub trans: [Interval; 3],
    pub scale: [Interval; 3],
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self {
            rot_lr: Interval::new(-45.0, 45.0),
            rot_ap: Interval::new(-10.0, 10.0),
            rot_si: Interval::new(-10.0, 10.0),
            trans: [Interval::new(-50.0, 50.0); 3],
            scale: [Interval::new(-0.45, 0.05); 3],
        }
    }
}

impl TransformRanges {
    /// All ranges collapsed to zero: sampling yields the identity.
    pub fn zero() -> Self {
        let z = Interval::new(0.0, 0.0);
        Self { rot_lr: z, rot_ap: z, rot_si: z, trans: [z; 3], scale: [z; 3] }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let named = [
            ("rot_lr", self.rot_lr),
            ("rot_ap", self.rot_ap),
            ("rot_si", self.rot_si),
            ("trans_x", self.trans[0]),
            ("trans_y", self.trans[1]),
            ("trans_z", self.trans[2]),
            ("scale_x", self.scale[0]),
            ("scale_y", self.scale[1]),
            ("scale_z", self.scale[2]),
        ];
        for (i, (name, iv)) in named.iter().enumerate() {
            let bad_scale = i >= 6 && iv.lo <= -1.0;
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi || bad_scale {
                return Err(GeometryError::InvalidRange { name, lo: iv.lo, hi: iv.hi });
            }
        }
        Ok(())
    }

    /// Draws rotation LR/AP/SI, translation x/y/z, then scale x/y/z, each
    /// uniformly and independently.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> TransformParams {
        let rotation_deg = [self.rot_lr.sample(rng), self.rot_ap.sample(rng), self.rot_si.sample(rng)];
        let translation_mm = [self.trans[0].sample(rng), self.trans[1].sample(rng), self.trans[2].sample(rng)];
        let scale = [self.scale[0].sample(rng), self.scale[1].sample(rng), self.scale[2].sample(rng)];
        TransformParams { rotation_deg, translation_mm, scale }
    }

    pub fn contains(&self, p: &TransformParams) -> bool {
        self.rot_lr.contains(p.rotation_deg[0])
            && self.rot_ap.contains(p.rotation_deg[1])
            && self.rot_si.contains(p.rotation_deg[2])
            && (0..3).all(|d| self.trans[d].contains(p.translation_mm[d]) && self.scale[d].contains(p.scale[d]))
    }
}

/// Samples a random augmentation transform.
pub fn sample_transform<R: Rng + ?Sized>(
    ranges: &TransformRanges,
    rng: &mut R,
) -> Result<AffineTransform, GeometryError> {
    ranges.validate()?;
    AffineTransform::from_params(&ranges.sample_params(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(offset: Point3, m: usize) -> ResampledStreamline {
        ResampledStreamline::from_points(
            (0..m).map(|i| [i as f64 + offset[0], offset[1], offset[2]]).collect(),
        )
        .unwrap()
    }

    fn random_polyline(rng: &mut ChaCha8Rng, n: usize) -> Streamline {
        let mut p = [0.0; 3];
        let pts = (0..n)
            .map(|_| {
                for c in p.iter_mut() {
                    *c += rng.random_range(-3.0..3.0);
                }
                p
            })
            .collect();
        Streamline::new(pts).unwrap()
    }

    // Independent oracle: sample the polyline densely (1e5 steps over the
    // whole arc length), then pick arc-length quantiles.
    fn dense_quantile_oracle(s: &Streamline, m: usize) -> Vec<Point3> {
        let pts = s.points();
        let total = s.arc_length();
        let n_dense = 100_000;
        let step = total / n_dense as f64;
        let mut dense = Vec::with_capacity(n_dense + 1);
        let mut acc = 0.0;
        for w in pts.windows(2) {
            let len = dist(&w[0], &w[1]);
            let steps = ((len / step).ceil() as usize).max(1);
            for i in 0..steps {
                let t = i as f64 / steps as f64;
                dense.push((acc + t * len, [
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                    w[0][2] + t * (w[1][2] - w[0][2]),
                ]));
            }
            acc += len;
        }
        dense.push((total, *pts.last().unwrap()));
        (0..m)
            .map(|j| {
                let target = total * j as f64 / (m - 1) as f64;
                let idx = dense.partition_point(|(a, _)| *a < target).min(dense.len() - 1);
                dense[idx].1
            })
            .collect()
    }

    #[test]
    fn resample_straight_segment() {
        let s = Streamline::new(vec![[0.0, 0.0, 0.0], [14.0, 0.0, 0.0]]).unwrap();
        let r = resample(&s, 15).unwrap();
        for (i, p) in r.points().iter().enumerate() {
            assert!((p[0] - i as f64).abs() < 1e-12);
            assert_eq!(p[1], 0.0);
        }
    }

    #[test]
    fn resample_is_fixed_point_on_uniform_input() {
        let s = line([0.5, -2.0, 3.0], 15);
        let r = resample(&s.to_streamline(), 15).unwrap();
        for (a, b) in r.points().iter().zip(s.points()) {
            assert!(dist(a, b) < 1e-9);
        }
    }

    #[test]
    fn resample_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let s = random_polyline(&mut rng, 50);
            let r = resample(&s, 15).unwrap();
            let oracle = dense_quantile_oracle(&s, 15);
            // the oracle is exact up to one dense step
            let tol = s.arc_length() / 100_000.0 + 1e-12;
            for (a, b) in r.points().iter().zip(&oracle) {
                assert!(dist(a, b) <= tol, "{a:?} vs {b:?}");
            }
            assert_eq!(r.points()[0], s.points()[0]);
            assert_eq!(r.points()[14], *s.points().last().unwrap());
        }
    }

    #[test]
    fn resample_rejects_degenerate() {
        let s = Streamline::new(vec![[1.0, 1.0, 1.0]; 4]).unwrap();
        assert_eq!(resample(&s, 15), Err(GeometryError::DegenerateStreamline));
        assert!(Streamline::new(vec![[0.0; 3]]).is_err());
        assert!(Streamline::new(vec![[0.0; 3], [f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn mdf_examples() {
        let a = line([0.0; 3], 15);
        assert_eq!(mdf(&a, &a).unwrap(), 0.0);
        assert_eq!(mdf(&a, &a.reversed()).unwrap(), 0.0);
        let b = line([1.0, 0.0, 0.0], 15);
        // direct pairing of x-offset lines: every pair 1 mm apart
        let c = line([0.0, 1.0, 0.0], 15);
        assert!((mdf(&a, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!((mdf(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(mdf(&a, &line([0.0; 3], 10)), Err(GeometryError::LengthMismatch(15, 10))));
    }

    #[test]
    fn centroid_examples() {
        let s = ResampledStreamline::from_points(vec![[-1.0, -2.0, 0.0], [0.0, 0.0, 0.0], [1.0, 2.0, 0.0]]).unwrap();
        assert_eq!(centroid(std::slice::from_ref(&s)).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(centroid(&[]), Err(GeometryError::EmptyTractogram));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: Vec<_> = (0..20).map(|_| resample(&random_polyline(&mut rng, 8), 15).unwrap()).collect();
        let c = centroid(&t).unwrap();
        let mut naive = [0.0; 3];
        let mut n = 0.0;
        for s in &t {
            for p in s.points() {
                naive[0] += p[0];
                naive[1] += p[1];
                naive[2] += p[2];
                n += 1.0;
            }
        }
        for d in 0..3 {
            assert!((c[d] - naive[d] / n).abs() < 1e-12);
        }
        let shifted: Vec<_> = t.iter().map(|s| s.translated(&[5.0, 0.0, 0.0])).collect();
        let c2 = centroid(&shifted).unwrap();
        assert!((c2[0] - c[0] - 5.0).abs() < 1e-9 && (c2[1] - c[1]).abs() < 1e-12);
    }

    #[test]
    fn sample_transform_degenerate_is_identity_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = sample_transform(&TransformRanges::zero(), &mut rng).unwrap();
        assert_eq!(t, AffineTransform::identity());
        let a = sample_transform(&TransformRanges::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_transform(&TransformRanges::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_parameters_stay_in_default_ranges() {
        let ranges = TransformRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p = ranges.sample_params(&mut rng);
            assert!(ranges.contains(&p), "{p:?}");
            assert!(p.translation_mm.iter().all(|t| (-50.0..=50.0).contains(t)));
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut r = TransformRanges::default();
        r.scale[1] = Interval::new(-1.0, 0.0);
        assert!(r.validate().is_err());
        let r = TransformRanges { rot_lr: Interval::new(5.0, -5.0), ..TransformRanges::default() };
        assert!(r.validate().is_err());
        assert!(AffineTransform::new([[0.0; 3]; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn apply_transform_examples() {
        let s = Streamline::new(vec![[1.0, 0.0, 0.0], [2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(apply_transform(&AffineTransform::identity(), &s, &[7.0, 8.0, 9.0]), s);

        let rot = AffineTransform::new(rotation_si(90.0), [0.0; 3]).unwrap();
        let p = rot.apply_point(&[1.0, 0.0, 0.0], &[0.0; 3]);
        assert!(dist(&p, &[0.0, 1.0, 0.0]) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t: Vec<_> = (0..10).map(|_| resample(&random_polyline(&mut rng, 6), 15).unwrap().to_streamline()).collect();
        let moved = transform_tractogram(&AffineTransform::translation([0.0, 0.0, 10.0]), &t, 15).unwrap();
        let c0 = centroid(&t.iter().map(|s| resample(s, 15).unwrap()).collect::<Vec<_>>()).unwrap();
        let c1 = centroid(&moved.iter().map(|s| resample(s, 15).unwrap()).collect::<Vec<_>>()).unwrap();
        assert!((c1[2] - c0[2] - 10.0).abs() < 1e-9);
        assert!((c1[0] - c0[0]).abs() < 1e-9);
    }

    #[test]
    fn center_to_reference_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t: Vec<_> = (0..12).map(|_| resample(&random_polyline(&mut rng, 9), 15).unwrap()).collect();
        let c = centroid(&t).unwrap();
        let same = center_to_reference(&t, &c).unwrap();
        for (a, b) in same.iter().zip(&t) {
            for (p, q) in a.points().iter().zip(b.points()) {
                assert!(dist(p, q) < 1e-12);
            }
        }
        let origin = center_to_reference(&t, &[0.0; 3]).unwrap();
        assert!(norm(&centroid(&origin).unwrap()) < 1e-6);

        let moved = center_to_reference(&t, &[31.0, -7.5, 12.25]).unwrap();
        assert!(dist(&centroid(&moved).unwrap(), &[31.0, -7.5, 12.25]) < 1e-6);
        for i in 0..t.len() {
            for j in 0..t.len() {
                let before = mdf(&t[i], &t[j]).unwrap();
                let after = mdf(&moved[i], &moved[j]).unwrap();
                assert!((before - after).abs() < 1e-9);
            }
        }
        assert!(center_to_reference(&[], &[0.0; 3]).is_err());
    }
}
