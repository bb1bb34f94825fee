mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use tractparc::geometry::*;

fn pair(seed: u64) -> (ResampledStreamline, ResampledStreamline) {
    let mut r = rng(seed);
    let m = r.random_range(2..30);
    (random_resampled(&mut r, m, 60.0), random_resampled(&mut r, m, 60.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mdf_matches_oracle_and_is_symmetric(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let d = mdf(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, mdf(&b, &a).unwrap());
        prop_assert!((d - mdf_oracle(a.points(), b.points())).abs() < 1e-12);
    }

    #[test]
    fn mdf_flip_invariant(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let d = mdf(&a, &b).unwrap();
        prop_assert_eq!(d, mdf(&a.reversed(), &b).unwrap());
        prop_assert_eq!(d, mdf(&a, &b.reversed()).unwrap());
    }

    #[test]
    fn mdf_zero_exactly_on_self_or_reverse(seed in any::<u64>()) {
        let (a, _) = pair(seed);
        prop_assert!(mdf(&a, &a).unwrap() < 1e-9);
        prop_assert!(mdf(&a, &a.reversed()).unwrap() < 1e-9);
        let mut r = rng(seed ^ 1);
        let i = r.random_range(0..a.m());
        let mut pts = a.points().to_vec();
        pts[i][r.random_range(0..3)] += 0.01;
        let moved = ResampledStreamline::from_points(pts).unwrap();
        prop_assert!(mdf(&a, &moved).unwrap() > 1e-9);
    }

    #[test]
    fn mdf_rigid_invariant(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let mut r = rng(seed ^ 2);
        let rot = random_rotation(&mut r);
        let t = point(&mut r, 100.0);
        let f = rigid(&rot, &t);
        let moved = mdf(&map_points(&a, &f), &map_points(&b, &f)).unwrap();
        prop_assert!((moved - mdf(&a, &b).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn mdf_scale_equivariant(seed in any::<u64>(), c in 0.01f64..20.0) {
        let (a, b) = pair(seed);
        let s = |p: &Point3| [c * p[0], c * p[1], c * p[2]];
        let scaled = mdf(&map_points(&a, s), &map_points(&b, s)).unwrap();
        prop_assert!((scaled - c * mdf(&a, &b).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn centroid_distance_bounds_mdf(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let (ca, cb) = (mean_point(&a), mean_point(&b));
        let gap = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2) + (ca[2] - cb[2]).powi(2)).sqrt();
        prop_assert!(gap <= mdf(&a, &b).unwrap() + 1e-12);
    }
}

proptest! {
    #[test]
    fn resample_keeps_endpoints_and_spacing(seed in any::<u64>(), m in 2usize..40) {
        let mut r = rng(seed);
        let s = random_streamline(&mut r, 50);
        prop_assume!(s.arc_length() > 1e-3);
        let out = resample(&s, m).unwrap();
        prop_assert_eq!(out.m(), m);
        prop_assert_eq!(out.points()[0], s.points()[0]);
        prop_assert_eq!(out.points()[m - 1], *s.points().last().unwrap());
    }

    #[test]
    fn centering_hits_reference_and_keeps_distances(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_tractogram(&mut r, 12, 15, 60.0);
        let reference = point(&mut r, 100.0);
        let out = center_to_reference(&t, &reference).unwrap();
        let c = centroid(&out).unwrap();
        for d in 0..3 {
            prop_assert!((c[d] - reference[d]).abs() < 1e-6);
        }
        for i in 0..t.len() {
            let j = (i + 5) % t.len();
            prop_assert!((mdf(&out[i], &out[j]).unwrap() - mdf(&t[i], &t[j]).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_transform_is_invertible_and_in_range(seed in any::<u64>()) {
        let ranges = TransformRanges::default();
        let params = ranges.sample_params(&mut rng(seed));
        prop_assert!(ranges.contains(&params));
        let t = AffineTransform::from_params(&params).unwrap();
        // the linear part is R * diag(1 + s), so |det| is the product of the scales
        let want: f64 = params.scale.iter().map(|s| 1.0 + s).product();
        prop_assert!((det3(&t.linear).abs() - want).abs() < 1e-9);
    }
}
