//! The eight acceptance criteria, run in order with one PASS/FAIL line each.

mod common;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;

use tractparc::benchmark::{self, BenchmarkConfig};
use tractparc::features::{build_input, LocalGlobalInput};
use tractparc::geometry::{mdf, Point3, Streamline};
use tractparc::io::{decode_trk, encode_trk, TrkHeader};
use tractparc::metrics::{is_identified, tir, voxelize, wdice, Bounds};
use tractparc::neighbors::{knn_brute, knn_pruned, sample_global, streamline_centroids, ContextSet};
use tractparc::nn::{cross_entropy, decode_model, encode_model, Hyperparameters, Model};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(what()) }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn mdf_suite() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let (mut worst_rigid, mut worst_scale) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = r.random_range(2..30);
        let (a, b) = (random_resampled(&mut r, m, 60.0), random_resampled(&mut r, m, 60.0));
        let d = mdf(&a, &b).unwrap();
        check(d == mdf(&b, &a).unwrap(), || "asymmetric".into())?;
        check(d == mdf(&a.reversed(), &b).unwrap() && d == mdf(&a, &b.reversed()).unwrap(), || "not flip invariant".into())?;
        check(mdf(&a, &a).unwrap() < 1e-9 && mdf(&a, &a.reversed()).unwrap() < 1e-9, || "self distance not zero".into())?;
        check(d > 1e-9, || "distinct streamlines at distance zero".into())?;

        let rot = random_rotation(&mut r);
        let t = point(&mut r, 100.0);
        let f = rigid(&rot, &t);
        worst_rigid = worst_rigid.max((mdf(&map_points(&a, &f), &map_points(&b, &f)).unwrap() - d).abs());

        let c: f64 = r.random_range(0.01..20.0);
        let s = |p: &Point3| [c * p[0], c * p[1], c * p[2]];
        worst_scale = worst_scale.max((mdf(&map_points(&a, s), &map_points(&b, s)).unwrap() - c * d).abs());

        let (ca, cb) = (mean_point(&a), mean_point(&b));
        let gap = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2) + (ca[2] - cb[2]).powi(2)).sqrt();
        check(gap <= d + 1e-12, || format!("centroid gap {gap} above mdf {d}"))?;
    }
    check(worst_rigid < 1e-7, || format!("rigid error {worst_rigid:e}"))?;
    check(worst_scale < 1e-7, || format!("scale error {worst_scale:e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("rigid err {worst_rigid:.1e}, scale err {worst_scale:.1e}"))
}

fn knn_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(102);
    let mut queries = 0;
    for i in 0..50 {
        let t = if i % 2 == 0 { clustered_tractogram(&mut r, 200, 8, 15) } else { random_tractogram(&mut r, 200, 15, 60.0) };
        let centroids = streamline_centroids(&t);
        for k in [1, 5, 20] {
            for q in 0..t.len() {
                let (pruned, brute) = (knn_pruned(q, &t, k, &centroids), knn_brute(q, &t, k));
                check(pruned == brute, || format!("tractogram {i}, query {q}, k {k}: {pruned:?} vs {brute:?}"))?;
                queries += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{queries} queries identical"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let errs = gradient_check(seed);
        worst = errs.iter().copied().fold(worst, f64::max);
        check(errs.iter().all(|&e| e < 1e-4), || format!("seed {seed}: {errs:?}"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("max relative error {worst:.1e}"))
}

fn invariances() -> Outcome {
    let mut r = rng(104);
    for case in 0..100 {
        let slots = r.random_range(1..8);
        let hyper = Hyperparameters { k: slots, w: 0, ..small_hyper() };
        let model = Model::new(hyper, &mut r).unwrap();
        let x = random_input(&mut r, 15, 6, slots, 60.0);
        let mut perm: Vec<usize> = (0..slots).collect();
        perm.shuffle(&mut r);
        let (a, b) = (model.forward(&x).unwrap(), model.forward(&permute_slots(&x, &perm)).unwrap());
        check(a == b, || format!("case {case}: slot order changed logits"))?;
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let hyper = Hyperparameters { k: 0, w: 0, ..small_hyper() };
        let model = Model::new(hyper, &mut r).unwrap();
        let s = random_resampled(&mut r, 15, 60.0);
        let a = model.forward(&LocalGlobalInput::baseline(&s)).unwrap();
        let b = model.forward(&LocalGlobalInput::baseline(&s.reversed())).unwrap();
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    check(worst <= 1e-9, || format!("reversal changed logits by {worst:e}"))?;
    Ok(format!("slot permutation bitwise, reversal err {worst:.1e}"))
}

fn analytic_values() -> Outcome {
    let ce = cross_entropy(&[0.7; 43], 0).unwrap();
    check((ce - 43f64.ln()).abs() < 1e-9, || format!("uniform loss {ce}"))?;

    let mut r = rng(105);
    let t = random_tractogram(&mut r, 600, 15, 60.0);
    let ctx = ContextSet { local_ids: knn_brute(0, &t, 20), global_ids: sample_global(t.len(), 500, &mut r) };
    let shape = build_input(&t[0], &ctx, &t).unwrap().shape();
    check(shape == [15, 6, 520], || format!("input shape {shape:?}"))?;

    let line = |y: f64| Streamline::new(vec![[1.0, y, 1.0], [15.0, y, 1.0]]).unwrap();
    let bounds = Bounds { min: [0.0; 3], max: [20.0; 3] };
    let g1 = voxelize(&[line(1.0), line(1.0)], 2.0, &bounds).unwrap();
    let g2 = voxelize(&[line(11.0)], 2.0, &bounds).unwrap();
    let (same, apart) = (wdice(&g1, &g1).unwrap(), wdice(&g1, &g2).unwrap());
    check(same == 1.0 && apart == 0.0, || format!("wdice identical {same}, disjoint {apart}"))?;

    check(!is_identified(49, 50) && is_identified(50, 50), || "threshold not inclusive at 50".into())?;
    let pred: Vec<usize> = [vec![0; 50], vec![1; 49]].concat();
    check(tir(&pred, &[0, 1], 50) == 0.5, || "tir at boundary".into())?;
    Ok("ln 43, 15x6x520, wdice 1/0, threshold 50 inclusive".into())
}

fn sta_effect() -> Outcome {
    let start = Instant::now();
    let res = benchmark::run(&BenchmarkConfig::default(), |line| eprintln!("  {line}")).map_err(|e| e.to_string())?;
    let (gap, drop) = (100.0 * res.gap(), 100.0 * res.context_drop());
    let detail = format!(
        "context {:.2}% / {:.2}% (transformed / untransformed), baseline {:.2}% / {:.2}%, gap {gap:.1} pts, drop {drop:.1} pts, {:.0?}",
        100.0 * res.context_transformed,
        100.0 * res.context_untransformed,
        100.0 * res.baseline_transformed,
        100.0 * res.baseline_untransformed,
        start.elapsed(),
    );
    check(gap >= 10.0 && drop < 3.0, || detail.clone())?;
    within(start.elapsed(), Duration::from_secs(15 * 60))?;
    Ok(detail)
}

fn io_roundtrips() -> Outcome {
    let mut r = rng(107);
    for n in [0usize, 1, 17, 300] {
        let header = TrkHeader::world(n).encode();
        check(header[..] == golden_world_header(n as i32)[..], || format!("header bytes changed for n = {n}"))?;
        let t: Vec<_> = (0..n).map(|_| f32_streamline(&mut r, 40)).collect();
        let bytes = encode_trk(&TrkHeader::world(n), &t).unwrap();
        let (_, back) = decode_trk(&bytes).unwrap();
        check(back == t, || format!("trk round trip changed {n} streamlines"))?;
    }
    for seed in 0..20 {
        let mut r = rng(seed);
        let hyper = Hyperparameters { k: 20, w: 100, h: 64, backbone: vec![64, 128, 256], head: vec![128, 64], class_count: 9, ..Hyperparameters::default() };
        let mut model = Model::new(hyper, &mut r).unwrap();
        model.set_atlas_centroid(point(&mut r, 40.0));
        model.round_to_f32();
        let bytes = encode_model(&model);
        let back = decode_model(&bytes).map_err(|e| e.to_string())?;
        check(back == model && encode_model(&back) == bytes, || format!("model round trip, seed {seed}"))?;
    }
    Ok("trk, model and header bytes exact".into())
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tractparc")).args(args).env("RUST_LOG", "warn").output().map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

/// gen, augment, train, predict and evaluate in `dir`; returns the TIR of
/// each test subject.
fn pipeline(dir: &Path) -> Result<Vec<f64>, String> {
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let atlas = dir.join("atlas");
    let (trk, labels) = (s(&atlas.join("atlas.trk")), s(&atlas.join("atlas.labels.txt")));
    cli(&["gen", "--out", &s(&atlas), "--seed", "1"])?;
    let train = dir.join("train");
    cli(&["augment", "--in", &trk, "--labels", &labels, "--n", "16", "--noise", "0.5", "--out", &s(&train), "--seed", "2"])?;
    let test = dir.join("test");
    cli(&["augment", "--in", &trk, "--labels", &labels, "--n", "2", "--noise", "0.5", "--out", &s(&test), "--seed", "3"])?;
    let cfg = dir.join("model.cfg");
    fs::write(&cfg, "k = 20\nw = 100\nh = 64\nbackbone = 64,128,256\nhead = 128,64\nepochs = 8\nbatch_size = 64\n").unwrap();
    let model = s(&dir.join("model.tcm"));
    cli(&[
        "train", "--data", &s(&atlas), &s(&train), "--config", &s(&cfg), "--out", &model,
        "--atlas", &s(&atlas), "--seed", "4", "--threads", "1",
    ])?;
    let mut tirs = Vec::new();
    for i in 0..2 {
        let sub = s(&test.join(format!("sub{i:03}.trk")));
        let pred = s(&dir.join(format!("pred{i}.labels.txt")));
        cli(&["predict", "--model", &model, "--in", &sub, "--out", &pred, "--reg-free", "--seed", "5", "--threads", "1"])?;
        let report = dir.join(format!("report{i}.csv"));
        cli(&["evaluate", "--pred", &pred, "--in", &sub, "--atlas", &s(&atlas), "--out", &s(&report), "--threads", "1"])?;
        let text = fs::read_to_string(&report).map_err(|e| e.to_string())?;
        let summary = text.lines().find(|l| l.starts_with("summary,")).ok_or("no summary row")?;
        tirs.push(summary.split(',').nth(2).unwrap().parse::<f64>().map_err(|e| e.to_string())?);
    }
    Ok(tirs)
}

fn end_to_end() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let tirs = pipeline(a.path())?;
    check(tirs.iter().all(|&t| t >= 0.95), || format!("TIR {tirs:?}"))?;
    pipeline(b.path())?;
    let outputs = [
        "atlas/atlas.trk", "train/sub015.trk", "test/sub001.trk", "model.tcm", "model.tcm.metrics.csv",
        "pred0.labels.txt", "pred0.labels.txt.conf.txt", "pred1.labels.txt", "report0.csv", "report1.csv",
    ];
    for f in outputs {
        let (x, y) = (fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?, fs::read(b.path().join(f)).unwrap());
        check(x == y, || format!("{f} differs between runs"))?;
    }
    Ok(format!("TIR {tirs:?}, {} outputs identical across runs", outputs.len()))
}

// bypasses the test harness capture so the lines show up in every run
fn report(line: String) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("MDF properties", mdf_suite),
        ("kNN exactness", knn_exactness),
        ("gradient check", gradients),
        ("invariances", invariances),
        ("analytic values", analytic_values),
        ("augmentation effect", sta_effect),
        ("I/O round trips", io_roundtrips),
        ("CLI pipeline", end_to_end),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => report(format!("criterion {}: PASS {name} ({secs:.1} s) {detail}", i + 1)),
            Err(why) => {
                report(format!("criterion {}: FAIL {name} ({secs:.1} s) {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
