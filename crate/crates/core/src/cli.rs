//! Command-line front end: `gen`, `augment`, `knn`, `train`, `predict`,
//! `evaluate`. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::geometry::{center_to_reference, centroid, resample, Interval, ResampledStreamline, Streamline, TransformRanges};
use crate::io::{read_class_names, read_labels, read_trk, write_class_names, write_labels, write_trk, Config, TrkHeader};
use crate::metrics::{
    accuracy, dataset_tda, macro_f1, report_csv, subject_report, voxelize, wdice, wdice_csv, Bounds, ConfusionMatrix,
};
use crate::neighbors::{all_knn, write_neighbor_cache};
use crate::nn::{load_model, predict, save_model, train, Brain, InferenceConfig, Model};
use crate::rng::{entropy_seed, rng_for};
use crate::synthgen::{generate_atlas, generate_subject, LabeledTractogram, SyntheticAtlasSpec};

pub const THREADS_ENV: &str = "TRACTCLOUD_THREADS";
const CLASSES_FILE: &str = "classes.txt";

#[derive(Debug, Parser)]
#[command(name = "tractparc", version, about = "Registration-free streamline parcellation")]
pub struct Cli {
    /// Master seed; a logged entropy seed is used when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to TRACTCLOUD_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic atlas.
    Gen {
        /// Spec file; the built-in demo spec when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write randomly transformed copies of a labeled tractogram.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Gaussian noise added to every coordinate, mm.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[command(flatten)]
        ranges: RangeArgs,
    },
    /// Compute MDF nearest neighbors and write a neighbor cache.
    Knn {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 15)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on directories of `X.trk` + `X.labels.txt` pairs.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Atlas tractogram (or directory holding `atlas.trk`) whose centroid
        /// is the centering reference.
        #[arg(long)]
        atlas: Option<PathBuf>,
    },
    /// Label every streamline of a tractogram.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Center the tractogram on the model's atlas centroid first.
        #[arg(long)]
        reg_free: bool,
        /// Confidence output; defaults to `<out>.conf.txt`.
        #[arg(long)]
        conf: Option<PathBuf>,
        /// Config whose m, k, w, h must agree with the model.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions against ground truth or an atlas.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, conflicts_with = "atlas")]
        truth: Option<PathBuf>,
        /// Tractogram the predictions refer to (atlas mode).
        #[arg(long = "in", requires = "atlas")]
        input: Option<PathBuf>,
        /// Directory with `atlas.trk`, `atlas.labels.txt` and `classes.txt`.
        #[arg(long, requires = "input")]
        atlas: Option<PathBuf>,
        /// Second prediction for the same tractogram; adds per-tract wDice.
        #[arg(long, requires = "input")]
        wdice_against: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        threshold: usize,
        #[arg(long, default_value_t = 2.0)]
        voxel_size: f64,
        #[arg(long, default_value_t = 15)]
        m: usize,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// STA sampling ranges as `lo,hi` pairs.
#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    #[arg(long, value_parser = parse_interval, default_value = "-45,45")]
    pub rot_lr: Interval,
    #[arg(long, value_parser = parse_interval, default_value = "-10,10")]
    pub rot_ap: Interval,
    #[arg(long, value_parser = parse_interval, default_value = "-10,10")]
    pub rot_si: Interval,
    #[arg(long, value_parser = parse_interval, default_value = "-50,50")]
    pub trans: Interval,
    #[arg(long, value_parser = parse_interval, default_value = "-0.45,0.05")]
    pub scale: Interval,
}

impl RangeArgs {
    pub fn ranges(&self) -> TransformRanges {
        TransformRanges {
            rot_lr: self.rot_lr,
            rot_ap: self.rot_ap,
            rot_si: self.rot_si,
            trans: [self.trans; 3],
            scale: [self.scale; 3],
        }
    }
}

fn parse_interval(s: &str) -> Result<Interval, String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo <= hi) {
        return Err(format!("lo {lo} > hi {hi}"));
    }
    Ok(Interval::new(lo, hi))
}

/// Failure of a command. Usage errors exit 1, data errors 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn data(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data { path: path.to_path_buf(), message: e.to_string() }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(other)?;
    pool.install(|| dispatch(cli.command, cli.seed))
}

fn resolve_seed(flag: Option<u64>, fallback: Option<u64>) -> u64 {
    flag.or(fallback).unwrap_or_else(|| {
        let s = entropy_seed();
        warn!("no --seed given; using seed {s}");
        s
    })
}

fn dispatch(cmd: Command, seed: Option<u64>) -> Result<(), CliError> {
    match cmd {
        Command::Gen { spec, out } => cmd_gen(spec.as_deref(), &out, seed),
        Command::Augment { input, labels, n, out, noise, ranges } => {
            cmd_augment(&input, &labels, n, &out, noise, &ranges.ranges(), resolve_seed(seed, None))
        }
        Command::Knn { input, k, m, out } => cmd_knn(&input, k, m, &out),
        Command::Train { data, config, out, atlas } => cmd_train(&data, config.as_deref(), &out, atlas.as_deref(), seed),
        Command::Predict { model, input, out, reg_free, conf, config } => {
            let conf = conf.unwrap_or_else(|| with_suffix(&out, ".conf.txt"));
            cmd_predict(&model, &input, &out, reg_free, &conf, config.as_deref(), seed.unwrap_or(0))
        }
        Command::Evaluate { pred, truth, input, atlas, wdice_against, threshold, voxel_size, m, out } => {
            let report = match (truth, input, atlas) {
                (Some(truth), _, _) => eval_truth(&pred, &truth)?,
                (None, Some(input), Some(atlas)) => {
                    eval_atlas(&pred, &input, &atlas, wdice_against.as_deref(), threshold, voxel_size, m)?
                }
                _ => return Err(CliError::Usage("evaluate needs --truth, or --in with --atlas".into())),
            };
            match out {
                Some(path) => fs::write(&path, report).map_err(|e| data(&path, e)),
                None => {
                    print!("{report}");
                    Ok(())
                }
            }
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `X.trk` -> `X.labels.txt`.
pub fn labels_path(trk: &Path) -> PathBuf {
    trk.with_extension("labels.txt")
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data(dir, e))
}

fn save_tractogram(dir: &Path, stem: &str, t: &LabeledTractogram) -> Result<(), CliError> {
    let trk = dir.join(format!("{stem}.trk"));
    write_trk(&TrkHeader::world(t.streamlines.len()), &t.streamlines, &trk).map_err(|e| data(&trk, e))?;
    let lp = labels_path(&trk);
    write_labels(&lp, &t.labels).map_err(|e| data(&lp, e))
}

fn load_trk(path: &Path) -> Result<Vec<Streamline>, CliError> {
    read_trk(path).map(|(_, t)| t).map_err(|e| data(path, e))
}

fn load_resampled(path: &Path, m: usize) -> Result<Vec<ResampledStreamline>, CliError> {
    load_trk(path)?
        .iter()
        .enumerate()
        .map(|(i, s)| resample(s, m).map_err(|e| data(path, format!("streamline {i}: {e}"))))
        .collect()
}

/// Class names from `classes.txt` next to `near`, if present.
fn sibling_class_names(near: &Path) -> Result<Option<BTreeMap<usize, String>>, CliError> {
    let path = near.parent().unwrap_or(Path::new(".")).join(CLASSES_FILE);
    if !path.exists() {
        return Ok(None);
    }
    read_class_names(&path).map(Some).map_err(|e| data(&path, e))
}

fn class_count_of(names: &Option<BTreeMap<usize, String>>) -> usize {
    names.as_ref().and_then(|n| n.keys().next_back().map(|k| k + 1)).unwrap_or(usize::MAX)
}

fn load_labels(path: &Path, count: usize, class_count: usize) -> Result<Vec<usize>, CliError> {
    read_labels(path, count, class_count).map(|l| l.labels).map_err(|e| data(path, e))
}

fn cmd_gen(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut spec = match spec_path {
        Some(p) => SyntheticAtlasSpec::read(p).map_err(|e| data(p, e))?,
        None => SyntheticAtlasSpec::demo(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let atlas = generate_atlas(&spec).map_err(other)?;
    create_dir(out)?;
    save_tractogram(out, "atlas", &atlas)?;
    let names = out.join(CLASSES_FILE);
    write_class_names(&names, &atlas.class_names).map_err(|e| data(&names, e))?;
    let sp = out.join("spec.txt");
    fs::write(&sp, spec.to_text()).map_err(|e| data(&sp, e))?;
    info!("wrote {} streamlines in {} classes to {}", atlas.streamlines.len(), spec.class_count(), out.display());
    Ok(())
}

fn cmd_augment(
    input: &Path,
    labels: &Path,
    n: usize,
    out: &Path,
    noise: f64,
    ranges: &TransformRanges,
    seed: u64,
) -> Result<(), CliError> {
    ranges.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Usage(format!("--noise {noise} must be a non-negative number")));
    }
    let streamlines = load_trk(input)?;
    let names = sibling_class_names(labels)?;
    let labels = load_labels(labels, streamlines.len(), class_count_of(&names))?;
    let base = LabeledTractogram { streamlines, labels, class_names: names.clone().unwrap_or_default() };
    create_dir(out)?;
    for i in 0..n {
        let mut rng = rng_for(seed, &[i as u64]);
        let m = base.streamlines.iter().map(Streamline::len).max().unwrap_or(2).max(2);
        let sub = generate_subject(&base, ranges, noise, m, &mut rng).map_err(|e| data(input, e))?;
        save_tractogram(out, &format!("sub{i:03}"), &sub)?;
    }
    if let Some(names) = names {
        let p = out.join(CLASSES_FILE);
        write_class_names(&p, &names).map_err(|e| data(&p, e))?;
    }
    Ok(())
}

fn cmd_knn(input: &Path, k: usize, m: usize, out: &Path) -> Result<(), CliError> {
    if m < 2 {
        return Err(CliError::Usage("--m must be at least 2".into()));
    }
    let streamlines = load_resampled(input, m)?;
    let lists = all_knn(&streamlines, k, false);
    write_neighbor_cache(out, &lists).map_err(|e| data(out, e))
}

/// Every `X.trk` with a sibling `X.labels.txt`, sorted by path.
fn labeled_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| data(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "trk") && labels_path(p).exists())
        .collect();
    files.sort();
    Ok(files)
}

fn atlas_trk(path: &Path) -> PathBuf {
    if path.is_dir() { path.join("atlas.trk") } else { path.to_path_buf() }
}

fn cmd_train(dirs: &[PathBuf], config: Option<&Path>, out: &Path, atlas: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => Config::read(p).map_err(|e| data(p, e))?,
        None => Config::default(),
    };
    let seed = resolve_seed(seed, cfg.seed);

    let mut files = Vec::new();
    let mut names = None;
    for d in dirs {
        let found = labeled_files(d)?;
        if found.is_empty() {
            return Err(data(d, "no X.trk + X.labels.txt pairs"));
        }
        if names.is_none() {
            names = sibling_class_names(&found[0])?;
        }
        files.extend(found);
    }
    let reference_path = atlas.map(atlas_trk).unwrap_or_else(|| files[0].clone());
    let reference = centroid(&load_resampled(&reference_path, cfg.m)?).map_err(|e| data(&reference_path, e))?;

    let mut sets = Vec::new();
    for f in &files {
        let s = load_resampled(f, cfg.m)?;
        let lp = labels_path(f);
        let l = load_labels(&lp, s.len(), class_count_of(&names))?;
        sets.push((center_to_reference(&s, &reference).map_err(|e| data(f, e))?, l));
    }
    let class_count = match &names {
        Some(n) => class_count_of(&Some(n.clone())),
        None => sets.iter().flat_map(|(_, l)| l.iter()).max().map_or(0, |&c| c + 1),
    };
    let hyper = cfg.hyperparameters(class_count);
    hyper.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let n_val = (cfg.val_fraction * sets.len() as f64).floor() as usize;
    let n_train = sets.len() - n_val;
    let mut brains = Vec::with_capacity(sets.len());
    for (i, (s, l)) in sets.into_iter().enumerate() {
        brains.push(Brain::new(i as u64, s, l, hyper.k, hyper.include_self).map_err(|e| data(&files[i], e))?);
    }
    let val = brains.split_off(n_train);

    let mut tcfg = cfg.train_config(seed);
    tcfg.reference_centroid = reference;
    let mut csv = String::from("epoch,split,loss,accuracy\n");
    println!("epoch,split,loss,accuracy");
    let (mut model, _) = train(&brains, &val, hyper, &tcfg, |row| {
        let line = row.csv_line();
        println!("{line}");
        let _ = std::io::stdout().flush();
        csv.push_str(&line);
        csv.push('\n');
    })
    .map_err(other)?;
    if let Some(n) = &names {
        model.class_names = (0..class_count).map(|c| n.get(&c).cloned().unwrap_or_else(|| format!("class_{c}"))).collect();
    }
    save_model(&model, out).map_err(|e| data(out, e))?;
    let mp = with_suffix(out, ".metrics.csv");
    fs::write(&mp, csv).map_err(|e| data(&mp, e))?;
    let mut log = String::new();
    writeln!(log, "seed = {seed}").unwrap();
    writeln!(log, "reference = {}", reference_path.display()).unwrap();
    for f in &files {
        writeln!(log, "data = {}", f.display()).unwrap();
    }
    writeln!(log, "validation_brains = {n_val}").unwrap();
    log.push_str(&cfg.to_text());
    let lp = with_suffix(out, ".log");
    fs::write(&lp, log).map_err(|e| data(&lp, e))
}

fn cmd_predict(
    model_path: &Path,
    input: &Path,
    out: &Path,
    reg_free: bool,
    conf: &Path,
    config: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let model: Model = load_model(model_path).map_err(|e| data(model_path, e))?;
    let mut icfg = InferenceConfig::for_model(&model);
    icfg.reg_free = reg_free;
    icfg.seed = seed;
    if let Some(p) = config {
        let c = Config::read(p).map_err(|e| data(p, e))?;
        (icfg.m, icfg.k, icfg.w, icfg.h) = (c.m, c.k, c.w, c.h);
    }
    let streamlines = load_resampled(input, icfg.m)?;
    let pred = predict(&model, &streamlines, &icfg).map_err(|e| data(model_path, e))?;
    write_labels(out, &pred.labels).map_err(|e| data(out, e))?;
    let mut s = String::with_capacity(pred.confidences.len() * 10);
    for c in &pred.confidences {
        writeln!(s, "{c:.6}").unwrap();
    }
    fs::write(conf, s).map_err(|e| data(conf, e))
}

fn read_unbounded_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data(path, e))?;
    let count = text.lines().filter(|l| !l.trim().is_empty()).count();
    crate::io::parse_labels(&text, count, usize::MAX).map_err(|e| data(path, e))
}

fn eval_truth(pred: &Path, truth: &Path) -> Result<String, CliError> {
    let p = read_unbounded_labels(pred)?;
    let t = read_unbounded_labels(truth)?;
    if p.len() != t.len() {
        return Err(data(pred, format!("{} predictions for {} truth labels", p.len(), t.len())));
    }
    let classes = p.iter().chain(&t).max().map_or(1, |&c| c + 1);
    let cm = ConfusionMatrix::from_labels(&t, &p, classes).map_err(|e| data(pred, e))?;
    let acc = accuracy(&cm).map_err(|e| data(pred, e))?;
    let f1 = macro_f1(&cm).map_err(|e| data(pred, e))?;
    Ok(format!("metric,value\naccuracy,{acc:.6}\nmacro_f1,{f1:.6}\n"))
}

fn eval_atlas(
    pred: &Path,
    input: &Path,
    atlas_dir: &Path,
    against: Option<&Path>,
    threshold: usize,
    voxel_size: f64,
    m: usize,
) -> Result<String, CliError> {
    let atlas_path = atlas_trk(atlas_dir);
    let atlas = load_resampled(&atlas_path, m)?;
    let names = sibling_class_names(&atlas_path)?;
    let alp = labels_path(&atlas_path);
    let atlas_labels = load_labels(&alp, atlas.len(), class_count_of(&names))?;
    let class_count = match &names {
        Some(_) => class_count_of(&names),
        None => atlas_labels.iter().max().map_or(1, |&c| c + 1),
    };
    let names = names.unwrap_or_else(|| (0..class_count).map(|c| (c, format!("class_{c}"))).collect());
    // every class except one named "other" (or the last class when none is)
    let other = names
        .iter()
        .find(|(_, n)| n.eq_ignore_ascii_case("other"))
        .map_or(class_count - 1, |(&c, _)| c);
    let tract_classes: Vec<usize> = (0..class_count).filter(|&c| c != other).collect();

    let raw = load_trk(input)?;
    let subject = raw
        .iter()
        .enumerate()
        .map(|(i, s)| resample(s, m).map_err(|e| data(input, format!("streamline {i}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = load_labels(pred, subject.len(), class_count)?;
    // centroid alignment onto the atlas before measuring distances
    let atlas_centroid = centroid(&atlas).map_err(|e| data(&atlas_path, e))?;
    let aligned = center_to_reference(&subject, &atlas_centroid).map_err(|e| data(input, e))?;
    let report = subject_report(&aligned, &labels, &atlas, &atlas_labels, &tract_classes, &names, threshold)
        .map_err(|e| data(pred, e))?;
    let mut out = report_csv(&report);
    if dataset_tda(std::slice::from_ref(&report)).is_none() {
        warn!("no tract identified; TDA undefined");
    }

    if let Some(q) = against {
        let other_labels = load_labels(q, raw.len(), class_count)?;
        let bounds = Bounds::of(raw.iter(), voxel_size).ok_or_else(|| data(input, "empty tractogram"))?;
        let mut rows = Vec::new();
        for &c in &tract_classes {
            let pick = |l: &[usize]| raw.iter().zip(l).filter(|(_, &x)| x == c).map(|(s, _)| s.clone()).collect::<Vec<_>>();
            let (a, b) = (pick(&labels), pick(&other_labels));
            let v = if a.is_empty() || b.is_empty() {
                None
            } else {
                let ga = voxelize(&a, voxel_size, &bounds).map_err(|e| data(input, e))?;
                let gb = voxelize(&b, voxel_size, &bounds).map_err(|e| data(input, e))?;
                Some(wdice(&ga, &gb).map_err(|e| data(input, e))?)
            };
            rows.push((names.get(&c).cloned().unwrap_or_else(|| format!("class_{c}")), v));
        }
        out.push('\n');
        out.push_str(&wdice_csv(&rows));
    }
    Ok(out)
}
