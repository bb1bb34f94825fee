//! Desk-scale check of the augmentation effect on the synthetic demo atlas:
//! a context model trained on transformed copies against a single-streamline
//! model trained on untransformed copies, both scored on held-out subjects.

use crate::geometry::{center_to_reference, centroid, resample, Point3, ResampledStreamline, TransformRanges};
use crate::nn::{predict, train, Brain, Hyperparameters, InferenceConfig, Model, NnError, TrainConfig};
use crate::rng::rng_for;
use crate::synthgen::{generate_atlas, generate_subject, LabeledTractogram, SynthError, SyntheticAtlasSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub spec: SyntheticAtlasSpec,
    /// Seed of the atlas instance the test subjects are derived from.
    pub test_atlas_seed: u64,
    /// Training copies added to the atlas itself.
    pub train_subjects: usize,
    pub test_subjects: usize,
    pub ranges: TransformRanges,
    pub noise_sigma: f64,
    pub hyper: Hyperparameters,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let spec = SyntheticAtlasSpec::demo();
        let hyper = Hyperparameters {
            k: 20,
            w: 100,
            h: 64,
            backbone: vec![64, 128, 256],
            head: vec![128, 64],
            class_count: spec.class_count(),
            ..Hyperparameters::default()
        };
        let train = TrainConfig { epochs: 10, batch_size: 64, seed: 1, ..TrainConfig::default() };
        Self {
            spec,
            test_atlas_seed: 1000,
            train_subjects: 8,
            test_subjects: 10,
            ranges: TransformRanges::default(),
            noise_sigma: 0.5,
            hyper,
            train,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Context model with augmentation, on transformed test subjects.
    pub context_transformed: f64,
    /// Context model with augmentation, on untransformed test subjects.
    pub context_untransformed: f64,
    pub baseline_transformed: f64,
    pub baseline_untransformed: f64,
}

impl BenchmarkResult {
    pub fn gap(&self) -> f64 {
        self.context_transformed - self.baseline_transformed
    }

    pub fn context_drop(&self) -> f64 {
        self.context_untransformed - self.context_transformed
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

fn resampled(t: &LabeledTractogram, m: usize) -> Result<Vec<ResampledStreamline>, BenchmarkError> {
    Ok(t.streamlines.iter().map(|s| resample(s, m)).collect::<Result<_, _>>()?)
}

fn brains(sets: &[LabeledTractogram], m: usize, k: usize, reference: &Point3) -> Result<Vec<Brain>, BenchmarkError> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            let centered = center_to_reference(&resampled(s, m)?, reference)?;
            Ok(Brain::new(i as u64, centered, s.labels.clone(), k, false)?)
        })
        .collect()
}

/// Accuracy over all streamlines of `subjects`, centering each onto the
/// model's atlas centroid first.
pub fn accuracy_on(model: &Model, subjects: &[LabeledTractogram]) -> Result<f64, BenchmarkError> {
    let mut cfg = InferenceConfig::for_model(model);
    cfg.reg_free = true;
    let (mut correct, mut total) = (0, 0);
    for s in subjects {
        let p = predict(model, &resampled(s, model.hyper.m)?, &cfg)?;
        correct += p.labels.iter().zip(&s.labels).filter(|(a, b)| a == b).count();
        total += s.labels.len();
    }
    Ok(correct as f64 / total.max(1) as f64)
}

pub fn run(cfg: &BenchmarkConfig, mut log: impl FnMut(&str)) -> Result<BenchmarkResult, BenchmarkError> {
    let m = cfg.hyper.m;
    let atlas = generate_atlas(&cfg.spec)?;
    let test_atlas = generate_atlas(&SyntheticAtlasSpec { seed: cfg.test_atlas_seed, ..cfg.spec.clone() })?;
    let zero = TransformRanges::zero();
    let mut rng = rng_for(cfg.seed, &[]);
    let mut subjects = |base: &LabeledTractogram, ranges: &TransformRanges, n: usize| {
        (0..n).map(|_| generate_subject(base, ranges, cfg.noise_sigma, m, &mut rng)).collect::<Result<Vec<_>, _>>()
    };
    let mut with_sta = vec![atlas.clone()];
    with_sta.extend(subjects(&atlas, &cfg.ranges, cfg.train_subjects)?);
    let mut without_sta = vec![atlas.clone()];
    without_sta.extend(subjects(&atlas, &zero, cfg.train_subjects)?);
    let test_transformed = subjects(&test_atlas, &cfg.ranges, cfg.test_subjects)?;
    let test_untransformed = subjects(&test_atlas, &zero, cfg.test_subjects)?;

    let reference = centroid(&resampled(&atlas, m)?)?;
    let train_cfg = TrainConfig { reference_centroid: reference, ..cfg.train.clone() };

    let hyper = cfg.hyper.clone();
    let (context, _) = train(&brains(&with_sta, m, hyper.k, &reference)?, &[], hyper.clone(), &train_cfg, |e| {
        log(&format!("context {}", e.csv_line()))
    })?;
    let base_hyper = Hyperparameters { k: 0, w: 0, ..hyper };
    let (baseline, _) = train(&brains(&without_sta, m, 0, &reference)?, &[], base_hyper.clone(), &train_cfg, |e| {
        log(&format!("baseline {}", e.csv_line()))
    })?;

    Ok(BenchmarkResult {
        context_transformed: accuracy_on(&context, &test_transformed)?,
        context_untransformed: accuracy_on(&context, &test_untransformed)?,
        baseline_transformed: accuracy_on(&baseline, &test_transformed)?,
        baseline_untransformed: accuracy_on(&baseline, &test_untransformed)?,
    })
}
