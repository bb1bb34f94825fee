//! Mini-batch training and inference.
//!
//! Each batch is split into fixed-size chunks; chunks are processed in
//! parallel and their gradient sums are reduced in chunk order, so results
//! do not depend on the number of worker threads.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::loss::{argmax, cross_entropy_with_grad, softmax};
use super::model::{Gradients, Hyperparameters, Model};
use super::{adam_step, AdamState, NnError};
use crate::features::{build_input_with, FeatureOptions, LocalGlobalInput};
use crate::geometry::{center_to_reference, Point3, ResampledStreamline};
use crate::neighbors::{all_knn, sample_global_for, sample_global_for_streamline, ContextSet};
use crate::rng::{derive_seed, rng_for};

const STREAM_INIT: u64 = 0x1417;
const STREAM_SHUFFLE: u64 = 0x5u64 << 32;
const STREAM_SUBSAMPLE: u64 = 0x6u64 << 32;
const VALIDATION_BRAIN_OFFSET: u64 = 1 << 40;

/// One tractogram prepared for learning: resampled streamlines, labels and
/// precomputed local neighbor lists.
#[derive(Debug, Clone)]
pub struct Brain {
    pub id: u64,
    pub streamlines: Vec<ResampledStreamline>,
    pub labels: Vec<usize>,
    pub neighbors: Vec<Vec<usize>>,
}

impl Brain {
    /// Computes neighbor lists with exact kNN (`k` may be 0).
    pub fn new(id: u64, streamlines: Vec<ResampledStreamline>, labels: Vec<usize>, k: usize, include_self: bool) -> Result<Self, NnError> {
        if labels.len() != streamlines.len() {
            return Err(NnError::LabelCountMismatch { brain: id, labels: labels.len(), streamlines: streamlines.len() });
        }
        let neighbors = if k == 0 { vec![Vec::new(); streamlines.len()] } else { all_knn(&streamlines, k, include_self) };
        Ok(Self { id, streamlines, labels, neighbors })
    }

    pub fn len(&self) -> usize {
        self.streamlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streamlines.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Samples per parallel work unit; fixes the gradient summation order.
    pub chunk_size: usize,
    /// Inverse-frequency class weights in the loss.
    pub class_weighting: bool,
    /// Random subset of streamlines drawn from each brain per epoch (0 = all).
    pub samples_per_brain: usize,
    pub reference_centroid: Point3,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 1024,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            chunk_size: 32,
            class_weighting: false,
            samples_per_brain: 0,
            reference_centroid: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

impl EpochMetrics {
    /// `epoch,split,loss,accuracy`
    pub fn csv_line(&self) -> String {
        format!("{},{},{:.6},{:.6}", self.epoch, self.split.as_str(), self.loss, self.accuracy)
    }
}

/// Global context of every brain for one epoch (empty in per-streamline mode).
fn global_sets(brains: &[Brain], hyper: &Hyperparameters, seed: u64, epoch: u64, brain_offset: u64) -> Vec<Vec<usize>> {
    brains
        .iter()
        .map(|b| {
            if hyper.w == 0 || hyper.global_per_streamline {
                Vec::new()
            } else {
                sample_global_for(seed, b.id.wrapping_add(brain_offset), epoch, b.len(), hyper.w)
            }
        })
        .collect()
}

/// Context slots for streamline `i` of `brain`. A context-based model that
/// ends up with no slots (single-streamline brain, `w = 0`) gets the query
/// itself as its only slot.
pub fn context_for(brain: &Brain, i: usize, hyper: &Hyperparameters, seed: u64, epoch: u64, brain_global: &[usize]) -> ContextSet {
    if hyper.is_baseline() {
        return ContextSet::default();
    }
    let mut local_ids = brain.neighbors[i].clone();
    local_ids.truncate(hyper.k);
    let global_ids = if hyper.w == 0 {
        Vec::new()
    } else if hyper.global_per_streamline {
        sample_global_for_streamline(seed, brain.id, epoch, i, brain.len(), hyper.w)
    } else {
        brain_global.to_vec()
    };
    let mut ctx = ContextSet { local_ids, global_ids };
    if ctx.is_empty() {
        ctx.local_ids.push(i);
    }
    ctx
}

fn build_sample(brain: &Brain, i: usize, hyper: &Hyperparameters, seed: u64, epoch: u64, global: &[usize]) -> Result<LocalGlobalInput, NnError> {
    let ctx = context_for(brain, i, hyper, seed, epoch, global);
    let opts = FeatureOptions { flip_align_context: hyper.flip_align_context };
    Ok(build_input_with(&brain.streamlines[i], &ctx, &brain.streamlines, opts)?)
}

struct ChunkResult {
    grads: Option<Gradients>,
    loss: f64,
    correct: usize,
    finite: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_chunk(
    model: &Model,
    brains: &[Brain],
    globals: &[Vec<usize>],
    chunk: &[(usize, usize)],
    seed: u64,
    epoch: u64,
    class_weights: Option<&[f64]>,
    with_grad: bool,
) -> Result<ChunkResult, NnError> {
    let inputs = chunk
        .iter()
        .map(|&(b, i)| build_sample(&brains[b], i, &model.hyper, seed, epoch, &globals[b]))
        .collect::<Result<Vec<_>, _>>()?;
    let pass = model.forward_chunk(&inputs)?;
    let c = model.class_count();
    let mut dlogits = vec![0.0; chunk.len() * c];
    let mut loss = 0.0;
    let mut correct = 0;
    for (s, &(b, i)) in chunk.iter().enumerate() {
        let label = brains[b].labels[i];
        let logits = pass.sample_logits(s);
        let (l, mut g) = cross_entropy_with_grad(logits, label)?;
        let weight = class_weights.map_or(1.0, |w| w[label]);
        loss += weight * l;
        if argmax(logits) == label {
            correct += 1;
        }
        for v in &mut g {
            *v *= weight;
        }
        dlogits[s * c..(s + 1) * c].copy_from_slice(&g);
    }
    let mut finite = loss.is_finite() && pass.all_finite();
    let grads = if with_grad {
        let mut grads = model.zero_grads();
        model.backward_chunk(&inputs, &pass, &dlogits, &mut grads);
        finite &= grads.is_finite();
        Some(grads)
    } else {
        None
    };
    Ok(ChunkResult { grads, loss, correct, finite })
}

fn check_brains(brains: &[Brain], hyper: &Hyperparameters) -> Result<(), NnError> {
    for b in brains {
        if b.labels.len() != b.len() {
            return Err(NnError::LabelCountMismatch { brain: b.id, labels: b.labels.len(), streamlines: b.len() });
        }
        if let Some(&label) = b.labels.iter().find(|&&l| l >= hyper.class_count) {
            return Err(NnError::OutOfRangeLabel { label, class_count: hyper.class_count });
        }
        if let Some(s) = b.streamlines.iter().find(|s| s.m() != hyper.m) {
            return Err(NnError::DimMismatch(format!("brain {} has {}-point streamlines, model uses m = {}", b.id, s.m(), hyper.m)));
        }
    }
    Ok(())
}

/// Mean loss and accuracy of `model` over all streamlines of `brains`.
pub fn evaluate(model: &Model, brains: &[Brain], seed: u64, epoch: u64, chunk_size: usize) -> Result<(f64, f64), NnError> {
    check_brains(brains, &model.hyper)?;
    let globals = global_sets(brains, &model.hyper, seed, epoch, VALIDATION_BRAIN_OFFSET);
    let samples: Vec<(usize, usize)> = brains.iter().enumerate().flat_map(|(b, br)| (0..br.len()).map(move |i| (b, i))).collect();
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let results = samples
        .par_chunks(chunk_size.max(1))
        .map(|chunk| run_chunk(model, brains, &globals, chunk, seed, epoch, None, false))
        .collect::<Result<Vec<_>, _>>()?;
    let loss: f64 = results.iter().map(|r| r.loss).sum();
    let correct: usize = results.iter().map(|r| r.correct).sum();
    Ok((loss / samples.len() as f64, correct as f64 / samples.len() as f64))
}

fn class_weights(brains: &[Brain], class_count: usize) -> Vec<f64> {
    let mut counts = vec![0usize; class_count];
    for &l in brains.iter().flat_map(|b| &b.labels) {
        counts[l] += 1;
    }
    let total: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count().max(1);
    counts.iter().map(|&c| if c == 0 { 0.0 } else { total as f64 / (present as f64 * c as f64) }).collect()
}

/// Trains a fresh model. `on_epoch` sees every metrics row as it is produced.
pub fn train(
    train_brains: &[Brain],
    val_brains: &[Brain],
    hyper: Hyperparameters,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Model, Vec<EpochMetrics>), NnError> {
    hyper.validate()?;
    if train_brains.iter().all(Brain::is_empty) {
        return Err(NnError::EmptyDataset);
    }
    check_brains(train_brains, &hyper)?;
    check_brains(val_brains, &hyper)?;

    let mut present = vec![false; hyper.class_count];
    for &l in train_brains.iter().flat_map(|b| &b.labels) {
        present[l] = true;
    }
    for (c, _) in present.iter().enumerate().filter(|(_, p)| !**p) {
        log::warn!("class {c} has no training streamlines");
    }

    let mut model = Model::new(hyper.clone(), &mut rng_for(cfg.seed, &[STREAM_INIT]))?;
    model.set_atlas_centroid(cfg.reference_centroid);
    let mut adam = AdamState::new(model.params(), cfg.lr);
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.eps;
    let weights = cfg.class_weighting.then(|| class_weights(train_brains, hyper.class_count));
    let batch_size = cfg.batch_size.max(1);
    let chunk_size = cfg.chunk_size.max(1);

    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        let e = epoch as u64;
        let globals = global_sets(train_brains, &hyper, cfg.seed, e, 0);
        let mut samples: Vec<(usize, usize)> = Vec::new();
        for (b, brain) in train_brains.iter().enumerate() {
            let mut ids: Vec<usize> = (0..brain.len()).collect();
            if cfg.samples_per_brain > 0 && cfg.samples_per_brain < ids.len() {
                ids.shuffle(&mut rng_for(cfg.seed, &[STREAM_SUBSAMPLE, brain.id, e]));
                ids.truncate(cfg.samples_per_brain);
                ids.sort_unstable();
            }
            samples.extend(ids.into_iter().map(|i| (b, i)));
        }
        samples.shuffle(&mut rng_for(cfg.seed, &[STREAM_SHUFFLE, e]));

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in samples.chunks(batch_size) {
            let results = batch
                .par_chunks(chunk_size)
                .map(|chunk| run_chunk(&model, train_brains, &globals, chunk, cfg.seed, e, weights.as_deref(), true))
                .collect::<Result<Vec<_>, _>>()?;
            let mut total: Option<Gradients> = None;
            for r in results {
                if !r.finite {
                    return Err(NnError::NonFinite(epoch));
                }
                loss_sum += r.loss;
                correct += r.correct;
                let g = r.grads.expect("gradients requested");
                match total.as_mut() {
                    Some(t) => t.add_assign(&g),
                    None => total = Some(g),
                }
            }
            let mut total = total.expect("non-empty batch");
            total.scale(1.0 / batch.len() as f64);
            {
                let grads: Vec<&[f64]> = total.0.iter().map(|t| t.data.as_slice()).collect();
                let mut params: Vec<&mut [f64]> = model.params_mut().into_iter().map(|t| t.data.as_mut_slice()).collect();
                adam_step(&mut adam, &mut params, &grads);
            }
            model.round_to_f32();
        }
        let row = EpochMetrics {
            epoch,
            split: Split::Train,
            loss: loss_sum / samples.len() as f64,
            accuracy: correct as f64 / samples.len() as f64,
        };
        on_epoch(&row);
        history.push(row);

        if val_brains.iter().any(|b| !b.is_empty()) {
            let (loss, accuracy) = evaluate(&model, val_brains, cfg.seed, e, chunk_size)?;
            let row = EpochMetrics { epoch, split: Split::Validation, loss, accuracy };
            on_epoch(&row);
            history.push(row);
        }
    }
    Ok((model, history))
}

/// Context and hyperparameters requested at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub m: usize,
    pub k: usize,
    pub w: usize,
    pub h: usize,
    /// Translate the tractogram onto the model's atlas centroid first.
    pub reg_free: bool,
    pub seed: u64,
    pub chunk_size: usize,
}

impl InferenceConfig {
    /// Matches the model's own hyperparameters.
    pub fn for_model(model: &Model) -> Self {
        Self { m: model.hyper.m, k: model.hyper.k, w: model.hyper.w, h: model.hyper.h, reg_free: false, seed: 0, chunk_size: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// Softmax probability of the predicted class.
    pub confidences: Vec<f64>,
    /// Full softmax rows, `n x class_count`.
    pub probabilities: Vec<Vec<f64>>,
}

/// Labels every streamline of a brain.
pub fn predict(model: &Model, streamlines: &[ResampledStreamline], cfg: &InferenceConfig) -> Result<Prediction, NnError> {
    let hp = &model.hyper;
    if (cfg.m, cfg.k, cfg.w, cfg.h) != (hp.m, hp.k, hp.w, hp.h) {
        return Err(NnError::ModelConfigMismatch(format!(
            "config (m={}, k={}, w={}, h={}) vs model (m={}, k={}, w={}, h={})",
            cfg.m, cfg.k, cfg.w, cfg.h, hp.m, hp.k, hp.w, hp.h
        )));
    }
    if let Some(s) = streamlines.iter().find(|s| s.m() != hp.m) {
        return Err(NnError::ModelConfigMismatch(format!("tractogram has {}-point streamlines, model uses m = {}", s.m(), hp.m)));
    }
    if streamlines.is_empty() {
        return Ok(Prediction { labels: Vec::new(), confidences: Vec::new(), probabilities: Vec::new() });
    }
    let streamlines = if cfg.reg_free { center_to_reference(streamlines, &model.atlas_centroid)? } else { streamlines.to_vec() };
    let n = streamlines.len();
    let brain = Brain::new(0, streamlines, vec![0; n], hp.k, hp.include_self)?;
    let brains = std::slice::from_ref(&brain);
    let seed = derive_seed(cfg.seed, &[0x9e3]);
    let globals = global_sets(brains, hp, seed, 0, 0);
    let ids: Vec<usize> = (0..n).collect();
    let rows = ids
        .par_chunks(cfg.chunk_size.max(1))
        .map(|chunk| {
            let inputs = chunk
                .iter()
                .map(|&i| build_sample(&brain, i, hp, seed, 0, &globals[0]))
                .collect::<Result<Vec<_>, _>>()?;
            let pass = model.forward_chunk(&inputs)?;
            Ok((0..chunk.len()).map(|s| softmax(pass.sample_logits(s))).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, NnError>>()?;
    let probabilities: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let labels: Vec<usize> = probabilities.iter().map(|p| argmax(p)).collect();
    let confidences = probabilities.iter().zip(&labels).map(|(p, &l)| p[l]).collect();
    Ok(Prediction { labels, confidences, probabilities })
}
