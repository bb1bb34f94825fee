//! Local-global layer, PointNet-style backbone and classification head,
//! with forward and analytic backward passes over chunks of samples.

use rand::Rng;

use super::tensor::{gemm_ab, gemm_abt, gemm_atb_acc, Tensor};
use super::NnError;
use crate::features::LocalGlobalInput;
use crate::geometry::Point3;

/// Shared fully connected layer `y = W x + b`, applied independently to
/// every point (and, for the local-global layer, every context slot).
#[derive(Debug, Clone, PartialEq)]
pub struct SharedFCLayer {
    /// `out x in`
    pub weights: Tensor,
    /// `out`
    pub bias: Tensor,
}

impl SharedFCLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weights: Tensor::zeros(&[out_dim, in_dim]), bias: Tensor::zeros(&[out_dim]) }
    }

    /// He-style uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        Self { weights: Tensor::uniform(&[out_dim, in_dim], bound, rng), bias: Tensor::zeros(&[out_dim]) }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape[0]
    }

    /// `y[r] = W x[r] + b` for each of `rows` input rows.
    fn forward_rows(&self, x: &[f64], rows: usize, y: &mut [f64]) {
        let out = self.out_dim();
        for r in 0..rows {
            y[r * out..(r + 1) * out].copy_from_slice(&self.bias.data);
        }
        gemm_abt(rows, self.in_dim(), out, x, &self.weights.data, y, true);
    }
}

/// Architecture and context hyperparameters stored with a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub m: usize,
    pub k: usize,
    pub w: usize,
    pub h: usize,
    pub backbone: Vec<usize>,
    /// Hidden head widths; the output layer has `class_count` units.
    pub head: Vec<usize>,
    pub class_count: usize,
    /// Factor applied to coordinates (mm) before the local-global layer.
    pub input_scale: f64,
    pub include_self: bool,
    pub global_per_streamline: bool,
    pub flip_align_context: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            m: 15,
            k: 20,
            w: 500,
            h: 64,
            backbone: vec![64, 128, 1024],
            head: vec![512, 256],
            class_count: 43,
            input_scale: 0.01,
            include_self: false,
            global_per_streamline: false,
            flip_align_context: false,
        }
    }
}

impl Hyperparameters {
    /// Single-streamline (no context) configuration.
    pub fn is_baseline(&self) -> bool {
        self.k + self.w == 0
    }

    pub fn in_channels(&self) -> usize {
        if self.is_baseline() {
            3
        } else {
            6
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: &str| Err(NnError::InvalidHyperparameters(what.to_string()));
        if self.m < 2 {
            return bad("m must be at least 2");
        }
        if self.h == 0 || self.backbone.iter().chain(&self.head).any(|&d| d == 0) {
            return bad("layer widths must be positive");
        }
        if self.backbone.is_empty() {
            return bad("backbone needs at least one layer");
        }
        if self.class_count < 2 {
            return bad("class_count must be at least 2");
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return bad("input_scale must be positive");
        }
        Ok(())
    }
}

/// Trainable classifier plus the metadata needed for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: Hyperparameters,
    pub localglobal: SharedFCLayer,
    pub backbone: Vec<SharedFCLayer>,
    pub head: Vec<SharedFCLayer>,
    pub class_names: Vec<String>,
    /// Reference centroid used for registration-free centering.
    pub atlas_centroid: Point3,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(mut hyper: Hyperparameters, rng: &mut R) -> Result<Self, NnError> {
        hyper.validate()?;
        hyper.input_scale = hyper.input_scale as f32 as f64;
        let localglobal = SharedFCLayer::init(hyper.in_channels(), hyper.h, rng);
        let mut backbone = Vec::new();
        let mut prev = hyper.h;
        for &d in &hyper.backbone {
            backbone.push(SharedFCLayer::init(prev, d, rng));
            prev = d;
        }
        let mut head = Vec::new();
        for &d in hyper.head.iter().chain(std::iter::once(&hyper.class_count)) {
            head.push(SharedFCLayer::init(prev, d, rng));
            prev = d;
        }
        let class_names = (0..hyper.class_count).map(|c| format!("class_{c}")).collect();
        let mut model = Self { hyper, localglobal, backbone, head, class_names, atlas_centroid: [0.0; 3] };
        model.round_to_f32();
        Ok(model)
    }

    pub fn class_count(&self) -> usize {
        self.hyper.class_count
    }

    pub fn layers(&self) -> impl Iterator<Item = &SharedFCLayer> {
        std::iter::once(&self.localglobal).chain(&self.backbone).chain(&self.head)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut SharedFCLayer> {
        std::iter::once(&mut self.localglobal).chain(&mut self.backbone).chain(&mut self.head)
    }

    /// Parameter tensors in canonical order: weights then bias, per layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers().flat_map(|l| [&l.weights, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers_mut().flat_map(|l| [&mut l.weights, &mut l.bias]).collect()
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients(self.params().iter().map(|p| Tensor::zeros(&p.shape)).collect())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn set_atlas_centroid(&mut self, c: Point3) {
        self.atlas_centroid = c.map(|v| v as f32 as f64);
    }

    /// Parameters are stored at `f32` precision.
    pub fn round_to_f32(&mut self) {
        for p in self.params_mut() {
            p.round_to_f32();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    fn check_input(&self, t: &LocalGlobalInput) -> Result<(), NnError> {
        if t.channels != self.localglobal.in_dim() {
            return Err(NnError::DimMismatch(format!(
                "input has {} channels, local-global layer expects {}",
                t.channels,
                self.localglobal.in_dim()
            )));
        }
        if t.m != self.hyper.m {
            return Err(NnError::DimMismatch(format!("input has {} points, model expects {}", t.m, self.hyper.m)));
        }
        if t.slots == 0 || t.data.len() != t.m * t.channels * t.slots {
            return Err(NnError::DimMismatch("malformed local-global input".into()));
        }
        Ok(())
    }

    /// Logits for one sample (no softmax).
    pub fn forward(&self, t: &LocalGlobalInput) -> Result<Vec<f64>, NnError> {
        let pass = self.forward_chunk(std::slice::from_ref(t))?;
        Ok(pass.logits)
    }

    /// Forward pass over a chunk of samples, keeping what backward needs.
    pub fn forward_chunk(&self, inputs: &[LocalGlobalInput]) -> Result<ForwardPass, NnError> {
        for t in inputs {
            self.check_input(t)?;
        }
        let b = inputs.len();
        let m = self.hyper.m;
        let h = self.hyper.h;

        let mut rep = vec![0.0; b * m * h];
        let mut rep_arg = vec![0u32; b * m * h];
        for (i, t) in inputs.iter().enumerate() {
            localglobal_into(
                &self.localglobal,
                t,
                self.hyper.input_scale,
                &mut rep[i * m * h..(i + 1) * m * h],
                &mut rep_arg[i * m * h..(i + 1) * m * h],
            );
        }

        let rows = b * m;
        let mut acts = vec![rep];
        for layer in &self.backbone {
            let mut y = vec![0.0; rows * layer.out_dim()];
            layer.forward_rows(acts.last().unwrap(), rows, &mut y);
            relu_in_place(&mut y);
            acts.push(y);
        }

        let feat = self.backbone.last().unwrap().out_dim();
        let last = acts.last().unwrap();
        let mut pooled = vec![f64::NEG_INFINITY; b * feat];
        let mut pool_arg = vec![0u32; b * feat];
        for i in 0..b {
            let g = &mut pooled[i * feat..(i + 1) * feat];
            let arg = &mut pool_arg[i * feat..(i + 1) * feat];
            for p in 0..m {
                let row = &last[(i * m + p) * feat..(i * m + p + 1) * feat];
                for f in 0..feat {
                    if row[f] > g[f] {
                        g[f] = row[f];
                        arg[f] = p as u32;
                    }
                }
            }
        }

        let mut head_acts = vec![pooled];
        let n_head = self.head.len();
        for (l, layer) in self.head.iter().enumerate() {
            let mut y = vec![0.0; b * layer.out_dim()];
            layer.forward_rows(head_acts.last().unwrap(), b, &mut y);
            if l + 1 < n_head {
                relu_in_place(&mut y);
            }
            head_acts.push(y);
        }
        let logits = head_acts.pop().unwrap();
        Ok(ForwardPass { batch: b, rep_arg, acts, pool_arg, head_acts, logits })
    }

    /// Accumulates `sum_i dLoss_i/dtheta * weight_i` into `grads`, given
    /// `dlogits` (already weighted) for every sample of the chunk.
    pub fn backward_chunk(&self, inputs: &[LocalGlobalInput], pass: &ForwardPass, dlogits: &[f64], grads: &mut Gradients) {
        let b = pass.batch;
        let m = self.hyper.m;
        let h = self.hyper.h;
        let n_back = self.backbone.len();
        let n_head = self.head.len();
        let head_offset = 2 * (1 + n_back);

        // Head, last layer first.
        let mut delta = dlogits.to_vec();
        for l in (0..n_head).rev() {
            let layer = &self.head[l];
            let input = &pass.head_acts[l];
            let (gw, gb) = grads.layer_mut(head_offset + 2 * l);
            gemm_atb_acc(layer.out_dim(), b, layer.in_dim(), &delta, input, &mut gw.data);
            col_sum_acc(&delta, b, layer.out_dim(), &mut gb.data);
            let mut d_in = vec![0.0; b * layer.in_dim()];
            gemm_ab(b, layer.out_dim(), layer.in_dim(), &delta, &layer.weights.data, &mut d_in, false);
            if l > 0 {
                relu_mask(&mut d_in, input);
            }
            delta = d_in;
        }

        // Scatter through the max-pool over points.
        let feat = self.backbone.last().unwrap().out_dim();
        let rows = b * m;
        let mut d_act = vec![0.0; rows * feat];
        for i in 0..b {
            for f in 0..feat {
                let p = pass.pool_arg[i * feat + f] as usize;
                d_act[(i * m + p) * feat + f] = delta[i * feat + f];
            }
        }

        for l in (0..n_back).rev() {
            let layer = &self.backbone[l];
            relu_mask(&mut d_act, &pass.acts[l + 1]);
            let (gw, gb) = grads.layer_mut(2 * (1 + l));
            gemm_atb_acc(layer.out_dim(), rows, layer.in_dim(), &d_act, &pass.acts[l], &mut gw.data);
            col_sum_acc(&d_act, rows, layer.out_dim(), &mut gb.data);
            let mut d_in = vec![0.0; rows * layer.in_dim()];
            gemm_ab(rows, layer.out_dim(), layer.in_dim(), &d_act, &layer.weights.data, &mut d_in, false);
            d_act = d_in;
        }

        // Local-global layer: gradient reaches only the winning slot, and
        // only when its activation is positive.
        let rep = &pass.acts[0];
        let scale = self.hyper.input_scale;
        let (gw, gb) = grads.layer_mut(0);
        for (i, t) in inputs.iter().enumerate() {
            let c_in = t.channels;
            for p in 0..m {
                for o in 0..h {
                    let idx = (i * m + p) * h + o;
                    if rep[idx] <= 0.0 {
                        continue;
                    }
                    let g = d_act[idx];
                    let j = pass.rep_arg[idx] as usize;
                    gb.data[o] += g;
                    for c in 0..c_in {
                        gw.data[o * c_in + c] += g * scale * t.data[(p * c_in + c) * t.slots + j];
                    }
                }
            }
        }
    }
}

/// Cached activations of one chunk.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub batch: usize,
    rep_arg: Vec<u32>,
    /// `acts[0]` is the local-global representation `(batch*m) x h`; then one
    /// post-ReLU activation per backbone layer.
    acts: Vec<Vec<f64>>,
    pool_arg: Vec<u32>,
    /// Inputs to each head layer; `head_acts[0]` is the pooled descriptor.
    head_acts: Vec<Vec<f64>>,
    /// `batch x class_count`
    pub logits: Vec<f64>,
}

impl ForwardPass {
    /// Local-global representation of sample `i`, `m x h` row-major.
    pub fn representation(&self, i: usize, m: usize, h: usize) -> &[f64] {
        &self.acts[0][i * m * h..(i + 1) * m * h]
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        let feat = self.head_acts[0].len() / self.batch;
        &self.head_acts[0][i * feat..(i + 1) * feat]
    }

    pub fn sample_logits(&self, i: usize) -> &[f64] {
        let c = self.logits.len() / self.batch;
        &self.logits[i * c..(i + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.acts.iter().chain(&self.head_acts).flatten().chain(&self.logits).all(|v| v.is_finite())
    }
}

/// Gradients in [`Model::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    fn layer_mut(&mut self, weight_index: usize) -> (&mut Tensor, &mut Tensor) {
        let (a, b) = self.0.split_at_mut(weight_index + 1);
        (&mut a[weight_index], &mut b[0])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.0 {
            t.scale(s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|t| t.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

/// `r[p, o] = max_j relu(W (s * t[p, :, j]) + b)[o]`; records the lowest
/// winning slot index.
fn localglobal_into(layer: &SharedFCLayer, t: &LocalGlobalInput, scale: f64, rep: &mut [f64], arg: &mut [u32]) {
    let h = layer.out_dim();
    let c_in = t.channels;
    let s = t.slots;
    let w = &layer.weights.data;
    let mut pre = vec![0.0; s];
    for p in 0..t.m {
        let block = &t.data[p * c_in * s..(p + 1) * c_in * s];
        for o in 0..h {
            pre.fill(layer.bias.data[o]);
            for c in 0..c_in {
                let wc = w[o * c_in + c] * scale;
                let row = &block[c * s..(c + 1) * s];
                for (acc, x) in pre.iter_mut().zip(row) {
                    *acc += wc * x;
                }
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0u32;
            for (j, &v) in pre.iter().enumerate() {
                let v = v.max(0.0);
                if v > best {
                    best = v;
                    best_j = j as u32;
                }
            }
            rep[p * h + o] = best;
            arg[p * h + o] = best_j;
        }
    }
}

/// Representation `r_i` (`m x h`) of the local-global layer alone.
pub fn localglobal_forward(t: &LocalGlobalInput, layer: &SharedFCLayer, input_scale: f64) -> Result<Vec<f64>, NnError> {
    if t.channels != layer.in_dim() {
        return Err(NnError::DimMismatch(format!("input has {} channels, layer expects {}", t.channels, layer.in_dim())));
    }
    if t.slots == 0 {
        return Err(NnError::DimMismatch("input has no context slots".into()));
    }
    let h = layer.out_dim();
    let mut rep = vec![0.0; t.m * h];
    let mut arg = vec![0u32; t.m * h];
    localglobal_into(layer, t, input_scale, &mut rep, &mut arg);
    Ok(rep)
}

fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose post-ReLU activation is not positive.
fn relu_mask(grad: &mut [f64], post: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(post) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn col_sum_acc(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(&x[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
}
