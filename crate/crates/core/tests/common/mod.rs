#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tractparc::features::LocalGlobalInput;
use tractparc::geometry::{Point3, ResampledStreamline, Streamline};
use tractparc::nn::{cross_entropy_with_grad, Hyperparameters, Model, SharedFCLayer};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point<R: Rng>(rng: &mut R, scale: f64) -> Point3 {
    [rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)]
}

/// A random walk of `m` points starting near the origin.
pub fn random_resampled<R: Rng>(rng: &mut R, m: usize, spread: f64) -> ResampledStreamline {
    let mut p = point(rng, spread);
    let mut pts = Vec::with_capacity(m);
    for _ in 0..m {
        pts.push(p);
        let d = point(rng, 5.0);
        p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
    }
    ResampledStreamline::from_points(pts).unwrap()
}

pub fn random_tractogram<R: Rng>(rng: &mut R, n: usize, m: usize, spread: f64) -> Vec<ResampledStreamline> {
    (0..n).map(|_| random_resampled(rng, m, spread)).collect()
}

pub fn random_streamline<R: Rng>(rng: &mut R, max_len: usize) -> Streamline {
    let len = rng.random_range(2..=max_len);
    Streamline::new((0..len).map(|_| point(rng, 100.0)).collect()).unwrap()
}

/// Independent MDF: plain loops, no pairing tricks.
pub fn mdf_oracle(a: &[Point3], b: &[Point3]) -> f64 {
    let m = a.len();
    let d = |p: &Point3, q: &Point3| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    let mut direct = 0.0;
    let mut flipped = 0.0;
    for i in 0..m {
        direct += d(&a[i], &b[i]);
        flipped += d(&a[i], &b[m - 1 - i]);
    }
    direct.min(flipped) / m as f64
}

/// Random orthonormal matrix from three random angles.
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let (a, b, c): (f64, f64, f64) = (rng.random_range(0.0..6.3), rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
    let rx = [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rz = [[c.cos(), -c.sin(), 0.0], [c.sin(), c.cos(), 0.0], [0.0, 0.0, 1.0]];
    matmul(&matmul(&rx, &ry), &rz)
}

pub fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn map_points(s: &ResampledStreamline, f: impl Fn(&Point3) -> Point3) -> ResampledStreamline {
    ResampledStreamline::from_points(s.points().iter().map(f).collect()).unwrap()
}

pub fn rigid<'a>(rot: &'a [[f64; 3]; 3], t: &'a Point3) -> impl Fn(&Point3) -> Point3 + 'a {
    move |p| {
        let mut q = [0.0; 3];
        for i in 0..3 {
            q[i] = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + t[i];
        }
        q
    }
}

pub fn mean_point(s: &ResampledStreamline) -> Point3 {
    let n = s.m() as f64;
    let mut c = [0.0; 3];
    for p in s.points() {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    c
}

/// The small model used by the gradient checks.
pub fn small_hyper() -> Hyperparameters {
    Hyperparameters {
        m: 15,
        k: 3,
        w: 2,
        h: 8,
        backbone: vec![8, 16, 32],
        head: vec![16],
        class_count: 4,
        ..Hyperparameters::default()
    }
}

pub fn random_input<R: Rng>(rng: &mut R, m: usize, channels: usize, slots: usize, scale: f64) -> LocalGlobalInput {
    let data = (0..m * channels * slots).map(|_| rng.random_range(-scale..scale)).collect();
    LocalGlobalInput { m, channels, slots, data }
}

/// Mean cross-entropy of a batch.
pub fn batch_loss(model: &Model, inputs: &[LocalGlobalInput], labels: &[usize]) -> f64 {
    let pass = model.forward_chunk(inputs).unwrap();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| cross_entropy_with_grad(pass.sample_logits(i), l).unwrap().0)
        .sum::<f64>()
        / labels.len() as f64
}

/// Analytic gradient of `batch_loss`, one vector per parameter tensor.
pub fn analytic_grads(model: &Model, inputs: &[LocalGlobalInput], labels: &[usize]) -> Vec<Vec<f64>> {
    let pass = model.forward_chunk(inputs).unwrap();
    let c = model.class_count();
    let mut dlogits = vec![0.0; labels.len() * c];
    for (i, &l) in labels.iter().enumerate() {
        let (_, g) = cross_entropy_with_grad(pass.sample_logits(i), l).unwrap();
        for (d, v) in dlogits[i * c..(i + 1) * c].iter_mut().zip(g) {
            *d = v / labels.len() as f64;
        }
    }
    let mut grads = model.zero_grads();
    model.backward_chunk(inputs, &pass, &dlogits, &mut grads);
    grads.0.into_iter().map(|t| t.data).collect()
}

/// Central differences with step `h` for every parameter. Where the step
/// straddles a ReLU or max-pool switch (the estimate at `h` disagrees with
/// the one at `h / 10`), the element is re-estimated at `h / 100`.
pub fn numeric_grads(model: &Model, inputs: &[LocalGlobalInput], labels: &[usize], h: f64) -> Vec<Vec<f64>> {
    let mut work = model.clone();
    let sizes: Vec<usize> = model.params().iter().map(|t| t.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (t, &n) in sizes.iter().enumerate() {
        let mut g = vec![0.0; n];
        for (e, ge) in g.iter_mut().enumerate() {
            let mut central = |step: f64| {
                let orig = work.params()[t].data[e];
                work.params_mut()[t].data[e] = orig + step;
                let up = batch_loss(&work, inputs, labels);
                work.params_mut()[t].data[e] = orig - step;
                let down = batch_loss(&work, inputs, labels);
                work.params_mut()[t].data[e] = orig;
                (up - down) / (2.0 * step)
            };
            let coarse = central(h);
            let fine = central(h / 10.0);
            *ge = if (coarse - fine).abs() > 1e-7 * (1.0 + fine.abs()) { central(h / 100.0) } else { coarse };
        }
        out.push(g);
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b| / max(|a|, |b|)` per tensor; tensors whose gradients are both
/// below `floor` count as agreeing.
pub fn relative_errors(a: &[Vec<f64>], b: &[Vec<f64>], floor: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            let scale = norm(x).max(norm(y));
            if scale < floor { norm(&diff) / floor } else { norm(&diff) / scale }
        })
        .collect()
}

/// Max relative gradient error over all tensors for one seed.
pub fn gradient_check(seed: u64) -> Vec<f64> {
    let hyper = small_hyper();
    let mut r = rng(seed);
    let mut model = Model::new(hyper.clone(), &mut r).unwrap();
    // fresh models have zero biases, which puts all-zero rows exactly on
    // the ReLU kink where central differences see slope 1/2
    for layer in model.layers_mut() {
        for b in &mut layer.bias.data {
            *b = r.random_range(-0.1..0.1);
        }
    }
    let slots = hyper.k + hyper.w;
    let inputs: Vec<_> = (0..3).map(|_| random_input(&mut r, hyper.m, 6, slots, 60.0)).collect();
    let labels: Vec<usize> = (0..3).map(|_| r.random_range(0..hyper.class_count)).collect();
    let a = analytic_grads(&model, &inputs, &labels);
    let n = numeric_grads(&model, &inputs, &labels, 1e-4);
    relative_errors(&a, &n, 1e-8)
}

/// relu(W x + b) per slot then max over slots, with plain loops.
pub fn localglobal_oracle(t: &LocalGlobalInput, layer: &SharedFCLayer, scale: f64) -> Vec<f64> {
    let (out, inp) = (layer.out_dim(), layer.in_dim());
    let mut r = vec![0.0; t.m * out];
    for p in 0..t.m {
        for o in 0..out {
            let mut best = f64::NEG_INFINITY;
            for j in 0..t.slots {
                let mut acc = layer.bias.data[o];
                for c in 0..inp {
                    acc += layer.weights.data[o * inp + c] * (scale * t.at(p, c, j));
                }
                best = best.max(acc.max(0.0));
            }
            r[p * out + o] = best;
        }
    }
    r
}

pub fn permute_slots(t: &LocalGlobalInput, perm: &[usize]) -> LocalGlobalInput {
    let mut out = t.clone();
    for p in 0..t.m {
        for c in 0..t.channels {
            for (j, &src) in perm.iter().enumerate() {
                out.data[(p * t.channels + c) * t.slots + j] = t.at(p, c, src);
            }
        }
    }
    out
}

/// k nearest by plain sort over `(distance, index)` with the oracle MDF.
pub fn knn_oracle(query: usize, t: &[ResampledStreamline], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> =
        (0..t.len()).filter(|&j| j != query).map(|j| (mdf_oracle(t[query].points(), t[j].points()), j)).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Tractogram of `bundles` tight clusters spaced far apart, with every
/// third streamline duplicated to force ties.
pub fn clustered_tractogram<R: Rng>(rng: &mut R, n: usize, bundles: usize, m: usize) -> Vec<ResampledStreamline> {
    let protos: Vec<ResampledStreamline> = (0..bundles).map(|_| random_resampled(rng, m, 80.0)).collect();
    let mut out: Vec<ResampledStreamline> = Vec::with_capacity(n);
    while out.len() < n {
        if out.len() % 3 == 2 {
            let j = rng.random_range(0..out.len());
            out.push(out[j].clone());
            continue;
        }
        let b = &protos[rng.random_range(0..bundles)];
        let off = point(rng, 2.0);
        out.push(map_points(b, |p| [p[0] + off[0], p[1] + off[1], p[2] + off[2]]));
    }
    out
}

/// Streamline whose coordinates are exactly representable in f32.
pub fn f32_streamline<R: Rng>(rng: &mut R, max_len: usize) -> Streamline {
    let len = rng.random_range(2..=max_len);
    let p = |rng: &mut R| rng.random_range(-150.0f32..150.0) as f64;
    Streamline::new((0..len).map(|_| [p(rng), p(rng), p(rng)]).collect()).unwrap()
}

/// The 1000-byte world-space header with `n` streamlines, spelled out
/// byte by byte from the TrackVis layout.
pub fn golden_world_header(n: i32) -> Vec<u8> {
    let mut b = vec![0u8; 1000];
    let mut put = |at: usize, bytes: &[u8]| b[at..at + bytes.len()].copy_from_slice(bytes);
    put(0, b"TRACK\0");
    put(6, &[0, 1, 0, 1, 0, 1]);
    put(12, &[0, 0, 128, 63, 0, 0, 128, 63, 0, 0, 128, 63]);
    let (one, half) = ([0, 0, 128, 63], [0, 0, 0, 63]);
    for (row, col) in [(0, 0), (1, 1), (2, 2), (3, 3)] {
        put(440 + 16 * row + 4 * col, &one);
    }
    for row in 0..3 {
        put(440 + 16 * row + 12, &half);
    }
    put(948, b"RAS\0");
    put(988, &n.to_le_bytes());
    put(992, &[2, 0, 0, 0]);
    put(996, &[232, 3, 0, 0]);
    b
}
