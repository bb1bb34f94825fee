//! Local-global input tensors.
//!
//! For a query streamline with `m` points and a context of `S = k + w`
//! streamlines, the input is an `m x 6 x S` tensor: slot `j` holds the query
//! point `p` in channels 0-2 and point `p` of context streamline `j` in
//! channels 3-5 (absolute coordinates). Slots list the local neighbors first,
//! nearest first, then the global samples. With no context at all the input
//! degenerates to the bare query, `m x 3 x 1`.

use thiserror::Error;

use crate::geometry::{dist, Point3, ResampledStreamline};
use crate::neighbors::ContextSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("context index {index} out of range for {n} streamlines")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("streamline {index} has {found} points, query has {expected}")]
    MixedResampling { index: usize, expected: usize, found: usize },
}

/// Row-major `m x channels x slots` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGlobalInput {
    pub m: usize,
    pub channels: usize,
    pub slots: usize,
    pub data: Vec<f64>,
}

impl LocalGlobalInput {
    #[inline]
    pub fn at(&self, p: usize, c: usize, j: usize) -> f64 {
        self.data[(p * self.channels + c) * self.slots + j]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.m, self.channels, self.slots]
    }

    /// Single-streamline input (`m x 3 x 1`).
    pub fn baseline(query: &ResampledStreamline) -> Self {
        let data = query.points().iter().flat_map(|p| p.iter().copied()).collect();
        Self { m: query.m(), channels: 3, slots: 1, data }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Reverse each context streamline when that lowers its MDF pairing
    /// with the query.
    pub flip_align_context: bool,
}

pub fn build_input(
    query: &ResampledStreamline,
    context: &ContextSet,
    streamlines: &[ResampledStreamline],
) -> Result<LocalGlobalInput, FeatureError> {
    build_input_with(query, context, streamlines, FeatureOptions::default())
}

pub fn build_input_with(
    query: &ResampledStreamline,
    context: &ContextSet,
    streamlines: &[ResampledStreamline],
    opts: FeatureOptions,
) -> Result<LocalGlobalInput, FeatureError> {
    let m = query.m();
    if context.is_empty() {
        return Ok(LocalGlobalInput::baseline(query));
    }
    let slots = context.len();
    let mut ctx: Vec<(&[Point3], bool)> = Vec::with_capacity(slots);
    for index in context.slots() {
        let s = streamlines.get(index).ok_or(FeatureError::IndexOutOfRange { index, n: streamlines.len() })?;
        if s.m() != m {
            return Err(FeatureError::MixedResampling { index, expected: m, found: s.m() });
        }
        let flip = opts.flip_align_context && is_flip_closer(query.points(), s.points());
        ctx.push((s.points(), flip));
    }

    let mut data = vec![0.0; m * 6 * slots];
    let q = query.points();
    for p in 0..m {
        for c in 0..3 {
            let row = &mut data[(p * 6 + c) * slots..(p * 6 + c + 1) * slots];
            row.fill(q[p][c]);
        }
        for c in 0..3 {
            let row = &mut data[(p * 6 + 3 + c) * slots..(p * 6 + 4 + c) * slots];
            for (j, (pts, flip)) in ctx.iter().enumerate() {
                let src = if *flip { m - 1 - p } else { p };
                row[j] = pts[src][c];
            }
        }
    }
    Ok(LocalGlobalInput { m, channels: 6, slots, data })
}

fn is_flip_closer(q: &[Point3], s: &[Point3]) -> bool {
    let m = q.len();
    let direct: f64 = (0..m).map(|p| dist(&q[p], &s[p])).sum();
    let flipped: f64 = (0..m).map(|p| dist(&q[p], &s[m - 1 - p])).sum();
    flipped < direct
}
