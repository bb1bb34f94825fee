//! Exact k-nearest-streamline search under MDF and random whole-brain
//! context sampling.
//!
//! The pruned search relies on `|centroid(a) - centroid(b)| <= mdf(a, b)`:
//! averaging the point-wise differences can only shrink their norm, and the
//! centroid is unchanged by flipping. Candidates are visited in order of
//! centroid distance and the scan stops once that lower bound exceeds the
//! current k-th best distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{dist, mdf_points, Point3, ResampledStreamline};
use crate::rng::rng_for;

/// Context streamlines of one query: `local_ids` in ascending MDF order,
/// then the random `global_ids`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextSet {
    pub local_ids: Vec<usize>,
    pub global_ids: Vec<usize>,
}

impl ContextSet {
    pub fn len(&self) -> usize {
        self.local_ids.len() + self.global_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.local_ids.iter().chain(&self.global_ids).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    distance: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance.total_cmp(&other.distance).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exhaustive k-NN: every candidate is scored, results sorted by
/// `(distance, index)`. The query itself is excluded unless `include_self`.
pub fn knn_brute_with(query: usize, streamlines: &[ResampledStreamline], k: usize, include_self: bool) -> Vec<usize> {
    let q = streamlines[query].points();
    let mut all: Vec<Candidate> = streamlines
        .iter()
        .enumerate()
        .filter(|&(j, _)| include_self || j != query)
        .map(|(j, s)| Candidate { distance: mdf_points(q, s.points()), index: j })
        .collect();
    all.sort_unstable();
    all.into_iter().take(k).map(|c| c.index).collect()
}

pub fn knn_brute(query: usize, streamlines: &[ResampledStreamline], k: usize) -> Vec<usize> {
    knn_brute_with(query, streamlines, k, false)
}

/// Counters from one pruned query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruneStats {
    pub candidates: usize,
    pub evaluated: usize,
}

impl PruneStats {
    pub fn skipped(&self) -> usize {
        self.candidates - self.evaluated
    }
}

pub fn streamline_centroids(streamlines: &[ResampledStreamline]) -> Vec<Point3> {
    streamlines.iter().map(|s| s.centroid()).collect()
}

/// Pruned exact k-NN; returns exactly what [`knn_brute_with`] returns.
pub fn knn_pruned_with(
    query: usize,
    streamlines: &[ResampledStreamline],
    k: usize,
    centroids: &[Point3],
    include_self: bool,
) -> (Vec<usize>, PruneStats) {
    let mut stats = PruneStats::default();
    if k == 0 {
        return (Vec::new(), stats);
    }
    let q = streamlines[query].points();
    let qc = &centroids[query];
    let mut order: Vec<Candidate> = centroids
        .iter()
        .enumerate()
        .filter(|&(j, _)| include_self || j != query)
        .map(|(j, c)| Candidate { distance: dist(qc, c), index: j })
        .collect();
    stats.candidates = order.len();
    order.sort_unstable();

    // Max-heap of the best k so far; the top is the current k-th best.
    let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for cand in order {
        if best.len() == k {
            let kth = best.peek().unwrap().distance;
            // Slack covers rounding in the bound when it is tight.
            if cand.distance > kth * (1.0 + 1e-12) + 1e-12 {
                break;
            }
        }
        stats.evaluated += 1;
        let scored = Candidate { distance: mdf_points(q, streamlines[cand.index].points()), index: cand.index };
        if best.len() < k {
            best.push(scored);
        } else if scored < *best.peek().unwrap() {
            best.pop();
            best.push(scored);
        }
    }
    (best.into_sorted_vec().into_iter().map(|c| c.index).collect(), stats)
}

pub fn knn_pruned(query: usize, streamlines: &[ResampledStreamline], k: usize, centroids: &[Point3]) -> Vec<usize> {
    knn_pruned_with(query, streamlines, k, centroids, false).0
}

/// Neighbor lists for every streamline of a brain (parallel over queries).
pub fn all_knn(streamlines: &[ResampledStreamline], k: usize, include_self: bool) -> Vec<Vec<usize>> {
    let centroids = streamline_centroids(streamlines);
    (0..streamlines.len())
        .into_par_iter()
        .map(|i| knn_pruned_with(i, streamlines, k, &centroids, include_self).0)
        .collect()
}

/// `min(w, n)` indices drawn uniformly without replacement.
pub fn sample_global<R: Rng + ?Sized>(n: usize, w: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, n, w.min(n)).into_vec()
}

/// Global context for `brain` in `epoch`, seeded by `hash(master, brain, epoch)`
/// so the draw does not depend on worker count.
pub fn sample_global_for(master_seed: u64, brain: u64, epoch: u64, n: usize, w: usize) -> Vec<usize> {
    sample_global(n, w, &mut rng_for(master_seed, &[brain, epoch]))
}

/// Same as [`sample_global_for`] but with a separate draw per streamline.
pub fn sample_global_for_streamline(master_seed: u64, brain: u64, epoch: u64, query: usize, n: usize, w: usize) -> Vec<usize> {
    sample_global(n, w, &mut rng_for(master_seed, &[brain, epoch, query as u64 + 1]))
}

#[derive(Debug, Error)]
pub enum NeighborCacheError {
    #[error("neighbor cache I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a neighbor cache (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("neighbor cache truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("neighbor index {index} out of range for {n} streamlines (entry {entry})")]
    IndexOutOfRange { index: i64, n: usize, entry: usize },
    #[error("neighbor lists have unequal lengths")]
    Ragged,
}

const CACHE_MAGIC: &[u8; 4] = b"TCNN";

/// Encodes neighbor lists: `"TCNN"`, `n: i32`, `k: i32`, then `n*k` `i32`
/// indices, all little-endian.
pub fn encode_neighbor_cache(lists: &[Vec<usize>]) -> Result<Vec<u8>, NeighborCacheError> {
    let k = lists.first().map_or(0, Vec::len);
    if lists.iter().any(|l| l.len() != k) {
        return Err(NeighborCacheError::Ragged);
    }
    let mut out = Vec::with_capacity(12 + 4 * k * lists.len());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(lists.len() as i32).to_le_bytes());
    out.extend_from_slice(&(k as i32).to_le_bytes());
    for &idx in lists.iter().flatten() {
        out.extend_from_slice(&(idx as i32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_neighbor_cache(bytes: &[u8]) -> Result<Vec<Vec<usize>>, NeighborCacheError> {
    if bytes.len() < 12 {
        return Err(NeighborCacheError::Truncated { expected: 12, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != CACHE_MAGIC {
        return Err(NeighborCacheError::BadMagic(magic));
    }
    let n = i32::from_le_bytes(bytes[4..8].try_into().unwrap()).max(0) as usize;
    let k = i32::from_le_bytes(bytes[8..12].try_into().unwrap()).max(0) as usize;
    let expected = 12 + 4 * n * k;
    if bytes.len() != expected {
        return Err(NeighborCacheError::Truncated { expected, found: bytes.len() });
    }
    let mut lists = Vec::with_capacity(n);
    for (entry, chunk) in bytes[12..].chunks_exact(4 * k.max(1)).take(n).enumerate() {
        let list = if k == 0 {
            Vec::new()
        } else {
            chunk
                .chunks_exact(4)
                .map(|c| {
                    let index = i32::from_le_bytes(c.try_into().unwrap()) as i64;
                    if index < 0 || index as usize >= n {
                        Err(NeighborCacheError::IndexOutOfRange { index, n, entry })
                    } else {
                        Ok(index as usize)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        lists.push(list);
    }
    lists.resize(n, Vec::new());
    Ok(lists)
}

pub fn write_neighbor_cache(path: &Path, lists: &[Vec<usize>]) -> Result<(), NeighborCacheError> {
    fs::write(path, encode_neighbor_cache(lists)?)?;
    Ok(())
}

pub fn read_neighbor_cache(path: &Path) -> Result<Vec<Vec<usize>>, NeighborCacheError> {
    decode_neighbor_cache(&fs::read(path)?)
}
