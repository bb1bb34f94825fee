//! Exact k-nearest streamlines on the demo atlas, brute force against the
//! centroid-pruned search, with the share of MDF evaluations skipped.
//!
//! cargo run --release --example knn_pruning

use std::time::Instant;

use tractparc::geometry::resample;
use tractparc::neighbors::{knn_brute, knn_pruned_with, streamline_centroids};
use tractparc::synthgen::{generate_atlas, SyntheticAtlasSpec};

fn main() {
    let atlas = generate_atlas(&SyntheticAtlasSpec::demo()).unwrap();
    let t: Vec<_> = atlas.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
    let k = 20;

    let start = Instant::now();
    let brute: Vec<_> = (0..t.len()).map(|q| knn_brute(q, &t, k)).collect();
    let brute_time = start.elapsed();

    let start = Instant::now();
    let centroids = streamline_centroids(&t);
    let (mut evaluated, mut candidates) = (0, 0);
    let mut same = true;
    for (q, want) in brute.iter().enumerate() {
        let (got, stats) = knn_pruned_with(q, &t, k, &centroids, false);
        same &= &got == want;
        evaluated += stats.evaluated;
        candidates += stats.candidates;
    }
    let pruned_time = start.elapsed();

    println!("{} streamlines, k = {k}", t.len());
    println!("brute  {brute_time:.2?}");
    println!("pruned {pruned_time:.2?}, {:.1}% of MDF evaluations skipped", 100.0 * (1.0 - evaluated as f64 / candidates as f64));
    println!("identical lists: {same}");
}
