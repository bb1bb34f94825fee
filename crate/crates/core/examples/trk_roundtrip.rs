//! Writes the demo atlas as a TrackVis file with its labels, reads both
//! back and checks nothing changed.
//!
//! cargo run --example trk_roundtrip [OUT_DIR]

use std::path::PathBuf;

use tractparc::io::{read_labels, read_trk, write_labels, write_trk, TrkHeader};
use tractparc::synthgen::{generate_atlas, SyntheticAtlasSpec};

fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let atlas = generate_atlas(&SyntheticAtlasSpec::demo()).unwrap();
    let (trk, labels) = (dir.join("demo_atlas.trk"), dir.join("demo_atlas.labels.txt"));
    write_trk(&TrkHeader::world(atlas.streamlines.len()), &atlas.streamlines, &trk).unwrap();
    write_labels(&labels, &atlas.labels).unwrap();

    let (header, back) = read_trk(&trk).unwrap();
    let l = read_labels(&labels, back.len(), atlas.class_names.len()).unwrap();
    let max_err = atlas
        .streamlines
        .iter()
        .zip(&back)
        .flat_map(|(a, b)| a.points().iter().zip(b.points()))
        .flat_map(|(p, q)| (0..3).map(move |d| (p[d] - q[d]).abs()))
        .fold(0.0, f64::max);
    println!("{} ({} bytes)", trk.display(), std::fs::metadata(&trk).unwrap().len());
    println!("header: version {}, {} streamlines, voxel order {:?}", header.version, header.n_count, std::str::from_utf8(&header.voxel_order).unwrap());
    println!("max coordinate change {max_err:.2e} mm (float32 storage)");
    println!("labels unchanged: {}", l.labels == atlas.labels);
}
