//! Scores a deliberately corrupted labeling of the demo atlas: accuracy,
//! macro F1, per-tract identification and distance, and weighted Dice.
//!
//! cargo run --release --example parcellation_metrics

use tractparc::geometry::resample;
use tractparc::metrics::{accuracy, macro_f1, report_csv, subject_report, voxelize, wdice, Bounds, ConfusionMatrix};
use tractparc::synthgen::{generate_atlas, SyntheticAtlasSpec};

fn main() {
    let spec = SyntheticAtlasSpec::demo();
    let atlas = generate_atlas(&spec).unwrap();
    let c = spec.class_count();
    // send three quarters of the first tract to "other"
    let mut pred = atlas.labels.clone();
    for (i, p) in pred.iter_mut().filter(|p| **p == 0).enumerate() {
        if i % 4 != 0 {
            *p = spec.other_class();
        }
    }

    let cm = ConfusionMatrix::from_labels(&atlas.labels, &pred, c).unwrap();
    println!("accuracy {:.4}, macro F1 {:.4}", accuracy(&cm).unwrap(), macro_f1(&cm).unwrap());

    let r: Vec<_> = atlas.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
    let tracts: Vec<usize> = (0..spec.other_class()).collect();
    let report = subject_report(&r, &pred, &r, &atlas.labels, &tracts, &spec.class_names(), 50).unwrap();
    print!("{}", report_csv(&report));

    let bounds = Bounds::of(&atlas.streamlines, 2.0).unwrap();
    let of = |labels: &[usize], class| {
        let t: Vec<_> = atlas.streamlines.iter().zip(labels).filter(|(_, &l)| l == class).map(|(s, _)| s.clone()).collect();
        voxelize(&t, 2.0, &bounds).unwrap()
    };
    println!("wdice of tract 0 against truth: {:.4}", wdice(&of(&pred, 0), &of(&atlas.labels, 0)).unwrap());
}
