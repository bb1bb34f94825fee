//! Trains a small context model on a reduced synthetic atlas and labels a
//! transformed subject.
//!
//! cargo run --release --example train_toy

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tractparc::geometry::{center_to_reference, centroid, resample, TransformRanges};
use tractparc::nn::{predict, train, Brain, Hyperparameters, InferenceConfig, TrainConfig};
use tractparc::synthgen::{generate_atlas, generate_subject, BundlePrototype, SyntheticAtlasSpec};

fn main() {
    let demo = SyntheticAtlasSpec::demo();
    let bundles = demo.bundles[..4].iter().map(|b| BundlePrototype { count: 80, ..b.clone() }).collect();
    let spec = SyntheticAtlasSpec { bundles, ..demo };
    let atlas = generate_atlas(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ranges = TransformRanges::default();

    let resampled = |t: &[tractparc::geometry::Streamline]| t.iter().map(|s| resample(s, 15).unwrap()).collect::<Vec<_>>();
    let reference = centroid(&resampled(&atlas.streamlines)).unwrap();
    let hyper = Hyperparameters {
        k: 10,
        w: 50,
        h: 32,
        backbone: vec![32, 64, 128],
        head: vec![64],
        class_count: spec.class_count(),
        ..Hyperparameters::default()
    };
    let mut brains = Vec::new();
    for i in 0..5 {
        let s = if i == 0 { atlas.clone() } else { generate_subject(&atlas, &ranges, 0.5, 15, &mut rng).unwrap() };
        let centered = center_to_reference(&resampled(&s.streamlines), &reference).unwrap();
        brains.push(Brain::new(i, centered, s.labels, hyper.k, false).unwrap());
    }
    let cfg = TrainConfig { epochs: 6, batch_size: 32, seed: 2, reference_centroid: reference, ..TrainConfig::default() };
    println!("epoch,split,loss,accuracy");
    let (model, _) = train(&brains, &[], hyper, &cfg, |e| println!("{}", e.csv_line())).unwrap();

    let subject = generate_subject(&atlas, &ranges, 0.5, 15, &mut rng).unwrap();
    let mut inf = InferenceConfig::for_model(&model);
    inf.reg_free = true;
    let pred = predict(&model, &resampled(&subject.streamlines), &inf).unwrap();
    let hits = pred.labels.iter().zip(&subject.labels).filter(|(a, b)| a == b).count();
    println!("held-out subject accuracy {:.4}", hits as f64 / subject.labels.len() as f64);
}
