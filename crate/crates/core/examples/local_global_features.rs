//! Builds the local-global input of one streamline and runs it through an
//! untrained model.
//!
//! cargo run --example local_global_features

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tractparc::features::build_input;
use tractparc::geometry::resample;
use tractparc::neighbors::{knn_brute, sample_global, ContextSet};
use tractparc::nn::{softmax, Hyperparameters, Model};
use tractparc::synthgen::{generate_atlas, SyntheticAtlasSpec};

fn main() {
    let spec = SyntheticAtlasSpec::demo();
    let atlas = generate_atlas(&spec).unwrap();
    let t: Vec<_> = atlas.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let q = 0;
    let ctx = ContextSet { local_ids: knn_brute(q, &t, 20), global_ids: sample_global(t.len(), 500, &mut rng) };
    let x = build_input(&t[q], &ctx, &t).unwrap();
    println!("input shape {:?}", x.shape());
    println!("nearest neighbors {:?}", &ctx.local_ids[..5]);
    println!("their labels      {:?}", ctx.local_ids[..5].iter().map(|&j| atlas.labels[j]).collect::<Vec<_>>());

    let hyper = Hyperparameters { class_count: spec.class_count(), ..Hyperparameters::default() };
    let model = Model::new(hyper, &mut rng).unwrap();
    let probs = softmax(&model.forward(&x).unwrap());
    println!("{} parameters; untrained class probabilities:", model.param_count());
    for (c, p) in probs.iter().enumerate() {
        println!("  {:10} {p:.3}", spec.class_names()[&c]);
    }
}
