//! Draws a few augmentation transforms with the default ranges and shows
//! how far each one moves the demo atlas.
//!
//! cargo run --example sta_augment

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tractparc::geometry::{centroid, mdf, resample, TransformRanges};
use tractparc::synthgen::{generate_atlas, generate_subject, SyntheticAtlasSpec};

fn main() {
    let atlas = generate_atlas(&SyntheticAtlasSpec::demo()).unwrap();
    let base: Vec<_> = atlas.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
    let c0 = centroid(&base).unwrap();
    let ranges = TransformRanges::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let params = ranges.sample_params(&mut ChaCha8Rng::seed_from_u64(3));
    println!("first draw: rotation {:.1?} deg, translation {:.1?} mm, scale {:.3?}", params.rotation_deg, params.translation_mm, params.scale);
    println!("subject,centroid_shift_mm,mean_point_mdf_mm");
    for i in 0..5 {
        let s = generate_subject(&atlas, &ranges, 0.5, 15, &mut rng).unwrap();
        let moved: Vec<_> = s.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
        let c = centroid(&moved).unwrap();
        let shift = ((c[0] - c0[0]).powi(2) + (c[1] - c0[1]).powi(2) + (c[2] - c0[2]).powi(2)).sqrt();
        let mean: f64 = base.iter().zip(&moved).map(|(a, b)| mdf(a, b).unwrap()).sum::<f64>() / base.len() as f64;
        println!("{i},{shift:.2},{mean:.2}");
    }
}
