//! Prints the demo atlas spec, then generates it and summarizes each class.
//!
//! cargo run --example synthetic_atlas

use tractparc::geometry::{mdf, resample};
use tractparc::synthgen::{generate_atlas, SyntheticAtlasSpec};

fn main() {
    let spec = SyntheticAtlasSpec::demo();
    print!("{}", spec.to_text());
    let atlas = generate_atlas(&spec).unwrap();
    let r: Vec<_> = atlas.streamlines.iter().map(|s| resample(s, 15).unwrap()).collect();
    println!("\nclass,name,count,mean_length_mm,spread_mm");
    for (c, name) in &atlas.class_names {
        let idx: Vec<usize> = (0..r.len()).filter(|&i| atlas.labels[i] == *c).collect();
        let len = idx.iter().map(|&i| atlas.streamlines[i].arc_length()).sum::<f64>() / idx.len() as f64;
        // mean MDF to the first member of the class
        let spread = idx.iter().map(|&i| mdf(&r[idx[0]], &r[i]).unwrap()).sum::<f64>() / idx.len() as f64;
        println!("{c},{name},{},{len:.1},{spread:.2}", idx.len());
    }
}
