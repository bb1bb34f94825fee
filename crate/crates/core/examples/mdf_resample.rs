//! Resamples two polylines to 15 points and compares them with MDF, in
//! both point orders.
//!
//! cargo run --example mdf_resample

use tractparc::geometry::{mdf, resample, Streamline};

fn main() {
    let arc = Streamline::new((0..=40).map(|i| {
        let t = i as f64 / 40.0 * std::f64::consts::PI;
        [40.0 * t.cos(), 40.0 * t.sin(), 0.0]
    }).collect()).unwrap();
    let line = Streamline::new(vec![[-40.0, 5.0, 0.0], [0.0, 8.0, 0.0], [40.0, 5.0, 0.0]]).unwrap();

    let a = resample(&arc, 15).unwrap();
    let b = resample(&line, 15).unwrap();
    println!("arc length {:.2} mm -> {} points", arc.arc_length(), a.m());
    for p in a.points().iter().step_by(7) {
        println!("  [{:7.2}, {:7.2}, {:7.2}]", p[0], p[1], p[2]);
    }
    println!("mdf(arc, line)          = {:.3} mm", mdf(&a, &b).unwrap());
    println!("mdf(arc, reversed line) = {:.3} mm", mdf(&a, &b.reversed()).unwrap());
    println!("mdf(arc, itself)        = {:.3} mm", mdf(&a, &a).unwrap());
}
