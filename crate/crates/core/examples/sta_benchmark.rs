//! Trains a context model with transform augmentation and a single-streamline
//! model without it on the synthetic demo atlas, then scores both on
//! transformed and untransformed held-out subjects.
//!
//! cargo run --release --example sta_benchmark

use std::time::Instant;

use tractparc::benchmark::{run, BenchmarkConfig};

fn main() {
    let start = Instant::now();
    let r = run(&BenchmarkConfig::default(), |line| eprintln!("{line}")).expect("benchmark failed");
    println!("model,test,accuracy");
    println!("context+sta,transformed,{:.4}", r.context_transformed);
    println!("context+sta,untransformed,{:.4}", r.context_untransformed);
    println!("single,transformed,{:.4}", r.baseline_transformed);
    println!("single,untransformed,{:.4}", r.baseline_untransformed);
    eprintln!("gap {:.2} points, drop {:.2} points, {:.0} s", 100.0 * r.gap(), 100.0 * r.context_drop(), start.elapsed().as_secs_f64());
}
