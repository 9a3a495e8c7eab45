//! Finite-difference gradient checks for every layer and the full stack.
//!
//!     cargo run --release --example gradcheck_layers -- [seeds]

use disentangle::gradcheck::{fd_check, FdOptions};
use disentangle::layercheck::check_layers;
use disentangle::param::ParamSet;
use disentangle::tensor::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;

    // The harness on its own: d(x²)/dx at 3.
    let mut ps = ParamSet::new();
    let x = ps.add("x", Tensor::scalar(3.0));
    let report = fd_check(&mut ps, 1e-4, |g, p| {
        let v = g.param(p, x);
        let sq = g.mul(v, v)?;
        g.sum(sq)
    })?;
    let e = report.worst().unwrap();
    println!("x^2 at 3: analytic {} numeric {:.9}", e.analytic, e.numeric);

    let mut worst = 0.0f64;
    for seed in 0..seeds {
        for check in check_layers(seed, FdOptions::default())? {
            worst = worst.max(check.report.max_rel_error());
            println!(
                "seed {seed} {:<10} {:>5} coords  max rel err {:.2e}",
                check.layer,
                check.report.entries.len(),
                check.report.max_rel_error()
            );
        }
    }
    println!("worst over all layers and seeds: {worst:.2e} (tolerance 1e-3)");
    Ok(())
}
