//! Newton search on a size profile.
//!
//! `cargo run --release --example stationary_search -- 3 3,3,3,3 100000 3`
//! (dimension, sizes, iteration limit, number of seeds).

use std::time::Instant;

use musb::model::{build_problem, reconstruction_error, ProblemSpec};
use musb::search::{run, SearchConfig};

fn main() -> musb::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(Ok(2), |s| s.parse()).unwrap_or(2);
    let sizes: Vec<usize> = args
        .get(1)
        .map_or("2,2,2", String::as_str)
        .split(',')
        .filter_map(|s| s.parse().ok())
        .collect();
    let max_iters = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let system = build_problem(&ProblemSpec::new(d, &sizes))?;
    println!("d={d} sizes={sizes:?} vars={} equalities={}", system.num_vars(), system.equalities.len());
    for seed in 0..seeds {
        let t = Instant::now();
        let out = run(&system, &SearchConfig { max_iters, seed, ..Default::default() })?;
        let recon = reconstruction_error(&system, &out.point)?;
        println!(
            "seed={seed} status={:?} iterations={} combined={:.3e} max_residual={:.3e} reconstruction={:.1e} time={:.2?}",
            out.status, out.iterations, out.combined_value, out.max_equation_residual, recon, t.elapsed()
        );
    }
    Ok(())
}
