//! Branch-and-bound over moment relaxations.
//!
//! `cargo run --release --example prove -- 3 2,1,1,1,1 1`
//! (dimension, sizes, relaxation level, optional region cap).

use std::time::Duration;

use musb::bnb::{BnbConfig, BranchAndBound, StderrProgress};
use musb::model::{build_problem, ProblemSpec};

fn main() -> musb::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(2);
    let sizes: Vec<usize> = args
        .get(1)
        .map_or("2,1,1,1", String::as_str)
        .split(',')
        .filter_map(|s| s.parse().ok())
        .collect();
    let level: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let max_regions: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);

    let system = build_problem(&ProblemSpec::new(d, &sizes))?;
    let cfg = BnbConfig { level, max_regions, progress_interval: Some(Duration::from_secs(10)), ..Default::default() };
    let bnb = BranchAndBound::new(&system, cfg)?;
    println!(
        "d={d} sizes={sizes:?} level={level} moments={} matrix={}",
        bnb.relaxation.layout.num_moments(),
        bnb.relaxation.layout.dim()
    );
    let out = bnb.run(&mut StderrProgress)?;
    println!(
        "status={:?} regions={} pruned={:.6} depth={} queue={} solver_iterations={} time={:.1}s",
        out.status, out.regions_processed, out.pruned_fraction, out.max_depth, out.max_queue, out.solver_iterations, out.elapsed_secs
    );
    if let (Some(p), Some(r)) = (&out.point, out.residual) {
        println!("point residual={r:.2e} x={p:.4?}");
    }
    if let Some(c) = &out.cause {
        println!("cause: {c}");
    }
    Ok(())
}
