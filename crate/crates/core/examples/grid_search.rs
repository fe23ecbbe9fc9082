//! Exhaustive grid over the variable box, as an independent check on
//! small infeasibility proofs.
//!
//! `cargo run --release --example grid_search -- 2 2,1,1,1 21`

use std::time::Instant;

use musb::model::{build_problem, ProblemSpec};
use musb::poly::CompiledPolynomial;
use musb::search::build_objective;

/// Smallest `Σ h²` over `points` evenly spaced values per axis, endpoints
/// included, with the point where it occurs.
pub fn grid_minimum(spec: &ProblemSpec, points: usize) -> musb::Result<(f64, Vec<f64>)> {
    let system = build_problem(spec)?;
    let f = CompiledPolynomial::new(&build_objective(&system));
    let axes: Vec<Vec<f64>> = system
        .registry
        .bounds()
        .into_iter()
        .map(|(l, u)| (0..points).map(|k| l + (u - l) * k as f64 / (points - 1) as f64).collect())
        .collect();
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = (f64::INFINITY, x.clone());
    loop {
        let v = f.evaluate(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < points {
                x[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = axes[k][0];
            k += 1;
        }
    }
}

fn main() -> musb::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(2);
    let sizes: Vec<usize> = args
        .get(1)
        .map_or("2,1,1,1", String::as_str)
        .split(',')
        .filter_map(|s| s.parse().ok())
        .collect();
    let points: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(21);
    let t = Instant::now();
    let (min, at) = grid_minimum(&ProblemSpec::new(d, &sizes), points)?;
    println!("d={d} sizes={sizes:?} points/axis={points} min combined={min:.6e} at {at:.4?} ({:.1?})", t.elapsed());
    Ok(())
}
