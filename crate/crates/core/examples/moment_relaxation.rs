//! Moment relaxation of one region: sizes, the conic program, and the
//! value of `λ` at the root.
//!
//! `cargo run --release --example moment_relaxation -- 2 2,1,1,1 1`

use musb::conic::{solve, SolveOptions};
use musb::model::{build_problem, initial_region, ProblemSpec};
use musb::relaxation::{extract, moments_from_solution, Relaxation, RelaxationOptions};

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

    let system = build_problem(&ProblemSpec::new(d, &sizes))?;
    let relaxation = Relaxation::new(&system, level, RelaxationOptions::default())?;
    let root = initial_region(&system);
    let problem = relaxation.assemble(&root)?;
    let program = problem.to_conic();
    println!(
        "level {level}: {} moments, matrix {}x{}, {} equality rows, {} inequality rows",
        relaxation.layout.num_moments(),
        problem.dim(),
        problem.dim(),
        relaxation.num_equality_rows(),
        problem.inequalities.len()
    );
    println!("conic program: n={} m={} nnz={} hash={}", program.n, program.m(), program.a.nnz(), &program.hash()[..16]);

    let result = solve(&program, &SolveOptions::default(), None)?;
    let y = moments_from_solution(&result.x);
    let ex = extract(&y, &relaxation.layout);
    println!(
        "{:?} after {} iterations: λ = {:.3e}, exact value at the iterate {:.3e}",
        result.status,
        result.iterations,
        result.objective,
        problem.min_lambda(&y)?
    );
    println!("largest monomial error {:.3e} at x{}", ex.max_error, ex.argmax);
    Ok(())
}
