//! Variable and equation counts for size profiles, with and without the
//! reductions.

use musb::model::{build_problem, count_profile, unreduced_count, ProblemSpec};

fn main() -> musb::Result<()> {
    println!("unreduced variables, n bases x d");
    for n in 2..=4 {
        let row: Vec<String> = (2..=6).map(|d| unreduced_count(d, n).map(|c| format!("{c:>5}"))).collect::<Result<_, _>>()?;
        println!("  n={n} {}", row.join(""));
    }
    println!("reduced profiles");
    for (d, sizes) in [(3, vec![2, 1, 1, 1, 1]), (6, vec![3, 3, 3, 3]), (6, vec![6, 6, 6]), (6, vec![6, 3, 3, 3])] {
        let spec = ProblemSpec::new(d, &sizes);
        let c = count_profile(&spec)?;
        let built = build_problem(&spec)?;
        println!(
            "  d={d} {:<12} vars={:<4} eqns={:<4} inequalities={} (built: {} polynomials)",
            spec.profile_label(),
            c.variables,
            c.reported_equalities,
            c.inequalities,
            built.equalities.len()
        );
    }
    Ok(())
}
