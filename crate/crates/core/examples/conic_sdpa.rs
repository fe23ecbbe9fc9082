//! A small semidefinite program solved directly, then written to and read
//! back from SDPA sparse format.

use musb::conic::{min_eigen_shift_program, parse_sdpa, sdpa_string, solve, SolveOptions};
use musb::linalg::{sym_eig, DenseMatrix};

fn main() -> musb::Result<()> {
    // min λ  s.t.  A + λI ⪰ 0, λ ≥ −10: the answer is −λ_min(A)
    let a = DenseMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 0.5, 0.3], vec![0.0, 0.3, -1.0]])?;
    let program = min_eigen_shift_program(&a, -10.0);
    let result = solve(&program, &SolveOptions::default(), None)?;
    println!(
        "{:?}: λ = {:.9} (expected {:.9}), {} iterations, residuals {:.1e}/{:.1e}",
        result.status,
        result.objective,
        -sym_eig(&a)?.eigenvalues[0],
        result.iterations,
        result.primal_residual,
        result.dual_residual
    );

    let text = sdpa_string(&program)?;
    println!("SDPA form:\n{text}");
    let back = parse_sdpa(&text)?;
    println!("round trip identical: {}", back == program);
    Ok(())
}
