//! LU solves, symmetric eigendecompositions and the PSD projection.

use musb::linalg::{lu_solve, psd_project, sym_eig, sym_eig_tridiagonal, DenseMatrix};

fn main() -> musb::Result<()> {
    let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 2.0], vec![1.0, -3.0, 0.5], vec![2.0, 0.5, 3.0]])?;
    let b = [1.0, 2.0, 3.0];
    let x = lu_solve(&a, &b, 0.0)?;
    let ax = a.matvec(&x)?;
    println!("x = {x:.6?}, A x = {ax:.6?}");

    let jacobi = sym_eig(&a)?;
    let ql = sym_eig_tridiagonal(&a)?;
    println!("eigenvalues (Jacobi) {:.6?}", jacobi.eigenvalues);
    println!("eigenvalues (QL)     {:.6?}", ql.eigenvalues);
    println!("reconstruction error {:.2e}", jacobi.reconstruct().sub(&a).max_abs());

    let p = psd_project(&a)?;
    println!("projection eigenvalues {:.6?}", sym_eig(&p)?.eigenvalues);
    println!("idempotence error {:.2e}", psd_project(&p)?.sub(&p).max_abs());
    Ok(())
}
