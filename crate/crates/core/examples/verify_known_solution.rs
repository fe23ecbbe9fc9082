//! The three mutually unbiased bases of a qubit, mapped to reduced
//! coordinates and checked against the polynomial system.

use musb::model::{qubit_mub_triple, reconstruct_vectors, reconstruction_error, verify_candidate};

fn main() -> musb::Result<()> {
    let (system, x) = qubit_mub_triple();
    println!("{} variables, {} equalities", system.num_vars(), system.equalities.len());
    println!("assignment {x:.6?}");
    let c = verify_candidate(&system, &x)?;
    println!("max residual {:.2e}, combined {:.2e}", c.max_residual, c.combined);
    println!("reconstruction error {:.2e}", reconstruction_error(&system, &x)?);
    for (s, set) in reconstruct_vectors(&system, &x)?.iter().enumerate() {
        for v in set {
            let entries: Vec<String> = v.iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).collect();
            println!("  set {s}: ({})", entries.join(", "));
        }
    }
    Ok(())
}
