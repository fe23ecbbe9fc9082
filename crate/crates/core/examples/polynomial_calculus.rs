//! Sparse polynomial arithmetic: products, derivatives, the integration lift
//! and the text form.

use musb::poly::{CompiledPolynomial, Polynomial};

fn main() -> musb::Result<()> {
    let (x0, x1) = (Polynomial::var(0), Polynomial::var(1));
    // h = x0² + x1² − 1/2, a circle constraint
    let h = x0.square().add_scaled(&x1.square(), 1.0).add_scaled(&Polynomial::constant(0.5), -1.0);
    let f = h.square();
    println!("h = {h}");
    println!("f = h² = {f}");
    println!("∂f/∂x0 = {}", f.differentiate(0));

    let lifted = f.integrate(2);
    println!("∫ f dx2 = {lifted}");
    assert_eq!(lifted.differentiate(2), f);

    let point = [0.5, 0.5, 0.1];
    let compiled = CompiledPolynomial::new(&f);
    println!("f{point:?} = {} (compiled {})", f.evaluate(&point)?, compiled.evaluate(&point));

    let text = f.to_text();
    println!("text form:\n{text}");
    assert_eq!(Polynomial::from_text(&text)?, f);
    Ok(())
}
