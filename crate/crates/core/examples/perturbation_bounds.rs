//! Measured inverse, Cholesky and square-root perturbations against their
//! bounds on random SPD matrices.
//!
//! cargo run --example perturbation_bounds

use gp_precision::verify::perturbation_corpus;

fn main() -> gp_precision::Result<()> {
    let cases = perturbation_corpus(1, 10, 20)?;
    println!("kappa*eps  inverse (bound)      cholesky (bound)     sqrt (bound)");
    for c in cases {
        println!(
            "{:.3}      {:.2e} ({:.2e})  {:.2e} ({:.2e})  {:.2e} ({:.2e})",
            c.kappa_eps, c.inverse_error, c.inverse_bound, c.cholesky_error, c.cholesky_bound, c.sqrt_error, c.sqrt_bound
        );
    }
    Ok(())
}
