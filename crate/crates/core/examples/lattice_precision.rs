//! Estimate a lattice precision matrix from samples and compare with the truth.
//!
//! cargo run --example lattice_precision

use gp_precision::estimator::{estimate_precision, EstimatorConfig};
use gp_precision::experiment::relative_spectral_error;
use gp_precision::lattice::LatticeShape;
use gp_precision::truth::{build_lattice_precision, sample};

fn main() -> gp_precision::Result<()> {
    let (p, d, s) = (40, 1, 1);
    let truth = build_lattice_precision(p, d, s)?;
    let shape = LatticeShape::new(d, p)?;
    println!("p={p} d={d} s={s} kappa={:.1}", truth.kappa);

    for n in [250, 1000, 4000] {
        let z = sample(&truth, n, 7)?;
        for (label, config) in [
            ("block-size rule", EstimatorConfig::default()),
            ("b=1", EstimatorConfig::with_block_size(1)),
        ] {
            let est = estimate_precision(&z, shape, &config)?;
            let err = relative_spectral_error(est.matrix.as_matrix(), truth.omega.as_matrix());
            println!(
                "N={n:>5} {label:<16} b={:<3} path={:<22} rel error={err:.4}",
                est.scheme.b(),
                est.path.as_str()
            );
        }
    }
    Ok(())
}
