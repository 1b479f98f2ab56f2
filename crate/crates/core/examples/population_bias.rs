//! Local block estimates from the exact covariance: the remaining error is
//! pure truncation bias and shrinks exponentially with the block width.
//!
//! cargo run --example population_bias

use gp_precision::estimator::{assembly_check, compute_locals, max_local_error, CovarianceSource};
use gp_precision::lattice::{BlockScheme, LatticeShape};
use gp_precision::linalg::spectral_norm;
use gp_precision::truth::{build_green_restriction, Geometry};
use gp_precision::matching::lattice_cloud;

fn main() -> gp_precision::Result<()> {
    // A dense precision (Green restriction) so the bias is visible.
    let p = 30;
    let shape = LatticeShape::new(1, p)?;
    let truth = build_green_restriction(4 * (p + 1) - 1, 1, 2, &lattice_cloud(shape))?;
    assert!(matches!(truth.geometry, Geometry::Sites(_)));
    let norm = spectral_norm(&truth.omega)?;
    println!("p={p} kappa={:.3e}", truth.kappa);
    for b in 1..=6 {
        let scheme = BlockScheme::new(shape, b)?;
        let locals = compute_locals(CovarianceSource::Population(&truth.sigma), &scheme)?;
        let local = max_local_error(&locals, &scheme, &truth.omega) / norm;
        let check = assembly_check(&locals, &scheme, &truth.omega)?;
        println!(
            "b={b} max local error={local:.3e} assembled error={:.3e} bound={:.3e} holds={}",
            check.assembled_error / norm,
            check.bound / norm,
            check.holds()
        );
    }
    Ok(())
}
