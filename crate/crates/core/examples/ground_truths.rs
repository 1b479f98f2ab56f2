//! The three ground-truth models: conditioning, spectrum and screening decay.
//!
//! cargo run --example ground_truths

use gp_precision::lattice::LatticeShape;
use gp_precision::matching::{jittered_grid_cloud, lattice_cloud};
use gp_precision::truth::{
    build_green_restriction, build_lattice_precision, matern_covariance, screening_profile, spectrum_summary, MaternNu,
};

fn main() -> gp_precision::Result<()> {
    let p = 32;
    let truths = [
        build_lattice_precision(p, 1, 2)?,
        build_green_restriction(4 * (p + 1) - 1, 1, 2, &lattice_cloud(LatticeShape::new(1, p)?))?,
        matern_covariance(&jittered_grid_cloud(1, p, 0.2, 1)?, MaternNu::FiveHalves, 0.15, 1.0)?,
    ];
    for t in &truths {
        let spec = spectrum_summary(&t.omega);
        let prof = screening_profile(&t.omega, &t.geometry);
        let fit = prof
            .fit
            .map(|f| format!("slope={:.3} R2={:.4}", f.slope, f.r_squared))
            .unwrap_or_else(|| "exactly sparse".into());
        println!(
            "{:<16} dim={} kappa={:.3e} lambda=[{:.3e}, {:.3e}] screening {fit}",
            t.model_tag.as_str(),
            t.dim(),
            t.kappa,
            spec.lambda_min,
            spec.lambda_max
        );
    }
    Ok(())
}
