//! Multiscale block-Cholesky factor: exact factor, its reconstruction, and
//! estimates of both factor variants from samples.
//!
//! cargo run --example block_cholesky

use gp_precision::estimator::CovarianceSource;
use gp_precision::experiment::relative_spectral_error;
use gp_precision::factor::{estimate_scales, exact_block_factor, exact_block_factor_star, nested_grid_truth, CholeskyConfig, FactorKind};
use gp_precision::linalg::condition_number;
use gp_precision::truth::sample;

fn main() -> gp_precision::Result<()> {
    let ht = nested_grid_truth(4, 2)?;
    println!("nested grid: level sizes {:?}", ht.levels.sizes());
    let u = exact_block_factor(&ht.truth.omega, &ht.levels, 1)?;
    let u_star = exact_block_factor_star(&ht.truth.omega, &ht.levels, 1)?;
    println!(
        "reconstruction error: U {:.2e}, U* {:.2e}",
        relative_spectral_error(u.reconstruct().as_matrix(), ht.truth.omega.as_matrix()),
        relative_spectral_error(u_star.reconstruct().as_matrix(), ht.truth.omega.as_matrix())
    );

    for n in [2000, 8000, 32000] {
        let z = sample(&ht.truth, n, 1)?;
        let est = estimate_scales(CovarianceSource::Samples(&z), &ht.cloud, &ht.levels, &CholeskyConfig::default())?;
        let kappas: Vec<String> = est
            .scales
            .scales
            .iter()
            .map(|s| format!("{:.2}", condition_number(&s.b).unwrap_or(f64::NAN)))
            .collect();
        println!(
            "N={n:>5} U error={:.4} U* error={:.4} estimated kappa(B_k)=[{}]",
            relative_spectral_error(&est.factor(&ht.levels, 1, FactorKind::Cholesky)?.to_dense_upper(), &u.to_dense_upper()),
            relative_spectral_error(&est.factor(&ht.levels, 1, FactorKind::SquareRoot)?.to_dense_upper(), &u_star.to_dense_upper()),
            kappas.join(", ")
        );
    }
    Ok(())
}
