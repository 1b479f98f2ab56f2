//! Precision estimation at scattered sites through a matched lattice.
//!
//! cargo run --example scattered_sites

use gp_precision::estimator::EstimatorConfig;
use gp_precision::experiment::relative_spectral_error;
use gp_precision::matching::{embed_and_estimate, jittered_grid_cloud, EmbedOptions};
use gp_precision::truth::{matern_covariance, sample, MaternNu};

fn main() -> gp_precision::Result<()> {
    let cloud = jittered_grid_cloud(2, 6, 0.3, 11)?;
    println!(
        "M={} fill distance h={:.4} homogeneity delta={:.3}",
        cloud.len(),
        cloud.h(),
        cloud.delta()
    );
    let truth = matern_covariance(&cloud, MaternNu::ThreeHalves, 0.2, 1.0)?;
    for n in [500, 2000, 8000] {
        let z = sample(&truth, n, 3)?;
        let est = embed_and_estimate(&z, &cloud, &EstimatorConfig::default(), &EmbedOptions::default(), 3)?;
        println!(
            "N={n:>5} lattice p={} c1={} max displacement={:.4} b={} path={} rel error={:.4}",
            est.embedding.shape().p(),
            est.c1,
            est.embedding.displacement(),
            est.b,
            est.path.as_str(),
            relative_spectral_error(est.matrix.as_matrix(), truth.omega.as_matrix())
        );
    }
    Ok(())
}
