//! Each row of the inverse sample covariance equals the least-squares
//! regression of one coordinate on the others, rescaled.
//!
//! cargo run --example ols_rows

use gp_precision::estimator::ols_plugin_row;
use gp_precision::linalg::{sample_covariance, spd_inverse, DenseSymMatrix};
use gp_precision::truth::sample_gaussian;

fn main() -> gp_precision::Result<()> {
    let sigma = DenseSymMatrix::from_upper_fn(5, |i, j| 0.6f64.powi((j - i) as i32))?;
    let z = sample_gaussian(&sigma, 50, 3)?;
    let inv = spd_inverse(&sample_covariance(&z)?)?;
    for i in 0..5 {
        let row = ols_plugin_row(&z, i)?;
        let exact = inv.as_matrix().row(i).transpose();
        println!("row {i}: max |difference| = {:.2e}", (row - exact).abs().max());
    }
    Ok(())
}
