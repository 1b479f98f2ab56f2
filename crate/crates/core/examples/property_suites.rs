//! Run every verification suite and print its statistics.
//!
//! cargo run --example property_suites

use gp_precision::verify::{run_suite, Suite, VerifyOptions};

fn main() -> gp_precision::Result<()> {
    for suite in Suite::ALL {
        println!("{}", run_suite(suite, &VerifyOptions::default())?);
    }
    Ok(())
}
