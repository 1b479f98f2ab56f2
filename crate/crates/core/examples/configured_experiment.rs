//! A configured scaling study run in-process, printing the CSV it emits.
//!
//! cargo run --example configured_experiment

use gp_precision::experiment::{cmd_scaling_study, parse_pairs, ExperimentConfig};

fn main() -> gp_precision::Result<()> {
    let file = "model=laplacian\np=20,40\nn=500,2000\nseeds=1,2,3\nb=1\n";
    let config = ExperimentConfig::load(None, &parse_pairs(file)?)?;
    let out = cmd_scaling_study(&config)?;
    print!("{}", out.text);
    Ok(())
}
