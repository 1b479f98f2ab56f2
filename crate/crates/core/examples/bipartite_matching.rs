//! Hopcroft-Karp matching of sites to lattice vertices, and the Hall
//! witness reported when no site-perfect matching exists.
//!
//! cargo run --example bipartite_matching

use gp_precision::lattice::LatticeShape;
use gp_precision::matching::{maximum_matching, measure_cloud, perfect_matching, site_adjacency};
use gp_precision::Error;

fn main() -> gp_precision::Result<()> {
    let cloud = measure_cloud(vec![vec![0.12], vec![0.3], vec![0.52], vec![0.81]], 1)?;
    let shape = LatticeShape::new(1, 9)?;
    let adj = site_adjacency(&cloud, shape, cloud.h());
    let matched = maximum_matching(&adj, shape.n_vertices());
    println!("h={:.3} adjacency={adj:?}", cloud.h());
    println!("matching (site -> vertex) = {matched:?}");
    let e = perfect_matching(&cloud, shape, cloud.h())?;
    println!("max displacement={:.4}", e.displacement());

    // Three sites crowded near one coarse vertex cannot all be matched.
    let crowded = measure_cloud(vec![vec![0.48], vec![0.5], vec![0.52]], 1)?;
    match perfect_matching(&crowded, LatticeShape::new(1, 1)?, 0.3) {
        Err(Error::NoMatching { sites, neighbors }) => {
            println!("Hall violation: sites {sites:?} reach only vertices {neighbors:?}")
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
