//! Maximin ordering of a point cloud, its dyadic level partition and the
//! per-level cover property. A dyadic grid is nested and meets the cover
//! radius at every level; a jittered cloud need not at the fine levels.
//!
//! cargo run --example maximin_levels

use gp_precision::hierarchy::{assign_levels, cover_check, maximin_order};
use gp_precision::matching::jittered_grid_cloud;

fn main() -> gp_precision::Result<()> {
    for (label, jitter) in [("dyadic grid", 0.0), ("jittered grid", 0.25)] {
        let cloud = jittered_grid_cloud(2, 15, jitter, 5)?;
        let ordering = maximin_order(&cloud);
        let levels = assign_levels(&ordering);
        println!("{label}: M={} q={} level sizes={:?}", cloud.len(), levels.q(), levels.sizes());
        println!("  first lengthscales: {:.3?}", &ordering.ell[..6]);
        for c in cover_check(&cloud, &ordering, &levels)? {
            println!(
                "  level {}: fill distance of I(k)={:.4} radius={:.4} covered={}",
                c.level,
                c.fill_distance,
                c.bound,
                c.fill_distance <= c.bound * (1.0 + 1e-9)
            );
        }
    }
    Ok(())
}
