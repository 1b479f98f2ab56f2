//! Scattered sites: fill distance and homogeneity, the target lattice, the
//! site-to-lattice matching and the padded estimator built on top of it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{estimate_precision, EstimatePath, EstimatorConfig};
use crate::lattice::LatticeShape;
use crate::linalg::{DenseSymMatrix, SampleMatrix};

/// Largest lattice (in vertices) that [`build_target_lattice`] will produce
/// unless told otherwise.
pub const DEFAULT_LATTICE_CAP: usize = 4096;

/// High bit marking the generator streams used for padding noise.
const PADDING_STREAM: u64 = 1 << 63;

/// Observation sites in the open unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteCloud {
    d: usize,
    sites: Vec<Vec<f64>>,
    h: f64,
    delta: f64,
    min_separation: f64,
    min_boundary: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from `x` to the boundary of `[0,1]^d`.
pub fn boundary_distance(x: &[f64]) -> f64 {
    x.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min)
}

/// Measures fill distance `h` and homogeneity `δ` of a point set.
///
/// `h` is the largest distance from a point of the evaluation grid
/// `{0, 1/n, …, 1}^d`, `n = ⌈(64M)^{1/d}⌉`, to its nearest site.
/// `δ = min(min_{i≠j} ‖x_i − x_j‖, min_i dist(x_i, ∂D)) / h`, capped at 1.
pub fn measure_cloud(sites: Vec<Vec<f64>>, d: usize) -> Result<SiteCloud> {
    if !(1..=3).contains(&d) {
        return Err(Error::invalid(format!("dimension d={d} must be 1, 2 or 3")));
    }
    if sites.is_empty() {
        return Err(Error::invalid("site cloud is empty"));
    }
    for (i, x) in sites.iter().enumerate() {
        if x.len() != d {
            return Err(Error::invalid(format!("site {i} has {} coordinates, expected {d}", x.len())));
        }
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::invalid(format!("site {i} = {x:?} is not inside (0,1)^{d}")));
        }
    }
    let min_separation = min_pairwise_distance(&sites, d);
    if !(min_separation > 0.0) {
        return Err(Error::invalid("duplicate sites"));
    }
    let min_boundary = sites
        .iter()
        .map(|x| boundary_distance(x))
        .fold(f64::INFINITY, f64::min);
    let h = fill_distance(&sites, d);
    let delta = (min_separation.min(min_boundary) / h).min(1.0);
    Ok(SiteCloud {
        d,
        sites,
        h,
        delta,
        min_separation,
        min_boundary,
    })
}

fn min_pairwise_distance(sites: &[Vec<f64>], d: usize) -> f64 {
    if sites.len() < 2 {
        return f64::INFINITY;
    }
    if d == 1 {
        let mut xs: Vec<f64> = sites.iter().map(|x| x[0]).collect();
        xs.sort_by(f64::total_cmp);
        return xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    }
    (0..sites.len())
        .into_par_iter()
        .map(|i| {
            sites[i + 1..]
                .iter()
                .map(|y| dist(&sites[i], y))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn fill_distance(sites: &[Vec<f64>], d: usize) -> f64 {
    let m = sites.len();
    let n = ((64 * m) as f64).powf(1.0 / d as f64).ceil() as usize;
    let n = n.max(1);
    if d == 1 {
        let mut xs: Vec<f64> = sites.iter().map(|x| x[0]).collect();
        xs.sort_by(f64::total_cmp);
        return (0..=n)
            .map(|i| {
                let g = i as f64 / n as f64;
                let k = xs.partition_point(|&x| x < g);
                let mut best = f64::INFINITY;
                if k < xs.len() {
                    best = best.min(xs[k] - g);
                }
                if k > 0 {
                    best = best.min(g - xs[k - 1]);
                }
                best
            })
            .fold(0.0, f64::max);
    }
    let total = (n + 1).pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut g = vec![0.0; d];
            for axis in (0..d).rev() {
                g[axis] = (rest % (n + 1)) as f64 / n as f64;
                rest /= n + 1;
            }
            sites.iter().map(|x| dist(x, &g)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

impl SiteCloud {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.sites[i]
    }

    /// Fill distance.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Homogeneity ratio in `(0, 1]`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn min_boundary_distance(&self) -> f64 {
        self.min_boundary
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.sites[i], &self.sites[j])
    }

    /// Sites `indices`, in that order, as a new cloud.
    pub fn subset(&self, indices: &[usize]) -> Result<SiteCloud> {
        measure_cloud(indices.iter().map(|&i| self.sites[i].clone()).collect(), self.d)
    }
}

/// The vertices of `[p]^d` viewed as sites `(c+1)/(p+1)`.
pub fn lattice_cloud(shape: LatticeShape) -> SiteCloud {
    let sites = (0..shape.n_vertices()).map(|v| shape.position(v)).collect();
    measure_cloud(sites, shape.d()).expect("lattice points are distinct interior points")
}

/// Perturbed regular grid: `side^d` sites at `(k + 1/2 + u)/side` with `u`
/// uniform in `[-jitter, jitter]` per axis. `jitter < 1/2` keeps the sites
/// distinct and interior.
pub fn jittered_grid_cloud(d: usize, side: usize, jitter: f64, seed: u64) -> Result<SiteCloud> {
    if side == 0 || !(0.0..0.5).contains(&jitter) {
        return Err(Error::invalid("jittered grid needs side >= 1 and 0 <= jitter < 1/2"));
    }
    let shape = LatticeShape::new(d, side)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = (0..shape.n_vertices())
        .map(|v| {
            shape
                .coords(v)
                .iter()
                .map(|&c| {
                    let u = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
                    (c as f64 + 0.5 + u) / side as f64
                })
                .collect()
        })
        .collect();
    measure_cloud(sites, d)
}

/// `p = ⌈1/(c₁ h)⌉`, so that the lattice spacing `1/(p+1)` is below `h`.
pub fn build_target_lattice(cloud: &SiteCloud, c1: f64, cap: usize) -> Result<LatticeShape> {
    if !(c1 > 0.0 && c1 <= 1.0) {
        return Err(Error::invalid(format!("c1={c1} must lie in (0, 1]")));
    }
    let raw = (1.0 / (c1 * cloud.h())).ceil();
    if !raw.is_finite() {
        return Err(Error::invalid("fill distance too small"));
    }
    let p = raw as usize;
    let requested = p
        .checked_pow(cloud.d() as u32)
        .ok_or(Error::CapacityExceeded {
            requested: usize::MAX,
            cap,
        })?;
    if requested > cap {
        return Err(Error::CapacityExceeded { requested, cap });
    }
    LatticeShape::new(cloud.d(), p)
}

/// An injective assignment of sites to lattice vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEmbedding {
    shape: LatticeShape,
    vertex_of_site: Vec<usize>,
    displacement: f64,
}

impl LatticeEmbedding {
    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    /// `π⁻¹`: lattice vertex assigned to each site.
    pub fn vertex_of_site(&self) -> &[usize] {
        &self.vertex_of_site
    }

    /// Matched vertices `A`, ascending.
    pub fn matched_vertices(&self) -> Vec<usize> {
        let mut a = self.vertex_of_site.clone();
        a.sort_unstable();
        a
    }

    /// `π`: site matched to `vertex`, if any.
    pub fn site_of_vertex(&self, vertex: usize) -> Option<usize> {
        self.vertex_of_site.iter().position(|&v| v == vertex)
    }

    /// `max_i ‖x_i − y_{π⁻¹(i)}‖`.
    pub fn displacement(&self) -> f64 {
        self.displacement
    }
}

/// Lattice vertices within `radius` of each site, ascending.
pub fn site_adjacency(cloud: &SiteCloud, shape: LatticeShape, radius: f64) -> Vec<Vec<usize>> {
    let p = shape.p();
    let spacing = 1.0 / (p + 1) as f64;
    cloud
        .sites()
        .iter()
        .map(|x| {
            // Coordinate window per axis, then the exact Euclidean test.
            let ranges: Vec<(usize, usize)> = x
                .iter()
                .map(|&v| {
                    let lo = ((v - radius) / spacing - 1.0).floor().max(0.0) as usize;
                    let hi = (((v + radius) / spacing - 1.0).ceil().max(0.0) as usize).min(p - 1);
                    (lo, hi)
                })
                .collect();
            let mut out = Vec::new();
            let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            if ranges.iter().any(|r| r.0 > r.1) {
                return out;
            }
            'outer: loop {
                let y: Vec<f64> = cur.iter().map(|&c| (c + 1) as f64 * spacing).collect();
                if dist(x, &y) <= radius {
                    out.push(shape.flat(&cur));
                }
                for axis in (0..cur.len()).rev() {
                    cur[axis] += 1;
                    if cur[axis] <= ranges[axis].1 {
                        continue 'outer;
                    }
                    cur[axis] = ranges[axis].0;
                }
                break;
            }
            out.sort_unstable();
            out
        })
        .collect()
}

const UNMATCHED: usize = usize::MAX;

/// Hopcroft–Karp maximum matching. `adj[i]` lists the right vertices of
/// left vertex `i`; returns the partner of every left vertex.
pub fn maximum_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut left_to = vec![UNMATCHED; n_left];
    let mut right_to = vec![UNMATCHED; n_right];
    let mut layer = vec![0usize; n_left];
    let inf = usize::MAX;

    loop {
        // BFS layering from free left vertices.
        let mut queue = std::collections::VecDeque::new();
        for i in 0..n_left {
            if left_to[i] == UNMATCHED {
                layer[i] = 0;
                queue.push_back(i);
            } else {
                layer[i] = inf;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &r in &adj[i] {
                let j = right_to[r];
                if j == UNMATCHED {
                    found = true;
                } else if layer[j] == inf {
                    layer[j] = layer[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n_left];
        let mut augmented = false;
        for i in 0..n_left {
            if left_to[i] == UNMATCHED
                && augment(i, adj, &mut left_to, &mut right_to, &mut layer, &mut next)
            {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }
    left_to
        .into_iter()
        .map(|r| (r != UNMATCHED).then_some(r))
        .collect()
}

/// Iterative layered DFS for one augmenting path from `root`.
fn augment(
    root: usize,
    adj: &[Vec<usize>],
    left_to: &mut [usize],
    right_to: &mut [usize],
    layer: &mut [usize],
    next: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&i) = stack.last() {
        if next[i] < adj[i].len() {
            let r = adj[i][next[i]];
            next[i] += 1;
            let j = right_to[r];
            if j == UNMATCHED {
                via.push(r);
                // Flip the path.
                for (k, &li) in stack.iter().enumerate() {
                    let rr = via[k];
                    left_to[li] = rr;
                    right_to[rr] = li;
                }
                return true;
            }
            if layer[j] == layer[i] + 1 {
                via.push(r);
                stack.push(j);
            }
        } else {
            layer[i] = usize::MAX;
            stack.pop();
            via.pop();
        }
    }
    false
}

/// Matches every site to a distinct lattice vertex within `radius`.
///
/// On failure the error carries a Hall violator: the sites reachable by
/// alternating paths from an unmatched site, and their (strictly smaller)
/// lattice neighborhood.
pub fn perfect_matching(cloud: &SiteCloud, shape: LatticeShape, radius: f64) -> Result<LatticeEmbedding> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!("radius {radius} must be non-negative")));
    }
    if cloud.d() != shape.d() {
        return Err(Error::invalid("cloud and lattice dimensions differ"));
    }
    let adj = site_adjacency(cloud, shape, radius);
    let n_right = shape.n_vertices();
    let matched = maximum_matching(&adj, n_right);
    if matched.iter().all(Option::is_some) {
        let vertex_of_site: Vec<usize> = matched.into_iter().map(|r| r.expect("matched")).collect();
        let displacement = vertex_of_site
            .iter()
            .enumerate()
            .map(|(i, &v)| dist(cloud.site(i), &shape.position(v)))
            .fold(0.0, f64::max);
        return Ok(LatticeEmbedding {
            shape,
            vertex_of_site,
            displacement,
        });
    }
    let mut right_to = vec![UNMATCHED; n_right];
    for (i, r) in matched.iter().enumerate() {
        if let Some(r) = r {
            right_to[*r] = i;
        }
    }
    let mut seen_left = vec![false; adj.len()];
    let mut seen_right = vec![false; n_right];
    let mut queue: std::collections::VecDeque<usize> = (0..adj.len()).filter(|&i| matched[i].is_none()).collect();
    for &i in &queue {
        seen_left[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for &r in &adj[i] {
            if !seen_right[r] {
                seen_right[r] = true;
                let j = right_to[r];
                if j != UNMATCHED && !seen_left[j] {
                    seen_left[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Err(Error::NoMatching {
        sites: (0..adj.len()).filter(|&i| seen_left[i]).collect(),
        neighbors: (0..n_right).filter(|&r| seen_right[r]).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedOptions {
    /// Lattice resolution constant: `p = ⌈1/(c₁ h)⌉`.
    pub c1: f64,
    /// How many times `c1` is halved after a failed matching.
    pub max_retries: usize,
    pub lattice_cap: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            c1: 0.5,
            max_retries: 3,
            lattice_cap: DEFAULT_LATTICE_CAP,
        }
    }
}

/// Finds a lattice and matching, halving `c1` after each failure.
pub fn embed_cloud(cloud: &SiteCloud, options: &EmbedOptions) -> Result<(LatticeEmbedding, f64)> {
    let mut c1 = options.c1;
    let mut attempt = 0;
    loop {
        let shape = build_target_lattice(cloud, c1, options.lattice_cap)?;
        match perfect_matching(cloud, shape, cloud.h()) {
            Ok(e) => return Ok((e, c1)),
            Err(err @ Error::NoMatching { .. }) if attempt >= options.max_retries => return Err(err),
            Err(Error::NoMatching { .. }) => {
                attempt += 1;
                c1 /= 2.0;
            }
            Err(other) => return Err(other),
        }
    }
}

/// `Ω̄` on the lattice: `Ω` (relabelled through the matching) on `A`, the
/// identity on `A^c`, zero in between.
pub fn padded_precision(omega: &DenseSymMatrix, embedding: &LatticeEmbedding) -> Result<DenseSymMatrix> {
    let m = embedding.vertex_of_site().len();
    if omega.dim() != m {
        return Err(Error::invalid("precision dimension does not match the number of sites"));
    }
    let n = embedding.shape().n_vertices();
    let mut out = DMatrix::identity(n, n);
    for (i, &vi) in embedding.vertex_of_site().iter().enumerate() {
        out[(vi, vi)] = 0.0;
        for (j, &vj) in embedding.vertex_of_site().iter().enumerate() {
            out[(vi, vj)] = omega.get(i, j);
        }
    }
    DenseSymMatrix::new(out)
}

/// Lattice samples: observed columns on `A`, seeded standard normals on
/// `A^c`. Row `n` draws its padding from stream `2⁶³ + n`, disjoint from the
/// streams [`crate::truth::sample_gaussian`] uses for its rows, so padding is
/// independent of the observations even under a shared seed.
pub fn augment_samples(samples: &SampleMatrix, embedding: &LatticeEmbedding, seed: u64) -> Result<SampleMatrix> {
    let m = embedding.vertex_of_site().len();
    if samples.dim() != m {
        return Err(Error::invalid(format!(
            "samples have dimension {}, cloud has {m} sites",
            samples.dim()
        )));
    }
    let n_vert = embedding.shape().n_vertices();
    let mut site_at = vec![None; n_vert];
    for (i, &v) in embedding.vertex_of_site().iter().enumerate() {
        site_at[v] = Some(i);
    }
    let z = samples.as_matrix();
    let rows: Vec<Vec<f64>> = (0..samples.n_samples())
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PADDING_STREAM | n as u64);
            site_at
                .iter()
                .map(|s| match s {
                    Some(i) => z[(n, *i)],
                    None => StandardNormal.sample(&mut rng),
                })
                .collect()
        })
        .collect();
    SampleMatrix::new(DMatrix::from_fn(rows.len(), n_vert, |r, c| rows[r][c]))
}

#[derive(Clone, Debug)]
pub struct ScatteredEstimate {
    /// `Ω̂` in the original site order.
    pub matrix: DenseSymMatrix,
    pub embedding: LatticeEmbedding,
    /// The `c1` that produced the matching.
    pub c1: f64,
    pub b: usize,
    pub path: EstimatePath,
}

/// Precision estimate at scattered sites through the padded lattice problem.
pub fn embed_and_estimate(
    samples: &SampleMatrix,
    cloud: &SiteCloud,
    config: &EstimatorConfig,
    options: &EmbedOptions,
    seed: u64,
) -> Result<ScatteredEstimate> {
    if samples.dim() != cloud.len() {
        return Err(Error::invalid(format!(
            "samples have dimension {}, cloud has {} sites",
            samples.dim(),
            cloud.len()
        )));
    }
    let (embedding, c1) = embed_cloud(cloud, options)?;
    let padded = augment_samples(samples, &embedding, seed)?;
    let mut config = config.clone();
    if let Some(b) = config.b_override {
        config.b_override = Some(b.min(embedding.shape().p()));
    }
    let lattice_est = estimate_precision(&padded, embedding.shape(), &config)?;
    let matrix = lattice_est.matrix.principal(embedding.vertex_of_site())?;
    Ok(ScatteredEstimate {
        matrix,
        b: lattice_est.scheme.b(),
        path: lattice_est.path,
        embedding,
        c1,
    })
}
