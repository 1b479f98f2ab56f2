//! The cubic lattice `[p]^d`, its partition into `b`-wide blocks and block
//! neighborhoods.
//!
//! Coordinates and block indices are 0-based. Flat indices are lexicographic
//! in the coordinates with the last axis varying fastest.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DenseSymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeShape {
    d: usize,
    p: usize,
}

impl LatticeShape {
    pub fn new(d: usize, p: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::invalid(format!("dimension d={d} must be 1, 2 or 3")));
        }
        if p == 0 {
            return Err(Error::invalid("side length p must be at least 1"));
        }
        p.checked_pow(d as u32)
            .ok_or_else(|| Error::invalid("lattice too large"))?;
        Ok(Self { d, p })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of vertices `p^d`.
    pub fn n_vertices(&self) -> usize {
        self.p.pow(self.d as u32)
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        unflatten(flat, self.p, self.d)
    }

    pub fn flat(&self, coords: &[usize]) -> usize {
        flatten(coords, self.p)
    }

    /// Position of vertex `flat` in `[0,1]^d`: coordinate `c` maps to
    /// `(c+1)/(p+1)`.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        let h = 1.0 / (self.p + 1) as f64;
        self.coords(flat)
            .into_iter()
            .map(|c| (c + 1) as f64 * h)
            .collect()
    }
}

fn unflatten(mut flat: usize, side: usize, d: usize) -> Vec<usize> {
    let mut c = vec![0; d];
    for axis in (0..d).rev() {
        c[axis] = flat % side;
        flat /= side;
    }
    c
}

fn flatten(coords: &[usize], side: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * side + c)
}

/// Partition of a lattice into blocks `B_j = I_{j_1} × ⋯ × I_{j_d}` where
/// `I_j = {jb, …, min((j+1)b, p) − 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockScheme {
    shape: LatticeShape,
    b: usize,
    s: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

/// A block-level neighborhood together with the vertices it covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    /// Flat block indices, ascending.
    pub blocks: Vec<usize>,
    /// Flat vertex indices, ascending.
    pub vertices: Vec<usize>,
}

pub fn build_scheme(p: usize, b: usize, d: usize) -> Result<BlockScheme> {
    let shape = LatticeShape::new(d, p)?;
    BlockScheme::new(shape, b)
}

impl BlockScheme {
    pub fn new(shape: LatticeShape, b: usize) -> Result<Self> {
        let p = shape.p();
        if b < 1 || b > p {
            return Err(Error::invalid(format!("block width b={b} must satisfy 1 <= b <= p={p}")));
        }
        let s = p.div_ceil(b);
        let d = shape.d();
        let n_blocks = s.pow(d as u32);
        let mut blocks = vec![Vec::new(); n_blocks];
        let mut block_of = vec![0; shape.n_vertices()];
        for v in 0..shape.n_vertices() {
            let bc: Vec<usize> = shape.coords(v).iter().map(|c| c / b).collect();
            let j = flatten(&bc, s);
            blocks[j].push(v);
            block_of[v] = j;
        }
        Ok(Self {
            shape,
            b,
            s,
            blocks,
            block_of,
        })
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Blocks per axis, `⌈p/b⌉`.
    pub fn blocks_per_axis(&self) -> usize {
        self.s
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Axis interval `I_j` as a range of coordinates.
    pub fn interval(&self, j: usize) -> std::ops::Range<usize> {
        let lo = j * self.b;
        lo..((j + 1) * self.b).min(self.shape.p())
    }

    pub fn block_coords(&self, j: usize) -> Vec<usize> {
        unflatten(j, self.s, self.shape.d())
    }

    pub fn block_flat(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.shape.d() || coords.iter().any(|&c| c >= self.s) {
            return Err(Error::invalid(format!("block index {coords:?} out of range")));
        }
        Ok(flatten(coords, self.s))
    }

    /// Vertices of block `j`, ascending.
    pub fn block_vertices(&self, j: usize) -> &[usize] {
        &self.blocks[j]
    }

    pub fn block_of(&self, vertex: usize) -> usize {
        self.block_of[vertex]
    }

    /// `‖j − j′‖_∞` between two flat block indices.
    pub fn block_distance(&self, j: usize, jp: usize) -> usize {
        self.block_coords(j)
            .iter()
            .zip(self.block_coords(jp))
            .map(|(&a, b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }

    /// `N_{j,λ}` and `W_{j,λ}`.
    pub fn neighborhood(&self, j: usize, lambda: usize) -> Result<Neighborhood> {
        if j >= self.n_blocks() {
            return Err(Error::invalid(format!("block {j} out of range")));
        }
        let center = self.block_coords(j);
        let ranges: Vec<_> = center
            .iter()
            .map(|&c| c.saturating_sub(lambda)..(c + lambda + 1).min(self.s))
            .collect();
        let mut blocks = Vec::new();
        let mut cur: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        'outer: loop {
            blocks.push(flatten(&cur, self.s));
            for axis in (0..cur.len()).rev() {
                cur[axis] += 1;
                if cur[axis] < ranges[axis].end {
                    continue 'outer;
                }
                cur[axis] = ranges[axis].start;
            }
            break;
        }
        let mut vertices: Vec<usize> = blocks
            .iter()
            .flat_map(|&jb| self.blocks[jb].iter().copied())
            .collect();
        vertices.sort_unstable();
        Ok(Neighborhood { blocks, vertices })
    }
}

/// Submatrix of `a` on `rows × cols`, each taken in ascending flat order.
pub fn restrict(a: &DenseSymMatrix, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    restrict_matrix(a.as_matrix(), rows, cols)
}

pub(crate) fn restrict_matrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    let canon = |set: &[usize], bound: usize| -> Result<Vec<usize>> {
        let mut v = set.to_vec();
        v.sort_unstable();
        v.dedup();
        if let Some(&bad) = v.iter().find(|&&i| i >= bound) {
            return Err(Error::invalid(format!("vertex {bad} out of range")));
        }
        Ok(v)
    };
    let r = canon(rows, a.nrows())?;
    let c = canon(cols, a.ncols())?;
    Ok(DMatrix::from_fn(r.len(), c.len(), |i, j| a[(r[i], c[j])]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_intervals() {
        let s = build_scheme(5, 2, 1).unwrap();
        assert_eq!(s.blocks_per_axis(), 3);
        assert_eq!(s.block_vertices(0), &[0, 1]);
        assert_eq!(s.block_vertices(1), &[2, 3]);
        assert_eq!(s.block_vertices(2), &[4]);
        assert_eq!(s.interval(2), 4..5);
    }

    #[test]
    fn single_block_covers_lattice() {
        let s = build_scheme(4, 4, 2).unwrap();
        assert_eq!(s.n_blocks(), 1);
        assert_eq!(s.block_vertices(0), (0..16).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn two_dimensional_partition_enumerated() {
        let s = build_scheme(6, 2, 2).unwrap();
        assert_eq!(s.n_blocks(), 9);
        let mut seen = [0; 36];
        for j in 0..9 {
            assert_eq!(s.block_vertices(j).len(), 4);
            let bc = s.block_coords(j);
            for &v in s.block_vertices(j) {
                seen[v] += 1;
                let c = s.shape().coords(v);
                assert_eq!(c[0] / 2, bc[0]);
                assert_eq!(c[1] / 2, bc[1]);
            }
        }
        assert!(seen.iter().all(|&k| k == 1));
    }

    #[test]
    fn bad_block_width() {
        assert!(matches!(build_scheme(3, 4, 1), Err(Error::InvalidInput(_))));
        assert!(matches!(build_scheme(3, 0, 1), Err(Error::InvalidInput(_))));
        assert!(matches!(build_scheme(3, 1, 4), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn neighborhood_examples() {
        let s = build_scheme(5, 2, 1).unwrap();
        let n = s.neighborhood(0, 1).unwrap();
        assert_eq!(n.blocks, vec![0, 1]);
        assert_eq!(n.vertices, vec![0, 1, 2, 3]);

        let s = build_scheme(10, 2, 2).unwrap();
        let center = s.block_flat(&[2, 2]).unwrap();
        assert_eq!(s.neighborhood(center, 2).unwrap().blocks.len(), 25);

        for j in 0..s.n_blocks() {
            let n = s.neighborhood(j, 0).unwrap();
            assert_eq!(n.blocks, vec![j]);
            assert_eq!(n.vertices, s.block_vertices(j));
        }
        assert!(s.neighborhood(s.n_blocks(), 1).is_err());
    }

    #[test]
    fn coordinate_round_trip_and_order() {
        let shape = LatticeShape::new(3, 4).unwrap();
        assert_eq!(shape.coords(1), vec![0, 0, 1]);
        assert_eq!(shape.coords(4), vec![0, 1, 0]);
        for v in 0..shape.n_vertices() {
            assert_eq!(shape.flat(&shape.coords(v)), v);
        }
        assert_eq!(shape.position(0), vec![0.2, 0.2, 0.2]);
    }

    #[test]
    fn restrict_examples() {
        let a = DenseSymMatrix::identity(5);
        let r = restrict(&a, &[0, 2, 4], &[0, 2, 4]).unwrap();
        assert_eq!(r, DMatrix::identity(3, 3));

        // 1-based entries i+j; rows {1,3}, cols {2} in 1-based indexing.
        let a = DenseSymMatrix::from_upper_fn(4, |i, j| (i + 1 + j + 1) as f64).unwrap();
        let r = restrict(&a, &[0, 2], &[1]).unwrap();
        assert_eq!(r, DMatrix::from_column_slice(2, 1, &[3.0, 5.0]));

        let all: Vec<usize> = (0..4).collect();
        assert_eq!(&restrict(&a, &all, &all).unwrap(), a.as_matrix());
        assert!(restrict(&a, &[4], &[0]).is_err());
    }

    fn scheme_strategy() -> impl Strategy<Value = (usize, usize, usize)> {
        (1usize..=3).prop_flat_map(|d| {
            let max_p = [0, 40, 12, 6][d];
            (Just(d), 1usize..=max_p).prop_flat_map(|(d, p)| (Just(d), Just(p), 1usize..=p))
        })
    }

    proptest! {
        #[test]
        fn blocks_partition_lattice((d, p, b) in scheme_strategy()) {
            let s = build_scheme(p, b, d).unwrap();
            let mut seen = vec![false; s.shape().n_vertices()];
            let mut total = 0;
            for j in 0..s.n_blocks() {
                let bv = s.block_vertices(j);
                prop_assert!(!bv.is_empty() && bv.len() <= b.pow(d as u32));
                let interior = s.block_coords(j).iter().all(|&c| c + 1 < s.blocks_per_axis());
                if interior {
                    prop_assert_eq!(bv.len(), b.pow(d as u32));
                }
                for &v in bv {
                    prop_assert!(!seen[v]);
                    seen[v] = true;
                }
                total += bv.len();
            }
            prop_assert_eq!(total, p.pow(d as u32));
        }

        #[test]
        fn neighborhoods_grow_and_are_bounded((d, p, b) in scheme_strategy(), pick in any::<usize>()) {
            let s = build_scheme(p, b, d).unwrap();
            let j = pick % s.n_blocks();
            let mut prev: Vec<usize> = Vec::new();
            for lambda in 0..4 {
                let n = s.neighborhood(j, lambda).unwrap();
                let full = (2 * lambda + 1).pow(d as u32);
                prop_assert!(n.blocks.len() <= full);
                let interior = s.block_coords(j).iter()
                    .all(|&c| c >= lambda && c + lambda < s.blocks_per_axis());
                if interior {
                    prop_assert_eq!(n.blocks.len(), full);
                }
                for &jb in &n.blocks {
                    prop_assert!(s.block_distance(j, jb) <= lambda);
                }
                prop_assert!(prev.iter().all(|v| n.vertices.binary_search(v).is_ok()));
                prev = n.vertices;
            }
        }

        #[test]
        fn restrict_composes(dim in 2usize..10, seed in any::<u64>()) {
            use rand::{SeedableRng, seq::index::sample};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = crate::testing::random_symmetric(&mut rng, dim);
            let mut rows = sample(&mut rng, dim, 1 + seed as usize % dim).into_vec();
            let mut cols = sample(&mut rng, dim, 1 + (seed >> 8) as usize % dim).into_vec();
            rows.sort_unstable();
            cols.sort_unstable();
            let rsub = &rows[..rows.len().div_ceil(2)];
            let csub = &cols[..cols.len().div_ceil(2)];
            let outer = restrict(&a, &rows, &cols).unwrap();
            let ri: Vec<usize> = rsub.iter().map(|v| rows.binary_search(v).unwrap()).collect();
            let ci: Vec<usize> = csub.iter().map(|v| cols.binary_search(v).unwrap()).collect();
            let nested = restrict_matrix(&outer, &ri, &ci).unwrap();
            prop_assert_eq!(nested, restrict(&a, rsub, csub).unwrap());
        }
    }
}
