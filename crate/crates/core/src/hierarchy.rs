//! Maximin ordering, dyadic level sets and the per-level rescaling.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::matching::{boundary_distance, measure_cloud, SiteCloud};

/// Ratio between successive level scales.
pub const LEVEL_RATIO: f64 = 0.5;

/// Greedy maximin order. `perm[i]` is the original index of the `i`-th
/// selected site and `ell[i]` its distance to the earlier sites and the
/// boundary at the time of selection.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximinOrdering {
    pub perm: Vec<usize>,
    pub ell: Vec<f64>,
}

/// First the site farthest from the boundary, then repeatedly the site
/// farthest from everything selected so far (and the boundary). Ties go to
/// the lowest original index.
pub fn maximin_order(cloud: &SiteCloud) -> MaximinOrdering {
    let m = cloud.len();
    let mut score: Vec<f64> = cloud.sites().iter().map(|x| boundary_distance(x)).collect();
    let mut taken = vec![false; m];
    let mut perm = Vec::with_capacity(m);
    let mut ell = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best = usize::MAX;
        for i in 0..m {
            if !taken[i] && (best == usize::MAX || score[i] > score[best]) {
                best = i;
            }
        }
        taken[best] = true;
        perm.push(best);
        ell.push(score[best]);
        for i in 0..m {
            if !taken[i] {
                score[i] = score[i].min(cloud.distance(i, best));
            }
        }
    }
    MaximinOrdering { perm, ell }
}

/// Consecutive level sets `J⁽¹⁾, …, J⁽q⁾` of an ordered index set. Levels
/// may be empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPartition {
    perm: Vec<usize>,
    sizes: Vec<usize>,
    starts: Vec<usize>,
}

impl LevelPartition {
    /// Levels of the given sizes over the identity order.
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        let m: usize = sizes.iter().sum();
        Self::new((0..m).collect(), sizes)
    }

    pub fn new(perm: Vec<usize>, sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("at least one level is required"));
        }
        let m: usize = sizes.iter().sum();
        if m != perm.len() || m == 0 {
            return Err(Error::invalid("level sizes do not add up to the number of sites"));
        }
        if sizes[0] == 0 {
            return Err(Error::invalid("the first level must be non-empty"));
        }
        let mut seen = vec![false; m];
        for &i in &perm {
            if i >= m || seen[i] {
                return Err(Error::invalid("ordering is not a permutation"));
            }
            seen[i] = true;
        }
        let mut starts = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            starts.push(acc);
            acc += s;
        }
        Ok(Self { perm, sizes, starts })
    }

    /// Number of levels `q`, counting empty ones.
    pub fn q(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Ordered position → original index.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `|J⁽ᵏ⁾|` for 1-based `k`.
    pub fn size(&self, k: usize) -> usize {
        self.sizes[k - 1]
    }

    /// Positions of `J⁽ᵏ⁾` in the ordering.
    pub fn range(&self, k: usize) -> Range<usize> {
        let s = self.starts[k - 1];
        s..s + self.sizes[k - 1]
    }

    /// `|I⁽ᵏ⁾|`.
    pub fn prefix_len(&self, k: usize) -> usize {
        self.range(k).end
    }

    /// Level (1-based) of ordered position `i`.
    pub fn level_of(&self, i: usize) -> usize {
        (1..=self.q())
            .find(|&k| self.range(k).contains(&i))
            .expect("position in range")
    }

    /// Non-empty levels, ascending.
    pub fn nonempty_levels(&self) -> Vec<usize> {
        (1..=self.q()).filter(|&k| self.size(k) > 0).collect()
    }
}

/// Level `k = ⌊log₂(ℓ₁/ℓ_i)⌋ + 1`, i.e. `ℓ_i ∈ (ℓ₁ 2^{-k}, ℓ₁ 2^{1-k}]`.
pub fn level_index(ell: f64, scale0: f64) -> usize {
    ((scale0 / ell).log2() + 1e-9).floor().max(0.0) as usize + 1
}

pub fn assign_levels(ordering: &MaximinOrdering) -> LevelPartition {
    let scale0 = ordering.ell[0];
    let ks: Vec<usize> = ordering.ell.iter().map(|&l| level_index(l, scale0)).collect();
    let q = *ks.iter().max().expect("non-empty ordering");
    let mut sizes = vec![0; q];
    for &k in &ks {
        sizes[k - 1] += 1;
    }
    LevelPartition::new(ordering.perm.clone(), sizes).expect("valid partition")
}

/// Diagonal `D̃` with entry `2^{d·k/2}` at every index of level `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleDiagonal(pub Vec<f64>);

pub fn scale_diagonal(levels: &LevelPartition, d: usize) -> ScaleDiagonal {
    let mut v = Vec::with_capacity(levels.len());
    for k in 1..=levels.q() {
        let e = (1.0 / LEVEL_RATIO).powf(d as f64 * k as f64 / 2.0);
        v.extend(std::iter::repeat_n(e, levels.size(k)));
    }
    ScaleDiagonal(v)
}

impl ScaleDiagonal {
    /// `D̃⁻¹ Σ D̃⁻¹`, entrywise.
    pub fn conjugate_inverse(&self, sigma: &crate::linalg::DenseSymMatrix) -> crate::linalg::DenseSymMatrix {
        let n = sigma.dim();
        crate::linalg::DenseSymMatrix::from_upper_fn(n, |i, j| sigma.get(i, j) / (self.0[i] * self.0[j]))
            .expect("dim >= 1")
    }
}

/// Fill distance of each prefix `I⁽ᵏ⁾` against the allowed radius
/// `√d · 2^{1-k} · ℓ₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverCheck {
    pub level: usize,
    pub fill_distance: f64,
    pub bound: f64,
}

pub fn cover_check(cloud: &SiteCloud, ordering: &MaximinOrdering, levels: &LevelPartition) -> Result<Vec<CoverCheck>> {
    let scale0 = ordering.ell[0];
    let d = cloud.d();
    levels
        .nonempty_levels()
        .into_iter()
        .map(|k| {
            let prefix: Vec<Vec<f64>> = ordering.perm[..levels.prefix_len(k)]
                .iter()
                .map(|&i| cloud.site(i).to_vec())
                .collect();
            let h = measure_cloud(prefix, d)?.h();
            Ok(CoverCheck {
                level: k,
                fill_distance: h,
                bound: (d as f64).sqrt() * 2.0 * scale0 * LEVEL_RATIO.powi(k as i32),
            })
        })
        .collect()
}
