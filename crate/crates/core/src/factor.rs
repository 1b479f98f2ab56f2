//! Multiscale block-Cholesky factors `Ω = U Uᵀ` with `U` block upper
//! triangular over the levels of a [`LevelPartition`].
//!
//! With `h = 1/2`, `Ω⁽ᵏ⁾ = (Σ_{I⁽ᵏ⁾})⁻¹`, `B⁽ᵏ⁾ = h^{-kd} Ω⁽ᵏ⁾_{kk}` and
//! `L̃⁽ᵏ⁾` the Cholesky factor of `(B⁽ᵏ⁾)⁻¹`, the blocks of `Uᵀ` are
//!
//! ```text
//! (Uᵀ)_{kk}       = h^{kd/2} (L̃⁽ᵏ⁾)⁻¹
//! (Uᵀ)_{k,1:k-1}  = h^{-kd/2} (L̃⁽ᵏ⁾)ᵀ Ω⁽ᵏ⁾_{k,1:k-1}
//! ```
//!
//! The symmetric variant `U*` uses `(B⁽ᵏ⁾)^{-1/2}` and `(B⁽ᵏ⁾)^{1/2}` in place
//! of `(L̃⁽ᵏ⁾)ᵀ` and `(L̃⁽ᵏ⁾)⁻¹`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{CovarianceSource, EstimatePath, EstimatorConfig};
use crate::hierarchy::{assign_levels, maximin_order, LevelPartition, MaximinOrdering, LEVEL_RATIO};
use crate::linalg::{
    cholesky_lower, spd_inv_sqrt, spd_inverse, spd_sqrt, DenseSymMatrix, LowerTriangular, SampleMatrix,
};
use crate::matching::{embed_and_estimate, lattice_cloud, EmbedOptions, SiteCloud};
use crate::truth::{Geometry, GroundTruth};

/// Estimates belonging to one non-empty level `k`.
#[derive(Clone, Debug)]
pub struct ScaleBlock {
    pub level: usize,
    /// `Ω⁽ᵏ⁾` on `I⁽ᵏ⁾`.
    pub omega: DenseSymMatrix,
    /// `B⁽ᵏ⁾` on `J⁽ᵏ⁾`.
    pub b: DenseSymMatrix,
    /// Cholesky factor of `(B⁽ᵏ⁾)⁻¹`.
    pub ltilde: LowerTriangular,
}

/// Per-level estimates for all non-empty levels, ascending.
#[derive(Clone, Debug)]
pub struct ScaleEstimates {
    pub scales: Vec<ScaleBlock>,
}

/// Block lower-triangular storage of `Uᵀ`: block `(k, l)` with `l ≤ k` maps
/// `J⁽ˡ⁾` columns to `J⁽ᵏ⁾` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTriangularFactor {
    levels: LevelPartition,
    d: usize,
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl BlockTriangularFactor {
    pub fn new(levels: LevelPartition, d: usize, blocks: BTreeMap<(usize, usize), DMatrix<f64>>) -> Result<Self> {
        for (&(k, l), m) in &blocks {
            if l > k || k > levels.q() || l == 0 {
                return Err(Error::invalid(format!("block ({k}, {l}) is above the diagonal or out of range")));
            }
            if m.nrows() != levels.size(k) || m.ncols() != levels.size(l) {
                return Err(Error::invalid(format!("block ({k}, {l}) has the wrong shape")));
            }
        }
        for k in levels.nonempty_levels() {
            if !blocks.contains_key(&(k, k)) {
                return Err(Error::invalid(format!("diagonal block {k} is missing")));
            }
        }
        Ok(Self { levels, d, blocks })
    }

    pub fn levels(&self) -> &LevelPartition {
        &self.levels
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &BTreeMap<(usize, usize), DMatrix<f64>> {
        &self.blocks
    }

    pub fn block(&self, k: usize, l: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(k, l))
    }

    /// Dense `Uᵀ`.
    pub fn to_dense_lower(&self) -> DMatrix<f64> {
        let m = self.levels.len();
        let mut out = DMatrix::zeros(m, m);
        for (&(k, l), b) in &self.blocks {
            let (rk, rl) = (self.levels.range(k), self.levels.range(l));
            out.view_mut((rk.start, rl.start), (rk.len(), rl.len())).copy_from(b);
        }
        out
    }

    /// Dense `U`.
    pub fn to_dense_upper(&self) -> DMatrix<f64> {
        self.to_dense_lower().transpose()
    }

    /// `U Uᵀ`.
    pub fn reconstruct(&self) -> DenseSymMatrix {
        let ut = self.to_dense_lower();
        DenseSymMatrix::symmetrize(ut.tr_mul(&ut)).expect("square")
    }
}

fn h_pow(k: usize, d: usize, sign: f64) -> f64 {
    LEVEL_RATIO.powf(sign * (k * d) as f64 / 2.0)
}

/// `h^{-kd} · Ω̂⁽ᵏ⁾` restricted to `J⁽ᵏ⁾` (the trailing `|J⁽ᵏ⁾|` indices).
pub fn estimate_b(omega_k: &DenseSymMatrix, levels: &LevelPartition, k: usize, d: usize) -> Result<DenseSymMatrix> {
    if k == 0 || k > levels.q() || levels.size(k) == 0 {
        return Err(Error::invalid(format!("level {k} is empty or out of range")));
    }
    let n = levels.prefix_len(k);
    if omega_k.dim() != n {
        return Err(Error::invalid(format!(
            "estimate at level {k} has dimension {}, expected {n}",
            omega_k.dim()
        )));
    }
    let j: Vec<usize> = (n - levels.size(k)..n).collect();
    let b = omega_k.principal(&j)?.scaled(h_pow(k, d, -2.0));
    cholesky_lower(&b)?;
    Ok(b)
}

impl ScaleEstimates {
    /// Forms `B⁽ᵏ⁾` and `L̃⁽ᵏ⁾` from per-level precision estimates given for
    /// every non-empty level, ascending.
    pub fn from_omegas(omegas: Vec<DenseSymMatrix>, levels: &LevelPartition, d: usize) -> Result<Self> {
        let ks = levels.nonempty_levels();
        if omegas.len() != ks.len() {
            return Err(Error::invalid(format!(
                "{} scale estimates for {} non-empty levels",
                omegas.len(),
                ks.len()
            )));
        }
        let scales = ks
            .into_iter()
            .zip(omegas)
            .map(|(k, omega)| {
                let b = estimate_b(&omega, levels, k, d).map_err(|e| Error::at_scale(k, e))?;
                let ltilde = cholesky_lower(&spd_inverse(&b).map_err(|e| Error::at_scale(k, e))?)
                    .map_err(|e| Error::at_scale(k, e))?;
                Ok(ScaleBlock {
                    level: k,
                    omega,
                    b,
                    ltilde,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { scales })
    }

    /// Exact per-level quantities of a precision matrix given in level order.
    pub fn exact(omega: &DenseSymMatrix, levels: &LevelPartition, d: usize) -> Result<Self> {
        if omega.dim() != levels.len() {
            return Err(Error::invalid("precision dimension does not match the levels"));
        }
        let sigma = spd_inverse(omega)?;
        let omegas = levels
            .nonempty_levels()
            .into_iter()
            .map(|k| {
                let idx: Vec<usize> = (0..levels.prefix_len(k)).collect();
                spd_inverse(&sigma.principal(&idx)?).map_err(|e| Error::at_scale(k, e))
            })
            .collect::<Result<_>>()?;
        Self::from_omegas(omegas, levels, d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// Triangular diagonal blocks.
    Cholesky,
    /// Symmetric square-root diagonal blocks.
    SquareRoot,
}

fn assemble(scales: &ScaleEstimates, levels: &LevelPartition, d: usize, kind: FactorKind) -> Result<BlockTriangularFactor> {
    let ks = levels.nonempty_levels();
    if scales.scales.len() != ks.len() || scales.scales.iter().zip(&ks).any(|(s, k)| s.level != *k) {
        return Err(Error::invalid("scale estimates do not cover every non-empty level"));
    }
    let mut blocks = BTreeMap::new();
    for s in &scales.scales {
        let k = s.level;
        let (left, diag) = match kind {
            FactorKind::Cholesky => (s.ltilde.as_matrix().transpose(), s.ltilde.inverse()),
            FactorKind::SquareRoot => (
                spd_inv_sqrt(&s.b).map_err(|e| Error::at_scale(k, e))?.into_inner(),
                spd_sqrt(&s.b).map_err(|e| Error::at_scale(k, e))?.into_inner(),
            ),
        };
        blocks.insert((k, k), diag * h_pow(k, d, 1.0));
        let n = levels.prefix_len(k);
        let rows = n - levels.size(k);
        for l in 1..k {
            if levels.size(l) == 0 {
                continue;
            }
            let rl = levels.range(l);
            let cross = s.omega.as_matrix().view((rows, rl.start), (levels.size(k), rl.len()));
            blocks.insert((k, l), &left * cross * h_pow(k, d, -1.0));
        }
    }
    BlockTriangularFactor::new(levels.clone(), d, blocks)
}

/// `Ûᵀ` from per-level estimates.
pub fn assemble_u(scales: &ScaleEstimates, levels: &LevelPartition, d: usize) -> Result<BlockTriangularFactor> {
    assemble(scales, levels, d, FactorKind::Cholesky)
}

/// `Û*ᵀ` from per-level estimates.
pub fn assemble_u_star(scales: &ScaleEstimates, levels: &LevelPartition, d: usize) -> Result<BlockTriangularFactor> {
    assemble(scales, levels, d, FactorKind::SquareRoot)
}

/// Exact factor of `Ω` (given in level order).
pub fn exact_block_factor(omega: &DenseSymMatrix, levels: &LevelPartition, d: usize) -> Result<BlockTriangularFactor> {
    assemble_u(&ScaleEstimates::exact(omega, levels, d)?, levels, d)
}

/// Exact square-root variant `U*`.
pub fn exact_block_factor_star(omega: &DenseSymMatrix, levels: &LevelPartition, d: usize) -> Result<BlockTriangularFactor> {
    assemble_u_star(&ScaleEstimates::exact(omega, levels, d)?, levels, d)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CholeskyConfig {
    pub estimator: EstimatorConfig,
    pub embed: EmbedOptions,
    /// Seed for the padding noise of scales estimated through a lattice.
    pub seed: u64,
}

/// How one scale was estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalePath {
    FullInverse,
    Lattice { p: usize, b: usize, path: EstimatePath },
}

#[derive(Clone, Debug)]
pub struct CholeskyEstimate {
    pub scales: ScaleEstimates,
    pub paths: Vec<ScalePath>,
}

impl CholeskyEstimate {
    pub fn factor(&self, levels: &LevelPartition, d: usize, kind: FactorKind) -> Result<BlockTriangularFactor> {
        assemble(&self.scales, levels, d, kind)
    }
}

/// Per-level precision estimates from samples whose columns are in level
/// order, with `cloud` holding the matching sites in the same order.
///
/// A scale is inverted directly when its side length `⌈|I⁽ᵏ⁾|^{1/d}⌉` is at
/// most `ln(N κ)`; otherwise it goes through the lattice embedding.
/// Population input always inverts directly.
pub fn estimate_scales(
    source: CovarianceSource<'_>,
    cloud: &SiteCloud,
    levels: &LevelPartition,
    config: &CholeskyConfig,
) -> Result<CholeskyEstimate> {
    let d = cloud.d();
    if source.dim() != levels.len() || cloud.len() != levels.len() {
        return Err(Error::invalid("samples, sites and levels disagree in size"));
    }
    let ks = levels.nonempty_levels();
    let results: Vec<(DenseSymMatrix, ScalePath)> = ks
        .par_iter()
        .map(|&k| {
            let n_k = levels.prefix_len(k);
            let idx: Vec<usize> = (0..n_k).collect();
            let run = || -> Result<(DenseSymMatrix, ScalePath)> {
                match source {
                    CovarianceSource::Population(sigma) => {
                        Ok((spd_inverse(&sigma.principal(&idx)?)?, ScalePath::FullInverse))
                    }
                    CovarianceSource::Samples(z) => {
                        let n = z.n_samples() as f64;
                        let kappa = config.estimator.kappa_hint.unwrap_or(n_k as f64);
                        let side = (n_k as f64).powf(1.0 / d as f64).ceil();
                        let zk = z.select_columns(&idx)?;
                        if side <= (n * kappa).ln() && config.estimator.fallback_enabled {
                            let cov = crate::linalg::sample_covariance(&zk)?;
                            return Ok((spd_inverse(&cov)?, ScalePath::FullInverse));
                        }
                        let sub = cloud.subset(&idx)?;
                        let est = embed_and_estimate(&zk, &sub, &config.estimator, &config.embed, config.seed.wrapping_add(k as u64))?;
                        let path = ScalePath::Lattice {
                            p: est.embedding.shape().p(),
                            b: est.b,
                            path: est.path,
                        };
                        Ok((est.matrix, path))
                    }
                }
            };
            run().map_err(|e| Error::at_scale(k, e))
        })
        .collect::<Result<_>>()?;
    let (omegas, paths): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(CholeskyEstimate {
        scales: ScaleEstimates::from_omegas(omegas, levels, d)?,
        paths,
    })
}

/// `Û` from samples in level order.
pub fn estimate_cholesky(
    samples: &SampleMatrix,
    cloud: &SiteCloud,
    levels: &LevelPartition,
    config: &CholeskyConfig,
) -> Result<BlockTriangularFactor> {
    estimate_scales(CovarianceSource::Samples(samples), cloud, levels, config)?.factor(levels, cloud.d(), FactorKind::Cholesky)
}

/// A truth reordered into maximin order together with its hierarchy.
#[derive(Clone, Debug)]
pub struct HierarchicalTruth {
    /// The truth with rows and columns in maximin order.
    pub truth: GroundTruth,
    /// Sites in maximin order.
    pub cloud: SiteCloud,
    pub ordering: MaximinOrdering,
    pub levels: LevelPartition,
}

impl HierarchicalTruth {
    pub fn new(truth: &GroundTruth) -> Result<Self> {
        let cloud = match &truth.geometry {
            Geometry::Lattice(s) => lattice_cloud(*s),
            Geometry::Sites(c) => c.clone(),
        };
        let ordering = maximin_order(&cloud);
        let levels = assign_levels(&ordering);
        let ordered = truth.permuted(&ordering.perm)?;
        let cloud = cloud.subset(&ordering.perm)?;
        Ok(Self {
            truth: ordered,
            cloud,
            ordering,
            levels,
        })
    }

    pub fn d(&self) -> usize {
        self.cloud.d()
    }
}

/// The `q`-level dyadic grid `{k / 2^q}` in one dimension with a
/// Laplacian-power truth, in maximin order.
pub fn nested_grid_truth(q: usize, s: u32) -> Result<HierarchicalTruth> {
    if q == 0 || q > 12 {
        return Err(Error::invalid("q must be between 1 and 12"));
    }
    let p = (1usize << q) - 1;
    HierarchicalTruth::new(&crate::truth::build_lattice_precision(p, 1, s)?)
}
