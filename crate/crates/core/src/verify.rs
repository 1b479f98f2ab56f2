//! Property suites that check the structural facts the estimators rely on,
//! each returning measured statistics and a pass/fail verdict.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{assemble_unsymmetrized, compute_locals, estimate_precision, ols_plugin_row, CovarianceSource, EstimatorConfig};
use crate::factor::{exact_block_factor, exact_block_factor_star, nested_grid_truth, ScaleEstimates};
use crate::hierarchy::LevelPartition;
use crate::lattice::{BlockScheme, LatticeShape};
use crate::linalg::{
    block_inverse_schur, cholesky_lower, condition_number, operator_norm, sample_covariance, spd_inverse, spd_sqrt,
    DenseSymMatrix,
};
use crate::matching::lattice_cloud;
use crate::testing::{random_spd, random_symmetric};
use crate::truth::{build_green_restriction, build_lattice_precision, log_log_slope, sample, sample_gaussian, screening_profile, spectrum_summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Screening,
    EigenScaling,
    Perturbation,
    BlockInverse,
    Ols,
    BlockCholesky,
    Symmetry,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Screening,
        Suite::EigenScaling,
        Suite::Perturbation,
        Suite::BlockInverse,
        Suite::Ols,
        Suite::BlockCholesky,
        Suite::Symmetry,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Screening => "screening",
            Suite::EigenScaling => "eigen-scaling",
            Suite::Perturbation => "perturbation",
            Suite::BlockInverse => "block-inverse",
            Suite::Ols => "ols",
            Suite::BlockCholesky => "block-cholesky",
            Suite::Symmetry => "symmetry",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Feed the symmetry suite the unsymmetrized assembly instead of the
    /// estimate, as a negative control.
    pub inject_asymmetric: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub stats: Vec<(String, f64)>,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.suite.as_str(), if self.passed { "PASS" } else { "FAIL" })?;
        for (k, v) in &self.stats {
            write!(f, " {k}={v:.6e}")?;
        }
        Ok(())
    }
}

struct Stats(Vec<(String, f64)>);

impl Stats {
    fn push(&mut self, k: impl Into<String>, v: f64) {
        self.0.push((k.into(), v));
    }
}

fn ratio_spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(0.0, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

pub fn run_suite(suite: Suite, options: &VerifyOptions) -> Result<SuiteReport> {
    let mut stats = Stats(Vec::new());
    let passed = match suite {
        Suite::Screening => screening(&mut stats)?,
        Suite::EigenScaling => eigen_scaling(&mut stats)?,
        Suite::Perturbation => perturbation(&mut stats, options.seed)?,
        Suite::BlockInverse => block_inverse(&mut stats, options.seed)?,
        Suite::Ols => ols(&mut stats, options.seed)?,
        Suite::BlockCholesky => block_cholesky(&mut stats, options.seed)?,
        Suite::Symmetry => symmetry(&mut stats, options)?,
    };
    Ok(SuiteReport {
        suite,
        passed,
        stats: stats.0,
    })
}

/// Lattice sizes of the structural suites.
pub const STRUCTURE_SIZES: [usize; 4] = [8, 16, 32, 64];
/// Smoothness of the structural suites.
pub const STRUCTURE_S: u32 = 2;

/// Screening R² of the Green restriction of `A^s` from a grid with
/// `4(p+1)−1` nodes to the `p` lattice sites, `d = 1`.
pub fn screening_fits(sizes: &[usize], s: u32) -> Result<Vec<(usize, f64, f64)>> {
    sizes
        .iter()
        .map(|&p| {
            let cloud = lattice_cloud(LatticeShape::new(1, p)?);
            let g = build_green_restriction(4 * (p + 1) - 1, 1, s, &cloud)?;
            let fit = screening_profile(&g.omega, &g.geometry)
                .fit
                .ok_or_else(|| Error::NumericalFailure(format!("too few profile bins at p={p}")))?;
            Ok((p, fit.slope, fit.r_squared))
        })
        .collect()
}

fn screening(st: &mut Stats) -> Result<bool> {
    let fits = screening_fits(&STRUCTURE_SIZES, STRUCTURE_S)?;
    let mut ok = true;
    for (p, slope, r2) in fits {
        st.push(format!("r2_p{p}"), r2);
        ok &= r2 >= 0.9 && slope < 0.0;
    }
    Ok(ok)
}

/// Eigenvalue regressions on `d = 1` Laplacian-power truths.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenScaling {
    /// Fitted slope of `log λ_max` against `log h`.
    pub lambda_max_slope: f64,
    /// Expected slope `d − 2s`.
    pub expected_slope: f64,
    /// `max/min` of `λ_min h^{-d}` over sizes.
    pub lambda_min_spread: f64,
}

impl EigenScaling {
    pub fn holds(&self) -> bool {
        (self.lambda_max_slope - self.expected_slope).abs() <= 0.15 * self.expected_slope.abs() && self.lambda_min_spread <= 10.0
    }
}

pub fn eigen_scaling_fit(sizes: &[usize], s: u32) -> Result<EigenScaling> {
    let d = 1;
    let hs: Vec<f64> = sizes.iter().map(|&p| 1.0 / (p + 1) as f64).collect();
    let sums = sizes
        .iter()
        .map(|&p| Ok(spectrum_summary(&build_lattice_precision(p, d, s)?.omega)))
        .collect::<Result<Vec<_>>>()?;
    let lmax: Vec<f64> = sums.iter().map(|x| x.lambda_max).collect();
    let fit = log_log_slope(&hs, &lmax).ok_or_else(|| Error::NumericalFailure("degenerate regression".into()))?;
    let lmin: Vec<f64> = sums.iter().zip(&hs).map(|(x, h)| x.lambda_min / h.powi(d as i32)).collect();
    Ok(EigenScaling {
        lambda_max_slope: fit.slope,
        expected_slope: d as f64 - 2.0 * s as f64,
        lambda_min_spread: ratio_spread(&lmin),
    })
}

fn eigen_scaling(st: &mut Stats) -> Result<bool> {
    let e = eigen_scaling_fit(&STRUCTURE_SIZES, STRUCTURE_S)?;
    st.push("lambda_max_slope", e.lambda_max_slope);
    st.push("expected_slope", e.expected_slope);
    st.push("lambda_min_spread", e.lambda_min_spread);
    Ok(e.holds())
}

/// One perturbed SPD pair and the three measured errors with their bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationCase {
    pub kappa_eps: f64,
    pub inverse_error: f64,
    pub inverse_bound: f64,
    pub cholesky_error: f64,
    pub cholesky_bound: f64,
    pub sqrt_error: f64,
    pub sqrt_bound: f64,
}

impl PerturbationCase {
    pub fn holds(&self) -> bool {
        let slack = 1e-12;
        self.inverse_error <= self.inverse_bound + slack
            && self.cholesky_error < self.cholesky_bound + slack
            && self.sqrt_error <= self.sqrt_bound + slack
    }
}

/// `count` random SPD `dim × dim` matrices `B` with `κ(B) ∈ [1, 10³]` and
/// symmetric perturbations scaled so that `κ(B) ε_B ∈ (0, 0.4]`.
pub fn perturbation_corpus(seed: u64, count: usize, dim: usize) -> Result<Vec<PerturbationCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let kappa_target = 10f64.powf(rng.random_range(0.0..3.0));
            let b = random_spd(&mut rng, dim, kappa_target);
            let e = random_symmetric(&mut rng, dim);
            let kappa = condition_number(&b)?;
            let kappa_eps = 0.4 * rng.random_range(0.01..=1.0);
            let eps = kappa_eps / kappa;
            let nb = operator_norm(b.as_matrix());
            let delta = e.as_matrix() * (eps * nb / operator_norm(e.as_matrix()));
            let b_hat = DenseSymMatrix::symmetrize(b.as_matrix() + delta)?;
            let eps = operator_norm(&(b_hat.as_matrix() - b.as_matrix())) / nb;
            let ke = kappa * eps;

            let inv = spd_inverse(&b)?;
            let inverse_error = operator_norm(&(spd_inverse(&b_hat)?.as_matrix() - inv.as_matrix())) / operator_norm(inv.as_matrix());
            let l = cholesky_lower(&b)?;
            let l_hat = cholesky_lower(&b_hat)?;
            let cholesky_error = operator_norm(&(l_hat.as_matrix() - l.as_matrix())) / operator_norm(l.as_matrix());
            let r = spd_sqrt(&b)?;
            let sqrt_error = operator_norm(&(spd_sqrt(&b_hat)?.as_matrix() - r.as_matrix())) / operator_norm(r.as_matrix());
            Ok(PerturbationCase {
                kappa_eps: ke,
                inverse_error,
                inverse_bound: ke / (1.0 - ke),
                cholesky_error,
                cholesky_bound: (2.0 * (dim as f64).log2() + 4.0) * ke,
                sqrt_error,
                sqrt_bound: kappa.sqrt() * eps,
            })
        })
        .collect()
}

fn perturbation(st: &mut Stats, seed: u64) -> Result<bool> {
    let cases = perturbation_corpus(seed, 100, 20)?;
    let worst = |f: &dyn Fn(&PerturbationCase) -> f64| cases.iter().map(f).fold(0.0, f64::max);
    st.push("cases", cases.len() as f64);
    st.push("max_kappa_eps", worst(&|c| c.kappa_eps));
    st.push("max_inverse_ratio", worst(&|c| c.inverse_error / c.inverse_bound));
    st.push("max_cholesky_ratio", worst(&|c| c.cholesky_error / c.cholesky_bound));
    st.push("max_sqrt_ratio", worst(&|c| c.sqrt_error / c.sqrt_bound));
    Ok(cases.iter().all(|c| c.holds() && c.kappa_eps <= 0.4 + 1e-12))
}

fn block_inverse(st: &mut Stats, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB10C);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let dim = rng.random_range(2..=12);
        let kappa = 10f64.powf(rng.random_range(0.0..4.0));
        let sigma = random_spd(&mut rng, dim, kappa);
        let direct = spd_inverse(&sigma)?;
        for split in 1..dim {
            let blocks = block_inverse_schur(&sigma, split)?.assemble();
            worst = worst.max(operator_norm(&(blocks - direct.as_matrix())) / operator_norm(direct.as_matrix()));
        }
    }
    st.push("max_rel_error", worst);
    Ok(worst <= 1e-9)
}

/// Largest relative row mismatch between `Σ̂⁻¹` and the OLS plug-in rows over
/// `count` random instances with `N = n`, `dim ∈ 3..=8`.
pub fn ols_mismatch(seed: u64, count: usize, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let dim = rng.random_range(3..=8);
        let kappa = 10f64.powf(rng.random_range(0.0..2.0));
        let sigma = random_spd(&mut rng, dim, kappa);
        let z = sample_gaussian(&sigma, n, rng.random())?;
        let inv = spd_inverse(&sample_covariance(&z)?)?;
        for i in 0..dim {
            let row = ols_plugin_row(&z, i)?;
            let exact = inv.as_matrix().row(i).transpose();
            worst = worst.max((row - &exact).norm() / exact.norm());
        }
    }
    Ok(worst)
}

fn ols(st: &mut Stats, seed: u64) -> Result<bool> {
    let worst = ols_mismatch(seed ^ 0x015, 20, 50)?;
    st.push("max_rel_row_error", worst);
    Ok(worst <= 1e-10)
}

/// Reconstruction and dense-Cholesky agreement of the exact block factor on
/// `count` random SPD matrices (`dim ≤ 40`, `q ≤ 4`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockCholeskyCheck {
    pub max_reconstruction_error: f64,
    pub max_factor_error: f64,
    pub max_star_reconstruction_error: f64,
}

impl BlockCholeskyCheck {
    pub fn holds(&self) -> bool {
        self.max_reconstruction_error <= 1e-8 && self.max_factor_error <= 1e-8 && self.max_star_reconstruction_error <= 1e-8
    }
}

/// `U` with `U Uᵀ = Ω` and `U` upper triangular, by factoring the reversal.
pub fn reverse_cholesky_upper(omega: &DenseSymMatrix) -> Result<DMatrix<f64>> {
    let n = omega.dim();
    let rev: Vec<usize> = (0..n).rev().collect();
    let l = cholesky_lower(&omega.permuted(&rev)?)?;
    let l = l.as_matrix();
    Ok(DMatrix::from_fn(n, n, |i, j| l[(n - 1 - i, n - 1 - j)]))
}

pub fn block_cholesky_corpus(seed: u64, count: usize) -> Result<BlockCholeskyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BlockCholeskyCheck {
        max_reconstruction_error: 0.0,
        max_factor_error: 0.0,
        max_star_reconstruction_error: 0.0,
    };
    for _ in 0..count {
        let q = rng.random_range(1..=4);
        let mut sizes: Vec<usize> = (0..q).map(|_| rng.random_range(1..=10)).collect();
        if rng.random_bool(0.25) && q > 2 {
            sizes[1] = 0;
        }
        let dim: usize = sizes.iter().sum();
        let kappa = 10f64.powf(rng.random_range(0.0..4.0));
        let omega = random_spd(&mut rng, dim, kappa);
        let levels = LevelPartition::from_sizes(sizes)?;
        let d = rng.random_range(1..=3);
        let nrm = operator_norm(omega.as_matrix());
        let f = exact_block_factor(&omega, &levels, d)?;
        let recon = operator_norm(&(f.reconstruct().as_matrix() - omega.as_matrix())) / nrm;
        let u = reverse_cholesky_upper(&omega)?;
        let ferr = operator_norm(&(f.to_dense_upper() - &u)) / operator_norm(&u);
        let star = exact_block_factor_star(&omega, &levels, d)?;
        let srecon = operator_norm(&(star.reconstruct().as_matrix() - omega.as_matrix())) / nrm;
        out.max_reconstruction_error = out.max_reconstruction_error.max(recon);
        out.max_factor_error = out.max_factor_error.max(ferr);
        out.max_star_reconstruction_error = out.max_star_reconstruction_error.max(srecon);
    }
    Ok(out)
}

/// `κ(B⁽ᵏ⁾)` for every level of size > 1 on the `q`-level nested grid.
pub fn diagonal_block_conditions(q: usize, s: u32) -> Result<Vec<(usize, f64)>> {
    let ht = nested_grid_truth(q, s)?;
    let scales = ScaleEstimates::exact(&ht.truth.omega, &ht.levels, 1)?;
    scales
        .scales
        .iter()
        .filter(|sc| sc.b.dim() > 1)
        .map(|sc| Ok((sc.level, condition_number(&sc.b)?)))
        .collect()
}

fn block_cholesky(st: &mut Stats, seed: u64) -> Result<bool> {
    let c = block_cholesky_corpus(seed ^ 0xC401, 50)?;
    st.push("max_reconstruction_error", c.max_reconstruction_error);
    st.push("max_factor_error", c.max_factor_error);
    st.push("max_star_reconstruction_error", c.max_star_reconstruction_error);
    let kappas: Vec<f64> = diagonal_block_conditions(4, 1)?.into_iter().map(|(_, k)| k).collect();
    let spread = ratio_spread(&kappas);
    st.push("b_condition_spread", spread);
    Ok(c.holds() && spread <= 10.0)
}

/// Largest `|A_ij − A_ji|` of an estimate on the `p = 12`, `d = 1` lattice.
pub fn estimate_asymmetry(seed: u64, unsymmetrized: bool) -> Result<f64> {
    let truth = build_lattice_precision(12, 1, 1)?;
    let shape = LatticeShape::new(1, 12)?;
    let z = sample(&truth, 400, seed)?;
    let m = if unsymmetrized {
        let scheme = BlockScheme::new(shape, 2)?;
        let locals = compute_locals(CovarianceSource::Samples(&z), &scheme)?;
        assemble_unsymmetrized(&locals, &scheme)?
    } else {
        let config = EstimatorConfig {
            fallback_enabled: false,
            ..EstimatorConfig::with_block_size(2)
        };
        estimate_precision(&z, shape, &config)?.matrix.into_inner()
    };
    Ok((&m - m.transpose()).abs().max())
}

fn symmetry(st: &mut Stats, options: &VerifyOptions) -> Result<bool> {
    let asym = estimate_asymmetry(options.seed, options.inject_asymmetric)?;
    st.push("max_asymmetry", asym);
    Ok(asym == 0.0)
}
