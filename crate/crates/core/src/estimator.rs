//! Block-local precision estimator on the lattice.
//!
//! For every block `j` the sample covariance on the window `W_{j,2}` is
//! inverted once; the sub-blocks `B_j × B_{j′}` with `‖j − j′‖_∞ ≤ 1` of that
//! inverse are the local estimates `T_{jj′}`. They are placed into a
//! band-limited matrix `Ω̃`, which is then symmetrized.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{restrict_matrix, BlockScheme, LatticeShape};
use crate::linalg::{operator_norm, sample_covariance, spd_inverse, DenseSymMatrix, SampleMatrix};

/// Neighborhood radius of the windows that are inverted.
pub const WINDOW_RADIUS: usize = 2;

/// Where second moments come from: observed samples, or an exact covariance
/// (the infinite-sample limit, which isolates the deterministic bias).
#[derive(Clone, Copy, Debug)]
pub enum CovarianceSource<'a> {
    Samples(&'a SampleMatrix),
    Population(&'a DenseSymMatrix),
}

impl CovarianceSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceSource::Samples(z) => z.dim(),
            CovarianceSource::Population(s) => s.dim(),
        }
    }

    /// `None` for population input.
    pub fn n_samples(&self) -> Option<usize> {
        match self {
            CovarianceSource::Samples(z) => Some(z.n_samples()),
            CovarianceSource::Population(_) => None,
        }
    }

    /// Covariance restricted to `vertices` (ascending).
    pub fn window(&self, vertices: &[usize]) -> Result<DenseSymMatrix> {
        match self {
            CovarianceSource::Samples(z) => z.covariance_on(vertices),
            CovarianceSource::Population(s) => s.principal(vertices),
        }
    }

    pub fn full(&self) -> Result<DenseSymMatrix> {
        match self {
            CovarianceSource::Samples(z) => sample_covariance(z),
            CovarianceSource::Population(s) => Ok((*s).clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Fixed block width; bypasses the `⌈ln(Nκ)⌉` rule.
    pub b_override: Option<usize>,
    /// Condition number used by the block-size rule. Defaults to `p^d`.
    pub kappa_hint: Option<f64>,
    /// Invert the full sample covariance when `p ≤ ln(N·κ)`.
    pub fallback_enabled: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            b_override: None,
            kappa_hint: None,
            fallback_enabled: true,
        }
    }
}

impl EstimatorConfig {
    pub fn with_block_size(b: usize) -> Self {
        Self {
            b_override: Some(b),
            ..Self::default()
        }
    }

    pub fn kappa_for(&self, shape: LatticeShape) -> f64 {
        self.kappa_hint.unwrap_or(shape.n_vertices() as f64)
    }

    fn validate(&self, shape: LatticeShape) -> Result<()> {
        if let Some(k) = self.kappa_hint {
            if !(k >= 1.0) {
                return Err(Error::invalid(format!("kappa_hint {k} must be >= 1")));
            }
        }
        if let Some(b) = self.b_override {
            if b < 1 || b > shape.p() {
                return Err(Error::invalid(format!(
                    "block width {b} must satisfy 1 <= b <= p={}",
                    shape.p()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatePath {
    Blockwise,
    FallbackFullInverse,
}

impl EstimatePath {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatePath::Blockwise => "blockwise",
            EstimatePath::FallbackFullInverse => "fallback_full_inverse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrecisionEstimate {
    pub matrix: DenseSymMatrix,
    pub scheme: BlockScheme,
    pub path: EstimatePath,
}

/// Local estimates keyed by `(j, j′)` flat block indices.
pub type LocalEstimates = BTreeMap<(usize, usize), DMatrix<f64>>;

/// `⌈ln(N·κ)⌉`, at least 1.
pub fn choose_block_size(n: usize, kappa: f64) -> usize {
    let v = ((n as f64) * kappa.max(1.0)).ln().ceil();
    if v.is_finite() && v >= 1.0 {
        v as usize
    } else {
        1
    }
}

/// `T_{jj′}` for a single pair.
pub fn local_estimate(
    source: CovarianceSource<'_>,
    scheme: &BlockScheme,
    j: usize,
    jp: usize,
) -> Result<DMatrix<f64>> {
    if jp >= scheme.n_blocks() {
        return Err(Error::invalid(format!("block {jp} out of range")));
    }
    if scheme.block_distance(j, jp) > 1 {
        return Err(Error::invalid(format!("blocks {j} and {jp} are not adjacent")));
    }
    let row = local_row(source, scheme, j)?;
    Ok(row
        .into_iter()
        .find(|(k, _)| *k == jp)
        .map(|(_, t)| t)
        .expect("adjacent block lies in the window"))
}

/// All `T_{jj′}` with `‖j − j′‖_∞ ≤ 1`, from one window inversion.
fn local_row(
    source: CovarianceSource<'_>,
    scheme: &BlockScheme,
    j: usize,
) -> Result<Vec<(usize, DMatrix<f64>)>> {
    let window = scheme.neighborhood(j, WINDOW_RADIUS)?;
    let local_cov = source.window(&window.vertices)?;
    let inv = spd_inverse(&local_cov).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::LocalSingular {
            block: scheme.block_coords(j),
            window: window.vertices.len(),
            n_samples: source.n_samples().unwrap_or(0),
        },
        other => other,
    })?;
    let position = |v: usize| window.vertices.binary_search(&v).expect("vertex in window");
    let rows: Vec<usize> = scheme.block_vertices(j).iter().map(|&v| position(v)).collect();
    let adjacent = scheme.neighborhood(j, 1)?;
    Ok(adjacent
        .blocks
        .iter()
        .map(|&jp| {
            let cols: Vec<usize> = scheme.block_vertices(jp).iter().map(|&v| position(v)).collect();
            let t = restrict_matrix(inv.as_matrix(), &rows, &cols).expect("in range");
            (jp, t)
        })
        .collect())
}

/// Local estimates for every in-band block pair. Windows are processed in
/// parallel; the result does not depend on scheduling.
pub fn compute_locals(source: CovarianceSource<'_>, scheme: &BlockScheme) -> Result<LocalEstimates> {
    if source.dim() != scheme.shape().n_vertices() {
        return Err(Error::invalid(format!(
            "covariance dimension {} does not match lattice size {}",
            source.dim(),
            scheme.shape().n_vertices()
        )));
    }
    let rows: Vec<Vec<(usize, DMatrix<f64>)>> = (0..scheme.n_blocks())
        .into_par_iter()
        .map(|j| local_row(source, scheme, j))
        .collect::<Result<_>>()?;
    let mut out = LocalEstimates::new();
    for (j, row) in rows.into_iter().enumerate() {
        for (jp, t) in row {
            out.insert((j, jp), t);
        }
    }
    Ok(out)
}

/// `Ω̃`: local blocks in the band, zeros elsewhere.
pub fn assemble_unsymmetrized(locals: &LocalEstimates, scheme: &BlockScheme) -> Result<DMatrix<f64>> {
    let n = scheme.shape().n_vertices();
    let mut omega = DMatrix::zeros(n, n);
    let mut used = 0;
    for j in 0..scheme.n_blocks() {
        let rows = scheme.block_vertices(j);
        for jp in scheme.neighborhood(j, 1)?.blocks {
            let t = locals
                .get(&(j, jp))
                .ok_or_else(|| Error::invalid(format!("missing local estimate for blocks ({j}, {jp})")))?;
            let cols = scheme.block_vertices(jp);
            if t.nrows() != rows.len() || t.ncols() != cols.len() {
                return Err(Error::invalid(format!("local estimate ({j}, {jp}) has wrong shape")));
            }
            for (a, &r) in rows.iter().enumerate() {
                for (c, &col) in cols.iter().enumerate() {
                    omega[(r, col)] = t[(a, c)];
                }
            }
            used += 1;
        }
    }
    if used != locals.len() {
        return Err(Error::invalid("local estimates contain out-of-band pairs"));
    }
    Ok(omega)
}

/// `Ω̂ = (Ω̃ + Ω̃ᵀ)/2`.
pub fn assemble_global(locals: &LocalEstimates, scheme: &BlockScheme) -> Result<PrecisionEstimate> {
    let tilde = assemble_unsymmetrized(locals, scheme)?;
    Ok(PrecisionEstimate {
        matrix: DenseSymMatrix::symmetrize(tilde)?,
        scheme: scheme.clone(),
        path: EstimatePath::Blockwise,
    })
}

/// Precision estimate from samples observed on `shape`.
pub fn estimate_precision(
    samples: &SampleMatrix,
    shape: LatticeShape,
    config: &EstimatorConfig,
) -> Result<PrecisionEstimate> {
    estimate_precision_from(CovarianceSource::Samples(samples), shape, config)
}

/// As [`estimate_precision`], for either samples or an exact covariance.
/// Population input never takes the fallback path and needs `b_override`.
pub fn estimate_precision_from(
    source: CovarianceSource<'_>,
    shape: LatticeShape,
    config: &EstimatorConfig,
) -> Result<PrecisionEstimate> {
    config.validate(shape)?;
    if source.dim() != shape.n_vertices() {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match p^d = {}",
            source.dim(),
            shape.n_vertices()
        )));
    }
    let kappa = config.kappa_for(shape);
    let (b, fallback) = match source.n_samples() {
        Some(n) => {
            let fallback = config.fallback_enabled && (shape.p() as f64) <= ((n as f64) * kappa).ln();
            let b = config
                .b_override
                .unwrap_or_else(|| choose_block_size(n, kappa).min(shape.p()));
            (b, fallback)
        }
        None => {
            let b = config
                .b_override
                .ok_or_else(|| Error::invalid("population input requires an explicit block width"))?;
            (b, false)
        }
    };
    let scheme = BlockScheme::new(shape, b)?;
    if fallback {
        return Ok(PrecisionEstimate {
            matrix: spd_inverse(&source.full()?)?,
            scheme,
            path: EstimatePath::FallbackFullInverse,
        });
    }
    let locals = compute_locals(source, &scheme)?;
    assemble_global(&locals, &scheme)
}

/// Row `i` of the precision matrix by ordinary least squares: regress
/// column `i` on the others, then read off `(N/‖ε̂‖², −N β̂ᵀ/‖ε̂‖²)`.
pub fn ols_plugin_row(samples: &SampleMatrix, i: usize) -> Result<DVector<f64>> {
    let z = samples.as_matrix();
    let (n, dim) = (z.nrows(), z.ncols());
    if i >= dim {
        return Err(Error::invalid(format!("column {i} out of range")));
    }
    let y = z.column(i).into_owned();
    let others: Vec<usize> = (0..dim).filter(|&c| c != i).collect();
    let (beta, resid) = if others.is_empty() {
        (DVector::zeros(0), y.clone())
    } else {
        let x = z.select_columns(&others);
        if n < others.len() {
            return Err(Error::NotPositiveDefinite { pivot: n });
        }
        let qr = x.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if let Some(k) = (0..r.ncols()).find(|&k| !(r[(k, k)].abs() > 1e-12 * scale)) {
            return Err(Error::NotPositiveDefinite { pivot: k });
        }
        let qty = qr.q().tr_mul(&y);
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
        let resid = &y - &x * &beta;
        (beta, resid)
    };
    let rss = resid.norm_squared();
    if !(rss > 1e-24 * y.norm_squared()) {
        return Err(Error::NotPositiveDefinite { pivot: i });
    }
    let scale = n as f64 / rss;
    let mut row = DVector::zeros(dim);
    row[i] = scale;
    for (k, &c) in others.iter().enumerate() {
        row[c] = -scale * beta[k];
    }
    Ok(row)
}

/// Quantities in the assembly inequality
/// `‖Ω̃ − Ω‖ ≤ 3^d · max ‖T_{jj′} − Ω_{jj′}‖ + ‖Ω₂‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyCheck {
    /// `‖Ω̃ − Ω‖`.
    pub assembled_error: f64,
    /// `max ‖T_{jj′} − Ω_{jj′}‖` over in-band pairs.
    pub max_block_error: f64,
    /// `‖Ω₂‖`, the out-of-band part of `Ω`.
    pub remainder_norm: f64,
    pub bound: f64,
}

impl AssemblyCheck {
    pub fn holds(&self) -> bool {
        self.assembled_error <= self.bound * (1.0 + 1e-10) + 1e-12
    }
}

/// `Ω` with every in-band block zeroed.
pub fn out_of_band_part(omega: &DenseSymMatrix, scheme: &BlockScheme) -> DMatrix<f64> {
    let n = omega.dim();
    DMatrix::from_fn(n, n, |r, c| {
        if scheme.block_distance(scheme.block_of(r), scheme.block_of(c)) > 1 {
            omega.get(r, c)
        } else {
            0.0
        }
    })
}

/// Largest `‖T_{jj′} − Ω_{jj′}‖` over all local estimates.
pub fn max_local_error(locals: &LocalEstimates, scheme: &BlockScheme, omega: &DenseSymMatrix) -> f64 {
    locals
        .iter()
        .map(|(&(j, jp), t)| {
            let exact = restrict_matrix(
                omega.as_matrix(),
                scheme.block_vertices(j),
                scheme.block_vertices(jp),
            )
            .expect("in range");
            operator_norm(&(t - exact))
        })
        .fold(0.0, f64::max)
}

pub fn assembly_check(locals: &LocalEstimates, scheme: &BlockScheme, omega: &DenseSymMatrix) -> Result<AssemblyCheck> {
    let tilde = assemble_unsymmetrized(locals, scheme)?;
    let assembled_error = operator_norm(&(tilde - omega.as_matrix()));
    let max_block_error = max_local_error(locals, scheme, omega);
    let remainder_norm = operator_norm(&out_of_band_part(omega, scheme));
    let factor = 3f64.powi(scheme.shape().d() as i32);
    Ok(AssemblyCheck {
        assembled_error,
        max_block_error,
        remainder_norm,
        bound: factor * max_block_error + remainder_norm,
    })
}
