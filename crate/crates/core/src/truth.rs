//! Ground-truth models, exact Gaussian sampling and empirical checks of the
//! decay and conditioning structure of their precision matrices.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::LatticeShape;
use crate::linalg::{cholesky_lower, condition_number, spd_inverse, spectral_norm, DenseSymMatrix, SampleMatrix};
use crate::matching::SiteCloud;

/// Largest truth dimension built densely.
pub const MAX_TRUTH_DIM: usize = 4096;

/// Values below this are treated as round-off when fitting decay profiles.
pub const PROFILE_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelTag {
    LaplacianPower,
    GreenRestriction,
    Matern,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::LaplacianPower => "laplacian_power",
            ModelTag::GreenRestriction => "green_restriction",
            ModelTag::Matern => "matern",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "laplacian_power" | "laplacian" => Ok(ModelTag::LaplacianPower),
            "green_restriction" | "green" => Ok(ModelTag::GreenRestriction),
            "matern" => Ok(ModelTag::Matern),
            other => Err(Error::Parse(format!("unknown model '{other}'"))),
        }
    }
}

/// Where the observation points live.
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Lattice(LatticeShape),
    Sites(SiteCloud),
}

impl Geometry {
    pub fn d(&self) -> usize {
        match self {
            Geometry::Lattice(s) => s.d(),
            Geometry::Sites(c) => c.d(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Geometry::Lattice(s) => s.n_vertices(),
            Geometry::Sites(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, i: usize) -> Vec<f64> {
        match self {
            Geometry::Lattice(s) => s.position(i),
            Geometry::Sites(c) => c.site(i).to_vec(),
        }
    }

    /// Mesh size: `1/(p+1)` on a lattice, the fill distance for sites.
    pub fn mesh(&self) -> f64 {
        match self {
            Geometry::Lattice(s) => 1.0 / (s.p() + 1) as f64,
            Geometry::Sites(c) => c.h(),
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.position(i), self.position(j));
        a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub sigma: DenseSymMatrix,
    pub omega: DenseSymMatrix,
    pub kappa: f64,
    pub geometry: Geometry,
    pub model_tag: ModelTag,
    /// Model parameters as `(name, value)` pairs, for metadata headers.
    pub params: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    fn from_omega(omega: DenseSymMatrix, geometry: Geometry, tag: ModelTag, params: Vec<(String, String)>) -> Result<Self> {
        let sigma = spd_inverse(&omega)?;
        let kappa = condition_number(&omega)?;
        Ok(Self {
            sigma,
            omega,
            kappa,
            geometry,
            model_tag: tag,
            params,
        })
    }

    fn from_sigma(sigma: DenseSymMatrix, geometry: Geometry, tag: ModelTag, params: Vec<(String, String)>) -> Result<Self> {
        let omega = spd_inverse(&sigma)?;
        let kappa = condition_number(&omega)?;
        Ok(Self {
            sigma,
            omega,
            kappa,
            geometry,
            model_tag: tag,
            params,
        })
    }

    /// Same model with rows and columns reordered (`perm[new] = old`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let geometry = match &self.geometry {
            Geometry::Sites(c) => Geometry::Sites(c.subset(perm)?),
            Geometry::Lattice(s) => {
                let cloud = crate::matching::lattice_cloud(*s);
                Geometry::Sites(cloud.subset(perm)?)
            }
        };
        Ok(Self {
            sigma: self.sigma.permuted(perm)?,
            omega: self.omega.permuted(perm)?,
            kappa: self.kappa,
            geometry,
            model_tag: self.model_tag,
            params: self.params.clone(),
        })
    }
}

fn check_capacity(requested: usize) -> Result<()> {
    if requested > MAX_TRUTH_DIM {
        return Err(Error::CapacityExceeded {
            requested,
            cap: MAX_TRUTH_DIM,
        });
    }
    Ok(())
}

/// `(p+1)²` times the `(2d+1)`-point Dirichlet Laplacian stencil.
pub fn dirichlet_laplacian(shape: LatticeShape) -> Result<DenseSymMatrix> {
    check_capacity(shape.n_vertices())?;
    let n = shape.n_vertices();
    let (p, d) = (shape.p(), shape.d());
    let scale = ((p + 1) * (p + 1)) as f64;
    let mut a = DMatrix::zeros(n, n);
    for v in 0..n {
        a[(v, v)] = 2.0 * d as f64 * scale;
        let c = shape.coords(v);
        for axis in 0..d {
            if c[axis] + 1 < p {
                let mut nb = c.clone();
                nb[axis] += 1;
                let w = shape.flat(&nb);
                a[(v, w)] = -scale;
                a[(w, v)] = -scale;
            }
        }
    }
    DenseSymMatrix::new(a)
}

fn sym_power(a: &DenseSymMatrix, s: u32) -> Result<DenseSymMatrix> {
    let mut out = a.as_matrix().clone();
    for _ in 1..s {
        out = &out * a.as_matrix();
    }
    DenseSymMatrix::symmetrize(out)
}

/// `h^d A^s` with `h = 1/(p+1)`: the lattice operator at mesh `h`.
pub fn lattice_operator(shape: LatticeShape, s: u32) -> Result<DenseSymMatrix> {
    if s == 0 {
        return Err(Error::invalid("smoothness s must be at least 1"));
    }
    let h = 1.0 / (shape.p() + 1) as f64;
    Ok(sym_power(&dirichlet_laplacian(shape)?, s)?.scaled(h.powi(shape.d() as i32)))
}

/// Laplacian-power truth on the lattice `[p]^d`.
pub fn build_lattice_precision(p: usize, d: usize, s: u32) -> Result<GroundTruth> {
    let shape = LatticeShape::new(d, p)?;
    let omega = lattice_operator(shape, s)?;
    GroundTruth::from_omega(
        omega,
        Geometry::Lattice(shape),
        ModelTag::LaplacianPower,
        vec![
            ("d".into(), d.to_string()),
            ("p".into(), p.to_string()),
            ("s".into(), s.to_string()),
        ],
    )
}

/// Fine-grid vertex at each site; every site must lie on the fine grid.
pub fn snap_to_fine_grid(cloud: &SiteCloud, fine: LatticeShape) -> Result<Vec<usize>> {
    let n1 = (fine.p() + 1) as f64;
    cloud
        .sites()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let coords: Option<Vec<usize>> = x
                .iter()
                .map(|&v| {
                    let t = v * n1;
                    let r = t.round();
                    ((t - r).abs() <= 1e-9 && r >= 1.0 && r <= fine.p() as f64).then(|| r as usize - 1)
                })
                .collect();
            coords
                .map(|c| fine.flat(&c))
                .ok_or_else(|| Error::invalid(format!("site {i} = {x:?} is not a fine-grid node")))
        })
        .collect()
}

/// Sites snapped to the nearest node `(c+1)/(fine_p+1)` of a fine grid.
pub fn snap_cloud(cloud: &SiteCloud, fine_p: usize) -> Result<SiteCloud> {
    let n1 = (fine_p + 1) as f64;
    let sites = cloud
        .sites()
        .iter()
        .map(|x| {
            x.iter()
                .map(|&v| ((v * n1).round().clamp(1.0, fine_p as f64)) / n1)
                .collect()
        })
        .collect();
    crate::matching::measure_cloud(sites, cloud.d())
}

/// Covariance of the fine-grid field `(h^d A^s)⁻¹` restricted to the sites.
pub fn build_green_restriction(fine_p: usize, d: usize, s: u32, cloud: &SiteCloud) -> Result<GroundTruth> {
    if cloud.d() != d {
        return Err(Error::invalid("cloud dimension does not match d"));
    }
    let fine = LatticeShape::new(d, fine_p)?;
    check_capacity(fine.n_vertices())?;
    let nodes = snap_to_fine_grid(cloud, fine)?;
    let fine_sigma = spd_inverse(&lattice_operator(fine, s)?)?;
    let sigma = fine_sigma.principal(&nodes)?;
    GroundTruth::from_sigma(
        sigma,
        Geometry::Sites(cloud.clone()),
        ModelTag::GreenRestriction,
        vec![
            ("d".into(), d.to_string()),
            ("fine_p".into(), fine_p.to_string()),
            ("s".into(), s.to_string()),
            ("m".into(), cloud.len().to_string()),
        ],
    )
}

/// Matérn smoothness `ν ∈ {1/2, 3/2, 5/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(&self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(MaternNu::Half),
            1.5 => Ok(MaternNu::ThreeHalves),
            2.5 => Ok(MaternNu::FiveHalves),
            other => Err(Error::invalid(format!("Matern nu={other} must be 0.5, 1.5 or 2.5"))),
        }
    }

    /// Correlation at distance `r`.
    pub fn correlation(&self, r: f64, rho: f64) -> f64 {
        let t = r / rho;
        match self {
            MaternNu::Half => (-t).exp(),
            MaternNu::ThreeHalves => {
                let a = 3f64.sqrt() * t;
                (1.0 + a) * (-a).exp()
            }
            MaternNu::FiveHalves => {
                let a = 5f64.sqrt() * t;
                (1.0 + a + 5.0 * t * t / 3.0) * (-a).exp()
            }
        }
    }
}

/// Matérn covariance at the sites. A demonstration model: it does not come
/// from a Dirichlet problem on the unit cube, so screening is weaker near the
/// boundary.
pub fn matern_covariance(cloud: &SiteCloud, nu: MaternNu, rho: f64, sigma2: f64) -> Result<GroundTruth> {
    if !(rho > 0.0 && sigma2 > 0.0) {
        return Err(Error::invalid("Matern needs rho > 0 and sigma2 > 0"));
    }
    check_capacity(cloud.len())?;
    let sigma = DenseSymMatrix::from_upper_fn(cloud.len(), |i, j| {
        if i == j {
            sigma2
        } else {
            sigma2 * nu.correlation(cloud.distance(i, j), rho)
        }
    })?;
    GroundTruth::from_sigma(
        sigma,
        Geometry::Sites(cloud.clone()),
        ModelTag::Matern,
        vec![
            ("nu".into(), nu.value().to_string()),
            ("rho".into(), rho.to_string()),
            ("sigma2".into(), sigma2.to_string()),
            ("caveat".into(), "not a Dirichlet model; boundary screening is weaker".into()),
        ],
    )
}

/// `n` draws of `N(0, Σ)`: row `k` is `L g_k` where `g_k` comes from stream
/// `k` of a ChaCha8 generator keyed by `seed`.
pub fn sample_gaussian(sigma: &DenseSymMatrix, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::invalid("number of samples must be at least 1"));
    }
    let l = cholesky_lower(sigma)?;
    let dim = sigma.dim();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..dim)
                .map(move |_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
        })
        .collect();
    let g = DMatrix::from_row_slice(n, dim, &rows);
    SampleMatrix::new(g * l.as_matrix().transpose())
}

pub fn sample(truth: &GroundTruth, n: usize, seed: u64) -> Result<SampleMatrix> {
    sample_gaussian(&truth.sigma, n, seed)
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of `ln y` against `x` over the points with `y ≥ floor`.
pub fn fit_log_linear(points: &[(f64, f64)], floor: f64) -> Option<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(_, y)| *y >= floor && y.is_finite())
        .map(|&(x, y)| (x, y.ln()))
        .unzip();
    fit_line(&xs, &ys)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Maximum normalized off-diagonal precision per distance bin.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    /// `(bin, value)` for every bin that contains at least one pair.
    pub bins: Vec<(usize, f64)>,
    /// Log-linear fit over the bins at or above [`PROFILE_FLOOR`].
    pub fit: Option<LinearFit>,
}

impl DecayProfile {
    fn from_bins(bins: Vec<(usize, f64)>) -> Self {
        let pts: Vec<(f64, f64)> = bins.iter().map(|&(b, v)| (b as f64, v)).collect();
        let fit = fit_log_linear(&pts, PROFILE_FLOOR);
        Self { bins, fit }
    }
}

/// Bins pairs `i ≠ j` by `round(‖x_i − x_j‖ / h)` and records
/// `max |Ω_ij| / √(Ω_ii Ω_jj)` per bin.
pub fn screening_profile(omega: &DenseSymMatrix, geometry: &Geometry) -> DecayProfile {
    let n = omega.dim();
    let h = geometry.mesh();
    let positions: Vec<Vec<f64>> = (0..n).map(|i| geometry.position(i)).collect();
    let mut best: std::collections::BTreeMap<usize, f64> = Default::default();
    for i in 0..n {
        for j in (i + 1)..n {
            let r: f64 = positions[i]
                .iter()
                .zip(&positions[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let bin = (r / h).round() as usize;
            let v = omega.get(i, j).abs() / (omega.get(i, i) * omega.get(j, j)).sqrt();
            let e = best.entry(bin).or_insert(0.0);
            *e = e.max(v);
        }
    }
    DecayProfile::from_bins(best.into_iter().collect())
}

/// `max_t Σ_{‖t′−t‖₁ ≥ k} |ω(t,t′)| / ‖Ω‖` for `k = 1, …, d(p−1)`.
pub fn l1_tail_profile(omega: &DenseSymMatrix, shape: LatticeShape) -> Result<DecayProfile> {
    let n = shape.n_vertices();
    if omega.dim() != n {
        return Err(Error::invalid("precision dimension does not match lattice"));
    }
    let norm = spectral_norm(omega)?;
    let kmax = shape.d() * (shape.p() - 1);
    let coords: Vec<Vec<usize>> = (0..n).map(|v| shape.coords(v)).collect();
    let mut worst = vec![0.0_f64; kmax + 2];
    for t in 0..n {
        // mass[k] = Σ over t′ at ℓ¹ distance exactly k.
        let mut mass = vec![0.0; kmax + 2];
        for tp in 0..n {
            let k: usize = coords[t].iter().zip(&coords[tp]).map(|(a, b)| a.abs_diff(*b)).sum();
            mass[k] += omega.get(t, tp).abs();
        }
        let mut tail = 0.0;
        for k in (1..=kmax).rev() {
            tail += mass[k];
            worst[k] = worst[k].max(tail);
        }
    }
    Ok(DecayProfile::from_bins((1..=kmax).map(|k| (k, worst[k] / norm)).collect()))
}

/// Eigenvalue extremes and diagonal range of a precision matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub diag_min: f64,
    pub diag_max: f64,
}

pub fn spectrum_summary(omega: &DenseSymMatrix) -> SpectrumSummary {
    let ev = crate::linalg::symmetric_eigenvalues(omega);
    let diag: Vec<f64> = (0..omega.dim()).map(|i| omega.get(i, i)).collect();
    SpectrumSummary {
        lambda_min: ev[0],
        lambda_max: ev[ev.len() - 1],
        diag_min: diag.iter().cloned().fold(f64::INFINITY, f64::min),
        diag_max: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}
