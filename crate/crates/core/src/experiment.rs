//! Configured experiments: truth generation, estimation over a grid of sizes,
//! sample counts and seeds, and CSV reporting.
//!
//! Configuration is a flat `key=value` text (one pair per line, `#` comments)
//! merged with command-line overrides, later pairs winning.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{estimate_precision, CovarianceSource, EstimatePath, EstimatorConfig};
use crate::factor::{exact_block_factor, exact_block_factor_star, estimate_scales, CholeskyConfig, FactorKind, HierarchicalTruth, ScalePath};
use crate::io::{format_cloud, format_matrix, truth_metadata, write_matrix};
use crate::lattice::LatticeShape;
use crate::linalg::operator_norm;
use crate::matching::{embed_and_estimate, jittered_grid_cloud, lattice_cloud, EmbedOptions, SiteCloud};
use crate::truth::{
    build_green_restriction, build_lattice_precision, log_log_slope, matern_covariance, sample, snap_cloud, GroundTruth,
    MaternNu, ModelTag,
};
use crate::verify::{run_suite, Suite, SuiteReport, VerifyOptions};

/// Version tag written in the first line of every results CSV.
pub const CSV_SCHEMA: &str = "# schema=gp-precision-results/1";

pub const CSV_COLUMNS: [&str; 13] = [
    "experiment_id",
    "model_tag",
    "d",
    "p_or_m",
    "s",
    "n",
    "seed",
    "b",
    "path",
    "rel_spectral_error",
    "kappa",
    "wall_ms",
    "error",
];

/// Jitter of scattered clouds, relative to the grid spacing.
pub const CLOUD_JITTER: f64 = 0.3;
/// Matérn parameters used by the `matern` model.
pub const MATERN_NU: MaternNu = MaternNu::ThreeHalves;
pub const MATERN_RHO: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorMode {
    Precision,
    Cholesky,
    CholeskyStar,
}

impl FactorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FactorMode::Precision => "precision",
            FactorMode::Cholesky => "cholesky",
            FactorMode::CholeskyStar => "cholesky-star",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "precision" => Ok(FactorMode::Precision),
            "cholesky" => Ok(FactorMode::Cholesky),
            "cholesky-star" => Ok(FactorMode::CholeskyStar),
            _ => Err(Error::invalid(format!("factor: unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelTag,
    pub d: usize,
    /// Lattice sizes, or sites per axis in scattered mode.
    pub p: Vec<usize>,
    pub s: u32,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    pub c1: f64,
    pub b: Option<usize>,
    pub kappa: Option<f64>,
    pub factor: FactorMode,
    pub scattered: bool,
    /// Seed of the scattered cloud, shared by all sample seeds.
    pub cloud_seed: u64,
    pub out: Option<PathBuf>,
    /// Directory receiving estimate and truth matrices per row.
    pub matrices: Option<PathBuf>,
    pub timing: bool,
    pub suites: Vec<Suite>,
    pub inject_asymmetric: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelTag::LaplacianPower,
            d: 1,
            p: vec![40],
            s: 1,
            n: vec![1000],
            seeds: vec![1],
            c1: 0.5,
            b: None,
            kappa: None,
            factor: FactorMode::Precision,
            scattered: false,
            cloud_seed: 0,
            out: None,
            matrices: None,
            timing: false,
            suites: Suite::ALL.to_vec(),
            inject_asymmetric: false,
        }
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{key}: cannot parse {t:?}")))
        })
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::invalid(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::invalid(format!("{key}: expected true or false, got {v:?}"))),
    }
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {l:?}")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => self.model = ModelTag::parse(v.trim())?,
            "d" => self.d = one(key, v)?,
            "p" | "m" => self.p = list(key, v)?,
            "s" => self.s = one(key, v)?,
            "n" => self.n = list(key, v)?,
            "seeds" => self.seeds = list(key, v)?,
            "c1" => self.c1 = one(key, v)?,
            "b" => self.b = Some(one(key, v)?),
            "kappa" => self.kappa = Some(one(key, v)?),
            "factor" => self.factor = FactorMode::parse(v.trim())?,
            "scattered" => self.scattered = flag(key, v)?,
            "cloud_seed" => self.cloud_seed = one(key, v)?,
            "out" => self.out = Some(PathBuf::from(v.trim())),
            "matrices" => self.matrices = Some(PathBuf::from(v.trim())),
            "timing" => self.timing = flag(key, v)?,
            "suite" => {
                self.suites = v.split(',').map(|t| Suite::parse(t.trim())).collect::<Result<_>>()?;
            }
            "inject_asymmetric" => self.inject_asymmetric = flag(key, v)?,
            _ => return Err(Error::invalid(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults, then `pairs` in order, then validation.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads an optional config file and applies `overrides` after it.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match file {
            Some(f) => parse_pairs(&fs::read_to_string(f)?)?,
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::invalid(format!("d: must be 1, 2 or 3, got {}", self.d)));
        }
        if self.s == 0 {
            return Err(Error::invalid("s: must be at least 1, got 0"));
        }
        if self.p.is_empty() || self.p.contains(&0) {
            return Err(Error::invalid("p: list must be nonempty with positive entries"));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::invalid("n: list must be nonempty with positive entries"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds: list must be nonempty"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::invalid("seeds: entries must be distinct"));
        }
        if !(self.c1 > 0.0) {
            return Err(Error::invalid(format!("c1: must be positive, got {}", self.c1)));
        }
        if self.b == Some(0) {
            return Err(Error::invalid("b: must be at least 1"));
        }
        if let Some(k) = self.kappa {
            if !(k >= 1.0) {
                return Err(Error::invalid(format!("kappa: must be >= 1, got {k}")));
            }
        }
        if self.suites.is_empty() {
            return Err(Error::invalid("suite: list must be nonempty"));
        }
        if self.scattered && self.model == ModelTag::LaplacianPower {
            return Err(Error::invalid("model: laplacian is defined on the lattice only; use green or matern with scattered"));
        }
        Ok(())
    }

    fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            b_override: self.b,
            kappa_hint: self.kappa,
            fallback_enabled: true,
        }
    }

    fn embed(&self) -> EmbedOptions {
        EmbedOptions {
            c1: self.c1,
            ..EmbedOptions::default()
        }
    }
}

/// Sites of one grid point: the lattice itself or a jittered cloud.
pub fn sites_for(config: &ExperimentConfig, p: usize) -> Result<SiteCloud> {
    if config.scattered {
        jittered_grid_cloud(config.d, p, CLOUD_JITTER, config.cloud_seed)
    } else {
        Ok(lattice_cloud(LatticeShape::new(config.d, p)?))
    }
}

/// Grid spacing `1/(p+1)` refined fourfold, for Green restrictions.
fn fine_size(p: usize) -> usize {
    4 * (p + 1) - 1
}

/// Ground truth of one grid point.
pub fn build_truth(config: &ExperimentConfig, p: usize) -> Result<GroundTruth> {
    match config.model {
        ModelTag::LaplacianPower => build_lattice_precision(p, config.d, config.s),
        ModelTag::GreenRestriction => {
            let sites = sites_for(config, p)?;
            let cloud = if config.scattered {
                snap_cloud(&sites, fine_size(p))?
            } else {
                sites
            };
            build_green_restriction(fine_size(p), config.d, config.s, &cloud)
        }
        ModelTag::Matern => matern_covariance(&sites_for(config, p)?, MATERN_NU, MATERN_RHO, 1.0),
    }
}

fn cloud_of(truth: &GroundTruth) -> SiteCloud {
    match &truth.geometry {
        crate::truth::Geometry::Lattice(s) => lattice_cloud(*s),
        crate::truth::Geometry::Sites(c) => c.clone(),
    }
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub model_tag: ModelTag,
    pub d: usize,
    pub p_or_m: usize,
    pub s: u32,
    pub n: usize,
    pub seed: u64,
    pub b: usize,
    pub path: String,
    pub rel_spectral_error: Option<f64>,
    pub kappa: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.experiment_id.clone(),
            self.model_tag.as_str().to_string(),
            self.d.to_string(),
            self.p_or_m.to_string(),
            self.s.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            self.b.to_string(),
            self.path.clone(),
            self.rel_spectral_error.map(|e| format!("{e:.17e}")).unwrap_or_default(),
            format!("{:.17e}", self.kappa),
            format!("{:.3}", self.wall_ms),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Identifier of a grid point, safe as a file-name stem.
pub fn experiment_id(config: &ExperimentConfig, p: usize, n: usize, seed: u64) -> String {
    let mut id = format!(
        "{}-d{}-p{}-s{}-n{}-seed{}",
        config.model.as_str(),
        config.d,
        p,
        config.s,
        n,
        seed
    );
    if config.scattered {
        id.push_str("-scattered");
    }
    if config.factor != FactorMode::Precision {
        id.push('-');
        id.push_str(config.factor.as_str());
    }
    id
}

/// Estimate and the matrix it is compared against, both dense.
struct Outcome {
    estimate: nalgebra::DMatrix<f64>,
    reference: nalgebra::DMatrix<f64>,
    b: usize,
    path: EstimatePath,
}

/// A truth prepared once per grid size and shared across `n` and seeds.
struct Prepared {
    truth: GroundTruth,
    hierarchy: Option<HierarchicalTruth>,
    reference: Option<nalgebra::DMatrix<f64>>,
}

fn prepare(config: &ExperimentConfig, p: usize) -> Result<Prepared> {
    let truth = build_truth(config, p)?;
    let (hierarchy, reference) = match config.factor {
        FactorMode::Precision => (None, None),
        mode => {
            let ht = HierarchicalTruth::new(&truth)?;
            let f = if mode == FactorMode::Cholesky {
                exact_block_factor(&ht.truth.omega, &ht.levels, ht.d())?
            } else {
                exact_block_factor_star(&ht.truth.omega, &ht.levels, ht.d())?
            };
            (Some(ht), Some(f.to_dense_upper()))
        }
    };
    Ok(Prepared {
        truth,
        hierarchy,
        reference,
    })
}

fn run_point(config: &ExperimentConfig, prep: &Prepared, p: usize, n: usize, seed: u64) -> Result<Outcome> {
    let est_config = config.estimator();
    match (&prep.hierarchy, &prep.reference) {
        (Some(ht), Some(reference)) => {
            let z = sample(&ht.truth, n, seed)?;
            let cfg = CholeskyConfig {
                estimator: est_config,
                embed: config.embed(),
                seed,
            };
            let est = estimate_scales(CovarianceSource::Samples(&z), &ht.cloud, &ht.levels, &cfg)?;
            let kind = if config.factor == FactorMode::Cholesky {
                FactorKind::Cholesky
            } else {
                FactorKind::SquareRoot
            };
            let u = est.factor(&ht.levels, ht.d(), kind)?;
            let b = est
                .paths
                .iter()
                .filter_map(|x| match x {
                    ScalePath::Lattice { b, .. } => Some(*b),
                    ScalePath::FullInverse => None,
                })
                .max()
                .unwrap_or(0);
            let all_full = est.paths.iter().all(|x| {
                matches!(
                    x,
                    ScalePath::FullInverse
                        | ScalePath::Lattice {
                            path: EstimatePath::FallbackFullInverse,
                            ..
                        }
                )
            });
            Ok(Outcome {
                estimate: u.to_dense_upper(),
                reference: reference.clone(),
                b,
                path: if all_full {
                    EstimatePath::FallbackFullInverse
                } else {
                    EstimatePath::Blockwise
                },
            })
        }
        _ => {
            let truth = &prep.truth;
            let z = sample(truth, n, seed)?;
            if config.scattered {
                let est = embed_and_estimate(&z, &cloud_of(truth), &est_config, &config.embed(), seed)?;
                Ok(Outcome {
                    estimate: est.matrix.into_inner(),
                    reference: truth.omega.as_matrix().clone(),
                    b: est.b,
                    path: est.path,
                })
            } else {
                let est = estimate_precision(&z, LatticeShape::new(config.d, p)?, &est_config)?;
                Ok(Outcome {
                    estimate: est.matrix.into_inner(),
                    reference: truth.omega.as_matrix().clone(),
                    b: est.scheme.b(),
                    path: est.path,
                })
            }
        }
    }
}

/// `‖A − B‖ / ‖B‖` in the spectral norm.
pub fn relative_spectral_error(estimate: &nalgebra::DMatrix<f64>, reference: &nalgebra::DMatrix<f64>) -> f64 {
    operator_norm(&(estimate - reference)) / operator_norm(reference)
}

/// Runs every `(p, n, seed)` grid point in parallel, returning rows in grid
/// order. Failures are recorded per row.
pub fn run_grid(config: &ExperimentConfig, timing: bool) -> Result<Vec<ResultRow>> {
    if let Some(dir) = &config.matrices {
        fs::create_dir_all(dir)?;
    }
    let prepared: Vec<(usize, std::result::Result<Prepared, String>)> = config
        .p
        .par_iter()
        .map(|&p| (p, prepare(config, p).map_err(|e| e.to_string())))
        .collect();
    let points: Vec<(usize, &std::result::Result<Prepared, String>, usize, u64)> = prepared
        .iter()
        .flat_map(|(p, prep)| {
            config
                .n
                .iter()
                .flat_map(move |&n| config.seeds.iter().map(move |&seed| (*p, prep, n, seed)))
        })
        .collect();
    points
        .par_iter()
        .map(|&(p, prep, n, seed)| {
            let id = experiment_id(config, p, n, seed);
            let mut row = ResultRow {
                experiment_id: id.clone(),
                model_tag: config.model,
                d: config.d,
                p_or_m: p,
                s: config.s,
                n,
                seed,
                b: 0,
                path: String::new(),
                rel_spectral_error: None,
                kappa: f64::NAN,
                wall_ms: 0.0,
                error: None,
            };
            let prep = match prep {
                Ok(x) => x,
                Err(e) => {
                    row.error = Some(e.clone());
                    return Ok(row);
                }
            };
            if config.scattered {
                row.p_or_m = prep.truth.dim();
            }
            row.kappa = prep.truth.kappa;
            let start = Instant::now();
            let outcome = run_point(config, prep, p, n, seed);
            if timing {
                row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            }
            match outcome {
                Ok(o) => {
                    row.b = o.b;
                    row.path = o.path.as_str().to_string();
                    row.rel_spectral_error = Some(relative_spectral_error(&o.estimate, &o.reference));
                    if let Some(dir) = &config.matrices {
                        write_matrix(&dir.join(format!("{id}-estimate.txt")), &o.estimate, &[])?;
                        write_matrix(&dir.join(format!("{id}-reference.txt")), &o.reference, &[])?;
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            Ok(row)
        })
        .collect()
}

/// Rows as CSV text, schema line first.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_error)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::NumericalFailure(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(format!("{CSV_SCHEMA}\n{body}"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Parses the row section of a results CSV (stops at the aggregate marker).
pub fn parse_rows(text: &str) -> Result<Vec<BTreeMap<String, String>>> {
    let body: String = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .take_while(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers().map_err(csv_error)?.clone();
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            Ok(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

/// Median relative error per `(p, n)` over successful seeds.
pub fn medians(rows: &[ResultRow]) -> BTreeMap<(usize, usize), f64> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(e) = r.rel_spectral_error {
            groups.entry((r.p_or_m, r.n)).or_default().push(e);
        }
    }
    groups.into_iter().map(|(k, v)| (k, median(v))).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One aggregate statistic of a scaling study.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    /// `median`, `slope_vs_n`, `slope_vs_p` or `ratio_pmax_pmin`.
    pub kind: &'static str,
    pub p_or_m: Option<usize>,
    pub n: Option<usize>,
    pub value: f64,
}

/// Medians, log-log slopes of median error against `n` (per size) and
/// against size (per `n`), and the largest-to-smallest size ratio.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let med = medians(rows);
    let mut out: Vec<AggregateRow> = med
        .iter()
        .map(|(&(p, n), &v)| AggregateRow {
            kind: "median",
            p_or_m: Some(p),
            n: Some(n),
            value: v,
        })
        .collect();
    let ps: Vec<usize> = med.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let ns: Vec<usize> = med.keys().map(|k| k.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for &p in &ps {
        let pts: Vec<(f64, f64)> = ns.iter().filter_map(|&n| med.get(&(p, n)).map(|&v| (n as f64, v))).collect();
        if pts.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Some(fit) = log_log_slope(&x, &y) {
                out.push(AggregateRow {
                    kind: "slope_vs_n",
                    p_or_m: Some(p),
                    n: None,
                    value: fit.slope,
                });
            }
        }
    }
    for &n in &ns {
        let pts: Vec<(f64, f64)> = ps.iter().filter_map(|&p| med.get(&(p, n)).map(|&v| (p as f64, v))).collect();
        if pts.len() >= 2 {
            let ratio = pts[pts.len() - 1].1 / pts[0].1;
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Some(fit) = log_log_slope(&x, &y) {
                out.push(AggregateRow {
                    kind: "slope_vs_p",
                    p_or_m: None,
                    n: Some(n),
                    value: fit.slope,
                });
            }
            out.push(AggregateRow {
                kind: "ratio_pmax_pmin",
                p_or_m: None,
                n: Some(n),
                value: ratio,
            });
        }
    }
    out
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "p_or_m", "n", "value"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.kind.to_string(),
            r.p_or_m.map(|v| v.to_string()).unwrap_or_default(),
            r.n.map(|v| v.to_string()).unwrap_or_default(),
            format!("{:.17e}", r.value),
        ])
        .map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::NumericalFailure(e.to_string()))?).map_err(|e| Error::Parse(e.to_string()))
}

/// Text output of a command and how many rows or suites failed.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub failures: usize,
}

/// Writes truth matrices, site clouds and one sample file per `(p, n, seed)`
/// into `dir`, returning the written paths in order.
pub fn cmd_simulate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &p in &config.p {
        let truth = build_truth(config, p)?;
        let stem = format!("{}-d{}-p{}-s{}", config.model.as_str(), config.d, p, config.s);
        let meta = truth_metadata(&truth);
        let files: Vec<(PathBuf, String)> = vec![
            (dir.join(format!("{stem}-omega.txt")), format_matrix(truth.omega.as_matrix(), &meta)),
            (dir.join(format!("{stem}-sigma.txt")), format_matrix(truth.sigma.as_matrix(), &meta)),
            (dir.join(format!("{stem}-sites.txt")), format_cloud(&cloud_of(&truth))),
        ];
        for (path, text) in files {
            fs::write(&path, text)?;
            written.push(path);
        }
        let jobs: Vec<(usize, u64)> = config.n.iter().flat_map(|&n| config.seeds.iter().map(move |&s| (n, s))).collect();
        let samples = jobs
            .par_iter()
            .map(|&(n, seed)| {
                let z = sample(&truth, n, seed)?;
                let mut m = meta.clone();
                m.push(("n".into(), n.to_string()));
                m.push(("seed".into(), seed.to_string()));
                Ok((dir.join(format!("{stem}-n{n}-seed{seed}-samples.txt")), format_matrix(z.as_matrix(), &m)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (path, text) in samples {
            fs::write(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn cmd_estimate(config: &ExperimentConfig) -> Result<CommandOutput> {
    let rows = run_grid(config, config.timing)?;
    Ok(CommandOutput {
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        text: rows_to_csv(&rows)?,
    })
}

pub fn cmd_scaling_study(config: &ExperimentConfig) -> Result<CommandOutput> {
    let rows = run_grid(config, config.timing)?;
    let mut text = rows_to_csv(&rows)?;
    if config.n.len() > 1 || config.seeds.len() > 1 {
        text.push_str("# aggregate\n");
        text.push_str(&aggregate_to_csv(&aggregate(&rows))?);
    }
    Ok(CommandOutput {
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        text,
    })
}

/// Runs the configured suites; the text is one report line per suite
/// followed by a CSV of every statistic.
pub fn cmd_verify(config: &ExperimentConfig) -> Result<(Vec<SuiteReport>, CommandOutput)> {
    let opts = VerifyOptions {
        seed: config.seeds[0],
        inject_asymmetric: config.inject_asymmetric,
    };
    let reports = config
        .suites
        .par_iter()
        .map(|&s| run_suite(s, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!("{r}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "passed", "statistic", "value"]).map_err(csv_error)?;
    for r in &reports {
        for (k, v) in &r.stats {
            w.write_record([r.suite.as_str(), if r.passed { "true" } else { "false" }, k, &format!("{v:.17e}")])
                .map_err(csv_error)?;
        }
    }
    let csv_text = String::from_utf8(w.into_inner().map_err(|e| Error::NumericalFailure(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let failures = reports.iter().filter(|r| !r.passed).count();
    Ok((reports, CommandOutput { text: format!("{text}{csv_text}"), failures }))
}

/// Timed estimation over the grid (wall times always recorded).
pub fn cmd_bench(config: &ExperimentConfig) -> Result<CommandOutput> {
    let rows = run_grid(config, true)?;
    Ok(CommandOutput {
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        text: rows_to_csv(&rows)?,
    })
}
