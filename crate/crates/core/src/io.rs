//! Plain-text storage for matrices, samples, site clouds and truth metadata.
//!
//! Every file may start with `#` comment lines (`# key=value` for metadata).
//! A matrix is a `rows cols` line followed by `rows` lines of
//! whitespace-separated values printed with `{:.17e}`, which round-trips
//! `f64` exactly. A cloud is a `d M` line followed by `M` coordinate lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{DenseSymMatrix, SampleMatrix};
use crate::matching::{measure_cloud, SiteCloud};
use crate::truth::GroundTruth;

/// Text form of a matrix preceded by `# key=value` metadata lines.
pub fn format_matrix(m: &DMatrix<f64>, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

struct Parsed<'a> {
    meta: Vec<(String, String)>,
    lines: Vec<&'a str>,
}

fn split(text: &str) -> Parsed<'_> {
    let mut meta = Vec::new();
    let mut lines = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(c) = t.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !t.is_empty() {
            lines.push(t);
        }
    }
    Parsed { meta, lines }
}

fn numbers<T: std::str::FromStr>(line: &str, what: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad {what} value {t:?}"))))
        .collect()
}

fn header(lines: &[&str], what: &str) -> Result<(usize, usize)> {
    let h: Vec<usize> = numbers(lines.first().ok_or_else(|| Error::Parse(format!("empty {what} file")))?, what)?;
    match h[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Parse(format!("{what} header must have two integers"))),
    }
}

/// `# key=value` lines attached to a matrix file.
pub type Meta = Vec<(String, String)>;

/// Parses [`format_matrix`] output, returning the matrix and its metadata.
pub fn parse_matrix(text: &str) -> Result<(DMatrix<f64>, Meta)> {
    let p = split(text);
    let (rows, cols) = header(&p.lines, "matrix")?;
    if p.lines.len() != rows + 1 {
        return Err(Error::Parse(format!("expected {rows} matrix rows, found {}", p.lines.len() - 1)));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, line) in p.lines[1..].iter().enumerate() {
        let vals: Vec<f64> = numbers(line, "matrix")?;
        if vals.len() != cols {
            return Err(Error::Parse(format!("row {i} has {} values, expected {cols}", vals.len())));
        }
        for (j, v) in vals.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok((m, p.meta))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, meta: &[(String, String)]) -> Result<()> {
    fs::write(path, format_matrix(m, meta))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, Meta)> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Reads a matrix that must be exactly symmetric.
pub fn read_symmetric(path: &Path) -> Result<DenseSymMatrix> {
    DenseSymMatrix::new(read_matrix(path)?.0)
}

pub fn write_samples(path: &Path, z: &SampleMatrix, meta: &[(String, String)]) -> Result<()> {
    write_matrix(path, z.as_matrix(), meta)
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    SampleMatrix::new(read_matrix(path)?.0)
}

pub fn format_cloud(cloud: &SiteCloud) -> String {
    let mut out = format!("{} {}\n", cloud.d(), cloud.len());
    for x in cloud.sites() {
        let row: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_cloud(text: &str) -> Result<SiteCloud> {
    let p = split(text);
    let (d, m) = header(&p.lines, "cloud")?;
    if p.lines.len() != m + 1 {
        return Err(Error::Parse(format!("expected {m} sites, found {}", p.lines.len() - 1)));
    }
    let sites = p.lines[1..].iter().map(|l| numbers(l, "cloud")).collect::<Result<Vec<Vec<f64>>>>()?;
    measure_cloud(sites, d)
}

/// `# key=value` metadata describing a truth.
pub fn truth_metadata(truth: &GroundTruth) -> Vec<(String, String)> {
    let mut meta = vec![
        ("model".to_string(), truth.model_tag.as_str().to_string()),
        ("d".to_string(), truth.geometry.d().to_string()),
        ("dim".to_string(), truth.dim().to_string()),
        ("kappa".to_string(), format!("{:.17e}", truth.kappa)),
    ];
    meta.extend(truth.params.iter().cloned());
    meta
}

/// Looks up a metadata value.
pub fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::jittered_grid_cloud;
    use crate::testing::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gaussian_matrix(&mut rng, 4, 3) * 1e-7;
        let meta = vec![("model".to_string(), "matern".to_string())];
        let (back, got) = parse_matrix(&format_matrix(&m, &meta)).unwrap();
        assert_eq!(back, m);
        assert_eq!(got, meta);
        assert_eq!(meta_value(&got, "model"), Some("matern"));
    }

    #[test]
    fn special_values_round_trip() {
        let m = DMatrix::from_row_slice(1, 3, &[f64::MIN_POSITIVE, -0.0, 1e300]);
        assert_eq!(parse_matrix(&format_matrix(&m, &[])).unwrap().0, m);
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        assert!(matches!(parse_matrix(""), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("2 2\n1 2\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("1 2\n1 x\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("1 2\n1 2 3\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn cloud_round_trip() {
        let c = jittered_grid_cloud(2, 4, 0.3, 7).unwrap();
        let back = parse_cloud(&format_cloud(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("omega.txt");
        let m = DenseSymMatrix::from_diagonal(&[1.5, 2.5]);
        write_matrix(&path, m.as_matrix(), &[]).unwrap();
        assert_eq!(read_symmetric(&path).unwrap(), m);
        assert!(matches!(read_matrix(&dir.path().join("missing")), Err(Error::Io(_))));
    }
}
