//! Random test instances and slow reference algorithms used as independent
//! checks by the unit, integration and acceptance tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::DenseSymMatrix;

/// Standard Gaussian `rows × cols` matrix.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// SPD matrix with eigenvalues log-spaced on `[1, kappa]` and random
/// eigenvectors.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, dim: usize, kappa: f64) -> DenseSymMatrix {
    let q = random_orthogonal(rng, dim);
    let eig: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                kappa.powf(i as f64 / (dim - 1) as f64)
            }
        })
        .collect();
    let mut qd = q.clone();
    for (j, mut col) in qd.column_iter_mut().enumerate() {
        col *= eig[j];
    }
    DenseSymMatrix::symmetrize(qd * q.transpose()).expect("square")
}

/// Symmetric matrix with independent Gaussian upper-triangle entries.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DenseSymMatrix {
    DenseSymMatrix::from_upper_fn(dim, |_, _| StandardNormal.sample(rng)).expect("dim >= 1")
}

/// Cyclic Jacobi eigensolver. Returns eigenvalues (unsorted) and the matrix
/// whose columns are the matching eigenvectors.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Spectral norm of a square or rectangular matrix via Jacobi on `MᵀM`.
pub fn reference_operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (ev, _) = jacobi_eigen(&m.tr_mul(m));
    ev.iter().fold(0.0_f64, |a, v| a.max(*v)).max(0.0).sqrt()
}

/// Unblocked textbook Cholesky, kept independent of the crate's kernel.
pub fn reference_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return None;
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Some(l)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn reference_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::identity(n, n);
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[(x, c)].abs().total_cmp(&m[(y, c)].abs()))?;
        if m[(piv, c)] == 0.0 {
            return None;
        }
        m.swap_rows(c, piv);
        inv.swap_rows(c, piv);
        let d = m[(c, c)];
        for k in 0..n {
            m[(c, k)] /= d;
            inv[(c, k)] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[(r, c)];
                if f != 0.0 {
                    for k in 0..n {
                        m[(r, k)] -= f * m[(c, k)];
                        inv[(r, k)] -= f * inv[(c, k)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Size of a maximum bipartite matching by exhaustive search over all
/// assignments (exponential; for a handful of left vertices only).
pub fn brute_force_matching_size(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn go(i: usize, adj: &[Vec<usize>], used: &mut [bool]) -> usize {
        if i == adj.len() {
            return 0;
        }
        let mut best = go(i + 1, adj, used);
        for &r in &adj[i] {
            if !used[r] {
                used[r] = true;
                best = best.max(1 + go(i + 1, adj, used));
                used[r] = false;
            }
        }
        best
    }
    go(0, adj, &mut vec![false; n_right])
}
