//! Dense symmetric and SPD kernels.
//!
//! Every inverse in the crate goes through [`cholesky_lower`], so a
//! non-positive-definite input is reported in exactly one place, with the
//! index of the failing pivot.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A pivot is rejected when it does not exceed this fraction of the largest
/// diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Above this dimension the spectral norm switches from a full symmetric
/// eigendecomposition to power iteration.
pub const DENSE_EIGEN_MAX_DIM: usize = 512;

const POWER_TOLERANCE: f64 = 1e-9;

/// Square symmetric real matrix. Symmetry is exact (bitwise).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSymMatrix(DMatrix<f64>);

impl DenseSymMatrix {
    /// Wraps `m`, which must already be exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::invalid(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Returns `(m + mᵀ) / 2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let mut m = m;
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self(m))
    }

    /// Builds a matrix from its upper triangle (`f` is called with `i <= j`).
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "matrix dimension must be at least 1");
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn principal(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("empty index set"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::invalid(format!("index {bad} out of range")));
        }
        Ok(Self(self.0.select_rows(indices).select_columns(indices)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// `P A Pᵀ` where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(Error::invalid("permutation length does not match dimension"));
        }
        self.principal(perm)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("matrix dimension must be at least 1"));
    }
    Ok(())
}

/// Lower-triangular factor with strictly positive diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular(DMatrix<f64>);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Inverse by forward substitution; the result is again lower triangular.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let l = &self.0;
        let mut inv = DMatrix::zeros(n, n);
        for col in 0..n {
            inv[(col, col)] = 1.0 / l[(col, col)];
            for i in (col + 1)..n {
                let mut acc = 0.0;
                for k in col..i {
                    acc += l[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = -acc / l[(i, i)];
            }
        }
        inv
    }
}

/// `N` observations of a `dim`-dimensional vector, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix(DMatrix<f64>);

impl SampleMatrix {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::invalid("empty sample set"));
        }
        if rows.ncols() == 0 {
            return Err(Error::invalid("samples have dimension 0"));
        }
        Ok(Self(rows))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("empty sample set"));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("sample rows have differing lengths"));
        }
        Self::new(DMatrix::from_fn(n, dim, |i, j| rows[i][j]))
    }

    pub fn n_samples(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::invalid(format!("column {bad} out of range")));
        }
        Self::new(self.0.select_columns(cols))
    }

    /// Sample covariance restricted to `cols` (no mean subtraction).
    pub fn covariance_on(&self, cols: &[usize]) -> Result<DenseSymMatrix> {
        sample_covariance(&self.select_columns(cols)?)
    }
}

/// `(1/N) Σ Z_n Z_nᵀ`. The process is known to be centered, so no mean is
/// subtracted.
pub fn sample_covariance(samples: &SampleMatrix) -> Result<DenseSymMatrix> {
    let z = samples.as_matrix();
    let n = z.nrows() as f64;
    DenseSymMatrix::symmetrize(z.tr_mul(z) / n)
}

/// Cholesky factor `L` with `L Lᵀ = A`.
pub fn cholesky_lower(a: &DenseSymMatrix) -> Result<LowerTriangular> {
    let n = a.dim();
    let m = a.as_matrix();
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    let tol = PIVOT_TOLERANCE * max_diag;

    // Row-major packed lower triangle: row i occupies l[i*n .. i*n + i + 1].
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let (head, tail) = l.split_at_mut(j * n);
        let row_j = &mut tail[..n];
        for i in 0..j {
            let row_i = &head[i * n..i * n + i];
            let dot: f64 = row_i.iter().zip(&row_j[..i]).map(|(a, b)| a * b).sum();
            row_j[i] = (m[(j, i)] - dot) / head[i * n + i];
        }
        let sq: f64 = row_j[..j].iter().map(|v| v * v).sum();
        let pivot = m[(j, j)] - sq;
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        row_j[j] = pivot.sqrt();
    }
    Ok(LowerTriangular(DMatrix::from_fn(n, n, |i, j| {
        if j <= i {
            l[i * n + j]
        } else {
            0.0
        }
    })))
}

/// Inverse of an SPD matrix via its Cholesky factor.
pub fn spd_inverse(a: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    let linv = cholesky_lower(a)?.inverse();
    DenseSymMatrix::symmetrize(linv.tr_mul(&linv))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DenseSymMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &DenseSymMatrix) -> Result<f64> {
    if a.dim() <= DENSE_EIGEN_MAX_DIM {
        let ev = symmetric_eigenvalues(a);
        Ok(ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    } else {
        power_iteration_norm(a.as_matrix(), POWER_TOLERANCE, 50 * a.dim())
    }
}

/// Power iteration for `max |λ|` of a symmetric matrix. Tracks `‖A x‖` for
/// unit `x`, which converges even when `λ` and `-λ` are both extremal.
pub fn power_iteration_norm(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.nrows();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * (i as f64 + 1.0).sqrt());
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let y = a * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if (norm - estimate).abs() <= tol * norm {
            return Ok(norm);
        }
        estimate = norm;
        x = y / norm;
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not converge in {max_iter} iterations"
    )))
}

/// Spectral norm of an arbitrary (possibly rectangular) matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0_f64, |acc, v| acc.max(*v))
}

/// `λ_max / λ_min` of an SPD matrix.
pub fn condition_number(a: &DenseSymMatrix) -> Result<f64> {
    cholesky_lower(a)?;
    let ev = symmetric_eigenvalues(a);
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    if !(lo > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "smallest eigenvalue {lo} of a Cholesky-factorable matrix"
        )));
    }
    Ok(hi / lo)
}

fn spd_power(a: &DenseSymMatrix, exponent: f64) -> Result<DenseSymMatrix> {
    cholesky_lower(a)?;
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let v = &eig.eigenvectors;
    let scaled = DVector::from_iterator(
        a.dim(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).powf(exponent)),
    );
    let mut vs = v.clone();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        col *= scaled[j];
    }
    DenseSymMatrix::symmetrize(vs * v.transpose())
}

/// Symmetric positive square root.
pub fn spd_sqrt(a: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    spd_power(a, 0.5)
}

/// Symmetric inverse square root `A^{-1/2}`.
pub fn spd_inv_sqrt(a: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    spd_power(a, -0.5)
}

/// The four blocks of `Σ⁻¹` for the split `{0..split} ∪ {split..dim}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInverse {
    pub top_left: DMatrix<f64>,
    pub top_right: DMatrix<f64>,
    pub bottom_left: DMatrix<f64>,
    pub bottom_right: DMatrix<f64>,
}

impl BlockInverse {
    pub fn assemble(&self) -> DMatrix<f64> {
        let k = self.top_left.nrows();
        let n = k + self.bottom_right.nrows();
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (k, k)).copy_from(&self.top_left);
        out.view_mut((0, k), (k, n - k)).copy_from(&self.top_right);
        out.view_mut((k, 0), (n - k, k)).copy_from(&self.bottom_left);
        out.view_mut((k, k), (n - k, n - k)).copy_from(&self.bottom_right);
        out
    }
}

/// Block inverse through the two Schur complements:
///
/// ```text
/// S₁ = Σ₁₁ − Σ₁₂ Σ₂₂⁻¹ Σ₂₁,   S₂ = Σ₂₂ − Σ₂₁ Σ₁₁⁻¹ Σ₁₂
/// Σ⁻¹ = [ S₁⁻¹              −Σ₁₁⁻¹ Σ₁₂ S₂⁻¹ ]
///       [ −Σ₂₂⁻¹ Σ₂₁ S₁⁻¹    S₂⁻¹            ]
/// ```
pub fn block_inverse_schur(sigma: &DenseSymMatrix, split: usize) -> Result<BlockInverse> {
    let n = sigma.dim();
    if split == 0 || split >= n {
        return Err(Error::invalid(format!(
            "split {split} must satisfy 1 <= split < {n}"
        )));
    }
    let first: Vec<usize> = (0..split).collect();
    let second: Vec<usize> = (split..n).collect();
    let s = sigma.as_matrix();
    let s11 = sigma.principal(&first)?;
    let s22 = sigma.principal(&second)?;
    let s12 = s.view((0, split), (split, n - split)).into_owned();
    let s21 = s12.transpose();

    let s11_inv = spd_inverse(&s11)?;
    let s22_inv = spd_inverse(&s22)?;
    let schur1 = DenseSymMatrix::symmetrize(
        s11.as_matrix() - &s12 * s22_inv.as_matrix() * &s21,
    )?;
    let schur2 = DenseSymMatrix::symmetrize(
        s22.as_matrix() - &s21 * s11_inv.as_matrix() * &s12,
    )?;
    let schur1_inv = spd_inverse(&schur1)?;
    let schur2_inv = spd_inverse(&schur2)?;

    let top_right = -(s11_inv.as_matrix() * &s12 * schur2_inv.as_matrix());
    let bottom_left = -(s22_inv.as_matrix() * &s21 * schur1_inv.as_matrix());
    Ok(BlockInverse {
        top_left: schur1_inv.into_inner(),
        top_right,
        bottom_left,
        bottom_right: schur2_inv.into_inner(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{jacobi_eigen, random_spd, random_symmetric};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(rows: &[&[f64]]) -> DenseSymMatrix {
        let n = rows.len();
        DenseSymMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn covariance_of_single_observation_is_outer_product() {
        let z = SampleMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let c = sample_covariance(&z).unwrap();
        assert_eq!(c, sym(&[&[1.0, 2.0], &[2.0, 4.0]]));
    }

    #[test]
    fn covariance_of_orthogonal_pair() {
        let z = SampleMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = sample_covariance(&z).unwrap();
        assert_eq!(c, sym(&[&[0.5, 0.0], &[0.0, 0.5]]));
    }

    #[test]
    fn empty_sample_set_is_rejected() {
        assert!(matches!(
            SampleMatrix::from_rows(&[]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            SampleMatrix::new(DMatrix::zeros(0, 3)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn covariance_converges_to_population() {
        use rand_distr::{Distribution, StandardNormal};
        // Σ = [[2,1],[1,2]], L = [[√2,0],[1/√2,√(3/2)]]
        let l = DMatrix::from_row_slice(2, 2, &[2f64.sqrt(), 0.0, 0.5f64.sqrt(), 1.5f64.sqrt()]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: DMatrix<f64> = DMatrix::from_fn(10_000, 2, |_, _| StandardNormal.sample(&mut rng));
        let z = SampleMatrix::new(g * l.transpose()).unwrap();
        let c = sample_covariance(&z).unwrap();
        let target = [[2.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.get(i, j) - target[i][j]).abs() < 0.1, "{:?}", c);
            }
        }
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky_lower(&DenseSymMatrix::identity(3)).unwrap();
        assert_eq!(l.as_matrix(), &DMatrix::identity(3, 3));

        let l = cholesky_lower(&sym(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(l.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));

        let err = cholesky_lower(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1 }));
    }

    #[test]
    fn cholesky_rejects_tiny_pivot_relative_to_scale() {
        // Rank one, scaled up: the second pivot is round-off only.
        let a = sym(&[&[1e8, 2e8], &[2e8, 4e8]]);
        assert!(matches!(
            cholesky_lower(&a),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(
            spd_inverse(&DenseSymMatrix::identity(4)).unwrap(),
            DenseSymMatrix::identity(4)
        );
        let inv = spd_inverse(&DenseSymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert_relative_eq!(
            inv.as_matrix(),
            DenseSymMatrix::from_diagonal(&[0.5, 0.25]).as_matrix(),
            max_relative = 1e-15
        );
        let inv = spd_inverse(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        assert_relative_eq!(inv.as_matrix(), &expected, epsilon = 1e-15);
    }

    #[test]
    fn inverse_residual_scales_with_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [3, 10, 25] {
            let a = random_spd(&mut rng, dim, 1e4);
            let inv = spd_inverse(&a).unwrap();
            let kappa = condition_number(&a).unwrap();
            let resid = a.as_matrix() * inv.as_matrix() - DMatrix::identity(dim, dim);
            assert!(operator_norm(&resid) <= 1e-10 * kappa);
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert_relative_eq!(spectral_norm(&DenseSymMatrix::identity(3)).unwrap(), 1.0);
        let a = sym(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_relative_eq!(spectral_norm(&a).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn spectral_norm_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(&mut rng, 8);
        let (oracle, _) = jacobi_eigen(a.as_matrix());
        let expected = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert_relative_eq!(spectral_norm(&a).unwrap(), expected, max_relative = 1e-8);
    }

    #[test]
    fn power_iteration_path_for_large_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = DENSE_EIGEN_MAX_DIM + 40;
        let a = random_spd(&mut rng, dim, 50.0);
        let ev = symmetric_eigenvalues(&a);
        let expected = ev[dim - 1];
        assert_relative_eq!(spectral_norm(&a).unwrap(), expected, max_relative = 1e-6);
    }

    #[test]
    fn power_iteration_handles_plus_minus_pair() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -3.0, 1.0]));
        let norm = power_iteration_norm(&a, 1e-12, 1000).unwrap();
        assert_relative_eq!(norm, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn condition_number_examples() {
        assert_relative_eq!(condition_number(&DenseSymMatrix::identity(5)).unwrap(), 1.0);
        let a = DenseSymMatrix::from_diagonal(&[1.0, 100.0]);
        assert_relative_eq!(condition_number(&a).unwrap(), 100.0, max_relative = 1e-12);

        let t = DenseSymMatrix::from_upper_fn(10, |i, j| match j - i {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        })
        .unwrap();
        let (ev, _) = jacobi_eigen(t.as_matrix());
        let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(condition_number(&t).unwrap(), hi / lo, max_relative = 1e-6);

        assert!(matches!(
            condition_number(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sqrt_examples() {
        assert_relative_eq!(
            spd_sqrt(&DenseSymMatrix::identity(3)).unwrap().as_matrix(),
            &DMatrix::identity(3, 3),
            epsilon = 1e-15
        );
        let r = spd_sqrt(&DenseSymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_relative_eq!(
            r.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn sqrt_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(&mut rng, 12, 100.0);
        let (ev, v) = jacobi_eigen(a.as_matrix());
        let d = DMatrix::from_diagonal(&DVector::from_iterator(12, ev.iter().map(|l| l.sqrt())));
        let oracle = &v * d * v.transpose();
        let r = spd_sqrt(&a).unwrap();
        let rel = operator_norm(&(r.as_matrix() - &oracle)) / operator_norm(&oracle);
        assert!(rel < 1e-8, "{rel}");
        let kappa = condition_number(&a).unwrap();
        let resid = r.as_matrix() * r.as_matrix() - a.as_matrix();
        assert!(operator_norm(&resid) <= 1e-10 * kappa * spectral_norm(&a).unwrap());
        let is = spd_inv_sqrt(&a).unwrap();
        let ident = is.as_matrix() * r.as_matrix();
        assert!(max_abs(&(ident - DMatrix::identity(12, 12))) < 1e-10);
    }

    #[test]
    fn block_inverse_examples() {
        let b = block_inverse_schur(&DenseSymMatrix::identity(4), 2).unwrap();
        assert_eq!(b.top_left, DMatrix::identity(2, 2));
        assert_eq!(b.bottom_right, DMatrix::identity(2, 2));
        assert_eq!(max_abs(&b.top_right), 0.0);
        assert_eq!(max_abs(&b.bottom_left), 0.0);

        let b = block_inverse_schur(&sym(&[&[2.0, 1.0], &[1.0, 2.0]]), 1).unwrap();
        assert_relative_eq!(b.top_left[(0, 0)], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(b.top_right[(0, 0)], -1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(b.bottom_left[(0, 0)], -1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(b.bottom_right[(0, 0)], 2.0 / 3.0, max_relative = 1e-14);

        assert!(block_inverse_schur(&DenseSymMatrix::identity(3), 0).is_err());
        assert!(block_inverse_schur(&DenseSymMatrix::identity(3), 3).is_err());
    }

    #[test]
    fn block_inverse_agrees_with_direct_inverse_for_all_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [2, 6, 9] {
            let a = random_spd(&mut rng, dim, 1e3);
            let direct = spd_inverse(&a).unwrap();
            for split in 1..dim {
                let b = block_inverse_schur(&a, split).unwrap().assemble();
                let rel = operator_norm(&(b - direct.as_matrix())) / operator_norm(direct.as_matrix());
                assert!(rel < 1e-9, "dim {dim} split {split}: {rel}");
            }
        }
    }

    #[test]
    fn symmetrize_and_new() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 1.0]);
        assert!(DenseSymMatrix::new(m.clone()).is_err());
        let s = DenseSymMatrix::symmetrize(m).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
        assert!(DenseSymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn cholesky_round_trip(seed in any::<u64>(), dim in 1usize..30, log_kappa in 0.0f64..8.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_spd(&mut rng, dim, 10f64.powf(log_kappa));
                let l = cholesky_lower(&a).unwrap();
                for i in 0..dim {
                    prop_assert!(l.as_matrix()[(i, i)] > 0.0);
                    for j in (i + 1)..dim {
                        prop_assert_eq!(l.as_matrix()[(i, j)], 0.0);
                    }
                }
                let resid = l.as_matrix() * l.as_matrix().transpose() - a.as_matrix();
                prop_assert!(operator_norm(&resid) <= 1e-12 * spectral_norm(&a).unwrap());
            }

            #[test]
            fn inverse_is_exactly_symmetric(seed in any::<u64>(), dim in 1usize..20) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_spd(&mut rng, dim, 1e3);
                let inv = spd_inverse(&a).unwrap();
                prop_assert!(DenseSymMatrix::new(inv.into_inner()).is_ok());
            }
        }
    }
}
