use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold for the positive-definiteness test.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Dense symmetric matrix. Symmetry is exact: both triangles always hold
/// bit-identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "SymMatrix dimension must be positive");
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle
    /// (`i <= j`), mirrored to the lower triangle.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    /// Accepts a square matrix whose triangles agree to within a relative
    /// tolerance of 1e-10; the upper triangle is kept.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n.max(1), got: m.ncols() });
        }
        for j in 0..n {
            for i in 0..=j {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_upper_fn(n, |i, j| m[(i, j)]))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: rows.iter().map(|r| r.len()).find(|&l| l != n).unwrap_or(0) });
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Symmetrizes `(m + mᵀ) / 2` without any check.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self::from_upper_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `tr(self · other)` for symmetric operands.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        Self(&self.0 + &other.0)
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        Self(&self.0 * factor)
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn select(&self, indices: &[usize]) -> SymMatrix {
        let k = indices.len();
        Self(DMatrix::from_fn(k, k, |a, b| self.0[(indices[a], indices[b])]))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Upper-triangular Cholesky factor `Φ` with `ΦᵀΦ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    upper: DMatrix<f64>,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.upper.nrows()
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn logdet(&self) -> f64 {
        logdet_pd(self)
    }

    pub fn inverse(&self) -> SymMatrix {
        inv_pd(self)
    }

    /// Solves `Φ y = z`.
    pub fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        self.upper
            .solve_upper_triangular(z)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `Φᵀ y = z`.
    pub fn solve_upper_transpose(&self, z: &DVector<f64>) -> DVector<f64> {
        self.upper
            .tr_solve_upper_triangular(z)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `A x = rhs` for the factored matrix `A = ΦᵀΦ`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_upper_transpose(rhs))
    }

    /// Solves `Φᵀ X = B` column by column.
    pub fn solve_upper_transpose_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.upper
            .tr_solve_upper_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `Φ X = B`.
    pub fn solve_upper_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.upper
            .solve_upper_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `Φᵀ z`.
    pub fn mul_upper_transpose(&self, z: &DVector<f64>) -> DVector<f64> {
        self.upper.tr_mul(z)
    }

    /// Recomputes `ΦᵀΦ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.upper.tr_mul(&self.upper))
    }
}

/// Upper Cholesky factorization; doubles as the positive-definiteness test.
///
/// A pivot must exceed `1e-12 · max(diag)` and be finite.
pub fn cholesky(m: &SymMatrix) -> Result<CholFactor> {
    let n = m.dim();
    let a = m.as_matrix();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let threshold = PIVOT_RTOL * max_diag;
    let mut upper = DMatrix::<f64>::zeros(n, n);
    let data = upper.as_mut_slice();
    // Column-major: column j of Φ holds Φ[0..=j, j] contiguously.
    for j in 0..n {
        let col_j = &data[j * n..j * n + j];
        let sq: f64 = col_j.iter().map(|v| v * v).sum();
        let pivot = a[(j, j)] - sq;
        if !pivot.is_finite() || pivot <= threshold || pivot <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        data[j * n + j] = d;
        for i in j + 1..n {
            let (left, right) = data.split_at_mut(i * n);
            let cj = &left[j * n..j * n + j];
            let dot: f64 = cj.iter().zip(&right[..j]).map(|(x, y)| x * y).sum();
            right[j] = (a[(j, i)] - dot) / d;
        }
    }
    Ok(CholFactor { upper })
}

/// `log |A| = 2 Σ log Φᵢᵢ`.
pub fn logdet_pd(f: &CholFactor) -> f64 {
    2.0 * f.upper.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `A⁻¹ = Φ⁻¹ Φ⁻ᵀ`.
pub fn inv_pd(f: &CholFactor) -> SymMatrix {
    let n = f.dim();
    let u = f.solve_upper_mat(&DMatrix::identity(n, n));
    let prod = &u * u.transpose();
    SymMatrix::from_upper_fn(n, |i, j| prod[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|c| {
                let minor = m.clone().remove_row(0).remove_column(c);
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, c)] * det_cofactor(&minor)
            })
            .sum()
    }

    fn random_pd(dim: usize, seed: u64) -> SymMatrix {
        use rand::{Rng as _, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(&(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.5))
    }

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(f.upper(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = SymMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]).unwrap();
        let f = cholesky(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!((f.upper() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn cholesky_rejects_nan_and_tiny_pivot() {
        let mut m = SymMatrix::identity(2);
        m.set(1, 1, f64::NAN);
        assert!(cholesky(&m).is_err());
        let m = SymMatrix::from_diagonal(&[1.0, 1e-13]);
        assert!(cholesky(&m).is_err());
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(logdet_pd(&cholesky(&SymMatrix::identity(4)).unwrap()), 0.0);
        let f = cholesky(&SymMatrix::from_diagonal(&[2.0, 3.0])).unwrap();
        assert!((logdet_pd(&f) - 6.0_f64.ln()).abs() < 1e-14);
        let m = SymMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]).unwrap();
        assert!((logdet_pd(&cholesky(&m).unwrap()) - 16.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logdet_matches_cofactor_determinant() {
        for dim in 1..=4 {
            for seed in 0..5 {
                let m = random_pd(dim, seed * 10 + dim as u64);
                let expected = det_cofactor(m.as_matrix()).ln();
                let got = logdet_pd(&cholesky(&m).unwrap());
                assert!((got - expected).abs() < 1e-10, "dim {dim}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let f = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(inv_pd(&f), SymMatrix::identity(3));
        let f = cholesky(&SymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert!(inv_pd(&f).max_abs_diff(&SymMatrix::from_diagonal(&[0.5, 0.25])) < 1e-15);
    }

    #[test]
    fn inverse_multiplies_back_to_identity() {
        for dim in [1, 2, 5, 12, 30] {
            let m = random_pd(dim, dim as u64);
            let inv = inv_pd(&cholesky(&m).unwrap());
            let prod = inv.as_matrix() * m.as_matrix();
            let err = (prod - DMatrix::identity(dim, dim)).abs().max();
            assert!(err < 1e-10, "dim {dim}: {err}");
        }
    }

    #[test]
    fn factor_reconstructs_and_solves() {
        let m = random_pd(6, 99);
        let f = cholesky(&m).unwrap();
        assert!(f.reconstruct().max_abs_diff(&m) < 1e-12);
        let rhs = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let x = f.solve(&rhs);
        assert!((m.as_matrix() * x - rhs).abs().max() < 1e-10);
    }

    #[test]
    fn from_matrix_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::from_matrix(m), Err(Error::NotSymmetric { .. })));
    }
}
