//! Dense real matrices and the handful of decompositions the analysis needs.
//!
//! Storage is row-major. Eigen-decompositions are delegated to `nalgebra`
//! (tridiagonal QL for the symmetric case, Hessenberg + Francis QR via the
//! real Schur form for the general case).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances for the eigen-solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Relative symmetry tolerance accepted by [`eig_sym`].
    pub symmetry_tol: f64,
    /// Iteration cap handed to the QR/QL sweeps.
    pub max_iter: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must have positive dimensions, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `y = self * x`, written into `y`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Matrix) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let src = (r0 + i) * self.cols + c0;
            out.data[i * cols..(i + 1) * cols].copy_from_slice(&self.data[src..src + cols]);
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.is_square() && self.asymmetry() <= rel_tol * self.max_abs().max(1.0)
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrize(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Numerical rank: singular values above `rel_tol * max(1, σ_max)`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let sv = self.to_nalgebra().singular_values();
        let cutoff = rel_tol * sv.max().max(1.0);
        sv.iter().filter(|&&s| s > cutoff).count()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

// Operator sugar panics on shape mismatch; use the `try_*` forms where the
// shapes come from user input.
impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("shape mismatch in matrix addition")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("shape mismatch in matrix subtraction")
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("shape mismatch in matrix product")
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i, j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    let mut out = Matrix::zeros(p * r, q * s);
    for i in 0..p {
        for j in 0..q {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..r {
                let dst = (i * r + k) * (q * s) + j * s;
                for (o, &bv) in out.data[dst..dst + s].iter_mut().zip(b.row(k)) {
                    *o = aij * bv;
                }
            }
        }
    }
    out
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl SymEigResult {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let vl = {
            let mut m = v.clone();
            for i in 0..m.rows() {
                for (j, &l) in self.eigenvalues.iter().enumerate() {
                    m[(i, j)] *= l;
                }
            }
            m
        };
        &vl * &v.transpose()
    }
}

pub fn eig_sym(m: &Matrix) -> Result<SymEigResult> {
    eig_sym_with(m, &EigOptions::default())
}

pub fn eig_sym_with(m: &Matrix, opts: &EigOptions) -> Result<SymEigResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eig_sym needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let tolerance = opts.symmetry_tol * m.max_abs().max(1.0);
    let asymmetry = m.asymmetry();
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    let sym = m.symmetrize().to_nalgebra();
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, opts.max_iter)
        .ok_or(Error::NoConvergence(opts.max_iter))?;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = order.len();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, dst)] = eig.eigenvectors[(i, src)];
        }
    }
    Ok(SymEigResult {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vecs,
    })
}

pub fn min_eig_sym(m: &Matrix) -> Result<f64> {
    Ok(eig_sym(m)?.eigenvalues[0])
}

pub fn max_eig_sym(m: &Matrix) -> Result<f64> {
    Ok(*eig_sym(m)?.eigenvalues.last().expect("non-empty spectrum"))
}

/// All eigenvalues of a general square matrix, via the real Schur form.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    eigenvalues_with(m, &EigOptions::default())
}

pub fn eigenvalues_with(m: &Matrix, opts: &EigOptions) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let schur = Schur::try_new(m.to_nalgebra(), f64::EPSILON, opts.max_iter)
        .ok_or(Error::NoConvergence(opts.max_iter))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum; negative iff the matrix is Hurwitz.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kron_identity_and_zero() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(2)), Matrix::identity(4));
        let any = m(&[&[1.5, -2.0], &[0.25, 7.0]]);
        assert_eq!(kron(&Matrix::zeros(2, 2), &any), Matrix::zeros(4, 4));
    }

    #[test]
    fn kron_by_block_definition() {
        // [[1,2],[3,4]] ⊗ [[0,1],[1,0]], expanded block by block.
        let expected = m(&[
            &[0.0, 1.0, 0.0, 2.0],
            &[1.0, 0.0, 2.0, 0.0],
            &[0.0, 3.0, 0.0, 4.0],
            &[3.0, 0.0, 4.0, 0.0],
        ]);
        let got = kron(&m(&[&[1.0, 2.0], &[3.0, 4.0]]), &m(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(got, expected);
    }

    #[test]
    fn kron_rectangular_shape() {
        let a = m(&[&[1.0, 2.0, 3.0]]);
        let b = m(&[&[1.0], &[-1.0]]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 3));
        assert_eq!(k, m(&[&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]]));
    }

    #[test]
    fn eig_sym_examples() {
        let e = eig_sym(&Matrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues.len(), 3);
        for v in e.eigenvalues {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
        let e = eig_sym(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e.eigenvalues[1], 3.0, epsilon = 1e-13);
        let e = eig_sym(&Matrix::diag(&[5.0, -1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 5.0]);
    }

    #[test]
    fn eig_sym_rejects_asymmetric() {
        let err = eig_sym(&m(&[&[1.0, 2.0], &[0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
        assert!(matches!(
            eig_sym(&Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn min_eig_examples() {
        assert_abs_diff_eq!(min_eig_sym(&Matrix::identity(4)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(min_eig_sym(&Matrix::diag(&[3.0, -2.0])).unwrap(), -2.0);
        assert_abs_diff_eq!(
            min_eig_sym(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap(),
            1.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn spectral_abscissa_examples() {
        assert_abs_diff_eq!(
            spectral_abscissa(&(-&Matrix::identity(2))).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        // eigenvalues 0 and -1 (trace -1, determinant 0)
        let a = m(&[&[-2.0, 2.0], &[-1.0, 1.0]]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), 0.0, epsilon = 1e-12);
        let rot = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert_abs_diff_eq!(spectral_abscissa(&rot).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(Matrix::new(0, 1, vec![]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(Matrix::new(1, 2, vec![1.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(Matrix::new(1, 1, vec![f64::NAN]), Err(Error::NonFinite)));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn blocks_round_trip() {
        let mut big = Matrix::zeros(4, 5);
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        big.set_block(1, 2, &b);
        assert_eq!(big.block(1, 2, 2, 2), b);
        assert_eq!(big[(0, 0)], 0.0);
        assert_eq!(big[(2, 3)], 4.0);
    }

    #[test]
    fn serde_as_nested_rows() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let rows: Vec<Vec<f64>> = a.clone().into();
        assert_eq!(Matrix::try_from(rows).unwrap(), a);
    }
}
