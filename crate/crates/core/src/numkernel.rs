//! Dense complex linear algebra and the tolerance policy shared by every
//! other module.
//!
//! All rank and nullity decisions are made from singular values against a
//! single dual threshold `absolute + relative * sigma_max`. Eigen and singular
//! value decompositions are delegated to `nalgebra` and are deterministic for a
//! fixed input.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dual absolute/relative threshold used for every numerical decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            absolute: 1e-10,
            relative: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(absolute: f64, relative: f64) -> Result<Self> {
        if !(absolute >= 0.0 && relative >= 0.0) || !absolute.is_finite() || !relative.is_finite() {
            return Err(Error::Parse(format!(
                "tolerance components must be finite and non-negative, got ({absolute}, {relative})"
            )));
        }
        Ok(Tolerance { absolute, relative })
    }

    pub fn absolute(absolute: f64) -> Self {
        Tolerance {
            absolute,
            relative: 0.0,
        }
    }

    /// `absolute + relative * scale`.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.absolute + self.relative * scale
    }
}

/// Dense complex matrix. Indexing is `(row, col)`; the logical order used by
/// serialization is row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{})", self.rows(), self.cols())?;
        if self.rows() * self.cols() <= 64 {
            write!(f, " {:?}", self.to_row_major())?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            inner: DMatrix::from_element(rows, cols, ZERO),
        }
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix {
            inner: DMatrix::from_fn(rows, cols, f),
        }
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries for {rows}x{cols}", rows * cols),
                found: format!("{} entries", entries.len()),
            });
        }
        let m = ComplexMatrix {
            inner: DMatrix::from_row_slice(rows, cols, &entries),
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_dmatrix(inner: DMatrix<C64>) -> Self {
        ComplexMatrix { inner }
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                let z = self.inner[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.inner.column(j).iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix {
            inner: self.inner.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix {
            inner: self.inner.transpose(),
        }
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix {
            inner: self.inner.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            inner: &self.inner * s,
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Entrywise (Schur) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        ComplexMatrix {
            inner: self.inner.component_mul(&other.inner),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        ComplexMatrix {
            inner: self.inner.kronecker(&other.inner),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols(), "vector length must match column count");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.inner[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.inner.diagonal().iter().copied().sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows(), self.cols()),
            (other.rows(), other.cols()),
            "shape mismatch in max_abs_diff"
        );
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Hilbert-Schmidt inner product `Tr(self^dagger other)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.inner[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.inner[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    v.iter().map(|z| z / n).collect()
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianSpectrum {
    /// `V diag(lambda) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let lam: Vec<C64> = self.eigenvalues.iter().map(|&x| C64::new(x, 0.0)).collect();
        &(v * &ComplexMatrix::from_diagonal(&lam)) * &v.adjoint()
    }
}

pub fn hermitian_spectrum(m: &ComplexMatrix, tol: Tolerance) -> Result<HermitianSpectrum> {
    m.require_square()?;
    m.check_finite()?;
    let dev = m.hermitian_deviation();
    if dev > tol.threshold(m.max_abs().max(1.0)) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let h = (m.as_dmatrix() + m.as_dmatrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let n = order.len();
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .as_dmatrix()
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Singular values of a real matrix in descending order.
pub fn real_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of entries of a descending singular value list above
/// `tol.absolute + tol.relative * sigma_max`.
pub fn rank_from_singular_values(sv: &[f64], tol: Tolerance) -> usize {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cut = tol.threshold(sigma_max);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn numerical_rank(m: &ComplexMatrix, tol: Tolerance) -> usize {
    rank_from_singular_values(&singular_values(m), tol)
}

/// `cols - numerical_rank`.
pub fn nullspace_dimension(a: &ComplexMatrix, tol: Tolerance) -> usize {
    a.cols() - numerical_rank(a, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    pub hermitian: Check,
    pub unitary: Check,
    pub projector: Check,
}

/// Hermitian, unitary and projector checks, each as a max entrywise deviation
/// compared against `tol.threshold(max(1, |m|_max))`.
pub fn structure_checks(m: &ComplexMatrix, tol: Tolerance) -> Result<StructureReport> {
    let n = m.require_square()?;
    let cut = tol.threshold(m.max_abs().max(1.0));
    let check = |dev: f64| Check {
        passed: dev <= cut,
        max_deviation: dev,
    };
    let herm = m.hermitian_deviation();
    let unit = (&(m * &m.adjoint())).max_abs_diff(&ComplexMatrix::identity(n));
    let sq = m * m;
    let proj = sq.max_abs_diff(m);
    Ok(StructureReport {
        hermitian: check(herm),
        unitary: check(unit),
        projector: check(proj),
    })
}
