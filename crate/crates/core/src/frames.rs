//! Gram matrices of frames and the structures derived from a SIC Gram: the
//! projector `Q`, the Hermitian Hadamard matrix `H`, the equiangular tight
//! frame pair `E`, `E~`, Naimark complements and the dimension-3 maps between
//! SIC Grams and Hadamard matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    hermitian_spectrum, inner, numerical_rank, ComplexMatrix, Tolerance, C64, ONE,
};

/// `n x n` Gram matrix of `n` vectors spanning a `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub d: usize,
    pub entries: ComplexMatrix,
}

impl GramMatrix {
    pub fn new(d: usize, entries: ComplexMatrix) -> Result<Self> {
        let n = entries.require_square()?;
        entries.check_finite()?;
        let dev = entries.hermitian_deviation();
        if dev > 1e-10 * entries.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(GramMatrix { n, d, entries })
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.entries[(j, k)]
    }
}

pub const SIC_GRAM_TOLERANCE: f64 = 1e-8;
pub const TIGHT_TOLERANCE: f64 = 1e-8;

/// `G_jk = <psi_j|psi_k>`.
pub fn gram(vectors: &[Vec<C64>]) -> Result<GramMatrix> {
    let d = vectors.first().map(Vec::len).unwrap_or(0);
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::ShapeMismatch {
            expected: format!("vectors of dimension {d}"),
            found: format!("dimension {}", v.len()),
        });
    }
    let n = vectors.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let z = inner(&vectors[j], &vectors[k]);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    Ok(GramMatrix { n, d, entries: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchReport {
    pub t: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub saturated: bool,
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `binom(d+t-1, t) sum_{j,k} |G_jk|^{2t}` against `n^2`.
pub fn welch_check(g: &GramMatrix, t: u32) -> WelchReport {
    let s: f64 = g
        .entries
        .as_dmatrix()
        .iter()
        .map(|z| z.norm_sqr().powi(t as i32))
        .sum();
    let lhs = binomial((g.d as u64) + t as u64 - 1, t as u64) * s;
    let rhs = (g.n * g.n) as f64;
    WelchReport {
        t,
        lhs,
        rhs,
        saturated: (lhs - rhs).abs() < 1e-8 * rhs,
    }
}

/// Rephasing-invariant products `T_rst = G_rs G_st G_tr`.
#[derive(Debug, Clone)]
pub struct TripleProducts {
    pub n: usize,
    values: Vec<C64>,
}

impl TripleProducts {
    pub fn get(&self, r: usize, s: usize, t: usize) -> C64 {
        self.values[(r * self.n + s) * self.n + t]
    }

    pub fn max_abs_diff(&self, other: &TripleProducts) -> f64 {
        assert_eq!(self.n, other.n, "triple product tables of different size");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

pub fn triple_products(g: &GramMatrix) -> TripleProducts {
    let n = g.n;
    let mut values = Vec::with_capacity(n * n * n);
    for r in 0..n {
        for s in 0..n {
            let rs = g.get(r, s);
            for t in 0..n {
                values.push(rs * g.get(s, t) * g.get(t, r));
            }
        }
    }
    TripleProducts { n, values }
}

/// Max entrywise deviation of `(d/n) G` from being a projector.
pub fn tightness_deviation(g: &GramMatrix) -> f64 {
    let p = g.entries.scale_real(g.d as f64 / g.n as f64);
    (&p * &p).max_abs_diff(&p)
}

/// `G~ = n/(n-d) I - d/(n-d) G`, a Gram of `n` vectors in dimension `n - d`.
pub fn naimark_complement(g: &GramMatrix) -> Result<GramMatrix> {
    let dev = tightness_deviation(g);
    if dev > TIGHT_TOLERANCE {
        return Err(Error::NotTight { deviation: dev });
    }
    if g.d >= g.n {
        return Err(Error::UnsupportedDimension {
            d: g.d,
            reason: format!("a frame of {} vectors has no Naimark complement in dimension {}", g.n, g.d),
        });
    }
    let (n, d) = (g.n as f64, g.d as f64);
    let a = n / (n - d);
    let b = d / (n - d);
    let entries = &ComplexMatrix::identity(g.n).scale_real(a) - &g.entries.scale_real(b);
    Ok(GramMatrix {
        n: g.n,
        d: g.n - g.d,
        entries,
    })
}

/// Worst deviation of a Gram from the SIC pattern (unit diagonal, squared
/// off-diagonal moduli `1/(d+1)`), with its position.
pub fn sic_gram_deviation(g: &GramMatrix) -> (f64, (usize, usize)) {
    let target = 1.0 / (g.d as f64 + 1.0);
    let mut worst = (0.0f64, (0, 0));
    for j in 0..g.n {
        for k in 0..g.n {
            let z = g.get(j, k);
            let dev = if j == k {
                (z - ONE).norm()
            } else {
                (z.norm_sqr() - target).abs()
            };
            if dev > worst.0 {
                worst = (dev, (j, k));
            }
        }
    }
    worst
}

pub fn require_sic_gram(g: &GramMatrix, tol: f64) -> Result<()> {
    if g.n != g.d * g.d {
        return Err(Error::ShapeMismatch {
            expected: format!("{} vectors for dimension {}", g.d * g.d, g.d),
            found: format!("{}", g.n),
        });
    }
    let (dev, (j, k)) = sic_gram_deviation(g);
    if dev > tol {
        return Err(Error::NotSic {
            deviation: dev,
            worst: format!("entry ({j}, {k})"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DerivedStructures {
    pub d: usize,
    /// `((d+1)/(2d)) G o G`, a projector of rank `d(d+1)/2`.
    pub q: ComplexMatrix,
    /// `2Q - I`, Hermitian unitary with entries of modulus `1/d`.
    pub h: ComplexMatrix,
    /// ETF Gram in dimension `d(d+1)/2`.
    pub e: GramMatrix,
    /// ETF Gram in dimension `d(d-1)/2`.
    pub e_tilde: GramMatrix,
}

/// Builds `Q`, `H`, `E`, `E~` from the Gram matrix of a SIC.
pub fn derive_structures(g: &GramMatrix) -> Result<DerivedStructures> {
    require_sic_gram(g, SIC_GRAM_TOLERANCE)?;
    let d = g.d;
    let df = d as f64;
    let q = g.entries.hadamard(&g.entries).scale_real((df + 1.0) / (2.0 * df));
    Ok(structures_from_q(d, q))
}

/// `H`, `E` and `E~` from a candidate `Q`; shared with the squared-phase route.
pub fn structures_from_q(d: usize, q: ComplexMatrix) -> DerivedStructures {
    let df = d as f64;
    let n = d * d;
    let id = ComplexMatrix::identity(n);
    let h = &q.scale_real(2.0) - &id;
    let e = q.scale_real(2.0 * df / (df + 1.0));
    let e_tilde = (&id - &q).scale_real(2.0 * df / (df - 1.0));
    DerivedStructures {
        d,
        h,
        e: GramMatrix {
            n,
            d: d * (d + 1) / 2,
            entries: e,
        },
        e_tilde: GramMatrix {
            n,
            d: d * (d - 1) / 2,
            entries: e_tilde,
        },
        q,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HadamardReport {
    pub hermitian_deviation: f64,
    pub unitary_deviation: f64,
    /// Max deviation of `|h_jk|` from `1/sqrt(n)`.
    pub modulus_deviation: f64,
    pub min_diagonal: f64,
    pub passed: bool,
}

/// Hermitian unitary with every entry of modulus `1/sqrt(n)` and positive real
/// diagonal, all within `tol`.
pub fn check_hermitian_hadamard(h: &ComplexMatrix, tol: f64) -> Result<HadamardReport> {
    let n = h.require_square()?;
    let hermitian_deviation = h.hermitian_deviation();
    let unitary_deviation = (h * h).max_abs_diff(&ComplexMatrix::identity(n));
    let m = 1.0 / (n as f64).sqrt();
    let modulus_deviation = h
        .as_dmatrix()
        .iter()
        .fold(0.0f64, |acc, z| acc.max((z.norm() - m).abs()));
    let min_diagonal = (0..n).map(|i| h[(i, i)].re).fold(f64::INFINITY, f64::min);
    let max_diag_imag = (0..n).map(|i| h[(i, i)].im.abs()).fold(0.0, f64::max);
    let passed = hermitian_deviation <= tol
        && unitary_deviation <= tol
        && modulus_deviation <= tol
        && min_diagonal > tol
        && max_diag_imag <= tol;
    Ok(HadamardReport {
        hermitian_deviation,
        unitary_deviation,
        modulus_deviation,
        min_diagonal,
        passed,
    })
}

fn require_hadamard9(h9: &ComplexMatrix, tol: f64) -> Result<()> {
    if h9.rows() != 9 || h9.cols() != 9 {
        return Err(Error::ShapeMismatch {
            expected: "9x9".into(),
            found: format!("{}x{}", h9.rows(), h9.cols()),
        });
    }
    let r = check_hermitian_hadamard(h9, tol)?;
    if !r.passed {
        let (check, deviation) = [
            ("hermitian", r.hermitian_deviation),
            ("unitary", r.unitary_deviation),
            ("hadamard_modulus", r.modulus_deviation),
        ]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
        let (check, deviation) = if deviation <= tol {
            ("positive_diagonal", r.min_diagonal)
        } else {
            (check, deviation)
        };
        return Err(Error::StructureViolation { check, deviation });
    }
    Ok(())
}

pub const TUREK_TOLERANCE: f64 = 1e-9;

/// `G = (3/2)(I - H)`: the Gram of a SIC in dimension 3.
pub fn turek_sic_from_hadamard(h9: &ComplexMatrix) -> Result<GramMatrix> {
    require_hadamard9(h9, TUREK_TOLERANCE)?;
    let entries = (&ComplexMatrix::identity(9) - h9).scale_real(1.5);
    let g = GramMatrix { n: 9, d: 3, entries };
    require_sic_gram(&g, TUREK_TOLERANCE)?;
    Ok(g)
}

/// `3 (H o H)`, another Hermitian Hadamard matrix with positive diagonal.
pub fn hadamard_square_map(h9: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_hadamard9(h9, TUREK_TOLERANCE)?;
    Ok(h9.hadamard(h9).scale_real(3.0))
}

/// Vectors realizing a positive semidefinite Gram of rank `g.d`: the columns
/// of `sqrt(Lambda) V^dagger` over the top `d` eigenpairs.
pub fn realize_frame(g: &GramMatrix) -> Result<Vec<Vec<C64>>> {
    let spec = hermitian_spectrum(&g.entries, Tolerance::default())?;
    let n = g.n;
    let rank = numerical_rank(&g.entries, Tolerance::new(1e-8, 1e-10)?);
    if rank > g.d {
        return Err(Error::StructureViolation {
            check: "gram_rank",
            deviation: spec.eigenvalues[n - g.d - 1],
        });
    }
    if spec.eigenvalues[0] < -1e-8 {
        return Err(Error::StructureViolation {
            check: "positive_semidefinite",
            deviation: -spec.eigenvalues[0],
        });
    }
    let top: Vec<usize> = (n - g.d..n).collect();
    Ok((0..n)
        .map(|j| {
            top.iter()
                .map(|&k| spec.eigenvectors[(j, k)].conj() * spec.eigenvalues[k].max(0.0).sqrt())
                .collect()
        })
        .collect())
}

/// Row-major JSON form shared by every matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixJson {
            rows: m.rows(),
            cols: m.cols(),
            entries: m.to_row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        ComplexMatrix::from_row_major(
            self.rows,
            self.cols,
            self.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
        )
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Result<String> {
    Ok(serde_json::to_string(&MatrixJson::from_matrix(m))?)
}

pub fn matrix_from_json(text: &str) -> Result<ComplexMatrix> {
    serde_json::from_str::<MatrixJson>(text)?.to_matrix()
}

/// Diagonal rephasing `diag(phases) G diag(phases)^*`, i.e. the Gram of the
/// vectors `conj(phase_j) psi_j`.
pub fn rephase(g: &GramMatrix, phases: &[C64]) -> GramMatrix {
    let entries = ComplexMatrix::from_fn(g.n, g.n, |j, k| phases[j] * g.get(j, k) * phases[k].conj());
    GramMatrix {
        n: g.n,
        d: g.d,
        entries,
    }
}

/// Smallest and largest entry moduli of the strictly off-diagonal part.
pub fn off_diagonal_modulus_range(m: &ComplexMatrix) -> (f64, f64) {
    let n = m.rows();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let a = m[(j, k)].norm();
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
    }
    (lo, hi)
}
