//! Symmetric tight fusion frames in odd dimensions.
//!
//! A phase assignment `e^{i phi_p}` satisfying the quadratic condition checked
//! by [`check_acond`] gives a Hermitian unitary `A = (1/d) sum_p e^{i phi_p} D_p`
//! and a pair of fiducial projectors `(I +- A)/2` of rank `(d +- 1)/2`. Squared
//! SIC overlap phases, read through a matrix `F` with `det F = 2^{-1} mod d`,
//! are one such assignment; all-ones phases (the parity operator) are another.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_spectrum, ComplexMatrix, Tolerance, C64, ONE, ZERO};
use crate::sic::{overlap_phases, Fiducial, OverlapPhases};
use crate::whgroup::{symplectic, DisplacementIndex, WhContext};

pub const ACOND_TOLERANCE: f64 = 1e-8;

fn require_odd(d: usize) -> Result<()> {
    if d % 2 == 0 || d < 3 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "fusion frames from phase assignments need odd d >= 3; in even dimensions A is not Hermitian"
                .into(),
        });
    }
    Ok(())
}

/// Phases `e^{i phi_p}` indexed in ensemble order `p1 * d + p2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment {
    pub d: usize,
    pub phases: Vec<C64>,
}

impl PhaseAssignment {
    pub fn new(d: usize, phases: Vec<C64>) -> Result<Self> {
        require_odd(d)?;
        if phases.len() != d * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} phases", d * d),
                found: format!("{}", phases.len()),
            });
        }
        if (phases[0] - ONE).norm() > 1e-10 {
            return Err(Error::InvalidPhases("phase at p = 0 must be 1".into()));
        }
        for p in DisplacementIndex::all(d) {
            let z = phases[p.ordinal()];
            if !z.re.is_finite() || !z.im.is_finite() || (z.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidPhases(format!(
                    "phase at ({}, {}) is not unimodular: {z}",
                    p.p1, p.p2
                )));
            }
            if (phases[p.neg().ordinal()] - z.conj()).norm() > 1e-10 {
                return Err(Error::InvalidPhases(format!(
                    "phases at ({}, {}) and its negative are not conjugate",
                    p.p1, p.p2
                )));
            }
        }
        Ok(PhaseAssignment { d, phases })
    }

    pub fn trivial(d: usize) -> Result<Self> {
        Self::new(d, vec![ONE; d * d])
    }

    pub fn phase(&self, p: &DisplacementIndex) -> C64 {
        self.phases[p.ordinal()]
    }
}

/// `max_p |sum_u tau^{<u,p>} e^{i(phi_u + phi_{p-u})} - d^2 delta_{p,0}|`.
pub fn check_acond(phi: &PhaseAssignment) -> Result<f64> {
    let d = phi.d;
    require_odd(d)?;
    let ctx = WhContext::new(d)?;
    let all = DisplacementIndex::all(d);
    let mut worst = 0.0f64;
    for p in &all {
        let mut s = ZERO;
        for u in &all {
            let pu = p.sub(u)?;
            s += ctx.tau_pow(symplectic(u, p)?) * phi.phase(u) * phi.phase(&pu);
        }
        if p.is_zero_mod_d() {
            s -= (d * d) as f64;
        }
        worst = worst.max(s.norm());
    }
    Ok(worst)
}

/// `2 x 2` integer matrix acting on displacement labels modulo `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FMatrix {
    pub entries: [[i64; 2]; 2],
    pub d: usize,
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

impl FMatrix {
    /// Accepts `F` only if `det F = 2^{-1} mod d`.
    pub fn new(entries: [[i64; 2]; 2], d: usize) -> Result<Self> {
        require_odd(d)?;
        let m = d as i64;
        let inv2 = mod_inverse(2, m).expect("2 is invertible modulo an odd number");
        let det = (entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0]).rem_euclid(m);
        if det != inv2 {
            return Err(Error::InvalidFMatrix(format!(
                "det F = {det} mod {d}, expected 2^-1 = {inv2}"
            )));
        }
        let mut reduced = entries;
        for row in reduced.iter_mut() {
            for x in row.iter_mut() {
                *x = x.rem_euclid(m);
            }
        }
        Ok(FMatrix { entries: reduced, d })
    }

    /// `diag(2^{-1} mod d, 1)`.
    pub fn default_for(d: usize) -> Result<Self> {
        require_odd(d)?;
        let inv2 = mod_inverse(2, d as i64).expect("odd modulus");
        Self::new([[inv2, 0], [0, 1]], d)
    }

    pub fn apply(&self, p: &DisplacementIndex) -> DisplacementIndex {
        let [[a, b], [c, e]] = self.entries;
        DisplacementIndex::new(a * p.p1 + b * p.p2, c * p.p1 + e * p.p2, self.d)
    }
}

/// `A` together with the fiducial projectors `(I +- A)/2`.
#[derive(Debug, Clone)]
pub struct StffPair {
    pub d: usize,
    pub a: ComplexMatrix,
    pub pi_plus: ComplexMatrix,
    pub pi_minus: ComplexMatrix,
}

pub fn stff_from_phases(phi: &PhaseAssignment) -> Result<StffPair> {
    let residual = check_acond(phi)?;
    if residual > ACOND_TOLERANCE {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: ACOND_TOLERANCE,
        });
    }
    let d = phi.d;
    let ctx = WhContext::new(d)?;
    let mut a = ComplexMatrix::zeros(d, d);
    for p in DisplacementIndex::all(d) {
        a = &a + &ctx.displacement(&p).scale(phi.phase(&p));
    }
    let a = a.scale_real(1.0 / d as f64);
    let id = ComplexMatrix::identity(d);
    Ok(StffPair {
        d,
        pi_plus: (&id + &a).scale_real(0.5),
        pi_minus: (&id - &a).scale_real(0.5),
        a,
    })
}

/// Phases `e^{i phi_p} = e^{2 i theta_{F p}}` from SIC overlap phases.
pub fn sic_phase_assignment(theta: &OverlapPhases, fm: &FMatrix) -> Result<PhaseAssignment> {
    let d = theta.d;
    if fm.d != d {
        return Err(Error::ModulusMismatch { left: d, right: fm.d });
    }
    let phases = DisplacementIndex::all(d)
        .iter()
        .map(|p| {
            let z = theta.phase(&fm.apply(p));
            z * z
        })
        .collect();
    PhaseAssignment::new(d, phases)
}

/// The pair built from the squared overlap phases of a SIC fiducial.
pub fn stff_from_sic(f: &Fiducial, fm: &FMatrix, sic_tol: f64) -> Result<StffPair> {
    require_odd(f.d)?;
    let theta = overlap_phases(f, sic_tol)?;
    stff_from_phases(&sic_phase_assignment(&theta, fm)?)
}

/// The pair generated by the parity operator.
pub fn wigner_stff(d: usize) -> Result<StffPair> {
    stff_from_phases(&PhaseAssignment::trivial(d)?)
}

/// `D_p Pi D_p^dagger` for every `p` in ensemble order.
pub fn covariant_family(pi: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let d = pi.require_square()?;
    let ctx = WhContext::new(d)?;
    Ok(DisplacementIndex::all(d)
        .iter()
        .map(|p| {
            let dp = ctx.displacement(p);
            &(&dp * pi) * &dp.adjoint()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StffReport {
    pub count: usize,
    pub dimension: usize,
    /// Common rank inferred from the traces.
    pub rank: usize,
    pub projector_deviation: f64,
    pub rank_deviation: f64,
    /// Max entry of `sum_k Pi_k - (count * rank / d) I`.
    pub tight_deviation: f64,
    pub pairwise_trace_min: f64,
    pub pairwise_trace_max: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn default_stff_tolerance(d: usize) -> f64 {
    1e-8 * d as f64
}

/// Checks that a list of projectors has equal ranks, sums to a multiple of the
/// identity and has constant pairwise Hilbert-Schmidt overlaps.
pub fn verify_stff(projectors: &[ComplexMatrix], tol: f64) -> Result<StffReport> {
    let first = projectors.first().ok_or_else(|| Error::ShapeMismatch {
        expected: "at least one projector".into(),
        found: "none".into(),
    })?;
    let d = first.require_square()?;
    for m in projectors {
        if m.rows() != d || m.cols() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", m.rows(), m.cols()),
            });
        }
    }
    let n = projectors.len();
    let projector_deviation = projectors
        .iter()
        .map(|m| (m * m).max_abs_diff(m).max(m.hermitian_deviation()))
        .fold(0.0, f64::max);
    let traces: Vec<f64> = projectors.iter().map(|m| m.trace().re).collect();
    let rank = traces[0].round().max(0.0) as usize;
    let rank_deviation = traces.iter().map(|t| (t - rank as f64).abs()).fold(0.0, f64::max);
    let mut sum = ComplexMatrix::zeros(d, d);
    for m in projectors {
        sum = &sum + m;
    }
    let scale = (n * rank) as f64 / d as f64;
    let tight_deviation = sum.max_abs_diff(&ComplexMatrix::identity(d).scale_real(scale));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..n {
        for k in j + 1..n {
            let t = projectors[j].hs_inner(&projectors[k]).re;
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    if n < 2 {
        lo = 0.0;
        hi = 0.0;
    }
    let passed = projector_deviation <= tol && rank_deviation <= tol && tight_deviation <= tol && hi - lo <= tol;
    Ok(StffReport {
        count: n,
        dimension: d,
        rank,
        projector_deviation,
        rank_deviation,
        tight_deviation,
        pairwise_trace_min: lo,
        pairwise_trace_max: hi,
        tolerance: tol,
        passed,
    })
}

/// POVM elements `E+-_p = 2/(d(d+-1)) Pi+-_p`.
#[derive(Debug, Clone)]
pub struct PovmPair {
    pub plus: Vec<ComplexMatrix>,
    pub minus: Vec<ComplexMatrix>,
}

pub fn to_povm(s: &StffPair) -> Result<PovmPair> {
    let df = s.d as f64;
    let plus = covariant_family(&s.pi_plus)?
        .iter()
        .map(|m| m.scale_real(2.0 / (df * (df + 1.0))))
        .collect();
    let minus = covariant_family(&s.pi_minus)?
        .iter()
        .map(|m| m.scale_real(2.0 / (df * (df - 1.0))))
        .collect();
    Ok(PovmPair { plus, minus })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PovmReport {
    /// Max entry of `sum_k E_k - I`.
    pub completeness_deviation: f64,
    pub min_eigenvalue: f64,
}

pub fn check_povm(elements: &[ComplexMatrix]) -> Result<PovmReport> {
    let d = elements
        .first()
        .ok_or_else(|| Error::ShapeMismatch {
            expected: "at least one element".into(),
            found: "none".into(),
        })?
        .require_square()?;
    let mut sum = ComplexMatrix::zeros(d, d);
    let mut min_eigenvalue = f64::INFINITY;
    for e in elements {
        sum = &sum + e;
        let spec = hermitian_spectrum(e, Tolerance::default())?;
        min_eigenvalue = min_eigenvalue.min(spec.eigenvalues[0]);
    }
    Ok(PovmReport {
        completeness_deviation: sum.max_abs_diff(&ComplexMatrix::identity(d)),
        min_eigenvalue,
    })
}

/// `max_{p != 0} |sum_u tau^{2<u,p>} e^{2i(theta_u + theta_{p-u})}|`.
pub fn sicaltb_residual(theta: &OverlapPhases) -> Result<f64> {
    let d = theta.d;
    let ctx = WhContext::new(d)?;
    let all = DisplacementIndex::all(d);
    let sq: Vec<C64> = theta.phases.iter().map(|z| z * z).collect();
    let mut worst = 0.0f64;
    for p in all.iter().skip(1) {
        let mut s = ZERO;
        for u in &all {
            let pu = p.sub(u)?;
            s += ctx.tau_pow(2 * symplectic(u, p)?) * sq[u.ordinal()] * sq[pu.ordinal()];
        }
        worst = worst.max(s.norm());
    }
    Ok(worst)
}
