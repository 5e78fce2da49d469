//! Squared-phase matrices `M_p = e^{2 i theta_p}` and the explicit one-parameter
//! families of them in dimensions 3, 4, 6 and 8.
//!
//! `M` is stored row-major with `M[p1][p2] = M_{(p1, p2)}`, indices mod `d`.
//! Any `M` with `M_0 = 1`, unimodular entries, `M_{-p} = conj(M_p)` and a
//! vanishing [`check_m_property`] residual yields the same projector,
//! Hadamard, ETF and (odd `d`) fusion-frame structures as a SIC would.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{structures_from_q, DerivedStructures};
use crate::numkernel::{ComplexMatrix, C64, ONE, ZERO};
use crate::sic::{family_fiducial_d3, overlap_phases, Fiducial, DEFAULT_SIC_TOLERANCE};
use crate::stff::{stff_from_phases, FMatrix, PhaseAssignment, StffPair};
use crate::whgroup::{symplectic, DisplacementIndex, WhContext};

pub const PROPERTY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SquaredPhaseMatrix {
    pub d: usize,
    /// Row-major, `entries[p1 * d + p2]`.
    pub entries: Vec<C64>,
}

impl SquaredPhaseMatrix {
    /// Validates `M_0 = 1`, `|M_p| = 1` and `M_{-p} = conj(M_p)` to `1e-10`.
    pub fn new(d: usize, entries: Vec<C64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "squared-phase matrices need d >= 2".into(),
            });
        }
        if entries.len() != d * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", d * d),
                found: format!("{}", entries.len()),
            });
        }
        if (entries[0] - ONE).norm() > 1e-10 {
            return Err(Error::InvalidPhases(format!("M_0 = {} is not 1", entries[0])));
        }
        for p in DisplacementIndex::all(d) {
            let z = entries[p.ordinal()];
            if !z.re.is_finite() || !z.im.is_finite() || (z.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidPhases(format!(
                    "M_({},{}) = {z} is not unimodular",
                    p.p1, p.p2
                )));
            }
            if (entries[p.neg().ordinal()] - z.conj()).norm() > 1e-10 {
                return Err(Error::InvalidPhases(format!(
                    "M_({},{}) and M_-p are not conjugate",
                    p.p1, p.p2
                )));
            }
        }
        Ok(SquaredPhaseMatrix { d, entries })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                expected: format!("{d} rows of length {d}"),
                found: "ragged rows".into(),
            });
        }
        Self::new(d, rows.concat())
    }

    pub fn get(&self, p1: i64, p2: i64) -> C64 {
        let d = self.d as i64;
        self.entries[(p1.rem_euclid(d) * d + p2.rem_euclid(d)) as usize]
    }

    pub fn at(&self, p: &DisplacementIndex) -> C64 {
        self.entries[p.ordinal()]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.d, other.d, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn to_json_value(&self) -> PhaseMatrixJson {
        PhaseMatrixJson {
            d: self.d,
            entries: (0..self.d)
                .map(|i| {
                    (0..self.d)
                        .map(|j| {
                            let z = self.entries[i * self.d + j];
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_json_value())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: PhaseMatrixJson = serde_json::from_str(text)?;
        if j.entries.len() != j.d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", j.d),
                found: format!("{}", j.entries.len()),
            });
        }
        let rows: Vec<Vec<C64>> = j
            .entries
            .iter()
            .map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect())
            .collect();
        Self::from_rows(&rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrixJson {
    pub d: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

/// `M_p = (d+1) <psi|D_p^dagger|psi>^2` with `M_0 = 1`.
pub fn phase_matrix_from_fiducial(f: &Fiducial, tol: f64) -> Result<SquaredPhaseMatrix> {
    let theta = overlap_phases(f, tol)?;
    let entries = theta.phases.iter().map(|z| z * z).collect();
    SquaredPhaseMatrix::new(f.d, entries)
}

/// `max_p |sum_r tau^{-2<p,r>} M_{p-r} M_r - d^2 delta_{p,0}|`.
pub fn check_m_property(m: &SquaredPhaseMatrix) -> f64 {
    let d = m.d;
    let ctx = WhContext::new(d).expect("validated dimension");
    let all = DisplacementIndex::all(d);
    let mut worst = 0.0f64;
    for p in &all {
        let mut s = ZERO;
        for r in &all {
            let k = symplectic(p, r).expect("same modulus");
            s += ctx.tau_pow(-2 * k) * m.get(p.p1 - r.p1, p.p2 - r.p2) * m.at(r);
        }
        if p.is_zero_mod_d() {
            s -= (d * d) as f64;
        }
        worst = worst.max(s.norm());
    }
    worst
}

/// Structures generated by a squared-phase matrix.
#[derive(Debug, Clone)]
pub struct MStructures {
    pub derived: DerivedStructures,
    /// Present for odd `d`, built with the default `F`.
    pub stff: Option<StffPair>,
}

/// `Q_{p,q} = (1/2d) tau^{-2<p,q>} M_{p-q} + delta_{p,q}/2` and the matrices
/// derived from it, plus the fusion-frame pair for odd `d`.
pub fn structures_from_m(m: &SquaredPhaseMatrix) -> Result<MStructures> {
    let residual = check_m_property(m);
    if residual > PROPERTY_TOLERANCE {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: PROPERTY_TOLERANCE,
        });
    }
    let d = m.d;
    let ctx = WhContext::new(d)?;
    let all = DisplacementIndex::all(d);
    let n = d * d;
    let mut q = ComplexMatrix::zeros(n, n);
    for (a, p) in all.iter().enumerate() {
        for (b, r) in all.iter().enumerate() {
            let k = symplectic(p, r)?;
            let mut z = ctx.tau_pow(-2 * k) * m.get(p.p1 - r.p1, p.p2 - r.p2) / (2.0 * d as f64);
            if a == b {
                z += 0.5;
            }
            q[(a, b)] = z;
        }
    }
    let stff = if d % 2 == 1 {
        let fm = FMatrix::default_for(d)?;
        let phases = all.iter().map(|p| m.at(&fm.apply(p))).collect();
        Some(stff_from_phases(&PhaseAssignment::new(d, phases)?)?)
    } else {
        None
    };
    Ok(MStructures {
        derived: structures_from_q(d, q),
        stff,
    })
}

/// Squared phases of the dimension-3 SIC family at parameter `t`.
pub fn family_d3(t: f64) -> Result<SquaredPhaseMatrix> {
    phase_matrix_from_fiducial(&family_fiducial_d3(t), DEFAULT_SIC_TOLERANCE)
}

fn d4_pattern(u: C64) -> SquaredPhaseMatrix {
    let v = u.inv();
    SquaredPhaseMatrix::from_rows(&[
        vec![ONE, v, ONE, u],
        vec![v, u, u, u],
        vec![ONE, v, ONE, u],
        vec![u, v, v, v],
    ])
    .expect("pattern is conjugate symmetric for unimodular u")
}

/// The dimension-4 family with `e^{it}` in every non-trivial slot.
pub fn family_d4(t: f64) -> SquaredPhaseMatrix {
    d4_pattern(C64::from_polar(1.0, t))
}

/// The unit `u = -sqrt((3 - sqrt5)/2) + i sqrt((sqrt5 - 1)/2)` of the 4a and 8b
/// reference matrices.
pub fn reference_unit_d4() -> C64 {
    let s5 = 5f64.sqrt();
    C64::new(-((3.0 - s5) / 2.0).sqrt(), ((s5 - 1.0) / 2.0).sqrt())
}

/// Reference squared-phase matrix of the orbit-4a fiducial.
pub fn reference_m0_d4() -> SquaredPhaseMatrix {
    d4_pattern(reference_unit_d4())
}

/// Three-phase ansatz for dimension 8.
pub fn d8_ansatz(u1: C64, u2: C64, u3: C64) -> Result<SquaredPhaseMatrix> {
    let a = u1 / u2;
    let b = u2 / u1;
    let (i2, i3) = (u2.inv(), u3.inv());
    SquaredPhaseMatrix::from_rows(&[
        vec![ONE, a, u3, b, ONE, a, i3, b],
        vec![a, b, u2, a, u2, i2, a, u2],
        vec![u3, i2, i3, a, u3, i2, u3, a],
        vec![b, b, b, a, i2, i2, i2, u2],
        vec![ONE, u2, i3, i2, ONE, u2, u3, i2],
        vec![a, i2, u2, u2, u2, b, a, a],
        vec![i3, b, i3, u2, i3, b, u3, u2],
        vec![b, i2, b, u2, i2, b, i2, a],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum D8CurveId {
    Flat,
    Plus,
    Minus,
}

impl std::str::FromStr for D8CurveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(D8CurveId::Flat),
            "plus" => Ok(D8CurveId::Plus),
            "minus" => Ok(D8CurveId::Minus),
            _ => Err(Error::Parse(format!("unknown curve {s:?}; expected flat, plus or minus"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D8Curve {
    pub curve_id: D8CurveId,
    pub psi: f64,
}

pub fn d8_f(psi: f64) -> C64 {
    let s = psi.sin();
    let s2 = s * s;
    C64::new((1.0 + 2.0 * s2 + 4.0 * s2 * s2).sqrt(), 2f64.sqrt() * s) / (1.0 + 2.0 * s2)
}

pub fn d8_g(psi: f64) -> C64 {
    let s = psi.sin();
    let s2 = s * s;
    C64::new(1.0 - 2.0 * s2, 2.0 * 2f64.sqrt() * s) / (1.0 + 2.0 * s2)
}

/// Point on one of the three dimension-8 curves.
pub fn family_d8(c: D8Curve) -> Result<SquaredPhaseMatrix> {
    let u1 = C64::from_polar(1.0, 2.0 * c.psi);
    let e = C64::from_polar(1.0, c.psi);
    match c.curve_id {
        D8CurveId::Flat => d8_ansatz(u1, e, ONE),
        D8CurveId::Plus => d8_ansatz(u1, e * d8_f(c.psi), d8_g(c.psi)),
        D8CurveId::Minus => d8_ansatz(u1, e * d8_f(c.psi), d8_g(c.psi).conj()),
    }
}

/// Second unit of the 8b reference matrix.
pub fn reference_unit_d8() -> C64 {
    let (s2, s5, s10) = (2f64.sqrt(), 5f64.sqrt(), 10f64.sqrt());
    C64::new(
        -0.5 * (17.0 + 8.0 * s2 - 7.0 * s5 - 4.0 * s10).sqrt(),
        0.5 * (-13.0 - 8.0 * s2 + 7.0 * s5 + 4.0 * s10).sqrt(),
    )
}

/// Reference squared-phase matrix of the orbit-8b fiducial (`u3 = u1^2`).
pub fn reference_m0_d8() -> SquaredPhaseMatrix {
    let u1 = reference_unit_d4();
    d8_ansatz(u1, reference_unit_d8(), u1 * u1).expect("unimodular units")
}

/// Six-phase ansatz for dimension 6.
pub fn d6_ansatz(v: [C64; 6]) -> Result<SquaredPhaseMatrix> {
    let [v1, v2, v3, v4, v5, v6] = v;
    let i = |z: C64| z.inv();
    SquaredPhaseMatrix::from_rows(&[
        vec![ONE, v1, v4, ONE, i(v4), i(v1)],
        vec![v1, i(v1), v5, v2, i(v3), v5],
        vec![v4, i(v5), i(v4), i(v3), v6, v2],
        vec![ONE, v3, i(v2), ONE, v2, i(v3)],
        vec![i(v4), i(v2), i(v6), v3, v4, v5],
        vec![i(v1), i(v5), v3, i(v2), i(v5), v1],
    ])
}

/// Reference squared-phase matrix of the orbit-6a fiducial.
pub fn reference_m0_d6() -> SquaredPhaseMatrix {
    let s21 = 21f64.sqrt();
    let b = C64::new(1.0, 7f64.sqrt()).powf(1.0 / 3.0).re;
    let c1 = (567.0 - 85.0 * s21) / 168.0 + (-63.0 + 17.0 * s21) / 42.0 * b + 4.0 * (21.0 - 5.0 * s21) / 21.0 * b * b;
    let c2 = (1743.0 - 349.0 * s21) / 168.0 + (-63.0 + 11.0 * s21) / 42.0 * b + (-63.0 + 13.0 * s21) / 21.0 * b * b;
    let c3 = (11.0 - s21) / 8.0;
    let u1 = C64::new(c1.sqrt(), (1.0 - c1).sqrt());
    let u2 = C64::new(-c2.sqrt(), (1.0 - c2).sqrt());
    let u3 = C64::new(-c3.sqrt(), (1.0 - c3).sqrt());
    d6_ansatz([u1, u2, u3 * u3 / (u1 * u2), u3, u3 * u3, u3 * u3 * u3]).expect("unimodular units")
}

/// Branch integers and parameter of the dimension-6 family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D6Branch {
    pub n1: u8,
    pub n2: u8,
    pub n3: u8,
    pub n4: u8,
    pub n5: u8,
    pub t: f64,
    /// Required when `t^2 = 3`, where the family degenerates to a circle of
    /// solutions parametrized by this phase angle.
    pub free_phase: Option<f64>,
}

impl D6Branch {
    pub fn new(n: [u8; 5], t: f64) -> Self {
        D6Branch {
            n1: n[0],
            n2: n[1],
            n3: n[2],
            n4: n[3],
            n5: n[4],
            t,
            free_phase: None,
        }
    }

    /// All 72 branch tuples `(n1, n2, n3, n4, n5)`.
    pub fn all_tuples() -> Vec<[u8; 5]> {
        let mut out = Vec::with_capacity(72);
        for n1 in 0..2 {
            for n2 in 0..2 {
                for n3 in 0..2 {
                    for n4 in 0..3 {
                        for n5 in 0..3 {
                            out.push([n1, n2, n3, n4, n5]);
                        }
                    }
                }
            }
        }
        out
    }

    fn tuple(&self) -> [u8; 5] {
        [self.n1, self.n2, self.n3, self.n4, self.n5]
    }
}

/// Left endpoint magnitude of the parameter interval,
/// `J = [-t0, -sqrt3) u (sqrt3, 3]`.
pub fn d6_t0() -> f64 {
    let c = (2.0 + 3f64.sqrt()).cbrt();
    let a = c + 1.0 / c;
    let b = c * c + 1.0 / (c * c);
    3.0 / 31.0 * (7.0 - 4.0 * a + 6.0 * b) + 2.0 / 31.0 * (633.0 + 90.0 * a + 144.0 * b).sqrt()
}

fn is_junction(t: f64) -> bool {
    (t * t - 3.0).abs() <= 1e-12
}

fn sign(n: u8) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `v1..v6` along a branch together with the intermediate phases whose
/// modulus must be one.
struct D6Values {
    v: [C64; 6],
    checks: [(&'static str, C64); 3],
}

fn d6_raw(n: [u8; 5], t: f64) -> D6Values {
    let [n1, n2, n3, n4, n5] = n;
    let s = sign(n1);
    let i = C64::new(0.0, 1.0);
    let t2 = t * t;
    let q = (t2 - 3.0).sqrt();
    let q3 = q * q * q;
    let sqrt2 = 2f64.sqrt();
    let v5 = C64::new(3.0 + t2, s * 2.0 * sqrt2 * t * q) / (3.0 * (t2 - 1.0));
    let v6 = C64::new(5.0 - t2, s * 2.0 * sqrt2 * q) / (t2 - 1.0);
    let r = (t2 + 15.0) / (3.0 * (t2 - 1.0));

    let p1 = -9.0 * (t2 - 1.0);
    let p2 = t2 + 15.0;
    let p3 = 8.0 * (-207.0 + 108.0 * t - 42.0 * t2 - 36.0 * t2 * t + t2 * t2);
    let p4 = 24.0 * sqrt2 * (3.0 - t) * (-3.0 + 6.0 * t + t2) * q;
    let p5 = 64.0 * (t2 - 3.0) * (171.0 - 108.0 * t - 6.0 * t2 + 36.0 * t2 * t + 19.0 * t2 * t2);
    let tp = |k: i32| t.powi(k);
    let den = (t - 1.0) * (t2 + 15.0).powi(3);
    let p6 = -(1647.0 - 5103.0 * t + 2403.0 * tp(2) + 1053.0 * tp(3) - 531.0 * tp(4) - 621.0 * tp(5)
        + 65.0 * tp(6)
        + 63.0 * tp(7))
        / den;
    let radicand = (3.0 - t)
        * (1.0 + t)
        * (-837.0 + 1134.0 * t - 135.0 * tp(2) - 108.0 * tp(3) + 45.0 * tp(4) + 126.0 * tp(5) + 31.0 * tp(6));
    let p7 = C64::new(radicand, 0.0).sqrt() * 2f64.powf(3.5) * q3 / den;

    let e_psi = p6 + i * sign(n2) * p7;
    let sigma = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let base = (e_psi * p1 + p2) * (p3 + i * sign(n3) * p4) / p5;
    let e1 = sigma.powu(n4 as u32) * base.powf(1.0 / 3.0);
    let e2 = sigma.powu(2 * n4 as u32) / e_psi * base.powf(2.0 / 3.0);

    let v4 = -(t2 + 15.0) / (9.0 * (t2 - 1.0)) / e1 + (t2 + 15.0) * e2 / (4.0 * (t2 - 3.0))
        - (t2 + 15.0).powi(2) * e1 * e1 / (36.0 * (t2 - 3.0) * (t2 - 1.0));

    let s1 = r * e1;
    let s2 = r * e2;
    let inner = C64::new((15.0 + t2).powi(3) / (27.0 * (t2 - 1.0).powi(3)), 0.0)
        + e_psi.inv()
            * ((-99.0 - 42.0 * t2 + 13.0 * t2 * t2) / (t2 - 1.0).powi(2)
                + 8.0 * 6f64.sqrt() * (3.0 - t) * q3 / (3.0 * (t2 - 1.0).powi(2)));
    let delta = e1 * inner.powf(1.0 / 3.0);
    let b = s1 * s1 - 3.0 * s2;
    let nu = |j: i64| {
        let sd = sigma.powi(j.rem_euclid(3) as i32) * delta;
        (s1 + sd + b / sd) / 3.0
    };
    let v = |j: i64| nu(n5 as i64 + s as i64 * (j - 1));
    D6Values {
        v: [v(1), v(2), v(3), v4, v5, v6],
        checks: [("e^{i psi}", e_psi), ("e^{i phi1}", e1), ("e^{i phi2}", e2)],
    }
}

const D6_NAMES: [&str; 6] = ["v1", "v2", "v3", "v4", "v5", "v6"];

/// `v1..v6` on a branch at an interior or endpoint parameter, with
/// unimodularity of every intermediate phase checked to `1e-6`.
pub fn d6_phases(b: &D6Branch) -> Result<[C64; 6]> {
    let n = b.tuple();
    if n[0] > 1 || n[1] > 1 || n[2] > 1 || n[3] > 2 || n[4] > 2 {
        return Err(Error::Parse(format!("branch integers out of range: {n:?}")));
    }
    let t = b.t;
    if is_junction(t) {
        let phi = b.free_phase.ok_or_else(|| Error::Domain {
            value: t,
            domain: "t^2 = 3 requires an explicit free phase".into(),
        })?;
        let e = C64::from_polar(1.0, phi);
        return Ok([e, e, e, e.conj(), ONE, ONE]);
    }
    let t0 = d6_t0();
    let s3 = 3f64.sqrt();
    let inside = (t >= -t0 && t < -s3) || (t > s3 && t <= 3.0);
    if !t.is_finite() || !inside {
        return Err(Error::Domain {
            value: t,
            domain: format!("[-{t0}, -sqrt(3)] u [sqrt(3), 3]"),
        });
    }
    let vals = d6_raw(n, t);
    for (name, z) in vals.checks {
        let dev = (z.norm() - 1.0).abs();
        if !(dev <= 1e-6) {
            return Err(Error::BranchInconsistency { quantity: name, deviation: dev });
        }
    }
    for (name, z) in D6_NAMES.iter().zip(vals.v) {
        let dev = (z.norm() - 1.0).abs();
        if !(dev <= 1e-6) {
            return Err(Error::BranchInconsistency { quantity: name, deviation: dev });
        }
    }
    Ok(vals.v)
}

/// Squared-phase matrix on a dimension-6 branch.
pub fn family_d6(b: &D6Branch) -> Result<SquaredPhaseMatrix> {
    let v = d6_phases(b)?;
    // Intermediate phases are only unimodular to rounding; project them so
    // that the symmetry checks of `SquaredPhaseMatrix` hold exactly.
    let v = v.map(|z| z / z.norm());
    d6_ansatz(v)
}

/// Limit of `v1..v6` along a branch as `t -> sign * sqrt3`, by Richardson
/// extrapolation in `s = sqrt(t^2 - 3)`.
pub fn d6_junction_limit(n: [u8; 5], sign_of_t: f64) -> [C64; 6] {
    let h = 1e-2;
    let levels = 5;
    let sgn = if sign_of_t < 0.0 { -1.0 } else { 1.0 };
    let at = |s: f64| d6_raw(n, sgn * (3.0 + s * s).sqrt()).v;
    let mut table: Vec<Vec<[C64; 6]>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut row = vec![at(h / 2f64.powi(k as i32))];
        for m in 1..=k {
            let c = 1.0 / (2f64.powi(m as i32) - 1.0);
            let prev = row[m - 1];
            let up = table[k - 1][m - 1];
            let mut next = [ZERO; 6];
            for i in 0..6 {
                next[i] = prev[i] + (prev[i] - up[i]) * c;
            }
            row.push(next);
        }
        table.push(row);
    }
    table[levels - 1][levels - 1]
}

/// Distance from `v1..v6` to the circle `v1 = v2 = v3 = conj(v4) = e^{i phi}`,
/// `v5 = v6 = 1`, taking `e^{i phi}` from `v1`.
pub fn distance_to_junction(v: &[C64; 6]) -> f64 {
    let e = v[0] / v[0].norm();
    [
        (v[0] - e).norm(),
        (v[1] - e).norm(),
        (v[2] - e).norm(),
        (v[3].conj() - e).norm(),
        (v[4] - ONE).norm(),
        (v[5] - ONE).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// A relabeling taking one squared-phase matrix to another:
/// `M'_p = omega^{2<p,q>} M_{F p + a}`, conjugated when `det F = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymmetryMatch {
    pub f: [[i64; 2]; 2],
    pub translation: (i64, i64),
    pub character: (i64, i64),
    pub conjugated: bool,
}

/// Applies a relabeling to `m`.
pub fn apply_symmetry(m: &SquaredPhaseMatrix, s: &SymmetryMatch) -> SquaredPhaseMatrix {
    let d = m.d;
    let ctx = WhContext::new(d).expect("validated dimension");
    let q = ctx.index(s.character.0, s.character.1);
    let [[a, b], [c, e]] = s.f;
    let entries = DisplacementIndex::all(d)
        .iter()
        .map(|p| {
            let w = ctx.omega_pow(2 * symplectic(p, &q).expect("same modulus"));
            let z = w * m.get(a * p.p1 + b * p.p2 + s.translation.0, c * p.p1 + e * p.p2 + s.translation.1);
            if s.conjugated {
                z.conj()
            } else {
                z
            }
        })
        .collect();
    SquaredPhaseMatrix { d, entries }
}

/// Searches `F` with `det F = +-1 mod d`, translations `a` with `2a = 0 mod d`
/// and characters `q` for a relabeling of `candidate` that equals `reference`
/// entrywise within `tol`.
pub fn match_symmetry(candidate: &SquaredPhaseMatrix, reference: &SquaredPhaseMatrix, tol: f64) -> Option<SymmetryMatch> {
    let d = candidate.d;
    if reference.d != d {
        return None;
    }
    let di = d as i64;
    let ctx = WhContext::new(d).ok()?;
    let all = DisplacementIndex::all(d);
    let translations: Vec<(i64, i64)> = (0..di)
        .flat_map(|x| (0..di).map(move |y| (x, y)))
        .filter(|&(x, y)| (2 * x) % di == 0 && (2 * y) % di == 0)
        .collect();
    for a in 0..di {
        for b in 0..di {
            for c in 0..di {
                for e in 0..di {
                    let det = (a * e - b * c).rem_euclid(di);
                    let conjugated = if det == 1 {
                        false
                    } else if det == di - 1 {
                        true
                    } else {
                        continue;
                    };
                    for &tr in &translations {
                        'chars: for q in &all {
                            for p in &all {
                                let w = ctx.omega_pow(2 * symplectic(p, q).expect("same modulus"));
                                let mut z = w * candidate.get(a * p.p1 + b * p.p2 + tr.0, c * p.p1 + e * p.p2 + tr.1);
                                if conjugated {
                                    z = z.conj();
                                }
                                if (z - reference.at(p)).norm() > tol {
                                    continue 'chars;
                                }
                            }
                            return Some(SymmetryMatch {
                                f: [[a, b], [c, e]],
                                translation: tr,
                                character: (q.p1, q.p2),
                                conjugated,
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// Orbit label of a solver fiducial if its squared phases are a relabeling of
/// one of the reference matrices (dimensions 4, 6, 8).
pub fn classify_fiducial(f: &Fiducial) -> Option<&'static str> {
    let m = phase_matrix_from_fiducial(f, DEFAULT_SIC_TOLERANCE).ok()?;
    let (label, reference) = match f.d {
        4 => ("4a", reference_m0_d4()),
        6 => ("6a", reference_m0_d6()),
        8 => ("8b", reference_m0_d8()),
        _ => return None,
    };
    match_symmetry(&m, &reference, 1e-8).map(|_| label)
}
