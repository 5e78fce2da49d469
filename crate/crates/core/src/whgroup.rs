//! Weyl-Heisenberg displacement operators.
//!
//! With `tau = -exp(i pi / d)` the displacement operator acts as
//! `D_p |j> = tau^{p2 (p1 + 2j)} |j + p1 mod d>`. In even dimensions `D_p`
//! depends on `p` modulo `2d` rather than `d`: `D_{p + (d, 0)} = tau^{d p2} D_p`,
//! a sign flip whenever `p2` is odd. Indices are therefore stored reduced mod
//! `2d` there and mod `d` in odd dimensions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numkernel::{ComplexMatrix, C64, ZERO};

/// Displacement label `(p1, p2)` for dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DisplacementIndex {
    pub p1: i64,
    pub p2: i64,
    pub d: usize,
}

impl DisplacementIndex {
    pub fn new(p1: i64, p2: i64, d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        let m = Self::storage_modulus(d);
        DisplacementIndex {
            p1: p1.rem_euclid(m),
            p2: p2.rem_euclid(m),
            d,
        }
    }

    /// `2d` for even `d`, `d` for odd `d`.
    pub fn storage_modulus(d: usize) -> i64 {
        if d % 2 == 0 {
            2 * d as i64
        } else {
            d as i64
        }
    }

    /// Representative of the `k`-th index in ensemble order `k = p1 * d + p2`.
    pub fn from_ordinal(k: usize, d: usize) -> Self {
        Self::new((k / d) as i64, (k % d) as i64, d)
    }

    /// Position in ensemble order, using `p mod d`.
    pub fn ordinal(&self) -> usize {
        let d = self.d as i64;
        (self.p1.rem_euclid(d) * d + self.p2.rem_euclid(d)) as usize
    }

    pub fn is_zero_mod_d(&self) -> bool {
        let d = self.d as i64;
        self.p1.rem_euclid(d) == 0 && self.p2.rem_euclid(d) == 0
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.p1, -self.p2, self.d)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_modulus(self, other)?;
        Ok(Self::new(self.p1 + other.p1, self.p2 + other.p2, self.d))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_modulus(self, other)?;
        Ok(Self::new(self.p1 - other.p1, self.p2 - other.p2, self.d))
    }

    /// All `d^2` representatives with `0 <= p1, p2 < d` in ensemble order.
    pub fn all(d: usize) -> Vec<Self> {
        (0..d * d).map(|k| Self::from_ordinal(k, d)).collect()
    }
}

fn check_modulus(p: &DisplacementIndex, q: &DisplacementIndex) -> Result<()> {
    if p.d != q.d {
        return Err(Error::ModulusMismatch {
            left: p.d,
            right: q.d,
        });
    }
    Ok(())
}

/// Symplectic form `<p, q> = p2 q1 - p1 q2`, unreduced.
pub fn symplectic(p: &DisplacementIndex, q: &DisplacementIndex) -> Result<i64> {
    check_modulus(p, q)?;
    Ok(p.p2 * q.p1 - p.p1 * q.p2)
}

/// Dimension together with a table of the powers of `tau`.
#[derive(Debug, Clone)]
pub struct WhContext {
    pub d: usize,
    pub tau: C64,
    pub omega: C64,
    tau_powers: Vec<C64>,
}

impl WhContext {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "dimension must be at least 2".into(),
            });
        }
        // tau = exp(i pi (d + 1) / d), so tau^k = exp(i pi m / d) with
        // m = k (d + 1) mod 2d; this keeps tau^(2d) = 1 exact.
        let two_d = 2 * d;
        let tau_powers: Vec<C64> = (0..two_d)
            .map(|k| {
                let m = (k * (d + 1)) % two_d;
                unit_root(m, two_d)
            })
            .collect();
        Ok(WhContext {
            d,
            tau: tau_powers[1],
            omega: tau_powers[2 % two_d],
            tau_powers,
        })
    }

    /// `tau^k` for any integer `k`.
    pub fn tau_pow(&self, k: i64) -> C64 {
        self.tau_powers[k.rem_euclid(2 * self.d as i64) as usize]
    }

    /// `omega^k = tau^(2k)`.
    pub fn omega_pow(&self, k: i64) -> C64 {
        self.tau_pow(2 * k.rem_euclid(self.d as i64))
    }

    pub fn index(&self, p1: i64, p2: i64) -> DisplacementIndex {
        DisplacementIndex::new(p1, p2, self.d)
    }

    /// Phase picked up by basis vector `j`: `tau^{p2 (p1 + 2j)}`.
    fn phase(&self, p: &DisplacementIndex, j: usize) -> C64 {
        self.tau_pow(p.p2 * (p.p1 + 2 * j as i64))
    }

    pub fn displacement(&self, p: &DisplacementIndex) -> ComplexMatrix {
        assert_eq!(p.d, self.d, "index modulus must match the context");
        let d = self.d;
        let shift = p.p1.rem_euclid(d as i64) as usize;
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            m[((j + shift) % d, j)] = self.phase(p, j);
        }
        m
    }

    /// `D_p v` without forming the matrix.
    pub fn apply_displacement(&self, p: &DisplacementIndex, v: &[C64]) -> Vec<C64> {
        let d = self.d;
        assert_eq!(v.len(), d, "vector length must equal the dimension");
        let shift = p.p1.rem_euclid(d as i64) as usize;
        let mut out = vec![ZERO; d];
        for (j, x) in v.iter().enumerate() {
            out[(j + shift) % d] = self.phase(p, j) * x;
        }
        out
    }

    /// `<v| D_p |v>`.
    pub fn expectation(&self, p: &DisplacementIndex, v: &[C64]) -> C64 {
        let d = self.d;
        let shift = p.p1.rem_euclid(d as i64) as usize;
        (0..d)
            .map(|j| v[(j + shift) % d].conj() * self.phase(p, j) * v[j])
            .sum()
    }

    /// Parity operator `P|j> = |-j mod d>`; defined for odd `d` only, where it
    /// equals `(1/d) sum_p D_p`.
    pub fn parity(&self) -> Result<ComplexMatrix> {
        let d = self.d;
        if d % 2 == 0 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "the parity operator (1/d) sum D_p is not Hermitian in even dimensions".into(),
            });
        }
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            m[((d - j) % d, j)] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    /// Coefficients `a_p = (1/d) Tr(D_p^dagger a)` in ensemble order.
    pub fn expand_operator(&self, a: &ComplexMatrix) -> Result<OperatorExpansion> {
        let d = self.d;
        if a.rows() != d || a.cols() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", a.rows(), a.cols()),
            });
        }
        let coefficients = DisplacementIndex::all(d)
            .iter()
            .map(|p| {
                let shift = p.p1 as usize % d;
                let tr: C64 = (0..d)
                    .map(|j| self.phase(p, j).conj() * a[((j + shift) % d, j)])
                    .sum();
                tr / d as f64
            })
            .collect();
        Ok(OperatorExpansion { d, coefficients })
    }
}

fn unit_root(m: usize, n: usize) -> C64 {
    // Exact values on the axes avoid 1e-16 noise in sums that must cancel.
    if m == 0 {
        return C64::new(1.0, 0.0);
    }
    if 2 * m == n {
        return C64::new(-1.0, 0.0);
    }
    if 4 * m == n {
        return C64::new(0.0, 1.0);
    }
    if 4 * m == 3 * n {
        return C64::new(0.0, -1.0);
    }
    let theta = 2.0 * PI * m as f64 / n as f64;
    C64::new(theta.cos(), theta.sin())
}

/// Expansion of an operator in the displacement basis.
#[derive(Debug, Clone)]
pub struct OperatorExpansion {
    pub d: usize,
    /// `a_p` in ensemble order `p1 * d + p2`.
    pub coefficients: Vec<C64>,
}

impl OperatorExpansion {
    pub fn coefficient(&self, p: &DisplacementIndex) -> C64 {
        self.coefficients[p.ordinal()]
    }

    /// `sum_p a_p D_p`.
    pub fn reconstruct(&self, ctx: &WhContext) -> ComplexMatrix {
        let d = self.d;
        let mut m = ComplexMatrix::zeros(d, d);
        for (k, a) in self.coefficients.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let p = DisplacementIndex::from_ordinal(k, d);
            let shift = p.p1 as usize;
            for j in 0..d {
                m[((j + shift) % d, j)] += a * ctx.phase(&p, j);
            }
        }
        m
    }
}

/// Tensor product `D_{p_1} (x) D_{p_2} (x) ...` over factors of the given
/// dimensions.
pub fn product_displacement(dims: &[usize], ps: &[DisplacementIndex]) -> Result<ComplexMatrix> {
    if dims.len() != ps.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} displacement indices", dims.len()),
            found: format!("{}", ps.len()),
        });
    }
    if dims.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: "at least one tensor factor".into(),
            found: "none".into(),
        });
    }
    let mut out: Option<ComplexMatrix> = None;
    for (&d, p) in dims.iter().zip(ps) {
        if p.d != d {
            return Err(Error::ModulusMismatch { left: d, right: p.d });
        }
        let m = WhContext::new(d)?.displacement(p);
        out = Some(match out {
            None => m,
            Some(acc) => acc.kron(&m),
        });
    }
    Ok(out.expect("non-empty factor list"))
}

/// All elements of the product group in lexicographic order, first factor
/// slowest, each factor enumerated in ensemble order.
pub fn product_group_indices(dims: &[usize]) -> Vec<Vec<DisplacementIndex>> {
    let mut out: Vec<Vec<DisplacementIndex>> = vec![Vec::new()];
    for &d in dims {
        let mut next = Vec::with_capacity(out.len() * d * d);
        for prefix in &out {
            for p in DisplacementIndex::all(d) {
                let mut v = prefix.clone();
                v.push(p);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// All `prod(d_i^2)` product displacement matrices in the order of
/// [`product_group_indices`].
pub fn product_group(dims: &[usize]) -> Result<Vec<ComplexMatrix>> {
    product_group_indices(dims)
        .iter()
        .map(|ps| product_displacement(dims, ps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{structure_checks, Tolerance, ONE};

    #[test]
    fn identity_and_shift() {
        let ctx = WhContext::new(2).unwrap();
        let d0 = ctx.displacement(&ctx.index(0, 0));
        assert_eq!(d0.max_abs_diff(&ComplexMatrix::identity(2)), 0.0);

        let ctx = WhContext::new(3).unwrap();
        let x = ctx.displacement(&ctx.index(1, 0));
        for j in 0..3 {
            for i in 0..3 {
                let want = if i == (j + 1) % 3 { ONE } else { ZERO };
                assert_eq!(x[(i, j)], want);
            }
        }
    }

    #[test]
    fn tau_table_is_consistent() {
        for d in 2..=16 {
            let ctx = WhContext::new(d).unwrap();
            let tau = -C64::from_polar(1.0, PI / d as f64);
            assert!((ctx.tau - tau).norm() < 1e-15);
            assert!((ctx.omega - tau * tau).norm() < 1e-15);
            assert!((ctx.tau_pow(2 * d as i64) - ONE).norm() == 0.0);
            let mut acc = ONE;
            for k in 0..(2 * d as i64) {
                assert!((ctx.tau_pow(k) - acc).norm() < 1e-13);
                acc *= ctx.tau;
            }
        }
    }

    #[test]
    fn symplectic_basics() {
        let p = DisplacementIndex::new(1, 0, 4);
        let q = DisplacementIndex::new(0, 1, 4);
        assert_eq!(symplectic(&p, &q).unwrap(), -1);
        assert_eq!(symplectic(&p, &p).unwrap(), 0);
        let r = DisplacementIndex::new(0, 1, 5);
        assert!(matches!(
            symplectic(&p, &r),
            Err(Error::ModulusMismatch { left: 4, right: 5 })
        ));
    }

    #[test]
    fn character_sum_vanishes_off_zero() {
        for d in [3usize, 5] {
            let ctx = WhContext::new(d).unwrap();
            for q in DisplacementIndex::all(d) {
                let s: C64 = DisplacementIndex::all(d)
                    .iter()
                    .map(|p| ctx.tau_pow(symplectic(p, &q).unwrap()))
                    .sum();
                let want = if q.is_zero_mod_d() { (d * d) as f64 } else { 0.0 };
                assert!((s - want).norm() < 1e-12, "d={d} q={q:?} sum={s}");
            }
        }
    }

    #[test]
    fn composition_law_exhaustive() {
        for d in 2..=7 {
            let ctx = WhContext::new(d).unwrap();
            let all = DisplacementIndex::all(d);
            let mats: Vec<_> = all.iter().map(|p| ctx.displacement(p)).collect();
            for (a, p) in all.iter().enumerate() {
                for (b, q) in all.iter().enumerate() {
                    let lhs = &mats[a] * &mats[b];
                    let pq = p.add(q).unwrap();
                    let rhs = ctx.displacement(&pq).scale(ctx.tau_pow(symplectic(p, q).unwrap()));
                    assert!(lhs.max_abs_diff(&rhs) < 1e-13, "d={d} p={p:?} q={q:?}");
                }
            }
        }
    }

    #[test]
    fn adjoint_is_negated_index() {
        for d in 2..=16 {
            let ctx = WhContext::new(d).unwrap();
            for p in DisplacementIndex::all(d) {
                let dp = ctx.displacement(&p);
                let dm = ctx.displacement(&p.neg());
                assert!(dp.adjoint().max_abs_diff(&dm) < 1e-14);
                let r = structure_checks(&dp, Tolerance::default()).unwrap();
                assert!(r.unitary.passed);
                let tr = dp.trace();
                let want = if p.is_zero_mod_d() { d as f64 } else { 0.0 };
                assert!((tr - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn even_dimension_sign_flip() {
        for d in [2usize, 4] {
            let ctx = WhContext::new(d).unwrap();
            for p in DisplacementIndex::all(d) {
                let shifted = ctx.index(p.p1 + d as i64, p.p2);
                let a = ctx.displacement(&p);
                let b = ctx.displacement(&shifted);
                // D_{p+(d,0)} = tau^{d p2} D_p and tau^d = -1.
                let sign = if p.p2 % 2 == 0 { 1.0 } else { -1.0 };
                assert!(a.scale_real(sign).max_abs_diff(&b) < 1e-14);
                if p.p2 % 2 == 1 {
                    assert!(a.scale_real(-1.0).max_abs_diff(&b) < 1e-14);
                }
            }
            let p = ctx.index(0, 1);
            let q = ctx.index(d as i64, 1);
            assert!(ctx.displacement(&p).scale_real(-1.0).max_abs_diff(&ctx.displacement(&q)) < 1e-14);
        }
    }

    #[test]
    fn hilbert_schmidt_orthonormality() {
        for d in 2..=7 {
            let ctx = WhContext::new(d).unwrap();
            let mats: Vec<_> = DisplacementIndex::all(d).iter().map(|p| ctx.displacement(p)).collect();
            for (a, ma) in mats.iter().enumerate() {
                for (b, mb) in mats.iter().enumerate() {
                    let ip = ma.hs_inner(mb) / d as f64;
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - want).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn apply_matches_matrix() {
        let ctx = WhContext::new(6).unwrap();
        let v: Vec<C64> = (0..6).map(|k| C64::new(k as f64 * 0.3 - 1.0, 0.1 * k as f64)).collect();
        for p in DisplacementIndex::all(6) {
            let want = ctx.displacement(&p).apply(&v);
            let got = ctx.apply_displacement(&p, &v);
            for (a, b) in want.iter().zip(&got) {
                assert!((a - b).norm() < 1e-14);
            }
            let e: C64 = crate::numkernel::inner(&v, &got);
            assert!((e - ctx.expectation(&p, &v)).norm() < 1e-13);
        }
    }

    #[test]
    fn parity_properties() {
        let ctx = WhContext::new(3).unwrap();
        let p = ctx.parity().unwrap();
        assert_eq!(p[(0, 0)], ONE);
        assert_eq!(p[(2, 1)], ONE);
        assert_eq!(p[(1, 2)], ONE);
        assert_eq!(p[(1, 1)], ZERO);

        let ctx = WhContext::new(5).unwrap();
        let p = ctx.parity().unwrap();
        assert!((&p * &p).max_abs_diff(&ComplexMatrix::identity(5)) < 1e-15);

        let ctx = WhContext::new(7).unwrap();
        let mut sum = ComplexMatrix::zeros(7, 7);
        for q in DisplacementIndex::all(7) {
            sum = &sum + &ctx.displacement(&q);
        }
        assert!(sum.scale_real(1.0 / 7.0).max_abs_diff(&ctx.parity().unwrap()) < 1e-12);

        assert!(matches!(
            WhContext::new(4).unwrap().parity(),
            Err(Error::UnsupportedDimension { d: 4, .. })
        ));
    }

    #[test]
    fn expansion_of_basis_elements() {
        let ctx = WhContext::new(4).unwrap();
        let e = ctx.expand_operator(&ComplexMatrix::identity(4)).unwrap();
        assert!((e.coefficients[0] - ONE).norm() < 1e-15);
        assert!(e.coefficients[1..].iter().all(|c| c.norm() < 1e-15));
        for q in DisplacementIndex::all(4) {
            let e = ctx.expand_operator(&ctx.displacement(&q)).unwrap();
            for (k, c) in e.coefficients.iter().enumerate() {
                let want = if k == q.ordinal() { 1.0 } else { 0.0 };
                assert!((c - want).norm() < 1e-14);
            }
        }
        assert!(ctx.expand_operator(&ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn expansion_reconstructs() {
        let ctx = WhContext::new(5).unwrap();
        let a = ComplexMatrix::from_fn(5, 5, |i, j| C64::new((i * 7 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.3));
        let e = ctx.expand_operator(&a).unwrap();
        assert!(e.reconstruct(&ctx).max_abs_diff(&a) < 1e-11);
    }

    #[test]
    fn product_displacements() {
        let id = product_displacement(&[2], &[DisplacementIndex::new(0, 0, 2)]).unwrap();
        assert_eq!(id.max_abs_diff(&ComplexMatrix::identity(2)), 0.0);

        let m = product_displacement(
            &[2, 2],
            &[DisplacementIndex::new(1, 0, 2), DisplacementIndex::new(0, 1, 2)],
        )
        .unwrap();
        assert_eq!(m.rows(), 4);
        assert!(structure_checks(&m, Tolerance::default()).unwrap().unitary.passed);

        assert!(product_displacement(&[2, 2], &[DisplacementIndex::new(0, 0, 2)]).is_err());

        let group = product_group(&[2, 2, 2]).unwrap();
        assert_eq!(group.len(), 64);
        for (a, ma) in group.iter().enumerate() {
            for (b, mb) in group.iter().enumerate() {
                let ip = ma.hs_inner(mb);
                let want = if a == b { 8.0 } else { 0.0 };
                assert!((ip - want).norm() < 1e-12);
            }
        }
    }
}
