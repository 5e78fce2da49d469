//! Restricted defect of a Hermitian unitary `U`.
//!
//! Deformations `U_jk -> U_jk e^{i R_jk}` are parametrized by a real
//! antisymmetric `R` supported on the non-zero entries of `U`. Keeping
//! `U^2 = I` to first order gives one complex linear equation per pair `j < k`:
//!
//! `-(U_kk + U_jj) U_kj R_jk + sum_{l != j,k} U_kl U_lj (R_kl - R_jl) = 0`.
//!
//! The rephasings `R_jk = theta_k - theta_j` always solve it, so the defect is
//! the nullity of the system minus `n - 1`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{derive_structures, gram, tightness_deviation, GramMatrix, TIGHT_TOLERANCE};
use crate::numkernel::{real_singular_values, ComplexMatrix, C64};
use crate::phasemat::{structures_from_m, SquaredPhaseMatrix};
use crate::sic::{sic_ensemble, Fiducial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectOptions {
    /// Singular values at or below `rank_relative * sigma_max` count as zero.
    pub rank_relative: f64,
    /// Entries with `|u_jk| < mask_relative * max|u|` are treated as zeros.
    pub mask_relative: f64,
    /// Minimum ratio of smallest retained to largest discarded singular value.
    pub min_gap_ratio: f64,
}

impl Default for DefectOptions {
    fn default() -> Self {
        DefectOptions {
            rank_relative: 1e-9,
            mask_relative: 1e-12,
            min_gap_ratio: 1e3,
        }
    }
}

/// Hermitian unitary together with its zero pattern.
#[derive(Debug, Clone)]
pub struct StructuredUnitary {
    pub n: usize,
    pub u: ComplexMatrix,
    /// Strict upper triangle positions treated as zero.
    pub zero_mask: Vec<(usize, usize)>,
}

impl StructuredUnitary {
    /// Checks `U = U^dagger` to `1e-10` and `U^2 = I` to `1e-8`.
    pub fn new(u: ComplexMatrix, mask_relative: f64) -> Result<Self> {
        let n = u.require_square()?;
        u.check_finite()?;
        let herm = u.hermitian_deviation();
        if herm > 1e-10 {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let unit = (&u * &u).max_abs_diff(&ComplexMatrix::identity(n));
        if unit > 1e-8 {
            return Err(Error::StructureViolation {
                check: "U^2 = I",
                deviation: unit,
            });
        }
        let cut = mask_relative * u.max_abs();
        let zero_mask = (0..n)
            .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
            .filter(|&(j, k)| u[(j, k)].norm() < cut)
            .collect();
        Ok(StructuredUnitary { n, u, zero_mask })
    }

    pub fn variables(&self) -> usize {
        self.n * (self.n - 1) / 2 - self.zero_mask.len()
    }
}

/// `U = I - (2d/n) G` for a tight frame Gram.
pub fn structured_unitary_from_gram(g: &GramMatrix) -> Result<StructuredUnitary> {
    let dev = tightness_deviation(g);
    if dev > TIGHT_TOLERANCE {
        return Err(Error::NotTight { deviation: dev });
    }
    let u = &ComplexMatrix::identity(g.n) - &g.entries.scale_real(2.0 * g.d as f64 / g.n as f64);
    StructuredUnitary::new(u, DefectOptions::default().mask_relative)
}

/// `U = -H` for the Hadamard matrix of a SIC fiducial (any covariance group).
pub fn structured_unitary_from_fiducial(f: &Fiducial) -> Result<StructuredUnitary> {
    let s = derive_structures(&gram(&sic_ensemble(f)?)?)?;
    StructuredUnitary::new(s.h.scale_real(-1.0), DefectOptions::default().mask_relative)
}

/// `U = -H` for the Hadamard matrix generated by a squared-phase matrix.
pub fn structured_unitary_from_m(m: &SquaredPhaseMatrix) -> Result<StructuredUnitary> {
    let s = structures_from_m(m)?;
    StructuredUnitary::new(s.derived.h.scale_real(-1.0), DefectOptions::default().mask_relative)
}

/// Column index of each unmasked variable `R_jk`, `j < k`.
struct VariableMap {
    n: usize,
    column: Vec<Option<usize>>,
    count: usize,
}

impl VariableMap {
    fn new(su: &StructuredUnitary) -> Self {
        let n = su.n;
        let mut column = vec![None; n * n];
        for &(j, k) in &su.zero_mask {
            column[j * n + k] = Some(usize::MAX);
        }
        let mut count = 0;
        for j in 0..n {
            for k in j + 1..n {
                let slot = &mut column[j * n + k];
                *slot = if slot.is_some() {
                    None
                } else {
                    count += 1;
                    Some(count - 1)
                };
            }
        }
        VariableMap { n, column, count }
    }

    /// Column and sign of `R_ab` (`R_ba = -R_ab`).
    fn lookup(&self, a: usize, b: usize) -> Option<(usize, f64)> {
        if a < b {
            self.column[a * self.n + b].map(|c| (c, 1.0))
        } else {
            self.column[b * self.n + a].map(|c| (c, -1.0))
        }
    }
}

fn equation_row(su: &StructuredUnitary, vars: &VariableMap, j: usize, k: usize) -> Vec<C64> {
    let u = &su.u;
    let mut row = vec![C64::new(0.0, 0.0); vars.count];
    if let Some((c, s)) = vars.lookup(j, k) {
        row[c] -= (u[(k, k)] + u[(j, j)]) * u[(k, j)] * s;
    }
    for l in 0..su.n {
        if l == j || l == k {
            continue;
        }
        let coef = u[(k, l)] * u[(l, j)];
        if let Some((c, s)) = vars.lookup(k, l) {
            row[c] += coef * s;
        }
        if let Some((c, s)) = vars.lookup(j, l) {
            row[c] -= coef * s;
        }
    }
    row
}

/// Real system of `n(n-1)` rows (real and imaginary parts of each pair
/// equation) over the unmasked variables.
pub fn assemble_system(su: &StructuredUnitary) -> DMatrix<f64> {
    let vars = VariableMap::new(su);
    let n = su.n;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect();
    let rows: Vec<Vec<C64>> = pairs
        .par_iter()
        .map(|&(j, k)| equation_row(su, &vars, j, k))
        .collect();
    let mut a = DMatrix::<f64>::zeros(2 * pairs.len(), vars.count);
    for (i, row) in rows.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            a[(2 * i, c)] = z.re;
            a[(2 * i + 1, c)] = z.im;
        }
    }
    a
}

/// Max residual `|A R|` over the rephasing directions `theta = e_m`,
/// `m = 1..n-1`.
pub fn gauge_residual(su: &StructuredUnitary) -> f64 {
    let a = assemble_system(su);
    let vars = VariableMap::new(su);
    let mut worst = 0.0f64;
    for m in 1..su.n {
        let mut r = nalgebra::DVector::<f64>::zeros(vars.count);
        for j in 0..su.n {
            for k in j + 1..su.n {
                if let Some((c, _)) = vars.lookup(j, k) {
                    let theta = |i: usize| if i == m { 1.0 } else { 0.0 };
                    r[c] = theta(k) - theta(j);
                }
            }
        }
        worst = worst.max((&a * r).amax());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub n: usize,
    pub defect: usize,
    pub raw_nullity: usize,
    pub gauge_dimension: usize,
    pub variables: usize,
    pub masked: usize,
    pub equations: usize,
    pub rank_threshold: f64,
    pub smallest_retained: f64,
    pub largest_discarded: Option<f64>,
    /// `smallest_retained / largest_discarded`, `None` when nothing was discarded.
    pub gap_ratio: Option<f64>,
    /// False when the gap ratio is below the configured minimum.
    pub determinate: bool,
}

pub fn restricted_defect(su: &StructuredUnitary, opts: &DefectOptions) -> Result<DefectReport> {
    let a = assemble_system(su);
    let sv = real_singular_values(&a);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cut = opts.rank_relative * sigma_max;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let raw_nullity = a.ncols() - rank;
    let gauge = su.n - 1;
    if raw_nullity < gauge {
        return Err(Error::GaugeInconsistency {
            raw_nullity,
            gauge,
        });
    }
    let smallest_retained = if rank > 0 { sv[rank - 1] } else { 0.0 };
    let largest_discarded = sv.get(rank).copied();
    let gap_ratio = largest_discarded.map(|s| if s > 0.0 { smallest_retained / s } else { f64::MAX });
    let determinate = gap_ratio.is_none_or(|g| g > opts.min_gap_ratio);
    Ok(DefectReport {
        n: su.n,
        defect: raw_nullity - gauge,
        raw_nullity,
        gauge_dimension: gauge,
        variables: a.ncols(),
        masked: su.zero_mask.len(),
        equations: a.nrows(),
        rank_threshold: cut,
        smallest_retained,
        largest_discarded,
        gap_ratio,
        determinate,
    })
}

/// Defect of `-H` at each point of a squared-phase family.
pub fn defect_along_family(points: &[SquaredPhaseMatrix], opts: &DefectOptions) -> Result<Vec<DefectReport>> {
    points
        .par_iter()
        .map(|m| restricted_defect(&structured_unitary_from_m(m)?, opts))
        .collect()
}

/// One line of a defect table: label, n, defect, then the ledger fields.
pub fn table_row(label: &str, r: &DefectReport) -> String {
    let gap = r
        .gap_ratio
        .map(|g| format!("{g:.3e}"))
        .unwrap_or_else(|| "inf".into());
    format!(
        "{label:<8} n={:<4} defect={:<5} nullity={:<5} gauge={:<4} vars={:<6} masked={:<5} gap={gap}{}",
        r.n,
        r.defect,
        r.raw_nullity,
        r.gauge_dimension,
        r.variables,
        r.masked,
        if r.determinate { "" } else { " indeterminate" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasemat::family_d4;
    use crate::sic::{family_fiducial_d3, registry_lookup};

    fn defect_of(f: &Fiducial) -> DefectReport {
        restricted_defect(&structured_unitary_from_fiducial(f).unwrap(), &DefectOptions::default()).unwrap()
    }

    #[test]
    fn d2_from_gram_ledger() {
        let g = gram(&sic_ensemble(&registry_lookup("d2").unwrap()).unwrap()).unwrap();
        let su = structured_unitary_from_gram(&g).unwrap();
        assert_eq!(su.n, 4);
        assert!(su.zero_mask.is_empty());
        let r = restricted_defect(&su, &DefectOptions::default()).unwrap();
        assert_eq!((r.variables, r.gauge_dimension, r.raw_nullity, r.defect), (6, 3, 3, 0));
    }

    #[test]
    fn orthonormal_basis_gives_minus_identity() {
        let g = GramMatrix::new(3, ComplexMatrix::identity(3)).unwrap();
        let su = structured_unitary_from_gram(&g).unwrap();
        assert!(su.u.max_abs_diff(&ComplexMatrix::identity(3).scale_real(-1.0)) < 1e-15);
        assert_eq!(su.zero_mask.len(), 3);
    }

    #[test]
    fn etf_unitary_moduli() {
        let s = derive_structures(&gram(&sic_ensemble(&family_fiducial_d3(0.3)).unwrap()).unwrap()).unwrap();
        let su = structured_unitary_from_gram(&s.e).unwrap();
        for j in 0..9 {
            for k in 0..9 {
                if j != k {
                    assert!((su.u[(j, k)].norm() - 1.0 / 3.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_tight_rejected() {
        let mut m = ComplexMatrix::identity(3);
        m[(0, 0)] = C64::new(2.0, 0.0);
        let g = GramMatrix::new(2, m).unwrap();
        assert!(matches!(structured_unitary_from_gram(&g), Err(Error::NotTight { .. })));
    }

    #[test]
    fn small_table_values() {
        assert_eq!(defect_of(&registry_lookup("d2").unwrap()).defect, 0);
        assert_eq!(defect_of(&family_fiducial_d3(0.3)).defect, 2);
        let r = defect_of(&registry_lookup("4a").unwrap());
        assert_eq!(r.defect, 1);
        assert!(r.determinate);
    }

    #[test]
    fn gauge_directions_solve_system() {
        let su = structured_unitary_from_fiducial(&registry_lookup("d4").unwrap()).unwrap();
        assert!(gauge_residual(&su) < 1e-10);
    }

    #[test]
    fn rephasing_invariance() {
        use rand::{Rng, SeedableRng};
        let su = structured_unitary_from_fiducial(&family_fiducial_d3(0.7)).unwrap();
        let base = restricted_defect(&su, &DefectOptions::default()).unwrap().defect;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let ph: Vec<C64> = (0..su.n).map(|_| C64::from_polar(1.0, rng.random::<f64>() * 6.3)).collect();
            let u = ComplexMatrix::from_fn(su.n, su.n, |j, k| ph[j] * su.u[(j, k)] * ph[k].conj());
            let r = restricted_defect(&StructuredUnitary::new(u, 1e-12).unwrap(), &DefectOptions::default()).unwrap();
            assert_eq!(r.defect, base);
        }
    }

    #[test]
    fn family_points() {
        let pts: Vec<_> = [0.4, 1.3].iter().map(|&t| family_d4(t)).collect();
        let reps = defect_along_family(&pts, &DefectOptions::default()).unwrap();
        assert!(reps.iter().all(|r| r.defect == 1));
        let r = defect_along_family(&[family_d4(0.0)], &DefectOptions::default()).unwrap();
        assert!(r[0].defect >= 1);
    }

    #[test]
    fn report_json_and_row() {
        let r = defect_of(&registry_lookup("d2").unwrap());
        let back: DefectReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(table_row("2a", &r).starts_with("2a       n=4    defect=0"));
    }
}
