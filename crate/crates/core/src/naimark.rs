//! Weyl-Heisenberg covariant Naimark complement of a SIC.
//!
//! The complement fiducial stacks an orthonormal completion `phi_2..phi_d`
//! of the SIC fiducial into one vector of length `d(d-1)`, scaled by
//! `1/sqrt(d-1)`. The group acts block-diagonally with `D_p` on each block.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{gram, naimark_complement, triple_products, GramMatrix};
use crate::numkernel::{inner, norm, C64, ZERO};
use crate::sic::{require_sic, sic_ensemble, Covariance, Fiducial, DEFAULT_SIC_TOLERANCE};
use crate::whgroup::{DisplacementIndex, WhContext};

/// Candidates whose residual after projection falls below this are skipped.
pub const COMPLETION_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockFiducial {
    pub d: usize,
    /// `d - 1` consecutive blocks of `d` amplitudes.
    pub vector: Vec<C64>,
}

impl BlockFiducial {
    pub fn new(d: usize, vector: Vec<C64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "block fiducials need d >= 2".into(),
            });
        }
        if vector.len() != d * (d - 1) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} amplitudes", d * (d - 1)),
                found: format!("{}", vector.len()),
            });
        }
        Ok(BlockFiducial { d, vector })
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[C64]> {
        self.vector.chunks(self.d)
    }

    pub fn block_count(&self) -> usize {
        self.d - 1
    }

    /// `D~_p |psi~>`.
    pub fn displaced(&self, ctx: &WhContext, p: &DisplacementIndex) -> Vec<C64> {
        self.blocks().flat_map(|b| ctx.apply_displacement(p, b)).collect()
    }

    /// The `d^2` vectors `D~_p |psi~>` in ensemble order.
    pub fn ensemble(&self) -> Result<Vec<Vec<C64>>> {
        let ctx = WhContext::new(self.d)?;
        Ok(DisplacementIndex::all(self.d)
            .iter()
            .map(|p| self.displaced(&ctx, p))
            .collect())
    }

    /// Header `d blocks=K`, then one `re im` line per amplitude.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} blocks={}\n", self.d, self.block_count());
        for z in &self.vector {
            out.push_str(&format!("{:.16e} {:.16e}\n", z.re, z.im));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty block fiducial file".into()))?;
        let mut tokens = header.split_whitespace();
        let d: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let blocks: usize = tokens
            .next()
            .and_then(|t| t.strip_prefix("blocks="))
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("header {header:?} lacks blocks=K")))?;
        if d < 2 || blocks != d - 1 {
            return Err(Error::Parse(format!("expected blocks={} for d={d}", d.saturating_sub(1))));
        }
        let mut vector = Vec::with_capacity(d * blocks);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [re, im] = parts[..] else {
                return Err(Error::Parse(format!("expected `re im`, got {line:?}")));
            };
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
            vector.push(C64::new(parse(re)?, parse(im)?));
        }
        Self::new(d, vector)
    }
}

/// Gram-Schmidt completion of the unit vector `psi` over the standard basis,
/// in index order. Returns `d - 1` vectors.
pub fn orthonormal_completion(psi: &[C64]) -> Vec<Vec<C64>> {
    let d = psi.len();
    let mut basis: Vec<Vec<C64>> = vec![psi.to_vec()];
    for k in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![ZERO; d];
        v[k] = C64::new(1.0, 0.0);
        // Two passes keep the completion orthogonal to rounding.
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let r = norm(&v);
        if r < COMPLETION_CUTOFF {
            continue;
        }
        basis.push(v.iter().map(|z| z / r).collect());
    }
    basis.split_off(1)
}

/// Block fiducial of the Naimark complement of a Weyl-Heisenberg SIC.
pub fn wh_naimark_fiducial(f: &Fiducial) -> Result<BlockFiducial> {
    if f.covariance != Covariance::Weyl {
        return Err(Error::UnsupportedDimension {
            d: f.d,
            reason: "block complement is built for Weyl-Heisenberg covariant fiducials".into(),
        });
    }
    require_sic(f, DEFAULT_SIC_TOLERANCE)?;
    let scale = 1.0 / ((f.d - 1) as f64).sqrt();
    let vector = orthonormal_completion(&f.vector)
        .into_iter()
        .flatten()
        .map(|z| z * scale)
        .collect();
    BlockFiducial::new(f.d, vector)
}

#[derive(Debug, Clone, Serialize)]
pub struct NaimarkReport {
    pub d: usize,
    pub target: f64,
    pub max_deviation: f64,
    pub worst_p: (i64, i64),
    pub tolerance: f64,
    pub passed: bool,
}

/// `1 / ((d-1)(d^2-1))`.
pub fn naimark_target(d: usize) -> f64 {
    let d = d as f64;
    1.0 / ((d - 1.0) * (d * d - 1.0))
}

/// Checks `|<psi~|D~_p|psi~>|^2` against the target for `p != 0` and `1` at `p = 0`.
pub fn verify_naimark_overlaps(bf: &BlockFiducial, tol: f64) -> Result<NaimarkReport> {
    let ctx = WhContext::new(bf.d)?;
    let target = naimark_target(bf.d);
    let mut worst = (0.0f64, (0, 0));
    for p in DisplacementIndex::all(bf.d) {
        let z = inner(&bf.vector, &bf.displaced(&ctx, &p));
        let want = if p.is_zero_mod_d() { 1.0 } else { target };
        let dev = (z.norm_sqr() - want).abs();
        if !(dev <= worst.0) {
            worst = (dev, (p.p1, p.p2));
        }
    }
    Ok(NaimarkReport {
        d: bf.d,
        target,
        max_deviation: worst.0,
        worst_p: worst.1,
        tolerance: tol,
        passed: worst.0 <= tol,
    })
}

/// Max difference between the triple products of the block ensemble and those
/// of the generic complement of the SIC Gram.
pub fn complement_triple_product_deviation(f: &Fiducial, bf: &BlockFiducial) -> Result<f64> {
    let sic = gram(&sic_ensemble(f)?)?;
    let generic = naimark_complement(&sic)?;
    let block = gram(&bf.ensemble()?)?;
    let block = GramMatrix::new(generic.d, block.entries)?;
    Ok(triple_products(&block).max_abs_diff(&triple_products(&generic)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sic::{family_fiducial_d3, registry_lookup, Provenance};

    #[test]
    fn d2_block_vector() {
        let bf = wh_naimark_fiducial(&registry_lookup("d2").unwrap()).unwrap();
        assert_eq!(bf.vector.len(), 2);
        assert!((norm(&bf.vector) - 1.0).abs() < 1e-14);
        let r = verify_naimark_overlaps(&bf, 1e-9).unwrap();
        assert!((r.target - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn d3_blocks_orthogonal_to_fiducial() {
        let f = family_fiducial_d3(0.4);
        let bf = wh_naimark_fiducial(&f).unwrap();
        for b in bf.blocks() {
            assert!(inner(&f.vector, b).norm() < 1e-14);
            assert!((norm(b) - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        }
        let r = verify_naimark_overlaps(&bf, 1e-9).unwrap();
        assert!((r.target - 1.0 / 16.0).abs() < 1e-15);
        assert!(r.passed);
    }

    #[test]
    fn completion_skips_parallel_candidates() {
        let e0 = vec![C64::new(1.0, 0.0), ZERO, ZERO];
        let c = orthonormal_completion(&e0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0][1], C64::new(1.0, 0.0));
        assert_eq!(c[1][2], C64::new(1.0, 0.0));
    }

    #[test]
    fn registry_complements_verify() {
        for key in ["d4", "d5", "d6"] {
            let f = registry_lookup(key).unwrap();
            let bf = wh_naimark_fiducial(&f).unwrap();
            assert!(verify_naimark_overlaps(&bf, 1e-9).unwrap().passed, "{key}");
            assert!(complement_triple_product_deviation(&f, &bf).unwrap() < 1e-9, "{key}");
        }
    }

    #[test]
    fn random_block_vector_fails() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<C64> = (0..6).map(|_| C64::new(rng.random(), rng.random())).collect();
        let n = norm(&raw);
        let bf = BlockFiducial::new(3, raw.iter().map(|z| z / n).collect()).unwrap();
        let r = verify_naimark_overlaps(&bf, 1e-9).unwrap();
        assert!(!r.passed && r.max_deviation > 1e-3);
    }

    #[test]
    fn non_sic_rejected() {
        let v = vec![C64::new(1.0, 0.0), ZERO, ZERO];
        let f = Fiducial::new(v, None, Provenance::Supplied).unwrap();
        assert!(matches!(wh_naimark_fiducial(&f), Err(Error::NotSic { .. })));
    }

    #[test]
    fn text_round_trip() {
        let bf = wh_naimark_fiducial(&registry_lookup("d4").unwrap()).unwrap();
        let text = bf.to_text();
        assert!(text.starts_with("4 blocks=3\n"));
        assert_eq!(BlockFiducial::from_text(&text).unwrap(), bf);
        assert!(BlockFiducial::from_text("4 blocks=2\n").is_err());
    }
}
