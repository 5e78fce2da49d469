//! SIC fiducials: verification, overlap phases, the frame-potential solver and
//! the embedded fiducial registry.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{inner, norm, normalized, C64, ZERO};
use crate::whgroup::{product_group, DisplacementIndex, WhContext};

/// Group whose orbit of the fiducial forms the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Covariance {
    /// The Weyl-Heisenberg group of the fiducial's dimension.
    Weyl,
    /// Tensor product of Weyl-Heisenberg groups with the given factor
    /// dimensions (their product must equal `d`).
    Product(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Solver {
        master_seed: u64,
        restart: usize,
        potential_gap: f64,
    },
    Family {
        t: f64,
    },
    Data {
        source: String,
    },
    Supplied,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Solver {
                master_seed,
                restart,
                potential_gap,
            } => write!(f, "solver seed={master_seed} restart={restart} gap={potential_gap:.3e}"),
            Provenance::Family { t } => write!(f, "family t={t}"),
            Provenance::Data { source } => write!(f, "data {source}"),
            Provenance::Supplied => write!(f, "supplied"),
        }
    }
}

/// Unit vector whose group orbit is (candidate for) a SIC.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiducial {
    pub d: usize,
    pub vector: Vec<C64>,
    pub label: Option<String>,
    pub provenance: Provenance,
    pub covariance: Covariance,
}

impl Fiducial {
    /// Wraps a vector that must already have unit norm within `1e-12`; the
    /// stored copy is renormalized exactly.
    pub fn new(vector: Vec<C64>, label: Option<String>, provenance: Provenance) -> Result<Self> {
        let d = vector.len();
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "fiducials need dimension at least 2".into(),
            });
        }
        if let Some(k) = vector.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { row: k, col: 0 });
        }
        let dev = (norm(&vector) - 1.0).abs();
        if dev > 1e-12 {
            return Err(Error::StructureViolation {
                check: "unit_norm",
                deviation: dev,
            });
        }
        Ok(Fiducial {
            d,
            vector: normalized(&vector),
            label,
            provenance,
            covariance: Covariance::Weyl,
        })
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn from_unnormalized(vector: &[C64], provenance: Provenance) -> Result<Self> {
        let n = norm(vector);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Parse("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(normalized(vector), None, provenance)
    }

    pub fn with_covariance(mut self, covariance: Covariance) -> Result<Self> {
        if let Covariance::Product(dims) = &covariance {
            if dims.iter().product::<usize>() != self.d || dims.iter().any(|&k| k < 2) {
                return Err(Error::ShapeMismatch {
                    expected: format!("factor dimensions with product {}", self.d),
                    found: format!("{dims:?}"),
                });
            }
        }
        self.covariance = covariance;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Label or the generic `unclassified:d=N`.
    pub fn display_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("unclassified:d={}", self.d))
    }

    /// Text form: dimension line (with an optional `product=a,b,..` token),
    /// label line, then one `re im` line per amplitude.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.covariance {
            Covariance::Weyl => out.push_str(&format!("{}\n", self.d)),
            Covariance::Product(dims) => {
                let dims: Vec<String> = dims.iter().map(|k| k.to_string()).collect();
                out.push_str(&format!("{} product={}\n", self.d, dims.join(",")));
            }
        }
        out.push_str(&self.display_label());
        out.push('\n');
        for z in &self.vector {
            out.push_str(&format!("{:.16e} {:.16e}\n", z.re, z.im));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty fiducial file".into()))?;
        let mut tokens = header.split_whitespace();
        let d: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad dimension line {header:?}")))?;
        let mut covariance = Covariance::Weyl;
        for tok in tokens {
            match tok.strip_prefix("product=") {
                Some(list) => {
                    let dims: std::result::Result<Vec<usize>, _> = list.split(',').map(str::parse).collect();
                    covariance = Covariance::Product(
                        dims.map_err(|_| Error::Parse(format!("bad product dimensions {list:?}")))?,
                    );
                }
                None => return Err(Error::Parse(format!("unexpected token {tok:?} in dimension line"))),
            }
        }
        let label = lines
            .next()
            .ok_or_else(|| Error::Parse("missing label line".into()))?
            .to_string();
        let mut vector = Vec::with_capacity(d);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("expected `re im`, got {line:?}")));
            }
            let re: f64 = parts[0].parse().map_err(|_| Error::Parse(format!("bad number {:?}", parts[0])))?;
            let im: f64 = parts[1].parse().map_err(|_| Error::Parse(format!("bad number {:?}", parts[1])))?;
            vector.push(C64::new(re, im));
        }
        if vector.len() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{d} amplitudes"),
                found: format!("{}", vector.len()),
            });
        }
        let label = if label.starts_with("unclassified:") { None } else { Some(label) };
        Fiducial::new(
            vector,
            label,
            Provenance::Data {
                source: source.to_string(),
            },
        )?
        .with_covariance(covariance)
    }

    /// The group elements acting on this fiducial, as matrices, in ensemble
    /// order.
    fn group_matrices(&self) -> Result<Option<Vec<crate::numkernel::ComplexMatrix>>> {
        match &self.covariance {
            Covariance::Weyl => Ok(None),
            Covariance::Product(dims) => Ok(Some(product_group(dims)?)),
        }
    }
}

/// `D_p |psi>` for every group element in ensemble order.
pub fn sic_ensemble(f: &Fiducial) -> Result<Vec<Vec<C64>>> {
    match f.group_matrices()? {
        None => {
            let ctx = WhContext::new(f.d)?;
            Ok(DisplacementIndex::all(f.d)
                .iter()
                .map(|p| ctx.apply_displacement(p, &f.vector))
                .collect())
        }
        Some(mats) => Ok(mats.iter().map(|m| m.apply(&f.vector)).collect()),
    }
}

/// `<psi| D_p |psi>` in ensemble order.
pub fn overlaps(f: &Fiducial) -> Result<Vec<C64>> {
    match f.group_matrices()? {
        None => {
            let ctx = WhContext::new(f.d)?;
            Ok(DisplacementIndex::all(f.d)
                .iter()
                .map(|p| ctx.expectation(p, &f.vector))
                .collect())
        }
        Some(mats) => Ok(mats.iter().map(|m| inner(&f.vector, &m.apply(&f.vector))).collect()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SicVerdict {
    pub is_sic: bool,
    pub max_overlap_deviation: f64,
    /// Ensemble ordinal of the worst overlap (`p1 * d + p2` for Weyl
    /// covariance).
    pub worst_p: usize,
    pub tolerance: f64,
}

pub const DEFAULT_SIC_TOLERANCE: f64 = 1e-9;

/// Checks `|<psi|D_p|psi>|^2 = 1/(d+1)` for every non-identity element and
/// `= 1` for the identity.
pub fn verify_sic(f: &Fiducial, tol: f64) -> Result<SicVerdict> {
    let c = overlaps(f)?;
    let target = 1.0 / (f.d as f64 + 1.0);
    let mut worst = 0;
    let mut max_dev = 0.0f64;
    for (k, z) in c.iter().enumerate() {
        let want = if k == 0 { 1.0 } else { target };
        let dev = (z.norm_sqr() - want).abs();
        if dev > max_dev || dev.is_nan() {
            max_dev = dev;
            worst = k;
        }
    }
    Ok(SicVerdict {
        is_sic: max_dev < tol,
        max_overlap_deviation: max_dev,
        worst_p: worst,
        tolerance: tol,
    })
}

/// Errors with [`Error::NotSic`] unless the verdict passes.
pub fn require_sic(f: &Fiducial, tol: f64) -> Result<SicVerdict> {
    let v = verify_sic(f, tol)?;
    if !v.is_sic {
        let worst = match f.covariance {
            Covariance::Weyl => {
                let p = DisplacementIndex::from_ordinal(v.worst_p, f.d);
                format!("p=({},{})", p.p1, p.p2)
            }
            Covariance::Product(_) => format!("element {}", v.worst_p),
        };
        return Err(Error::NotSic {
            deviation: v.max_overlap_deviation,
            worst,
        });
    }
    Ok(v)
}

/// `2d/(d+1)`, the minimum of the frame potential over unit vectors.
pub fn welch_bound(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 + 1.0)
}

/// `sum_p |<psi|D_p|psi>|^4` over the group.
pub fn frame_potential(f: &Fiducial) -> Result<f64> {
    Ok(overlaps(f)?.iter().map(|z| z.norm_sqr().powi(2)).sum())
}

fn weyl_potential(ctx: &WhContext, ps: &[DisplacementIndex], v: &[C64]) -> f64 {
    ps.iter().map(|p| ctx.expectation(p, v).norm_sqr().powi(2)).sum()
}

/// Complex form of the Euclidean gradient: `grad_x + i grad_y` of
/// `sum_p |<v|D_p|v>|^4`, equal to `2 dF/d(conj v)`.
fn weyl_complex_gradient(ctx: &WhContext, ps: &[DisplacementIndex], v: &[C64]) -> Vec<C64> {
    let d = v.len();
    let mut g = vec![ZERO; d];
    for p in ps {
        let c = ctx.expectation(p, v);
        let w = 4.0 * c.norm_sqr();
        let fwd = ctx.apply_displacement(p, v);
        let back = ctx.apply_displacement(&p.neg(), v);
        for j in 0..d {
            g[j] += w * (c.conj() * fwd[j] + c * back[j]);
        }
    }
    g
}

fn project_tangent(v: &[C64], g: &mut [C64]) {
    let radial = inner(v, g).re;
    for (gj, vj) in g.iter_mut().zip(v) {
        *gj -= vj * radial;
    }
}

/// Gradient of the frame potential with respect to `(Re psi, Im psi)`,
/// projected onto the tangent space of the unit sphere. Layout: the `d` real
/// parts followed by the `d` imaginary parts.
pub fn frame_potential_gradient(f: &Fiducial) -> Result<Vec<f64>> {
    let d = f.d;
    let mut g = match f.group_matrices()? {
        None => {
            let ctx = WhContext::new(d)?;
            weyl_complex_gradient(&ctx, &DisplacementIndex::all(d), &f.vector)
        }
        Some(mats) => {
            let mut g = vec![ZERO; d];
            for m in &mats {
                let fwd = m.apply(&f.vector);
                let back = m.adjoint().apply(&f.vector);
                let c = inner(&f.vector, &fwd);
                let w = 4.0 * c.norm_sqr();
                for j in 0..d {
                    g[j] += w * (c.conj() * fwd[j] + c * back[j]);
                }
            }
            g
        }
    };
    project_tangent(&f.vector, &mut g);
    Ok(g.iter().map(|z| z.re).chain(g.iter().map(|z| z.im)).collect())
}

/// `e^{i theta_p} = sqrt(d+1) <psi|D_p^dagger|psi>` with `e^{i theta_0} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPhases {
    pub d: usize,
    /// Ensemble order `p1 * d + p2`.
    pub phases: Vec<C64>,
}

impl OverlapPhases {
    pub fn phase(&self, p: &DisplacementIndex) -> C64 {
        self.phases[p.ordinal()]
    }
}

/// Overlap phases of a verified Weyl-covariant SIC, normalized to unit modulus.
pub fn overlap_phases(f: &Fiducial, tol: f64) -> Result<OverlapPhases> {
    if f.covariance != Covariance::Weyl {
        return Err(Error::UnsupportedDimension {
            d: f.d,
            reason: "overlap phases are defined for Weyl-Heisenberg covariant fiducials".into(),
        });
    }
    require_sic(f, tol)?;
    let c = overlaps(f)?;
    let phases = c
        .iter()
        .enumerate()
        .map(|(k, z)| if k == 0 { C64::new(1.0, 0.0) } else { z.conj() / z.norm() })
        .collect();
    Ok(OverlapPhases { d: f.d, phases })
}

/// `(0, 1, -e^{it}) / sqrt(2)`, a SIC fiducial in dimension 3 for every `t`.
pub fn family_fiducial_d3(t: f64) -> Fiducial {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = vec![ZERO, C64::new(s, 0.0), -C64::from_polar(s, t)];
    Fiducial::new(v, Some(format!("3a:t={t}")), Provenance::Family { t })
        .expect("family fiducial has unit norm")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub restarts: usize,
    /// Restarts are evaluated concurrently in fixed batches of this size; the
    /// first batch containing a converged restart decides the result.
    pub batch: usize,
    pub gap_target: f64,
    pub verify_target: f64,
    pub descent_iterations: usize,
    /// Potential gap at which descent hands over to the Gauss-Newton polish.
    pub polish_switch: f64,
    pub polish_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            restarts: 200,
            batch: 8,
            gap_target: 1e-13,
            verify_target: DEFAULT_SIC_TOLERANCE,
            descent_iterations: 20_000,
            polish_switch: 1e-5,
            polish_iterations: 200,
        }
    }
}

/// Best-so-far potential after every descent and polish iteration of one
/// restart.
#[derive(Debug, Clone, Default)]
pub struct DescentTrace {
    pub best_potential: Vec<f64>,
}

#[derive(Debug, Clone)]
struct RestartOutcome {
    restart: usize,
    vector: Vec<C64>,
    gap: f64,
    max_deviation: f64,
}

fn restart_rng(master_seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(restart as u64);
    rng
}

fn random_start(d: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    normalized(&v)
}

fn max_overlap_deviation(ctx: &WhContext, ps: &[DisplacementIndex], v: &[C64]) -> f64 {
    let target = 1.0 / (ctx.d as f64 + 1.0);
    ps.iter()
        .skip(1)
        .map(|p| (ctx.expectation(p, v).norm_sqr() - target).abs())
        .fold(0.0, f64::max)
}

/// Momentum descent on the sphere with an adaptive step.
fn descend(
    ctx: &WhContext,
    ps: &[DisplacementIndex],
    start: Vec<C64>,
    opts: &SolveOptions,
    trace: &mut DescentTrace,
) -> (Vec<C64>, f64) {
    let bound = welch_bound(ctx.d);
    let d = ctx.d;
    let beta = 0.9;
    let mut x = start;
    let mut fx = weyl_potential(ctx, ps, &x);
    let mut step = 0.05;
    let mut velocity = vec![ZERO; d];
    trace.best_potential.push(fx);
    for _ in 0..opts.descent_iterations {
        if fx - bound < opts.polish_switch || step < 1e-14 {
            break;
        }
        let mut g = weyl_complex_gradient(ctx, ps, &x);
        project_tangent(&x, &mut g);
        let trial_v: Vec<C64> = velocity.iter().zip(&g).map(|(v, gj)| v * beta - gj * step).collect();
        let trial: Vec<C64> = x.iter().zip(&trial_v).map(|(a, b)| a + b).collect();
        let trial = normalized(&trial);
        let ft = weyl_potential(ctx, ps, &trial);
        if ft < fx {
            x = trial;
            fx = ft;
            // Keep the momentum tangent to the new point.
            velocity = trial_v;
            project_tangent(&x, &mut velocity);
            step *= 1.1;
        } else {
            velocity = vec![ZERO; d];
            step *= 0.5;
        }
        trace.best_potential.push(fx);
    }
    (x, fx)
}

/// Damped Gauss-Newton on the residuals `|<v|D_p|v>|^2 - 1/(d+1)` plus the
/// normalization residual.
fn polish(
    ctx: &WhContext,
    ps: &[DisplacementIndex],
    start: Vec<C64>,
    opts: &SolveOptions,
    trace: &mut DescentTrace,
) -> Vec<C64> {
    let d = ctx.d;
    let target = 1.0 / (d as f64 + 1.0);
    let residuals = |v: &[C64]| -> DVector<f64> {
        let mut r = DVector::zeros(ps.len());
        for (k, p) in ps.iter().enumerate().skip(1) {
            r[k] = ctx.expectation(p, v).norm_sqr() - target;
        }
        r[0] = inner(v, v).re - 1.0;
        r
    };
    let jacobian = |v: &[C64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(ps.len(), 2 * d);
        for (k, p) in ps.iter().enumerate() {
            if k == 0 {
                for i in 0..d {
                    j[(0, i)] = 2.0 * v[i].re;
                    j[(0, d + i)] = 2.0 * v[i].im;
                }
                continue;
            }
            let c = ctx.expectation(p, v);
            let fwd = ctx.apply_displacement(p, v);
            let back = ctx.apply_displacement(&p.neg(), v);
            for i in 0..d {
                let w = 2.0 * (c.conj() * fwd[i] + c * back[i]);
                j[(k, i)] = w.re;
                j[(k, d + i)] = w.im;
            }
        }
        j
    };
    let mut x = start;
    let mut r = residuals(&x);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut best = *trace.best_potential.last().unwrap_or(&f64::INFINITY);
    for _ in 0..opts.polish_iterations {
        if r.amax() < 1e-15 {
            break;
        }
        let jac = jacobian(&x);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let rhs = -(&jt * &r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..2 * d {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&rhs);
            let trial: Vec<C64> = (0..d).map(|i| x[i] + C64::new(delta[i], delta[d + i])).collect();
            let trial = normalized(&trial);
            let rt = residuals(&trial);
            let ct = rt.norm_squared();
            if ct < cost {
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.2).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        best = best.min(weyl_potential(ctx, ps, &x));
        trace.best_potential.push(best);
        if !improved {
            break;
        }
    }
    x
}

fn run_restart(d: usize, master_seed: u64, restart: usize, opts: &SolveOptions) -> (RestartOutcome, DescentTrace) {
    let ctx = WhContext::new(d).expect("validated dimension");
    let ps = DisplacementIndex::all(d);
    let mut rng = restart_rng(master_seed, restart);
    let start = random_start(d, &mut rng);
    let mut trace = DescentTrace::default();
    let (x, _) = descend(&ctx, &ps, start, opts, &mut trace);
    let x = polish(&ctx, &ps, x, opts, &mut trace);
    let gap = weyl_potential(&ctx, &ps, &x) - welch_bound(d);
    let max_deviation = max_overlap_deviation(&ctx, &ps, &x);
    (
        RestartOutcome {
            restart,
            vector: x,
            gap,
            max_deviation,
        },
        trace,
    )
}

/// Runs a single restart and returns its descent trace; exposed for
/// inspection of the descent behaviour.
pub fn solver_trace(d: usize, master_seed: u64, restart: usize, opts: &SolveOptions) -> Result<DescentTrace> {
    WhContext::new(d)?;
    Ok(run_restart(d, master_seed, restart, opts).1)
}

/// Searches for a Weyl-Heisenberg SIC fiducial by minimizing the frame
/// potential from random restarts.
///
/// The result depends only on `(d, master_seed, opts)`.
pub fn solve_fiducial(d: usize, master_seed: u64, opts: &SolveOptions) -> Result<Fiducial> {
    WhContext::new(d)?;
    let batch = opts.batch.max(1);
    let mut best_gap = f64::INFINITY;
    let mut start = 0;
    while start < opts.restarts {
        let end = (start + batch).min(opts.restarts);
        let outcomes: Vec<RestartOutcome> = (start..end)
            .into_par_iter()
            .map(|r| run_restart(d, master_seed, r, opts).0)
            .collect();
        for o in &outcomes {
            best_gap = best_gap.min(o.gap);
        }
        let winner = outcomes
            .into_iter()
            .filter(|o| o.gap < opts.gap_target && o.max_deviation < opts.verify_target)
            .min_by(|a, b| a.gap.total_cmp(&b.gap).then(a.restart.cmp(&b.restart)));
        if let Some(o) = winner {
            let f = Fiducial::new(
                o.vector,
                None,
                Provenance::Solver {
                    master_seed,
                    restart: o.restart,
                    potential_gap: o.gap,
                },
            )?;
            require_sic(&f, opts.verify_target)?;
            return Ok(f);
        }
        start = end;
    }
    Err(Error::NoConvergence {
        restarts: opts.restarts,
        best_gap,
    })
}

const REGISTRY_FILES: &[(&str, &str)] = &[
    ("d2", include_str!("../data/d2.txt")),
    ("d3", include_str!("../data/d3.txt")),
    ("d4", include_str!("../data/d4.txt")),
    ("d5", include_str!("../data/d5.txt")),
    ("d6", include_str!("../data/d6.txt")),
    ("d7", include_str!("../data/d7.txt")),
    ("d8", include_str!("../data/d8.txt")),
    ("8H", include_str!("../data/hoggar.txt")),
];

/// Keys of the embedded registry entries.
pub fn registry_keys() -> Vec<&'static str> {
    REGISTRY_FILES.iter().map(|(k, _)| *k).collect()
}

/// Looks up an embedded fiducial by key (`d2`..`d8`, `8H`), by the orbit label
/// stored in its data file, or as `3a:t=<value>` for the dimension-3 family.
pub fn registry_lookup(label: &str) -> Result<Fiducial> {
    if let Some(t) = label.strip_prefix("3a:t=") {
        let t: f64 = t
            .parse()
            .map_err(|_| Error::UnknownLabel(label.to_string()))?;
        if !t.is_finite() {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        return Ok(family_fiducial_d3(t));
    }
    for (key, text) in REGISTRY_FILES {
        let source = format!("registry:{key}");
        if *key == label {
            return Fiducial::from_text(text, &source);
        }
        let f = Fiducial::from_text(text, &source)?;
        if f.label.as_deref() == Some(label) {
            return Ok(f);
        }
    }
    Err(Error::UnknownLabel(label.to_string()))
}
