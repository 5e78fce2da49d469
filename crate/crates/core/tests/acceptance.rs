//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use sicframes::defect::{
    defect_along_family, restricted_defect, structured_unitary_from_fiducial, DefectOptions, DefectReport,
};
use sicframes::frames::{
    check_hermitian_hadamard, derive_structures, gram, hadamard_square_map, naimark_complement,
    off_diagonal_modulus_range, sic_gram_deviation, turek_sic_from_hadamard, welch_check, DerivedStructures,
};
use sicframes::naimark::{verify_naimark_overlaps, wh_naimark_fiducial};
use sicframes::numkernel::{hermitian_spectrum, numerical_rank, ComplexMatrix, Tolerance};
use sicframes::phasemat::{
    check_m_property, classify_fiducial, d6_junction_limit, d6_t0, distance_to_junction, family_d4, family_d6,
    family_d8, phase_matrix_from_fiducial, structures_from_m, D6Branch, D8Curve, D8CurveId,
};
use sicframes::sic::{
    family_fiducial_d3, registry_lookup, sic_ensemble, solve_fiducial, verify_sic, Fiducial, SolveOptions,
};
use sicframes::stff::{covariant_family, stff_from_sic, verify_stff, wigner_stff, FMatrix, StffPair};

const MASTER_SEED: u64 = 2026;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Solved {
    fiducials: Vec<Fiducial>,
    errors: Vec<String>,
    times: Vec<(usize, Duration)>,
}

impl Solved {
    fn get(&self, d: usize) -> Result<&Fiducial, String> {
        self.fiducials
            .iter()
            .find(|f| f.d == d)
            .ok_or_else(|| format!("no solver fiducial for d={d}"))
    }
}

fn solve_all() -> Solved {
    let mut out = Solved {
        fiducials: Vec::new(),
        errors: Vec::new(),
        times: Vec::new(),
    };
    for d in 2..=8 {
        let start = Instant::now();
        match solve_fiducial(d, MASTER_SEED, &SolveOptions::default()) {
            Ok(f) => out.fiducials.push(f),
            Err(e) => out.errors.push(format!("d={d}: {e}")),
        }
        out.times.push((d, start.elapsed()));
    }
    out
}

fn structures(f: &Fiducial) -> Result<DerivedStructures, String> {
    let g = gram(&sic_ensemble(f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    derive_structures(&g).map_err(|e| e.to_string())
}

fn c1(s: &Solved) -> Outcome {
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let mut ok = s.errors.is_empty() && opts.restarts <= 200;
    for f in &s.fiducials {
        let v = verify_sic(f, 1e-9).map_err(|e| e.to_string())?;
        worst = worst.max(v.max_overlap_deviation);
        ok &= v.max_overlap_deviation < 1e-9;
    }
    let slowest = s.times.iter().map(|t| t.1).max().unwrap_or_default();
    ok &= slowest < Duration::from_secs(600) && s.fiducials.len() == 7;
    let times: Vec<String> = s.times.iter().map(|(d, t)| format!("d{d} {:.2}s", t.as_secs_f64())).collect();
    check(
        ok,
        format!(
            "d=2..8 max overlap deviation {worst:.2e}, restarts <= {}, {}{}",
            opts.restarts,
            times.join(" "),
            if s.errors.is_empty() { String::new() } else { format!("; errors: {}", s.errors.join("; ")) }
        ),
    )
}

fn c2(s: &Solved) -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for d in 2..=8 {
        let st = structures(s.get(d)?)?;
        let spec = hermitian_spectrum(&st.q, Tolerance::default()).map_err(|e| e.to_string())?;
        for &l in &spec.eigenvalues {
            worst = worst.max(l.abs().min((l - 1.0).abs()));
        }
        ok &= numerical_rank(&st.q, Tolerance::default()) == d * (d + 1) / 2;
    }
    check(ok && worst <= 1e-8, format!("eigenvalues within {worst:.2e} of {{0,1}}, ranks d(d+1)/2 for d=2..8"))
}

fn c3(s: &Solved) -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_complement = 0.0f64;
    let mut ok = true;
    for d in 2..=8 {
        let df = d as f64;
        let st = structures(s.get(d)?)?;
        let n = d * d;
        let r = check_hermitian_hadamard(&st.h, 1e-8).map_err(|e| e.to_string())?;
        ok &= r.passed;
        let moduli = st
            .h
            .as_dmatrix()
            .iter()
            .fold(0.0f64, |acc, z| acc.max((z.norm() - 1.0 / df).abs()));
        let unitary = (&st.h * &st.h).max_abs_diff(&ComplexMatrix::identity(n));
        let trace = (st.h.trace() - df).norm();
        let (elo, ehi) = off_diagonal_modulus_range(&st.e.entries);
        let (tlo, thi) = off_diagonal_modulus_range(&st.e_tilde.entries);
        let etf = [
            (elo - 1.0 / (df + 1.0)).abs(),
            (ehi - 1.0 / (df + 1.0)).abs(),
            (tlo - 1.0 / (df - 1.0)).abs(),
            (thi - 1.0 / (df - 1.0)).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(moduli).max(unitary).max(trace).max(st.h.hermitian_deviation()).max(etf);
        let comp = naimark_complement(&st.e).map_err(|e| e.to_string())?;
        let back = naimark_complement(&st.e_tilde).map_err(|e| e.to_string())?;
        let c = comp.entries.max_abs_diff(&st.e_tilde.entries).max(back.entries.max_abs_diff(&st.e.entries));
        worst_complement = worst_complement.max(c);
    }
    check(
        ok && worst <= 1e-8 && worst_complement <= 1e-9,
        format!("H/E/E~ worst deviation {worst:.2e}, E <-> E~ complement {worst_complement:.2e}"),
    )
}

fn c4(s: &Solved) -> Outcome {
    let st = structures(s.get(3)?)?;
    let g = turek_sic_from_hadamard(&st.h).map_err(|e| e.to_string())?;
    let (dev, _) = sic_gram_deviation(&g);
    let sq = hadamard_square_map(&st.h).map_err(|e| e.to_string())?;
    let r = check_hermitian_hadamard(&sq, 1e-9).map_err(|e| e.to_string())?;
    // The Hadamard matrix of the Turek SIC is the square map of the original.
    let back = derive_structures(&g).map_err(|e| e.to_string())?.h.max_abs_diff(&sq);
    check(
        dev <= 1e-9 && r.passed && back <= 1e-9,
        format!(
            "Turek Gram SIC deviation {dev:.2e}, 3 H o H Hadamard passed={} (min diagonal {:.3}), H(turek) vs 3 H o H {back:.2e}",
            r.passed, r.min_diagonal
        ),
    )
}

fn stff_residuals(pair: &StffPair) -> Result<(f64, f64, f64), String> {
    let d = pair.d as f64;
    let mut proj = 0.0f64;
    let mut tight = 0.0f64;
    let mut pairwise = 0.0f64;
    for (pi, sign) in [(&pair.pi_plus, 1.0), (&pair.pi_minus, -1.0)] {
        let fam = covariant_family(pi).map_err(|e| e.to_string())?;
        let r = verify_stff(&fam, 1.0).map_err(|e| e.to_string())?;
        let want_rank = (d + sign) / 2.0;
        if (r.rank as f64 - want_rank).abs() > 0.0 {
            return Err(format!("rank {} != {want_rank}", r.rank));
        }
        let target = (d + 2.0 * sign) / 4.0;
        proj = proj.max(r.projector_deviation).max(r.rank_deviation);
        tight = tight.max(r.tight_deviation);
        pairwise = pairwise
            .max((r.pairwise_trace_min - target).abs())
            .max((r.pairwise_trace_max - target).abs());
    }
    Ok((proj, tight, pairwise))
}

fn c5(s: &Solved) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for d in [3, 5, 7] {
        let pair = stff_from_sic(s.get(d)?, &FMatrix::default_for(d).map_err(|e| e.to_string())?, 1e-9)
            .map_err(|e| e.to_string())?;
        let (p, t, w) = stff_residuals(&pair)?;
        ok &= p < 1e-9 && t <= 1e-8 && w <= 1e-8;
        let wig = wigner_stff(d).map_err(|e| e.to_string())?;
        let (wp, wt, ww) = stff_residuals(&wig)?;
        ok &= wp < 1e-12 && wt < 1e-12 && ww < 1e-12;
        notes.push(format!("d{d} sic {:.1e}/{:.1e}/{:.1e} wigner {:.1e}", p, t, w, wp.max(wt).max(ww)));
    }
    check(ok, format!("projector/sum/pairwise residuals: {}", notes.join(", ")))
}

fn c6() -> Outcome {
    let mut d4 = 0.0f64;
    for k in 0..100 {
        d4 = d4.max(check_m_property(&family_d4(2.0 * PI * k as f64 / 100.0)));
    }
    let curves = [D8CurveId::Flat, D8CurveId::Plus, D8CurveId::Minus];
    let at = |id, psi| family_d8(D8Curve { curve_id: id, psi }).map_err(|e| e.to_string());
    let mut d8 = 0.0f64;
    for id in curves {
        for k in 0..100 {
            d8 = d8.max(check_m_property(&at(id, 2.0 * PI * k as f64 / 100.0)?));
        }
    }
    let mut coincide = 0.0f64;
    for psi in [0.0, PI] {
        let ms: Vec<_> = curves.iter().map(|&id| at(id, psi)).collect::<Result<_, _>>()?;
        coincide = coincide.max(ms[0].max_abs_diff(&ms[1])).max(ms[0].max_abs_diff(&ms[2]));
    }
    let mut separation = f64::INFINITY;
    for k in 0..50 {
        let psi = PI * (2 * k + 1) as f64 / 50.0;
        let ms: Vec<_> = curves.iter().map(|&id| at(id, psi)).collect::<Result<_, _>>()?;
        separation = separation
            .min(ms[0].max_abs_diff(&ms[1]))
            .min(ms[0].max_abs_diff(&ms[2]))
            .min(ms[1].max_abs_diff(&ms[2]));
    }
    let s3 = 3f64.sqrt();
    let t0 = d6_t0();
    let mut ts = Vec::new();
    for k in 0..5 {
        ts.push(s3 + (3.0 - s3) * (k + 1) as f64 / 5.0);
        ts.push(-s3 - (t0 - s3) * (k + 1) as f64 / 5.0);
    }
    let mut d6 = 0.0f64;
    let mut junction = 0.0f64;
    for n in D6Branch::all_tuples() {
        for &t in &ts {
            let m = family_d6(&D6Branch::new(n, t)).map_err(|e| format!("branch {n:?} t={t}: {e}"))?;
            d6 = d6.max(check_m_property(&m));
        }
        for sign in [1.0, -1.0] {
            junction = junction.max(distance_to_junction(&d6_junction_limit(n, sign)));
        }
    }
    check(
        d4 < 1e-12 && d8 < 1e-9 && coincide < 1e-10 && separation > 1e-6 && d6 < 1e-8 && junction <= 1e-6,
        format!(
            "d4 {d4:.1e} (100 t), d8 {d8:.1e} (3x100 psi), curves at 0/pi {coincide:.1e}, min separation {separation:.2e}, \
             d6 {d6:.1e} (72 branches x 10 t), junction limits {junction:.1e}"
        ),
    )
}

fn defect(f: &Fiducial) -> Result<DefectReport, String> {
    let su = structured_unitary_from_fiducial(f).map_err(|e| e.to_string())?;
    restricted_defect(&su, &DefectOptions::default()).map_err(|e| e.to_string())
}

fn c7(s: &Solved) -> Outcome {
    let d3 = family_fiducial_d3(0.3);
    let hoggar = registry_lookup("8H").map_err(|e| e.to_string())?;
    let rows: Vec<(&str, &Fiducial, &[usize])> = vec![
        ("2a", s.get(2)?, &[0]),
        ("3a", &d3, &[2]),
        ("4a", s.get(4)?, &[1]),
        ("5a", s.get(5)?, &[1]),
        ("6a", s.get(6)?, &[1]),
        ("7?", s.get(7)?, &[1, 16]),
        ("8?", s.get(8)?, &[1]),
        ("8H", &hoggar, &[945]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, f, allowed) in rows {
        let start = Instant::now();
        let r = defect(f)?;
        let gap = r.gap_ratio.unwrap_or(f64::INFINITY);
        ok &= allowed.contains(&r.defect) && gap > 1e3 && r.determinate;
        notes.push(format!("{label}={} (gap {gap:.0e}, {:.1}s)", r.defect, start.elapsed().as_secs_f64()));
    }
    for (d, label) in [(4, "4a"), (6, "6a")] {
        let got = classify_fiducial(s.get(d)?);
        ok &= got == Some(label);
        notes.push(format!("d{d} orbit {got:?}"));
    }
    check(ok, notes.join(", "))
}

fn c8() -> Outcome {
    let points: Vec<_> = (0..20).map(|k| family_d4(PI * (2 * k + 1) as f64 / 20.0)).collect();
    let reps = defect_along_family(&points, &DefectOptions::default()).map_err(|e| e.to_string())?;
    let ones = reps.iter().filter(|r| r.defect == 1).count();
    let values: Vec<usize> = reps.iter().map(|r| r.defect).collect();
    check(ones >= 18, format!("defect 1 at {ones}/20 samples, values {values:?}"))
}

fn c9(s: &Solved) -> Outcome {
    let mut worst = 0.0f64;
    for d in 2..=5 {
        let bf = wh_naimark_fiducial(s.get(d)?).map_err(|e| e.to_string())?;
        worst = worst.max(verify_naimark_overlaps(&bf, 1e-9).map_err(|e| e.to_string())?.max_deviation);
    }
    check(worst < 1e-9, format!("d=2..5 complement overlap deviation {worst:.2e}"))
}

fn c10(s: &Solved) -> Outcome {
    let mut worst = 0.0f64;
    for d in 2..=8 {
        let f = s.get(d)?;
        let a = structures(f)?;
        let m = phase_matrix_from_fiducial(f, 1e-9).map_err(|e| e.to_string())?;
        let b = structures_from_m(&m).map_err(|e| e.to_string())?.derived;
        worst = worst
            .max(a.q.max_abs_diff(&b.q))
            .max(a.h.max_abs_diff(&b.h))
            .max(a.e.entries.max_abs_diff(&b.e.entries))
            .max(a.e_tilde.entries.max_abs_diff(&b.e_tilde.entries));
    }
    check(worst <= 1e-9, format!("Gram and squared-phase routes agree to {worst:.2e} for d=2..8"))
}

fn c11(s: &Solved) -> Outcome {
    let mut worst2 = 0.0f64;
    let mut min_gap3 = f64::INFINITY;
    let mut ok = true;
    for d in 2..=8 {
        let g = gram(&sic_ensemble(s.get(d)?).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let w2 = welch_check(&g, 2);
        let w3 = welch_check(&g, 3);
        worst2 = worst2.max((w2.lhs - w2.rhs).abs() / w2.rhs);
        min_gap3 = min_gap3.min((w3.lhs - w3.rhs) / w3.rhs);
        ok &= w2.saturated && !w3.saturated;
    }
    check(
        ok && worst2 <= 1e-9 && min_gap3 > 1e-8,
        format!("t=2 relative gap {worst2:.2e}, t=3 relative excess >= {min_gap3:.3}"),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // that does not mention this target skips the run.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let solved = solve_all();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("solver", Box::new(|| c1(&solved))),
        ("projector Q", Box::new(|| c2(&solved))),
        ("Hadamard H and ETF pair", Box::new(|| c3(&solved))),
        ("d=3 Turek maps", Box::new(|| c4(&solved))),
        ("fusion frames", Box::new(|| c5(&solved))),
        ("squared-phase families", Box::new(c6)),
        ("restricted defect table", Box::new(|| c7(&solved))),
        ("defect along d=4 family", Box::new(c8)),
        ("Naimark complement", Box::new(|| c9(&solved))),
        ("route equivalence", Box::new(|| c10(&solved))),
        ("Welch certification", Box::new(|| c11(&solved))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
