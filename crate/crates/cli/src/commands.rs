use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sicframes::defect::{
    restricted_defect, structured_unitary_from_fiducial, structured_unitary_from_m, table_row, DefectOptions,
    DefectReport,
};
use sicframes::frames::{
    check_hermitian_hadamard, derive_structures, gram, matrix_to_json, off_diagonal_modulus_range,
    tightness_deviation, GramMatrix,
};
use sicframes::naimark::{complement_triple_product_deviation, verify_naimark_overlaps, wh_naimark_fiducial};
use sicframes::numkernel::{numerical_rank, structure_checks};
use sicframes::phasemat::{
    check_m_property, family_d3, family_d4, family_d6, family_d8, D6Branch, D8Curve, D8CurveId, SquaredPhaseMatrix,
};
use sicframes::sic::{
    family_fiducial_d3, registry_lookup, require_sic, sic_ensemble, solve_fiducial, verify_sic, Covariance,
    Fiducial, SolveOptions,
};
use sicframes::stff::{covariant_family, stff_from_sic, verify_stff, FMatrix};
use sicframes::{ComplexMatrix, Tolerance};

use crate::config::{
    Command, CurveName, DefectArgs, DeriveArgs, FamilyArgs, FamilyName, InputArgs, NaimarkArgs, RunConfig,
    SolveArgs, Table1Args,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
    Lib(sicframes::Error),
}

impl From<sicframes::Error> for CliError {
    fn from(e: sicframes::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use sicframes::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Lib(e) => match e {
                E::NotSic { .. }
                | E::NotTight { .. }
                | E::NotHermitian { .. }
                | E::StructureViolation { .. }
                | E::NoConvergence { .. }
                | E::ResidualTooLarge { .. }
                | E::BranchInconsistency { .. }
                | E::GaugeInconsistency { .. }
                | E::InvalidPhases(_) => 2,
                _ => 1,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Verification(m) => ("verification_failed", m.clone()),
            CliError::Lib(e) => (e.kind(), e.to_string()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() }).to_string()
    }
}

type CliResult<T> = Result<T, CliError>;

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Lib(e.error.into()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_matrix(path: &Path, m: &ComplexMatrix) -> CliResult<()> {
    let mut text = matrix_to_json(m)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `registry:<label>` or a fiducial file path.
pub fn load_fiducial(input: &str) -> CliResult<Fiducial> {
    if let Some(label) = input.strip_prefix("registry:") {
        return Ok(registry_lookup(label)?);
    }
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::Lib(sicframes::Error::Io(std::io::Error::new(e.kind(), format!("{input}: {e}")))))?;
    Ok(Fiducial::from_text(&text, input)?)
}

fn short_label(f: &Fiducial) -> String {
    f.label.clone().unwrap_or_else(|| format!("{}?", f.d))
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    let tol = config.tolerance;
    let stol = config.structure_tolerance;
    for (name, v) in [("tolerance", tol), ("structure tolerance", stol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!("{name} must be a positive number, got {v}")));
        }
    }
    match &config.command {
        Command::Solve(a) => solve(a, tol),
        Command::VerifySic(a) => verify(a, tol),
        Command::Derive(a) => derive(a, tol, stol),
        Command::Family(a) => family(a),
        Command::Defect(a) => defect(a),
        Command::Naimark(a) => naimark(a, tol),
        Command::Table1(a) => table1(a),
    }
}

fn solve(a: &SolveArgs, tol: f64) -> CliResult<()> {
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let opts = SolveOptions {
        restarts: a.restarts,
        verify_target: tol,
        ..SolveOptions::default()
    };
    let f = solve_fiducial(a.dimension, a.seed, &opts)?;
    let v = verify_sic(&f, tol)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("sic-d{}-seed{}.txt", a.dimension, a.seed)));
    write_atomic(&out, f.to_text().as_bytes())?;
    println!(
        "solve d={} seed={} -> {} ({}; max overlap deviation {:.3e})",
        a.dimension,
        a.seed,
        out.display(),
        f.provenance,
        v.max_overlap_deviation
    );
    if !v.is_sic {
        return Err(CliError::Verification(format!(
            "solver output deviates by {:.3e} > {tol:e}",
            v.max_overlap_deviation
        )));
    }
    Ok(())
}

fn verify(a: &InputArgs, tol: f64) -> CliResult<()> {
    let f = load_fiducial(&a.input)?;
    let v = verify_sic(&f, tol)?;
    let report = json!({
        "input": a.input,
        "d": f.d,
        "label": f.display_label(),
        "is_sic": v.is_sic,
        "max_overlap_deviation": v.max_overlap_deviation,
        "worst_index": v.worst_p,
        "tolerance": v.tolerance,
    });
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    println!(
        "{} d={} {}: max overlap deviation {:.3e} (tolerance {:e})",
        a.input,
        f.d,
        if v.is_sic { "SIC" } else { "NOT SIC" },
        v.max_overlap_deviation,
        tol
    );
    if !v.is_sic {
        return Err(CliError::Verification(format!(
            "{} is not a SIC fiducial: deviation {:.3e}",
            a.input, v.max_overlap_deviation
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct GateResult {
    name: String,
    deviation: f64,
    passed: bool,
}

/// Checks shared by `derive` and by anything re-loading its output.
pub fn check_etf(e: &GramMatrix, modulus: f64, tol: f64) -> (f64, bool) {
    let (lo, hi) = off_diagonal_modulus_range(&e.entries);
    let diag = (0..e.n).fold(0.0f64, |acc, i| acc.max((e.get(i, i).re - 1.0).abs()));
    let dev = (lo - modulus).abs().max((hi - modulus).abs()).max(diag).max(tightness_deviation(e));
    (dev, dev <= tol)
}

fn derive(a: &DeriveArgs, tol: f64, stol: f64) -> CliResult<()> {
    let f = load_fiducial(&a.input)?;
    require_sic(&f, tol)?;
    let d = f.d;
    let df = d as f64;
    let s = derive_structures(&gram(&sic_ensemble(&f)?)?)?;
    let mut gates = Vec::new();

    let qc = structure_checks(&s.q, Tolerance::absolute(stol))?;
    let rank = numerical_rank(&s.q, Tolerance::default());
    let want_rank = d * (d + 1) / 2;
    gates.push(GateResult {
        name: format!("Q projector of rank {want_rank}"),
        deviation: qc.projector.max_deviation,
        passed: qc.projector.passed && rank == want_rank,
    });
    let hr = check_hermitian_hadamard(&s.h, stol)?;
    let trace_dev = (s.h.trace().re - df).abs();
    gates.push(GateResult {
        name: "H Hermitian Hadamard with trace d".into(),
        deviation: hr
            .hermitian_deviation
            .max(hr.unitary_deviation)
            .max(hr.modulus_deviation)
            .max(trace_dev),
        passed: hr.passed && trace_dev <= stol,
    });
    let (dev, ok) = check_etf(&s.e, 1.0 / (df + 1.0), stol);
    gates.push(GateResult {
        name: "E equiangular tight frame".into(),
        deviation: dev,
        passed: ok,
    });
    let (dev, ok) = check_etf(&s.e_tilde, 1.0 / (df - 1.0), stol);
    gates.push(GateResult {
        name: "E~ equiangular tight frame".into(),
        deviation: dev,
        passed: ok,
    });

    let dir = &a.out_dir;
    write_matrix(&dir.join("q.json"), &s.q)?;
    write_matrix(&dir.join("h.json"), &s.h)?;
    write_matrix(&dir.join("e.json"), &s.e.entries)?;
    write_matrix(&dir.join("e_tilde.json"), &s.e_tilde.entries)?;
    let mut files = vec!["q.json", "h.json", "e.json", "e_tilde.json"];

    if d % 2 == 1 && f.covariance == Covariance::Weyl {
        let pair = stff_from_sic(&f, &FMatrix::default_for(d)?, tol)?;
        for (name, pi) in [("Pi+", &pair.pi_plus), ("Pi-", &pair.pi_minus)] {
            let r = verify_stff(&covariant_family(pi)?, stol)?;
            gates.push(GateResult {
                name: format!("{name} symmetric tight fusion frame"),
                deviation: r
                    .projector_deviation
                    .max(r.tight_deviation)
                    .max(r.pairwise_trace_max - r.pairwise_trace_min),
                passed: r.passed,
            });
        }
        write_matrix(&dir.join("pi_plus.json"), &pair.pi_plus)?;
        write_matrix(&dir.join("pi_minus.json"), &pair.pi_minus)?;
        files.extend(["pi_plus.json", "pi_minus.json"]);
    }

    let passed = gates.iter().all(|g| g.passed);
    write_json(
        &dir.join("report.json"),
        &json!({
            "input": a.input,
            "d": d,
            "label": f.display_label(),
            "structure_tolerance": stol,
            "files": files,
            "checks": gates,
            "passed": passed,
        }),
    )?;
    for g in &gates {
        println!("{:<40} {:.3e} {}", g.name, g.deviation, if g.passed { "ok" } else { "FAILED" });
    }
    println!("wrote {} files to {}", files.len() + 1, dir.display());
    if !passed {
        return Err(CliError::Verification("derived structures failed their checks".into()));
    }
    Ok(())
}

fn family_tolerance(name: FamilyName) -> f64 {
    match name {
        FamilyName::D3 => 1e-9,
        FamilyName::D4 => 1e-12,
        FamilyName::D6 => 1e-8,
        FamilyName::D8 => 1e-9,
    }
}

#[derive(Debug, Serialize)]
struct FamilySample {
    file: String,
    branch: Option<[u8; 5]>,
    t: f64,
    residual: f64,
    passed: bool,
}

fn family(a: &FamilyArgs) -> CliResult<()> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let (lo, hi) = match a.family {
        FamilyName::D6 => (3f64.sqrt(), 3.0),
        _ => (0.0, 2.0 * PI),
    };
    let t_min = a.t_min.unwrap_or(lo);
    let t_max = a.t_max.unwrap_or(hi);
    let ts: Vec<f64> = (0..a.samples)
        .map(|k| t_min + (t_max - t_min) * (k + 1) as f64 / a.samples as f64)
        .collect();
    let branches: Vec<Option<[u8; 5]>> = match a.family {
        FamilyName::D6 if a.all_branches => D6Branch::all_tuples().into_iter().map(Some).collect(),
        FamilyName::D6 => {
            let b: [u8; 5] = a
                .branch
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage("--branch takes five integers".into()))?;
            vec![Some(b)]
        }
        _ => vec![None],
    };
    let tol = family_tolerance(a.family);
    let mut samples = Vec::new();
    for (bi, branch) in branches.iter().enumerate() {
        for (k, &t) in ts.iter().enumerate() {
            let m = match (a.family, branch) {
                (FamilyName::D3, _) => family_d3(t)?,
                (FamilyName::D4, _) => family_d4(t),
                (FamilyName::D8, _) => family_d8(D8Curve {
                    curve_id: match a.curve {
                        CurveName::Flat => D8CurveId::Flat,
                        CurveName::Plus => D8CurveId::Plus,
                        CurveName::Minus => D8CurveId::Minus,
                    },
                    psi: t,
                })?,
                (FamilyName::D6, Some(n)) => family_d6(&D6Branch {
                    free_phase: a.free_phase,
                    ..D6Branch::new(*n, t)
                })?,
                (FamilyName::D6, None) => unreachable!("d6 always has a branch"),
            };
            let residual = check_m_property(&m);
            let file = if branches.len() > 1 {
                format!("m-b{bi:02}-{k:03}.json")
            } else {
                format!("m-{k:03}.json")
            };
            let mut text = m.to_json()?;
            text.push('\n');
            write_atomic(&a.out_dir.join(&file), text.as_bytes())?;
            samples.push(FamilySample {
                file,
                branch: *branch,
                t,
                residual,
                passed: residual <= tol,
            });
        }
    }
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    let passed = samples.iter().all(|s| s.passed);
    write_json(
        &a.out_dir.join("report.json"),
        &json!({
            "family": a.family,
            "curve": matches!(a.family, FamilyName::D8).then_some(a.curve),
            "tolerance": tol,
            "samples": samples,
            "max_residual": max_residual,
            "passed": passed,
        }),
    )?;
    println!(
        "{} samples of {:?}: max property residual {:.3e} (tolerance {tol:e}) {}",
        samples.len(),
        a.family,
        max_residual,
        if passed { "ok" } else { "FAILED" }
    );
    if !passed {
        return Err(CliError::Verification(format!("family residual {max_residual:.3e} exceeds {tol:e}")));
    }
    Ok(())
}

fn defect(a: &DefectArgs) -> CliResult<()> {
    let (su, default_label) = if a.phase_matrix {
        let m = SquaredPhaseMatrix::from_json(&fs::read_to_string(&a.input)?)?;
        let label = format!("M(d={})", m.d);
        (structured_unitary_from_m(&m)?, label)
    } else {
        let f = load_fiducial(&a.input)?;
        (structured_unitary_from_fiducial(&f)?, short_label(&f))
    };
    let label = if a.label.is_empty() { default_label } else { a.label.clone() };
    let r = restricted_defect(&su, &DefectOptions::default())?;
    if let Some(path) = &a.report {
        write_json(path, &json!({ "label": label, "report": r }))?;
    }
    println!("{}", table_row(&label, &r));
    if !r.determinate {
        return Err(CliError::Verification(format!(
            "singular value gap {:?} too small to fix the rank",
            r.gap_ratio
        )));
    }
    Ok(())
}

fn naimark(a: &NaimarkArgs, tol: f64) -> CliResult<()> {
    let f = load_fiducial(&a.input)?;
    let bf = wh_naimark_fiducial(&f)?;
    let r = verify_naimark_overlaps(&bf, tol)?;
    let triple = complement_triple_product_deviation(&f, &bf)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("naimark-d{}.txt", f.d)));
    write_atomic(&out, bf.to_text().as_bytes())?;
    let passed = r.passed && triple <= tol;
    if let Some(path) = &a.report {
        write_json(
            path,
            &json!({ "overlaps": r, "triple_product_deviation": triple, "passed": passed }),
        )?;
    }
    println!(
        "naimark d={} -> {}: overlap deviation {:.3e} from {:.6e}, triple products {:.3e} {}",
        f.d,
        out.display(),
        r.max_deviation,
        r.target,
        triple,
        if passed { "ok" } else { "FAILED" }
    );
    if !passed {
        return Err(CliError::Verification("complement overlaps failed".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TableEntry {
    label: String,
    d: usize,
    report: DefectReport,
}

fn table1(a: &Table1Args) -> CliResult<()> {
    if a.max_d < 2 {
        return Err(CliError::Usage("--max-d must be at least 2".into()));
    }
    let mut inputs: Vec<Fiducial> = Vec::new();
    for d in 2..=a.max_d {
        let f = if d == 3 {
            family_fiducial_d3(0.3).with_label("3a")
        } else {
            match registry_lookup(&format!("d{d}")) {
                Ok(f) => f,
                Err(_) => solve_fiducial(d, a.seed, &SolveOptions::default())?,
            }
        };
        inputs.push(f);
    }
    if a.max_d >= 8 && !a.no_hoggar {
        inputs.push(registry_lookup("8H")?);
    }
    let mut entries = Vec::new();
    for f in &inputs {
        let r = restricted_defect(&structured_unitary_from_fiducial(f)?, &DefectOptions::default())?;
        let label = short_label(f);
        println!("{}", table_row(&label, &r));
        entries.push(TableEntry { label, d: f.d, report: r });
    }
    if let Some(path) = &a.report {
        write_json(path, &entries)?;
    }
    let bad: Vec<&str> = entries
        .iter()
        .filter(|e| !e.report.determinate)
        .map(|e| e.label.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Verification(format!("indeterminate rank for {}", bad.join(", "))));
    }
    Ok(())
}
