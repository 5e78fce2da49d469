//! Command-line arguments and their serializable form.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const TOLERANCE_ENV: &str = "SICFRAMES_TOLERANCE";
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_STRUCTURE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "sicframes", version, about = "SIC fiducials and the structures built from them")]
pub struct Cli {
    /// SIC verification tolerance.
    #[arg(long, global = true, env = TOLERANCE_ENV)]
    pub tolerance: Option<f64>,

    /// Tolerance for projector, Hadamard, ETF and fusion-frame checks.
    #[arg(long, global = true)]
    pub structure_tolerance: Option<f64>,

    /// Run the configuration stored in this JSON file instead of a subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Write the effective configuration to this JSON file before running.
    #[arg(long)]
    pub save_config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_structure_tolerance")]
    pub structure_tolerance: f64,
    pub command: Command,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_structure_tolerance() -> f64 {
    DEFAULT_STRUCTURE_TOLERANCE
}

impl RunConfig {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Search for a Weyl-Heisenberg SIC fiducial.
    Solve(SolveArgs),
    /// Check the SIC overlap conditions of a fiducial.
    VerifySic(InputArgs),
    /// Emit Q, H, E, E~ (and Pi+, Pi- for odd d) for a fiducial.
    Derive(DeriveArgs),
    /// Sample one of the squared-phase families.
    Family(FamilyArgs),
    /// Restricted defect of -H for a fiducial or squared-phase matrix.
    Defect(DefectArgs),
    /// Block fiducial of the Naimark complement.
    Naimark(NaimarkArgs),
    /// Defect table over the registry.
    Table1(Table1Args),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(short = 'd', long = "dimension")]
    pub dimension: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    /// Output fiducial file; defaults to `sic-d<d>-seed<seed>.txt`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// A fiducial given as a file path or as `registry:<label>`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    pub input: String,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DeriveArgs {
    pub input: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    D3,
    D4,
    D6,
    D8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveName {
    Flat,
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FamilyArgs {
    #[arg(value_enum)]
    pub family: FamilyName,
    /// Sample `k` sits at `t_min + (t_max - t_min)(k + 1)/samples`.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Defaults: 0 for d3, d4, d8; sqrt(3) for d6.
    #[arg(long, allow_negative_numbers = true)]
    pub t_min: Option<f64>,
    /// Defaults: 2 pi for d3, d4, d8; 3 for d6.
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    /// d8 curve.
    #[arg(long, value_enum, default_value_t = CurveName::Flat)]
    pub curve: CurveName,
    /// d6 branch integers `n1,n2,n3,n4,n5`.
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 0, 0, 0, 0])]
    pub branch: Vec<u8>,
    /// Sample every d6 branch instead of `--branch`.
    #[arg(long)]
    pub all_branches: bool,
    /// d6 free phase, used only where t^2 = 3.
    #[arg(long, allow_negative_numbers = true)]
    pub free_phase: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DefectArgs {
    pub input: String,
    /// Treat the input as a squared-phase matrix JSON file.
    #[arg(long)]
    pub phase_matrix: bool,
    #[arg(long, default_value = "")]
    pub label: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NaimarkArgs {
    pub input: String,
    /// Block fiducial output; defaults to `naimark-d<d>.txt`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Table1Args {
    #[arg(long, default_value_t = 8)]
    pub max_d: usize,
    /// Solver seed for dimensions without a registry entry.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the 8H row.
    #[arg(long)]
    pub no_hoggar: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(c: RunConfig) {
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn configs_round_trip() {
        round_trip(RunConfig {
            tolerance: 1e-9,
            structure_tolerance: 0.1 + 0.2,
            command: Command::Solve(SolveArgs {
                dimension: 5,
                seed: u64::MAX,
                restarts: 17,
                out: Some("x/y.txt".into()),
            }),
        });
        round_trip(RunConfig {
            tolerance: 3e-11,
            structure_tolerance: 1e-8,
            command: Command::Family(FamilyArgs {
                family: FamilyName::D6,
                samples: 3,
                t_min: Some(-3.7),
                t_max: None,
                curve: CurveName::Minus,
                branch: vec![1, 0, 1, 2, 2],
                all_branches: false,
                free_phase: Some(std::f64::consts::PI / 7.0),
                out_dir: "out".into(),
            }),
        });
        round_trip(RunConfig {
            tolerance: 1e-9,
            structure_tolerance: 1e-8,
            command: Command::Table1(Table1Args {
                max_d: 4,
                seed: 1,
                no_hoggar: true,
                report: None,
            }),
        });
    }

    #[test]
    fn defaults_fill_missing_tolerances() {
        let c = RunConfig::from_json(r#"{"command":{"name":"verify-sic","input":"registry:2a","report":null}}"#).unwrap();
        assert_eq!(c.tolerance, DEFAULT_TOLERANCE);
        assert_eq!(c.structure_tolerance, DEFAULT_STRUCTURE_TOLERANCE);
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["sicframes", "solve", "-d", "3", "--seed", "7"]).unwrap();
        assert!(matches!(cli.command, Some(Command::Solve(SolveArgs { dimension: 3, seed: 7, .. }))));
        let cli = Cli::try_parse_from(["sicframes", "family", "d6", "--branch", "1,0,1,2,0", "--out-dir", "o"]).unwrap();
        let Some(Command::Family(f)) = cli.command else { panic!() };
        assert_eq!(f.branch, vec![1, 0, 1, 2, 0]);
        assert!(Cli::try_parse_from(["sicframes", "bogus"]).is_err());
    }
}
