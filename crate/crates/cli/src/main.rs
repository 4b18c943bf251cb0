//! `qss`: run secret-sharing experiments, check the identity suite, sweep
//! toggle angles, and dump the splitting unitary.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 identity-suite failure,
//! 3 I/O error.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qss_core::adversary::{synthesize_split_unitary, zero_blank, MaintenancePolicy};
use qss_core::experiment::{
    aggregate, run_trials, sweep, sweep_csv, symmetric_grid, transcripts_jsonl, AttackMode, ExperimentReport,
    ExperimentSpec,
};
use qss_core::identities::{run_identity_suite, SuiteOptions};
use qss_core::protocol::{AnnounceOrder, ProtocolConfig, Variant};
use qss_core::ThetaTriple;

#[derive(Parser)]
#[command(name = "qss", version, about = "Reusable-carrier quantum secret sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write an aggregate JSON report.
    Run(RunArgs),
    /// Check the numeric identity suite.
    Verify(VerifyArgs),
    /// Repeat a run over a grid of toggle angles.
    Sweep(SweepArgs),
    /// Synthesize the splitting unitary and print it as JSON.
    Synthesize(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum VariantArg {
    Plain,
    Theta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AttackArg {
    None,
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    U,
    V,
    Random,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum OrderArg {
    AliceFirst,
    BobLast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Experiment flags. Each may also come from `--config`; flags win.
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Rounds per trial [default: 100]
    #[arg(long)]
    rounds: Option<u32>,
    /// Base RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Protocol variant [default: plain, or theta when --theta is given]
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Toggle angles θa θb (θc = −θa−θb mod 2π), or all three [default: 2π/3 each]
    #[arg(long, num_args = 2..=3, value_names = ["A", "B"], allow_negative_numbers = true)]
    theta: Option<Vec<f64>>,
    /// Attack mounted by Bob [default: none]
    #[arg(long, value_enum)]
    attack: Option<AttackArg>,
    /// Bob's maintenance policy under attack [default: random]
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Fraction of rounds publicly compared, in (0, 1] [default: 0.2]
    #[arg(long)]
    announce_frac: Option<f64>,
    /// Announcement order [default: bob-last]
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    /// Independent trials [default: 100]
    #[arg(long)]
    trials: Option<u32>,
    /// Mismatches tolerated before cheating is declared [default: 0]
    #[arg(long)]
    tolerance: Option<u32>,
    /// JSON file with any of the above keys (snake_case)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    rounds: Option<u32>,
    seed: Option<u64>,
    variant: Option<VariantArg>,
    theta: Option<Vec<f64>>,
    attack: Option<AttackArg>,
    policy: Option<PolicyArg>,
    announce_frac: Option<f64>,
    order: Option<OrderArg>,
    trials: Option<u32>,
    tolerance: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Report destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-trial transcripts as JSON lines
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Angles under test: θa θb (θc derived) or all three, taken as given
    #[arg(long, num_args = 2..=3, allow_negative_numbers = true)]
    theta: Option<Vec<f64>>,
    /// Override θc after derivation (for negative controls)
    #[arg(long, allow_negative_numbers = true)]
    theta_c: Option<f64>,
    /// Random hardened angle pairs for the maintenance checks
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Write the check list as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Symmetric grid points g: θa = θc = g, θb = −2g
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    grid: Vec<f64>,
    /// Extra grid point θa θb (θc derived); repeatable
    #[arg(long = "point", num_args = 2, action = clap::ArgAction::Append, allow_negative_numbers = true)]
    points: Vec<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Identity,
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Identity => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<qss_core::Error> for Failure {
    fn from(e: qss_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn write_out(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn triple_from(values: &[f64]) -> Result<ThetaTriple, Failure> {
    match values {
        [a, b] => Ok(ThetaTriple::from_pair(*a, *b)?),
        [a, b, c] => Ok(ThetaTriple::new(*a, *b, *c)?),
        _ => Err(Failure::Config(format!("expected 2 or 3 angles, got {}", values.len()))),
    }
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentSpec, Failure> {
        let file: ConfigFile = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let theta = self.theta.clone().or(file.theta);
        let variant = self.variant.or(file.variant).unwrap_or(if theta.is_some() { VariantArg::Theta } else { VariantArg::Plain });
        let variant = match (variant, theta) {
            (VariantArg::Plain, Some(_)) => return Err(Failure::Config("--theta given with the plain variant".into())),
            (VariantArg::Plain, None) => Variant::Plain,
            (VariantArg::Theta, t) => {
                let t = match t {
                    Some(v) => triple_from(&v)?,
                    None => ThetaTriple::new(TAU / 3.0, TAU / 3.0, TAU / 3.0)?,
                };
                t.validate_hardened()?;
                Variant::Theta(t)
            }
        };
        let config = ProtocolConfig {
            variant,
            num_rounds: self.rounds.or(file.rounds).unwrap_or(100),
            rng_seed: self.seed.or(file.seed).unwrap_or(0),
            announce_fraction: self.announce_frac.or(file.announce_frac).unwrap_or(0.2),
            announce_order: match self.order.or(file.order).unwrap_or(OrderArg::BobLast) {
                OrderArg::AliceFirst => AnnounceOrder::AliceFirst,
                OrderArg::BobLast => AnnounceOrder::BobLast,
            },
        };
        if config.num_rounds == 0 {
            return Err(Failure::Config("--rounds must be at least 1".into()));
        }
        let spec = ExperimentSpec {
            config,
            attack: match self.attack.or(file.attack).unwrap_or(AttackArg::None) {
                AttackArg::None => AttackMode::None,
                AttackArg::Split => AttackMode::Split,
            },
            policy: match self.policy.or(file.policy).unwrap_or(PolicyArg::Random) {
                PolicyArg::U => MaintenancePolicy::KnownThetaU,
                PolicyArg::V => MaintenancePolicy::KnownThetaV,
                PolicyArg::Random => MaintenancePolicy::RandomGuess,
                PolicyArg::Plain => MaintenancePolicy::PlainHadamard,
            },
            trials: self.trials.or(file.trials).unwrap_or(100),
            tolerance: self.tolerance.or(file.tolerance).unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn summary(r: &ExperimentReport) -> String {
    let mut s = format!(
        "{} variant, attack {:?}, {} trials x {} rounds: detected {}/{} (p = {:.4}), announced mismatch rate {:.4}, charlie odd-round error {:.4}, mean carrier fidelity {:.6}",
        r.variant, r.attack, r.trials, r.rounds, r.detected_trials, r.trials, r.detection_probability, r.mismatch_rate,
        r.charlie_odd_error_rate, r.mean_carrier_fidelity
    );
    if let Some(b) = r.bob_recovery_rate {
        s.push_str(&format!(", bob recovery {b:.4}"));
    }
    s
}

/// JSON goes to `out` (summary on stdout) or to stdout (summary on stderr).
fn emit(out: Option<&Path>, json: &str, human: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            write_out(p, json)?;
            println!("{human}");
        }
        None => {
            println!("{json}");
            eprintln!("{human}");
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let spec = args.exp.resolve()?;
    let outcomes = run_trials(&spec)?;
    let report = aggregate(&spec, &outcomes);
    if let Some(p) = &args.transcripts {
        write_out(p, &transcripts_jsonl(&outcomes))?;
    }
    emit(args.out.as_deref(), &report.to_json(), &summary(&report))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut angles = SuiteOptions::default().angles;
    if let Some(v) = &args.theta {
        angles = match v.as_slice() {
            [a, b] => [*a, *b, (-(a + b)).rem_euclid(TAU)],
            [a, b, c] => [*a, *b, *c],
            _ => return Err(Failure::Config("--theta takes 2 or 3 values".into())),
        };
    }
    if let Some(c) = args.theta_c {
        angles[2] = c;
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Failure::Config("angles must be finite".into()));
    }
    let checks = run_identity_suite(&SuiteOptions { angles, samples: args.samples, seed: args.seed });
    for c in &checks {
        println!("{} {:<28} {:<12.6e} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.detail);
    }
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&checks).expect("checks serialize");
        write_out(p, &json)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} identities passed", checks.len() - failed, checks.len());
    if failed > 0 {
        Err(Failure::Identity)
    } else {
        Ok(())
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut base = args.exp;
    if base.variant.is_none() {
        base.variant = Some(VariantArg::Theta);
    }
    let spec = base.resolve()?;
    let mut grid = if args.grid.is_empty() && args.points.is_empty() {
        symmetric_grid(&[0.01, 0.1, 0.5, 1.0])?
    } else {
        symmetric_grid(&args.grid)?
    };
    for pair in args.points.chunks(2) {
        grid.push(triple_from(pair)?);
    }
    let rows = sweep(&spec, &grid)?;
    let body = match args.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize"),
        Format::Csv => sweep_csv(&rows),
    };
    let human = rows
        .iter()
        .map(|r| {
            format!(
                "theta ({:.4}, {:.4}, {:.4}): detection {:.4}, mismatch rate {:.4}",
                r.theta[0], r.theta[1], r.theta[2], r.detection_probability, r.mismatch_rate
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    emit(args.out.as_deref(), &body, &human)
}

fn cmd_synthesize(args: SynthArgs) -> Result<(), Failure> {
    let su = synthesize_split_unitary(zero_blank())?;
    let human = format!(
        "split unitary: residuals {:.2e}, {:.2e}; unitarity defect {:.2e}",
        su.residuals[0], su.residuals[1], su.unitarity_defect
    );
    emit(args.out.as_deref(), &su.to_json(), &human)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synthesize(a) => cmd_synthesize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: invalid configuration: {m}"),
                Failure::Io(m) => eprintln!("error: {m}"),
                Failure::Identity => eprintln!("error: identity suite failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
