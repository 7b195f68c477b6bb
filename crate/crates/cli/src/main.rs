//! Batch front-end for multi-mode decoy-state key-rate computations.
//!
//! Three subcommands, all CSV-out and fully deterministic for a fixed
//! scenario:
//!
//! * `sweep`  — key rates against channel attenuation, signal intensity
//!   optimized per point, for the multi-mode bound and/or the single-mode
//!   baseline.
//! * `bounds` — the worst-case bound internals at one working point,
//!   optionally for hand-entered observables.
//! * `dist`   — the photon-number distribution and its moments at one
//!   intensity.
//!
//! Exit codes: 0 success, 2 validation error, 3 inconsistent observables,
//! 4 resource limit.

mod scenario;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmdecoy::bounds::ChannelObservables;
use mmdecoy::keyrate::{scenario_bounds, sweep_attenuation, RatePoint, SweepModels};
use mmdecoy::source::solve_squeezing;
use mmdecoy::Error;

use scenario::{echo_json, load_scenario, ResolvedScenario};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(Error),
    Io(String),
}

impl CliError {
    fn validation(msg: String) -> Self {
        CliError::Validation(msg)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Core(Error::InconsistentObservables(_)) => 3,
            CliError::Core(Error::ResourceLimit(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "mmdecoy",
    version,
    about = "Key-rate lower bounds for decoy-state BB84 with multi-mode photon sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep channel attenuation and write one CSV row per point.
    Sweep(SweepArgs),
    /// Report the worst-case bound internals at one working point.
    Bounds(BoundsArgs),
    /// Write the photon-number distribution and moments at one intensity.
    Dist(DistArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario: preset id (sigma-1nm, sigma-2nm, sigma-4nm, sigma-8nm,
    /// two-mode-demo) or path to a JSON file.
    #[arg(long)]
    scenario: String,
    /// Override the decoy mean photon number.
    #[arg(long)]
    mu_decoy: Option<f64>,
    /// Write output to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the fully resolved scenario JSON to this path.
    #[arg(long)]
    echo_scenario: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    /// Multi-mode worst-case bound only.
    Mm,
    /// Single-mode baseline only.
    Sm,
    /// Both models.
    Both,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which rate models to evaluate.
    #[arg(long, value_enum, default_value_t = ModelArg::Both)]
    model: ModelArg,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Channel attenuation in dB.
    #[arg(long)]
    alpha: f64,
    /// Signal mean photon number.
    #[arg(long)]
    mu_signal: f64,
    /// Hand-entered signal gain (requires the other four --obs-* flags).
    #[arg(long)]
    obs_q_signal: Option<f64>,
    /// Hand-entered decoy gain.
    #[arg(long)]
    obs_q_decoy: Option<f64>,
    /// Hand-entered signal QBER.
    #[arg(long)]
    obs_e_signal: Option<f64>,
    /// Hand-entered decoy QBER.
    #[arg(long)]
    obs_e_decoy: Option<f64>,
    /// Hand-entered dark-count yield.
    #[arg(long)]
    obs_y0: Option<f64>,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mean photon number of the reported state.
    #[arg(long)]
    mu_signal: f64,
    /// Add a Poissonian reference column with the same mean.
    #[arg(long)]
    poisson_ref: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Dist(args) => cmd_dist(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Full-double-precision cell: 17 significant digits, '.' decimal separator.
fn cell(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write stdout: {e}")))
        }
    }
}

fn maybe_echo(path: &Option<PathBuf>, resolved: &ResolvedScenario) -> Result<(), CliError> {
    if let Some(path) = path {
        write_scenario_echo(path, resolved)?;
    }
    Ok(())
}

fn write_scenario_echo(path: &Path, resolved: &ResolvedScenario) -> Result<(), CliError> {
    std::fs::write(path, echo_json(&resolved.config))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn sweep_csv(points: &[RatePoint]) -> String {
    let mut csv =
        String::from("alpha_db,rate_mm,rate_sm,mu_opt_mm,mu_opt_sm,y1_lb_s,e1_ub_s,ratio_mm_sm\n");
    for p in points {
        let (rate_mm, mu_mm) =
            p.mm.as_ref()
                .map_or((f64::NAN, f64::NAN), |m| (m.rate, m.mu_s));
        let (rate_sm, mu_sm) =
            p.sm.as_ref()
                .map_or((f64::NAN, f64::NAN), |m| (m.rate, m.mu_s));
        let diag = p.mm.as_ref().or(p.sm.as_ref());
        let (y1, e1) = diag.map_or((f64::NAN, f64::NAN), |m| (m.y1_lb_s, m.e1_ub_s));
        let ratio = match (&p.mm, &p.sm) {
            (Some(mm), Some(sm)) if sm.rate > 0.0 => mm.rate / sm.rate,
            _ => f64::NAN,
        };
        let row = [p.alpha_db, rate_mm, rate_sm, mu_mm, mu_sm, y1, e1, ratio]
            .map(cell)
            .join(",");
        csv.push_str(&row);
        csv.push('\n');
    }
    csv
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let resolved = load_scenario(&args.common.scenario, args.common.mu_decoy)?;
    maybe_echo(&args.common.echo_scenario, &resolved)?;
    let models = match args.model {
        ModelArg::Mm => SweepModels::MultiModeOnly,
        ModelArg::Sm => SweepModels::SingleModeOnly,
        ModelArg::Both => SweepModels::Both,
    };
    let points = sweep_attenuation(&resolved.core, &resolved.alphas, models)?;
    for p in &points {
        if let Some(note) = &p.note {
            eprintln!("warning: {} at {} dB: {note}", resolved.name, p.alpha_db);
        }
        for (tag, outcome) in [("mm", &p.mm), ("sm", &p.sm)] {
            if let Some(o) = outcome {
                if !o.yrel_ok {
                    eprintln!(
                        "warning: {} at {} dB ({tag}): baseline-validity condition fails \
                         for the optimized intensity",
                        resolved.name, p.alpha_db
                    );
                }
            }
        }
    }
    write_output(&args.common.out, &sweep_csv(&points))
}

fn observables_override(args: &BoundsArgs) -> Result<Option<ChannelObservables>, CliError> {
    let flags = [
        args.obs_q_signal,
        args.obs_q_decoy,
        args.obs_e_signal,
        args.obs_e_decoy,
        args.obs_y0,
    ];
    let given = flags.iter().filter(|f| f.is_some()).count();
    match given {
        0 => Ok(None),
        5 => Ok(Some(ChannelObservables {
            q_s: args.obs_q_signal.unwrap(),
            q_d: args.obs_q_decoy.unwrap(),
            e_s: args.obs_e_signal.unwrap(),
            e_d: args.obs_e_decoy.unwrap(),
            y0: args.obs_y0.unwrap(),
        })),
        _ => Err(CliError::validation(
            "hand-entered observables need all five --obs-* flags".into(),
        )),
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliError> {
    let resolved = load_scenario(&args.common.scenario, args.common.mu_decoy)?;
    maybe_echo(&args.common.echo_scenario, &resolved)?;
    let obs = observables_override(&args)?;
    if let Some(obs) = &obs {
        obs.validate()?;
    }
    let report = scenario_bounds(&resolved.core, args.alpha, args.mu_signal, obs)?;
    if !report.yrel_ok {
        eprintln!(
            "warning: baseline-validity condition fails for this signal/decoy pair; \
             the single-mode baseline bound would not apply"
        );
    }
    let b = &report.bound;
    let o = &report.observables;
    let mut csv = String::from("key,value\n");
    for (key, value) in [
        ("y1_lb_s", cell(b.y1_lb_s)),
        ("y1_lb_d", cell(b.y1_lb_d)),
        ("ym_ub_s", cell(b.ym_ub_s)),
        ("ym_ub_d", cell(b.ym_ub_d)),
        ("e1_ub_d", cell(b.e1_ub_d)),
        ("e1_ub_s", cell(b.e1_ub_s)),
        ("e1_vacuous", b.e1_vacuous.to_string()),
        ("iterations", b.iterations.to_string()),
        ("converged", b.converged.to_string()),
        ("yrel_condition", report.yrel_ok.to_string()),
        ("p1_s", cell(report.p1_s)),
        ("q_s", cell(o.q_s)),
        ("q_d", cell(o.q_d)),
        ("e_s", cell(o.e_s)),
        ("e_d", cell(o.e_d)),
        ("y0", cell(o.y0)),
    ] {
        csv.push_str(key);
        csv.push(',');
        csv.push_str(&value);
        csv.push('\n');
    }
    write_output(&args.common.out, &csv)
}

fn cmd_dist(args: DistArgs) -> Result<(), CliError> {
    let resolved = load_scenario(&args.common.scenario, args.common.mu_decoy)?;
    maybe_echo(&args.common.echo_scenario, &resolved)?;
    let sc = &resolved.core;
    let state = solve_squeezing(&sc.weights, args.mu_signal)?;
    let probs = state.class_probabilities(sc.numerics.n_cap_start, sc.numerics.eps_tail)?;

    let mut csv = String::new();
    if args.poisson_ref {
        csv.push_str("n,P_n,poisson_ref\n");
    } else {
        csv.push_str("n,P_n\n");
    }
    let mu = args.mu_signal;
    let mut poisson = (-mu).exp();
    for (n, &p) in probs.pn().iter().enumerate() {
        if args.poisson_ref {
            csv.push_str(&format!("{n},{},{}\n", cell(p), cell(poisson)));
            poisson *= mu / (n + 1) as f64;
        } else {
            csv.push_str(&format!("{n},{}\n", cell(p)));
        }
    }
    let (mean, g2) = match probs.moments() {
        Ok(m) => (m.mean, m.g2),
        Err(_) => (0.0, f64::NAN),
    };
    csv.push_str(&format!("mean,{}\n", cell(mean)));
    csv.push_str(&format!("g2,{}\n", cell(g2)));
    write_output(&args.common.out, &csv)
}
