//! `pdmd`: generate snapshot data, fit parametric DMD reduced-order models,
//! and evaluate or validate them against the surrogate plants.

mod commands;
mod grammar;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use grammar::{ChirpSpec, Grid, OrderSpec, Range, RankSpec, ThetaRuleSpec, Values};

#[derive(Parser, Debug)]
#[command(name = "pdmd", version, about = "Parametric DMD identification of polynomial LPV reduced-order models")]
pub struct Cli {
    /// Seed for random inputs, random theta trajectories and random plants.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory that relative output paths are written into (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a plant and write a snapshot CSV.
    Gen(GenArgs),
    /// Fit a reduced-order model to a snapshot CSV.
    Fit(FitArgs),
    /// Simulate a fitted model and write its trajectory.
    Sim(SimArgs),
    /// Frozen-theta eigenvalues and frequency responses of a fitted model.
    Eval(EvalArgs),
    /// Validate a fitted model against truth data or a plant.
    Compare(CompareArgs),
    /// Singular spectra of the lifted regressor and the shifted states.
    Svplot(SvplotArgs),
}

/// Excitation signal; exactly one source.
#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").args(["chirp", "random", "input"])))]
pub struct InputArgs {
    /// Linear chirp `F0:F1:DURATION:DT` (Hz, Hz, s, s).
    #[arg(long, value_name = "F0:F1:DUR:DT")]
    pub chirp: Option<ChirpSpec>,

    /// Gaussian white-noise input with this many transitions.
    #[arg(long, value_name = "STEPS")]
    pub random: Option<usize>,

    /// Reuse the inputs (and theta column) of a snapshot CSV.
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,

    /// Amplitude of the chirp, or standard deviation of the random input.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub amp: f64,

    /// Chirp phase offset in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phase: f64,

    /// Constant added to every input sample.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset: f64,
}

/// Scheduling parameter; at most one source.
#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("theta_source").args(["theta", "theta_rule", "theta_random"])))]
pub struct ThetaArgs {
    /// Fixed theta.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,

    /// State-derived theta, e.g. `arcsin:node=last:V0=22`.
    #[arg(long, value_name = "RULE")]
    pub theta_rule: Option<ThetaRuleSpec>,

    /// Independent uniform theta per step in `LO:HI`.
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    pub theta_random: Option<Range>,
}

/// Initial state; zero when neither is given.
#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("x0_source").args(["x0", "x0_from"])))]
pub struct X0Args {
    /// Comma-separated initial state.
    #[arg(long, value_name = "V1,V2,...", allow_hyphen_values = true)]
    pub x0: Option<Values>,

    /// Start from the terminal state of a snapshot CSV.
    #[arg(long, value_name = "CSV")]
    pub x0_from: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Plant configuration (JSON).
    #[arg(long, value_name = "JSON")]
    pub plant: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub x0: X0Args,
    /// Abort when any state entry exceeds this magnitude.
    #[arg(long, default_value_t = 1e6)]
    pub bound: f64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Polynomial order in theta.
    #[arg(long = "np", default_value_t = 4)]
    pub n_p: usize,
    /// Reduced order: `auto`, `auto:FRACTION` or a number.
    #[arg(long = "nz", default_value = "auto:0.95")]
    pub n_z: OrderSpec,
    /// Regressor truncation: `auto`, `energy:F`, `tol:T` or a number.
    #[arg(long, default_value = "auto")]
    pub rank: RankSpec,
    /// Use raw theta instead of mapping the observed range onto [-1, 1].
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Singular-value CSV; defaults to `<out stem>_sv.csv`.
    #[arg(long)]
    pub sv_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SvplotArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long = "np", default_value_t = 4)]
    pub n_p: usize,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value = "sv.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub theta: ThetaArgs,
    /// A full-order state is projected onto the basis; a reduced state is used as is.
    #[command(flatten)]
    pub x0: X0Args,
    #[arg(long, default_value = "traj.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// Theta values, `START:STOP:STEP`.
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub theta_grid: Grid,
    /// Frequencies in rad/s, e.g. `log:0.1:40:100`; omit to skip the frequency response.
    #[arg(long, value_name = "GRID")]
    pub omega_grid: Option<Grid>,
    /// Also write log(lambda)/dt.
    #[arg(long)]
    pub continuous: bool,
    #[arg(long, default_value = "eigs.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "freq.csv")]
    pub fr_out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("truth").args(["data", "plant"]).required(true)))]
pub struct CompareArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// Held-out truth snapshots; the model is driven by their inputs.
    #[arg(long, value_name = "CSV")]
    pub data: Option<PathBuf>,
    /// Plant to simulate as truth (also needed for --gap).
    #[arg(long, value_name = "JSON")]
    pub plant: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub x0: X0Args,
    /// Also compute the gap surface against the plant linearized at the origin.
    #[arg(long)]
    pub gap: bool,
    #[arg(long, value_name = "GRID", allow_hyphen_values = true, default_value = "-1:1:0.05")]
    pub theta_grid: Grid,
    #[arg(long, value_name = "GRID", default_value = "log:0.1:40:100")]
    pub omega_grid: Grid,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
    #[arg(long, default_value = "errors.csv")]
    pub errors_out: PathBuf,
    #[arg(long, default_value = "gap.csv")]
    pub gap_out: PathBuf,
    /// Also write the model trajectory.
    #[arg(long)]
    pub traj_out: Option<PathBuf>,
}

/// Bad combination of otherwise valid arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 usage, 3 data or format, 4 numerical.
fn exit_code(err: &anyhow::Error) -> u8 {
    use pdmd_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_) => 2,
                E::Io { .. } | E::Format { .. } | E::Json { .. } | E::DimensionMismatch(_) => 3,
                E::NonFinite(_) | E::Diverged { .. } | E::RankDeficient(_) | E::Singular { .. } | E::Numerical(_) => 4,
            };
        }
    }
    3
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let code = |e: pdmd_core::Error| exit_code(&anyhow::Error::from(e).context("while testing"));
        assert_eq!(code(pdmd_core::Error::InvalidArgument("x".into())), 2);
        assert_eq!(code(pdmd_core::Error::DimensionMismatch("x".into())), 3);
        assert_eq!(code(pdmd_core::Error::RankDeficient("x".into())), 4);
        assert_eq!(code(pdmd_core::Error::Diverged { step: 1, detail: "x".into() }), 4);
        assert_eq!(exit_code(&usage("bad")), 2);
    }

    #[test]
    fn error_chain_is_not_repeated() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let e = anyhow::Error::from(pdmd_core::Error::Io { path: "p.json".into(), source: io }).context("loading plant");
        assert_eq!(describe(&e), "loading plant: p.json: gone");
    }

    #[test]
    fn negative_grids_parse() {
        let cli = Cli::try_parse_from(["pdmd", "eval", "--model", "m.json", "--theta-grid", "-1:1:0.5"]).unwrap();
        let Command::Eval(e) = cli.command else { panic!() };
        assert_eq!(e.theta_grid.0, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn conflicting_sources_are_usage_errors() {
        let r = Cli::try_parse_from(["pdmd", "gen", "--plant", "p.json", "--chirp", "1:2:1:0.01", "--random", "5"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["pdmd", "gen", "--plant", "p.json", "--theta", "0", "--theta-random", "-1:1"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["pdmd", "compare", "--model", "m.json"]);
        assert!(r.is_err());
    }
}
