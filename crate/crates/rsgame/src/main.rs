use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsgame::config::{ScheduleKind, StrategyChoice};
use rsgame::runner::RayonRunner;
use rsgame::{run, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "rsgame", version, about = "Risk-sensitive two-player stochastic game solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ellipticity, drift, small-cost and strengthened drift checks.
    Check(RunArgs),
    /// Discounted best response of `solver.player` against the other player's init strategy.
    SolveDiscounted(RunArgs),
    /// Ergodic best response of `solver.player` against the other player's init strategy.
    SolveErgodic(RunArgs),
    /// Discounted fictitious play plus the deviation test.
    Nash(RunArgs),
    /// Ergodic fictitious play.
    NashErgodic(RunArgs),
    /// Monte Carlo estimates and certificate probes.
    Simulate(RunArgs),
    /// Finite-chain oracles (value iteration, Perron root, exhaustive search).
    Oracle(RunArgs),
    /// PDE / chain / Monte Carlo agreement matrix on a small instance.
    Crosscheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    strat_tol: Option<f64>,
    #[arg(long)]
    resid_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `constant` or `harmonic`.
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    beta: Option<f64>,
    /// `uniform` or `pure:<action>`, applied to both players.
    #[arg(long, value_parser = parse_init)]
    init: Option<StrategyChoice>,
    #[arg(long)]
    player: Option<u8>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_paths: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_schedule(s: &str) -> Result<ScheduleKind, String> {
    match s {
        "constant" => Ok(ScheduleKind::Constant),
        "harmonic" => Ok(ScheduleKind::Harmonic),
        _ => Err(format!("unknown schedule {s:?}")),
    }
}

fn parse_init(s: &str) -> Result<StrategyChoice, String> {
    StrategyChoice::parse(s).ok_or_else(|| format!("expected uniform or pure:<action>, got {s:?}"))
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            half_width: self.half_width,
            dx: self.dx,
            n_theta: self.n_theta,
            kappa: self.kappa,
            theta_max: self.theta_max,
            alpha: self.alpha,
            theta: self.theta,
            strat_tol: self.strat_tol,
            resid_tol: self.resid_tol,
            max_iter: self.max_iter,
            schedule: self.schedule,
            beta: self.beta,
            init: self.init.clone(),
            player: self.player,
            dt: self.dt,
            horizon: self.horizon,
            paths: self.paths,
            seed: self.seed,
            mc_paths: self.mc_paths,
            out: self.out.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::SolveDiscounted(a) => (Command::SolveDiscounted, a),
        Cmd::SolveErgodic(a) => (Command::SolveErgodic, a),
        Cmd::Nash(a) => (Command::Nash, a),
        Cmd::NashErgodic(a) => (Command::NashErgodic, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Oracle(a) => (Command::Oracle, a),
        Cmd::Crosscheck(a) => (Command::Crosscheck, a),
    };
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.apply(&args.overrides()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let runner = match RayonRunner::new(args.threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cmd, &cfg, &runner) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            println!("{} artifacts written to {}", out.artifacts.len(), cfg.output.dir.join(cmd.name()).display());
            ExitCode::from(out.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
