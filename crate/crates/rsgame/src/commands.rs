//! Subcommand pipelines. Each writes its artifacts and `report.json` into
//! `<output.dir>/<subcommand>/`.

use std::io;
use std::path::{Path, PathBuf};

use rsgame_core::discretize::{Discretization, Grid, ThetaGrid};
use rsgame_core::ergodic::{default_anchor, ergodic_bounds, nash_iterate_ergodic, solve_ergodic_br, ErgodicBounds, ErgodicSolution};
use rsgame_core::hjb::{evaluate_discounted, log_derivative_report, max_theta_derivative, solve_discounted, ValueField};
use rsgame_core::model::{check_strong_drift, check_lyapunov, check_regularity, check_small_cost, Ball, CheckReport, GameSpec, LyapunovCertificate};
use rsgame_core::nash::{deviation_test, nash_iterate, pure_deviations, IterationLog};
use rsgame_core::oracle::{brute_force_discounted, brute_force_ergodic, perron_ergodic, vi_discounted, ChainGame};
use rsgame_core::simulate::{moment_probe, mc_discounted, mc_ergodic, mc_hitting_bound, simulate_paths, Dynamics, PathRunner, Scenario, SimConfig};
use rsgame_core::{Player, StrategyField};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig, SimStrategies};
use crate::output::{checked, estimate, write_nodal, write_paths, write_report, write_strategies, write_values};

/// Relative tolerance of the PDE / chain / Monte Carlo comparisons in `crosscheck`.
pub const CROSS_TOL: f64 = 2e-3;
/// Reported bound on the relative eigen-equation residual.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    SolveDiscounted,
    SolveErgodic,
    Nash,
    NashErgodic,
    Simulate,
    Oracle,
    Crosscheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Check,
        Command::SolveDiscounted,
        Command::SolveErgodic,
        Command::Nash,
        Command::NashErgodic,
        Command::Simulate,
        Command::Oracle,
        Command::Crosscheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::SolveDiscounted => "solve-discounted",
            Command::SolveErgodic => "solve-ergodic",
            Command::Nash => "nash",
            Command::NashErgodic => "nash-ergodic",
            Command::Simulate => "simulate",
            Command::Oracle => "oracle",
            Command::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Numerical { context: String, source: rsgame_core::Error },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Numerical { .. } => 3,
        }
    }
}

fn num(context: &str) -> impl FnOnce(rsgame_core::Error) -> RunError + '_ {
    move |source| RunError::Numerical { context: context.to_string(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::CheckFailed => 3,
            Status::NotConverged => 4,
        }
    }

    fn worse(self, other: Status) -> Status {
        match (self, other) {
            (Status::NotConverged, _) | (_, Status::NotConverged) => Status::NotConverged,
            (Status::CheckFailed, _) | (_, Status::CheckFailed) => Status::CheckFailed,
            _ => Status::Ok,
        }
    }
}

pub struct Outcome {
    pub status: Status,
    pub report: Value,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

struct Log {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    summary: Vec<String>,
    status: Status,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    spec: GameSpec,
    disc: Discretization,
    thetas: ThetaGrid,
    cert: Option<LyapunovCertificate>,
    runner: &'a dyn PathRunner,
    log: Log,
}

impl Log {
    fn write(&mut self, name: &str, f: impl FnOnce(&Path) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        f(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.artifacts.push(path);
        Ok(())
    }

    fn line(&mut self, name: &str, pass: bool, detail: String) {
        self.summary.push(format!("{:<22} {}  {}", name, if pass { "PASS" } else { "FAIL" }, detail));
        if !pass {
            self.status = self.status.worse(Status::CheckFailed);
        }
    }

    fn note(&mut self, line: String) {
        self.summary.push(line);
    }

    fn flag(&mut self, s: Status) {
        self.status = self.status.worse(s);
    }
}

impl Ctx<'_> {
    fn grid(&self) -> &Grid {
        self.disc.grid()
    }

    fn n(&self) -> usize {
        self.disc.len()
    }

    fn anchor(&self) -> Result<(usize, &'static str), RunError> {
        if let Some(a) = self.cfg.solver.anchor {
            if a >= self.n() {
                return Err(ConfigError::Invalid { key: "solver.anchor".into(), message: format!("node {a} outside the grid") }.into());
            }
            return Ok((a, "config"));
        }
        match &self.cert {
            Some(c) => Ok((default_anchor(c, self.grid()).map_err(num("anchor"))?, "certificate")),
            None => Ok((0, "first node")),
        }
    }

    fn start_node(&self) -> usize {
        self.grid().nearest(&self.cfg.start())
    }

    fn top(&self) -> usize {
        self.thetas.steps()
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, runner: &dyn PathRunner) -> Result<Outcome, RunError> {
    let (spec, disc) = cfg.discretization()?;
    let thetas = cfg.theta_grid()?;
    let cert = cfg.certificate()?;
    let dir = cfg.output.dir.join(cmd.name());
    std::fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let log = Log { dir, artifacts: Vec::new(), summary: Vec::new(), status: Status::Ok };
    let mut ctx = Ctx { cfg, spec, disc, thetas, cert, runner, log };
    let body = match cmd {
        Command::Check => check(&mut ctx)?,
        Command::SolveDiscounted => solve_disc(&mut ctx)?,
        Command::SolveErgodic => solve_erg(&mut ctx)?,
        Command::Nash => nash(&mut ctx)?,
        Command::NashErgodic => nash_erg(&mut ctx)?,
        Command::Simulate => simulate(&mut ctx)?,
        Command::Oracle => oracle(&mut ctx)?,
        Command::Crosscheck => crosscheck(&mut ctx)?,
    };
    // The output location is left out so reports compare equal across directories.
    let mut echo = serde_json::to_value(cfg).expect("config serializes");
    if let Some(m) = echo.as_object_mut() {
        m.remove("output");
    }
    let report = json!({
        "command": cmd.name(),
        "config": echo,
        "grid": {
            "nodes": ctx.n(),
            "spacing": ctx.grid().spacing(),
            "kappa": ctx.thetas.kappa(),
            "theta_max": ctx.thetas.theta_max(),
            "theta_steps": ctx.thetas.steps(),
        },
        "status": format!("{:?}", ctx.log.status),
        "results": body,
    });
    ctx.log.write("report.json", |p| write_report(p, &report))?;
    let log = ctx.log;
    Ok(Outcome { status: log.status, report, summary: log.summary, artifacts: log.artifacts })
}

fn check_json(r: &CheckReport, min_margin: f64, pass: bool) -> Value {
    json!({
        "margin": checked(r.margin(), min_margin, pass),
        "worst_point": r.worst_point,
        "worst_pair": [r.worst_pair.0, r.worst_pair.1],
        "points_checked": r.points_checked,
    })
}

fn check(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cc = ctx.cfg.check.clone();
    let reg = check_regularity(&ctx.spec, ctx.grid(), cc.ellip_min);
    ctx.log.line("ellipticity", reg.holds, format!("min eigenvalue {:.6e} (need >= {:.1e})", reg.ellipticity_at_nodes, cc.ellip_min));
    let mut out = json!({
        "regularity": {
            "ellipticity_at_nodes": checked(reg.ellipticity_at_nodes, cc.ellip_min, reg.holds),
            "ellipticity_bound": reg.ellipticity_bound,
            "drift_sup": reg.drift_sup,
            "cost_sup": reg.cost_sup,
            "drift_lipschitz": reg.drift_lipschitz,
            "cost_lipschitz": reg.cost_lipschitz,
        },
        "certificate": Value::Null,
    });
    let Some(cert) = ctx.cert.clone() else {
        ctx.log.note("no certificate given; stability checks skipped".into());
        return Ok(out);
    };
    let drift = check_lyapunov(&ctx.spec, &cert, ctx.grid(), cc.slack_tol).map_err(num("drift condition"))?;
    let drift_pass = drift.holds && drift.margin() >= cc.min_margin;
    ctx.log.line("drift_condition", drift_pass, format!("margin {:.6e} (need >= {:.2e}) over {} points", drift.margin(), cc.min_margin, drift.points_checked));

    let theta = ctx.cfg.theta();
    let small = check_small_cost(&ctx.spec, theta, cert.delta, ctx.grid().half_width());
    let lhs = theta * small.cost_sup[0].max(small.cost_sup[1]);
    ctx.log.line("small_cost", small.holds, format!("theta |r| = {lhs:.6e} (need <= delta = {}), theta limit {:.6e}", cert.delta, small.theta_limit));

    let strong = match &cert.strong {
        Some(_) => {
            let r = check_strong_drift(&ctx.spec, &cert, ctx.grid(), cc.slack_tol).map_err(num("strong drift condition"))?;
            ctx.log.line("strong_drift", r.holds, format!("margin {:.6e}", r.margin()));
            check_json(&r, 0.0, r.holds)
        }
        None => Value::Null,
    };

    let c0 = default_anchor(&cert, ctx.grid());
    ctx.log.line("c0_nonempty", c0.is_ok(), format!("level {:.6e}", cert.c0_level()));
    out["certificate"] = json!({
        "drift_condition": check_json(&drift, cc.min_margin, drift_pass),
        "small_cost": {
            "theta_cost": checked(lhs, cert.delta, small.holds),
            "cost_sup": small.cost_sup,
            "theta_limit": small.theta_limit,
        },
        "strong_drift": strong,
        "c0": { "level": cert.c0_level(), "anchor": c0.ok() },
    });
    Ok(out)
}

fn bound_summary(v: &ValueField, cost_sup: f64, slack: f64) -> Value {
    let mut min_psi = f64::INFINITY;
    let mut upper_ratio: f64 = 0.0;
    let mut monotone_drop: f64 = 0.0;
    for (j, th) in v.thetas().iter().enumerate() {
        let cap = (th * cost_sup / v.alpha()).exp();
        for (i, p) in v.level(j).iter().enumerate() {
            min_psi = min_psi.min(*p);
            upper_ratio = upper_ratio.max(p / cap);
            if j > 0 {
                monotone_drop = monotone_drop.max(v.at(j - 1, i) - p);
            }
        }
    }
    json!({
        "min_psi": checked(min_psi, 1.0, min_psi >= 1.0 - slack),
        "max_psi_over_cap": checked(upper_ratio, 1.0 + slack, upper_ratio <= 1.0 + slack),
        "max_theta_decrease": checked(monotone_drop, 0.0, monotone_drop <= 0.0),
    })
}

fn solve_disc(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let k = cfg.player();
    let init = cfg.init_strategies(ctx.n());
    let (v, sel) = solve_discounted(&ctx.disc, &ctx.thetas, cfg.solver.alpha, k, &init[k.other().index()], &cfg.march())
        .map_err(num("discounted best response"))?;
    let p = k.index() + 1;
    let grid = ctx.grid().clone();
    let nodes = ctx.thetas.nodes().to_vec();
    ctx.log.write(&format!("values_p{p}.csv"), |f| write_values(f, &grid, &v))?;
    ctx.log.write(&format!("strategy_p{p}.csv"), |f| write_strategies(f, &grid, &sel, &nodes))?;
    let sup = ctx.disc.cost_sup(k);
    let ld = log_derivative_report(&v, sup, cfg.solver.bound_slack);
    let x = ctx.start_node();
    let psi = v.at(ctx.top(), x);
    ctx.log.note(format!("player {p}: psi(theta_max, x_start) = {psi:.10e}"));
    Ok(json!({
        "player": p,
        "opponent": cfg.solver.init[k.other().index()],
        "alpha": cfg.solver.alpha,
        "cost_sup": sup,
        "bounds": bound_summary(&v, sup, cfg.solver.bound_slack),
        "max_theta_derivative": max_theta_derivative(&v),
        "log_derivative": {
            "ratio_with_theta": checked(ld.ratio_with_theta, 1.0, ld.holds_with_theta),
            "ratio_without_theta": checked(ld.ratio_without_theta, 1.0, ld.holds_without_theta),
        },
        "psi_at_start": { "node": x, "theta": ctx.thetas.theta_max(), "value": psi, "tol": cfg.solver.bound_slack },
    }))
}

fn bounds_json(b: &ErgodicBounds, slack: f64) -> Value {
    json!({
        "max_psi_over_w": checked(b.max_psi_over_w, 1.0 + slack, b.upper_holds),
        "min_c0_excess": checked(b.min_c0_excess, -slack, b.lower_holds),
        "rho_in_range": b.rho_in_range,
    })
}

fn solution_json(ctx: &Ctx, s: &ErgodicSolution) -> Value {
    let slack = ctx.cfg.check.bound_slack;
    json!({
        "player": s.player.index() + 1,
        "theta": s.theta,
        "rho": { "value": s.rho, "tol": s.eigen_residual / s.theta },
        "theta_rho": s.theta * s.rho,
        "anchor": s.anchor,
        "eigen_residual": checked(s.eigen_residual, EIGEN_RESIDUAL_TOL, s.eigen_residual <= EIGEN_RESIDUAL_TOL),
        "iterations": s.iterations,
        "certificate_bounds": ctx.cert.as_ref().map(|c| bounds_json(&ergodic_bounds(s, c, &ctx.disc, slack), slack)),
    })
}

fn solve_erg(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let k = cfg.player();
    let (anchor, source) = ctx.anchor()?;
    let init = cfg.init_strategies(ctx.n());
    let br = solve_ergodic_br(&ctx.disc, cfg.theta(), k, &init[k.other().index()], anchor, &cfg.eigen_options())
        .map_err(num("ergodic best response"))?;
    let p = k.index() + 1;
    let grid = ctx.grid().clone();
    ctx.log.write(&format!("ergodic_p{p}.csv"), |f| write_nodal(f, &grid, "psi", &br.solution.psi))?;
    ctx.log.write(&format!("strategy_p{p}.csv"), |f| write_strategies(f, &grid, &br.strategy, &[cfg.theta()]))?;
    if br.cycling {
        ctx.log.flag(Status::NotConverged);
        ctx.log.note("policy iteration cycled; reporting the best iterate".into());
    }
    ctx.log.note(format!("player {p}: rho = {:.10e} (residual {:.2e})", br.solution.rho, br.solution.eigen_residual));
    Ok(json!({
        "opponent": cfg.solver.init[k.other().index()],
        "anchor_source": source,
        "solution": solution_json(ctx, &br.solution),
        "outer_iterations": br.outer_iterations,
        "cycling": br.cycling,
    }))
}

fn history_json(h: &[IterationLog]) -> Value {
    h.iter().map(|l| json!({ "iteration": l.iteration, "beta": l.beta, "change": l.change })).collect()
}

fn nash(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let opts = cfg.nash_options();
    let alpha = cfg.solver.alpha;
    let rep = nash_iterate(&ctx.disc, &ctx.thetas, alpha, cfg.init_strategies(ctx.n()), &opts).map_err(num("fictitious play"))?;
    let grid = ctx.grid().clone();
    let nodes = ctx.thetas.nodes().to_vec();
    for k in Player::BOTH {
        let p = k.index() + 1;
        ctx.log.write(&format!("values_p{p}.csv"), |f| write_values(f, &grid, &rep.values[k.index()]))?;
        ctx.log.write(&format!("strategies_p{p}.csv"), |f| write_strategies(f, &grid, &rep.strategies[k.index()], &nodes))?;
    }
    if !rep.converged {
        ctx.log.flag(Status::NotConverged);
    }
    ctx.log.note(format!(
        "fictitious play: {} iterations, change {:.3e}, residuals {:.3e} / {:.3e}, converged {}",
        rep.iterations, rep.change, rep.residuals[0], rep.residuals[1], rep.converged
    ));

    let mut devs = Vec::new();
    for k in Player::BOTH {
        let seed = cfg.solver.deviation_seed.wrapping_add(k.index() as u64);
        let list = pure_deviations(ctx.disc.actions(k), ctx.n(), cfg.solver.deviations, seed).map_err(num("deviations"))?;
        devs.extend(list.into_iter().map(|d| (k, d)));
    }
    let pair = [&rep.strategies[0], &rep.strategies[1]];
    let dev = deviation_test(&ctx.disc, &ctx.thetas, alpha, pair, &devs, cfg.solver.dev_tol, &opts.march).map_err(num("deviation test"))?;
    ctx.log.line("deviation_test", dev.holds, format!("worst gain {:.3e} over {} deviations (tol {:.1e})", dev.worst, devs.len(), cfg.solver.dev_tol));
    let top = ctx.top();
    let x = ctx.start_node();
    Ok(json!({
        "iterations": rep.iterations,
        "converged": rep.converged,
        "change": checked(rep.change, opts.strat_tol, rep.change <= opts.strat_tol),
        "residuals": [
            checked(rep.residuals[0], opts.resid_tol, rep.residuals[0] <= opts.resid_tol),
            checked(rep.residuals[1], opts.resid_tol, rep.residuals[1] <= opts.resid_tol),
        ],
        "psi_at_start": {
            "node": x,
            "theta": ctx.thetas.theta_max(),
            "values": [rep.values[0].at(top, x), rep.values[1].at(top, x)],
            "tol": opts.resid_tol,
        },
        "deviation": {
            "worst_gain": checked(dev.worst, cfg.solver.dev_tol, dev.holds),
            "worst_deviation": dev.worst_deviation.map(|i| json!({ "player": devs[i].0.index() + 1, "index": i })),
            "count": devs.len(),
        },
        "history": history_json(&rep.history),
    }))
}

fn nash_erg(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let opts = cfg.nash_options();
    let (anchor, source) = ctx.anchor()?;
    let rep = nash_iterate_ergodic(&ctx.disc, cfg.theta(), anchor, cfg.init_strategies(ctx.n()), &opts, &cfg.eigen_options())
        .map_err(num("ergodic fictitious play"))?;
    let grid = ctx.grid().clone();
    for k in Player::BOTH {
        let p = k.index() + 1;
        ctx.log.write(&format!("ergodic_p{p}.csv"), |f| write_nodal(f, &grid, "psi", &rep.solutions[k.index()].psi))?;
        ctx.log.write(&format!("strategies_p{p}.csv"), |f| write_strategies(f, &grid, &rep.strategies[k.index()], &[cfg.theta()]))?;
    }
    if !rep.converged || rep.cycling {
        ctx.log.flag(Status::NotConverged);
    }
    ctx.log.note(format!(
        "ergodic fictitious play: {} iterations, rho = {:.10e} / {:.10e}, converged {}, cycling {}",
        rep.iterations, rep.solutions[0].rho, rep.solutions[1].rho, rep.converged, rep.cycling
    ));
    Ok(json!({
        "anchor_source": source,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "cycling": rep.cycling,
        "change": checked(rep.change, opts.strat_tol, rep.change <= opts.strat_tol),
        "residuals": [
            checked(rep.residuals[0], opts.resid_tol, rep.residuals[0] <= opts.resid_tol),
            checked(rep.residuals[1], opts.resid_tol, rep.residuals[1] <= opts.resid_tol),
        ],
        "solutions": [solution_json(ctx, &rep.solutions[0]), solution_json(ctx, &rep.solutions[1])],
        "history": history_json(&rep.history),
    }))
}

/// Ten points spread over the central half of the first axis.
pub fn default_hitting_starts(grid: &Grid) -> Vec<Vec<f64>> {
    let l = grid.half_width()[0];
    (0..10)
        .map(|i| {
            let mut x = vec![0.0; grid.dim()];
            x[0] = -0.5 * l + l * i as f64 / 9.0;
            x
        })
        .collect()
}

fn simulate(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let pair: [StrategyField; 2] = match cfg.sim.strategies {
        SimStrategies::Init => cfg.init_strategies(ctx.n()),
        SimStrategies::Nash => {
            nash_iterate(&ctx.disc, &ctx.thetas, cfg.solver.alpha, cfg.init_strategies(ctx.n()), &cfg.nash_options())
                .map_err(num("fictitious play"))?
                .strategies
        }
    };
    let stationary = pair.iter().all(|s| s.is_stationary());
    let sc = Scenario {
        disc: &ctx.disc,
        strategies: [&pair[0], &pair[1]],
        thetas: if stationary { None } else { Some(&ctx.thetas) },
        dynamics: cfg.dynamics(),
    };
    let sim = cfg.sim_config();
    sim.validate(&ctx.disc, sc.dynamics).map_err(num("simulation settings"))?;
    let x = cfg.start();
    let theta_d = ctx.thetas.theta_max();
    let theta_e = cfg.theta();
    let mut players = Vec::new();
    for k in Player::BOTH {
        let d = mc_discounted(&sc, &x, theta_d, cfg.solver.alpha, k, &sim, ctx.runner).map_err(num("discounted Monte Carlo"))?;
        let e = mc_ergodic(&sc, &x, theta_e, k, &sim, ctx.runner).map_err(num("ergodic Monte Carlo"))?;
        ctx.log.note(format!(
            "player {}: discounted {:.6e} +- {:.2e}, ergodic {:.6e} +- {:.2e}",
            k.index() + 1,
            d.value.estimate,
            d.value.std_error,
            e.at_double.estimate,
            e.at_double.std_error
        ));
        players.push(json!({
            "discounted": {
                "theta": theta_d,
                "estimate": estimate(&d.value),
                "bracket": [d.lower, d.upper],
                "horizon": d.horizon,
                "risk_neutral": estimate(&d.risk_neutral),
                "jensen_ok": d.jensen_ok,
            },
            "ergodic": {
                "theta": theta_e,
                "at_horizon": estimate(&e.at_horizon),
                "at_double": estimate(&e.at_double),
                "max_weight_share": e.max_weight_share,
                "ess_warning": e.ess_warning,
            },
        }));
    }

    let mut cert_json = Value::Null;
    if let Some(cert) = ctx.cert.clone() {
        let k = cfg.player();
        let probe = moment_probe(&sc, &x, theta_e, k, &cert, &sim, ctx.runner).map_err(num("moment probe"))?;
        ctx.log.line("moment_probe", probe.holds, format!("excess {:.4e} +- {:.2e}", probe.excess.estimate, probe.excess.std_error));
        let mut hits = Vec::new();
        if let Some(target) = cfg.certificate.as_ref().and_then(|c| c.hitting_target.clone()) {
            let ball = Ball::new(target.center, target.radius);
            let starts = cfg.certificate.as_ref().and_then(|c| c.hitting_starts.clone()).unwrap_or_else(|| default_hitting_starts(ctx.grid()));
            for s in &starts {
                let h = mc_hitting_bound(&sc, s, &cert, &ball, &sim, ctx.runner).map_err(num("hitting time"))?;
                let pass = h.holds && !h.inconclusive;
                ctx.log.line(
                    "hitting_bound",
                    pass,
                    format!("x = {:?}: E e^(delta tau) = {:.4e} +- {:.2e} vs W(x) = {:.4e}, capped {:.3}", s, h.value.estimate, h.value.std_error, h.w_x, h.cap_fraction),
                );
                hits.push(json!({
                    "start": s,
                    "estimate": estimate(&h.value),
                    "w_x": h.w_x,
                    "cap_fraction": h.cap_fraction,
                    "holds": h.holds,
                    "inconclusive": h.inconclusive,
                }));
            }
        }
        cert_json = json!({
            "moment_probe": {
                "player": k.index() + 1,
                "excess": estimate(&probe.excess),
                "weight": estimate(&probe.weight),
                "holds": probe.holds,
            },
            "hitting": hits,
        });
    }

    if cfg.output.paths_csv {
        let ends = simulate_paths(&sc, &x, &sim, ctx.runner).map_err(num("path simulation"))?;
        let d = ctx.grid().dim();
        ctx.log.write("paths.csv", |f| write_paths(f, d, &ends))?;
    }
    Ok(json!({
        "start": x,
        "strategies": format!("{:?}", cfg.sim.strategies),
        "players": players,
        "certificate": cert_json,
    }))
}

fn oracle(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let (anchor, source) = ctx.anchor()?;
    let chain = ChainGame::from_discretization(&ctx.disc, cfg.oracle.dt).map_err(num("chain extraction"))?;
    let pair = cfg.oracle_strategies(ctx.n())?;
    let (theta_d, theta_e, alpha, kappa) = (ctx.thetas.theta_max(), cfg.theta(), cfg.solver.alpha, ctx.thetas.kappa());
    let grid = ctx.grid().clone();
    let mut players = Vec::new();
    for k in Player::BOTH {
        let p = k.index() + 1;
        let opp = &pair[k.other().index()];
        let vi = vi_discounted(&chain, theta_d, alpha, k, &pair[0], &pair[1], kappa, None).map_err(num("value iteration"))?;
        let perron = perron_ergodic(&chain, theta_e, k, &pair[0], &pair[1], anchor).map_err(num("Perron root"))?;
        let bd = brute_force_discounted(&chain, theta_d, alpha, k, opp, kappa).map_err(num("exhaustive discounted search"))?;
        let be = brute_force_ergodic(&chain, theta_e, k, opp, anchor).map_err(num("exhaustive ergodic search"))?;
        ctx.log.write(&format!("oracle_values_p{p}.csv"), |f| write_nodal(f, &grid, "value", &vi))?;
        ctx.log.write(&format!("oracle_perron_p{p}.csv"), |f| write_nodal(f, &grid, "psi", &perron.psi))?;
        ctx.log.note(format!("player {p}: perron rho = {:.10e}, best stationary rho = {:.10e}", perron.rho, be.values[0]));
        players.push(json!({
            "player": p,
            "discounted": { "theta": theta_d, "values": vi, "tol": cfg.oracle.dt },
            "perron": { "theta": theta_e, "lambda": perron.lambda, "rho": perron.rho, "tol": cfg.oracle.dt },
            "best_discounted": { "policy": bd.policy, "values": bd.values, "dominant": bd.dominant },
            "best_ergodic": { "policy": be.policy, "rho": be.values[0] },
        }));
    }
    Ok(json!({ "chain_dt": cfg.oracle.dt, "states": chain.states(), "anchor": anchor, "anchor_source": source, "players": players }))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn crosscheck(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.cfg;
    let (anchor, _) = ctx.anchor()?;
    let pair = cfg.oracle_strategies(ctx.n())?;
    let k = cfg.player();
    let (theta_d, theta_e, alpha, kappa) = (ctx.thetas.theta_max(), cfg.theta(), cfg.solver.alpha, ctx.thetas.kappa());
    let march = cfg.march();

    let pde = evaluate_discounted(&ctx.disc, &ctx.thetas, alpha, k, &pair[0], &pair[1], &march).map_err(num("discounted evaluation"))?;
    let pde_top = pde.level(ctx.top()).to_vec();
    let fine = ChainGame::from_discretization(&ctx.disc, cfg.oracle.dt).map_err(num("chain extraction"))?;
    let vi = vi_discounted(&fine, theta_d, alpha, k, &pair[0], &pair[1], kappa, None).map_err(num("value iteration"))?;
    let pde_vi = pde_top.iter().zip(&vi).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
    ctx.log.line("pde_vs_vi", pde_vi <= CROSS_TOL, format!("max rel {pde_vi:.3e} (tol {CROSS_TOL:.1e})"));

    let coarse = ChainGame::from_discretization(&ctx.disc, cfg.oracle.mc_dt).map_err(num("chain extraction"))?;
    let vi_mc = vi_discounted(&coarse, theta_d, alpha, k, &pair[0], &pair[1], kappa, None).map_err(num("value iteration"))?;
    let node = ctx.start_node();
    let x = ctx.grid().point(node);
    let sc = Scenario { disc: &ctx.disc, strategies: [&pair[0], &pair[1]], thetas: None, dynamics: Dynamics::Chain };
    let sim = SimConfig { dt: cfg.oracle.mc_dt, paths: cfg.oracle.mc_paths, ..cfg.sim_config() };
    let mc = mc_discounted(&sc, &x, theta_d, alpha, k, &sim, ctx.runner).map_err(num("chain Monte Carlo"))?;
    let (m, se) = (mc.value.estimate, mc.value.std_error);
    let tol_vi = (CROSS_TOL * vi_mc[node]).max(3.0 * se);
    let tol_pde = (CROSS_TOL * pde_top[node]).max(3.0 * se);
    let d_vi = (m - vi_mc[node]).abs();
    let d_pde = (m - pde_top[node]).abs();
    ctx.log.line("mc_vs_vi", d_vi <= tol_vi, format!("|{m:.6e} - {:.6e}| = {d_vi:.2e} (tol {tol_vi:.2e}, se {se:.2e})", vi_mc[node]));
    ctx.log.line("mc_vs_pde", d_pde <= tol_pde, format!("|{m:.6e} - {:.6e}| = {d_pde:.2e} (tol {tol_pde:.2e}, se {se:.2e})", pde_top[node]));

    let mut eig = Vec::new();
    for p in Player::BOTH {
        let e = rsgame_core::ergodic::evaluate_ergodic(&ctx.disc, theta_e, p, &pair[0], &pair[1], anchor, &cfg.eigen_options())
            .map_err(num("eigen evaluation"))?;
        let o = perron_ergodic(&fine, theta_e, p, &pair[0], &pair[1], anchor).map_err(num("Perron root"))?;
        let r = rel(e.rho, o.rho);
        let psi = e.psi.iter().zip(&o.psi).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
        let pass = r <= CROSS_TOL && psi <= CROSS_TOL;
        ctx.log.line(
            &format!("eigen_vs_perron_p{}", p.index() + 1),
            pass,
            format!("rho {:.8e} vs {:.8e} (rel {r:.2e}), psi max rel {psi:.2e}", e.rho, o.rho),
        );
        eig.push(json!({
            "player": p.index() + 1,
            "rho": e.rho,
            "perron_rho": o.rho,
            "rho_rel": checked(r, CROSS_TOL, r <= CROSS_TOL),
            "psi_rel": checked(psi, CROSS_TOL, psi <= CROSS_TOL),
        }));
    }
    Ok(json!({
        "player": k.index() + 1,
        "node": node,
        "pde_vs_vi": checked(pde_vi, CROSS_TOL, pde_vi <= CROSS_TOL),
        "mc": estimate(&mc.value),
        "mc_vs_vi": { "diff": d_vi, "tol": tol_vi, "pass": d_vi <= tol_vi, "vi": vi_mc[node] },
        "mc_vs_pde": { "diff": d_pde, "tol": tol_pde, "pass": d_pde <= tol_pde, "pde": pde_top[node] },
        "eigen_vs_perron": eig,
    }))
}
