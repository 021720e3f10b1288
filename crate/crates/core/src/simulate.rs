//! Monte-Carlo estimators under strategy fields.
//!
//! Paths follow either the Euler-Maruyama scheme for the SDE, reflected at
//! the box boundary, or the discrete chain `P = I + dt Q` of the grid. Each
//! path owns the ChaCha8 stream `path` under `seed`, so results do not depend
//! on the order in which paths run. Per-path outputs are combined by pairwise
//! summation in path order.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, log, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::discretize::{extract_chain, Discretization, ThetaGrid, TransitionMatrix};
use crate::error::{Error, Result};
use crate::model::{Ball, LyapunovCertificate, Player, MAX_DIM};
use crate::strategy::StrategyField;

/// How mixed actions enter a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mixing {
    /// Draw a pure action per player from the weights at every step.
    SampleActions,
    /// Use the mixed drift and cost directly.
    AverageDrift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Sde,
    /// Chain of the grid generator, one transition per `dt`.
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Horizon for ergodic, hitting and probe runs; discounted runs pick their own.
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub mixing: Mixing,
    pub tail_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-2, horizon: 20.0, paths: 10_000, seed: 0, mixing: Mixing::SampleActions, tail_tol: 1e-4 }
    }
}

impl SimConfig {
    pub fn validate(&self, disc: &Discretization, dynamics: Dynamics) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || !(self.tail_tol > 0.0) || self.paths < 100 {
            return Err(Error::InvalidSpec("simulation needs dt, horizon, tail_tol > 0 and at least 100 paths".into()));
        }
        let dx = disc.grid().spacing().iter().copied().fold(f64::INFINITY, f64::min);
        if self.dt > dx {
            return Err(Error::TimeStepTooLarge { dt: self.dt, bound: dx });
        }
        if dynamics == Dynamics::Chain {
            let (m1, m2) = (disc.actions(Player::One), disc.actions(Player::Two));
            for u1 in 0..m1 {
                for u2 in 0..m2 {
                    extract_chain(disc.generator(u1, u2), self.dt)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Discounted,
    Ergodic,
    Hitting,
    Probe,
    RiskNeutral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    pub estimator: Estimator,
}

/// Runs `f(path)` for every path and returns outputs in path order.
pub trait PathRunner {
    fn run(&self, paths: usize, f: &(dyn Fn(usize) -> [f64; 4] + Sync)) -> Vec<[f64; 4]>;
}

pub struct Sequential;

impl PathRunner for Sequential {
    fn run(&self, paths: usize, f: &(dyn Fn(usize) -> [f64; 4] + Sync)) -> Vec<[f64; 4]> {
        (0..paths).map(f).collect()
    }
}

/// Deterministic pairwise sum.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let h = v.len() / 2;
    pairwise_sum(&v[..h]) + pairwise_sum(&v[h..])
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, sqrt(pairwise_sum(&dev) / (n - 1.0) / n))
}

/// A discretized game with the strategies that drive it.
pub struct Scenario<'a> {
    pub disc: &'a Discretization,
    pub strategies: [&'a StrategyField; 2],
    /// Theta levels of eventually stationary fields.
    pub thetas: Option<&'a ThetaGrid>,
    pub dynamics: Dynamics,
}

#[derive(Clone, Copy)]
struct State {
    x: [f64; MAX_DIM],
    node: usize,
}

struct Walker<'a> {
    sc: &'a Scenario<'a>,
    chains: Vec<TransitionMatrix>,
    dt: f64,
    sqrt_dt: f64,
    mixing: Mixing,
}

impl<'a> Walker<'a> {
    fn new(sc: &'a Scenario<'a>, cfg: &SimConfig) -> Result<Self> {
        cfg.validate(sc.disc, sc.dynamics)?;
        for (p, f) in Player::BOTH.iter().zip(sc.strategies) {
            if f.nodes() != sc.disc.len() || f.actions() != sc.disc.actions(*p) {
                return Err(Error::Dimension("strategy field does not match the grid or action set".into()));
            }
            if !f.is_stationary() && sc.thetas.is_none_or(|t| t.nodes().len() != f.levels()) {
                return Err(Error::Dimension("theta-dependent strategy needs its theta grid".into()));
            }
        }
        let mut chains = Vec::new();
        if sc.dynamics == Dynamics::Chain {
            let (m1, m2) = (sc.disc.actions(Player::One), sc.disc.actions(Player::Two));
            for u1 in 0..m1 {
                for u2 in 0..m2 {
                    chains.push(extract_chain(sc.disc.generator(u1, u2), cfg.dt)?);
                }
            }
        }
        Ok(Self { sc, chains, dt: cfg.dt, sqrt_dt: sqrt(cfg.dt), mixing: cfg.mixing })
    }

    fn start(&self, x: &[f64]) -> State {
        let grid = self.sc.disc.grid();
        let node = grid.nearest(x);
        let mut s = State { x: [0.0; MAX_DIM], node };
        match self.sc.dynamics {
            Dynamics::Sde => {
                let d = grid.dim();
                for k in 0..d {
                    s.x[k] = x[k].clamp(-grid.half_width()[k], grid.half_width()[k]);
                }
            }
            Dynamics::Chain => {}
        }
        s
    }

    /// Current position; chain states sit on their node.
    fn position(&self, s: &State) -> [f64; MAX_DIM] {
        match self.sc.dynamics {
            Dynamics::Sde => s.x,
            Dynamics::Chain => {
                let mut x = [0.0; MAX_DIM];
                self.sc.disc.grid().point_into(s.node, &mut x);
                x
            }
        }
    }

    /// Advances one step and returns player k's running cost at the pre-step state.
    fn step(&self, s: &mut State, level: usize, k: Player, rng: &mut ChaCha8Rng) -> f64 {
        let disc = self.sc.disc;
        let grid = disc.grid();
        let d = grid.dim();
        let w1 = self.sc.strategies[0].at(level, s.node);
        let w2 = self.sc.strategies[1].at(level, s.node);
        let pure = match self.mixing {
            Mixing::SampleActions => Some((sample(w1, rng), sample(w2, rng))),
            Mixing::AverageDrift => None,
        };
        match self.sc.dynamics {
            Dynamics::Sde => {
                let spec = disc.spec();
                let x = &s.x[..d];
                let (b, r) = match pure {
                    Some((u1, u2)) => (spec.pure_drift(x, u1, u2), spec.pure_cost(k, x, u1, u2)),
                    None => {
                        let mut b = [0.0; MAX_DIM];
                        let mut r = 0.0;
                        for (p, w) in Player::BOTH.iter().zip([w1, w2]) {
                            let fields = spec.drift_field(*p);
                            let cost = spec.cost_field(k, *p);
                            for (u, &q) in w.iter().enumerate() {
                                if q == 0.0 {
                                    continue;
                                }
                                for (bi, f) in b.iter_mut().zip(fields) {
                                    *bi += q * f.eval(x, u);
                                }
                                r += q * cost.eval(x, u);
                            }
                        }
                        (b, r)
                    }
                };
                let sig = spec.diffusion().sigma(x);
                let mut xi = [0.0; MAX_DIM];
                for z in xi.iter_mut().take(d) {
                    *z = rng.sample(StandardNormal);
                }
                let mut next = s.x;
                for i in 0..d {
                    let mut noise = 0.0;
                    for j in 0..d {
                        noise += sig[i][j] * xi[j];
                    }
                    next[i] = reflect(s.x[i] + b[i] * self.dt + noise * self.sqrt_dt, grid.half_width()[i]);
                }
                s.x = next;
                s.node = grid.nearest(&s.x[..d]);
                r
            }
            Dynamics::Chain => {
                let i = s.node;
                let m2 = disc.actions(Player::Two);
                let r = match pure {
                    Some((u1, u2)) => disc.cost_part(k, Player::One, i, u1) + disc.cost_part(k, Player::Two, i, u2),
                    None => disc.mixed_cost(k, i, w1, w2),
                };
                let mut probs = [0.0; 2 * MAX_DIM];
                let mut cols = &[][..];
                match pure {
                    Some((u1, u2)) => {
                        let (c, mv, _) = self.chains[u1 * m2 + u2].row(i);
                        cols = c;
                        probs[..mv.len()].copy_from_slice(mv);
                    }
                    None => {
                        for (u1, &p1) in w1.iter().enumerate() {
                            for (u2, &p2) in w2.iter().enumerate() {
                                let p = p1 * p2;
                                if p == 0.0 {
                                    continue;
                                }
                                let (c, mv, _) = self.chains[u1 * m2 + u2].row(i);
                                cols = c;
                                for (a, b) in probs.iter_mut().zip(mv) {
                                    *a += p * b;
                                }
                            }
                        }
                    }
                }
                let mut u: f64 = rng.random();
                for (c, p) in cols.iter().zip(&probs) {
                    if u < *p {
                        s.node = *c;
                        break;
                    }
                    u -= p;
                }
                r
            }
        }
    }
}

#[inline]
fn reflect(mut x: f64, l: f64) -> f64 {
    if x > l {
        x = 2.0 * l - x;
    }
    if x < -l {
        x = -2.0 * l - x;
    }
    x.clamp(-l, l)
}

#[inline]
fn sample(w: &[f64], rng: &mut ChaCha8Rng) -> usize {
    if w.len() == 1 {
        return 0;
    }
    let mut u: f64 = rng.random();
    let mut last = 0;
    for (a, &p) in w.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = a;
        if u < p {
            return a;
        }
        u -= p;
    }
    last
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn steps_for(t: f64, dt: f64) -> usize {
    (ceil(t / dt - 1e-9) as usize).max(1)
}

/// Final positions of every path after `horizon`.
pub fn simulate_paths(sc: &Scenario, x_init: &[f64], cfg: &SimConfig, runner: &dyn PathRunner) -> Result<Vec<[f64; MAX_DIM]>> {
    let walker = Walker::new(sc, cfg)?;
    let steps = steps_for(cfg.horizon, cfg.dt);
    let out = runner.run(cfg.paths, &|p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut s = walker.start(x_init);
        for _ in 0..steps {
            walker.step(&mut s, 0, Player::One, &mut rng);
        }
        let x = walker.position(&s);
        [x[0], x[1], 0.0, 0.0]
    });
    Ok(out.into_iter().map(|o| [o[0], o[1]]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscountedEstimate {
    /// Estimate of `E exp(theta int_0^T e^{-alpha t} r dt)`.
    pub value: CostEstimate,
    /// Interval for the untruncated criterion: the estimate widened by three
    /// standard errors and by the tail factor `e^{+-tail_tol}`.
    pub lower: f64,
    pub upper: f64,
    pub horizon: f64,
    /// `E int_0^T e^{-alpha t} r dt` from the same paths.
    pub risk_neutral: CostEstimate,
    /// `value >= exp(theta * risk_neutral) - 3 se`.
    pub jensen_ok: bool,
}

/// Horizon with `theta |r| e^{-alpha T} / alpha <= tail_tol`.
pub fn discounted_horizon(theta: f64, alpha: f64, cost_sup: f64, tail_tol: f64) -> f64 {
    let ratio = theta * cost_sup / (alpha * tail_tol);
    if ratio > 1.0 {
        log(ratio) / alpha
    } else {
        0.0
    }
}

pub fn mc_discounted(
    sc: &Scenario,
    x_init: &[f64],
    theta: f64,
    alpha: f64,
    k: Player,
    cfg: &SimConfig,
    runner: &dyn PathRunner,
) -> Result<DiscountedEstimate> {
    if !(theta > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidSpec("theta and alpha must be positive".into()));
    }
    let walker = Walker::new(sc, cfg)?;
    let horizon = discounted_horizon(theta, alpha, sc.disc.cost_sup(k), cfg.tail_tol);
    let steps = if horizon > 0.0 { steps_for(horizon, cfg.dt) } else { 0 };
    let factors: Vec<f64> = (0..steps).map(|n| exp(-alpha * cfg.dt * n as f64)).collect();
    let levels: Vec<usize> = match sc.thetas {
        Some(t) => factors.iter().map(|f| t.level_near(theta * f)).collect(),
        None => vec![0; steps],
    };
    let out = runner.run(cfg.paths, &|p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut s = walker.start(x_init);
        let mut acc = 0.0;
        for (f, l) in factors.iter().zip(&levels) {
            acc += f * walker.step(&mut s, *l, k, &mut rng) * cfg.dt;
        }
        [exp(theta * acc), acc, 0.0, 0.0]
    });
    let vals: Vec<f64> = out.iter().map(|o| o[0]).collect();
    let rn: Vec<f64> = out.iter().map(|o| o[1]).collect();
    let (m, se) = mean_se(&vals);
    let (rm, rse) = mean_se(&rn);
    Ok(DiscountedEstimate {
        value: CostEstimate { estimate: m, std_error: se, paths: cfg.paths, estimator: Estimator::Discounted },
        lower: (m - 3.0 * se) * exp(-cfg.tail_tol),
        upper: (m + 3.0 * se) * exp(cfg.tail_tol),
        horizon,
        risk_neutral: CostEstimate { estimate: rm, std_error: rse, paths: cfg.paths, estimator: Estimator::RiskNeutral },
        jensen_ok: m >= exp(theta * rm) - 3.0 * se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicEstimate {
    /// `(1 / theta T) log E exp(theta int_0^T r dt)` at the configured horizon.
    pub at_horizon: CostEstimate,
    /// The same at twice the horizon.
    pub at_double: CostEstimate,
    /// Largest single-path share of the exponential mass at `2T`.
    pub max_weight_share: f64,
    /// Set when one path carries more than half of the mass. The log-mean-exp
    /// estimator is biased downward at finite N in any case.
    pub ess_warning: bool,
}

fn log_mean_exp(a: &[f64], scale: f64, paths: usize) -> (CostEstimate, f64) {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = a.iter().map(|x| exp(x - m)).collect();
    let (mean, se) = mean_se(&w);
    let total = pairwise_sum(&w);
    let est = (log(mean) + m) / scale;
    (CostEstimate { estimate: est, std_error: se / mean / scale, paths, estimator: Estimator::Ergodic }, 1.0 / total)
}

pub fn mc_ergodic(sc: &Scenario, x_init: &[f64], theta: f64, k: Player, cfg: &SimConfig, runner: &dyn PathRunner) -> Result<ErgodicEstimate> {
    if !(theta > 0.0) {
        return Err(Error::InvalidSpec("theta must be positive".into()));
    }
    if !sc.strategies.iter().all(|f| f.is_stationary()) {
        return Err(Error::InvalidSpec("ergodic estimates need stationary strategies".into()));
    }
    let walker = Walker::new(sc, cfg)?;
    let steps = steps_for(cfg.horizon, cfg.dt);
    let out = runner.run(cfg.paths, &|p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut s = walker.start(x_init);
        let mut acc = 0.0;
        let mut first = 0.0;
        for n in 0..2 * steps {
            acc += walker.step(&mut s, 0, k, &mut rng) * cfg.dt;
            if n + 1 == steps {
                first = acc;
            }
        }
        [theta * first, theta * acc, 0.0, 0.0]
    });
    let t = steps as f64 * cfg.dt;
    let a1: Vec<f64> = out.iter().map(|o| o[0]).collect();
    let a2: Vec<f64> = out.iter().map(|o| o[1]).collect();
    let (at_horizon, _) = log_mean_exp(&a1, theta * t, cfg.paths);
    let (at_double, share) = log_mean_exp(&a2, theta * 2.0 * t, cfg.paths);
    Ok(ErgodicEstimate { at_horizon, at_double, max_weight_share: share, ess_warning: share > 0.5 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HittingEstimate {
    /// Estimate of `E exp(delta min(tau, T))`.
    pub value: CostEstimate,
    pub w_x: f64,
    /// Fraction of paths that had not entered the ball by the horizon.
    pub cap_fraction: f64,
    /// `estimate <= W(x) + 3 se`.
    pub holds: bool,
    /// Set when more than 1% of paths were capped.
    pub inconclusive: bool,
}

/// Exponential moment of the first entry time into `ball`.
pub fn mc_hitting_bound(
    sc: &Scenario,
    x_init: &[f64],
    cert: &LyapunovCertificate,
    ball: &Ball,
    cfg: &SimConfig,
    runner: &dyn PathRunner,
) -> Result<HittingEstimate> {
    let grid = sc.disc.grid();
    let d = grid.dim();
    if ball.center.len() != d {
        return Err(Error::Dimension("ball and grid dimensions differ".into()));
    }
    let mut x = [0.0; MAX_DIM];
    let mut inside = 0;
    for i in 0..grid.len() {
        grid.point_into(i, &mut x);
        if ball.contains(&x[..d]) {
            inside += 1;
            if !cert.in_c0(&x[..d]) {
                return Err(Error::InvalidSpec("target ball must lie inside C0".into()));
            }
        }
    }
    if inside == 0 {
        return Err(Error::InvalidSpec("target ball contains no grid node".into()));
    }
    let walker = Walker::new(sc, cfg)?;
    let steps = steps_for(cfg.horizon, cfg.dt);
    let delta = cert.delta;
    let out = runner.run(cfg.paths, &|p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut s = walker.start(x_init);
        let mut n = 0;
        while n < steps && !ball.contains(&walker.position(&s)[..d]) {
            walker.step(&mut s, 0, Player::One, &mut rng);
            n += 1;
        }
        let capped = if ball.contains(&walker.position(&s)[..d]) { 0.0 } else { 1.0 };
        [exp(delta * n as f64 * cfg.dt), capped, 0.0, 0.0]
    });
    let vals: Vec<f64> = out.iter().map(|o| o[0]).collect();
    let caps: Vec<f64> = out.iter().map(|o| o[1]).collect();
    let (m, se) = mean_se(&vals);
    let cap_fraction = pairwise_sum(&caps) / cfg.paths as f64;
    let w_x = cert.w.value(&x_init[..d]);
    Ok(HittingEstimate {
        value: CostEstimate { estimate: m, std_error: se, paths: cfg.paths, estimator: Estimator::Hitting },
        w_x,
        cap_fraction,
        holds: m <= w_x + 3.0 * se,
        inconclusive: cap_fraction > 0.01,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    /// Mean of `e^A (W(X_T) - W(x) - c T)` with `A = theta int_0^T r dt`.
    pub excess: CostEstimate,
    /// `E e^A`, the scale of the excess.
    pub weight: CostEstimate,
    /// `excess <= 3 se`.
    pub holds: bool,
}

/// Checks `E[e^A W(X_T)] <= (W(x) + c T) E[e^A]` on one horizon.
pub fn moment_probe(
    sc: &Scenario,
    x_init: &[f64],
    theta: f64,
    k: Player,
    cert: &LyapunovCertificate,
    cfg: &SimConfig,
    runner: &dyn PathRunner,
) -> Result<ProbeEstimate> {
    let walker = Walker::new(sc, cfg)?;
    let d = sc.disc.grid().dim();
    let steps = steps_for(cfg.horizon, cfg.dt);
    let t = steps as f64 * cfg.dt;
    let level = cert.w.value(&x_init[..d]) + cert.c * t;
    let out = runner.run(cfg.paths, &|p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut s = walker.start(x_init);
        let mut acc = 0.0;
        for _ in 0..steps {
            acc += walker.step(&mut s, 0, k, &mut rng) * cfg.dt;
        }
        let e = exp(theta * acc);
        [e * (cert.w.value(&walker.position(&s)[..d]) - level), e, 0.0, 0.0]
    });
    let ex: Vec<f64> = out.iter().map(|o| o[0]).collect();
    let wt: Vec<f64> = out.iter().map(|o| o[1]).collect();
    let (m, se) = mean_se(&ex);
    let (wm, wse) = mean_se(&wt);
    Ok(ProbeEstimate {
        excess: CostEstimate { estimate: m, std_error: se, paths: cfg.paths, estimator: Estimator::Probe },
        weight: CostEstimate { estimate: wm, std_error: wse, paths: cfg.paths, estimator: Estimator::Probe },
        holds: m <= 3.0 * se,
    })
}
