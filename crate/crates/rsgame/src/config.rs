//! TOML run configuration.
//!
//! ```toml
//! [game]
//! dim = 1
//! actions = [2, 2]
//! diffusion = { kind = "constant", sigma = [1.0] }
//!
//! [[game.drift]]            # terms add up per (player, axis)
//! player = 1
//! axis = 0
//! kind = "tanh_affine"
//! offset = [0.5, -0.5]
//! slope = [[-2.0], [-2.0]]
//!
//! [[game.cost]]             # part of `payer`'s cost driven by `player`'s action
//! payer = 1
//! player = 2
//! kind = "constant"
//! values = [0.0, 0.1]
//!
//! [certificate]
//! lyapunov = { kind = "cosh", gamma = [1.0] }
//! delta = 0.25
//! c = 1.25
//! set = { center = [0.0], radius = 2.0 }
//!
//! [grid]
//! half_width = [6.0]
//! dx = [0.1]                # or nodes = [5]
//! n_theta = 400
//! theta_max = 0.5
//!
//! [solver]
//! alpha = 1.0
//! theta = 0.2
//!
//! [sim]
//! dt = 0.01
//! paths = 10000
//! seed = 0
//!
//! [output]
//! dir = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use rsgame_core::discretize::{Discretization, Grid, ThetaGrid};
use rsgame_core::ergodic::EigenOptions;
use rsgame_core::hjb::MarchOptions;
use rsgame_core::model::{ActionField, Ball, Diffusion, FunctionTerm, GameSpec, InfCompact, Lyapunov, LyapunovCertificate, StrongLyapunov};
use rsgame_core::nash::{NashOptions, Schedule};
use rsgame_core::simulate::{Dynamics, Mixing, SimConfig};
use rsgame_core::{Player, StrategyField};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.to_string() }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameConfig,
    pub certificate: Option<CertificateConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub dim: usize,
    pub actions: [usize; 2],
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub drift: Vec<DriftTerm>,
    #[serde(default)]
    pub cost: Vec<CostTerm>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    /// Row-major `d x d` matrix sigma.
    Constant { sigma: Vec<f64> },
    DiagonalTanh { offset: Vec<f64>, slope: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermConfig {
    Constant { values: Vec<f64> },
    TanhAffine { offset: Vec<f64>, slope: Vec<Vec<f64>> },
    GaussBump { weight: Vec<f64>, center: Vec<f64>, width: f64 },
}

impl TermConfig {
    fn to_term(&self) -> FunctionTerm {
        match self.clone() {
            TermConfig::Constant { values } => FunctionTerm::Constant { values },
            TermConfig::TanhAffine { offset, slope } => FunctionTerm::TanhAffine { offset, slope },
            TermConfig::GaussBump { weight, center, width } => FunctionTerm::GaussBump { weight, center, width },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct DriftTerm {
    pub player: u8,
    pub axis: usize,
    #[serde(flatten)]
    pub term: TermConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct CostTerm {
    pub payer: u8,
    pub player: u8,
    #[serde(flatten)]
    pub term: TermConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LyapunovConfig {
    Cosh { gamma: Vec<f64> },
    Quadratic { q: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfCompactConfig {
    Quadratic { coeff: f64 },
    PowerOfW { coeff: f64, power: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StrongConfig {
    pub beta: f64,
    pub h: InfCompactConfig,
    pub c_hat: f64,
    pub set: BallConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub lyapunov: LyapunovConfig,
    pub delta: f64,
    pub c: f64,
    pub set: BallConfig,
    pub strong: Option<StrongConfig>,
    /// Start points for the hitting-time check; defaults to ten points spread
    /// over the central half of the first axis.
    pub hitting_starts: Option<Vec<Vec<f64>>>,
    /// Target ball of the hitting-time check (must lie in C0); the check is skipped without one.
    pub hitting_target: Option<BallConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: Vec<f64>,
    pub dx: Option<Vec<f64>>,
    pub nodes: Option<Vec<usize>>,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    pub kappa: Option<f64>,
    pub theta_max: f64,
}

fn default_n_theta() -> usize {
    400
}

/// Strategy shorthand: `"uniform"` or `"pure:<action>"`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrategyChoice {
    Uniform,
    Pure(usize),
}

impl StrategyChoice {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "uniform" {
            return Some(StrategyChoice::Uniform);
        }
        s.strip_prefix("pure:").and_then(|u| u.parse().ok()).map(StrategyChoice::Pure)
    }

    pub fn build(&self, actions: usize, nodes: usize) -> Option<StrategyField> {
        match *self {
            StrategyChoice::Uniform => Some(StrategyField::uniform(actions, nodes)),
            StrategyChoice::Pure(u) if u < actions => Some(StrategyField::constant(actions, nodes, u)),
            StrategyChoice::Pure(_) => None,
        }
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyChoice::Uniform => write!(f, "uniform"),
            StrategyChoice::Pure(u) => write!(f, "pure:{u}"),
        }
    }
}

impl Serialize for StrategyChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        StrategyChoice::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("expected \"uniform\" or \"pure:<action>\", got {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Harmonic,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub alpha: f64,
    pub theta: Option<f64>,
    pub strat_tol: f64,
    pub resid_tol: f64,
    pub max_iter: usize,
    pub schedule: ScheduleKind,
    pub beta: f64,
    pub init: [StrategyChoice; 2],
    /// Optimizing player for the single-player solves.
    pub player: u8,
    pub max_inner: usize,
    pub bound_slack: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub eigen_max_outer: usize,
    /// Normalization node for the ergodic solves; defaults to the certificate anchor.
    pub anchor: Option<usize>,
    pub dev_tol: f64,
    pub deviations: usize,
    pub deviation_seed: u64,
    /// Discount rates used by the vanishing-discount check.
    pub alphas: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let n = NashOptions::default();
        let e = EigenOptions::default();
        Self {
            alpha: 1.0,
            theta: None,
            strat_tol: n.strat_tol,
            resid_tol: n.resid_tol,
            max_iter: n.max_iter,
            schedule: ScheduleKind::Constant,
            beta: 0.5,
            init: [StrategyChoice::Uniform, StrategyChoice::Uniform],
            player: 1,
            max_inner: n.march.max_inner,
            bound_slack: n.march.bound_slack,
            eigen_tol: e.tol,
            eigen_max_iter: e.max_iter,
            eigen_max_outer: e.max_outer,
            anchor: None,
            dev_tol: 5e-3,
            deviations: 64,
            deviation_seed: 0,
            alphas: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    SampleActions,
    AverageDrift,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Sde,
    Chain,
}

/// Strategies fed to the simulator.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SimStrategies {
    /// `solver.init`.
    Init,
    /// The pair returned by the discounted fictitious play.
    Nash,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub mixing: MixingKind,
    pub dynamics: DynamicsKind,
    pub tail_tol: f64,
    pub start: Option<Vec<f64>>,
    pub strategies: SimStrategies,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            dt: s.dt,
            horizon: s.horizon,
            paths: s.paths,
            seed: s.seed,
            mixing: MixingKind::SampleActions,
            dynamics: DynamicsKind::Sde,
            tail_tol: s.tail_tol,
            start: None,
            strategies: SimStrategies::Init,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Chain time step for value iteration and the Perron root.
    pub dt: f64,
    /// Chain time step used by Monte Carlo in `crosscheck`.
    pub mc_dt: f64,
    pub mc_paths: usize,
    /// Mixed strategies per player, row-major (node, action); defaults to `solver.init`.
    pub strategies: Option<[Vec<f64>; 2]>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { dt: 1e-4, mc_dt: 1e-3, mc_paths: 20_000, strategies: None }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Lower bound on the smallest eigenvalue of `sigma sigma^T` at the grid nodes.
    pub ellip_min: f64,
    /// Allowed excess in the pointwise Lyapunov inequalities.
    pub slack_tol: f64,
    /// Required margin of the drift condition.
    pub min_margin: f64,
    /// Relative slack of the ergodic eigenfunction bounds.
    pub bound_slack: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { ellip_min: 1e-6, slack_tol: 0.0, min_margin: 0.0, bound_slack: 1e-8 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write final path positions from `simulate`.
    pub paths_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), paths_csv: false }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.game.dim;
        let g = &self.grid;
        if g.half_width.len() != d {
            return Err(invalid("grid.half_width", format!("expected {d} entries")));
        }
        match (&g.dx, &g.nodes) {
            (Some(dx), None) if dx.len() != d => return Err(invalid("grid.dx", format!("expected {d} entries"))),
            (None, Some(n)) if n.len() != d => return Err(invalid("grid.nodes", format!("expected {d} entries"))),
            (Some(_), Some(_)) | (None, None) => return Err(invalid("grid", "give exactly one of dx and nodes")),
            _ => {}
        }
        if g.n_theta == 0 {
            return Err(invalid("grid.n_theta", "must be positive"));
        }
        if !(g.theta_max > 0.0) {
            return Err(invalid("grid.theta_max", "must be positive"));
        }
        if let Some(k) = g.kappa {
            if !(k > 0.0 && k < g.theta_max) {
                return Err(invalid("grid.kappa", "must lie in (0, theta_max)"));
            }
        }
        let s = &self.solver;
        if let Some(t) = s.theta {
            if !(t > 0.0 && t <= g.theta_max) {
                return Err(invalid("solver.theta", "must lie in (0, theta_max]"));
            }
        }
        for (key, v) in [
            ("solver.alpha", s.alpha),
            ("solver.strat_tol", s.strat_tol),
            ("solver.resid_tol", s.resid_tol),
            ("solver.bound_slack", s.bound_slack),
            ("solver.eigen_tol", s.eigen_tol),
            ("solver.dev_tol", s.dev_tol),
            ("sim.dt", self.sim.dt),
            ("sim.horizon", self.sim.horizon),
            ("sim.tail_tol", self.sim.tail_tol),
            ("oracle.dt", self.oracle.dt),
            ("oracle.mc_dt", self.oracle.mc_dt),
            ("check.ellip_min", self.check.ellip_min),
            ("check.bound_slack", self.check.bound_slack),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(key, "must be positive and finite"));
            }
        }
        if !(s.beta > 0.0 && s.beta <= 1.0) {
            return Err(invalid("solver.beta", "must lie in (0, 1]"));
        }
        if s.player != 1 && s.player != 2 {
            return Err(invalid("solver.player", "must be 1 or 2"));
        }
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be positive"));
        }
        for (p, c) in s.init.iter().enumerate() {
            if let StrategyChoice::Pure(u) = c {
                if *u >= self.game.actions[p] {
                    return Err(invalid(format!("solver.init[{p}]"), format!("action {u} out of range")));
                }
            }
        }
        if let Some(x) = &self.sim.start {
            if x.len() != d {
                return Err(invalid("sim.start", format!("expected {d} entries")));
            }
        }
        for (i, t) in self.game.drift.iter().enumerate() {
            if !(t.player == 1 || t.player == 2) || t.axis >= d {
                return Err(invalid(format!("game.drift[{i}]"), "player must be 1 or 2 and axis below dim"));
            }
        }
        for (i, t) in self.game.cost.iter().enumerate() {
            if !(t.payer == 1 || t.payer == 2) || !(t.player == 1 || t.player == 2) {
                return Err(invalid(format!("game.cost[{i}]"), "payer and player must be 1 or 2"));
            }
        }
        Ok(())
    }

    pub fn game_spec(&self) -> Result<GameSpec, ConfigError> {
        let g = &self.game;
        let mut drift: [Vec<Vec<FunctionTerm>>; 2] = [vec![Vec::new(); g.dim], vec![Vec::new(); g.dim]];
        for t in &g.drift {
            drift[t.player as usize - 1][t.axis].push(t.term.to_term());
        }
        let mut cost: [[Vec<FunctionTerm>; 2]; 2] = Default::default();
        for t in &g.cost {
            cost[t.payer as usize - 1][t.player as usize - 1].push(t.term.to_term());
        }
        let field = |key: String, m: usize, terms: Vec<FunctionTerm>| ActionField::new(m, terms).map_err(|e| invalid(key, e));
        let mut df: [Vec<ActionField>; 2] = [Vec::new(), Vec::new()];
        for p in 0..2 {
            for (axis, terms) in drift[p].drain(..).enumerate() {
                df[p].push(field(format!("game.drift (player {}, axis {axis})", p + 1), g.actions[p], terms)?);
            }
        }
        let mut cf = Vec::with_capacity(4);
        for k in 0..2 {
            for j in 0..2 {
                let terms = std::mem::take(&mut cost[k][j]);
                cf.push(field(format!("game.cost (payer {}, player {})", k + 1, j + 1), g.actions[j], terms)?);
            }
        }
        let mut cf = cf.into_iter();
        let mut next = || cf.next().expect("four cost fields");
        let cf = [[next(), next()], [next(), next()]];
        let diffusion = match &g.diffusion {
            DiffusionConfig::Constant { sigma } => Diffusion::Constant { sigma: sigma.clone() },
            DiffusionConfig::DiagonalTanh { offset, slope } => Diffusion::DiagonalTanh { offset: offset.clone(), slope: slope.clone() },
        };
        GameSpec::new(g.dim, df, cf, diffusion).map_err(|e| invalid("game", e))
    }

    pub fn certificate(&self) -> Result<Option<LyapunovCertificate>, ConfigError> {
        let Some(c) = &self.certificate else { return Ok(None) };
        let w = match &c.lyapunov {
            LyapunovConfig::Cosh { gamma } => Lyapunov::Cosh { gamma: gamma.clone() },
            LyapunovConfig::Quadratic { q } => Lyapunov::Quadratic { q: q.clone() },
        };
        let strong = c.strong.as_ref().map(|s| StrongLyapunov {
            beta: s.beta,
            h: match s.h {
                InfCompactConfig::Quadratic { coeff } => InfCompact::Quadratic { coeff },
                InfCompactConfig::PowerOfW { coeff, power } => InfCompact::PowerOfW { coeff, power },
            },
            c_hat: s.c_hat,
            set: ball(&s.set),
        });
        LyapunovCertificate::new(w, c.delta, c.c, ball(&c.set), strong).map(Some).map_err(|e| invalid("certificate", e))
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        let r = match (&g.dx, &g.nodes) {
            (Some(dx), _) => Grid::uniform(&g.half_width, dx),
            (None, Some(n)) => Grid::with_nodes(&g.half_width, n),
            (None, None) => unreachable!("checked in validate"),
        };
        r.map_err(|e| invalid("grid", e))
    }

    pub fn theta_grid(&self) -> Result<ThetaGrid, ConfigError> {
        let g = &self.grid;
        let r = match g.kappa {
            Some(k) => ThetaGrid::new(k, g.theta_max, g.n_theta),
            None => ThetaGrid::with_default_kappa(g.theta_max, g.n_theta),
        };
        r.map_err(|e| invalid("grid", e))
    }

    pub fn discretization(&self) -> Result<(GameSpec, Discretization), ConfigError> {
        let spec = self.game_spec()?;
        let disc = Discretization::new(&spec, &self.grid()?).map_err(|e| invalid("grid", e))?;
        Ok((spec, disc))
    }

    /// Risk level for the ergodic solves and simulations; defaults to theta_max.
    pub fn theta(&self) -> f64 {
        self.solver.theta.unwrap_or(self.grid.theta_max)
    }

    pub fn player(&self) -> Player {
        Player::from_index(self.solver.player as usize - 1)
    }

    pub fn march(&self) -> MarchOptions {
        MarchOptions { max_inner: self.solver.max_inner, bound_slack: self.solver.bound_slack }
    }

    pub fn nash_options(&self) -> NashOptions {
        let s = &self.solver;
        NashOptions {
            strat_tol: s.strat_tol,
            resid_tol: s.resid_tol,
            max_iter: s.max_iter,
            schedule: match s.schedule {
                ScheduleKind::Constant => Schedule::Constant(s.beta),
                ScheduleKind::Harmonic => Schedule::Harmonic,
            },
            march: self.march(),
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions { tol: self.solver.eigen_tol, max_iter: self.solver.eigen_max_iter, max_outer: self.solver.eigen_max_outer }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            dt: s.dt,
            horizon: s.horizon,
            paths: s.paths,
            seed: s.seed,
            mixing: match s.mixing {
                MixingKind::SampleActions => Mixing::SampleActions,
                MixingKind::AverageDrift => Mixing::AverageDrift,
            },
            tail_tol: s.tail_tol,
        }
    }

    pub fn dynamics(&self) -> Dynamics {
        match self.sim.dynamics {
            DynamicsKind::Sde => Dynamics::Sde,
            DynamicsKind::Chain => Dynamics::Chain,
        }
    }

    pub fn init_strategies(&self, nodes: usize) -> [StrategyField; 2] {
        let a = self.game.actions;
        let s = &self.solver.init;
        // Ranges were checked in validate.
        [s[0].build(a[0], nodes).unwrap(), s[1].build(a[1], nodes).unwrap()]
    }

    pub fn oracle_strategies(&self, nodes: usize) -> Result<[StrategyField; 2], ConfigError> {
        match &self.oracle.strategies {
            None => Ok(self.init_strategies(nodes)),
            Some([w1, w2]) => {
                let a = self.game.actions;
                let s1 = StrategyField::stationary(a[0], w1.clone()).map_err(|e| invalid("oracle.strategies[0]", e))?;
                let s2 = StrategyField::stationary(a[1], w2.clone()).map_err(|e| invalid("oracle.strategies[1]", e))?;
                if s1.nodes() != nodes || s2.nodes() != nodes {
                    return Err(invalid("oracle.strategies", format!("expected {nodes} nodes")));
                }
                Ok([s1, s2])
            }
        }
    }

    /// Simulation start point; defaults to the origin.
    pub fn start(&self) -> Vec<f64> {
        self.sim.start.clone().unwrap_or_else(|| vec![0.0; self.game.dim])
    }
}

fn ball(b: &BallConfig) -> Ball {
    Ball::new(b.center.clone(), b.radius)
}

/// Command-line overrides; each field replaces the config entry of the same name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub half_width: Option<f64>,
    pub dx: Option<f64>,
    pub n_theta: Option<usize>,
    pub kappa: Option<f64>,
    pub theta_max: Option<f64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub strat_tol: Option<f64>,
    pub resid_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub beta: Option<f64>,
    pub init: Option<StrategyChoice>,
    pub player: Option<u8>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub mc_paths: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        let d = self.game.dim;
        if let Some(l) = o.half_width {
            self.grid.half_width = vec![l; d];
        }
        if let Some(h) = o.dx {
            self.grid.dx = Some(vec![h; d]);
            self.grid.nodes = None;
        }
        set(&mut self.grid.n_theta, o.n_theta);
        if o.kappa.is_some() {
            self.grid.kappa = o.kappa;
        }
        set(&mut self.grid.theta_max, o.theta_max);
        set(&mut self.solver.alpha, o.alpha);
        if o.theta.is_some() {
            self.solver.theta = o.theta;
        }
        set(&mut self.solver.strat_tol, o.strat_tol);
        set(&mut self.solver.resid_tol, o.resid_tol);
        set(&mut self.solver.max_iter, o.max_iter);
        set(&mut self.solver.schedule, o.schedule);
        set(&mut self.solver.beta, o.beta);
        if let Some(c) = &o.init {
            self.solver.init = [c.clone(), c.clone()];
        }
        set(&mut self.solver.player, o.player);
        set(&mut self.sim.dt, o.dt);
        set(&mut self.sim.horizon, o.horizon);
        set(&mut self.sim.paths, o.paths);
        set(&mut self.sim.seed, o.seed);
        set(&mut self.oracle.mc_paths, o.mc_paths);
        if let Some(p) = &o.out {
            self.output.dir = p.clone();
        }
        self.validate()
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[game]
dim = 1
actions = [2, 1]
diffusion = { kind = "constant", sigma = [1.0] }

[[game.drift]]
player = 1
axis = 0
kind = "tanh_affine"
offset = [0.5, -0.5]
slope = [[-1.0], [-1.0]]

[[game.cost]]
payer = 1
player = 1
kind = "constant"
values = [0.2, 0.3]

[grid]
half_width = [3.0]
dx = [0.1]
theta_max = 0.5
"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        let (spec, disc) = cfg.discretization().unwrap();
        assert_eq!(spec.actions(Player::One), 2);
        assert_eq!(disc.len(), 61);
        assert_eq!(cfg.theta(), 0.5);
        assert!(cfg.certificate().unwrap().is_none());
        assert_eq!(spec.pure_cost(Player::One, &[0.0], 1, 0), 0.3);
        assert_eq!(spec.pure_cost(Player::Two, &[0.0], 1, 0), 0.0);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let bad = MINIMAL.replace("dx = [0.1]", "dx = \"fine\"");
        let msg = RunConfig::from_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 22"), "{msg}");
        assert!(msg.contains("dx"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("theta_max = 0.5", "theta_max = 0.5\nthetamax = 1.0");
        let msg = RunConfig::from_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("thetamax"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let bad = MINIMAL.replace("[grid]", "[solver]\ntheta = 2.0\n\n[grid]");
        match RunConfig::from_str(&bad).unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "solver.theta"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("[grid]", "[solver]\ninit = [\"pure:3\", \"uniform\"]\n\n[grid]");
        assert!(RunConfig::from_str(&bad).unwrap_err().to_string().contains("solver.init[0]"));
    }

    #[test]
    fn overrides_replace_entries() {
        let mut cfg = RunConfig::from_str(MINIMAL).unwrap();
        let o = Overrides { dx: Some(0.2), theta: Some(0.25), seed: Some(9), init: Some(StrategyChoice::Pure(0)), ..Default::default() };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.grid().unwrap().len(), 31);
        assert_eq!(cfg.theta(), 0.25);
        assert_eq!(cfg.sim.seed, 9);
        assert_eq!(cfg.solver.init[1], StrategyChoice::Pure(0));
        let bad = Overrides { theta: Some(1.0), ..Default::default() };
        assert!(cfg.apply(&bad).is_err());
    }

    #[test]
    fn strategy_choice_round_trips() {
        for s in ["uniform", "pure:0", "pure:12"] {
            assert_eq!(StrategyChoice::parse(s).unwrap().to_string(), s);
        }
        assert!(StrategyChoice::parse("pure:x").is_none());
    }
}
