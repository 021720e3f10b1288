//! Discounted risk-sensitive HJB solver, marching in `s = log theta`.
//!
//! Over one step `theta_j -> theta_{j+1}` the value obeys
//! `alpha dpsi/ds = inf_u [L_u psi + theta r_u psi]`. The generator part is
//! treated by implicit Euler; the cost part uses the exact exponential factor
//! of the step, i.e. the effective rate
//! `g(r) = (1 - exp(-(theta_{j+1} - theta_j) r / alpha)) / tau` with
//! `tau = ds / alpha`. This reproduces `exp(theta c / alpha)` exactly for
//! constant costs and keeps `1 <= psi <= exp(theta |r| / alpha)` for any step,
//! since `tau g < 1` makes every step matrix a diagonally dominant M-matrix.
//! Because `g` is concave, the minimum over mixed actions is still attained
//! at a pure action.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1};

use crate::discretize::{Discretization, ThetaGrid};
use crate::error::{Error, Result};
use crate::model::{Player, MAX_DIM};
pub use crate::strategy::StrategyField;

/// psi(theta_j, x_i) for one player.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    player: Player,
    alpha: f64,
    thetas: Vec<f64>,
    nodes: usize,
    values: Vec<f64>,
}

impl ValueField {
    pub fn player(&self) -> Player {
        self.player
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn levels(&self) -> usize {
        self.thetas.len()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.values[j * self.nodes..(j + 1) * self.nodes]
    }

    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.nodes + i]
    }
}

/// Marching controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchOptions {
    /// Howard sweeps allowed per theta level.
    pub max_inner: usize,
    /// Relative slack on the value bounds.
    pub bound_slack: f64,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self { max_inner: 50, bound_slack: 1e-8 }
    }
}

/// How running cost enters the pointwise minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostWeight {
    /// `theta r`, the continuous Hamiltonian.
    Linear(f64),
    /// Effective rate of a marching step.
    Fitted { dtheta: f64, alpha: f64, tau: f64 },
}

impl CostWeight {
    pub fn for_step(thetas: &ThetaGrid, j: usize, alpha: f64) -> Self {
        let n = thetas.nodes();
        CostWeight::Fitted { dtheta: n[j + 1] - n[j], alpha, tau: thetas.ds() / alpha }
    }

    #[inline]
    pub fn apply(&self, r: f64) -> f64 {
        match *self {
            CostWeight::Linear(theta) => theta * r,
            CostWeight::Fitted { dtheta, alpha, tau } => -expm1(-dtheta * r / alpha) / tau,
        }
    }
}

/// Per-node Hamiltonian integrand `F_u = (Q_u psi)_i + w(r_u) psi_i` for all own pure actions.
#[inline]
pub(crate) fn integrand(
    disc: &Discretization,
    k: Player,
    node: usize,
    opp: &[f64],
    psi: &[f64],
    weight: &CostWeight,
    out: &mut [f64],
) {
    let mut off = [0.0; 2 * MAX_DIM];
    let cols = disc.generator(0, 0).row(node).0;
    for (u, f) in out.iter_mut().enumerate() {
        let diag = disc.player_row(k, node, u, opp, &mut off);
        let mut s = diag * psi[node];
        for (c, a) in cols.iter().zip(&off) {
            s += a * psi[*c];
        }
        *f = s + weight.apply(disc.player_cost(k, node, u, opp)) * psi[node];
    }
}

/// Integrand of an own mixed action `v`.
pub(crate) fn mixed_integrand(
    disc: &Discretization,
    k: Player,
    node: usize,
    v: &[f64],
    opp: &[f64],
    psi: &[f64],
    weight: &CostWeight,
) -> f64 {
    let mut off = [0.0; 2 * MAX_DIM];
    let mut acc = [0.0; 2 * MAX_DIM];
    let cols = disc.generator(0, 0).row(node).0;
    let mut diag = 0.0;
    let mut r = 0.0;
    for (u, &p) in v.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        diag += p * disc.player_row(k, node, u, opp, &mut off);
        for (a, b) in acc.iter_mut().zip(&off) {
            *a += p * b;
        }
        r += p * disc.player_cost(k, node, u, opp);
    }
    let mut s = diag * psi[node];
    for (c, a) in cols.iter().zip(&acc) {
        s += a * psi[*c];
    }
    s + weight.apply(r) * psi[node]
}

/// Tolerance for comparing integrand values at a node.
#[inline]
pub(crate) fn tie_tol(psi_i: f64, f: &[f64]) -> f64 {
    let scale = f.iter().fold(psi_i.abs(), |m, v| m.max(v.abs()));
    1e-11 * scale
}

#[inline]
pub(crate) fn lowest_near_min(f: &[f64], tol: f64) -> usize {
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    f.iter().position(|v| *v <= min + tol).unwrap_or(0)
}

/// Dirac selector minimizing the integrand per node, ties to the lowest index.
pub fn minimizing_selector(
    disc: &Discretization,
    psi: &[f64],
    k: Player,
    opponent_level: &[f64],
    weight: &CostWeight,
) -> StrategyField {
    let m = disc.actions(k);
    let mo = disc.actions(k.other());
    let mut f = vec![0.0; m];
    let policy: Vec<usize> = (0..disc.len())
        .map(|i| {
            integrand(disc, k, i, &opponent_level[i * mo..(i + 1) * mo], psi, weight, &mut f);
            lowest_near_min(&f, tie_tol(psi[i], &f))
        })
        .collect();
    StrategyField::from_pure(m, &policy)
}

fn check_shapes(disc: &Discretization, thetas: &ThetaGrid, k: Player, field: &StrategyField, owner: Player) -> Result<()> {
    if field.nodes() != disc.len() || field.actions() != disc.actions(owner) {
        return Err(Error::Dimension("strategy field does not match the grid or action set".into()));
    }
    if !field.is_stationary() && field.levels() != thetas.nodes().len() {
        return Err(Error::Dimension("strategy field levels do not match the theta grid".into()));
    }
    let _ = k;
    Ok(())
}

fn check_bounds(psi: &[f64], level: usize, theta: f64, cost_sup: f64, alpha: f64, slack: f64) -> Result<()> {
    let upper = exp(theta * cost_sup / alpha) * (1.0 + slack);
    let lower = 1.0 - slack;
    for (i, v) in psi.iter().enumerate() {
        if !(*v >= lower && *v <= upper) {
            return Err(Error::BoundViolation { level, node: i, value: *v, lower, upper });
        }
    }
    Ok(())
}

/// Optimizes player k against a fixed opponent; returns psi and the Dirac selector.
pub fn solve_discounted(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    k: Player,
    opponent: &StrategyField,
    opts: &MarchOptions,
) -> Result<(ValueField, StrategyField)> {
    solve_with_incumbent(disc, thetas, alpha, k, opponent, None, opts)
}

/// As [`solve_discounted`]; where `incumbent` already attains the minimum
/// (within round-off) its mixed action is kept instead of the Dirac selector.
pub(crate) fn solve_with_incumbent(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    k: Player,
    opponent: &StrategyField,
    incumbent: Option<&StrategyField>,
    opts: &MarchOptions,
) -> Result<(ValueField, StrategyField)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidSpec("discount rate must be positive".into()));
    }
    check_shapes(disc, thetas, k, opponent, k.other())?;
    if let Some(inc) = incumbent {
        check_shapes(disc, thetas, k, inc, k)?;
    }
    let n = disc.len();
    let m = disc.actions(k);
    let mo = disc.actions(k.other());
    let th = thetas.nodes();
    let levels = th.len();
    let sup = disc.cost_sup(k);
    let tau = thetas.ds() / alpha;
    let bw = disc.grid().bandwidth();

    let mut values = Vec::with_capacity(levels * n);
    values.extend(core::iter::repeat_n(exp(th[0] * sup / alpha), n));
    let mut selector = vec![0.0; levels * n * m];

    let mut f = vec![0.0; m];
    let mut policy = vec![0usize; n];
    {
        let w0 = CostWeight::Linear(th[0]);
        let opp = opponent.level(0);
        for i in 0..n {
            integrand(disc, k, i, &opp[i * mo..(i + 1) * mo], &values[..n], &w0, &mut f);
            policy[i] = lowest_near_min(&f, tie_tol(values[i], &f));
            record(&mut selector[i * m..(i + 1) * m], policy[i], incumbent.map(|s| s.at(0, i)), &f, values[i], || {
                mixed_integrand(disc, k, i, incumbent.unwrap().at(0, i), &opp[i * mo..(i + 1) * mo], &values[..n], &w0)
            });
        }
    }

    let width = 2 * disc.grid().dim();
    let shift = vec![1.0 / tau; n];
    let mut off = vec![0.0; n * width];
    let mut diag = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut psi = vec![0.0; n];
    for j in 0..levels - 1 {
        let weight = CostWeight::for_step(thetas, j, alpha);
        let opp = opponent.level(j + 1);
        let prev = &values[j * n..(j + 1) * n];
        let mut sweeps = 0;
        loop {
            for i in 0..n {
                let o = &opp[i * mo..(i + 1) * mo];
                diag[i] = disc.player_row(k, i, policy[i], o, &mut off[i * width..(i + 1) * width]);
                rate[i] = weight.apply(disc.player_cost(k, i, policy[i], o));
            }
            let q = disc.generator_from_rows(off.clone(), diag.clone());
            let sys = q.shifted_system(bw, &shift, &rate)?;
            psi.iter_mut().zip(prev).for_each(|(p, v)| *p = v / tau);
            sys.solve(&mut psi);

            let mut changed = None;
            for i in 0..n {
                integrand(disc, k, i, &opp[i * mo..(i + 1) * mo], &psi, &weight, &mut f);
                let tol = tie_tol(psi[i], &f);
                let min = f.iter().copied().fold(f64::INFINITY, f64::min);
                if f[policy[i]] > min + tol {
                    policy[i] = lowest_near_min(&f, tol);
                    changed.get_or_insert(i);
                }
            }
            match changed {
                None => break,
                Some(node) if sweeps + 1 >= opts.max_inner => {
                    return Err(Error::PolicyIteration { level: j + 1, node, iterations: opts.max_inner });
                }
                Some(_) => sweeps += 1,
            }
        }
        check_bounds(&psi, j + 1, th[j + 1], sup, alpha, opts.bound_slack)?;
        let base = (j + 1) * n * m;
        for i in 0..n {
            let o = &opp[i * mo..(i + 1) * mo];
            integrand(disc, k, i, o, &psi, &weight, &mut f);
            let u = lowest_near_min(&f, tie_tol(psi[i], &f));
            policy[i] = u;
            record(&mut selector[base + i * m..base + (i + 1) * m], u, incumbent.map(|s| s.at(j + 1, i)), &f, psi[i], || {
                mixed_integrand(disc, k, i, incumbent.unwrap().at(j + 1, i), o, &psi, &weight)
            });
        }
        values.extend_from_slice(&psi);
    }

    let field = StrategyField::eventually_stationary(m, levels, selector)?;
    Ok((ValueField { player: k, alpha, thetas: th.to_vec(), nodes: n, values }, field))
}

fn record(out: &mut [f64], u: usize, incumbent: Option<&[f64]>, f: &[f64], psi_i: f64, inc_value: impl FnOnce() -> f64) {
    if let Some(v) = incumbent {
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        if inc_value() <= min + tie_tol(psi_i, f) {
            out.copy_from_slice(v);
            return;
        }
    }
    out.iter_mut().for_each(|p| *p = 0.0);
    out[u] = 1.0;
}

/// Evaluates player k's criterion under a fixed strategy pair.
pub fn evaluate_discounted(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    k: Player,
    v1: &StrategyField,
    v2: &StrategyField,
    opts: &MarchOptions,
) -> Result<ValueField> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidSpec("discount rate must be positive".into()));
    }
    check_shapes(disc, thetas, k, v1, Player::One)?;
    check_shapes(disc, thetas, k, v2, Player::Two)?;
    let n = disc.len();
    let (m1, m2) = (disc.actions(Player::One), disc.actions(Player::Two));
    let th = thetas.nodes();
    let levels = th.len();
    let sup = disc.cost_sup(k);
    let tau = thetas.ds() / alpha;
    let bw = disc.grid().bandwidth();
    let width = 2 * disc.grid().dim();

    let mut values = Vec::with_capacity(levels * n);
    values.extend(core::iter::repeat_n(exp(th[0] * sup / alpha), n));
    let shift = vec![1.0 / tau; n];
    let mut off = vec![0.0; n * width];
    let mut diag = vec![0.0; n];
    let mut cost = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let stationary = v1.is_stationary() && v2.is_stationary();
    for j in 0..levels - 1 {
        let weight = CostWeight::for_step(thetas, j, alpha);
        let (l1, l2) = (v1.level(j + 1), v2.level(j + 1));
        if j == 0 || !stationary {
            for i in 0..n {
                let (w1, w2) = (&l1[i * m1..(i + 1) * m1], &l2[i * m2..(i + 1) * m2]);
                diag[i] = disc.mixed_row(i, w1, w2, &mut off[i * width..(i + 1) * width]);
                cost[i] = disc.mixed_cost(k, i, w1, w2);
            }
        }
        rate.iter_mut().zip(&cost).for_each(|(g, r)| *g = weight.apply(*r));
        let q = disc.generator_from_rows(off.clone(), diag.clone());
        let sys = q.shifted_system(bw, &shift, &rate)?;
        let mut psi: Vec<f64> = values[j * n..(j + 1) * n].iter().map(|v| v / tau).collect();
        sys.solve(&mut psi);
        check_bounds(&psi, j + 1, th[j + 1], sup, alpha, opts.bound_slack)?;
        values.extend_from_slice(&psi);
    }
    Ok(ValueField { player: k, alpha, thetas: th.to_vec(), nodes: n, values })
}

/// Largest discrete theta derivative `|psi_{j+1} - psi_j| / (theta_{j+1} - theta_j)`.
pub fn max_theta_derivative(v: &ValueField) -> f64 {
    let th = v.thetas();
    let mut worst: f64 = 0.0;
    for j in 0..th.len() - 1 {
        let dt = th[j + 1] - th[j];
        for (a, b) in v.level(j).iter().zip(v.level(j + 1)) {
            worst = worst.max((b - a).abs() / dt);
        }
    }
    worst
}

/// Comparison of the log-derivative `(1/psi) dpsi/dtheta` against the two
/// candidate bounds `theta |r| / alpha` and `|r| / alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogDerivativeReport {
    /// Largest ratio of the log-derivative to `theta_{j+1} |r| / alpha`.
    pub ratio_with_theta: f64,
    /// Largest ratio of the log-derivative to `|r| / alpha`.
    pub ratio_without_theta: f64,
    pub holds_with_theta: bool,
    pub holds_without_theta: bool,
}

pub fn log_derivative_report(v: &ValueField, cost_sup: f64, slack: f64) -> LogDerivativeReport {
    let th = v.thetas();
    let base = cost_sup / v.alpha();
    let (mut a, mut b): (f64, f64) = (0.0, 0.0);
    for j in 0..th.len() - 1 {
        let dt = th[j + 1] - th[j];
        for (p, q) in v.level(j).iter().zip(v.level(j + 1)) {
            let ld = libm::log(q / p) / dt;
            if base > 0.0 {
                a = a.max(ld / (th[j + 1] * base));
                b = b.max(ld / base);
            } else if ld > 0.0 {
                a = f64::INFINITY;
                b = f64::INFINITY;
            }
        }
    }
    LogDerivativeReport {
        ratio_with_theta: a,
        ratio_without_theta: b,
        holds_with_theta: a <= 1.0 + slack,
        holds_without_theta: b <= 1.0 + slack,
    }
}
