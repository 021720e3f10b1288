//! Ergodic risk-sensitive values as principal eigenvalues.
//!
//! For a fixed selector the value solves `(Q + theta diag r) psi = theta rho psi`
//! with `psi > 0`. The eigenpair is found by shifted inverse iteration: the
//! shift always exceeds the Collatz-Wielandt upper bound `max (A psi)/psi`,
//! so `shift - A` stays a nonsingular M-matrix with a positive inverse and
//! the iteration targets the Perron root.

use alloc::vec;
use alloc::vec::Vec;

use libm::log;

use crate::discretize::{Discretization, GeneratorMatrix, Grid, ThetaGrid};
use crate::error::{Error, Result};
use crate::hjb::{evaluate_discounted, integrand, lowest_near_min, mixed_integrand, tie_tol, CostWeight, MarchOptions};
use crate::model::{LyapunovCertificate, Player, MAX_DIM};
use crate::nash::{IterationLog, NashOptions};
use crate::strategy::StrategyField;

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicSolution {
    pub player: Player,
    pub theta: f64,
    pub rho: f64,
    /// Positive eigenvector with `psi[anchor] == 1`.
    pub psi: Vec<f64>,
    pub anchor: usize,
    /// `|A psi - theta rho psi|_inf / |psi|_inf`.
    pub eigen_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Target width of the Collatz-Wielandt bracket, relative to `max(1, |lambda|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_outer: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 500, max_outer: 100 }
    }
}

/// Nodes where `W > 1 + c / delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct C0Set {
    pub mask: Vec<bool>,
}

impl C0Set {
    pub fn new(cert: &LyapunovCertificate, grid: &Grid) -> Self {
        let mut x = [0.0; MAX_DIM];
        let mask = (0..grid.len())
            .map(|i| {
                grid.point_into(i, &mut x);
                cert.in_c0(&x[..grid.dim()])
            })
            .collect();
        Self { mask }
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|b| *b)
    }

    pub fn contains(&self, node: usize) -> bool {
        self.mask[node]
    }
}

/// First grid node maximizing W; errors if it is not in C0.
pub fn default_anchor(cert: &LyapunovCertificate, grid: &Grid) -> Result<usize> {
    let mut x = [0.0; MAX_DIM];
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..grid.len() {
        grid.point_into(i, &mut x);
        let w = cert.w.value(&x[..grid.dim()]);
        if w > best.1 {
            best = (i, w);
        }
    }
    if !(best.1 > cert.c0_level()) {
        return Err(Error::EmptyC0);
    }
    Ok(best.0)
}

/// Perron eigenpair of `Q + diag(potential)`, normalized at `anchor`.
/// Returns (lambda, psi, residual, iterations).
pub fn principal_eigen(
    q: &GeneratorMatrix,
    potential: &[f64],
    bandwidth: usize,
    anchor: usize,
    shift0: f64,
    opts: &EigenOptions,
) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = q.len();
    let mut psi = vec![1.0; n];
    let mut shift = shift0;
    let mut best_gap = f64::INFINITY;
    let mut stale = 0;
    for it in 0..opts.max_iter {
        let (lo, hi) = cw_bounds(q, potential, &psi);
        let gap = hi - lo;
        let scale = hi.abs().max(lo.abs()).max(1.0);
        if gap <= opts.tol * scale || (stale >= 8 && best_gap <= 1e-9 * scale) {
            let lambda = 0.5 * (lo + hi);
            let res = residual(q, potential, &psi, lambda);
            return Ok((lambda, psi, res, it));
        }
        if gap < best_gap * 0.5 {
            best_gap = gap;
            stale = 0;
        } else {
            best_gap = best_gap.min(gap);
            stale += 1;
        }
        if it > 0 {
            shift = shift.min(hi + gap.max(1e-13 * scale));
        }
        let sys = q.shifted_system(bandwidth, &vec![shift; n], potential)?;
        sys.solve(&mut psi);
        let a = psi[anchor];
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::EigenStagnation { iterations: it, gap });
        }
        psi.iter_mut().for_each(|p| *p /= a);
        psi[anchor] = 1.0;
    }
    let (lo, hi) = cw_bounds(q, potential, &psi);
    Err(Error::EigenStagnation { iterations: opts.max_iter, gap: hi - lo })
}

fn cw_bounds(q: &GeneratorMatrix, potential: &[f64], psi: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..q.len() {
        let r = (q.apply_row(i, psi) + potential[i] * psi[i]) / psi[i];
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

fn residual(q: &GeneratorMatrix, potential: &[f64], psi: &[f64], lambda: f64) -> f64 {
    let mut r: f64 = 0.0;
    let mut m: f64 = 0.0;
    for i in 0..q.len() {
        r = r.max((q.apply_row(i, psi) + (potential[i] - lambda) * psi[i]).abs());
        m = m.max(psi[i].abs());
    }
    r / m
}

fn check_stationary(disc: &Discretization, f: &StrategyField, owner: Player) -> Result<()> {
    if !f.is_stationary() {
        return Err(Error::InvalidSpec("ergodic solves need stationary strategies".into()));
    }
    if f.nodes() != disc.len() || f.actions() != disc.actions(owner) {
        return Err(Error::Dimension("strategy field does not match the grid or action set".into()));
    }
    Ok(())
}

/// Linear eigenproblem for a fixed stationary pair.
pub fn evaluate_ergodic(
    disc: &Discretization,
    theta: f64,
    k: Player,
    v1: &StrategyField,
    v2: &StrategyField,
    anchor: usize,
    opts: &EigenOptions,
) -> Result<ErgodicSolution> {
    if !(theta > 0.0) {
        return Err(Error::InvalidSpec("theta must be positive".into()));
    }
    check_stationary(disc, v1, Player::One)?;
    check_stationary(disc, v2, Player::Two)?;
    let q = disc.mixed_generator(v1.level(0), v2.level(0));
    let pot: Vec<f64> = (0..disc.len())
        .map(|i| theta * disc.mixed_cost(k, i, v1.at(0, i), v2.at(0, i)))
        .collect();
    let shift0 = theta * disc.cost_sup(k) + 1.0;
    let (lambda, psi, res, it) = principal_eigen(&q, &pot, disc.grid().bandwidth(), anchor, shift0, opts)?;
    Ok(ErgodicSolution { player: k, theta, rho: lambda / theta, psi, anchor, eigen_residual: res, iterations: it })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicBestResponse {
    pub solution: ErgodicSolution,
    pub strategy: StrategyField,
    pub outer_iterations: usize,
    /// Set when the selector did not settle; the lowest-value iterate is returned.
    pub cycling: bool,
}

/// Policy iteration on the nonlinear eigenproblem of player k.
pub fn solve_ergodic_br(
    disc: &Discretization,
    theta: f64,
    k: Player,
    opponent: &StrategyField,
    anchor: usize,
    opts: &EigenOptions,
) -> Result<ErgodicBestResponse> {
    br_with_incumbent(disc, theta, k, opponent, None, anchor, opts)
}

pub(crate) fn br_with_incumbent(
    disc: &Discretization,
    theta: f64,
    k: Player,
    opponent: &StrategyField,
    incumbent: Option<&StrategyField>,
    anchor: usize,
    opts: &EigenOptions,
) -> Result<ErgodicBestResponse> {
    if !(theta > 0.0) {
        return Err(Error::InvalidSpec("theta must be positive".into()));
    }
    check_stationary(disc, opponent, k.other())?;
    let n = disc.len();
    let m = disc.actions(k);
    let mo = disc.actions(k.other());
    let opp = opponent.level(0);
    let weight = CostWeight::Linear(theta);
    let shift0 = theta * disc.cost_sup(k) + 1.0;
    let bw = disc.grid().bandwidth();

    let ones = vec![1.0; n];
    let mut f = vec![0.0; m];
    let mut policy: Vec<usize> = (0..n)
        .map(|i| {
            integrand(disc, k, i, &opp[i * mo..(i + 1) * mo], &ones, &weight, &mut f);
            lowest_near_min(&f, tie_tol(1.0, &f))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>, f64, usize, Vec<usize>)> = None;
    let mut settled = false;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let q = disc.player_generator(k, &policy, opp);
        let pot: Vec<f64> = (0..n).map(|i| theta * disc.player_cost(k, i, policy[i], &opp[i * mo..(i + 1) * mo])).collect();
        let (lambda, psi, res, it) = principal_eigen(&q, &pot, bw, anchor, shift0, opts)?;
        let mut changed = false;
        let mut next = policy.clone();
        for i in 0..n {
            integrand(disc, k, i, &opp[i * mo..(i + 1) * mo], &psi, &weight, &mut f);
            let tol = tie_tol(psi[i], &f);
            let min = f.iter().copied().fold(f64::INFINITY, f64::min);
            if f[policy[i]] > min + tol {
                next[i] = lowest_near_min(&f, tol);
                changed = true;
            }
        }
        if best.as_ref().is_none_or(|b| lambda < b.0) {
            best = Some((lambda, psi, res, it, policy.clone()));
        }
        if !changed {
            settled = true;
            break;
        }
        policy = next;
    }
    let (lambda, psi, res, it, _) = best.unwrap();

    let mut weights = vec![0.0; n * m];
    for i in 0..n {
        let o = &opp[i * mo..(i + 1) * mo];
        integrand(disc, k, i, o, &psi, &weight, &mut f);
        let tol = tie_tol(psi[i], &f);
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        let out = &mut weights[i * m..(i + 1) * m];
        if let Some(inc) = incumbent {
            let v = inc.at(0, i);
            if mixed_integrand(disc, k, i, v, o, &psi, &weight) <= min + tol {
                out.copy_from_slice(v);
                continue;
            }
        }
        out[lowest_near_min(&f, tol)] = 1.0;
    }
    Ok(ErgodicBestResponse {
        solution: ErgodicSolution { player: k, theta, rho: lambda / theta, psi, anchor, eigen_residual: res, iterations: it },
        strategy: StrategyField::stationary(m, weights)?,
        outer_iterations: outer,
        cycling: !settled,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicNashReport {
    pub strategies: [StrategyField; 2],
    pub solutions: [ErgodicSolution; 2],
    pub iterations: usize,
    pub change: f64,
    pub residuals: [f64; 2],
    pub converged: bool,
    pub cycling: bool,
    pub history: Vec<IterationLog>,
}

/// Damped fictitious play with ergodic best responses.
pub fn nash_iterate_ergodic(
    disc: &Discretization,
    theta: f64,
    anchor: usize,
    init: [StrategyField; 2],
    opts: &NashOptions,
    eigen: &EigenOptions,
) -> Result<ErgodicNashReport> {
    let mut v = init;
    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut cycling = false;
    for m in 0..opts.max_iter {
        let beta = opts.schedule.beta(m);
        let br1 = br_with_incumbent(disc, theta, Player::One, &v[1], Some(&v[0]), anchor, eigen)?;
        let br2 = br_with_incumbent(disc, theta, Player::Two, &v[0], Some(&v[1]), anchor, eigen)?;
        cycling |= br1.cycling || br2.cycling;
        let a = v[0].blend(beta, &br1.strategy)?;
        let b = v[1].blend(beta, &br2.strategy)?;
        let d = [v[0].sup_tv_distance(&a)?, v[1].sup_tv_distance(&b)?];
        v = [a, b];
        change = d[0].max(d[1]);
        iterations = m + 1;
        history.push(IterationLog { iteration: iterations, beta, change: d });
        if change <= opts.strat_tol {
            break;
        }
    }
    let (residuals, solutions) = ergodic_residuals(disc, theta, anchor, [&v[0], &v[1]], eigen)?;
    let converged = change <= opts.strat_tol && residuals.iter().all(|r| *r <= opts.resid_tol);
    Ok(ErgodicNashReport { strategies: v, solutions, iterations, change, residuals, converged, cycling, history })
}

/// Defect of a stationary pair in both ergodic equations: the eigen equation
/// residual plus the optimality gap `F(v_k) - min_u F(u)`, per node relative
/// to `psi_i theta max(|r_k|, 1)`.
pub fn ergodic_residuals(
    disc: &Discretization,
    theta: f64,
    anchor: usize,
    pair: [&StrategyField; 2],
    eigen: &EigenOptions,
) -> Result<([f64; 2], [ErgodicSolution; 2])> {
    let n = disc.len();
    let weight = CostWeight::Linear(theta);
    let mut out = [0.0; 2];
    let mut sols = Vec::with_capacity(2);
    for k in Player::BOTH {
        let sol = evaluate_ergodic(disc, theta, k, pair[0], pair[1], anchor, eigen)?;
        let mo = disc.actions(k.other());
        let mut f = vec![0.0; disc.actions(k)];
        let own = pair[k.index()];
        let opp = pair[k.other().index()].level(0);
        let scale = theta * disc.cost_sup(k).max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let o = &opp[i * mo..(i + 1) * mo];
            integrand(disc, k, i, o, &sol.psi, &weight, &mut f);
            let min = f.iter().copied().fold(f64::INFINITY, f64::min);
            let fv = mixed_integrand(disc, k, i, own.at(0, i), o, &sol.psi, &weight);
            let eq = (fv - theta * sol.rho * sol.psi[i]).abs();
            worst = worst.max((eq + (fv - min).max(0.0)) / (sol.psi[i] * scale));
        }
        out[k.index()] = worst;
        sols.push(sol);
    }
    let b = sols.pop().unwrap();
    let a = sols.pop().unwrap();
    Ok((out, [a, b]))
}

/// Diagnostic comparison of a solution with the certificate-derived bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicBounds {
    /// Largest `psi / W`; the upper bound asks for at most `1 + slack`.
    pub max_psi_over_w: f64,
    pub upper_holds: bool,
    /// Smallest `psi - 1 / W(x0)` over C0 nodes; the lower bound asks for at least `-slack`.
    pub min_c0_excess: f64,
    pub lower_holds: bool,
    pub rho_in_range: bool,
}

pub fn ergodic_bounds(sol: &ErgodicSolution, cert: &LyapunovCertificate, disc: &Discretization, slack: f64) -> ErgodicBounds {
    let grid = disc.grid();
    let c0 = C0Set::new(cert, grid);
    let mut x = [0.0; MAX_DIM];
    grid.point_into(sol.anchor, &mut x);
    let w0 = cert.w.value(&x[..grid.dim()]);
    let mut ratio: f64 = 0.0;
    let mut low = f64::INFINITY;
    for i in 0..grid.len() {
        grid.point_into(i, &mut x);
        let w = cert.w.value(&x[..grid.dim()]);
        ratio = ratio.max(sol.psi[i] / w);
        if c0.contains(i) {
            low = low.min(sol.psi[i] - 1.0 / w0);
        }
    }
    let sup = disc.cost_sup(sol.player);
    ErgodicBounds {
        max_psi_over_w: ratio,
        upper_holds: ratio <= 1.0 + slack,
        min_c0_excess: low,
        lower_holds: low >= -slack,
        rho_in_range: sol.rho >= -1e-12 && sol.rho <= sup * (1.0 + 1e-12) + 1e-12,
    }
}

/// Which scaling of the eigenvalue the extrapolated discount limit matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    ThetaRho,
    Rho,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VanishingDiscountReport {
    pub theta: f64,
    pub alphas: Vec<f64>,
    /// Core-averaged eta for each alpha.
    pub etas: Vec<f64>,
    /// Polynomial extrapolation of eta to alpha = 0.
    pub limit: f64,
    pub rho: f64,
    pub rel_err_theta_rho: f64,
    pub rel_err_rho: f64,
    pub normalization: Normalization,
    /// Set when the eta sequence is not monotone in alpha.
    pub non_monotone: bool,
}

/// Discrete `eta_alpha = alpha theta_j log(psi_{j+1}/psi_j) / (theta_{j+1} - theta_j)`
/// averaged over the central half of the domain, for each alpha, then
/// extrapolated to alpha = 0 and compared with the eigenvalue at `theta_j`.
pub fn vanishing_discount_check(
    disc: &Discretization,
    thetas: &ThetaGrid,
    theta: f64,
    k: Player,
    pair: [&StrategyField; 2],
    alphas: &[f64],
    anchor: usize,
    march: &MarchOptions,
    eigen: &EigenOptions,
) -> Result<VanishingDiscountReport> {
    if alphas.len() < 2 || !alphas.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpec("alpha list must be strictly decreasing with at least two entries".into()));
    }
    let th = thetas.nodes();
    let j = th.iter().rposition(|t| *t <= theta * (1.0 + 1e-12)).unwrap_or(0).min(th.len() - 2);
    let core = disc.grid().core_mask(0.5);
    let count = core.iter().filter(|c| **c).count() as f64;
    let mut etas = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let v = evaluate_discounted(disc, thetas, alpha, k, pair[0], pair[1], march)?;
        let (a, b) = (v.level(j), v.level(j + 1));
        let mut s = 0.0;
        for i in 0..disc.len() {
            if core[i] {
                s += alpha * th[j] * log(b[i] / a[i]) / (th[j + 1] - th[j]);
            }
        }
        etas.push(s / count);
    }
    let limit = neville_at_zero(alphas, &etas);
    let sol = evaluate_ergodic(disc, th[j], k, pair[0], pair[1], anchor, eigen)?;
    let rel = |target: f64| {
        if target == 0.0 {
            limit.abs()
        } else {
            ((limit - target) / target).abs()
        }
    };
    let rel_err_theta_rho = rel(th[j] * sol.rho);
    let rel_err_rho = rel(sol.rho);
    let increasing = etas.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let decreasing = etas.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(VanishingDiscountReport {
        theta: th[j],
        alphas: alphas.to_vec(),
        etas,
        limit,
        rho: sol.rho,
        rel_err_theta_rho,
        rel_err_rho,
        normalization: if rel_err_theta_rho <= rel_err_rho { Normalization::ThetaRho } else { Normalization::Rho },
        non_monotone: !(increasing || decreasing),
    })
}

/// Value at 0 of the interpolating polynomial through `(x_i, y_i)`.
pub fn neville_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}
