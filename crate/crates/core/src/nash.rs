//! Best responses and damped fictitious play for the discounted game.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{mixed_generator_apply, Discretization, ThetaGrid};
use crate::error::{Error, Result};
use crate::hjb::{evaluate_discounted, integrand, solve_with_incumbent, CostWeight, MarchOptions, ValueField};
use crate::model::Player;
use crate::strategy::StrategyField;

/// Averaging weights `beta_m` of the iteration. The first step (m = 0) always
/// takes the full best response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    Harmonic,
}

impl Schedule {
    pub fn beta(&self, m: usize) -> f64 {
        if m == 0 {
            return 1.0;
        }
        match *self {
            Schedule::Constant(b) => b,
            Schedule::Harmonic => 1.0 / (m as f64 + 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NashOptions {
    pub strat_tol: f64,
    pub resid_tol: f64,
    pub max_iter: usize,
    pub schedule: Schedule,
    pub march: MarchOptions,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self { strat_tol: 1e-4, resid_tol: 1e-3, max_iter: 200, schedule: Schedule::Constant(0.5), march: MarchOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub beta: f64,
    /// Sup total-variation change of each player's strategy.
    pub change: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashReport {
    pub strategies: [StrategyField; 2],
    pub values: [ValueField; 2],
    pub iterations: usize,
    pub change: f64,
    pub residuals: [f64; 2],
    pub converged: bool,
    pub history: Vec<IterationLog>,
}

/// Dirac best response of player k (lowest action index on ties).
pub fn best_response(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    k: Player,
    opponent: &StrategyField,
    march: &MarchOptions,
) -> Result<StrategyField> {
    Ok(solve_with_incumbent(disc, thetas, alpha, k, opponent, None, march)?.1)
}

/// Damped fictitious play from `init`. Non-convergence is reported, not raised.
pub fn nash_iterate(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    init: [StrategyField; 2],
    opts: &NashOptions,
) -> Result<NashReport> {
    let levels = thetas.nodes().len();
    let mut v = init.map(|s| s.expand(levels));
    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for m in 0..opts.max_iter {
        let beta = opts.schedule.beta(m);
        let mut next: [Option<StrategyField>; 2] = [None, None];
        for k in Player::BOTH {
            let (_, br) = solve_with_incumbent(disc, thetas, alpha, k, &v[k.other().index()], Some(&v[k.index()]), &opts.march)?;
            next[k.index()] = Some(v[k.index()].blend(beta, &br)?);
        }
        let [a, b] = next;
        let (a, b) = (a.unwrap(), b.unwrap());
        let d = [v[0].sup_tv_distance(&a)?, v[1].sup_tv_distance(&b)?];
        v = [a, b];
        change = d[0].max(d[1]);
        iterations = m + 1;
        history.push(IterationLog { iteration: iterations, beta, change: d });
        if change <= opts.strat_tol {
            break;
        }
    }
    let (residuals, values) = coupled_residuals(disc, thetas, alpha, [&v[0], &v[1]], &opts.march)?;
    let converged = change <= opts.strat_tol && residuals.iter().all(|r| *r <= opts.resid_tol);
    Ok(NashReport { strategies: v, values, iterations, change, residuals, converged, history })
}

/// Defect of the pair in both discretized marching equations.
///
/// For each player the pair is evaluated, and at every level and node the
/// step equation `(psi_{j+1} - psi_j)/tau = Q_v psi_{j+1} + g(r_v) psi_{j+1}`
/// and the optimality gap `F(v_k) - min_u F(u)` are recomputed directly from
/// the stencils. Both are reported relative to `alpha psi`, i.e. as errors in
/// `d log psi / d log theta`.
pub fn coupled_residuals(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    pair: [&StrategyField; 2],
    march: &MarchOptions,
) -> Result<([f64; 2], [ValueField; 2])> {
    let n = disc.len();
    let tau = thetas.ds() / alpha;
    let mut out = [0.0; 2];
    let mut values = Vec::with_capacity(2);
    for k in Player::BOTH {
        let val = evaluate_discounted(disc, thetas, alpha, k, pair[0], pair[1], march)?;
        let mk = disc.actions(k);
        let mo = disc.actions(k.other());
        let (own, opp) = (pair[k.index()], pair[k.other().index()]);
        let mut f = vec![0.0; mk];
        let mut worst: f64 = 0.0;
        for j in 0..val.levels() - 1 {
            let weight = CostWeight::for_step(thetas, j, alpha);
            let psi = val.level(j + 1);
            let prev = val.level(j);
            let (l1, l2) = (pair[0].level(j + 1), pair[1].level(j + 1));
            let q = mixed_generator_apply(disc, l1, l2, psi);
            for i in 0..n {
                let r = disc.mixed_cost(k, i, &l1[i * disc.actions(Player::One)..(i + 1) * disc.actions(Player::One)], &l2[i * disc.actions(Player::Two)..(i + 1) * disc.actions(Player::Two)]);
                let rhs = q[i] + weight.apply(r) * psi[i];
                let eq = ((psi[i] - prev[i]) / tau - rhs).abs();
                integrand(disc, k, i, &opp.level(j + 1)[i * mo..(i + 1) * mo], psi, &weight, &mut f);
                let min = f.iter().copied().fold(f64::INFINITY, f64::min);
                let fv: f64 = {
                    let w = own.at(j + 1, i);
                    // own mixture enters the rate concavely, so use the mixed integrand
                    crate::hjb::mixed_integrand(disc, k, i, w, &opp.level(j + 1)[i * mo..(i + 1) * mo], psi, &weight)
                };
                let gap = (fv - min).max(0.0);
                worst = worst.max((eq + gap) / (alpha * psi[i]));
            }
        }
        out[k.index()] = worst;
        values.push(val);
    }
    let b = values.pop().unwrap();
    let a = values.pop().unwrap();
    Ok((out, [a, b]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    /// Largest relative improvement `(J_eq - J_dev) / J_dev` over all deviations, nodes and levels.
    pub worst: f64,
    pub worst_deviation: Option<usize>,
    pub per_deviation: Vec<f64>,
    pub holds: bool,
}

/// Checks that no listed unilateral deviation lowers the deviator's cost by more than `dev_tol` (relative).
pub fn deviation_test(
    disc: &Discretization,
    thetas: &ThetaGrid,
    alpha: f64,
    pair: [&StrategyField; 2],
    deviations: &[(Player, StrategyField)],
    dev_tol: f64,
    march: &MarchOptions,
) -> Result<DeviationReport> {
    let eq = [
        evaluate_discounted(disc, thetas, alpha, Player::One, pair[0], pair[1], march)?,
        evaluate_discounted(disc, thetas, alpha, Player::Two, pair[0], pair[1], march)?,
    ];
    let mut per = Vec::with_capacity(deviations.len());
    for (k, dev) in deviations {
        let (s1, s2) = match k {
            Player::One => (dev, pair[1]),
            Player::Two => (pair[0], dev),
        };
        let val = evaluate_discounted(disc, thetas, alpha, *k, s1, s2, march)?;
        let worst = eq[k.index()]
            .values()
            .iter()
            .zip(val.values())
            .map(|(e, d)| (e - d) / d)
            .fold(f64::NEG_INFINITY, f64::max);
        per.push(worst);
    }
    let (mut worst, mut idx) = (0.0, None);
    for (i, w) in per.iter().enumerate() {
        if *w > worst {
            worst = *w;
            idx = Some(i);
        }
    }
    Ok(DeviationReport { worst, worst_deviation: idx, holds: worst <= dev_tol, per_deviation: per })
}

/// Pure stationary deviations: every constant strategy plus up to `cap`
/// others (all of them when `m^nodes <= cap`, otherwise a seeded sample).
pub fn pure_deviations(actions: usize, nodes: usize, cap: usize, seed: u64) -> Result<Vec<StrategyField>> {
    if actions == 0 || nodes == 0 {
        return Err(Error::Dimension("empty action set or grid".into()));
    }
    let mut out: Vec<StrategyField> = (0..actions).map(|u| StrategyField::constant(actions, nodes, u)).collect();
    let total = u32::try_from(nodes).ok().and_then(|e| actions.checked_pow(e));
    if total.is_some_and(|t| t <= cap) {
        let t = total.unwrap();
        for code in 0..t {
            let mut c = code;
            let policy: Vec<usize> = (0..nodes)
                .map(|_| {
                    let u = c % actions;
                    c /= actions;
                    u
                })
                .collect();
            if policy.iter().all(|u| *u == policy[0]) {
                continue;
            }
            out.push(StrategyField::from_pure(actions, &policy));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..cap {
            let policy: Vec<usize> = (0..nodes).map(|_| rng.random_range(0..actions)).collect();
            out.push(StrategyField::from_pure(actions, &policy));
        }
    }
    Ok(out)
}
