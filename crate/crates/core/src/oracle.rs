//! Brute-force references on small chains.
//!
//! Everything here works on dense matrices and shares nothing with the PDE
//! solvers except the chain extraction.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, log};

use crate::discretize::{extract_chain, Discretization, ThetaGrid};
use crate::error::{Error, Result};
use crate::model::Player;
use crate::strategy::StrategyField;

pub const MAX_STATES: usize = 50;

/// Discrete-time two-player chain with per-pair transitions and costs.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainGame {
    states: usize,
    actions: [usize; 2],
    dt: f64,
    /// Dense `P(u1, u2)`, indexed `u1 * m2 + u2`.
    transitions: Vec<Vec<f64>>,
    /// `costs[k][(u1 * m2 + u2) * n + x]`.
    costs: [Vec<f64>; 2],
}

impl ChainGame {
    pub fn new(states: usize, actions: [usize; 2], dt: f64, transitions: Vec<Vec<f64>>, costs: [Vec<f64>; 2]) -> Result<Self> {
        if states == 0 || states > MAX_STATES {
            return Err(Error::InvalidSpec("chain oracles take between 1 and 50 states".into()));
        }
        if !(dt > 0.0) || actions[0] == 0 || actions[1] == 0 {
            return Err(Error::InvalidSpec("chain needs dt > 0 and nonempty action sets".into()));
        }
        let pairs = actions[0] * actions[1];
        if transitions.len() != pairs || transitions.iter().any(|p| p.len() != states * states) {
            return Err(Error::Dimension("one n x n transition matrix per action pair".into()));
        }
        if costs.iter().any(|c| c.len() != pairs * states) {
            return Err(Error::Dimension("one cost per action pair and state".into()));
        }
        for p in &transitions {
            for row in p.chunks(states) {
                let s: f64 = row.iter().sum();
                if row.iter().any(|v| *v < 0.0) || (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec("transition rows must be stochastic within 1e-12".into()));
                }
            }
        }
        Ok(Self { states, actions, dt, transitions, costs })
    }

    /// Chain `P = I + dt Q` of every pure pair of a discretized game.
    pub fn from_discretization(disc: &Discretization, dt: f64) -> Result<Self> {
        let n = disc.len();
        let (m1, m2) = (disc.actions(Player::One), disc.actions(Player::Two));
        let mut transitions = Vec::with_capacity(m1 * m2);
        let mut costs = [Vec::with_capacity(m1 * m2 * n), Vec::with_capacity(m1 * m2 * n)];
        for u1 in 0..m1 {
            for u2 in 0..m2 {
                transitions.push(extract_chain(disc.generator(u1, u2), dt)?.to_dense());
                for k in Player::BOTH {
                    for x in 0..n {
                        costs[k.index()].push(disc.cost_part(k, Player::One, x, u1) + disc.cost_part(k, Player::Two, x, u2));
                    }
                }
            }
        }
        Self::new(n, [m1, m2], dt, transitions, costs)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self, p: Player) -> usize {
        self.actions[p.index()]
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest stage cost of player k over states and pairs.
    pub fn cost_sup(&self, k: Player) -> f64 {
        self.costs[k.index()].iter().copied().fold(0.0, f64::max)
    }

    /// Mixed transition matrix and player k's cost for node-major weights.
    pub fn mixed(&self, k: Player, w1: &[f64], w2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.states;
        let (m1, m2) = (self.actions[0], self.actions[1]);
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n];
        for x in 0..n {
            for u1 in 0..m1 {
                for u2 in 0..m2 {
                    let q = w1[x * m1 + u1] * w2[x * m2 + u2];
                    if q == 0.0 {
                        continue;
                    }
                    let pair = u1 * m2 + u2;
                    let row = &self.transitions[pair][x * n..(x + 1) * n];
                    for (a, b) in p[x * n..(x + 1) * n].iter_mut().zip(row) {
                        *a += q * b;
                    }
                    r[x] += q * self.costs[k.index()][pair * n + x];
                }
            }
        }
        (p, r)
    }

    fn check_field(&self, f: &StrategyField, p: Player) -> Result<()> {
        if f.nodes() != self.states || f.actions() != self.actions[p.index()] {
            return Err(Error::Dimension("strategy field does not match the chain".into()));
        }
        Ok(())
    }
}

fn mat_vec(p: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| p[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Multiplicative backward recursion over `T = log(theta / kappa) / alpha`:
/// `V_N = e^{kappa |r| / alpha}`, `V_n = e^{theta e^{-alpha t_n} r dt} P V_{n+1}`.
/// Theta-dependent fields are read at the level nearest `theta e^{-alpha t}`.
#[allow(clippy::too_many_arguments)]
pub fn vi_discounted(
    chain: &ChainGame,
    theta: f64,
    alpha: f64,
    k: Player,
    v1: &StrategyField,
    v2: &StrategyField,
    kappa: f64,
    thetas: Option<&ThetaGrid>,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !(kappa > 0.0) || !(theta > kappa) {
        return Err(Error::InvalidSpec("need alpha > 0 and 0 < kappa < theta".into()));
    }
    chain.check_field(v1, Player::One)?;
    chain.check_field(v2, Player::Two)?;
    let stationary = v1.is_stationary() && v2.is_stationary();
    if !stationary && thetas.is_none() {
        return Err(Error::InvalidSpec("theta-dependent strategies need their theta grid".into()));
    }
    let dt = chain.dt;
    let steps = ceil(log(theta / kappa) / alpha / dt - 1e-9) as usize;
    let mut v = vec![exp(kappa * chain.cost_sup(k) / alpha); chain.states];
    let mut cached: Option<(usize, Vec<f64>, Vec<f64>)> = None;
    for s in (0..steps).rev() {
        let th = theta * exp(-alpha * dt * s as f64);
        let level = if stationary { 0 } else { thetas.unwrap().level_near(th) };
        if cached.as_ref().is_none_or(|c| c.0 != level) {
            let (p, r) = chain.mixed(k, v1.level(level), v2.level(level));
            cached = Some((level, p, r));
        }
        let (_, p, r) = cached.as_ref().unwrap();
        let pv = mat_vec(p, &v);
        v = pv.iter().zip(r).map(|(a, ri)| exp(th * ri * dt) * a).collect();
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerronResult {
    /// Perron root of the twisted kernel.
    pub lambda: f64,
    /// `log(lambda) / (theta dt)`.
    pub rho: f64,
    /// Positive eigenvector with `psi[anchor] == 1`.
    pub psi: Vec<f64>,
}

/// Strong connectivity of the graph of positive entries.
pub fn is_irreducible(p: &[f64], n: usize) -> bool {
    let reach = |transpose: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let a = if transpose { p[j * n + i] } else { p[i * n + j] };
                if a > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|s| *s)
    };
    reach(false) && reach(true)
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let x = a[i * n + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += x * b[l * n + j];
            }
        }
    }
    c
}

/// Power iteration on `K = diag(e^{theta r dt}) P`, accelerated by iterating
/// with `K^(2^s)` built from repeated squaring.
pub fn perron_ergodic(chain: &ChainGame, theta: f64, k: Player, v1: &StrategyField, v2: &StrategyField, anchor: usize) -> Result<PerronResult> {
    if !(theta > 0.0) {
        return Err(Error::InvalidSpec("theta must be positive".into()));
    }
    chain.check_field(v1, Player::One)?;
    chain.check_field(v2, Player::Two)?;
    if !(v1.is_stationary() && v2.is_stationary()) {
        return Err(Error::InvalidSpec("ergodic oracle needs stationary strategies".into()));
    }
    let n = chain.states;
    let (p, r) = chain.mixed(k, v1.level(0), v2.level(0));
    if !is_irreducible(&p, n) {
        return Err(Error::ReducibleChain);
    }
    let dt = chain.dt;
    let mut kern = p.clone();
    for i in 0..n {
        let f = exp(theta * r[i] * dt);
        kern[i * n..(i + 1) * n].iter_mut().for_each(|a| *a *= f);
    }
    // Squaring up to 2^40 steps; rescaled so the largest entry is 1.
    let mut pow = kern.clone();
    for _ in 0..40 {
        pow = mat_mul(&pow, &pow, n);
        let m = pow.iter().copied().fold(0.0, f64::max);
        pow.iter_mut().for_each(|a| *a /= m);
    }
    let mut psi = vec![1.0; n];
    for _ in 0..200 {
        let mut next = mat_vec(&pow, &psi);
        let a = next[anchor];
        if !(a > 0.0) {
            return Err(Error::ReducibleChain);
        }
        next.iter_mut().for_each(|x| *x /= a);
        let diff = next.iter().zip(&psi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        psi = next;
        if diff < 1e-15 {
            break;
        }
    }
    // Collatz-Wielandt ratios of K itself pin the root.
    let kpsi = mat_vec(&kern, &psi);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        let q = kpsi[i] / psi[i];
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let lambda = 0.5 * (lo + hi);
    Ok(PerronResult { lambda, rho: log(lambda) / (theta * dt), psi })
}

/// Solves `pi P = pi`, `sum pi = 1` by Gaussian elimination with partial pivoting.
pub fn stationary_distribution(p: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    b[n - 1] = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|x, y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs())).unwrap();
        if a[piv * n + c].abs() < 1e-300 {
            return Err(Error::SingularSystem { row: c, pivot: a[piv * n + c] });
        }
        if piv != c {
            for j in 0..n {
                a.swap(c * n + j, piv * n + j);
            }
            b.swap(c, piv);
        }
        for i in c + 1..n {
            let f = a[i * n + c] / a[c * n + c];
            if f == 0.0 {
                continue;
            }
            for j in c..n {
                a[i * n + j] -= f * a[c * n + j];
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Ok(x)
}

/// Largest number of candidates an exhaustive search will enumerate.
pub const MAX_CANDIDATES: usize = 4096;

fn candidates(m: usize, n: usize) -> Result<usize> {
    u32::try_from(n)
        .ok()
        .and_then(|e| m.checked_pow(e))
        .filter(|c| *c <= MAX_CANDIDATES)
        .ok_or_else(|| Error::InvalidSpec("too many pure strategies to enumerate".into()))
}

fn decode(mut c: usize, m: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let u = c % m;
            c /= m;
            u
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleBestResponse {
    pub policy: Vec<usize>,
    /// Values (discounted) or `[rho]` (ergodic) of the chosen policy.
    pub values: Vec<f64>,
    /// Whether the chosen policy is nodewise no worse than every candidate (within 1e-12 relative).
    pub dominant: bool,
}

/// Exhaustive search over pure stationary strategies of player k,
/// ranked by the sum of discounted values.
pub fn brute_force_discounted(
    chain: &ChainGame,
    theta: f64,
    alpha: f64,
    k: Player,
    opponent: &StrategyField,
    kappa: f64,
) -> Result<OracleBestResponse> {
    let n = chain.states;
    let m = chain.actions(k);
    let total = candidates(m, n)?;
    let mut all = Vec::with_capacity(total);
    for c in 0..total {
        let own = StrategyField::from_pure(m, &decode(c, m, n));
        let v = match k {
            Player::One => vi_discounted(chain, theta, alpha, k, &own, opponent, kappa, None)?,
            Player::Two => vi_discounted(chain, theta, alpha, k, opponent, &own, kappa, None)?,
        };
        all.push(v);
    }
    let sums: Vec<f64> = all.iter().map(|v| v.iter().sum()).collect();
    let best = (0..total).min_by(|a, b| sums[*a].total_cmp(&sums[*b])).unwrap();
    let dominant = all.iter().all(|v| v.iter().zip(&all[best]).all(|(x, y)| *y <= x * (1.0 + 1e-12)));
    Ok(OracleBestResponse { policy: decode(best, m, n), values: all[best].clone(), dominant })
}

/// Exhaustive search minimizing the Perron value of player k.
pub fn brute_force_ergodic(chain: &ChainGame, theta: f64, k: Player, opponent: &StrategyField, anchor: usize) -> Result<OracleBestResponse> {
    let n = chain.states;
    let m = chain.actions(k);
    let total = candidates(m, n)?;
    let mut rhos = Vec::with_capacity(total);
    for c in 0..total {
        let own = StrategyField::from_pure(m, &decode(c, m, n));
        let r = match k {
            Player::One => perron_ergodic(chain, theta, k, &own, opponent, anchor)?,
            Player::Two => perron_ergodic(chain, theta, k, opponent, &own, anchor)?,
        };
        rhos.push(r.rho);
    }
    let best = (0..total).min_by(|a, b| rhos[*a].total_cmp(&rhos[*b])).unwrap();
    Ok(OracleBestResponse { policy: decode(best, m, n), values: vec![rhos[best]], dominant: true })
}
