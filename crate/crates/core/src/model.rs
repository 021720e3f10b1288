//! Game definition: finite action sets, parametric drift/cost/diffusion
//! families, relaxed-control mixing and the stability checkers.
//!
//! Every drift and cost entry is a sum of [`FunctionTerm`]s, each of which is
//! bounded and globally Lipschitz, so sup-norms and Lipschitz constants can be
//! read off the parameters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cosh, exp, pow, sinh, sqrt, tanh};

use crate::discretize::Grid;
use crate::error::{Error, Result};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 2;

/// One of the two players.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn from_index(i: usize) -> Player {
        if i == 0 {
            Player::One
        } else {
            Player::Two
        }
    }
}

/// A bounded, Lipschitz scalar function of the state, parametrized per pure action.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionTerm {
    /// `values[u]`.
    Constant { values: Vec<f64> },
    /// `offset[u] + sum_j slope[u][j] * tanh(x_j)`.
    TanhAffine { offset: Vec<f64>, slope: Vec<Vec<f64>> },
    /// `weight[u] * exp(-|x - center|^2 / (2 width^2))`.
    GaussBump { weight: Vec<f64>, center: Vec<f64>, width: f64 },
}

impl FunctionTerm {
    pub fn actions(&self) -> usize {
        match self {
            FunctionTerm::Constant { values } => values.len(),
            FunctionTerm::TanhAffine { offset, .. } => offset.len(),
            FunctionTerm::GaussBump { weight, .. } => weight.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            FunctionTerm::Constant { .. } => true,
            FunctionTerm::TanhAffine { slope, .. } => slope.iter().flatten().all(|&m| m == 0.0),
            FunctionTerm::GaussBump { weight, .. } => weight.iter().all(|&p| p == 0.0),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            FunctionTerm::Constant { values } => {
                if !finite(values) {
                    return Err(Error::InvalidSpec("non-finite constant".into()));
                }
            }
            FunctionTerm::TanhAffine { offset, slope } => {
                if slope.len() != offset.len() || slope.iter().any(|row| row.len() != dim) {
                    return Err(Error::Dimension(format!(
                        "tanh_affine slope must be {} x {}",
                        offset.len(),
                        dim
                    )));
                }
                if !finite(offset) || !slope.iter().all(|r| finite(r)) {
                    return Err(Error::InvalidSpec("non-finite tanh_affine coefficient".into()));
                }
            }
            FunctionTerm::GaussBump { weight, center, width } => {
                if center.len() != dim {
                    return Err(Error::Dimension(format!("gauss_bump center must have length {dim}")));
                }
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::InvalidSpec("gauss_bump width must be positive".into()));
                }
                if !finite(weight) || !finite(center) {
                    return Err(Error::InvalidSpec("non-finite gauss_bump coefficient".into()));
                }
            }
        }
        if self.actions() == 0 {
            return Err(Error::InvalidSpec("function term with no actions".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], u: usize) -> f64 {
        match self {
            FunctionTerm::Constant { values } => values[u],
            FunctionTerm::TanhAffine { offset, slope } => {
                let mut s = offset[u];
                for (m, xi) in slope[u].iter().zip(x) {
                    s += m * tanh(*xi);
                }
                s
            }
            FunctionTerm::GaussBump { weight, center, width } => {
                let mut r2 = 0.0;
                for (c, xi) in center.iter().zip(x) {
                    r2 += (xi - c) * (xi - c);
                }
                weight[u] * exp(-r2 / (2.0 * width * width))
            }
        }
    }

    /// Exact (min, max) of `f(., u)` over the box `[-hw, hw]`.
    pub fn range_on(&self, u: usize, hw: &[f64]) -> (f64, f64) {
        match self {
            FunctionTerm::Constant { values } => (values[u], values[u]),
            FunctionTerm::TanhAffine { offset, slope } => {
                let spread: f64 = slope[u].iter().zip(hw).map(|(m, l)| m.abs() * tanh(*l)).sum();
                (offset[u] - spread, offset[u] + spread)
            }
            FunctionTerm::GaussBump { weight, center, width } => {
                let mut near = 0.0;
                let mut far = 0.0;
                for (c, l) in center.iter().zip(hw) {
                    let clamped = c.clamp(-*l, *l);
                    near += (c - clamped) * (c - clamped);
                    let f = (c.abs() + l) * (c.abs() + l);
                    far += f;
                }
                let s = 2.0 * width * width;
                let hi = exp(-near / s);
                let lo = exp(-far / s);
                let p = weight[u];
                if p >= 0.0 {
                    (p * lo, p * hi)
                } else {
                    (p * hi, p * lo)
                }
            }
        }
    }

    /// Infimum over all of R^d.
    pub fn global_inf(&self, u: usize) -> f64 {
        match self {
            FunctionTerm::Constant { values } => values[u],
            FunctionTerm::TanhAffine { offset, slope } => {
                offset[u] - slope[u].iter().map(|m| m.abs()).sum::<f64>()
            }
            FunctionTerm::GaussBump { weight, .. } => weight[u].min(0.0),
        }
    }

    /// Global Lipschitz constant (Euclidean norm on x).
    pub fn lipschitz(&self, u: usize) -> f64 {
        match self {
            FunctionTerm::Constant { .. } => 0.0,
            FunctionTerm::TanhAffine { slope, .. } => sqrt(slope[u].iter().map(|m| m * m).sum()),
            FunctionTerm::GaussBump { weight, width, .. } => weight[u].abs() * exp(-0.5) / width,
        }
    }
}

/// A scalar function of (x, u) for one player's action set: a sum of terms.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionField {
    actions: usize,
    terms: Vec<FunctionTerm>,
}

impl ActionField {
    pub fn new(actions: usize, terms: Vec<FunctionTerm>) -> Result<Self> {
        if actions == 0 {
            return Err(Error::InvalidSpec("action set must be nonempty".into()));
        }
        for t in &terms {
            if t.actions() != actions {
                return Err(Error::Dimension(format!(
                    "term has {} action entries, expected {}",
                    t.actions(),
                    actions
                )));
            }
        }
        Ok(Self { actions, terms })
    }

    pub fn zero(actions: usize) -> Self {
        Self { actions, terms: Vec::new() }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        Self { actions: values.len(), terms: vec![FunctionTerm::Constant { values }] }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn terms(&self) -> &[FunctionTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64], u: usize) -> f64 {
        self.terms.iter().map(|t| t.eval(x, u)).sum()
    }

    pub fn global_inf(&self, u: usize) -> f64 {
        self.terms.iter().map(|t| t.global_inf(u)).sum()
    }

    pub fn lipschitz(&self, u: usize) -> f64 {
        self.terms.iter().map(|t| t.lipschitz(u)).sum()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate(dim))
    }

    /// (min, max) over the box for a fixed action.
    pub fn range_on(&self, u: usize, hw: &[f64]) -> (f64, f64) {
        sum_range(&[(self, u)], hw)
    }

    /// Largest |value| over the box and all actions.
    pub fn sup_abs(&self, hw: &[f64]) -> f64 {
        (0..self.actions)
            .map(|u| {
                let (lo, hi) = self.range_on(u, hw);
                lo.abs().max(hi.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// (min, max) over the box of a sum of action fields at fixed actions.
///
/// Closed form when at most one summand term varies with x; otherwise the
/// extremes are located by lattice sampling plus golden-section refinement.
fn sum_range(parts: &[(&ActionField, usize)], hw: &[f64]) -> (f64, f64) {
    let mut base = 0.0;
    let mut varying: Vec<(&FunctionTerm, usize)> = Vec::new();
    for (field, u) in parts {
        for t in &field.terms {
            if t.is_constant() {
                base += t.eval(&[0.0; MAX_DIM][..hw.len()], *u);
            } else {
                varying.push((t, *u));
            }
        }
    }
    match varying.len() {
        0 => (base, base),
        1 => {
            let (lo, hi) = varying[0].0.range_on(varying[0].1, hw);
            (base + lo, base + hi)
        }
        _ => {
            let f = |x: &[f64]| base + varying.iter().map(|(t, u)| t.eval(x, *u)).sum::<f64>();
            let hi = box_max(hw, &f);
            let lo = -box_max(hw, &|x: &[f64]| -f(x));
            (lo, hi)
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max(mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    let (fa, fb) = (f(a), f(b));
    let mut best = (x, fx);
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    best
}

fn box_max(hw: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    match hw.len() {
        1 => {
            let n = 4000;
            let h = 2.0 * hw[0] / n as f64;
            let mut best = (0usize, f64::NEG_INFINITY);
            for i in 0..=n {
                let v = f(&[-hw[0] + i as f64 * h]);
                if v > best.1 {
                    best = (i, v);
                }
            }
            let a = (-hw[0] + (best.0 as f64 - 1.0) * h).max(-hw[0]);
            let b = (-hw[0] + (best.0 as f64 + 1.0) * h).min(hw[0]);
            golden_max(a, b, &|x| f(&[x])).1.max(best.1)
        }
        _ => {
            let n = 200;
            let h = [2.0 * hw[0] / n as f64, 2.0 * hw[1] / n as f64];
            let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
            for i in 0..=n {
                for j in 0..=n {
                    let p = [-hw[0] + i as f64 * h[0], -hw[1] + j as f64 * h[1]];
                    let v = f(&p);
                    if v > best.1 {
                        best = (p, v);
                    }
                }
            }
            let mut p = best.0;
            let mut v = best.1;
            for _ in 0..20 {
                for k in 0..2 {
                    let a = (p[k] - h[k]).max(-hw[k]);
                    let b = (p[k] + h[k]).min(hw[k]);
                    let (xk, fk) = golden_max(a, b, &|t| {
                        let mut q = p;
                        q[k] = t;
                        f(&q)
                    });
                    if fk >= v {
                        p[k] = xk;
                        v = fk;
                    }
                }
            }
            v
        }
    }
}

/// Diffusion coefficient sigma(x).
#[derive(Clone, Debug, PartialEq)]
pub enum Diffusion {
    /// Constant matrix, row-major d x d.
    Constant { sigma: Vec<f64> },
    /// Diagonal with `sigma_ii(x) = offset_i + slope_i * tanh(x_i)`, requiring `offset_i > |slope_i|`.
    DiagonalTanh { offset: Vec<f64>, slope: Vec<f64> },
}

impl Diffusion {
    pub fn scalar(sigma: f64) -> Self {
        Diffusion::Constant { sigma: vec![sigma] }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Diffusion::Constant { sigma } => {
                if sigma.len() != dim * dim {
                    return Err(Error::Dimension(format!("sigma must be {dim} x {dim}")));
                }
                if !sigma.iter().all(|s| s.is_finite()) {
                    return Err(Error::InvalidSpec("non-finite sigma".into()));
                }
            }
            Diffusion::DiagonalTanh { offset, slope } => {
                if offset.len() != dim || slope.len() != dim {
                    return Err(Error::Dimension(format!("diagonal sigma needs {dim} entries")));
                }
                if offset.iter().zip(slope).any(|(o, s)| !(o - s.abs() > 0.0)) {
                    return Err(Error::InvalidSpec("diagonal sigma floor offset - |slope| must be positive".into()));
                }
            }
        }
        if !(self.ellipticity_bound(&[f64::INFINITY; MAX_DIM][..dim]) > 0.0) {
            return Err(Error::InvalidSpec("diffusion is degenerate (a = sigma sigma^T singular)".into()));
        }
        Ok(())
    }

    /// `a(x) = sigma sigma^T`, row-major in a 2 x 2 buffer.
    pub fn a(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let d = x.len();
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        match self {
            Diffusion::Constant { sigma } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i][j] = (0..d).map(|k| sigma[i * d + k] * sigma[j * d + k]).sum();
                    }
                }
            }
            Diffusion::DiagonalTanh { offset, slope } => {
                for i in 0..d {
                    let s = offset[i] + slope[i] * tanh(x[i]);
                    out[i][i] = s * s;
                }
            }
        }
        out
    }

    /// sigma(x), row-major in a 2 x 2 buffer.
    pub fn sigma(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let d = x.len();
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        match self {
            Diffusion::Constant { sigma } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i][j] = sigma[i * d + j];
                    }
                }
            }
            Diffusion::DiagonalTanh { offset, slope } => {
                for i in 0..d {
                    out[i][i] = offset[i] + slope[i] * tanh(x[i]);
                }
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            Diffusion::Constant { sigma } => {
                let d = if sigma.len() == 4 { 2 } else { 1 };
                d == 1 || (sigma[1] == 0.0 && sigma[2] == 0.0)
            }
            Diffusion::DiagonalTanh { .. } => true,
        }
    }

    /// Closed-form lower bound of the smallest eigenvalue of `a` over the box.
    pub fn ellipticity_bound(&self, hw: &[f64]) -> f64 {
        match self {
            Diffusion::Constant { .. } => min_eigenvalue(&self.a(&[0.0; MAX_DIM][..hw.len()]), hw.len()),
            Diffusion::DiagonalTanh { offset, slope } => offset
                .iter()
                .zip(slope)
                .zip(hw)
                .map(|((o, s), l)| {
                    let t = if l.is_finite() { tanh(*l) } else { 1.0 };
                    let f = o - s.abs() * t;
                    f * f
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Smallest eigenvalue of a symmetric 1 x 1 or 2 x 2 matrix.
pub fn min_eigenvalue(a: &[[f64; MAX_DIM]; MAX_DIM], d: usize) -> f64 {
    if d == 1 {
        return a[0][0];
    }
    let tr = a[0][0] + a[1][1];
    let diff = a[0][0] - a[1][1];
    let off = 0.5 * (a[0][1] + a[1][0]);
    0.5 * (tr - sqrt(diff * diff + 4.0 * off * off))
}

/// Two-player game with additive drift and cost structure.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    dim: usize,
    actions: [usize; 2],
    drift: [Vec<ActionField>; 2],
    cost: [[ActionField; 2]; 2],
    diffusion: Diffusion,
}

impl GameSpec {
    /// `drift[p]` holds player p's drift components (length d).
    /// `cost[k][j]` is the part of player k's cost driven by player j's action.
    pub fn new(
        dim: usize,
        drift: [Vec<ActionField>; 2],
        cost: [[ActionField; 2]; 2],
        diffusion: Diffusion,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidSpec(format!("dimension must be 1 or 2, got {dim}")));
        }
        let mut actions = [0usize; 2];
        for p in 0..2 {
            if drift[p].len() != dim {
                return Err(Error::Dimension(format!(
                    "player {} drift has {} components, expected {}",
                    p + 1,
                    drift[p].len(),
                    dim
                )));
            }
            actions[p] = drift[p][0].actions();
            for f in &drift[p] {
                f.validate(dim)?;
                if f.actions() != actions[p] {
                    return Err(Error::Dimension(format!("player {} drift action counts disagree", p + 1)));
                }
            }
        }
        for k in 0..2 {
            for j in 0..2 {
                let f = &cost[k][j];
                f.validate(dim)?;
                if f.actions() != actions[j] {
                    return Err(Error::Dimension(format!(
                        "cost r{}{} has {} actions, player {} has {}",
                        k + 1,
                        j + 1,
                        f.actions(),
                        j + 1,
                        actions[j]
                    )));
                }
                for t in f.terms() {
                    if let FunctionTerm::GaussBump { weight, .. } = t {
                        if weight.iter().any(|&p| p < 0.0) {
                            return Err(Error::InvalidSpec(format!(
                                "cost r{}{}: gauss_bump weights must be non-negative",
                                k + 1,
                                j + 1
                            )));
                        }
                    }
                }
                for u in 0..f.actions() {
                    if f.global_inf(u) < 0.0 {
                        return Err(Error::InvalidSpec(format!(
                            "cost r{}{} may be negative for action {} (infimum bound {})",
                            k + 1,
                            j + 1,
                            u,
                            f.global_inf(u)
                        )));
                    }
                }
            }
        }
        diffusion.validate(dim)?;
        Ok(Self { dim, actions, drift, cost, diffusion })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn actions(&self, p: Player) -> usize {
        self.actions[p.index()]
    }

    pub fn drift_field(&self, p: Player) -> &[ActionField] {
        &self.drift[p.index()]
    }

    pub fn cost_field(&self, k: Player, j: Player) -> &ActionField {
        &self.cost[k.index()][j.index()]
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    /// `b1(x, u1) + b2(x, u2)`.
    pub fn pure_drift(&self, x: &[f64], u1: usize, u2: usize) -> [f64; MAX_DIM] {
        let mut b = [0.0; MAX_DIM];
        for (i, bi) in b.iter_mut().enumerate().take(self.dim) {
            *bi = self.drift[0][i].eval(x, u1) + self.drift[1][i].eval(x, u2);
        }
        b
    }

    /// `r_k(x, u1, u2) = r_k1(x, u1) + r_k2(x, u2)`.
    pub fn pure_cost(&self, k: Player, x: &[f64], u1: usize, u2: usize) -> f64 {
        let c = &self.cost[k.index()];
        c[0].eval(x, u1) + c[1].eval(x, u2)
    }

    /// Sup over the box `[-hw, hw]` and all action pairs of `r_k`.
    pub fn cost_sup(&self, k: Player, hw: &[f64]) -> f64 {
        let c = &self.cost[k.index()];
        let mut sup: f64 = 0.0;
        for u1 in 0..self.actions[0] {
            for u2 in 0..self.actions[1] {
                let (_, hi) = sum_range(&[(&c[0], u1), (&c[1], u2)], hw);
                sup = sup.max(hi);
            }
        }
        sup
    }

    /// Sup over the box and all actions of |b_i| per component.
    pub fn drift_sup(&self, hw: &[f64]) -> f64 {
        let mut sup: f64 = 0.0;
        for i in 0..self.dim {
            for u1 in 0..self.actions[0] {
                for u2 in 0..self.actions[1] {
                    let (lo, hi) = sum_range(&[(&self.drift[0][i], u1), (&self.drift[1][i], u2)], hw);
                    sup = sup.max(lo.abs()).max(hi.abs());
                }
            }
        }
        sup
    }

    /// Lipschitz bounds (drift, cost) derived from the term parameters.
    pub fn lipschitz_bounds(&self) -> (f64, [f64; 2]) {
        let mut drift: f64 = 0.0;
        for i in 0..self.dim {
            let l1 = (0..self.actions[0]).map(|u| self.drift[0][i].lipschitz(u)).fold(0.0, f64::max);
            let l2 = (0..self.actions[1]).map(|u| self.drift[1][i].lipschitz(u)).fold(0.0, f64::max);
            drift = drift.max(l1 + l2);
        }
        let mut cost = [0.0; 2];
        for (k, c) in cost.iter_mut().enumerate() {
            let l1 = (0..self.actions[0]).map(|u| self.cost[k][0].lipschitz(u)).fold(0.0, f64::max);
            let l2 = (0..self.actions[1]).map(|u| self.cost[k][1].lipschitz(u)).fold(0.0, f64::max);
            *c = l1 + l2;
        }
        (drift, cost)
    }
}

/// Probability vector over a player's pure actions.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedAction {
    weights: Vec<f64>,
}

impl MixedAction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights)?;
        Ok(Self { weights })
    }

    pub fn dirac(actions: usize, u: usize) -> Self {
        let mut weights = vec![0.0; actions];
        weights[u] = 1.0;
        Self { weights }
    }

    pub fn uniform(actions: usize) -> Self {
        Self { weights: vec![1.0 / actions as f64; actions] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub(crate) fn validate_weights(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    if w.is_empty() || !(min >= 0.0) || !((sum - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidMixedAction { sum, min });
    }
    Ok(())
}

/// Relaxed drift `sum v1(u1) b1(x,u1) + sum v2(u2) b2(x,u2)`.
pub fn mix_drift(spec: &GameSpec, x: &[f64], v1: &MixedAction, v2: &MixedAction) -> Result<[f64; MAX_DIM]> {
    check_mixed(spec, v1, v2)?;
    let mut b = [0.0; MAX_DIM];
    for (i, bi) in b.iter_mut().enumerate().take(spec.dim) {
        let p1: f64 = v1.weights.iter().enumerate().map(|(u, w)| w * spec.drift[0][i].eval(x, u)).sum();
        let p2: f64 = v2.weights.iter().enumerate().map(|(u, w)| w * spec.drift[1][i].eval(x, u)).sum();
        *bi = p1 + p2;
    }
    Ok(b)
}

/// Relaxed cost of player k.
pub fn mix_cost(spec: &GameSpec, k: Player, x: &[f64], v1: &MixedAction, v2: &MixedAction) -> Result<f64> {
    check_mixed(spec, v1, v2)?;
    let c = &spec.cost[k.index()];
    let p1: f64 = v1.weights.iter().enumerate().map(|(u, w)| w * c[0].eval(x, u)).sum();
    let p2: f64 = v2.weights.iter().enumerate().map(|(u, w)| w * c[1].eval(x, u)).sum();
    Ok(p1 + p2)
}

fn check_mixed(spec: &GameSpec, v1: &MixedAction, v2: &MixedAction) -> Result<()> {
    if v1.weights.len() != spec.actions[0] || v2.weights.len() != spec.actions[1] {
        return Err(Error::Dimension("mixed action length does not match the action set".into()));
    }
    validate_weights(&v1.weights)?;
    validate_weights(&v2.weights)
}

/// Built-in Lyapunov function families.
#[derive(Clone, Debug, PartialEq)]
pub enum Lyapunov {
    /// `1 + sum_i (cosh(gamma_i x_i) - 1)`; equals `cosh(gamma x)` in one dimension.
    Cosh { gamma: Vec<f64> },
    /// `1 + x^T Q x` with Q symmetric positive semidefinite, row-major.
    Quadratic { q: Vec<f64> },
}

impl Lyapunov {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Lyapunov::Cosh { gamma } => 1.0 + gamma.iter().zip(x).map(|(g, xi)| cosh(g * xi) - 1.0).sum::<f64>(),
            Lyapunov::Quadratic { q } => {
                let d = x.len();
                let mut s = 1.0;
                for i in 0..d {
                    for j in 0..d {
                        s += x[i] * q[i * d + j] * x[j];
                    }
                }
                s
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        match self {
            Lyapunov::Cosh { gamma } => {
                for i in 0..x.len() {
                    g[i] = gamma[i] * sinh(gamma[i] * x[i]);
                }
            }
            Lyapunov::Quadratic { q } => {
                let d = x.len();
                for i in 0..d {
                    g[i] = (0..d).map(|j| (q[i * d + j] + q[j * d + i]) * x[j]).sum();
                }
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        match self {
            Lyapunov::Cosh { gamma } => {
                for i in 0..x.len() {
                    h[i][i] = gamma[i] * gamma[i] * cosh(gamma[i] * x[i]);
                }
            }
            Lyapunov::Quadratic { q } => {
                let d = x.len();
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] = q[i * d + j] + q[j * d + i];
                    }
                }
            }
        }
        h
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Lyapunov::Cosh { gamma } => {
                if gamma.len() != dim || gamma.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Dimension(format!("cosh W needs {dim} finite rates")));
                }
            }
            Lyapunov::Quadratic { q } => {
                if q.len() != dim * dim {
                    return Err(Error::Dimension(format!("quadratic W needs a {dim} x {dim} matrix")));
                }
                let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..dim {
                    for j in 0..dim {
                        a[i][j] = 0.5 * (q[i * dim + j] + q[j * dim + i]);
                    }
                }
                if min_eigenvalue(&a, dim) < 0.0 {
                    return Err(Error::InvalidSpec("quadratic W must be positive semidefinite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Closed Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r2: f64 = self.center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
        r2 <= self.radius * self.radius
    }

    pub fn fits_in(&self, hw: &[f64]) -> bool {
        self.center.len() == hw.len()
            && self.center.iter().zip(hw).all(|(c, l)| c - self.radius >= -l && c + self.radius <= *l)
    }
}

/// Inf-compact penalty families for the strengthened condition.
#[derive(Clone, Debug, PartialEq)]
pub enum InfCompact {
    /// `coeff * |x|^2`.
    Quadratic { coeff: f64 },
    /// `coeff * W(x)^power`.
    PowerOfW { coeff: f64, power: f64 },
}

impl InfCompact {
    pub fn value(&self, x: &[f64], w: f64) -> f64 {
        match self {
            InfCompact::Quadratic { coeff } => coeff * x.iter().map(|v| v * v).sum::<f64>(),
            InfCompact::PowerOfW { coeff, power } => coeff * pow(w, *power),
        }
    }
}

/// Data for `L W^beta <= -h + c_hat I_{C_hat}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongLyapunov {
    pub beta: f64,
    pub h: InfCompact,
    pub c_hat: f64,
    pub set: Ball,
}

/// Stability certificate `L W <= -2 delta W + c I_C`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCertificate {
    pub w: Lyapunov,
    pub delta: f64,
    pub c: f64,
    pub set: Ball,
    pub strong: Option<StrongLyapunov>,
}

impl LyapunovCertificate {
    pub fn new(w: Lyapunov, delta: f64, c: f64, set: Ball, strong: Option<StrongLyapunov>) -> Result<Self> {
        let dim = set.center.len();
        w.validate(dim)?;
        if !(delta > 0.0) || !(c > 0.0) || !(set.radius > 0.0) {
            return Err(Error::InvalidSpec("certificate needs delta > 0, c > 0 and a positive radius".into()));
        }
        if let Some(s) = &strong {
            if !(s.beta > 1.0) || !(s.c_hat > 0.0) || !(s.set.radius > 0.0) || s.set.center.len() != dim {
                return Err(Error::InvalidSpec("strong condition needs beta > 1, c_hat > 0 and a valid ball".into()));
            }
        }
        Ok(Self { w, delta, c, set, strong })
    }

    /// Level above which W marks the set C0.
    pub fn c0_level(&self) -> f64 {
        1.0 + self.c / self.delta
    }

    pub fn in_c0(&self, x: &[f64]) -> bool {
        self.w.value(x) > self.c0_level()
    }
}

/// Analytic generator applied to W at x under a pure action pair.
pub fn generator_on_w(spec: &GameSpec, w: &Lyapunov, x: &[f64], u1: usize, u2: usize) -> f64 {
    let d = spec.dim;
    let b = spec.pure_drift(x, u1, u2);
    let a = spec.diffusion.a(x);
    let g = w.gradient(x);
    let h = w.hessian(x);
    let mut v = 0.0;
    for i in 0..d {
        v += b[i] * g[i];
        for j in 0..d {
            v += 0.5 * a[i][j] * h[i][j];
        }
    }
    v
}

/// Analytic generator applied to `W^beta`.
pub fn generator_on_w_power(spec: &GameSpec, w: &Lyapunov, beta: f64, x: &[f64], u1: usize, u2: usize) -> f64 {
    let d = spec.dim;
    let wv = w.value(x);
    let lw = generator_on_w(spec, w, x, u1, u2);
    let a = spec.diffusion.a(x);
    let g = w.gradient(x);
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += g[i] * a[i][j] * g[j];
        }
    }
    beta * pow(wv, beta - 1.0) * lw + 0.5 * beta * (beta - 1.0) * pow(wv, beta - 2.0) * quad
}

/// Outcome of a pointwise inequality check over grid nodes and midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub holds: bool,
    /// Largest value of (left side - right side); the inequality margin is its negation.
    pub worst_excess: f64,
    pub worst_point: Vec<f64>,
    pub worst_pair: (usize, usize),
    pub points_checked: usize,
}

impl CheckReport {
    pub fn margin(&self) -> f64 {
        -self.worst_excess
    }
}

/// Grid nodes plus all midpoints (the lattice with half the spacing).
pub fn check_points(grid: &Grid) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let counts: Vec<usize> = (0..d).map(|i| 2 * grid.counts()[i] - 1).collect();
    let total: usize = counts.iter().product();
    let mut pts = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = Vec::with_capacity(d);
        for i in 0..d {
            let k = rem % counts[i];
            rem /= counts[i];
            p.push(-grid.half_width()[i] + 0.5 * k as f64 * grid.spacing()[i]);
        }
        pts.push(p);
    }
    pts
}

fn scan(spec: &GameSpec, grid: &Grid, slack_tol: f64, f: &dyn Fn(&[f64], usize, usize) -> f64) -> CheckReport {
    let pts = check_points(grid);
    let mut worst = (f64::NEG_INFINITY, 0usize, (0usize, 0usize));
    for (pi, x) in pts.iter().enumerate() {
        for u1 in 0..spec.actions[0] {
            for u2 in 0..spec.actions[1] {
                let v = f(x, u1, u2);
                if v > worst.0 || v.is_nan() {
                    worst = (v, pi, (u1, u2));
                }
            }
        }
    }
    CheckReport {
        holds: worst.0 <= slack_tol,
        worst_excess: worst.0,
        worst_point: pts[worst.1].clone(),
        worst_pair: worst.2,
        points_checked: pts.len(),
    }
}

/// Checks `L W + 2 delta W - c I_C <= slack_tol` at every grid node, midpoint and pure pair.
pub fn check_lyapunov(spec: &GameSpec, cert: &LyapunovCertificate, grid: &Grid, slack_tol: f64) -> Result<CheckReport> {
    if !cert.set.fits_in(grid.half_width()) {
        return Err(Error::DomainTooSmall("C"));
    }
    Ok(scan(spec, grid, slack_tol, &|x, u1, u2| {
        let ind = if cert.set.contains(x) { cert.c } else { 0.0 };
        generator_on_w(spec, &cert.w, x, u1, u2) + 2.0 * cert.delta * cert.w.value(x) - ind
    }))
}

/// Checks `L W^beta + h - c_hat I_{C_hat} <= slack_tol` on the same point set.
pub fn check_strong_drift(spec: &GameSpec, cert: &LyapunovCertificate, grid: &Grid, slack_tol: f64) -> Result<CheckReport> {
    let s = cert
        .strong
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("certificate carries no strengthened-condition data".into()))?;
    if !s.set.fits_in(grid.half_width()) {
        return Err(Error::DomainTooSmall("C_hat"));
    }
    Ok(scan(spec, grid, slack_tol, &|x, u1, u2| {
        let ind = if s.set.contains(x) { s.c_hat } else { 0.0 };
        let w = cert.w.value(x);
        generator_on_w_power(spec, &cert.w, s.beta, x, u1, u2) + s.h.value(x, w) - ind
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallCostReport {
    pub holds: bool,
    pub cost_sup: [f64; 2],
    pub theta: f64,
    pub delta: f64,
    /// Largest theta for which the condition holds.
    pub theta_limit: f64,
}

/// `theta * |r_k|_inf <= delta` for both players, norms taken over the box.
pub fn check_small_cost(spec: &GameSpec, theta: f64, delta: f64, hw: &[f64]) -> SmallCostReport {
    let cost_sup = [spec.cost_sup(Player::One, hw), spec.cost_sup(Player::Two, hw)];
    let worst = cost_sup[0].max(cost_sup[1]);
    SmallCostReport {
        holds: cost_sup.iter().all(|s| theta * s <= delta),
        cost_sup,
        theta,
        delta,
        theta_limit: if worst > 0.0 { delta / worst } else { f64::INFINITY },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub holds: bool,
    pub ellipticity_bound: f64,
    pub ellipticity_at_nodes: f64,
    pub ellip_min: f64,
    pub drift_sup: f64,
    pub cost_sup: [f64; 2],
    pub drift_lipschitz: f64,
    pub cost_lipschitz: [f64; 2],
}

/// Boundedness and uniform ellipticity; Lipschitz bounds are recorded, not enforced.
pub fn check_regularity(spec: &GameSpec, grid: &Grid, ellip_min: f64) -> RegularityReport {
    let hw = grid.half_width();
    let mut at_nodes = f64::INFINITY;
    let mut x = [0.0; MAX_DIM];
    for i in 0..grid.len() {
        grid.point_into(i, &mut x);
        at_nodes = at_nodes.min(min_eigenvalue(&spec.diffusion.a(&x[..spec.dim]), spec.dim));
    }
    let drift_sup = spec.drift_sup(hw);
    let cost_sup = [spec.cost_sup(Player::One, hw), spec.cost_sup(Player::Two, hw)];
    let (drift_lipschitz, cost_lipschitz) = spec.lipschitz_bounds();
    RegularityReport {
        holds: at_nodes >= ellip_min && drift_sup.is_finite() && cost_sup.iter().all(|c| c.is_finite()),
        ellipticity_bound: spec.diffusion.ellipticity_bound(hw),
        ellipticity_at_nodes: at_nodes,
        ellip_min,
        drift_sup,
        cost_sup,
        drift_lipschitz,
        cost_lipschitz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tanh_drift(m: f64) -> ActionField {
        ActionField::new(1, vec![FunctionTerm::TanhAffine { offset: vec![0.0], slope: vec![vec![m]] }]).unwrap()
    }

    fn one_dim(drift1: ActionField, drift2: ActionField, c1: [ActionField; 2], c2: [ActionField; 2]) -> GameSpec {
        GameSpec::new(1, [vec![drift1], vec![drift2]], [c1, c2], Diffusion::scalar(1.0)).unwrap()
    }

    fn zero_cost(m1: usize, m2: usize) -> [ActionField; 2] {
        [ActionField::zero(m1), ActionField::zero(m2)]
    }

    #[test]
    fn dirac_mixing_recovers_pure_drift() {
        let d1 = ActionField::constant(vec![0.0, 2.0]);
        let d2 = ActionField::constant(vec![-1.0, 0.5, 3.0]);
        let spec = one_dim(d1, d2, zero_cost(2, 3), zero_cost(2, 3));
        let b = mix_drift(&spec, &[0.3], &MixedAction::dirac(2, 1), &MixedAction::dirac(3, 2)).unwrap();
        assert_eq!(b[0], 5.0);
    }

    #[test]
    fn uniform_mixing_averages() {
        let d1 = ActionField::constant(vec![0.0, 2.0]);
        let spec = one_dim(d1, ActionField::zero(1), zero_cost(2, 1), zero_cost(2, 1));
        let b = mix_drift(&spec, &[0.0], &MixedAction::uniform(2), &MixedAction::dirac(1, 0)).unwrap();
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn mixed_action_rejects_bad_weights() {
        assert!(MixedAction::new(vec![0.5, 0.6]).is_err());
        assert!(MixedAction::new(vec![1.5, -0.5]).is_err());
        assert!(MixedAction::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn negative_costs_are_rejected() {
        let bad = ActionField::new(1, vec![FunctionTerm::TanhAffine { offset: vec![0.1], slope: vec![vec![0.5]] }]).unwrap();
        let r = GameSpec::new(
            1,
            [vec![ActionField::zero(1)], vec![ActionField::zero(1)]],
            [[bad, ActionField::zero(1)], zero_cost(1, 1)],
            Diffusion::scalar(1.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn cost_sup_closed_forms() {
        let c = ActionField::new(
            2,
            vec![FunctionTerm::TanhAffine { offset: vec![0.5, 1.0], slope: vec![vec![-0.4], vec![0.2]] }],
        )
        .unwrap();
        let spec = one_dim(
            ActionField::zero(2),
            ActionField::zero(1),
            [c, ActionField::constant(vec![0.25])],
            zero_cost(2, 1),
        );
        let sup = spec.cost_sup(Player::One, &[6.0]);
        assert!((sup - (1.0 + 0.2 * tanh(6.0) + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn gauss_range_handles_off_box_centres() {
        let t = FunctionTerm::GaussBump { weight: vec![2.0], center: vec![3.0], width: 0.5 };
        let (lo, hi) = t.range_on(0, &[1.0]);
        assert!((hi - 2.0 * exp(-4.0 / 0.5)).abs() < 1e-15);
        assert!((lo - 2.0 * exp(-16.0 / 0.5)).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_holds_for_confining_tanh_drift() {
        let spec = one_dim(tanh_drift(-4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let cert = LyapunovCertificate::new(
            Lyapunov::Cosh { gamma: vec![0.5] },
            0.25,
            1.0,
            Ball::new(vec![0.0], 2.0),
            None,
        )
        .unwrap();
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        let rep = check_lyapunov(&spec, &cert, &grid, 1e-9).unwrap();
        assert!(rep.holds, "{rep:?}");
        // symbolic: -m g tanh(x) sinh(g x) + g^2/2 cosh(g x) + 2 delta cosh(g x) - c I_C
        let sym = |x: f64| {
            -4.0 * 0.5 * tanh(x) * sinh(0.5 * x) + 0.125 * cosh(0.5 * x) + 0.5 * cosh(0.5 * x)
                - if x.abs() <= 2.0 { 1.0 } else { 0.0 }
        };
        let best = check_points(&grid).iter().map(|p| sym(p[0])).fold(f64::NEG_INFINITY, f64::max);
        assert!((best - rep.worst_excess).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_fails_for_reversed_drift_and_constant_w() {
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        let ball = Ball::new(vec![0.0], 2.0);
        let spec = one_dim(tanh_drift(4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let cert = LyapunovCertificate::new(Lyapunov::Cosh { gamma: vec![0.5] }, 0.25, 1.0, ball.clone(), None).unwrap();
        assert!(!check_lyapunov(&spec, &cert, &grid, 1e-9).unwrap().holds);
        let stable = one_dim(tanh_drift(-4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let flat = LyapunovCertificate::new(Lyapunov::Cosh { gamma: vec![0.0] }, 0.25, 1.0, ball, None).unwrap();
        let rep = check_lyapunov(&stable, &flat, &grid, 1e-9).unwrap();
        assert!(!rep.holds);
        assert!(rep.worst_point[0].abs() > 2.0);
    }

    #[test]
    fn oversized_set_is_rejected() {
        let spec = one_dim(tanh_drift(-4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let cert =
            LyapunovCertificate::new(Lyapunov::Cosh { gamma: vec![0.5] }, 0.25, 1.0, Ball::new(vec![0.0], 8.0), None)
                .unwrap();
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        assert_eq!(check_lyapunov(&spec, &cert, &grid, 1e-9), Err(Error::DomainTooSmall("C")));
    }

    #[test]
    fn small_cost_inequality() {
        let spec = one_dim(
            ActionField::zero(1),
            ActionField::zero(1),
            [ActionField::constant(vec![1.0]), ActionField::zero(1)],
            [ActionField::constant(vec![0.5]), ActionField::zero(1)],
        );
        assert!(check_small_cost(&spec, 0.2, 0.25, &[6.0]).holds);
        assert!(!check_small_cost(&spec, 0.2, 0.1, &[6.0]).holds);
        let zero = one_dim(ActionField::zero(1), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        assert!(check_small_cost(&zero, 1e6, 1e-6, &[6.0]).holds);
    }

    #[test]
    fn a5_with_quadratic_w() {
        let spec = one_dim(tanh_drift(-4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let strong = StrongLyapunov {
            beta: 2.0,
            h: InfCompact::Quadratic { coeff: 0.5 },
            c_hat: 10.0,
            set: Ball::new(vec![0.0], 2.0),
        };
        let cert = LyapunovCertificate::new(
            Lyapunov::Quadratic { q: vec![0.25] },
            0.25,
            1.0,
            Ball::new(vec![0.0], 2.0),
            Some(strong.clone()),
        )
        .unwrap();
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        assert!(check_strong_drift(&spec, &cert, &grid, 1e-9).unwrap().holds);

        let unstable = one_dim(tanh_drift(4.0), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        assert!(!check_strong_drift(&unstable, &cert, &grid, 1e-9).unwrap().holds);

        let mut flat_h = cert.clone();
        flat_h.strong = Some(StrongLyapunov { h: InfCompact::Quadratic { coeff: 0.0 }, ..strong });
        let rep = check_strong_drift(&spec, &flat_h, &grid, 1e-9).unwrap();
        assert!(rep.holds);
        assert!(rep.margin() > 0.0);
    }

    #[test]
    fn w_power_generator_matches_finite_difference() {
        let spec = one_dim(tanh_drift(-1.5), ActionField::zero(1), zero_cost(1, 1), zero_cost(1, 1));
        let w = Lyapunov::Cosh { gamma: vec![0.7] };
        let beta = 1.8;
        for &x in &[-2.0, -0.3, 0.4, 1.9] {
            let h = 1e-4;
            let f = |y: f64| pow(w.value(&[y]), beta);
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let fd = -1.5 * tanh(x) * d1 + 0.5 * d2;
            let an = generator_on_w_power(&spec, &w, beta, &[x], 0, 0);
            assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "{x}: {fd} vs {an}");
        }
    }

    #[test]
    fn regularity_report() {
        let spec = GameSpec::new(
            1,
            [vec![tanh_drift(-2.0)], vec![ActionField::zero(1)]],
            [zero_cost(1, 1), zero_cost(1, 1)],
            Diffusion::DiagonalTanh { offset: vec![1.0], slope: vec![0.5] },
        )
        .unwrap();
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        let rep = check_regularity(&spec, &grid, 1e-8);
        assert!(rep.holds);
        assert!((rep.ellipticity_bound - (1.0 - 0.5 * tanh(6.0)).powi(2)).abs() < 1e-14);
        assert!(rep.ellipticity_at_nodes >= rep.ellipticity_bound - 1e-14);
        assert!((rep.drift_lipschitz - 2.0).abs() < 1e-15);
    }
}
