//! Truncated spatial lattice, logarithmic theta lattice and the monotone
//! finite-difference generator.
//!
//! The generator uses central second differences for the diffusion and
//! first-order upwinding for the drift. The box boundary is closed by
//! reflecting ghost nodes (Neumann), which folds the missing neighbour onto
//! the interior one, so every row keeps nonnegative off-diagonals and a zero
//! row sum.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::model::{GameSpec, Player, MAX_DIM};

/// Interior nodes required per dimension by [`Grid::uniform`].
pub const MIN_INTERIOR: usize = 8;

/// Uniform tensor lattice over `[-L, L]^d`, first coordinate fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_width: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    len: usize,
}

impl Grid {
    /// Lattice with spacing as close to `dx` as divides `2L` evenly.
    pub fn uniform(half_width: &[f64], dx: &[f64]) -> Result<Self> {
        if half_width.len() != dx.len() {
            return Err(Error::Dimension("half_width and dx lengths differ".into()));
        }
        let mut counts = Vec::with_capacity(dx.len());
        for (l, h) in half_width.iter().zip(dx) {
            if !(*h > 0.0) || !(*l > 0.0) {
                return Err(Error::InvalidGrid("half width and spacing must be positive".into()));
            }
            let cells = libm::round(2.0 * l / h) as usize;
            counts.push(cells + 1);
        }
        if counts.iter().any(|&n| n < MIN_INTERIOR + 2) {
            return Err(Error::InvalidGrid(format!("need at least {MIN_INTERIOR} interior nodes per dimension")));
        }
        Self::with_nodes(half_width, &counts)
    }

    /// Lattice with an explicit node count per dimension (at least 2). Used for
    /// the small chains the oracles work on.
    pub fn with_nodes(half_width: &[f64], counts: &[usize]) -> Result<Self> {
        let d = half_width.len();
        if d == 0 || d > MAX_DIM || counts.len() != d {
            return Err(Error::Dimension(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if counts.iter().any(|&n| n < 2) || half_width.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidGrid("need at least 2 nodes and a positive half width".into()));
        }
        let spacing = half_width.iter().zip(counts).map(|(l, n)| 2.0 * l / (n - 1) as f64).collect();
        Ok(Self { half_width: half_width.to_vec(), counts: counts.to_vec(), spacing, len: counts.iter().product() })
    }

    pub fn dim(&self) -> usize {
        self.half_width.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn multi_index(&self, i: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        let mut rem = i;
        for (k, n) in self.counts.iter().enumerate() {
            m[k] = rem % n;
            rem /= n;
        }
        m
    }

    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        if k + 1 == self.counts[axis] {
            self.half_width[axis]
        } else {
            -self.half_width[axis] + k as f64 * self.spacing[axis]
        }
    }

    pub fn point_into(&self, i: usize, out: &mut [f64; MAX_DIM]) {
        let m = self.multi_index(i);
        for k in 0..self.dim() {
            out[k] = self.coordinate(k, m[k]);
        }
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut p = [0.0; MAX_DIM];
        self.point_into(i, &mut p);
        p[..self.dim()].to_vec()
    }

    /// Nearest node; points outside the box map to the closest boundary node.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            let t = (x[k] + self.half_width[k]) / self.spacing[k];
            let j = libm::round(t).clamp(0.0, (self.counts[k] - 1) as f64) as usize;
            idx += j * stride;
            stride *= self.counts[k];
        }
        idx
    }

    /// Nodes with `|x_k| <= fraction * L_k` in every coordinate.
    pub fn core_mask(&self, fraction: f64) -> Vec<bool> {
        let mut x = [0.0; MAX_DIM];
        (0..self.len)
            .map(|i| {
                self.point_into(i, &mut x);
                (0..self.dim()).all(|k| x[k].abs() <= fraction * self.half_width[k] + 1e-12)
            })
            .collect()
    }

    /// Neighbour table, `2d` entries per node ordered (minus, plus) per axis,
    /// with boundary neighbours reflected onto the interior.
    fn neighbours(&self) -> Vec<usize> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(self.len * 2 * d);
        for i in 0..self.len {
            let m = self.multi_index(i);
            let mut stride = 1;
            for k in 0..d {
                let n = self.counts[k];
                let minus = if m[k] > 0 { i - stride } else { i + stride };
                let plus = if m[k] + 1 < n { i + stride } else { i - stride };
                cols.push(minus);
                cols.push(plus);
                stride *= n;
            }
        }
        cols
    }

    /// Half bandwidth of generator matrices in this node ordering.
    pub(crate) fn bandwidth(&self) -> usize {
        if self.dim() == 1 {
            1
        } else {
            self.counts[0]
        }
    }
}

/// Logarithmic lattice `theta_j = kappa (Theta / kappa)^(j / n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrid {
    kappa: f64,
    theta_max: f64,
    nodes: Vec<f64>,
    ds: f64,
}

impl ThetaGrid {
    pub fn new(kappa: f64, theta_max: f64, steps: usize) -> Result<Self> {
        if !(kappa > 0.0) || !(theta_max > kappa) || !theta_max.is_finite() || steps == 0 {
            return Err(Error::InvalidGrid("theta grid needs 0 < kappa < Theta and at least one step".into()));
        }
        let ds = (log(theta_max) - log(kappa)) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|j| exp(log(kappa) + j as f64 * ds)).collect();
        nodes[0] = kappa;
        nodes[steps] = theta_max;
        Ok(Self { kappa, theta_max, nodes, ds })
    }

    /// Default truncation level `kappa = 1e-3 * Theta`.
    pub fn with_default_kappa(theta_max: f64, steps: usize) -> Result<Self> {
        Self::new(1e-3 * theta_max, theta_max, steps)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    /// Level nearest to `theta` in log scale; values below kappa map to 0.
    pub fn level_near(&self, theta: f64) -> usize {
        if !(theta > self.kappa) {
            return 0;
        }
        let t = (log(theta) - log(self.kappa)) / self.ds;
        libm::round(t).clamp(0.0, self.steps() as f64) as usize
    }

    /// Level whose value equals `theta` up to relative 1e-9, if any.
    pub fn level_of(&self, theta: f64) -> Option<usize> {
        let j = self.level_near(theta);
        ((self.nodes[j] - theta).abs() <= 1e-9 * theta).then_some(j)
    }
}

/// Discrete generator of one action pair (or a mixture), stored row-wise with
/// a fixed stencil width of `2d` off-diagonal entries.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    width: usize,
    cols: Arc<[usize]>,
    off: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// (columns, off-diagonal coefficients, diagonal) of row `i`. Columns may
    /// repeat at boundary nodes.
    pub fn row(&self, i: usize) -> (&[usize], &[f64], f64) {
        let s = i * self.width;
        (&self.cols[s..s + self.width], &self.off[s..s + self.width], self.diag[i])
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.apply_row(i, psi)).collect()
    }

    #[inline]
    pub fn apply_row(&self, i: usize, psi: &[f64]) -> f64 {
        let (cols, off, diag) = self.row(i);
        let mut s = diag * psi[i];
        for (c, a) in cols.iter().zip(off) {
            s += a * psi[*c];
        }
        s
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Dense row-major copy, merging repeated boundary columns.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let (cols, off, diag) = self.row(i);
            m[i * n + i] += diag;
            for (c, a) in cols.iter().zip(off) {
                m[i * n + c] += a;
            }
        }
        m
    }

    pub(crate) fn from_parts(width: usize, cols: Arc<[usize]>, off: Vec<f64>, diag: Vec<f64>) -> Self {
        Self { width, cols, off, diag }
    }

    /// Factorizes `diag(shift) - Q - diag(extra)`.
    pub(crate) fn shifted_system(&self, bw: usize, shift: &[f64], extra: &[f64]) -> Result<Banded> {
        let n = self.len();
        let mut m = Banded::zeros(n, bw);
        for i in 0..n {
            let (cols, off, diag) = self.row(i);
            m.add(i, i, shift[i] - diag - extra[i]);
            for (c, a) in cols.iter().zip(off) {
                m.add(i, *c, -a);
            }
        }
        m.factor()?;
        Ok(m)
    }
}

/// Builds the generator of a single pure action pair.
pub fn build_generator(spec: &GameSpec, grid: &Grid, u1: usize, u2: usize) -> Result<GeneratorMatrix> {
    let cols: Arc<[usize]> = grid.neighbours().into();
    build_with_cols(spec, grid, u1, u2, cols)
}

fn build_with_cols(spec: &GameSpec, grid: &Grid, u1: usize, u2: usize, cols: Arc<[usize]>) -> Result<GeneratorMatrix> {
    let d = grid.dim();
    if spec.dim() != d {
        return Err(Error::Dimension("grid and game dimensions differ".into()));
    }
    let n = grid.len();
    let width = 2 * d;
    let mut off = Vec::with_capacity(n * width);
    let mut diag = Vec::with_capacity(n);
    let mut x = [0.0; MAX_DIM];
    for i in 0..n {
        grid.point_into(i, &mut x);
        let b = spec.pure_drift(&x[..d], u1, u2);
        let a = spec.diffusion().a(&x[..d]);
        if d == 2 && (a[0][1] != 0.0 || a[1][0] != 0.0) {
            return Err(Error::MonotonicityViolation { node: i });
        }
        let mut total = 0.0;
        for k in 0..d {
            let h = grid.spacing()[k];
            let diff = 0.5 * a[k][k] / (h * h);
            let minus = diff + (-b[k]).max(0.0) / h;
            let plus = diff + b[k].max(0.0) / h;
            off.push(minus);
            off.push(plus);
            total += minus + plus;
        }
        diag.push(-total);
    }
    Ok(GeneratorMatrix { width, cols, off, diag })
}

/// Generators for every pure pair, indexed `u1 * m2 + u2`.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    m: [usize; 2],
    gens: Vec<GeneratorMatrix>,
}

impl GeneratorSet {
    pub fn build(spec: &GameSpec, grid: &Grid) -> Result<Self> {
        let cols: Arc<[usize]> = grid.neighbours().into();
        let m = [spec.actions(Player::One), spec.actions(Player::Two)];
        let mut gens = Vec::with_capacity(m[0] * m[1]);
        for u1 in 0..m[0] {
            for u2 in 0..m[1] {
                gens.push(build_with_cols(spec, grid, u1, u2, cols.clone())?);
            }
        }
        Ok(Self { m, gens })
    }

    pub fn get(&self, u1: usize, u2: usize) -> &GeneratorMatrix {
        &self.gens[u1 * self.m[1] + u2]
    }
}

/// Row-stochastic chain `P = I + dt Q` in the same sparse layout.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    width: usize,
    cols: Arc<[usize]>,
    moves: Vec<f64>,
    stay: Vec<f64>,
    dt: f64,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.stay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stay.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// (columns, move probabilities, stay probability) of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64], f64) {
        let s = i * self.width;
        (&self.cols[s..s + self.width], &self.moves[s..s + self.width], self.stay[i])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let (cols, mv, stay) = self.row(i);
            m[i * n + i] += stay;
            for (c, p) in cols.iter().zip(mv) {
                m[i * n + c] += p;
            }
        }
        m
    }
}

/// Largest admissible step for [`extract_chain`].
pub fn chain_step_bound(gen: &GeneratorMatrix) -> f64 {
    let m = gen.max_abs_diag();
    if m > 0.0 {
        1.0 / m
    } else {
        f64::INFINITY
    }
}

pub fn extract_chain(gen: &GeneratorMatrix, dt: f64) -> Result<TransitionMatrix> {
    let bound = chain_step_bound(gen);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::TimeStepTooLarge { dt, bound });
    }
    let moves = gen.off.iter().map(|a| dt * a).collect();
    let stay = gen.diag.iter().map(|d| (1.0 + dt * d).max(0.0)).collect();
    Ok(TransitionMatrix { width: gen.width, cols: gen.cols.clone(), moves, stay, dt })
}

/// A game discretized on a grid: pure-pair generators and node cost tables.
#[derive(Clone, Debug)]
pub struct Discretization {
    spec: GameSpec,
    grid: Grid,
    gens: GeneratorSet,
    /// `costs[k][j][node * m_j + u]` holds `r_kj(x_node, u)`.
    costs: [[Vec<f64>; 2]; 2],
    cost_sup: [f64; 2],
}

impl Discretization {
    pub fn new(spec: &GameSpec, grid: &Grid) -> Result<Self> {
        if spec.dim() != grid.dim() {
            return Err(Error::Dimension("grid and game dimensions differ".into()));
        }
        let gens = GeneratorSet::build(spec, grid)?;
        let m = [spec.actions(Player::One), spec.actions(Player::Two)];
        let mut costs: [[Vec<f64>; 2]; 2] = Default::default();
        let mut x = [0.0; MAX_DIM];
        let d = grid.dim();
        for k in Player::BOTH {
            for j in Player::BOTH {
                let f = spec.cost_field(k, j);
                let mut t = Vec::with_capacity(grid.len() * m[j.index()]);
                for i in 0..grid.len() {
                    grid.point_into(i, &mut x);
                    for u in 0..m[j.index()] {
                        t.push(f.eval(&x[..d], u));
                    }
                }
                costs[k.index()][j.index()] = t;
            }
        }
        let hw = grid.half_width();
        let cost_sup = [spec.cost_sup(Player::One, hw), spec.cost_sup(Player::Two, hw)];
        Ok(Self { spec: spec.clone(), grid: grid.clone(), gens, costs, cost_sup })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn actions(&self, p: Player) -> usize {
        self.spec.actions(p)
    }

    pub fn generator(&self, u1: usize, u2: usize) -> &GeneratorMatrix {
        self.gens.get(u1, u2)
    }

    /// `|r_k|_inf` over the truncated box.
    pub fn cost_sup(&self, k: Player) -> f64 {
        self.cost_sup[k.index()]
    }

    #[inline]
    pub fn cost_part(&self, k: Player, j: Player, node: usize, u: usize) -> f64 {
        self.costs[k.index()][j.index()][node * self.spec.actions(j) + u]
    }

    #[inline]
    fn pair_generator(&self, k: Player, own: usize, opp: usize) -> &GeneratorMatrix {
        match k {
            Player::One => self.gens.get(own, opp),
            Player::Two => self.gens.get(opp, own),
        }
    }

    /// Row of player k's generator for own pure action `u` against the
    /// opponent mixture `opp` at `node`; writes the off-diagonals, returns the diagonal.
    #[inline]
    pub fn player_row(&self, k: Player, node: usize, u: usize, opp: &[f64], off: &mut [f64]) -> f64 {
        let w = 2 * self.grid.dim();
        off[..w].iter_mut().for_each(|a| *a = 0.0);
        let mut diag = 0.0;
        for (v, &p) in opp.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (_, o, dg) = self.pair_generator(k, u, v).row(node);
            for (a, b) in off.iter_mut().zip(o) {
                *a += p * b;
            }
            diag += p * dg;
        }
        diag
    }

    /// Player k's running cost with own pure action `u` against `opp`.
    #[inline]
    pub fn player_cost(&self, k: Player, node: usize, u: usize, opp: &[f64]) -> f64 {
        let mut c = self.cost_part(k, k, node, u);
        let j = k.other();
        for (v, &p) in opp.iter().enumerate() {
            c += p * self.cost_part(k, j, node, v);
        }
        c
    }

    /// Row of the fully mixed generator at `node`.
    pub fn mixed_row(&self, node: usize, w1: &[f64], w2: &[f64], off: &mut [f64]) -> f64 {
        let w = 2 * self.grid.dim();
        off[..w].iter_mut().for_each(|a| *a = 0.0);
        let mut diag = 0.0;
        for (u1, &p1) in w1.iter().enumerate() {
            if p1 == 0.0 {
                continue;
            }
            for (u2, &p2) in w2.iter().enumerate() {
                let p = p1 * p2;
                if p == 0.0 {
                    continue;
                }
                let (_, o, dg) = self.gens.get(u1, u2).row(node);
                for (a, b) in off.iter_mut().zip(o) {
                    *a += p * b;
                }
                diag += p * dg;
            }
        }
        diag
    }

    /// Running cost of player k under the mixture pair at `node`.
    pub fn mixed_cost(&self, k: Player, node: usize, w1: &[f64], w2: &[f64]) -> f64 {
        let a: f64 = w1.iter().enumerate().map(|(u, p)| p * self.cost_part(k, Player::One, node, u)).sum();
        let b: f64 = w2.iter().enumerate().map(|(u, p)| p * self.cost_part(k, Player::Two, node, u)).sum();
        a + b
    }

    fn cols(&self) -> Arc<[usize]> {
        self.gens.gens[0].cols.clone()
    }

    /// Mixed generator for node-major weight slices (`nodes * m_p` entries each).
    pub fn mixed_generator(&self, v1: &[f64], v2: &[f64]) -> GeneratorMatrix {
        let n = self.len();
        let (m1, m2) = (self.actions(Player::One), self.actions(Player::Two));
        let w = 2 * self.grid.dim();
        let mut off = vec![0.0; n * w];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            diag[i] = self.mixed_row(i, &v1[i * m1..(i + 1) * m1], &v2[i * m2..(i + 1) * m2], &mut off[i * w..(i + 1) * w]);
        }
        GeneratorMatrix::from_parts(w, self.cols(), off, diag)
    }

    /// Player k's generator for a pure own policy against an opponent level.
    pub fn player_generator(&self, k: Player, policy: &[usize], opp: &[f64]) -> GeneratorMatrix {
        let n = self.len();
        let mo = self.actions(k.other());
        let w = 2 * self.grid.dim();
        let mut off = vec![0.0; n * w];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            diag[i] = self.player_row(k, i, policy[i], &opp[i * mo..(i + 1) * mo], &mut off[i * w..(i + 1) * w]);
        }
        GeneratorMatrix::from_parts(w, self.cols(), off, diag)
    }

    /// Generator from explicit rows, sharing this grid's stencil layout.
    pub(crate) fn generator_from_rows(&self, off: Vec<f64>, diag: Vec<f64>) -> GeneratorMatrix {
        GeneratorMatrix::from_parts(2 * self.grid.dim(), self.cols(), off, diag)
    }
}

/// `sum_{u1,u2} v1(u1) v2(u2) (L_{u1 u2} psi)` at every node, for node-major weight slices.
pub fn mixed_generator_apply(disc: &Discretization, v1: &[f64], v2: &[f64], psi: &[f64]) -> Vec<f64> {
    let n = disc.len();
    let (m1, m2) = (disc.actions(Player::One), disc.actions(Player::Two));
    let mut off = [0.0; 2 * MAX_DIM];
    (0..n)
        .map(|i| {
            let diag = disc.mixed_row(i, &v1[i * m1..(i + 1) * m1], &v2[i * m2..(i + 1) * m2], &mut off);
            let (cols, _, _) = disc.generator(0, 0).row(i);
            let mut s = diag * psi[i];
            for (c, a) in cols.iter().zip(&off) {
                s += a * psi[*c];
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionField, Diffusion, FunctionTerm};
    use alloc::vec;
    use libm::sqrt;

    fn spec_1d(drift: Vec<f64>, sigma: f64) -> GameSpec {
        let m = drift.len();
        GameSpec::new(
            1,
            [vec![ActionField::constant(drift)], vec![ActionField::zero(1)]],
            [[ActionField::zero(m), ActionField::zero(1)], [ActionField::zero(m), ActionField::zero(1)]],
            Diffusion::scalar(sigma),
        )
        .unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = Grid::uniform(&[6.0], &[0.05]).unwrap();
        assert_eq!(g.len(), 241);
        assert_eq!(g.point(0), vec![-6.0]);
        assert_eq!(g.point(240), vec![6.0]);
        assert_eq!(g.nearest(&[0.01]), 120);
        assert_eq!(g.nearest(&[100.0]), 240);
        assert!(Grid::uniform(&[1.0], &[0.5]).is_err());
        assert!(Grid::with_nodes(&[1.0], &[5]).is_ok());
        let g2 = Grid::uniform(&[1.0, 2.0], &[0.2, 0.4]).unwrap();
        assert_eq!(g2.counts(), &[11, 11]);
        assert_eq!(g2.point(12), vec![-0.8, -1.6]);
    }

    #[test]
    fn theta_grid_endpoints() {
        let t = ThetaGrid::with_default_kappa(1.0, 200).unwrap();
        assert_eq!(t.nodes()[0], 1e-3);
        assert_eq!(t.nodes()[200], 1.0);
        assert!(t.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.level_of(t.nodes()[37]), Some(37));
        assert_eq!(t.level_near(1e-9), 0);
        assert!(ThetaGrid::new(1.0, 0.5, 10).is_err());
    }

    #[test]
    fn laplacian_stencil() {
        let spec = spec_1d(vec![0.0], sqrt(2.0));
        let grid = Grid::uniform(&[1.0], &[0.1]).unwrap();
        let g = build_generator(&spec, &grid, 0, 0).unwrap();
        let h2 = 0.01;
        let (cols, off, diag) = g.row(5);
        assert_eq!(cols, &[4, 6]);
        assert!((off[0] - 1.0 / h2).abs() < 1e-9 && (off[1] - 1.0 / h2).abs() < 1e-9);
        assert!((diag + 2.0 / h2).abs() < 1e-9);
    }

    #[test]
    fn positive_drift_upwinds_forward() {
        let base = build_generator(&spec_1d(vec![0.0], sqrt(2.0)), &Grid::uniform(&[1.0], &[0.1]).unwrap(), 0, 0).unwrap();
        let g = build_generator(&spec_1d(vec![1.0], sqrt(2.0)), &Grid::uniform(&[1.0], &[0.1]).unwrap(), 0, 0).unwrap();
        let (_, o0, d0) = base.row(5);
        let (_, o1, d1) = g.row(5);
        assert!((o1[0] - o0[0]).abs() < 1e-9);
        assert!((o1[1] - o0[1] - 10.0).abs() < 1e-9);
        assert!((d1 - d0 + 10.0).abs() < 1e-9);
    }

    #[test]
    fn constants_are_annihilated_and_boundary_reflects() {
        let spec = spec_1d(vec![-0.7], 1.3);
        let grid = Grid::uniform(&[2.0], &[0.2]).unwrap();
        let g = build_generator(&spec, &grid, 0, 0).unwrap();
        let ones = vec![1.0; grid.len()];
        assert!(g.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        let (cols, _, _) = g.row(0);
        assert_eq!(cols, &[1, 1]);
    }

    #[test]
    fn chain_from_laplacian_has_no_hold() {
        let spec = spec_1d(vec![0.0], sqrt(2.0));
        let grid = Grid::uniform(&[1.0], &[0.1]).unwrap();
        let g = build_generator(&spec, &grid, 0, 0).unwrap();
        let p = extract_chain(&g, 0.005).unwrap();
        let (_, mv, stay) = p.row(3);
        assert!(stay.abs() < 1e-12);
        assert!((mv[0] - 0.5).abs() < 1e-12 && (mv[1] - 0.5).abs() < 1e-12);
        assert!(matches!(extract_chain(&g, 0.01), Err(Error::TimeStepTooLarge { .. })));
        let zero = GeneratorMatrix::from_parts(2, g.cols.clone(), vec![0.0; 2 * grid.len()], vec![0.0; grid.len()]);
        let id = extract_chain(&zero, 1.0).unwrap().to_dense();
        let n = grid.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(id[i * n + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn non_diagonal_diffusion_rejected_in_2d() {
        let z = || ActionField::zero(1);
        let spec = GameSpec::new(
            2,
            [vec![z(), z()], vec![z(), z()]],
            [[z(), z()], [z(), z()]],
            Diffusion::Constant { sigma: vec![1.0, 0.3, 0.0, 1.0] },
        )
        .unwrap();
        let grid = Grid::uniform(&[1.0, 1.0], &[0.2, 0.2]).unwrap();
        assert!(matches!(build_generator(&spec, &grid, 0, 0), Err(Error::MonotonicityViolation { .. })));
    }

    #[test]
    fn uniform_mixing_of_opposite_drifts_matches_zero_drift() {
        let spec = spec_1d(vec![1.0, -1.0], 1.0);
        let grid = Grid::uniform(&[1.0], &[0.1]).unwrap();
        let disc = Discretization::new(&spec, &grid).unwrap();
        let n = grid.len();
        let psi: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let v1: Vec<f64> = (0..n).flat_map(|_| [0.5, 0.5]).collect();
        let v2 = vec![1.0; n];
        let mixed = mixed_generator_apply(&disc, &v1, &v2, &psi);
        // upwinding makes the average of the two one-sided drifts a central
        // difference plus numerical diffusion h|b|/2, which equals a zero-drift
        // generator with a = 1 + h
        let zero = build_generator(&spec_1d(vec![0.0], sqrt(1.0 + 0.1)), &grid, 0, 0).unwrap().apply(&psi);
        for i in 1..n - 1 {
            assert!((mixed[i] - zero[i]).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn tanh_drift_generator_is_monotone() {
        let f = ActionField::new(
            2,
            vec![FunctionTerm::TanhAffine { offset: vec![0.5, -0.5], slope: vec![vec![-2.0], vec![-2.0]] }],
        )
        .unwrap();
        let spec = GameSpec::new(
            1,
            [vec![f], vec![ActionField::zero(1)]],
            [[ActionField::zero(2), ActionField::zero(1)], [ActionField::zero(2), ActionField::zero(1)]],
            Diffusion::scalar(1.0),
        )
        .unwrap();
        let grid = Grid::uniform(&[6.0], &[0.05]).unwrap();
        for u in 0..2 {
            let g = build_generator(&spec, &grid, u, 0).unwrap();
            for i in 0..grid.len() {
                let (_, off, diag) = g.row(i);
                assert!(off.iter().all(|a| *a >= 0.0));
                assert!(diag <= 0.0);
                assert!((off.iter().sum::<f64>() + diag).abs() < 1e-12 * diag.abs().max(1.0));
            }
        }
    }
}
