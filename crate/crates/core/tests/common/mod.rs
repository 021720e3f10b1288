#![allow(dead_code)]

use rsgame_core::discretize::{Discretization, Grid};
use rsgame_core::model::{ActionField, Ball, Diffusion, FunctionTerm, GameSpec, Lyapunov, LyapunovCertificate};
use rsgame_core::StrategyField;

/// `offset[u] + slope * tanh(x)` in one dimension.
pub fn tanh1(offset: Vec<f64>, slope: f64) -> ActionField {
    let m = offset.len();
    ActionField::new(m, vec![FunctionTerm::TanhAffine { offset, slope: vec![vec![slope]; m] }]).unwrap()
}

/// `offset[u] + slope[0] tanh(x_1) + slope[1] tanh(x_2)`.
pub fn tanh2(offset: Vec<f64>, slope: [f64; 2]) -> ActionField {
    let m = offset.len();
    ActionField::new(m, vec![FunctionTerm::TanhAffine { offset, slope: vec![slope.to_vec(); m] }]).unwrap()
}

/// Two-action game with confining drift; each player prefers its own side.
pub fn desk() -> GameSpec {
    GameSpec::new(
        1,
        [vec![tanh1(vec![0.5, -0.5], -2.0)], vec![tanh1(vec![0.3, -0.3], 0.0)]],
        [
            [tanh1(vec![0.6, 0.5], -0.4), ActionField::constant(vec![0.0, 0.1])],
            [ActionField::constant(vec![0.0, 0.1]), tanh1(vec![0.6, 0.5], 0.4)],
        ],
        Diffusion::scalar(1.0),
    )
    .unwrap()
}

pub fn desk_certificate() -> LyapunovCertificate {
    LyapunovCertificate::new(Lyapunov::Cosh { gamma: vec![1.0] }, 0.25, 1.25, Ball::new(vec![0.0], 2.0), None).unwrap()
}

/// Game used on the five-node chain.
pub fn chain_spec() -> GameSpec {
    GameSpec::new(
        1,
        [vec![tanh1(vec![0.5, -0.5], -1.0)], vec![tanh1(vec![0.3, -0.3], 0.0)]],
        [
            [tanh1(vec![0.6, 0.5], -0.4), ActionField::constant(vec![0.0, 0.1])],
            [ActionField::constant(vec![0.05, 0.0]), tanh1(vec![0.6, 0.5], 0.4)],
        ],
        Diffusion::scalar(1.0),
    )
    .unwrap()
}

pub fn chain_disc(spec: &GameSpec) -> Discretization {
    Discretization::new(spec, &Grid::with_nodes(&[1.0], &[5]).unwrap()).unwrap()
}

pub fn chain_strategies() -> (StrategyField, StrategyField) {
    (
        StrategyField::stationary(2, vec![0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.2, 0.8]).unwrap(),
        StrategyField::stationary(2, vec![0.6, 0.4, 0.6, 0.4, 0.1, 0.9, 1.0, 0.0, 0.5, 0.5]).unwrap(),
    )
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
