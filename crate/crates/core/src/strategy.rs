//! Strategy fields: a mixed action per node, optionally per theta level.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::validate_weights;

/// Mixed actions stored node-major, `levels x nodes x actions`.
///
/// A stationary field has a single level that is used for every theta.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyField {
    actions: usize,
    nodes: usize,
    levels: usize,
    stationary: bool,
    weights: Vec<f64>,
}

impl StrategyField {
    /// Stationary field playing pure action `u` everywhere.
    pub fn constant(actions: usize, nodes: usize, u: usize) -> Self {
        let mut weights = vec![0.0; nodes * actions];
        for i in 0..nodes {
            weights[i * actions + u] = 1.0;
        }
        Self { actions, nodes, levels: 1, stationary: true, weights }
    }

    pub fn uniform(actions: usize, nodes: usize) -> Self {
        Self { actions, nodes, levels: 1, stationary: true, weights: vec![1.0 / actions as f64; nodes * actions] }
    }

    /// Stationary pure field from one action index per node.
    pub fn from_pure(actions: usize, policy: &[usize]) -> Self {
        let nodes = policy.len();
        let mut weights = vec![0.0; nodes * actions];
        for (i, &u) in policy.iter().enumerate() {
            weights[i * actions + u] = 1.0;
        }
        Self { actions, nodes, levels: 1, stationary: true, weights }
    }

    /// Stationary field from node-major weights.
    pub fn stationary(actions: usize, weights: Vec<f64>) -> Result<Self> {
        Self::build(actions, 1, true, weights)
    }

    /// Theta-dependent field from level-major, node-major weights.
    pub fn eventually_stationary(actions: usize, levels: usize, weights: Vec<f64>) -> Result<Self> {
        Self::build(actions, levels, false, weights)
    }

    fn build(actions: usize, levels: usize, stationary: bool, weights: Vec<f64>) -> Result<Self> {
        if actions == 0 || levels == 0 || weights.len() % (actions * levels) != 0 {
            return Err(Error::Dimension("strategy weight count does not match its shape".into()));
        }
        let nodes = weights.len() / (actions * levels);
        let f = Self { actions, nodes, levels, stationary, weights };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.chunks(self.actions).try_for_each(validate_weights)
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// Weights of all nodes at a level (`nodes * actions`); stationary fields ignore the level.
    #[inline]
    pub fn level(&self, level: usize) -> &[f64] {
        let l = if self.stationary { 0 } else { level };
        let s = l * self.nodes * self.actions;
        &self.weights[s..s + self.nodes * self.actions]
    }

    #[inline]
    pub fn at(&self, level: usize, node: usize) -> &[f64] {
        let s = node * self.actions;
        &self.level(level)[s..s + self.actions]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Copy with one (identical) entry per theta level.
    pub fn expand(&self, levels: usize) -> Self {
        if !self.stationary {
            return self.clone();
        }
        let mut weights = Vec::with_capacity(levels * self.weights.len());
        for _ in 0..levels {
            weights.extend_from_slice(&self.weights);
        }
        Self { actions: self.actions, nodes: self.nodes, levels, stationary: false, weights }
    }

    /// `(1 - beta) self + beta target`, shapes must agree after expansion.
    pub fn blend(&self, beta: f64, target: &StrategyField) -> Result<Self> {
        let (a, b) = self.aligned(target)?;
        let weights = a.weights.iter().zip(&b.weights).map(|(x, y)| (1.0 - beta) * x + beta * y).collect();
        Ok(Self { weights, ..a })
    }

    /// Largest total-variation distance between the mixed actions at any node.
    pub fn sup_tv_distance(&self, other: &StrategyField) -> Result<f64> {
        let (a, b) = self.aligned(other)?;
        Ok(a.weights
            .chunks(a.actions)
            .zip(b.weights.chunks(b.actions))
            .map(|(x, y)| 0.5 * x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }

    fn aligned(&self, other: &StrategyField) -> Result<(StrategyField, StrategyField)> {
        if self.actions != other.actions || self.nodes != other.nodes {
            return Err(Error::Dimension("strategy fields have different shapes".into()));
        }
        match (self.stationary, other.stationary) {
            (true, true) => Ok((self.clone(), other.clone())),
            (false, false) if self.levels == other.levels => Ok((self.clone(), other.clone())),
            (true, false) => Ok((self.expand(other.levels), other.clone())),
            (false, true) => Ok((self.clone(), other.expand(self.levels))),
            _ => Err(Error::Dimension("strategy fields have different level counts".into())),
        }
    }

    /// Index of the largest weight per node at a level (lowest index on ties).
    pub fn dominant_actions(&self, level: usize) -> Vec<usize> {
        self.level(level)
            .chunks(self.actions)
            .map(|w| {
                let mut best = 0;
                for (u, p) in w.iter().enumerate() {
                    if *p > w[best] {
                        best = u;
                    }
                }
                best
            })
            .collect()
    }
}
