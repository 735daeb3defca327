use crate::nn::network::{Gradients, NetworkSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self { algorithm: Algorithm::Sgd, learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self { algorithm: Algorithm::Adam, learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.algorithm == Algorithm::Adam {
            for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
                if !(b > 0.0 && b < 1.0) {
                    return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
                }
            }
            if !(self.epsilon > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
            }
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

/// Optimizer state: step count and Adam moment estimates.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, steps: 0, first: Vec::new(), second: Vec::new() })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step_network(&mut self, net: &mut NetworkSpec, grads: &Gradients) -> Result<()> {
        self.step(net.parameters_mut(), &grads.tensors)
    }

    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::Shape("parameter and gradient arrays do not line up".into()));
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != grads.len() || self.first.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
            return Err(Error::Shape("optimizer state belongs to a different parameter set".into()));
        }
        self.steps += 1;
        let c = self.config;
        match c.algorithm {
            Algorithm::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.iter_mut().zip(g) {
                        *pv -= c.learning_rate * gv;
                    }
                }
            }
            Algorithm::Adam => {
                let t = self.steps as i32;
                let correct1 = 1.0 - c.beta1.powi(t);
                let correct2 = 1.0 - c.beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for i in 0..g.len() {
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                        let m_hat = m[i] / correct1;
                        let v_hat = v[i] / correct2;
                        p[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
