//! First-order optimizers: Adam (bias-corrected) and RMSprop.
//!
//! Both discriminator and generator objectives are ascended; callers pass
//! [`Direction::Maximize`] and the step negates gradients internally, so one
//! code path serves both sides.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam {
        beta1: f64,
        beta2: f64,
        lr: f64,
        eps: f64,
    },
    RmsProp {
        decay: f64,
        lr: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    /// Adam with β1 = 0.5, β2 = 0.999, ε = 1e-8.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            beta1: 0.5,
            beta2: 0.999,
            lr,
            eps: 1e-8,
        }
    }

    /// RMSprop with decay 0.9, ε = 1e-8.
    pub fn rmsprop(lr: f64) -> Self {
        OptimizerKind::RmsProp {
            decay: 0.9,
            lr,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::Adam { lr, .. } => lr,
            OptimizerKind::RmsProp { lr, .. } => lr,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| -> Result<()> {
            if !(v >= lo && v < hi) {
                return Err(Error::Config(format!(
                    "{name} must lie in [{lo}, {hi}), got {v}"
                )));
            }
            Ok(())
        };
        match *self {
            OptimizerKind::Adam {
                beta1,
                beta2,
                lr,
                eps,
            } => {
                check("beta1", beta1, 0.0, 1.0)?;
                check("beta2", beta2, 0.0, 1.0)?;
                if lr <= 0.0 || eps <= 0.0 {
                    return Err(Error::Config(format!(
                        "lr and eps must be positive, got lr={lr}, eps={eps}"
                    )));
                }
            }
            OptimizerKind::RmsProp { decay, lr, eps } => {
                check("decay", decay, 0.0, 1.0)?;
                if lr <= 0.0 || eps <= 0.0 {
                    return Err(Error::Config(format!(
                        "lr and eps must be positive, got lr={lr}, eps={eps}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Moment buffers plus step counter for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, param_count: usize) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
        })
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Reinstate moment buffers (checkpoint restore).
    pub fn restore(&mut self, first: Vec<f64>, second: Vec<f64>, step_count: u64) -> Result<()> {
        if first.len() != self.first_moment.len() || second.len() != self.second_moment.len() {
            return Err(Error::Checkpoint(format!(
                "moment length mismatch: got {}/{}, expected {}",
                first.len(),
                second.len(),
                self.first_moment.len()
            )));
        }
        self.first_moment = first;
        self.second_moment = second;
        self.step_count = step_count;
        Ok(())
    }

    /// One in-place update. Gradients are read as d(objective)/d(param);
    /// `Maximize` negates them before the descent rule.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], direction: Direction) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer expects {} parameters, got params={} grads={}",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient {bad} at step {}",
                self.step_count + 1
            )));
        }
        let sign = match direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Adam {
                beta1,
                beta2,
                lr,
                eps,
            } => {
                let bc1 = 1.0 - beta1.powi(self.step_count as i32);
                let bc2 = 1.0 - beta2.powi(self.step_count as i32);
                for i in 0..params.len() {
                    let g = sign * grads[i];
                    self.first_moment[i] = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
                    self.second_moment[i] = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.first_moment[i] / bc1;
                    let v_hat = self.second_moment[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::RmsProp { decay, lr, eps } => {
                for i in 0..params.len() {
                    let g = sign * grads[i];
                    self.second_moment[i] = decay * self.second_moment[i] + (1.0 - decay) * g * g;
                    params[i] -= lr * g / (self.second_moment[i].sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
