//! First-order optimizers and learning-rate schedules shared by inversion
//! and training.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrPolicy {
    Constant,
    /// Linear warm-up over the first `warm_frac` of the budget, then a
    /// cosine decay to zero.
    RampCosine {
        warm_frac: f64,
    },
}

impl LrPolicy {
    /// Learning rate at step `t` of `total`.
    ///
    /// Ramp: `lr·t/warm` for `t <= warm`, then
    /// `lr·½(1 + cos(π(t − warm)/(total − warm)))`, with `warm = warm_frac·total`.
    pub fn lr_at(&self, lr_init: f64, t: f64, total: f64) -> f64 {
        match *self {
            LrPolicy::Constant => lr_init,
            LrPolicy::RampCosine { warm_frac } => {
                let warm = warm_frac * total;
                if warm > 0.0 && t <= warm {
                    lr_init * t / warm
                } else if total > warm {
                    let phase = ((t - warm) / (total - warm)).clamp(0.0, 1.0);
                    lr_init * 0.5 * (1.0 + (PI * phase).cos())
                } else {
                    0.0
                }
            }
        }
    }

    /// Rate used for update `step` (0-based) of a `total`-step run. Updates
    /// sample the schedule at `t = step + 1`, so a warm-up never yields a
    /// zero first step.
    pub fn lr_for_step(&self, lr_init: f64, step: usize, total: usize) -> f64 {
        self.lr_at(lr_init, (step + 1) as f64, total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn state(&self, n: usize) -> OptimizerState {
        OptimizerState {
            optimizer: *self,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// Per-parameter-vector optimizer memory.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    optimizer: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    /// One descent step on `params` along `grad`. Entries where `mask` is
    /// false are left untouched (frozen parameters).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, mask: Option<&[bool]>) {
        debug_assert_eq!(params.len(), grad.len());
        let active = |i: usize| mask.is_none_or(|m| m[i]);
        match self.optimizer {
            Optimizer::Sgd => {
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    if active(i) {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t);
                let bc2 = 1.0 - beta2.powi(self.t);
                for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
                    if !active(i) {
                        continue;
                    }
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}
