//! Infinite-data training of the second layer of the two-layer linear model
//! `x = W1*(W0* z0 + z1)`, with `W0*` known.
//!
//! Vanilla training fits `W1 W0* z0` and sees only `z0`; RTIL training fits
//! `W1 (W0* z0 + z1)`. Both population objectives are quadratics with closed
//! forms:
//!
//! * vanilla: `‖(W1* − W1) W0*‖²_F + ‖W1*‖²_F`
//! * RTIL:    `‖(W1* − W1) W0*‖²_F + ‖W1* − W1‖²_F`

use crate::error::{Error, Result};
use crate::numkit::{gaussian_matrix, pinv, svd, Matrix, RandomStream};

const MAX_RESAMPLES: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTheoryInstance {
    pub n0: usize,
    pub n1: usize,
    pub nd: usize,
    /// `nd x n1`
    pub w1_star: Matrix,
    /// `n1 x n0`
    pub w0_star: Matrix,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPair {
    pub w1_van: Matrix,
    pub w1_rtil: Matrix,
}

impl LinearTheoryInstance {
    /// Gaussian ground truth with `n0 < n1 < nd`, redrawn until both factors
    /// are numerically full rank.
    pub fn new(n0: usize, n1: usize, nd: usize, seed: u64) -> Result<Self> {
        if !(n0 >= 1 && n0 < n1 && n1 < nd) {
            return Err(Error::contract(format!(
                "dimensions must satisfy 1 <= n0 < n1 < nd, got ({n0}, {n1}, {nd})"
            )));
        }
        for attempt in 0..MAX_RESAMPLES {
            let w0 = gaussian_matrix(n1, n0, &mut RandomStream::new(seed, 2 * attempt));
            let w1 = gaussian_matrix(nd, n1, &mut RandomStream::new(seed, 2 * attempt + 1));
            if is_full_rank(&w0)? && is_full_rank(&w1)? {
                return Ok(LinearTheoryInstance {
                    n0,
                    n1,
                    nd,
                    w1_star: w1,
                    w0_star: w0,
                    seed,
                });
            }
        }
        Err(Error::Singular(format!(
            "no full-rank draw in {MAX_RESAMPLES} attempts for seed {seed}"
        )))
    }

    /// Instance from explicit factors. Only shape compatibility and full rank
    /// are checked, so degenerate orderings such as `n0 = n1` are allowed.
    pub fn from_weights(w1_star: Matrix, w0_star: Matrix) -> Result<Self> {
        if w1_star.cols() != w0_star.rows() {
            return Err(Error::contract(format!(
                "W1* is {:?} but W0* is {:?}",
                w1_star.shape(),
                w0_star.shape()
            )));
        }
        if !is_full_rank(&w0_star)? || !is_full_rank(&w1_star)? {
            return Err(Error::Singular(
                "ground-truth factors must be full rank".into(),
            ));
        }
        Ok(LinearTheoryInstance {
            n0: w0_star.cols(),
            n1: w0_star.rows(),
            nd: w1_star.rows(),
            w1_star,
            w0_star,
            seed: 0,
        })
    }

    /// `x = W1*(W0* z0 + z1)`
    pub fn signal(&self, z0: &[f64], z1: &[f64]) -> Vec<f64> {
        let mut h = self.w0_star.matvec(z0);
        for (hi, zi) in h.iter_mut().zip(z1) {
            *hi += zi;
        }
        self.w1_star.matvec(&h)
    }

    pub fn train_pair(&self) -> Result<TrainedPair> {
        Ok(TrainedPair {
            w1_van: train_vanilla_closed_form(self)?,
            w1_rtil: train_rtil_closed_form(self),
        })
    }
}

fn is_full_rank(m: &Matrix) -> Result<bool> {
    let d = svd(m)?;
    Ok(d.rank(d.default_tol()) == m.rows().min(m.cols()))
}

/// Minimum-Frobenius-norm vanilla solution `W1* W0* (W0*)†`.
pub fn train_vanilla_closed_form(inst: &LinearTheoryInstance) -> Result<Matrix> {
    let p = inst.w0_star.matmul(&pinv(&inst.w0_star, None)?);
    Ok(inst.w1_star.matmul(&p))
}

/// The RTIL objective has the unique minimizer `W1*`.
pub fn train_rtil_closed_form(inst: &LinearTheoryInstance) -> Matrix {
    inst.w1_star.clone()
}

fn check_w1(inst: &LinearTheoryInstance, w1: &Matrix) -> Result<()> {
    if w1.shape() != inst.w1_star.shape() {
        return Err(Error::contract(format!(
            "W1 is {:?}, expected {:?}",
            w1.shape(),
            inst.w1_star.shape()
        )));
    }
    Ok(())
}

pub fn population_loss_vanilla(inst: &LinearTheoryInstance, w1: &Matrix) -> Result<f64> {
    check_w1(inst, w1)?;
    let diff = inst.w1_star.sub(w1);
    let on_range = diff.matmul(&inst.w0_star).frobenius_norm().powi(2);
    Ok(on_range + inst.w1_star.frobenius_norm().powi(2))
}

pub fn population_loss_rtil(inst: &LinearTheoryInstance, w1: &Matrix) -> Result<f64> {
    check_w1(inst, w1)?;
    let diff = inst.w1_star.sub(w1);
    let on_range = diff.matmul(&inst.w0_star).frobenius_norm().powi(2);
    Ok(on_range + diff.frobenius_norm().powi(2))
}

/// `∇ = 2 (W1 − W1*) W0* W0*ᵀ`
pub fn population_grad_vanilla(inst: &LinearTheoryInstance, w1: &Matrix) -> Result<Matrix> {
    check_w1(inst, w1)?;
    let gram = inst.w0_star.matmul(&inst.w0_star.transpose());
    Ok(w1.sub(&inst.w1_star).matmul(&gram).scale(2.0))
}

/// `∇ = 2 (W1 − W1*) (W0* W0*ᵀ + I)`
pub fn population_grad_rtil(inst: &LinearTheoryInstance, w1: &Matrix) -> Result<Matrix> {
    check_w1(inst, w1)?;
    let gram = inst
        .w0_star
        .matmul(&inst.w0_star.transpose())
        .add(&Matrix::identity(inst.n1));
    Ok(w1.sub(&inst.w1_star).matmul(&gram).scale(2.0))
}

/// Largest curvature of the vanilla objective, `2 σ_max(W0*)²`.
pub fn vanilla_smoothness(inst: &LinearTheoryInstance) -> Result<f64> {
    let s = svd(&inst.w0_star)?.s[0];
    Ok(2.0 * s * s)
}

/// Gradient descent on the vanilla population loss from `W1 = 0`.
///
/// Every gradient has the form `G W0* W0*ᵀ`, so iterates stay in the row
/// space spanned by `range(W0*)` and the limit is the minimum-norm
/// solution. `lr = None` uses `1/L`; rates at or above `2/L` are rejected.
pub fn train_vanilla_iterative(
    inst: &LinearTheoryInstance,
    steps: usize,
    lr: Option<f64>,
) -> Result<Matrix> {
    let l = vanilla_smoothness(inst)?;
    let lr = lr.unwrap_or(1.0 / l);
    if lr.is_nan() || lr <= 0.0 || lr >= 2.0 / l {
        return Err(Error::StepSize(format!(
            "learning rate {lr} outside (0, 2/L) with L = {l}"
        )));
    }
    let mut w1 = Matrix::zeros(inst.nd, inst.n1);
    let mut prev = population_loss_vanilla(inst, &w1)?;
    let mut rising = 0;
    for step in 0..steps {
        let g = population_grad_vanilla(inst, &w1)?;
        w1.axpy(-lr, &g);
        let loss = population_loss_vanilla(inst, &w1)?;
        if !loss.is_finite() {
            return Err(Error::numerical("vanilla gradient descent", step));
        }
        rising = if loss > prev { rising + 1 } else { 0 };
        if rising >= 10 {
            return Err(Error::StepSize(format!(
                "loss increased for 10 consecutive steps (step {step})"
            )));
        }
        prev = loss;
    }
    Ok(w1)
}
