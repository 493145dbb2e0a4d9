//! Recovering a signal from measurements `y = A(x)` through a trained
//! generator.
//!
//! Gradient-based solvers minimize `½‖y − A(G(·))‖²`:
//!
//! * [`csgm_invert`] searches over the latent input `z0` only.
//! * [`ilo_invert`] runs the `z0` search, then adds an injection at layer 1,
//!   2, ... and optimizes each in turn with earlier variables frozen.
//! * [`mgan_invert`] optimizes `N` codes and their channel importances
//!   jointly.
//!
//! [`layered_ls_vanilla`] and [`layered_ls_rtil`] are the exact two-stage
//! least-squares solutions for the two-layer linear model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{LatentAssignment, LayeredGenerator, MultiCodeAssignment};
use crate::numkit::{dirichlet_flat, norm, pinv_from_svd, svd, Matrix, RandomStream};
use crate::operators::MeasurementOperator;
use crate::optim::{LrPolicy, Optimizer};
use crate::supervised::{train_vanilla_closed_form, LinearTheoryInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    /// Iterations per stage: `z0` first, then one entry per injected layer.
    /// CSGM and mGANprior use the first entry.
    pub per_layer_iters: Vec<usize>,
    pub lr_init: f64,
    pub lr_policy: LrPolicy,
    pub optimizer: Optimizer,
    pub n_codes: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Layer index separating `g₀` from `g₁` for multi-code inversion.
    pub split_layer: usize,
    /// Keep optimizing earlier latents during later ILO stages.
    pub joint_refine: bool,
    /// Hold channel importances at their initial values.
    pub freeze_importance: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            per_layer_iters: vec![200, 100, 100, 100, 200],
            lr_init: 0.1,
            lr_policy: LrPolicy::RampCosine { warm_frac: 0.05 },
            optimizer: Optimizer::adam(),
            n_codes: 20,
            restarts: 1,
            seed: 0,
            split_layer: 1,
            joint_refine: false,
            freeze_importance: false,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_layer_iters.is_empty() {
            return Err(Error::Config(
                "per_layer_iters must have at least one stage".into(),
            ));
        }
        if !(self.lr_init > 0.0 && self.lr_init.is_finite()) {
            return Err(Error::Config(format!(
                "lr_init {} must be positive",
                self.lr_init
            )));
        }
        if self.n_codes == 0 {
            return Err(Error::Config("n_codes must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if let LrPolicy::RampCosine { warm_frac } = self.lr_policy {
            if !(0.0..=1.0).contains(&warm_frac) {
                return Err(Error::Config(format!(
                    "warm_frac {warm_frac} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Latents {
    Single(LatentAssignment),
    Multi(MultiCodeAssignment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub estimate: Vec<f64>,
    pub latents: Latents,
    /// Residual `‖y − A(x)‖` at initialization and after every update.
    pub residual_history: Vec<f64>,
    /// Residual at the end of each stage.
    pub stage_residuals: Vec<f64>,
    pub final_residual: f64,
    /// Index of the restart that produced this result.
    pub restart: usize,
}

struct Measurement<'a> {
    op: &'a MeasurementOperator,
    y: &'a [f64],
}

impl Measurement<'_> {
    fn new<'a>(
        g: &LayeredGenerator,
        op: &'a MeasurementOperator,
        y: &'a [f64],
    ) -> Result<Measurement<'a>> {
        if op.input_len() != g.output_dim() {
            return Err(Error::contract(format!(
                "operator acts on length {}, generator outputs {}",
                op.input_len(),
                g.output_dim()
            )));
        }
        if y.len() != op.output_len() {
            return Err(Error::contract(format!(
                "{} measurements for an operator with {} outputs",
                y.len(),
                op.output_len()
            )));
        }
        Ok(Measurement { op, y })
    }

    /// Residual norm and the loss cotangent `Aᵀ(A x − y)`.
    fn residual_and_cotangent(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut r = self.op.apply(x)?;
        for (ri, yi) in r.iter_mut().zip(self.y) {
            *ri -= yi;
        }
        Ok((norm(&r), self.op.adjoint(&r)?))
    }

    fn residual(&self, x: &[f64]) -> Result<f64> {
        let ax = self.op.apply(x)?;
        Ok(ax
            .iter()
            .zip(self.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Runs `iters` optimizer updates. `eval` returns the residual and gradient at
/// a parameter vector; each post-update residual is appended to `history`.
fn descend(
    cfg: &InversionConfig,
    iters: usize,
    params: &mut [f64],
    mask: Option<&[bool]>,
    history: &mut Vec<f64>,
    context: &str,
    mut eval: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<f64> {
    let mut state = cfg.optimizer.state(params.len());
    let (mut residual, mut grad) = eval(params)?;
    if !residual.is_finite() {
        return Err(Error::numerical(context, 0));
    }
    for step in 0..iters {
        let lr = cfg.lr_policy.lr_for_step(cfg.lr_init, step, iters);
        state.step(params, &grad, lr, mask);
        (residual, grad) = eval(params)?;
        if !residual.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numerical(context, step + 1));
        }
        history.push(residual);
    }
    Ok(residual)
}

fn pick_best(results: Vec<InversionResult>) -> InversionResult {
    // Strictly lower residual wins, so ties go to the earliest restart.
    results
        .into_iter()
        .reduce(|best, r| {
            if r.final_residual < best.final_residual {
                r
            } else {
                best
            }
        })
        .expect("at least one restart")
}

fn z0_stage(
    g: &LayeredGenerator,
    meas: &Measurement<'_>,
    cfg: &InversionConfig,
    z0: &mut [f64],
    history: &mut Vec<f64>,
) -> Result<f64> {
    history.push(meas.residual(&g.forward(&LatentAssignment::new(z0.to_vec()))?)?);
    descend(
        cfg,
        cfg.per_layer_iters[0],
        z0,
        None,
        history,
        "z0 stage",
        |z| {
            let (x, trace) = g.forward_with_grad(&LatentAssignment::new(z.to_vec()))?;
            let (res, cot) = meas.residual_and_cotangent(&x)?;
            Ok((res, trace.pullback_inputs(&cot).swap_remove(0)))
        },
    )
}

/// Latent-space search `min_z0 ‖y − A(G(z0))‖`, initialized at
/// `z0 ~ N(0, I)`, best of `cfg.restarts`.
pub fn csgm_invert(
    g: &LayeredGenerator,
    op: &MeasurementOperator,
    y: &[f64],
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    cfg.validate()?;
    let meas = Measurement::new(g, op, y)?;
    let mut runs = Vec::with_capacity(cfg.restarts);
    for restart in 0..cfg.restarts {
        let mut stream = RandomStream::new(cfg.seed, restart as u64);
        let mut z0 = stream.normal_vec(g.latent_dim());
        let mut history = Vec::new();
        z0_stage(g, &meas, cfg, &mut z0, &mut history)?;
        let latents = LatentAssignment::new(z0);
        let estimate = g.forward(&latents)?;
        let final_residual = meas.residual(&estimate)?;
        runs.push(InversionResult {
            estimate,
            latents: Latents::Single(latents),
            residual_history: history,
            stage_residuals: vec![final_residual],
            final_residual,
            restart,
        });
    }
    Ok(pick_best(runs))
}

/// Intermediate layer optimization: stage 0 is the `z0` search; stage
/// `k >= 1` adds a zero-initialized injection at the input of layer `k` and
/// optimizes it with earlier variables frozen (or jointly with them when
/// `cfg.joint_refine` is set).
pub fn ilo_invert(
    g: &LayeredGenerator,
    op: &MeasurementOperator,
    y: &[f64],
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    cfg.validate()?;
    let stages = cfg.per_layer_iters.len();
    if stages > g.num_layers() {
        return Err(Error::Config(format!(
            "{stages} stages requested but the generator has only {} layers to inject into",
            g.num_layers()
        )));
    }
    let meas = Measurement::new(g, op, y)?;
    let mut runs = Vec::with_capacity(cfg.restarts);
    for restart in 0..cfg.restarts {
        let mut stream = RandomStream::new(cfg.seed, restart as u64);
        let mut z0 = stream.normal_vec(g.latent_dim());
        let mut history = Vec::new();
        let mut stage_residuals = vec![z0_stage(g, &meas, cfg, &mut z0, &mut history)?];
        let mut injections: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

        for (k, &iters) in cfg.per_layer_iters.iter().enumerate().skip(1) {
            injections.insert(k, vec![0.0; g.input_dim_at(k)]);
            let context = format!("ilo stage {k}");
            let res = if cfg.joint_refine {
                let mut params = pack_joint(&z0, &injections);
                let res = descend(cfg, iters, &mut params, None, &mut history, &context, |p| {
                    let a = unpack_joint(p, z0.len(), &injections);
                    let (x, trace) = g.forward_with_grad(&a)?;
                    let (res, cot) = meas.residual_and_cotangent(&x)?;
                    let grads = trace.pullback_inputs(&cot);
                    let mut flat = grads[0].clone();
                    for &layer in injections.keys() {
                        flat.extend_from_slice(&grads[layer]);
                    }
                    Ok((res, flat))
                })?;
                let a = unpack_joint(&params, z0.len(), &injections);
                z0 = a.z0;
                injections = a.injections;
                res
            } else {
                let mut params = injections[&k].clone();
                let res = descend(cfg, iters, &mut params, None, &mut history, &context, |p| {
                    let mut a = LatentAssignment {
                        z0: z0.clone(),
                        injections: injections.clone(),
                    };
                    a.injections.insert(k, p.to_vec());
                    let (x, trace) = g.forward_with_grad(&a)?;
                    let (res, cot) = meas.residual_and_cotangent(&x)?;
                    Ok((res, trace.pullback_inputs(&cot).swap_remove(k)))
                })?;
                injections.insert(k, params);
                res
            };
            stage_residuals.push(res);
        }

        let latents = LatentAssignment { z0, injections };
        let estimate = g.forward(&latents)?;
        let final_residual = meas.residual(&estimate)?;
        runs.push(InversionResult {
            estimate,
            latents: Latents::Single(latents),
            residual_history: history,
            stage_residuals,
            final_residual,
            restart,
        });
    }
    Ok(pick_best(runs))
}

fn pack_joint(z0: &[f64], injections: &BTreeMap<usize, Vec<f64>>) -> Vec<f64> {
    let mut p = z0.to_vec();
    for v in injections.values() {
        p.extend_from_slice(v);
    }
    p
}

fn unpack_joint(p: &[f64], n0: usize, shape: &BTreeMap<usize, Vec<f64>>) -> LatentAssignment {
    let mut offset = n0;
    let injections = shape
        .iter()
        .map(|(&k, v)| {
            let out = p[offset..offset + v.len()].to_vec();
            offset += v.len();
            (k, out)
        })
        .collect();
    LatentAssignment {
        z0: p[..n0].to_vec(),
        injections,
    }
}

/// Initial multi-code state: `N` standard normal codes drawn first, then a
/// flat Dirichlet `α'` with `α^k = α'_k · 1`.
pub fn mgan_init(
    g: &LayeredGenerator,
    cfg: &InversionConfig,
    stream: &mut RandomStream,
) -> Result<MultiCodeAssignment> {
    let channels = g.split_channels(cfg.split_layer)?;
    let codes: Vec<Vec<f64>> = (0..cfg.n_codes)
        .map(|_| stream.normal_vec(g.latent_dim()))
        .collect();
    let weights = dirichlet_flat(cfg.n_codes, stream);
    let importance = weights.iter().map(|&w| vec![w; channels]).collect();
    Ok(MultiCodeAssignment {
        codes,
        importance,
        split_layer: cfg.split_layer,
    })
}

/// Multi-code inversion: joint, unconstrained descent over all codes and
/// importance vectors (importances optionally frozen).
pub fn mgan_invert(
    g: &LayeredGenerator,
    op: &MeasurementOperator,
    y: &[f64],
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    cfg.validate()?;
    let meas = Measurement::new(g, op, y)?;
    let n0 = g.latent_dim();
    let channels = g.split_channels(cfg.split_layer)?;
    let n = cfg.n_codes;
    let code_len = n * n0;
    let mask: Option<Vec<bool>> = cfg
        .freeze_importance
        .then(|| (0..code_len + n * channels).map(|i| i < code_len).collect());

    let unpack = |p: &[f64]| MultiCodeAssignment {
        codes: p[..code_len].chunks(n0).map(<[f64]>::to_vec).collect(),
        importance: p[code_len..]
            .chunks(channels)
            .map(<[f64]>::to_vec)
            .collect(),
        split_layer: cfg.split_layer,
    };

    let mut runs = Vec::with_capacity(cfg.restarts);
    for restart in 0..cfg.restarts {
        let mut stream = RandomStream::new(cfg.seed, restart as u64);
        let init = mgan_init(g, cfg, &mut stream)?;
        let mut params: Vec<f64> = init
            .codes
            .iter()
            .chain(&init.importance)
            .flatten()
            .copied()
            .collect();
        let mut history = vec![meas.residual(&g.forward_multicode(&init)?)?];
        let res = descend(
            cfg,
            cfg.per_layer_iters[0],
            &mut params,
            mask.as_deref(),
            &mut history,
            "mgan",
            |p| {
                let m = unpack(p);
                let mut residual = 0.0;
                let mut cot_err = None;
                let (_, grads) = g.multicode_grad(
                    &m,
                    |x| match meas.residual_and_cotangent(x) {
                        Ok((r, c)) => {
                            residual = r;
                            c
                        }
                        Err(e) => {
                            cot_err = Some(e);
                            vec![0.0; x.len()]
                        }
                    },
                    false,
                )?;
                if let Some(e) = cot_err {
                    return Err(e);
                }
                let flat = grads
                    .codes
                    .iter()
                    .chain(&grads.importance)
                    .flatten()
                    .copied()
                    .collect();
                Ok((residual, flat))
            },
        )?;
        let latents = unpack(&params);
        let estimate = g.forward_multicode(&latents)?;
        let final_residual = meas.residual(&estimate)?;
        debug_assert!((final_residual - res).abs() <= 1e-9 * (1.0 + res));
        runs.push(InversionResult {
            estimate,
            latents: Latents::Multi(latents),
            residual_history: history,
            stage_residuals: vec![final_residual],
            final_residual,
            restart,
        });
    }
    Ok(pick_best(runs))
}

/// Closed-form two-stage solution for the linear model `W1 (W0* z0 + z1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSolution {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
    pub estimate: Vec<f64>,
}

/// Precomputed pseudoinverses for repeated layered least-squares solves with
/// a fixed `(W1, W0*, A)`.
#[derive(Debug, Clone)]
pub struct LayeredLsSolver {
    w1: Matrix,
    w0: Matrix,
    a: Matrix,
    stage0: Matrix,
    stage0_pinv: Matrix,
    stage1_pinv: Matrix,
}

/// Relative cut-off for singular values that are zero by construction
/// (e.g. `A W1_van` has exact rank `n0`).
const STRUCTURAL_RANK_TOL: f64 = 1e-9;

impl LayeredLsSolver {
    pub fn new(w1: Matrix, w0: Matrix, a: Matrix) -> Result<Self> {
        if a.cols() != w1.rows() || w1.cols() != w0.rows() {
            return Err(Error::contract(format!(
                "incompatible shapes A {:?}, W1 {:?}, W0 {:?}",
                a.shape(),
                w1.shape(),
                w0.shape()
            )));
        }
        let a_w1 = a.matmul(&w1);
        let stage0 = a_w1.matmul(&w0);
        let d0 = svd(&stage0)?;
        if d0.rank(d0.default_tol()) < w0.cols() {
            return Err(Error::Singular(format!(
                "A·W1·W0 ({}x{}) is rank deficient",
                stage0.rows(),
                stage0.cols()
            )));
        }
        let stage0_pinv = pinv_from_svd(&d0, None);
        let d1 = svd(&a_w1)?;
        let tol = STRUCTURAL_RANK_TOL * d1.s.first().copied().unwrap_or(0.0);
        let stage1_pinv = pinv_from_svd(&d1, Some(tol));
        Ok(LayeredLsSolver {
            w1,
            w0,
            a,
            stage0,
            stage0_pinv,
            stage1_pinv,
        })
    }

    pub fn vanilla(inst: &LinearTheoryInstance, a: &Matrix) -> Result<Self> {
        LayeredLsSolver::new(
            train_vanilla_closed_form(inst)?,
            inst.w0_star.clone(),
            a.clone(),
        )
    }

    /// RTIL-trained model (`W1 = W1*`). Also requires `A W1*` to have full
    /// rank `min(m, n1)`.
    pub fn rtil(inst: &LinearTheoryInstance, a: &Matrix) -> Result<Self> {
        let a_w1 = a.matmul(&inst.w1_star);
        let d = svd(&a_w1)?;
        if d.rank(d.default_tol()) < a_w1.rows().min(a_w1.cols()) {
            return Err(Error::Singular("A·W1* is rank deficient".into()));
        }
        LayeredLsSolver::new(inst.w1_star.clone(), inst.w0_star.clone(), a.clone())
    }

    pub fn measurement_matrix(&self) -> &Matrix {
        &self.a
    }

    /// `z0 = (A W1 W0)† y`, then the minimum-norm
    /// `z1 = (A W1)† (y − A W1 W0 z0)`.
    pub fn solve(&self, y: &[f64]) -> Result<LayeredSolution> {
        if y.len() != self.a.rows() {
            return Err(Error::contract(format!(
                "{} measurements, A has {} rows",
                y.len(),
                self.a.rows()
            )));
        }
        let z0 = self.stage0_pinv.matvec(y);
        let fitted = self.stage0.matvec(&z0);
        let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let z1 = self.stage1_pinv.matvec(&r);
        let mut h = self.w0.matvec(&z0);
        for (hi, zi) in h.iter_mut().zip(&z1) {
            *hi += zi;
        }
        Ok(LayeredSolution {
            estimate: self.w1.matvec(&h),
            z0,
            z1,
        })
    }
}

/// Sequential least squares through the minimum-norm vanilla model
/// `W1_van = W1* W0* (W0*)†`.
pub fn layered_ls_vanilla(
    inst: &LinearTheoryInstance,
    a: &Matrix,
    y: &[f64],
) -> Result<LayeredSolution> {
    LayeredLsSolver::vanilla(inst, a)?.solve(y)
}

/// Sequential least squares through the RTIL model `W1 = W1*`.
pub fn layered_ls_rtil(
    inst: &LinearTheoryInstance,
    a: &Matrix,
    y: &[f64],
) -> Result<LayeredSolution> {
    LayeredLsSolver::rtil(inst, a)?.solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::gaussian_matrix;

    fn linear_problem(seed: u64, m: usize) -> (LayeredGenerator, MeasurementOperator, Vec<f64>) {
        let inst = LinearTheoryInstance::new(3, 6, 12, seed).unwrap();
        let g =
            LayeredGenerator::two_layer_linear(inst.w0_star.clone(), inst.w1_star.clone()).unwrap();
        let mut s = RandomStream::new(seed, 99);
        let op = MeasurementOperator::gaussian(m, 12, &mut s);
        let x = g.forward(&LatentAssignment::new(s.normal_vec(3))).unwrap();
        let y = op.apply(&x).unwrap();
        (g, op, y)
    }

    fn sgd(iters: Vec<usize>, lr: f64) -> InversionConfig {
        InversionConfig {
            per_layer_iters: iters,
            lr_init: lr,
            lr_policy: LrPolicy::Constant,
            optimizer: Optimizer::Sgd,
            ..InversionConfig::default()
        }
    }

    fn safe_lr(g: &LayeredGenerator, op: &MeasurementOperator) -> f64 {
        let MeasurementOperator::Gaussian(a) = op else {
            unreachable!()
        };
        let w = g.layers()[1].weight().matmul(g.layers()[0].weight());
        let s = crate::numkit::spectral_norm(&a.matmul(&w)).unwrap();
        1.0 / (s * s)
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let (g, op, y) = linear_problem(1, 8);
        let cfg = sgd(vec![0], 0.1);
        let r = csgm_invert(&g, &op, &y, &cfg).unwrap();
        let z = RandomStream::new(cfg.seed, 0).normal_vec(3);
        assert_eq!(r.latents, Latents::Single(LatentAssignment::new(z.clone())));
        assert_eq!(r.estimate, g.forward(&LatentAssignment::new(z)).unwrap());
        assert_eq!(r.residual_history.len(), 1);
    }

    #[test]
    fn csgm_history_is_monotone_under_safe_sgd() {
        let (g, op, y) = linear_problem(2, 8);
        let cfg = sgd(vec![300], safe_lr(&g, &op));
        let r = csgm_invert(&g, &op, &y, &cfg).unwrap();
        for w in r.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(r.final_residual < 1e-6, "{}", r.final_residual);
    }

    #[test]
    fn final_residual_is_recomputable() {
        let (g, op, y) = linear_problem(3, 8);
        let r = ilo_invert(
            &g,
            &op,
            &y,
            &InversionConfig {
                per_layer_iters: vec![50, 50],
                ..InversionConfig::default()
            },
        )
        .unwrap();
        let ax = op.apply(&r.estimate).unwrap();
        let direct = ax
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((direct - r.final_residual).abs() < 1e-10);
    }

    #[test]
    fn too_many_stages_is_config_error() {
        let (g, op, y) = linear_problem(4, 8);
        assert!(matches!(
            ilo_invert(&g, &op, &y, &sgd(vec![1, 1, 1], 0.1)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            csgm_invert(&g, &op, &y, &sgd(vec![], 0.1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn divergence_reports_iteration() {
        let (g, op, y) = linear_problem(5, 8);
        let err = csgm_invert(&g, &op, &y, &sgd(vec![5000], 1e6)).unwrap_err();
        assert!(matches!(err, Error::Numerical { iteration, .. } if iteration > 0));
    }

    #[test]
    fn restarts_pick_lowest_residual() {
        let (g, op, y) = linear_problem(6, 8);
        let mut cfg = sgd(vec![3], safe_lr(&g, &op));
        cfg.restarts = 4;
        let best = csgm_invert(&g, &op, &y, &cfg).unwrap();
        let all: Vec<f64> = (0..4)
            .map(|r| {
                let mut c = cfg.clone();
                c.restarts = r + 1;
                csgm_invert(&g, &op, &y, &c).unwrap().final_residual
            })
            .collect();
        assert_eq!(best.final_residual, *all.last().unwrap());
        assert!(all.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn mgan_importance_init_on_simplex() {
        let (g, _, _) = linear_problem(7, 8);
        let cfg = InversionConfig {
            n_codes: 5,
            ..InversionConfig::default()
        };
        let m = mgan_init(&g, &cfg, &mut RandomStream::new(1, 0)).unwrap();
        let total: f64 = m.importance.iter().map(|a| a[0]).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for a in &m.importance {
            assert!(a.iter().all(|&v| v == a[0]));
        }
    }

    #[test]
    fn rtil_layered_collapses_without_z1() {
        let inst = LinearTheoryInstance::new(2, 4, 10, 8).unwrap();
        let a = gaussian_matrix(6, 10, &mut RandomStream::new(8, 50));
        let z0 = vec![0.3, -1.2];
        let y = a.matvec(&inst.signal(&z0, &[0.0; 4]));
        let sol = layered_ls_rtil(&inst, &a, &y).unwrap();
        for (u, v) in sol.z0.iter().zip(&z0) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(sol.z1.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn layered_shape_errors() {
        let inst = LinearTheoryInstance::new(2, 4, 10, 9).unwrap();
        let a = gaussian_matrix(6, 9, &mut RandomStream::new(9, 50));
        assert!(layered_ls_vanilla(&inst, &a, &[0.0; 6]).is_err());
        let a = gaussian_matrix(6, 10, &mut RandomStream::new(9, 50));
        assert!(layered_ls_vanilla(&inst, &a, &[0.0; 5]).is_err());
    }

    #[test]
    fn rank_deficient_stage_zero_is_singular() {
        let inst = LinearTheoryInstance::new(2, 4, 10, 10).unwrap();
        let a = Matrix::zeros(6, 10);
        assert!(matches!(
            layered_ls_vanilla(&inst, &a, &[0.0; 6]),
            Err(Error::Singular(_))
        ));
    }
}
