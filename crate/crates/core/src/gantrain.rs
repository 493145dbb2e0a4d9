//! Adversarial training of a shared-weight pair `G(z0)` and
//! `G̃(z0, z1) = g₁(z1 + g₀(z0))` against one discriminator.
//!
//! Discriminator objective (minimized):
//! `−E log D(x) − ½E log(1 − D(G(z0))) − ½E log(1 − D(G̃(z0, z1)))`.
//! Generator objective (non-saturating, default):
//! `−½E log D(G(z0)) − ½E log D(G̃(z0, z1))`.
//!
//! With `z1 = 0` both fake terms coincide and this is ordinary GAN training;
//! [`TrainMode::Vanilla`] runs exactly that for paired comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{LatentAssignment, LayerKind, LayeredGenerator, DEFAULT_LEAK};
use crate::numkit::{gaussian_matrix, RandomStream};
use crate::optim::{Optimizer, OptimizerState};
use crate::supervised::LinearTheoryInstance;

/// Leaky-ReLU MLP ending in a single linear logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: LayeredGenerator,
}

impl Discriminator {
    pub fn new(net: LayeredGenerator) -> Result<Self> {
        let layers = net.layers();
        let last = layers.last().expect("generator has layers");
        if last.output_dim() != 1 || last.kind() != LayerKind::Linear {
            return Err(Error::contract(
                "discriminator must end in a 1-dim linear layer",
            ));
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| !matches!(l.kind(), LayerKind::DenseLeakyRelu { .. }))
        {
            return Err(Error::contract(
                "discriminator hidden layers must be dense_leakyrelu",
            ));
        }
        Ok(Discriminator { net })
    }

    pub fn random(
        input_dim: usize,
        hidden: &[usize],
        leak: f64,
        stream: &mut RandomStream,
    ) -> Result<Self> {
        Discriminator::new(LayeredGenerator::random_mlp(
            input_dim, hidden, 1, leak, stream,
        )?)
    }

    pub fn input_dim(&self) -> usize {
        self.net.latent_dim()
    }

    pub fn network(&self) -> &LayeredGenerator {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut LayeredGenerator {
        &mut self.net
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&LatentAssignment::new(x.to_vec()))?[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `x = W1*(W0* z0 + z1)` with a seeded Gaussian ground truth.
    LinearTeacher {
        n0: usize,
        n1: usize,
        nd: usize,
        seed: u64,
    },
    /// Uniform over `k` components with `N(0, I)` means and noise scale 0.1.
    GaussianMixture { k: usize, dim: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub enum Dataset {
    LinearTeacher(LinearTheoryInstance),
    GaussianMixture { means: Vec<Vec<f64>> },
}

impl Dataset {
    pub fn from_spec(spec: &DataSpec) -> Result<Self> {
        match *spec {
            DataSpec::LinearTeacher { n0, n1, nd, seed } => Ok(Dataset::LinearTeacher(
                LinearTheoryInstance::new(n0, n1, nd, seed)?,
            )),
            DataSpec::GaussianMixture { k, dim, seed } => {
                if k == 0 || dim == 0 {
                    return Err(Error::Config(
                        "gaussian mixture needs k >= 1 and dim >= 1".into(),
                    ));
                }
                let mut s = RandomStream::new(seed, 0);
                Ok(Dataset::GaussianMixture {
                    means: (0..k).map(|_| s.normal_vec(dim)).collect(),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::LinearTeacher(inst) => inst.nd,
            Dataset::GaussianMixture { means } => means[0].len(),
        }
    }
}

pub fn sample_synthetic(data: &Dataset, n: usize, stream: &mut RandomStream) -> Vec<Vec<f64>> {
    match data {
        Dataset::LinearTeacher(inst) => (0..n)
            .map(|_| {
                let z0 = stream.normal_vec(inst.n0);
                let z1 = stream.normal_vec(inst.n1);
                inst.signal(&z0, &z1)
            })
            .collect(),
        Dataset::GaussianMixture { means } => (0..n)
            .map(|_| {
                let mean = &means[stream.below(means.len())];
                mean.iter().map(|m| m + 0.1 * stream.normal()).collect()
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenLoss {
    #[default]
    NonSaturating,
    /// `½E log(1 − D(G)) + ½E log(1 − D(G̃))`, the minimax value itself.
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    Rtil,
    /// `z1` held at zero: only the base model is trained.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `n0 → n1 → nd` bias-free linear layers matching a linear teacher. The
    /// first layer starts at `W0*`.
    Linear {
        #[serde(default)]
        train_first_layer: bool,
    },
    Mlp {
        latent_dim: usize,
        hidden: Vec<usize>,
        #[serde(default = "default_leak")]
        leak: f64,
    },
}

fn default_leak() -> f64 {
    DEFAULT_LEAK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    pub steps: usize,
    pub batch: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    #[serde(default = "default_one")]
    pub disc_steps_per_gen: usize,
    pub data: DataSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: TrainMode,
    #[serde(default)]
    pub gen_loss: GenLoss,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    #[serde(default = "default_disc_hidden")]
    pub disc_hidden: Vec<usize>,
    /// `None` picks [`GeneratorSpec::Linear`] for a linear teacher.
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Layer whose input receives `z1`.
    #[serde(default = "default_one")]
    pub injection_layer: usize,
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_one() -> usize {
    1
}

fn default_optimizer() -> Optimizer {
    Optimizer::Sgd
}

fn default_disc_hidden() -> Vec<usize> {
    vec![16, 16]
}

impl TrainConfig {
    pub fn new(data: DataSpec) -> Self {
        TrainConfig {
            sigma2: default_sigma2(),
            steps: 200,
            batch: 32,
            lr_g: 1e-2,
            lr_d: 1e-2,
            disc_steps_per_gen: 1,
            data,
            seed: 0,
            mode: TrainMode::Rtil,
            gen_loss: GenLoss::NonSaturating,
            optimizer: default_optimizer(),
            disc_hidden: default_disc_hidden(),
            generator: None,
            injection_layer: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 = {} must be positive", self.sigma2));
        }
        if self.batch < 2 {
            return bad(format!("batch = {} must be at least 2", self.batch));
        }
        if [self.lr_g, self.lr_d]
            .iter()
            .any(|r| r.is_nan() || *r <= 0.0)
        {
            return bad("learning rates must be positive".into());
        }
        if self.disc_steps_per_gen == 0 {
            return bad("disc_steps_per_gen must be at least 1".into());
        }
        Ok(())
    }
}

/// Options shared by every loss evaluation of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub injection_layer: usize,
    pub gen_loss: GenLoss,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            injection_layer: 1,
            gen_loss: GenLoss::NonSaturating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub d_loss: f64,
    pub g_loss: f64,
}

/// Flat parameter gradients (orders of [`LayeredGenerator::params`]).
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub d_loss_wrt_disc: Vec<f64>,
    pub d_loss_wrt_gen: Vec<f64>,
    pub g_loss_wrt_disc: Vec<f64>,
    pub g_loss_wrt_gen: Vec<f64>,
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn rtil_loss_terms(
    d: &Discriminator,
    g: &LayeredGenerator,
    real: &[Vec<f64>],
    z0: &[Vec<f64>],
    z1: &[Vec<f64>],
    spec: &LossSpec,
) -> Result<LossTerms> {
    evaluate(d, g, real, z0, z1, spec, false).map(|(t, _)| t)
}

pub fn rtil_loss_and_grads(
    d: &Discriminator,
    g: &LayeredGenerator,
    real: &[Vec<f64>],
    z0: &[Vec<f64>],
    z1: &[Vec<f64>],
    spec: &LossSpec,
) -> Result<(LossTerms, LossGradients)> {
    evaluate(d, g, real, z0, z1, spec, true).map(|(t, g)| (t, g.expect("requested")))
}

fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    crate::numkit::axpy(acc, alpha, x)
}

fn evaluate(
    d: &Discriminator,
    g: &LayeredGenerator,
    real: &[Vec<f64>],
    z0: &[Vec<f64>],
    z1: &[Vec<f64>],
    spec: &LossSpec,
    with_grads: bool,
) -> Result<(LossTerms, Option<LossGradients>)> {
    if real.is_empty() || z0.is_empty() || z0.len() != z1.len() {
        return Err(Error::contract(format!(
            "batch shapes: {} real, {} z0, {} z1",
            real.len(),
            z0.len(),
            z1.len()
        )));
    }
    if g.output_dim() != d.input_dim() {
        return Err(Error::contract(
            "generator output and discriminator input differ",
        ));
    }
    if spec.injection_layer >= g.num_layers() {
        return Err(Error::contract(format!(
            "injection layer {} outside generator with {} layers",
            spec.injection_layer,
            g.num_layers()
        )));
    }

    let mut d_loss = 0.0;
    let mut g_loss = 0.0;
    let mut grads = with_grads.then(|| LossGradients {
        d_loss_wrt_disc: vec![0.0; d.net.param_count()],
        d_loss_wrt_gen: vec![0.0; g.param_count()],
        g_loss_wrt_disc: vec![0.0; d.net.param_count()],
        g_loss_wrt_gen: vec![0.0; g.param_count()],
    });

    let n_real = real.len() as f64;
    for x in real {
        let (out, trace) = d.net.forward_with_grad(&LatentAssignment::new(x.clone()))?;
        let l = out[0];
        d_loss += softplus(-l) / n_real;
        if let Some(gr) = grads.as_mut() {
            let p = trace.pullback(&[1.0]).params_flat();
            axpy(&mut gr.d_loss_wrt_disc, (sigmoid(l) - 1.0) / n_real, &p);
        }
    }

    let n_fake = z0.len() as f64;
    for (z0_i, z1_i) in z0.iter().zip(z1) {
        let base = LatentAssignment::new(z0_i.clone());
        let tilde = base
            .clone()
            .with_injection(spec.injection_layer, z1_i.clone());
        for a in [&base, &tilde] {
            let (x, g_trace) = g.forward_with_grad(a)?;
            let (out, d_trace) = d.net.forward_with_grad(&LatentAssignment::new(x))?;
            let l = out[0];
            d_loss += 0.5 * softplus(l) / n_fake;
            let (g_term, g_coef) = match spec.gen_loss {
                GenLoss::NonSaturating => (softplus(-l), sigmoid(l) - 1.0),
                GenLoss::Saturating => (-softplus(l), -sigmoid(l)),
            };
            g_loss += 0.5 * g_term / n_fake;
            if let Some(gr) = grads.as_mut() {
                let d_coef = 0.5 * sigmoid(l) / n_fake;
                let g_coef = 0.5 * g_coef / n_fake;
                let dg = d_trace.pullback(&[1.0]);
                let p_disc = dg.params_flat();
                let p_gen = g_trace.pullback(dg.z0()).params_flat();
                axpy(&mut gr.d_loss_wrt_disc, d_coef, &p_disc);
                axpy(&mut gr.g_loss_wrt_disc, g_coef, &p_disc);
                axpy(&mut gr.d_loss_wrt_gen, d_coef, &p_gen);
                axpy(&mut gr.g_loss_wrt_gen, g_coef, &p_gen);
            }
        }
    }
    if !d_loss.is_finite() || !g_loss.is_finite() {
        return Err(Error::numerical("rtil loss", 0));
    }
    Ok((LossTerms { d_loss, g_loss }, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: LayeredGenerator,
    pub discriminator: Discriminator,
    pub history: Vec<StepRecord>,
}

/// Initial generator for a config, together with its trainable-parameter mask.
pub fn init_generator(
    cfg: &TrainConfig,
    data: &Dataset,
    stream: &mut RandomStream,
) -> Result<(LayeredGenerator, Vec<bool>)> {
    let spec = match (&cfg.generator, data) {
        (Some(spec), _) => spec.clone(),
        (None, Dataset::LinearTeacher(_)) => GeneratorSpec::Linear {
            train_first_layer: false,
        },
        (None, Dataset::GaussianMixture { .. }) => {
            return Err(Error::Config(
                "generator spec required for gaussian_mixture data".into(),
            ))
        }
    };
    match spec {
        GeneratorSpec::Linear { train_first_layer } => {
            let Dataset::LinearTeacher(inst) = data else {
                return Err(Error::Config(
                    "linear generator requires linear_teacher data".into(),
                ));
            };
            let w1 = gaussian_matrix(inst.nd, inst.n1, stream).scale(1.0 / (inst.n1 as f64).sqrt());
            let g = LayeredGenerator::two_layer_linear(inst.w0_star.clone(), w1)?;
            let mut mask = vec![true; g.param_count()];
            if !train_first_layer {
                for i in g.param_range(0) {
                    mask[i] = false;
                }
            }
            Ok((g, mask))
        }
        GeneratorSpec::Mlp {
            latent_dim,
            hidden,
            leak,
        } => {
            let g = LayeredGenerator::random_mlp(latent_dim, &hidden, data.dim(), leak, stream)?;
            let n = g.param_count();
            Ok((g, vec![true; n]))
        }
    }
}

/// Alternating minimax training. Streams under `cfg.seed`: 0 initializes the
/// networks, 1 draws real data, 2 draws latents. `z1` is always drawn (and
/// zeroed in vanilla mode) so paired runs see identical random numbers.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = Dataset::from_spec(&cfg.data)?;
    let mut init_stream = RandomStream::new(cfg.seed, 0);
    let mut data_stream = RandomStream::new(cfg.seed, 1);
    let mut latent_stream = RandomStream::new(cfg.seed, 2);

    let (mut g, g_mask) = init_generator(cfg, &data, &mut init_stream)?;
    let mut d =
        Discriminator::random(data.dim(), &cfg.disc_hidden, DEFAULT_LEAK, &mut init_stream)?;
    if cfg.injection_layer == 0 || cfg.injection_layer >= g.num_layers() {
        return Err(Error::Config(format!(
            "injection_layer {} must lie in 1..{}",
            cfg.injection_layer,
            g.num_layers()
        )));
    }
    let spec = LossSpec {
        injection_layer: cfg.injection_layer,
        gen_loss: cfg.gen_loss,
    };
    let n0 = g.latent_dim();
    let n1 = g.input_dim_at(cfg.injection_layer);
    let sigma = cfg.sigma2.sqrt();

    let mut g_state: OptimizerState = cfg.optimizer.state(g.param_count());
    let mut d_state: OptimizerState = cfg.optimizer.state(d.net.param_count());
    let mut history = Vec::with_capacity(cfg.steps);

    let draw_latents = |stream: &mut RandomStream| {
        let z0: Vec<Vec<f64>> = (0..cfg.batch).map(|_| stream.normal_vec(n0)).collect();
        let z1: Vec<Vec<f64>> = (0..cfg.batch)
            .map(|_| {
                let v = stream.normal_vec(n1);
                match cfg.mode {
                    TrainMode::Rtil => v.into_iter().map(|x| sigma * x).collect(),
                    TrainMode::Vanilla => vec![0.0; n1],
                }
            })
            .collect();
        (z0, z1)
    };

    for step in 0..cfg.steps {
        let mut d_loss = 0.0;
        for _ in 0..cfg.disc_steps_per_gen {
            let real = sample_synthetic(&data, cfg.batch, &mut data_stream);
            let (z0, z1) = draw_latents(&mut latent_stream);
            let (terms, grads) = rtil_loss_and_grads(&d, &g, &real, &z0, &z1, &spec)
                .map_err(|e| at_step(e, step))?;
            d_loss = terms.d_loss;
            let mut p = d.net.params();
            d_state.step(&mut p, &grads.d_loss_wrt_disc, cfg.lr_d, None);
            d.net.set_params(&p)?;
        }
        let real = sample_synthetic(&data, cfg.batch, &mut data_stream);
        let (z0, z1) = draw_latents(&mut latent_stream);
        let (terms, grads) =
            rtil_loss_and_grads(&d, &g, &real, &z0, &z1, &spec).map_err(|e| at_step(e, step))?;
        let mut p = g.params();
        g_state.step(&mut p, &grads.g_loss_wrt_gen, cfg.lr_g, Some(&g_mask));
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("generator update", step));
        }
        g.set_params(&p)?;
        history.push(StepRecord {
            step,
            d_loss,
            g_loss: terms.g_loss,
        });
    }
    Ok(TrainOutcome {
        generator: g,
        discriminator: d,
        history,
    })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Numerical { context, .. } => Error::Numerical {
            context,
            iteration: step,
        },
        other => other,
    }
}

/// `step,d_loss,g_loss` rows with a header line.
pub fn history_csv(history: &[StepRecord]) -> String {
    let mut out = String::from("step,d_loss,g_loss\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.step, r.d_loss, r.g_loss));
    }
    out
}
