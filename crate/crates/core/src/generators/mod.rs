//! Layered generators `G = g₁ ∘ g₀` with additive intermediate injections,
//! multi-code composition, and exact reverse-mode gradients.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RandomStream};

pub use io::{load_model, save_model};

/// Slope used for leaky ReLU layers when none is given.
pub const DEFAULT_LEAK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Linear,
    DenseLeakyRelu { leak: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    kind: LayerKind,
    weight: Matrix,
    /// Empty when the layer has no bias.
    bias: Vec<f64>,
}

impl Layer {
    pub fn linear(weight: Matrix) -> Self {
        Layer {
            kind: LayerKind::Linear,
            weight,
            bias: Vec::new(),
        }
    }

    pub fn new(kind: LayerKind, weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if !bias.is_empty() && bias.len() != weight.rows() {
            return Err(Error::contract(format!(
                "bias has {} entries for a layer with {} outputs",
                bias.len(),
                weight.rows()
            )));
        }
        if let LayerKind::DenseLeakyRelu { leak } = kind {
            if !(leak > 0.0 && leak < 1.0) {
                return Err(Error::contract(format!("leak {leak} outside (0, 1)")));
            }
        }
        if !weight.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::contract("layer parameters must be finite"));
        }
        Ok(Layer { kind, weight, bias })
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    /// Returns `(pre_activation, output)`.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = self.weight.matvec(x);
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let out = match self.kind {
            LayerKind::Linear => pre.clone(),
            LayerKind::DenseLeakyRelu { leak } => pre
                .iter()
                .map(|&v| if v > 0.0 { v } else { leak * v })
                .collect(),
        };
        (pre, out)
    }

    /// Cotangent w.r.t. the pre-activation. The derivative at 0 is the leak.
    fn activation_pullback(&self, pre: &[f64], cot: &[f64]) -> Vec<f64> {
        match self.kind {
            LayerKind::Linear => cot.to_vec(),
            LayerKind::DenseLeakyRelu { leak } => pre
                .iter()
                .zip(cot)
                .map(|(&p, &c)| if p > 0.0 { c } else { leak * c })
                .collect(),
        }
    }
}

/// Latent input plus additive injections, keyed by the index of the layer
/// whose input they are added to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentAssignment {
    pub z0: Vec<f64>,
    #[serde(default)]
    pub injections: BTreeMap<usize, Vec<f64>>,
}

impl LatentAssignment {
    pub fn new(z0: Vec<f64>) -> Self {
        LatentAssignment {
            z0,
            injections: BTreeMap::new(),
        }
    }

    pub fn with_injection(mut self, layer: usize, v: Vec<f64>) -> Self {
        self.injections.insert(layer, v);
        self
    }
}

/// `N` codes whose `g₀` features are scaled channel-wise by `importance` and
/// summed before `g₁`. `g₀` is `layers[..split_layer]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCodeAssignment {
    pub codes: Vec<Vec<f64>>,
    pub importance: Vec<Vec<f64>>,
    pub split_layer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGenerator {
    latent_dim: usize,
    layers: Vec<Layer>,
}

/// Gradients of a scalar with respect to every input and parameter.
///
/// `inputs[i]` is the gradient w.r.t. the (post-injection) input of layer
/// `i`; since injections are additive it is also the gradient w.r.t. an
/// injection at `i`, and `inputs[0]` is the gradient w.r.t. `z0`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub inputs: Vec<Vec<f64>>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn z0(&self) -> &[f64] {
        &self.inputs[0]
    }

    pub fn injection(&self, layer: usize) -> &[f64] {
        &self.inputs[layer]
    }

    /// Parameter gradients in [`LayeredGenerator::params`] order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MultiCodeGradients {
    pub codes: Vec<Vec<f64>>,
    pub importance: Vec<Vec<f64>>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Saved activations of one forward pass; [`Trace::pullback`] runs the
/// reverse sweep.
#[derive(Debug, Clone)]
pub struct Trace<'g> {
    generator: &'g LayeredGenerator,
    start: usize,
    inputs: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
}

impl Trace<'_> {
    /// Full reverse sweep, including parameter gradients.
    pub fn pullback(&self, cotangent: &[f64]) -> Gradients {
        self.sweep(cotangent, true)
    }

    /// Input and injection gradients only; parameter gradients are left empty.
    pub fn pullback_inputs(&self, cotangent: &[f64]) -> Vec<Vec<f64>> {
        self.sweep(cotangent, false).inputs
    }

    fn sweep(&self, cotangent: &[f64], with_params: bool) -> Gradients {
        let n = self.inputs.len();
        let layers = &self.generator.layers[self.start..self.start + n];
        let mut inputs = vec![Vec::new(); n];
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        if with_params {
            weights = layers
                .iter()
                .map(|l| Matrix::zeros(l.output_dim(), l.input_dim()))
                .collect();
            biases = layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
        }
        let mut cot = cotangent.to_vec();
        for i in (0..n).rev() {
            let layer = &layers[i];
            let g_pre = layer.activation_pullback(&self.pres[i], &cot);
            if with_params {
                weights[i].add_outer(1.0, &g_pre, &self.inputs[i]);
                if !layer.bias.is_empty() {
                    biases[i].copy_from_slice(&g_pre);
                }
            }
            cot = layer.weight.tr_matvec(&g_pre);
            inputs[i] = cot.clone();
        }
        Gradients {
            inputs,
            weights,
            biases,
        }
    }
}

impl LayeredGenerator {
    pub fn new(latent_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("generator needs at least one layer"));
        }
        let mut dim = latent_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_dim() != dim {
                return Err(Error::contract(format!(
                    "layer {i} expects input dim {}, previous stage produces {dim}",
                    layer.input_dim()
                )));
            }
            dim = layer.output_dim();
        }
        Ok(LayeredGenerator { latent_dim, layers })
    }

    /// `x = W1 (W0 z0 + z1)`: the bias-free two-layer linear model.
    pub fn two_layer_linear(w0: Matrix, w1: Matrix) -> Result<Self> {
        LayeredGenerator::new(w0.cols(), vec![Layer::linear(w0), Layer::linear(w1)])
    }

    /// Leaky-ReLU MLP with a linear output layer; weights `N(0, 1/fan_in)`,
    /// biases zero.
    pub fn random_mlp(
        latent_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        leak: f64,
        stream: &mut RandomStream,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = latent_dim;
        for &width in hidden {
            let w = scaled_gaussian(width, fan_in, stream);
            layers.push(Layer::new(
                LayerKind::DenseLeakyRelu { leak },
                w,
                vec![0.0; width],
            )?);
            fan_in = width;
        }
        let w = scaled_gaussian(output_dim, fan_in, stream);
        layers.push(Layer::new(LayerKind::Linear, w, vec![0.0; output_dim])?);
        LayeredGenerator::new(latent_dim, layers)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.latent_dim, Layer::output_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Input dimension of layer `i` (the dimension of an injection at `i`).
    pub fn input_dim_at(&self, i: usize) -> usize {
        self.layers[i].input_dim()
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut Layer {
        &mut self.layers[i]
    }

    pub fn forward(&self, a: &LatentAssignment) -> Result<Vec<f64>> {
        self.check_assignment(a)?;
        Ok(self.run(0, a.z0.clone(), &a.injections, None))
    }

    pub fn forward_with_grad(&self, a: &LatentAssignment) -> Result<(Vec<f64>, Trace<'_>)> {
        self.check_assignment(a)?;
        let mut trace = Trace {
            generator: self,
            start: 0,
            inputs: Vec::new(),
            pres: Vec::new(),
        };
        let out = self.run(0, a.z0.clone(), &a.injections, Some(&mut trace));
        Ok((out, trace))
    }

    /// Applies `layers[start..]` to `input`, adding injections keyed by
    /// absolute layer index.
    pub fn forward_from(
        &self,
        start: usize,
        input: &[f64],
        injections: &BTreeMap<usize, Vec<f64>>,
    ) -> Result<Vec<f64>> {
        self.check_segment(start, input)?;
        Ok(self.run(start, input.to_vec(), injections, None))
    }

    pub fn forward_from_with_grad(
        &self,
        start: usize,
        input: &[f64],
        injections: &BTreeMap<usize, Vec<f64>>,
    ) -> Result<(Vec<f64>, Trace<'_>)> {
        self.check_segment(start, input)?;
        let mut trace = Trace {
            generator: self,
            start,
            inputs: Vec::new(),
            pres: Vec::new(),
        };
        let out = self.run(start, input.to_vec(), injections, Some(&mut trace));
        Ok((out, trace))
    }

    fn run(
        &self,
        start: usize,
        mut x: Vec<f64>,
        injections: &BTreeMap<usize, Vec<f64>>,
        mut trace: Option<&mut Trace<'_>>,
    ) -> Vec<f64> {
        for (i, layer) in self.layers.iter().enumerate().skip(start) {
            if let Some(v) = injections.get(&i) {
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += vi;
                }
            }
            let (pre, out) = layer.forward(&x);
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(std::mem::take(&mut x));
                t.pres.push(pre);
            }
            x = out;
        }
        x
    }

    fn check_segment(&self, start: usize, input: &[f64]) -> Result<()> {
        if start >= self.layers.len() {
            return Err(Error::contract(format!(
                "segment start {start} beyond {} layers",
                self.layers.len()
            )));
        }
        if input.len() != self.layers[start].input_dim() {
            return Err(Error::contract(format!(
                "layer {start} input has length {}, expected {}",
                input.len(),
                self.layers[start].input_dim()
            )));
        }
        Ok(())
    }

    fn check_assignment(&self, a: &LatentAssignment) -> Result<()> {
        if a.z0.len() != self.latent_dim {
            return Err(Error::contract(format!(
                "z0 has length {}, latent dim is {}",
                a.z0.len(),
                self.latent_dim
            )));
        }
        for (&i, v) in &a.injections {
            if i >= self.layers.len() {
                return Err(Error::contract(format!(
                    "injection at layer {i}, generator has {} layers",
                    self.layers.len()
                )));
            }
            if v.len() != self.layers[i].input_dim() {
                return Err(Error::contract(format!(
                    "injection at layer {i} has length {}, expected {}",
                    v.len(),
                    self.layers[i].input_dim()
                )));
            }
        }
        Ok(())
    }

    /// Number of channels at the multi-code split (output dim of `g₀`).
    pub fn split_channels(&self, split_layer: usize) -> Result<usize> {
        if split_layer == 0 || split_layer > self.layers.len() {
            return Err(Error::contract(format!(
                "split layer {split_layer} must lie in 1..={}",
                self.layers.len()
            )));
        }
        Ok(self.layers[split_layer - 1].output_dim())
    }

    fn check_multicode(&self, m: &MultiCodeAssignment) -> Result<usize> {
        let channels = self.split_channels(m.split_layer)?;
        if m.codes.is_empty() {
            return Err(Error::contract("multi-code assignment needs N >= 1 codes"));
        }
        if m.codes.len() != m.importance.len() {
            return Err(Error::contract(format!(
                "{} codes but {} importance vectors",
                m.codes.len(),
                m.importance.len()
            )));
        }
        for (k, (z, a)) in m.codes.iter().zip(&m.importance).enumerate() {
            if z.len() != self.latent_dim {
                return Err(Error::contract(format!(
                    "code {k} has length {}, latent dim is {}",
                    z.len(),
                    self.latent_dim
                )));
            }
            if a.len() != channels {
                return Err(Error::contract(format!(
                    "importance {k} has length {}, split has {channels} channels",
                    a.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("importance {k} is not finite")));
            }
        }
        Ok(channels)
    }

    pub fn forward_multicode(&self, m: &MultiCodeAssignment) -> Result<Vec<f64>> {
        let channels = self.check_multicode(m)?;
        let none = BTreeMap::new();
        let mut combined = vec![0.0; channels];
        for (z, alpha) in m.codes.iter().zip(&m.importance) {
            let h = self.run_range(0, m.split_layer, z.clone(), None);
            for ((c, hv), av) in combined.iter_mut().zip(&h).zip(alpha) {
                *c += hv * av;
            }
        }
        if m.split_layer == self.layers.len() {
            return Ok(combined);
        }
        Ok(self.run(m.split_layer, combined, &none, None))
    }

    /// Multi-code forward pass and its exact gradient for output cotangent
    /// `cotangent`.
    pub fn multicode_grad(
        &self,
        m: &MultiCodeAssignment,
        cotangent_of: impl FnOnce(&[f64]) -> Vec<f64>,
        with_params: bool,
    ) -> Result<(Vec<f64>, MultiCodeGradients)> {
        let channels = self.check_multicode(m)?;
        let split = m.split_layer;
        let mut lower = Vec::with_capacity(m.codes.len());
        let mut features = Vec::with_capacity(m.codes.len());
        let mut combined = vec![0.0; channels];
        for (z, alpha) in m.codes.iter().zip(&m.importance) {
            let mut t = Trace {
                generator: self,
                start: 0,
                inputs: Vec::new(),
                pres: Vec::new(),
            };
            let h = self.run_range(0, split, z.clone(), Some(&mut t));
            for ((c, hv), av) in combined.iter_mut().zip(&h).zip(alpha) {
                *c += hv * av;
            }
            lower.push(t);
            features.push(h);
        }

        let (out, g_combined, upper_grads) = if split == self.layers.len() {
            let cot = cotangent_of(&combined);
            (combined, cot, None)
        } else {
            let (out, upper) = self.forward_from_with_grad(split, &combined, &BTreeMap::new())?;
            let cot = cotangent_of(&out);
            let g = upper.sweep(&cot, with_params);
            (out, g.inputs[0].clone(), Some(g))
        };

        let mut weights: Vec<Matrix> = Vec::new();
        let mut biases: Vec<Vec<f64>> = Vec::new();
        if with_params {
            weights = self
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.output_dim(), l.input_dim()))
                .collect();
            biases = self
                .layers
                .iter()
                .map(|l| vec![0.0; l.bias.len()])
                .collect();
            if let Some(g) = &upper_grads {
                for (k, (w, b)) in g.weights.iter().zip(&g.biases).enumerate() {
                    weights[split + k] = w.clone();
                    biases[split + k] = b.clone();
                }
            }
        }

        let mut codes = Vec::with_capacity(m.codes.len());
        let mut importance = Vec::with_capacity(m.codes.len());
        for ((t, h), alpha) in lower.iter().zip(&features).zip(&m.importance) {
            importance.push(g_combined.iter().zip(h).map(|(g, hv)| g * hv).collect());
            let g_h: Vec<f64> = g_combined.iter().zip(alpha).map(|(g, a)| g * a).collect();
            let g = t.sweep(&g_h, with_params);
            if with_params {
                for (i, (w, b)) in g.weights.iter().zip(&g.biases).enumerate() {
                    weights[i].axpy(1.0, w);
                    for (acc, v) in biases[i].iter_mut().zip(b) {
                        *acc += v;
                    }
                }
            }
            codes.push(g.inputs[0].clone());
        }
        Ok((
            out,
            MultiCodeGradients {
                codes,
                importance,
                weights,
                biases,
            },
        ))
    }

    fn run_range(
        &self,
        start: usize,
        end: usize,
        mut x: Vec<f64>,
        mut trace: Option<&mut Trace<'_>>,
    ) -> Vec<f64> {
        for layer in &self.layers[start..end] {
            let (pre, out) = layer.forward(&x);
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(std::mem::take(&mut x));
                t.pres.push(pre);
            }
            x = out;
        }
        x
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All weights then biases, layer by layer, row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::contract(format!(
                "{} parameters given, generator has {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weight.rows() * l.weight.cols();
            l.weight
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Range of flat parameter indices belonging to layer `i`.
    pub fn param_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.layers[..i].iter().map(Layer::param_count).sum();
        start..start + self.layers[i].param_count()
    }
}

fn scaled_gaussian(rows: usize, cols: usize, stream: &mut RandomStream) -> Matrix {
    let s = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| s * stream.normal()).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_stack(n: usize) -> LayeredGenerator {
        LayeredGenerator::two_layer_linear(Matrix::identity(n), Matrix::identity(n)).unwrap()
    }

    #[test]
    fn identity_composition() {
        let g = identity_stack(3);
        let v = vec![1.0, -2.0, 0.5];
        assert_eq!(g.forward(&LatentAssignment::new(v.clone())).unwrap(), v);
    }

    #[test]
    fn zero_injection_is_base_model() {
        let mut s = RandomStream::new(1, 0);
        let g = LayeredGenerator::random_mlp(3, &[5, 4], 6, 0.2, &mut s).unwrap();
        let z = s.normal_vec(3);
        let base = g.forward(&LatentAssignment::new(z.clone())).unwrap();
        let a = LatentAssignment::new(z)
            .with_injection(1, vec![0.0; 5])
            .with_injection(2, vec![0.0; 4]);
        assert_eq!(g.forward(&a).unwrap(), base);
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let g = identity_stack(3);
        assert!(matches!(
            g.forward(&LatentAssignment::new(vec![1.0])),
            Err(Error::Contract(_))
        ));
        let a = LatentAssignment::new(vec![0.0; 3]).with_injection(1, vec![0.0; 2]);
        assert!(g.forward(&a).is_err());
        let a = LatentAssignment::new(vec![0.0; 3]).with_injection(7, vec![0.0; 3]);
        assert!(g.forward(&a).is_err());
    }

    #[test]
    fn incompatible_layers_rejected() {
        let r = LayeredGenerator::new(
            2,
            vec![
                Layer::linear(Matrix::zeros(3, 2)),
                Layer::linear(Matrix::zeros(2, 4)),
            ],
        );
        assert!(r.is_err());
        assert!(LayeredGenerator::new(2, vec![]).is_err());
    }

    #[test]
    fn leak_must_be_in_unit_interval() {
        let w = Matrix::identity(2);
        assert!(Layer::new(LayerKind::DenseLeakyRelu { leak: 1.5 }, w.clone(), vec![]).is_err());
        assert!(Layer::new(LayerKind::DenseLeakyRelu { leak: 0.0 }, w, vec![]).is_err());
    }

    #[test]
    fn leaky_derivative_at_zero_is_leak() {
        let layer = Layer::new(
            LayerKind::DenseLeakyRelu { leak: 0.3 },
            Matrix::identity(1),
            vec![],
        )
        .unwrap();
        let g = LayeredGenerator::new(1, vec![layer]).unwrap();
        let (_, t) = g
            .forward_with_grad(&LatentAssignment::new(vec![0.0]))
            .unwrap();
        assert_eq!(t.pullback(&[1.0]).z0(), &[0.3]);
    }

    #[test]
    fn linear_z0_gradient_is_chain_rule() {
        let mut s = RandomStream::new(2, 0);
        let w0 = crate::numkit::gaussian_matrix(4, 2, &mut s);
        let w1 = crate::numkit::gaussian_matrix(5, 4, &mut s);
        let g = LayeredGenerator::two_layer_linear(w0.clone(), w1.clone()).unwrap();
        let z = s.normal_vec(2);
        let (out, t) = g.forward_with_grad(&LatentAssignment::new(z)).unwrap();
        let grad = t.pullback(&out);
        let expected = w1.matmul(&w0).tr_matvec(&out);
        for (a, b) in grad.z0().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_code_all_ones_matches_forward() {
        let mut s = RandomStream::new(5, 0);
        let g = LayeredGenerator::random_mlp(3, &[6], 4, 0.2, &mut s).unwrap();
        let z = s.normal_vec(3);
        let m = MultiCodeAssignment {
            codes: vec![z.clone()],
            importance: vec![vec![1.0; 6]],
            split_layer: 1,
        };
        assert_eq!(
            g.forward_multicode(&m).unwrap(),
            g.forward(&LatentAssignment::new(z)).unwrap()
        );
    }

    #[test]
    fn selector_importance_picks_first_code() {
        let mut s = RandomStream::new(6, 0);
        let g = LayeredGenerator::random_mlp(3, &[6], 4, 0.2, &mut s).unwrap();
        let codes: Vec<Vec<f64>> = (0..3).map(|_| s.normal_vec(3)).collect();
        let m = MultiCodeAssignment {
            codes: codes.clone(),
            importance: vec![vec![1.0; 6], vec![0.0; 6], vec![0.0; 6]],
            split_layer: 1,
        };
        let single = g.forward(&LatentAssignment::new(codes[0].clone())).unwrap();
        let multi = g.forward_multicode(&m).unwrap();
        for (a, b) in multi.iter().zip(&single) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn multicode_shape_errors() {
        let g = identity_stack(2);
        let bad = MultiCodeAssignment {
            codes: vec![vec![0.0; 2]],
            importance: vec![vec![1.0; 3]],
            split_layer: 1,
        };
        assert!(g.forward_multicode(&bad).is_err());
        let empty = MultiCodeAssignment {
            codes: vec![],
            importance: vec![],
            split_layer: 1,
        };
        assert!(g.forward_multicode(&empty).is_err());
        let split = MultiCodeAssignment {
            codes: vec![vec![0.0; 2]],
            importance: vec![vec![1.0; 2]],
            split_layer: 0,
        };
        assert!(g.forward_multicode(&split).is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut s = RandomStream::new(7, 0);
        let mut g = LayeredGenerator::random_mlp(2, &[3], 2, 0.2, &mut s).unwrap();
        let p = g.params();
        assert_eq!(p.len(), g.param_count());
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        g.set_params(&shifted).unwrap();
        assert_eq!(g.params(), shifted);
        assert_eq!(g.param_range(1), (3 * 2 + 3)..g.param_count());
    }
}
