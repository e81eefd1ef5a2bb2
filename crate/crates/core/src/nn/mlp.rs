//! Dense ReLU network with hand-written reverse- and forward-mode derivatives.
//!
//! Inputs are row-major batches (`batch × features`). Weights are stored
//! `out × in`. Hidden layers use ReLU; the output layer is affine.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Array2::zeros((output, input)), bias: Array1::zeros(output) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Parameter-shaped container used for gradients and tangent directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

/// Intermediate values of one forward pass, needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<T>>,
    /// Pre-activation of every layer.
    pre: Vec<Array2<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        self.pre.last().expect("network has at least one layer")
    }
}

fn relu<T: Scalar>(z: &Array2<T>) -> Array2<T> {
    z.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

fn mask_in_place<T: Scalar>(t: &mut Array2<T>, pre: &Array2<T>) {
    Zip::from(t).and(pre).for_each(|t, &z| {
        if z <= T::zero() {
            *t = T::zero();
        }
    });
}

fn affine<T: Scalar>(x: &ArrayView2<T>, layer: &Dense<T>) -> Array2<T> {
    let mut z = x.dot(&layer.weight.t());
    z += &layer.bias;
    z
}

impl<T: Scalar> Mlp<T> {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        Self::check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || T::of(rng.random_range(-bound..=bound));
                let weight = Array2::from_shape_simple_fn((w[1], w[0]), &mut draw);
                let bias = Array1::from_shape_simple_fn(w[1], &mut draw);
                Dense { weight, bias }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        Self::check_widths(widths)?;
        Ok(Self { layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::arg("a network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::arg("consecutive layer dimensions do not chain"));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.output_dim()) {
            return Err(Error::arg("bias length differs from layer output"));
        }
        Ok(Self { layers })
    }

    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::arg(format!("invalid layer widths {widths:?}")));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(Dense::output_dim));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    /// Number of weight entries (biases excluded).
    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len()).sum()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Sets the output layer to zero, so the network starts as the constant 0.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.fill(T::zero());
        last.bias.fill(T::zero());
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::arg(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&x)?;
        let mut h = affine(&x, &self.layers[0]);
        for layer in &self.layers[1..] {
            h = affine(&relu(&h).view(), layer);
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(&inputs[l].view(), layer);
            if l + 1 < self.layers.len() {
                inputs.push(relu(&z));
            }
            pre.push(z);
        }
        Ok(ForwardCache { inputs, pre })
    }

    /// Reverse-mode pass: gradients of `Σ upstream ⊙ output` with respect to
    /// the parameters and the input.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: ArrayView2<T>) -> Result<(Gradients<T>, Array2<T>)> {
        if upstream.dim() != cache.output().dim() {
            return Err(Error::arg(format!(
                "upstream gradient shape {:?} differs from output shape {:?}",
                upstream.dim(),
                cache.output().dim()
            )));
        }
        Ok(self.backprop(&cache.inputs, &cache.pre, upstream, true))
    }

    /// Shared reverse sweep. `inputs[l]` is whatever multiplies layer `l`'s
    /// weights (activations, or tangents for the linearized network);
    /// ReLU masks always come from the primal pre-activations.
    fn backprop(
        &self,
        inputs: &[Array2<T>],
        pre: &[Array2<T>],
        upstream: ArrayView2<T>,
        with_bias: bool,
    ) -> (Gradients<T>, Array2<T>) {
        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let weight = delta.t().dot(&inputs[l]);
            let bias = if with_bias { delta.sum_axis(Axis(0)) } else { Array1::zeros(layer.output_dim()) };
            grads.push(Dense { weight, bias });
            let mut back = delta.dot(&layer.weight);
            if l > 0 {
                mask_in_place(&mut back, &pre[l - 1]);
            }
            delta = back;
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// Forward-mode derivative along a parameter direction (input held fixed).
    /// Returns `(output, d output)`.
    pub fn jvp_params(&self, x: ArrayView2<T>, direction: &Gradients<T>) -> Result<(Array2<T>, Array2<T>)> {
        self.check_input(&x)?;
        self.check_same_shape(direction)?;
        let mut h = x.to_owned();
        let mut t: Array2<T> = Array2::zeros(x.raw_dim());
        let last = self.layers.len() - 1;
        for (l, (layer, dl)) in self.layers.iter().zip(&direction.layers).enumerate() {
            let z = affine(&h.view(), layer);
            let mut dz = t.dot(&layer.weight.t()) + h.dot(&dl.weight.t());
            dz += &dl.bias;
            if l < last {
                mask_in_place(&mut dz, &z);
                h = relu(&z);
                t = dz;
            } else {
                return Ok((z, dz));
            }
        }
        unreachable!("loop returns at the output layer")
    }

    /// Forward-mode derivative along an input direction. Returns `(output, d output)`.
    pub fn jvp_input(&self, x: ArrayView2<T>, dx: ArrayView2<T>) -> Result<(Array2<T>, Array2<T>)> {
        let cache = self.forward_cached(x)?;
        let tangents = self.input_tangents(&cache, dx)?;
        let last = self.layers.last().expect("non-empty");
        let out_t = tangents.last().expect("non-empty").dot(&last.weight.t());
        Ok((cache.output().clone(), out_t))
    }

    fn input_tangents(&self, cache: &ForwardCache<T>, dx: ArrayView2<T>) -> Result<Vec<Array2<T>>> {
        if dx.dim() != cache.inputs[0].dim() {
            return Err(Error::arg("input tangent shape differs from input"));
        }
        let mut tangents = vec![dx.to_owned()];
        for l in 0..self.layers.len() - 1 {
            let mut dz = tangents[l].dot(&self.layers[l].weight.t());
            mask_in_place(&mut dz, &cache.pre[l]);
            tangents.push(dz);
        }
        Ok(tangents)
    }

    /// Gradient with respect to the parameters of `Σ upstream ⊙ (J_x f · dx)`,
    /// the input-directional derivative of the network. Biases only move the
    /// ReLU kinks, so their gradient is zero almost everywhere.
    pub fn input_tangent_param_grad(
        &self,
        x: ArrayView2<T>,
        dx: ArrayView2<T>,
        upstream: ArrayView2<T>,
    ) -> Result<Gradients<T>> {
        let cache = self.forward_cached(x)?;
        if upstream.dim() != cache.output().dim() {
            return Err(Error::arg("upstream shape differs from output shape"));
        }
        let tangents = self.input_tangents(&cache, dx)?;
        Ok(self.backprop(&tangents, &cache.pre, upstream, false).0)
    }

    fn check_same_shape(&self, other: &Gradients<T>) -> Result<()> {
        let same = self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.len() == b.bias.len());
        if same {
            Ok(())
        } else {
            Err(Error::arg("parameter shapes differ"))
        }
    }

    pub fn same_architecture(&self, other: &Mlp<T>) -> bool {
        self.widths() == other.widths()
    }

    /// `θ ← θ − lr · g`.
    pub fn apply_gradient(&mut self, grads: &Gradients<T>, lr: T) -> Result<()> {
        self.check_same_shape(grads)?;
        for (p, g) in self.layers.iter_mut().zip(&grads.layers) {
            p.weight.scaled_add(-lr, &g.weight);
            p.bias.scaled_add(-lr, &g.bias);
        }
        Ok(())
    }

    /// `θ' ← τ θ + (1 − τ) θ'` with `self` as the target.
    pub fn soft_update(&mut self, source: &Mlp<T>, tau: T) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(Error::arg(format!(
                "soft update between architectures {:?} and {:?}",
                self.widths(),
                source.widths()
            )));
        }
        let keep = T::one() - tau;
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weight).and(&s.weight).for_each(|t, &s| *t = tau * s + keep * *t);
            Zip::from(&mut t.bias).and(&s.bias).for_each(|t, &s| *t = tau * s + keep * *t);
        }
        Ok(())
    }

    /// All parameters in checkpoint order: per layer, weights row-major then bias.
    pub fn flat_params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::arg(format!("expected {} parameters, got {}", self.num_params(), values.len())));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn gradients_zeros(&self) -> Gradients<T> {
        Gradients { layers: self.layers.iter().map(|l| Dense::zeros(l.input_dim(), l.output_dim())).collect() }
    }
}

impl<T: Scalar> Gradients<T> {
    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.layers {
            a.weight.mapv_inplace(|v| v * s);
            a.bias.mapv_inplace(|v| v * s);
        }
    }

    pub fn dot(&self, other: &Gradients<T>) -> T {
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| (&a.weight * &b.weight).sum() + (&a.bias * &b.bias).sum())
            .sum()
    }

    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
