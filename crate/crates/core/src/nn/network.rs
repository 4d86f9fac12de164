use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::conv::{
    conv_sample, conv_sample_backward, conv_transpose_sample, conv_transpose_sample_backward, transpose_geometry,
    ConvGeometry,
};
use super::spec::{LayerKind, LayerSpec, NetworkSpec};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// A layer's parameters together with its description.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub in_channels: usize,
    pub weights: Tensor<T>,
    /// Empty when the layer has no bias.
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let s = self.spec.stride;
        match self.spec.kind {
            LayerKind::Conv => (h.div_ceil(s), w.div_ceil(s)),
            LayerKind::ConvTranspose => (h * s, w * s),
        }
    }

    fn geometry(&self, h: usize, w: usize) -> ConvGeometry {
        let (k, s) = (self.spec.kernel, self.spec.stride);
        match self.spec.kind {
            LayerKind::Conv => ConvGeometry::same(self.in_channels, h, w, k, s),
            LayerKind::ConvTranspose => transpose_geometry(self.spec.filters, h, w, k, s),
        }
    }

    /// Forward pass over a batch, including the activation.
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let [n, _, h, w] = x.shape();
        let (oh, ow) = self.out_dims(h, w);
        let g = self.geometry(h, w);
        let mut y = Tensor::zeros([n, self.spec.filters, oh, ow]);
        let len = y.sample_len();
        y.data_mut().par_chunks_mut(len).enumerate().for_each(|(i, ys)| {
            let xs = x.sample(i);
            match self.spec.kind {
                LayerKind::Conv => conv_sample(xs, self.weights.data(), &self.bias, &g, ys),
                LayerKind::ConvTranspose => conv_transpose_sample(xs, self.weights.data(), &self.bias, &g, ys),
            }
            self.spec.activation.forward(ys);
        });
        y
    }

    /// Backward pass for one sample. `dy` holds the gradient w.r.t. the
    /// layer output and is turned into the pre-activation gradient in place.
    #[allow(clippy::too_many_arguments)]
    fn backward_sample(
        &self,
        x: &[T],
        y: &[T],
        dy: &mut [T],
        h: usize,
        w: usize,
        grads: &mut LayerGrads<T>,
        dx: &mut [T],
    ) {
        self.spec.activation.backward(y, dy);
        let g = self.geometry(h, w);
        let (dw, db) = (grads.weights.data_mut(), grads.bias.as_mut_slice());
        match self.spec.kind {
            LayerKind::Conv => conv_sample_backward(x, self.weights.data(), &g, dy, dw, db, dx),
            LayerKind::ConvTranspose => conv_transpose_sample_backward(x, self.weights.data(), &g, dy, dw, db, dx),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerGrads<T> {
    weights: Tensor<T>,
    bias: Vec<T>,
}

/// Activations recorded by [`Network::forward_cached`]: the network input
/// followed by every layer's output.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    activations: Vec<Tensor<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("cache holds the input")
    }

    /// The input followed by every layer's output.
    pub fn activations(&self) -> &[Tensor<T>] {
        &self.activations
    }
}

/// Gradients of a scalar loss with respect to every parameter and the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Tensor<T>>,
    pub biases: Vec<Vec<T>>,
    pub input: Tensor<T>,
}

/// A feed-forward stack of same-padded convolution layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    /// Glorot-uniform weights drawn from a seeded generator; zero biases.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers
            .iter()
            .zip(spec.layer_inputs())
            .map(|(ls, cin)| {
                let k2 = ls.kernel * ls.kernel;
                let (fan_in, fan_out) = match ls.kind {
                    LayerKind::Conv => (cin * k2, ls.filters * k2),
                    LayerKind::ConvTranspose => (ls.filters * k2, cin * k2),
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Tensor::from_fn(ls.weight_shape(cin), |_| T::of(rng.random_range(-limit..limit)));
                Layer {
                    spec: *ls,
                    in_channels: cin,
                    weights,
                    bias: if ls.bias {
                        vec![T::zero(); ls.filters]
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect();
        Ok(Self { spec, layers })
    }

    /// All weights and biases zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let mut net = Self::new(spec, 0)?;
        for l in &mut net.layers {
            l.weights.data_mut().fill(T::zero());
        }
        Ok(net)
    }

    /// Assembles a network from explicit parameters, checking every shape
    /// against its `NetworkSpec`.
    pub fn from_parts(spec: NetworkSpec, weights: Vec<Tensor<T>>, biases: Vec<Vec<T>>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.layers.len() || biases.len() != spec.layers.len() {
            return Err(Error::Inconsistent(format!(
                "{} layers but {} weight tensors and {} bias vectors",
                spec.layers.len(),
                weights.len(),
                biases.len()
            )));
        }
        let layers = spec
            .layers
            .iter()
            .zip(spec.layer_inputs())
            .zip(weights.into_iter().zip(biases))
            .enumerate()
            .map(|(i, ((ls, cin), (w, b)))| {
                let expected = ls.weight_shape(cin);
                if w.shape() != expected {
                    return Err(Error::Inconsistent(format!(
                        "layer {i}: weight shape {:?}, expected {expected:?}",
                        w.shape()
                    )));
                }
                let expected_bias = if ls.bias { ls.filters } else { 0 };
                if b.len() != expected_bias {
                    return Err(Error::Inconsistent(format!(
                        "layer {i}: {} bias values, expected {expected_bias}",
                        b.len()
                    )));
                }
                Ok(Layer {
                    spec: *ls,
                    in_channels: cin,
                    weights: w,
                    bias: b,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.spec.input_channels
    }

    pub fn output_channels(&self) -> usize {
        self.spec.output_channels()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    in_channels: l.in_channels,
                    weights: l.weights.cast(),
                    bias: l.bias.iter().map(|v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.channels() != self.spec.input_channels {
            return Err(Error::ChannelMismatch {
                expected: self.spec.input_channels,
                actual: input.channels(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = self.layers[0].forward(input);
        for layer in &self.layers[1..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate activation for
    /// [`Network::backward`].
    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"));
            activations.push(next);
        }
        let out = activations.last().expect("non-empty").clone();
        Ok((out, ForwardCache { activations }))
    }

    /// Backpropagates `grad_out` (the loss gradient w.r.t. the network output)
    /// through the cached forward pass.
    ///
    /// Per-sample gradients are computed independently and summed in batch
    /// order, so results do not depend on thread scheduling.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &Tensor<T>) -> Result<Gradients<T>> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::StaleCache(format!(
                "cache has {} activations for a {}-layer network",
                cache.activations.len(),
                self.layers.len()
            )));
        }
        for (layer, (x, y)) in self
            .layers
            .iter()
            .zip(cache.activations.iter().zip(&cache.activations[1..]))
        {
            let [_, cin, h, w] = x.shape();
            let (oh, ow) = layer.out_dims(h, w);
            if cin != layer.in_channels || y.shape()[1..] != [layer.spec.filters, oh, ow] {
                return Err(Error::StaleCache("cached activations do not match the network".into()));
            }
        }
        if grad_out.shape() != cache.output().shape() {
            return Err(Error::StaleCache(format!(
                "gradient shape {:?} differs from cached output {:?}",
                grad_out.shape(),
                cache.output().shape()
            )));
        }

        let batch = grad_out.batch();
        let per_sample: Vec<(Vec<LayerGrads<T>>, Vec<T>)> = (0..batch)
            .into_par_iter()
            .map(|n| self.backward_sample(cache, grad_out, n))
            .collect();

        let mut totals = self.zero_layer_grads();
        let input_shape = cache.activations[0].shape();
        let mut input_grad = Vec::with_capacity(input_shape.iter().product());
        for (grads, dx) in per_sample {
            for (acc, g) in totals.iter_mut().zip(grads) {
                acc.weights
                    .data_mut()
                    .iter_mut()
                    .zip(g.weights.data())
                    .for_each(|(a, b)| *a += *b);
                acc.bias.iter_mut().zip(&g.bias).for_each(|(a, b)| *a += *b);
            }
            input_grad.extend(dx);
        }
        let (weights, biases) = totals.into_iter().map(|g| (g.weights, g.bias)).unzip();
        Ok(Gradients {
            weights,
            biases,
            input: Tensor::new(input_shape, input_grad)?,
        })
    }

    fn zero_layer_grads(&self) -> Vec<LayerGrads<T>> {
        self.layers
            .iter()
            .map(|l| LayerGrads {
                weights: Tensor::zeros(l.weights.shape()),
                bias: vec![T::zero(); l.bias.len()],
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_sample(&self, cache: &ForwardCache<T>, grad_out: &Tensor<T>, n: usize) -> (Vec<LayerGrads<T>>, Vec<T>) {
        let mut grads = self.zero_layer_grads();
        let mut g = grad_out.sample(n).to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let mut dx = vec![T::zero(); x.sample_len()];
            layer.backward_sample(
                x.sample(n),
                y.sample(n),
                &mut g,
                x.height(),
                x.width(),
                &mut grads[l],
                &mut dx,
            );
            g = dx;
        }
        (grads, g)
    }
}

/// Mean squared error over every element, and its gradient w.r.t. `pred`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut sum = 0.0f64;
    let scale = T::of(2.0 / n);
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.as_f64() * d.as_f64();
            scale * d
        })
        .collect();
    Ok((T::of(sum / n), Tensor::new(pred.shape(), grad)?))
}
