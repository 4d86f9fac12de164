use super::network::{mse_loss, Gradients};
use super::{Network, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl OptimizerKind {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer with its per-parameter state. Parameter tensors are ordered
/// layer by layer, weights before bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<T = f32> {
    pub kind: OptimizerKind,
    pub step: u64,
    /// First moments (Adam only).
    pub m: Vec<Vec<T>>,
    /// Second moments (Adam only).
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam() -> Self {
        Self::new(OptimizerKind::adam())
    }

    pub fn sgd() -> Self {
        Self::new(OptimizerKind::Sgd)
    }

    fn ensure_state(&mut self, net: &Network<T>) {
        if !matches!(self.kind, OptimizerKind::Adam { .. }) || !self.m.is_empty() {
            return;
        }
        for l in net.layers() {
            for len in [l.weights.len(), l.bias.len()] {
                self.m.push(vec![T::zero(); len]);
                self.v.push(vec![T::zero(); len]);
            }
        }
    }

    /// Applies one update with learning rate `lr`.
    pub fn update(&mut self, net: &mut Network<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        self.ensure_state(net);
        if let OptimizerKind::Adam { .. } = self.kind {
            if self.m.len() != 2 * net.layers().len() {
                return Err(Error::Inconsistent("optimizer state does not match the network".into()));
            }
        }
        self.step += 1;
        let lr_t = T::of(lr);
        let mut slot = 0;
        for (layer, (gw, gb)) in net.layers_mut().iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (params, g) in [
                (layer.weights.data_mut(), gw.data()),
                (layer.bias.as_mut_slice(), gb.as_slice()),
            ] {
                if params.len() != g.len() {
                    return Err(Error::ShapeMismatch("gradient does not match parameters".into()));
                }
                match self.kind {
                    OptimizerKind::Sgd => {
                        for (p, &g) in params.iter_mut().zip(g) {
                            *p = *p - lr_t * g;
                        }
                    }
                    OptimizerKind::Adam { beta1, beta2, eps } => {
                        let (b1, b2) = (T::of(beta1), T::of(beta2));
                        let c1 = T::of(1.0 - beta1.powi(self.step as i32));
                        let c2 = T::of(1.0 - beta2.powi(self.step as i32));
                        let eps = T::of(eps);
                        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
                        for ((p, &g), (m, v)) in params.iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut())) {
                            *m = b1 * *m + (T::one() - b1) * g;
                            *v = b2 * *v + (T::one() - b2) * g * g;
                            let m_hat = *m / c1;
                            let v_hat = *v / c2;
                            *p = *p - lr_t * m_hat / (v_hat.sqrt() + eps);
                        }
                    }
                }
                slot += 1;
            }
        }
        Ok(())
    }
}

/// One forward/backward/update on the mean squared error between the network
/// output for `inputs` and `targets`. Returns the loss before the update.
pub fn train_step<T: Real>(
    net: &mut Network<T>,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
    optimizer: &mut Optimizer<T>,
    lr: f64,
) -> Result<T> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (out, cache) = net.forward_cached(inputs)?;
    let (loss, grad) = mse_loss(&out, targets)?;
    let grads = net.backward(&cache, &grad)?;
    optimizer.update(net, &grads, lr)?;
    Ok(loss)
}
