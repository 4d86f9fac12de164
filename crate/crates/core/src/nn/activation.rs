use super::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu { slope: f32 },
    Sigmoid,
    Identity,
}

impl Activation {
    pub const DEFAULT_SLOPE: f32 = 0.3;

    pub fn leaky_relu() -> Self {
        Self::LeakyRelu {
            slope: Self::DEFAULT_SLOPE,
        }
    }

    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Self::LeakyRelu { slope } => {
                if x >= T::zero() {
                    x
                } else {
                    T::of(slope as f64) * x
                }
            }
            Self::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Self::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output. Valid because
    /// LeakyReLU with a positive slope preserves sign.
    #[inline]
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Self::LeakyRelu { slope } => {
                if y >= T::zero() {
                    T::one()
                } else {
                    T::of(slope as f64)
                }
            }
            Self::Sigmoid => y * (T::one() - y),
            Self::Identity => T::one(),
        }
    }

    pub fn forward<T: Real>(self, xs: &mut [T]) {
        xs.iter_mut().for_each(|x| *x = self.apply(*x));
    }

    /// Turns `grad` (w.r.t. the outputs `ys`) into the gradient w.r.t. the
    /// pre-activation inputs, in place.
    pub fn backward<T: Real>(self, ys: &[T], grad: &mut [T]) {
        if self == Self::Identity {
            return;
        }
        for (g, &y) in grad.iter_mut().zip(ys) {
            *g = *g * self.derivative_from_output(y);
        }
    }
}
