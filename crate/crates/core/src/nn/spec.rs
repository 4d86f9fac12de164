use std::fmt;
use std::str::FromStr;

use super::Activation;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    ConvTranspose,
}

/// One same-padded layer: convolution or transposed convolution followed by
/// an activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub activation: Activation,
    pub bias: bool,
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Conv,
            filters,
            kernel,
            stride: 1,
            activation,
            bias: true,
        }
    }

    pub fn conv_transpose(filters: usize, kernel: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::ConvTranspose,
            ..Self::conv(filters, kernel, activation)
        }
    }

    /// Weight tensor shape for a layer fed with `in_channels` channels.
    pub fn weight_shape(&self, in_channels: usize) -> [usize; 4] {
        let k = self.kernel;
        match self.kind {
            LayerKind::Conv => [self.filters, in_channels, k, k],
            LayerKind::ConvTranspose => [in_channels, self.filters, k, k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 {
            return Err(Error::InvalidParameter("layer needs at least one filter".into()));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        if let Activation::LeakyRelu { slope } = self.activation {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "LeakyReLU slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }
}

/// The two network families the toolkit trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    /// Three convolutions: 128 @ 9×9, 64 @ 3×3, out @ 5×5.
    Srcnn,
    /// Three convolutions, two transposed convolutions and a 1×1 head.
    MSrcnn,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Srcnn => "srcnn",
            Self::MSrcnn => "msrcnn",
        }
    }

    pub fn spec(self, channels: usize) -> NetworkSpec {
        match self {
            Self::Srcnn => NetworkSpec::srcnn(channels),
            Self::MSrcnn => NetworkSpec::msrcnn(channels),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "srcnn" => Ok(Self::Srcnn),
            "msrcnn" => Ok(Self::MSrcnn),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// The original SRCNN layout. `channels` is both the input and the
    /// output channel count (1 for luma-only operation).
    pub fn srcnn(channels: usize) -> Self {
        let leaky = Activation::leaky_relu();
        Self {
            input_channels: channels,
            layers: vec![
                LayerSpec::conv(128, 9, leaky),
                LayerSpec::conv(64, 3, leaky),
                LayerSpec::conv(channels, 5, Activation::Sigmoid),
            ],
        }
    }

    /// The modified SRCNN: the upscaling stage is replaced by two stride-1
    /// transposed convolutions.
    pub fn msrcnn(channels: usize) -> Self {
        let leaky = Activation::leaky_relu();
        Self {
            input_channels: channels,
            layers: vec![
                LayerSpec::conv(64, 5, leaky),
                LayerSpec::conv(64, 5, leaky),
                LayerSpec::conv(16, 3, leaky),
                LayerSpec::conv_transpose(32, 3, leaky),
                LayerSpec::conv_transpose(32, 3, leaky),
                LayerSpec::conv(channels, 1, Activation::Sigmoid),
            ],
        }
    }

    /// Caps every hidden layer at `cap` filters, leaving the output layer
    /// alone. Used to shrink presets for gradient checks.
    pub fn with_filter_cap(mut self, cap: usize) -> Self {
        let last = self.layers.len().saturating_sub(1);
        for layer in &mut self.layers[..last] {
            layer.filters = layer.filters.min(cap);
        }
        self
    }

    /// Replaces the slope of every LeakyReLU layer.
    pub fn with_leaky_slope(mut self, slope: f32) -> Self {
        for layer in &mut self.layers {
            if let Activation::LeakyRelu { .. } = layer.activation {
                layer.activation = Activation::LeakyRelu { slope };
            }
        }
        self
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(self.input_channels, |l| l.filters)
    }

    /// Input channel count of every layer.
    pub fn layer_inputs(&self) -> Vec<usize> {
        let mut c = self.input_channels;
        self.layers
            .iter()
            .map(|l| std::mem::replace(&mut c, l.filters))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::InvalidParameter(
                "network needs at least one input channel".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("network has no layers".into()));
        }
        self.layers.iter().try_for_each(LayerSpec::validate)
    }

    /// Output spatial dims for an `h × w` input.
    pub fn output_dims(&self, mut h: usize, mut w: usize) -> (usize, usize) {
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv => {
                    h = h.div_ceil(l.stride);
                    w = w.div_ceil(l.stride);
                }
                LayerKind::ConvTranspose => {
                    h *= l.stride;
                    w *= l.stride;
                }
            }
        }
        (h, w)
    }
}
