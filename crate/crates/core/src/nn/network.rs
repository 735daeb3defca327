use rand::Rng;

use crate::linops::KernelSpec;
use crate::nn::ops::{self, Activation, Geometry};
use crate::nn::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2x2s2,
    Deconv2x2s2,
    Conv1x1,
    ReLU,
    Sigmoid,
    Bypass,
    Pad1,
    Crop1,
    WrapShift,
    UnwrapShift,
}

impl LayerKind {
    pub const ALL: [LayerKind; 10] = [
        LayerKind::Conv2x2s2,
        LayerKind::Deconv2x2s2,
        LayerKind::Conv1x1,
        LayerKind::ReLU,
        LayerKind::Sigmoid,
        LayerKind::Bypass,
        LayerKind::Pad1,
        LayerKind::Crop1,
        LayerKind::WrapShift,
        LayerKind::UnwrapShift,
    ];

    pub fn has_kernel(self) -> bool {
        matches!(self, LayerKind::Conv2x2s2 | LayerKind::Deconv2x2s2 | LayerKind::Conv1x1)
    }
}

/// One layer. Convolution kinds carry their kernel; the rest are parameter-free.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Conv2x2s2(KernelSpec),
    /// Kernel in convolution layout: maps `out_channels -> in_channels`.
    Deconv2x2s2(KernelSpec),
    Conv1x1(KernelSpec),
    Activation(Activation),
    Geometry(Geometry),
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv2x2s2(_) => LayerKind::Conv2x2s2,
            LayerSpec::Deconv2x2s2(_) => LayerKind::Deconv2x2s2,
            LayerSpec::Conv1x1(_) => LayerKind::Conv1x1,
            LayerSpec::Activation(Activation::ReLU) => LayerKind::ReLU,
            LayerSpec::Activation(Activation::Sigmoid) => LayerKind::Sigmoid,
            LayerSpec::Activation(Activation::Bypass) => LayerKind::Bypass,
            LayerSpec::Geometry(Geometry::Pad1) => LayerKind::Pad1,
            LayerSpec::Geometry(Geometry::Crop1) => LayerKind::Crop1,
            LayerSpec::Geometry(Geometry::WrapShift) => LayerKind::WrapShift,
            LayerSpec::Geometry(Geometry::UnwrapShift) => LayerKind::UnwrapShift,
        }
    }

    /// Builds a layer of `kind`; `kernel` must be present exactly for convolution kinds.
    pub fn from_parts(kind: LayerKind, kernel: Option<KernelSpec>) -> Result<LayerSpec> {
        let layer = match (kind, kernel) {
            (LayerKind::Conv2x2s2, Some(k)) => LayerSpec::Conv2x2s2(k),
            (LayerKind::Deconv2x2s2, Some(k)) => LayerSpec::Deconv2x2s2(k),
            (LayerKind::Conv1x1, Some(k)) => LayerSpec::Conv1x1(k),
            (LayerKind::ReLU, None) => LayerSpec::Activation(Activation::ReLU),
            (LayerKind::Sigmoid, None) => LayerSpec::Activation(Activation::Sigmoid),
            (LayerKind::Bypass, None) => LayerSpec::Activation(Activation::Bypass),
            (LayerKind::Pad1, None) => LayerSpec::Geometry(Geometry::Pad1),
            (LayerKind::Crop1, None) => LayerSpec::Geometry(Geometry::Crop1),
            (LayerKind::WrapShift, None) => LayerSpec::Geometry(Geometry::WrapShift),
            (LayerKind::UnwrapShift, None) => LayerSpec::Geometry(Geometry::UnwrapShift),
            (kind, k) => {
                return Err(Error::Config(format!(
                    "layer {kind:?} {} a kernel",
                    if k.is_some() { "does not take" } else { "requires" }
                )))
            }
        };
        layer.check_kernel()?;
        Ok(layer)
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        match self {
            LayerSpec::Conv2x2s2(k) | LayerSpec::Deconv2x2s2(k) | LayerSpec::Conv1x1(k) => Some(k),
            _ => None,
        }
    }

    fn kernel_mut(&mut self) -> Option<&mut KernelSpec> {
        match self {
            LayerSpec::Conv2x2s2(k) | LayerSpec::Deconv2x2s2(k) | LayerSpec::Conv1x1(k) => Some(k),
            _ => None,
        }
    }

    /// Randomly initialised 2×2 stride-2 convolution.
    pub fn conv2x2s2<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> LayerSpec {
        let fan_in = in_channels * 4;
        LayerSpec::Conv2x2s2(uniform_kernel(out_channels, in_channels, 2, 2, out_channels, fan_in, rng))
    }

    /// Randomly initialised 2×2 stride-2 transposed convolution `in -> out`.
    pub fn deconv2x2s2<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> LayerSpec {
        // every output pixel receives exactly one tap per input channel
        let fan_in = in_channels;
        LayerSpec::Deconv2x2s2(uniform_kernel(in_channels, out_channels, 2, 2, out_channels, fan_in, rng))
    }

    pub fn conv1x1<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> LayerSpec {
        LayerSpec::Conv1x1(uniform_kernel(out_channels, in_channels, 1, 1, out_channels, in_channels, rng))
    }

    fn check_kernel(&self) -> Result<()> {
        let (k, size, stride, bias_len) = match self {
            LayerSpec::Conv2x2s2(k) => (k, 2, 2, k.out_channels),
            LayerSpec::Deconv2x2s2(k) => (k, 2, 2, k.in_channels),
            LayerSpec::Conv1x1(k) => (k, 1, 1, k.out_channels),
            _ => return Ok(()),
        };
        if k.height != size || k.width != size || k.stride != stride {
            return Err(Error::Config(format!(
                "{:?} needs a {size}×{size} stride-{stride} kernel, got {}×{} stride-{}",
                self.kind(),
                k.height,
                k.width,
                k.stride
            )));
        }
        if k.weights.len() != k.out_channels * k.in_channels * size * size || k.bias.len() != bias_len {
            return Err(Error::Config(format!("{:?} kernel arrays have the wrong length", self.kind())));
        }
        Ok(())
    }

    /// `(channels, height, width)` after this layer.
    pub fn output_shape(&self, shape: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = shape;
        match self {
            LayerSpec::Conv2x2s2(k) | LayerSpec::Conv1x1(k) => {
                if c != k.in_channels {
                    return Err(Error::Shape(format!("{:?} expects {} channels, got {c}", self.kind(), k.in_channels)));
                }
                let (oh, ow) = k.conv_output_size(h, w)?;
                Ok((k.out_channels, oh, ow))
            }
            LayerSpec::Deconv2x2s2(k) => {
                if c != k.out_channels {
                    return Err(Error::Shape(format!("Deconv2x2s2 expects {} channels, got {c}", k.out_channels)));
                }
                let (oh, ow) = k.deconv_output_size(h, w)?;
                Ok((k.in_channels, oh, ow))
            }
            LayerSpec::Activation(_) => Ok(shape),
            LayerSpec::Geometry(g) => {
                let (oh, ow) = ops::geometry_output_size(*g, h, w)?;
                Ok((c, oh, ow))
            }
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            LayerSpec::Conv2x2s2(k) | LayerSpec::Conv1x1(k) => ops::conv_forward(k, input),
            LayerSpec::Deconv2x2s2(k) => ops::deconv_forward(k, input),
            LayerSpec::Activation(a) => Ok(ops::activation_forward(*a, input)),
            LayerSpec::Geometry(g) => ops::geometry_forward(*g, input),
        }
    }
}

fn uniform_kernel<R: Rng + ?Sized>(
    out_channels: usize,
    in_channels: usize,
    height: usize,
    width: usize,
    bias_len: usize,
    fan_in: usize,
    rng: &mut R,
) -> KernelSpec {
    let bound = (1.0 / fan_in as f64).sqrt();
    let mut draw = |len: usize| (0..len).map(|_| rng.gen_range(-bound..=bound)).collect::<Vec<f64>>();
    let weights = draw(out_channels * in_channels * height * width);
    let bias = draw(bias_len);
    let stride = height;
    KernelSpec { out_channels, in_channels, height, width, stride, weights, bias }
}

/// Per-layer inputs recorded by [`NetworkSpec::forward`]; `activations[i]`
/// is the input of layer `i` and the last entry is the network output.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Tensor>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn activations(&self) -> &[Tensor] {
        &self.activations
    }
}

/// Gradients for every parameter array, ordered like [`NetworkSpec::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&v| v == 0.0)
    }
}

/// An ordered stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        for l in &layers {
            l.check_kernel()?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Shape after every layer for an input of `(channels, height, width)`.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        self.layers.iter().try_fold(input, |shape, l| l.output_shape(shape))
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for l in &self.layers {
            x = l.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for l in &self.layers {
            let next = l.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, ForwardCache { activations }))
    }

    /// Reverse-mode gradients of every parameter given `dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Tensor) -> Result<Gradients> {
        Ok(self.backward_with_input(cache, loss_grad)?.0)
    }

    /// Like [`backward`](Self::backward) but also returns `dL/d(input)`.
    pub fn backward_with_input(&self, cache: &ForwardCache, loss_grad: &Tensor) -> Result<(Gradients, Tensor)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::MissingCache);
        }
        if loss_grad.shape() != cache.output().shape() {
            return Err(Error::Shape(format!(
                "loss gradient shape {:?} differs from output {:?}",
                loss_grad.shape(),
                cache.output().shape()
            )));
        }
        let mut per_layer: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; self.layers.len()];
        let mut grad = loss_grad.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[idx];
            grad = match layer {
                LayerSpec::Conv2x2s2(k) | LayerSpec::Conv1x1(k) => {
                    let g = ops::conv_backward(k, input, &grad)?;
                    per_layer[idx] = Some((g.weights, g.bias));
                    g.input
                }
                LayerSpec::Deconv2x2s2(k) => {
                    let g = ops::deconv_backward(k, input, &grad)?;
                    per_layer[idx] = Some((g.weights, g.bias));
                    g.input
                }
                LayerSpec::Activation(a) => ops::activation_backward(*a, input, &cache.activations[idx + 1], &grad),
                LayerSpec::Geometry(g) => ops::geometry_backward(*g, &grad)?,
            };
        }
        let tensors = per_layer.into_iter().flatten().flat_map(|(w, b)| [w, b]).collect();
        Ok((Gradients { tensors }, grad))
    }

    /// Weight and bias arrays of every kernel layer, in layer order.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .filter_map(|l| l.kernel())
            .flat_map(|k| [&k.weights[..], &k.bias[..]])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .filter_map(|l| l.kernel_mut())
            .flat_map(|k| [&mut k.weights[..], &mut k.bias[..]])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { tensors: self.parameters().iter().map(|p| vec![0.0; p.len()]).collect() }
    }
}
