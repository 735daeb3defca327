//! Forward and backward kernels for every layer kind.

use crate::linops::KernelSpec;
use crate::nn::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    ReLU,
    Sigmoid,
    /// Identity.
    Bypass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometry {
    /// Adds a ring of zeros.
    Pad1,
    /// Removes the outer ring.
    Crop1,
    /// Torus translation by `(+1, +1)`.
    WrapShift,
    /// Torus translation by `(-1, -1)`.
    UnwrapShift,
}

fn conv_linear(kernel: &KernelSpec, input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    if c != kernel.in_channels {
        return Err(Error::Shape(format!("convolution expects {} channels, got {c}", kernel.in_channels)));
    }
    let (oh, ow) = kernel.conv_output_size(h, w)?;
    let s = kernel.stride;
    let mut out = Tensor::zeros(&[b, kernel.out_channels, oh, ow]);
    let x = input.data();
    let y = out.data_mut();
    for bi in 0..b {
        for o in 0..kernel.out_channels {
            let out_plane = &mut y[(bi * kernel.out_channels + o) * oh * ow..][..oh * ow];
            for i in 0..c {
                let in_plane = &x[(bi * c + i) * h * w..][..h * w];
                for kh in 0..kernel.height {
                    for kw in 0..kernel.width {
                        let wv = kernel.weight(o, i, kh, kw);
                        for oy in 0..oh {
                            let in_row = &in_plane[(oy * s + kh) * w + kw..];
                            let out_row = &mut out_plane[oy * ow..(oy + 1) * ow];
                            for (ox, v) in out_row.iter_mut().enumerate() {
                                *v += wv * in_row[ox * s];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn deconv_linear(kernel: &KernelSpec, input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    if c != kernel.out_channels {
        return Err(Error::Shape(format!(
            "transposed convolution expects {} channels, got {c}",
            kernel.out_channels
        )));
    }
    let (oh, ow) = kernel.deconv_output_size(h, w)?;
    let s = kernel.stride;
    let ci = kernel.in_channels;
    let mut out = Tensor::zeros(&[b, ci, oh, ow]);
    let x = input.data();
    let y = out.data_mut();
    for bi in 0..b {
        for i in 0..ci {
            let out_plane = &mut y[(bi * ci + i) * oh * ow..][..oh * ow];
            for o in 0..c {
                let in_plane = &x[(bi * c + o) * h * w..][..h * w];
                for kh in 0..kernel.height {
                    for kw in 0..kernel.width {
                        let wv = kernel.weight(o, i, kh, kw);
                        for iy in 0..h {
                            let in_row = &in_plane[iy * w..(iy + 1) * w];
                            let out_row = &mut out_plane[(iy * s + kh) * ow + kw..];
                            for (ix, &v) in in_row.iter().enumerate() {
                                out_row[ix * s] += wv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn add_channel_bias(t: &mut Tensor, bias: &[f64]) -> Result<()> {
    let (b, c, h, w) = t.dims4()?;
    if bias.len() != c {
        return Err(Error::Shape(format!("bias has {} entries for {c} channels", bias.len())));
    }
    for (idx, plane) in t.data_mut().chunks_exact_mut(h * w).enumerate().take(b * c) {
        let bv = bias[idx % c];
        plane.iter_mut().for_each(|v| *v += bv);
    }
    Ok(())
}

/// Strided cross-correlation without padding.
pub fn conv_forward(kernel: &KernelSpec, input: &Tensor) -> Result<Tensor> {
    if kernel.bias.len() != kernel.out_channels {
        return Err(Error::Shape("convolution bias must have out_channels entries".into()));
    }
    let mut out = conv_linear(kernel, input)?;
    add_channel_bias(&mut out, &kernel.bias)?;
    Ok(out)
}

/// Transposed convolution: `out_channels -> in_channels` of `kernel`.
pub fn deconv_forward(kernel: &KernelSpec, input: &Tensor) -> Result<Tensor> {
    if kernel.bias.len() != kernel.in_channels {
        return Err(Error::Shape("transposed convolution bias must have in_channels entries".into()));
    }
    let mut out = deconv_linear(kernel, input)?;
    add_channel_bias(&mut out, &kernel.bias)?;
    Ok(out)
}

/// `Σ small[b,o,y,x] · big[b,i,y·s+kh,x·s+kw]` for every weight position.
fn weight_grad(kernel: &KernelSpec, big: &Tensor, small: &Tensor) -> Result<Vec<f64>> {
    let (b, ci, h, w) = big.dims4()?;
    let (b2, co, sh, sw) = small.dims4()?;
    if b != b2 || ci != kernel.in_channels || co != kernel.out_channels {
        return Err(Error::Shape("weight gradient operands do not match the kernel".into()));
    }
    let s = kernel.stride;
    let mut grad = vec![0.0; kernel.weights.len()];
    for bi in 0..b {
        for o in 0..co {
            let sp = &small.data()[(bi * co + o) * sh * sw..][..sh * sw];
            for i in 0..ci {
                let bp = &big.data()[(bi * ci + i) * h * w..][..h * w];
                for kh in 0..kernel.height {
                    for kw in 0..kernel.width {
                        let mut acc = 0.0;
                        for y in 0..sh {
                            let brow = &bp[(y * s + kh) * w + kw..];
                            let srow = &sp[y * sw..(y + 1) * sw];
                            for (x, &g) in srow.iter().enumerate() {
                                acc += g * brow[x * s];
                            }
                        }
                        grad[kernel.weight_index(o, i, kh, kw)] += acc;
                    }
                }
            }
        }
    }
    Ok(grad)
}

fn channel_sums(t: &Tensor) -> Result<Vec<f64>> {
    let (b, c, h, w) = t.dims4()?;
    let mut sums = vec![0.0; c];
    for (idx, plane) in t.data().chunks_exact(h * w).enumerate().take(b * c) {
        sums[idx % c] += plane.iter().sum::<f64>();
    }
    Ok(sums)
}

/// Gradients of a convolution layer: `(input, weights, bias)`.
pub struct KernelGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv_backward(kernel: &KernelSpec, input: &Tensor, grad_out: &Tensor) -> Result<KernelGrads> {
    Ok(KernelGrads {
        input: deconv_linear(kernel, grad_out)?,
        weights: weight_grad(kernel, input, grad_out)?,
        bias: channel_sums(grad_out)?,
    })
}

/// The input gradient of a transposed convolution is the plain convolution
/// of the output gradient with the same kernel.
pub fn deconv_backward(kernel: &KernelSpec, input: &Tensor, grad_out: &Tensor) -> Result<KernelGrads> {
    Ok(KernelGrads {
        input: conv_linear(kernel, grad_out)?,
        weights: weight_grad(kernel, grad_out, input)?,
        bias: channel_sums(grad_out)?,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation_forward(kind: Activation, input: &Tensor) -> Tensor {
    let mut out = input.clone();
    match kind {
        Activation::ReLU => out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => out.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Bypass => {}
    }
    out
}

/// `output` is the forward result for `input`; ReLU's derivative at 0 is 0.
pub fn activation_backward(kind: Activation, input: &Tensor, output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    match kind {
        Activation::ReLU => {
            for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
                if x <= 0.0 {
                    *gv = 0.0;
                }
            }
        }
        Activation::Sigmoid => {
            for (gv, &y) in g.data_mut().iter_mut().zip(output.data()) {
                *gv *= y * (1.0 - y);
            }
        }
        Activation::Bypass => {}
    }
    g
}

fn pad1(input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    let (ph, pw) = (h + 2, w + 2);
    let mut out = Tensor::zeros(&[b, c, ph, pw]);
    for (src, dst) in input.data().chunks_exact(h * w).zip(out.data_mut().chunks_exact_mut(ph * pw)) {
        for y in 0..h {
            dst[(y + 1) * pw + 1..(y + 1) * pw + 1 + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }
    Ok(out)
}

fn crop1(input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    if h < 3 || w < 3 {
        return Err(Error::Shape(format!("cannot crop a {h}×{w} map")));
    }
    let (ch, cw) = (h - 2, w - 2);
    let mut out = Tensor::zeros(&[b, c, ch, cw]);
    for (src, dst) in input.data().chunks_exact(h * w).zip(out.data_mut().chunks_exact_mut(ch * cw)) {
        for y in 0..ch {
            dst[y * cw..(y + 1) * cw].copy_from_slice(&src[(y + 1) * w + 1..(y + 1) * w + 1 + cw]);
        }
    }
    Ok(out)
}

fn torus_shift(input: &Tensor, d: isize) -> Result<Tensor> {
    let (_, _, h, w) = input.dims4()?;
    let mut out = Tensor::zeros(input.shape());
    for (src, dst) in input.data().chunks_exact(h * w).zip(out.data_mut().chunks_exact_mut(h * w)) {
        for y in 0..h {
            let ty = (y as isize + d).rem_euclid(h as isize) as usize;
            for x in 0..w {
                let tx = (x as isize + d).rem_euclid(w as isize) as usize;
                dst[ty * w + tx] = src[y * w + x];
            }
        }
    }
    Ok(out)
}

pub fn geometry_forward(kind: Geometry, input: &Tensor) -> Result<Tensor> {
    match kind {
        Geometry::Pad1 => pad1(input),
        Geometry::Crop1 => crop1(input),
        Geometry::WrapShift => torus_shift(input, 1),
        Geometry::UnwrapShift => torus_shift(input, -1),
    }
}

/// Each geometry layer is linear and its adjoint is its counterpart.
pub fn geometry_backward(kind: Geometry, grad_out: &Tensor) -> Result<Tensor> {
    match kind {
        Geometry::Pad1 => crop1(grad_out),
        Geometry::Crop1 => pad1(grad_out),
        Geometry::WrapShift => torus_shift(grad_out, -1),
        Geometry::UnwrapShift => torus_shift(grad_out, 1),
    }
}

pub fn geometry_output_size(kind: Geometry, h: usize, w: usize) -> Result<(usize, usize)> {
    match kind {
        Geometry::Pad1 => Ok((h + 2, w + 2)),
        Geometry::Crop1 if h < 3 || w < 3 => Err(Error::Shape(format!("cannot crop a {h}×{w} map"))),
        Geometry::Crop1 => Ok((h - 2, w - 2)),
        Geometry::WrapShift | Geometry::UnwrapShift => Ok((h, w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_one_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_tensor(&mut rng, &[2, 1, 4, 4]);
        let k = KernelSpec::new(1, 1, 1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(conv_forward(&k, &x).unwrap(), x);
        assert_eq!(deconv_forward(&k, &x).unwrap(), x);
    }

    #[test]
    fn all_ones_kernel_counts_live_cells() {
        let g = crate::ca::Grid::from_rows(&["1100", "1000", "0001", "0111"]).unwrap();
        let x = Tensor::from_grids([&g]).unwrap();
        let k = KernelSpec::new(1, 1, 2, 2, 2, vec![1.0; 4], vec![0.0]).unwrap();
        assert_eq!(conv_forward(&k, &x).unwrap().data(), &[3.0, 0.0, 1.0, 3.0]);
    }

    #[test]
    fn delta_input_stamps_kernel() {
        let mut x = Tensor::zeros(&[1, 1, 2, 2]);
        x.data_mut()[3] = 1.0;
        let k = KernelSpec::new(1, 1, 2, 2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.0]).unwrap();
        let y = deconv_forward(&k, &x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
        let mut want = vec![0.0; 16];
        want[10] = 1.0;
        want[11] = 2.0;
        want[14] = 3.0;
        want[15] = 4.0;
        assert_eq!(y.data(), &want[..]);
    }

    #[test]
    fn activations() {
        let x = Tensor::from_vec(&[1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(activation_forward(Activation::ReLU, &x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(activation_forward(Activation::Bypass, &x), x);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
        let g = Tensor::from_vec(&[1, 1, 1, 3], vec![1.0; 3]).unwrap();
        let y = activation_forward(Activation::ReLU, &x);
        assert_eq!(activation_backward(Activation::ReLU, &x, &y, &g).data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn geometry_inverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, &[2, 3, 4, 6]);
        let padded = geometry_forward(Geometry::Pad1, &x).unwrap();
        assert_eq!(padded.shape(), &[2, 3, 6, 8]);
        assert_eq!(geometry_forward(Geometry::Crop1, &padded).unwrap(), x);
        let shifted = geometry_forward(Geometry::WrapShift, &x).unwrap();
        assert_eq!(geometry_forward(Geometry::UnwrapShift, &shifted).unwrap(), x);
        assert!(geometry_forward(Geometry::Crop1, &Tensor::zeros(&[1, 1, 2, 2])).is_err());
    }

    #[test]
    fn wrap_shift_moves_one_hot() {
        let mut x = Tensor::zeros(&[1, 1, 4, 4]);
        x.data_mut()[3 * 4 + 3] = 1.0;
        let y = geometry_forward(Geometry::WrapShift, &x).unwrap();
        assert_eq!(y.data()[0], 1.0);
        assert_eq!(y.data().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn geometry_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, &[1, 2, 6, 6]);
        for kind in [Geometry::Pad1, Geometry::Crop1, Geometry::WrapShift, Geometry::UnwrapShift] {
            let y = geometry_forward(kind, &x).unwrap();
            let g = random_tensor(&mut rng, y.shape());
            let back = geometry_backward(kind, &g).unwrap();
            assert!((y.dot(&g).unwrap() - x.dot(&back).unwrap()).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let k = KernelSpec::zeros(4, 2, 2, 2, 4);
        assert!(conv_forward(&k, &Tensor::zeros(&[1, 3, 4, 4])).is_err());
        assert!(conv_forward(&k, &Tensor::zeros(&[1, 2, 5, 4])).is_err());
        assert!(deconv_forward(&k, &Tensor::zeros(&[1, 4, 2, 2])).is_err());
        let kd = KernelSpec::zeros(4, 2, 2, 2, 2);
        assert!(deconv_forward(&kd, &Tensor::zeros(&[1, 3, 2, 2])).is_err());
        assert_eq!(deconv_forward(&kd, &Tensor::zeros(&[1, 4, 2, 2])).unwrap().shape(), &[1, 2, 4, 4]);
    }
}
