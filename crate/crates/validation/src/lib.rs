//! Shared pieces of the acceptance run: the criterion outcome type and
//! direct-loop convolution oracles that do not go through the library's
//! kernels.


use blockca::linops::KernelSpec;
use blockca::nn::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-10;

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random kernel whose bias fits the convolution (`conv = true`) or its transpose.
pub fn random_case(rng: &mut ChaCha8Rng, conv: bool) -> (KernelSpec, (usize, usize, usize)) {
    let (size, stride) = if rng.gen_bool(0.5) { (2, 2) } else { (1, 1) };
    let out = rng.gen_range(1..=8);
    let inp = rng.gen_range(1..=8);
    let bias_len = if conv { out } else { inp };
    let (weights, bias) = (random_vec(rng, out * inp * size * size), random_vec(rng, bias_len));
    let kernel = KernelSpec::new(out, inp, size, size, stride, weights, bias).unwrap();
    let side = if conv { 2 * rng.gen_range(1..=8) } else { rng.gen_range(1..=8) };
    let channels = if conv { inp } else { out };
    (kernel, (channels, side, side))
}

/// Direct loops, independent of the library's kernels.
pub fn naive_conv(k: &KernelSpec, x: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = ((h - k.height) / k.stride + 1, (w - k.width) / k.stride + 1);
    let mut y = vec![0.0; k.out_channels * oh * ow];
    for o in 0..k.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = k.bias[o];
                for i in 0..c {
                    for ky in 0..k.height {
                        for kx in 0..k.width {
                            let (iy, ix) = (oy * k.stride + ky, ox * k.stride + kx);
                            acc += k.weight(o, i, ky, kx) * x[(i * h + iy) * w + ix];
                        }
                    }
                }
                y[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y
}

/// Scatter form of the transposed convolution.
pub fn naive_deconv(k: &KernelSpec, x: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = ((h - 1) * k.stride + k.height, (w - 1) * k.stride + k.width);
    let mut y = vec![0.0; k.in_channels * oh * ow];
    for i in 0..k.in_channels {
        y[i * oh * ow..(i + 1) * oh * ow].iter_mut().for_each(|v| *v = k.bias[i]);
    }
    for o in 0..c {
        for iy in 0..h {
            for ix in 0..w {
                let v = x[(o * h + iy) * w + ix];
                for i in 0..k.in_channels {
                    for ky in 0..k.height {
                        for kx in 0..k.width {
                            y[(i * oh + iy * k.stride + ky) * ow + ix * k.stride + kx] += k.weight(o, i, ky, kx) * v;
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn as_batch(x: &[f64], (c, h, w): (usize, usize, usize)) -> Tensor {
    Tensor::from_vec(&[1, c, h, w], x.to_vec()).unwrap()
}

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}
