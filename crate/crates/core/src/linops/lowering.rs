//! Lowering strided convolutions and transposed convolutions to dense
//! (Toeplitz-structured) real matrices.
//!
//! Tensors are flattened channel-major, then row-major: index
//! `(c * height + y) * width + x`.

use crate::{Error, Result};

/// Convolution kernel with weights laid out `(out, in, height, width)`.
///
/// The same kernel drives both a convolution (`in -> out` channels) and its
/// transpose (`out -> in` channels), which makes the two adjoint for zero
/// bias. `bias` holds one entry per channel the layer produces: `out_channels`
/// entries for a convolution, `in_channels` for a transposed convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl KernelSpec {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        height: usize,
        width: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || height == 0 || width == 0 || stride == 0 {
            return Err(Error::Shape("kernel dimensions and stride must be positive".into()));
        }
        let expected = out_channels * in_channels * height * width;
        if weights.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: weights.len() });
        }
        if bias.len() != out_channels && bias.len() != in_channels {
            return Err(Error::Shape(format!(
                "bias of length {} fits neither {out_channels} nor {in_channels} channels",
                bias.len()
            )));
        }
        Ok(Self { out_channels, in_channels, height, width, stride, weights, bias })
    }

    /// All-zero kernel; `bias_len` picks the convolution or transposed side.
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize, stride: usize, bias_len: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            height: size,
            width: size,
            stride,
            weights: vec![0.0; out_channels * in_channels * size * size],
            bias: vec![0.0; bias_len],
        }
    }

    pub fn weight(&self, o: usize, i: usize, kh: usize, kw: usize) -> f64 {
        self.weights[self.weight_index(o, i, kh, kw)]
    }

    pub fn weight_index(&self, o: usize, i: usize, kh: usize, kw: usize) -> usize {
        ((o * self.in_channels + i) * self.height + kh) * self.width + kw
    }

    /// Output spatial size of the convolution over a `height × width` input.
    pub fn conv_output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let fits = |len: usize, k: usize| len >= k && (len - k) % self.stride == 0;
        if !fits(height, self.height) || !fits(width, self.width) {
            return Err(Error::Shape(format!(
                "{height}×{width} input does not tile exactly under a {}×{} stride-{} kernel",
                self.height, self.width, self.stride
            )));
        }
        Ok(((height - self.height) / self.stride + 1, (width - self.width) / self.stride + 1))
    }

    /// Output spatial size of the transposed convolution.
    pub fn deconv_output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if height == 0 || width == 0 {
            return Err(Error::Shape("empty input".into()));
        }
        Ok(((height - 1) * self.stride + self.height, (width - 1) * self.stride + self.width))
    }
}

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: other.rows });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a != 0.0 {
                    for (d, b) in dst.iter_mut().zip(&other.data[k * other.cols..(k + 1) * other.cols]) {
                        *d += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// `y = matrix · x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealAffine {
    pub matrix: DenseMatrix,
    pub offset: Vec<f64>,
}

impl RealAffine {
    /// The affine map `self` followed by `next`.
    pub fn then(&self, next: &RealAffine) -> Result<RealAffine> {
        let matrix = next.matrix.mul(&self.matrix)?;
        let offset = next.apply(&self.offset)?;
        Ok(RealAffine { matrix, offset })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.matrix.mul_vec(x)?;
        for (v, b) in y.iter_mut().zip(&self.offset) {
            *v += b;
        }
        Ok(y)
    }
}

/// Convolution over an input of shape `(channels, height, width)` as a matrix.
/// Row `(o, y, x)` holds the kernel weights at the columns of the input
/// patch that output pixel reads.
pub fn conv_to_matrix(kernel: &KernelSpec, input_shape: (usize, usize, usize)) -> Result<RealAffine> {
    let (c, h, w) = input_shape;
    if c != kernel.in_channels {
        return Err(Error::DimensionMismatch { expected: kernel.in_channels, actual: c });
    }
    if kernel.bias.len() != kernel.out_channels {
        return Err(Error::Shape("convolution bias must have out_channels entries".into()));
    }
    let (oh, ow) = kernel.conv_output_size(h, w)?;
    let mut matrix = DenseMatrix::zeros(kernel.out_channels * oh * ow, c * h * w);
    let mut offset = Vec::with_capacity(matrix.rows);
    for o in 0..kernel.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let row = (o * oh + y) * ow + x;
                for i in 0..c {
                    for kh in 0..kernel.height {
                        for kw in 0..kernel.width {
                            let col = (i * h + y * kernel.stride + kh) * w + x * kernel.stride + kw;
                            matrix.set(row, col, kernel.weight(o, i, kh, kw));
                        }
                    }
                }
                offset.push(kernel.bias[o]);
            }
        }
    }
    Ok(RealAffine { matrix, offset })
}

/// Transposed convolution over an input of shape `(kernel.out_channels, h, w)`:
/// the transpose of the convolution lowering on the upsampled shape, plus the
/// per-channel bias.
pub fn deconv_to_matrix(kernel: &KernelSpec, input_shape: (usize, usize, usize)) -> Result<RealAffine> {
    let (c, h, w) = input_shape;
    if c != kernel.out_channels {
        return Err(Error::DimensionMismatch { expected: kernel.out_channels, actual: c });
    }
    if kernel.bias.len() != kernel.in_channels {
        return Err(Error::Shape("transposed convolution bias must have in_channels entries".into()));
    }
    let (oh, ow) = kernel.deconv_output_size(h, w)?;
    let mut as_conv = kernel.clone();
    as_conv.bias = vec![0.0; kernel.out_channels];
    let forward = conv_to_matrix(&as_conv, (kernel.in_channels, oh, ow))?;
    let matrix = forward.matrix.transpose();
    let offset = (0..kernel.in_channels).flat_map(|i| std::iter::repeat(kernel.bias[i]).take(oh * ow)).collect();
    Ok(RealAffine { matrix, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_is_diagonal() {
        let k = KernelSpec::new(1, 1, 1, 1, 1, vec![2.5], vec![0.0]).unwrap();
        let m = conv_to_matrix(&k, (1, 3, 3)).unwrap();
        let mut want = DenseMatrix::identity(9);
        want.data.iter_mut().for_each(|v| *v *= 2.5);
        assert_eq!(m.matrix, want);
        let d = deconv_to_matrix(&k, (1, 3, 3)).unwrap();
        assert_eq!(d.matrix, m.matrix);
    }

    #[test]
    fn two_by_two_stride_two_rows() {
        let weights = vec![1.0, 2.0, 3.0, 4.0];
        let k = KernelSpec::new(1, 1, 2, 2, 2, weights, vec![0.5]).unwrap();
        let m = conv_to_matrix(&k, (1, 4, 4)).unwrap();
        assert_eq!((m.matrix.rows, m.matrix.cols), (4, 16));
        // output pixel (1, 0) reads input rows 2..4, columns 0..2
        let row = 2;
        let nonzero: Vec<(usize, f64)> =
            (0..16).filter(|&c| m.matrix.get(row, c) != 0.0).map(|c| (c, m.matrix.get(row, c))).collect();
        assert_eq!(nonzero, vec![(8, 1.0), (9, 2.0), (12, 3.0), (13, 4.0)]);
        assert_eq!(m.offset, vec![0.5; 4]);
    }

    #[test]
    fn deconv_is_transposed_conv() {
        let weights: Vec<f64> = (0..2 * 3 * 4).map(|v| v as f64 * 0.1 - 1.0).collect();
        let conv_k = KernelSpec::new(2, 3, 2, 2, 2, weights.clone(), vec![0.0; 2]).unwrap();
        let deconv_k = KernelSpec::new(2, 3, 2, 2, 2, weights, vec![0.0; 3]).unwrap();
        let c = conv_to_matrix(&conv_k, (3, 6, 4)).unwrap();
        let d = deconv_to_matrix(&deconv_k, (2, 3, 2)).unwrap();
        assert_eq!(d.matrix, c.matrix.transpose());
    }

    #[test]
    fn composition_matches_sequential_application() {
        let first = RealAffine { matrix: DenseMatrix { rows: 2, cols: 2, data: vec![1.0, 2.0, 0.0, 1.0] }, offset: vec![1.0, -1.0] };
        let second = RealAffine { matrix: DenseMatrix { rows: 1, cols: 2, data: vec![3.0, -1.0] }, offset: vec![0.5] };
        let x = [2.0, 5.0];
        let fused = first.then(&second).unwrap();
        assert_eq!(fused.apply(&x).unwrap(), second.apply(&first.apply(&x).unwrap()).unwrap());
        assert!(second.then(&second).is_err());
    }

    #[test]
    fn shape_errors() {
        let k = KernelSpec::zeros(1, 1, 2, 2, 1);
        assert!(conv_to_matrix(&k, (1, 5, 4)).is_err());
        assert!(conv_to_matrix(&k, (2, 4, 4)).is_err());
        assert!(deconv_to_matrix(&k, (2, 4, 4)).is_err());
        assert!(KernelSpec::new(1, 1, 2, 2, 2, vec![0.0; 3], vec![0.0]).is_err());
        assert!(KernelSpec::new(1, 1, 2, 2, 0, vec![0.0; 4], vec![0.0]).is_err());
    }
}
