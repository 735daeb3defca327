use crate::ca::Grid;
use crate::{Error, Result};

/// Dense row-major array of `f64`. Activations use `(batch, channels, height, width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || data.len() != expected {
            return Err(Error::Shape(format!("{} values do not fill shape {:?}", data.len(), shape)));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Stacks grids into a `(batch, 1, n, n)` tensor of 0.0/1.0 values.
    pub fn from_grids<'a, I>(grids: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Grid>,
    {
        let mut data = Vec::new();
        let mut n = None;
        let mut batch = 0;
        for g in grids {
            match n {
                None => n = Some(g.n()),
                Some(m) if m != g.n() => return Err(Error::DimensionMismatch { expected: m, actual: g.n() }),
                _ => {}
            }
            data.extend(g.cells().iter().map(|&c| c as f64));
            batch += 1;
        }
        let n = n.ok_or_else(|| Error::Shape("no grids to stack".into()))?;
        Tensor::from_vec(&[batch, 1, n, n], data)
    }

    /// Thresholds a `(batch, 1, n, n)` tensor at 0.5 into grids.
    pub fn to_grids(&self) -> Result<Vec<Grid>> {
        let (b, c, h, w) = self.dims4()?;
        if c != 1 || h != w {
            return Err(Error::Shape(format!("expected single-channel square maps, got {:?}", self.shape)));
        }
        self.data
            .chunks_exact(h * w)
            .take(b)
            .map(|chunk| Grid::from_cells(h, chunk.iter().map(|&p| (p > 0.5) as u8).collect()))
            .collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(Error::Shape(format!("expected a 4-d tensor, got shape {:?}", self.shape))),
        }
    }

    /// Samples `start..start + count` of the batch dimension.
    pub fn batch_slice(&self, start: usize, count: usize) -> Result<Tensor> {
        let (b, c, h, w) = self.dims4()?;
        if start + count > b {
            return Err(Error::Shape(format!("batch slice {start}..{} out of {b}", start + count)));
        }
        let per = c * h * w;
        Tensor::from_vec(&[count, c, h, w], self.data[start * per..(start + count) * per].to_vec())
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_round_trip() {
        let g = Grid::from_rows(&["10", "01"]).unwrap();
        let h = Grid::from_rows(&["11", "00"]).unwrap();
        let t = Tensor::from_grids([&g, &h]).unwrap();
        assert_eq!(t.shape(), &[2, 1, 2, 2]);
        assert_eq!(t.to_grids().unwrap(), vec![g, h]);
    }

    #[test]
    fn shape_validation() {
        assert!(Tensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::from_vec(&[0, 2], vec![]).is_err());
        assert!(Tensor::zeros(&[3]).dims4().is_err());
        let a = Grid::new(2).unwrap();
        let b = Grid::new(4).unwrap();
        assert!(Tensor::from_grids([&a, &b]).is_err());
    }
}
