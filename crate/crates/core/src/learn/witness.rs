//! A trained network as an explicit alternation of dense affine maps and
//! ReLU, checked against the exact rule on binary grids.

use crate::ca::{step, EdgeMode, Grid, Phase};
use crate::linops::{conv_to_matrix, deconv_to_matrix, DenseMatrix, RealAffine};
use crate::nn::{Activation, Geometry, LayerSpec, NetworkSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Affine(RealAffine),
    Relu,
}

/// A network on `n×n` grids with every layer lowered and adjacent affine
/// layers multiplied out. Sigmoid is dropped: the output is a logit and
/// thresholding at 0 matches thresholding the probability at 0.5.
#[derive(Clone, Debug, PartialEq)]
pub struct LoweredNetwork {
    pub n: usize,
    pub stages: Vec<Stage>,
}

/// 0/1 matrix sending pixel `src(y, x)` of a `(c, h, w)` map to `(c, oh, ow)`.
fn index_map(c: usize, (h, w): (usize, usize), (oh, ow): (usize, usize), src: impl Fn(usize, usize) -> Option<(usize, usize)>) -> RealAffine {
    let mut matrix = DenseMatrix::zeros(c * oh * ow, c * h * w);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                if let Some((sy, sx)) = src(y, x) {
                    matrix.set((ch * oh + y) * ow + x, (ch * h + sy) * w + sx, 1.0);
                }
            }
        }
    }
    RealAffine { offset: vec![0.0; matrix.rows], matrix }
}

fn lower_geometry(kind: Geometry, (c, h, w): (usize, usize, usize)) -> Result<(RealAffine, (usize, usize, usize))> {
    let wrap = |v: usize, d: isize, m: usize| (v as isize + d).rem_euclid(m as isize) as usize;
    Ok(match kind {
        Geometry::Pad1 => {
            let lowered = index_map(c, (h, w), (h + 2, w + 2), |y, x| {
                (y >= 1 && y <= h && x >= 1 && x <= w).then(|| (y - 1, x - 1))
            });
            (lowered, (c, h + 2, w + 2))
        }
        Geometry::Crop1 => {
            if h < 3 || w < 3 {
                return Err(Error::Shape(format!("cannot crop a {h}×{w} map")));
            }
            (index_map(c, (h, w), (h - 2, w - 2), |y, x| Some((y + 1, x + 1))), (c, h - 2, w - 2))
        }
        // output (y, x) reads input (y - 1, x - 1) on the torus, and back
        Geometry::WrapShift => (index_map(c, (h, w), (h, w), |y, x| Some((wrap(y, -1, h), wrap(x, -1, w)))), (c, h, w)),
        Geometry::UnwrapShift => (index_map(c, (h, w), (h, w), |y, x| Some((wrap(y, 1, h), wrap(x, 1, w)))), (c, h, w)),
    })
}

pub fn lower_network(net: &NetworkSpec, n: usize) -> Result<LoweredNetwork> {
    let mut shape = (1, n, n);
    let mut stages: Vec<Stage> = Vec::new();
    let push_affine = |stages: &mut Vec<Stage>, a: RealAffine| -> Result<()> {
        match stages.last_mut() {
            Some(Stage::Affine(prev)) => *prev = prev.then(&a)?,
            _ => stages.push(Stage::Affine(a)),
        }
        Ok(())
    };
    let layers = net.layers();
    for (i, layer) in layers.iter().enumerate() {
        let next_shape = layer.output_shape(shape)?;
        match layer {
            LayerSpec::Conv2x2s2(k) | LayerSpec::Conv1x1(k) => push_affine(&mut stages, conv_to_matrix(k, shape)?)?,
            LayerSpec::Deconv2x2s2(k) => push_affine(&mut stages, deconv_to_matrix(k, shape)?)?,
            LayerSpec::Geometry(g) => push_affine(&mut stages, lower_geometry(*g, shape)?.0)?,
            LayerSpec::Activation(Activation::ReLU) => stages.push(Stage::Relu),
            LayerSpec::Activation(Activation::Bypass) => {}
            LayerSpec::Activation(Activation::Sigmoid) => {
                // sigmoid commutes with the later geometry layers, so only
                // the decision boundary matters
                if layers[i + 1..].iter().any(|l| !matches!(l, LayerSpec::Geometry(_))) {
                    return Err(Error::Config("sigmoid must be the last non-geometry layer to lower".into()));
                }
            }
        }
        shape = next_shape;
    }
    if shape != (1, n, n) {
        return Err(Error::Shape(format!("network maps {n}×{n} grids to {shape:?}")));
    }
    Ok(LoweredNetwork { n, stages })
}

impl LoweredNetwork {
    pub fn logits(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: grid.n() });
        }
        let mut x: Vec<f64> = grid.cells().iter().map(|&c| c as f64).collect();
        for stage in &self.stages {
            match stage {
                Stage::Affine(a) => x = a.apply(&x)?,
                Stage::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            }
        }
        Ok(x)
    }

    pub fn apply(&self, grid: &Grid) -> Result<Grid> {
        let cells = self.logits(grid)?.iter().map(|&v| (v > 0.0) as u8).collect();
        Grid::from_cells(self.n, cells)
    }

    pub fn affine_count(&self) -> usize {
        self.stages.iter().filter(|s| matches!(s, Stage::Affine(_))).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessReport {
    pub grids: usize,
    pub matches: usize,
    /// Affine maps in the composition of both half-steps.
    pub affine_maps: usize,
}

impl WitnessReport {
    pub fn holds(&self) -> bool {
        self.grids > 0 && self.matches == self.grids
    }
}

/// Runs each grid through the lowered Aligned network then the lowered
/// Offset network and compares against two exact half-steps.
pub fn two_step_witness(aligned: &NetworkSpec, offset: &NetworkSpec, edge: EdgeMode, grids: &[Grid]) -> Result<WitnessReport> {
    let Some(n) = grids.first().map(Grid::n) else {
        return Err(Error::Config("witness needs at least one grid".into()));
    };
    let first = lower_network(aligned, n)?;
    let second = lower_network(offset, n)?;
    let mut matches = 0;
    for g in grids {
        let expected = step(&step(g, Phase::Aligned, edge)?, Phase::Offset, edge)?;
        matches += (second.apply(&first.apply(g)?)? == expected) as usize;
    }
    Ok(WitnessReport { grids: grids.len(), matches, affine_maps: first.affine_count() + second.affine_count() })
}

/// Same check for a single half-step network.
pub fn half_step_witness(net: &NetworkSpec, phase: Phase, edge: EdgeMode, grids: &[Grid]) -> Result<WitnessReport> {
    let Some(n) = grids.first().map(Grid::n) else {
        return Err(Error::Config("witness needs at least one grid".into()));
    };
    let lowered = lower_network(net, n)?;
    let mut matches = 0;
    for g in grids {
        matches += (lowered.apply(g)? == step(g, phase, edge)?) as usize;
    }
    Ok(WitnessReport { grids: grids.len(), matches, affine_maps: lowered.affine_count() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::{random_grid, Direction};
    use crate::learn::model::{build_model, exact_rule_network};
    use crate::nn::Tensor;

    fn grids(n: usize) -> Vec<Grid> {
        (0..12).map(|s| random_grid(n, 0.5, s).unwrap()).collect()
    }

    #[test]
    fn lowered_random_network_matches_logits() {
        for (phase, edge) in [(Phase::Aligned, EdgeMode::TorusWrap), (Phase::Offset, EdgeMode::TorusWrap), (Phase::Offset, EdgeMode::ZeroPadCrop)] {
            for bypass in [false, true] {
                let net = build_model(phase, edge, bypass, 3);
                let lowered = lower_network(&net, 8).unwrap();
                for g in grids(8) {
                    let probs = net.predict(&Tensor::from_grids([&g]).unwrap()).unwrap();
                    for (l, p) in lowered.logits(&g).unwrap().iter().zip(probs.data()) {
                        assert!((crate::nn::ops::sigmoid(*l) - p).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn geometry_is_fused_into_neighbours() {
        let net = build_model(Phase::Offset, EdgeMode::ZeroPadCrop, false, 0);
        let lowered = lower_network(&net, 4).unwrap();
        // pad+conv, deconv, 1×1+crop
        assert_eq!(lowered.affine_count(), 3);
        assert_eq!(lowered.stages.iter().filter(|s| **s == Stage::Relu).count(), 2);
    }

    #[test]
    fn exact_networks_witness_both_edges() {
        for edge in [EdgeMode::TorusWrap, EdgeMode::ZeroPadCrop] {
            let a = exact_rule_network(Direction::Forward, Phase::Aligned, edge);
            let o = exact_rule_network(Direction::Forward, Phase::Offset, edge);
            let report = two_step_witness(&a, &o, edge, &grids(8)).unwrap();
            assert!(report.holds(), "{report:?}");
            assert_eq!(report.affine_maps, 6);
            assert!(half_step_witness(&o, Phase::Offset, edge, &grids(8)).unwrap().holds());
        }
    }

    #[test]
    fn swapped_networks_fail() {
        let a = exact_rule_network(Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap);
        let report = half_step_witness(&a, Phase::Offset, EdgeMode::TorusWrap, &grids(8)).unwrap();
        assert!(!report.holds());
        assert!(two_step_witness(&a, &a, EdgeMode::TorusWrap, &[]).is_err());
    }
}
