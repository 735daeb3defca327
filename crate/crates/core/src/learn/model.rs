//! Network architectures for one half-step, and the map abstractions the
//! experiments are written against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ca::{BlockTable, Direction, EdgeMode, Grid, Phase};
use crate::learn::dataset::exact_target;
use crate::linops::KernelSpec;
use crate::nn::{Activation, Geometry, LayerSpec, NetworkSpec, Tensor};
use crate::Result;

/// Channels after the first 2×2 stride-2 convolution.
pub const HIDDEN_CHANNELS: usize = 16;
/// Channels after the transposed convolution.
pub const DECODED_CHANNELS: usize = 8;

/// Conv 2×2/2 (1→16) → ReLU → Deconv 2×2/2 (16→8) → ReLU → Conv 1×1 (8→1) →
/// Sigmoid, wrapped in Pad1/Crop1 or WrapShift/UnwrapShift for offset phases.
///
/// With `bypass_endpoints` the first and last hidden activations are the
/// identity and a 1×1 (16→16) ReLU layer sits between them, so the block
/// map keeps a nonlinearity.
pub fn build_model(phase: Phase, edge: EdgeMode, bypass_endpoints: bool, seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut core = vec![LayerSpec::conv2x2s2(1, HIDDEN_CHANNELS, &mut rng)];
    if bypass_endpoints {
        core.push(LayerSpec::Activation(Activation::Bypass));
        core.push(LayerSpec::conv1x1(HIDDEN_CHANNELS, HIDDEN_CHANNELS, &mut rng));
        core.push(LayerSpec::Activation(Activation::ReLU));
    } else {
        core.push(LayerSpec::Activation(Activation::ReLU));
    }
    core.push(LayerSpec::deconv2x2s2(HIDDEN_CHANNELS, DECODED_CHANNELS, &mut rng));
    core.push(LayerSpec::Activation(if bypass_endpoints { Activation::Bypass } else { Activation::ReLU }));
    core.push(LayerSpec::conv1x1(DECODED_CHANNELS, 1, &mut rng));
    core.push(LayerSpec::Activation(Activation::Sigmoid));
    NetworkSpec::new(wrap_for_phase(core, phase, edge)).expect("layer shapes are fixed")
}

fn wrap_for_phase(core: Vec<LayerSpec>, phase: Phase, edge: EdgeMode) -> Vec<LayerSpec> {
    let (before, after) = match (phase, edge) {
        (Phase::Aligned, _) => return core,
        (Phase::Offset, EdgeMode::ZeroPadCrop) => (Geometry::Pad1, Geometry::Crop1),
        (Phase::Offset, EdgeMode::TorusWrap) => (Geometry::WrapShift, Geometry::UnwrapShift),
    };
    let mut layers = vec![LayerSpec::Geometry(before)];
    layers.extend(core);
    layers.push(LayerSpec::Geometry(after));
    layers
}

/// Pre-sigmoid logit magnitude of the hand-built networks.
const EXACT_MARGIN: f64 = 30.0;

/// Hand-set weights realising any block bijection exactly with the
/// non-bypass architecture: the first layer one-hot encodes the 16 block
/// states, the transposed convolution stamps each state's image, and the
/// 1×1 layer scales the bit to a ±30 logit.
pub fn block_table_network(table: &[u8; 16], phase: Phase, edge: EdgeMode) -> NetworkSpec {
    let mut conv = KernelSpec::zeros(HIDDEN_CHANNELS, 1, 2, 2, HIDDEN_CHANNELS);
    for state in 0..16usize {
        for pos in 0..4 {
            let bit = (state >> pos) & 1;
            let idx = conv.weight_index(state, 0, pos / 2, pos % 2);
            conv.weights[idx] = if bit == 1 { 1.0 } else { -1.0 };
        }
        conv.bias[state] = 1.0 - state.count_ones() as f64;
    }
    let mut deconv = KernelSpec::zeros(HIDDEN_CHANNELS, DECODED_CHANNELS, 2, 2, DECODED_CHANNELS);
    for state in 0..16usize {
        let image = table[state] as usize;
        for pos in 0..4 {
            let idx = deconv.weight_index(state, 0, pos / 2, pos % 2);
            deconv.weights[idx] = ((image >> pos) & 1) as f64;
        }
    }
    let mut head = KernelSpec::zeros(1, DECODED_CHANNELS, 1, 1, 1);
    head.weights[0] = 2.0 * EXACT_MARGIN;
    head.bias[0] = -EXACT_MARGIN;
    let core = vec![
        LayerSpec::Conv2x2s2(conv),
        LayerSpec::Activation(Activation::ReLU),
        LayerSpec::Deconv2x2s2(deconv),
        LayerSpec::Activation(Activation::ReLU),
        LayerSpec::Conv1x1(head),
        LayerSpec::Activation(Activation::Sigmoid),
    ];
    NetworkSpec::new(wrap_for_phase(core, phase, edge)).expect("layer shapes are fixed")
}

/// Network reproducing one exact half-step.
pub fn exact_rule_network(direction: Direction, phase: Phase, edge: EdgeMode) -> NetworkSpec {
    let table = BlockTable::standard();
    let entries: [u8; 16] = match direction {
        Direction::Forward => *table.entries(),
        Direction::Backward => std::array::from_fn(|c| table.invert(c as u8)),
    };
    block_table_network(&entries, phase, edge)
}

/// Network computing the identity map on grids.
pub fn identity_network() -> NetworkSpec {
    block_table_network(&std::array::from_fn(|c| c as u8), Phase::Aligned, EdgeMode::TorusWrap)
}

/// Anything that predicts per-cell live probabilities for a `(batch, 1, n, n)` input.
pub trait CellModel {
    fn probabilities(&self, input: &Tensor) -> Result<Tensor>;
}

impl CellModel for NetworkSpec {
    fn probabilities(&self, input: &Tensor) -> Result<Tensor> {
        self.predict(input)
    }
}

/// A deterministic map on binary grids.
pub trait GridMap {
    fn map_grids(&self, grids: &[Grid]) -> Result<Vec<Grid>>;

    fn map_grid(&self, grid: &Grid) -> Result<Grid> {
        Ok(self.map_grids(std::slice::from_ref(grid))?.pop().expect("one in, one out"))
    }
}

/// Probabilistic models act on grids by thresholding at 0.5.
impl<T: CellModel + ?Sized> GridMap for T {
    fn map_grids(&self, grids: &[Grid]) -> Result<Vec<Grid>> {
        let mut out = Vec::with_capacity(grids.len());
        for chunk in grids.chunks(EVAL_CHUNK) {
            out.extend(self.probabilities(&Tensor::from_grids(chunk)?)?.to_grids()?);
        }
        Ok(out)
    }
}

/// Batch size used when mapping many grids through a network.
pub const EVAL_CHUNK: usize = 100;

/// The exact automaton half-step, as a model that is always certain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactRule {
    pub direction: Direction,
    pub phase: Phase,
    pub edge: EdgeMode,
}

impl CellModel for ExactRule {
    fn probabilities(&self, input: &Tensor) -> Result<Tensor> {
        let grids = input.to_grids()?;
        let mapped = grids
            .iter()
            .map(|g| exact_target(g, self.direction, self.phase, self.edge))
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_grids(&mapped)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IdentityMap;

impl CellModel for IdentityMap {
    fn probabilities(&self, input: &Tensor) -> Result<Tensor> {
        Ok(input.clone())
    }
}

/// Applies the maps left to right.
pub struct Chain<'a>(pub Vec<&'a dyn GridMap>);

impl GridMap for Chain<'_> {
    fn map_grids(&self, grids: &[Grid]) -> Result<Vec<Grid>> {
        let mut current = grids.to_vec();
        for m in &self.0 {
            current = m.map_grids(&current)?;
        }
        Ok(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::random_grid;
    use crate::nn::LayerKind;

    #[test]
    fn aligned_model_preserves_shape() {
        let net = build_model(Phase::Aligned, EdgeMode::TorusWrap, false, 0);
        assert_eq!(net.output_shape((1, 16, 16)).unwrap(), (1, 16, 16));
        let x = Tensor::zeros(&[3, 1, 16, 16]);
        assert_eq!(net.predict(&x).unwrap().shape(), &[3, 1, 16, 16]);
        for edge in [EdgeMode::TorusWrap, EdgeMode::ZeroPadCrop] {
            let net = build_model(Phase::Offset, edge, false, 0);
            assert_eq!(net.output_shape((1, 16, 16)).unwrap(), (1, 16, 16));
        }
    }

    #[test]
    fn bypass_layers_at_endpoints() {
        let net = build_model(Phase::Aligned, EdgeMode::TorusWrap, true, 0);
        let kinds: Vec<LayerKind> = net.layers().iter().map(|l| l.kind()).collect();
        let bypass: Vec<usize> =
            kinds.iter().enumerate().filter(|(_, &k)| k == LayerKind::Bypass).map(|(i, _)| i).collect();
        // right after the first convolution and right after the transposed convolution
        assert_eq!(bypass, vec![1, 5]);
        assert_eq!(kinds[0], LayerKind::Conv2x2s2);
        assert_eq!(kinds[4], LayerKind::Deconv2x2s2);
        assert!(kinds.contains(&LayerKind::ReLU));
    }

    #[test]
    fn offset_torus_model_is_wrapped_aligned_model() {
        let aligned = build_model(Phase::Aligned, EdgeMode::TorusWrap, false, 9);
        let offset = build_model(Phase::Offset, EdgeMode::TorusWrap, false, 9);
        let layers = offset.layers();
        assert_eq!(layers.first().unwrap().kind(), LayerKind::WrapShift);
        assert_eq!(layers.last().unwrap().kind(), LayerKind::UnwrapShift);
        assert_eq!(&layers[1..layers.len() - 1], aligned.layers());
        let padded = build_model(Phase::Offset, EdgeMode::ZeroPadCrop, false, 9);
        assert_eq!(padded.layers().first().unwrap().kind(), LayerKind::Pad1);
        assert_eq!(padded.layers().last().unwrap().kind(), LayerKind::Crop1);
    }

    #[test]
    fn exact_networks_match_automaton() {
        let cases = [
            (Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap),
            (Direction::Forward, Phase::Offset, EdgeMode::TorusWrap),
            (Direction::Forward, Phase::Offset, EdgeMode::ZeroPadCrop),
            (Direction::Backward, Phase::Aligned, EdgeMode::TorusWrap),
            (Direction::Backward, Phase::Offset, EdgeMode::TorusWrap),
        ];
        let grids: Vec<Grid> = (0..30).map(|s| random_grid(8, 0.5, s).unwrap()).collect();
        for (direction, phase, edge) in cases {
            let net = exact_rule_network(direction, phase, edge);
            let rule = ExactRule { direction, phase, edge };
            assert_eq!(net.map_grids(&grids).unwrap(), rule.map_grids(&grids).unwrap(), "{direction:?} {phase:?} {edge:?}");
        }
        assert_eq!(identity_network().map_grids(&grids).unwrap(), grids);
    }

    #[test]
    fn chain_composes_in_order() {
        let a = ExactRule { direction: Direction::Forward, phase: Phase::Aligned, edge: EdgeMode::TorusWrap };
        let b = ExactRule { direction: Direction::Backward, phase: Phase::Aligned, edge: EdgeMode::TorusWrap };
        let g = random_grid(8, 0.5, 1).unwrap();
        assert_eq!(Chain(vec![&a, &b]).map_grid(&g).unwrap(), g);
    }
}
