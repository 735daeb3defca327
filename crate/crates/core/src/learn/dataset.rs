use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ca::{inverse_step, random_grid_with, step, Direction, EdgeMode, Grid, Phase};
use crate::io::{format_trajectory, parse_trajectory};
use crate::{Error, Result};

pub const DEFAULT_DENSITY: f64 = 0.5;

/// Exact image of `input` under one half-step in `direction`.
pub fn exact_target(input: &Grid, direction: Direction, phase: Phase, edge: EdgeMode) -> Result<Grid> {
    match direction {
        Direction::Forward => step(input, phase, edge),
        Direction::Backward => inverse_step(input, phase, edge),
    }
}

/// Input/target pairs for one half-step of the automaton.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<(Grid, Grid)>,
    pub n: usize,
    pub direction: Direction,
    pub phase: Phase,
    pub edge: EdgeMode,
    pub seed: u64,
}

pub fn generate_dataset(
    n: usize,
    count: usize,
    direction: Direction,
    phase: Phase,
    edge: EdgeMode,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Config("dataset needs at least one pair".into()));
    }
    if direction == Direction::Backward && edge == EdgeMode::ZeroPadCrop {
        return Err(Error::IrreversibleEdge);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let input = random_grid_with(n, DEFAULT_DENSITY, &mut rng)?;
        let target = exact_target(&input, direction, phase, edge)?;
        // torus pairs are checked through the opposite direction
        if edge == EdgeMode::TorusWrap {
            let back = match direction {
                Direction::Forward => inverse_step(&target, phase, edge)?,
                Direction::Backward => step(&target, phase, edge)?,
            };
            assert_eq!(back, input, "automaton step failed to invert");
        }
        pairs.push((input, target));
    }
    Ok(Dataset { pairs, n, direction, phase, edge, seed })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Whether every target is the exact automaton image of its input.
    pub fn verify(&self) -> Result<bool> {
        for (input, target) in &self.pairs {
            if &exact_target(input, self.direction, self.phase, self.edge)? != target {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Splits off the last `holdout_fraction` of the pairs as a test set.
    pub fn split(&self, holdout_fraction: f64) -> Result<(&[(Grid, Grid)], &[(Grid, Grid)])> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(Error::Config(format!("holdout fraction must lie in (0, 1), got {holdout_fraction}")));
        }
        if self.pairs.len() < 10 {
            return Err(Error::Config(format!("need at least 10 pairs to split, have {}", self.pairs.len())));
        }
        let test = ((self.pairs.len() as f64) * holdout_fraction).round() as usize;
        let test = test.clamp(1, self.pairs.len() - 1);
        Ok(self.pairs.split_at(self.pairs.len() - test))
    }

    /// Pairs as a trajectory file: input, target, input, target, ...
    pub fn to_text(&self) -> String {
        let frames: Vec<Grid> = self.pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        format_trajectory(&frames)
    }

    pub fn from_text(text: &str, direction: Direction, phase: Phase, edge: EdgeMode, seed: u64) -> Result<Dataset> {
        let frames = parse_trajectory(text)?;
        if frames.is_empty() || frames.len() % 2 != 0 {
            return Err(Error::Parse(format!("dataset needs an even, nonzero number of grids, found {}", frames.len())));
        }
        let n = frames[0].n();
        if frames.iter().any(|g| g.n() != n) {
            return Err(Error::Parse("dataset grids differ in size".into()));
        }
        let mut it = frames.into_iter();
        let mut pairs = Vec::new();
        while let (Some(a), Some(b)) = (it.next(), it.next()) {
            pairs.push((a, b));
        }
        Ok(Dataset { pairs, n, direction, phase, edge, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_are_exact() {
        for (direction, phase, edge) in [
            (Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap),
            (Direction::Forward, Phase::Offset, EdgeMode::ZeroPadCrop),
            (Direction::Backward, Phase::Offset, EdgeMode::TorusWrap),
        ] {
            let d = generate_dataset(8, 50, direction, phase, edge, 5).unwrap();
            assert_eq!(d.len(), 50);
            assert!(d.verify().unwrap());
        }
    }

    #[test]
    fn dead_input_maps_to_live() {
        let dead = Grid::new(4).unwrap();
        let t = exact_target(&dead, Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap).unwrap();
        assert_eq!(t, Grid::filled(4, true).unwrap());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_dataset(8, 20, Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap, 7).unwrap();
        let b = generate_dataset(8, 20, Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_backward_pad_crop() {
        assert!(generate_dataset(8, 2, Direction::Backward, Phase::Aligned, EdgeMode::ZeroPadCrop, 0).is_err());
        assert!(generate_dataset(8, 0, Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap, 0).is_err());
    }

    #[test]
    fn split_and_text_round_trip() {
        let d = generate_dataset(4, 20, Direction::Forward, Phase::Aligned, EdgeMode::TorusWrap, 1).unwrap();
        let (train, test) = d.split(0.25).unwrap();
        assert_eq!((train.len(), test.len()), (15, 5));
        assert!(d.split(1.0).is_err());
        let back = Dataset::from_text(&d.to_text(), d.direction, d.phase, d.edge, d.seed).unwrap();
        assert_eq!(back, d);
    }
}
