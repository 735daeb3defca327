use crate::ca::{evolve, Direction, EdgeMode, Grid, Phase};
use crate::learn::model::GridMap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// `steps + 1` frames, starting with the input.
    pub trajectory: Vec<Grid>,
    /// First step whose frame differs from the exact evolution, or
    /// `steps + 1` if none does.
    pub divergence_step: usize,
}

/// Feeds the grid back through the two half-step models alternately
/// (Aligned on odd steps, Offset on even) and compares against the exact
/// forward evolution.
pub fn rollout(
    model_aligned: &dyn GridMap,
    model_offset: &dyn GridMap,
    grid: &Grid,
    steps: usize,
    edge: EdgeMode,
) -> Result<Rollout> {
    if steps == 0 {
        return Err(Error::Config("rollout needs at least one step".into()));
    }
    let exact = evolve(grid, steps, edge, Direction::Forward)?;
    let mut trajectory = vec![grid.clone()];
    let mut divergence_step = steps + 1;
    for t in 0..steps {
        let model = match Phase::at_time(t) {
            Phase::Aligned => model_aligned,
            Phase::Offset => model_offset,
        };
        let next = model.map_grid(&trajectory[t])?;
        if next.n() != grid.n() {
            return Err(Error::DimensionMismatch { expected: grid.n(), actual: next.n() });
        }
        if divergence_step > steps && next != exact[t + 1] {
            divergence_step = t + 1;
        }
        trajectory.push(next);
    }
    Ok(Rollout { trajectory, divergence_step })
}

/// Histogram of divergence steps over many grids; index `k` counts grids
/// diverging at step `k` (index `steps + 1` counts clean runs).
pub fn divergence_histogram(
    model_aligned: &dyn GridMap,
    model_offset: &dyn GridMap,
    grids: &[Grid],
    steps: usize,
    edge: EdgeMode,
) -> Result<Vec<usize>> {
    let mut counts = vec![0; steps + 2];
    for g in grids {
        counts[rollout(model_aligned, model_offset, g, steps, edge)?.divergence_step] += 1;
    }
    Ok(counts)
}
