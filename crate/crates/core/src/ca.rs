//! Exact simulation of the reversible 2×2 block automaton.
//!
//! A block is packed into a 4-bit code `a + 2b + 4c + 8d` with
//! `(a, b, c, d) = (top-left, top-right, bottom-left, bottom-right)`.
//! Steps alternate between the [`Phase::Aligned`] partition (blocks anchored
//! at even coordinates) and the [`Phase::Offset`] partition (anchored at odd
//! coordinates, i.e. shifted by `(+1, +1)`).

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// An `n × n` binary lattice with `n` even.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
    cells: Vec<u8>,
}

impl Grid {
    /// All-dead grid.
    pub fn new(n: usize) -> Result<Self> {
        check_side(n)?;
        Ok(Self { n, cells: vec![0; n * n] })
    }

    pub fn filled(n: usize, live: bool) -> Result<Self> {
        check_side(n)?;
        Ok(Self { n, cells: vec![live as u8; n * n] })
    }

    /// Builds a grid from row-major cells.
    pub fn from_cells(n: usize, cells: Vec<u8>) -> Result<Self> {
        check_side(n)?;
        if cells.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: cells.len() });
        }
        if let Some(&bad) = cells.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidCell(bad));
        }
        Ok(Self { n, cells })
    }

    /// Builds a grid from rows of `0`/`1` characters.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: row.len() });
            }
            for ch in row.bytes() {
                match ch {
                    b'0' => cells.push(0),
                    b'1' => cells.push(1),
                    _ => return Err(Error::Parse(format!("unexpected cell character {:?}", ch as char))),
                }
            }
        }
        Self::from_cells(n, cells)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, live: bool) {
        self.cells[row * self.n + col] = live as u8;
    }

    pub fn toggle(&mut self, row: usize, col: usize) {
        self.cells[row * self.n + col] ^= 1;
    }

    pub fn live_count(&self) -> usize {
        self.cells.iter().map(|&c| c as usize).sum()
    }

    /// Torus translation: the cell at `(r, c)` moves to `(r + dr, c + dc) mod n`.
    pub fn translate(&self, dr: isize, dc: isize) -> Grid {
        let n = self.n as isize;
        let mut out = vec![0; self.cells.len()];
        for r in 0..n {
            for c in 0..n {
                let tr = (r + dr).rem_euclid(n) as usize;
                let tc = (c + dc).rem_euclid(n) as usize;
                out[tr * self.n + tc] = self.cells[(r * n + c) as usize];
            }
        }
        Grid { n: self.n, cells: out }
    }

    /// Surrounds the grid with one ring of dead cells.
    pub fn pad1(&self) -> Grid {
        let m = self.n + 2;
        let mut cells = vec![0; m * m];
        for r in 0..self.n {
            let dst = (r + 1) * m + 1;
            cells[dst..dst + self.n].copy_from_slice(&self.cells[r * self.n..(r + 1) * self.n]);
        }
        Grid { n: m, cells }
    }

    /// Removes the outer ring. Fails when the result would be smaller than 2×2.
    pub fn crop1(&self) -> Result<Grid> {
        if self.n < 4 {
            return Err(Error::InvalidSide(self.n.saturating_sub(2)));
        }
        let m = self.n - 2;
        let mut cells = Vec::with_capacity(m * m);
        for r in 1..=m {
            cells.extend_from_slice(&self.cells[r * self.n + 1..r * self.n + 1 + m]);
        }
        Ok(Grid { n: m, cells })
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Grid({})", self.n)?;
        for row in self.cells.chunks(self.n) {
            for &c in row {
                f.write_str(if c == 1 { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn check_side(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidSide(n));
    }
    Ok(())
}

/// Which of the two 2×2 partitions a step uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Aligned,
    Offset,
}

impl Phase {
    pub fn next(self) -> Phase {
        match self {
            Phase::Aligned => Phase::Offset,
            Phase::Offset => Phase::Aligned,
        }
    }

    /// Phase of the step that leaves time index `t` (trajectories start Aligned).
    pub fn at_time(t: usize) -> Phase {
        if t % 2 == 0 {
            Phase::Aligned
        } else {
            Phase::Offset
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeMode {
    /// Opposite edges are identified.
    TorusWrap,
    /// Offset steps pad one dead ring, block, then crop the ring off again.
    ZeroPadCrop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// Reverses the four cells of a block: `(a, b, c, d) -> (d, c, b, a)`.
pub fn rotate_180(code: u8) -> u8 {
    ((code & 1) << 3) | ((code & 2) << 1) | ((code & 4) >> 1) | ((code & 8) >> 3)
}

/// The block rule: two live cells stay put, zero/one/four live cells flip,
/// three live cells flip and then rotate by 180°.
pub fn block_transform(code: u8) -> u8 {
    debug_assert!(code < 16);
    let flipped = !code & 0xF;
    match code.count_ones() {
        2 => code,
        3 => rotate_180(flipped),
        _ => flipped,
    }
}

/// Unique preimage of `code` under [`block_transform`].
pub fn inverse_block_transform(code: u8) -> u8 {
    BlockTable::standard().invert(code)
}

/// A bijection on the 16 block states together with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTable {
    entries: [u8; 16],
    inverse: [u8; 16],
}

impl BlockTable {
    /// Validates that `entries` is a permutation of `0..16`.
    pub fn new(entries: [u8; 16]) -> Result<Self> {
        let mut inverse = [u8::MAX; 16];
        for (code, &image) in entries.iter().enumerate() {
            if image >= 16 {
                return Err(Error::Config(format!("block image {image} out of range")));
            }
            if inverse[image as usize] != u8::MAX {
                return Err(Error::Config(format!("block table is not a permutation: {image} hit twice")));
            }
            inverse[image as usize] = code as u8;
        }
        Ok(Self { entries, inverse })
    }

    /// The table for [`block_transform`].
    pub fn standard() -> &'static BlockTable {
        static TABLE: OnceLock<BlockTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let entries = std::array::from_fn(|code| block_transform(code as u8));
            BlockTable::new(entries).expect("block rule must be a permutation")
        })
    }

    pub fn entries(&self) -> &[u8; 16] {
        &self.entries
    }

    pub fn apply(&self, code: u8) -> u8 {
        self.entries[code as usize]
    }

    pub fn invert(&self, code: u8) -> u8 {
        self.inverse[code as usize]
    }
}

/// Replaces every block of the torus partition anchored at `(offset, offset)`.
fn map_blocks_torus(grid: &Grid, offset: usize, table: &[u8; 16]) -> Grid {
    let n = grid.n;
    let mut out = grid.clone();
    for br in (0..n).step_by(2) {
        for bc in (0..n).step_by(2) {
            let r0 = (br + offset) % n;
            let r1 = (br + offset + 1) % n;
            let c0 = (bc + offset) % n;
            let c1 = (bc + offset + 1) % n;
            let idx = [r0 * n + c0, r0 * n + c1, r1 * n + c0, r1 * n + c1];
            let code = idx
                .iter()
                .enumerate()
                .fold(0u8, |acc, (bit, &i)| acc | (grid.cells[i] << bit));
            let image = table[code as usize];
            for (bit, &i) in idx.iter().enumerate() {
                out.cells[i] = (image >> bit) & 1;
            }
        }
    }
    out
}

fn apply_partition(grid: &Grid, phase: Phase, edge: EdgeMode, table: &[u8; 16]) -> Result<Grid> {
    match (phase, edge) {
        (Phase::Aligned, _) => Ok(map_blocks_torus(grid, 0, table)),
        (Phase::Offset, EdgeMode::TorusWrap) => Ok(map_blocks_torus(grid, 1, table)),
        (Phase::Offset, EdgeMode::ZeroPadCrop) => map_blocks_torus(&grid.pad1(), 0, table).crop1(),
    }
}

/// One half-step: every block of `phase`'s partition is replaced by its image.
pub fn step(grid: &Grid, phase: Phase, edge: EdgeMode) -> Result<Grid> {
    apply_partition(grid, phase, edge, &BlockTable::standard().entries)
}

/// Exact inverse of [`step`]; only defined for [`EdgeMode::TorusWrap`].
pub fn inverse_step(grid: &Grid, phase: Phase, edge: EdgeMode) -> Result<Grid> {
    if edge == EdgeMode::ZeroPadCrop {
        return Err(Error::IrreversibleEdge);
    }
    apply_partition(grid, phase, edge, &BlockTable::standard().inverse)
}

/// Runs `steps` half-steps and returns all `steps + 1` frames.
///
/// Forward runs from time 0 with phases Aligned, Offset, Aligned, ...
/// Backward treats `grid` as the state at time `steps` and rewinds to time 0,
/// so `evolve(evolve(g, k, Forward).last(), k, Backward).last() == g` for any `k`.
pub fn evolve(grid: &Grid, steps: usize, edge: EdgeMode, direction: Direction) -> Result<Vec<Grid>> {
    if direction == Direction::Backward && edge == EdgeMode::ZeroPadCrop {
        return Err(Error::IrreversibleEdge);
    }
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(grid.clone());
    for i in 0..steps {
        let current = &frames[i];
        let next = match direction {
            Direction::Forward => step(current, Phase::at_time(i), edge)?,
            Direction::Backward => inverse_step(current, Phase::at_time(steps - 1 - i), edge)?,
        };
        frames.push(next);
    }
    Ok(frames)
}

/// Draws each cell live independently with probability `density`.
pub fn random_grid(n: usize, density: f64, seed: u64) -> Result<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_grid_with(n, density, &mut rng)
}

pub fn random_grid_with<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<Grid> {
    check_side(n)?;
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidDensity(density));
    }
    let cells = (0..n * n).map(|_| (rng.gen::<f64>() < density) as u8).collect();
    Ok(Grid { n, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rule applied to an explicit `[tl, tr, bl, br]` array, no bit tricks.
    fn rule_on_cells(cells: [u8; 4]) -> [u8; 4] {
        let live: u8 = cells.iter().sum();
        let flipped = cells.map(|c| 1 - c);
        match live {
            2 => cells,
            3 => [flipped[3], flipped[2], flipped[1], flipped[0]],
            _ => flipped,
        }
    }

    fn pack(cells: [u8; 4]) -> u8 {
        cells[0] | cells[1] << 1 | cells[2] << 2 | cells[3] << 3
    }

    fn unpack(code: u8) -> [u8; 4] {
        [code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1]
    }

    #[test]
    fn block_examples() {
        assert_eq!(block_transform(pack([0, 1, 1, 0])), pack([0, 1, 1, 0]));
        assert_eq!(block_transform(pack([0, 0, 0, 0])), pack([1, 1, 1, 1]));
        assert_eq!(block_transform(pack([1, 1, 1, 0])), pack([1, 0, 0, 0]));
        assert_eq!(inverse_block_transform(pack([0, 1, 1, 0])), pack([0, 1, 1, 0]));
        assert_eq!(inverse_block_transform(pack([1, 1, 1, 1])), pack([0, 0, 0, 0]));
        assert_eq!(inverse_block_transform(pack([1, 0, 0, 0])), pack([1, 1, 1, 0]));
    }

    #[test]
    fn table_matches_cellwise_rule() {
        for code in 0..16u8 {
            assert_eq!(block_transform(code), pack(rule_on_cells(unpack(code))), "code {code}");
        }
    }

    #[test]
    fn table_is_permutation_with_fixed_pairs() {
        let table = BlockTable::standard();
        let mut seen = [false; 16];
        for code in 0..16u8 {
            let image = table.apply(code);
            assert!(!seen[image as usize]);
            seen[image as usize] = true;
            assert_eq!(table.invert(image), code);
            if code.count_ones() == 2 {
                assert_eq!(image, code);
            }
        }
    }

    #[test]
    fn non_permutation_rejected() {
        let mut entries: [u8; 16] = std::array::from_fn(|i| i as u8);
        entries[3] = 4;
        assert!(BlockTable::new(entries).is_err());
    }

    #[test]
    fn odd_side_rejected() {
        assert!(matches!(Grid::new(3), Err(Error::InvalidSide(3))));
        assert!(Grid::new(0).is_err());
        assert!(random_grid(5, 0.5, 1).is_err());
        assert!(matches!(random_grid(4, 1.5, 1), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn step_examples() {
        let dead = Grid::new(4).unwrap();
        let live = Grid::filled(4, true).unwrap();
        assert_eq!(step(&dead, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), live);
        assert_eq!(step(&live, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), dead);

        let g = Grid::from_rows(&["1100", "0000", "0000", "0000"]).unwrap();
        let want = Grid::from_rows(&["1111", "0011", "1111", "1111"]).unwrap();
        assert_eq!(step(&g, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), want);
    }

    #[test]
    fn offset_torus_blocks_wrap() {
        // Cells (3,3),(3,0),(0,3),(0,0) form one offset block on a 4×4 torus;
        // a single live cell at (0,0) is that block's bottom-right corner.
        let mut g = Grid::new(4).unwrap();
        g.set(0, 0, true);
        let out = step(&g, Phase::Offset, EdgeMode::TorusWrap).unwrap();
        // count 1 -> flip: the wrapped block becomes 0,1,1,... with (0,0) dead.
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(3, 3), 1);
        assert_eq!(out.get(0, 3), 1);
        assert_eq!(out.get(3, 0), 1);
        // every other block was all-dead and flips too
        assert_eq!(out.live_count(), 15);
    }

    #[test]
    fn offset_pad_crop_sees_dead_border() {
        let dead = Grid::new(4).unwrap();
        // every padded block is all-dead and flips, so the cropped grid is all-live
        assert_eq!(step(&dead, Phase::Offset, EdgeMode::ZeroPadCrop).unwrap(), Grid::filled(4, true).unwrap());
        // an all-live grid: corner blocks hold one live cell, edge blocks two,
        // the interior block four.
        let live = Grid::filled(4, true).unwrap();
        let out = step(&live, Phase::Offset, EdgeMode::ZeroPadCrop).unwrap();
        let want = Grid::from_rows(&["0110", "1001", "1001", "0110"]).unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn inverse_rejects_pad_crop() {
        let g = Grid::new(4).unwrap();
        assert!(matches!(inverse_step(&g, Phase::Offset, EdgeMode::ZeroPadCrop), Err(Error::IrreversibleEdge)));
        assert!(evolve(&g, 2, EdgeMode::ZeroPadCrop, Direction::Backward).is_err());
        assert!(evolve(&g, 2, EdgeMode::ZeroPadCrop, Direction::Forward).is_ok());
    }

    #[test]
    fn inverse_examples() {
        let live = Grid::filled(4, true).unwrap();
        assert_eq!(inverse_step(&live, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), Grid::new(4).unwrap());
        let fixed = Grid::from_rows(&["1010", "0101", "1100", "0011"]).unwrap();
        assert_eq!(inverse_step(&fixed, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), fixed);
        assert_eq!(step(&fixed, Phase::Aligned, EdgeMode::TorusWrap).unwrap(), fixed);
    }

    #[test]
    fn inverse_round_trip_many() {
        for seed in 0..1000 {
            let g = random_grid(8, 0.5, seed).unwrap();
            for phase in [Phase::Aligned, Phase::Offset] {
                let s = step(&g, phase, EdgeMode::TorusWrap).unwrap();
                assert_eq!(inverse_step(&s, phase, EdgeMode::TorusWrap).unwrap(), g);
            }
        }
    }

    #[test]
    fn evolve_examples() {
        let g = random_grid(8, 0.5, 3).unwrap();
        assert_eq!(evolve(&g, 0, EdgeMode::TorusWrap, Direction::Forward).unwrap(), vec![g.clone()]);

        let dead = Grid::new(4).unwrap();
        let live = Grid::filled(4, true).unwrap();
        let traj = evolve(&dead, 2, EdgeMode::TorusWrap, Direction::Forward).unwrap();
        assert_eq!(traj, vec![dead.clone(), live, dead]);

        for steps in [1, 2, 5, 6] {
            let fwd = evolve(&g, steps, EdgeMode::TorusWrap, Direction::Forward).unwrap();
            let bwd = evolve(fwd.last().unwrap(), steps, EdgeMode::TorusWrap, Direction::Backward).unwrap();
            assert_eq!(bwd.len(), steps + 1);
            assert_eq!(bwd.last().unwrap(), &g);
            // the backward trajectory visits the forward frames in reverse
            let mut rev = fwd.clone();
            rev.reverse();
            assert_eq!(bwd, rev);
        }
    }

    #[test]
    fn random_grid_extremes_and_determinism() {
        assert_eq!(random_grid(4, 0.0, 9).unwrap(), Grid::new(4).unwrap());
        assert_eq!(random_grid(4, 1.0, 9).unwrap(), Grid::filled(4, true).unwrap());
        assert_eq!(random_grid(16, 0.5, 42).unwrap(), random_grid(16, 0.5, 42).unwrap());
        assert_ne!(random_grid(16, 0.5, 42).unwrap(), random_grid(16, 0.5, 43).unwrap());
    }

    #[test]
    fn translate_and_pad_round_trip() {
        let g = random_grid(6, 0.5, 11).unwrap();
        assert_eq!(g.translate(1, 1).translate(-1, -1), g);
        assert_eq!(g.pad1().crop1().unwrap(), g);
        assert_eq!(g.pad1().n(), 8);
    }
}
