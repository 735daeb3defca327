//! The automaton as state-dependent affine operators on zigzag vectors.

use crate::ca::{step, EdgeMode, Grid, Phase};
use crate::linops::gf2::{compose, AffineOperator, BitMatrix, BitVector};
use crate::{Error, Result};

/// Position of cell `(row, col)` in the zigzag vector: blocks of the aligned
/// partition in row-major block order, each read TL, TR, BL, BR.
pub fn zigzag_index(n: usize, row: usize, col: usize) -> usize {
    let block = (row / 2) * (n / 2) + col / 2;
    4 * block + 2 * (row % 2) + (col % 2)
}

pub fn vectorize_zigzag(grid: &Grid) -> BitVector {
    let n = grid.n();
    let mut v = BitVector::zeros(n * n);
    for r in 0..n {
        for c in 0..n {
            if grid.get(r, c) == 1 {
                v.set(zigzag_index(n, r, c), true);
            }
        }
    }
    v
}

pub fn devectorize_zigzag(vec: &BitVector, n: usize) -> Result<Grid> {
    if vec.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, actual: vec.len() });
    }
    let mut grid = Grid::new(n)?;
    for r in 0..n {
        for c in 0..n {
            if vec.get(zigzag_index(n, r, c)) {
                grid.set(r, c, true);
            }
        }
    }
    Ok(grid)
}

/// The block-diagonal operator for one aligned step of this particular state.
///
/// Each 4×4 diagonal block is chosen from the block's live count: identity
/// for two, identity plus all-ones bias (a flip) for zero/one/four, and the
/// reversal permutation plus all-ones bias for three.
pub fn build_phase_operator(grid: &Grid) -> AffineOperator {
    let n = grid.n();
    let dim = n * n;
    let x = vectorize_zigzag(grid);
    let mut matrix = BitMatrix::zeros(dim);
    let mut bias = BitVector::zeros(dim);
    for block in 0..dim / 4 {
        let base = 4 * block;
        let live = (0..4).filter(|&k| x.get(base + k)).count();
        for k in 0..4 {
            let src = if live == 3 { 3 - k } else { k };
            matrix.set(base + k, base + src, true);
            if live != 2 {
                bias.set(base + k, true);
            }
        }
    }
    AffineOperator::new(matrix, bias).expect("square by construction")
}

/// Permutation realising the torus translation by `(+1, +1)` on zigzag
/// vectors; it carries the offset partition onto the aligned one.
pub fn build_wrap_permutation(n: usize) -> Result<AffineOperator> {
    Grid::new(n)?;
    let dim = n * n;
    let mut matrix = BitMatrix::zeros(dim);
    for r in 0..n {
        for c in 0..n {
            let to = zigzag_index(n, (r + 1) % n, (c + 1) % n);
            matrix.set(to, zigzag_index(n, r, c), true);
        }
    }
    AffineOperator::new(matrix, BitVector::zeros(dim))
}

/// Inverse of a permutation operator with zero bias: its transpose.
pub fn permutation_inverse(op: &AffineOperator) -> Result<AffineOperator> {
    if !op.matrix().is_permutation() || op.bias().count_ones() != 0 {
        return Err(Error::Config("operator is not a pure permutation".into()));
    }
    AffineOperator::new(op.matrix().transpose(), BitVector::zeros(op.dim()))
}

/// `W⁻¹ ∘ B' ∘ W ∘ B` for one full step (aligned then offset, torus edges),
/// where `B` is built from `grid` and `B'` from the wrapped intermediate state.
pub fn build_full_step_operator(grid: &Grid) -> Result<AffineOperator> {
    let n = grid.n();
    let first = build_phase_operator(grid);
    let wrap = build_wrap_permutation(n)?;
    let unwrap = permutation_inverse(&wrap)?;

    let halfway = compose(&wrap, &first)?;
    let intermediate = devectorize_zigzag(&halfway.apply(&vectorize_zigzag(grid))?, n)?;
    let second = build_phase_operator(&intermediate);

    compose(&unwrap, &compose(&second, &halfway)?)
}

/// Applies `build_phase_operator` through the vector form and returns a grid.
pub fn step_via_operator(grid: &Grid) -> Result<Grid> {
    let v = build_phase_operator(grid).apply(&vectorize_zigzag(grid))?;
    devectorize_zigzag(&v, grid.n())
}

/// The same equivalence the operators promise, checked against direct
/// simulation on one grid. Returns whether the full-step operator agreed
/// and whether its matrix is invertible.
pub fn check_full_step(grid: &Grid) -> Result<(bool, bool)> {
    let op = build_full_step_operator(grid)?;
    let got = devectorize_zigzag(&op.apply(&vectorize_zigzag(grid))?, grid.n())?;
    let aligned = step(grid, Phase::Aligned, EdgeMode::TorusWrap)?;
    let want = step(&aligned, Phase::Offset, EdgeMode::TorusWrap)?;
    Ok((got == want, op.matrix().is_invertible()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::{evolve, random_grid, Direction};

    #[test]
    fn zigzag_order_on_small_grids() {
        let g = Grid::from_rows(&["10", "11"]).unwrap();
        assert_eq!(vectorize_zigzag(&g).to_bits(), vec![1, 0, 1, 1]);
        // fifth entry of a 4×4 is row 0, column 2
        assert_eq!(zigzag_index(4, 0, 2), 4);
        assert_eq!(zigzag_index(4, 0, 3), 5);
        assert_eq!(zigzag_index(4, 1, 2), 6);
        assert_eq!(zigzag_index(4, 2, 0), 8);
        let mut g = Grid::new(4).unwrap();
        g.set(0, 2, true);
        assert_eq!(vectorize_zigzag(&g).to_bits(), vec![0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn devectorize_inverts() {
        for seed in 0..20 {
            let g = random_grid(8, 0.5, seed).unwrap();
            assert_eq!(devectorize_zigzag(&vectorize_zigzag(&g), 8).unwrap(), g);
        }
        assert_eq!(devectorize_zigzag(&BitVector::zeros(16), 4).unwrap(), Grid::new(4).unwrap());
        let bits = BitVector::from_bits(&[1, 0, 0, 1]);
        assert_eq!(devectorize_zigzag(&bits, 2).unwrap(), Grid::from_rows(&["10", "01"]).unwrap());
        assert!(devectorize_zigzag(&BitVector::zeros(15), 4).is_err());
    }

    #[test]
    fn phase_operator_shapes() {
        let fixed = Grid::from_rows(&["1010", "0101", "1100", "0011"]).unwrap();
        let op = build_phase_operator(&fixed);
        assert_eq!(op, AffineOperator::identity(16));

        let op = build_phase_operator(&Grid::new(4).unwrap());
        assert_eq!(op.matrix(), &BitMatrix::identity(16));
        assert_eq!(op.bias(), &BitVector::ones(16));
    }

    #[test]
    fn phase_operator_matches_simulation() {
        for seed in 0..100 {
            let g = random_grid(8, 0.5, seed).unwrap();
            assert_eq!(step_via_operator(&g).unwrap(), step(&g, Phase::Aligned, EdgeMode::TorusWrap).unwrap());
        }
    }

    #[test]
    fn wrap_permutation_is_translation() {
        // n = 2: the cell at (0,0) lands where (1,1) was (zigzag slot 3)
        let w = build_wrap_permutation(2).unwrap();
        assert!(w.matrix().get(3, 0));
        assert!(w.matrix().get(0, 3));
        assert!(w.matrix().get(2, 1));
        assert!(w.matrix().get(1, 2));

        let w = build_wrap_permutation(4).unwrap();
        assert!(w.matrix().is_permutation());
        assert_eq!(w.bias().count_ones(), 0);
        let inv = permutation_inverse(&w).unwrap();
        assert_eq!(compose(&w, &inv).unwrap(), AffineOperator::identity(16));
        assert_eq!(Some(inv), w.inverse());
        for seed in 0..20 {
            let g = random_grid(4, 0.5, seed).unwrap();
            let moved = devectorize_zigzag(&w.apply(&vectorize_zigzag(&g)).unwrap(), 4).unwrap();
            // translation oracle written cell by cell
            let mut want = Grid::new(4).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    want.set((r + 1) % 4, (c + 1) % 4, g.get(r, c) == 1);
                }
            }
            assert_eq!(moved, want);
        }
        assert!(build_wrap_permutation(3).is_err());
    }

    #[test]
    fn full_step_examples() {
        let dead = Grid::new(4).unwrap();
        let op = build_full_step_operator(&dead).unwrap();
        let out = devectorize_zigzag(&op.apply(&vectorize_zigzag(&dead)).unwrap(), 4).unwrap();
        assert_eq!(out, dead);

        for seed in 0..100 {
            let g = random_grid(8, 0.5, seed).unwrap();
            let op = build_full_step_operator(&g).unwrap();
            let out = devectorize_zigzag(&op.apply(&vectorize_zigzag(&g)).unwrap(), 8).unwrap();
            let traj = evolve(&g, 2, EdgeMode::TorusWrap, Direction::Forward).unwrap();
            assert_eq!(&out, traj.last().unwrap());
            assert!(op.matrix().is_invertible());
        }
    }

    #[test]
    fn full_step_exhaustive_n2() {
        for code in 0..16u8 {
            let cells = (0..4).map(|k| (code >> k) & 1).collect();
            let g = Grid::from_cells(2, cells).unwrap();
            assert_eq!(check_full_step(&g).unwrap(), (true, true), "code {code}");
        }
    }
}
