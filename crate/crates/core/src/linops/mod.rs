//! The automaton in matrix form.
//!
//! [`gf2`] provides bit-packed affine maps over GF(2); [`operators`] builds
//! the block-diagonal step operators, the wrap permutation and full-step
//! compositions on zigzag vectors; [`lowering`] turns convolution kernels
//! into dense real matrices.

pub mod gf2;
pub mod lowering;
pub mod operators;

pub use gf2::{compose, AffineOperator, BitMatrix, BitVector};
pub use lowering::{conv_to_matrix, deconv_to_matrix, DenseMatrix, KernelSpec, RealAffine};
pub use operators::{
    build_full_step_operator, build_phase_operator, build_wrap_permutation, check_full_step, devectorize_zigzag,
    permutation_inverse, step_via_operator,
    vectorize_zigzag, zigzag_index,
};
