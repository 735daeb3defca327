//! Bit-packed vectors, square matrices and affine maps over GF(2).

use std::fmt::Write as _;

use crate::{Error, Result};

const WORD: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.set(i, true);
        }
        v
    }

    /// Builds a vector from a slice of 0/1 bytes; nonzero counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn dot(&self, other: &[u64]) -> bool {
        self.words.iter().zip(other).fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones()) & 1 == 1
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "BitVector({s})")
    }
}

/// Square matrix over GF(2), stored as bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    dim: usize,
    rows: Vec<BitVector>,
}

impl BitMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, rows: vec![BitVector::zeros(dim); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, true);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row].get(col)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.rows[row].set(col, value);
    }

    pub fn row(&self, row: usize) -> &BitVector {
        &self.rows[row]
    }

    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let mut y = BitVector::zeros(self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            if row.dot(&x.words) {
                y.set(i, true);
            }
        }
        Ok(y)
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &BitMatrix) -> Result<BitMatrix> {
        if rhs.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: rhs.dim });
        }
        let mut out = BitMatrix::zeros(self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            let acc = &mut out.rows[i];
            for k in 0..self.dim {
                if row.get(k) {
                    acc.xor_assign(&rhs.rows[k]);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                if self.get(i, j) {
                    out.set(j, i, true);
                }
            }
        }
        out
    }

    /// Gauss-Jordan elimination on `[self | I]`. `None` when singular.
    pub fn inverse(&self) -> Option<BitMatrix> {
        let dim = self.dim;
        let mut left = self.rows.clone();
        let mut right = BitMatrix::identity(dim).rows;
        for col in 0..dim {
            let pivot = (col..dim).find(|&r| left[r].get(col))?;
            left.swap(col, pivot);
            right.swap(col, pivot);
            let (pl, pr) = (left[col].clone(), right[col].clone());
            for r in 0..dim {
                if r != col && left[r].get(col) {
                    left[r].xor_assign(&pl);
                    right[r].xor_assign(&pr);
                }
            }
        }
        Some(BitMatrix { dim, rows: right })
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.dim {
            let Some(p) = (rank..self.dim).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for row in rows.iter_mut().skip(rank + 1) {
                if row.get(col) {
                    row.xor_assign(&pivot);
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.dim
    }

    pub fn is_permutation(&self) -> bool {
        let mut col_hits = vec![0usize; self.dim];
        for row in &self.rows {
            if row.count_ones() != 1 {
                return false;
            }
            let j = (0..self.dim).find(|&j| row.get(j)).unwrap();
            col_hits[j] += 1;
        }
        col_hits.iter().all(|&c| c == 1)
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix({})", self.dim)?;
        for row in &self.rows {
            writeln!(f, "  {:?}", row)?;
        }
        Ok(())
    }
}

/// `y = matrix · x ⊕ bias`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineOperator {
    matrix: BitMatrix,
    bias: BitVector,
}

impl AffineOperator {
    pub fn new(matrix: BitMatrix, bias: BitVector) -> Result<Self> {
        if bias.len() != matrix.dim() {
            return Err(Error::DimensionMismatch { expected: matrix.dim(), actual: bias.len() });
        }
        Ok(Self { matrix, bias })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: BitMatrix::identity(dim), bias: BitVector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &BitMatrix {
        &self.matrix
    }

    pub fn bias(&self) -> &BitVector {
        &self.bias
    }

    pub fn apply(&self, x: &BitVector) -> Result<BitVector> {
        let mut y = self.matrix.mul_vec(x)?;
        y.xor_assign(&self.bias);
        Ok(y)
    }

    /// `x = M⁻¹ (y ⊕ b)`, i.e. matrix `M⁻¹` and bias `M⁻¹ b`.
    pub fn inverse(&self) -> Option<AffineOperator> {
        let inv = self.matrix.inverse()?;
        let bias = inv.mul_vec(&self.bias).expect("dims agree");
        Some(AffineOperator { matrix: inv, bias })
    }

    /// Text dump: dimension, one line per matrix row, then the bias bits.
    pub fn dump(&self) -> String {
        let dim = self.dim();
        let mut out = String::with_capacity((dim + 1) * (dim + 1) + 8);
        writeln!(out, "{dim}").unwrap();
        let bits = |v: &BitVector| (0..dim).map(|j| if v.get(j) { '1' } else { '0' }).collect::<String>();
        for i in 0..dim {
            out.push_str(&bits(self.matrix.row(i)));
            out.push('\n');
        }
        out.push_str(&bits(&self.bias));
        out.push('\n');
        out
    }

    pub fn parse_dump(text: &str) -> Result<AffineOperator> {
        let mut lines = text.lines();
        let dim: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Parse("operator dump must start with its dimension".into()))?;
        let mut parse_bits = |what: &str| -> Result<BitVector> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")))?;
            if line.len() != dim {
                return Err(Error::Parse(format!("{what}: expected {dim} bits, found {}", line.len())));
            }
            let mut v = BitVector::zeros(dim);
            for (j, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => v.set(j, true),
                    other => return Err(Error::Parse(format!("{what}: invalid bit {other:?}"))),
                }
            }
            Ok(v)
        };
        let mut matrix = BitMatrix::zeros(dim);
        for i in 0..dim {
            matrix.rows[i] = parse_bits(&format!("row {i}"))?;
        }
        let bias = parse_bits("bias")?;
        Ok(AffineOperator { matrix, bias })
    }
}

/// Operator for "apply `first`, then `second`".
pub fn compose(second: &AffineOperator, first: &AffineOperator) -> Result<AffineOperator> {
    let matrix = second.matrix.mul(&first.matrix)?;
    let mut bias = second.matrix.mul_vec(&first.bias)?;
    bias.xor_assign(&second.bias);
    Ok(AffineOperator { matrix, bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> BitVector {
        BitVector::from_bits(&(0..len).map(|_| rng.gen_range(0..2)).collect::<Vec<u8>>())
    }

    fn random_op(rng: &mut ChaCha8Rng, dim: usize) -> AffineOperator {
        let mut m = BitMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, rng.gen_bool(0.5));
            }
        }
        AffineOperator::new(m, random_vec(rng, dim)).unwrap()
    }

    /// Dense reference: every entry computed as an explicit sum mod 2.
    fn apply_naive(op: &AffineOperator, x: &BitVector) -> BitVector {
        let dim = op.dim();
        let mut y = BitVector::zeros(dim);
        for i in 0..dim {
            let mut s = op.bias().get(i) as u32;
            for j in 0..dim {
                s += (op.matrix().get(i, j) && x.get(j)) as u32;
            }
            y.set(i, s % 2 == 1);
        }
        y
    }

    #[test]
    fn apply_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 5, 64, 65, 130] {
            let op = random_op(&mut rng, dim);
            let x = random_vec(&mut rng, dim);
            assert_eq!(op.apply(&x).unwrap(), apply_naive(&op, &x));
        }
    }

    #[test]
    fn compose_is_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [3, 64, 100] {
            let f = random_op(&mut rng, dim);
            let s = random_op(&mut rng, dim);
            let c = compose(&s, &f).unwrap();
            for _ in 0..10 {
                let x = random_vec(&mut rng, dim);
                assert_eq!(c.apply(&x).unwrap(), s.apply(&f.apply(&x).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (a, b, c) = (random_op(&mut rng, 70), random_op(&mut rng, 70), random_op(&mut rng, 70));
            let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
            let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut found = 0;
        while found < 5 {
            let op = random_op(&mut rng, 40);
            assert_eq!(compose(&AffineOperator::identity(40), &op).unwrap(), op);
            if let Some(inv) = op.inverse() {
                assert!(op.matrix().is_invertible());
                assert_eq!(compose(&inv, &op).unwrap(), AffineOperator::identity(40));
                assert_eq!(compose(&op, &inv).unwrap(), AffineOperator::identity(40));
                found += 1;
            } else {
                assert!(!op.matrix().is_invertible());
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let mut m = BitMatrix::identity(4);
        m.set(3, 3, false);
        assert!(m.inverse().is_none());
        assert_eq!(m.rank(), 3);
    }

    #[test]
    fn dimension_errors() {
        let op = AffineOperator::identity(4);
        assert!(op.apply(&BitVector::zeros(5)).is_err());
        assert!(compose(&op, &AffineOperator::identity(3)).is_err());
        assert!(AffineOperator::new(BitMatrix::identity(2), BitVector::zeros(3)).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = random_op(&mut rng, 9);
        let text = op.dump();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(AffineOperator::parse_dump(&text).unwrap(), op);
        assert!(AffineOperator::parse_dump("2\n10\n").is_err());
    }
}
