//! QUBO and Ising problem representations.
//!
//! QUBO:  `H(b) = Σ_ij Q_ij b_i b_j`, `b ∈ {0,1}^n`
//! Ising: `H(s) = -½ Σ_ij J_ij s_i s_j + Σ_i h_i s_i + offset`, `s ∈ {-1,+1}^n`
//!
//! With `s = 2b - 1` and a symmetric `Q`, the conversion is
//! `J_ij = -Q_ij / 2` (i ≠ j), `J_ii = 0`, `h_i = Σ_j Q_ij / 2`, and
//! `offset = Σ_i Q_ii / 2 + Σ_{i<j} Q_ij / 2`, which makes both energies
//! agree exactly rather than up to a constant.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{self, SquareMatrix};

/// Largest `n` accepted by [`QuboProblem::brute_force_min`].
pub const BRUTE_FORCE_MAX_N: usize = 24;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector(Vec<u8>);

impl BitVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParams(format!("bit value {b} is not 0/1")));
        }
        Ok(BitVector(bits))
    }

    pub fn zeros(n: usize) -> Self {
        BitVector(vec![0; n])
    }

    /// Bits of `value` with index 0 as the least significant bit.
    pub fn from_index(value: u64, n: usize) -> Self {
        BitVector((0..n).map(|i| ((value >> i) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
    }

    pub fn to_spins(&self) -> SpinVector {
        SpinVector(self.0.iter().map(|&b| 2 * b as i8 - 1).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&s) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParams(format!("spin value {s} is not ±1")));
        }
        Ok(SpinVector(spins))
    }

    /// Sign readout of oscillator positions; `x == 0` reads as `+1`.
    pub fn from_positions(x: &[f64]) -> Self {
        SpinVector(x.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn to_bits(&self) -> BitVector {
        BitVector(self.0.iter().map(|&s| ((s + 1) / 2) as u8).collect())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    q: SquareMatrix,
}

impl QuboProblem {
    pub fn new(q: SquareMatrix) -> Result<Self> {
        if let Some((i, j)) = q.first_non_finite() {
            return Err(Error::NonFinite { i, j });
        }
        Ok(QuboProblem { q })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (q, _) = matrix::read_matrix(path)?;
        Self::new(q)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        matrix::write_matrix(path, &self.q, None)
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    pub fn q(&self) -> &SquareMatrix {
        &self.q
    }

    pub fn symmetrize(&self) -> Self {
        QuboProblem {
            q: self.q.symmetrized(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.q.first_asymmetry(SYMMETRY_TOL).is_none()
    }

    /// `Σ_ij Q_ij b_i b_j`.
    pub fn energy(&self, b: &BitVector) -> Result<f64> {
        check_len(self.n(), b.len())?;
        let bits = b.bits();
        let mut e = 0.0;
        for i in b.selected() {
            let row = self.q.row(i);
            e += bits
                .iter()
                .zip(row)
                .filter(|(&bj, _)| bj == 1)
                .map(|(_, &q)| q)
                .sum::<f64>();
        }
        Ok(e)
    }

    pub fn to_ising(&self) -> Result<IsingProblem> {
        if let Some((i, j)) = self.q.first_asymmetry(SYMMETRY_TOL) {
            return Err(Error::Asymmetric {
                i,
                j,
                a: self.q.get(i, j),
                b: self.q.get(j, i),
            });
        }
        let n = self.n();
        let j = SquareMatrix::from_fn(n, |a, b| if a == b { 0.0 } else { -self.q.get(a, b) / 2.0 });
        let h = (0..n)
            .map(|i| self.q.row(i).iter().sum::<f64>() / 2.0)
            .collect();
        let mut offset = 0.0;
        for i in 0..n {
            offset += self.q.get(i, i) / 2.0;
            for k in (i + 1)..n {
                offset += self.q.get(i, k) / 2.0;
            }
        }
        Ok(IsingProblem { j, h, offset })
    }

    /// Exhaustive global minimum. Ties resolve to the lowest integer value
    /// of the bit vector (bit 0 least significant).
    ///
    /// Enumeration walks a Gray code so every configuration costs O(n);
    /// the reported energy is recomputed directly for the winner.
    pub fn brute_force_min(&self) -> Result<(BitVector, f64)> {
        let n = self.n();
        if n > BRUTE_FORCE_MAX_N {
            return Err(Error::TooLarge {
                n,
                max: BRUTE_FORCE_MAX_N,
            });
        }
        let q = self.symmetrize();
        let scale: f64 = q.q.as_slice().iter().map(|v| v.abs()).sum::<f64>() + 1.0;
        let tol = 1e-12 * scale;

        // field[k] = Σ_j Q_kj b_j over the current configuration
        let mut field = vec![0.0; n];
        let mut bits = vec![0u8; n];
        let mut code: u64 = 0;
        let mut energy = 0.0;
        let mut best = (0.0, 0u64);

        for step in 1u64..(1u64 << n) {
            let k = step.trailing_zeros() as usize;
            let was = bits[k];
            let dir = if was == 0 { 1.0 } else { -1.0 };
            // ΔH for flipping b_k with symmetric Q
            let delta = dir * (q.q.get(k, k) + 2.0 * (field[k] - q.q.get(k, k) * was as f64));
            energy += delta;
            bits[k] ^= 1;
            code ^= 1 << k;
            let row = q.q.row(k);
            for (f, &qv) in field.iter_mut().zip(row) {
                *f += dir * qv;
            }
            if energy < best.0 - tol || (energy <= best.0 + tol && code < best.1) {
                best = (energy, code);
            }
        }

        let b = BitVector::from_index(best.1, n);
        let e = self.energy(&b)?;
        Ok((b, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    j: SquareMatrix,
    h: Vec<f64>,
    offset: f64,
}

impl IsingProblem {
    pub fn new(j: SquareMatrix, h: Vec<f64>, offset: f64) -> Result<Self> {
        check_len(j.n(), h.len())?;
        if let Some((a, b)) = j.first_non_finite() {
            return Err(Error::NonFinite { i: a, j: b });
        }
        if let Some(i) = h.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i, j: 0 });
        }
        if let Some((a, b)) = j.first_asymmetry(SYMMETRY_TOL) {
            return Err(Error::Asymmetric {
                i: a,
                j: b,
                a: j.get(a, b),
                b: j.get(b, a),
            });
        }
        if let Some(i) = (0..j.n()).find(|&i| j.get(i, i) != 0.0) {
            return Err(Error::InvalidParams(format!(
                "J has nonzero diagonal at {i}"
            )));
        }
        Ok(IsingProblem { j, h, offset })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn j(&self) -> &SquareMatrix {
        &self.j
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `-½ Σ_ij J_ij s_i s_j + Σ_i h_i s_i + offset`.
    pub fn energy(&self, s: &SpinVector) -> Result<f64> {
        check_len(self.n(), s.len())?;
        let x = s.as_f64();
        let field: f64 = self.h.iter().zip(&x).map(|(h, s)| h * s).sum();
        Ok(-0.5 * self.j.quad_form(&x) + field + self.offset)
    }
}
