//! Hilbert spaces of two spin species and block-diagonal operators on them.
//!
//! Two bases are supported:
//!
//! * the full product basis of `2N` spins, one block of dimension `4^N`, where bit
//!   `i < N` of a state index is spin `i` of species A and bit `N + i` is spin `i`
//!   of species B (bit set = excited);
//! * the permutation-invariant Dicke basis with one block per pair `(j_A, j_B)`,
//!   states `|j_A m_A; j_B m_B>` ordered by decreasing `m_A` then decreasing `m_B`.
//!
//! Angular momenta are stored doubled (`j2 = 2j`, `m2 = 2m`) so they stay integral.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    Full,
    PermutationInvariant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Species {
    A,
    B,
}

/// One invariant block of the Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Twice the total angular momentum of species A (unused in the full basis).
    pub j2_a: u32,
    pub j2_b: u32,
    pub dim: usize,
    /// Multiplicity of this block in the full Hilbert space (`d_N(j_A) d_N(j_B)`).
    pub weight: f64,
}

impl Block {
    fn dim_b(&self) -> usize {
        self.j2_b as usize + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinSpace {
    kind: BasisKind,
    n: u32,
    blocks: Vec<Block>,
}

/// Number of ways `N` spins-1/2 couple to total angular momentum `j` (`j2 = 2j`).
pub fn dicke_degeneracy(n: u32, j2: u32) -> f64 {
    let k = (n - j2) / 2;
    let binom = |n: u32, k: i64| -> f64 {
        if k < 0 || k > i64::from(n) {
            return 0.0;
        }
        let k = k as u32;
        let mut b = 1.0f64;
        for i in 0..k.min(n - k) {
            b = b * f64::from(n - i) / f64::from(i + 1);
        }
        b.round()
    };
    binom(n, i64::from(k)) - binom(n, i64::from(k) - 1)
}

impl SpinSpace {
    /// Product basis of `2N` spins; limited to `N <= 4` (dimension `4^N <= 256`).
    pub fn full(n: u32) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::invalid(
                "N",
                format!("full product basis supports 1 <= N <= 4, got {n}"),
            ));
        }
        Ok(Self {
            kind: BasisKind::Full,
            n,
            blocks: vec![Block {
                j2_a: n,
                j2_b: n,
                dim: 1 << (2 * n),
                weight: 1.0,
            }],
        })
    }

    pub fn permutation_invariant(n: u32) -> Result<Self> {
        if n == 0 || n > 200 {
            return Err(Error::invalid(
                "N",
                format!("Dicke basis supports 1 <= N <= 200, got {n}"),
            ));
        }
        let j2s: Vec<u32> = (0..=n / 2).map(|k| n - 2 * k).collect();
        let mut blocks = Vec::new();
        for &ja in &j2s {
            for &jb in &j2s {
                blocks.push(Block {
                    j2_a: ja,
                    j2_b: jb,
                    dim: (ja as usize + 1) * (jb as usize + 1),
                    weight: dicke_degeneracy(n, ja) * dicke_degeneracy(n, jb),
                });
            }
        }
        Ok(Self {
            kind: BasisKind::PermutationInvariant,
            n,
            blocks,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Index of the block with the given doubled angular momenta.
    pub fn block_index(&self, j2_a: u32, j2_b: u32) -> Option<usize> {
        match self.kind {
            BasisKind::Full => None,
            BasisKind::PermutationInvariant => {
                if j2_a > self.n || j2_b > self.n || (self.n - j2_a) % 2 != 0 || (self.n - j2_b) % 2 != 0 {
                    return None;
                }
                let per = (self.n / 2 + 1) as usize;
                let ia = ((self.n - j2_a) / 2) as usize;
                let ib = ((self.n - j2_b) / 2) as usize;
                Some(ia * per + ib)
            }
        }
    }

    /// Doubled magnetic quantum numbers `(m2_A, m2_B)` of a PI basis state.
    pub fn m2(&self, block: usize, state: usize) -> (i32, i32) {
        let b = &self.blocks[block];
        let (ia, ib) = (state / b.dim_b(), state % b.dim_b());
        (b.j2_a as i32 - 2 * ia as i32, b.j2_b as i32 - 2 * ib as i32)
    }

    /// PI state index of `(m2_A, m2_B)` in a block, if both lie in range.
    pub fn pi_state(&self, block: usize, m2_a: i32, m2_b: i32) -> Option<usize> {
        let b = &self.blocks[block];
        let (ja, jb) = (b.j2_a as i32, b.j2_b as i32);
        if m2_a.abs() > ja || m2_b.abs() > jb || (ja - m2_a) % 2 != 0 || (jb - m2_b) % 2 != 0 {
            return None;
        }
        let ia = ((ja - m2_a) / 2) as usize;
        let ib = ((jb - m2_b) / 2) as usize;
        Some(ia * b.dim_b() + ib)
    }

    /// Total number of excitations of a basis state.
    pub fn charge(&self, block: usize, state: usize) -> i32 {
        match self.kind {
            BasisKind::Full => state.count_ones() as i32,
            BasisKind::PermutationInvariant => {
                let (ma, mb) = self.m2(block, state);
                (ma + mb) / 2 + self.n as i32
            }
        }
    }

    fn species_bits(&self, s: Species) -> std::ops::Range<u32> {
        match s {
            Species::A => 0..self.n,
            Species::B => self.n..2 * self.n,
        }
    }

    /// Collective lowering operator `S-` of one species.
    pub fn lowering(&self, s: Species) -> BlockOp {
        let mut op = BlockOp::zeros(self);
        match self.kind {
            BasisKind::Full => {
                let dim = self.blocks[0].dim;
                for state in 0..dim {
                    for bit in self.species_bits(s) {
                        if state & (1 << bit) != 0 {
                            op.blocks[0].push(state ^ (1 << bit), state, Complex64::new(1.0, 0.0));
                        }
                    }
                }
            }
            BasisKind::PermutationInvariant => {
                for (bi, b) in self.blocks.iter().enumerate() {
                    for state in 0..b.dim {
                        let (ma, mb) = self.m2(bi, state);
                        let (j2, m2) = match s {
                            Species::A => (b.j2_a as i32, ma),
                            Species::B => (b.j2_b as i32, mb),
                        };
                        // J-|j m> = sqrt((j + m)(j - m + 1)) |j m-1>, in doubled units.
                        let amp = (f64::from((j2 + m2) * (j2 - m2 + 2)) / 4.0).sqrt();
                        if amp == 0.0 {
                            continue;
                        }
                        let target = match s {
                            Species::A => self.pi_state(bi, ma - 2, mb),
                            Species::B => self.pi_state(bi, ma, mb - 2),
                        };
                        if let Some(t) = target {
                            op.blocks[bi].push(t, state, Complex64::new(amp, 0.0));
                        }
                    }
                }
            }
        }
        op.finish()
    }

    pub fn raising(&self, s: Species) -> BlockOp {
        self.lowering(s).adjoint()
    }

    /// Collective `S^z = sum_i sigma^z_i` (twice the angular-momentum projection).
    pub fn sz(&self, s: Species) -> BlockOp {
        let mut op = BlockOp::zeros(self);
        for (bi, b) in self.blocks.iter().enumerate() {
            for state in 0..b.dim {
                let v = match self.kind {
                    BasisKind::Full => self
                        .species_bits(s)
                        .map(|bit| if state & (1 << bit) != 0 { 1.0 } else { -1.0 })
                        .sum::<f64>(),
                    BasisKind::PermutationInvariant => {
                        let (ma, mb) = self.m2(bi, state);
                        f64::from(match s {
                            Species::A => ma,
                            Species::B => mb,
                        })
                    }
                };
                if v != 0.0 {
                    op.blocks[bi].push(state, state, Complex64::new(v, 0.0));
                }
            }
        }
        op.finish()
    }

    /// Single-spin `sigma-` on spin `i` of a species (full basis only).
    pub fn local_lowering(&self, s: Species, i: u32) -> Result<BlockOp> {
        if self.kind != BasisKind::Full || i >= self.n {
            return Err(Error::invalid("spin", "local operators exist only in the full basis"));
        }
        let bit = self.species_bits(s).start + i;
        let mut op = BlockOp::zeros(self);
        for state in 0..self.blocks[0].dim {
            if state & (1 << bit) != 0 {
                op.blocks[0].push(state ^ (1 << bit), state, Complex64::new(1.0, 0.0));
            }
        }
        Ok(op.finish())
    }

    pub fn identity(&self) -> BlockOp {
        let mut op = BlockOp::zeros(self);
        for (bi, b) in self.blocks.iter().enumerate() {
            for s in 0..b.dim {
                op.blocks[bi].push(s, s, Complex64::new(1.0, 0.0));
            }
        }
        op.finish()
    }
}

/// Sparse square matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseBlock {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseBlock {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    fn push(&mut self, r: usize, c: usize, v: Complex64) {
        self.rows[r].push((c, v));
    }

    /// Sorts each row and merges duplicate columns, dropping exact zeros.
    fn compress(&mut self) {
        for row in &mut self.rows {
            row.sort_by_key(|e| e.0);
            let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match out.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => out.push((c, v)),
                }
            }
            out.retain(|e| e.1 != Complex64::new(0.0, 0.0));
            *row = out;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r].iter().find(|e| e.0 == c).map(|e| e.1).unwrap_or_default()
    }
}

/// Operator that is block diagonal in a [`SpinSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOp {
    blocks: Vec<SparseBlock>,
}

impl BlockOp {
    pub fn zeros(space: &SpinSpace) -> Self {
        Self {
            blocks: space.blocks.iter().map(|b| SparseBlock::new(b.dim)).collect(),
        }
    }

    fn finish(mut self) -> Self {
        for b in &mut self.blocks {
            b.compress();
        }
        self
    }

    pub fn block(&self, i: usize) -> &SparseBlock {
        &self.blocks[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self {
            blocks: self.blocks.iter().map(|b| SparseBlock::new(b.dim)).collect(),
        };
        for (bi, b) in self.blocks.iter().enumerate() {
            for (r, row) in b.rows.iter().enumerate() {
                for &(c, v) in row {
                    out.blocks[bi].push(c, r, v.conj());
                }
            }
        }
        out.finish()
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Self {
        let mut out = self.adjoint();
        for b in &mut out.blocks {
            for row in &mut b.rows {
                for e in row.iter_mut() {
                    e.1 = e.1.conj();
                }
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self {
            blocks: self.blocks.iter().map(|b| SparseBlock::new(b.dim)).collect(),
        };
        for (bi, (a, b)) in self.blocks.iter().zip(&other.blocks).enumerate() {
            let mut acc = vec![Complex64::new(0.0, 0.0); a.dim];
            let mut touched = Vec::new();
            for (r, row) in a.rows.iter().enumerate() {
                for &(k, va) in row {
                    for &(c, vb) in &b.rows[k] {
                        if acc[c] == Complex64::new(0.0, 0.0) {
                            touched.push(c);
                        }
                        acc[c] += va * vb;
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                for &c in &touched {
                    out.blocks[bi].push(r, c, acc[c]);
                    acc[c] = Complex64::new(0.0, 0.0);
                }
                touched.clear();
            }
        }
        out.finish()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for row in &mut b.rows {
                for e in row.iter_mut() {
                    e.1 *= s;
                }
            }
        }
        out.finish()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (bi, b) in other.blocks.iter().enumerate() {
            for (r, row) in b.rows.iter().enumerate() {
                for &(c, v) in row {
                    out.blocks[bi].push(r, c, v);
                }
            }
        }
        out.finish()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self.add(&other.scale(Complex64::new(-1.0, 0.0)));
        d.blocks
            .iter()
            .flat_map(|b| b.rows.iter().flatten())
            .fold(0.0, |m, e| m.max(e.1.norm()))
    }
}
