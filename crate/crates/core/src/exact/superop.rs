//! Superoperators acting on vectorized block-diagonal density matrices.
//!
//! Vectorization convention: the Liouville-space index enumerates the kept
//! matrix elements `(block, r, c)` in lexicographic order, i.e. blocks in
//! order and each block stacked by rows. With the full product basis and no
//! sector restriction this is exactly row-major `vec(rho)[r * D + c]`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::space::{BasisKind, BlockOp, Species, SpinSpace};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Index map between matrix elements and Liouville-space coordinates.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    space: Arc<SpinSpace>,
    sector: Option<i32>,
    entries: Vec<(u32, u32, u32)>,
    block_offsets: Vec<usize>,
    lookup: Vec<u32>,
}

impl OperatorBasis {
    /// Keeps the elements `|r><c|` whose excitation numbers differ by `sector`
    /// (all elements when `sector` is `None`).
    pub fn new(space: Arc<SpinSpace>, sector: Option<i32>) -> Self {
        let mut entries = Vec::new();
        let mut block_offsets = Vec::with_capacity(space.blocks().len());
        let mut lookup = Vec::new();
        for (bi, b) in space.blocks().iter().enumerate() {
            block_offsets.push(lookup.len());
            let charges: Vec<i32> = (0..b.dim).map(|s| space.charge(bi, s)).collect();
            for r in 0..b.dim {
                for c in 0..b.dim {
                    let keep = sector.is_none_or(|q| charges[r] - charges[c] == q);
                    if keep {
                        lookup.push(entries.len() as u32);
                        entries.push((bi as u32, r as u32, c as u32));
                    } else {
                        lookup.push(u32::MAX);
                    }
                }
            }
        }
        Self {
            space,
            sector,
            entries,
            block_offsets,
            lookup,
        }
    }

    pub fn space(&self) -> &Arc<SpinSpace> {
        &self.space
    }

    pub fn sector(&self) -> Option<i32> {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, k: usize) -> (usize, usize, usize) {
        let (b, r, c) = self.entries[k];
        (b as usize, r as usize, c as usize)
    }

    pub fn index(&self, block: usize, r: usize, c: usize) -> Option<usize> {
        let d = self.space.blocks()[block].dim;
        let v = self.lookup[self.block_offsets[block] + r * d + c];
        (v != u32::MAX).then_some(v as usize)
    }

    /// Coefficients of the (weighted) trace functional.
    pub fn trace_weights(&self) -> Vec<f64> {
        let blocks = self.space.blocks();
        self.entries
            .iter()
            .map(|&(b, r, c)| if r == c { blocks[b as usize].weight } else { 0.0 })
            .collect()
    }
}

/// A linear map `rho -> ...` built from block-diagonal operators.
#[derive(Clone, Debug)]
pub enum Term {
    /// `coef * L rho R`.
    Sandwich {
        coef: Complex64,
        left: BlockOp,
        right: BlockOp,
    },
    /// `coef * A rho`.
    Left { coef: Complex64, op: BlockOp },
    /// `coef * rho A`.
    Right { coef: Complex64, op: BlockOp },
    /// `rate * sum_i D[sigma+_i]` over one species, in the Dicke basis.
    LocalPump { rate: f64, species: Species },
}

impl Term {
    /// `-i [H, rho]`.
    pub fn hamiltonian(h: &BlockOp) -> Vec<Term> {
        vec![
            Term::Left {
                coef: Complex64::new(0.0, -1.0),
                op: h.clone(),
            },
            Term::Right {
                coef: Complex64::new(0.0, 1.0),
                op: h.clone(),
            },
        ]
    }

    /// `rate * (o1 rho o2^dag - (o2^dag o1 rho + rho o2^dag o1)/2)`.
    pub fn cross_dissipator(rate: f64, o1: &BlockOp, o2: &BlockOp) -> Vec<Term> {
        let o2d = o2.adjoint();
        let prod = o2d.mul(o1);
        vec![
            Term::Sandwich {
                coef: Complex64::new(rate, 0.0),
                left: o1.clone(),
                right: o2d,
            },
            Term::Left {
                coef: Complex64::new(-0.5 * rate, 0.0),
                op: prod.clone(),
            },
            Term::Right {
                coef: Complex64::new(-0.5 * rate, 0.0),
                op: prod,
            },
        ]
    }

    /// Standard Lindblad dissipator `rate * D[o]`.
    pub fn dissipator(rate: f64, o: &BlockOp) -> Vec<Term> {
        Self::cross_dissipator(rate, o, o)
    }
}

/// Term with operators rearranged for column-wise application.
enum Prepared {
    Sandwich {
        coef: Complex64,
        left_t: BlockOp,
        right: BlockOp,
    },
    Left {
        coef: Complex64,
        op_t: BlockOp,
    },
    Right {
        coef: Complex64,
        op: BlockOp,
    },
    LocalPump {
        rate: f64,
        species: Species,
    },
}

fn prepare(terms: &[Term]) -> Vec<Prepared> {
    terms
        .iter()
        .filter_map(|t| match t {
            Term::Sandwich { coef, left, right } if *coef != ZERO => Some(Prepared::Sandwich {
                coef: *coef,
                left_t: left.transpose(),
                right: right.clone(),
            }),
            Term::Left { coef, op } if *coef != ZERO => Some(Prepared::Left {
                coef: *coef,
                op_t: op.transpose(),
            }),
            Term::Right { coef, op } if *coef != ZERO => Some(Prepared::Right {
                coef: *coef,
                op: op.clone(),
            }),
            Term::LocalPump { rate, species } if *rate != 0.0 => Some(Prepared::LocalPump {
                rate: *rate,
                species: *species,
            }),
            _ => None,
        })
        .collect()
}

/// Sparse superoperator in compressed-column form.
#[derive(Clone, Debug)]
pub struct Superoperator {
    basis: Arc<OperatorBasis>,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<Complex64>,
}

/// Default ceiling on the Liouville-space dimension.
pub const DEFAULT_MAX_DIMENSION: usize = 2_000_000;

impl Superoperator {
    /// Assembles `sum(terms)` on `basis`, column by column in parallel.
    pub fn assemble(basis: Arc<OperatorBasis>, terms: &[Term], max_dimension: usize) -> Result<Self> {
        let dim = basis.dim();
        if dim > max_dimension {
            return Err(Error::MemoryBudget {
                dimension: dim,
                limit: max_dimension,
            });
        }
        for t in terms {
            if let Term::LocalPump { .. } = t {
                if basis.space().kind() != BasisKind::PermutationInvariant {
                    return Err(Error::invalid(
                        "terms",
                        "the collective local-pump term needs the Dicke basis",
                    ));
                }
            }
        }
        let prepared = prepare(terms);
        let columns: Vec<Vec<(u32, Complex64)>> = (0..dim)
            .into_par_iter()
            .map(|k| {
                let mut col = Vec::new();
                apply_column(&basis, &prepared, k, &mut col);
                col.sort_unstable_by_key(|e| e.0);
                let mut merged: Vec<(u32, Complex64)> = Vec::with_capacity(col.len());
                for (r, v) in col {
                    match merged.last_mut() {
                        Some(last) if last.0 == r => last.1 += v,
                        _ => merged.push((r, v)),
                    }
                }
                merged.retain(|e| e.1 != ZERO);
                merged
            })
            .collect();
        let mut col_ptr = Vec::with_capacity(dim + 1);
        col_ptr.push(0);
        let nnz: usize = columns.iter().map(Vec::len).sum();
        let mut rows = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for col in columns {
            for (r, v) in col {
                rows.push(r);
                vals.push(v);
            }
            col_ptr.push(rows.len());
        }
        Ok(Self {
            basis,
            col_ptr,
            rows,
            vals,
        })
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.col_ptr[k]..self.col_ptr[k + 1];
        self.rows[range.clone()]
            .iter()
            .zip(&self.vals[range])
            .map(|(&r, &v)| (r as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.column(c).find(|e| e.0 == r).map(|e| e.1).unwrap_or_default()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim()];
        for (k, &xk) in x.iter().enumerate() {
            if xk == ZERO {
                continue;
            }
            for (r, v) in self.column(k) {
                y[r] += v * xk;
            }
        }
        y
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            vals: self.vals.iter().map(|v| v.conj()).collect(),
            ..self.clone()
        }
    }

    /// Largest entrywise difference to another superoperator on the same basis.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "superoperators live on different bases");
        let mut worst = 0.0f64;
        for k in 0..self.dim() {
            let mut a = self.column(k).peekable();
            let mut b = other.column(k).peekable();
            loop {
                let d = match (a.peek(), b.peek()) {
                    (Some(&(ra, va)), Some(&(rb, vb))) => {
                        if ra == rb {
                            a.next();
                            b.next();
                            (va - vb).norm()
                        } else if ra < rb {
                            a.next();
                            va.norm()
                        } else {
                            b.next();
                            vb.norm()
                        }
                    }
                    (Some(&(_, va)), None) => {
                        a.next();
                        va.norm()
                    }
                    (None, Some(&(_, vb))) => {
                        b.next();
                        vb.norm()
                    }
                    (None, None) => break,
                };
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest `|sum_k w_k L_kj|`: zero for a trace-preserving map.
    pub fn trace_defect(&self) -> f64 {
        let w = self.basis.trace_weights();
        (0..self.dim())
            .map(|j| self.column(j).map(|(r, v)| v * w[r]).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

fn apply_column(basis: &OperatorBasis, terms: &[Prepared], k: usize, out: &mut Vec<(u32, Complex64)>) {
    let (b, r, c) = basis.entry(k);
    let mut push = |bt: usize, rt: usize, ct: usize, v: Complex64| {
        if let Some(idx) = basis.index(bt, rt, ct) {
            out.push((idx as u32, v));
        } else {
            debug_assert!(v.norm() < 1e-300, "term leaves the operator sector");
        }
    };
    for t in terms {
        match t {
            Prepared::Sandwich { coef, left_t, right } => {
                for &(r2, lv) in left_t.block(b).row(r) {
                    for &(c2, rv) in right.block(b).row(c) {
                        push(b, r2, c2, coef * lv * rv);
                    }
                }
            }
            Prepared::Left { coef, op_t } => {
                for &(r2, v) in op_t.block(b).row(r) {
                    push(b, r2, c, coef * v);
                }
            }
            Prepared::Right { coef, op } => {
                for &(c2, v) in op.block(b).row(c) {
                    push(b, r, c2, coef * v);
                }
            }
            Prepared::LocalPump { rate, species } => {
                local_pump_column(basis.space(), *rate, *species, b, r, c, &mut push);
            }
        }
    }
}

/// Action of `rate * sum_i D[sigma+_i]` (one species) on `|r><c|` in block `b`.
///
/// The gain part maps `|j m><j m'|` (per copy of the multiplicity space) to the
/// sectors `j' = j, j +- 1` with raised `m + 1, m' + 1`; the loss part is
/// diagonal since `sum_i sigma-_i sigma+_i = N/2 - J_z`.
fn local_pump_column(
    space: &SpinSpace,
    rate: f64,
    species: Species,
    b: usize,
    r: usize,
    c: usize,
    push: &mut impl FnMut(usize, usize, usize, Complex64),
) {
    let n = f64::from(space.n());
    let block = space.blocks()[b];
    let (ra, rb) = space.m2(b, r);
    let (ca, cb) = space.m2(b, c);
    let (j2, m2r, m2c) = match species {
        Species::A => (block.j2_a, ra, ca),
        Species::B => (block.j2_b, rb, cb),
    };
    let j = f64::from(j2) / 2.0;
    let (m, mp) = (f64::from(m2r) / 2.0, f64::from(m2c) / 2.0);

    push(b, r, c, Complex64::new(-0.5 * rate * (n - m - mp), 0.0));

    let half_n = n / 2.0;
    let candidates: [(i32, f64, fn(f64, f64) -> f64); 3] = [
        (
            0,
            if j > 0.0 {
                (half_n + 1.0) / (2.0 * j * (j + 1.0))
            } else {
                0.0
            },
            |j, m| ((j - m) * (j + m + 1.0)).max(0.0).sqrt(),
        ),
        (2, (half_n + j + 2.0) / (2.0 * (j + 1.0) * (2.0 * j + 3.0)), |j, m| {
            ((j + m + 1.0) * (j + m + 2.0)).max(0.0).sqrt()
        }),
        (
            -2,
            if j >= 1.0 {
                (half_n - j + 1.0) / (2.0 * j * (2.0 * j - 1.0))
            } else {
                0.0
            },
            |j, m| ((j - m) * (j - m - 1.0)).max(0.0).sqrt(),
        ),
    ];
    for (dj2, k, f) in candidates {
        if k == 0.0 {
            continue;
        }
        let amp = k * f(j, m) * f(j, mp);
        if amp == 0.0 {
            continue;
        }
        let j2t = j2 as i32 + dj2;
        if j2t < 0 {
            continue;
        }
        let (ja, jb) = match species {
            Species::A => (j2t as u32, block.j2_b),
            Species::B => (block.j2_a, j2t as u32),
        };
        let Some(bt) = space.block_index(ja, jb) else {
            continue;
        };
        let (rt, ct) = match species {
            Species::A => (space.pi_state(bt, ra + 2, rb), space.pi_state(bt, ca + 2, cb)),
            Species::B => (space.pi_state(bt, ra, rb + 2), space.pi_state(bt, ca, cb + 2)),
        };
        if let (Some(rt), Some(ct)) = (rt, ct) {
            push(bt, rt, ct, Complex64::new(rate * amp, 0.0));
        }
    }
}
