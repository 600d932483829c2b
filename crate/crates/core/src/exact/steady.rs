//! Steady states of assembled Liouvillians and the observables read off them.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{BasisKind, Block, BlockOp, Species, SpinSpace};
use super::superop::Superoperator;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Inverse iteration with a sparse LU of `L - sigma`, falling back to `Bordered`.
    #[default]
    ShiftInvert,
    /// One row of `L` replaced by the trace functional, solved directly.
    Bordered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    pub method: SteadyMethod,
    /// Accepted `||L rho||_2` for a unit-trace `rho`.
    pub residual_tol: f64,
    /// Shift `sigma = -shift_rel * max|L_ij|`.
    pub shift_rel: f64,
    pub max_iterations: usize,
    /// Krylov dimension used to look for a second near-zero eigenvalue (0 disables).
    pub krylov_dim: usize,
    /// Eigenvalues with `|lambda| < degeneracy_tol * max|L_ij|` count as zero.
    pub degeneracy_tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            method: SteadyMethod::ShiftInvert,
            residual_tol: 1e-10,
            shift_rel: 1e-6,
            max_iterations: 50,
            krylov_dim: 12,
            degeneracy_tol: 1e-9,
        }
    }
}

/// Block-diagonal density matrix with dense, row-major blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Arc<SpinSpace>,
    sector: Option<i32>,
    blocks: Vec<Vec<Complex64>>,
}

impl DensityMatrix {
    /// Unpacks a Liouville-space vector; elements outside the kept sector are zero.
    pub fn from_vector(l: &Superoperator, x: &[Complex64]) -> Self {
        let basis = l.basis();
        let space = basis.space().clone();
        let mut blocks: Vec<Vec<Complex64>> = space.blocks().iter().map(|b| vec![ZERO; b.dim * b.dim]).collect();
        for (k, &v) in x.iter().enumerate() {
            let (b, r, c) = basis.entry(k);
            blocks[b][r * space.blocks()[b].dim + c] = v;
        }
        Self {
            space,
            sector: basis.sector(),
            blocks,
        }
    }

    pub fn space(&self) -> &Arc<SpinSpace> {
        &self.space
    }

    pub fn block(&self, i: usize) -> &[Complex64] {
        &self.blocks[i]
    }

    pub fn element(&self, block: usize, r: usize, c: usize) -> Complex64 {
        self.blocks[block][r * self.space.blocks()[block].dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        self.space
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(b, m)| (0..b.dim).map(|i| m[i * b.dim + i]).sum::<Complex64>() * b.weight)
            .sum()
    }

    /// `Tr[O rho]` including the block multiplicities.
    pub fn expect(&self, op: &BlockOp) -> Complex64 {
        let mut total = ZERO;
        for (bi, (b, m)) in self.space.blocks().iter().zip(&self.blocks).enumerate() {
            let ob = op.block(bi);
            let mut t = ZERO;
            for r in 0..b.dim {
                for &(c, v) in ob.row(r) {
                    t += v * m[c * b.dim + r];
                }
            }
            total += t * b.weight;
        }
        total
    }

    /// Largest `|Im rho_ij|` over all stored elements.
    pub fn max_imag(&self) -> f64 {
        self.blocks.iter().flatten().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Smallest eigenvalue over all blocks (per copy, before multiplicity weighting).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (b, m) in self.space.blocks().iter().zip(&self.blocks) {
            let d = b.dim;
            let mat = Mat::<c64>::from_fn(d, d, |r, c| m[r * d + c]);
            let ev = mat
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            if let Some(&first) = ev.first() {
                lo = lo.min(first);
            }
        }
        Ok(lo)
    }

    /// Writes the blocks as little-endian `(re, im)` f64 pairs plus a JSON header.
    pub fn export(&self, bin_path: &Path, header_path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(bin_path)?);
        for m in &self.blocks {
            for v in m {
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        out.flush()?;
        let header = DensityHeader {
            basis: self.space.kind(),
            n: self.space.n(),
            sector: self.sector,
            layout: "blocks in order, each row-major, complex128 as little-endian (re, im) f64 pairs".into(),
            blocks: self.space.blocks().to_vec(),
            trace: self.trace().re,
        };
        std::fs::write(header_path, serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }
}

/// JSON header accompanying an exported density matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    pub basis: BasisKind,
    pub n: u32,
    pub sector: Option<i32>,
    pub layout: String,
    pub blocks: Vec<Block>,
    pub trace: f64,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `||L rho||_2` of the returned (unit-trace, Hermitized) state.
    pub residual: f64,
    pub method: SteadyMethod,
    /// Eigenvalue of `L` closest to zero after the kernel, when it was computed.
    pub second_eigenvalue: Option<Complex64>,
    pub min_eigenvalue: f64,
}

impl SteadyState {
    /// Positivity monitor with the conventional `-1e-8` floor.
    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue > -1e-8
    }
}

fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn rnorm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The generator written in real coordinates of Hermitian matrices.
///
/// Each diagonal element contributes one coordinate and each pair `r < c`
/// contributes `Re rho_rc` and `Im rho_rc`. A Hermiticity-preserving generator
/// is a real matrix in these coordinates, which halves the storage and quarters
/// the arithmetic of the factorization.
struct RealForm {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
    /// Per Liouville-space entry: `(re, im)` coordinates, with `im = None` on the
    /// diagonal and both `None` below the diagonal.
    coords: Vec<(Option<u32>, Option<u32>)>,
    weights: Vec<f64>,
}

impl RealForm {
    fn new(l: &Superoperator) -> Result<Self> {
        let basis = l.basis();
        let dim = l.dim();
        let mut coords = vec![(None, None); dim];
        // Per coordinate: the entry it reads from, its partner entry, and its kind.
        let mut sources: Vec<(usize, usize, u8)> = Vec::with_capacity(dim);
        let mut weights = Vec::with_capacity(dim);
        let trace_w = basis.trace_weights();
        for k in 0..dim {
            let (b, r, c) = basis.entry(k);
            if r == c {
                coords[k].0 = Some(sources.len() as u32);
                sources.push((k, k, 0));
                weights.push(trace_w[k]);
            } else if r < c {
                let partner = basis
                    .index(b, c, r)
                    .ok_or_else(|| Error::LinearAlgebra("operator sector is not closed under adjoint".into()))?;
                coords[k] = (Some(sources.len() as u32), Some(sources.len() as u32 + 1));
                sources.push((k, partner, 1));
                sources.push((k, partner, 2));
                weights.extend([0.0, 0.0]);
            }
        }
        let n = sources.len();
        let i = Complex64::new(0.0, 1.0);
        let columns: Vec<Vec<(u32, f64)>> = sources
            .iter()
            .map(|&(k, partner, kind)| {
                let mut y: Vec<(usize, Complex64)> = match kind {
                    0 => l.column(k).collect(),
                    1 => l.column(k).chain(l.column(partner)).collect(),
                    _ => l
                        .column(k)
                        .map(|(r, v)| (r, i * v))
                        .chain(l.column(partner).map(|(r, v)| (r, -i * v)))
                        .collect(),
                };
                y.sort_unstable_by_key(|e| e.0);
                let mut out: Vec<(u32, f64)> = Vec::with_capacity(y.len());
                let mut push = |row: u32, v: f64| match out.last_mut() {
                    Some(last) if last.0 == row => last.1 += v,
                    _ => out.push((row, v)),
                };
                for (r, v) in y {
                    match coords[r] {
                        (Some(re), None) => push(re, v.re),
                        (Some(re), Some(im)) => {
                            push(re, v.re);
                            push(im, v.im);
                        }
                        _ => {}
                    }
                }
                out.sort_by_key(|e| e.0);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(out.len());
                for (r, v) in out {
                    match merged.last_mut() {
                        Some(last) if last.0 == r => last.1 += v,
                        _ => merged.push((r, v)),
                    }
                }
                merged.retain(|e| e.1 != 0.0);
                merged
            })
            .collect();
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        for col in columns {
            for (r, v) in col {
                rows.push(r);
                vals.push(v);
            }
            col_ptr.push(rows.len());
        }
        Ok(Self {
            n,
            col_ptr,
            rows,
            vals,
            coords,
            weights,
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                y[self.rows[p] as usize] += self.vals[p] * xk;
            }
        }
        y
    }

    fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sparse copy with `shift` on the diagonal and optionally one row replaced.
    fn to_faer(&self, shift: f64, replace_row: Option<usize>) -> Result<SparseColMat<usize, f64>> {
        let mut trips = Vec::with_capacity(self.vals.len() + self.n);
        for k in 0..self.n {
            let mut diag_seen = false;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let r = self.rows[p] as usize;
                if replace_row == Some(r) {
                    continue;
                }
                let v = if r == k {
                    diag_seen = true;
                    self.vals[p] + shift
                } else {
                    self.vals[p]
                };
                trips.push(Triplet::new(r, k, v));
            }
            if !diag_seen && shift != 0.0 && replace_row != Some(k) {
                trips.push(Triplet::new(k, k, shift));
            }
            if let Some(row) = replace_row {
                if self.weights[k] != 0.0 {
                    trips.push(Triplet::new(row, k, self.weights[k]));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trips).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
    }

    /// Liouville-space vector of the Hermitian matrix with coordinates `x`.
    fn to_complex(&self, l: &Superoperator, x: &[f64]) -> Vec<Complex64> {
        let basis = l.basis();
        let mut v = vec![ZERO; self.coords.len()];
        for (k, &(re, im)) in self.coords.iter().enumerate() {
            if let Some(re) = re {
                let z = Complex64::new(x[re as usize], im.map_or(0.0, |i| x[i as usize]));
                v[k] = z;
                if im.is_some() {
                    let (b, r, c) = basis.entry(k);
                    if let Some(p) = basis.index(b, c, r) {
                        v[p] = z.conj();
                    }
                }
            }
        }
        v
    }
}

fn solve(lu: &Lu<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut col = Mat::<f64>::from_fn(x.len(), 1, |i, _| x[i]);
    lu.solve_in_place(col.as_mut());
    (0..x.len()).map(|i| col[(i, 0)]).collect()
}

/// Null vector of `l`, normalized to unit weighted trace and Hermitian.
///
/// `l` must act on a sector closed under the adjoint (all elements, or
/// excitation-difference sector 0), since only there a trace exists.
pub fn steady_state(l: &Superoperator, opts: &SteadyStateOptions) -> Result<SteadyState> {
    if l.basis().sector().is_some_and(|q| q != 0) {
        return Err(Error::invalid(
            "sector",
            "steady states live in excitation-difference sector 0",
        ));
    }
    let real = RealForm::new(l)?;
    let n = real.n;
    let scale = real.max_abs().max(f64::MIN_POSITIVE);

    let finish = |x: &[f64], method: SteadyMethod, second: Option<Complex64>| -> Result<SteadyState> {
        let tr = rdot(x, &real.weights);
        if !tr.is_finite() || tr.abs() < 1e-300 {
            return Err(Error::LinearAlgebra("kernel vector has zero trace".into()));
        }
        let v: Vec<Complex64> = real.to_complex(l, x).into_iter().map(|z| z / tr).collect();
        let residual = norm2(&l.apply(&v));
        let rho = DensityMatrix::from_vector(l, &v);
        let min_eigenvalue = rho.min_eigenvalue()?;
        Ok(SteadyState {
            rho,
            residual,
            method,
            second_eigenvalue: second,
            min_eigenvalue,
        })
    };

    let bordered = |second: Option<Complex64>| -> Result<SteadyState> {
        let row = (0..n)
            .find(|&k| real.weights[k] != 0.0)
            .ok_or_else(|| Error::LinearAlgebra("operator basis has no diagonal element".into()))?;
        let lu = real
            .to_faer(0.0, Some(row))?
            .sp_lu()
            .map_err(|e| Error::LinearAlgebra(format!("bordered LU: {e:?}")))?;
        let mut rhs = vec![0.0; n];
        rhs[row] = 1.0;
        finish(&solve(&lu, &rhs), SteadyMethod::Bordered, second)
    };

    let sigma = -opts.shift_rel * scale;
    let lu = match real.to_faer(-sigma, None)?.sp_lu() {
        Ok(lu) => lu,
        Err(_) if opts.method == SteadyMethod::Bordered || opts.krylov_dim == 0 => return bordered(None),
        Err(e) => return Err(Error::LinearAlgebra(format!("shifted LU: {e:?}"))),
    };
    // Start from the maximally mixed state, which already has the right symmetry.
    let mixed: Vec<f64> = real.weights.iter().map(|&w| if w != 0.0 { 1.0 } else { 0.0 }).collect();
    let x = inverse_iterate(&lu, &real, mixed, opts);
    let second = if opts.krylov_dim > 0 {
        check_kernel(&lu, &real, x.as_deref(), sigma, opts, scale)?
    } else {
        None
    };
    let x = match (opts.method, x) {
        (SteadyMethod::ShiftInvert, Some(x)) => x,
        _ => return bordered(second),
    };
    let out = finish(&x, SteadyMethod::ShiftInvert, second)?;
    if out.residual < opts.residual_tol {
        Ok(out)
    } else {
        let alt = bordered(second)?;
        Ok(if alt.residual < out.residual { alt } else { out })
    }
}

/// Inverse iteration, continued until the residual stops improving.
fn inverse_iterate(
    lu: &Lu<usize, f64>,
    real: &RealForm,
    mut x: Vec<f64>,
    opts: &SteadyStateOptions,
) -> Option<Vec<f64>> {
    let mut previous = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut y = solve(lu, &x);
        let ny = rnorm(&y);
        if !ny.is_finite() || ny == 0.0 {
            return None;
        }
        y.iter_mut().for_each(|v| *v /= ny);
        let r = rnorm(&real.apply(&y));
        if r >= 0.9 * previous {
            if r < previous {
                x = y;
            }
            break;
        }
        previous = r;
        x = y;
    }
    Some(x)
}

/// Deterministic start vector with no special symmetry.
fn generic_vector(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (0.7 * i as f64).sin()).collect();
    let nv = rnorm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Fails when the kernel is more than one-dimensional; otherwise returns an
/// estimate of the eigenvalue of `L` nearest zero after the kernel.
///
/// Inverse iteration from two unrelated starts converges to the same direction
/// exactly when the kernel is simple; a second, distinct near-zero eigenvalue is
/// caught by a short Arnoldi run on `(L - sigma)^-1`.
fn check_kernel(
    lu: &Lu<usize, f64>,
    real: &RealForm,
    x: Option<&[f64]>,
    sigma: f64,
    opts: &SteadyStateOptions,
    scale: f64,
) -> Result<Option<Complex64>> {
    let tol = opts.degeneracy_tol * scale;
    if let Some(x) = x {
        if let Some(mut y) = inverse_iterate(lu, real, generic_vector(real.n), opts) {
            let proj = rdot(x, &y) / rdot(x, x);
            for (yk, xk) in y.iter_mut().zip(x) {
                *yk -= proj * xk;
            }
            let ny = rnorm(&y);
            if ny > 1e-6 {
                y.iter_mut().for_each(|v| *v /= ny);
                let r = rnorm(&real.apply(&y));
                if r < tol {
                    return Err(Error::DegenerateKernel {
                        second: r,
                        tolerance: tol,
                    });
                }
            }
        }
    }
    second_eigenvalue(lu, sigma, real.n, opts, tol)
}

/// Arnoldi on `(L - sigma)^-1`; returns the second eigenvalue of `L` nearest zero
/// and fails if it is itself numerically zero.
fn second_eigenvalue(
    lu: &Lu<usize, f64>,
    sigma: f64,
    n: usize,
    opts: &SteadyStateOptions,
    tol: f64,
) -> Result<Option<Complex64>> {
    let m = opts.krylov_dim.min(n);
    if m < 2 {
        return Ok(None);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(generic_vector(n));
    let mut h = Mat::<f64>::zeros(m + 1, m);
    let mut steps = m;
    for j in 0..m {
        let mut w = solve(lu, &basis[j]);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let dot = rdot(q, &w);
                h[(i, j)] += dot;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= dot * qk;
                }
            }
        }
        let nw = rnorm(&w);
        h[(j + 1, j)] = nw;
        if nw < 1e-14 * h[(0, 0)].abs().max(1.0) {
            steps = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        basis.push(w);
    }
    if steps < 2 {
        return Ok(None);
    }
    let hm = Mat::<f64>::from_fn(steps, steps, |r, c| h[(r, c)]);
    let mu = hm
        .eigenvalues()
        .map_err(|e| Error::LinearAlgebra(format!("Hessenberg eigenvalues: {e:?}")))?;
    let mut lambdas: Vec<Complex64> = mu.iter().filter(|m| m.norm() > 0.0).map(|&m| sigma + m.inv()).collect();
    lambdas.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let second = lambdas.get(1).copied();
    if let Some(s) = second {
        if s.norm() < tol {
            return Err(Error::DegenerateKernel {
                second: s.norm(),
                tolerance: tol,
            });
        }
    }
    Ok(second)
}

/// Steady-state moments in distinct-spin normalization.
///
/// Same-species pair quantities need two distinct spins and are `None` for `N = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub n: u32,
    pub s_z_a: f64,
    pub s_z_b: f64,
    pub pp_aa: Option<f64>,
    pub pp_bb: Option<f64>,
    pub pp_ab: Complex64,
    /// `<sigma+_A sigma+_A' sigma-_B sigma-_B'>` over four distinct spins.
    pub quad: Option<Complex64>,
    pub zz_aa: Option<f64>,
    pub zz_bb: Option<f64>,
    pub zz_ab: f64,
    pub sigma_plus_a: Complex64,
    pub sigma_plus_b: Complex64,
    /// Raw collective moments `<S+_a S-_a>`, used by output-field observables.
    pub s_plus_s_minus_a: f64,
    pub s_plus_s_minus_b: f64,
}

impl CorrelatorSet {
    /// Largest absolute difference over all entries present in both sets.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        };
        let optc = |a: Option<Complex64>, b: Option<Complex64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).norm(),
            _ => 0.0,
        };
        [
            (self.s_z_a - other.s_z_a).abs(),
            (self.s_z_b - other.s_z_b).abs(),
            opt(self.pp_aa, other.pp_aa),
            opt(self.pp_bb, other.pp_bb),
            (self.pp_ab - other.pp_ab).norm(),
            optc(self.quad, other.quad),
            opt(self.zz_aa, other.zz_aa),
            opt(self.zz_bb, other.zz_bb),
            (self.zz_ab - other.zz_ab).abs(),
            (self.sigma_plus_a - other.sigma_plus_a).norm(),
            (self.sigma_plus_b - other.sigma_plus_b).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Correlators of a normalized state.
pub fn correlators(rho: &DensityMatrix) -> CorrelatorSet {
    let space = rho.space();
    let n = space.n();
    let nf = f64::from(n);
    let sm_a = space.lowering(Species::A);
    let sm_b = space.lowering(Species::B);
    let sp_a = sm_a.adjoint();
    let sp_b = sm_b.adjoint();
    let sz_a = space.sz(Species::A);
    let sz_b = space.sz(Species::B);

    let ez_a = rho.expect(&sz_a).re;
    let ez_b = rho.expect(&sz_b).re;
    let pm_a = rho.expect(&sp_a.mul(&sm_a)).re;
    let pm_b = rho.expect(&sp_b.mul(&sm_b)).re;
    let pair = nf * (nf - 1.0);
    let distinct = n >= 2;
    let pp = |pm: f64, ez: f64| distinct.then(|| (pm - (nf + ez) / 2.0) / pair);
    let zz = |ez2: f64| distinct.then(|| (ez2 - nf) / pair);
    let quad = distinct.then(|| {
        let op = sp_a.mul(&sp_a).mul(&sm_b).mul(&sm_b);
        rho.expect(&op) / (pair * pair)
    });

    CorrelatorSet {
        n,
        s_z_a: ez_a / nf,
        s_z_b: ez_b / nf,
        pp_aa: pp(pm_a, ez_a),
        pp_bb: pp(pm_b, ez_b),
        pp_ab: rho.expect(&sp_a.mul(&sm_b)) / (nf * nf),
        quad,
        zz_aa: zz(rho.expect(&sz_a.mul(&sz_a)).re),
        zz_bb: zz(rho.expect(&sz_b.mul(&sz_b)).re),
        zz_ab: rho.expect(&sz_a.mul(&sz_b)).re / (nf * nf),
        sigma_plus_a: rho.expect(&sp_a) / nf,
        sigma_plus_b: rho.expect(&sp_b) / nf,
        s_plus_s_minus_a: pm_a,
        s_plus_s_minus_b: pm_b,
    }
}

#[cfg(test)]
mod tests {
    use super::super::liouvillian::{build_liouvillian, build_liouvillian_full, build_liouvillian_pi, LiouvillianForm};
    use super::super::superop::{OperatorBasis, DEFAULT_MAX_DIMENSION};
    use super::*;
    use crate::model::{CouplingParams, SystemSize};

    fn pure_state(space: Arc<SpinSpace>, block: usize, psi: &[Complex64]) -> DensityMatrix {
        let mut blocks: Vec<Vec<Complex64>> = space.blocks().iter().map(|b| vec![ZERO; b.dim * b.dim]).collect();
        let d = psi.len();
        for r in 0..d {
            for c in 0..d {
                blocks[block][r * d + c] = psi[r] * psi[c].conj();
            }
        }
        // Pure Dicke states sit in one copy of a degenerate block.
        let w = space.blocks()[block].weight;
        for v in blocks[block].iter_mut() {
            *v /= w;
        }
        DensityMatrix {
            space,
            sector: None,
            blocks,
        }
    }

    #[test]
    fn all_up_product_state() {
        let space = Arc::new(SpinSpace::permutation_invariant(3).unwrap());
        let b = space.block_index(3, 3).unwrap();
        let mut psi = vec![ZERO; 16];
        psi[0] = Complex64::new(1.0, 0.0);
        let c = correlators(&pure_state(space, b, &psi));
        assert_eq!(c.s_z_a, 1.0);
        assert!(c.pp_aa.unwrap().abs() < 1e-15);
        assert_eq!(c.zz_aa, Some(1.0));
    }

    #[test]
    fn symmetric_single_excitation_pair() {
        // |j=1, m=0> = (|ud> + |du>)/sqrt2 for each species: <sigma+_1 sigma-_2> = 1/2.
        let space = Arc::new(SpinSpace::permutation_invariant(2).unwrap());
        let b = space.block_index(2, 2).unwrap();
        let idx = space.pi_state(b, 0, 0).unwrap();
        let mut psi = vec![ZERO; 9];
        psi[idx] = Complex64::new(1.0, 0.0);
        let c = correlators(&pure_state(space, b, &psi));
        assert!((c.pp_aa.unwrap() - 0.5).abs() < 1e-15);
        assert!((c.pp_bb.unwrap() - 0.5).abs() < 1e-15);
        assert!(c.s_z_a.abs() < 1e-15);
        assert!((c.zz_aa.unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_spin_rate_equation() {
        let p = CouplingParams::finite(1, 2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let l = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
        let ss = steady_state(&l, &SteadyStateOptions::default()).unwrap();
        let c = correlators(&ss.rho);
        assert!((c.s_z_a + 1.0 / 3.0).abs() < 1e-12);
        assert!((c.s_z_b + 1.0 / 3.0).abs() < 1e-12);
        assert!(c.pp_ab.norm() < 1e-12);
        assert!(c.sigma_plus_a.norm() < 1e-12);
        assert!(c.pp_aa.is_none() && c.quad.is_none());
        assert!(ss.residual < 1e-10);
        // kappa = 3, V = 1 gives (3 - 1)/(3 + 1).
        let p = CouplingParams::new(3.0, 0.0, 1.0, 0.0, ZERO, SystemSize::Finite(1)).unwrap();
        let l = build_liouvillian_pi(&p, Some(0), DEFAULT_MAX_DIMENSION).unwrap();
        let c = correlators(&steady_state(&l, &SteadyStateOptions::default()).unwrap().rho);
        assert!((c.s_z_a - 0.5).abs() < 1e-12, "{}", c.s_z_a);
    }

    #[test]
    fn dicke_basis_matches_product_basis() {
        let cases = [
            (2.0, 1.0, Complex64::new(0.0, 0.0), 0.0),
            (2.0, 0.0, Complex64::new(2.0, 0.0), 0.0),
            (1.5, -0.7, Complex64::new(0.4, -1.1), 0.3),
        ];
        for n in 1..=3u32 {
            for &(v, vp, vm, d) in &cases {
                let p = CouplingParams::new(1.0, d, v, vp, vm, SystemSize::Finite(n)).unwrap();
                let full = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
                let pi = build_liouvillian_pi(&p, Some(0), DEFAULT_MAX_DIMENSION).unwrap();
                let opts = SteadyStateOptions::default();
                let sf = steady_state(&full, &opts).unwrap();
                let sp = steady_state(&pi, &opts).unwrap();
                let diff = correlators(&sf.rho).max_abs_diff(&correlators(&sp.rho));
                assert!(diff < 1e-8, "N = {n}, case {v} {vp} {vm}: {diff}");
                assert!(sf.residual < 1e-10 && sp.residual < 1e-10);
                assert!(sf.is_positive() && sp.is_positive());
            }
        }
    }

    #[test]
    fn bordered_and_shift_invert_agree() {
        let p = CouplingParams::finite(4, 2.0, 0.5, Complex64::new(1.0, 0.5)).unwrap();
        let l = build_liouvillian_pi(&p, Some(0), DEFAULT_MAX_DIMENSION).unwrap();
        let a = steady_state(&l, &SteadyStateOptions::default()).unwrap();
        let b = steady_state(
            &l,
            &SteadyStateOptions {
                method: SteadyMethod::Bordered,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(b.method, SteadyMethod::Bordered);
        assert!(correlators(&a.rho).max_abs_diff(&correlators(&b.rho)) < 1e-10);
        let second = a.second_eigenvalue.unwrap();
        assert!(second.norm() > 1e-3 && second.re < 0.0);
    }

    #[test]
    fn decoupled_species_have_degenerate_kernel_without_pump() {
        // No pump and no coupling: every all-down mixture is stationary, and with
        // dephasing-free decay the ground state of each block is a fixed point.
        let p = CouplingParams::new(1e-300, 0.0, 1.0, 0.0, ZERO, SystemSize::Finite(2)).unwrap();
        let l = build_liouvillian_pi(&p, Some(0), DEFAULT_MAX_DIMENSION).unwrap();
        match steady_state(&l, &SteadyStateOptions::default()) {
            Err(Error::DegenerateKernel { second, tolerance }) => assert!(second < tolerance),
            other => panic!("expected a degenerate kernel, got {other:?}"),
        }
    }

    #[test]
    fn unrestricted_steady_state_has_no_coherence() {
        let p = CouplingParams::new(1.0, 0.4, 2.0, 0.5, Complex64::new(0.8, 0.3), SystemSize::Finite(2)).unwrap();
        let l = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
        let c = correlators(&steady_state(&l, &SteadyStateOptions::default()).unwrap().rho);
        assert!(c.sigma_plus_a.norm() < 1e-10 && c.sigma_plus_b.norm() < 1e-10);
    }

    #[test]
    fn export_round_trip() {
        let p = CouplingParams::finite(3, 2.0, 1.0, ZERO).unwrap();
        let space = Arc::new(SpinSpace::permutation_invariant(3).unwrap());
        let basis = Arc::new(OperatorBasis::new(space, Some(0)));
        let l = build_liouvillian(&p, basis, LiouvillianForm::Standard, false, DEFAULT_MAX_DIMENSION).unwrap();
        let ss = steady_state(&l, &SteadyStateOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (bin, json) = (dir.path().join("rho.bin"), dir.path().join("rho.json"));
        ss.rho.export(&bin, &json).unwrap();
        let header: DensityHeader = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        let total: usize = header.blocks.iter().map(|b| b.dim * b.dim).sum();
        assert_eq!(std::fs::metadata(&bin).unwrap().len() as usize, total * 16);
        assert!((header.trace - 1.0).abs() < 1e-12);
    }
}
