//! Assembly of the two-species Liouvillian in several algebraically equivalent forms.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{BasisKind, BlockOp, Species, SpinSpace};
use super::superop::{OperatorBasis, Superoperator, Term, DEFAULT_MAX_DIMENSION};
use crate::error::{Error, Result};
use crate::model::CouplingParams;

/// Way the interspecies part of the generator is written down.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiouvillianForm {
    /// Coherent exchange Hamiltonian plus cross dissipators with rate `V_plus`.
    #[default]
    Standard,
    /// Commutator form written with the directional couplings `V_AB`, `V_BA`.
    Cascaded,
    /// One collective jump `S-_A + sign(V_plus) S-_B` plus residual individual decay.
    JumpSign,
    /// Symmetric and antisymmetric collective jumps with rates `V_up_up`, `V_up_down`.
    JumpPair,
}

impl LiouvillianForm {
    pub const ALL: [LiouvillianForm; 4] = [
        LiouvillianForm::Standard,
        LiouvillianForm::Cascaded,
        LiouvillianForm::JumpSign,
        LiouvillianForm::JumpPair,
    ];
}

/// Collective operators of one space, optionally with the species exchanged.
struct Ops {
    sm_a: BlockOp,
    sm_b: BlockOp,
    sz_a: BlockOp,
    sz_b: BlockOp,
    swapped: bool,
}

impl Ops {
    fn new(space: &SpinSpace, swapped: bool) -> Self {
        let (a, b) = if swapped {
            (Species::B, Species::A)
        } else {
            (Species::A, Species::B)
        };
        Self {
            sm_a: space.lowering(a),
            sm_b: space.lowering(b),
            sz_a: space.sz(a),
            sz_b: space.sz(b),
            swapped,
        }
    }

    fn species(&self, s: Species) -> Species {
        match (s, self.swapped) {
            (Species::A, true) => Species::B,
            (Species::B, true) => Species::A,
            (s, false) => s,
        }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Local pump `kappa sum_i D[sigma+_i]` on both species.
fn drive_terms(space: &SpinSpace, ops: &Ops, kappa: f64) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    match space.kind() {
        BasisKind::Full => {
            for s in [Species::A, Species::B] {
                for i in 0..space.n() {
                    let up = space.local_lowering(ops.species(s), i)?.adjoint();
                    terms.extend(Term::dissipator(kappa, &up));
                }
            }
        }
        BasisKind::PermutationInvariant => {
            for s in [Species::A, Species::B] {
                terms.push(Term::LocalPump {
                    rate: kappa,
                    species: ops.species(s),
                });
            }
        }
    }
    Ok(terms)
}

/// All generator terms for `params` on `space`.
///
/// With `pt_transformed` the species labels of every operator are exchanged and
/// the coherent interspecies Hamiltonian changes sign.
pub fn liouvillian_terms(
    params: &CouplingParams,
    space: &SpinSpace,
    form: LiouvillianForm,
    pt_transformed: bool,
) -> Result<Vec<Term>> {
    let n = f64::from(params.n()?);
    if params.n()? != space.n() {
        return Err(Error::invalid(
            "N",
            format!("parameters have N = {} but the space has N = {}", n, space.n()),
        ));
    }
    let ops = Ops::new(space, pt_transformed);
    let sp_a = ops.sm_a.adjoint();
    let sp_b = ops.sm_b.adjoint();
    let (v, vp, vm) = (params.v(), params.v_plus(), params.v_minus());
    let mut terms = Vec::new();

    let h0 = ops.sz_a.add(&ops.sz_b.scale(c(-1.0))).scale(c(params.delta() / 4.0));
    terms.extend(Term::hamiltonian(&h0));

    let intra = |terms: &mut Vec<Term>, rate: f64| {
        terms.extend(Term::dissipator(rate, &ops.sm_a));
        terms.extend(Term::dissipator(rate, &ops.sm_b));
    };

    let h_inter = || {
        let sign = if pt_transformed { -1.0 } else { 1.0 };
        let g = Complex64::new(0.0, sign) * vm / (2.0 * n);
        let ab = sp_a.mul(&ops.sm_b).scale(g);
        ab.add(&ab.adjoint())
    };

    match form {
        LiouvillianForm::Standard => {
            terms.extend(Term::hamiltonian(&h_inter()));
            terms.extend(Term::cross_dissipator(vp / n, &ops.sm_a, &ops.sm_b));
            terms.extend(Term::cross_dissipator(vp / n, &ops.sm_b, &ops.sm_a));
            intra(&mut terms, v / n);
        }
        LiouvillianForm::Cascaded => {
            // In the transformed generator the Hamiltonian flip maps V_minus to
            // -V_minus before the directional couplings are formed.
            let vm = if pt_transformed { -vm } else { vm };
            let v_ab = vp + vm;
            let v_ba = vp - vm.conj();
            let scale = -1.0 / (2.0 * n);
            // -(conj(g) [S+_y, S-_x rho] + g [rho S+_x, S-_y]) / 2N for each direction x -> y.
            for (g, sm_x, sp_y, sp_x, sm_y) in [
                (v_ab, &ops.sm_a, &sp_b, &sp_a, &ops.sm_b),
                (v_ba, &ops.sm_b, &sp_a, &sp_b, &ops.sm_a),
            ] {
                let gc = g.conj() * scale;
                let gs = g * scale;
                terms.push(Term::Left {
                    coef: gc,
                    op: sp_y.mul(sm_x),
                });
                terms.push(Term::Sandwich {
                    coef: -gc,
                    left: sm_x.clone(),
                    right: sp_y.clone(),
                });
                terms.push(Term::Right {
                    coef: gs,
                    op: sp_x.mul(sm_y),
                });
                terms.push(Term::Sandwich {
                    coef: -gs,
                    left: sm_y.clone(),
                    right: sp_x.clone(),
                });
            }
            intra(&mut terms, v / n);
        }
        LiouvillianForm::JumpSign => {
            terms.extend(Term::hamiltonian(&h_inter()));
            let sign = if vp < 0.0 { -1.0 } else { 1.0 };
            let jump = ops.sm_a.add(&ops.sm_b.scale(c(sign)));
            terms.extend(Term::dissipator(vp.abs() / n, &jump));
            intra(&mut terms, (v - vp.abs()) / n);
        }
        LiouvillianForm::JumpPair => {
            terms.extend(Term::hamiltonian(&h_inter()));
            let rates = params.jumps();
            let sym = ops.sm_a.add(&ops.sm_b);
            let anti = ops.sm_a.add(&ops.sm_b.scale(c(-1.0)));
            terms.extend(Term::dissipator(rates.v_up_up / n, &sym));
            terms.extend(Term::dissipator(rates.v_up_down / n, &anti));
        }
    }

    terms.extend(drive_terms(space, &ops, params.kappa())?);
    Ok(terms)
}

/// Assembles the generator on an existing operator basis.
pub fn build_liouvillian(
    params: &CouplingParams,
    basis: Arc<OperatorBasis>,
    form: LiouvillianForm,
    pt_transformed: bool,
    max_dimension: usize,
) -> Result<Superoperator> {
    let terms = liouvillian_terms(params, basis.space(), form, pt_transformed)?;
    Superoperator::assemble(basis, &terms, max_dimension)
}

/// Full product-basis Liouvillian for `N <= 3` on all matrix elements.
pub fn build_liouvillian_full(params: &CouplingParams, form: LiouvillianForm) -> Result<Superoperator> {
    let n = params.n()?;
    if n > 3 {
        return Err(Error::invalid(
            "N",
            format!("full product basis limited to N <= 3, got {n}"),
        ));
    }
    let space = Arc::new(SpinSpace::full(n)?);
    let basis = Arc::new(OperatorBasis::new(space, None));
    build_liouvillian(params, basis, form, false, DEFAULT_MAX_DIMENSION)
}

/// Permutation-invariant Liouvillian, restricted to one excitation-difference
/// sector when `sector` is given (the steady state lives in sector 0).
pub fn build_liouvillian_pi(
    params: &CouplingParams,
    sector: Option<i32>,
    max_dimension: usize,
) -> Result<Superoperator> {
    let space = Arc::new(SpinSpace::permutation_invariant(params.n()?)?);
    let basis = Arc::new(OperatorBasis::new(space, sector));
    build_liouvillian(params, basis, LiouvillianForm::Standard, false, max_dimension)
}

/// Outcome of comparing the generator with its species-exchanged,
/// Hamiltonian-flipped counterpart `L'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtCheck {
    /// `max |L' - L|`: zero exactly when the generator is invariant.
    pub residual: f64,
    /// `max |L' - conj(L)|`: vanishes for every parameter set, since the
    /// transformation acts as complex conjugation on this model.
    pub conjugation_residual: f64,
    pub n: u32,
    pub basis: BasisKind,
}

/// Checks invariance under species exchange combined with `H_inter -> -H_inter`.
///
/// Uses the product basis for `N <= 3` and the Dicke basis otherwise; the
/// thermodynamic-limit marker is evaluated at `N = 2`.
pub fn pt_check(params: &CouplingParams) -> Result<PtCheck> {
    let params = match params.size().finite() {
        Some(_) => *params,
        None => params.with_size(crate::model::SystemSize::Finite(2))?,
    };
    let n = params.n()?;
    let space = if n <= 3 {
        SpinSpace::full(n)?
    } else {
        SpinSpace::permutation_invariant(n)?
    };
    let kind = space.kind();
    let basis = Arc::new(OperatorBasis::new(Arc::new(space), None));
    let l = build_liouvillian(
        &params,
        basis.clone(),
        LiouvillianForm::Standard,
        false,
        DEFAULT_MAX_DIMENSION,
    )?;
    let lt = build_liouvillian(&params, basis, LiouvillianForm::Standard, true, DEFAULT_MAX_DIMENSION)?;
    Ok(PtCheck {
        residual: lt.max_abs_diff(&l),
        conjugation_residual: lt.max_abs_diff(&l.conj()),
        n,
        basis: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemSize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, n: u32) -> CouplingParams {
        let v = rng.random_range(0.1..3.0);
        let vp = rng.random_range(-v..v);
        let vm = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        CouplingParams::new(
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
            v,
            vp,
            vm,
            SystemSize::Finite(n),
        )
        .unwrap()
    }

    #[test]
    fn all_forms_agree_entrywise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..4 {
                let p = random_params(&mut rng, n);
                let reference = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
                for form in LiouvillianForm::ALL {
                    let other = build_liouvillian_full(&p, form).unwrap();
                    assert!(other.max_abs_diff(&reference) < 1e-12, "{form:?} at N = {n}");
                }
            }
        }
    }

    #[test]
    fn trace_preserving_in_both_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 3] {
            let p = random_params(&mut rng, n);
            let l = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
            assert!(l.trace_defect() < 1e-12);
        }
        for n in [1, 2, 5, 6] {
            let p = random_params(&mut rng, n);
            let l = build_liouvillian_pi(&p, None, DEFAULT_MAX_DIMENSION).unwrap();
            assert!(l.trace_defect() < 1e-11, "N = {n}: {}", l.trace_defect());
        }
    }

    #[test]
    fn cross_dissipator_expansion() {
        let space = Arc::new(SpinSpace::full(2).unwrap());
        let basis = Arc::new(OperatorBasis::new(space.clone(), None));
        let a = space.lowering(Species::A);
        let b = space
            .local_lowering(Species::B, 1)
            .unwrap()
            .scale(Complex64::new(0.3, -0.8));
        for sign in [1.0, -1.0] {
            let sum = a.add(&b.scale(c(sign)));
            let lhs = Superoperator::assemble(basis.clone(), &Term::dissipator(1.0, &sum), usize::MAX).unwrap();
            let mut terms = Term::dissipator(1.0, &a);
            terms.extend(Term::dissipator(1.0, &b));
            terms.extend(Term::cross_dissipator(sign, &a, &b));
            terms.extend(Term::cross_dissipator(sign, &b, &a));
            let rhs = Superoperator::assemble(basis.clone(), &terms, usize::MAX).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-14);
        }
    }

    #[test]
    fn row_major_vectorization() {
        // -i[H, rho] with H = |1><0| + h.c. on a single A spin (N = 1, D = 4).
        let space = Arc::new(SpinSpace::full(1).unwrap());
        let basis = Arc::new(OperatorBasis::new(space.clone(), None));
        assert_eq!(basis.index(0, 2, 3), Some(2 * 4 + 3));
        let sm = space.lowering(Species::A);
        let h = sm.add(&sm.adjoint());
        let l = Superoperator::assemble(basis, &Term::hamiltonian(&h), usize::MAX).unwrap();
        // d rho_{00}/dt = -i (H rho - rho H)_{00} = -i (rho_{10} - rho_{01}).
        assert_eq!(l.get(0, 4), Complex64::new(0.0, -1.0));
        assert_eq!(l.get(0, 1), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn pt_residual_vanishes_only_for_real_v_minus_and_zero_detuning() {
        let base = CouplingParams::finite(2, 2.0, 0.5, Complex64::new(1.0, 0.0)).unwrap();
        let sym = pt_check(&base).unwrap();
        assert!(sym.residual < 1e-12);
        let detuned = pt_check(&base.with_delta(0.5).unwrap()).unwrap();
        assert!(detuned.residual > 1e-3);
        let imaginary = pt_check(&base.with_v_minus(Complex64::new(0.0, 1.0)).unwrap()).unwrap();
        assert!(imaginary.residual > 1e-3);
        for r in [sym, detuned, imaginary] {
            assert!(r.conjugation_residual < 1e-14);
        }
        let pi = pt_check(&base.with_size(SystemSize::Finite(5)).unwrap().with_delta(0.2).unwrap()).unwrap();
        assert_eq!(pi.basis, BasisKind::PermutationInvariant);
        assert!(pi.residual > 1e-3 && pi.conjugation_residual < 1e-13);
    }

    #[test]
    fn memory_budget_reports_dimension() {
        let p = CouplingParams::finite(6, 2.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        match build_liouvillian_pi(&p, Some(0), 10) {
            Err(Error::MemoryBudget { dimension, limit }) => {
                assert!(dimension > 10);
                assert_eq!(limit, 10);
            }
            other => panic!("expected a memory-budget error, got {other:?}"),
        }
    }
}
