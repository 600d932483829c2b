//! Intensities and cross-correlation of the two chiral output modes.
//!
//! With vacuum inputs, `a_1,out = g1 (S-_A + p1 S-_B)` and
//! `a_2,out = g2 (S-_B + p2 S-_A)`; all moments follow from the collective
//! second moments, rebuilt here from the distinct-spin correlators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exact::CorrelatorSet;
use crate::model::CascadedWaveguideParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputField {
    /// `<a1_out^dag a1_out>`.
    pub intensity_1: f64,
    /// `<a2_out^dag a2_out>`.
    pub intensity_2: f64,
    /// `<a1_out^dag a2_out>`.
    pub cross_12: Complex64,
}

/// Collective moments `(<S+_A S-_A>, <S+_B S-_B>, <S+_A S-_B>)`.
pub fn collective_moments(corr: &CorrelatorSet) -> (f64, f64, Complex64) {
    let n = f64::from(corr.n);
    let same = |s_z: f64, pp: Option<f64>| n * (1.0 + s_z) / 2.0 + n * (n - 1.0) * pp.unwrap_or(0.0);
    (
        same(corr.s_z_a, corr.pp_aa),
        same(corr.s_z_b, corr.pp_bb),
        corr.pp_ab * (n * n),
    )
}

pub fn output_field_correlations(corr: &CorrelatorSet, w: &CascadedWaveguideParams) -> OutputField {
    let (aa, bb, ab) = collective_moments(corr);
    let ba = ab.conj();
    let (g1, g2) = (w.g1, w.g2);
    let (p1, p2) = (w.p1.value(), w.p2.value());
    OutputField {
        intensity_1: g1 * g1 * (aa + bb + 2.0 * p1 * ab.re),
        intensity_2: g2 * g2 * (bb + aa + 2.0 * p2 * ab.re),
        cross_12: g1 * g2 * (ab + p2 * aa + p1 * bb + p1 * p2 * ba),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{
        build_liouvillian_full, build_liouvillian_pi, correlators, steady_state, LiouvillianForm, Species,
        SteadyStateOptions, DEFAULT_MAX_DIMENSION,
    };
    use crate::model::{CouplingParams, PhaseSign};

    fn waveguide(p1: PhaseSign) -> CascadedWaveguideParams {
        CascadedWaveguideParams::new(0.3, 0.2, p1, PhaseSign::Plus, 0.0, 0.0).unwrap()
    }

    #[test]
    fn ground_state_is_dark() {
        let corr = CorrelatorSet {
            n: 5,
            s_z_a: -1.0,
            s_z_b: -1.0,
            pp_aa: Some(0.0),
            pp_bb: Some(0.0),
            pp_ab: Complex64::new(0.0, 0.0),
            quad: Some(Complex64::new(0.0, 0.0)),
            zz_aa: Some(1.0),
            zz_bb: Some(1.0),
            zz_ab: 1.0,
            sigma_plus_a: Complex64::new(0.0, 0.0),
            sigma_plus_b: Complex64::new(0.0, 0.0),
            s_plus_s_minus_a: 0.0,
            s_plus_s_minus_b: 0.0,
        };
        let out = output_field_correlations(&corr, &waveguide(PhaseSign::Plus));
        assert_eq!(out.intensity_1, 0.0);
        assert_eq!(out.intensity_2, 0.0);
        assert_eq!(out.cross_12, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reconstructed_moments_match_direct_expectations() {
        let p = CouplingParams::finite(4, 2.0, 1.5, Complex64::new(0.5, 0.2)).unwrap();
        let l = build_liouvillian_pi(&p, Some(0), DEFAULT_MAX_DIMENSION).unwrap();
        let ss = steady_state(&l, &SteadyStateOptions::default()).unwrap();
        let corr = correlators(&ss.rho);
        let (aa, bb, ab) = collective_moments(&corr);
        assert!((aa - corr.s_plus_s_minus_a).abs() < 1e-12);
        assert!((bb - corr.s_plus_s_minus_b).abs() < 1e-12);
        let space = ss.rho.space();
        let direct = ss
            .rho
            .expect(&space.raising(Species::A).mul(&space.lowering(Species::B)));
        assert!((ab - direct).norm() < 1e-12);
        // Mode-1 intensity against the operator expansion.
        let w = waveguide(PhaseSign::Minus);
        let sm = space
            .lowering(Species::A)
            .add(&space.lowering(Species::B).scale(Complex64::new(-1.0, 0.0)));
        let direct = ss.rho.expect(&sm.adjoint().mul(&sm)).re * w.g1 * w.g1;
        assert!((output_field_correlations(&corr, &w).intensity_1 - direct).abs() < 1e-12);
    }

    #[test]
    fn phase_sign_selects_constructive_or_destructive_interference() {
        // Synchronized steady state: pp_AB > 0.
        let p = CouplingParams::finite(3, 2.0, 2.0, Complex64::new(0.0, 0.0)).unwrap();
        let l = build_liouvillian_full(&p, LiouvillianForm::Standard).unwrap();
        let corr = correlators(&steady_state(&l, &SteadyStateOptions::default()).unwrap().rho);
        assert!(corr.pp_ab.re > 0.0);
        let plus = output_field_correlations(&corr, &waveguide(PhaseSign::Plus)).intensity_1;
        let minus = output_field_correlations(&corr, &waveguide(PhaseSign::Minus)).intensity_1;
        assert!(plus > minus);
    }

    #[test]
    fn single_species_limit() {
        let corr = CorrelatorSet {
            n: 10,
            s_z_a: 0.2,
            s_z_b: -1.0,
            pp_aa: Some(0.05),
            pp_bb: Some(0.0),
            pp_ab: Complex64::new(0.0, 0.0),
            quad: None,
            zz_aa: None,
            zz_bb: None,
            zz_ab: 0.0,
            sigma_plus_a: Complex64::new(0.0, 0.0),
            sigma_plus_b: Complex64::new(0.0, 0.0),
            s_plus_s_minus_a: 0.0,
            s_plus_s_minus_b: 0.0,
        };
        let w = CascadedWaveguideParams::new(0.5, 0.0, PhaseSign::Plus, PhaseSign::Plus, 0.0, 0.0).unwrap();
        let out = output_field_correlations(&corr, &w);
        assert!((out.intensity_1 - 0.25 * (10.0 * 1.2 / 2.0 + 90.0 * 0.05)).abs() < 1e-12);
        assert_eq!(out.intensity_2, 0.0);
    }
}
