//! Two-time correlation vectors from the regression equations.

use num_complex::Complex64;

use super::regression::{regression_matrix, RegressionMatrix};
use crate::cumulant::{CumulantModel, CumulantState2};
use crate::error::{Error, Result};
use crate::exact::{CorrelatorSet, Species};
use crate::model::CouplingParams;
use crate::ode::{uniform_grid, Dopri5, OdeOptions};

/// Growth of `|c|` beyond which an evolution counts as divergent.
const DIVERGENCE_GROWTH: f64 = 1e12;

/// `(<sigma+_A(t + tau) sigma-_b(t)>, <sigma+_B(t + tau) sigma-_b(t)>)` on a tau grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVector {
    pub source: Species,
    pub tau: Vec<f64>,
    pub c: Vec<[Complex64; 2]>,
}

impl CorrelationVector {
    pub fn dtau(&self) -> f64 {
        if self.tau.len() < 2 {
            0.0
        } else {
            self.tau[1] - self.tau[0]
        }
    }

    /// `max |c(tau_max)| / max |c|` over both components.
    pub fn tail_ratio(&self) -> f64 {
        let mag = |c: &[Complex64; 2]| c[0].norm().max(c[1].norm());
        let peak = self.c.iter().map(mag).fold(0.0, f64::max);
        match self.c.last() {
            Some(last) if peak > 0.0 => mag(last) / peak,
            _ => 0.0,
        }
    }

    /// Largest imaginary part over both components and all delays.
    pub fn max_imag(&self) -> f64 {
        self.c.iter().flat_map(|c| c.iter()).fold(0.0, |m, z| m.max(z.im.abs()))
    }
}

/// Equal-time values `c(0)` for a source species, from second-order moments.
pub fn initial_correlations(moments: &CumulantState2, source: Species) -> [Complex64; 2] {
    match source {
        Species::A => [Complex64::new(moments.pp_aa, 0.0), moments.pp_ab.conj()],
        Species::B => [moments.pp_ab, Complex64::new(moments.pp_bb, 0.0)],
    }
}

/// Equal-time values `c(0)` from exact steady-state correlators (`N >= 2`).
pub fn initial_correlations_exact(corr: &CorrelatorSet, source: Species) -> Result<[Complex64; 2]> {
    let (pp_aa, pp_bb) = match (corr.pp_aa, corr.pp_bb) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("N", "distinct-spin correlations need N >= 2")),
    };
    Ok(match source {
        Species::A => [Complex64::new(pp_aa, 0.0), corr.pp_ab.conj()],
        Species::B => [corr.pp_ab, Complex64::new(pp_bb, 0.0)],
    })
}

/// Where the regression matrix comes from during the evolution.
#[derive(Clone, Copy, Debug)]
pub enum RegressionSource {
    /// Fixed populations.
    Constant(RegressionMatrix),
    /// Populations `s_z_a(t + tau)` co-evolved with the second-order moments,
    /// starting from `start` at `tau = 0`.
    CoEvolved {
        params: CouplingParams,
        start: CumulantState2,
    },
}

/// Integrates `dc/dtau = M(tau) c` on a uniform grid `0, dtau, ..., tau_max`.
pub fn evolve_correlations(
    c0: [Complex64; 2],
    source_species: Species,
    source: &RegressionSource,
    tau_max: f64,
    dtau: f64,
    ode: OdeOptions,
) -> Result<CorrelationVector> {
    if !(tau_max > 0.0 && dtau > 0.0 && dtau <= tau_max) {
        return Err(Error::invalid(
            "tau",
            format!("need 0 < dtau <= tau_max, got {dtau}, {tau_max}"),
        ));
    }
    let tau = uniform_grid(0.0, tau_max, dtau);
    let c0_norm = c0[0].norm().max(c0[1].norm()).max(f64::MIN_POSITIVE);
    let mut c = Vec::with_capacity(tau.len());
    match source {
        RegressionSource::Constant(m) => {
            let growth = (m.eigenvalues()[0].re * tau_max).exp();
            if growth > DIVERGENCE_GROWTH {
                return Err(Error::Divergent { growth, tau_max });
            }
            let y0 = [c0[0].re, c0[0].im, c0[1].re, c0[1].im];
            let mut solver = Dopri5::new(
                |_, y: &[f64; 4]| {
                    let d = m.apply([Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])]);
                    [d[0].re, d[0].im, d[1].re, d[1].im]
                },
                0.0,
                y0,
                ode,
            );
            solver.advance_sampled(tau_max, &tau, |_, y| {
                c.push([Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])]);
            })?;
        }
        RegressionSource::CoEvolved { params, start } => {
            let model = CumulantModel::new(*params)?;
            let mut y0 = [0.0; 13];
            y0[..9].copy_from_slice(&start.to_array());
            y0[9..].copy_from_slice(&[c0[0].re, c0[0].im, c0[1].re, c0[1].im]);
            let p = *params;
            let mut failure = None;
            let mut solver = Dopri5::new(
                |_, y: &[f64; 13]| {
                    let mut out = [0.0; 13];
                    let mut moments = [0.0; 9];
                    moments.copy_from_slice(&y[..9]);
                    out[..9].copy_from_slice(&model.rhs_array(&moments));
                    // Populations may overshoot [-1, 1] by integration error; clamp for M only.
                    let (za, zb) = (y[0].clamp(-1.0, 1.0), y[1].clamp(-1.0, 1.0));
                    match regression_matrix(&p, za, zb) {
                        Ok(m) => {
                            let d = m.apply([Complex64::new(y[9], y[10]), Complex64::new(y[11], y[12])]);
                            out[9..].copy_from_slice(&[d[0].re, d[0].im, d[1].re, d[1].im]);
                        }
                        Err(e) => failure = Some(e.to_string()),
                    }
                    out
                },
                0.0,
                y0,
                ode,
            );
            solver.advance_sampled(tau_max, &tau, |_, y| {
                c.push([Complex64::new(y[9], y[10]), Complex64::new(y[11], y[12])]);
            })?;
            drop(solver);
            if let Some(e) = failure {
                return Err(Error::LinearAlgebra(e));
            }
            let peak = c.iter().map(|z| z[0].norm().max(z[1].norm())).fold(0.0, f64::max);
            if peak / c0_norm > DIVERGENCE_GROWTH {
                return Err(Error::Divergent {
                    growth: peak / c0_norm,
                    tau_max,
                });
            }
        }
    }
    Ok(CorrelationVector {
        source: source_species,
        tau,
        c,
    })
}

/// Default integrator tolerances for correlation evolution.
pub fn correlation_ode_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-10,
        atol: 1e-14,
        ..OdeOptions::default()
    }
}

/// Stationary correlation in a periodically modulated steady state: the
/// co-evolved `c(tau)` averaged over `phases` starting points evenly spread
/// along one period of the moment limit cycle through `cycle_point`.
pub fn cycle_averaged_correlations(
    params: &CouplingParams,
    cycle_point: &CumulantState2,
    period: f64,
    phases: usize,
    source_species: Species,
    tau_max: f64,
    dtau: f64,
    ode: OdeOptions,
) -> Result<CorrelationVector> {
    if phases == 0 || !(period > 0.0) {
        return Err(Error::invalid(
            "phases",
            "need at least one phase and a positive period",
        ));
    }
    let model = CumulantModel::new(*params)?;
    let starts: Vec<f64> = (0..phases).map(|k| period * k as f64 / phases as f64).collect();
    let mut states = Vec::with_capacity(phases);
    let mut solver = Dopri5::new(|_, y: &[f64; 9]| model.rhs_array(y), 0.0, cycle_point.to_array(), ode);
    solver.advance_sampled(period, &starts, |_, y| states.push(CumulantState2::from_array(y)))?;

    let mut acc: Option<CorrelationVector> = None;
    for start in states {
        let c0 = initial_correlations(&start, source_species);
        let cv = evolve_correlations(
            c0,
            source_species,
            &RegressionSource::CoEvolved { params: *params, start },
            tau_max,
            dtau,
            ode,
        )?;
        match &mut acc {
            None => acc = Some(cv),
            Some(a) => {
                for (x, y) in a.c.iter_mut().zip(&cv.c) {
                    x[0] += y[0];
                    x[1] += y[1];
                }
            }
        }
    }
    let mut out = acc.expect("at least one phase");
    let w = 1.0 / phases as f64;
    for x in &mut out.c {
        x[0] *= w;
        x[1] *= w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{c2_steady, SteadyOptions};

    #[test]
    fn integrator_matches_matrix_exponential() {
        let p = CouplingParams::thermodynamic(2.0, 0.4, Complex64::new(1.3, 0.2))
            .unwrap()
            .with_delta(0.3)
            .unwrap();
        let m = regression_matrix(&p, 0.3, 0.2).unwrap();
        let c0 = [Complex64::new(0.05, 0.0), Complex64::new(0.01, -0.02)];
        let cv = evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::Constant(m),
            40.0,
            0.02,
            correlation_ode_options(),
        )
        .unwrap();
        for (t, c) in cv.tau.iter().zip(&cv.c) {
            let exact = m.propagate(c0, *t);
            assert!((c[0] - exact[0]).norm() < 1e-8 && (c[1] - exact[1]).norm() < 1e-8);
        }
    }

    #[test]
    fn unstable_constant_matrix_is_divergent() {
        let p = CouplingParams::thermodynamic(3.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let m = regression_matrix(&p, 1.0, 1.0).unwrap();
        let c0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        match evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::Constant(m),
            100.0,
            0.1,
            correlation_ode_options(),
        ) {
            Err(Error::Divergent { growth, .. }) => assert!(growth > 1e12),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn co_evolution_starts_at_the_steady_moments() {
        let p = CouplingParams::finite(20, 2.0, 1.0, Complex64::new(0.5, 0.0)).unwrap();
        let ss = c2_steady(&p, &CumulantState2::default_ic(), &SteadyOptions::default()).unwrap();
        let c0 = initial_correlations(&ss.state, Species::A);
        assert_eq!(c0[0].re, ss.state.pp_aa);
        assert_eq!(c0[1], ss.state.pp_ab.conj());
        let cv = evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::CoEvolved {
                params: p,
                start: ss.state,
            },
            20.0,
            0.05,
            correlation_ode_options(),
        )
        .unwrap();
        assert_eq!(cv.c[0], c0);
        // At a fixed point the co-evolved and constant-population paths coincide.
        let m = regression_matrix(&p, ss.state.s_z_a, ss.state.s_z_b).unwrap();
        for (t, c) in cv.tau.iter().zip(&cv.c) {
            let exact = m.propagate(c0, *t);
            assert!((c[0] - exact[0]).norm() < 1e-7, "tau = {t}");
        }
        // PT-symmetric parameters: real correlations.
        assert!(cv.max_imag() < 1e-8);
    }
}
