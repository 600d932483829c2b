//! Thermodynamic-limit mean-field dynamics of the two pumped spin species.
//!
//! The equations of motion include complex nonreciprocal couplings; the
//! directional strengths `V_AB`, `V_BA` enter the B and A coherence equations
//! respectively.

mod classify;
mod scan;
mod stability;

pub use classify::{classify, classify_trajectory, AttractorLabel, AttractorReport, Chirality, ClassifyOptions};
pub use scan::{
    hysteresis_sweep, phase_diagram, phase_point, stability_boundary, BranchStep, DwellSettings, HysteresisRecord,
    HysteresisRegion, IcMode, ParamAxis, PhaseDiagram, PhasePoint, PointLabel, StabilityBoundaryPoint, SweepDirection,
    SweptParameter,
};
pub use stability::{unsync_linear_stability, UnsyncStability};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingParams, DirectionalCouplings, SystemSize};
use crate::ode::{Dopri5, OdeOptions};

/// Tolerance on the Bloch-ball bound before a trajectory is flagged.
pub const BLOCH_SLACK: f64 = 1e-6;

/// Per-species coherences and populations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub s_plus_a: Complex64,
    pub s_plus_b: Complex64,
    pub s_z_a: f64,
    pub s_z_b: f64,
}

impl MeanFieldState {
    pub fn new(s_plus_a: Complex64, s_plus_b: Complex64, s_z_a: f64, s_z_b: f64) -> Self {
        Self {
            s_plus_a,
            s_plus_b,
            s_z_a,
            s_z_b,
        }
    }

    /// Generic initial condition used by scans; it breaks the 0/pi phase symmetry.
    pub fn default_ic() -> Self {
        Self::new(Complex64::new(0.25, 0.0), Complex64::from_polar(0.25, 0.7), 0.5, 0.5)
    }

    /// Partner of [`MeanFieldState::default_ic`] under complex conjugation.
    pub fn conjugate_ic() -> Self {
        Self::default_ic().conj()
    }

    /// Nearly incoherent inverted state with coherences of magnitude `seed`.
    pub fn seeded(seed: f64) -> Self {
        Self::new(Complex64::new(seed, 0.0), Complex64::from_polar(seed, 0.7), 1.0, 1.0)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.s_plus_a.re,
            self.s_plus_a.im,
            self.s_plus_b.re,
            self.s_plus_b.im,
            self.s_z_a,
            self.s_z_b,
        ]
    }

    pub fn from_array(y: &[f64; 6]) -> Self {
        Self::new(Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]), y[4], y[5])
    }

    /// Complex conjugation of both coherences.
    pub fn conj(&self) -> Self {
        Self::new(self.s_plus_a.conj(), self.s_plus_b.conj(), self.s_z_a, self.s_z_b)
    }

    /// Exchanges the species labels.
    pub fn swap(&self) -> Self {
        Self::new(self.s_plus_b, self.s_plus_a, self.s_z_b, self.s_z_a)
    }

    pub fn rotate(&self, theta: f64) -> Self {
        let u = Complex64::from_polar(1.0, theta);
        Self::new(self.s_plus_a * u, self.s_plus_b * u, self.s_z_a, self.s_z_b)
    }

    /// Largest value of `4|s+|^2 + s_z^2` over the two species.
    pub fn bloch_norm(&self) -> f64 {
        let a = 4.0 * self.s_plus_a.norm_sqr() + self.s_z_a * self.s_z_a;
        let b = 4.0 * self.s_plus_b.norm_sqr() + self.s_z_b * self.s_z_b;
        a.max(b)
    }

    pub fn validate_initial(&self) -> Result<()> {
        for (field, s) in [("ic.s_plus_A", self.s_plus_a), ("ic.s_plus_B", self.s_plus_b)] {
            if s.norm() > 0.5 + 1e-12 || !s.is_finite() {
                return Err(Error::invalid(field, format!("|s+| = {} exceeds 1/2", s.norm())));
            }
        }
        if self.bloch_norm() > 1.0 + BLOCH_SLACK || !self.s_z_a.is_finite() || !self.s_z_b.is_finite() {
            return Err(Error::invalid("ic", "initial state lies outside the Bloch ball"));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// Mean-field equations bound to one parameter set.
#[derive(Clone, Copy, Debug)]
pub struct MeanFieldModel {
    params: CouplingParams,
    dir: DirectionalCouplings,
}

impl MeanFieldModel {
    pub fn new(params: CouplingParams) -> Result<Self> {
        if params.size() != SystemSize::ThermodynamicLimit {
            return Err(Error::invalid(
                "N",
                "mean-field equations require the thermodynamic-limit marker",
            ));
        }
        Ok(Self {
            params,
            dir: params.directional(),
        })
    }

    pub fn params(&self) -> &CouplingParams {
        &self.params
    }

    pub fn rhs(&self, s: &MeanFieldState) -> MeanFieldState {
        let p = &self.params;
        let (kappa, delta, v) = (p.kappa(), p.delta(), p.v());
        let i = Complex64::i();
        let (sa, sb) = (s.s_plus_a, s.s_plus_b);
        let (za, zb) = (s.s_z_a, s.s_z_b);
        let dsa = 0.5 * ((-kappa + i * delta) * sa + v * sa * za + self.dir.v_ba * sb * za);
        let dsb = 0.5 * ((-kappa - i * delta) * sb + v * sb * zb + self.dir.v_ab * sa * zb);
        let dza = kappa * (1.0 - za) - 2.0 * v * sa.norm_sqr() - 2.0 * (self.dir.v_ba * sb * sa.conj()).re;
        let dzb = kappa * (1.0 - zb) - 2.0 * v * sb.norm_sqr() - 2.0 * (self.dir.v_ab * sa * sb.conj()).re;
        MeanFieldState::new(dsa, dsb, dza, dzb)
    }

    fn rhs_array(&self, y: &[f64; 6]) -> [f64; 6] {
        self.rhs(&MeanFieldState::from_array(y)).to_array()
    }
}

/// Time derivative of the mean-field state.
pub fn mf_rhs(state: &MeanFieldState, params: &CouplingParams) -> Result<MeanFieldState> {
    Ok(MeanFieldModel::new(*params)?.rhs(state))
}

/// Sampled mean-field trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// State at the end of the integration (which may lie past the last sample).
    pub final_state: MeanFieldState,
    /// First sample time at which the Bloch-ball bound was exceeded, with the value.
    pub bloch_violation: Option<(f64, f64)>,
}

impl Trajectory {
    /// Unwrapped phases `arg s+` of both species.
    pub fn unwrapped_phases(&self) -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = self.states.iter().map(|s| s.s_plus_a.arg()).collect();
        let b: Vec<f64> = self.states.iter().map(|s| s.s_plus_b.arg()).collect();
        (unwrap(&a), unwrap(&b))
    }
}

/// Removes 2pi jumps from a phase sequence.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Integrates from `ic` and samples at `sample_times` (nondecreasing, within `[0, t_end]`).
pub fn integrate(
    ic: &MeanFieldState,
    params: &CouplingParams,
    t_end: f64,
    sample_times: &[f64],
    opts: OdeOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end", format!("must be positive, got {t_end}")));
    }
    ic.validate_initial()?;
    let model = MeanFieldModel::new(*params)?;
    integrate_model(&model, ic, 0.0, t_end, sample_times, opts)
}

pub(crate) fn integrate_model(
    model: &MeanFieldModel,
    ic: &MeanFieldState,
    t0: f64,
    t_end: f64,
    sample_times: &[f64],
    opts: OdeOptions,
) -> Result<Trajectory> {
    let mut solver = Dopri5::new(|_, y: &[f64; 6]| model.rhs_array(y), t0, ic.to_array(), opts);
    let mut times = Vec::with_capacity(sample_times.len());
    let mut states = Vec::with_capacity(sample_times.len());
    let mut bloch_violation = None;
    solver.advance_sampled(t_end, sample_times, |t, y| {
        let s = MeanFieldState::from_array(y);
        let b = s.bloch_norm();
        if bloch_violation.is_none() && b > 1.0 + BLOCH_SLACK {
            bloch_violation = Some((t, b));
        }
        times.push(t);
        states.push(s);
    })?;
    Ok(Trajectory {
        times,
        states,
        final_state: MeanFieldState::from_array(solver.y()),
        bloch_violation,
    })
}

/// One spin of a (possibly inhomogeneous) ensemble in amplitude/phase form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpin {
    pub amplitude: f64,
    pub phase: f64,
    pub s_z: f64,
}

/// Phase velocities of individual spins in the nonreciprocal Kuramoto form.
///
/// `spins_a` and `spins_b` each hold the `N` spins of one species; the coupling
/// constants `V`, `V_AB`, `V_BA` must be real (the Kuramoto form assumes real
/// couplings). Detunings are `+delta` for A and `-delta` for B.
pub fn kuramoto_phase_velocity(
    spins_a: &[PhaseSpin],
    spins_b: &[PhaseSpin],
    params: &CouplingParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if spins_a.len() != spins_b.len() || spins_a.is_empty() {
        return Err(Error::invalid(
            "spins",
            "both species need the same nonzero number of spins",
        ));
    }
    if params.v_minus().im != 0.0 {
        return Err(Error::invalid(
            "V_minus_im",
            "the Kuramoto form requires a real V_minus",
        ));
    }
    for s in spins_a.iter().chain(spins_b) {
        if !(s.amplitude > 0.0) {
            return Err(Error::invalid("amplitude", "phase is undefined at zero amplitude"));
        }
    }
    let n = spins_a.len() as f64;
    let dir = params.directional();
    let v = params.v();
    let (v_ab, v_ba) = (dir.v_ab.re, dir.v_ba.re);
    let velocity = |me: &PhaseSpin, own: &[PhaseSpin], other: &[PhaseSpin], v_other: f64, delta: f64| {
        let mut w = delta / 2.0;
        for s in own {
            w += v * me.s_z / (2.0 * n) * (s.amplitude / me.amplitude) * (s.phase - me.phase).sin();
        }
        for s in other {
            w += v_other * me.s_z / (2.0 * n) * (s.amplitude / me.amplitude) * (s.phase - me.phase).sin();
        }
        w
    };
    let delta = params.delta();
    let wa = spins_a
        .iter()
        .map(|s| velocity(s, spins_a, spins_b, v_ba, delta))
        .collect();
    let wb = spins_b
        .iter()
        .map(|s| velocity(s, spins_b, spins_a, v_ab, -delta))
        .collect();
    Ok((wa, wb))
}
