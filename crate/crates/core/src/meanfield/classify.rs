//! Attractor classification from a sampled analysis window.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{integrate_model, MeanFieldModel, MeanFieldState, Trajectory};
use crate::error::{Error, Result};
use crate::model::CouplingParams;
use crate::ode::{uniform_grid, OdeOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttractorLabel {
    Incoherent,
    Synchronized,
    PiSynchronized,
    TravelingWave,
    ModulatedTravelingWave,
    Desynchronized,
}

impl AttractorLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AttractorLabel::Incoherent => "incoherent",
            AttractorLabel::Synchronized => "synchronized",
            AttractorLabel::PiSynchronized => "pi_synchronized",
            AttractorLabel::TravelingWave => "traveling_wave",
            AttractorLabel::ModulatedTravelingWave => "modulated_traveling_wave",
            AttractorLabel::Desynchronized => "desynchronized",
        }
    }

    /// Both species oscillate coherently at one shared frequency.
    pub fn is_locked(self) -> bool {
        matches!(
            self,
            AttractorLabel::Synchronized
                | AttractorLabel::PiSynchronized
                | AttractorLabel::TravelingWave
                | AttractorLabel::ModulatedTravelingWave
        )
    }

    /// Time-dependent (traveling-wave type) locked states.
    pub fn is_traveling(self) -> bool {
        matches!(
            self,
            AttractorLabel::TravelingWave | AttractorLabel::ModulatedTravelingWave
        )
    }
}

/// Sense of rotation of the common phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    /// Phases grow (counterclockwise).
    Positive,
    /// Phases decrease (clockwise).
    Negative,
}

impl Chirality {
    pub fn sign(self) -> i8 {
        match self {
            Chirality::Positive => 1,
            Chirality::Negative => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub transient: f64,
    pub window: f64,
    pub sample_dt: f64,
    pub eps_coh: f64,
    pub eps_mod: f64,
    pub theta_sync: f64,
    pub freq_tol: f64,
    /// Minimum normalized autocorrelation accepted as a modulation period.
    pub min_autocorrelation: f64,
    pub ode: OdeOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            transient: 500.0,
            window: 500.0,
            sample_dt: 0.1,
            eps_coh: 1e-3,
            eps_mod: 1e-3,
            theta_sync: 0.1,
            freq_tol: 1e-3,
            min_autocorrelation: 0.5,
            ode: OdeOptions::default(),
        }
    }
}

impl ClassifyOptions {
    /// Rates and times are given in units of `kappa`; rescale them to absolute units.
    pub fn scaled_to(&self, kappa: f64) -> Self {
        Self {
            transient: self.transient / kappa,
            window: self.window / kappa,
            sample_dt: self.sample_dt / kappa,
            freq_tol: self.freq_tol * kappa,
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub label: AttractorLabel,
    pub frequency_a: f64,
    pub frequency_b: f64,
    /// Circular mean of `arg s+_A - arg s+_B`, in `(-pi, pi]`.
    pub phase_difference: f64,
    /// Peak-to-peak oscillation of `|s+_A|` over the window.
    pub modulation_depth: f64,
    pub chirality: Option<Chirality>,
    pub modulation_period: Option<f64>,
    pub max_coherence: f64,
    pub mean_s_z_a: f64,
    pub mean_s_z_b: f64,
    pub final_state: MeanFieldState,
    pub bloch_violation: Option<(f64, f64)>,
}

/// Integrates past the transient and classifies the analysis window.
pub fn classify(params: &CouplingParams, ic: &MeanFieldState, opts: &ClassifyOptions) -> Result<AttractorReport> {
    ic.validate_initial()?;
    let model = MeanFieldModel::new(*params)?;
    classify_from(&model, ic, opts)
}

pub(crate) fn classify_from(
    model: &MeanFieldModel,
    ic: &MeanFieldState,
    opts: &ClassifyOptions,
) -> Result<AttractorReport> {
    if !(opts.window > 0.0 && opts.sample_dt > 0.0 && opts.transient >= 0.0) {
        return Err(Error::invalid("classify", "window and sample_dt must be positive"));
    }
    let t_end = opts.transient + opts.window;
    let times = uniform_grid(opts.transient, t_end, opts.sample_dt);
    let traj = integrate_model(model, ic, 0.0, t_end, &times, opts.ode)?;
    classify_trajectory(&traj, opts)
}

/// Classifies an already sampled analysis window (uniform spacing `opts.sample_dt`).
pub fn classify_trajectory(traj: &Trajectory, opts: &ClassifyOptions) -> Result<AttractorReport> {
    let n = traj.states.len();
    if n < 8 {
        return Err(Error::invalid("window", "too few samples to classify"));
    }
    let (pa, pb) = traj.unwrapped_phases();
    let frequency_a = slope(&traj.times, &pa);
    let frequency_b = slope(&traj.times, &pb);
    let phase_difference = traj
        .states
        .iter()
        .map(|s| Complex64::from_polar(1.0, s.s_plus_a.arg() - s.s_plus_b.arg()))
        .sum::<Complex64>()
        .arg();
    let amp_a: Vec<f64> = traj.states.iter().map(|s| s.s_plus_a.norm()).collect();
    let max_coherence = traj
        .states
        .iter()
        .map(|s| s.s_plus_a.norm().max(s.s_plus_b.norm()))
        .fold(0.0, f64::max);
    let (lo, hi) = amp_a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    let modulation_depth = hi - lo;
    let mean = |f: &dyn Fn(&MeanFieldState) -> f64| traj.states.iter().map(f).sum::<f64>() / n as f64;

    let mut report = AttractorReport {
        label: AttractorLabel::Incoherent,
        frequency_a,
        frequency_b,
        phase_difference,
        modulation_depth,
        chirality: None,
        modulation_period: None,
        max_coherence,
        mean_s_z_a: mean(&|s| s.s_z_a),
        mean_s_z_b: mean(&|s| s.s_z_b),
        final_state: traj.final_state,
        bloch_violation: traj.bloch_violation,
    };

    let common = 0.5 * (frequency_a + frequency_b);
    let rotating = common.abs() > opts.freq_tol;
    let chirality = if common > 0.0 {
        Chirality::Positive
    } else {
        Chirality::Negative
    };

    if max_coherence < opts.eps_coh {
        return Ok(report);
    }
    if (frequency_a - frequency_b).abs() > opts.freq_tol {
        report.label = AttractorLabel::Desynchronized;
        return Ok(report);
    }
    if rotating {
        report.chirality = Some(chirality);
    }
    if modulation_depth >= opts.eps_mod {
        report.modulation_period = autocorrelation_period(&amp_a, opts.sample_dt, opts.min_autocorrelation);
        if report.modulation_period.is_some() {
            report.label = AttractorLabel::ModulatedTravelingWave;
            return Ok(report);
        }
        return Err(unclassifiable(
            "amplitude modulation without a detectable period",
            report,
        ));
    }
    if rotating {
        report.label = AttractorLabel::TravelingWave;
        return Ok(report);
    }
    if circular_distance(phase_difference, PI) < opts.theta_sync {
        report.label = AttractorLabel::PiSynchronized;
        return Ok(report);
    }
    if phase_difference.abs() < opts.theta_sync {
        report.label = AttractorLabel::Synchronized;
        return Ok(report);
    }
    let reason = format!("static locked state with phase difference {phase_difference:.4} rad, neither 0 nor pi");
    Err(unclassifiable(&reason, report))
}

fn unclassifiable(reason: &str, report: AttractorReport) -> Error {
    Error::Unclassifiable {
        reason: reason.to_string(),
        report: Box::new(report),
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Least-squares slope of `y` against `t`.
pub(crate) fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (ti, yi) in t.iter().zip(y) {
        num += (ti - tm) * (yi - ym);
        den += (ti - tm) * (ti - tm);
    }
    num / den
}

/// Period of a uniformly sampled signal from its first autocorrelation peak.
///
/// Returns `None` when the normalized autocorrelation never recovers above
/// `threshold` after first dropping below zero.
pub(crate) fn autocorrelation_period(x: &[f64], dt: f64, threshold: f64) -> Option<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var: f64 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return None;
    }
    let r = |k: usize| -> f64 {
        let m = n - k;
        c[..m].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / (m as f64 * var)
    };
    let max_lag = n / 2;
    let mut went_negative = false;
    let mut prev = r(1);
    let mut cur = r(2);
    for k in 2..max_lag {
        let next = r(k + 1);
        if cur < 0.0 {
            went_negative = true;
        }
        if went_negative && cur >= prev && cur >= next && cur > threshold {
            // Parabolic refinement of the peak position.
            let denom = prev - 2.0 * cur + next;
            let shift = if denom.abs() > 0.0 {
                0.5 * (prev - next) / denom
            } else {
                0.0
            };
            return Some((k as f64 + shift) * dt);
        }
        prev = cur;
        cur = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingParams;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn classify_at(v: f64, vp: f64, vm: f64, ic: &MeanFieldState) -> Result<AttractorReport> {
        let p = CouplingParams::thermodynamic(v, vp, c(vm)).unwrap();
        classify(&p, ic, &ClassifyOptions::default())
    }

    #[test]
    fn figure_anchor_points() {
        let ic = MeanFieldState::default_ic();
        assert_eq!(
            classify_at(2.0, 1.0, 0.0, &ic).unwrap().label,
            AttractorLabel::Synchronized
        );
        assert_eq!(
            classify_at(2.0, -1.0, 0.0, &ic).unwrap().label,
            AttractorLabel::PiSynchronized
        );
        assert_eq!(
            classify_at(2.0, 0.0, 1.0, &ic).unwrap().label,
            AttractorLabel::TravelingWave
        );
        let m = classify_at(2.0, 1.5, 2.4, &ic).unwrap();
        assert_eq!(m.label, AttractorLabel::ModulatedTravelingWave);
        assert!(m.modulation_period.unwrap() > 0.0);
    }

    #[test]
    fn below_threshold_is_incoherent() {
        let r = classify_at(0.5, 0.0, 0.0, &MeanFieldState::default_ic()).unwrap();
        assert_eq!(r.label, AttractorLabel::Incoherent);
    }

    #[test]
    fn conjugate_ics_give_opposite_traveling_waves() {
        let a = classify_at(2.0, 0.0, 1.0, &MeanFieldState::default_ic()).unwrap();
        let b = classify_at(2.0, 0.0, 1.0, &MeanFieldState::conjugate_ic()).unwrap();
        assert_eq!(a.label, AttractorLabel::TravelingWave);
        assert_eq!(b.label, AttractorLabel::TravelingWave);
        assert_ne!(a.chirality, b.chirality);
        assert!((a.frequency_a + b.frequency_a).abs() < 1e-6);
        assert!((a.phase_difference.abs() - PI / 2.0).abs() < 0.3);
        assert!((a.phase_difference + b.phase_difference).abs() < 1e-6);
    }

    #[test]
    fn traveling_wave_has_constant_amplitudes() {
        let r = classify_at(2.0, 0.0, 1.0, &MeanFieldState::default_ic()).unwrap();
        assert!(r.modulation_depth < 1e-6);
        let s = r.final_state;
        assert!(s.s_plus_a.norm() > 0.1);
    }

    #[test]
    fn classification_is_rotation_invariant() {
        let ic = MeanFieldState::default_ic();
        for (vp, vm) in [(1.0, 0.0), (0.0, 1.0), (1.5, 2.4)] {
            let a = classify_at(2.0, vp, vm, &ic).unwrap();
            let b = classify_at(2.0, vp, vm, &ic.rotate(1.234)).unwrap();
            assert_eq!(a.label, b.label);
            assert!((a.frequency_a - b.frequency_a).abs() < 1e-6);
        }
    }

    #[test]
    fn large_detuning_desynchronizes() {
        let p = CouplingParams::thermodynamic(2.0, 1.0, c(2.5))
            .unwrap()
            .with_delta(6.0)
            .unwrap();
        let r = classify(&p, &MeanFieldState::default_ic(), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.label, AttractorLabel::Desynchronized);
    }

    #[test]
    fn decoupled_species_keep_arbitrary_phase_offset() {
        let r = classify_at(2.0, 0.0, 0.0, &MeanFieldState::default_ic());
        match r {
            Err(Error::Unclassifiable { report, .. }) => {
                assert!((report.phase_difference + 0.7).abs() < 1e-6)
            }
            other => panic!("expected unclassifiable, got {other:?}"),
        }
    }

    #[test]
    fn autocorrelation_finds_sine_period() {
        let dt = 0.05;
        let x: Vec<f64> = (0..4000).map(|k| (2.0 * PI * k as f64 * dt / 3.7).sin()).collect();
        let p = autocorrelation_period(&x, dt, 0.5).unwrap();
        assert!((p - 3.7).abs() < 1e-2);
        assert!(autocorrelation_period(&vec![1.0; 100], dt, 0.5).is_none());
    }

    #[test]
    fn slope_of_line() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 2.5 * x - 1.0).collect();
        assert!((slope(&t, &y) - 2.5).abs() < 1e-12);
    }
}
