//! Second-order cumulant equations for `N` spins per species.
//!
//! Moments are per-spin: `s_z` is `<sigma^z_i>`, the pair moments involve two
//! distinct spins. Third-order cumulants are dropped. The equations accept a
//! complex `V_minus`; for real couplings they reduce to the standard real form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::MeanFieldState;
use crate::model::{CouplingParams, DirectionalCouplings};
use crate::ode::{uniform_grid, Dopri5, OdeOptions};

/// Closed set of first- and second-order moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantState2 {
    pub s_z_a: f64,
    pub s_z_b: f64,
    pub pp_aa: f64,
    pub pp_bb: f64,
    pub pp_ab: Complex64,
    pub zz_aa: f64,
    pub zz_bb: f64,
    pub zz_ab: f64,
}

impl CumulantState2 {
    /// Uncorrelated fully inverted state with a real cross-species seed.
    pub fn seeded(pp_ab_seed: f64) -> Self {
        Self {
            s_z_a: 1.0,
            s_z_b: 1.0,
            pp_aa: 0.0,
            pp_bb: 0.0,
            pp_ab: Complex64::new(pp_ab_seed, 0.0),
            zz_aa: 1.0,
            zz_bb: 1.0,
            zz_ab: 1.0,
        }
    }

    /// Default initial condition for steady-state searches.
    pub fn default_ic() -> Self {
        Self::seeded(1e-3)
    }

    /// Moments of the product state described by a mean-field state.
    pub fn factorized(s: &MeanFieldState) -> Self {
        Self {
            s_z_a: s.s_z_a,
            s_z_b: s.s_z_b,
            pp_aa: s.s_plus_a.norm_sqr(),
            pp_bb: s.s_plus_b.norm_sqr(),
            pp_ab: s.s_plus_a * s.s_plus_b.conj(),
            zz_aa: s.s_z_a * s.s_z_a,
            zz_bb: s.s_z_b * s.s_z_b,
            zz_ab: s.s_z_a * s.s_z_b,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.s_z_a,
            self.s_z_b,
            self.pp_aa,
            self.pp_bb,
            self.pp_ab.re,
            self.pp_ab.im,
            self.zz_aa,
            self.zz_bb,
            self.zz_ab,
        ]
    }

    pub fn from_array(y: &[f64]) -> Self {
        Self {
            s_z_a: y[0],
            s_z_b: y[1],
            pp_aa: y[2],
            pp_bb: y[3],
            pp_ab: Complex64::new(y[4], y[5]),
            zz_aa: y[6],
            zz_bb: y[7],
            zz_ab: y[8],
        }
    }

    /// Exchanges species labels (the cross moment is conjugated).
    pub fn swap(&self) -> Self {
        Self {
            s_z_a: self.s_z_b,
            s_z_b: self.s_z_a,
            pp_aa: self.pp_bb,
            pp_bb: self.pp_aa,
            pp_ab: self.pp_ab.conj(),
            zz_aa: self.zz_bb,
            zz_bb: self.zz_aa,
            zz_ab: self.zz_ab,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            pp_ab: self.pp_ab.conj(),
            ..*self
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(&other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Violations of the moment bounds, if any (monitoring only).
    pub fn range_violations(&self, slack: f64) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.s_z_a.abs() > 1.0 + slack || self.s_z_b.abs() > 1.0 + slack {
            v.push("s_z");
        }
        if self.zz_ab.abs() > 1.0 + slack || self.zz_aa.abs() > 1.0 + slack || self.zz_bb.abs() > 1.0 + slack {
            v.push("zz");
        }
        for pp in [self.pp_aa, self.pp_bb] {
            if pp < -slack || pp > 0.25 + slack {
                v.push("pp_aa");
            }
        }
        if self.pp_ab.norm() > 0.25 + slack {
            v.push("pp_ab");
        }
        v
    }
}

/// Cumulant equations bound to one parameter set.
#[derive(Clone, Copy, Debug)]
pub struct CumulantModel {
    params: CouplingParams,
    dir: DirectionalCouplings,
    n: f64,
}

impl CumulantModel {
    pub fn new(params: CouplingParams) -> Result<Self> {
        let n = params.n()?;
        if n < 2 {
            return Err(Error::invalid("N", "pair moments need at least two spins per species"));
        }
        Ok(Self {
            params,
            dir: params.directional(),
            n: f64::from(n),
        })
    }

    pub fn params(&self) -> &CouplingParams {
        &self.params
    }

    pub fn rhs(&self, s: &CumulantState2) -> CumulantState2 {
        let p = &self.params;
        let (kappa, delta, v, vp) = (p.kappa(), p.delta(), p.v(), p.v_plus());
        let n = self.n;
        let (vab, vba) = (self.dir.v_ab, self.dir.v_ba);
        let (za, zb) = (s.s_z_a, s.s_z_b);
        let pp = s.pp_ab;
        let f = (n - 1.0) / n;
        // Cross-moment couplings as they enter the A and B equations.
        let xa = (vba * pp.conj()).re;
        let xb = (vab * pp).re;

        let dza = -v * (za + 1.0) / n + kappa * (1.0 - za) - 2.0 * v * f * s.pp_aa - 2.0 * xa;
        let dzb = -v * (zb + 1.0) / n + kappa * (1.0 - zb) - 2.0 * v * f * s.pp_bb - 2.0 * xb;

        let dpaa =
            -(kappa + v / n) * s.pp_aa + v / (2.0 * n) * (s.zz_aa + za) + v * za * (n - 2.0) / n * s.pp_aa + za * xa;
        let dpbb =
            -(kappa + v / n) * s.pp_bb + v / (2.0 * n) * (s.zz_bb + zb) + v * zb * (n - 2.0) / n * s.pp_bb + zb * xb;

        let i = Complex64::i();
        let dpab = -(kappa + v / n - i * delta) * pp
            + v * (n - 1.0) / (2.0 * n) * (za + zb) * pp
            + (vab.conj() * (zb + s.zz_ab) + vba * (za + s.zz_ab)) / (4.0 * n)
            + (n - 1.0) / (2.0 * n) * (vab.conj() * zb * s.pp_aa + vba * za * s.pp_bb);

        let dzaa = 2.0 * za * (kappa - v / n) - 2.0 * s.zz_aa * (kappa + v / n) - 4.0 * za * xa
            + v * (4.0 * s.pp_aa - 4.0 * (n - 2.0) * za * s.pp_aa) / n;
        let dzbb = 2.0 * zb * (kappa - v / n) - 2.0 * s.zz_bb * (kappa + v / n) - 4.0 * zb * xb
            + v * (4.0 * s.pp_bb - 4.0 * (n - 2.0) * zb * s.pp_bb) / n;

        let dzab = kappa * (za + zb - 2.0 * s.zz_ab)
            - 2.0 * f * (zb * xa + za * xb)
            - 2.0 * f * v * (zb * s.pp_aa + za * s.pp_bb)
            - v * (za + zb + 2.0 * s.zz_ab) / n
            + 4.0 * vp * pp.re / n;

        CumulantState2 {
            s_z_a: dza,
            s_z_b: dzb,
            pp_aa: dpaa,
            pp_bb: dpbb,
            pp_ab: dpab,
            zz_aa: dzaa,
            zz_bb: dzbb,
            zz_ab: dzab,
        }
    }

    pub(crate) fn rhs_array(&self, y: &[f64; 9]) -> [f64; 9] {
        self.rhs(&CumulantState2::from_array(y)).to_array()
    }
}

/// Time derivative of the second-order moments.
pub fn c2_rhs(state: &CumulantState2, params: &CouplingParams) -> Result<CumulantState2> {
    Ok(CumulantModel::new(*params)?.rhs(state))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Convergence threshold on the max-norm time derivative.
    pub residual_tol: f64,
    /// Integration time budget, in units of `1/kappa`.
    pub time_budget: f64,
    /// Length of one integration chunk between convergence checks, in units of `1/kappa`.
    pub chunk: f64,
    /// Sampling step used for oscillation detection, in units of `1/kappa`.
    pub sample_dt: f64,
    /// Relative tolerance on successive periods and amplitudes of a limit cycle.
    pub cycle_tol: f64,
    pub ode: OdeOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            time_budget: 1e7,
            chunk: 200.0,
            sample_dt: 0.05,
            cycle_tol: 1e-4,
            ode: OdeOptions {
                rtol: 1e-11,
                atol: 1e-14,
                ..OdeOptions::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SteadyStatus {
    /// A fixed point was reached.
    Converged,
    /// The moments settled on a limit cycle; the state is its one-period average.
    Averaged { period: f64 },
}

impl SteadyStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SteadyStatus::Converged => "converged",
            SteadyStatus::Averaged { .. } => "averaged",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSteady {
    pub state: CumulantState2,
    pub status: SteadyStatus,
    /// Max-norm time derivative at the returned point (for averaged states, at
    /// the end of the averaging period).
    pub residual: f64,
    /// Time integrated before stopping.
    pub time: f64,
    /// A point on the limit cycle (equal to `state` when converged).
    pub cycle_point: CumulantState2,
}

/// Long-time integration until the moments stop changing or settle on a cycle.
pub fn c2_steady(params: &CouplingParams, ic: &CumulantState2, opts: &SteadyOptions) -> Result<CumulantSteady> {
    let model = CumulantModel::new(*params)?;
    let kappa = params.kappa();
    let (chunk, budget, dt) = (opts.chunk / kappa, opts.time_budget / kappa, opts.sample_dt / kappa);
    let mut solver = Dopri5::new(|_, y: &[f64; 9]| model.rhs_array(y), 0.0, ic.to_array(), opts.ode);
    let residual = |y: &[f64; 9]| model.rhs_array(y).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    loop {
        let t0 = solver.t();
        if residual(solver.y()) < opts.residual_tol {
            let state = CumulantState2::from_array(solver.y());
            return Ok(CumulantSteady {
                state,
                status: SteadyStatus::Converged,
                residual: residual(solver.y()),
                time: t0,
                cycle_point: state,
            });
        }
        if t0 >= budget {
            return Err(Error::NotConverged {
                budget,
                residual: residual(solver.y()),
            });
        }
        let times = uniform_grid(t0, t0 + chunk, dt);
        let mut trace = Vec::with_capacity(times.len());
        solver.advance_sampled(t0 + chunk, &times, |_, y| trace.push(y[0]))?;
        if let Some(period) = detect_cycle(&trace, dt, opts.cycle_tol) {
            let start = *solver.y();
            let t_start = solver.t();
            let samples = 4000usize;
            let grid: Vec<f64> = (0..samples)
                .map(|k| t_start + period * k as f64 / samples as f64)
                .collect();
            let mut acc = [0.0; 9];
            solver.advance_sampled(t_start + period, &grid, |_, y| {
                for (a, v) in acc.iter_mut().zip(y) {
                    *a += v / samples as f64;
                }
            })?;
            return Ok(CumulantSteady {
                state: CumulantState2::from_array(&acc),
                status: SteadyStatus::Averaged { period },
                residual: residual(solver.y()),
                time: solver.t(),
                cycle_point: CumulantState2::from_array(&start),
            });
        }
    }
}

/// Period of a sustained oscillation in `x`, if the last cycles repeat within `tol`.
fn detect_cycle(x: &[f64], dt: f64, tol: f64) -> Option<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-8 {
        return None;
    }
    // Upward mean crossings, linearly interpolated.
    let mut crossings = Vec::new();
    for k in 1..x.len() {
        let (a, b) = (x[k - 1] - mean, x[k] - mean);
        if a < 0.0 && b >= 0.0 {
            crossings.push((k as f64 - 1.0 + a / (a - b)) * dt);
        }
    }
    if crossings.len() < 5 {
        return None;
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let last = &periods[periods.len() - 3..];
    let p = last.iter().sum::<f64>() / 3.0;
    if last.iter().any(|q| (q - p).abs() > tol * p + dt * 1e-3) {
        return None;
    }
    // Peak-to-peak amplitude over the last two full cycles must agree.
    let idx = |t: f64| ((t / dt).round() as usize).min(x.len() - 1);
    let c = &crossings[crossings.len() - 3..];
    let amp = |a: f64, b: f64| {
        let s = &x[idx(a)..=idx(b)];
        let (l, h) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        h - l
    };
    let (a1, a2) = (amp(c[0], c[1]), amp(c[1], c[2]));
    if (a1 - a2).abs() > tol * a1.max(a2) {
        return None;
    }
    Some(p)
}
