//! Dormand–Prince 5(4) integrator with PI step control and 4th-order dense output.
//!
//! State vectors are fixed-size real arrays; complex quantities are split into
//! real and imaginary parts by the callers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and step limits for [`Dopri5`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `f64::INFINITY` leaves it unbounded.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Adaptive integrator state for `dy/dt = f(t, y)`.
pub struct Dopri5<const D: usize, F>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    f: F,
    opts: OdeOptions,
    t: f64,
    y: [f64; D],
    k1: [f64; D],
    h: f64,
    err_old: f64,
    steps: usize,
    // Dense-output coefficients for the last accepted step [t_prev, t].
    t_prev: f64,
    cont: [[f64; D]; 5],
}

impl<const D: usize, F> Dopri5<D, F>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    pub fn new(mut f: F, t0: f64, y0: [f64; D], opts: OdeOptions) -> Self {
        let k1 = f(t0, &y0);
        let mut s = Self {
            f,
            opts,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            err_old: 1e-4,
            steps: 0,
            t_prev: t0,
            cont: [y0; 5],
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; D] {
        &self.y
    }

    /// Derivative at the current point (first stage of the next step).
    pub fn dy(&self) -> &[f64; D] {
        &self.k1
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..D {
            let sk = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.k1[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.opts.h_max);
        let mut y1 = self.y;
        for i in 0..D {
            y1[i] += h0 * self.k1[i];
        }
        let k2 = (self.f)(self.t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..D {
            let sk = self.scale(self.y[i], self.y[i]);
            d2 += ((k2[i] - self.k1[i]) / sk).powi(2);
        }
        let d2 = (d2 / D as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// Takes one accepted step, never passing `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<()> {
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::StepBudgetExceeded {
                    t: self.t,
                    max_steps: self.opts.max_steps,
                });
            }
            let remaining = t_stop - self.t;
            let mut h = self.h.min(self.opts.h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) && !last {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            self.steps += 1;

            let (t, y, k1) = (self.t, self.y, self.k1);
            let mut tmp = [0.0; D];
            let f = &mut self.f;
            for i in 0..D {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = f(t + C2 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = f(t + C3 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = f(t + C4 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = f(t + C5 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = f(t + h, &tmp);
            let mut y_new = [0.0; D];
            for i in 0..D {
                y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let k7 = f(t + h, &y_new);

            let mut err = 0.0;
            for i in 0..D {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / D as f64).sqrt();
            if !err.is_finite() {
                self.h = h * FAC_MIN;
                continue;
            }

            if err <= 1.0 {
                let fac = SAFETY * err.max(1e-10).powf(-0.2 + 0.75 * BETA) * self.err_old.powf(BETA);
                let h_next = h * fac.clamp(FAC_MIN, FAC_MAX);
                self.err_old = err.max(1e-4);
                for i in 0..D {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.t_prev = t;
                self.t = if last { t_stop } else { t + h };
                self.y = y_new;
                self.k1 = k7;
                // A truncated final step says nothing about the natural step size.
                if !last || h_next < self.h {
                    self.h = h_next;
                }
                return Ok(());
            }
            let fac = SAFETY * err.powf(-0.2);
            self.h = h * fac.clamp(FAC_MIN, 1.0);
        }
    }

    /// Interpolates the last accepted step at `t` in `[t_prev, t_current]`.
    pub fn dense(&self, t: f64) -> [f64; D] {
        let h = self.t - self.t_prev;
        if h == 0.0 {
            return self.y;
        }
        let s = (t - self.t_prev) / h;
        let s1 = 1.0 - s;
        let mut out = [0.0; D];
        for (i, o) in out.iter_mut().enumerate() {
            let c = &self.cont;
            *o = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }

    /// Advances to `t_end`, calling `observer` at each requested sample time.
    ///
    /// `sample_times` must be nondecreasing and lie in `[t, t_end]`.
    pub fn advance_sampled(
        &mut self,
        t_end: f64,
        sample_times: &[f64],
        mut observer: impl FnMut(f64, &[f64; D]),
    ) -> Result<()> {
        let mut next = 0;
        while next < sample_times.len() && sample_times[next] <= self.t {
            observer(sample_times[next], &self.y);
            next += 1;
        }
        while self.t < t_end {
            self.step(t_end)?;
            while next < sample_times.len() && sample_times[next] <= self.t {
                let ts = sample_times[next];
                let y = if ts == self.t { self.y } else { self.dense(ts) };
                observer(ts, &y);
                next += 1;
            }
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}

/// Integrates from `t0` and returns the state at each time in `times`.
pub fn solve_at<const D: usize>(
    f: impl FnMut(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<[f64; D]>> {
    let mut out = Vec::with_capacity(times.len());
    let t_end = times.last().copied().unwrap_or(t0);
    let mut solver = Dopri5::new(f, t0, y0, opts);
    solver.advance_sampled(t_end, times, |_, y| out.push(*y))?;
    Ok(out)
}

/// Uniform grid `t0, t0 + dt, ...` up to and including `t_end` (within rounding).
pub fn uniform_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let n = ((t_end - t0) / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| t0 + k as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let times = uniform_grid(0.0, 50.0, 0.37);
        let opts = OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..OdeOptions::default()
        };
        let ys = solve_at(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], &times, opts).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let opts = OdeOptions {
            rtol: 1e-6,
            atol: 1e-9,
            ..OdeOptions::default()
        };
        let times = uniform_grid(0.0, 5.0, 0.01);
        let ys = solve_at(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], &times, opts).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn blow_up_reports_underflow() {
        let mut s = Dopri5::new(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], OdeOptions::default());
        let r = s.advance_to(2.0);
        assert!(matches!(
            r,
            Err(Error::StepSizeUnderflow { .. }) | Err(Error::StepBudgetExceeded { .. })
        ));
        assert!(s.t() < 1.0 + 1e-6);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = uniform_grid(0.0, 1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
    }
}
