//! One-sided Fourier transforms `P_ab(omega) = int_0^inf c(tau) e^{i omega tau} dtau`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::correlation::CorrelationVector;
use super::regression::RegressionMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Closed-form resolvent of a constant regression matrix.
    Resolvent,
    /// Filon-Simpson quadrature of a sampled correlation.
    Quadrature,
    /// Trapezoidal sum evaluated by FFT on its native frequency grid.
    Fft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    /// `(P_Ab, P_Bb)` at each frequency.
    pub values: Vec<[Complex64; 2]>,
    pub method: SpectrumMethod,
    /// Decay rate of the exponential window `e^{-eta tau}` applied before
    /// transforming, when the correlation had not decayed.
    pub window: Option<f64>,
}

impl Spectrum {
    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    /// `max | |P(omega)| - |P(-omega)| | / max |P|` for component `k`, using
    /// only frequencies whose negatives are also on the grid.
    pub fn mirror_asymmetry(&self, k: usize) -> f64 {
        let peak = self.values.iter().map(|v| v[k].norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let dw = self.omega.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * dw.max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for (i, &w) in self.omega.iter().enumerate() {
            if let Ok(j) = self.omega.binary_search_by(|x| x.total_cmp(&-w)) {
                worst = worst.max((self.values[i][k].norm() - self.values[j][k].norm()).abs());
            } else if let Some(j) = self.omega.iter().position(|&x| (x + w).abs() <= tol) {
                worst = worst.max((self.values[i][k].norm() - self.values[j][k].norm()).abs());
            }
        }
        worst / peak
    }
}

/// Symmetric grid `-omega_max, ..., omega_max` with `2 n + 1` points.
pub fn symmetric_grid(omega_max: f64, n: usize) -> Vec<f64> {
    let step = omega_max / n.max(1) as f64;
    (-(n as i64)..=n as i64).map(|k| k as f64 * step).collect()
}

/// `-(M + i omega)^-1 c0` at each frequency.
pub fn spectral_density_resolvent(m: &RegressionMatrix, c0: [Complex64; 2], omega: &[f64]) -> Result<Spectrum> {
    if !m.is_stable() {
        return Err(Error::Divergent {
            growth: f64::INFINITY,
            tau_max: f64::INFINITY,
        });
    }
    Ok(Spectrum {
        omega: omega.to_vec(),
        values: omega.iter().map(|&w| m.resolvent(c0, w)).collect(),
        method: SpectrumMethod::Resolvent,
        window: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Largest accepted `|c(tau_max)| / max |c|` without windowing.
    pub tail_tol: f64,
    /// Apply an exponential window when the tail exceeds `tail_tol`
    /// instead of failing.
    pub allow_window: bool,
    /// Value of the window at `tau_max`.
    pub window_floor: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-6,
            allow_window: false,
            window_floor: 1e-6,
        }
    }
}

/// Exponential window decay rate needed for `c`, or an error when windowing is off.
fn window_rate(c: &CorrelationVector, opts: &QuadratureOptions) -> Result<Option<f64>> {
    let ratio = c.tail_ratio();
    if ratio <= opts.tail_tol {
        return Ok(None);
    }
    if !opts.allow_window {
        return Err(Error::UndecayedTail { ratio });
    }
    let tau_max = *c.tau.last().unwrap_or(&0.0);
    Ok(Some(-opts.window_floor.ln() / tau_max.max(f64::MIN_POSITIVE)))
}

fn windowed(c: &CorrelationVector, eta: Option<f64>) -> Vec<[Complex64; 2]> {
    match eta {
        None => c.c.clone(),
        Some(eta) => c
            .tau
            .iter()
            .zip(&c.c)
            .map(|(t, v)| {
                let w = (-eta * t).exp();
                [v[0] * w, v[1] * w]
            })
            .collect(),
    }
}

/// Moments `int_{-h}^{h} s^k e^{i omega s} ds` for `k = 0, 1, 2`.
fn filon_moments(omega: f64, h: f64) -> [Complex64; 3] {
    let th = omega * h;
    if th.abs() < 0.05 {
        let t2 = th * th;
        let i0 = 2.0 * h * (1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0);
        let i1 = 2.0 * h * h * th * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0);
        let i2 = 2.0 * h * h * h * (1.0 / 3.0 - t2 / 10.0 + t2 * t2 / 168.0 - t2 * t2 * t2 / 6480.0);
        [
            Complex64::new(i0, 0.0),
            Complex64::new(0.0, i1),
            Complex64::new(i2, 0.0),
        ]
    } else {
        let (s, co) = th.sin_cos();
        let i0 = 2.0 * s / omega;
        let i1 = 2.0 * (s - th * co) / (omega * omega);
        let i2 = 2.0 * ((th * th - 2.0) * s + 2.0 * th * co) / (omega * omega * omega);
        [
            Complex64::new(i0, 0.0),
            Complex64::new(0.0, i1),
            Complex64::new(i2, 0.0),
        ]
    }
}

/// `int_{t0}^{t0 + h} l(tau) e^{i omega tau}` for the linear interpolant of `f0, f1`.
fn filon_linear(omega: f64, t0: f64, h: f64, f0: Complex64, f1: Complex64) -> Complex64 {
    let half = 0.5 * h;
    let [i0, i1, _] = filon_moments(omega, half);
    let mid = Complex64::from_polar(1.0, omega * (t0 + half));
    mid * (0.5 * (f0 + f1) * i0 + (f1 - f0) / h * i1)
}

fn filon_simpson(tau: &[f64], f: &[Complex64], omega: f64) -> Complex64 {
    let n = f.len();
    if n < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let h = tau[1] - tau[0];
    let [i0, i1, i2] = filon_moments(omega, h);
    let rot = Complex64::from_polar(1.0, 2.0 * omega * h);
    let mut phase = Complex64::from_polar(1.0, omega * (tau[0] + h));
    let mut total = Complex64::new(0.0, 0.0);
    let mut k = 0;
    while k + 2 < n {
        let (f0, f1, f2) = (f[k], f[k + 1], f[k + 2]);
        let b = (f2 - f0) / (2.0 * h);
        let c = (f2 - 2.0 * f1 + f0) / (2.0 * h * h);
        total += phase * (f1 * i0 + b * i1 + c * i2);
        phase *= rot;
        k += 2;
    }
    if k + 1 < n {
        total += filon_linear(omega, tau[k], h, f[k], f[k + 1]);
    }
    total
}

/// Quadrature of a sampled correlation at arbitrary frequencies.
///
/// The correlation is interpolated by piecewise quadratics and each panel is
/// integrated exactly against `e^{i omega tau}`, so the error does not grow
/// with `omega dtau`.
pub fn spectral_density(c: &CorrelationVector, omega: &[f64], opts: &QuadratureOptions) -> Result<Spectrum> {
    let eta = window_rate(c, opts)?;
    let data = windowed(c, eta);
    let comp: [Vec<Complex64>; 2] = [data.iter().map(|v| v[0]).collect(), data.iter().map(|v| v[1]).collect()];
    let values = omega
        .par_iter()
        .map(|&w| [filon_simpson(&c.tau, &comp[0], w), filon_simpson(&c.tau, &comp[1], w)])
        .collect();
    Ok(Spectrum {
        omega: omega.to_vec(),
        values,
        method: SpectrumMethod::Quadrature,
        window: eta,
    })
}

/// Trapezoidal transform on the FFT grid `omega_k = 2 pi k / (L dtau)`,
/// zero-padded to length `L >= pad * samples`, returned in increasing `omega`.
pub fn spectral_density_fft(c: &CorrelationVector, pad: usize, opts: &QuadratureOptions) -> Result<Spectrum> {
    let eta = window_rate(c, opts)?;
    let data = windowed(c, eta);
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("tau", "need at least two samples"));
    }
    let dt = c.dtau();
    let len = (n * pad.max(1)).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    // The inverse transform carries e^{+2 pi i jk/L}, matching e^{+i omega tau}.
    let fft = planner.plan_fft_inverse(len);
    let mut out = [vec![Complex64::new(0.0, 0.0); len], vec![Complex64::new(0.0, 0.0); len]];
    for (k, buf) in out.iter_mut().enumerate() {
        for (j, v) in data.iter().enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            buf[j] = v[k] * (w * dt);
        }
        fft.process(buf);
    }
    let t0 = c.tau[0];
    let mut pairs: Vec<(f64, [Complex64; 2])> = (0..len)
        .map(|k| {
            let kk = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
            let w = 2.0 * std::f64::consts::PI * kk / (len as f64 * dt);
            let shift = Complex64::from_polar(1.0, w * t0);
            (w, [out[0][k] * shift, out[1][k] * shift])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Spectrum {
        omega: pairs.iter().map(|p| p.0).collect(),
        values: pairs.iter().map(|p| p.1).collect(),
        method: SpectrumMethod::Fft,
        window: eta,
    })
}

/// Result of looking for equally spaced sidebands around the main peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombReport {
    pub main_frequency: f64,
    pub spacing: Option<f64>,
    /// Orders `k != 0` with a resolved peak at `main + k * spacing`.
    pub sideband_orders: Vec<i32>,
    /// Peak heights of those sidebands relative to the main peak.
    pub relative_heights: Vec<f64>,
    pub floor: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombOptions {
    /// Peaks below `floor * max |P|` are ignored.
    pub floor: f64,
    pub min_sidebands: usize,
    /// Accepted misplacement of a sideband as a fraction of the spacing.
    pub spacing_tol: f64,
    /// Largest sideband order searched on each side.
    pub max_order: i32,
}

impl Default for CombOptions {
    fn default() -> Self {
        Self {
            floor: 1e-3,
            min_sidebands: 3,
            spacing_tol: 0.1,
            max_order: 10,
        }
    }
}

/// Local maxima of `|P|` above the floor, as `(omega, height)`.
pub fn spectral_peaks(omega: &[f64], magnitude: &[f64], floor: f64) -> Vec<(f64, f64)> {
    let peak = magnitude.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 1..magnitude.len().saturating_sub(1) {
        let m = magnitude[i];
        if m > magnitude[i - 1] && m >= magnitude[i + 1] && m >= floor * peak {
            out.push((omega[i], m));
        }
    }
    out
}

/// Looks for a comb of sidebands around the strongest peak of `magnitude`.
///
/// With `spacing = None` the spacing is the distance from the main peak to the
/// nearest other resolved peak.
pub fn detect_comb(omega: &[f64], magnitude: &[f64], spacing: Option<f64>, opts: &CombOptions) -> CombReport {
    let peaks = spectral_peaks(omega, magnitude, opts.floor);
    let top = magnitude.iter().copied().fold(0.0, f64::max);
    let Some(&(main, main_height)) = peaks.iter().max_by(|a, b| a.1.total_cmp(&b.1)) else {
        return CombReport {
            main_frequency: f64::NAN,
            spacing,
            sideband_orders: Vec::new(),
            relative_heights: Vec::new(),
            floor: opts.floor,
            holds: false,
        };
    };
    let spacing = spacing.filter(|s| *s > 0.0).or_else(|| {
        peaks
            .iter()
            .map(|p| (p.0 - main).abs())
            .filter(|d| *d > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    });
    let mut orders = Vec::new();
    let mut heights = Vec::new();
    if let Some(s) = spacing {
        for k in (-opts.max_order..=opts.max_order).filter(|&k| k != 0) {
            let target = main + f64::from(k) * s;
            let hit = peaks
                .iter()
                .filter(|p| (p.0 - target).abs() <= opts.spacing_tol * s)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some(p) = hit {
                orders.push(k);
                heights.push(p.1 / main_height.max(top));
            }
        }
    }
    CombReport {
        main_frequency: main,
        spacing,
        holds: orders.len() >= opts.min_sidebands,
        sideband_orders: orders,
        relative_heights: heights,
        floor: opts.floor,
    }
}

#[cfg(test)]
mod tests {
    use super::super::correlation::{correlation_ode_options, evolve_correlations, RegressionSource};
    use super::super::regression::regression_matrix;
    use super::*;
    use crate::exact::Species;
    use crate::model::CouplingParams;

    fn setup(vm: Complex64, delta: f64) -> (RegressionMatrix, [Complex64; 2]) {
        let p = CouplingParams::thermodynamic(2.0, 0.5, vm)
            .unwrap()
            .with_delta(delta)
            .unwrap();
        let m = regression_matrix(&p, 0.3, 0.25).unwrap();
        (m, [Complex64::new(0.2, 0.0), Complex64::new(0.05, -0.01)])
    }

    #[test]
    fn quadrature_matches_resolvent() {
        let (m, c0) = setup(Complex64::new(1.2, 0.3), 0.4);
        assert!(m.is_stable());
        let cv = evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::Constant(m),
            200.0,
            0.02,
            correlation_ode_options(),
        )
        .unwrap();
        let omega = symmetric_grid(8.0, 160);
        let fast = spectral_density_resolvent(&m, c0, &omega).unwrap();
        let quad = spectral_density(&cv, &omega, &QuadratureOptions::default()).unwrap();
        let peak = fast
            .values
            .iter()
            .map(|v| v[0].norm().max(v[1].norm()))
            .fold(0.0, f64::max);
        for (a, b) in fast.values.iter().zip(&quad.values) {
            for k in 0..2 {
                assert!((a[k] - b[k]).norm() < 1e-6 * peak);
            }
        }
    }

    #[test]
    fn fft_grid_agrees_with_quadrature() {
        let (m, c0) = setup(Complex64::new(0.8, 0.0), 0.0);
        let cv = evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::Constant(m),
            200.0,
            0.02,
            correlation_ode_options(),
        )
        .unwrap();
        let fft = spectral_density_fft(&cv, 2, &QuadratureOptions::default()).unwrap();
        let fast = spectral_density_resolvent(&m, c0, &fft.omega).unwrap();
        let peak = fast.values.iter().map(|v| v[0].norm()).fold(0.0, f64::max);
        for (w, (a, b)) in fft.omega.iter().zip(fast.values.iter().zip(&fft.values)) {
            if w.abs() < 5.0 {
                assert!((a[0] - b[0]).norm() < 1e-3 * peak, "omega = {w}");
            }
        }
    }

    #[test]
    fn undecayed_tail_needs_a_window() {
        let p = CouplingParams::thermodynamic(2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let m = regression_matrix(&p, 0.45, 0.45).unwrap();
        let c0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let cv = evolve_correlations(
            c0,
            Species::A,
            &RegressionSource::Constant(m),
            50.0,
            0.05,
            correlation_ode_options(),
        )
        .unwrap();
        let omega = symmetric_grid(1.0, 10);
        assert!(matches!(
            spectral_density(&cv, &omega, &QuadratureOptions::default()),
            Err(Error::UndecayedTail { .. })
        ));
        let s = spectral_density(
            &cv,
            &omega,
            &QuadratureOptions {
                allow_window: true,
                ..Default::default()
            },
        )
        .unwrap();
        let eta = s.window.unwrap();
        assert!((eta * 50.0 - 1e-6f64.ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn real_correlation_gives_mirror_symmetric_magnitude() {
        let (m, c0) = setup(Complex64::new(2.0, 0.0), 0.0);
        let c0 = [Complex64::new(c0[0].re, 0.0), Complex64::new(c0[1].re, 0.0)];
        let omega = symmetric_grid(5.0, 200);
        let s = spectral_density_resolvent(&m, c0, &omega).unwrap();
        assert!(s.mirror_asymmetry(0) < 1e-12);
        let (m, c0) = setup(Complex64::new(2.0, 0.0), 0.5);
        let s = spectral_density_resolvent(&m, c0, &omega).unwrap();
        assert!(s.mirror_asymmetry(0) > 1e-3);
    }

    #[test]
    fn comb_on_synthetic_lines() {
        let omega = symmetric_grid(10.0, 2000);
        let lorentz = |w: f64, w0: f64, a: f64| a * 0.01 / ((w - w0).powi(2) + 0.0001);
        let mag: Vec<f64> = omega
            .iter()
            .map(|&w| lorentz(w, 1.0, 1.0) + lorentz(w, 1.7, 0.02) + lorentz(w, 0.3, 0.03) + lorentz(w, 2.4, 0.005))
            .collect();
        let r = detect_comb(&omega, &mag, None, &CombOptions::default());
        assert!((r.main_frequency - 1.0).abs() < 0.011);
        assert!(r.holds, "{r:?}");
        assert_eq!(r.sideband_orders, vec![-1, 1, 2]);
        let single: Vec<f64> = omega.iter().map(|&w| lorentz(w, 1.0, 1.0)).collect();
        assert!(!detect_comb(&omega, &single, None, &CombOptions::default()).holds);
    }
}
