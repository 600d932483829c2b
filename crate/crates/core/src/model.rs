//! Model parameters, coupling representations and the physical waveguide maps.
//!
//! All rates are stored in units chosen by the caller; the conventional choice is
//! `kappa = 1`. The nonreciprocal coherent coupling `v_minus` is always complex.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack tolerated on `|V_plus| <= V` to absorb rounding in derived couplings.
const PHYSICALITY_SLACK: f64 = 1e-12;

/// Number of spins per species, or the mean-field marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemSize {
    Finite(u32),
    ThermodynamicLimit,
}

impl SystemSize {
    pub fn finite(self) -> Option<u32> {
        match self {
            SystemSize::Finite(n) => Some(n),
            SystemSize::ThermodynamicLimit => None,
        }
    }
}

/// Rates and couplings of the two-species model.
///
/// Construction validates `kappa > 0`, `V >= 0` and `|V_plus| <= V`; the accessors
/// therefore always see a master equation of Lindblad form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingParams {
    kappa: f64,
    delta: f64,
    v: f64,
    v_plus: f64,
    v_minus: Complex64,
    size: SystemSize,
}

impl CouplingParams {
    pub fn new(kappa: f64, delta: f64, v: f64, v_plus: f64, v_minus: Complex64, size: SystemSize) -> Result<Self> {
        check_finite("kappa", kappa)?;
        check_finite("delta", delta)?;
        check_finite("V", v)?;
        check_finite("V_plus", v_plus)?;
        check_finite("V_minus_re", v_minus.re)?;
        check_finite("V_minus_im", v_minus.im)?;
        if kappa <= 0.0 {
            return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
        }
        if v < 0.0 {
            return Err(Error::invalid("V", format!("must be nonnegative, got {v}")));
        }
        check_physical(v, v_plus)?;
        if size == SystemSize::Finite(0) {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        Ok(Self {
            kappa,
            delta,
            v,
            v_plus,
            v_minus,
            size,
        })
    }

    /// Mean-field parameters with `kappa = 1` and `delta = 0`.
    pub fn thermodynamic(v: f64, v_plus: f64, v_minus: Complex64) -> Result<Self> {
        Self::new(1.0, 0.0, v, v_plus, v_minus, SystemSize::ThermodynamicLimit)
    }

    /// Finite-size parameters with `kappa = 1` and `delta = 0`.
    pub fn finite(n: u32, v: f64, v_plus: f64, v_minus: Complex64) -> Result<Self> {
        Self::new(1.0, 0.0, v, v_plus, v_minus, SystemSize::Finite(n))
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn v(&self) -> f64 {
        self.v
    }
    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }
    pub fn v_minus(&self) -> Complex64 {
        self.v_minus
    }
    pub fn size(&self) -> SystemSize {
        self.size
    }

    /// Spins per species; errors for the thermodynamic marker.
    pub fn n(&self) -> Result<u32> {
        self.size
            .finite()
            .ok_or_else(|| Error::invalid("N", "a finite spin number is required"))
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.kappa, delta, self.v, self.v_plus, self.v_minus, self.size)
    }

    pub fn with_v_minus(self, v_minus: Complex64) -> Result<Self> {
        Self::new(self.kappa, self.delta, self.v, self.v_plus, v_minus, self.size)
    }

    pub fn with_v_plus(self, v_plus: f64) -> Result<Self> {
        Self::new(self.kappa, self.delta, self.v, v_plus, self.v_minus, self.size)
    }

    pub fn with_v(self, v: f64) -> Result<Self> {
        Self::new(self.kappa, self.delta, v, self.v_plus, self.v_minus, self.size)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(kappa, self.delta, self.v, self.v_plus, self.v_minus, self.size)
    }

    pub fn with_size(self, size: SystemSize) -> Result<Self> {
        Self::new(self.kappa, self.delta, self.v, self.v_plus, self.v_minus, size)
    }

    /// Replaces the three couplings with a waveguide-derived fragment.
    pub fn with_couplings(self, fragment: CouplingFragment) -> Result<Self> {
        Self::new(
            self.kappa,
            self.delta,
            fragment.v,
            fragment.v_plus,
            fragment.v_minus,
            self.size,
        )
    }

    pub fn directional(&self) -> DirectionalCouplings {
        directional_from_symmetric(self)
    }

    pub fn jumps(&self) -> JumpDecomposition {
        // Physicality is a construction invariant, so this cannot fail.
        jump_rates(self.v, self.v_plus).expect("validated at construction")
    }

    /// True when the Liouvillian is invariant under the species-swap/time-reversal map.
    pub fn is_pt_symmetric(&self) -> bool {
        self.delta == 0.0 && self.v_minus.im == 0.0
    }
}

fn check_finite(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {x}")))
    }
}

fn check_physical(v: f64, v_plus: f64) -> Result<()> {
    if v_plus.abs() > v * (1.0 + PHYSICALITY_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::Unphysical {
            v,
            v_plus_abs: v_plus.abs(),
        });
    }
    Ok(())
}

/// Influence strengths of one species on the other.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCouplings {
    /// How strongly A drives B.
    pub v_ab: Complex64,
    /// How strongly B drives A.
    pub v_ba: Complex64,
}

impl DirectionalCouplings {
    /// Inverse of [`directional_from_symmetric`]: returns `(V_plus, V_minus)`.
    ///
    /// `V_plus` is real only when `V_AB + conj(V_BA)` is; the imaginary part is
    /// returned as the third component so callers can decide how strict to be.
    pub fn to_symmetric(&self) -> (f64, Complex64, f64) {
        let plus = (self.v_ab + self.v_ba.conj()) * 0.5;
        let minus = (self.v_ab - self.v_ba.conj()) * 0.5;
        (plus.re, minus, plus.im)
    }
}

pub fn directional_from_symmetric(params: &CouplingParams) -> DirectionalCouplings {
    let vp = Complex64::new(params.v_plus, 0.0);
    DirectionalCouplings {
        v_ab: vp + params.v_minus,
        v_ba: vp - params.v_minus.conj(),
    }
}

/// The three couplings `(V, V_plus, V_minus)` produced by a physical implementation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingFragment {
    pub v: f64,
    pub v_plus: f64,
    pub v_minus: Complex64,
}

/// Sign of a waveguide phase shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseSign {
    Plus,
    Minus,
}

impl PhaseSign {
    pub fn value(self) -> f64 {
        match self {
            PhaseSign::Plus => 1.0,
            PhaseSign::Minus => -1.0,
        }
    }
}

/// Two chiral waveguides passing both ensembles in sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadedWaveguideParams {
    pub g1: f64,
    pub g2: f64,
    pub p1: PhaseSign,
    pub p2: PhaseSign,
    pub eta1: f64,
    pub eta2: f64,
}

impl CascadedWaveguideParams {
    pub fn new(g1: f64, g2: f64, p1: PhaseSign, p2: PhaseSign, eta1: f64, eta2: f64) -> Result<Self> {
        check_rate("g1", g1)?;
        check_rate("g2", g2)?;
        check_transmission("eta1", eta1)?;
        check_transmission("eta2", eta2)?;
        Ok(Self {
            g1,
            g2,
            p1,
            p2,
            eta1,
            eta2,
        })
    }

    /// Builds the transmissions from losses `l` via `eta = sqrt(1 - l^2)`.
    pub fn from_losses(g1: f64, g2: f64, p1: PhaseSign, p2: PhaseSign, l1: f64, l2: f64) -> Result<Self> {
        check_transmission("l1", l1)?;
        check_transmission("l2", l2)?;
        Self::new(g1, g2, p1, p2, (1.0 - l1 * l1).sqrt(), (1.0 - l2 * l2).sqrt())
    }
}

/// A bidirectional lossy waveguide combined with a lossless unidirectional loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraidedWaveguideParams {
    pub g_plus: f64,
    pub g_minus: f64,
    pub beta: f64,
    pub sign_plus: PhaseSign,
    pub eta_plus: f64,
}

impl BraidedWaveguideParams {
    pub fn new(g_plus: f64, g_minus: f64, beta: f64, sign_plus: PhaseSign, eta_plus: f64) -> Result<Self> {
        check_rate("g_plus", g_plus)?;
        check_rate("g_minus", g_minus)?;
        check_finite("beta", beta)?;
        check_transmission("eta_plus", eta_plus)?;
        Ok(Self {
            g_plus,
            g_minus,
            beta,
            sign_plus,
            eta_plus,
        })
    }
}

fn check_rate(field: &'static str, g: f64) -> Result<()> {
    check_finite(field, g)?;
    if g < 0.0 {
        return Err(Error::invalid(field, format!("must be nonnegative, got {g}")));
    }
    Ok(())
}

fn check_transmission(field: &'static str, eta: f64) -> Result<()> {
    check_finite(field, eta)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(field, format!("must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

pub fn couplings_from_cascaded(w: &CascadedWaveguideParams, n: u32) -> CouplingFragment {
    let n = f64::from(n);
    let a = w.p1.value() * w.g1 * w.g1 * w.eta1;
    let b = w.p2.value() * w.g2 * w.g2 * w.eta2;
    CouplingFragment {
        v: (w.g1 * w.g1 + w.g2 * w.g2) * n,
        v_plus: (a + b) * n,
        v_minus: Complex64::new((a - b) * n, 0.0),
    }
}

pub fn couplings_from_braided(w: &BraidedWaveguideParams, n: u32) -> CouplingFragment {
    let n = f64::from(n);
    let gp2 = w.g_plus * w.g_plus;
    CouplingFragment {
        v: 2.0 * gp2 * n,
        v_plus: w.sign_plus.value() * 2.0 * gp2 * w.eta_plus * n,
        v_minus: Complex64::from_polar(2.0 * w.g_minus * w.g_minus * n, w.beta),
    }
}

/// Rates of the two collective jumps `S-_A + S-_B` and `S-_A - S-_B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpDecomposition {
    pub v_up_up: f64,
    pub v_up_down: f64,
}

pub fn jump_decomposition(params: &CouplingParams) -> Result<JumpDecomposition> {
    jump_rates(params.v, params.v_plus)
}

/// Jump rates for raw `(V, V_plus)`, rejecting non-Lindblad inputs.
pub fn jump_rates(v: f64, v_plus: f64) -> Result<JumpDecomposition> {
    check_physical(v, v_plus)?;
    Ok(JumpDecomposition {
        v_up_up: ((v + v_plus) / 2.0).max(0.0),
        v_up_down: ((v - v_plus) / 2.0).max(0.0),
    })
}

/// Flat key-value parameter document shared by every CLI subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "V_plus", default)]
    pub v_plus: f64,
    #[serde(rename = "V_minus_re", default)]
    pub v_minus_re: f64,
    #[serde(rename = "V_minus_im", default)]
    pub v_minus_im: f64,
    /// Spins per species; absent or `null` selects the thermodynamic limit.
    #[serde(rename = "N", default)]
    pub n: Option<u32>,
}

fn one() -> f64 {
    1.0
}

impl ParamsConfig {
    pub fn to_params(&self) -> Result<CouplingParams> {
        CouplingParams::new(
            self.kappa,
            self.delta,
            self.v,
            self.v_plus,
            Complex64::new(self.v_minus_re, self.v_minus_im),
            match self.n {
                Some(n) => SystemSize::Finite(n),
                None => SystemSize::ThermodynamicLimit,
            },
        )
    }
}

impl From<&CouplingParams> for ParamsConfig {
    fn from(p: &CouplingParams) -> Self {
        Self {
            kappa: p.kappa,
            delta: p.delta,
            v: p.v,
            v_plus: p.v_plus,
            v_minus_re: p.v_minus.re,
            v_minus_im: p.v_minus.im,
            n: p.size.finite(),
        }
    }
}
