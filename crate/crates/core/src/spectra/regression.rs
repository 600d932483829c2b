//! Linear evolution of single-spin coherences `<sigma+_a(t + tau) sigma-_b(t)>`.
//!
//! The correlation vector `c = (c_A, c_B)` obeys `dc/dtau = M c` with
//! `M = 1/2 [[X_A, s_z_A V_BA], [s_z_B V_AB, X_B]]`. The off-diagonal placement
//! follows the mean-field coherence equations: species A is driven by `V_BA`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingParams, SystemSize};

/// Slack on `|s_z| <= 1` for populations produced by integrators.
const POPULATION_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionMatrix {
    /// Row-major entries.
    pub m: [[Complex64; 2]; 2],
    pub s_z_a: f64,
    pub s_z_b: f64,
    pub params: CouplingParams,
}

/// Whether a degenerate eigenvalue pair comes with one or two eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyKind {
    /// Eigenvectors coalesce; the matrix is not diagonalizable.
    Exceptional,
    /// Eigenvalues cross while the eigenvectors stay independent.
    Diabolic,
}

/// Diagonal entry `X_a` of `2 M` for one species.
pub fn x_coefficient(params: &CouplingParams, s_z: f64, delta_a: f64) -> Complex64 {
    let gain = match params.size() {
        SystemSize::Finite(n) => {
            let n = f64::from(n);
            (s_z * (n - 1.0) - 1.0) * params.v() / n
        }
        SystemSize::ThermodynamicLimit => s_z * params.v(),
    };
    Complex64::new(gain - params.kappa(), delta_a)
}

pub fn regression_matrix(params: &CouplingParams, s_z_a: f64, s_z_b: f64) -> Result<RegressionMatrix> {
    for (field, s) in [("s_z_A", s_z_a), ("s_z_B", s_z_b)] {
        if !s.is_finite() || s.abs() > 1.0 + POPULATION_SLACK {
            return Err(Error::invalid(
                field,
                format!("population must lie in [-1, 1], got {s}"),
            ));
        }
    }
    let dir = params.directional();
    let xa = x_coefficient(params, s_z_a, params.delta());
    let xb = x_coefficient(params, s_z_b, -params.delta());
    Ok(RegressionMatrix {
        m: [[0.5 * xa, 0.5 * s_z_a * dir.v_ba], [0.5 * s_z_b * dir.v_ab, 0.5 * xb]],
        s_z_a,
        s_z_b,
        params: *params,
    })
}

impl RegressionMatrix {
    pub fn apply(&self, c: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * c[0] + self.m[0][1] * c[1],
            self.m[1][0] * c[0] + self.m[1][1] * c[1],
        ]
    }

    /// `(X_A - X_B)^2 + 4 s_z_A s_z_B V_AB V_BA`, i.e. `16 ((a - d)^2/4 + b c)`.
    ///
    /// Zero exactly when the two eigenvalues coincide.
    pub fn discriminant(&self) -> Complex64 {
        let [[a, b], [c, d]] = self.m;
        4.0 * ((a - d) * (a - d) + 4.0 * b * c)
    }

    /// Eigenvalues ordered by decreasing real part.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.m;
        let half_tr = 0.5 * (a + d);
        let root = (0.25 * (a - d) * (a - d) + b * c).sqrt();
        let (l1, l2) = (half_tr + root, half_tr - root);
        if l1.re >= l2.re {
            [l1, l2]
        } else {
            [l2, l1]
        }
    }

    /// Unit eigenvectors matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> [[Complex64; 2]; 2] {
        let [[a, b], [c, d]] = self.m;
        let lambdas = self.eigenvalues();
        let scale = [a, b, c, d]
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
            .max(f64::MIN_POSITIVE);
        [0, 1].map(|k| {
            let l = lambdas[k];
            // Rows of (M - l) annihilate the eigenvector; use the better conditioned one.
            let r1 = [a - l, b];
            let r2 = [c, d - l];
            let n1 = r1[0].norm() + r1[1].norm();
            let n2 = r2[0].norm() + r2[1].norm();
            let v = if n1.max(n2) < 1e-14 * scale {
                // M is (numerically) proportional to the identity.
                if k == 0 {
                    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
                } else {
                    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
                }
            } else if n1 >= n2 {
                [r1[1], -r1[0]]
            } else {
                [r2[1], -r2[0]]
            };
            let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            [v[0] / norm, v[1] / norm]
        })
    }

    /// Two-norm condition number of the eigenvector matrix; infinite at an
    /// exceptional point and one for a normal matrix.
    pub fn eigenvector_condition(&self) -> f64 {
        let [v1, v2] = self.eigenvectors();
        let g = (v1[0].conj() * v2[0] + v1[1].conj() * v2[1]).norm().min(1.0);
        if g >= 1.0 - 1e-15 {
            f64::INFINITY
        } else {
            ((1.0 + g) / (1.0 - g)).sqrt()
        }
    }

    /// Classifies a (near) degenerate eigenvalue pair by the off-diagonal couplings.
    pub fn degeneracy_kind(&self, tol: f64) -> DegeneracyKind {
        let [[a, b], [c, d]] = self.m;
        let scale = [a, b, c, d]
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
            .max(f64::MIN_POSITIVE);
        if b.norm() <= tol * scale && c.norm() <= tol * scale {
            DegeneracyKind::Diabolic
        } else {
            DegeneracyKind::Exceptional
        }
    }

    /// `exp(M tau) c0` in closed form.
    pub fn propagate(&self, c0: [Complex64; 2], tau: f64) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.m;
        let mu = 0.5 * (a + d);
        let nu = (0.25 * (a - d) * (a - d) + b * c).sqrt();
        let x = nu * tau;
        // cosh(x) and sinh(x)/nu, the latter continued through nu = 0.
        let ch = x.cosh();
        let sh_over_nu = if x.norm() < 1e-4 {
            tau * (1.0 + x * x / 6.0 + x * x * x * x / 120.0)
        } else {
            x.sinh() / nu
        };
        let e = (mu * tau).exp();
        let k = [[a - mu, b], [c, d - mu]];
        [
            e * (ch * c0[0] + sh_over_nu * (k[0][0] * c0[0] + k[0][1] * c0[1])),
            e * (ch * c0[1] + sh_over_nu * (k[1][0] * c0[0] + k[1][1] * c0[1])),
        ]
    }

    /// Resolvent solution `-(M + i omega)^-1 c0`, the one-sided Fourier
    /// transform of `exp(M tau) c0` when `M` is stable.
    pub fn resolvent(&self, c0: [Complex64; 2], omega: f64) -> [Complex64; 2] {
        let iw = Complex64::new(0.0, omega);
        let [[a, b], [c, d]] = self.m;
        let (a, d) = (a + iw, d + iw);
        let det = a * d - b * c;
        [-(d * c0[0] - b * c0[1]) / det, -(-c * c0[0] + a * c0[1]) / det]
    }

    pub fn is_stable(&self) -> bool {
        self.eigenvalues()[0].re < 0.0
    }
}
