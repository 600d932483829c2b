//! Linear stability of the incoherent fixed point `s+ = 0, s_z = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::CouplingParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsyncStability {
    /// Eigenvalues sorted by decreasing real part.
    pub eigenvalues: [Complex64; 2],
    pub unstable: bool,
}

/// Eigenvalues of the coherence Jacobian `1/2 [[V - k + i d, V_BA], [V_AB, V - k - i d]]`.
pub fn unsync_linear_stability(params: &CouplingParams) -> UnsyncStability {
    let dir = params.directional();
    let i = Complex64::i();
    let base = Complex64::new(params.v() - params.kappa(), 0.0);
    let a = 0.5 * (base + i * params.delta());
    let d = 0.5 * (base - i * params.delta());
    let b = 0.5 * dir.v_ba;
    let c = 0.5 * dir.v_ab;
    let [l1, l2] = eig2(a, b, c, d);
    let eigenvalues = if l1.re >= l2.re { [l1, l2] } else { [l2, l1] };
    UnsyncStability {
        eigenvalues,
        unstable: eigenvalues[0].re > 0.0,
    }
}

/// Eigenvalues of `[[a, b], [c, d]]`.
pub(crate) fn eig2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
    [half_tr + disc, half_tr - disc]
}
