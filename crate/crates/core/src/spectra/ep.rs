//! Exceptional points of the regression matrix along a one-parameter scan.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{regression_matrix, DegeneracyKind, RegressionMatrix};
use crate::cumulant::{c2_steady, CumulantState2, SteadyOptions};
use crate::error::{Error, Result};
use crate::meanfield::{classify, ClassifyOptions, MeanFieldState, ParamAxis};
use crate::model::CouplingParams;

/// Where the populations entering the regression matrix come from.
#[derive(Clone, Copy, Debug)]
pub enum PopulationSource {
    /// Fixed values, e.g. for analytic checks.
    Fixed { s_z_a: f64, s_z_b: f64 },
    /// Time-averaged populations of the mean-field attractor reached from `ic`.
    MeanField { ic: MeanFieldState, opts: ClassifyOptions },
    /// Steady (or cycle-averaged) second-order cumulant moments.
    Cumulant { ic: CumulantState2, opts: SteadyOptions },
}

impl PopulationSource {
    pub fn populations(&self, params: &CouplingParams) -> Result<(f64, f64)> {
        match self {
            PopulationSource::Fixed { s_z_a, s_z_b } => Ok((*s_z_a, *s_z_b)),
            PopulationSource::MeanField { ic, opts } => match classify(params, ic, opts) {
                Ok(r) => Ok((r.mean_s_z_a, r.mean_s_z_b)),
                // The populations are meaningful even when no attractor label applies.
                Err(Error::Unclassifiable { report, .. }) => Ok((report.mean_s_z_a, report.mean_s_z_b)),
                Err(e) => Err(e),
            },
            PopulationSource::Cumulant { ic, opts } => {
                let ss = c2_steady(params, ic, opts)?;
                Ok((ss.state.s_z_a, ss.state.s_z_b))
            }
        }
    }

    fn matrix(&self, params: &CouplingParams) -> Result<RegressionMatrix> {
        let (a, b) = self.populations(params)?;
        regression_matrix(params, a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpScanPoint {
    pub value: f64,
    pub eigenvalues: [Complex64; 2],
    pub discriminant: Complex64,
    pub condition_number: f64,
    pub s_z_a: f64,
    pub s_z_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    pub value: f64,
    pub eigenvalues: [Complex64; 2],
    pub discriminant_abs: f64,
    /// `|discriminant| < tolerance` after refinement.
    pub converged: bool,
    pub kind: DegeneracyKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpScan {
    pub axis: ParamAxis,
    pub points: Vec<EpScanPoint>,
    pub exceptional_points: Vec<ExceptionalPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpOptions {
    /// Target `|discriminant|` after refinement.
    pub tolerance: f64,
    pub max_refinements: usize,
    /// Off-diagonal threshold (relative) separating diabolic from exceptional crossings.
    pub diabolic_tol: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_refinements: 80,
            diabolic_tol: 1e-10,
        }
    }
}

/// Scans `axis` over `values` and locates discriminant zeros between grid points.
///
/// Zeros are refined by bisection on `Re` of the discriminant where it changes
/// sign and by golden-section minimization of `|discriminant|` at interior local
/// minima. An empty list means no exceptional point in range.
pub fn exceptional_point_scan(
    base: &CouplingParams,
    axis: ParamAxis,
    values: &[f64],
    populations: &PopulationSource,
    opts: &EpOptions,
) -> Result<EpScan> {
    let points: Vec<EpScanPoint> = values
        .par_iter()
        .map(|&x| {
            let p = axis.apply(base, x)?;
            let m = populations.matrix(&p)?;
            Ok(EpScanPoint {
                value: x,
                eigenvalues: m.eigenvalues(),
                discriminant: m.discriminant(),
                condition_number: m.eigenvector_condition(),
                s_z_a: m.s_z_a,
                s_z_b: m.s_z_b,
            })
        })
        .collect::<Result<_>>()?;

    let disc_at = |x: f64| -> Result<(Complex64, RegressionMatrix)> {
        let m = populations.matrix(&axis.apply(base, x)?)?;
        Ok((m.discriminant(), m))
    };

    let mut found: Vec<ExceptionalPoint> = Vec::new();
    let push = |ep: ExceptionalPoint, found: &mut Vec<ExceptionalPoint>| {
        let spacing = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(f64::INFINITY, f64::min);
        if !found.iter().any(|e| (e.value - ep.value).abs() < 0.5 * spacing) {
            found.push(ep);
        }
    };
    let finish = |x: f64, d: Complex64, m: &RegressionMatrix| ExceptionalPoint {
        value: x,
        eigenvalues: m.eigenvalues(),
        discriminant_abs: d.norm(),
        converged: d.norm() < opts.tolerance,
        kind: m.degeneracy_kind(opts.diabolic_tol),
    };

    for (i, pt) in points.iter().enumerate() {
        if pt.discriminant.norm() < opts.tolerance {
            let (d, m) = disc_at(pt.value)?;
            push(finish(pt.value, d, &m), &mut found);
        }
        if i + 1 < points.len() {
            let (a, b) = (pt, &points[i + 1]);
            if a.discriminant.re * b.discriminant.re < 0.0 {
                let (x, d, m) = bisect_re(a.value, b.value, a.discriminant.re, &disc_at, opts)?;
                push(finish(x, d, &m), &mut found);
            }
        }
        if i > 0 && i + 1 < points.len() {
            let (l, c, r) = (&points[i - 1], pt, &points[i + 1]);
            let dc = c.discriminant.norm();
            if dc <= l.discriminant.norm() && dc < r.discriminant.norm() {
                let (x, d, m) = golden_min(l.value, r.value, &disc_at, opts)?;
                if d.norm() < opts.tolerance.sqrt() {
                    push(finish(x, d, &m), &mut found);
                }
            }
        }
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(EpScan {
        axis,
        points,
        exceptional_points: found,
    })
}

type DiscFn<'a> = dyn Fn(f64) -> Result<(Complex64, RegressionMatrix)> + 'a;

fn bisect_re(
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    disc_at: &DiscFn<'_>,
    opts: &EpOptions,
) -> Result<(f64, Complex64, RegressionMatrix)> {
    let mut f_lo = f_lo;
    let (mut d, mut m) = disc_at(0.5 * (lo + hi))?;
    for _ in 0..opts.max_refinements {
        let mid = 0.5 * (lo + hi);
        let (dm, mm) = disc_at(mid)?;
        d = dm;
        m = mm;
        if dm.norm() < opts.tolerance || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            return Ok((mid, d, m));
        }
        if (dm.re < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = dm.re;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), d, m))
}

fn golden_min(
    mut a: f64,
    mut b: f64,
    disc_at: &DiscFn<'_>,
    opts: &EpOptions,
) -> Result<(f64, Complex64, RegressionMatrix)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut d1, mut m1) = disc_at(x1)?;
    let (mut d2, mut m2) = disc_at(x2)?;
    for _ in 0..opts.max_refinements {
        if d1.norm().min(d2.norm()) < opts.tolerance || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            break;
        }
        if d1.norm() <= d2.norm() {
            b = x2;
            x2 = x1;
            (d2, m2) = (d1, m1);
            x1 = b - g * (b - a);
            (d1, m1) = disc_at(x1)?;
        } else {
            a = x1;
            x1 = x2;
            (d1, m1) = (d2, m2);
            x2 = a + g * (b - a);
            (d2, m2) = disc_at(x2)?;
        }
    }
    Ok(if d1.norm() <= d2.norm() {
        (x1, d1, m1)
    } else {
        (x2, d2, m2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CouplingParams {
        CouplingParams::thermodynamic(2.0, 1.0, Complex64::new(0.0, 0.0)).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn symmetric_populations_put_the_ep_at_equal_couplings() {
        // Equal populations, delta = 0: discriminant 4 s^2 (V_plus^2 - V_minus^2).
        let src = PopulationSource::Fixed { s_z_a: 0.4, s_z_b: 0.4 };
        let scan = exceptional_point_scan(
            &base(),
            ParamAxis::VMinusRe,
            &grid(0.0, 2.5, 26),
            &src,
            &EpOptions::default(),
        )
        .unwrap();
        assert_eq!(scan.exceptional_points.len(), 1);
        let ep = scan.exceptional_points[0];
        assert!((ep.value - 1.0).abs() < 1e-8, "{ep:?}");
        assert!(ep.converged);
        assert_eq!(ep.kind, DegeneracyKind::Exceptional);
        // The condition number grows towards the EP.
        let near = scan.points.iter().find(|p| (p.value - 1.0).abs() < 1e-9).unwrap();
        assert!(near.condition_number > 1e6);
        assert!(scan.points[0].condition_number < 10.0);
    }

    #[test]
    fn detuning_scan_without_v_minus() {
        // V_minus = 0: discriminant 4 (s^2 V_plus^2 - delta^2), zero at delta = s V_plus.
        let src = PopulationSource::Fixed { s_z_a: 0.5, s_z_b: 0.5 };
        let scan = exceptional_point_scan(
            &base(),
            ParamAxis::Delta,
            &grid(0.0, 1.0, 21),
            &src,
            &EpOptions::default(),
        )
        .unwrap();
        assert_eq!(scan.exceptional_points.len(), 1);
        assert!((scan.exceptional_points[0].value - 0.5).abs() < 1e-8);
    }

    #[test]
    fn no_crossing_gives_empty_list() {
        let src = PopulationSource::Fixed { s_z_a: 0.4, s_z_b: 0.4 };
        let scan = exceptional_point_scan(
            &base(),
            ParamAxis::VMinusRe,
            &grid(1.5, 3.0, 11),
            &src,
            &EpOptions::default(),
        )
        .unwrap();
        assert!(scan.exceptional_points.is_empty());
    }

    #[test]
    fn decoupled_crossing_is_diabolic() {
        let p = CouplingParams::thermodynamic(2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let src = PopulationSource::Fixed { s_z_a: 0.4, s_z_b: 0.4 };
        let scan =
            exceptional_point_scan(&p, ParamAxis::Delta, &grid(-0.5, 0.5, 11), &src, &EpOptions::default()).unwrap();
        let zero = scan.exceptional_points.iter().find(|e| e.value.abs() < 1e-9).unwrap();
        assert_eq!(zero.kind, DegeneracyKind::Diabolic);
    }

    #[test]
    fn unit_covariance() {
        // Scaling kappa and all couplings by lambda scales the EP location too.
        let src = PopulationSource::Fixed { s_z_a: 0.3, s_z_b: 0.2 };
        let lambda = 2.5;
        let p1 = CouplingParams::thermodynamic(2.0, 0.7, Complex64::new(0.0, 0.0)).unwrap();
        let p2 = CouplingParams::new(
            lambda,
            0.0,
            2.0 * lambda,
            0.7 * lambda,
            Complex64::new(0.0, 0.0),
            p1.size(),
        )
        .unwrap();
        let a = exceptional_point_scan(
            &p1,
            ParamAxis::VMinusRe,
            &grid(0.0, 2.0, 21),
            &src,
            &EpOptions::default(),
        )
        .unwrap();
        let b = exceptional_point_scan(
            &p2,
            ParamAxis::VMinusRe,
            &grid(0.0, 2.0 * lambda, 21),
            &src,
            &EpOptions::default(),
        )
        .unwrap();
        assert_eq!(a.exceptional_points.len(), b.exceptional_points.len());
        for (x, y) in a.exceptional_points.iter().zip(&b.exceptional_points) {
            assert!((x.value * lambda - y.value).abs() < 1e-6);
        }
    }
}
