//! Parameter scans built on [`classify`]: phase diagrams, hysteresis ramps and
//! the incoherent/coherent boundary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::classify_from;
use super::{
    unsync_linear_stability, AttractorLabel, AttractorReport, Chirality, ClassifyOptions, MeanFieldModel,
    MeanFieldState,
};
use crate::error::{Error, Result};
use crate::model::CouplingParams;

/// A scalar parameter that a scan can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamAxis {
    VMinusRe,
    VMinusIm,
    VPlus,
    Delta,
    V,
}

impl ParamAxis {
    pub fn name(self) -> &'static str {
        match self {
            ParamAxis::VMinusRe => "V_minus_re",
            ParamAxis::VMinusIm => "V_minus_im",
            ParamAxis::VPlus => "V_plus",
            ParamAxis::Delta => "delta",
            ParamAxis::V => "V",
        }
    }

    pub fn apply(self, p: &CouplingParams, value: f64) -> Result<CouplingParams> {
        let vm = p.v_minus();
        match self {
            ParamAxis::VMinusRe => p.with_v_minus(Complex64::new(value, vm.im)),
            ParamAxis::VMinusIm => p.with_v_minus(Complex64::new(vm.re, value)),
            ParamAxis::VPlus => p.with_v_plus(value),
            ParamAxis::Delta => p.with_delta(value),
            ParamAxis::V => p.with_v(value),
        }
    }

    pub fn get(self, p: &CouplingParams) -> f64 {
        match self {
            ParamAxis::VMinusRe => p.v_minus().re,
            ParamAxis::VMinusIm => p.v_minus().im,
            ParamAxis::VPlus => p.v_plus(),
            ParamAxis::Delta => p.delta(),
            ParamAxis::V => p.v(),
        }
    }
}

/// Outcome at one scan point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointLabel {
    Attractor(AttractorLabel),
    /// Integration succeeded but no attractor criterion matched.
    Unclassified,
    /// The point violates `|V_plus| <= V` and was not integrated.
    Unphysical,
    /// Integration failed (stiffness or step budget).
    Failed,
}

impl PointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::Attractor(l) => l.as_str(),
            PointLabel::Unclassified => "unclassified",
            PointLabel::Unphysical => "unphysical",
            PointLabel::Failed => "failed",
        }
    }

    pub fn attractor(self) -> Option<AttractorLabel> {
        match self {
            PointLabel::Attractor(l) => Some(l),
            _ => None,
        }
    }
}

/// Initial conditions used at every scan point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IcMode {
    Single(MeanFieldState),
    /// The given state and its complex conjugate, for detecting bistable chiralities.
    ConjugatePair(MeanFieldState),
}

impl IcMode {
    pub fn primary(&self) -> MeanFieldState {
        match self {
            IcMode::Single(s) | IcMode::ConjugatePair(s) => *s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub label: PointLabel,
    pub report: Option<AttractorReport>,
    pub partner_label: Option<PointLabel>,
    pub partner_report: Option<AttractorReport>,
    /// Both chiralities of a traveling wave are stable here.
    pub spontaneous_breaking: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub x_axis: ParamAxis,
    pub y_axis: ParamAxis,
    pub nx: usize,
    pub ny: usize,
    /// Row-major with `x` varying fastest.
    pub points: Vec<PhasePoint>,
}

impl PhaseDiagram {
    pub fn at(&self, ix: usize, iy: usize) -> &PhasePoint {
        &self.points[iy * self.nx + ix]
    }
}

fn classify_point(
    model: &MeanFieldModel,
    ic: &MeanFieldState,
    opts: &ClassifyOptions,
) -> (PointLabel, Option<AttractorReport>, Option<String>) {
    match classify_from(model, ic, opts) {
        Ok(r) => (PointLabel::Attractor(r.label), Some(r), None),
        Err(Error::Unclassifiable { reason, report }) => (PointLabel::Unclassified, Some(*report), Some(reason)),
        Err(e) => (PointLabel::Failed, None, Some(e.to_string())),
    }
}

/// Classifies a single grid point; never fails, errors become labels.
pub fn phase_point(
    base: &CouplingParams,
    x: (ParamAxis, f64),
    y: (ParamAxis, f64),
    ics: &IcMode,
    opts: &ClassifyOptions,
) -> PhasePoint {
    let mut point = PhasePoint {
        x: x.1,
        y: y.1,
        label: PointLabel::Unphysical,
        report: None,
        partner_label: None,
        partner_report: None,
        spontaneous_breaking: false,
        error: None,
    };
    let params = match x.0.apply(base, x.1).and_then(|p| y.0.apply(&p, y.1)) {
        Ok(p) => p,
        Err(Error::Unphysical { .. }) => return point,
        Err(e) => {
            point.label = PointLabel::Failed;
            point.error = Some(e.to_string());
            return point;
        }
    };
    let model = match MeanFieldModel::new(params) {
        Ok(m) => m,
        Err(e) => {
            point.label = PointLabel::Failed;
            point.error = Some(e.to_string());
            return point;
        }
    };
    let (label, report, error) = classify_point(&model, &ics.primary(), opts);
    point.label = label;
    point.report = report;
    point.error = error;
    if let IcMode::ConjugatePair(ic) = ics {
        let (label2, report2, _) = classify_point(&model, &ic.conj(), opts);
        point.spontaneous_breaking = match (&point.report, &report2) {
            (Some(a), Some(b)) => {
                a.label.is_traveling()
                    && b.label.is_traveling()
                    && a.chirality.is_some()
                    && b.chirality.is_some()
                    && a.chirality != b.chirality
            }
            _ => false,
        };
        point.partner_label = Some(label2);
        point.partner_report = report2;
    }
    point
}

/// Classifies every point of a rectangular grid, in parallel on the ambient rayon pool.
pub fn phase_diagram(
    base: &CouplingParams,
    x: (ParamAxis, &[f64]),
    y: (ParamAxis, &[f64]),
    ics: &IcMode,
    opts: &ClassifyOptions,
) -> Result<PhaseDiagram> {
    if x.1.is_empty() || y.1.is_empty() {
        return Err(Error::invalid("grid", "both axes need at least one value"));
    }
    if x.0 == y.0 {
        return Err(Error::invalid("grid", "the two axes must differ"));
    }
    let (nx, ny) = (x.1.len(), y.1.len());
    let points = (0..nx * ny)
        .into_par_iter()
        .map(|k| phase_point(base, (x.0, x.1[k % nx]), (y.0, y.1[k / nx]), ics, opts))
        .collect();
    Ok(PhaseDiagram {
        x_axis: x.0,
        y_axis: y.0,
        nx,
        ny,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweptParameter {
    Delta,
    VMinusIm,
}

impl SweptParameter {
    pub fn axis(self) -> ParamAxis {
        match self {
            SweptParameter::Delta => ParamAxis::Delta,
            SweptParameter::VMinusIm => ParamAxis::VMinusIm,
        }
    }
}

/// Integration time spent at each ramp value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellSettings {
    /// Time discarded after each parameter change.
    pub settle: f64,
    /// Analysis window following the settling time.
    pub window: f64,
}

impl Default for DwellSettings {
    fn default() -> Self {
        Self {
            settle: 300.0,
            window: 300.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepDirection {
    Up,
    Down,
}

impl SweepDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchStep {
    pub value: f64,
    pub direction: SweepDirection,
    pub label: PointLabel,
    pub report: AttractorReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HysteresisRegion {
    /// Both branches desynchronized.
    Unsynchronized,
    /// Both branches locked with the same chirality.
    ExplicitlyBroken(Chirality),
    /// Both branches locked with opposite chiralities.
    Coexistence,
    /// Any other combination (static states, incoherence, locked vs desynchronized).
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisRecord {
    pub swept: SweptParameter,
    /// Ramp values in increasing order.
    pub values: Vec<f64>,
    pub up: Vec<BranchStep>,
    /// Same order as `values` (the ramp itself ran from the top down).
    pub down: Vec<BranchStep>,
}

impl HysteresisRecord {
    /// Region classification at every ramp value.
    pub fn pointwise_regions(&self) -> Vec<HysteresisRegion> {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| {
                let (lu, ld) = (u.label.attractor(), d.label.attractor());
                match (lu, ld) {
                    (Some(AttractorLabel::Desynchronized), Some(AttractorLabel::Desynchronized)) => {
                        HysteresisRegion::Unsynchronized
                    }
                    (Some(a), Some(b)) if a.is_locked() && b.is_locked() => {
                        match (u.report.chirality, d.report.chirality) {
                            (Some(x), Some(y)) if x == y => HysteresisRegion::ExplicitlyBroken(x),
                            (Some(_), Some(_)) => HysteresisRegion::Coexistence,
                            _ => HysteresisRegion::Other,
                        }
                    }
                    _ => HysteresisRegion::Other,
                }
            })
            .collect()
    }

    /// Consecutive runs of equal regions as `(region, first value, last value)`.
    pub fn regions(&self) -> Vec<(HysteresisRegion, f64, f64)> {
        let mut out: Vec<(HysteresisRegion, f64, f64)> = Vec::new();
        for (r, &v) in self.pointwise_regions().into_iter().zip(&self.values) {
            match out.last_mut() {
                Some(last) if last.0 == r => last.2 = v,
                _ => out.push((r, v, v)),
            }
        }
        out
    }

    /// Largest difference between the up and down branch frequencies of species A.
    pub fn max_branch_gap(&self) -> f64 {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| (u.report.frequency_a - d.report.frequency_a).abs())
            .fold(0.0, f64::max)
    }
}

/// Adiabatic up-then-down ramp of one parameter; each step continues from the
/// previous step's final state.
pub fn hysteresis_sweep(
    base: &CouplingParams,
    swept: SweptParameter,
    values: &[f64],
    ic: &MeanFieldState,
    dwell: &DwellSettings,
    opts: &ClassifyOptions,
) -> Result<HysteresisRecord> {
    if values.is_empty() {
        return Err(Error::invalid("sweep", "ramp needs at least one value"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep", "ramp values must be strictly increasing"));
    }
    ic.validate_initial()?;
    let step_opts = ClassifyOptions {
        transient: dwell.settle,
        window: dwell.window,
        ..*opts
    };
    let mut state = *ic;
    let run = |value: f64, direction: SweepDirection, state: &mut MeanFieldState| -> Result<BranchStep> {
        let params = swept.axis().apply(base, value)?;
        let model = MeanFieldModel::new(params)?;
        let (label, report) = match classify_from(&model, state, &step_opts) {
            Ok(r) => (PointLabel::Attractor(r.label), r),
            Err(Error::Unclassifiable { report, .. }) => (PointLabel::Unclassified, *report),
            Err(e) => return Err(e),
        };
        *state = report.final_state;
        Ok(BranchStep {
            value,
            direction,
            label,
            report,
        })
    };
    let mut up = Vec::with_capacity(values.len());
    for &v in values {
        up.push(run(v, SweepDirection::Up, &mut state)?);
    }
    let mut down = Vec::with_capacity(values.len());
    for &v in values.iter().rev() {
        down.push(run(v, SweepDirection::Down, &mut state)?);
    }
    down.reverse();
    Ok(HysteresisRecord {
        swept,
        values: values.to_vec(),
        up,
        down,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBoundaryPoint {
    pub v_minus: f64,
    /// Boundary located by bisection on the classifier.
    pub v_numeric: f64,
    /// `min(1, (1 + V_minus^2)/2)` in units of kappa.
    pub v_formula: f64,
    /// Boundary located by bisection on the linearized growth rate.
    pub v_linear: f64,
    pub deviation: f64,
}

/// Locates the incoherent/coherent boundary in `V` at each real `V_minus`, with
/// `V_plus = V` throughout, by bisection on the classifier started from a
/// coherence seed of magnitude `seed`.
pub fn stability_boundary(
    base: &CouplingParams,
    v_minus_values: &[f64],
    v_range: (f64, f64),
    seed: f64,
    bisection_tol: f64,
    opts: &ClassifyOptions,
) -> Result<Vec<StabilityBoundaryPoint>> {
    let kappa = base.kappa();
    let ic = MeanFieldState::seeded(seed);
    let at = |v: f64, vm: f64| -> Result<CouplingParams> {
        base.with_v_plus(0.0)?
            .with_v(v)?
            .with_v_plus(v)?
            .with_v_minus(Complex64::new(vm, 0.0))
    };
    v_minus_values
        .par_iter()
        .map(|&vm| {
            let coherent = |v: f64| -> Result<bool> {
                let model = MeanFieldModel::new(at(v, vm)?)?;
                match classify_from(&model, &ic, opts) {
                    Ok(r) => Ok(r.label != AttractorLabel::Incoherent),
                    Err(Error::Unclassifiable { .. }) => Ok(true),
                    Err(e) => Err(e),
                }
            };
            let unstable = |v: f64| -> Result<bool> { Ok(unsync_linear_stability(&at(v, vm)?).unstable) };
            let v_numeric = bisect(v_range, bisection_tol, coherent)?;
            let v_linear = bisect(v_range, bisection_tol * 1e-3, unstable)?;
            let v_formula = kappa * (1.0f64).min((1.0 + (vm / kappa).powi(2)) / 2.0);
            Ok(StabilityBoundaryPoint {
                v_minus: vm,
                v_numeric,
                v_formula,
                v_linear,
                deviation: (v_numeric - v_formula).abs(),
            })
        })
        .collect()
}

/// Bisection for the switch point of a predicate that is false at `lo` and true at `hi`.
fn bisect(range: (f64, f64), tol: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = range;
    if pred(lo)? || !pred(hi)? {
        return Err(Error::invalid(
            "v_range",
            format!("boundary not bracketed by [{lo}, {hi}]"),
        ));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_opts() -> ClassifyOptions {
        ClassifyOptions {
            transient: 300.0,
            window: 200.0,
            ..ClassifyOptions::default()
        }
    }

    #[test]
    fn unphysical_points_are_labelled_not_integrated() {
        let base = CouplingParams::thermodynamic(2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let p = phase_point(
            &base,
            (ParamAxis::VMinusRe, 0.0),
            (ParamAxis::VPlus, 2.5),
            &IcMode::Single(MeanFieldState::default_ic()),
            &fast_opts(),
        );
        assert_eq!(p.label, PointLabel::Unphysical);
        assert!(p.report.is_none());
    }

    #[test]
    fn conjugate_pair_flags_spontaneous_breaking() {
        let base = CouplingParams::thermodynamic(2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let ics = IcMode::ConjugatePair(MeanFieldState::default_ic());
        let tw = phase_point(
            &base,
            (ParamAxis::VMinusRe, 1.0),
            (ParamAxis::VPlus, 0.0),
            &ics,
            &fast_opts(),
        );
        assert!(tw.spontaneous_breaking);
        let sync = phase_point(
            &base,
            (ParamAxis::VMinusRe, 0.0),
            (ParamAxis::VPlus, 1.0),
            &ics,
            &fast_opts(),
        );
        assert!(!sync.spontaneous_breaking);
        assert_eq!(sync.label, PointLabel::Attractor(AttractorLabel::Synchronized));
    }

    #[test]
    fn grid_order_is_x_fastest() {
        let base = CouplingParams::thermodynamic(2.0, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let xs = [-1.0, 1.0];
        let ys = [-0.5, 0.5, 1.0];
        let d = phase_diagram(
            &base,
            (ParamAxis::VMinusRe, &xs),
            (ParamAxis::VPlus, &ys),
            &IcMode::Single(MeanFieldState::default_ic()),
            &fast_opts(),
        )
        .unwrap();
        assert_eq!(d.points.len(), 6);
        assert_eq!((d.at(1, 2).x, d.at(1, 2).y), (1.0, 1.0));
        assert_eq!((d.at(0, 1).x, d.at(0, 1).y), (-1.0, 0.5));
    }

    #[test]
    fn single_point_ramp_has_identical_branches() {
        let base = CouplingParams::thermodynamic(2.0, 1.0, Complex64::new(2.5, 0.0)).unwrap();
        let dwell = DwellSettings {
            settle: 200.0,
            window: 100.0,
        };
        let r = hysteresis_sweep(
            &base,
            SweptParameter::Delta,
            &[0.3],
            &MeanFieldState::default_ic(),
            &dwell,
            &fast_opts(),
        )
        .unwrap();
        assert_eq!(r.up.len(), 1);
        assert_eq!(r.up[0].label, r.down[0].label);
        assert!((r.up[0].report.frequency_a - r.down[0].report.frequency_a).abs() < 1e-3);
    }

    #[test]
    fn bisection_finds_switch() {
        let x = bisect((0.0, 4.0), 1e-9, |v| Ok(v > 1.2345)).unwrap();
        assert!((x - 1.2345).abs() < 1e-8);
        assert!(bisect((2.0, 4.0), 1e-9, |v| Ok(v > 1.0)).is_err());
    }
}
