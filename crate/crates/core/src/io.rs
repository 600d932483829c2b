//! CSV tables and JSON sidecars for solver results.
//!
//! Floats are written in shortest round-trip form, so identical
//! results always produce identical bytes.

use std::path::Path;

use serde::Serialize;

use crate::cumulant::CumulantSteady;
use crate::error::Result;
use crate::exact::{BasisKind, CorrelatorSet, PtCheck};
use crate::meanfield::{
    AttractorReport, HysteresisRecord, PhaseDiagram, PointLabel, StabilityBoundaryPoint, Trajectory,
};
use crate::spectra::{EpScan, Spectrum};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Shortest round-trip form, switching to exponent notation for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn chirality(r: Option<&AttractorReport>) -> String {
    r.and_then(|r| r.chirality)
        .map(|c| c.sign().to_string())
        .unwrap_or_default()
}

fn report_columns(label: PointLabel, r: Option<&AttractorReport>) -> Vec<String> {
    vec![
        label.as_str().to_string(),
        opt(r.map(|r| r.frequency_a)),
        opt(r.map(|r| r.frequency_b)),
        opt(r.map(|r| r.phase_difference)),
        opt(r.map(|r| r.modulation_depth)),
        chirality(r),
    ]
}

const REPORT_HEADER: [&str; 6] = [
    "label",
    "frequency_A",
    "frequency_B",
    "phase_difference",
    "modulation_depth",
    "chirality",
];

pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&[
        "t",
        "re_s_plus_A",
        "im_s_plus_A",
        "re_s_plus_B",
        "im_s_plus_B",
        "s_z_A",
        "s_z_B",
    ]);
    for (time, s) in traj.times.iter().zip(&traj.states) {
        t.push(vec![
            num(*time),
            num(s.s_plus_a.re),
            num(s.s_plus_a.im),
            num(s.s_plus_b.re),
            num(s.s_plus_b.im),
            num(s.s_z_a),
            num(s.s_z_b),
        ]);
    }
    t
}

pub fn phase_diagram_table(pd: &PhaseDiagram) -> Table {
    let mut header = vec![pd.x_axis.name(), pd.y_axis.name()];
    header.extend(REPORT_HEADER);
    header.extend(["partner_label", "spontaneous_breaking"]);
    let mut t = Table::new(&header);
    for p in &pd.points {
        let mut row = vec![num(p.x), num(p.y)];
        row.extend(report_columns(p.label, p.report.as_ref()));
        row.push(p.partner_label.map(|l| l.as_str().to_string()).unwrap_or_default());
        row.push(p.spontaneous_breaking.to_string());
        t.push(row);
    }
    t
}

pub fn hysteresis_table(rec: &HysteresisRecord) -> Table {
    let mut header = vec![rec.swept.axis().name(), "direction"];
    header.extend(REPORT_HEADER);
    let mut t = Table::new(&header);
    for step in rec.up.iter().chain(&rec.down) {
        let mut row = vec![num(step.value), step.direction.as_str().to_string()];
        row.extend(report_columns(step.label, Some(&step.report)));
        t.push(row);
    }
    t
}

pub const CUMULANT_HEADER: [&str; 7] = ["N", "s_z_A", "pp_AA", "re_pp_AB", "im_pp_AB", "zz_AB", "status"];

pub fn cumulant_row(n: u32, ss: &CumulantSteady) -> Vec<String> {
    let s = &ss.state;
    vec![
        n.to_string(),
        num(s.s_z_a),
        num(s.pp_aa),
        num(s.pp_ab.re),
        num(s.pp_ab.im),
        num(s.zz_ab),
        ss.status.as_str().to_string(),
    ]
}

pub const CORRELATOR_HEADER: [&str; 11] = [
    "s_z_A", "s_z_B", "pp_AA", "pp_BB", "re_pp_AB", "im_pp_AB", "zz_AA", "zz_BB", "zz_AB", "re_quad", "im_quad",
];

pub fn correlator_columns(c: &CorrelatorSet) -> Vec<String> {
    vec![
        num(c.s_z_a),
        num(c.s_z_b),
        opt(c.pp_aa),
        opt(c.pp_bb),
        num(c.pp_ab.re),
        num(c.pp_ab.im),
        opt(c.zz_aa),
        opt(c.zz_bb),
        num(c.zz_ab),
        opt(c.quad.map(|q| q.re)),
        opt(c.quad.map(|q| q.im)),
    ]
}

/// `(omega, Re, Im, |P| / max |P|)` for both components.
pub fn spectrum_table(sp: &Spectrum, source: &str) -> Table {
    let names: Vec<String> = ["A", "B"]
        .iter()
        .flat_map(|a| {
            let p = format!("P_{a}{source}");
            [format!("re_{p}"), format!("im_{p}"), format!("abs_{p}_normalized")]
        })
        .collect();
    let mut header = vec!["omega"];
    header.extend(names.iter().map(String::as_str));
    let mut t = Table::new(&header);
    let peaks: Vec<f64> = (0..2)
        .map(|k| sp.values.iter().map(|v| v[k].norm()).fold(0.0, f64::max))
        .collect();
    for (w, v) in sp.omega.iter().zip(&sp.values) {
        let mut row = vec![num(*w)];
        for k in 0..2 {
            let norm = if peaks[k] > 0.0 { v[k].norm() / peaks[k] } else { 0.0 };
            row.extend([num(v[k].re), num(v[k].im), num(norm)]);
        }
        t.push(row);
    }
    t
}

pub fn ep_scan_table(scan: &EpScan) -> Table {
    let mut t = Table::new(&[
        scan.axis.name(),
        "re_lambda_1",
        "im_lambda_1",
        "re_lambda_2",
        "im_lambda_2",
        "condition_number",
        "re_discriminant",
        "im_discriminant",
        "s_z_A",
        "s_z_B",
    ]);
    for p in &scan.points {
        t.push(vec![
            num(p.value),
            num(p.eigenvalues[0].re),
            num(p.eigenvalues[0].im),
            num(p.eigenvalues[1].re),
            num(p.eigenvalues[1].im),
            num(p.condition_number),
            num(p.discriminant.re),
            num(p.discriminant.im),
            num(p.s_z_a),
            num(p.s_z_b),
        ]);
    }
    t
}

pub fn stability_boundary_table(points: &[StabilityBoundaryPoint]) -> Table {
    let mut t = Table::new(&["V_minus", "V_numeric", "V_formula", "V_linear", "deviation"]);
    for p in points {
        t.push(vec![
            num(p.v_minus),
            num(p.v_numeric),
            num(p.v_formula),
            num(p.v_linear),
            num(p.deviation),
        ]);
    }
    t
}

pub fn pt_check_table(check: &PtCheck, pt_symmetric_params: bool) -> Table {
    let mut t = Table::new(&["N", "basis", "residual", "conjugation_residual", "pt_symmetric_params"]);
    t.push(vec![
        check.n.to_string(),
        match check.basis {
            BasisKind::Full => "full",
            BasisKind::PermutationInvariant => "permutation_invariant",
        }
        .to_string(),
        num(check.residual),
        num(check.conjugation_residual),
        pt_symmetric_params.to_string(),
    ]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_round_trips_floats() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1 + 0.2), "x,y".to_string()]);
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "a,b\n0.30000000000000004,\"x,y\"\n");
        let back: f64 = s.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
        assert_eq!(num(8.881784197001252e-16), "8.881784197001252e-16");
        assert_eq!(num(2.0), "2.0");
    }

    #[test]
    fn sidecar_is_pretty_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_json(&path, &serde_json::json!({"k": 1})).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("}\n"));
        assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap()["k"], 1);
    }
}
