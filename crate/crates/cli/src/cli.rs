//! Command-line definitions, value specs and `--config` merging.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use nrsync_core::meanfield::{ClassifyOptions, ParamAxis};
use nrsync_core::model::{couplings_from_cascaded, CascadedWaveguideParams, CouplingParams, PhaseSign, SystemSize};

use crate::error::CliError;

/// A single number, a comma list `a,b,c`, or an inclusive grid `lo:hi:count`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSpec {
    pub spec: String,
    pub values: Vec<f64>,
}

impl ValueSpec {
    pub fn is_sweep(&self) -> bool {
        self.values.len() > 1
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }
}

impl FromStr for ValueSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| -> Result<f64, String> {
            let x: f64 = t.trim().parse().map_err(|_| format!("`{t}` is not a number"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{t}` is not finite"))
            }
        };
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("grid `{s}` must have the form lo:hi:count"));
            }
            let (lo, hi) = (num(parts[0])?, num(parts[1])?);
            let count: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| format!("grid count `{}` is not a positive integer", parts[2]))?;
            if count == 0 {
                return Err(format!("grid `{s}` needs at least one point"));
            }
            if count > 1 && hi <= lo {
                return Err(format!("grid `{s}` needs hi > lo"));
            }
            if count == 1 {
                vec![lo]
            } else {
                (0..count)
                    .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                    .collect()
            }
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err("empty value".to_string());
        }
        Ok(Self {
            spec: s.to_string(),
            values,
        })
    }
}

impl Serialize for ValueSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.spec)
    }
}

impl std::fmt::Display for ValueSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.spec)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "nrsync",
    version,
    about = "Solvers for two nonreciprocally coupled, pumped spin ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mean-field or cumulant time series from one initial condition.
    #[command(args_override_self = true)]
    Trajectory(TrajectoryArgs),
    /// Attractor labels over two swept couplings.
    #[command(args_override_self = true)]
    PhaseDiagram(PhaseDiagramArgs),
    /// Up-then-down ramp of delta or Im V_minus.
    #[command(args_override_self = true)]
    Hysteresis(HysteresisArgs),
    /// Steady moments against the number of spins.
    #[command(args_override_self = true)]
    CorrelatorsVsN(CorrelatorsVsNArgs),
    /// Exact steady-state correlators over two swept couplings.
    #[command(args_override_self = true)]
    ExactGrid(ExactGridArgs),
    /// Spectral densities from the regression equations.
    #[command(args_override_self = true)]
    Spectrum(SpectrumArgs),
    /// Exceptional points of the regression matrix along one swept coupling.
    #[command(args_override_self = true)]
    EpScan(EpScanArgs),
    /// Invariance of the generator under species exchange with H_inter -> -H_inter.
    #[command(args_override_self = true)]
    PtCheck(PtCheckArgs),
    /// Incoherent -> coherent threshold in V along V_plus = V.
    #[command(args_override_self = true)]
    StabilityBoundary(StabilityBoundaryArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trajectory(_) => "trajectory",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Hysteresis(_) => "hysteresis",
            Command::CorrelatorsVsN(_) => "correlators-vs-n",
            Command::ExactGrid(_) => "exact-grid",
            Command::Spectrum(_) => "spectrum",
            Command::EpScan(_) => "ep-scan",
            Command::PtCheck(_) => "pt-check",
            Command::StabilityBoundary(_) => "stability-boundary",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Trajectory(a) => &a.common,
            Command::PhaseDiagram(a) => &a.common,
            Command::Hysteresis(a) => &a.common,
            Command::CorrelatorsVsN(a) => &a.common,
            Command::ExactGrid(a) => &a.common,
            Command::Spectrum(a) => &a.common,
            Command::EpScan(a) => &a.common,
            Command::PtCheck(a) => &a.common,
            Command::StabilityBoundary(a) => &a.common,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// JSON object of flag values keyed by long flag name; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; the JSON sidecar goes next to it with extension `.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed for randomized initial conditions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit 0 even when some grid points fail.
    #[arg(long)]
    pub keep_going: bool,
}

/// Coupling parameters; every numeric flag accepts a value spec.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ParamArgs {
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub kappa: ValueSpec,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub delta: ValueSpec,
    #[arg(long = "V", default_value = "2", allow_hyphen_values = true)]
    pub v: ValueSpec,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub vplus: ValueSpec,
    /// Real part of V_minus.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub vminus: ValueSpec,
    #[arg(long = "vminus-im", default_value = "0", allow_hyphen_values = true)]
    pub vminus_im: ValueSpec,
    /// Spins per species; omit for the thermodynamic limit.
    #[arg(long = "N")]
    pub n: Option<ValueSpec>,
    /// Derive V, V_plus, V_minus from a cascaded waveguide `g1,g2,p1,p2,eta1,eta2` (needs N).
    #[arg(long, allow_hyphen_values = true)]
    pub cascaded: Option<String>,
}

fn axis_of(flag: &str) -> ParamAxis {
    match flag {
        "delta" => ParamAxis::Delta,
        "V" => ParamAxis::V,
        "vplus" => ParamAxis::VPlus,
        "vminus" => ParamAxis::VMinusRe,
        _ => ParamAxis::VMinusIm,
    }
}

impl ParamArgs {
    fn coupling_specs(&self) -> [(&'static str, &ValueSpec); 5] {
        [
            ("delta", &self.delta),
            ("V", &self.v),
            ("vplus", &self.vplus),
            ("vminus", &self.vminus),
            ("vminus-im", &self.vminus_im),
        ]
    }

    /// Swept couplings in flag order.
    pub fn sweeps(&self) -> Vec<(ParamAxis, &ValueSpec)> {
        self.coupling_specs()
            .into_iter()
            .filter(|(_, s)| s.is_sweep())
            .map(|(f, s)| (axis_of(f), s))
            .collect()
    }

    pub fn n_values(&self) -> Result<Vec<u32>, CliError> {
        let Some(spec) = &self.n else { return Ok(Vec::new()) };
        spec.values
            .iter()
            .map(|&x| {
                if x >= 1.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX) {
                    Ok(x as u32)
                } else {
                    Err(CliError::config("N", format!("`{x}` is not a positive integer")))
                }
            })
            .collect()
    }

    pub fn single_n(&self) -> Result<Option<u32>, CliError> {
        let ns = self.n_values()?;
        match ns.len() {
            0 => Ok(None),
            1 => Ok(Some(ns[0])),
            _ => Err(CliError::config("N", "this command takes a single N")),
        }
    }

    /// Base parameters with swept couplings set to a neutral value
    /// (0, or the largest swept V so that the base stays physical).
    pub fn base(&self, n: Option<u32>) -> Result<CouplingParams, CliError> {
        if self.kappa.is_sweep() {
            return Err(CliError::config("kappa", "kappa cannot be swept"));
        }
        let pick = |s: &ValueSpec| if s.is_sweep() { 0.0 } else { s.first() };
        let v = if self.v.is_sweep() {
            self.v.values.iter().copied().fold(f64::MIN, f64::max)
        } else {
            self.v.first()
        };
        let size = match n {
            Some(n) => SystemSize::Finite(n),
            None => SystemSize::ThermodynamicLimit,
        };
        let p = CouplingParams::new(
            self.kappa.first(),
            pick(&self.delta),
            v,
            pick(&self.vplus),
            Complex64::new(pick(&self.vminus), pick(&self.vminus_im)),
            size,
        )
        .map_err(|e| CliError::config("params", e.to_string()))?;
        match &self.cascaded {
            None => Ok(p),
            Some(text) => {
                let n = n.ok_or_else(|| CliError::config("cascaded", "waveguide couplings need --N"))?;
                let w = parse_cascaded(text)?;
                p.with_couplings(couplings_from_cascaded(&w, n))
                    .map_err(|e| CliError::config("cascaded", e.to_string()))
            }
        }
    }

    /// Rejects any sweep; for single-point commands.
    pub fn require_no_sweep(&self) -> Result<(), CliError> {
        match self.sweeps().first() {
            Some((axis, _)) => Err(CliError::config(axis.name(), "this command does not sweep couplings")),
            None => Ok(()),
        }
    }
}

fn parse_cascaded(text: &str) -> Result<CascadedWaveguideParams, CliError> {
    let bad = |m: String| CliError::config("cascaded", m);
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad("expected g1,g2,p1,p2,eta1,eta2".to_string()));
    }
    let f = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("`{t}` is not a number")));
    let sign = |t: &str| match f(t)? {
        x if x == 1.0 => Ok(PhaseSign::Plus),
        x if x == -1.0 => Ok(PhaseSign::Minus),
        x => Err(bad(format!("phase sign must be +1 or -1, got {x}"))),
    };
    CascadedWaveguideParams::new(
        f(parts[0])?,
        f(parts[1])?,
        sign(parts[2])?,
        sign(parts[3])?,
        f(parts[4])?,
        f(parts[5])?,
    )
    .map_err(|e| bad(e.to_string()))
}

/// Attractor classification settings, times in units of `1/kappa`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ClassifyArgs {
    #[arg(long, default_value_t = ClassifyOptions::default().transient)]
    pub transient: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().window)]
    pub window: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().sample_dt)]
    pub sample_dt: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().eps_coh)]
    pub eps_coh: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().eps_mod)]
    pub eps_mod: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().theta_sync)]
    pub theta_sync: f64,
    #[arg(long, default_value_t = ClassifyOptions::default().freq_tol)]
    pub freq_tol: f64,
}

impl ClassifyArgs {
    pub fn options(&self, kappa: f64) -> ClassifyOptions {
        ClassifyOptions {
            transient: self.transient,
            window: self.window,
            sample_dt: self.sample_dt,
            eps_coh: self.eps_coh,
            eps_mod: self.eps_mod,
            theta_sync: self.theta_sync,
            freq_tol: self.freq_tol,
            ..ClassifyOptions::default()
        }
        .scaled_to(kappa)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectorySolver {
    Meanfield,
    Cumulant2,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum IcChoice {
    /// Fixed generic state.
    Default,
    /// Complex conjugate of the default state.
    Conjugate,
    /// Default state plus its conjugate; flags bistable chiralities.
    ConjugatePair,
    /// Nearly incoherent inverted state.
    Seeded,
    /// Per-point random state drawn from `--seed`.
    Random,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = TrajectorySolver::Meanfield)]
    pub solver: TrajectorySolver,
    /// Final time in units of `1/kappa`.
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = IcChoice::Default)]
    pub ic: IcChoice,
    /// Coherence amplitude of the seeded initial condition.
    #[arg(long, default_value_t = 1e-4)]
    pub seed_amplitude: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PhaseDiagramArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    #[arg(long, value_enum, default_value_t = IcChoice::Default)]
    pub ic: IcChoice,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HysteresisArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    /// Settling time per ramp step, in units of `1/kappa`.
    #[arg(long, default_value_t = 300.0)]
    pub settle: f64,
    /// Analysis window per ramp step, in units of `1/kappa`.
    #[arg(long, default_value_t = 300.0)]
    pub dwell_window: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSolver {
    Cumulant2,
    Exact,
    Both,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CorrelatorsVsNArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = MomentSolver::Cumulant2)]
    pub solver: MomentSolver,
    /// Seed of the cross-species correlation in the cumulant initial state.
    #[arg(long, default_value_t = 1e-3)]
    pub pp_seed: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ExactMethod {
    ShiftInvert,
    Bordered,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExactGridArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ExactMethod::ShiftInvert)]
    pub method: ExactMethod,
    /// Largest Liouville-space dimension attempted.
    #[arg(long, default_value_t = nrsync_core::exact::DEFAULT_MAX_DIMENSION)]
    pub max_dimension: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethodArg {
    Resolvent,
    Quadrature,
    Fft,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub enum SpeciesArg {
    A,
    B,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    /// Species `b` of the correlation `<sigma+_a(tau) sigma-_b>`.
    #[arg(long, value_enum, default_value_t = SpeciesArg::A)]
    pub source: SpeciesArg,
    #[arg(long, value_enum, default_value_t = SpectrumMethodArg::Quadrature)]
    pub method: SpectrumMethodArg,
    /// Frequency grid in units of `kappa` (the FFT keeps its own grid within this range).
    #[arg(long, default_value = "-4:4:801", allow_hyphen_values = true)]
    pub omega: ValueSpec,
    #[arg(long, default_value_t = 2000.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 0.02)]
    pub dtau: f64,
    /// Starting phases averaged along a moment limit cycle.
    #[arg(long, default_value_t = 16)]
    pub phases: usize,
    /// Zero-padding factor of the FFT.
    #[arg(long, default_value_t = 2)]
    pub pad: usize,
    /// Fail instead of windowing when the correlation has not decayed.
    #[arg(long)]
    pub no_window: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationArg {
    /// Mean field without N, cumulant moments with N.
    Auto,
    Meanfield,
    Cumulant2,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EpScanArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    #[arg(long, value_enum, default_value_t = PopulationArg::Auto)]
    pub populations: PopulationArg,
    /// Target |discriminant| after refinement.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PtCheckArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StabilityBoundaryArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    /// Bracket `lo:hi` searched for the threshold V.
    #[arg(long, default_value = "0:4", allow_hyphen_values = true)]
    pub v_range: String,
    #[arg(long, default_value_t = 1e-4)]
    pub seed_amplitude: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub bisection_tol: f64,
}

impl StabilityBoundaryArgs {
    pub fn v_bracket(&self) -> Result<(f64, f64), CliError> {
        let bad = || {
            CliError::config(
                "v-range",
                format!("expected lo:hi with lo < hi, got `{}`", self.v_range),
            )
        };
        let (lo, hi) = self.v_range.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if lo < hi {
            Ok((lo, hi))
        } else {
            Err(bad())
        }
    }
}

/// Extracts the `--config` path from raw arguments, if present.
fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Turns a JSON object into `--key value` pairs.
fn config_flags(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| CliError::config("config", "top level must be a JSON object"))?;
    let mut out = Vec::new();
    for (key, value) in obj {
        if key == "config" {
            return Err(CliError::config(
                "config.config",
                "nested config files are not supported",
            ));
        }
        let flag = format!("--{key}");
        let scalar = |v: &serde_json::Value| -> Result<String, CliError> {
            match v {
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::String(s) => Ok(s.clone()),
                _ => Err(CliError::config(
                    &format!("config.{key}"),
                    "expected a number or string",
                )),
            }
        };
        match value {
            serde_json::Value::Bool(true) => out.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.extend([flag, parts.join(",")]);
            }
            v => out.extend([flag, scalar(v)?]),
        }
    }
    Ok(out)
}

/// Parses raw arguments, splicing `--config` values in right after the
/// subcommand so that explicit flags override them.
pub fn parse(raw: Vec<String>) -> Result<Cli, CliError> {
    let args = match config_path(&raw) {
        None => raw,
        Some(path) => {
            let flags = config_flags(&path)?;
            let mut args = raw;
            let at = args.len().min(2);
            args.splice(at..at, flags);
            args
        }
    };
    Cli::try_parse_from(args).map_err(CliError::Clap)
}
