//! JSON job specifications and the command runners behind the command-line tool.

use crate::acceptance::{run_criterion, CriterionReport, CRITERIA};
use crate::classifier::{classify, ClassifierConfig, TraceData};
use crate::error::{Error, Result};
use crate::functions::{Constant, Gaussian};
use crate::interpolator::{reconstruct, reconstruct_inf, verify_interpolation, w0_from};
use crate::lattice::{explicit_lattice, square_lattice, upper_density_report, GridSpec, Lattice, SQUARE_SCALE};
use crate::multiplier::Multiplier;
use crate::transforms::opnorm::{operator_norm_estimate, Operator};
use crate::transforms::{PvCenterMode, PvConfig, PV_TOLERANCE};
use crate::weight::{ap_probe, WeightProfile};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// ρ(0) used for power weights when neither c_gamma nor rho_origin is given.
pub const DEFAULT_RHO_ORIGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Classical,
    Power {
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_origin: Option<f64>,
    },
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightProfile> {
        match *self {
            WeightSpec::Classical => Ok(WeightProfile::classical()),
            WeightSpec::Power { gamma, c_gamma: Some(c), rho_origin: None } => WeightProfile::power(gamma, c),
            WeightSpec::Power { gamma, c_gamma: None, rho_origin } => {
                WeightProfile::power_with_rho_origin(gamma, rho_origin.unwrap_or(DEFAULT_RHO_ORIGIN))
            }
            WeightSpec::Power { .. } => Err(Error::Schema("give at most one of c_gamma and rho_origin".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSpec {
    Square {
        #[serde(rename = "R")]
        r: f64,
    },
    Explicit {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultiplierSpec {
    Named(String),
    Table {
        /// g′(λ) per index, or log g′(λ) when `log` is set.
        g_prime: Vec<TableEntry>,
        #[serde(default)]
        log: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_second_origin: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    GaussianTrace { w: [f64; 2] },
    Constant { v: [f64; 2] },
    Zero,
    ExpPhi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuesSpec {
    Generator(Generator),
    /// c_λ per index (or c_λe^{−φ(λ)} when the job sets `values_weighted`); absent indices are 0.
    List(Vec<TableEntry>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSpec {
    #[serde(rename = "tail_R", default, skip_serializing_if = "Option::is_none")]
    pub tail_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub center_mode: PvCenterMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<MultiplierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<ValuesSpec>,
    #[serde(default)]
    pub values_weighted: bool,
    #[serde(default = "default_p", with = "crate::serde_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<PvSpec>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub options: Value,
}

fn default_weight() -> WeightSpec {
    WeightSpec::Classical
}

fn default_p() -> f64 {
    2.0
}

impl JobSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))
    }

    fn option<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>> {
        match self.options.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Error::Schema(format!("options.{key}: {e}"))),
        }
    }
}

/// Command-line overrides applied on top of a job.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: u64,
    pub tail_r: Option<f64>,
    pub tolerance: Option<f64>,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(rename = "tail_R", skip_serializing_if = "Option::is_none")]
    pub tail_r: Option<f64>,
    pub pv_tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: String,
    pub config: JobSpec,
    pub tolerances: Tolerances,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
}

/// Everything a command needs, built once from the job.
pub struct Context {
    pub job: JobSpec,
    pub overrides: Overrides,
    pub weight: WeightProfile,
}

impl Context {
    pub fn new(job: JobSpec, overrides: Overrides) -> Result<Self> {
        let weight = job.weight.build()?;
        Ok(Self { job, overrides, weight })
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        let spec = self.job.lattice.as_ref().ok_or_else(|| Error::Schema("job needs a lattice".into()))?;
        let l = match spec {
            LatticeSpec::Square { r } => square_lattice(*r, &self.weight)?,
            LatticeSpec::Explicit { points } => {
                let pts: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                explicit_lattice(&pts, &self.weight)?
            }
        };
        Ok(Arc::new(l))
    }

    pub fn pv(&self, l: &Lattice) -> PvConfig {
        let spec = self.job.pv.unwrap_or(PvSpec { tail_r: None, tolerance: None, center_mode: PvCenterMode::Origin });
        PvConfig {
            tail_r: self.overrides.tail_r.or(spec.tail_r).unwrap_or(l.truncation_radius),
            tolerance: self.overrides.tolerance.or(spec.tolerance).unwrap_or(PV_TOLERANCE),
            center_mode: spec.center_mode,
        }
    }

    pub fn multiplier(&self, l: Arc<Lattice>) -> Result<Arc<Multiplier>> {
        let m = match &self.job.multiplier {
            None => return Err(Error::Schema("job needs a multiplier".into())),
            Some(MultiplierSpec::Named(s)) if s == "builtin_sigma" => Multiplier::builtin_sigma(l)?,
            Some(MultiplierSpec::Named(s)) => return Err(Error::Schema(format!("unknown multiplier {s:?}"))),
            Some(MultiplierSpec::Table { g_prime, log, g_second_origin }) => {
                let table: Vec<(usize, Complex64)> =
                    g_prime.iter().map(|e| (e.index, Complex64::new(e.re, e.im))).collect();
                let m = if *log {
                    Multiplier::user_table_log(l, &table, None)?
                } else {
                    Multiplier::user_table(l, &table, None)?
                };
                match g_second_origin {
                    Some(v) => m.with_g_second_origin(Complex64::new(v[0], v[1])),
                    None => m,
                }
            }
        };
        Ok(Arc::new(m))
    }

    pub fn trace(&self, m: Arc<Multiplier>) -> Result<TraceData> {
        let p = self.job.p;
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        match self.job.values.as_ref().ok_or_else(|| Error::Schema("job needs values".into()))? {
            ValuesSpec::Generator(Generator::GaussianTrace { w }) => TraceData::from_function(m, &Gaussian { w: c(*w) }, p),
            ValuesSpec::Generator(Generator::Constant { v }) => TraceData::from_function(m, &Constant(c(*v)), p),
            ValuesSpec::Generator(Generator::Zero) => TraceData::zero(m, p),
            ValuesSpec::Generator(Generator::ExpPhi) => TraceData::exp_phi(m, p),
            ValuesSpec::List(entries) => {
                let l = m.lattice.clone();
                let mut hat = vec![Complex64::new(0.0, 0.0); l.len()];
                for e in entries {
                    if e.index >= l.len() {
                        return Err(Error::Schema(format!("value index {} outside lattice of {} points", e.index, l.len())));
                    }
                    let v = Complex64::new(e.re, e.im);
                    hat[e.index] = if self.job.values_weighted { v } else { v * (-l.weight.phi(l.points[e.index])).exp() };
                }
                TraceData::new(m, hat, p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LatticeInfo,
    SigmaEval,
    TraceCheck,
    Reconstruct,
    Verify,
    ApProbe,
    OpNorm,
    Acceptance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LatticeInfo => "lattice-info",
            Command::SigmaEval => "sigma-eval",
            Command::TraceCheck => "trace-check",
            Command::Reconstruct => "reconstruct",
            Command::Verify => "verify",
            Command::ApProbe => "ap-probe",
            Command::OpNorm => "op-norm",
            Command::Acceptance => "acceptance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub points: usize,
    pub scale: f64,
    pub truncation_radius: f64,
    pub delta_sep: f64,
    pub rho_origin: f64,
    pub max_rho: f64,
    pub guard_radius: f64,
    pub shell_count: usize,
    pub density_schedule: Vec<f64>,
    pub upper_density: crate::lattice::DensityReport,
}

/// Outcome of a command: the JSON report plus, for grid commands, CSV text.
pub struct Outcome {
    pub report: RunReport,
    pub csv: Option<Vec<u8>>,
    /// Set by the acceptance runner when some criterion failed.
    pub acceptance_failed: bool,
}

fn default_fundamental_grid(n: usize) -> GridSpec {
    let h = 0.5 * SQUARE_SCALE;
    GridSpec { x_min: -h, x_max: h, y_min: -h, y_max: h, nx: n, ny: n }
}

pub fn run(command: Command, ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let mut csv = None;
    let mut acceptance_failed = false;
    let mut tail = None;
    let mut pv_tol = ctx.overrides.tolerance.unwrap_or(PV_TOLERANCE);
    let seed = ctx.overrides.seed;
    let result: Value = match command {
        Command::LatticeInfo => {
            let l = ctx.lattice()?;
            let r = l.truncation_radius;
            // Largest admissible discs: the max over centres is biased upwards by roughly 1/r.
            let r_top = (0.5 * r).min(0.25 * r / ctx.weight.rho_origin);
            let schedule = ctx
                .job
                .option::<Vec<f64>>("r_schedule")?
                .unwrap_or_else(|| vec![0.8 * r_top, 0.9 * r_top, r_top]);
            let shells = crate::lattice::shells_for(&l, Complex64::new(0.0, 0.0));
            serde_json::to_value(LatticeInfo {
                points: l.len(),
                scale: l.scale,
                truncation_radius: r,
                delta_sep: l.delta_sep,
                rho_origin: ctx.weight.rho_origin,
                max_rho: l.max_rho(),
                guard_radius: l.guard_radius(),
                shell_count: shells.shells.len(),
                upper_density: upper_density_report(&l, &ctx.weight, &schedule)?,
                density_schedule: schedule,
            })?
        }
        Command::SigmaEval => {
            let l = ctx.lattice()?;
            let m = ctx.multiplier(l)?;
            let grid = ctx.job.option::<GridSpec>("grid")?.unwrap_or_else(|| default_fundamental_grid(50));
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["x", "y", "weighted_abs", "log_re", "log_im"])?;
                for z in grid.points() {
                    let (mag, lg) = match m.log_g(z) {
                        Ok(lg) => (m.weighted_mag(z)?, lg),
                        Err(Error::OnLattice(_)) => (0.0, Complex64::new(f64::NEG_INFINITY, 0.0)),
                        Err(e) => return Err(e),
                    };
                    w.write_record(&[z.re.to_string(), z.im.to_string(), mag.to_string(), lg.re.to_string(), lg.im.to_string()])?;
                }
                w.flush()?;
            }
            csv = Some(buf);
            serde_json::json!({ "grid": grid, "points": grid.len() })
        }
        Command::TraceCheck => {
            let l = ctx.lattice()?;
            let pv = ctx.pv(&l);
            tail = Some(pv.tail_r);
            pv_tol = pv.tolerance;
            let data = ctx.trace(ctx.multiplier(l)?)?;
            serde_json::to_value(classify(&data, &ClassifierConfig { pv, seed })?)?
        }
        Command::Reconstruct | Command::Verify => {
            let l = ctx.lattice()?;
            let pv = ctx.pv(&l);
            tail = Some(pv.tail_r);
            pv_tol = pv.tolerance;
            let m = ctx.multiplier(l)?;
            let data = ctx.trace(m.clone())?;
            let (interp, w0_note) = if data.p.is_infinite() {
                let w0 = match ctx.job.option::<[f64; 2]>("w0")? {
                    Some(v) => Some(Complex64::new(v[0], v[1])),
                    None => match &ctx.job.values {
                        Some(ValuesSpec::Generator(Generator::GaussianTrace { w })) => {
                            Some(w0_from(&Gaussian { w: Complex64::new(w[0], w[1]) }, &m)?)
                        }
                        _ => None,
                    },
                };
                (reconstruct_inf(&data, w0, pv)?, w0)
            } else {
                (reconstruct(&data, pv)?, None)
            };
            let residual = verify_interpolation(&interp)?;
            if command == Command::Reconstruct {
                let grid = ctx.job.option::<GridSpec>("grid")?.unwrap_or_else(|| GridSpec::square(2.0, 41));
                let mut buf = Vec::new();
                interp.write_grid_csv(&grid, &mut buf)?;
                csv = Some(buf);
            }
            serde_json::json!({
                "residual": residual,
                "w0": w0_note.map(|w| [w.re, w.im]),
                "w0_defaulted": interp.w0_defaulted,
            })
        }
        Command::ApProbe => {
            let radii = ctx.job.option::<Vec<f64>>("radii")?.unwrap_or_else(crate::classifier::default_ap_radii);
            let centers: Option<Vec<Complex64>> = ctx
                .job
                .option::<Vec<[f64; 2]>>("centers")?
                .map(|cs| cs.iter().map(|c| Complex64::new(c[0], c[1])).collect());
            serde_json::to_value(ap_probe(&ctx.weight, ctx.job.p, &radii, centers.as_deref())?)?
        }
        Command::OpNorm => {
            let l = ctx.lattice()?;
            let op = ctx.job.option::<Operator>("op")?.unwrap_or(Operator::B);
            let sizes = ctx.job.option::<Vec<usize>>("sizes")?.unwrap_or_else(|| {
                crate::acceptance::OPNORM_SIZES.iter().copied().filter(|&n| n <= l.len()).collect()
            });
            let trials = ctx.job.option::<usize>("trials")?.unwrap_or(2);
            serde_json::to_value(operator_norm_estimate(&l, op, &sizes, ctx.job.p, trials, seed)?)?
        }
        Command::Acceptance => {
            let ids = ctx.job.option::<Vec<u8>>("criteria")?.unwrap_or_else(|| CRITERIA.to_vec());
            let reports: Vec<CriterionReport> = ids.iter().map(|&id| run_criterion(id, seed)).collect::<Result<_>>()?;
            acceptance_failed = reports.iter().any(|r| !r.passed);
            serde_json::to_value(reports)?
        }
    };
    let report = RunReport {
        command: command.name().into(),
        tool_version: TOOL_VERSION.into(),
        config: ctx.job.clone(),
        tolerances: Tolerances { tail_r: tail, pv_tolerance: pv_tol, seed },
        result,
        timing_seconds: ctx.overrides.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(Outcome { report, csv, acceptance_failed })
}

pub fn write_report<W: Write>(report: &RunReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}
