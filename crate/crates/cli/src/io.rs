//! File formats: parameter and schedule JSON, solution JSON, trajectory CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use cstr_periodic_core::fliess::IteratedIntegrals;
use cstr_periodic_core::model::dimensionless_from_physical;
use cstr_periodic_core::sim::Trajectory;
use cstr_periodic_core::solver::PeriodicSolution;
use cstr_periodic_core::{ModelParams, PhysicalParams, Schedule, Segment, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

/// Reads dimensionless constants, or physical data that is converted on load.
/// Without a path the acetic anhydride constants are used.
pub fn load_params(path: Option<&Path>) -> Result<ModelParams> {
    let Some(path) = path else {
        return Ok(ModelParams::TABLE1);
    };
    let value: serde_json::Value = read_json(path)?;
    let json_err = |source| CliError::Json {
        path: path.to_owned(),
        source,
    };
    let params = if value.get("gamma").is_some() {
        serde_json::from_value::<ModelParams>(value).map_err(json_err)?
    } else {
        let phys: PhysicalParams = serde_json::from_value(value).map_err(json_err)?;
        dimensionless_from_physical(&phys)?
    };
    params.validate()?;
    Ok(params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub alpha: f64,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub tau: f64,
    pub segments: Vec<SegmentDoc>,
}

impl From<&Schedule> for ScheduleDoc {
    fn from(s: &Schedule) -> Self {
        ScheduleDoc {
            tau: s.tau(),
            segments: s
                .segments()
                .iter()
                .map(|seg| SegmentDoc {
                    alpha: seg.alpha,
                    u1: seg.u[0],
                    u2: seg.u[1],
                })
                .collect(),
        }
    }
}

impl TryFrom<&ScheduleDoc> for Schedule {
    type Error = CliError;

    fn try_from(doc: &ScheduleDoc) -> Result<Self> {
        let segments = doc
            .segments
            .iter()
            .map(|s| Segment {
                alpha: s.alpha,
                u: Vec2::new(s.u1, s.u2),
            })
            .collect();
        Ok(Schedule::new(doc.tau, segments)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub x0: [f64; 2],
    pub defect: f64,
    pub cost: f64,
    pub method: String,
    pub schedule: ScheduleDoc,
}

impl From<&PeriodicSolution> for SolutionDoc {
    fn from(s: &PeriodicSolution) -> Self {
        SolutionDoc {
            x0: s.x0.0,
            defect: s.defect,
            cost: s.cost,
            method: s.method.as_str().to_owned(),
            schedule: (&s.schedule).into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEntry {
    pub word: String,
    pub value: f64,
}

pub fn integrals_doc(v: &IteratedIntegrals) -> Vec<IntegralEntry> {
    v.entries()
        .map(|(w, value)| IntegralEntry {
            word: w.to_string(),
            value,
        })
        .collect()
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "x1", "x2", "u1", "u2", "cost_integrand"];

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for s in &traj.samples {
        out.write_record([
            fmt_sig(s.t),
            fmt_sig(s.x[0]),
            fmt_sig(s.x[1]),
            fmt_sig(s.u[0]),
            fmt_sig(s.u[1]),
            fmt_sig(s.cost_integrand()),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub u1: f64,
    pub u2: f64,
    pub cost_integrand: f64,
}

pub fn trajectory_points(traj: &Trajectory) -> Vec<TrajectoryPoint> {
    traj.samples
        .iter()
        .map(|s| TrajectoryPoint {
            t: s.t,
            x1: s.x[0],
            x2: s.x[1],
            u1: s.u[0],
            u2: s.u[1],
            cost_integrand: s.cost_integrand(),
        })
        .collect()
}

/// Writes to `path`, or to stdout when there is none.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_owned(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}
