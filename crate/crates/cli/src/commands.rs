use std::io::Write;

use cstr_periodic_core::fliess::{iterated_integrals, IteratedIntegrals};
use cstr_periodic_core::model::ModelParams;
use cstr_periodic_core::schedule::{
    build_strategy, enumerate_strategies, feasible_alpha_family, twelfths_within,
    vertices_from_bounds, Candidate,
};
use cstr_periodic_core::sim::{flow, integrate, Trajectory, DEFAULT_STEPS_PER_UNIT};
use cstr_periodic_core::solver::{
    expansion_cost, schedule_for, solve_periodic, NewtonConfig, PeriodicSolution, PipelineConfig,
    PipelineResult,
};
use cstr_periodic_core::{ControlBounds, Error as CoreError, Schedule, State, StrategyId, Vec2};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{csv_writer, fmt_sig};
use crate::reference::{reference_rows, ReferenceRow};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: ModelParams,
    pub bounds: ControlBounds,
    pub u1_bar: f64,
    pub steps_per_unit: usize,
    pub newton: NewtonConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::TABLE1,
            bounds: ControlBounds::table1(),
            u1_bar: 1.0,
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            newton: NewtonConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.bounds.validate()?;
        self.newton.validate()?;
        if !self.u1_bar.is_finite() {
            return Err(CliError::Input("mean u1 must be finite".into()));
        }
        if self.steps_per_unit < cstr_periodic_core::sim::MIN_STEPS_PER_UNIT {
            return Err(CliError::Input(format!(
                "need at least {} steps per unit time",
                cstr_periodic_core::sim::MIN_STEPS_PER_UNIT
            )));
        }
        Ok(())
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            newton: self.newton,
            steps_per_unit: self.steps_per_unit,
        }
    }
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "period must be positive, got {tau}"
        )))
    }
}

/// Runs `f` on every item on its own thread; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = items.iter().map(|it| s.spawn(move || f(it))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

fn nth(v: &Option<Vec<f64>>, i: usize) -> String {
    v.as_ref()
        .and_then(|a| a.get(i))
        .map(|&x| fmt_sig(x))
        .unwrap_or_default()
}

fn status(res: &PipelineResult) -> String {
    match (&res.expansion, &res.shooting) {
        (_, Err(e)) => format!("shooting failed: {e}"),
        (Err(e), Ok(_)) => format!("ok (expansion failed: {e})"),
        _ => "ok".into(),
    }
}

// ---------------------------------------------------------------- table1

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub row: usize,
    pub strategy: String,
    pub alpha: Option<Vec<f64>>,
    pub reference_alpha: Vec<f64>,
    pub x0_expansion: Option<[f64; 2]>,
    pub expansion_defect: Option<f64>,
    pub expansion_cost_estimate: Option<f64>,
    pub x0_shooting: Option<[f64; 2]>,
    pub shooting_start: Option<String>,
    pub defect: Option<f64>,
    pub cost: Option<f64>,
    pub reference_x0: [f64; 2],
    pub reference_cost: f64,
    pub cost_from_reference_x0: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, Default)]
pub struct TableOutput {
    pub rows: Vec<TableRow>,
    pub warnings: Vec<String>,
}

fn table_row(cfg: &RunConfig, index: usize, r: &ReferenceRow, tau: f64) -> TableRow {
    let mut row = TableRow {
        row: index + 1,
        strategy: r.strategy.clone(),
        alpha: None,
        reference_alpha: r.alpha.clone(),
        x0_expansion: None,
        expansion_defect: None,
        expansion_cost_estimate: None,
        x0_shooting: None,
        shooting_start: None,
        defect: None,
        cost: None,
        reference_x0: r.x0,
        reference_cost: r.cost,
        cost_from_reference_x0: None,
        status: String::new(),
    };
    let schedule = match schedule_for(r.strategy_id(), &cfg.bounds, &r.pins(), cfg.u1_bar, tau) {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("fractions: {e}");
            return row;
        }
    };
    row.alpha = Some(schedule.alphas());
    row.cost_from_reference_x0 = flow(&cfg.params, Vec2::from(r.x0), &schedule, cfg.steps_per_unit)
        .ok()
        .map(|end| end.cost_integral / tau);

    let res = solve_periodic(&cfg.params, &schedule, &cfg.pipeline());
    row.status = status(&res);
    if let Ok(e) = &res.expansion {
        row.x0_expansion = Some(e.x0.0);
        row.expansion_defect = Some(e.defect);
        row.expansion_cost_estimate = expansion_cost(&cfg.params, &schedule, e.x0).ok();
    }
    if let Ok(s) = &res.shooting {
        row.x0_shooting = Some(s.x0.0);
        row.shooting_start = Some(res.shooting_start.as_str().into());
        row.defect = Some(s.defect);
        row.cost = Some(s.cost);
    }
    row
}

/// Solves every reference row whose strategy can meet the mean constraint.
pub fn cmd_table1(cfg: &RunConfig, tau: f64) -> Result<TableOutput> {
    cfg.validate()?;
    check_tau(tau)?;
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for (i, r) in reference_rows().iter().enumerate() {
        let controls = build_strategy(r.strategy_id(), &cfg.bounds)?;
        let u1: Vec<f64> = controls.iter().map(|u| u[0]).collect();
        match feasible_alpha_family(&u1, cfg.u1_bar) {
            Ok(_) => kept.push((i, r)),
            Err(e) => warnings.push(format!("row {} ({}) skipped: {e}", i + 1, r.strategy)),
        }
    }
    if kept.is_empty() {
        warnings.push("no reference row is feasible; table is empty".into());
    }
    let rows = par_map(&kept, |&(i, r)| table_row(cfg, i, r, tau));
    Ok(TableOutput { rows, warnings })
}

pub const TABLE_HEADER: [&str; 21] = [
    "row",
    "strategy",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "x0_expansion_1",
    "x0_expansion_2",
    "expansion_defect",
    "expansion_cost_estimate",
    "x0_shooting_1",
    "x0_shooting_2",
    "shooting_start",
    "defect",
    "cost",
    "reference_x0_1",
    "reference_x0_2",
    "reference_cost",
    "cost_from_reference_x0",
    "status",
    "reference_alpha",
];

pub fn write_table_csv<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TABLE_HEADER)?;
    for r in rows {
        let ref_alpha: Vec<String> = r.reference_alpha.iter().map(|&a| fmt_sig(a)).collect();
        out.write_record([
            r.row.to_string(),
            r.strategy.clone(),
            nth(&r.alpha, 0),
            nth(&r.alpha, 1),
            nth(&r.alpha, 2),
            nth(&r.alpha, 3),
            opt(r.x0_expansion.map(|x| x[0])),
            opt(r.x0_expansion.map(|x| x[1])),
            opt(r.expansion_defect),
            opt(r.expansion_cost_estimate),
            opt(r.x0_shooting.map(|x| x[0])),
            opt(r.x0_shooting.map(|x| x[1])),
            r.shooting_start.clone().unwrap_or_default(),
            opt(r.defect),
            opt(r.cost),
            fmt_sig(r.reference_x0[0]),
            fmt_sig(r.reference_x0[1]),
            fmt_sig(r.reference_cost),
            opt(r.cost_from_reference_x0),
            r.status.clone(),
            ref_alpha.join(";"),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

// ---------------------------------------------------------------- solve

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub schedule: Schedule,
    pub expansion: Option<PeriodicSolution>,
    pub expansion_error: Option<String>,
    pub shooting: PeriodicSolution,
    pub shooting_start: &'static str,
    pub expansion_cost_estimate: Option<f64>,
}

pub fn cmd_solve(
    cfg: &RunConfig,
    id: StrategyId,
    pins: &[(usize, f64)],
    tau: f64,
) -> Result<SolveOutput> {
    cfg.validate()?;
    check_tau(tau)?;
    let schedule = schedule_for(id, &cfg.bounds, pins, cfg.u1_bar, tau)?;
    let res = solve_periodic(&cfg.params, &schedule, &cfg.pipeline());
    let shooting = res.shooting?;
    let (expansion, expansion_error) = match res.expansion {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let expansion_cost_estimate = expansion
        .as_ref()
        .and_then(|e| expansion_cost(&cfg.params, &schedule, e.x0).ok());
    Ok(SolveOutput {
        schedule,
        expansion,
        expansion_error,
        shooting,
        shooting_start: res.shooting_start.as_str(),
        expansion_cost_estimate,
    })
}

pub fn schedule_integrals(schedule: &Schedule) -> Result<IteratedIntegrals> {
    Ok(iterated_integrals(&schedule.to_control(), schedule.tau())?)
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub defect: f64,
}

pub fn cmd_simulate(cfg: &RunConfig, schedule: &Schedule, x0: State) -> Result<SimulateOutput> {
    cfg.validate()?;
    let trajectory =
        integrate(&cfg.params, x0, schedule, cfg.steps_per_unit).map_err(|e| match e {
            CoreError::DomainExit { .. } | CoreError::Domain { .. } => {
                CliError::Input(format!("initial state {x0:?}: {e}"))
            }
            other => other.into(),
        })?;
    let cost = cstr_periodic_core::sim::cost(&trajectory)?;
    let defect = trajectory.defect();
    Ok(SimulateOutput {
        trajectory,
        cost,
        defect,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// 0-based fraction index.
    Alpha(usize),
    Tau,
}

impl std::str::FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "tau" {
            return Ok(SweepAxis::Tau);
        }
        s.strip_prefix("alpha")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| (1..=4).contains(&k))
            .map(|k| SweepAxis::Alpha(k - 1))
            .ok_or_else(|| {
                CliError::Input(format!(
                    "sweep axis must be alpha1..alpha4 or tau, got {s:?}"
                ))
            })
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::Alpha(i) => write!(f, "alpha{}", i + 1),
            SweepAxis::Tau => f.write_str("tau"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub tau: f64,
    pub alpha: Option<Vec<f64>>,
    pub x0_expansion: Option<[f64; 2]>,
    pub x0_shooting: Option<[f64; 2]>,
    pub defect: Option<f64>,
    pub cost: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutput {
    pub strategy: String,
    pub axis: String,
    pub rows: Vec<SweepRow>,
    /// Whether the cost strictly increases along the converged rows; `None`
    /// with fewer than two of them.
    pub cost_strictly_increasing: Option<bool>,
}

/// Default grid for a fraction: the twelfths inside its feasible range.
pub fn default_alpha_grid(cfg: &RunConfig, id: StrategyId, index: usize) -> Result<Vec<f64>> {
    let controls = build_strategy(id, &cfg.bounds)?;
    let u1: Vec<f64> = controls.iter().map(|u| u[0]).collect();
    let fam = feasible_alpha_family(&u1, cfg.u1_bar)?;
    let &(lo, hi) = fam
        .ranges
        .get(index)
        .ok_or_else(|| CliError::Input(format!("{id} has no fraction {}", index + 1)))?;
    Ok(twelfths_within(lo, hi))
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    id: StrategyId,
    pins: &[(usize, f64)],
    axis: SweepAxis,
    values: &[f64],
    tau: f64,
) -> Result<SweepOutput> {
    cfg.validate()?;
    check_tau(tau)?;
    if let SweepAxis::Alpha(i) = axis {
        if pins.iter().any(|&(j, _)| j == i) {
            return Err(CliError::Input(format!("{axis} is both swept and pinned")));
        }
        if i >= id.strategy.len() {
            return Err(CliError::Input(format!("{id} has no fraction {}", i + 1)));
        }
    } else {
        for &t in values {
            check_tau(t)?;
        }
    }
    let rows = par_map(values, |&value| {
        let (pins, tau) = match axis {
            SweepAxis::Alpha(i) => {
                let mut p = pins.to_vec();
                p.push((i, value));
                (p, tau)
            }
            SweepAxis::Tau => (pins.to_vec(), value),
        };
        let mut row = SweepRow {
            value,
            tau,
            alpha: None,
            x0_expansion: None,
            x0_shooting: None,
            defect: None,
            cost: None,
            status: String::new(),
        };
        let schedule = match schedule_for(id, &cfg.bounds, &pins, cfg.u1_bar, tau) {
            Ok(s) => s,
            Err(e) => {
                row.status = format!("fractions: {e}");
                return row;
            }
        };
        row.alpha = Some(schedule.alphas());
        let res = solve_periodic(&cfg.params, &schedule, &cfg.pipeline());
        row.status = status(&res);
        row.x0_expansion = res.expansion.as_ref().ok().map(|e| e.x0.0);
        if let Ok(s) = &res.shooting {
            row.x0_shooting = Some(s.x0.0);
            row.defect = Some(s.defect);
            row.cost = Some(s.cost);
        }
        row
    });
    let costs: Vec<f64> = rows.iter().filter_map(|r| r.cost).collect();
    let cost_strictly_increasing =
        (costs.len() >= 2).then(|| costs.windows(2).all(|w| w[1] > w[0]));
    Ok(SweepOutput {
        strategy: id.to_string(),
        axis: axis.to_string(),
        rows,
        cost_strictly_increasing,
    })
}

pub const SWEEP_HEADER: [&str; 13] = [
    "value",
    "tau",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "x0_expansion_1",
    "x0_expansion_2",
    "x0_shooting_1",
    "x0_shooting_2",
    "defect",
    "cost",
    "status",
];

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_sig(r.value),
            fmt_sig(r.tau),
            nth(&r.alpha, 0),
            nth(&r.alpha, 1),
            nth(&r.alpha, 2),
            nth(&r.alpha, 3),
            opt(r.x0_expansion.map(|x| x[0])),
            opt(r.x0_expansion.map(|x| x[1])),
            opt(r.x0_shooting.map(|x| x[0])),
            opt(r.x0_shooting.map(|x| x[1])),
            opt(r.defect),
            opt(r.cost),
            r.status.clone(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

// ---------------------------------------------------------------- strategies

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyEntry {
    pub id: String,
    pub vertices: Vec<String>,
    pub controls: Vec<[f64; 2]>,
    pub forced: Vec<Option<f64>>,
    pub ranges: Vec<[f64; 2]>,
    /// 1-based indices of the fractions left to choose.
    pub free: Vec<usize>,
}

pub fn cmd_strategies(cfg: &RunConfig) -> Result<Vec<StrategyEntry>> {
    cfg.validate()?;
    let verts = vertices_from_bounds(&cfg.bounds)?;
    let entries = enumerate_strategies(&cfg.bounds, cfg.u1_bar)?
        .into_iter()
        .map(|c| match c {
            Candidate::Strategy { id, family } => {
                let controls = build_strategy(id, &cfg.bounds).expect("enumerated ids are valid");
                StrategyEntry {
                    id: id.to_string(),
                    vertices: id.vertices().iter().map(|v| v.label().to_owned()).collect(),
                    controls: controls.iter().map(|u| u.0).collect(),
                    forced: family.forced.clone(),
                    ranges: family.ranges.iter().map(|&(a, b)| [a, b]).collect(),
                    free: family.free.iter().map(|i| i + 1).collect(),
                }
            }
            Candidate::SingleVertex(v) => StrategyEntry {
                id: v.label().to_owned(),
                vertices: vec![v.label().to_owned()],
                controls: vec![verts.point(v).0],
                forced: vec![Some(1.0)],
                ranges: vec![[1.0, 1.0]],
                free: Vec::new(),
            },
        })
        .collect();
    Ok(entries)
}

pub const STRATEGIES_HEADER: [&str; 5] = ["id", "vertices", "forced", "ranges", "free"];

pub fn write_strategies_csv<W: Write>(w: W, entries: &[StrategyEntry]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(STRATEGIES_HEADER)?;
    for e in entries {
        let forced: Vec<String> = e.forced.iter().map(|f| opt(*f)).collect();
        let ranges: Vec<String> = e
            .ranges
            .iter()
            .map(|r| format!("{}..{}", fmt_sig(r[0]), fmt_sig(r[1])))
            .collect();
        let free: Vec<String> = e.free.iter().map(|i| format!("alpha{i}")).collect();
        out.write_record([
            e.id.clone(),
            e.vertices.join(" "),
            forced.join(";"),
            ranges.join(";"),
            free.join(";"),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses `k=v` with a 1-based index into a 0-based pin.
pub fn parse_pin(s: &str) -> Result<(usize, f64)> {
    let err = || {
        CliError::Input(format!(
            "expected INDEX=VALUE with INDEX in 1..=4, got {s:?}"
        ))
    };
    let (k, v) = s.split_once('=').ok_or_else(err)?;
    let k = k.trim().trim_start_matches("alpha");
    let k: usize = k.parse().map_err(|_| err())?;
    let v: f64 = v.trim().parse().map_err(|_| err())?;
    if !(1..=4).contains(&k) || !v.is_finite() {
        return Err(err());
    }
    Ok((k - 1, v))
}

/// Comma-separated numbers; an empty string is an empty list.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("not a number: {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pins_and_lists() {
        assert_eq!(parse_pin("2=0.25").unwrap(), (1, 0.25));
        assert_eq!(parse_pin("alpha3=0.1").unwrap(), (2, 0.1));
        assert!(parse_pin("0=0.1").is_err());
        assert!(parse_pin("5=0.1").is_err());
        assert!(parse_pin("2").is_err());
        assert_eq!(parse_list("0.25, 0.5,1").unwrap(), vec![0.25, 0.5, 1.0]);
        assert!(parse_list("").unwrap().is_empty());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn sweep_axis_parsing() {
        assert_eq!("alpha2".parse::<SweepAxis>().unwrap(), SweepAxis::Alpha(1));
        assert_eq!("tau".parse::<SweepAxis>().unwrap(), SweepAxis::Tau);
        assert!("alpha5".parse::<SweepAxis>().is_err());
        assert_eq!(SweepAxis::Alpha(1).to_string(), "alpha2");
    }

    #[test]
    fn default_grid_for_c5() {
        let cfg = RunConfig::default();
        let grid = default_alpha_grid(&cfg, "C5".parse().unwrap(), 1).unwrap();
        assert_eq!(grid.len(), 9);
        assert!((grid[0] - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn unreachable_mean_gives_empty_table() {
        let cfg = RunConfig {
            u1_bar: 4.0,
            ..RunConfig::default()
        };
        let out = cmd_table1(&cfg, 0.5).unwrap();
        assert!(out.rows.is_empty());
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn empty_sweep() {
        let out = cmd_sweep(
            &RunConfig::default(),
            "C5".parse().unwrap(),
            &[],
            SweepAxis::Alpha(1),
            &[],
            0.5,
        )
        .unwrap();
        assert!(out.rows.is_empty());
        assert_eq!(out.cost_strictly_increasing, None);
    }
}
