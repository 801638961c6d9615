//! Periodic initial states: Newton on the truncated expansion (cheap, valid
//! for short periods) and shooting on the integrated flow (exact periodicity).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fliess::{periodicity_residual, ExpansionCoefficients};
use crate::linalg::{Mat2, Vec2};
use crate::model::{ModelParams, State};
use crate::schedule::{build_strategy, feasible_alpha_family, ControlBounds, Schedule, StrategyId};
use crate::sim::{flow, DEFAULT_STEPS_PER_UNIT};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative step of the forward-difference Jacobian.
    pub fd_step: f64,
    /// Step shrink factor during backtracking.
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-7,
            damping: 0.5,
            max_halvings: 20,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidParams(alloc::format!(
                "bad newton config {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub x: Vec2,
    pub residual: f64,
    pub iterations: usize,
    /// Residual norm at the start and after every accepted step.
    pub history: Vec<f64>,
}

/// Damped Newton for a map `R^2 -> R^2` with a forward-difference Jacobian.
///
/// A step is accepted only if it strictly decreases the residual norm; trial
/// points where `f` fails (e.g. outside the model domain) count as rejections.
pub fn newton_2d<F>(mut f: F, start: Vec2, cfg: &NewtonConfig) -> Result<NewtonReport>
where
    F: FnMut(Vec2) -> Result<Vec2>,
{
    cfg.validate()?;
    let mut x = start;
    let mut r = f(x)?;
    let mut norm = r.norm();
    let mut history = alloc::vec![norm];
    for it in 0..cfg.max_iter {
        if norm <= cfg.tol {
            return Ok(NewtonReport {
                x,
                residual: norm,
                iterations: it,
                history,
            });
        }
        let mut cols = [Vec2::ZERO; 2];
        for (k, col) in cols.iter_mut().enumerate() {
            let h = cfg.fd_step * libm::fmax(1.0, libm::fabs(x[k]));
            let mut e = Vec2::ZERO;
            e[k] = h;
            *col = match f(x + e) {
                Ok(fp) => (fp - r) * (1.0 / h),
                Err(_) => (r - f(x - e)?) * (1.0 / h),
            };
        }
        let jac = Mat2::from_columns(cols[0], cols[1]);
        let step = jac.solve(-r).ok_or(Error::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = x + step * lambda;
            if let Ok(rt) = f(trial) {
                let nt = rt.norm();
                if nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= cfg.damping;
        }
        match accepted {
            Some((xt, rt, nt)) => {
                x = xt;
                r = rt;
                norm = nt;
                history.push(norm);
            }
            None => {
                return Err(Error::Stalled {
                    iterations: it,
                    residual: norm,
                })
            }
        }
    }
    if norm <= cfg.tol {
        Ok(NewtonReport {
            x,
            residual: norm,
            iterations: cfg.max_iter,
            history,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            residual: norm,
        })
    }
}

/// Root of the truncated periodicity condition for fixed fractions.
pub fn solve_x0_expansion(
    params: &ModelParams,
    schedule: &Schedule,
    cfg: &NewtonConfig,
    guess: Option<State>,
) -> Result<NewtonReport> {
    newton_2d(
        |x| periodicity_residual(params, x, schedule),
        guess.unwrap_or(Vec2::ZERO),
        cfg,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSolution {
    pub schedule: Schedule,
    pub x0: State,
    pub newton: NewtonReport,
}

/// Completes the switching fractions of a strategy from pinned values and the
/// mean constraint, then solves the expansion for the initial state.
#[allow(clippy::too_many_arguments)]
pub fn solve_alpha_and_x0(
    params: &ModelParams,
    id: StrategyId,
    bounds: &ControlBounds,
    pinned: &[(usize, f64)],
    u1_bar: f64,
    tau: f64,
    cfg: &NewtonConfig,
    guess: Option<State>,
) -> Result<AlphaSolution> {
    let schedule = schedule_for(id, bounds, pinned, u1_bar, tau)?;
    let newton = solve_x0_expansion(params, &schedule, cfg, guess)?;
    Ok(AlphaSolution {
        schedule,
        x0: newton.x,
        newton,
    })
}

/// Schedule for a strategy with some fractions pinned, the rest forced by
/// `sum(alpha) = 1` and the mean of u1.
pub fn schedule_for(
    id: StrategyId,
    bounds: &ControlBounds,
    pinned: &[(usize, f64)],
    u1_bar: f64,
    tau: f64,
) -> Result<Schedule> {
    let controls = build_strategy(id, bounds)?;
    let u1: Vec<f64> = controls.iter().map(|u| u[0]).collect();
    let family = feasible_alpha_family(&u1, u1_bar)?;
    let alphas = family.complete(pinned)?;
    Schedule::from_parts(tau, &alphas, &controls)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Expansion,
    Shooting,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Expansion => "expansion",
            Method::Shooting => "shooting",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSolution {
    pub x0: State,
    pub schedule: Schedule,
    /// `|Phi_tau(x0) - x0|` on the integrated flow.
    pub defect: f64,
    /// Simulated cost from `x0`.
    pub cost: f64,
    pub method: Method,
    pub iterations: usize,
}

/// Evaluates a candidate initial state on the integrated flow.
pub fn evaluate_on_flow(
    params: &ModelParams,
    schedule: &Schedule,
    x0: State,
    method: Method,
    iterations: usize,
    steps_per_unit: usize,
) -> Result<PeriodicSolution> {
    let end = flow(params, x0, schedule, steps_per_unit)?;
    Ok(PeriodicSolution {
        x0,
        schedule: schedule.clone(),
        defect: (end.x - x0).norm(),
        cost: end.cost_integral / schedule.tau(),
        method,
        iterations,
    })
}

/// Newton on `Phi_tau(x0) - x0` with the flow computed by RK4.
pub fn shoot_periodic(
    params: &ModelParams,
    schedule: &Schedule,
    guess: State,
    cfg: &NewtonConfig,
    steps_per_unit: usize,
) -> Result<PeriodicSolution> {
    let report = newton_2d(
        |x| Ok(flow(params, x, schedule, steps_per_unit)?.x - x),
        guess,
        cfg,
    )?;
    evaluate_on_flow(
        params,
        schedule,
        report.x,
        Method::Shooting,
        report.iterations,
        steps_per_unit,
    )
}

/// Where the shooting iteration was started.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShootingStart {
    ExpansionRoot,
    /// The steady state `(0, 0)`.
    SteadyState,
}

impl ShootingStart {
    pub fn as_str(self) -> &'static str {
        match self {
            ShootingStart::ExpansionRoot => "expansion",
            ShootingStart::SteadyState => "steady-state",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub expansion: Result<PeriodicSolution>,
    pub shooting: Result<PeriodicSolution>,
    pub shooting_start: ShootingStart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub newton: NewtonConfig,
    pub steps_per_unit: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            newton: NewtonConfig::default(),
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
        }
    }
}

/// Expansion root, then shooting.
///
/// Shooting starts from whichever of the expansion root and the steady state
/// has the smaller flow defect, and falls back to the other start if that
/// iteration fails. The start actually used is reported; when both fail the
/// error of the first attempt is returned.
pub fn solve_periodic(
    params: &ModelParams,
    schedule: &Schedule,
    cfg: &PipelineConfig,
) -> PipelineResult {
    let spu = cfg.steps_per_unit;
    let expansion = solve_x0_expansion(params, schedule, &cfg.newton, None).and_then(|rep| {
        evaluate_on_flow(
            params,
            schedule,
            rep.x,
            Method::Expansion,
            rep.iterations,
            spu,
        )
    });
    let steady_defect = flow(params, Vec2::ZERO, schedule, spu)
        .map(|e| e.x.norm())
        .unwrap_or(f64::INFINITY);
    let mut order = alloc::vec![(ShootingStart::SteadyState, Vec2::ZERO, steady_defect)];
    if let Ok(e) = &expansion {
        order.push((ShootingStart::ExpansionRoot, e.x0, e.defect));
    }
    order.sort_by(|a, b| a.2.total_cmp(&b.2));

    let mut first_err = None;
    for (start, guess, _) in &order {
        match shoot_periodic(params, schedule, *guess, &cfg.newton, spu) {
            Ok(sol) => {
                return PipelineResult {
                    expansion,
                    shooting: Ok(sol),
                    shooting_start: *start,
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    PipelineResult {
        expansion,
        shooting: Err(first_err.unwrap_or(Error::SingularJacobian)),
        shooting_start: order[0].0,
    }
}

/// Expansion-based cost estimate at a given initial state.
pub fn expansion_cost(params: &ModelParams, schedule: &Schedule, x0: State) -> Result<f64> {
    let c = ExpansionCoefficients::at(params, x0)?;
    Ok(crate::fliess::cost_estimate_with(&c, schedule))
}
