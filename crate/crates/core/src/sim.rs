//! Fixed-step RK4 integration of the reactor under piecewise-constant controls.
//!
//! The grid is built per segment so that every switching time is a node; the
//! right-hand side is therefore smooth inside every step. The cost integrand
//! `(x1 + 1) u2` is carried as a third state component.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::model::{drift, ModelParams, State};
use crate::schedule::{PiecewiseControl, Schedule};

pub const DEFAULT_STEPS_PER_UNIT: usize = 4000;
pub const MIN_STEPS_PER_UNIT: usize = 100;

/// One classical Runge-Kutta step for `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        let mut out = *a;
        for (o, bi) in out.iter_mut().zip(b) {
            *o += s * bi;
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: State,
    /// Control in effect from this sample on (the last segment's at `t = tau`).
    pub u: Vec2,
    /// `int_0^t (x1 + 1) u2`
    pub cost_integral: f64,
    /// `int_0^t u1`
    pub u1_integral: f64,
}

impl Sample {
    pub fn cost_integrand(&self) -> f64 {
        (self.x[0] + 1.0) * self.u[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Indices into `samples` of each switching time, last one included.
    pub switch_indices: Vec<usize>,
    /// Cost integral over each nonempty segment.
    pub segment_costs: Vec<f64>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn initial_state(&self) -> State {
        self.samples[0].x
    }

    pub fn final_state(&self) -> State {
        self.samples[self.samples.len() - 1].x
    }

    pub fn cost_integral(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.cost_integral)
    }

    pub fn u1_integral(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.u1_integral)
    }

    /// `|x(tau) - x(0)|`
    pub fn defect(&self) -> f64 {
        (self.final_state() - self.initial_state()).norm()
    }
}

/// `J = (1/tau) int_0^tau (x1 + 1) u2 dt`
pub fn cost(traj: &Trajectory) -> Result<f64> {
    let tau = traj.duration();
    if traj.samples.len() < 2 || !(tau > 0.0) {
        return Err(Error::EmptyTrajectory);
    }
    Ok(traj.cost_integral() / tau)
}

/// Final state and cost integral only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowEnd {
    pub x: State,
    pub cost_integral: f64,
}

fn steps_for(duration: f64, steps_per_unit: usize) -> usize {
    libm::ceil(duration * steps_per_unit as f64) as usize
}

/// Shared stepping loop; `record` sees every node including `t = 0`.
fn march<R>(
    params: &ModelParams,
    x0: State,
    ctrl: &PiecewiseControl,
    steps_per_unit: usize,
    mut record: R,
) -> Result<FlowEnd>
where
    R: FnMut(Node),
{
    if steps_per_unit == 0 {
        return Err(Error::InvalidSchedule(
            "steps per unit time must be positive".into(),
        ));
    }
    drift(params, x0, Vec2::ZERO).map_err(|_| Error::DomainExit {
        t: 0.0,
        x1: x0[0],
        x2: x0[1],
    })?;
    let mut y = [x0[0], x0[1], 0.0];
    let mut u1_int = 0.0;
    let mut t_start = 0.0;
    let nonempty: Vec<(f64, Vec2)> = ctrl
        .segments
        .iter()
        .copied()
        .filter(|(d, _)| *d > 0.0)
        .collect();
    if let Some(&(_, u)) = nonempty.first() {
        record(Node {
            t: 0.0,
            y,
            u,
            u1_integral: 0.0,
            segment_end: None,
        });
    }
    for (k, &(d, u)) in nonempty.iter().enumerate() {
        let m = steps_for(d, steps_per_unit).max(1);
        let h = d / m as f64;
        let t_end = t_start + d;
        let seg_cost_start = y[2];
        let mut rhs = |t: f64, z: &[f64; 3]| -> Result<[f64; 3]> {
            let x = Vec2::new(z[0], z[1]);
            let dx = drift(params, x, u).map_err(|_| Error::DomainExit {
                t,
                x1: z[0],
                x2: z[1],
            })?;
            Ok([dx[0], dx[1], (z[0] + 1.0) * u[1]])
        };
        for s in 0..m {
            let t = t_start + s as f64 * h;
            y = rk4_step(&mut rhs, t, &y, h)?;
            if !(y[0].is_finite() && y[1].is_finite()) || 1.0 + y[0] <= 0.0 || 1.0 + y[1] <= 0.0 {
                return Err(Error::DomainExit {
                    t: t + h,
                    x1: y[0],
                    x2: y[1],
                });
            }
            let last = s + 1 == m;
            let t_node = if last {
                t_end
            } else {
                t_start + (s + 1) as f64 * h
            };
            let u_next = if last {
                nonempty.get(k + 1).map_or(u, |n| n.1)
            } else {
                u
            };
            record(Node {
                t: t_node,
                y,
                u: u_next,
                u1_integral: u1_int + u[0] * (t_node - t_start),
                segment_end: last.then_some(y[2] - seg_cost_start),
            });
        }
        u1_int += u[0] * d;
        t_start = t_end;
    }
    Ok(FlowEnd {
        x: Vec2::new(y[0], y[1]),
        cost_integral: y[2],
    })
}

struct Node {
    t: f64,
    y: [f64; 3],
    u: Vec2,
    u1_integral: f64,
    segment_end: Option<f64>,
}

/// Integrates a general piecewise-constant control and keeps every node.
pub fn integrate_control(
    params: &ModelParams,
    x0: State,
    ctrl: &PiecewiseControl,
    steps_per_unit: usize,
) -> Result<Trajectory> {
    let mut samples = Vec::new();
    let mut switch_indices = Vec::new();
    let mut segment_costs = Vec::new();
    march(params, x0, ctrl, steps_per_unit, |n| {
        samples.push(Sample {
            t: n.t,
            x: Vec2::new(n.y[0], n.y[1]),
            u: n.u,
            cost_integral: n.y[2],
            u1_integral: n.u1_integral,
        });
        if let Some(c) = n.segment_end {
            switch_indices.push(samples.len() - 1);
            segment_costs.push(c);
        }
    })?;
    if samples.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    Ok(Trajectory {
        samples,
        switch_indices,
        segment_costs,
    })
}

/// Integrates one period of a bang-bang schedule.
pub fn integrate(
    params: &ModelParams,
    x0: State,
    schedule: &Schedule,
    steps_per_unit: usize,
) -> Result<Trajectory> {
    if steps_per_unit < MIN_STEPS_PER_UNIT {
        return Err(Error::InvalidSchedule(alloc::format!(
            "need at least {MIN_STEPS_PER_UNIT} steps per unit time, got {steps_per_unit}"
        )));
    }
    integrate_control(params, x0, &schedule.to_control(), steps_per_unit)
}

/// Period map `x0 -> x(tau)` together with the cost integral, without storing samples.
pub fn flow(
    params: &ModelParams,
    x0: State,
    schedule: &Schedule,
    steps_per_unit: usize,
) -> Result<FlowEnd> {
    flow_control(params, x0, &schedule.to_control(), steps_per_unit)
}

pub fn flow_control(
    params: &ModelParams,
    x0: State,
    ctrl: &PiecewiseControl,
    steps_per_unit: usize,
) -> Result<FlowEnd> {
    march(params, x0, ctrl, steps_per_unit, |_| {})
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub steps_per_unit: [usize; 3],
    /// Error of the final state and cost integral against the `8x` run.
    pub errors: [f64; 3],
    /// Least-squares slope of `log(error)` against `log(h)`; `None` when the
    /// errors are at rounding level.
    pub order: Option<f64>,
}

/// Observed order of the integrator from runs at `h`, `h/2`, `h/4` against `h/8`.
pub fn convergence_order_check(
    params: &ModelParams,
    x0: State,
    schedule: &Schedule,
    base_steps_per_unit: usize,
) -> Result<ConvergenceReport> {
    let ctrl = schedule.to_control();
    let run = |spu: usize| flow_control(params, x0, &ctrl, spu);
    let reference = run(8 * base_steps_per_unit)?;
    let spus = [
        base_steps_per_unit,
        2 * base_steps_per_unit,
        4 * base_steps_per_unit,
    ];
    let mut errors = [0.0; 3];
    for (e, &spu) in errors.iter_mut().zip(&spus) {
        let end = run(spu)?;
        let dx = end.x - reference.x;
        let dc = end.cost_integral - reference.cost_integral;
        *e = libm::sqrt(dx.dot(dx) + dc * dc);
    }
    let order = if errors.iter().all(|&e| e > 1e-13) {
        // h ratios are 1, 1/2, 1/4
        let xs = [
            0.0,
            -core::f64::consts::LN_2,
            -2.0 * core::f64::consts::LN_2,
        ];
        let ys = errors.map(libm::log);
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some(num / den)
    } else {
        None
    };
    Ok(ConvergenceReport {
        steps_per_unit: spus,
        errors,
        order,
    })
}
