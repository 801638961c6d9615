use cstr_periodic_core::model::{drift, eval_fields, ModelParams};
use cstr_periodic_core::schedule::{
    build_strategy, feasible_alpha_family, iso_residual, ControlBounds, Schedule,
    Strategy as Switching, StrategyId,
};
use cstr_periodic_core::sim::{flow_control, integrate};
use cstr_periodic_core::solver::{shoot_periodic, solve_x0_expansion, NewtonConfig};
use cstr_periodic_core::Vec2;
use proptest::prelude::*;

const P: ModelParams = ModelParams::TABLE1;

fn strategy_id() -> impl proptest::strategy::Strategy<Value = StrategyId> {
    (0..8usize, 0..4usize).prop_map(|(k, r)| {
        let s = Switching::ALL[k];
        StrategyId::new(s, r % s.len()).unwrap()
    })
}

/// A feasible schedule of the given strategy with free fractions drawn from `t`.
fn feasible_schedule(id: StrategyId, t: &[f64], tau: f64) -> Option<Schedule> {
    let controls = build_strategy(id, &ControlBounds::table1()).ok()?;
    let u1: Vec<f64> = controls.iter().map(|u| u[0]).collect();
    let fam = feasible_alpha_family(&u1, 1.0).ok()?;
    let vals: Vec<f64> = fam
        .free
        .iter()
        .zip(t)
        .map(|(&i, &s)| fam.ranges[i].0 + s * (fam.ranges[i].1 - fam.ranges[i].0))
        .collect();
    let alphas = fam.complete_free(&vals).ok()?;
    Schedule::from_parts(tau, &alphas, &controls).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completed_fractions_meet_both_constraints(
        id in strategy_id(),
        t in prop::collection::vec(0.0..1.0f64, 2),
    ) {
        let s = feasible_schedule(id, &t, 0.5);
        prop_assume!(s.is_some());
        let s = s.unwrap();
        prop_assert!(iso_residual(&s, 1.0).abs() <= 1e-12);
        prop_assert!((s.alphas().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(s.alphas().iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn rotation_shifts_the_family(id in strategy_id()) {
        let b = ControlBounds::table1();
        let base = StrategyId::new(id.strategy, 0).unwrap();
        let u1 = |id| build_strategy(id, &b).unwrap().iter().map(|u| u[0]).collect::<Vec<_>>();
        let f0 = feasible_alpha_family(&u1(base), 1.0).unwrap();
        let fr = feasible_alpha_family(&u1(id), 1.0).unwrap();
        let n = f0.len();
        for k in 0..n {
            let j = (k + id.rotation) % n;
            prop_assert_eq!(fr.forced[k].is_some(), f0.forced[j].is_some());
            prop_assert!((fr.ranges[k].0 - f0.ranges[j].0).abs() < 1e-12);
            prop_assert!((fr.ranges[k].1 - f0.ranges[j].1).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_is_affine_in_the_control(
        x1 in -0.5..0.5f64, x2 in -0.5..0.5f64, u1 in 0.0..4.0f64, u2 in 0.0..2.0f64,
    ) {
        let x = Vec2::new(x1, x2);
        let f = eval_fields(&P, x).unwrap();
        let lhs = drift(&P, x, Vec2::new(u1, u2)).unwrap() - drift(&P, x, Vec2::ZERO).unwrap();
        let rhs = f.g1 * u1 + f.g2 * u2;
        prop_assert!((lhs - rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn trajectory_invariants(
        id in strategy_id(),
        t in prop::collection::vec(0.0..1.0f64, 2),
        tau in 0.1..2.0f64,
        x1 in -0.3..0.1f64,
        x2 in -0.03..0.03f64,
    ) {
        let s = feasible_schedule(id, &t, tau);
        prop_assume!(s.is_some());
        let s = s.unwrap();
        let tr = integrate(&P, Vec2::new(x1, x2), &s, 1000).unwrap();

        // exact mean of u1
        prop_assert!((tr.u1_integral() / tau - 1.0).abs() <= 1e-12);
        // cost additivity over segments
        let sum: f64 = tr.segment_costs.iter().sum();
        prop_assert!((sum - tr.cost_integral()).abs() <= 1e-10);
        // every switching time is a grid node
        let nonzero: Vec<f64> = s
            .switching_times()
            .into_iter()
            .zip(s.alphas())
            .filter(|(_, a)| *a > 0.0)
            .map(|(t, _)| t)
            .collect();
        prop_assert_eq!(tr.switch_indices.len(), nonzero.len());
        for (&i, &t) in tr.switch_indices.iter().zip(&nonzero) {
            prop_assert!((tr.samples[i].t - t).abs() <= 1e-14 * tau.max(1.0));
        }
        prop_assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn flow_composes_at_mid_period(
        id in strategy_id(),
        t in prop::collection::vec(0.0..1.0f64, 2),
        tau in 0.1..2.0f64,
    ) {
        let s = feasible_schedule(id, &t, tau);
        prop_assume!(s.is_some());
        let ctrl = s.unwrap().to_control();
        let x0 = Vec2::new(-0.2, 0.01);
        let whole = flow_control(&P, x0, &ctrl, 4000).unwrap();
        let (head, tail) = ctrl.split_at(tau / 2.0);
        let a = flow_control(&P, x0, &head, 4000).unwrap();
        let b = flow_control(&P, a.x, &tail, 4000).unwrap();
        prop_assert!((whole.x - b.x).max_abs() <= 1e-10);
        prop_assert!((whole.cost_integral - a.cost_integral - b.cost_integral).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn accepted_newton_steps_decrease_the_residual(
        two in any::<bool>(),
        tau in 0.05..0.5f64,
    ) {
        let id: StrategyId = if two { "C2" } else { "C1" }.parse().unwrap();
        let s = feasible_schedule(id, &[], tau).unwrap();
        let rep = solve_x0_expansion(&P, &s, &NewtonConfig::default(), None).unwrap();
        prop_assert!(rep.history.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(rep.residual <= 1e-10);
        let sol = shoot_periodic(&P, &s, rep.x, &NewtonConfig::default(), 4000).unwrap();
        prop_assert!(sol.defect <= 1e-9);
    }
}
