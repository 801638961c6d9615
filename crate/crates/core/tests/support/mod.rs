//! Independent oracles shared by the core tests and the acceptance suite.
#![allow(dead_code)]

use cstr_periodic_core::schedule::PiecewiseControl;
use cstr_periodic_core::{Mat2, Vec2};

pub fn central_jacobian(f: impl Fn(Vec2) -> Vec2, x: Vec2, h: f64) -> Mat2 {
    let mut cols = [Vec2::ZERO; 2];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut e = Vec2::ZERO;
        e[k] = h;
        *col = (f(x + e) - f(x - e)) * (0.5 / h);
    }
    Mat2::from_columns(cols[0], cols[1])
}

/// Fourth-order five-point stencil.
pub fn stencil_jacobian(f: impl Fn(Vec2) -> Vec2, x: Vec2, h: f64) -> Mat2 {
    let mut cols = [Vec2::ZERO; 2];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut e = Vec2::ZERO;
        e[k] = h;
        *col = (f(x - e * 2.0) - f(x - e) * 8.0 + f(x + e) * 8.0 - f(x + e * 2.0))
            * (1.0 / (12.0 * h));
    }
    Mat2::from_columns(cols[0], cols[1])
}

pub fn max_entry(m: &Mat2) -> f64 {
    m.0.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Adaptive Simpson on each piece between `breaks`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    pts.push(b);
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            // sample strictly inside the piece so the right-continuous control
            // is evaluated on the correct side of each switch
            let eps = 1e-14 * (w[1] - w[0]);
            let g = |t: f64| f(t.clamp(w[0] + eps, w[1] - eps));
            let (fa, fb) = (g(w[0]), g(w[1]));
            let (whole, m, fm) = simpson(&g, w[0], fa, w[1], fb);
            rec(&g, w[0], fa, w[1], fb, whole, m, fm, 1e-14, 30)
        })
        .sum()
}

/// `V_w(t) = int_0^t u_{w0}(s) V_{w[1..]}(s) ds` with `u_0 = 1`.
pub fn nested(ctrl: &PiecewiseControl, breaks: &[f64], word: &[u8], t: f64) -> f64 {
    match word.split_first() {
        None => 1.0,
        Some((&i, rest)) => {
            let f = |s: f64| {
                let u = ctrl.value_at(s);
                let ui = if i == 0 { 1.0 } else { u[i as usize - 1] };
                ui * nested(ctrl, breaks, rest, s)
            };
            integrate(&f, 0.0, t, breaks)
        }
    }
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
