//! Third-order Chen-Fliess expansion for the control-affine reactor model.
//!
//! Fields are indexed `0 -> f0` (with `u0 = 1`), `1 -> g1`, `2 -> g2`. For a
//! word `w = i j l` the iterated integral is
//!
//! ```text
//! V_ijl(t) = int_0^t u_i(s) int_0^s u_j(p) int_0^p u_l(r) dr dp ds
//! ```
//!
//! so the first letter is the outermost (latest) integration. The expansion is
//!
//! ```text
//! x(t) = x0 + sum g_i V_i + sum (L_gj g_i) V_ij + sum (L_gl L_gj g_i) V_ijl + O(t^4)
//! ```
//!
//! with `L_a b = (db/dx) a`, everything evaluated at `x0`.
//!
//! The periodicity residual and cost estimate below expand the flow forward
//! from `t = 0` over the first two segments and backward from `t = tau` over
//! the last two, and match the two expansions at the middle switching time.
//! That is where the mixed signs of the `tau/2` layer come from.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::model::{eval_fields, field_jacobian, lie, ModelParams, State};
use crate::schedule::{PiecewiseControl, Schedule};

/// Relative step of the outer finite difference for second-order
/// directional derivatives.
pub const SECOND_ORDER_FD_STEP: f64 = 1e-5;

/// A multi-index over `{0, 1, 2}` of length at most 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: [u8; 3],
    len: u8,
}

impl Word {
    pub const EMPTY: Word = Word {
        letters: [0; 3],
        len: 0,
    };

    pub fn new(letters: &[u8]) -> Result<Self> {
        if letters.len() > 3 || letters.iter().any(|&l| l > 2) {
            return Err(Error::InvalidSchedule(alloc::format!(
                "word {letters:?} must have at most 3 letters from 0..=2"
            )));
        }
        let mut w = Word::EMPTY;
        w.letters[..letters.len()].copy_from_slice(letters);
        w.len = letters.len() as u8;
        Ok(w)
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All words of length 1 to 3, shortest first, lexicographic within a length.
    pub fn all() -> impl Iterator<Item = Word> {
        let ones = (0..3u8).map(|i| [i, 0, 0, 1]);
        let twos = (0..9u8).map(|k| [k / 3, k % 3, 0, 2]);
        let threes = (0..27u8).map(|k| [k / 9, (k / 3) % 3, k % 3, 3]);
        ones.chain(twos).chain(threes).map(|a| Word {
            letters: [a[0], a[1], a[2]],
            len: a[3],
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<u8> = s.bytes().map(|b| b.wrapping_sub(b'0')).collect();
        Word::new(&letters)
    }
}

/// Values of all iterated integrals of length 1 to 3 at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct IteratedIntegrals {
    t: f64,
    v1: [f64; 3],
    v2: [[f64; 3]; 3],
    v3: [[[f64; 3]; 3]; 3],
}

impl IteratedIntegrals {
    fn zero() -> Self {
        IteratedIntegrals {
            t: 0.0,
            v1: [0.0; 3],
            v2: [[0.0; 3]; 3],
            v3: [[[0.0; 3]; 3]; 3],
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `V_w`, with `V_empty = 1`.
    pub fn get(&self, w: Word) -> f64 {
        match w.letters() {
            [] => 1.0,
            &[i] => self.v1[i as usize],
            &[i, j] => self.v2[i as usize][j as usize],
            &[i, j, l] => self.v3[i as usize][j as usize][l as usize],
            _ => unreachable!(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        Word::all().map(move |w| (w, self.get(w)))
    }

    /// Advances every integral across an interval of length `h` on which the
    /// control is constant: each `V_w` is a polynomial in the elapsed time.
    fn advance(&mut self, h: f64, u: Vec2) {
        let c = [1.0, u[0], u[1]];
        let (h2, h3) = (h * h / 2.0, h * h * h / 6.0);
        let (old1, old2) = (self.v1, self.v2);
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    self.v3[i][j][l] += c[i] * (old2[j][l] * h + c[j] * (old1[l] * h2 + c[l] * h3));
                }
                self.v2[i][j] += c[i] * (old1[j] * h + c[j] * h2);
            }
            self.v1[i] += c[i] * h;
        }
        self.t += h;
    }
}

/// Iterated integrals of a piecewise-constant control at time `t`, exact up to
/// rounding.
pub fn iterated_integrals(ctrl: &PiecewiseControl, t: f64) -> Result<IteratedIntegrals> {
    let total = ctrl.total_duration();
    if !(t >= 0.0) || t > total * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::OutOfRange { t, max: total });
    }
    let mut v = IteratedIntegrals::zero();
    let mut start = 0.0;
    for &(d, u) in &ctrl.segments {
        if start >= t {
            break;
        }
        let h = libm::fmin(d, t - start);
        v.advance(h, u);
        start += d;
    }
    Ok(v)
}

/// Field values and directional derivatives of `f0, g1, g2` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCoefficients {
    pub x0: State,
    /// `g_i(x0)`
    pub first: [Vec2; 3],
    /// `second[i][j] = (L_gj g_i)(x0)`
    pub second: [[Vec2; 3]; 3],
    /// `third[i][j][l] = (L_gl L_gj g_i)(x0)`
    pub third: [[[Vec2; 3]; 3]; 3],
}

/// `L_gj g_i` at `x` for all `i, j`, from the analytic Jacobians.
fn first_lie_table(params: &ModelParams, x: State) -> Result<[[Vec2; 3]; 3]> {
    let f = eval_fields(params, x)?;
    let jac: [Mat2; 3] = [
        field_jacobian(params, 0, x)?,
        field_jacobian(params, 1, x)?,
        field_jacobian(params, 2, x)?,
    ];
    let mut out = [[Vec2::ZERO; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = lie(&jac[i], f.get(j));
        }
    }
    Ok(out)
}

impl ExpansionCoefficients {
    pub fn at(params: &ModelParams, x0: State) -> Result<Self> {
        let f = eval_fields(params, x0)?;
        let first = [f.f0, f.g1, f.g2];
        let second = first_lie_table(params, x0)?;
        let scale = libm::fmax(1.0, x0.norm()) * SECOND_ORDER_FD_STEP;
        let mut third = [[[Vec2::ZERO; 3]; 3]; 3];
        for (l, dir) in first.iter().enumerate() {
            let len = dir.norm();
            if len == 0.0 {
                continue;
            }
            // one pair of table evaluations serves every (i, j) for this l
            let eps = scale / len;
            let plus = first_lie_table(params, x0 + *dir * eps)?;
            let minus = first_lie_table(params, x0 - *dir * eps)?;
            for i in 0..3 {
                for j in 0..3 {
                    third[i][j][l] = (plus[i][j] - minus[i][j]) * (0.5 / eps);
                }
            }
        }
        Ok(ExpansionCoefficients {
            x0,
            first,
            second,
            third,
        })
    }

    /// `f_u = f0 + u1 g1 + u2 g2`
    pub fn field(&self, u: Vec2) -> Vec2 {
        let c = [1.0, u[0], u[1]];
        (0..3).fold(Vec2::ZERO, |acc, i| acc + self.first[i] * c[i])
    }

    /// `L_{f_a} f_b`
    pub fn lie1(&self, a: Vec2, b: Vec2) -> Vec2 {
        let (ca, cb) = ([1.0, a[0], a[1]], [1.0, b[0], b[1]]);
        let mut out = Vec2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out += self.second[i][j] * (cb[i] * ca[j]);
            }
        }
        out
    }

    /// `L_{f_a} L_{f_b} f_c`
    pub fn lie2(&self, a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
        let (ca, cb, cc) = ([1.0, a[0], a[1]], [1.0, b[0], b[1]], [1.0, c[0], c[1]]);
        let mut out = Vec2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    out += self.third[i][j][l] * (cc[i] * cb[j] * ca[l]);
                }
            }
        }
        out
    }

    /// Truncated expansion given precomputed iterated integrals.
    pub fn evaluate(&self, v: &IteratedIntegrals) -> Vec2 {
        let mut x = self.x0;
        for i in 0..3 {
            x += self.first[i] * v.v1[i];
            for j in 0..3 {
                x += self.second[i][j] * v.v2[i][j];
                for l in 0..3 {
                    x += self.third[i][j][l] * v.v3[i][j][l];
                }
            }
        }
        x
    }
}

/// Third-order Chen-Fliess approximation of the state at time `t`.
pub fn fliess_state(
    params: &ModelParams,
    x0: State,
    ctrl: &PiecewiseControl,
    t: f64,
) -> Result<Vec2> {
    let v = iterated_integrals(ctrl, t)?;
    if t == 0.0 {
        return Ok(x0);
    }
    Ok(ExpansionCoefficients::at(params, x0)?.evaluate(&v))
}

/// Fractions and controls in the four expansion slots. Slots 0 and 1 are
/// expanded forward from `t = 0`, slots 2 and 3 backward from `t = tau`;
/// the first `ceil(n / 2)` segments go forward.
fn padded(schedule: &Schedule) -> ([f64; 4], [Vec2; 4]) {
    let segs = schedule.segments();
    let forward = segs.len().div_ceil(2);
    let mut a = [0.0; 4];
    let mut u = [segs[0].u; 4];
    for (k, s) in segs.iter().enumerate() {
        let slot = if k < forward { k } else { 2 + k - forward };
        a[slot] = s.alpha;
        u[slot] = s.u;
    }
    (a, u)
}

/// Periodicity condition `x(tau) = x0` reduced to an algebraic equation in
/// `x0`, truncated after the `tau^2` layer (the remainder is `O(tau^3)`).
///
/// Segments of one schedule are split between an expansion forward from the
/// start and one backward from the end of the period, so that a two-segment
/// schedule has no cross terms.
pub fn periodicity_residual(params: &ModelParams, x0: State, schedule: &Schedule) -> Result<Vec2> {
    let coeffs = ExpansionCoefficients::at(params, x0)?;
    Ok(periodicity_residual_with(&coeffs, schedule))
}

pub fn periodicity_residual_with(c: &ExpansionCoefficients, schedule: &Schedule) -> Vec2 {
    let tau = schedule.tau();
    let ([a1, a2, a3, a4], [u1, u2, u3, u4]) = padded(schedule);

    let zeroth = c.field(u1) * a1 + c.field(u2) * a2 + c.field(u3) * a3 + c.field(u4) * a4;

    let first = c.lie1(u1, u1) * (a1 * a1) + c.lie1(u2, u2) * (a2 * a2)
        - c.lie1(u3, u3) * (a3 * a3)
        - c.lie1(u4, u4) * (a4 * a4)
        + c.lie1(u1, u2) * (2.0 * a1 * a2)
        - c.lie1(u4, u3) * (2.0 * a3 * a4);

    let second = c.lie2(u1, u1, u1) * (a1 * a1 * a1)
        + c.lie2(u2, u2, u2) * (a2 * a2 * a2)
        + c.lie2(u3, u3, u3) * (a3 * a3 * a3)
        + c.lie2(u4, u4, u4) * (a4 * a4 * a4)
        + (c.lie2(u1, u1, u2) * a1 + c.lie2(u1, u2, u2) * a2) * (3.0 * a1 * a2)
        + (c.lie2(u4, u4, u3) * a4 + c.lie2(u4, u3, u3) * a3) * (3.0 * a3 * a4);

    zeroth + first * (tau / 2.0) + second * (tau * tau / 6.0)
}

/// Truncated estimate of `J = (1/tau) int (x1 + 1) u2 dt` from the expansion at `x0`.
///
/// Returns `mean(u2) + X1`, where `X` approximates `(1/tau) int x u2 dt`
/// through the `tau^3` term. The `X` series uses only the first two segments
/// (`alpha1` forward, `1 - alpha1` backward), so it is exact to that order for
/// two-segment schedules only.
pub fn cost_estimate(params: &ModelParams, x0: State, schedule: &Schedule) -> Result<f64> {
    let c = ExpansionCoefficients::at(params, x0)?;
    Ok(cost_estimate_with(&c, schedule))
}

pub fn cost_estimate_with(c: &ExpansionCoefficients, schedule: &Schedule) -> f64 {
    let tau = schedule.tau();
    let segs = schedule.segments();
    let a1 = segs[0].alpha;
    let b1 = 1.0 - a1;
    let (u1, u2) = (segs[0].u, segs.get(1).map_or(segs[0].u, |s| s.u));
    let mean_u2 = schedule.mean_u2();
    let (w1, w2) = (u1[1], u2[1]);

    let x = c.x0 * mean_u2
        + (c.field(u1) * (a1 * a1 * w1) - c.field(u2) * (b1 * b1 * w2)) * (tau / 2.0)
        + (c.lie1(u1, u1) * (a1 * a1 * a1 * w1) + c.lie1(u2, u2) * (b1 * b1 * b1 * w2))
            * (tau * tau / 6.0)
        + (c.lie2(u1, u1, u1) * (a1 * a1 * a1 * a1 * w1)
            - c.lie2(u2, u2, u2) * (b1 * b1 * b1 * b1 * w2))
            * (tau * tau * tau / 24.0);
    mean_u2 + x[0]
}
