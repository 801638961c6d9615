//! Control bounds, the bang-bang vertex set and switching schedules.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Vec2;

/// Tolerance on `sum(alpha) = 1`.
pub const ALPHA_SUM_TOL: f64 = 1e-12;
/// Two u1 values closer than this are treated as equal.
const U1_EQ_TOL: f64 = 1e-12;
/// Tolerance when checking pinned fractions against the two linear constraints.
const PIN_TOL: f64 = 1e-9;

/// Box constraints on inlet concentration `v1` and flow rate `v2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlBounds {
    pub v1_min: f64,
    pub v1_max: f64,
    pub v2_min: f64,
    pub v2_max: f64,
}

impl ControlBounds {
    pub fn new(v1_min: f64, v1_max: f64, v2_min: f64, v2_max: f64) -> Result<Self> {
        let b = ControlBounds {
            v1_min,
            v1_max,
            v2_min,
            v2_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Same relative range `[1 - r, 1 + r]` on both inputs.
    pub fn symmetric(range: f64) -> Result<Self> {
        Self::new(1.0 - range, 1.0 + range, 1.0 - range, 1.0 + range)
    }

    /// +-85% around the steady state.
    pub fn table1() -> Self {
        ControlBounds {
            v1_min: 0.15,
            v1_max: 1.85,
            v2_min: 0.15,
            v2_max: 1.85,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("v1", self.v1_min, self.v1_max),
            ("v2", self.v2_min, self.v2_max),
        ] {
            if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
                return Err(Error::InvalidBounds(format!(
                    "need 0 < {name}_min <= 1 <= {name}_max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// The four corners of the admissible `(u1, u2)` set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    /// `(u1_min, u2_min)`
    MinMin,
    /// `(u1_max, u2_max)`
    MaxMax,
    /// `(u1^-, u2_max)`, low concentration at high flow
    MinusMax,
    /// `(u1^+, u2_min)`, high concentration at low flow
    PlusMin,
}

impl Vertex {
    pub const ALL: [Vertex; 4] = [
        Vertex::MinMin,
        Vertex::MaxMax,
        Vertex::MinusMax,
        Vertex::PlusMin,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Vertex::MinMin => "min/min",
            Vertex::MaxMax => "max/max",
            Vertex::MinusMax => "-/max",
            Vertex::PlusMin => "+/min",
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexSet {
    pub u_min_min: Vec2,
    pub u_max_max: Vec2,
    pub u_minus_max: Vec2,
    pub u_plus_min: Vec2,
}

impl VertexSet {
    pub fn point(&self, v: Vertex) -> Vec2 {
        match v {
            Vertex::MinMin => self.u_min_min,
            Vertex::MaxMax => self.u_max_max,
            Vertex::MinusMax => self.u_minus_max,
            Vertex::PlusMin => self.u_plus_min,
        }
    }
}

pub fn vertices_from_bounds(b: &ControlBounds) -> Result<VertexSet> {
    b.validate()?;
    Ok(VertexSet {
        u_min_min: Vec2::new(b.v1_min * b.v2_min, b.v2_min),
        u_max_max: Vec2::new(b.v1_max * b.v2_max, b.v2_max),
        u_minus_max: Vec2::new(b.v1_min * b.v2_max, b.v2_max),
        u_plus_min: Vec2::new(b.v1_max * b.v2_min, b.v2_min),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    /// Fraction of the period spent on this segment.
    pub alpha: f64,
    pub u: Vec2,
}

/// A bang-bang control over one period: at most four constant segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    tau: f64,
    segments: Vec<Segment>,
}

impl Schedule {
    pub const MAX_SEGMENTS: usize = 4;

    pub fn new(tau: f64, segments: Vec<Segment>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidSchedule(format!(
                "period must be positive, got {tau}"
            )));
        }
        if segments.is_empty() || segments.len() > Self::MAX_SEGMENTS {
            return Err(Error::InvalidSchedule(format!(
                "need 1..=4 segments, got {}",
                segments.len()
            )));
        }
        let mut sum = 0.0;
        for s in &segments {
            if !(s.alpha >= 0.0) || !s.alpha.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "negative fraction {}",
                    s.alpha
                )));
            }
            if !s.u.is_finite() {
                return Err(Error::InvalidSchedule("non-finite control value".into()));
            }
            sum += s.alpha;
        }
        if libm::fabs(sum - 1.0) > ALPHA_SUM_TOL {
            return Err(Error::InvalidSchedule(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        Ok(Schedule { tau, segments })
    }

    pub fn from_parts(tau: f64, alphas: &[f64], controls: &[Vec2]) -> Result<Self> {
        if alphas.len() != controls.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} fractions for {} controls",
                alphas.len(),
                controls.len()
            )));
        }
        Self::new(
            tau,
            alphas
                .iter()
                .zip(controls)
                .map(|(&alpha, &u)| Segment { alpha, u })
                .collect(),
        )
    }

    /// Constant control over the whole period.
    pub fn constant(tau: f64, u: Vec2) -> Result<Self> {
        Self::new(tau, vec![Segment { alpha: 1.0, u }])
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.alpha).collect()
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(tau, self.segments.clone())
    }

    /// `t_1 .. t_N`, with `t_N = tau` exactly.
    pub fn switching_times(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let n = self.segments.len();
        self.segments
            .iter()
            .enumerate()
            .map(|(j, s)| {
                acc += s.alpha;
                if j + 1 == n {
                    self.tau
                } else {
                    libm::fmin(acc * self.tau, self.tau)
                }
            })
            .collect()
    }

    /// Mean of u1 over the period.
    pub fn mean_u1(&self) -> f64 {
        self.segments.iter().map(|s| s.alpha * s.u[0]).sum()
    }

    /// Mean of u2 over the period.
    pub fn mean_u2(&self) -> f64 {
        self.segments.iter().map(|s| s.alpha * s.u[1]).sum()
    }

    pub fn to_control(&self) -> PiecewiseControl {
        PiecewiseControl {
            segments: self
                .segments
                .iter()
                .map(|s| (s.alpha * self.tau, s.u))
                .collect(),
        }
    }

    /// Checks each control value against the admissible box.
    pub fn check_bounds(&self, b: &ControlBounds) -> Result<()> {
        let tol = 1e-12;
        for s in &self.segments {
            let (u1, u2) = (s.u[0], s.u[1]);
            let v1 = u1 / u2;
            if u2 < b.v2_min - tol
                || u2 > b.v2_max + tol
                || v1 < b.v1_min - tol
                || v1 > b.v1_max + tol
            {
                return Err(Error::InvalidSchedule(format!(
                    "control ({u1}, {u2}) outside admissible box"
                )));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant control given by segment durations instead of fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseControl {
    pub segments: Vec<(f64, Vec2)>,
}

impl PiecewiseControl {
    pub fn new(segments: Vec<(f64, Vec2)>) -> Result<Self> {
        if segments.iter().any(|(d, u)| !(*d >= 0.0) || !u.is_finite()) {
            return Err(Error::InvalidSchedule("negative duration".into()));
        }
        Ok(PiecewiseControl { segments })
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|(d, _)| d).sum()
    }

    /// Control value in effect at time `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> Vec2 {
        let mut start = 0.0;
        for &(d, u) in &self.segments {
            if t < start + d {
                return u;
            }
            start += d;
        }
        self.segments.last().map(|s| s.1).unwrap_or(Vec2::ZERO)
    }

    /// Splits into the parts before and after `t`.
    pub fn split_at(&self, t: f64) -> (PiecewiseControl, PiecewiseControl) {
        let mut head = Vec::new();
        let mut tail = Vec::new();
        let mut start = 0.0;
        for &(d, u) in &self.segments {
            let end = start + d;
            if end <= t {
                head.push((d, u));
            } else if start >= t {
                tail.push((d, u));
            } else {
                head.push((t - start, u));
                tail.push((end - t, u));
            }
            start = end;
        }
        (
            PiecewiseControl { segments: head },
            PiecewiseControl { segments: tail },
        )
    }
}

/// The named switching strategies. Each starts on the max/max vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::C1,
        Strategy::C2,
        Strategy::C3,
        Strategy::C4,
        Strategy::C5,
        Strategy::C6,
        Strategy::C7,
        Strategy::C8,
    ];

    pub fn vertices(self) -> &'static [Vertex] {
        use Vertex::*;
        match self {
            Strategy::C1 => &[MaxMax, MinMin],
            Strategy::C2 => &[MaxMax, PlusMin],
            Strategy::C3 => &[MaxMax, MinMin, MinusMax],
            Strategy::C4 => &[MaxMax, MinMin, PlusMin],
            Strategy::C5 => &[MaxMax, PlusMin, MinusMax],
            Strategy::C6 => &[MaxMax, MinusMax, PlusMin],
            Strategy::C7 => &[MaxMax, PlusMin, MinMin, MinusMax],
            Strategy::C8 => &[MaxMax, MinusMax, MinMin, PlusMin],
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        self.vertices().len()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", *self as usize + 1)
    }
}

/// A strategy with an optional cyclic rotation, written `C5` or `C7+rot2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyId {
    pub strategy: Strategy,
    pub rotation: usize,
}

impl StrategyId {
    pub fn new(strategy: Strategy, rotation: usize) -> Result<Self> {
        if rotation >= strategy.len() {
            return Err(Error::UnknownStrategy(format!(
                "{strategy}+rot{rotation}: rotation must be below {}",
                strategy.len()
            )));
        }
        Ok(StrategyId { strategy, rotation })
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        let base = self.strategy.vertices();
        let n = base.len();
        (0..n).map(|j| base[(j + self.rotation) % n]).collect()
    }
}

impl From<Strategy> for StrategyId {
    fn from(strategy: Strategy) -> Self {
        StrategyId {
            strategy,
            rotation: 0,
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rotation == 0 {
            write!(f, "{}", self.strategy)
        } else {
            write!(f, "{}+rot{}", self.strategy, self.rotation)
        }
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownStrategy(String::from(s));
        let (tag, rot) = match s.split_once('+') {
            Some((tag, rest)) => {
                let digits = rest.strip_prefix("rot").ok_or_else(unknown)?;
                (tag, digits.parse::<usize>().map_err(|_| unknown())?)
            }
            None => (s, 0),
        };
        let num = tag
            .strip_prefix('C')
            .or_else(|| tag.strip_prefix('c'))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(unknown)?;
        let strategy = *Strategy::ALL.get(num.wrapping_sub(1)).ok_or_else(unknown)?;
        StrategyId::new(strategy, rot)
    }
}

/// Control values of a strategy in segment order.
pub fn build_strategy(id: StrategyId, b: &ControlBounds) -> Result<Vec<Vec2>> {
    let vs = vertices_from_bounds(b)?;
    Ok(id.vertices().into_iter().map(|v| vs.point(v)).collect())
}

/// The set of switching fractions compatible with a prescribed mean of u1.
///
/// Solves `sum(alpha) = 1`, `sum(alpha_j u1_j) = u1_bar` over `alpha >= 0`.
/// Fractions that are constant on the whole feasible set are reported as
/// forced; of the rest, [`AlphaFamily::free`] names a choice of indices that,
/// once fixed, determine the others.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaFamily {
    u1: Vec<f64>,
    u1_bar: f64,
    /// Value of each fraction if it is the same for every feasible schedule.
    pub forced: Vec<Option<f64>>,
    /// Range of each fraction over the feasible set (closed).
    pub ranges: Vec<(f64, f64)>,
    /// Indices (0-based) to pin; the remaining fractions follow from them.
    pub free: Vec<usize>,
}

impl AlphaFamily {
    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    pub fn u1_values(&self) -> &[f64] {
        &self.u1
    }

    pub fn u1_bar(&self) -> f64 {
        self.u1_bar
    }

    /// Number of free directions.
    pub fn dimension(&self) -> usize {
        self.free.len()
    }

    /// True when every feasible choice zeroes out some segment, i.e. the
    /// strategy only meets the constraint by dropping one of its vertices.
    pub fn is_degenerate(&self) -> bool {
        self.ranges.iter().any(|&(_, hi)| hi <= ALPHA_SUM_TOL)
    }

    /// Completes a full fraction vector from pinned `(index, value)` pairs.
    pub fn complete(&self, pinned: &[(usize, f64)]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut values: Vec<Option<f64>> = vec![None; n];
        for &(i, v) in pinned {
            if i >= n {
                return Err(Error::InvalidSchedule(format!(
                    "pinned index {} beyond {n} segments",
                    i + 1
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSchedule("non-finite pinned fraction".into()));
            }
            values[i] = Some(v);
        }
        for (v, f) in values.iter_mut().zip(&self.forced) {
            if v.is_none() {
                *v = *f;
            }
        }
        let unknown: Vec<usize> = (0..n).filter(|&i| values[i].is_none()).collect();
        let mut rhs_sum = 1.0;
        let mut rhs_mean = self.u1_bar;
        for (i, v) in values.iter().enumerate() {
            if let Some(a) = v {
                rhs_sum -= a;
                rhs_mean -= a * self.u1[i];
            }
        }
        match unknown.as_slice() {
            [] => {
                if libm::fabs(rhs_sum) > PIN_TOL || libm::fabs(rhs_mean) > PIN_TOL {
                    return Err(Error::Infeasible(format!(
                        "pinned fractions miss the constraints by ({rhs_sum:e}, {rhs_mean:e})"
                    )));
                }
            }
            &[i] => {
                let a = rhs_sum;
                if libm::fabs(rhs_mean - a * self.u1[i]) > PIN_TOL {
                    return Err(Error::Infeasible(format!(
                        "pinned fractions leave mean u1 off by {:e}",
                        rhs_mean - a * self.u1[i]
                    )));
                }
                values[i] = Some(a);
            }
            &[i, j] => {
                let (ui, uj) = (self.u1[i], self.u1[j]);
                if libm::fabs(ui - uj) <= U1_EQ_TOL {
                    return Err(Error::Underdetermined { free: 1 });
                }
                let ai = (rhs_mean - uj * rhs_sum) / (ui - uj);
                values[i] = Some(ai);
                values[j] = Some(rhs_sum - ai);
            }
            more => {
                return Err(Error::Underdetermined {
                    free: more.len() - 2,
                })
            }
        }
        let mut out: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        for a in out.iter_mut() {
            if *a < -PIN_TOL {
                return Err(Error::Infeasible(format!("fraction {a} is negative")));
            }
            if *a < 0.0 {
                *a = 0.0;
            }
        }
        Ok(out)
    }

    /// Completes from values for [`AlphaFamily::free`], in that order.
    pub fn complete_free(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.free.len() {
            return Err(Error::Underdetermined {
                free: self.free.len().saturating_sub(values.len()),
            });
        }
        let pinned: Vec<(usize, f64)> = self
            .free
            .iter()
            .copied()
            .zip(values.iter().copied())
            .collect();
        self.complete(&pinned)
    }
}

/// Basic feasible points of `{alpha >= 0, sum = 1, sum alpha u1 = u1_bar}`:
/// every vertex of that polytope has at most two nonzero entries.
fn basic_points(u1: &[f64], u1_bar: f64) -> Vec<Vec<f64>> {
    let n = u1.len();
    let mut pts = Vec::new();
    for a in 0..n {
        if libm::fabs(u1[a] - u1_bar) <= U1_EQ_TOL {
            let mut p = vec![0.0; n];
            p[a] = 1.0;
            pts.push(p);
        }
        for b in (a + 1)..n {
            let d = u1[a] - u1[b];
            if libm::fabs(d) <= U1_EQ_TOL {
                continue;
            }
            let wa = (u1_bar - u1[b]) / d;
            if wa > 0.0 && wa < 1.0 {
                let mut p = vec![0.0; n];
                p[a] = wa;
                p[b] = 1.0 - wa;
                pts.push(p);
            }
        }
    }
    pts
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (pos, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[pos + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Describes the feasible switching fractions for segments with the given u1.
pub fn feasible_alpha_family(u1: &[f64], u1_bar: f64) -> Result<AlphaFamily> {
    let n = u1.len();
    if n == 0 || n > Schedule::MAX_SEGMENTS {
        return Err(Error::InvalidSchedule(format!(
            "need 1..=4 segments, got {n}"
        )));
    }
    let pts = basic_points(u1, u1_bar);
    if pts.is_empty() {
        return Err(Error::Infeasible(format!(
            "mean u1 = {u1_bar} outside the hull of {u1:?}"
        )));
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for p in &pts {
        for (r, &a) in ranges.iter_mut().zip(p) {
            r.0 = libm::fmin(r.0, a);
            r.1 = libm::fmax(r.1, a);
        }
    }
    let forced: Vec<Option<f64>> = ranges
        .iter()
        .map(|&(lo, hi)| (hi - lo <= ALPHA_SUM_TOL).then_some(0.5 * (lo + hi)))
        .collect();

    let open: Vec<usize> = (0..n).filter(|&i| forced[i].is_none()).collect();
    let rank = match open.as_slice() {
        [] => 0,
        [first, rest @ ..] => {
            if rest
                .iter()
                .any(|&j| libm::fabs(u1[j] - u1[*first]) > U1_EQ_TOL)
            {
                2
            } else {
                1
            }
        }
    };
    let dim = open.len() - rank;
    // Prefer leaving the last open fraction (and with two constraints also
    // the first) determined, then the earliest remaining indices as free.
    let m = open.len();
    let mut candidates = Vec::new();
    if rank == 2 && m >= 2 {
        candidates.extend(combinations(&open[1..m - 1], dim));
    }
    if m >= 1 {
        candidates.extend(combinations(&open[..m - 1], dim));
    }
    candidates.extend(combinations(&open, dim));
    let free = candidates
        .into_iter()
        .find(|free| {
            let det: Vec<usize> = open.iter().copied().filter(|i| !free.contains(i)).collect();
            match det.as_slice() {
                [a, b] => libm::fabs(u1[*a] - u1[*b]) > U1_EQ_TOL,
                _ => true,
            }
        })
        .unwrap_or_default();
    Ok(AlphaFamily {
        u1: u1.to_vec(),
        u1_bar,
        forced,
        ranges,
        free,
    })
}

/// Closed-form fraction of the first segment for a two-segment schedule.
pub fn alpha1_closed_form_n2(u11: f64, u12: f64, u1_bar: f64) -> Result<f64> {
    if libm::fabs(u11 - u12) <= U1_EQ_TOL {
        return Err(Error::Degenerate);
    }
    Ok((u1_bar - u12) / (u11 - u12))
}

/// `sum(alpha_j u1_j) - u1_bar`
pub fn iso_residual(schedule: &Schedule, u1_bar: f64) -> f64 {
    schedule.mean_u1() - u1_bar
}

/// Grid `k / 12` restricted to the open interval `(lo, hi)`.
pub fn twelfths_within(lo: f64, hi: f64) -> Vec<f64> {
    (1..12)
        .map(|k| k as f64 / 12.0)
        .filter(|&a| a > lo + ALPHA_SUM_TOL && a < hi - ALPHA_SUM_TOL)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    Strategy {
        id: StrategyId,
        family: AlphaFamily,
    },
    /// A constant control already meets the mean; no switching needed.
    SingleVertex(Vertex),
}

/// All strategies and rotations that can meet the mean of u1 without
/// dropping a segment, plus any vertex that meets it on its own.
pub fn enumerate_strategies(b: &ControlBounds, u1_bar: f64) -> Result<Vec<Candidate>> {
    let vs = vertices_from_bounds(b)?;
    let mut out = Vec::new();
    for strategy in Strategy::ALL {
        for rotation in 0..strategy.len() {
            let id = StrategyId { strategy, rotation };
            let u1: Vec<f64> = id.vertices().iter().map(|&v| vs.point(v)[0]).collect();
            match feasible_alpha_family(&u1, u1_bar) {
                Ok(family) if !family.is_degenerate() => {
                    out.push(Candidate::Strategy { id, family })
                }
                Ok(_) | Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    for v in Vertex::ALL {
        if libm::fabs(vs.point(v)[0] - u1_bar) <= U1_EQ_TOL {
            out.push(Candidate::SingleVertex(v));
        }
    }
    Ok(out)
}
