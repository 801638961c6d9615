use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A state left the region 1 + x_i > 0 where the power law and the
    /// Arrhenius term are defined.
    Domain {
        x1: f64,
        x2: f64,
    },
    /// Same as [`Error::Domain`] but raised from inside an integration.
    DomainExit {
        t: f64,
        x1: f64,
        x2: f64,
    },
    InvalidParams(String),
    InvalidBounds(String),
    InvalidSchedule(String),
    /// Two segments share the same u1, so time-splitting cannot move the mean.
    Degenerate,
    /// The requested mean of u1 lies outside the hull of the segment values,
    /// or pinned fractions are inconsistent with it.
    Infeasible(String),
    /// Pinned fractions leave free directions (or pin too many).
    Underdetermined {
        free: usize,
    },
    UnknownStrategy(String),
    OutOfRange {
        t: f64,
        max: f64,
    },
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    /// Damped Newton could not find a step that decreases the residual.
    Stalled {
        iterations: usize,
        residual: f64,
    },
    SingularJacobian,
    EmptyTrajectory,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { x1, x2 } => {
                write!(f, "state ({x1}, {x2}) outside domain 1 + x_i > 0")
            }
            Error::DomainExit { t, x1, x2 } => {
                write!(f, "trajectory left domain at t = {t}: state ({x1}, {x2})")
            }
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::InvalidBounds(msg) => write!(f, "invalid control bounds: {msg}"),
            Error::InvalidSchedule(msg) => write!(f, "invalid schedule: {msg}"),
            Error::Degenerate => write!(f, "degenerate split: both segments have equal u1"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Underdetermined { free } => {
                write!(f, "switching fractions underdetermined ({free} free)")
            }
            Error::UnknownStrategy(s) => write!(f, "unknown strategy `{s}`"),
            Error::OutOfRange { t, max } => write!(f, "time {t} outside [0, {max}]"),
            Error::NoConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "newton did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Stalled {
                iterations,
                residual,
            } => write!(
                f,
                "newton stalled at iteration {iterations}: no descent step (residual {residual:e})"
            ),
            Error::SingularJacobian => write!(f, "singular jacobian"),
            Error::EmptyTrajectory => write!(f, "trajectory has zero duration"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// True for failures of an iterative solve, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Stalled { .. }
                | Error::SingularJacobian
                | Error::DomainExit { .. }
        )
    }
}
