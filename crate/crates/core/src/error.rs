use thiserror::Error;

use crate::interval::Interval;
use crate::scalar::Rational;

#[derive(Debug, Error)]
pub enum Error {
    #[error("atom at {position} (mass {mass}) lies outside window {window}")]
    AtomOutsideWindow {
        position: Box<Rational>,
        mass: Box<Rational>,
        window: Box<Interval>,
    },
    #[error("windows {0} and {1} do not intersect")]
    EmptyWindow(Box<Interval>, Box<Interval>),
    #[error("interval {requested} is not inside the faithful window {window}")]
    OutsideWindow {
        requested: Box<Interval>,
        window: Box<Interval>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stage {stage} would hold {projected} atoms, above the cap of {cap}")]
    AtomCap {
        stage: u32,
        projected: u128,
        cap: usize,
    },
    #[error("stage stability violated on {window}: stage {stage} and stage {next} disagree")]
    StabilityViolation {
        window: Box<Interval>,
        stage: u32,
        next: u32,
    },
    #[error("{0} is not an ancestor atom for the requested cluster")]
    NotAnAncestor(Box<Rational>),
    #[error("cluster certificate failed: {0}")]
    ClusterCheck(String),
    #[error("harness precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn outside_window(requested: &Interval, window: &Interval) -> Self {
        Error::OutsideWindow {
            requested: Box::new(requested.clone()),
            window: Box::new(window.clone()),
        }
    }

    pub(crate) fn empty_window(a: &Interval, b: &Interval) -> Self {
        Error::EmptyWindow(Box::new(a.clone()), Box::new(b.clone()))
    }
}
