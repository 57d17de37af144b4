use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::{self, Rational};

/// A bounded interval of the real line with explicit endpoint openness.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "scalar::fraction")]
    pub lo: Rational,
    #[serde(with = "scalar::fraction")]
    pub hi: Rational,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational, lo_open: bool, hi_open: bool) -> Result<Self, Error> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "interval endpoints out of order: {lo} > {hi}"
            )));
        }
        Ok(Interval {
            lo,
            hi,
            lo_open,
            hi_open,
        })
    }

    /// `[lo, hi]`. Panics if `lo > hi`.
    pub fn closed(lo: Rational, hi: Rational) -> Self {
        Self::new(lo, hi, false, false).expect("closed interval endpoints out of order")
    }

    /// `(lo, hi)`. Panics if `lo > hi`.
    pub fn open(lo: Rational, hi: Rational) -> Self {
        Self::new(lo, hi, true, true).expect("open interval endpoints out of order")
    }

    /// `[-r, r]`.
    pub fn symmetric_closed(r: Rational) -> Self {
        Self::closed(-r.clone(), r)
    }

    /// `(-r, r)`.
    pub fn symmetric_open(r: Rational) -> Self {
        Self::open(-r.clone(), r)
    }

    pub fn closure(&self) -> Self {
        Interval {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn interior(&self) -> Self {
        Interval {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi && (self.lo_open || self.hi_open)
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let above = if self.lo_open {
            x > &self.lo
        } else {
            x >= &self.lo
        };
        let below = if self.hi_open {
            x < &self.hi
        } else {
            x <= &self.hi
        };
        above && below
    }

    /// `other ⊆ self`.
    pub fn contains_interval(&self, other: &Interval) -> bool {
        if other.is_empty() {
            return true;
        }
        let lo_ok = self.lo < other.lo || (self.lo == other.lo && (!self.lo_open || other.lo_open));
        let hi_ok = self.hi > other.hi || (self.hi == other.hi && (!self.hi_open || other.hi_open));
        lo_ok && hi_ok
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = match self.lo.cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo.clone(), self.lo_open),
            std::cmp::Ordering::Less => (other.lo.clone(), other.lo_open),
            std::cmp::Ordering::Equal => (self.lo.clone(), self.lo_open || other.lo_open),
        };
        let (hi, hi_open) = match self.hi.cmp(&other.hi) {
            std::cmp::Ordering::Less => (self.hi.clone(), self.hi_open),
            std::cmp::Ordering::Greater => (other.hi.clone(), other.hi_open),
            std::cmp::Ordering::Equal => (self.hi.clone(), self.hi_open || other.hi_open),
        };
        if lo > hi {
            return None;
        }
        let out = Interval {
            lo,
            hi,
            lo_open,
            hi_open,
        };
        (!out.is_empty()).then_some(out)
    }

    pub fn shift(&self, t: &Rational) -> Interval {
        Interval {
            lo: &self.lo + t,
            hi: &self.hi + t,
            ..self.clone()
        }
    }

    /// Widens by `left` on the low side and `right` on the high side.
    pub fn widen(&self, left: &Rational, right: &Rational) -> Interval {
        Interval {
            lo: &self.lo - left,
            hi: &self.hi + right,
            ..self.clone()
        }
    }

    /// Narrows by `d` on both sides; `None` if nothing is left.
    pub fn shrink(&self, d: &Rational) -> Option<Interval> {
        let lo = &self.lo + d;
        let hi = &self.hi - d;
        if lo > hi {
            return None;
        }
        let out = Interval {
            lo,
            hi,
            ..self.clone()
        };
        (!out.is_empty()).then_some(out)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// Parses `[a,b]`, `(a,b)`, `[a,b)`, `(a,b]`, or a bare `a,b` (closed).
impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (lo_open, rest) = match t.chars().next() {
            Some('[') => (false, &t[1..]),
            Some('(') => (true, &t[1..]),
            _ => (false, t),
        };
        let (hi_open, body) = match rest.chars().last() {
            Some(']') => (false, &rest[..rest.len() - 1]),
            Some(')') => (true, &rest[..rest.len() - 1]),
            _ => (false, rest),
        };
        let (lo, hi) = body
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("interval needs two endpoints: {s:?}")))?;
        Interval::new(scalar::parse(lo)?, scalar::parse(hi)?, lo_open, hi_open)
    }
}
