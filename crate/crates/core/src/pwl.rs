//! Compactly supported piecewise-linear functions with rational knots.
//!
//! These are the test functions of the crate: the trapezoid bumps `φ_j`
//! and the triangle `f` supported in `[-1/6, 1/6]`. Convolving one with a
//! finite discrete measure gives another piecewise-linear function, and the
//! supremum of a piecewise-linear function over an interval is attained at
//! a knot or an endpoint, so every supremum below is exact.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::DiscreteMeasure;
use crate::scalar::{self, frac, int, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knot {
    #[serde(with = "scalar::fraction")]
    pub x: Rational,
    #[serde(with = "scalar::fraction")]
    pub value: Rational,
}

/// Linear interpolation between knots with strictly increasing `x`; zero
/// outside `[first.x, last.x]`.
///
/// A test function has zero values at both ends, which makes it continuous
/// on all of ℝ. Convolutions restricted to a window keep whatever end values
/// they have; they are only meaningful on that window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPwl")]
pub struct PiecewiseLinearFn {
    knots: Vec<Knot>,
}

#[derive(Deserialize)]
struct RawPwl {
    knots: Vec<Knot>,
}

impl TryFrom<RawPwl> for PiecewiseLinearFn {
    type Error = Error;

    fn try_from(raw: RawPwl) -> Result<Self> {
        PiecewiseLinearFn::from_knots(raw.knots)
    }
}

impl PiecewiseLinearFn {
    pub fn from_knots(knots: Vec<Knot>) -> Result<Self> {
        if let Some(w) = knots.windows(2).find(|w| w[0].x >= w[1].x) {
            return Err(Error::InvalidArgument(format!(
                "knots must be strictly increasing: {} then {}",
                w[0].x, w[1].x
            )));
        }
        Ok(PiecewiseLinearFn { knots })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Rational, Rational)>) -> Result<Self> {
        Self::from_knots(
            pairs
                .into_iter()
                .map(|(x, value)| Knot { x, value })
                .collect(),
        )
    }

    /// A test function: at least two knots and zero at both ends.
    pub fn compact(pairs: impl IntoIterator<Item = (Rational, Rational)>) -> Result<Self> {
        let f = Self::from_pairs(pairs)?;
        if !f.is_compactly_supported() {
            return Err(Error::InvalidArgument(
                "a test function needs two or more knots and zero end values".into(),
            ));
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        PiecewiseLinearFn { knots: Vec::new() }
    }

    /// Height-1 triangle on `[-half_width, half_width]`.
    pub fn triangle(half_width: Rational) -> Result<Self> {
        if !half_width.is_positive() {
            return Err(Error::InvalidArgument(
                "triangle half-width must be positive".into(),
            ));
        }
        Self::compact([
            (-half_width.clone(), int(0)),
            (int(0), int(1)),
            (half_width, int(0)),
        ])
    }

    /// The default test function: height 1, support `[-1/6, 1/6]`.
    pub fn standard_triangle() -> Self {
        Self::triangle(frac(1, 6)).expect("1/6 is positive")
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn is_compactly_supported(&self) -> bool {
        match (self.knots.first(), self.knots.last()) {
            (Some(a), Some(b)) => self.knots.len() >= 2 && a.value.is_zero() && b.value.is_zero(),
            _ => true,
        }
    }

    /// `[first knot, last knot]`, or `None` for the zero function.
    pub fn support(&self) -> Option<Interval> {
        Some(Interval::closed(
            self.knots.first()?.x.clone(),
            self.knots.last()?.x.clone(),
        ))
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let i = self.knots.partition_point(|k| &k.x < x);
        if i == self.knots.len() {
            return Rational::zero();
        }
        let right = &self.knots[i];
        if &right.x == x {
            return right.value.clone();
        }
        if i == 0 {
            return Rational::zero();
        }
        let left = &self.knots[i - 1];
        let t = (x - &left.x) / (&right.x - &left.x);
        &left.value + t * (&right.value - &left.value)
    }

    pub fn shift(&self, t: &Rational) -> Self {
        PiecewiseLinearFn {
            knots: self
                .knots
                .iter()
                .map(|k| Knot {
                    x: &k.x + t,
                    value: k.value.clone(),
                })
                .collect(),
        }
    }

    /// Largest absolute slope.
    pub fn lipschitz(&self) -> Rational {
        self.knots
            .windows(2)
            .map(|w| ((&w[1].value - &w[0].value) / (&w[1].x - &w[0].x)).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Drops interior knots lying on the segment through their neighbours.
    pub fn simplify(&self) -> Self {
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len());
        for k in &self.knots {
            while out.len() >= 2 {
                let a = &out[out.len() - 2];
                let b = &out[out.len() - 1];
                let collinear =
                    (&b.value - &a.value) * (&k.x - &a.x) == (&k.value - &a.value) * (&b.x - &a.x);
                if collinear {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(k.clone());
        }
        PiecewiseLinearFn { knots: out }
    }
}

/// `φ_j = (2v)^{-1} 1_{[-v,v]} ⋆ 1_{[-3jv,3jv]}`: equal to 1 on
/// `[-(3j-1)v, (3j-1)v]`, 0 outside `[-(3j+1)v, (3j+1)v]`, linear between.
pub fn bump(v: &Rational, j: u32) -> Result<PiecewiseLinearFn> {
    if !v.is_positive() || j == 0 {
        return Err(Error::InvalidArgument(format!(
            "bump needs v > 0 and j >= 1, got v={v}, j={j}"
        )));
    }
    let inner = v * int(3 * j as i64 - 1);
    let outer = v * int(3 * j as i64 + 1);
    PiecewiseLinearFn::compact([
        (-outer.clone(), int(0)),
        (-inner.clone(), int(1)),
        (inner, int(1)),
        (outer, int(0)),
    ])
}

/// `(f⋆μ)(x) = Σ_λ f(x-λ) μ(λ)` on `window`.
///
/// Fails unless `x - supp f` stays inside the measure's window for every
/// `x` in `window`. The result has a knot at each endpoint of `window` and
/// at every `λ + b` (`b` a knot of `f`) inside it.
pub fn convolve(
    f: &PiecewiseLinearFn,
    mu: &DiscreteMeasure,
    window: &Interval,
) -> Result<PiecewiseLinearFn> {
    if !f.is_compactly_supported() {
        return Err(Error::InvalidArgument(
            "convolution needs a compactly supported continuous test function".into(),
        ));
    }
    let Some(supp) = f.support() else {
        return PiecewiseLinearFn::from_pairs([
            (window.lo.clone(), int(0)),
            (window.hi.clone(), int(0)),
        ])
        .map(|g| g.simplify());
    };
    let reach = window.closure().widen(&supp.hi, &-&supp.lo);
    if !mu.window().contains_interval(&reach) {
        return Err(Error::outside_window(&reach, mu.window()));
    }
    let closed = window.closure();
    // Each atom bends the slope of f⋆μ at λ + b by μ(λ) times the slope
    // change of f at b; sweep those events left to right.
    let slopes: Vec<Rational> = f
        .knots()
        .windows(2)
        .map(|w| (&w[1].value - &w[0].value) / (&w[1].x - &w[0].x))
        .collect();
    let bends: Vec<Rational> = (0..f.knots().len())
        .map(|i| {
            let right = slopes.get(i).cloned().unwrap_or_else(Rational::zero);
            let left = if i == 0 {
                Rational::zero()
            } else {
                slopes[i - 1].clone()
            };
            right - left
        })
        .collect();
    let mut events: Vec<(Rational, Rational)> = Vec::new();
    for atom in mu.atoms_in(&reach) {
        for (k, bend) in f.knots().iter().zip(&bends) {
            if !bend.is_zero() {
                events.push((&atom.position + &k.x, bend * &atom.mass));
            }
        }
    }
    events.sort_by(|a, b| a.0.cmp(&b.0));

    let mut value = convolve_at(f, &supp, mu, &closed.lo);
    let mut slope = Rational::zero();
    let mut x = closed.lo.clone();
    let mut knots = Vec::new();
    let mut i = 0;
    while i < events.len() && events[i].0 <= closed.lo {
        slope += &events[i].1;
        i += 1;
    }
    knots.push(Knot {
        x: x.clone(),
        value: value.clone(),
    });
    while i < events.len() && events[i].0 <= closed.hi {
        let at = events[i].0.clone();
        value += &slope * (&at - &x);
        x = at;
        while i < events.len() && events[i].0 == x {
            slope += &events[i].1;
            i += 1;
        }
        knots.push(Knot {
            x: x.clone(),
            value: value.clone(),
        });
    }
    if x < closed.hi {
        value += &slope * (&closed.hi - &x);
        knots.push(Knot {
            x: closed.hi.clone(),
            value,
        });
    }
    Ok(PiecewiseLinearFn { knots }.simplify())
}

/// `(f⋆μ)(x)` at a single point; `supp` is `f`'s support.
pub(crate) fn convolve_at(
    f: &PiecewiseLinearFn,
    supp: &Interval,
    mu: &DiscreteMeasure,
    x: &Rational,
) -> Rational {
    let near = Interval::closed(x - &supp.hi, x - &supp.lo);
    mu.atoms_in(&near)
        .iter()
        .map(|a| f.eval(&(x - &a.position)) * &a.mass)
        .sum()
}

/// `sup_{x∈J} |g1(x) - g2(x)|` with the leftmost maximizer.
pub fn sup_abs_diff(
    g1: &PiecewiseLinearFn,
    g2: &PiecewiseLinearFn,
    window: &Interval,
) -> (Rational, Rational) {
    let closed = window.closure();
    let mut xs: Vec<Rational> = g1
        .knots()
        .iter()
        .chain(g2.knots())
        .map(|k| k.x.clone())
        .filter(|x| closed.contains(x))
        .chain([closed.lo.clone(), closed.hi.clone()])
        .collect();
    xs.sort();
    xs.dedup();
    let mut best = Rational::zero();
    let mut witness = closed.lo.clone();
    for x in xs {
        let d = (g1.eval(&x) - g2.eval(&x)).abs();
        if d > best {
            best = d;
            witness = x;
        }
    }
    (best, witness)
}

/// `sup_{x∈J} |g(x)|`.
pub fn sup_abs(g: &PiecewiseLinearFn, window: &Interval) -> (Rational, Rational) {
    sup_abs_diff(g, &PiecewiseLinearFn::zero(), window)
}
