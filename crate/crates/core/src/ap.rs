//! Almost-period defects of `f⋆μ`.
//!
//! For a test function `f` supported in `[-1/6, 1/6]` and a shift `τ`, the
//! defect on a window `J` is `sup_{x∈J} |(f⋆μ)(x+τ) - (f⋆μ)(x)|`. For the
//! constructed measure every `τ ∈ 3^s ℤ` is an almost period with defect at
//! most `Lip(f) · Σ_{k>s} r_k`; [`ap_certificate`] measures this exactly on a
//! finite window.

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::tail_upper_bound;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::MeasureSource;
use crate::pwl::{convolve, sup_abs_diff, PiecewiseLinearFn};
use crate::scalar::{self, frac, pow3, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Defect {
    #[serde(with = "scalar::fraction")]
    pub tau: Rational,
    #[serde(with = "scalar::fraction")]
    pub defect: Rational,
    /// A point of the window where the defect is attained.
    #[serde(with = "scalar::fraction")]
    pub witness: Rational,
}

fn check_test_function(f: &PiecewiseLinearFn) -> Result<()> {
    let limit = Interval::symmetric_closed(frac(1, 6));
    match f.support() {
        Some(s) if !limit.contains_interval(&s) => Err(Error::InvalidArgument(format!(
            "test function support {s} is not inside [-1/6, 1/6]"
        ))),
        _ => Ok(()),
    }
}

/// `sup_{x∈J} |(f⋆μ)(x+τ) - (f⋆μ)(x)|`, exactly.
pub fn almost_period_defect<M: MeasureSource + ?Sized>(
    f: &PiecewiseLinearFn,
    source: &M,
    tau: &Rational,
    window: &Interval,
) -> Result<Defect> {
    check_test_function(f)?;
    let Some(supp) = f.support() else {
        return Ok(Defect {
            tau: tau.clone(),
            defect: Rational::zero(),
            witness: window.lo.clone(),
        });
    };
    let reach = window.closure().widen(&supp.hi, &-&supp.lo);
    let base = convolve(f, &source.measure_on(&reach)?, window)?;
    let shifted_window = window.shift(tau);
    let moved = convolve(f, &source.measure_on(&reach.shift(tau))?, &shifted_window)?;
    let (defect, witness) = sup_abs_diff(&moved.shift(&-tau), &base, window);
    Ok(Defect {
        tau: tau.clone(),
        defect,
        witness,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApCertificate {
    pub s: u32,
    #[serde(with = "scalar::fraction")]
    pub eps: Rational,
    #[serde(with = "scalar::fraction")]
    pub range: Rational,
    pub window: Interval,
    /// Every interval of this length contains a candidate `τ`.
    #[serde(with = "scalar::fraction")]
    pub relative_density_gap: Rational,
    pub rows: Vec<Defect>,
    #[serde(with = "scalar::fraction")]
    pub max_defect: Rational,
    /// `Lip(f) · Σ_{k>s} r_k` (upper bound on the tail).
    #[serde(with = "scalar::fraction")]
    pub predicted_bound: Rational,
    pub pass: bool,
}

/// `Lip(f) · Σ_{k≥s+1} r_k`, with the tail bounded rigorously.
pub fn defect_bound(f: &PiecewiseLinearFn, s: u32) -> Result<Rational> {
    Ok(f.lipschitz() * tail_upper_bound(s + 1, s + 9)?)
}

/// The defects of every candidate `τ = p·3^s` with `|τ| ≤ range`, on
/// `window`. Passes when all of them are `< eps`.
pub fn ap_certificate<M: MeasureSource + Sync + ?Sized>(
    f: &PiecewiseLinearFn,
    eps: &Rational,
    range: &Rational,
    s: u32,
    window: &Interval,
    source: &M,
) -> Result<ApCertificate> {
    if s == 0 {
        return Err(Error::InvalidArgument(
            "almost-period certificate needs s >= 1".into(),
        ));
    }
    let period = pow3(s);
    let p_max = (range / &period).floor().to_integer();
    let p_max: i64 = num_traits::ToPrimitive::to_i64(&p_max)
        .filter(|p| *p >= 0)
        .ok_or_else(|| Error::InvalidArgument(format!("bad range {range}")))?;
    let taus: Vec<Rational> = (-p_max..=p_max).map(|p| &period * scalar::int(p)).collect();
    let rows = taus
        .par_iter()
        .map(|tau| almost_period_defect(f, source, tau, window))
        .collect::<Result<Vec<_>>>()?;
    let max_defect = rows
        .iter()
        .map(|d| d.defect.clone())
        .max()
        .unwrap_or_else(Rational::zero);
    let pass = rows.iter().all(|d| &d.defect < eps);
    Ok(ApCertificate {
        s,
        eps: eps.clone(),
        range: range.clone(),
        window: window.clone(),
        relative_density_gap: period,
        rows,
        max_defect,
        predicted_bound: defect_bound(f, s)?,
        pass,
    })
}
