//! The bump product `Ψ(x) = Π_{j=1}^N ((μ-ν)⋆φ_j)(x)`.
//!
//! At a point where the two measures disagree, and with no other support
//! point nearby, `Ψ(0) = (μ(0)-ν(0))^N`. Far out, where the supports pair up
//! within `V` and the masses within `ε`, one factor is below `Nε` and the
//! others below `C`, so `|Ψ(b)| < NεC^{N-1}`.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{combine, DiscreteMeasure};
use crate::pwl::{bump, convolve, convolve_at, sup_abs, PiecewiseLinearFn};
use crate::scalar::{self, int, powi, Rational};
use crate::uniqueness::matching::MatchReport;

/// Neighbourhoods `U = (-u, u)`, `V = (-v, v)`, the factor count `N`, the
/// mass tolerance `ε` and the compact `K`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HarnessConfig {
    #[serde(with = "scalar::fraction")]
    pub u: Rational,
    #[serde(with = "scalar::fraction")]
    pub v: Rational,
    pub n: usize,
    #[serde(with = "scalar::fraction")]
    pub eps: Rational,
    pub k: Interval,
}

impl HarnessConfig {
    /// Rejects `v ≤ 0`, `N = 0`, `ε < 0` and `(3N+2)v > u`.
    pub fn new(u: Rational, v: Rational, n: usize, eps: Rational, k: Interval) -> Result<Self> {
        if !v.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "v must be positive, got {v}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if eps.is_negative() {
            return Err(Error::InvalidArgument(format!(
                "eps must be non-negative, got {eps}"
            )));
        }
        let reach = &v * int(3 * n as i64 + 2);
        if reach > u {
            return Err(Error::InvalidArgument(format!(
                "(3N+2)v = {reach} exceeds u = {u}: V_{{3N+2}} must stay inside U"
            )));
        }
        Ok(HarnessConfig { u, v, n, eps, k })
    }

    /// `(3N+1)v`, the support radius of `φ_N`.
    pub fn reach(&self) -> Rational {
        &self.v * int(3 * self.n as i64 + 1)
    }

    pub fn bumps(&self) -> Vec<PiecewiseLinearFn> {
        (1..=self.n as u32)
            .map(|j| bump(&self.v, j).expect("validated v > 0"))
            .collect()
    }
}

/// `1 + max(sup_x #((x+U)∩Λ), sup_x #((x+U)∩Γ))` with `U = (-u, u)`.
pub fn dm_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, u: &Rational) -> Result<usize> {
    let a = mu.sliding_count_sup(u)?.0;
    let b = nu.sliding_count_sup(u)?.0;
    Ok(1 + a.max(b))
}

/// The `N` factors `((μ-ν)⋆φ_j)(x)`.
pub fn psi_factors(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &HarnessConfig,
    x: &Rational,
) -> Result<Vec<Rational>> {
    let around = Interval::closed(x - cfg.reach(), x + cfg.reach());
    let diff = combine(
        &int(1),
        &mu.restrict(&around)?,
        &int(-1),
        &nu.restrict(&around)?,
    )?;
    Ok(cfg
        .bumps()
        .iter()
        .map(|phi| {
            let supp = phi.support().expect("bumps are non-zero");
            convolve_at(phi, &supp, &diff, x)
        })
        .collect())
}

/// `Ψ(x)`.
pub fn psi(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &HarnessConfig,
    x: &Rational,
) -> Result<Rational> {
    Ok(psi_factors(mu, nu, cfg, x)?.into_iter().product())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PsiZeroCertificate {
    pub n: usize,
    /// `μ(0) - ν(0)`.
    #[serde(with = "scalar::fraction")]
    pub difference: Rational,
    #[serde(with = "scalar::fraction")]
    pub psi0: Rational,
    /// `(μ(0) - ν(0))^N`.
    #[serde(with = "scalar::fraction")]
    pub expected: Rational,
    pub holds: bool,
    /// `μ(0) = ν(0)`: the identity holds with value 0 but says nothing.
    pub degenerate: bool,
}

/// Checks `Ψ(0) = (μ(0)-ν(0))^N`, after confirming that no support point
/// other than 0 lies in `(-(3N+2)v, (3N+2)v)`.
pub fn psi_zero_identity(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &HarnessConfig,
) -> Result<PsiZeroCertificate> {
    let radius = &cfg.v * int(3 * cfg.n as i64 + 2);
    let u = Interval::symmetric_open(radius);
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if let Some(a) = m.atoms_in(&u).iter().find(|a| !a.position.is_zero()) {
            return Err(Error::Precondition(format!(
                "{name} has an atom at {} inside {u}",
                a.position
            )));
        }
    }
    let zero = Rational::zero();
    let difference = mu.mass_at(&zero) - nu.mass_at(&zero);
    let psi0 = psi(mu, nu, cfg, &zero)?;
    let expected = powi(&difference, cfg.n);
    Ok(PsiZeroCertificate {
        n: cfg.n,
        holds: psi0 == expected,
        degenerate: difference.is_zero(),
        difference,
        psi0,
        expected,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FarFieldSample {
    #[serde(with = "scalar::fraction")]
    pub b: Rational,
    #[serde(with = "scalar::fraction")]
    pub psi: Rational,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FarFieldReport {
    pub config: HarnessConfig,
    /// Where `C` was computed: the common window shrunk by `(3N+1)v`.
    pub examined_window: Interval,
    /// `max_j sup |(μ-ν)⋆φ_j|` on the examined window.
    #[serde(with = "scalar::fraction")]
    pub c: Rational,
    pub c_index: usize,
    #[serde(with = "scalar::fraction")]
    pub c_witness: Rational,
    /// `NεC^{N-1}`.
    #[serde(with = "scalar::fraction")]
    pub bound: Rational,
    pub samples: Vec<FarFieldSample>,
    pub holds: bool,
}

/// Checks `|Ψ(b)| < NεC^{N-1}` at each sample `b ∉ K+U`.
///
/// `matching` must witness the hypotheses outside `K`: every atom there is
/// matched, with `|Δpos| < v` and `|Δmass| < ε`.
pub fn far_field_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &HarnessConfig,
    samples: &[Rational],
    matching: &MatchReport,
) -> Result<FarFieldReport> {
    let k = &cfg.k;
    let ku = Interval::open(&k.lo - &cfg.u, &k.hi + &cfg.u);
    if let Some(b) = samples.iter().find(|b| ku.contains(b)) {
        return Err(Error::Precondition(format!(
            "sample {b} lies inside K+U = {ku}"
        )));
    }
    if let Some(x) = matching.unmatched_outside(k).next() {
        return Err(Error::Precondition(format!(
            "unmatched atom at {x} outside K"
        )));
    }
    if let Some(p) = matching
        .pairs_outside(k)
        .find(|p| p.dpos.abs() >= cfg.v || p.dmass.abs() >= cfg.eps)
    {
        return Err(Error::Precondition(format!(
            "pair ({}, {}) outside K has dpos {} and dmass {}, needs |dpos| < {} and |dmass| < {}",
            p.mu_pos, p.nu_pos, p.dpos, p.dmass, cfg.v, cfg.eps
        )));
    }

    let diff = combine(&int(1), mu, &int(-1), nu)?;
    let examined_window = diff.window().shrink(&cfg.reach()).ok_or_else(|| {
        Error::Precondition(format!(
            "window {} is too small for bumps of radius {}",
            diff.window(),
            cfg.reach()
        ))
    })?;
    let sups = cfg
        .bumps()
        .par_iter()
        .map(|phi| convolve(phi, &diff, &examined_window).map(|g| sup_abs(&g, &examined_window)))
        .collect::<Result<Vec<_>>>()?;
    let (c_index, (c, c_witness)) = sups
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .expect("N >= 1");
    let bound = int(cfg.n as i64) * &cfg.eps * powi(&c, cfg.n - 1);

    let samples = samples
        .iter()
        .map(|b| {
            let value = psi(mu, nu, cfg, b)?;
            Ok(FarFieldSample {
                holds: value.abs() < bound,
                b: b.clone(),
                psi: value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FarFieldReport {
        config: cfg.clone(),
        examined_window,
        holds: samples.iter().all(|s| s.holds),
        c,
        c_index: c_index + 1,
        c_witness,
        bound,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_measure;
    use crate::scalar::frac;
    use crate::uniqueness::match_close;

    fn comb_plus(extra: Rational, n: i64) -> DiscreteMeasure {
        make_measure(
            (-n..=n).map(|k| (int(k), int(1))).chain([(int(0), extra)]),
            Interval::closed(int(-n), int(n)),
        )
        .unwrap()
    }

    fn cfg(v: Rational, n: usize) -> HarnessConfig {
        let u = &v * int(3 * n as i64 + 2);
        HarnessConfig::new(u, v, n, frac(1, 100), Interval::closed(int(-1), int(1))).unwrap()
    }

    #[test]
    fn config_validation() {
        let k = Interval::closed(int(-1), int(1));
        assert!(HarnessConfig::new(frac(1, 2), frac(1, 16), 2, frac(1, 10), k.clone()).is_ok());
        let err = HarnessConfig::new(frac(1, 2), frac(1, 16), 3, frac(1, 10), k.clone());
        assert!(err.is_err());
        assert!(HarnessConfig::new(int(1), int(0), 1, int(0), k.clone()).is_err());
        assert!(HarnessConfig::new(int(1), frac(1, 10), 0, int(0), k).is_err());
    }

    #[test]
    fn dm_bound_examples() {
        let comb = comb_plus(int(0), 10);
        assert_eq!(dm_bound(&comb, &comb, &frac(1, 4)).unwrap(), 2);
        let empty = DiscreteMeasure::empty(Interval::closed(int(0), int(1)));
        assert_eq!(dm_bound(&empty, &empty, &int(1)).unwrap(), 1);
    }

    #[test]
    fn psi_far_from_difference_vanishes() {
        let mu = comb_plus(int(1), 5);
        let nu = comb_plus(int(0), 5);
        let c = cfg(frac(1, 16), 3);
        assert_eq!(psi(&mu, &nu, &c, &frac(1, 2)).unwrap(), int(0));
    }

    #[test]
    fn psi_zero_examples() {
        let nu = comb_plus(int(0), 5);
        for (d, n, expected) in [
            (int(1), 3, int(1)),
            (int(2), 2, int(4)),
            (frac(1, 2), 3, frac(1, 8)),
        ] {
            let mu = comb_plus(d, 5);
            let cert = psi_zero_identity(&mu, &nu, &cfg(frac(1, 16), n)).unwrap();
            assert!(cert.holds);
            assert_eq!(cert.psi0, expected);
            assert!(!cert.degenerate);
        }
        let cert = psi_zero_identity(&nu, &nu, &cfg(frac(1, 16), 2)).unwrap();
        assert!(cert.holds && cert.degenerate);
    }

    #[test]
    fn psi_zero_rejects_intruder() {
        let nu = comb_plus(int(0), 5);
        let mu = comb_plus(int(1), 5);
        // (3·3+2)/8 > 1: the atoms at ±1 intrude.
        let err = psi_zero_identity(&mu, &nu, &cfg(frac(1, 8), 3)).unwrap_err();
        assert!(err.to_string().contains("atom at -1"));
    }

    #[test]
    fn far_field_single_difference() {
        let mu = comb_plus(int(1), 120);
        let nu = comb_plus(int(0), 120);
        let c = HarnessConfig::new(
            frac(1, 2),
            frac(1, 16),
            2,
            frac(1, 100),
            Interval::closed(int(-1), int(1)),
        )
        .unwrap();
        let m = match_close(&mu, &nu, &[]).unwrap();
        let report = far_field_check(&mu, &nu, &c, &[int(100)], &m).unwrap();
        assert_eq!(report.c, int(1));
        assert_eq!(report.samples[0].psi, int(0));
        assert!(report.holds);
        assert!(far_field_check(&mu, &nu, &c, &[int(1)], &m).is_err());
    }
}
