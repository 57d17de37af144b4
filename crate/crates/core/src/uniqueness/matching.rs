//! Close-at-infinity matching of two discrete measures.
//!
//! The bijection `σ` is built as a minimum-cost matching with cost
//! `|λ - σ(λ)|`. On the line an order-preserving matching is always
//! optimal, so equal atom counts pair up by rank; unequal counts go through
//! an order-preserving dynamic program that leaves the surplus unmatched.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{Atom, DiscreteMeasure};
use crate::scalar::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchedPair {
    #[serde(with = "scalar::fraction")]
    pub mu_pos: Rational,
    #[serde(with = "scalar::fraction")]
    pub nu_pos: Rational,
    /// `σ(λ) - λ`.
    #[serde(with = "scalar::fraction")]
    pub dpos: Rational,
    /// `ν(σ(λ)) - μ(λ)`.
    #[serde(with = "scalar::fraction")]
    pub dmass: Rational,
}

impl MatchedPair {
    fn new(a: &Atom, b: &Atom) -> Self {
        MatchedPair {
            mu_pos: a.position.clone(),
            nu_pos: b.position.clone(),
            dpos: &b.position - &a.position,
            dmass: &b.mass - &a.mass,
        }
    }

    fn inside(&self, k: &Interval) -> bool {
        k.contains(&self.mu_pos) && k.contains(&self.nu_pos)
    }
}

/// Residual suprema over the pairs with an endpoint outside `window`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TailEntry {
    pub window: Interval,
    pub pairs: usize,
    #[serde(with = "scalar::fraction")]
    pub sup_abs_dpos: Rational,
    #[serde(with = "scalar::fraction")]
    pub sup_abs_dmass: Rational,
    pub unmatched: usize,
}

/// Residual maxima over the pairs first contained in `window` (the shell
/// `K_n \ K_{n-1}`). The last shell, with `window = None`, holds pairs not
/// contained in any of the given windows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShellEntry {
    pub window: Option<Interval>,
    pub pairs: usize,
    #[serde(with = "scalar::fraction")]
    pub max_abs_dpos: Rational,
    #[serde(with = "scalar::fraction")]
    pub max_abs_dmass: Rational,
    pub unmatched: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    #[serde(with = "scalar::fraction_vec")]
    pub unmatched_mu: Vec<Rational>,
    #[serde(with = "scalar::fraction_vec")]
    pub unmatched_nu: Vec<Rational>,
    pub tail_profile: Vec<TailEntry>,
    pub shell_profile: Vec<ShellEntry>,
    /// Non-empty shells have non-increasing position and mass residuals
    /// going outward.
    pub certified_decreasing: bool,
    /// Every atom matched and the residuals decrease outward.
    pub come_close: bool,
    /// Every atom matched with zero residuals.
    pub coincide: bool,
}

impl MatchReport {
    /// Pairs with an endpoint outside `k`.
    pub fn pairs_outside<'a>(&'a self, k: &'a Interval) -> impl Iterator<Item = &'a MatchedPair> {
        self.pairs.iter().filter(move |p| !p.inside(k))
    }

    pub fn unmatched_outside<'a>(&'a self, k: &'a Interval) -> impl Iterator<Item = &'a Rational> {
        self.unmatched_mu
            .iter()
            .chain(&self.unmatched_nu)
            .filter(move |x| !k.contains(x))
    }
}

/// Order-preserving pairing of the atoms of `mu` and `nu` by index pairs.
fn pair_indices(mu: &[Atom], nu: &[Atom]) -> Vec<(usize, usize)> {
    if mu.len() == nu.len() {
        return (0..mu.len()).map(|i| (i, i)).collect();
    }
    if mu.len() > nu.len() {
        return pair_indices(nu, mu)
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect();
    }
    // mu is the smaller side: every mu atom gets a partner.
    let (m, n) = (mu.len(), nu.len());
    type Cost = (Rational, Rational);
    let add = |c: &Cost, a: &Atom, b: &Atom| -> Cost {
        (
            &c.0 + (&a.position - &b.position).abs(),
            &c.1 + (&a.mass - &b.mass).abs(),
        )
    };
    // best[i][j]: first i atoms of mu matched inside the first j of nu.
    let mut best: Vec<Vec<Option<Cost>>> = vec![vec![None; n + 1]; m + 1];
    let mut took: Vec<Vec<bool>> = vec![vec![false; n + 1]; m + 1];
    for cell in best[0].iter_mut() {
        *cell = Some((Rational::zero(), Rational::zero()));
    }
    for i in 1..=m {
        for j in i..=n {
            let skip = best[i][j - 1].clone();
            let take = best[i - 1][j - 1]
                .as_ref()
                .map(|c| add(c, &mu[i - 1], &nu[j - 1]));
            let (choice, took_here) = match (skip, take) {
                (Some(s), Some(t)) if t < s => (Some(t), true),
                (Some(s), _) => (Some(s), false),
                (None, t) => (t, true),
            };
            best[i][j] = choice;
            took[i][j] = took_here;
        }
    }
    let mut out = Vec::with_capacity(m);
    let (mut i, mut j) = (m, n);
    while i > 0 {
        if took[i][j] {
            out.push((i - 1, j - 1));
            i -= 1;
        }
        j -= 1;
    }
    out.reverse();
    out
}

/// Builds `σ` between the atoms of `mu` and `nu` on the common window and
/// reports residual profiles for the nested `windows`.
pub fn match_close(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    windows: &[Interval],
) -> Result<MatchReport> {
    if let Some(w) = windows.windows(2).find(|w| !w[1].contains_interval(&w[0])) {
        return Err(Error::InvalidArgument(format!(
            "windows must be nested: {} is not inside {}",
            w[0], w[1]
        )));
    }
    let common = mu
        .window()
        .intersect(nu.window())
        .ok_or_else(|| Error::empty_window(mu.window(), nu.window()))?;
    let a = mu.atoms_in(&common);
    let b = nu.atoms_in(&common);
    let index_pairs = pair_indices(a, b);
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let pairs: Vec<MatchedPair> = index_pairs
        .iter()
        .map(|&(i, j)| {
            used_a[i] = true;
            used_b[j] = true;
            MatchedPair::new(&a[i], &b[j])
        })
        .collect();
    let leftover = |atoms: &[Atom], used: &[bool]| -> Vec<Rational> {
        atoms
            .iter()
            .zip(used)
            .filter(|(_, u)| !**u)
            .map(|(x, _)| x.position.clone())
            .collect()
    };
    let unmatched_mu = leftover(a, &used_a);
    let unmatched_nu = leftover(b, &used_b);

    let unmatched_all: Vec<&Rational> = unmatched_mu.iter().chain(&unmatched_nu).collect();
    let tail_profile = windows
        .iter()
        .map(|k| {
            let outside: Vec<&MatchedPair> = pairs.iter().filter(|p| !p.inside(k)).collect();
            TailEntry {
                window: k.clone(),
                pairs: outside.len(),
                sup_abs_dpos: max_abs(outside.iter().map(|p| &p.dpos)),
                sup_abs_dmass: max_abs(outside.iter().map(|p| &p.dmass)),
                unmatched: unmatched_all.iter().filter(|x| !k.contains(x)).count(),
            }
        })
        .collect();

    let shell_of_pair = |p: &MatchedPair| windows.iter().position(|k| p.inside(k));
    let shell_of_point = |x: &Rational| windows.iter().position(|k| k.contains(x));
    let mut shell_profile: Vec<ShellEntry> = windows
        .iter()
        .map(|k| Some(k.clone()))
        .chain([None])
        .map(|window| ShellEntry {
            window,
            pairs: 0,
            max_abs_dpos: Rational::zero(),
            max_abs_dmass: Rational::zero(),
            unmatched: 0,
        })
        .collect();
    for p in &pairs {
        let e = &mut shell_profile[shell_of_pair(p).unwrap_or(windows.len())];
        e.pairs += 1;
        e.max_abs_dpos = e.max_abs_dpos.clone().max(p.dpos.abs());
        e.max_abs_dmass = e.max_abs_dmass.clone().max(p.dmass.abs());
    }
    for x in &unmatched_all {
        shell_profile[shell_of_point(x).unwrap_or(windows.len())].unmatched += 1;
    }
    if shell_profile
        .last()
        .is_some_and(|e| e.pairs == 0 && e.unmatched == 0)
    {
        shell_profile.pop();
    }

    let nonempty: Vec<&ShellEntry> = shell_profile.iter().filter(|e| e.pairs > 0).collect();
    let certified_decreasing = nonempty.windows(2).all(|w| {
        w[1].max_abs_dpos <= w[0].max_abs_dpos && w[1].max_abs_dmass <= w[0].max_abs_dmass
    });
    let all_matched = unmatched_all.is_empty();
    let coincide = all_matched && pairs.iter().all(|p| p.dpos.is_zero() && p.dmass.is_zero());
    Ok(MatchReport {
        pairs,
        unmatched_mu,
        unmatched_nu,
        tail_profile,
        shell_profile,
        certified_decreasing,
        come_close: all_matched && certified_decreasing,
        coincide,
    })
}

fn max_abs<'a>(values: impl Iterator<Item = &'a Rational>) -> Rational {
    values.map(|v| v.abs()).max().unwrap_or_else(Rational::zero)
}
