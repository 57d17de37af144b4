//! Lumps: single-linkage clusters of the joint support.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Atom, DiscreteMeasure};
use crate::scalar::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lump {
    /// Atoms of `μ` in the lump.
    pub lambda: Vec<Atom>,
    /// Atoms of `ν` in the lump.
    pub gamma: Vec<Atom>,
    #[serde(with = "scalar::fraction")]
    pub lo: Rational,
    #[serde(with = "scalar::fraction")]
    pub hi: Rational,
    #[serde(with = "scalar::fraction")]
    pub diameter: Rational,
    /// `|μ(Λ_α) - ν(Γ_α)|`.
    #[serde(with = "scalar::fraction")]
    pub mass_gap: Rational,
    /// All pairwise differences lie in `V = (-v, v)`.
    pub fits_neighbourhood: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LumpDecomposition {
    #[serde(with = "scalar::fraction")]
    pub v: Rational,
    pub lumps: Vec<Lump>,
    /// `sup_x #{α : (x + (-v, v)) meets lump α}`.
    pub lump_count_sup: usize,
    #[serde(with = "scalar::fraction_opt")]
    pub lump_count_witness: Option<Rational>,
}

impl LumpDecomposition {
    /// `sup_x #{α : (x-u, x+u) meets lump α}` with a maximizing centre.
    pub fn lump_count_sup(&self, u: &Rational) -> Result<(usize, Option<Rational>)> {
        if !u.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "u must be positive, got {u}"
            )));
        }
        let width = u * scalar::int(2);
        let mut best = 0;
        let mut witness = None;
        let mut end = 0;
        for (i, lump) in self.lumps.iter().enumerate() {
            end = end.max(i);
            while end + 1 < self.lumps.len() && &self.lumps[end + 1].lo - &lump.hi < width {
                end += 1;
            }
            if end - i + 1 > best {
                best = end - i + 1;
                witness = Some((&lump.hi + &self.lumps[end].lo) / scalar::int(2));
            }
        }
        Ok((best, witness))
    }
}

/// Single-linkage clustering of `supp μ ∪ supp ν` on the common window:
/// neighbouring points closer than `v` share a lump. Points exactly `v`
/// apart are split.
pub fn lump_decompose(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    v: &Rational,
) -> Result<LumpDecomposition> {
    if !v.is_positive() {
        return Err(Error::InvalidArgument(format!(
            "v must be positive, got {v}"
        )));
    }
    let common = mu
        .window()
        .intersect(nu.window())
        .ok_or_else(|| Error::empty_window(mu.window(), nu.window()))?;
    let mut points: Vec<(&Atom, bool)> = mu
        .atoms_in(&common)
        .iter()
        .map(|a| (a, true))
        .chain(nu.atoms_in(&common).iter().map(|a| (a, false)))
        .collect();
    points.sort_by(|a, b| a.0.position.cmp(&b.0.position));

    let mut lumps: Vec<Lump> = Vec::new();
    let mut prev: Option<&Rational> = None;
    for (atom, from_mu) in points {
        let linked = prev.is_some_and(|p| &atom.position - p < *v);
        if !linked {
            lumps.push(Lump {
                lambda: Vec::new(),
                gamma: Vec::new(),
                lo: atom.position.clone(),
                hi: atom.position.clone(),
                diameter: Rational::zero(),
                mass_gap: Rational::zero(),
                fits_neighbourhood: true,
            });
        }
        let lump = lumps.last_mut().expect("pushed above");
        lump.hi = atom.position.clone();
        if from_mu {
            lump.lambda.push(atom.clone());
        } else {
            lump.gamma.push(atom.clone());
        }
        prev = Some(&atom.position);
    }
    for lump in &mut lumps {
        lump.diameter = &lump.hi - &lump.lo;
        lump.fits_neighbourhood = lump.diameter < *v;
        let mass_mu: Rational = lump.lambda.iter().map(|a| &a.mass).sum();
        let mass_nu: Rational = lump.gamma.iter().map(|a| &a.mass).sum();
        lump.mass_gap = (mass_mu - mass_nu).abs();
    }
    let mut out = LumpDecomposition {
        v: v.clone(),
        lumps,
        lump_count_sup: 0,
        lump_count_witness: None,
    };
    let (count, witness) = out.lump_count_sup(v)?;
    out.lump_count_sup = count;
    out.lump_count_witness = witness;
    Ok(out)
}
