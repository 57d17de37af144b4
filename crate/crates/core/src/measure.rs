//! Finite discrete measures on the real line.
//!
//! A [`DiscreteMeasure`] is a sorted list of atoms together with the window
//! on which that list is known to be the whole story. The measures this
//! crate studies are infinite, so every operation that would need atoms from
//! outside the window fails instead of silently truncating.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::construction::r;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::scalar::{self, Rational};

/// A point mass `mass · δ_position`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "pos", with = "scalar::fraction")]
    pub position: Rational,
    #[serde(with = "scalar::fraction")]
    pub mass: Rational,
}

impl Atom {
    pub fn new(position: Rational, mass: Rational) -> Self {
        Atom { position, mass }
    }
}

/// A finite atomic measure, faithful on `window`.
///
/// Atoms are strictly increasing by position, carry non-zero mass and lie
/// inside the window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    window: Interval,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    window: Interval,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::from_atoms(raw.atoms, raw.window)
    }
}

/// Sorts, merges equal positions by summing masses and drops zero masses.
/// Returns the canonical list and the number of merge events.
pub fn canonicalize(mut atoms: Vec<Atom>) -> (Vec<Atom>, usize) {
    atoms.sort_by(|a, b| a.position.cmp(&b.position));
    let mut merges = 0;
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match out.last_mut() {
            Some(last) if last.position == atom.position => {
                last.mass += atom.mass;
                merges += 1;
            }
            _ => out.push(atom),
        }
    }
    out.retain(|a| !a.mass.is_zero());
    (out, merges)
}

/// Builds a canonical measure from `(position, mass)` pairs.
pub fn make_measure(
    pairs: impl IntoIterator<Item = (Rational, Rational)>,
    window: Interval,
) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_atoms(
        pairs.into_iter().map(|(p, m)| Atom::new(p, m)).collect(),
        window,
    )
}

impl DiscreteMeasure {
    pub fn from_atoms(atoms: Vec<Atom>, window: Interval) -> Result<Self> {
        if let Some(bad) = atoms.iter().find(|a| !window.contains(&a.position)) {
            return Err(Error::AtomOutsideWindow {
                position: Box::new(bad.position.clone()),
                mass: Box::new(bad.mass.clone()),
                window: Box::new(window),
            });
        }
        let (atoms, _) = canonicalize(atoms);
        Ok(DiscreteMeasure { window, atoms })
    }

    /// Wraps atoms that are already canonical and inside `window`.
    pub(crate) fn from_canonical(atoms: Vec<Atom>, window: Interval) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0].position < w[1].position));
        debug_assert!(atoms
            .iter()
            .all(|a| window.contains(&a.position) && !a.mass.is_zero()));
        DiscreteMeasure { window, atoms }
    }

    pub fn empty(window: Interval) -> Self {
        DiscreteMeasure {
            window,
            atoms: Vec::new(),
        }
    }

    pub fn window(&self) -> &Interval {
        &self.window
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Rational> {
        self.atoms.iter().map(|a| &a.position)
    }

    pub fn total_mass(&self) -> Rational {
        self.atoms.iter().map(|a| &a.mass).sum()
    }

    pub fn total_variation(&self) -> Rational {
        self.atoms.iter().map(|a| a.mass.abs()).sum()
    }

    /// Mass at `x`, zero when `x` is not an atom.
    pub fn mass_at(&self, x: &Rational) -> Rational {
        self.atoms
            .binary_search_by(|a| a.position.cmp(x))
            .map(|i| self.atoms[i].mass.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    /// Atoms whose position lies in `j`, as a contiguous slice.
    pub fn atoms_in(&self, j: &Interval) -> &[Atom] {
        let start = self.atoms.partition_point(|a| {
            if j.lo_open {
                a.position <= j.lo
            } else {
                a.position < j.lo
            }
        });
        let end = self.atoms.partition_point(|a| {
            if j.hi_open {
                a.position < j.hi
            } else {
                a.position <= j.hi
            }
        });
        &self.atoms[start..end.max(start)]
    }

    /// Smallest distance between consecutive atoms.
    pub fn min_gap(&self) -> Option<Rational> {
        self.atoms
            .windows(2)
            .map(|w| &w[1].position - &w[0].position)
            .min()
    }

    pub fn shift(&self, t: &Rational) -> DiscreteMeasure {
        DiscreteMeasure {
            window: self.window.shift(t),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(&a.position + t, a.mass.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> DiscreteMeasure {
        if c.is_zero() {
            return DiscreteMeasure::empty(self.window.clone());
        }
        DiscreteMeasure {
            window: self.window.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.position.clone(), &a.mass * c))
                .collect(),
        }
    }

    /// `(1/2k) Σ_{j=1..k} (S_{-r_k j/k} + S_{r_k j/k}) μ` with `r_k = 2^{-(k+1)²}`.
    pub fn averaging_operator(&self, k: u32) -> Result<DiscreteMeasure> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "averaging operator needs k >= 1".into(),
            ));
        }
        let rk = r(k)?;
        let kq = scalar::int(k as i64);
        let weight = Rational::one() / scalar::int(2 * k as i64);
        let offsets: Vec<Rational> = (1..=k as i64)
            .flat_map(|j| {
                let d = &rk * scalar::int(j) / &kq;
                [-d.clone(), d]
            })
            .collect();
        let mut atoms = Vec::with_capacity(self.atoms.len() * offsets.len());
        for a in &self.atoms {
            let m = &a.mass * &weight;
            for d in &offsets {
                atoms.push(Atom::new(&a.position + d, m.clone()));
            }
        }
        let (atoms, _) = canonicalize(atoms);
        Ok(DiscreteMeasure {
            window: self.window.widen(&rk, &rk),
            atoms,
        })
    }

    /// Restriction to `j`, which must sit inside the window.
    pub fn restrict(&self, j: &Interval) -> Result<DiscreteMeasure> {
        if !self.window.contains_interval(j) {
            return Err(Error::outside_window(j, &self.window));
        }
        Ok(DiscreteMeasure {
            window: j.clone(),
            atoms: self.atoms_in(j).to_vec(),
        })
    }

    /// `|μ|(J)`.
    pub fn variation_on(&self, j: &Interval) -> Result<Rational> {
        if !self.window.contains_interval(j) {
            return Err(Error::outside_window(j, &self.window));
        }
        Ok(self.atoms_in(j).iter().map(|a| a.mass.abs()).sum())
    }

    /// `sup_t |μ|([t, t+len])`, with the left end `t` of a maximizing
    /// placement. Placements reaching past the window only see in-window
    /// atoms.
    pub fn sliding_variation_sup(&self, len: &Rational) -> Result<(Rational, Option<Rational>)> {
        if !len.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "window length must be positive, got {len}"
            )));
        }
        let mut best = Rational::zero();
        let mut witness = None;
        let mut sum = Rational::zero();
        let mut end = 0;
        for a in &self.atoms {
            let reach = &a.position + len;
            while end < self.atoms.len() && self.atoms[end].position <= reach {
                sum += self.atoms[end].mass.abs();
                end += 1;
            }
            if witness.is_none() || sum > best {
                best = sum.clone();
                witness = Some(a.position.clone());
            }
            sum -= a.mass.abs();
        }
        Ok((best, witness))
    }

    /// `sup_x #((x-u, x+u) ∩ supp μ)`, with the centre of a maximizing
    /// placement (leftmost on ties).
    pub fn sliding_count_sup(&self, u: &Rational) -> Result<(usize, Option<Rational>)> {
        if !u.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "neighbourhood radius must be positive, got {u}"
            )));
        }
        let width = u * scalar::int(2);
        let mut best = 0;
        let mut witness = None;
        let mut end = 0;
        for (i, a) in self.atoms.iter().enumerate() {
            end = end.max(i);
            while end + 1 < self.atoms.len() && &self.atoms[end + 1].position - &a.position < width
            {
                end += 1;
            }
            let count = end - i + 1;
            if count > best {
                best = count;
                witness = Some((&a.position + &self.atoms[end].position) / scalar::int(2));
            }
        }
        Ok((best, witness))
    }

    /// Equality of atoms on the common part of both windows.
    pub fn agrees_with(&self, other: &DiscreteMeasure) -> bool {
        match self.window.intersect(&other.window) {
            Some(common) => self.atoms_in(&common) == other.atoms_in(&common),
            None => true,
        }
    }
}

/// Anything that can hand out a faithful finite piece of a measure.
pub trait MeasureSource {
    /// The measure restricted to `window`.
    fn measure_on(&self, window: &Interval) -> Result<DiscreteMeasure>;
}

impl MeasureSource for DiscreteMeasure {
    fn measure_on(&self, window: &Interval) -> Result<DiscreteMeasure> {
        self.restrict(window)
    }
}

/// `c1·μ + c2·ν` on the intersection of the two windows.
pub fn combine(
    c1: &Rational,
    mu: &DiscreteMeasure,
    c2: &Rational,
    nu: &DiscreteMeasure,
) -> Result<DiscreteMeasure> {
    let window = mu
        .window
        .intersect(&nu.window)
        .ok_or_else(|| Error::empty_window(&mu.window, &nu.window))?;
    let atoms = mu
        .atoms_in(&window)
        .iter()
        .map(|a| Atom::new(a.position.clone(), &a.mass * c1))
        .chain(
            nu.atoms_in(&window)
                .iter()
                .map(|a| Atom::new(a.position.clone(), &a.mass * c2)),
        )
        .collect();
    let (atoms, _) = canonicalize(atoms);
    Ok(DiscreteMeasure { window, atoms })
}

impl fmt::Display for DiscreteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({}, {})", a.position, a.mass)?;
        }
        write!(f, "}} on {}", self.window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{frac, int};

    fn unit_window() -> Interval {
        Interval::closed(int(-1), int(1))
    }

    fn m(pairs: &[(Rational, Rational)], window: Interval) -> DiscreteMeasure {
        make_measure(pairs.iter().cloned(), window).unwrap()
    }

    #[test]
    fn make_measure_examples() {
        let one = m(&[(int(0), int(1))], unit_window());
        assert_eq!(one.atoms(), &[Atom::new(int(0), int(1))]);

        let cancelled = m(&[(int(0), int(1)), (int(0), int(-1))], unit_window());
        assert!(cancelled.is_empty());

        let merged = m(
            &[(frac(1, 2), frac(1, 3)), (frac(1, 2), frac(1, 3))],
            Interval::closed(int(0), int(1)),
        );
        assert_eq!(merged.atoms(), &[Atom::new(frac(1, 2), frac(2, 3))]);
    }

    #[test]
    fn make_measure_rejects_outside_atom() {
        let err = make_measure([(int(2), int(5))], unit_window()).unwrap_err();
        match err {
            Error::AtomOutsideWindow { position, mass, .. } => {
                assert_eq!(*position, int(2));
                assert_eq!(*mass, int(5));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn shift_examples() {
        let d0 = m(&[(int(0), int(1))], unit_window());
        assert_eq!(d0.shift(&int(1)).atoms(), &[Atom::new(int(1), int(1))]);
        assert_eq!(
            d0.shift(&int(1)).window(),
            &Interval::closed(int(0), int(2))
        );
        assert_eq!(d0.shift(&int(0)), d0);
        let mu = m(&[(frac(1, 16), frac(1, 2))], unit_window());
        assert_eq!(mu.shift(&int(3)).shift(&int(-3)), mu);
    }

    #[test]
    fn averaging_examples() {
        let d0 = m(&[(int(0), int(1))], unit_window());
        let t1 = d0.averaging_operator(1).unwrap();
        assert_eq!(
            t1.atoms(),
            &[
                Atom::new(frac(-1, 16), frac(1, 2)),
                Atom::new(frac(1, 16), frac(1, 2))
            ]
        );
        assert_eq!(t1.window(), &Interval::closed(frac(-17, 16), frac(17, 16)));

        let t2 = d0.averaging_operator(2).unwrap();
        let expected: Vec<Atom> = [(-1, 512), (-1, 1024), (1, 1024), (1, 512)]
            .iter()
            .map(|&(p, q)| Atom::new(frac(p, q), frac(1, 4)))
            .collect();
        assert_eq!(t2.atoms(), expected.as_slice());

        let two = m(
            &[(int(0), int(1)), (int(1), int(2))],
            Interval::closed(int(0), int(1)),
        );
        assert_eq!(two.averaging_operator(3).unwrap().total_mass(), int(3));
        assert_eq!(two.averaging_operator(3).unwrap().len(), 12);

        assert!(d0.averaging_operator(0).is_err());
    }

    #[test]
    fn combine_examples() {
        let d0 = m(&[(int(0), int(1))], Interval::closed(int(-1), int(2)));
        let d1 = m(&[(int(1), int(1))], Interval::closed(int(-1), int(2)));
        assert!(combine(&int(1), &d0, &int(-1), &d0).unwrap().is_empty());
        assert_eq!(
            combine(&int(2), &d0, &int(0), &d1).unwrap(),
            d0.scale(&int(2))
        );
        assert_eq!(
            combine(&int(1), &d0, &int(1), &d1).unwrap().atoms(),
            &[Atom::new(int(0), int(1)), Atom::new(int(1), int(1))]
        );
        let far = DiscreteMeasure::empty(Interval::closed(int(5), int(6)));
        assert!(matches!(
            combine(&int(1), &d0, &int(1), &far),
            Err(Error::EmptyWindow(..))
        ));
    }

    #[test]
    fn restrict_examples() {
        let mu = m(
            &[(int(0), int(1)), (int(2), int(1))],
            Interval::closed(int(-1), int(3)),
        );
        assert_eq!(
            mu.restrict(&unit_window()).unwrap().atoms(),
            &[Atom::new(int(0), int(1))]
        );
        assert_eq!(mu.restrict(mu.window()).unwrap(), mu);
        assert!(matches!(
            mu.restrict(&Interval::closed(int(-2), int(0))),
            Err(Error::OutsideWindow { .. })
        ));
        let open_cell = mu.restrict(&Interval::open(int(0), int(2))).unwrap();
        assert!(open_cell.is_empty());
    }

    #[test]
    fn variation_examples() {
        let mu = m(
            &[(int(0), int(-1)), (int(1), int(1))],
            Interval::closed(int(0), int(1)),
        );
        assert_eq!(
            mu.variation_on(&Interval::closed(int(0), int(1))).unwrap(),
            int(2)
        );
        let empty = DiscreteMeasure::empty(unit_window());
        assert_eq!(empty.variation_on(&unit_window()).unwrap(), int(0));
    }

    #[test]
    fn sliding_sup_examples() {
        let mu = m(
            &[(int(0), int(1)), (int(1), int(1)), (int(2), int(1))],
            Interval::closed(int(0), int(2)),
        );
        assert_eq!(
            mu.sliding_variation_sup(&int(1)).unwrap(),
            (int(2), Some(int(0)))
        );
        let empty = DiscreteMeasure::empty(unit_window());
        assert_eq!(
            empty.sliding_variation_sup(&int(1)).unwrap(),
            (int(0), None)
        );
        assert!(mu.sliding_variation_sup(&int(0)).is_err());

        let pair = m(&[(int(0), int(1)), (int(1), int(1))], unit_window());
        assert_eq!(pair.sliding_count_sup(&frac(1, 4)).unwrap().0, 1);
        // Open neighbourhood: distance exactly 2u does not fit.
        assert_eq!(pair.sliding_count_sup(&frac(1, 2)).unwrap().0, 1);
        assert_eq!(
            pair.sliding_count_sup(&frac(3, 5)).unwrap(),
            (2, Some(frac(1, 2)))
        );
        assert!(pair.sliding_count_sup(&int(-1)).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mu = m(
            &[(frac(-15, 16), frac(1, 2)), (int(0), int(1))],
            unit_window(),
        );
        let text = serde_json::to_string(&mu).unwrap();
        assert!(text.contains("\"-15/16\""));
        let back: DiscreteMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);

        let bad = r#"{"window":{"lo":"0","hi":"1"},"atoms":[{"pos":"2","mass":"1"}]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(bad).is_err());
    }
}
