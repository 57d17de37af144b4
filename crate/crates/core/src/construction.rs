//! Stage-by-stage construction of a positive, translation bounded, almost
//! periodic measure on ℝ whose masses tend to zero at infinity.
//!
//! With `r_k = 2^{-(k+1)²}` and the averaging operators
//! `T_k = (1/2k) Σ_{j=1..k} (S_{-r_k j/k} + S_{r_k j/k})`,
//!
//! ```text
//! μ_0 = δ_0,   μ_k = μ_{k-1} + (S_{-3^{k-1}} + S_{3^{k-1}}) T_k μ_{k-1}.
//! ```
//!
//! Each atom of `μ_s` remembers the steps that produced it from `δ_0`, so
//! cluster certificates can be read off without searching. The limit
//! measure is available on any bounded window through [`StageCache`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{canonicalize, Atom, DiscreteMeasure, MeasureSource};
use crate::scalar::{self, frac, int, pow2_neg, pow3, Rational};

pub const DEFAULT_ATOM_CAP: usize = 10_000_000;

/// Highest stage index accepted anywhere; `3^40` already dwarfs any window
/// that fits in memory.
const MAX_STAGE: u32 = 40;

/// `r_k = 2^{-(k+1)²}`.
pub fn r(k: u32) -> Result<Rational> {
    if k == 0 {
        return Err(Error::InvalidArgument("r_k needs k >= 1".into()));
    }
    Ok(pow2_neg((k + 1) * (k + 1)))
}

/// The open interval `I_s = ((1-3^s)/2 - 1/3, (3^s-1)/2 + 1/3)` carrying
/// `supp μ_s`.
pub fn support_interval(s: u32) -> Interval {
    let half = (pow3(s) - int(1)) / int(2) + frac(1, 3);
    Interval::symmetric_open(half)
}

/// Atom count of `μ_s`: `n_0 = 1`, `n_s = n_{s-1}(1 + 4s)`.
pub fn atom_count(s: u32) -> u128 {
    (1..=s as u128).fold(1, |n, k| n.saturating_mul(1 + 4 * k))
}

/// One application of `S_{±3^{k-1}} S_{r_k j/k}` in an atom's history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub k: u32,
    /// Sign of the lattice shift `±3^{k-1}`.
    pub lattice: i8,
    /// `j ∈ {-k..-1, 1..k}`: the averaging offset is `r_k j / k`.
    pub offset: i32,
}

impl Step {
    pub fn lattice_shift(&self) -> Rational {
        pow3(self.k - 1) * int(self.lattice as i64)
    }

    pub fn averaging_shift(&self) -> Rational {
        pow2_neg((self.k + 1) * (self.k + 1)) * frac(self.offset as i64, self.k as i64)
    }

    pub fn displacement(&self) -> Rational {
        self.lattice_shift() + self.averaging_shift()
    }
}

/// Steps from `δ_0` to an atom, by strictly increasing `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub steps: Vec<Step>,
}

impl Provenance {
    pub fn ks(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.k).collect()
    }

    /// `Π 2k` over the steps.
    pub fn q(&self) -> BigInt {
        self.steps.iter().map(|s| BigInt::from(2 * s.k)).product()
    }

    /// `Σ r_k` over the steps.
    pub fn eta(&self) -> Rational {
        self.steps
            .iter()
            .map(|s| pow2_neg((s.k + 1) * (s.k + 1)))
            .sum()
    }

    pub fn position(&self) -> Rational {
        self.steps.iter().map(Step::displacement).sum()
    }

    pub fn mass(&self) -> Rational {
        Rational::new(BigInt::one(), self.q())
    }
}

/// `μ_s` with per-atom provenance.
#[derive(Clone, Debug)]
pub struct StageMeasure {
    pub s: u32,
    pub measure: DiscreteMeasure,
    /// Aligned with `measure.atoms()`.
    pub provenance: Vec<Provenance>,
    /// Equal positions collapsed while building this stage from the previous
    /// one. The copies are disjoint, so this stays zero.
    pub merges: usize,
}

impl StageMeasure {
    pub fn initial() -> Self {
        StageMeasure {
            s: 0,
            measure: DiscreteMeasure::from_canonical(
                vec![Atom::new(int(0), int(1))],
                support_interval(0).closure(),
            ),
            provenance: vec![Provenance::default()],
            merges: 0,
        }
    }

    /// `μ_{s+1}` from `μ_s`.
    pub fn next(&self, cap: usize) -> Result<StageMeasure> {
        let k = self.s + 1;
        if k > MAX_STAGE {
            return Err(Error::InvalidArgument(format!("stage {k} is out of range")));
        }
        let projected = (self.measure.len() as u128).saturating_mul(1 + 4 * k as u128);
        if projected > cap as u128 {
            return Err(Error::AtomCap {
                stage: k,
                projected,
                cap,
            });
        }
        let offsets = averaging_offsets(k);
        let weight = Rational::one() / int(2 * k as i64);
        let mut items: Vec<(Atom, Provenance)> = Vec::with_capacity(projected as usize);
        items.extend(
            self.measure
                .atoms()
                .iter()
                .cloned()
                .zip(self.provenance.iter().cloned()),
        );
        for lattice in [-1i8, 1] {
            let shift = pow3(k - 1) * int(lattice as i64);
            for (atom, prov) in self.measure.atoms().iter().zip(&self.provenance) {
                let base = &atom.position + &shift;
                let mass = &atom.mass * &weight;
                for (offset, d) in &offsets {
                    let mut p = prov.clone();
                    p.steps.push(Step {
                        k,
                        lattice,
                        offset: *offset,
                    });
                    items.push((Atom::new(&base + d, mass.clone()), p));
                }
            }
        }
        items.sort_by(|a, b| a.0.position.cmp(&b.0.position));
        let mut merges = 0;
        let mut atoms: Vec<Atom> = Vec::with_capacity(items.len());
        let mut provenance = Vec::with_capacity(items.len());
        for (atom, prov) in items {
            match atoms.last_mut() {
                Some(last) if last.position == atom.position => {
                    last.mass += atom.mass;
                    merges += 1;
                }
                _ => {
                    atoms.push(atom);
                    provenance.push(prov);
                }
            }
        }
        Ok(StageMeasure {
            s: k,
            measure: DiscreteMeasure::from_canonical(atoms, support_interval(k).closure()),
            provenance,
            merges,
        })
    }
}

/// `(j, r_k j/k)` for `j = -k..-1, 1..k`.
fn averaging_offsets(k: u32) -> Vec<(i32, Rational)> {
    let rk = pow2_neg((k + 1) * (k + 1));
    (-(k as i32)..=k as i32)
        .filter(|&j| j != 0)
        .map(|j| (j, &rk * frac(j as i64, k as i64)))
        .collect()
}

/// `μ_s` built from scratch under [`DEFAULT_ATOM_CAP`].
pub fn build_stage(s: u32) -> Result<StageMeasure> {
    build_stage_capped(s, DEFAULT_ATOM_CAP)
}

pub fn build_stage_capped(s: u32, cap: usize) -> Result<StageMeasure> {
    let mut stage = StageMeasure::initial();
    while stage.s < s {
        stage = stage.next(cap)?;
    }
    Ok(stage)
}

/// Smallest `s` with `window ⊆ I_s`.
pub fn stage_for_window(window: &Interval) -> Result<u32> {
    (0..=MAX_STAGE)
        .find(|&s| support_interval(s).contains_interval(window))
        .ok_or_else(|| Error::InvalidArgument(format!("window {window} is too large")))
}

/// `μ_{s+1}` restricted to `window ⊆ I_s`, generated from `μ_s` without
/// materialising the rest of the next stage.
pub fn next_stage_on(stage: &StageMeasure, window: &Interval) -> Result<DiscreteMeasure> {
    if !stage.measure.window().contains_interval(window) {
        return Err(Error::outside_window(window, stage.measure.window()));
    }
    let k = stage.s + 1;
    let rk = r(k)?;
    let offsets = averaging_offsets(k);
    let weight = Rational::one() / int(2 * k as i64);
    let mut atoms = stage.measure.atoms_in(window).to_vec();
    for lattice in [-1i64, 1] {
        let shift = pow3(k - 1) * int(lattice);
        // Offspring of y land in [y + shift - r_k, y + shift + r_k].
        let reach = window.closure().shift(&-&shift).widen(&rk, &rk);
        for atom in stage.measure.atoms_in(&reach) {
            let base = &atom.position + &shift;
            let mass = &atom.mass * &weight;
            for (_, d) in &offsets {
                let p = &base + d;
                if window.contains(&p) {
                    atoms.push(Atom::new(p, mass.clone()));
                }
            }
        }
    }
    DiscreteMeasure::from_atoms(atoms, window.clone())
}

/// Lazily built stages `μ_0, μ_1, …`, shared between callers. Also the
/// entry point to the limit measure on bounded windows.
#[derive(Debug)]
pub struct StageCache {
    cap: usize,
    stages: Mutex<Vec<Arc<StageMeasure>>>,
}

impl Default for StageCache {
    fn default() -> Self {
        StageCache::new(DEFAULT_ATOM_CAP)
    }
}

impl StageCache {
    pub fn new(cap: usize) -> Self {
        StageCache {
            cap,
            stages: Mutex::new(vec![Arc::new(StageMeasure::initial())]),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn stage(&self, s: u32) -> Result<Arc<StageMeasure>> {
        let mut stages = self.stages.lock().expect("stage cache poisoned");
        while stages.len() <= s as usize {
            let next = stages
                .last()
                .expect("stage 0 always present")
                .next(self.cap)?;
            stages.push(Arc::new(next));
        }
        Ok(Arc::clone(&stages[s as usize]))
    }

    /// The limit measure restricted to `window`.
    ///
    /// Uses the smallest stage whose support interval contains the window
    /// and cross-checks it against the next stage on the same window.
    pub fn limit_window(&self, window: &Interval) -> Result<DiscreteMeasure> {
        let s = stage_for_window(window)?;
        let stage = self.stage(s)?;
        let here = stage.measure.restrict(window)?;
        let next = next_stage_on(&stage, window)?;
        if here != next {
            return Err(Error::StabilityViolation {
                window: Box::new(window.clone()),
                stage: s,
                next: s + 1,
            });
        }
        Ok(here)
    }

    pub fn verify_support_in_is(&self, s: u32) -> Result<bool> {
        Ok(support_report(&self.stage(s)?.measure, s).holds)
    }

    pub fn verify_cell_mass(&self, s: u32) -> Result<bool> {
        Ok(cell_mass_report(&self.stage(s)?.measure, s).holds)
    }

    /// Largest mass of the limit measure on `window` outside `I_s`,
    /// against the bound `1/(2s)`.
    pub fn verify_mass_decay(&self, s: u32, window: &Interval) -> Result<MassDecayReport> {
        if s == 0 {
            return Err(Error::InvalidArgument(
                "mass decay bound 1/(2s) needs s >= 1".into(),
            ));
        }
        let is = support_interval(s);
        if !window.contains_interval(&is.closure()) {
            return Err(Error::InvalidArgument(format!(
                "window {window} must contain the closure of I_{s} = {is}"
            )));
        }
        let mu = self.limit_window(window)?;
        let outside = mu.atoms().iter().filter(|a| !is.contains(&a.position));
        let max = outside.max_by(|a, b| a.mass.cmp(&b.mass)).cloned();
        let bound = Rational::one() / int(2 * s as i64);
        let holds = max.as_ref().is_none_or(|a| a.mass < bound);
        Ok(MassDecayReport {
            s,
            window: window.clone(),
            max_mass_outside: max.as_ref().map(|a| a.mass.clone()),
            witness: max.map(|a| a.position),
            bound,
            holds,
        })
    }

    /// `restrict(μ_{s+1}, I_s) = μ_s`.
    pub fn verify_stage_stability(&self, s: u32) -> Result<StabilityReport> {
        let here = self.stage(s)?;
        let next = self.stage(s + 1)?;
        let is = support_interval(s);
        let restricted = next.measure.restrict(&is)?;
        let first_difference = first_difference(here.measure.atoms(), restricted.atoms());
        Ok(StabilityReport {
            s,
            holds: first_difference.is_none(),
            first_difference,
        })
    }
}

impl MeasureSource for StageCache {
    fn measure_on(&self, window: &Interval) -> Result<DiscreteMeasure> {
        self.limit_window(window)
    }
}

fn first_difference(a: &[Atom], b: &[Atom]) -> Option<Rational> {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return Some(x.position.clone().min(y.position.clone()));
        }
    }
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Less => Some(b[a.len()].position.clone()),
        std::cmp::Ordering::Greater => Some(a[b.len()].position.clone()),
        std::cmp::Ordering::Equal => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub s: u32,
    pub holds: bool,
    #[serde(with = "scalar::fraction_opt")]
    pub first_difference: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MassDecayReport {
    pub s: u32,
    pub window: Interval,
    #[serde(with = "scalar::fraction_opt")]
    pub max_mass_outside: Option<Rational>,
    #[serde(with = "scalar::fraction_opt")]
    pub witness: Option<Rational>,
    #[serde(with = "scalar::fraction")]
    pub bound: Rational,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportReport {
    pub s: u32,
    pub interval: Interval,
    #[serde(with = "scalar::fraction_vec")]
    pub outside: Vec<Rational>,
    pub holds: bool,
}

/// Every atom strictly inside `I_s`.
pub fn support_report(measure: &DiscreteMeasure, s: u32) -> SupportReport {
    let interval = support_interval(s);
    let outside: Vec<Rational> = measure
        .positions()
        .filter(|p| !interval.contains(p))
        .cloned()
        .collect();
    SupportReport {
        s,
        holds: outside.is_empty(),
        interval,
        outside,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellFailure {
    pub n: i64,
    #[serde(with = "scalar::fraction")]
    pub mass: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellMassReport {
    pub s: u32,
    pub cells_checked: usize,
    /// Cells `(n-1/3, n+1/3) ⊆ I_s` whose mass is not exactly 1.
    pub failures: Vec<CellFailure>,
    /// Atoms in no cell `(n-1/3, n+1/3)`.
    #[serde(with = "scalar::fraction_vec")]
    pub stray_atoms: Vec<Rational>,
    pub holds: bool,
}

/// Unit mass on every full cell `(n-1/3, n+1/3)` of `I_s`, and no atom
/// outside the union of cells.
pub fn cell_mass_report(measure: &DiscreteMeasure, s: u32) -> CellMassReport {
    let third = frac(1, 3);
    let mut cells: BTreeMap<BigInt, Rational> = BTreeMap::new();
    let mut stray_atoms = Vec::new();
    for a in measure.atoms() {
        let n = scalar::nearest_integer(&a.position);
        if (&a.position - Rational::from_integer(n.clone())).abs() < third {
            *cells.entry(n).or_insert_with(Rational::zero) += &a.mass;
        } else {
            stray_atoms.push(a.position.clone());
        }
    }
    let half = ((pow3(s) - int(1)) / int(2)).to_integer();
    let half = half.to_i64().expect("stage index keeps cells in i64 range");
    let mut failures = Vec::new();
    for n in -half..=half {
        let mass = cells
            .get(&BigInt::from(n))
            .cloned()
            .unwrap_or_else(Rational::zero);
        if !mass.is_one() {
            failures.push(CellFailure { n, mass });
        }
    }
    CellMassReport {
        s,
        cells_checked: (2 * half + 1) as usize,
        holds: failures.is_empty() && stray_atoms.is_empty(),
        failures,
        stray_atoms,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TailCertificate {
    pub n: u32,
    /// Truncation index of the explicit partial sum.
    pub m: u32,
    /// `Σ_{k=n}^{m} r_k + r_{m+1}/(1 - 2^{-(2m+5)}) ≥ Σ_{k≥n} r_k`.
    #[serde(with = "scalar::fraction")]
    pub lhs_upper_bound: Rational,
    /// `2^{-n²}/(2^{2n}-1)`, the closed-form intermediate bound.
    #[serde(with = "scalar::fraction")]
    pub closed_form_bound: Rational,
    #[serde(with = "scalar::fraction")]
    pub rhs: Rational,
    pub holds: bool,
}

/// Rigorous upper bound on `Σ_{k≥n} r_k`: the explicit sum up to `m` plus a
/// geometric majorant of the rest, using `r_{k+1}/r_k = 2^{-(2k+3)}`.
pub fn tail_upper_bound(n: u32, m: u32) -> Result<Rational> {
    if n == 0 || m < n {
        return Err(Error::InvalidArgument(format!(
            "tail bound needs 1 <= n <= m, got n={n}, m={m}"
        )));
    }
    let partial: Rational = (n..=m).map(|k| r(k).expect("k >= 1")).sum();
    let ratio = pow2_neg(2 * m + 5);
    Ok(partial + r(m + 1)? / (Rational::one() - ratio))
}

fn tail_certificate(n: u32, m: u32, rhs: Rational) -> Result<TailCertificate> {
    let lhs_upper_bound = tail_upper_bound(n, m)?;
    let closed_form_bound =
        pow2_neg(n * n) / (Rational::from_integer(BigInt::one() << (2 * n) as usize) - int(1));
    let holds =
        lhs_upper_bound < rhs && lhs_upper_bound <= closed_form_bound && closed_form_bound < rhs;
    Ok(TailCertificate {
        n,
        m,
        lhs_upper_bound,
        closed_form_bound,
        rhs,
        holds,
    })
}

/// `Σ_{k≥N} r_k < r_{N-1}/(3(N-1))` for `N ≥ 2`, truncating at `M = N+8`.
pub fn verify_tail_estimate(n: u32) -> Result<TailCertificate> {
    verify_tail_estimate_with(n, n + 8)
}

pub fn verify_tail_estimate_with(n: u32, m: u32) -> Result<TailCertificate> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "tail estimate needs N >= 2, got {n}"
        )));
    }
    let rhs = r(n - 1)? / int(3 * (n as i64 - 1));
    tail_certificate(n, m, rhs)
}

/// `Σ_{k≥1} r_k < 1/3`.
pub fn verify_total_offset_sum() -> Result<TailCertificate> {
    tail_certificate(1, 9, frac(1, 3))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparationReport {
    pub s: u32,
    #[serde(with = "scalar::fraction_opt")]
    pub min_gap: Option<Rational>,
    /// `r_s/s - 2 Σ_{k>s} r_k` (upper-bounded tail).
    #[serde(with = "scalar::fraction")]
    pub lower_bound: Rational,
    pub holds: bool,
}

/// Minimum gap of `μ_s` against `r_s/s - 2 Σ_{k>s} r_k > 0`.
pub fn separation_report(stage: &StageMeasure) -> Result<SeparationReport> {
    let s = stage.s.max(1);
    let lower_bound = r(s)? / int(s as i64) - tail_upper_bound(s + 1, s + 9)? * int(2);
    let min_gap = stage.measure.min_gap();
    let holds = lower_bound.is_positive()
        && min_gap
            .as_ref()
            .is_none_or(|g| g.is_positive() && g >= &lower_bound);
    Ok(SeparationReport {
        s: stage.s,
        min_gap,
        lower_bound,
        holds,
    })
}

/// The image `T_{k_h}⋯T_{k_j} δ_y`, shifted onto the lattice, inside a
/// stage measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterCertificate {
    /// Ancestor atom `y` of `μ_{k_j - 1}`.
    #[serde(with = "scalar::fraction")]
    pub ancestor: Rational,
    /// Sum of the lattice shifts `±3^{k-1}` along the path.
    #[serde(with = "scalar::fraction")]
    pub lattice_offset: Rational,
    #[serde(with = "scalar::fraction")]
    pub center: Rational,
    pub ks: Vec<u32>,
    /// `Π 2k_i`.
    pub q: u64,
    /// `Σ r_{k_i}`.
    #[serde(with = "scalar::fraction")]
    pub eta: Rational,
    #[serde(with = "scalar::fraction_vec")]
    pub members: Vec<Rational>,
    #[serde(with = "scalar::fraction")]
    pub member_mass: Rational,
}

/// Collects the descendants of the ancestor atom `y` that went through the
/// averaging operators `ks` (strictly increasing) with total lattice shift
/// `lattice_offset`, and checks:
///
/// * there are exactly `q = Π 2k` of them, each of mass `μ(y)/q`;
/// * they sit within `η = Σ r_k` of `y + lattice_offset`, and no other atom
///   of the stage does;
/// * the iterated images `δ_y, T_{k_j}δ_y, T_{k_{j+1}}T_{k_j}δ_y, …` have
///   pairwise disjoint supports, the last one matching the members.
pub fn cluster_certificate(
    stage: &StageMeasure,
    y: &Rational,
    lattice_offset: &Rational,
    ks: &[u32],
) -> Result<ClusterCertificate> {
    if ks.windows(2).any(|w| w[0] >= w[1]) || ks.first() == Some(&0) {
        return Err(Error::InvalidArgument(format!(
            "cluster indices must be positive and strictly increasing: {ks:?}"
        )));
    }
    if ks.last().is_some_and(|&k| k > stage.s) {
        return Err(Error::InvalidArgument(format!(
            "cluster indices {ks:?} exceed stage {}",
            stage.s
        )));
    }
    let first_k = ks.first().copied().unwrap_or(stage.s + 1);
    let q: u64 = ks.iter().map(|&k| 2 * k as u64).product();
    let eta: Rational = ks.iter().map(|&k| r(k).expect("k >= 1")).sum();
    let center = y + lattice_offset;
    let reach = Interval::closed(&center - &eta, &center + &eta);

    let mut members = Vec::new();
    let mut ancestor_mass = None;
    let atoms = stage.measure.atoms();
    let start = atoms.partition_point(|a| a.position < reach.lo);
    let in_reach = stage.measure.atoms_in(&reach).len();
    for (atom, prov) in atoms[start..start + in_reach]
        .iter()
        .zip(&stage.provenance[start..start + in_reach])
    {
        let split = prov.steps.partition_point(|st| st.k < first_k);
        let (before, after) = prov.steps.split_at(split);
        let after_ks: Vec<u32> = after.iter().map(|st| st.k).collect();
        if after_ks != ks {
            continue;
        }
        let lattice: Rational = after.iter().map(Step::lattice_shift).sum();
        let ancestor: Rational = before.iter().map(Step::displacement).sum();
        if &lattice != lattice_offset || &ancestor != y {
            continue;
        }
        let prefix = Provenance {
            steps: before.to_vec(),
        };
        ancestor_mass = Some(prefix.mass());
        members.push(atom.clone());
    }
    let Some(ancestor_mass) = ancestor_mass else {
        return Err(Error::NotAnAncestor(Box::new(y.clone())));
    };

    if members.len() as u64 != q {
        return Err(Error::ClusterCheck(format!(
            "{} members, expected q = {q}",
            members.len()
        )));
    }
    if in_reach as u64 != q {
        return Err(Error::ClusterCheck(format!(
            "{in_reach} atoms within eta of {center}, expected q = {q}"
        )));
    }
    let member_mass = &ancestor_mass / Rational::from_integer(BigInt::from(q));
    if let Some(bad) = members.iter().find(|a| a.mass != member_mass) {
        return Err(Error::ClusterCheck(format!(
            "member {} has mass {}, expected {member_mass}",
            bad.position, bad.mass
        )));
    }

    // Iterated images of δ_y must have disjoint supports.
    let mut image = DiscreteMeasure::from_atoms(
        vec![Atom::new(y.clone(), int(1))],
        Interval::closed(y.clone(), y.clone()),
    )?;
    let mut seen: BTreeSet<Rational> = image.positions().cloned().collect();
    for &k in ks {
        image = image.averaging_operator(k)?;
        for p in image.positions() {
            if !seen.insert(p.clone()) {
                return Err(Error::ClusterCheck(format!(
                    "iterated images overlap at {p} (k = {k})"
                )));
            }
        }
    }
    let expected: Vec<Rational> = image.positions().map(|p| p + lattice_offset).collect();
    let got: Vec<Rational> = members.iter().map(|a| a.position.clone()).collect();
    if expected != got {
        return Err(Error::ClusterCheck(
            "members differ from the shifted iterated image".into(),
        ));
    }

    Ok(ClusterCertificate {
        ancestor: y.clone(),
        lattice_offset: lattice_offset.clone(),
        center,
        ks: ks.to_vec(),
        q,
        eta,
        members: got,
        member_mass,
    })
}

/// Canonicalisation merge count for a raw atom list; used by tests to
/// confirm the copies in a stage never collide.
pub fn merge_events(atoms: Vec<Atom>) -> usize {
    canonicalize(atoms).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_values() {
        assert_eq!(r(1).unwrap(), frac(1, 16));
        assert_eq!(r(2).unwrap(), frac(1, 512));
        assert_eq!(r(3).unwrap(), frac(1, 65536));
        assert!(r(0).is_err());
    }

    #[test]
    fn support_intervals() {
        assert_eq!(support_interval(0), Interval::open(frac(-1, 3), frac(1, 3)));
        assert_eq!(support_interval(1), Interval::open(frac(-4, 3), frac(4, 3)));
        assert_eq!(
            support_interval(2),
            Interval::open(frac(-13, 3), frac(13, 3))
        );
    }

    #[test]
    fn stage_zero_and_one() {
        let s0 = build_stage(0).unwrap();
        assert_eq!(s0.measure.atoms(), &[Atom::new(int(0), int(1))]);

        let s1 = build_stage(1).unwrap();
        let expected: Vec<Atom> = [(-17, 16), (-15, 16), (15, 16), (17, 16)]
            .iter()
            .map(|&(p, q)| Atom::new(frac(p, q), frac(1, 2)))
            .chain([Atom::new(int(0), int(1))])
            .collect();
        let (expected, _) = canonicalize(expected);
        assert_eq!(s1.measure.atoms(), expected.as_slice());
        assert_eq!(s1.measure.total_mass(), int(3));
    }

    #[test]
    fn stage_two_counts() {
        let s2 = build_stage(2).unwrap();
        assert_eq!(s2.measure.len(), 45);
        assert_eq!(s2.measure.total_mass(), int(9));
        assert_eq!(s2.merges, 0);
        for (a, p) in s2.measure.atoms().iter().zip(&s2.provenance) {
            assert_eq!(a.position, p.position());
            assert_eq!(a.mass, p.mass());
        }
    }

    #[test]
    fn atom_cap_is_enforced() {
        let err = build_stage_capped(3, 100).unwrap_err();
        assert!(matches!(
            err,
            Error::AtomCap {
                stage: 3,
                projected: 585,
                cap: 100
            }
        ));
    }

    #[test]
    fn atom_count_law() {
        let counts: Vec<u128> = (0..=5).map(atom_count).collect();
        assert_eq!(counts, vec![1, 5, 45, 585, 9945, 208845]);
    }

    #[test]
    fn limit_window_examples() {
        let cache = StageCache::default();
        let cell0 = cache
            .limit_window(&Interval::closed(frac(-1, 3), frac(1, 3)))
            .unwrap();
        assert_eq!(cell0.atoms(), &[Atom::new(int(0), int(1))]);

        let near3 = cache
            .limit_window(&Interval::closed(frac(5, 2), frac(7, 2)))
            .unwrap();
        let expected: Vec<Atom> = [(-2, 1024), (-1, 1024), (1, 1024), (2, 1024)]
            .iter()
            .map(|&(p, q)| Atom::new(int(3) + frac(p, q), frac(1, 4)))
            .collect();
        assert_eq!(near3.atoms(), expected.as_slice());

        let small = Interval::closed(int(-1), int(1));
        let big = cache
            .limit_window(&Interval::closed(int(-4), int(4)))
            .unwrap();
        assert_eq!(
            big.restrict(&small).unwrap(),
            cache.limit_window(&small).unwrap()
        );
    }

    #[test]
    fn next_stage_on_matches_full_build() {
        let cache = StageCache::default();
        let s2 = cache.stage(2).unwrap();
        let s3 = cache.stage(3).unwrap();
        let w = Interval::closed(frac(-13, 3), frac(13, 3));
        assert_eq!(
            next_stage_on(&s2, &w).unwrap(),
            s3.measure.restrict(&w).unwrap()
        );
        let w = Interval::open(int(1), frac(7, 2));
        assert_eq!(
            next_stage_on(&s2, &w).unwrap(),
            s3.measure.restrict(&w).unwrap()
        );
    }

    #[test]
    fn tail_estimate_examples() {
        let c2 = verify_tail_estimate(2).unwrap();
        assert_eq!(c2.rhs, frac(1, 48));
        assert!(c2.holds);
        assert!(verify_total_offset_sum().unwrap().holds);
        assert!(verify_tail_estimate(10).unwrap().holds);
        assert!(verify_tail_estimate(1).is_err());
        // The explicit sum is a strict lower bound of the tail; the bound
        // stays above it.
        let partial: Rational = (2..=10).map(|k| r(k).unwrap()).sum();
        assert!(c2.lhs_upper_bound > partial);
    }

    #[test]
    fn support_examples() {
        let cache = StageCache::default();
        for s in 0..=2 {
            assert!(cache.verify_support_in_is(s).unwrap());
        }
        let s2 = cache.stage(2).unwrap();
        assert!(s2
            .measure
            .positions()
            .all(|p| p > &frac(-13, 3) && p < &frac(13, 3)));
    }

    #[test]
    fn cell_mass_examples() {
        let cache = StageCache::default();
        for s in 0..=2 {
            assert!(cache.verify_cell_mass(s).unwrap());
        }
        let s1 = cache.stage(1).unwrap();
        let cell = s1
            .measure
            .restrict(&Interval::open(frac(-4, 3), frac(-2, 3)))
            .unwrap();
        assert_eq!(cell.total_mass(), int(1));
    }

    #[test]
    fn cell_mass_flags_corruption() {
        let s1 = build_stage(1).unwrap();
        let mut atoms = s1.measure.atoms().to_vec();
        atoms[1].mass = -atoms[1].mass.clone();
        let bad = DiscreteMeasure::from_atoms(atoms, s1.measure.window().clone()).unwrap();
        let report = cell_mass_report(&bad, 1);
        assert!(!report.holds);
        assert_eq!(
            report.failures,
            vec![CellFailure {
                n: -1,
                mass: int(0)
            }]
        );
    }

    #[test]
    fn mass_decay_examples() {
        let cache = StageCache::default();
        let r1 = cache
            .verify_mass_decay(1, &Interval::closed(int(-5), int(5)))
            .unwrap();
        assert!(r1.holds);
        assert!(r1.max_mass_outside.unwrap() <= frac(1, 4));
        let r2 = cache
            .verify_mass_decay(2, &Interval::closed(int(-14), int(14)))
            .unwrap();
        assert!(r2.holds);
        assert!(r2.max_mass_outside.unwrap() <= frac(1, 6));
        assert!(cache
            .verify_mass_decay(0, &Interval::closed(int(-5), int(5)))
            .is_err());
        assert!(cache
            .verify_mass_decay(2, &Interval::closed(int(-2), int(2)))
            .is_err());
    }

    #[test]
    fn cluster_examples() {
        let s2 = build_stage(2).unwrap();
        let c = cluster_certificate(&s2, &int(0), &int(3), &[2]).unwrap();
        assert_eq!(c.q, 4);
        assert_eq!(c.eta, frac(1, 512));
        let expected: Vec<Rational> = [(-2, 1024), (-1, 1024), (1, 1024), (2, 1024)]
            .iter()
            .map(|&(p, q)| int(3) + frac(p, q))
            .collect();
        assert_eq!(c.members, expected);

        let s3 = build_stage(3).unwrap();
        let c = cluster_certificate(&s3, &int(0), &int(12), &[2, 3]).unwrap();
        assert_eq!(c.q, 24);
        assert_eq!(c.eta, frac(1, 512) + frac(1, 65536));
        assert_eq!(c.member_mass, frac(1, 24));

        let c = cluster_certificate(&s2, &frac(15, 16), &int(0), &[]).unwrap();
        assert_eq!(
            (c.q, c.eta.clone(), c.members.clone()),
            (1, int(0), vec![frac(15, 16)])
        );

        assert!(matches!(
            cluster_certificate(&s2, &frac(1, 7), &int(3), &[2]),
            Err(Error::NotAnAncestor(_))
        ));
    }

    #[test]
    fn separation_holds_for_small_stages() {
        for s in 1..=3 {
            let report = separation_report(&build_stage(s).unwrap()).unwrap();
            assert!(report.holds, "{report:?}");
        }
    }
}
