use std::collections::BTreeMap;

use apmeasure::construction::{
    atom_count, build_stage, build_stage_capped, cell_mass_report, cluster_certificate,
    next_stage_on, separation_report, support_interval, support_report, verify_total_offset_sum,
    StageCache,
};
use apmeasure::scalar::{frac, int, pow2_neg, pow3};
use apmeasure::{combine, make_measure, Error, Interval, Rational};

/// Stage `s` straight from the recursion, as a position -> mass map.
fn enumerate(s: u32) -> BTreeMap<Rational, Rational> {
    let mut mu = BTreeMap::from([(int(0), int(1))]);
    for k in 1..=s {
        let rk = pow2_neg((k + 1) * (k + 1));
        let lattice = pow3(k - 1);
        let mut next = mu.clone();
        for (x, m) in &mu {
            for sign in [-1, 1] {
                for j in 1..=k as i64 {
                    for e in [-1, 1] {
                        let p = x + &lattice * int(sign) + &rk * frac(e * j, k as i64);
                        *next.entry(p).or_insert_with(|| int(0)) += m / int(2 * k as i64);
                    }
                }
            }
        }
        mu = next;
    }
    mu
}

#[test]
fn stages_match_independent_enumeration() {
    for s in 0..=3 {
        let built = build_stage(s).unwrap();
        let oracle = enumerate(s);
        let got: Vec<(Rational, Rational)> = built
            .measure
            .atoms()
            .iter()
            .map(|a| (a.position.clone(), a.mass.clone()))
            .collect();
        let want: Vec<(Rational, Rational)> = oracle.into_iter().collect();
        assert_eq!(got, want, "stage {s}");
    }
}

#[test]
fn stages_match_operator_formula() {
    let mut prev = build_stage(0).unwrap().measure;
    for k in 1..=3u32 {
        let averaged = prev.averaging_operator(k).unwrap();
        let shift = pow3(k - 1);
        let left = averaged.shift(&-&shift);
        let right = averaged.shift(&shift);
        let wide = support_interval(k).closure();
        let widen = |m: &apmeasure::DiscreteMeasure| {
            make_measure(
                m.atoms()
                    .iter()
                    .map(|a| (a.position.clone(), a.mass.clone())),
                wide.clone(),
            )
            .unwrap()
        };
        let sum = combine(&int(1), &widen(&left), &int(1), &widen(&right)).unwrap();
        let next = combine(&int(1), &widen(&prev), &int(1), &sum).unwrap();
        let built = build_stage(k).unwrap().measure;
        assert_eq!(next.atoms(), built.atoms(), "stage {k}");
        prev = built;
    }
}

#[test]
fn counts_masses_and_disjointness() {
    let cache = StageCache::default();
    for s in 0..=4 {
        let stage = cache.stage(s).unwrap();
        assert_eq!(stage.measure.len() as u128, atom_count(s));
        assert_eq!(stage.measure.total_mass(), pow3(s));
        assert_eq!(stage.merges, 0);
        assert!(support_report(&stage.measure, s).holds);
        if s >= 1 {
            assert!(cell_mass_report(&stage.measure, s).holds);
            let sep = separation_report(&stage).unwrap();
            assert!(sep.holds, "separation at stage {s}: {sep:?}");
        }
    }
}

#[test]
fn provenance_reproduces_every_atom() {
    let stage = build_stage(4).unwrap();
    for (atom, prov) in stage.measure.atoms().iter().zip(&stage.provenance) {
        assert_eq!(prov.position(), atom.position);
        assert_eq!(prov.mass(), atom.mass);
        assert!(prov.ks().windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn cap_is_enforced_before_allocation() {
    let err = build_stage_capped(5, 10_000).unwrap_err();
    assert!(matches!(
        err,
        Error::AtomCap {
            stage: 5,
            projected: 208_845,
            cap: 10_000
        }
    ));
    assert!(build_stage_capped(4, 10_000).is_ok());
}

#[test]
fn limit_window_agrees_with_later_stages() {
    let cache = StageCache::default();
    let s4 = cache.stage(4).unwrap();
    for (lo, hi) in [(-1, 1), (-4, 4), (-13, 13), (2, 11), (-40, -20)] {
        let j = Interval::closed(int(lo), int(hi));
        let lim = cache.limit_window(&j).unwrap();
        assert_eq!(lim, s4.measure.restrict(&j).unwrap(), "window {j}");
    }
}

#[test]
fn pruned_next_stage_matches_full_build() {
    let s2 = build_stage(2).unwrap();
    let s3 = build_stage(3).unwrap();
    let j = Interval::new(frac(-7, 3), frac(29, 8), true, false).unwrap();
    assert_eq!(
        next_stage_on(&s2, &j).unwrap(),
        s3.measure.restrict(&j).unwrap()
    );
}

#[test]
fn mass_decay_needs_window_around_is() {
    let cache = StageCache::default();
    let small = Interval::closed(int(-1), int(1));
    assert!(cache.verify_mass_decay(2, &small).is_err());
    assert!(cache.verify_mass_decay(0, &small).is_err());
    let report = cache
        .verify_mass_decay(2, &Interval::closed(int(-13), int(13)))
        .unwrap();
    assert!(report.holds);
    assert_eq!(report.max_mass_outside, Some(frac(1, 6)));
}

#[test]
fn offset_sum_stays_below_a_third() {
    let cert = verify_total_offset_sum().unwrap();
    assert!(cert.holds);
    assert!(cert.lhs_upper_bound < frac(1, 3));
}

#[test]
fn clusters_around_lattice_points() {
    let s3 = build_stage(3).unwrap();
    let c = cluster_certificate(&s3, &int(0), &int(-9), &[3]).unwrap();
    assert_eq!(c.q, 6);
    assert_eq!(c.members.len(), 6);
    assert_eq!(c.member_mass, frac(1, 6));
    let c = cluster_certificate(&s3, &int(0), &int(12), &[2, 3]).unwrap();
    assert_eq!(c.q, 24);
    assert_eq!(c.member_mass, frac(1, 24));
}
