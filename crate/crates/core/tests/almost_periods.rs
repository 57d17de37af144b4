use apmeasure::ap::{almost_period_defect, ap_certificate, defect_bound};
use apmeasure::construction::StageCache;
use apmeasure::pwl::PiecewiseLinearFn;
use apmeasure::scalar::{frac, int};
use apmeasure::{DiscreteMeasure, Interval, Rational};
use num_traits::Signed;

fn conv_at(f: &PiecewiseLinearFn, mu: &DiscreteMeasure, x: &Rational) -> Rational {
    mu.atoms()
        .iter()
        .map(|a| f.eval(&(x - &a.position)) * &a.mass)
        .sum()
}

#[test]
fn stage_two_certificate() {
    let cache = StageCache::default();
    let f = PiecewiseLinearFn::standard_triangle();
    let j = Interval::closed(frac(-1, 2), frac(1, 2));
    let cert = ap_certificate(&f, &frac(1, 10), &int(27), 2, &j, &cache).unwrap();
    assert!(cert.pass);
    assert_eq!(cert.rows.len(), 7);
    assert!(cert.max_defect <= frac(3, 512));
    assert!(cert.max_defect <= cert.predicted_bound);
    assert_eq!(cert.relative_density_gap, int(9));
    let zero = cert.rows.iter().find(|r| r.tau == int(0)).unwrap();
    assert_eq!(zero.defect, int(0));

    let strict = ap_certificate(&f, &int(0), &int(9), 2, &j, &cache).unwrap();
    assert!(!strict.pass);
}

#[test]
fn defect_dominates_sampled_differences() {
    let cache = StageCache::default();
    let f = PiecewiseLinearFn::standard_triangle();
    let j = Interval::closed(frac(-1, 2), frac(1, 2));
    let mu = cache
        .limit_window(&Interval::closed(int(-2), int(12)))
        .unwrap();
    for tau in [int(3), int(9)] {
        let d = almost_period_defect(&f, &cache, &tau, &j).unwrap();
        let mut sampled = int(0);
        for i in -240..=240 {
            let x = frac(i, 480);
            let diff = (conv_at(&f, &mu, &(&x + &tau)) - conv_at(&f, &mu, &x)).abs();
            sampled = sampled.max(diff);
        }
        assert!(sampled <= d.defect, "tau={tau}");
        let at_witness =
            (conv_at(&f, &mu, &(&d.witness + &tau)) - conv_at(&f, &mu, &d.witness)).abs();
        assert_eq!(at_witness, d.defect);
    }
    let d3 = almost_period_defect(&f, &cache, &int(3), &j).unwrap();
    assert!(d3.defect >= frac(9, 1024));
    assert!(d3.defect <= defect_bound(&f, 1).unwrap());
}

#[test]
fn wide_test_functions_are_rejected() {
    let cache = StageCache::default();
    let f = PiecewiseLinearFn::triangle(frac(1, 2)).unwrap();
    let j = Interval::closed(int(0), int(1));
    assert!(almost_period_defect(&f, &cache, &int(9), &j).is_err());
    assert!(ap_certificate(
        &PiecewiseLinearFn::standard_triangle(),
        &int(1),
        &int(9),
        0,
        &j,
        &cache
    )
    .is_err());
}
