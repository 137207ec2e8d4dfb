use proptest::prelude::*;

use varinf::functions::parse_family;
use varinf::geometry::{dist, Region};
use varinf::varprinciple::{ekeland_on_grid, GridSpace};
use varinf::{ExtValue, LimitValue};

fn ext() -> impl Strategy<Value = ExtValue> {
    prop_oneof![
        4 => (-1e6f64..1e6).prop_map(ExtValue::finite),
        1 => Just(ExtValue::INFINITY),
    ]
}

fn limit() -> impl Strategy<Value = LimitValue> {
    prop_oneof![
        4 => (-1e6f64..1e6).prop_map(LimitValue::finite),
        1 => Just(LimitValue::INFINITY),
        1 => Just(LimitValue::NEG_INFINITY),
    ]
}

proptest! {
    #[test]
    fn ext_add_is_commutative_and_absorbs_infinity(a in ext(), b in ext()) {
        let s = a + b;
        prop_assert_eq!(s.value().to_bits(), (b + a).value().to_bits());
        prop_assert!(!s.value().is_nan());
        prop_assert_eq!(s.is_infinite(), a.is_infinite() || b.is_infinite());
    }

    #[test]
    fn ext_sub_fails_only_on_two_infinities(a in ext(), b in ext()) {
        let r = a.checked_sub(b);
        prop_assert_eq!(r.is_err(), a.is_infinite() && b.is_infinite());
        if let Ok(v) = r {
            prop_assert!(!v.value().is_nan());
        }
    }

    #[test]
    fn ext_scale_keeps_domain(a in ext(), l in 0.0f64..10.0) {
        prop_assert_eq!(a.scale(l).is_infinite(), a.is_infinite());
    }

    #[test]
    fn ext_rejects_nan_and_minus_infinity(v in any::<f64>()) {
        let ok = ExtValue::new(v).is_ok();
        prop_assert_eq!(ok, !(v.is_nan() || v == f64::NEG_INFINITY));
    }

    #[test]
    fn limit_json_round_trip(a in limit()) {
        let s = serde_json::to_string(&a).unwrap();
        let b: LimitValue = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(a.value().to_bits(), b.value().to_bits());
    }

    #[test]
    fn limit_add_matches_floats_when_defined(a in limit(), b in limit()) {
        match a.checked_add(b) {
            Ok(s) => prop_assert_eq!(s.value(), a.value() + b.value()),
            Err(_) => prop_assert!((a.value() + b.value()).is_nan()),
        }
    }

    #[test]
    fn shrunk_box_is_rho_interior(
        lo in prop::collection::vec(-5.0f64..0.0, 1..4),
        w in 0.1f64..5.0,
        rho in 0.0f64..2.0,
        t in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let hi: Vec<f64> = lo.iter().map(|l| l + w).collect();
        let u = Region::new_box(lo.clone(), hi.clone()).unwrap();
        match u.shrink(rho) {
            None => prop_assert!(2.0 * rho > w),
            Some(v) => {
                let (a, b) = v.bounding_box();
                let x: Vec<f64> = a.iter().zip(&b).zip(&t).map(|((a, b), t)| a + t * (b - a)).collect();
                prop_assert!(u.interior_distance(&x) >= rho - 1e-12);
            }
        }
    }

    #[test]
    fn ball_projection_is_nearest(
        c in prop::collection::vec(-3.0f64..3.0, 2),
        r in 0.1f64..3.0,
        x in prop::collection::vec(-10.0f64..10.0, 2),
        y in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let u = Region::new_ball(c.clone(), r).unwrap();
        let p = u.project(&x);
        prop_assert!(dist(&p, &c) <= r + 1e-9);
        // any other member of the ball is at least as far from x
        let q: Vec<f64> = c.iter().zip(&y).map(|(c, y)| c + y * r / 2f64.sqrt()).collect();
        prop_assert!(dist(&x, &p) <= dist(&x, &q) + 1e-9);
    }

    #[test]
    fn grid_ekeland_satisfies_both_inequalities(
        vals in prop::collection::vec(prop_oneof![4 => -10.0f64..10.0, 1 => Just(f64::INFINITY)], 2..60),
        start in 0usize..60,
        eps in 0.01f64..5.0,
    ) {
        let n = vals.len();
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * 0.1]).collect();
        let mut vals = vals;
        let s = start % n;
        vals[s] = vals[s].min(0.0);
        let space = GridSpace::from_points(pts).unwrap();
        let f = |u: &[Vec<f64>]| ExtValue::new(vals[(u[0][0] / 0.1).round() as usize]).unwrap();
        let r = ekeland_on_grid(&f, &space, &[s], eps, 1).unwrap();
        let k = r.index[0];
        prop_assert!(r.exhaustive);
        prop_assert!(vals[k] <= vals[s]);
        for j in (0..n).filter(|j| *j != k) {
            let d = (j as f64 - k as f64).abs() * 0.1;
            prop_assert!(vals[k] < vals[j] + eps * d);
        }
    }

    #[test]
    fn finite_upper_sum_is_termwise(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        x in -2.0f64..2.0,
    ) {
        let src = format!("t1 := (dist ({a}) 1)\nt2 := (dist ({b}) 1)\n");
        let fam = parse_family(&src).unwrap();
        let want = (x - a).abs() + (x - b).abs();
        let got = fam.upper_sum(&[x]).unwrap().value.value();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want), "{} vs {}", got, want);
    }
}
