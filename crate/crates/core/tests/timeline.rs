use lindeberg_lab::census::Cycle;
use lindeberg_lab::gluing::Gluer;
use lindeberg_lab::piecewise::PiecewisePoly;
use lindeberg_lab::point::{birkhoff_integral, flow, FlowPoint};
use lindeberg_lab::regularity::RegularityFunction;
use lindeberg_lab::system::{CylinderTable, Observable, RoofFunction, SymbolicSystem};
use lindeberg_lab::timeline::*;
use proptest::prelude::*;

struct Setup {
    sys: SymbolicSystem,
    roof: RoofFunction,
    f: Observable,
    lam: RegularityFunction,
}

fn setup() -> Setup {
    let sys = SymbolicSystem::full_shift(2);
    let table = CylinderTable::build("roof", &sys, 2, &[(vec![0, 1], 1.4), (vec![1, 0], 0.7), (vec![1, 1], 1.1)], Some(1.0)).unwrap();
    let f = Observable::build(
        "f",
        &sys,
        2,
        &[(vec![0, 1], vec![1.0, -2.0]), (vec![1, 1], vec![0.0, 0.0, 2.0]), (vec![1, 0], vec![-0.5])],
        Some(vec![0.25]),
        1.0,
        1.0,
    )
    .unwrap();
    let lam = RegularityFunction::new(&sys, CylinderTable::per_symbol("lambda", &sys, &[1.0, 1.0]).unwrap()).unwrap();
    Setup { roof: RoofFunction::new(table).unwrap(), f, lam, sys }
}

fn primitive_word() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 1..7).prop_filter("primitive", |w| lindeberg_lab::census::is_primitive(w))
}

/// Dense midpoint rule; integrand values from `g`.
fn midpoint(lo: f64, hi: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| g(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cycle_timeline_matches_flow_integral(w in primitive_word(), tau in 0.0f64..40.0, s in 0.0f64..10.0) {
        let st = setup();
        let tl = Timeline::for_cycle(&w, &st.roof, &st.f);
        let x = FlowPoint::periodic_word(&w, 0.0);
        let direct = birkhoff_integral(&x, &st.roof, &st.f, s, s + tau);
        prop_assert!((tl.integral(s, s + tau) - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        let n = w.len() as i64;
        let period: f64 = (0..n).map(|j| st.roof.at(|i| w[i.rem_euclid(n) as usize], j)).sum();
        prop_assert!((tl.period() - period).abs() < 1e-12);
        // Periodic additivity, also backward.
        prop_assert!((tl.cumulative(-tl.period()) + tl.period_integral()).abs() < 1e-9);
    }

    #[test]
    fn glued_timeline_matches_flow_integral(a in primitive_word(), b in primitive_word(), c in 1usize..4, tau in 0.0f64..60.0, s in 0.0f64..20.0) {
        let st = setup();
        let mut ca = Cycle::new(&st.sys, &st.roof, &st.lam, &a).unwrap();
        let mut cb = Cycle::new(&st.sys, &st.roof, &st.lam, &b).unwrap();
        ca.select_base_point(&st.lam, 0.5);
        cb.select_base_point(&st.lam, 0.5);
        let t = ca.flow_period.max(cb.flow_period);
        let g = Gluer::new(&st.sys, &st.roof, t, c, 2.0).unwrap().glue(&[&ca, &cb], &[0, 1]).unwrap();
        let tl = TimelineBuilder::new(&st.roof, &st.f).build(&g);
        prop_assert!((tl.period() - g.period).abs() < 1e-9);
        let direct = birkhoff_integral(&g.realized, &st.roof, &st.f, s, s + tau);
        prop_assert!((tl.integral(s, s + tau) - direct).abs() < 1e-9 * (1.0 + direct.abs()), "{} vs {direct}", tl.integral(s, s + tau));
    }

    #[test]
    fn window_functional_is_pointwise_exact(w in primitive_word(), a in 0.0f64..5.0, len_ab in 0.0f64..10.0, len in 0.5f64..15.0, t in 0.0f64..1.0) {
        let st = setup();
        let tl = Timeline::for_cycle(&w, &st.roof, &st.f);
        let b = a + len_ab;
        let h = tl.window_functional(a, b, len);
        prop_assert!((h.lo(), h.hi()) == (0.0, len));
        let at = t * len;
        let x = flow(&FlowPoint::periodic_word(&w, 0.0), &st.roof, at);
        let direct = birkhoff_integral(&x, &st.roof, &st.f, a, b);
        prop_assert!((h.eval(at) - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        let mean = midpoint(0.0, len, 4000, |u| h.eval(u));
        prop_assert!((h.integral() - mean).abs() < 1e-4 * (1.0 + mean.abs()));
    }

    #[test]
    fn piecewise_functionals_match_quadrature(
        cuts in prop::collection::vec(0.1f64..2.0, 1..5),
        coefs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..4), 5),
        m in -1.0f64..1.0,
        c in 0.0f64..2.0,
        x in -2.0f64..2.0,
    ) {
        let mut breaks = vec![0.0];
        for d in &cuts {
            breaks.push(breaks.last().unwrap() + d);
        }
        let polys: Vec<Vec<f64>> = coefs.into_iter().take(cuts.len()).collect();
        let h = PiecewisePoly { breaks, polys };
        let (lo, hi) = (h.lo(), h.hi());
        let n = 20_000;
        let sq = midpoint(lo, hi, n, |t| (h.eval(t) - m).powi(2));
        prop_assert!((h.sq_dev_integral(m) - sq).abs() < 1e-3 * (1.0 + sq));
        let lind = midpoint(lo, hi, n, |t| { let d = h.eval(t) - m; if d.abs() > c { d * d } else { 0.0 } });
        let exact = h.lindeberg_integral(m, c);
        prop_assert!(exact <= h.sq_dev_integral(m) + 1e-12);
        prop_assert!((exact - lind).abs() < 5e-3 * (1.0 + sq), "{exact} vs {lind}");
        let le = midpoint(lo, hi, n, |t| if h.eval(t) <= x { 1.0 } else { 0.0 });
        prop_assert!((h.measure_le(x) - le).abs() < 5e-3 * (hi - lo));
        let (rlo, rhi) = h.range();
        prop_assert!(h.measure_le(rhi + 1e-9) >= (hi - lo) * (1.0 - 1e-12));
        prop_assert!(h.measure_le(rlo - 1e-9) <= 1e-12);
    }
}

#[test]
fn sums_of_functionals_are_pointwise_sums() {
    let st = setup();
    let a = Timeline::for_cycle(&[0, 1, 1], &st.roof, &st.f).window_functional(0.0, 3.0, 5.0);
    let b = Timeline::for_cycle(&[0, 0, 1], &st.roof, &st.f).window_functional(1.0, 2.5, 5.0);
    let s = sum_functionals([&a, &b], 5.0);
    let w = weighted_sum([(&a, 0.25), (&b, 0.75)], 5.0);
    for i in 0..=50 {
        let t = i as f64 * 0.1;
        assert!((s.eval(t) - a.eval(t) - b.eval(t)).abs() < 1e-12);
        assert!((w.eval(t) - 0.25 * a.eval(t) - 0.75 * b.eval(t)).abs() < 1e-12);
    }
}

#[test]
fn constant_pieces() {
    let h = PiecewisePoly::constant(0.0, 2.0, 3.0);
    assert!(h.is_constant());
    assert_eq!(h.mean(), 3.0);
    assert_eq!(h.lindeberg_integral(1.0, 1.5), 8.0);
    assert_eq!(h.lindeberg_integral(1.0, 2.0), 0.0);
    assert_eq!(h.measure_le(3.0), 2.0);
}
