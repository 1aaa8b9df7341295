use lindeberg_lab::point::*;
use lindeberg_lab::system::{CylinderTable, Observable, RoofFunction, SymbolicSystem};
use proptest::prelude::*;

fn setup() -> (RoofFunction, Observable) {
    let s = SymbolicSystem::full_shift(2);
    let table = CylinderTable::build(
        "roof",
        &s,
        2,
        &[(vec![0, 0], 1.0), (vec![0, 1], 1.3), (vec![1, 0], 0.8), (vec![1, 1], 1.5)],
        None,
    )
    .unwrap();
    let f = Observable::build("f", &s, 1, &[(vec![0], vec![0.5, 1.0]), (vec![1], vec![-1.0, 0.0, 3.0])], None, 1.0, 1.0).unwrap();
    (RoofFunction::new(table).unwrap(), f)
}

fn r(w: &[u8], roof: &RoofFunction, j: i64) -> f64 {
    let n = w.len() as i64;
    roof.at(|i| w[i.rem_euclid(n) as usize], j)
}

/// Time coordinate of a point on the orbit of w started at symbol 0, height 0.
fn abs_time(y: &FlowPoint, w: &[u8], roof: &RoofFunction) -> f64 {
    let before: f64 = if y.pos >= 0 { (0..y.pos).map(|j| r(w, roof, j)).sum() } else { -(y.pos..0).map(|j| r(w, roof, j)).sum::<f64>() };
    before + y.height
}

/// ∫_a^b f along the orbit of w, by Simpson's rule on each fiber piece
/// (exact for the quadratic profiles used here).
fn quadrature(w: &[u8], roof: &RoofFunction, f: &Observable, a: f64, b: f64) -> f64 {
    let n = w.len() as i64;
    let seq = |i: i64| w[i.rem_euclid(n) as usize];
    let mut acc = 0.0;
    let mut start = 0.0;
    let mut j = 0i64;
    while start < b {
        let len = r(w, roof, j);
        let (lo, hi) = (a.max(start), b.min(start + len));
        if hi > lo {
            let g = |t: f64| f.value_at(seq, j, (t - start) / len);
            acc += (hi - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi));
        }
        start += len;
        j += 1;
    }
    acc
}

fn word() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 1..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flow_advances_time_exactly(w in word(), s in 0.0f64..40.0, t in -30.0f64..60.0) {
        let (roof, _) = setup();
        let x = flow(&FlowPoint::periodic_word(&w, 0.0), &roof, s);
        prop_assert!((abs_time(&x, &w, &roof) - s).abs() < 1e-9);
        let y = flow(&x, &roof, t);
        prop_assert!((abs_time(&y, &w, &roof) - (s + t)).abs() < 1e-9);
        prop_assert!(y.height >= 0.0 && y.height < y.roof_here(&roof) + 1e-12);
    }

    #[test]
    fn flow_is_a_group_action(w in word(), s in -20.0f64..20.0, t in -20.0f64..20.0) {
        let (roof, _) = setup();
        let x = FlowPoint::periodic_word(&w, 0.0);
        let a = flow(&flow(&x, &roof, s), &roof, t);
        let b = flow(&x, &roof, s + t);
        prop_assert!((abs_time(&a, &w, &roof) - abs_time(&b, &w, &roof)).abs() < 1e-9);
    }

    #[test]
    fn birkhoff_integral_matches_quadrature(w in word(), s in 0.0f64..10.0, len in 0.0f64..50.0) {
        let (roof, f) = setup();
        let x = FlowPoint::periodic_word(&w, 0.0);
        let exact = birkhoff_integral(&x, &roof, &f, s, s + len);
        let q = quadrature(&w, &roof, &f, s, s + len);
        prop_assert!((exact - q).abs() < 1e-9 * (1.0 + q.abs()), "{exact} vs {q}");
    }

    #[test]
    fn birkhoff_cocycle(w in word(), h in 0.0f64..5.0, s in 0.0f64..20.0, t in 0.0f64..20.0) {
        let (roof, f) = setup();
        let x = flow(&FlowPoint::periodic_word(&w, 0.0), &roof, h);
        let whole = birkhoff_integral(&x, &roof, &f, 0.0, s + t);
        let first = birkhoff_integral(&x, &roof, &f, 0.0, s);
        let rest = birkhoff_integral(&flow(&x, &roof, s), &roof, &f, 0.0, t);
        prop_assert!((whole - first - rest).abs() < 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn bowen_distance_is_symmetric_and_monotone(a in word(), b in word(), t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
        let (roof, _) = setup();
        let x = FlowPoint::periodic_word(&a, 0.0);
        let y = FlowPoint::periodic_word(&b, 0.0);
        let d1 = bowen_distance(&x, &y, &roof, t1);
        prop_assert_eq!(d1, bowen_distance(&y, &x, &roof, t1));
        prop_assert!(bowen_distance(&x, &y, &roof, t1 + dt) >= d1);
        prop_assert!(d1 >= symbolic_distance(&x, &y));
        prop_assert_eq!(bowen_distance(&x, &x, &roof, t1 + dt), 0.0);
    }

    #[test]
    fn resolved_distance_is_an_upper_bound_capped_below(a in word(), b in word(), n in 0u32..6) {
        let x = FlowPoint::periodic_word(&a, 0.0);
        let y = FlowPoint::periodic_word(&b, 0.0);
        let exact = symbolic_distance(&x, &y);
        let capped = symbolic_distance_resolved(&x, &y, n);
        prop_assert!(capped >= exact);
        prop_assert!(capped == exact || capped == 0.5f64.powi(n as i32 + 1));
    }
}

#[test]
fn symbolic_distance_examples() {
    let x = FlowPoint::periodic_word(&[0, 1], 0.0);
    let y = FlowPoint::periodic_word(&[0, 1, 1], 0.0);
    // Agree at 0 (0), +1 (1) and -1 (1), first disagree at +2.
    assert_eq!(symbolic_distance(&x, &y), 0.25);
    let z = FlowPoint::periodic_word(&[0, 1], 0.3);
    assert_eq!(symbolic_distance(&x, &z), 0.3);
}

#[test]
fn blocks_expand_runs() {
    use std::sync::Arc;
    let b = Block::from_runs(vec![
        Run { word: Arc::from(&[0u8, 1][..]), reps: 3 },
        Run { word: Arc::from(&[1u8][..]), reps: 0 },
        Run { word: Arc::from(&[1u8, 1, 0][..]), reps: 1 },
    ]);
    assert_eq!(b.len(), 9);
    assert_eq!(b.to_vec(), vec![0, 1, 0, 1, 0, 1, 1, 1, 0]);
    assert_eq!(b.runs().len(), 2);
    assert!((0..9).all(|i| b.get(i) == b.to_vec()[i]));
}

#[test]
fn eventually_periodic_points() {
    let (roof, f) = setup();
    let x = FlowPoint::new(Block::from_word(&[0]), Block::from_word(&[1, 1, 0, 1]), Block::from_word(&[1]), 0, 0.0);
    let sys = SymbolicSystem::full_shift(2);
    assert!(x.is_admissible(&sys));
    assert!(!x.is_purely_periodic());
    // Far right is the all-ones tail: roof 1.5, and -1 + 3u² averages to 0 on each fiber.
    let far = flow(&x, &roof, 1000.0);
    assert_eq!(far.symbol(0), 1);
    assert_eq!(far.roof_here(&roof), 1.5);
    let tail = birkhoff_integral(&far, &roof, &f, 0.0, 15.0);
    assert!(tail.abs() < 1e-9);
    let back = flow(&far, &roof, -1000.0);
    assert_eq!(back.pos, 0);
    assert!(back.height.abs() < 1e-9 || (back.height - back.roof_here(&roof)).abs() < 1e-9);
}
