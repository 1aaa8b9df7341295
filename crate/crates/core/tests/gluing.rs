use lindeberg_lab::census::Cycle;
use lindeberg_lab::gluing::*;
use lindeberg_lab::regularity::RegularityFunction;
use lindeberg_lab::system::{CylinderTable, RoofFunction, SymbolicSystem};
use lindeberg_lab::LabError;

fn lambda(s: &SymbolicSystem) -> RegularityFunction {
    RegularityFunction::new(s, CylinderTable::per_symbol("lambda", s, &[0.0, 1.0]).unwrap()).unwrap()
}

fn cycle(s: &SymbolicSystem, roof: &RoofFunction, w: &[u8]) -> Cycle {
    let lam = lambda(s);
    let mut c = Cycle::new(s, roof, &lam, w).unwrap();
    c.select_base_point(&lam, 0.5);
    c
}

fn roof_sum(w: &[u8], roof: &RoofFunction) -> f64 {
    let n = w.len() as i64;
    (0..n).map(|j| roof.at(|i| w[i.rem_euclid(n) as usize], j)).sum()
}

#[test]
fn unit_roof_bridges_are_exact() {
    let s = SymbolicSystem::full_shift(2);
    let roof = RoofFunction::constant(&s, 1.0).unwrap();
    let a = cycle(&s, &roof, &[0, 1, 1]);
    let b = cycle(&s, &roof, &[0, 0, 1]);
    let g = Gluer::new(&s, &roof, 3.0, 2, 2.0).unwrap();
    let p = g.glue(&[&a, &b, &a], &[0, 1, 0]).unwrap();
    assert_eq!(p.k(), 3);
    assert_eq!(p.max_abs_residual(), 0.0);
    assert!(p.transitions.iter().all(|t| t.word.len() == 2 && t.residual == 0.0));
    // Lexicographically least exact bridge of two symbols.
    assert_eq!(p.transitions[0].word, vec![0, 0]);
    assert_eq!(p.period, 3.0 * (2.0 * 3.0 + 2.0));
    assert_eq!(p.period, p.nominal_period);
    let starts: Vec<f64> = p.block_schedule.iter().map(|e| e.t_actual).collect();
    assert_eq!(starts, vec![0.0, 8.0, 16.0]);
    assert!(p.realized.is_admissible(&s));
    let word = p.realized.right.to_vec();
    assert_eq!(&word[..6], &[1, 0, 1, 1, 0, 1]);
    assert_eq!(roof_sum(&word, &roof), p.period);
}

#[test]
fn realized_period_matches_roof_sum_on_a_non_unit_roof() {
    let s = SymbolicSystem::full_shift(2);
    let table = CylinderTable::build("roof", &s, 2, &[(vec![0, 1], 1.25), (vec![1, 1], 0.75)], Some(1.0)).unwrap();
    let roof = RoofFunction::new(table).unwrap();
    let a = cycle(&s, &roof, &[0, 1, 1]);
    let b = cycle(&s, &roof, &[0, 1]);
    let g = Gluer::new(&s, &roof, 3.0, 3, 2.0).unwrap();
    let p = g.glue(&[&a, &b], &[0, 1]).unwrap();
    let word = p.realized.right.to_vec();
    assert!((roof_sum(&word, &roof) - p.period).abs() < 1e-12);
    // Bridges absorb the loops' mismatch with T, so only the residuals remain.
    let res: f64 = p.transitions.iter().map(|t| t.residual).sum();
    assert!((p.period - p.nominal_period - res).abs() < 1e-12, "{} {} {res}", p.period, p.nominal_period);
}

#[test]
fn golden_mean_needs_transition_time() {
    let s = SymbolicSystem::golden_mean();
    let roof = RoofFunction::constant(&s, 1.0).unwrap();
    assert_eq!(minimal_transition_time(&s, &roof), 1.0);
    let err = find_transition_word(&s, &roof, &[0, 1], &[1, 0], 0.0).unwrap_err();
    assert!(matches!(err, LabError::NoTransition { minimal, .. } if minimal == 1.0));
    assert!(matches!(Gluer::new(&s, &roof, 4.0, 2, 0.0), Err(LabError::NoTransition { .. })));
    let w = find_transition_word(&s, &roof, &[0, 1], &[1, 0], 1.0).unwrap();
    assert_eq!(w.word, vec![0]);
    assert_eq!(w.residual, 0.0);
    assert!(s.is_admissible(&[1, 0, 1]));
}

#[test]
fn empty_bridge_when_symbols_connect() {
    let s = SymbolicSystem::full_shift(2);
    let roof = RoofFunction::constant(&s, 1.0).unwrap();
    let w = find_transition_word(&s, &roof, &[1], &[0], 0.0).unwrap();
    assert!(w.word.is_empty());
    assert_eq!(w.time, 0.0);
}

#[test]
fn glued_orbits_track_their_components() {
    let s = SymbolicSystem::full_shift(2);
    let roof = RoofFunction::constant(&s, 1.0).unwrap();
    let a = cycle(&s, &roof, &[0, 1, 1]);
    let b = cycle(&s, &roof, &[0, 0, 1]);
    let g = Gluer::new(&s, &roof, 3.0, 8, 2.0).unwrap();
    let p = g.glue(&[&a, &b], &[0, 1]).unwrap();
    let r = verify_tracking(&p, &roof, 0.1);
    assert_eq!(r.margin_symbols, 4);
    assert!(r.tracked, "{r:?}");
    assert!(r.worst < 0.1);
    // Blocks too short for the margin report no interior.
    let short = Gluer::new(&s, &roof, 3.0, 2, 2.0).unwrap().glue(&[&a, &b], &[0, 1]).unwrap();
    let r = verify_tracking(&short, &roof, 0.01);
    assert!(r.distances.iter().all(|d| d.is_nan()));
    assert!(!verify_tracking(&p, &roof, 0.0).tracked);
}

#[test]
fn glued_json_lists_components() {
    let s = SymbolicSystem::full_shift(2);
    let roof = RoofFunction::constant(&s, 1.0).unwrap();
    let a = cycle(&s, &roof, &[0, 1, 1]);
    let p = Gluer::new(&s, &roof, 3.0, 2, 1.0).unwrap().glue(&[&a], &[0]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&glued_point_json(&p, None)).unwrap();
    assert_eq!(v["components"][0], "101");
    assert_eq!(v["loops"], 2);
}
