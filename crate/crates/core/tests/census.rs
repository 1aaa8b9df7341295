use lindeberg_lab::census::*;
use lindeberg_lab::regularity::RegularityFunction;
use lindeberg_lab::system::{CylinderTable, RoofFunction, SymbolicSystem};
use lindeberg_lab::LabError;

fn all_words(a: usize, n: usize) -> Vec<Vec<u8>> {
    (0..a.pow(n as u32))
        .map(|mut c| {
            let mut w = vec![0u8; n];
            for s in w.iter_mut().rev() {
                *s = (c % a) as u8;
                c /= a;
            }
            w
        })
        .collect()
}

/// Primitive cyclically admissible words up to rotation, counted by brute force.
fn brute_primitive_orbits(sys: &SymbolicSystem, n: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = all_words(sys.alphabet_size, n)
        .into_iter()
        .filter(|w| sys.is_cyclic_admissible(w) && is_primitive(w))
        .map(|w| canonical_rotation(&w))
        .collect();
    out.sort();
    out.dedup();
    out
}

fn unit(sys: &SymbolicSystem) -> (RoofFunction, RegularityFunction) {
    let roof = RoofFunction::constant(sys, 1.0).unwrap();
    let lam = RegularityFunction::new(sys, CylinderTable::per_symbol("lambda", sys, &[0.0, 1.0]).unwrap()).unwrap();
    (roof, lam)
}

#[test]
fn lyndon_words_match_brute_force() {
    let systems = [
        SymbolicSystem::full_shift(2),
        SymbolicSystem::full_shift(3),
        SymbolicSystem::golden_mean(),
        SymbolicSystem::new(3, vec![vec![true, true, false], vec![false, true, true], vec![true, false, true]]).unwrap(),
    ];
    for sys in &systems {
        for n in 1..=9 {
            if sys.alphabet_size == 3 && n > 7 {
                continue;
            }
            assert_eq!(lyndon_words(sys, n), brute_primitive_orbits(sys, n), "alphabet {} n {n}", sys.alphabet_size);
        }
    }
}

#[test]
fn necklace_counts_for_the_full_two_shift() {
    // Moebius formula: 2, 1, 2, 3, 6, 9, 18, 30, 56, 99
    let s = SymbolicSystem::full_shift(2);
    let counts: Vec<usize> = (1..=10).map(|n| lyndon_words(&s, n).len()).collect();
    assert_eq!(counts, vec![2, 1, 2, 3, 6, 9, 18, 30, 56, 99]);
}

#[test]
fn primitivity_and_rotation() {
    assert!(is_primitive(&[0, 1, 1]));
    assert!(!is_primitive(&[0, 1, 0, 1]));
    assert!(is_primitive(&[1]));
    assert_eq!(canonical_rotation(&[1, 1, 0]), vec![0, 1, 1]);
}

#[test]
fn cycles_carry_period_and_lambda_average() {
    let s = SymbolicSystem::full_shift(2);
    let roof = RoofFunction::new(CylinderTable::per_symbol("r", &s, &[1.0, 2.0]).unwrap()).unwrap();
    let (_, lam) = unit(&s);
    let c = Cycle::new(&s, &roof, &lam, &[1, 0, 1]).unwrap();
    assert_eq!(c.word_string(), "011");
    assert_eq!(c.flow_period, 5.0);
    // λ = 1 on symbol 1, which carries 4 of the 5 time units.
    assert!((c.lambda_avg - 0.8).abs() < 1e-15);
    assert!(matches!(Cycle::new(&s, &roof, &lam, &[0, 1, 0, 1]), Err(LabError::Precondition(_))));
    let gm = SymbolicSystem::golden_mean();
    let (groof, glam) = unit(&gm);
    assert!(matches!(Cycle::new(&gm, &groof, &glam, &[1, 1, 0]), Err(LabError::Inadmissible { .. })));
}

#[test]
fn base_point_is_least_regular_rotation() {
    let s = SymbolicSystem::full_shift(2);
    let (roof, lam) = unit(&s);
    let mut c = Cycle::new(&s, &roof, &lam, &[0, 0, 1]).unwrap();
    c.select_base_point(&lam, 0.5);
    assert_eq!(&**c.base_word(), &[1, 0, 0]);
    assert_eq!(c.base_shift, 2);
}

#[test]
fn windows_are_half_open() {
    assert!(in_window(10.0, 10.0, 0.5));
    assert!(!in_window(9.5, 10.0, 0.5));
    assert!(in_window(9.6, 10.0, 0.5));
    assert!(!in_window(10.1, 10.0, 0.5));
}

#[test]
fn census_window_filters_by_period_and_regularity() {
    let s = SymbolicSystem::full_shift(2);
    let (roof, lam) = unit(&s);
    let cycles = enumerate_cycles(&s, &roof, &lam, 1, 8, DEFAULT_CYCLE_BUDGET).unwrap();
    assert_eq!(cycles.len(), 2 + 1 + 2 + 3 + 6 + 9 + 18 + 30);
    let w = census_window(&cycles, &roof, &lam, 6.0, 0.4, 0.5, 0.01).unwrap();
    // Length-6 cycles with at least three 1s.
    let expect = lyndon_words(&s, 6).into_iter().filter(|w| w.iter().filter(|&&x| x == 1).count() >= 3).count();
    assert_eq!(w.len(), expect);
    assert!(w.cycles.iter().all(|c| c.lambda_avg >= 0.5 && lam.lambda_on_word(c.base_word()) >= 0.5));
    assert!(w.separation.separated);
    let csv = census_csv(&w, &cycles);
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(matches!(census_window(&cycles, &roof, &lam, 6.0, 0.5, 0.5, 0.01), Err(LabError::DeltaTooLarge { .. })));
}

#[test]
fn enumeration_budget_is_enforced() {
    let s = SymbolicSystem::full_shift(2);
    let (roof, lam) = unit(&s);
    assert!(matches!(enumerate_cycles(&s, &roof, &lam, 1, 40, DEFAULT_CYCLE_BUDGET), Err(LabError::BudgetExceeded(_))));
}

#[test]
fn separation_flags_close_pairs() {
    let s = SymbolicSystem::full_shift(2);
    let (roof, lam) = unit(&s);
    let a = Cycle::new(&s, &roof, &lam, &[0, 1, 1, 1, 1, 1, 1, 1]).unwrap();
    let b = Cycle::new(&s, &roof, &lam, &[0, 0, 1, 1, 1, 1, 1, 1]).unwrap();
    // Bowen distances stay below 1, so scale 10 flags every pair.
    let r = verify_separated(&[a.clone(), b.clone()], &roof, 8.0, 0.01);
    assert!(r.separated);
    let r = verify_separated(&[a, b], &roof, 8.0, 10.0);
    assert!(!r.separated);
    assert_eq!(r.first_violation.map(|v| (v.0, v.1)), Some((0, 1)));
}
