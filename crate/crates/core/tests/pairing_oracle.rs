mod common;

use common::*;
use gmx::pairing::{exact_pairing, greedy_pairing, objective, random_pairing, validate_pairing};
use gmx::{DistanceMatrix, PairingMatrix};
use proptest::prelude::*;

#[test]
fn cover_counts_match_enumeration() {
    assert_eq!(valid_covers(3).len(), 2);
    assert_eq!(valid_covers(4).len(), 6);
}

#[test]
fn worked_example_greedy_equals_exact_equals_17() {
    let w = worked_example();
    let (_, best) = brute_force_best(&w);
    assert_eq!(best, 17.0);
    let weights: Vec<f64> = valid_covers(4)
        .iter()
        .map(|p| cover_weight(&w, p))
        .collect();
    assert_eq!(weights.iter().filter(|&&v| v == 17.0).count(), 2);

    let g = greedy_pairing(&w).unwrap();
    assert_eq!(g.targets().unwrap(), vec![2, 0, 3, 1]);
    assert_eq!(objective(&w, &g).unwrap(), 17.0);
    assert_eq!(objective(&w, &exact_pairing(&w, 8).unwrap()).unwrap(), 17.0);
}

#[test]
fn exact_matches_brute_force_including_tie_break() {
    for m in 3..=7 {
        for seed in 0..15 {
            let w = random_symmetric(m, 1000 * m as u64 + seed);
            let (perm, best) = brute_force_best(&w);
            let p = exact_pairing(&w, 8).unwrap();
            assert_eq!(p.targets().unwrap(), perm, "m={m} seed={seed}");
            assert!((objective(&w, &p).unwrap() - best).abs() < 1e-12);
        }
    }
    // ties everywhere: lexicographically smallest cover
    let w = DistanceMatrix::new(
        5,
        (0..25)
            .map(|k| if k / 5 == k % 5 { 0.0 } else { 1.0 })
            .collect(),
    )
    .unwrap();
    assert_eq!(
        exact_pairing(&w, 8).unwrap().targets().unwrap(),
        valid_covers(5)[0]
    );
}

#[test]
fn two_triangles_gap() {
    let w = two_triangles();
    let p = exact_pairing(&w, 8).unwrap();
    assert_eq!(objective(&w, &p).unwrap(), 60.0);
    let cycles = p.cycles().unwrap();
    assert_eq!(cycles.len(), 2);
    assert!(cycles.iter().all(|c| c.len() == 3));

    let ham = best_hamiltonian(&w);
    assert!(ham <= 44.0);
    let g = greedy_pairing(&w).unwrap();
    assert_eq!(g.cycles().unwrap().len(), 1);
    assert!(objective(&w, &g).unwrap() <= ham);
}

/// Greedy replayed step by step on a hand-held copy of the matrix, applying
/// the smallest-index tie-break explicitly.
fn greedy_by_hand(w: &DistanceMatrix) -> Vec<usize> {
    let m = w.m();
    let mut best = (0, 1, f64::NEG_INFINITY);
    for i in 0..m {
        for j in 0..m {
            if i != j && w.get(i, j) > best.2 {
                best = (i, j, w.get(i, j));
            }
        }
    }
    let (first, mut j) = (best.0, best.1);
    let mut path = vec![first, j];
    let mut targets = vec![0; m];
    targets[first] = j;
    while path.len() < m {
        let i = j;
        j = (0..m)
            .filter(|c| !path.contains(c))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, c| {
                if w.get(i, c) > acc.1 {
                    (c, w.get(i, c))
                } else {
                    acc
                }
            })
            .0;
        targets[i] = j;
        path.push(j);
    }
    targets[j] = first;
    targets
}

#[test]
fn greedy_matches_hand_replay() {
    for m in 3..=12 {
        for seed in 0..10 {
            let w = random_symmetric(m, seed * 31 + m as u64);
            assert_eq!(
                greedy_pairing(&w).unwrap().targets().unwrap(),
                greedy_by_hand(&w)
            );
        }
    }
}

#[test]
fn random_pairing_covers_all_cycles_uniformly() {
    let cycles = valid_covers(4)
        .into_iter()
        .filter(|p| cycle_count(p) == 1)
        .collect::<Vec<_>>();
    assert_eq!(cycles.len(), 6);
    let mut counts = vec![0usize; cycles.len()];
    for seed in 0..1000 {
        let t = random_pairing(4, seed).unwrap().targets().unwrap();
        let k = cycles.iter().position(|c| *c == t).expect("single 4-cycle");
        counts[k] += 1;
    }
    // Expected 166.7 each; a 5-sigma band is roughly ±59.
    for c in &counts {
        assert!((108..=225).contains(c), "{counts:?}");
    }
}

#[test]
fn greedy_mean_beats_random_mean() {
    for m in 4..=8 {
        let (mut g, mut r) = (0.0, 0.0);
        for seed in 0..100 {
            let w = random_symmetric(m, seed + 7919 * m as u64);
            g += objective(&w, &greedy_pairing(&w).unwrap()).unwrap();
            r += objective(&w, &random_pairing(m, seed).unwrap()).unwrap();
        }
        assert!(g >= r, "m={m}: greedy {g} random {r}");
    }
}

proptest! {
    #[test]
    fn solver_outputs_are_valid(m in 3usize..40, seed in any::<u64>()) {
        let w = random_symmetric(m, seed);
        prop_assert!(validate_pairing(&greedy_pairing(&w).unwrap()).is_valid());
        prop_assert!(validate_pairing(&random_pairing(m, seed).unwrap()).is_valid());
    }

    #[test]
    fn exact_dominates_greedy(m in 3usize..8, seed in any::<u64>()) {
        let w = random_symmetric(m, seed);
        let e = objective(&w, &exact_pairing(&w, 8).unwrap()).unwrap();
        let g = objective(&w, &greedy_pairing(&w).unwrap()).unwrap();
        prop_assert!(e >= g - 1e-12);
        prop_assert!(g >= 0.0);
        prop_assert!(validate_pairing(&exact_pairing(&w, 8).unwrap()).is_valid());
    }

    #[test]
    fn positive_scaling_keeps_solutions(m in 3usize..8, seed in any::<u64>(), c in 0.01f64..100.0) {
        let w = random_symmetric(m, seed);
        let ws = w.scaled(c).unwrap();
        prop_assert_eq!(greedy_pairing(&w).unwrap(), greedy_pairing(&ws).unwrap());
        // a cycle and its reverse weigh the same, so rounding may pick either
        let e = objective(&w, &exact_pairing(&w, 8).unwrap()).unwrap();
        let es = objective(&w, &exact_pairing(&ws, 8).unwrap()).unwrap();
        prop_assert!((e - es).abs() <= 1e-9 * e.max(1.0));
    }

    #[test]
    fn greedy_is_deterministic_with_ties(m in 3usize..20, levels in 1u32..3, seed in any::<u64>()) {
        // few distinct values, so ties are common
        let w0 = random_symmetric(m, seed);
        let q: Vec<f64> = w0.values().iter().map(|v| (v * levels as f64).floor()).collect();
        let w = DistanceMatrix::new(m, q).unwrap();
        let a = greedy_pairing(&w).unwrap();
        prop_assert_eq!(&a, &greedy_pairing(&w).unwrap());
        prop_assert_eq!(a.targets().unwrap(), greedy_by_hand(&w));
    }

    #[test]
    fn pairing_csv_round_trip(m in 3usize..30, seed in any::<u64>()) {
        let p = random_pairing(m, seed).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        prop_assert_eq!(PairingMatrix::read_csv(buf.as_slice(), m).unwrap(), p);
    }
}
