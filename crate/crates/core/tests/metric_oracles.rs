mod common;

use common::{naive_auc, naive_average_precision, naive_b_cubed, naive_ceaf_e, naive_muc, random_partition};
use gaecoref::metrics::{average_precision, b_cubed, ceaf_e, conll_f1, muc, roc_auc};
use gaecoref::{Clustering, Prf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: &Prf, b: (f64, f64, f64)) -> bool {
    (a.precision - b.0).abs() <= 1e-12 && (a.recall - b.1).abs() <= 1e-12 && (a.f1 - b.2).abs() <= 1e-12
}

#[test]
fn worked_example() {
    // gold {a,b,c},{d}; system {a,b},{c,d}
    let gold = Clustering::from_chains(4, vec![vec![0, 1, 2], vec![3]]).unwrap();
    let sys = Clustering::from_chains(4, vec![vec![0, 1], vec![2, 3]]).unwrap();

    let m = muc(&gold, &sys).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));

    // B³: P = (1 + 1 + 1/2 + 1/2)/4, R = (2/3 + 2/3 + 1/3 + 1)/4
    let b = b_cubed(&gold, &sys).unwrap();
    let (p, r) = (0.75, 8.0 / 12.0);
    assert!((b.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
    assert!((b.f1 - 0.7059).abs() < 5e-5);

    // CEAF-e: best alignment {a,b,c}↔{a,b} (φ = 4/5) and {d}↔{c,d} (φ = 2/3)
    let c = ceaf_e(&gold, &sys).unwrap();
    let total = 0.8 + 2.0 / 3.0;
    assert!((c.precision - total / 2.0).abs() < 1e-12);
    assert!((c.recall - total / 2.0).abs() < 1e-12);
    assert!((c.f1 - 0.7333).abs() < 5e-5);

    let conll = conll_f1(&gold, &sys).unwrap();
    assert!((conll - (0.5 + b.f1 + c.f1) / 3.0).abs() < 1e-15);
    assert!((conll - 0.6464).abs() < 5e-5);
}

#[test]
fn scorers_agree_with_naive_versions_on_random_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let n = rng.random_range(1..=8);
        let g = random_partition(n, &mut rng);
        let s = random_partition(n, &mut rng);
        let gold = Clustering::from_chains(n, g.clone()).unwrap();
        let sys = Clustering::from_chains(n, s.clone()).unwrap();
        let m = muc(&gold, &sys).unwrap();
        assert!(close(&m, naive_muc(&g, &s)), "case {case} muc {g:?} {s:?}");
        let b = b_cubed(&gold, &sys).unwrap();
        assert!(close(&b, naive_b_cubed(&g, &s)), "case {case} b3 {g:?} {s:?}");
        let c = ceaf_e(&gold, &sys).unwrap();
        assert!(close(&c, naive_ceaf_e(&g, &s)), "case {case} ceaf {g:?} {s:?}");
    }
}

#[test]
fn identical_partitions_score_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let p = random_partition(n, &mut rng);
        let c = Clustering::from_chains(n, p.clone()).unwrap();
        let b = b_cubed(&c, &c).unwrap();
        let e = ceaf_e(&c, &c).unwrap();
        assert_eq!((b.f1, e.f1), (1.0, 1.0));
        if p.iter().any(|ch| ch.len() > 1) {
            assert_eq!(muc(&c, &c).unwrap().f1, 1.0);
        }
    }
}

#[test]
fn all_singletons_muc_is_flagged_not_nan() {
    let s = Clustering::singletons(4);
    let m = muc(&s, &s).unwrap();
    assert!(m.degenerate);
    assert_eq!(m.f1, 0.0);
}

#[test]
fn ranking_metrics_agree_with_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let len = rng.random_range(2..30);
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..len).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let mut labels: Vec<bool> = (0..len).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let ap = average_precision(&scores, &labels).unwrap();
        assert!((ap - naive_average_precision(&scores, &labels)).abs() < 1e-12);
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - naive_auc(&scores, &labels)).abs() < 1e-12);
    }
}
