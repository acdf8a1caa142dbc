mod common;

use std::time::Duration;

use common::{random_word, word};
use conjsep::conjugacy::{decide_conjugate, ConjugacyConfig, ConjugacyVerdict, ConjugacyWitness, Outcome};
use conjsep::free_words::{is_conjugate_free, Word};
use conjsep::graph_of_groups::{GPath, GraphOfGroups, Vertex};
use conjsep::presentation::Presentation;
use conjsep::quotients::{
    enumerate_homs, verify_witness, witness_at, FiniteQuotient, SearchConfig, WitnessQuery, WitnessReport,
};
use conjsep::rips::rips_construct;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hnn() -> GraphOfGroups {
    GraphOfGroups::hnn("xy", &["x"], &["y"]).unwrap()
}

fn cfg() -> ConjugacyConfig {
    ConjugacyConfig { max_n: 3, workers: 1, budget: Duration::from_secs(20), ..ConjugacyConfig::default() }
}

fn hnn_word(max_len: usize) -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec((1..=3i32, any::<bool>()).prop_map(|(g, s)| if s { g } else { -g }), 0..=max_len)
        .prop_map(|w| common::reduce(&w))
}

/// Point images of a word acting on the right, letter by letter.
fn act(q: &FiniteQuotient, w: &Word) -> Vec<usize> {
    let imgs: Vec<Vec<u32>> = q.images.iter().map(|p| p.images().to_vec()).collect();
    (0..q.degree)
        .map(|mut x| {
            for &l in w.letters() {
                let p = &imgs[l.unsigned_abs() as usize - 1];
                x = if l > 0 { p[x] as usize } else { p.iter().position(|&y| y as usize == x).unwrap() };
            }
            x
        })
        .collect()
}

fn is_identity(q: &FiniteQuotient, w: &Word) -> bool {
    act(q, w).iter().enumerate().all(|(i, &x)| i == x)
}

/// Rank over GF(p) for a large prime; agrees with the rational rank for
/// the small matrices used here.
fn rank_mod_p(mut rows: Vec<Vec<i64>>) -> usize {
    const P: i64 = 1_000_000_007;
    let pow = |mut b: i64, mut e: i64| {
        let mut r = 1i64;
        b = b.rem_euclid(P);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        r
    };
    for r in rows.iter_mut() {
        for x in r.iter_mut() {
            *x = x.rem_euclid(P);
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][c] != 0) else { continue };
        rows.swap(rank, p);
        let inv = pow(rows[rank][c], P - 2);
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[c] != 0 {
                let f = row[c] * inv % P;
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x = (*x - f * y).rem_euclid(P);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn exponent_sums(w: &Word, width: usize, offset: usize) -> Vec<i64> {
    let mut v = vec![0; width];
    for &l in w.letters() {
        v[offset + l.unsigned_abs() as usize - 1] += l.signum() as i64;
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn element_reduction_is_idempotent(w in hnn_word(12)) {
        let g = hnn();
        let el = g.element_from_word(&word(&w)).unwrap();
        let r = g.reduce(&el);
        prop_assert_eq!(g.reduce(&r), r.clone());
        prop_assert!(g.mul(&r, &g.inverse(&r)).is_trivial_syntactically());
    }

    #[test]
    fn translation_length_is_a_conjugacy_invariant(w in hnn_word(10), h in hnn_word(6)) {
        let g = hnn();
        let el = g.element_from_word(&word(&w)).unwrap();
        let c = g.element_from_word(&word(&h)).unwrap();
        let conj = g.conjugate(&c, &el);
        let (a, b) = (g.classify(&el), g.classify(&conj));
        prop_assert_eq!(a.kind, b.kind);
        prop_assert_eq!(a.translation_length, b.translation_length);
    }

    #[test]
    fn roots_are_sound(w in hnn_word(10)) {
        let g = hnn();
        let el = g.element_from_word(&word(&w)).unwrap();
        prop_assume!(!g.is_trivial(&el));
        let (r, k) = g.root(&el).unwrap();
        prop_assert!(g.equal(&g.pow(&r, k as i64), &el));
        let (r3, k3) = g.root(&g.pow(&el, 3)).unwrap();
        prop_assert_eq!(k3, 3 * k);
        prop_assert!(g.equal(&r3, &r));
    }

    #[test]
    fn decisions_are_symmetric_and_invariant(u in hnn_word(6), v in hnn_word(6), h in hnn_word(4)) {
        let g = hnn();
        let el = |w: &[i32]| g.element_from_word(&word(w)).unwrap();
        let (u, v, h) = (el(&u), el(&v), el(&h));
        let a = decide_conjugate(&g, &u, &v, &cfg()).unwrap();
        let b = decide_conjugate(&g, &v, &u, &cfg()).unwrap();
        let c = decide_conjugate(&g, &u, &g.conjugate(&h, &v), &cfg()).unwrap();
        prop_assert!(a.outcome != Outcome::Inconclusive);
        prop_assert_eq!(a.conjugate(), b.conjugate());
        prop_assert_eq!(a.conjugate(), c.conjugate());
        for (x, y, r) in [(&u, &v, &a), (&v, &u, &b)] {
            check_sound(&g, x, y, r);
        }
    }

    #[test]
    fn conjugate_pairs_have_no_quotient_witness(u in hnn_word(6), h in hnn_word(5)) {
        let g = hnn();
        let p = g.present_fundamental_group();
        let (u, h) = (word(&u), word(&h));
        let v = h.conjugate(&u).reduced();
        let r = decide_conjugate(&g, &g.element_from_word(&u).unwrap(), &g.element_from_word(&v).unwrap(), &cfg()).unwrap();
        prop_assert_eq!(r.outcome, Outcome::Conjugate);
        let query = WitnessQuery::Conjugacy { u: u.clone(), v: v.clone() };
        for n in 1..=4 {
            prop_assert!(witness_at(&p, &query, n, 1).is_none());
        }
    }
}

fn check_sound(g: &GraphOfGroups, u: &GPath, v: &GPath, r: &ConjugacyVerdict) {
    match &r.witness {
        Some(ConjugacyWitness::Conjugator(w)) => assert!(g.equal(&g.conjugate(w, u), v)),
        Some(ConjugacyWitness::Quotient(rep)) => assert!(verify_witness(&g.present_fundamental_group(), rep)),
        _ => {}
    }
}

#[test]
fn britton_reduction_never_contradicts_quotients() {
    let g = hnn();
    let p = g.present_fundamental_group();
    let cfg = SearchConfig { max_n: 4, workers: 1 };
    let homs: Vec<FiniteQuotient> = (2..=4).flat_map(|n| enumerate_homs(&p, n, &cfg).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut probed = 0;
    while probed < 50 {
        let len = rng.gen_range(1..=10);
        let w = word(&random_word(&mut rng, 3, len));
        let el = g.element_from_word(&w).unwrap();
        if el.is_trivial_syntactically() {
            continue;
        }
        probed += 1;
        // a nontrivial image proves nontriviality; reduction must agree
        if homs.iter().any(|q| !is_identity(q, &w)) {
            assert!(!g.is_trivial(&el), "{w:?}");
        }
    }
    // trivial words map to the identity everywhere
    for w in ["txTY", "txxTYY", "YtxT", "XTyt"] {
        let w = p.parse_word(w).unwrap();
        assert!(g.is_trivial(&g.element_from_word(&w).unwrap()));
        assert!(homs.iter().all(|q| is_identity(q, &w)));
    }
}

#[test]
fn emitted_quotients_satisfy_relators() {
    let presentations = [
        hnn().present_fundamental_group(),
        Presentation::new(vec!["a".into(), "b".into()], vec![word(&[1, 2, 1, 2]), word(&[1, 1, 1])]).unwrap(),
    ];
    for p in &presentations {
        for n in 1..=4 {
            for q in enumerate_homs(p, n, &SearchConfig { max_n: 4, workers: 2 }).unwrap() {
                assert!(p.relators().iter().all(|r| is_identity(&q, r)));
            }
        }
    }
}

#[test]
fn witnesses_survive_extension() {
    let g = hnn();
    let p = g.present_fundamental_group();
    let w = |s: &str| p.parse_word(s).unwrap();
    let queries = [
        WitnessQuery::Conjugacy { u: w("x"), v: w("X") },
        WitnessQuery::Separability { subgroup: vec![w("xx"), w("y")], element: w("x") },
        WitnessQuery::ConjugacyIntoSubgroup { subgroup: vec![w("xy")], element: w("xt") },
        WitnessQuery::DoubleCoset { left: vec![w("x")], middle: w("t"), right: vec![w("y")], element: w("y") },
    ];
    for q in &queries {
        let found = (1..=4).find_map(|n| witness_at(&p, q, n, 1)).expect("witness within degree 4");
        let mut rep = found.clone();
        for _ in 0..2 {
            rep = WitnessReport { quotient: rep.quotient.extend(), ..rep };
            assert!(verify_witness(&p, &rep), "{q:?}");
        }
    }
}

#[test]
fn free_case_matches_free_words() {
    let g = GraphOfGroups::new(vec![Vertex { rank: 2, names: Some(vec!['x', 'y']) }], vec![], None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..200 {
        let len = rng.gen_range(0..=7);
        let u = word(&random_word(&mut rng, 2, len));
        let v = if i % 2 == 0 {
            let len = rng.gen_range(0..=4);
            word(&random_word(&mut rng, 2, len)).conjugate(&u).reduced()
        } else {
            let len = rng.gen_range(0..=7);
            word(&random_word(&mut rng, 2, len))
        };
        let r =
            decide_conjugate(&g, &g.element_from_word(&u).unwrap(), &g.element_from_word(&v).unwrap(), &cfg()).unwrap();
        assert_eq!(r.conjugate(), Some(is_conjugate_free(&u, &v).is_some()), "{u:?} {v:?}");
        if let Some(c) = r.conjugator() {
            assert!(g.equal(&g.conjugate(c, &g.element_from_word(&u).unwrap()), &g.element_from_word(&v).unwrap()));
        }
    }
}

#[test]
fn abelianization_rank_two_ways() {
    let graphs = [
        hnn(),
        GraphOfGroups::hnn("xy", &["x", "y"], &["y", "x"]).unwrap(),
        GraphOfGroups::hnn("xyz", &["xy"], &["zz"]).unwrap(),
    ];
    for g in &graphs {
        let p = g.present_fundamental_group();
        let vertex_rank: usize = g.vertices().iter().map(|v| v.rank).sum();
        let stable = p.rank() - vertex_rank;
        let rows: Vec<Vec<i64>> = g
            .edges()
            .iter()
            .flat_map(|e| {
                e.map_from.iter().zip(&e.map_to).map(|(a, b)| {
                    let (x, y) = (exponent_sums(a, vertex_rank, 0), exponent_sums(b, vertex_rank, 0));
                    x.iter().zip(&y).map(|(i, j)| i - j).collect::<Vec<i64>>()
                })
            })
            .collect();
        let expected = vertex_rank - rank_mod_p(rows) + stable;
        assert_eq!(p.abelianization_rank(), expected);
    }
}

#[test]
fn rips_abelianization_and_recovery() {
    let qs = [
        Presentation::free(vec!["a".into()]).unwrap(),
        Presentation::new(vec!["a".into()], vec![word(&[1, 1])]).unwrap(),
        Presentation::new(vec!["a".into(), "b".into()], vec![word(&[1, 2, 1, 2])]).unwrap(),
        Presentation::new(vec!["a".into(), "b".into()], vec![word(&[1, 2, -1, -2])]).unwrap(),
        Presentation::new(vec!["a".into(), "b".into(), "c".into()], vec![word(&[1, 2, 3]), word(&[1, 1])]).unwrap(),
    ];
    for q in &qs {
        let out = rips_construct(q);
        let gamma = &out.gamma;
        let rq = q.abelianization_rank();
        let rg = gamma.abelianization_rank();
        assert!(rq <= rg && rg <= rq + 3, "{rq} {rg}");
        // killing x, y, t gives back Q's relators exactly
        let r = q.rank() as i32;
        let killed: Vec<Word> = gamma
            .relators()
            .iter()
            .map(|w| Word::from_letters(w.letters().iter().copied().filter(|l| l.abs() <= r).collect()).reduced())
            .filter(|w| !w.is_empty())
            .collect();
        let expected: Vec<Word> = q.relators().iter().filter(|w| !w.is_empty()).cloned().collect();
        assert_eq!(killed, expected);
        assert_eq!(format!("{:?}", rips_construct(q)), format!("{out:?}"));
    }
}
