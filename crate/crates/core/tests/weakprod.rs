use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use ucalc_core::balls::{Ball, ClopenRegion};
use ucalc_core::calculus::FunctionModel;
use ucalc_core::diffeo::{perm_compose, perm_inverse, BallEndo, CertifiedDiffeo};
use ucalc_core::poly::{Poly, PolyMap};
use ucalc_core::weakprod::*;
use ucalc_core::{Error, PadicContext, PadicScalar, PadicVector};

fn ctx3() -> PadicContext {
    PadicContext::new(3, 12).unwrap()
}

fn upoly(c: &PadicContext, coefs: &[i64]) -> PolyMap {
    let terms = coefs.iter().enumerate().filter(|(_, &a)| a != 0).map(|(i, &a)| (vec![i as u32], PadicScalar::from_i64(c, a)));
    PolyMap::new(1, vec![Poly::from_terms(1, terms).unwrap()])
}

fn diffeo_on(c: &PadicContext, b: &Ball, coefs: &[i64]) -> CertifiedDiffeo {
    let sigma = FunctionModel::on_region(c, &ClopenRegion::ball(b.clone()), upoly(c, coefs)).unwrap();
    CertifiedDiffeo::new(BallEndo::new(b.clone(), sigma).unwrap(), 6).unwrap()
}

fn thirds() -> Vec<Ball> {
    (0..3).map(|i| Ball::new(3, &[i], 1)).collect()
}

#[test]
fn conjugation_matches_induced_maps() {
    let c = ctx3();
    let b = thirds();
    let index: BTreeSet<Ball> = b.iter().cloned().collect();
    // η: x + 9 + 9x^2 on 3Z_3
    let eta = wp_from_diffeos(index.clone(), vec![diffeo_on(&c, &b[0], &[9, 0, 9])]).unwrap();
    // γ swaps 3Z_3 and 1 + 3Z_3 (the latter with λ = -1) and twists 2 + 3Z_3
    let lam = PadicScalar::from_i64(&c, -1);
    let pieces = vec![
        GlobalPiece { inner: DiffeoWord::single(diffeo_on(&c, &b[0], &[0, 0, 9])), psi: AffineBallMap::new(b[0].clone(), b[1].clone(), lam.clone()).unwrap() },
        GlobalPiece { inner: DiffeoWord::identity(b[1].clone()), psi: AffineBallMap::translation(b[1].clone(), b[0].clone(), &c).unwrap() },
        GlobalPiece { inner: DiffeoWord::single(diffeo_on(&c, &b[2], &[9])), psi: AffineBallMap::identity(b[2].clone(), &c) },
    ];
    let gamma = GlobalDiffeo::new(pieces).unwrap();
    let conj = conjugate_global(&gamma, &eta).unwrap();
    assert_eq!(conj.support(), [b[1].clone()].into_iter().collect());
    for m in 1..=3 {
        let pg = gamma.level_map(&c, m).unwrap();
        let pe = eta.level_map(&c, m).unwrap();
        let expect = perm_compose(&perm_compose(&pg, &pe), &perm_inverse(&pg));
        assert_eq!(conj.level_map(&c, m).unwrap(), expect, "m={m}");
    }
}

#[test]
fn regroup_roundtrip() {
    let k: BTreeSet<(u32, u32)> = [(0, 0), (0, 1), (1, 0)].into_iter().collect();
    let fibers: BTreeMap<u32, BTreeSet<u32>> = [(0, [0, 1].into_iter().collect()), (1, [0].into_iter().collect())].into_iter().collect();
    let x = WeakProduct::new(k.clone(), [((0, 1), Perm(vec![1, 0, 2])), ((1, 0), Perm(vec![2, 0, 1]))].into_iter().collect()).unwrap();
    let y = WeakProduct::new(k, [((0, 1), Perm(vec![0, 2, 1]))].into_iter().collect()).unwrap();
    let rx = regroup(&x, &fibers).unwrap();
    let ry = regroup(&y, &fibers).unwrap();
    let lhs = regroup(&x.mul(&y).unwrap(), &fibers).unwrap();
    let rhs = rx.mul(&ry).unwrap();
    assert_eq!(format!("{lhs:?}"), format!("{rhs:?}"));
    let back = flatten(&rx, &fibers).unwrap();
    assert_eq!(format!("{back:?}"), format!("{x:?}"));
}


fn perm_wp(index: &BTreeSet<u32>, entries: &[(u32, Vec<usize>)]) -> WeakProduct<u32, Perm> {
    WeakProduct::new(index.clone(), entries.iter().map(|(i, v)| (*i, Perm(v.clone()))).collect()).unwrap()
}

#[test]
fn identity_and_disjoint_supports() {
    let c = ctx3();
    let b = thirds();
    let index: BTreeSet<Ball> = b.iter().cloned().collect();
    let a = wp_from_diffeos(index.clone(), vec![diffeo_on(&c, &b[0], &[9, 0, 9])]).unwrap();
    let id = WeakProductElement::identity(index.clone());
    assert_eq!(wp_mul(&a, &id).unwrap(), a);
    assert_eq!(wp_mul(&id, &a).unwrap(), a);
    assert!(wp_inv(&id).unwrap().entries().is_empty());

    let e = wp_from_diffeos(index.clone(), vec![diffeo_on(&c, &b[2], &[9])]).unwrap();
    let ae = wp_mul(&a, &e).unwrap();
    assert_eq!(ae.support(), [b[0].clone(), b[2].clone()].into_iter().collect());
    assert_eq!(ae.get(&b[0]), a.get(&b[0]));
    assert_eq!(ae.get(&b[2]), e.get(&b[2]));
}

#[test]
fn overlapping_support_composes() {
    let c = ctx3();
    let b = thirds();
    let index: BTreeSet<Ball> = b.iter().cloned().collect();
    let g1 = diffeo_on(&c, &b[1], &[9, 0, 9]);
    let g2 = diffeo_on(&c, &b[1], &[0, 9]);
    let a = wp_from_diffeos(index.clone(), vec![g1.clone()]).unwrap();
    let e = wp_from_diffeos(index.clone(), vec![g2.clone()]).unwrap();
    let ae = wp_mul(&a, &e).unwrap();
    assert_eq!(ae.support(), [b[1].clone()].into_iter().collect());
    let word = ae.get(&b[1]).unwrap();
    let expect = perm_compose(&word_level(&c, &g1, 2), &word_level(&c, &g2, 2));
    assert_eq!(word.level_map(&c, 2).unwrap(), expect);
    // a · a^{-1} is the identity element
    assert!(wp_mul(&a, &wp_inv(&a).unwrap()).unwrap().entries().is_empty());
    let whole = ae.level_map(&c, 2).unwrap();
    assert_eq!(whole, perm_compose(&a.level_map(&c, 2).unwrap(), &e.level_map(&c, 2).unwrap()));
}

fn word_level(c: &PadicContext, g: &CertifiedDiffeo, m: u32) -> Vec<usize> {
    DiffeoWord::single(g.clone()).level_map(c, m).unwrap()
}

#[test]
fn mismatched_index_sets() {
    let i1: BTreeSet<u32> = [0, 1].into_iter().collect();
    let i2: BTreeSet<u32> = [0, 2].into_iter().collect();
    let x = perm_wp(&i1, &[]);
    let y = perm_wp(&i2, &[]);
    assert!(matches!(wp_mul(&x, &y), Err(Error::MalformedIndex(_))));
    assert!(WeakProduct::new(i1, [(5, Perm(vec![1, 0]))].into_iter().collect()).is_err());
}

#[test]
fn regroup_edge_cases() {
    let k: BTreeSet<(u32, u32)> = [(0, 0), (1, 0), (2, 0)].into_iter().collect();
    let singletons: BTreeMap<u32, BTreeSet<u32>> = (0..3).map(|i| (i, [0].into_iter().collect())).collect();
    let x = WeakProduct::new(k.clone(), [((1, 0), Perm(vec![1, 2, 0]))].into_iter().collect()).unwrap();
    let r = regroup(&x, &singletons).unwrap();
    assert_eq!(r.support(), [1].into_iter().collect());
    assert_eq!(r.get(&1).unwrap().get(&0), Some(&Perm(vec![1, 2, 0])));
    let empty = WeakProduct::<(u32, u32), Perm>::identity(k.clone());
    assert!(regroup(&empty, &singletons).unwrap().support().is_empty());
    let wrong: BTreeMap<u32, BTreeSet<u32>> = (0..2).map(|i| (i, [0].into_iter().collect())).collect();
    assert!(matches!(regroup(&x, &wrong), Err(Error::MalformedIndex(_))));
}

#[test]
fn relabel_examples() {
    let i: BTreeSet<u32> = [0, 1, 2].into_iter().collect();
    let x = perm_wp(&i, &[(0, vec![1, 0, 2]), (2, vec![0, 2, 1])]);
    // J = {10, 11, 12} with π(10 + n) = (n + 1) mod 3, β = identity
    let pi: BTreeMap<u32, u32> = (0..3).map(|n| (10 + n, (n + 1) % 3)).collect();
    let y = relabel(&x, &pi, |_, g: &Perm| Ok(g.clone())).unwrap();
    assert_eq!(y.support(), [11, 12].into_iter().collect());
    assert_eq!(y.get(&12), x.get(&0));
    let back = relabel(&y, &invert_relabeling(&pi), |_, g: &Perm| Ok(g.clone())).unwrap();
    assert_eq!(back, x);
    let not_bij: BTreeMap<u32, u32> = [(10, 0), (11, 0), (12, 1)].into_iter().collect();
    assert!(matches!(relabel(&x, &not_bij, |_, g: &Perm| Ok(g.clone())), Err(Error::NotBijective)));
}

#[test]
fn oplus_examples() {
    let c = ctx3();
    let f = |coefs: &[i64]| FunctionModel::polynomial(&c, upoly(&c, coefs)).unwrap();
    let fs: BTreeMap<u32, FunctionModel> = [(0, f(&[0, 2])), (1, f(&[0, 0, 1])), (2, f(&[5, 1]))].into_iter().collect();
    let exceptional: BTreeSet<u32> = [2].into_iter().collect();
    let x: BTreeMap<u32, PadicVector> = [(0, PadicVector::from_i64s(&c, &[4]))].into_iter().collect();
    let out = oplus_apply(&fs, &x, &exceptional, None).unwrap();
    assert_eq!(out.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
    assert_eq!(out[&0], PadicVector::from_i64s(&c, &[8]));
    assert_eq!(out[&2], PadicVector::from_i64s(&c, &[5]));
    let r = oplus_apply(&fs, &x, &BTreeSet::new(), None);
    assert!(matches!(r, Err(Error::ZeroConditionViolated(_))));
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Perm> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle().prop_map(Perm)
}

fn element(index: Vec<u32>) -> impl Strategy<Value = WeakProduct<u32, Perm>> {
    let set: BTreeSet<u32> = index.iter().copied().collect();
    prop::collection::vec(prop::option::of(perm_strategy(4)), index.len()).prop_map(move |es| {
        let entries = index.iter().zip(es).filter_map(|(i, e)| e.filter(|p| !p.is_identity()).map(|p| (*i, p))).collect();
        WeakProduct::new(set.clone(), entries).unwrap()
    })
}

fn triple() -> impl Strategy<Value = (WeakProduct<u32, Perm>, WeakProduct<u32, Perm>, WeakProduct<u32, Perm>)> {
    let idx: Vec<u32> = (0..8).collect();
    (element(idx.clone()), element(idx.clone()), element(idx))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_axioms((a, b, e) in triple()) {
        let ab_e = wp_mul(&wp_mul(&a, &b).unwrap(), &e).unwrap();
        let a_be = wp_mul(&a, &wp_mul(&b, &e).unwrap()).unwrap();
        prop_assert_eq!(&ab_e, &a_be);
        prop_assert!(wp_mul(&a, &wp_inv(&a).unwrap()).unwrap().is_identity());
        prop_assert!(wp_mul(&wp_inv(&a).unwrap(), &a).unwrap().is_identity());
        let id = WeakProduct::identity(a.index().clone());
        prop_assert_eq!(&wp_mul(&a, &id).unwrap(), &a);
        let s = wp_mul(&a, &b).unwrap().support();
        prop_assert!(s.is_subset(&a.support().union(&b.support()).copied().collect()));
        // entries never hold identities
        prop_assert!(wp_mul(&a, &b).unwrap().entries().values().all(|g| !g.is_identity()));
    }

    #[test]
    fn regroup_is_an_isomorphism((a, b, _) in triple()) {
        // (i, j) ↦ i * 8 + j with fibers {0..3}, {0..2}, {0..1}
        let fibers: BTreeMap<u32, BTreeSet<u32>> = [(0, (0..3).collect()), (1, (0..3).collect()), (2, (0..2).collect())].into_iter().collect();
        let split = |x: &WeakProduct<u32, Perm>| {
            let k: BTreeSet<(u32, u32)> = fibers.iter().flat_map(|(i, js)| js.iter().map(move |j| (*i, *j))).collect();
            let flat: Vec<(u32, u32)> = k.iter().copied().collect();
            let entries = x.entries().iter().map(|(n, g)| (flat[*n as usize], g.clone())).collect();
            WeakProduct::new(k, entries).unwrap()
        };
        let (x, y) = (split(&a), split(&b));
        let lhs = regroup(&wp_mul(&x, &y).unwrap(), &fibers).unwrap();
        let rhs = wp_mul(&regroup(&x, &fibers).unwrap(), &regroup(&y, &fibers).unwrap()).unwrap();
        prop_assert_eq!(&lhs, &rhs);
        prop_assert_eq!(flatten(&regroup(&x, &fibers).unwrap(), &fibers).unwrap(), x);
    }

    #[test]
    fn relabel_is_a_homomorphism((a, b, _) in triple(), shift in 0u32..8, conj in perm_strategy(4)) {
        let pi: BTreeMap<u32, u32> = (0..8).map(|j| (100 + j, (j + shift) % 8)).collect();
        let ci = conj.inv().unwrap();
        let beta = |_: &u32, g: &Perm| conj.mul(g)?.mul(&ci);
        let r = |x: &WeakProduct<u32, Perm>| relabel(x, &pi, beta).unwrap();
        prop_assert_eq!(r(&wp_mul(&a, &b).unwrap()), wp_mul(&r(&a), &r(&b)).unwrap());
        prop_assert_eq!(r(&wp_inv(&a).unwrap()), wp_inv(&r(&a)).unwrap());
    }
}
