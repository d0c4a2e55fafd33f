use wpl::harness::{verify_fixed_inequalities, CorpusItem, FamilyKind, NRule};

/// Recorded corpus-wide constant for the trivial-bound ratio.
const TRIVIAL_CONSTANT: f64 = 4.0;

#[test]
fn trivial_bound_ratios() {
    let radii = [256.0, 1024.0, 4096.0];
    let f1 = verify_fixed_inequalities(&[CorpusItem::family(FamilyKind::F1, NRule::SqrtR)], &radii, 6.0).unwrap();
    assert!(f1.all_hold());
    assert!(f1.constant <= TRIVIAL_CONSTANT);
    for (r, q) in f1.ratios("f1") {
        assert!((1.0 / TRIVIAL_CONSTANT..=TRIVIAL_CONSTANT).contains(&q), "R = {r}: {q}");
    }

    let f0 = verify_fixed_inequalities(&[CorpusItem::family(FamilyKind::F0, NRule::SqrtR)], &radii, 4.0).unwrap();
    assert!(f0.all_hold());
    let q: Vec<f64> = f0.ratios("f0").into_iter().map(|(_, q)| q).collect();
    assert!(q.windows(2).all(|w| w[1] < w[0]), "{q:?}");
}
