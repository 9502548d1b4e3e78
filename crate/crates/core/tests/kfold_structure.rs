use minerscope::dataset::kfold;
use minerscope::seed;
use rand::Rng;

#[test]
fn random_partitions_are_disjoint_exhaustive_and_balanced() {
    let mut rng = seed::rng(2024);
    for case in 0..100 {
        let n = rng.random_range(2..3000);
        let k = rng.random_range(2..=n.min(50));
        let p = kfold(n, k, case).unwrap();
        assert_eq!(p.assignment().len(), n);
        assert!(p.assignment().iter().all(|&f| f < k));
        let sizes = p.fold_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), n);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "n={n} k={k} sizes {sizes:?}");
        let mut seen = vec![false; n];
        for f in 0..k {
            for i in p.test_indices(f) {
                assert!(!seen[i], "row {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
