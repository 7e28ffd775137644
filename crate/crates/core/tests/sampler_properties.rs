use std::collections::BTreeMap;

use lcr_core::sampler::{
    achievable_cb1_range, bin_index, generate_subsets, materialize_subset, random_composition, BinningConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn parent(class_sizes: &[usize]) -> BTreeMap<String, Vec<usize>> {
    let mut out = BTreeMap::new();
    let mut next = 0;
    for (c, &size) in class_sizes.iter().enumerate() {
        out.insert(format!("c{c}"), (next..next + size).collect());
        next += size;
    }
    out
}

#[test]
fn compositions_are_uniform_under_caps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let draws = 40_000;
    let mut hist = [0usize; 4];
    for _ in 0..draws {
        let s = random_composition(5, &[4, 4], &mut rng).unwrap();
        hist[s.counts[0] - 1] += 1;
    }
    let expect = draws as f64 / 4.0;
    let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
    for h in hist {
        assert!((h as f64 - expect).abs() < 3.0 * sigma, "{hist:?}");
    }
}

#[test]
fn yields_cover_range_and_validate() {
    let classes = parent(&[200, 200, 200, 200]);
    let cfg = BinningConfig { sizes: vec![64, 128, 256], pool: 4000, ..Default::default() };
    let run = generate_subsets(&classes, &cfg, 7).unwrap();
    let m = 4.0;
    let caps = [200; 4];
    for y in &run.yields {
        assert!(y.skipped.is_none());
        assert!(y.selected() <= 100);
        assert!(y.per_bin.iter().all(|&c| c <= 4));
        let cbs: Vec<f64> = run.subsets.iter().filter(|s| s.partition.n == y.size).map(|s| s.partition.cb1).collect();
        let lo = cbs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cbs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // The extreme bins that any composition of this size can reach are populated.
        let (reach_lo, reach_hi) = achievable_cb1_range(y.size, &caps).unwrap();
        assert_eq!(bin_index(lo, 4, 25), bin_index(reach_lo, 4, 25), "size {}: min cb1 {lo}", y.size);
        assert_eq!(bin_index(hi, 4, 25), bin_index(reach_hi, 4, 25), "size {}: max cb1 {hi}", y.size);
        if reach_lo <= 1.0 + 0.05 * (m - 1.0) {
            assert!(lo <= 1.0 + 0.05 * (m - 1.0), "size {}: min cb1 {lo}", y.size);
        }
        assert!(hi >= m - 0.05 * (m - 1.0), "size {}: max cb1 {hi}", y.size);
    }
    let members: Vec<Vec<usize>> = classes.values().cloned().collect();
    for s in &run.subsets {
        let mut seen = s.members.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), s.members.len());
        for (c, &count) in s.partition.counts.iter().enumerate() {
            assert_eq!(s.members.iter().filter(|i| members[c].contains(i)).count(), count);
        }
        let again = materialize_subset(s.id.clone(), &s.partition, &members, s.seed).unwrap();
        assert_eq!(&again, s);
    }
}

#[test]
fn infeasible_sizes_are_skipped() {
    let classes = parent(&[10, 10]);
    let cfg = BinningConfig { sizes: vec![8, 30], pool: 200, ..Default::default() };
    let run = generate_subsets(&classes, &cfg, 1).unwrap();
    assert!(run.yields[0].skipped.is_none());
    assert!(run.yields[1].skipped.is_some());
    assert!(run.subsets.iter().all(|s| s.partition.n == 8));
}

#[test]
fn same_seed_same_subsets() {
    let classes = parent(&[50, 80, 30]);
    let cfg = BinningConfig { sizes: vec![32, 64], pool: 500, ..Default::default() };
    let a = generate_subsets(&classes, &cfg, 99).unwrap();
    let b = generate_subsets(&classes, &cfg, 99).unwrap();
    assert_eq!(a.subsets, b.subsets);
    let c = generate_subsets(&classes, &cfg, 100).unwrap();
    assert_ne!(a.subsets, c.subsets);
}
