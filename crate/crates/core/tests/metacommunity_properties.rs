mod common;

use common::{random_abundance, random_classes, random_similarity};
use lcr_core::diversity::{similarity_diversity, Order, RelativeAbundance, SimilarityMatrix};
use lcr_core::metacommunity::{
    aggregate_measures, class_balance, class_weights, feature_vector, per_class_measures, Metacommunity,
    SystematicParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_meta(seed: u64) -> Metacommunity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=12);
    let m = rng.random_range(1..=n.min(5));
    let z = random_similarity(&mut rng, n);
    let p = random_abundance(&mut rng, n);
    Metacommunity::new(p, z, random_classes(&mut rng, n, m), m).unwrap()
}

fn all_orders() -> [Order; 5] {
    [Order::ZERO, Order::new(0.5).unwrap(), Order::ONE, Order::TWO, Order::INFINITY]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shannon_product_identity(seed in any::<u64>()) {
        let m = random_meta(seed);
        let d = aggregate_measures(&m, Order::ONE).unwrap();
        prop_assert!(((d.a - d.cb * d.g * d.r) / d.a).abs() < 1e-10);
    }

    #[test]
    fn gamma_nests(seed in any::<u64>()) {
        let m = random_meta(seed);
        for q in [Order::ZERO, Order::ONE, Order::TWO, Order::INFINITY] {
            let d = aggregate_measures(&m, q).unwrap();
            let direct = similarity_diversity(m.similarity(), m.abundance(), q).unwrap();
            prop_assert!((d.g - direct).abs() < 1e-10, "q={q}: {} vs {direct}", d.g);
        }
    }

    #[test]
    fn identity_z_representativeness_is_weight(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=12);
        let k = rng.random_range(1..=n.min(5));
        let p = random_abundance(&mut rng, n);
        let meta = Metacommunity::new(p, SimilarityMatrix::identity(n), random_classes(&mut rng, n, k), k).unwrap();
        for q in all_orders() {
            let c = per_class_measures(&meta, q).unwrap();
            for j in 0..k {
                prop_assert!((c.rho_bar[j] - c.weight[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_z_collapses_to_class_balance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=12);
        let k = rng.random_range(1..=n.min(5));
        let classes = random_classes(&mut rng, n, k);
        let p = random_abundance(&mut rng, n);
        let meta = Metacommunity::new(p, SimilarityMatrix::block(&classes), classes, k).unwrap();
        for q in [Order::ZERO, Order::ONE, Order::INFINITY] {
            let d = aggregate_measures(&meta, q).unwrap();
            prop_assert!((d.g - d.cb).abs() < 1e-10);
        }
    }

    #[test]
    fn big_alpha_counts_pairs_without_similarity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=40);
        let k = rng.random_range(1..=n.min(6));
        let meta = Metacommunity::new(
            RelativeAbundance::uniform(n).unwrap(),
            SimilarityMatrix::identity(n),
            random_classes(&mut rng, n, k),
            k,
        ).unwrap();
        for q in all_orders() {
            let d = aggregate_measures(&meta, q).unwrap();
            prop_assert!((d.a - n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn aggregates_bounded_by_extrema(seed in any::<u64>()) {
        let m = random_meta(seed);
        for q in [Order::ZERO, Order::ONE] {
            let c = per_class_measures(&m, q).unwrap();
            let d = aggregate_measures(&m, q).unwrap();
            for (agg, fam) in [(d.a, &c.alpha), (d.r, &c.rho_bar), (d.g, &c.gamma)] {
                let lo = fam.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = fam.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo - 1e-12 * lo <= agg && agg <= hi + 1e-12 * hi);
            }
            for (b, r) in c.beta_bar.iter().zip(&c.rho_bar) {
                prop_assert!((b * r - 1.0).abs() < 1e-12);
            }
            let w: f64 = c.weight.iter().sum();
            prop_assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn class_balance_bounds(seed in any::<u64>()) {
        let m = random_meta(seed);
        let w = class_weights(&m);
        for q in all_orders() {
            let cb = class_balance(&w, q).unwrap();
            prop_assert!(cb >= 1.0 - 1e-12 && cb <= m.num_classes() as f64 + 1e-12);
        }
    }

    #[test]
    fn feature_vector_invariants(seed in any::<u64>()) {
        let m = random_meta(seed);
        let sys = SystematicParams { image_size: 784.0, color_depth: 1.0, num_classes: m.num_classes() as f64 };
        let f = feature_vector(&m, sys).unwrap();
        prop_assert_eq!(f.values().len(), 30);
        prop_assert!(f.values().iter().all(|v| v.is_finite() && *v > 0.0));
        prop_assert_eq!(f.get("size").unwrap(), m.len() as f64);
        for q in ["q0", "q1"] {
            let a = f.get(&format!("A_{q}")).unwrap();
            let lo = f.get(&format!("min_alpha_{q}")).unwrap();
            let hi = f.get(&format!("max_alpha_{q}")).unwrap();
            prop_assert!(lo * (1.0 - 1e-12) <= a && a <= hi * (1.0 + 1e-12));
        }
        // A_inf, R_inf, G_inf are the minima at q = inf.
        let ci = per_class_measures(&m, Order::INFINITY).unwrap();
        let min_alpha = ci.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((f.get("A_qinf").unwrap() - min_alpha).abs() < 1e-12 * min_alpha);
    }
}
