//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p lcr-core --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{order_grid, random_abundance, random_classes, random_similarity};
use lcr_core::analysis::{
    adjusted_r2, enumerate_feature_sets, proxy_evaluate, regress_feature_set, FeatureTable, PerformanceRow,
    PerformanceTable,
};
use lcr_core::diversity::{
    diversity_profile, hill_diversity, similarity_diversity, Order, RelativeAbundance, SimilarityMatrix,
};
use lcr_core::metacommunity::{aggregate_measures, feature_vector, FeatureVector, Metacommunity, SystematicParams};
use lcr_core::sampler::{
    achievable_cb1_range, bin_index, generate_subsets, materialize_subset, write_subsets_jsonl, BinningConfig,
    SubsetRecord,
};
use lcr_core::similarity::{similarity_matrix_with_workers, write_zsim, DatasetItem, DatasetStore, ImageTensor};
use lcr_core::synthetic::{generate, template_restricted_subset, SyntheticConfig, SyntheticDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn orders() -> [Order; 5] {
    [Order::ZERO, Order::new(0.5).unwrap(), Order::ONE, Order::TWO, Order::INFINITY]
}

fn random_meta(rng: &mut ChaCha8Rng) -> Metacommunity {
    let n = rng.random_range(2..=12);
    let m = rng.random_range(1..=n.min(5));
    let z = random_similarity(rng, n);
    let p = random_abundance(rng, n);
    let classes = random_classes(rng, n, m);
    Metacommunity::new(p, z, classes, m).unwrap()
}

fn hill_reduction() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let p = random_abundance(&mut rng, n);
        let q = orders()[rng.random_range(0..5)];
        let err = (similarity_diversity(&SimilarityMatrix::identity(n), &p, q).unwrap() - hill_diversity(&p, q)).abs();
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    ensure!(worst < 1e-10, "max error {worst:e}");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("max error {worst:e}, {elapsed:?}"))
}

fn class_balance_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(1..=n.min(5));
        let classes = random_classes(&mut rng, n, m);
        let p = random_abundance(&mut rng, n);
        let meta = Metacommunity::new(p, SimilarityMatrix::block(&classes), classes, m).unwrap();
        for q in [Order::ZERO, Order::ONE, Order::INFINITY] {
            let d = aggregate_measures(&meta, q).unwrap();
            worst = worst.max((d.g - d.cb).abs());
        }
    }
    ensure!(worst < 1e-10, "max |G - CB| {worst:e}");
    Ok(format!("max |G - CB| {worst:e}"))
}

fn shannon_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = aggregate_measures(&random_meta(&mut rng), Order::ONE).unwrap();
        worst = worst.max(((d.a - d.cb * d.g * d.r) / d.a).abs());
    }
    ensure!(worst < 1e-10, "max relative error {worst:e}");
    Ok(format!("max relative error {worst:e}"))
}

fn gamma_nesting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let meta = random_meta(&mut rng);
        for q in [Order::ZERO, Order::ONE, Order::TWO, Order::INFINITY] {
            let g = aggregate_measures(&meta, q).unwrap().g;
            let direct = similarity_diversity(meta.similarity(), meta.abundance(), q).unwrap();
            worst = worst.max((g - direct).abs());
        }
    }
    ensure!(worst < 1e-10, "max |G - D_Z| {worst:e}");
    Ok(format!("max |G - D_Z| {worst:e}"))
}

fn profile_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = order_grid();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=15);
        let z = random_similarity(&mut rng, n);
        let p = random_abundance(&mut rng, n);
        let prof = diversity_profile(&z, &p, &grid).unwrap();
        for w in prof.windows(2) {
            worst = worst.max(w[1].1 - w[0].1);
        }
    }
    ensure!(worst <= 1e-12, "largest increase {worst:e}");
    Ok(format!("largest increase {worst:e} over {} orders", grid.len()))
}

/// Ten images that are noisy copies of one pattern, or of ten unrelated patterns.
fn ten_images(distinct: bool, rng: &mut ChaCha8Rng) -> DatasetStore {
    let base: Vec<f64> = (0..64).map(|_| rng.random_range(0.2..0.8)).collect();
    let items = (0..10)
        .map(|k| {
            let own: Vec<f64> = (0..64).map(|_| rng.random_range(0.2..0.8)).collect();
            let pattern = if distinct { &own } else { &base };
            let pixels = pattern.iter().map(|v| (v + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)).collect();
            DatasetItem {
                image: ImageTensor::new(8, 8, 1, pixels).unwrap(),
                label: "x".into(),
                path: format!("{k}").into(),
            }
        })
        .collect();
    DatasetStore::new(items).unwrap()
}

fn diversity_intuition() -> Outcome {
    let balanced = hill_diversity(&RelativeAbundance::uniform(5).unwrap(), Order::ONE);
    let skewed = hill_diversity(&RelativeAbundance::new(vec![0.6, 0.1, 0.1, 0.1, 0.1]).unwrap(), Order::ONE);
    ensure!((balanced - 5.0).abs() < 1e-12, "balanced D1 {balanced}");
    ensure!((skewed - 3.412_787_518_465_365_5).abs() < 1e-12, "skewed D1 {skewed}");
    ensure!(balanced > skewed, "balanced {balanced} <= skewed {skewed}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = RelativeAbundance::uniform(10).unwrap();
    let all: Vec<usize> = (0..10).collect();
    let similar = ten_images(false, &mut rng);
    let different = ten_images(true, &mut rng);
    let d_similar =
        similarity_diversity(&similarity_matrix_with_workers(&similar, &all, 1).unwrap(), &p, Order::ONE).unwrap();
    let d_different =
        similarity_diversity(&similarity_matrix_with_workers(&different, &all, 1).unwrap(), &p, Order::ONE).unwrap();
    ensure!(d_different > d_similar, "different {d_different} <= similar {d_similar}");
    Ok(format!("D1 5 > {skewed:.7}; D_Z1 different {d_different:.5} > similar {d_similar:.5}"))
}

fn jsonl_bytes(run: &lcr_core::sampler::SamplingRun) -> Vec<u8> {
    let records: Vec<SubsetRecord> = run.subsets.iter().map(|s| SubsetRecord::from_spec(s, &run.labels)).collect();
    let mut out = Vec::new();
    write_subsets_jsonl(&mut out, None, &records).unwrap();
    out
}

fn sampler_contract() -> Outcome {
    let cfg = SyntheticConfig { classes: 4, per_class: 200, templates: 4, ..Default::default() };
    let (data, _) = generate(&cfg, 1, 7).unwrap();
    let classes = data.store.class_members();
    let caps: Vec<usize> = classes.values().map(Vec::len).collect();
    let members: Vec<Vec<usize>> = classes.values().cloned().collect();
    let bcfg = BinningConfig::default();
    let start = Instant::now();
    let run = generate_subsets(&classes, &bcfg, 2024).unwrap();
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");

    let mut sampled = 0;
    for y in &run.yields {
        let picked: Vec<_> = run.subsets.iter().filter(|s| s.partition.n == y.size).collect();
        ensure!(picked.len() == y.selected(), "size {}: yield mismatch", y.size);
        if y.skipped.is_some() {
            ensure!(y.size > 800 && picked.is_empty(), "size {} skipped unexpectedly", y.size);
            continue;
        }
        sampled += 1;
        ensure!(picked.len() <= 100, "size {}: {} subsets", y.size, picked.len());
        let (lo, hi) = achievable_cb1_range(y.size, &caps).unwrap();
        let bins: Vec<usize> = picked.iter().map(|s| bin_index(s.partition.cb1, 4, bcfg.bins)).collect();
        let (want_lo, want_hi) = (bin_index(lo, 4, bcfg.bins), bin_index(hi, 4, bcfg.bins));
        ensure!(bins.contains(&want_lo), "size {}: bin {want_lo} (cb1 {lo:.3}) empty", y.size);
        ensure!(bins.contains(&want_hi), "size {}: bin {want_hi} (cb1 {hi:.3}) empty", y.size);
        for s in picked {
            let mut seen = s.members.clone();
            seen.sort_unstable();
            seen.dedup();
            ensure!(seen.len() == s.partition.n, "{}: duplicate members", s.id);
            for (c, &count) in s.partition.counts.iter().enumerate() {
                ensure!(count >= 1 && count <= caps[c], "{}: count {count} outside caps", s.id);
                let inside = s.members.iter().filter(|i| members[c].binary_search(i).is_ok()).count();
                ensure!(inside == count, "{}: class {c} has {inside} members, expected {count}", s.id);
            }
            let again = materialize_subset(s.id.clone(), &s.partition, &members, s.seed).unwrap();
            ensure!(&again == s, "{}: not reproducible from its seed", s.id);
        }
    }
    ensure!(sampled >= 6, "only {sampled} sizes sampled");
    let rerun = generate_subsets(&classes, &bcfg, 2024).unwrap();
    ensure!(jsonl_bytes(&run) == jsonl_bytes(&rerun), "rerun bytes differ");
    Ok(format!("{} subsets over {sampled} sizes, {elapsed:?}", run.subsets.len()))
}

fn regression_correctness() -> Outcome {
    let spot = adjusted_r2(0.5, 100, 3).unwrap();
    ensure!((spot - 0.484375).abs() < 1e-15, "adjusted spot value {spot}");

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut features = FeatureTable::default();
    let mut perf = PerformanceTable::default();
    for r in 0..500 {
        let mut values = [0.0f64; 30];
        for v in values.iter_mut() {
            *v = rng.random_range(1.0..1.5);
        }
        let y = 0.7 * values[0].ln() + 0.2 * values[26].ln() + 0.3;
        let id = format!("r{r}");
        features.push(id.clone(), FeatureVector::from_values(values).unwrap());
        perf.push(PerformanceRow { subset_id: id, acc: y, bacc: y, auc: None }).unwrap();
    }
    let reports = regress_feature_set(&features, &perf, &["A_q0", "size"]).unwrap();
    for rep in &reports {
        ensure!((rep.r2 - 1.0).abs() < 1e-10, "{}: R2 {}", rep.metric, rep.r2);
        let closed = 1.0 - (1.0 - rep.r2) * (rep.n as f64 - 1.0) / (rep.n - rep.k - 1) as f64;
        ensure!((rep.adjusted_r2 - closed).abs() < 1e-15, "{}: adjusted {}", rep.metric, rep.adjusted_r2);
        let slope = |name: &str| rep.coefficients.iter().find(|c| c.0 == name).map(|c| c.1).unwrap();
        ensure!((slope("A_q0") - 0.7).abs() < 1e-8 && (slope("size") - 0.2).abs() < 1e-8, "slopes off");
    }

    let all = enumerate_feature_sets(&features, &perf, 3).unwrap();
    for metric in &all.metrics {
        let count = |a: usize| all.reports.iter().filter(|r| &r.metric == metric && r.features.len() == a).count();
        let counts = (count(1), count(2), count(3));
        ensure!(counts == (27, 351, 2925), "{metric}: counts {counts:?}");
    }
    Ok(format!("R2 {:.12}, adjusted 0.484375, counts 27/351/2925", reports[0].r2))
}

/// Mean BACC of the top-A₀ decile minus the bottom decile, recorded on the
/// seed-42 study and held as a regression guard.
const FROZEN_DECILE_MARGIN: f64 = 0.642_575_757_575_757_6;

struct StudyRow {
    id: String,
    a0: f64,
    bacc: f64,
}

fn study_subsets(data: &SyntheticDataset, seed: u64) -> Vec<(String, Vec<usize>)> {
    let cfg = BinningConfig { sizes: vec![64, 128, 256], ..Default::default() };
    let run = generate_subsets(&data.store.class_members(), &cfg, seed).unwrap();
    let mut out: Vec<(String, Vec<usize>)> = run.subsets.into_iter().map(|s| (s.id, s.members)).collect();
    let m = data.store.class_labels().len();
    for size in [64, 128, 256] {
        for templates in [1, 2, 4, 8] {
            for rep in 0..4 {
                let per_class: Vec<usize> = (0..m).map(|c| size / m + usize::from(c < size % m)).collect();
                let stream = ((size as u64) << 16) | ((templates as u64) << 8) | rep;
                let members = template_restricted_subset(data, &per_class, templates, seed ^ stream).unwrap();
                out.push((format!("t{templates}-n{size}-{rep}"), members));
            }
        }
    }
    out
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let cfg = SyntheticConfig { classes: 5, per_class: 500, templates: 8, height: 16, width: 16, ..Default::default() };
    let (train, test) = generate(&cfg, 40, 42).unwrap();
    let all: Vec<usize> = (0..train.store.len()).collect();
    let z = similarity_matrix_with_workers(&train.store, &all, rayon::current_num_threads()).unwrap();
    let subsets = study_subsets(&train, 42);

    let mut features = FeatureTable::default();
    let mut perf = PerformanceTable::default();
    let mut rows = Vec::new();
    for (id, members) in &subsets {
        let labels: Vec<&str> = members.iter().map(|&i| train.store.label(i)).collect();
        let meta = Metacommunity::from_labels(
            RelativeAbundance::uniform(members.len()).unwrap(),
            z.submatrix(members).unwrap(),
            &labels,
        )
        .unwrap();
        let sys = SystematicParams { image_size: 256.0, color_depth: 1.0, num_classes: meta.num_classes() as f64 };
        let f = feature_vector(&meta, sys).unwrap();
        let outcome = proxy_evaluate(members, &train.store, &test.store, 5).unwrap();
        rows.push(StudyRow { id: id.clone(), a0: f.get("A_q0").unwrap(), bacc: outcome.metrics.bacc });
        features.push(id.clone(), f);
        perf.push(PerformanceRow {
            subset_id: id.clone(),
            acc: outcome.metrics.acc,
            bacc: outcome.metrics.bacc,
            auc: None,
        })
        .unwrap();
    }
    let enumeration = enumerate_feature_sets(&features, &perf, 3).unwrap();
    let elapsed = start.elapsed();

    rows.sort_by(|a, b| a.a0.total_cmp(&b.a0).then_with(|| a.id.cmp(&b.id)));
    let decile = rows.len() / 10;
    let mean = |r: &[StudyRow]| r.iter().map(|x| x.bacc).sum::<f64>() / r.len() as f64;
    let bottom = mean(&rows[..decile]);
    let top = mean(&rows[rows.len() - decile..]);
    let margin = top - bottom;
    let best_bacc = enumeration.reports.iter().find(|r| r.metric == "bacc").unwrap();
    let detail = format!(
        "{} subsets, top-decile BACC {top:.4} vs bottom {bottom:.4} (margin {margin:.6}), best adj R2 {:.3} [{}], {elapsed:?}",
        rows.len(),
        best_bacc.adjusted_r2,
        best_bacc.features.join("+"),
    );
    ensure!(elapsed < Duration::from_secs(15 * 60), "{detail}");
    ensure!(margin > 0.0, "{detail}");
    ensure!(
        (margin - FROZEN_DECILE_MARGIN).abs() < 1e-9,
        "margin {margin:?} differs from frozen {FROZEN_DECILE_MARGIN:?}; {detail}"
    );
    Ok(detail)
}

fn engine_determinism() -> Outcome {
    let cfg = SyntheticConfig { classes: 3, per_class: 60, templates: 3, ..Default::default() };
    let (data, _) = generate(&cfg, 1, 10).unwrap();
    let idx: Vec<usize> = (0..data.store.len()).collect();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for workers in [1, 2, 4] {
        let path = dir.path().join(format!("{workers}.zsim"));
        write_zsim(&path, &similarity_matrix_with_workers(&data.store, &idx, workers).unwrap()).unwrap();
        files.push(std::fs::read(path).unwrap());
    }
    ensure!(files[0] == files[1] && files[0] == files[2], "cache bytes differ across worker counts");

    let mk = |v: f64| DatasetItem {
        image: ImageTensor::new(4, 4, 1, vec![v; 16]).unwrap(),
        label: "x".into(),
        path: "p".into(),
    };
    let pair = DatasetStore::new(vec![mk(0.0), mk(1.0)]).unwrap();
    let z = similarity_matrix_with_workers(&pair, &[0, 1], 2).unwrap().get(0, 1);
    ensure!((z - (-1.0f64).exp()).abs() < 1e-15 && (z - 0.36788).abs() < 5e-6, "Z = {z}");
    Ok(format!("{} bytes identical for 1/2/4 workers; Z(0,1) = {z:.5}", files[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("hill reduction", hill_reduction),
        ("class-balance collapse", class_balance_collapse),
        ("q=1 identity", shannon_identity),
        ("gamma nesting", gamma_nesting),
        ("profile monotonicity", profile_monotonicity),
        ("diversity intuition (balanced and distinct beat skewed and similar)", diversity_intuition),
        ("sampler contract", sampler_contract),
        ("regression correctness", regression_correctness),
        ("end-to-end study", end_to_end),
        ("similarity engine determinism", engine_determinism),
    ];
    let mut failed = 0;
    let mut summary = BTreeMap::new();
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match &result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
        summary.insert(name, result.is_ok());
    }
    println!("acceptance: {} passed, {failed} failed", summary.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
