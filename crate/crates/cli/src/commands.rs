use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lcr_core::analysis::{
    enumerate_feature_sets, proxy_evaluate, Enumeration, FeatureTable, PerformanceRow, PerformanceTable,
    RegressionReport,
};
use lcr_core::diversity::{diversity_profile, RelativeAbundance, SimilarityMatrix};
use lcr_core::metacommunity::{feature_vector, FeatureVector, Metacommunity, SystematicParams};
use lcr_core::sampler::{
    generate_subsets, read_subsets_jsonl, write_subsets_jsonl, BinningConfig, SubsetRecord, DEFAULT_SIZES,
    EXTENDED_SIZE,
};
use lcr_core::similarity::{load_dataset, read_zsim, similarity_matrix_with_workers, write_zsim, DatasetStore};
use lcr_core::synthetic::{generate, write_dataset, SyntheticConfig};
use lcr_core::{Error, Result};
use rayon::prelude::*;

use crate::provenance::{file_digest, pixel_digest, Provenance};
use crate::{Cli, Command, Format};

/// Id of the single row written when no subsets file is given.
pub const FULL_ID: &str = "full";

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::Similarity { manifest } => {
            let store = load_dataset(manifest)?;
            similarity(cli, manifest, &store, true).map(|_| ())
        }
        Command::Features { manifest, subsets, out, identity_z } => {
            features(cli, manifest, subsets.as_deref(), out, *identity_z)
        }
        Command::Sample { manifest, sizes, bins, per_bin, pool, include_2048, out } => {
            let mut sizes = sizes.clone().unwrap_or_else(|| DEFAULT_SIZES.to_vec());
            if *include_2048 && !sizes.contains(&EXTENDED_SIZE) {
                sizes.push(EXTENDED_SIZE);
            }
            let cfg = BinningConfig { bins: *bins, per_bin: *per_bin, pool: *pool, sizes };
            sample(manifest, &cfg, seed, out)
        }
        Command::Evaluate { manifest, test_manifest, subsets, k, out } => {
            evaluate(manifest, test_manifest, subsets.as_deref(), *k, seed, out)
        }
        Command::Regress { features, performance, max_arity, format, out, top } => {
            regress(features, performance, *max_arity as usize, *format, out, *top, seed)
        }
        Command::Profile { manifest, q, format, out } => profile(cli, manifest, q, *format, out.as_deref()),
        Command::Synth { out, classes, per_class, templates, side, noise, test_per_class } => {
            let cfg = SyntheticConfig {
                classes: *classes,
                per_class: *per_class,
                templates: *templates,
                height: *side,
                width: *side,
                noise: *noise,
                ..Default::default()
            };
            let (train, test) = generate(&cfg, *test_per_class, seed)?;
            write_dataset(&out.join("train"), &train.store)?;
            write_dataset(&out.join("test"), &test.store)?;
            println!(
                "wrote {} training and {} test images under {}",
                train.store.len(),
                test.store.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn workers(cli: &Cli) -> usize {
    cli.global.workers.map_or_else(rayon::current_num_threads, |n| n as usize)
}

fn cache_path(cli: &Cli, key: &str) -> PathBuf {
    cli.global.cache_dir.join(format!("{key}.zsim"))
}

/// Loads the cached similarity matrix of `store`, computing and caching it on
/// a miss. Status goes to stdout when `announce`, else to the log.
fn similarity(cli: &Cli, manifest: &Path, store: &DatasetStore, announce: bool) -> Result<SimilarityMatrix> {
    let say = |msg: String| if announce { println!("{msg}") } else { log::info!("{msg}") };
    let key = pixel_digest(store);
    let path = cache_path(cli, &key);
    if path.exists() {
        let z = read_zsim(&path)?;
        if z.n() != store.len() {
            return Err(Error::Integrity(format!(
                "cache {} holds n={} but the manifest lists {} images",
                path.display(),
                z.n(),
                store.len()
            )));
        }
        say(format!("cache hit: n={} ({})", z.n(), path.display()));
        return Ok(z);
    }
    let start = Instant::now();
    let indices: Vec<usize> = (0..store.len()).collect();
    let z = similarity_matrix_with_workers(store, &indices, workers(cli))?;
    fs::create_dir_all(&cli.global.cache_dir)?;
    write_zsim(&path, &z)?;
    let mut prov = Provenance::new("similarity", cli.global.seed);
    prov.input("manifest", file_digest(manifest)?).input("pixels", key.clone());
    let sidecar = path.with_extension("json");
    serde_json::to_writer_pretty(create(&sidecar)?, &serde_json::json!({ "provenance": prov.to_json(), "n": z.n() }))?;
    say(format!("n={} elapsed={:.3}s wrote {}", z.n(), start.elapsed().as_secs_f64(), path.display()));
    Ok(z)
}

fn read_subsets(path: &Path, store: &DatasetStore) -> Result<Vec<SubsetRecord>> {
    let records = read_subsets_jsonl(BufReader::new(fs::File::open(path)?))?;
    for r in &records {
        if r.members.len() != r.size {
            return Err(Error::Integrity(format!(
                "subset `{}` lists {} members but declares size {}",
                r.id,
                r.members.len(),
                r.size
            )));
        }
        if let Some(&bad) = r.members.iter().find(|&&i| i >= store.len()) {
            return Err(Error::Integrity(format!(
                "subset `{}` references image {bad} but the manifest has {}",
                r.id,
                store.len()
            )));
        }
    }
    Ok(records)
}

/// `(id, members)` for each subset, or a single `full` entry.
fn targets(subsets: Option<&Path>, store: &DatasetStore) -> Result<Vec<(String, Vec<usize>)>> {
    Ok(match subsets {
        Some(path) => read_subsets(path, store)?.into_iter().map(|r| (r.id, r.members)).collect(),
        None => vec![(FULL_ID.to_string(), (0..store.len()).collect())],
    })
}

fn subset_features(store: &DatasetStore, z: Option<&SimilarityMatrix>, members: &[usize]) -> Result<FeatureVector> {
    let sub = match z {
        Some(z) => z.submatrix(members)?,
        None => SimilarityMatrix::identity(members.len()),
    };
    let labels: Vec<&str> = members.iter().map(|&i| store.label(i)).collect();
    let meta = Metacommunity::from_labels(RelativeAbundance::uniform(members.len())?, sub, &labels)?;
    let sys = SystematicParams {
        image_size: store.image_size() as f64,
        color_depth: store.color_depth() as f64,
        num_classes: meta.num_classes() as f64,
    };
    feature_vector(&meta, sys)
}

fn features(cli: &Cli, manifest: &Path, subsets: Option<&Path>, out: &Path, identity_z: bool) -> Result<()> {
    let store = load_dataset(manifest)?;
    let z = if identity_z { None } else { Some(similarity(cli, manifest, &store, false)?) };
    let targets = targets(subsets, &store)?;
    let rows: Vec<FeatureVector> =
        targets.par_iter().map(|(_, members)| subset_features(&store, z.as_ref(), members)).collect::<Result<_>>()?;
    let mut table = FeatureTable::default();
    for ((id, _), f) in targets.into_iter().zip(rows) {
        table.push(id, f);
    }
    let mut prov = Provenance::new("features", cli.global.seed);
    prov.input("manifest", file_digest(manifest)?);
    if let Some(s) = subsets {
        prov.input("subsets", file_digest(s)?);
    }
    if identity_z {
        prov.param("identity-z", true);
    }
    table.write_csv(create(out)?, &prov.comment_lines())?;
    println!("wrote {} feature rows to {}", table.len(), out.display());
    Ok(())
}

fn sample(manifest: &Path, cfg: &BinningConfig, seed: u64, out: &Path) -> Result<()> {
    let store = load_dataset(manifest)?;
    let run = generate_subsets(&store.class_members(), cfg, seed)?;
    let mut prov = Provenance::new("sample", seed);
    prov.input("manifest", file_digest(manifest)?)
        .param("sizes", cfg.sizes.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
        .param("bins", cfg.bins)
        .param("per-bin", cfg.per_bin)
        .param("pool", cfg.pool);
    let records: Vec<SubsetRecord> = run.subsets.iter().map(|s| SubsetRecord::from_spec(s, &run.labels)).collect();
    let mut w = create(out)?;
    write_subsets_jsonl(&mut w, Some(&prov.to_json()), &records)?;
    w.flush()?;

    println!("{:>6} {:>6} {:>8}  per-bin yields", "size", "pool", "subsets");
    for y in &run.yields {
        match &y.skipped {
            Some(reason) => println!("{:>6} {:>6} {:>8}  skipped: {reason}", y.size, "-", 0),
            None => {
                let bins: Vec<String> = y.per_bin.iter().map(ToString::to_string).collect();
                println!("{:>6} {:>6} {:>8}  {}", y.size, y.pool, y.selected(), bins.join(" "));
            }
        }
    }
    println!("wrote {} subsets to {}", records.len(), out.display());
    Ok(())
}

fn evaluate(
    manifest: &Path,
    test_manifest: &Path,
    subsets: Option<&Path>,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let store = load_dataset(manifest)?;
    let test = load_dataset(test_manifest)?;
    let mut table = PerformanceTable::default();
    for (id, members) in targets(subsets, &store)? {
        let outcome = proxy_evaluate(&members, &store, &test, k)?;
        if let Some(w) = &outcome.warning {
            log::warn!("{id}: {w}");
        }
        table.push(PerformanceRow {
            subset_id: id,
            acc: outcome.metrics.acc,
            bacc: outcome.metrics.bacc,
            auc: None,
        })?;
    }
    let mut prov = Provenance::new("evaluate", seed);
    prov.input("manifest", file_digest(manifest)?).input("test-manifest", file_digest(test_manifest)?);
    if let Some(s) = subsets {
        prov.input("subsets", file_digest(s)?);
    }
    prov.param("k", k);
    table.write_csv(create(out)?, &prov.comment_lines())?;
    println!("wrote {} performance rows to {}", table.rows.len(), out.display());
    Ok(())
}

fn read_table<T>(path: &Path, read: impl FnOnce(fs::File) -> Result<T>) -> Result<T> {
    read(fs::File::open(path)?)
}

fn regress(
    features: &Path,
    performance: &Path,
    max_arity: usize,
    format: Format,
    out: &Path,
    top: usize,
    seed: u64,
) -> Result<()> {
    let ftable = read_table(features, FeatureTable::read_csv)?;
    let ptable = read_table(performance, PerformanceTable::read_csv)?;
    let result = enumerate_feature_sets(&ftable, &ptable, max_arity)?;
    if let Some(w) = &result.join_warning {
        eprintln!("warning: {w}");
    }
    let mut prov = Provenance::new("regress", seed);
    prov.input("features", file_digest(features)?)
        .input("performance", file_digest(performance)?)
        .param("max-arity", max_arity);
    let w = create(out)?;
    match format {
        Format::Csv => write_reports_csv(w, &prov, &result)?,
        Format::Json => {
            let doc = serde_json::json!({
                "provenance": prov.to_json(),
                "joined_rows": result.joined_rows,
                "join_warning": result.join_warning,
                "reports": result.reports,
            });
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.write_all(b"\n")?;
        }
    }
    print_summary(&result, max_arity, top);
    println!("wrote {} reports to {}", result.reports.len(), out.display());
    Ok(())
}

fn write_reports_csv<W: Write>(mut out: W, prov: &Provenance, result: &Enumeration) -> Result<()> {
    for c in prov.comment_lines() {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "metric",
        "rank",
        "arity",
        "features",
        "r2",
        "adjusted_r2",
        "intercept",
        "n",
        "k",
        "coefficients",
        "warnings",
    ])?;
    let mut rank = 0;
    let mut metric = "";
    for r in &result.reports {
        if r.metric != metric {
            metric = &r.metric;
            rank = 0;
        }
        rank += 1;
        let coefs: Vec<String> = r.coefficients.iter().map(|(n, v)| format!("{n}={v:?}")).collect();
        w.write_record([
            r.metric.clone(),
            rank.to_string(),
            r.features.len().to_string(),
            r.features.join("+"),
            format!("{:?}", r.r2),
            format!("{:?}", r.adjusted_r2),
            format!("{:?}", r.intercept),
            r.n.to_string(),
            r.k.to_string(),
            coefs.join(";"),
            r.warnings.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_summary(result: &Enumeration, max_arity: usize, top: usize) {
    for metric in &result.metrics {
        for arity in 1..=max_arity {
            println!("{metric}, {arity}-feature sets (n={}):", result.joined_rows);
            let best: Vec<&RegressionReport> =
                result.reports.iter().filter(|r| &r.metric == metric && r.features.len() == arity).take(top).collect();
            for r in best {
                println!("  {:>8.4}  {}", r.adjusted_r2, r.features.join(" + "));
            }
        }
    }
}

fn profile(
    cli: &Cli,
    manifest: &Path,
    qs: &[lcr_core::diversity::Order],
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let store = load_dataset(manifest)?;
    let z = similarity(cli, manifest, &store, false)?;
    let p = RelativeAbundance::uniform(store.len())?;
    let mut sorted = qs.to_vec();
    sorted.sort_by(|a, b| a.value().total_cmp(&b.value()));
    sorted.dedup();
    let values = diversity_profile(&z, &p, &sorted)?;
    let mut prov = Provenance::new("profile", cli.global.seed);
    prov.input("manifest", file_digest(manifest)?);
    let mut w: Box<dyn Write> = match out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => {
            for c in prov.comment_lines() {
                writeln!(w, "# {c}")?;
            }
            writeln!(w, "q,diversity")?;
            for (q, d) in &values {
                writeln!(w, "{q},{d:?}")?;
            }
        }
        Format::Json => {
            let rows: Vec<_> = values.iter().map(|(q, d)| serde_json::json!({ "q": q, "diversity": d })).collect();
            serde_json::to_writer_pretty(
                &mut w,
                &serde_json::json!({ "provenance": prov.to_json(), "profile": rows }),
            )?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
