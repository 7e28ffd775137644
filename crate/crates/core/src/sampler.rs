//! Class-composition subset sampling.
//!
//! For each target size `n` a pool of random compositions of `n` into `m`
//! positive per-class counts is drawn, capped by the images available in
//! each class. Half of the pool is uniform over compositions; the other half
//! comes from Dirichlet proportions with a log-uniform concentration, which
//! reaches the strongly imbalanced corners that uniform draws almost never
//! visit once `n` is large. Compositions are binned by their class balance `CB₁` into
//! equal-width bins over `[1, m]`, a few are picked per bin, and each pick
//! is materialized by drawing images uniformly without replacement within
//! every class.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diversity::{hill_diversity, Order, RelativeAbundance};
use crate::error::{validation, Error, Result};

/// Target sizes used when none are given.
pub const DEFAULT_SIZES: [usize; 7] = [64, 128, 256, 384, 512, 768, 1024];

/// Extra size enabled by `--include-2048`.
pub const EXTENDED_SIZE: usize = 2048;

/// Rejection draws attempted before switching to the exact bounded sampler.
const REJECTION_BUDGET: usize = 1_000;

/// Rejection draws per pool entry before sampling from the exact table.
const POOL_REJECTION_TRIES: usize = 8;

const POOL_STREAM: u64 = 0x706f_6f6c_0000_0000;

/// Range of the Dirichlet concentration used for spread compositions.
const SPREAD_CONCENTRATION: (f64, f64) = (0.05, 20.0);

/// Per-class image counts of one candidate subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub counts: Vec<usize>,
    pub n: usize,
    pub cb1: f64,
}

impl PartitionSpec {
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(validation("composition counts must be positive"));
        }
        let n = counts.iter().sum();
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let cb1 = hill_diversity(&RelativeAbundance::from_counts(&w)?, Order::ONE);
        Ok(Self { counts, n, cb1 })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub bins: usize,
    pub per_bin: usize,
    pub pool: usize,
    pub sizes: Vec<usize>,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self { bins: 25, per_bin: 4, pool: 10_000, sizes: DEFAULT_SIZES.to_vec() }
    }
}

impl BinningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.per_bin == 0 {
            return Err(validation("bin count and per-bin selection must be at least 1"));
        }
        if self.pool < self.bins {
            return Err(validation(format!("pool size {} is smaller than the bin count {}", self.pool, self.bins)));
        }
        Ok(())
    }
}

/// A materialized subset: a composition plus the chosen parent indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSpec {
    pub id: String,
    pub partition: PartitionSpec,
    /// Parent item indices, grouped by class in class order, ascending within a class.
    pub members: Vec<usize>,
    pub seed: u64,
}

/// SplitMix64 finalizer; used to derive independent child seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_feasible(n: usize, caps: &[usize]) -> Result<()> {
    let m = caps.len();
    if m == 0 {
        return Err(validation("at least one class is required"));
    }
    if caps.contains(&0) {
        return Err(validation("every class cap must be at least 1"));
    }
    if n < m {
        return Err(Error::Infeasible(format!("size {n} is smaller than the class count {m}")));
    }
    let total: usize = caps.iter().sum();
    if total < n {
        return Err(Error::Infeasible(format!("size {n} exceeds the {total} images available across classes")));
    }
    Ok(())
}

/// Draws a composition of `n` into `caps.len()` positive parts, uniform over
/// the compositions that respect `count_i ≤ caps[i]`.
pub fn random_composition<R: Rng + ?Sized>(n: usize, caps: &[usize], rng: &mut R) -> Result<PartitionSpec> {
    check_feasible(n, caps)?;
    if let Some(counts) = try_unconstrained(n, caps, REJECTION_BUDGET, rng) {
        return PartitionSpec::from_counts(counts);
    }
    PartitionSpec::from_counts(CappedCompositions::new(n, caps).sample(rng))
}

/// Rejection step shared by the uniform samplers; accepted draws are uniform
/// over the capped compositions.
fn try_unconstrained<R: Rng + ?Sized>(n: usize, caps: &[usize], tries: usize, rng: &mut R) -> Option<Vec<usize>> {
    (0..tries)
        .map(|_| unconstrained_composition(n, caps.len(), rng))
        .find(|counts| counts.iter().zip(caps).all(|(c, cap)| c <= cap))
}

/// Uniform composition via sorted distinct cut points in `1..n`.
fn unconstrained_composition<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    let mut cuts: Vec<usize> = index::sample(rng, n - 1, m - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut counts = Vec::with_capacity(m);
    let mut prev = 0;
    for c in cuts {
        counts.push(c - prev);
        prev = c;
    }
    counts.push(n - prev);
    counts
}

/// Exact uniform sampler over capped compositions: sequential choice
/// weighted by the number of completions of the remaining classes. Counts
/// are held in f64, whose relative precision is far below sampling noise.
struct CappedCompositions<'a> {
    n: usize,
    caps: &'a [usize],
    /// `ways[i][r]`: compositions of `r` into classes `i..m` within caps.
    ways: Vec<Vec<f64>>,
}

impl<'a> CappedCompositions<'a> {
    fn new(n: usize, caps: &'a [usize]) -> Self {
        let m = caps.len();
        let mut ways = vec![vec![0.0f64; n + 1]; m + 1];
        ways[m][0] = 1.0;
        for i in (0..m).rev() {
            let mut prefix = vec![0.0; n + 2];
            for r in 0..=n {
                prefix[r + 1] = prefix[r] + ways[i + 1][r];
            }
            for r in 1..=n {
                let lo = r.saturating_sub(caps[i]);
                ways[i][r] = prefix[r] - prefix[lo];
            }
        }
        Self { n, caps, ways }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let m = self.caps.len();
        let mut counts = Vec::with_capacity(m);
        let mut remaining = self.n;
        for i in 0..m {
            let max_c = self.caps[i].min(remaining);
            let mut u = rng.random::<f64>() * self.ways[i][remaining];
            let mut pick = None;
            let mut last_valid = 1;
            for c in 1..=max_c {
                let w = self.ways[i + 1][remaining - c];
                if w > 0.0 {
                    last_valid = c;
                    if u < w {
                        pick = Some(c);
                        break;
                    }
                    u -= w;
                }
            }
            let c = pick.unwrap_or(last_valid);
            counts.push(c);
            remaining -= c;
        }
        counts
    }
}

#[cfg(test)]
fn bounded_composition<R: Rng + ?Sized>(n: usize, caps: &[usize], rng: &mut R) -> Vec<usize> {
    CappedCompositions::new(n, caps).sample(rng)
}

/// Composition from symmetric Dirichlet proportions with a random
/// concentration in [`SPREAD_CONCENTRATION`] (log-uniform): every class gets
/// one image, the remaining `n − m` are allotted by largest remainder, and
/// any excess over a cap is re-allotted to the classes with room in
/// proportion to their shares.
pub fn spread_composition<R: Rng + ?Sized>(n: usize, caps: &[usize], rng: &mut R) -> Result<PartitionSpec> {
    check_feasible(n, caps)?;
    let m = caps.len();
    let (lo, hi) = SPREAD_CONCENTRATION;
    let alpha = rng.random_range(lo.ln()..hi.ln()).exp();
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut g: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    if !(total > 0.0) {
        // All draws underflowed: the limit is a single dominant class.
        g = vec![0.0; m];
        g[rng.random_range(0..m)] = 1.0;
    }
    let total: f64 = g.iter().sum();
    let shares: Vec<f64> = g.iter().map(|v| v / total).collect();
    let mut counts: Vec<usize> = largest_remainder(n - m, &shares).into_iter().map(|c| c + 1).collect();
    loop {
        let excess: usize = counts.iter().zip(caps).map(|(c, cap)| c.saturating_sub(*cap)).sum();
        if excess == 0 {
            break;
        }
        let open: Vec<usize> = (0..m).filter(|&i| counts[i] < caps[i]).collect();
        for (c, cap) in counts.iter_mut().zip(caps) {
            *c = (*c).min(*cap);
        }
        let weight: f64 = open.iter().map(|&i| shares[i]).sum();
        let sub: Vec<f64> = if weight > 0.0 {
            open.iter().map(|&i| shares[i] / weight).collect()
        } else {
            vec![1.0 / open.len() as f64; open.len()]
        };
        for (&i, extra) in open.iter().zip(largest_remainder(excess, &sub)) {
            counts[i] += extra;
        }
    }
    PartitionSpec::from_counts(counts)
}

fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Smallest and largest `CB₁` over compositions of `n` that respect `caps`.
pub fn achievable_cb1_range(n: usize, caps: &[usize]) -> Result<(f64, f64)> {
    check_feasible(n, caps)?;
    let m = caps.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| caps[b].cmp(&caps[a]));

    // Most skewed: one image everywhere, then fill the largest caps first.
    let mut skewed = vec![1usize; m];
    let mut left = n - m;
    for &i in &order {
        let add = left.min(caps[i] - 1);
        skewed[i] += add;
        left -= add;
    }

    // Most balanced: water-filling, smallest caps saturate first and the
    // largest-cap classes absorb the rounding remainder.
    let mut balanced = vec![0usize; m];
    let mut left = n;
    for (k, &i) in order.iter().rev().enumerate() {
        let share = caps[i].min(left / (m - k));
        balanced[i] = share;
        left -= share;
    }
    let cb = |c: Vec<usize>| PartitionSpec::from_counts(c).map(|s| s.cb1);
    Ok((cb(skewed)?, cb(balanced)?))
}

/// Draws `cfg.pool` compositions of `n`, alternating uniform and spread
/// draws, and drops repeats (first occurrence kept).
pub fn candidate_pool<R: Rng + ?Sized>(
    n: usize,
    caps: &[usize],
    cfg: &BinningConfig,
    rng: &mut R,
) -> Result<Vec<PartitionSpec>> {
    check_feasible(n, caps)?;
    let exact = CappedCompositions::new(n, caps);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for k in 0..cfg.pool {
        let spec = if k % 2 == 0 {
            let counts = try_unconstrained(n, caps, POOL_REJECTION_TRIES, rng).unwrap_or_else(|| exact.sample(rng));
            PartitionSpec::from_counts(counts)?
        } else {
            spread_composition(n, caps, rng)?
        };
        if seen.insert(spec.counts.clone()) {
            out.push(spec);
        }
    }
    Ok(out)
}

/// Equal-width bin of `cb1` over `[1, m]`.
pub fn bin_index(cb1: f64, m: usize, bins: usize) -> usize {
    if m <= 1 {
        return 0;
    }
    let x = (cb1 - 1.0) / (m as f64 - 1.0) * bins as f64;
    (x.max(0.0).floor() as usize).min(bins - 1)
}

/// Bins compositions by `CB₁` and picks up to `cfg.per_bin` from each bin
/// uniformly without replacement. Output is ordered by bin, then pick order.
pub fn bin_and_select<R: Rng + ?Sized>(
    pool: &[PartitionSpec],
    cfg: &BinningConfig,
    rng: &mut R,
) -> Result<Vec<PartitionSpec>> {
    cfg.validate()?;
    let m = pool.first().ok_or_else(|| validation("composition pool is empty"))?.num_classes();
    if pool.iter().any(|s| s.num_classes() != m) {
        return Err(validation("compositions in a pool must share the class count"));
    }
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); cfg.bins];
    for (k, spec) in pool.iter().enumerate() {
        bins[bin_index(spec.cb1, m, cfg.bins)].push(k);
    }
    let mut out = Vec::new();
    for members in bins {
        let take = cfg.per_bin.min(members.len());
        for pick in index::sample(rng, members.len(), take) {
            out.push(pool[members[pick]].clone());
        }
    }
    Ok(out)
}

/// Draws the images of one subset. `class_members[i]` lists the parent
/// indices of class `i`; the draw depends only on `(seed, spec, class_members)`.
pub fn materialize_subset(
    id: impl Into<String>,
    spec: &PartitionSpec,
    class_members: &[Vec<usize>],
    seed: u64,
) -> Result<SubsetSpec> {
    if spec.counts.len() != class_members.len() {
        return Err(validation(format!(
            "composition has {} classes but the store has {}",
            spec.counts.len(),
            class_members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(spec.n);
    for (k, (&count, pool)) in spec.counts.iter().zip(class_members).enumerate() {
        if count > pool.len() {
            return Err(validation(format!("class {k} needs {count} images but only {} are available", pool.len())));
        }
        let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
        picked.sort_unstable();
        members.extend(picked);
    }
    Ok(SubsetSpec { id: id.into(), partition: spec.clone(), members, seed })
}

/// Outcome for one target size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeYield {
    pub size: usize,
    pub pool: usize,
    /// Selected subsets per `CB₁` bin.
    pub per_bin: Vec<usize>,
    /// Set when the size was skipped, with the reason.
    pub skipped: Option<String>,
}

impl SizeYield {
    pub fn selected(&self) -> usize {
        self.per_bin.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct SamplingRun {
    pub labels: Vec<String>,
    pub subsets: Vec<SubsetSpec>,
    pub yields: Vec<SizeYield>,
}

/// Runs the whole procedure over `cfg.sizes`. Infeasible sizes are skipped
/// and reported in the yields. Output depends only on the inputs and `seed`.
pub fn generate_subsets(classes: &BTreeMap<String, Vec<usize>>, cfg: &BinningConfig, seed: u64) -> Result<SamplingRun> {
    cfg.validate()?;
    let labels: Vec<String> = classes.keys().cloned().collect();
    let members: Vec<Vec<usize>> = classes.values().cloned().collect();
    let caps: Vec<usize> = members.iter().map(Vec::len).collect();

    let per_size: Vec<Result<(SizeYield, Vec<SubsetSpec>)>> = cfg
        .sizes
        .par_iter()
        .map(|&size| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, POOL_STREAM | size as u64));
            let pool = match candidate_pool(size, &caps, cfg, &mut rng) {
                Ok(p) => p,
                Err(Error::Infeasible(reason)) => {
                    log::warn!("skipping size {size}: {reason}");
                    let y = SizeYield { size, pool: 0, per_bin: vec![0; cfg.bins], skipped: Some(reason) };
                    return Ok((y, Vec::new()));
                }
                Err(e) => return Err(e),
            };
            let picks = bin_and_select(&pool, cfg, &mut rng)?;
            let mut per_bin = vec![0; cfg.bins];
            let mut subsets = Vec::with_capacity(picks.len());
            for (k, spec) in picks.iter().enumerate() {
                per_bin[bin_index(spec.cb1, caps.len(), cfg.bins)] += 1;
                let child = derive_seed(seed, ((size as u64) << 32) | k as u64);
                subsets.push(materialize_subset(format!("n{size}-{k:03}"), spec, &members, child)?);
            }
            Ok((SizeYield { size, pool: pool.len(), per_bin, skipped: None }, subsets))
        })
        .collect();

    let mut yields = Vec::new();
    let mut subsets = Vec::new();
    for r in per_size {
        let (y, s) = r?;
        yields.push(y);
        subsets.extend(s);
    }
    Ok(SamplingRun { labels, subsets, yields })
}

/// One line of a subsets JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub id: String,
    pub size: usize,
    pub counts: BTreeMap<String, usize>,
    pub cb1: f64,
    pub seed: u64,
    pub members: Vec<usize>,
}

impl SubsetRecord {
    pub fn from_spec(spec: &SubsetSpec, labels: &[String]) -> Self {
        Self {
            id: spec.id.clone(),
            size: spec.partition.n,
            counts: labels.iter().cloned().zip(spec.partition.counts.iter().copied()).collect(),
            cb1: spec.partition.cb1,
            seed: spec.seed,
            members: spec.members.clone(),
        }
    }
}

/// Writes subsets as JSON lines, optionally preceded by a
/// `{"provenance": ...}` line.
pub fn write_subsets_jsonl<W: Write>(
    mut out: W,
    provenance: Option<&serde_json::Value>,
    records: &[SubsetRecord],
) -> Result<()> {
    if let Some(p) = provenance {
        serde_json::to_writer(&mut out, &serde_json::json!({ "provenance": p }))?;
        out.write_all(b"\n")?;
    }
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads subsets JSON lines, skipping blank and provenance lines.
pub fn read_subsets_jsonl<R: BufRead>(input: R) -> Result<Vec<SubsetRecord>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Integrity(format!("subsets line {}: {e}", k + 1)))?;
        if value.get("provenance").is_some() {
            continue;
        }
        let rec: SubsetRecord =
            serde_json::from_value(value).map_err(|e| Error::Integrity(format!("subsets line {}: {e}", k + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
