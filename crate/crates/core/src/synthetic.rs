//! Seeded synthetic image datasets for desk-scale studies.
//!
//! Every class mixes a fixed number of smooth random templates; each image
//! is one template plus uniform pixel noise, quantized to 8 bits. Subsets
//! drawn from few templates per class are duplicate-heavy, subsets drawn
//! from all templates are diverse.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, Result};
use crate::sampler::derive_seed;
use crate::similarity::{DatasetItem, DatasetStore, ImageTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub templates: usize,
    pub height: usize,
    pub width: usize,
    /// Half-width of the uniform pixel noise.
    pub noise: f64,
    /// Side of the coarse grid that is upsampled into each template.
    pub grid: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { classes: 5, per_class: 500, templates: 8, height: 16, width: 16, noise: 0.1, grid: 4 }
    }
}

/// A generated dataset with the template each image was drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub store: DatasetStore,
    pub templates: Vec<usize>,
}

impl SyntheticDataset {
    /// Parent indices of `class` images made from `template`.
    pub fn members_of(&self, class: &str, template: usize) -> Vec<usize> {
        (0..self.store.len()).filter(|&i| self.store.label(i) == class && self.templates[i] == template).collect()
    }
}

pub fn class_label(c: usize) -> String {
    format!("class{c}")
}

fn make_templates(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<f64>>> {
    (0..cfg.classes).map(|_| (0..cfg.templates).map(|_| smooth_pattern(cfg, rng)).collect()).collect()
}

fn smooth_pattern(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = cfg.grid.max(2);
    let coarse: Vec<f64> = (0..g * g).map(|_| rng.random_range(0.15..0.85)).collect();
    let mut out = Vec::with_capacity(cfg.height * cfg.width);
    for y in 0..cfg.height {
        let fy = y as f64 / (cfg.height.max(2) - 1) as f64 * (g - 1) as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        let y1 = (y0 + 1).min(g - 1);
        for x in 0..cfg.width {
            let fx = x as f64 / (cfg.width.max(2) - 1) as f64 * (g - 1) as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let x1 = (x0 + 1).min(g - 1);
            let top = coarse[y0 * g + x0] * (1.0 - tx) + coarse[y0 * g + x1] * tx;
            let bot = coarse[y1 * g + x0] * (1.0 - tx) + coarse[y1 * g + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

fn render(template: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    template
        .iter()
        .map(|&v| {
            let jitter = if noise > 0.0 { rng.random_range(-noise..noise) } else { 0.0 };
            ((v + jitter).clamp(0.0, 1.0) * 255.0).round() / 255.0
        })
        .collect()
}

fn build(
    cfg: &SyntheticConfig,
    templates: &[Vec<Vec<f64>>],
    per_class: usize,
    rng: &mut ChaCha8Rng,
    tag: &str,
) -> Result<SyntheticDataset> {
    let mut items = Vec::with_capacity(cfg.classes * per_class);
    let mut tids = Vec::with_capacity(cfg.classes * per_class);
    for (c, class_templates) in templates.iter().enumerate() {
        for k in 0..per_class {
            // Round-robin keeps every template equally represented.
            let t = k % cfg.templates;
            let px = render(&class_templates[t], cfg.noise, rng);
            items.push(DatasetItem {
                image: ImageTensor::new(cfg.height, cfg.width, 1, px)?,
                label: class_label(c),
                path: format!("{tag}/{}/{k:05}.pgm", class_label(c)).into(),
            });
            tids.push(t);
        }
    }
    Ok(SyntheticDataset { store: DatasetStore::new(items)?, templates: tids })
}

/// Generates a training parent and a disjoint test set sharing templates.
pub fn generate(
    cfg: &SyntheticConfig,
    test_per_class: usize,
    seed: u64,
) -> Result<(SyntheticDataset, SyntheticDataset)> {
    if cfg.classes == 0 || cfg.per_class == 0 || cfg.templates == 0 || test_per_class == 0 {
        return Err(validation("synthetic dataset dimensions must be positive"));
    }
    let mut trng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let templates = make_templates(cfg, &mut trng);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let train = build(cfg, &templates, cfg.per_class, &mut rng, "train")?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let test = build(cfg, &templates, test_per_class, &mut rng, "test")?;
    Ok((train, test))
}

/// Draws `per_class` images from each class using only the first
/// `templates_used` templates, cycling templates so each contributes evenly.
pub fn template_restricted_subset(
    data: &SyntheticDataset,
    per_class: &[usize],
    templates_used: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = data.store.class_labels();
    if labels.len() != per_class.len() {
        return Err(validation("one count per class is required"));
    }
    let mut out = Vec::new();
    for (label, &count) in labels.iter().zip(per_class) {
        let pools: Vec<Vec<usize>> = (0..templates_used).map(|t| data.members_of(label, t)).collect();
        for (t, pool) in pools.iter().enumerate() {
            let share = count / templates_used + usize::from(t < count % templates_used);
            if share > pool.len() {
                return Err(validation(format!(
                    "template {t} of `{label}` has {} images, {share} requested",
                    pool.len()
                )));
            }
            out.extend(index::sample(&mut rng, pool.len(), share).into_iter().map(|i| pool[i]));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Writes a binary 8-bit PGM (grayscale) or PPM (RGB).
pub fn write_pnm(path: &Path, image: &ImageTensor) -> Result<()> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = fs::File::create(path)?;
    write!(out, "{magic}\n{} {}\n255\n", image.width(), image.height())?;
    let bytes: Vec<u8> = image.pixels().iter().map(|&v| (v * 255.0).round() as u8).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Writes every image under `dir` and a `manifest.csv` next to them.
pub fn write_dataset(dir: &Path, store: &DatasetStore) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record(["path", "label"])?;
    for (k, item) in store.items().iter().enumerate() {
        let rel = format!("{}/{k:05}.pgm", item.label);
        let path = dir.join(&rel);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        write_pnm(&path, &item.image)?;
        manifest.write_record([rel.as_str(), item.label.as_str()])?;
    }
    manifest.flush()?;
    Ok(())
}
