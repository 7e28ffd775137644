use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use serde::Deserialize;

use crate::error::{validation, Error, Result};

/// A decoded image with intensities scaled to `[0, 1]`, channel-interleaved
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(validation(format!("images must have 1 or 3 channels, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(validation("image dimensions must be positive"));
        }
        if height * width * channels != pixels.len() {
            return Err(validation(format!(
                "pixel buffer has {} values, expected {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(validation(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn from_dynamic(img: DynamicImage) -> std::result::Result<Self, String> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let (channels, pixels): (usize, Vec<f64>) = match img {
            DynamicImage::ImageLuma8(b) => (1, scale(b.as_raw(), 8)),
            DynamicImage::ImageRgb8(b) => (3, scale(b.as_raw(), 8)),
            DynamicImage::ImageLuma16(b) => (1, scale(b.as_raw(), 16)),
            DynamicImage::ImageRgb16(b) => (3, scale(b.as_raw(), 16)),
            other => return Err(format!("unsupported pixel format {:?} (expected gray or RGB)", other.color())),
        };
        Self::new(h, w, channels, pixels).map_err(|e| e.to_string())
    }
}

fn scale<T: Copy + Into<u32>>(raw: &[T], depth: u32) -> Vec<f64> {
    let max = ((1u64 << depth) - 1) as f64;
    raw.iter().map(|&v| f64::from(v.into()) / max).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub image: ImageTensor,
    pub label: String,
    pub path: PathBuf,
}

/// Immutable, dimension-uniform collection of labeled images.
#[derive(Debug, Clone)]
pub struct DatasetStore {
    shape: (usize, usize, usize),
    items: Vec<DatasetItem>,
}

impl DatasetStore {
    pub fn new(items: Vec<DatasetItem>) -> Result<Self> {
        let first = items.first().ok_or_else(|| validation("dataset is empty"))?;
        let shape = first.image.shape();
        for (k, it) in items.iter().enumerate() {
            if it.image.shape() != shape {
                return Err(Error::Ingestion {
                    row: k + 1,
                    path: it.path.clone(),
                    message: format!("dimension mismatch: {:?} vs {:?} in row 1", it.image.shape(), shape),
                });
            }
        }
        Ok(Self { shape, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    pub fn image(&self, i: usize) -> &ImageTensor {
        &self.items[i].image
    }

    pub fn label(&self, i: usize) -> &str {
        &self.items[i].label
    }

    /// `(height, width, channels)` shared by every image.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn image_size(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn color_depth(&self) -> usize {
        self.shape.2
    }

    /// Distinct labels in sorted order.
    pub fn class_labels(&self) -> Vec<String> {
        self.class_members().into_keys().collect()
    }

    /// Item indices grouped by label, labels sorted, indices ascending.
    pub fn class_members(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, it) in self.items.iter().enumerate() {
            out.entry(it.label.clone()).or_default().push(i);
        }
        out
    }

    pub fn labels(&self) -> Vec<&str> {
        self.items.iter().map(|it| it.label.as_str()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    path: String,
    label: String,
}

/// Reads a `path,label` CSV manifest and decodes every referenced image.
/// Paths are resolved relative to the manifest's directory.
pub fn load_dataset(manifest: &Path) -> Result<DatasetStore> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(manifest)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label"] {
        return Err(Error::Integrity(format!("manifest {} must have header `path,label`", manifest.display())));
    }
    let mut items = Vec::new();
    let mut shape = None;
    for (k, rec) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Ingestion { row, path: manifest.to_path_buf(), message: e.to_string() })?;
        let path = base.join(&rec.path);
        let fail = |message: String| Error::Ingestion { row, path: path.clone(), message };
        if !path.exists() {
            return Err(fail("file not found".into()));
        }
        let reader =
            image::ImageReader::open(&path).and_then(|r| r.with_guessed_format()).map_err(|e| fail(e.to_string()))?;
        if reader.format().is_none() {
            return Err(fail("unknown image format".into()));
        }
        let decoded = reader.decode().map_err(|e| fail(e.to_string()))?;
        let image = ImageTensor::from_dynamic(decoded).map_err(fail)?;
        match shape {
            None => shape = Some(image.shape()),
            Some(s) if s != image.shape() => {
                return Err(fail(format!("dimension mismatch: {:?} differs from {:?} in row 1", image.shape(), s)))
            }
            _ => {}
        }
        items.push(DatasetItem { image, label: rec.label, path });
    }
    DatasetStore::new(items)
}
