//! Synthetic two-class grayscale images: a noisy background for both
//! classes, plus one or two bright blobs for the pneumonia class. File names
//! follow the NORMAL / virus / bacteria convention.

use std::fs;
use std::path::Path;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{DataError, Result};
use crate::manifest::{DatasetManifest, Record, Split};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_per_class: 10, width: 160, height: 176, seed: 0 }
    }
}

fn render(cfg: &SynthConfig, class: u8, index: usize) -> GrayImage {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let noise = Normal::new(0.0, 18.0).unwrap();
    let base = rng.gen_range(50.0..80.0);
    let tilt = rng.gen_range(-20.0..20.0);
    let blobs: Vec<(f64, f64, f64, f64)> = if class == 1 {
        (0..rng.gen_range(1..=2))
            .map(|_| {
                let r = rng.gen_range(0.08..0.16) * w.min(h);
                (rng.gen_range(0.25..0.75) * w, rng.gen_range(0.25..0.75) * h, r, rng.gen_range(90.0..140.0))
            })
            .collect()
    } else {
        Vec::new()
    };
    GrayImage::from_fn(cfg.width, cfg.height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let mut v = base + tilt * (fy / h - 0.5) + noise.sample(&mut rng);
        for &(cx, cy, r, amp) in &blobs {
            let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
            v += amp * (-d2 / (2.0 * r * r)).exp();
        }
        Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}

fn file_name(class: u8, index: usize, seed: u64) -> String {
    match (class, index % 2) {
        (0, _) => format!("IM-{seed:04}-{index:05}-NORMAL.png"),
        (_, 0) => format!("person{index}_virus_{seed}.png"),
        _ => format!("person{index}_bacteria_{seed}.png"),
    }
}

/// Writes `n_per_class` PNG images of each class into `dir` and returns
/// their manifest in sorted path order. The same configuration always
/// produces byte-identical files.
pub fn synth_dataset(dir: &Path, split: Split, cfg: &SynthConfig) -> Result<DatasetManifest> {
    if cfg.n_per_class == 0 {
        return Err(DataError::Invalid("need at least one image per class".into()));
    }
    if cfg.width < 8 || cfg.height < 8 {
        return Err(DataError::Invalid(format!("image size {}x{} below 8x8", cfg.width, cfg.height)));
    }
    fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(2 * cfg.n_per_class);
    for class in 0..2u8 {
        for i in 0..cfg.n_per_class {
            let path = dir.join(file_name(class, i, cfg.seed));
            render(cfg, class, i)
                .save(&path)
                .map_err(|e| DataError::Ingest { path: path.clone(), message: e.to_string() })?;
            records.push(Record { path, label: class, split });
        }
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetManifest { records, skipped: Vec::new() })
}
