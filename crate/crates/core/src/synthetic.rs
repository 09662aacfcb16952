//! Deterministic synthetic scenes: rectangles and ellipses labelled with
//! remote-sensing phrases. Used as the fixture set for tests and demos.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{ImageRef, Mask};
use crate::tools::{Manifest, OracleIndex, ToolError};

/// Phrases used by the generator, with the shape family of their instances.
pub const PHRASES: [(&str, Shape); 12] = [
    ("building", Shape::Rect),
    ("vehicle", Shape::Rect),
    ("ship", Shape::Ellipse),
    ("airplane", Shape::Rect),
    ("storage tank", Shape::Ellipse),
    ("tree", Shape::Ellipse),
    ("bridge", Shape::Rect),
    ("road", Shape::Strip),
    ("water", Shape::Ellipse),
    ("vegetation", Shape::Ellipse),
    ("parking lot", Shape::Rect),
    ("bareland", Shape::Rect),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Ellipse,
    Strip,
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_images: usize,
    pub min_side: usize,
    pub max_side: usize,
    /// Probability that a phrase is present in an image.
    pub presence: f64,
    pub max_instances: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_images: 24,
            min_side: 48,
            max_side: 96,
            presence: 0.6,
            max_instances: 4,
            seed: 0,
        }
    }
}

pub struct SyntheticDataset {
    pub manifest: Manifest,
    pub oracle: OracleIndex,
    pub phrases: Vec<String>,
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let images: Vec<ImageRef> = (0..cfg.n_images)
        .map(|i| {
            let w = rng.gen_range(cfg.min_side..=cfg.max_side);
            let h = rng.gen_range(cfg.min_side..=cfg.max_side);
            ImageRef::new(format!("syn-{i:03}"), w, h).expect("positive dims")
        })
        .collect();
    let mut oracle = OracleIndex::new(Manifest::new(images.iter().cloned()));
    for img in &images {
        for (phrase, shape) in PHRASES {
            if !rng.gen_bool(cfg.presence) {
                continue;
            }
            let n = rng.gen_range(1..=cfg.max_instances.max(1));
            let masks: Vec<Mask> = (0..n).map(|_| instance(&mut rng, img, shape)).collect();
            oracle.insert(img, phrase, masks).expect("dims match");
        }
    }
    SyntheticDataset {
        manifest: Manifest::new(images),
        oracle,
        phrases: PHRASES.iter().map(|(p, _)| p.to_string()).collect(),
    }
}

fn instance(rng: &mut ChaCha8Rng, img: &ImageRef, shape: Shape) -> Mask {
    let (w, h) = (img.width, img.height);
    let mut m = Mask::empty(w, h);
    match shape {
        Shape::Rect => {
            let rw = rng.gen_range(2..=(w / 4).max(2));
            let rh = rng.gen_range(2..=(h / 4).max(2));
            let x0 = rng.gen_range(0..=w - rw);
            let y0 = rng.gen_range(0..=h - rh);
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    m.set(x, y, true);
                }
            }
        }
        Shape::Ellipse => {
            let rx = rng.gen_range(2.0..(w as f64 / 6.0).max(3.0));
            let ry = rng.gen_range(2.0..(h as f64 / 6.0).max(3.0));
            let cx = rng.gen_range(0.0..w as f64);
            let cy = rng.gen_range(0.0..h as f64);
            for y in 0..h {
                for x in 0..w {
                    let dx = (x as f64 - cx) / rx;
                    let dy = (y as f64 - cy) / ry;
                    if dx * dx + dy * dy <= 1.0 {
                        m.set(x, y, true);
                    }
                }
            }
            if m.is_empty() {
                m.set((cx as usize).min(w - 1), (cy as usize).min(h - 1), true);
            }
        }
        Shape::Strip => {
            let thick = rng.gen_range(2..=4usize);
            if rng.gen_bool(0.5) {
                let y0 = rng.gen_range(0..=h - thick);
                for y in y0..y0 + thick {
                    for x in 0..w {
                        m.set(x, y, true);
                    }
                }
            } else {
                let x0 = rng.gen_range(0..=w - thick);
                for y in 0..h {
                    for x in x0..x0 + thick {
                        m.set(x, y, true);
                    }
                }
            }
        }
    }
    m
}

impl SyntheticDataset {
    /// Writes `manifest.jsonl` and `oracle.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), ToolError> {
        fs::create_dir_all(dir).map_err(|source| ToolError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let manifest = dir.join("manifest.jsonl");
        let oracle = dir.join("oracle.jsonl");
        self.manifest.save(&manifest)?;
        self.oracle.save(&oracle)?;
        Ok((manifest, oracle))
    }
}
