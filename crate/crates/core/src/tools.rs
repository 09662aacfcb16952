//! Tool registry: the segmenter interface and its file-backed oracle.
//!
//! The oracle reads two JSON Lines files. The dataset manifest holds one
//! `{"image_id", "w", "h"}` record per image; the segmentation index holds one
//! `{"image_id", "phrase", "masks": [{"w", "h", "rle"}]}` record per
//! (image, phrase). Phrases absent from the index segment to an empty set.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ImageRef, Mask, MaskRecord, MaskSet};

/// Version tag of [`normalize_phrase`]; index keys are normalized with it.
pub const NORMALIZER_VERSION: &str = "ws-lower-v1";

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
}

/// Lowercase, trim, and collapse internal whitespace to single spaces.
pub fn normalize_phrase(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Anything that maps (image, phrase) to instance masks deterministically.
pub trait SegmenterProvider: Send + Sync {
    fn segment(&self, image: &ImageRef, phrase: &str) -> Result<MaskSet, ToolError>;
}

/// Image registry loaded from the dataset manifest.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    images: BTreeMap<String, ImageRef>,
}

impl Manifest {
    pub fn new(images: impl IntoIterator<Item = ImageRef>) -> Self {
        Self {
            images: images.into_iter().map(|i| (i.id.clone(), i)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let mut images = BTreeMap::new();
        for_each_record(path, |line, rec: ImageRef| {
            if rec.width == 0 || rec.height == 0 {
                return Err(format!("image {:?} has zero dimension", rec.id));
            }
            if images.insert(rec.id.clone(), rec).is_some() {
                return Err(format!("duplicate image id at line {line}"));
            }
            Ok(())
        })?;
        Ok(Self { images })
    }

    pub fn save(&self, path: &Path) -> Result<(), ToolError> {
        write_lines(path, self.images.values())
    }

    pub fn get(&self, id: &str) -> Result<&ImageRef, ToolError> {
        self.images
            .get(id)
            .ok_or_else(|| ToolError::UnknownImage(id.to_string()))
    }

    /// Images in id order.
    pub fn images(&self) -> impl Iterator<Item = &ImageRef> {
        self.images.values()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexRecord {
    pub image_id: String,
    pub phrase: String,
    pub masks: Vec<MaskRecord>,
}

/// Deterministic stand-in for an open-vocabulary segmenter.
#[derive(Debug, Clone)]
pub struct OracleIndex {
    manifest: Manifest,
    entries: HashMap<(String, String), MaskSet>,
    normalizer_version: &'static str,
}

impl OracleIndex {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            manifest,
            entries: HashMap::new(),
            normalizer_version: NORMALIZER_VERSION,
        }
    }

    /// Loads the segmentation index; every mask must match its image's size.
    pub fn load(manifest: Manifest, path: &Path) -> Result<Self, ToolError> {
        let mut idx = Self::new(manifest);
        let mut pending = Vec::new();
        for_each_record(path, |_, rec: IndexRecord| {
            pending.push(rec);
            Ok(())
        })?;
        for (i, rec) in pending.into_iter().enumerate() {
            idx.insert_record(&rec).map_err(|message| ToolError::Schema {
                path: path.display().to_string(),
                line: i + 1,
                message,
            })?;
        }
        Ok(idx)
    }

    /// Adds (or replaces) the instance list for an (image, phrase) key.
    pub fn insert_record(&mut self, rec: &IndexRecord) -> Result<(), String> {
        let img = self
            .manifest
            .get(&rec.image_id)
            .map_err(|e| e.to_string())?
            .clone();
        let mut masks = Vec::with_capacity(rec.masks.len());
        for m in &rec.masks {
            if m.w != img.width || m.h != img.height {
                return Err(format!(
                    "mask is {}x{} but image {:?} is {}x{}",
                    m.w, m.h, img.id, img.width, img.height
                ));
            }
            masks.push(m.decode().map_err(|e| e.to_string())?);
        }
        self.insert(&img, &rec.phrase, masks)
            .map_err(|e| e.to_string())
    }

    pub fn insert(&mut self, image: &ImageRef, phrase: &str, masks: Vec<Mask>) -> Result<(), ToolError> {
        let set = MaskSet::new(image.width, image.height, masks).map_err(|e| ToolError::Schema {
            path: "<memory>".into(),
            line: 0,
            message: e.to_string(),
        })?;
        self.entries
            .insert((image.id.clone(), normalize_phrase(phrase)), set);
        Ok(())
    }

    /// Drops an (image, phrase) entry, returning whether it existed.
    pub fn remove(&mut self, image_id: &str, phrase: &str) -> bool {
        self.entries
            .remove(&(image_id.to_string(), normalize_phrase(phrase)))
            .is_some()
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn normalizer_version(&self) -> &str {
        self.normalizer_version
    }

    /// Distinct normalized phrases present anywhere in the index, sorted.
    pub fn phrases(&self) -> Vec<String> {
        let mut v: Vec<String> = self.entries.keys().map(|(_, p)| p.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Index records in (image, phrase) order.
    pub fn records(&self) -> Vec<IndexRecord> {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| IndexRecord {
                image_id: k.0.clone(),
                phrase: k.1.clone(),
                masks: self.entries[k].iter().map(MaskRecord::from).collect(),
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), ToolError> {
        write_lines(path, self.records().iter())
    }
}

impl SegmenterProvider for OracleIndex {
    fn segment(&self, image: &ImageRef, phrase: &str) -> Result<MaskSet, ToolError> {
        let known = self.manifest.get(&image.id)?;
        let key = (known.id.clone(), normalize_phrase(phrase));
        Ok(self
            .entries
            .get(&key)
            .cloned()
            .unwrap_or_else(|| MaskSet::empty(known.width, known.height)))
    }
}

pub(crate) fn for_each_record<T, F>(path: &Path, mut f: F) -> Result<(), ToolError>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<(), String>,
{
    let file = File::open(path).map_err(|source| ToolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ToolError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| ToolError::Schema {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let rec: T = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        f(i + 1, rec).map_err(schema)?;
    }
    Ok(())
}

pub(crate) fn write_lines<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl Iterator<Item = &'a T>,
) -> Result<(), ToolError> {
    let io = |source| ToolError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::exists_set;

    fn oracle() -> (OracleIndex, ImageRef) {
        let img = ImageRef::new("img-1", 4, 4).unwrap();
        let mut idx = OracleIndex::new(Manifest::new([img.clone()]));
        let m = Mask::from_pixels(4, 4, &[(1, 1), (2, 1)]).unwrap();
        idx.insert(&img, "Building", vec![m]).unwrap();
        (idx, img)
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_phrase(" Cargo  Ship "), "cargo ship");
        assert_eq!(normalize_phrase("building"), "building");
        assert_eq!(normalize_phrase(""), "");
        assert_eq!(normalize_phrase("\tA\n b "), "a b");
    }

    #[test]
    fn segment_known_unknown_and_normalized() {
        let (idx, img) = oracle();
        let hit = idx.segment(&img, "building").unwrap();
        assert!(exists_set(&hit));
        let miss = idx.segment(&img, "zzz-unknown").unwrap();
        assert!(miss.is_empty());
        assert_eq!((miss.width(), miss.height()), (4, 4));
        assert_eq!(idx.segment(&img, "Building ").unwrap(), hit);
    }

    #[test]
    fn unknown_image_is_an_error() {
        let (idx, _) = oracle();
        let other = ImageRef::new("nope", 4, 4).unwrap();
        assert!(matches!(
            idx.segment(&other, "building"),
            Err(ToolError::UnknownImage(_))
        ));
    }

    #[test]
    fn load_rejects_wrong_mask_size_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let man = dir.path().join("m.jsonl");
        let ix = dir.path().join("i.jsonl");
        std::fs::write(&man, "{\"image_id\":\"a\",\"w\":2,\"h\":2}\n").unwrap();
        std::fs::write(
            &ix,
            "{\"image_id\":\"a\",\"phrase\":\"x\",\"masks\":[{\"w\":2,\"h\":2,\"rle\":[4]}]}\n\
             {\"image_id\":\"a\",\"phrase\":\"y\",\"masks\":[{\"w\":3,\"h\":2,\"rle\":[6]}]}\n",
        )
        .unwrap();
        let manifest = Manifest::load(&man).unwrap();
        match OracleIndex::load(manifest, &ix) {
            Err(ToolError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let (idx, img) = oracle();
        let dir = tempfile::tempdir().unwrap();
        let man = dir.path().join("m.jsonl");
        let ix = dir.path().join("i.jsonl");
        idx.manifest().save(&man).unwrap();
        idx.save(&ix).unwrap();
        let back = OracleIndex::load(Manifest::load(&man).unwrap(), &ix).unwrap();
        assert_eq!(
            back.segment(&img, "building").unwrap(),
            idx.segment(&img, "building").unwrap()
        );
        assert_eq!(back.phrases(), vec!["building".to_string()]);
    }
}
