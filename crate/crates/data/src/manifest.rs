//! Dataset manifests: labelled image paths with their split.
//!
//! File format, one record per line: `path,label,split`. The path may itself
//! contain commas; the last two fields are split off from the right.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use walkdir::WalkDir;

use crate::error::{DataError, Result};
use crate::labels::label_from_filename;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(DataError::Invalid(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub path: PathBuf,
    pub label: u8,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<Record>,
    /// Files that were found but could not be labelled, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

impl DatasetManifest {
    /// Per-class counts `(normal, pneumonia)`.
    pub fn counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for r in &self.records {
            c[r.label as usize] += 1;
        }
        c
    }

    pub fn counts_for(&self, split: Split) -> [usize; 2] {
        let mut c = [0; 2];
        for r in self.records.iter().filter(|r| r.split == split) {
            c[r.label as usize] += 1;
        }
        c
    }

    pub fn extend(&mut self, other: DatasetManifest) {
        self.records.extend(other.records);
        self.skipped.extend(other.skipped);
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            let p = r
                .path
                .to_str()
                .filter(|p| !p.contains('\n'))
                .ok_or_else(|| DataError::Invalid(format!("path {:?} cannot be written", r.path)))?;
            s += &format!("{p},{},{}\n", r.label, r.split);
        }
        Ok(s)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| DataError::Format { path: source.into(), line: i + 1, message };
            let mut parts = line.rsplitn(3, ',');
            let (split, label, path) = match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(l), Some(p)) if !p.is_empty() => (s, l, p),
                _ => return Err(bad("expected path,label,split".into())),
            };
            let label: u8 = match label {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(format!("label {other:?} is not 0 or 1"))),
            };
            let split = split.parse().map_err(|e: DataError| bad(e.to_string()))?;
            if !seen.insert(path.to_string()) {
                return Err(bad(format!("duplicate path {path}")));
            }
            records.push(Record { path: path.into(), label, split });
        }
        Ok(DatasetManifest { records, skipped: Vec::new() })
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }
}

/// Recursively scans `dir` in sorted path order, labelling every image file
/// by its name. Unlabelable files go to the skip report.
pub fn build_manifest(dir: &Path, split: Split) -> Result<DatasetManifest> {
    if !dir.is_dir() {
        return Err(DataError::Ingest { path: dir.into(), message: "not a directory".into() });
    }
    let mut m = DatasetManifest::default();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DataError::Ingest { path: dir.into(), message: e.to_string() })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.into_path();
        if !is_image(&path) {
            m.skipped.push((path, "not a png or jpeg file".into()));
            continue;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        match label_from_filename(name) {
            Ok(label) => m.records.push(Record { path, label, split }),
            Err(e) => m.skipped.push((path, e.to_string())),
        }
    }
    Ok(m)
}

/// Scans a `train` / `test` / `val` layout under `root`. `val` is merged
/// into the test split. Without any of these folders, the whole tree is
/// treated as training data.
pub fn build_manifest_tree(root: &Path) -> Result<DatasetManifest> {
    let mut m = DatasetManifest::default();
    let mut found = false;
    for (sub, split) in [("train", Split::Train), ("test", Split::Test), ("val", Split::Test)] {
        let dir = root.join(sub);
        if dir.is_dir() {
            found = true;
            m.extend(build_manifest(&dir, split)?);
        }
    }
    if !found {
        return build_manifest(root, Split::Train);
    }
    Ok(m)
}
