//! Preprocessed tensor cache: `<prefix>.bin` holds little-endian `f64`
//! values for every record back to back, `<prefix>.shape` is a text
//! sidecar:
//!
//! ```text
//! PRIVNET-TENSORS v1
//! layout hwc
//! shape 150 125 1
//! count 2
//! record 0 train data/train/IM-0001-NORMAL.png
//! record 1 test data/test/person3_virus_1.png
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{DataError, Result};
use crate::manifest::{Record, Split};

pub const CACHE_HEADER: &str = "PRIVNET-TENSORS v1";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCache {
    /// `(height, width, channels)` of every tensor.
    pub shape: (usize, usize, usize),
    pub records: Vec<Record>,
    pub data: Vec<f64>,
}

impl TensorCache {
    pub fn new(shape: (usize, usize, usize)) -> Self {
        TensorCache { shape, records: Vec::new(), data: Vec::new() }
    }

    pub fn tensor_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: Record, tensor: &[f64]) -> Result<()> {
        if tensor.len() != self.tensor_len() {
            return Err(DataError::Invalid(format!(
                "tensor of {} values does not match shape {:?}",
                tensor.len(),
                self.shape
            )));
        }
        self.records.push(record);
        self.data.extend_from_slice(tensor);
        Ok(())
    }

    pub fn tensor(&self, i: usize) -> &[f64] {
        let n = self.tensor_len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Strips a `.bin`, `.shape` or `.manifest` extension so any of the three
/// files can name the cache.
pub fn cache_prefix(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin" | "shape" | "manifest") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_tensor_cache(prefix: &Path, cache: &TensorCache) -> Result<()> {
    let prefix = cache_prefix(prefix);
    let (h, w, c) = cache.shape;
    let mut text = format!("{CACHE_HEADER}\nlayout hwc\nshape {h} {w} {c}\ncount {}\n", cache.len());
    for r in &cache.records {
        let p = r
            .path
            .to_str()
            .filter(|p| !p.contains('\n'))
            .ok_or_else(|| DataError::Invalid(format!("path {:?} cannot be written", r.path)))?;
        text += &format!("record {} {} {p}\n", r.label, r.split);
    }
    let mut blob = Vec::with_capacity(cache.data.len() * 8);
    for v in &cache.data {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(with_suffix(&prefix, ".bin"), blob)?;
    fs::write(with_suffix(&prefix, ".shape"), text)?;
    Ok(())
}

pub fn read_tensor_cache(prefix: &Path) -> Result<TensorCache> {
    let prefix = cache_prefix(prefix);
    let shape_path = with_suffix(&prefix, ".shape");
    let text = fs::read_to_string(&shape_path)?;
    let bad = |line: usize, message: String| DataError::Format { path: shape_path.clone(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    if lines.next().map(|(_, l)| l) != Some(CACHE_HEADER) {
        return Err(bad(1, format!("missing {CACHE_HEADER:?} header")));
    }
    let mut shape = None;
    let mut count = None;
    let mut records = Vec::new();
    for (n, line) in lines {
        let mut words = line.splitn(4, ' ');
        match words.next() {
            Some("layout") if words.next() == Some("hwc") => {}
            Some("shape") => {
                let dims: Vec<usize> = words
                    .flat_map(|w| w.split(' '))
                    .map(|d| d.parse().map_err(|_| bad(n, format!("bad dimension {d:?}"))))
                    .collect::<Result<_>>()?;
                match dims[..] {
                    [h, w, c] if h * w * c > 0 => shape = Some((h, w, c)),
                    _ => return Err(bad(n, "shape needs three positive dimensions".into())),
                }
            }
            Some("count") => {
                count =
                    Some(words.next().and_then(|c| c.parse::<usize>().ok()).ok_or_else(|| bad(n, "bad count".into()))?);
            }
            Some("record") => {
                let (label, split, path) = match (words.next(), words.next(), words.next()) {
                    (Some(l), Some(s), Some(p)) => (l, s, p),
                    _ => return Err(bad(n, "record needs label, split and path".into())),
                };
                let label = match label {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(bad(n, format!("label {other:?} is not 0 or 1"))),
                };
                let split: Split = split.parse().map_err(|e: DataError| bad(n, e.to_string()))?;
                records.push(Record { path: path.into(), label, split });
            }
            Some("") => {}
            _ => return Err(bad(n, format!("unexpected line {line:?}"))),
        }
    }
    let shape = shape.ok_or_else(|| bad(0, "missing shape".into()))?;
    let count = count.ok_or_else(|| bad(0, "missing count".into()))?;
    if count != records.len() {
        return Err(bad(0, format!("count {count} but {} records", records.len())));
    }
    let bin_path = with_suffix(&prefix, ".bin");
    let blob = fs::read(&bin_path)?;
    let expect = count * shape.0 * shape.1 * shape.2 * 8;
    if blob.len() != expect {
        return Err(DataError::Format {
            path: bin_path,
            line: 0,
            message: format!("{} bytes, expected {expect}", blob.len()),
        });
    }
    let data = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(TensorCache { shape, records, data })
}
