//! On-disk model format: a line-oriented manifest plus a raw weights file of
//! little-endian `f64` values.
//!
//! ```text
//! PRIVNET-MODEL v1
//! layout hwc
//! codec 13 20
//! input image 150 125 1
//! layer conv2d filters=8 kernel=5x5 stride=2 weight=conv1.weight bias=conv1.bias
//! layer relu
//! layer maxpool2d window=2x2
//! layer flatten
//! layer dense units=2 weight=out.weight bias=out.bias
//! weights model.weights
//! tensor conv1.weight 5,5,1,8 offset=0
//! tensor conv1.bias 8 offset=200
//! end
//! ```
//!
//! Offsets count `f64` values. Tensors are row-major in the shapes given.
//! A manifest without a `weights` line describes an architecture only.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use privnet_core::FixedPointCodec;

use crate::error::{NnError, Result};
use crate::graph::{Architecture, Layer, ModelGraph, Shape, Tensor};

pub const MODEL_HEADER: &str = "PRIVNET-MODEL v1";

fn fmt_pair((a, b): (usize, usize)) -> String {
    format!("{a}x{b}")
}

fn layer_line(layer: &Layer) -> String {
    match layer {
        Layer::Conv2d { filters, kernel, stride, weight, bias } => format!(
            "layer conv2d filters={filters} kernel={} stride={stride} weight={weight} bias={bias}",
            fmt_pair(*kernel)
        ),
        Layer::Dense { units, weight, bias } => {
            format!("layer dense units={units} weight={weight} bias={bias}")
        }
        Layer::Relu => "layer relu".into(),
        Layer::MaxPool2d { window } => format!("layer maxpool2d window={}", fmt_pair(*window)),
        Layer::AvgPool2d { window } => format!("layer avgpool2d window={}", fmt_pair(*window)),
        Layer::Flatten => "layer flatten".into(),
    }
}

/// Renders the manifest text. `weights` names the weights file, if any.
pub fn manifest_text(arch: &Architecture, weights: Option<&str>) -> Result<String> {
    let mut s = format!("{MODEL_HEADER}\nlayout hwc\n");
    s += &format!("codec {} {}\n", arch.codec.fraction_bits(), arch.codec.magnitude_bits());
    s += &match arch.input {
        Shape::Image { h, w, c } => format!("input image {h} {w} {c}\n"),
        Shape::Flat(n) => format!("input flat {n}\n"),
    };
    for layer in &arch.layers {
        s += &layer_line(layer);
        s.push('\n');
    }
    if let Some(file) = weights {
        s += &format!("weights {file}\n");
        let mut offset = 0;
        for (name, shape) in arch.tensor_specs()? {
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            s += &format!("tensor {name} {} offset={offset}\n", dims.join(","));
            offset += shape.iter().product::<usize>();
        }
    }
    s += "end\n";
    Ok(s)
}

/// Writes `<path>` (manifest) and a sibling `.weights` file.
pub fn save_model(model: &ModelGraph, path: &Path) -> Result<()> {
    model.validate()?;
    let weights_path = path.with_extension("weights");
    let file_name = weights_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| NnError::Format { line: 0, message: format!("bad path {}", path.display()) })?
        .to_string();
    let mut blob = Vec::with_capacity(model.num_parameters() * 8);
    for (name, _) in model.arch.tensor_specs()? {
        for v in &model.tensor(&name)?.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, manifest_text(&model.arch, Some(&file_name))?)?;
    let mut f = fs::File::create(weights_path)?;
    f.write_all(&blob)?;
    Ok(())
}

pub fn save_architecture(arch: &Architecture, path: &Path) -> Result<()> {
    arch.shape_trace()?;
    fs::write(path, manifest_text(arch, None)?)?;
    Ok(())
}

#[derive(Debug)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    line: usize,
}

#[derive(Debug)]
struct Manifest {
    arch: Architecture,
    weights: Option<PathBuf>,
    tensors: Vec<TensorEntry>,
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize> {
    s.parse().map_err(|_| NnError::Format { line, message: format!("invalid {what} {s:?}") })
}

fn parse_pair(s: &str, line: usize, what: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| NnError::Format { line, message: format!("{what} must look like 3x3, got {s:?}") })?;
    Ok((parse_usize(a, line, what)?, parse_usize(b, line, what)?))
}

fn parse_layer(words: &[&str], line: usize) -> Result<Layer> {
    let kind = *words.first().ok_or_else(|| NnError::Format { line, message: "layer without a kind".into() })?;
    let mut kv = BTreeMap::new();
    for w in &words[1..] {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| NnError::Format { line, message: format!("expected key=value, got {w:?}") })?;
        kv.insert(k, v);
    }
    let mut take =
        |key: &str| kv.remove(key).ok_or_else(|| NnError::Format { line, message: format!("{kind} needs {key}=") });
    let layer = match kind {
        "conv2d" => Layer::Conv2d {
            filters: parse_usize(take("filters")?, line, "filters")?,
            kernel: parse_pair(take("kernel")?, line, "kernel")?,
            stride: parse_usize(take("stride")?, line, "stride")?,
            weight: take("weight")?.to_string(),
            bias: take("bias")?.to_string(),
        },
        "dense" => Layer::Dense {
            units: parse_usize(take("units")?, line, "units")?,
            weight: take("weight")?.to_string(),
            bias: take("bias")?.to_string(),
        },
        "relu" => Layer::Relu,
        "maxpool2d" => Layer::MaxPool2d { window: parse_pair(take("window")?, line, "window")? },
        "avgpool2d" => Layer::AvgPool2d { window: parse_pair(take("window")?, line, "window")? },
        "flatten" => Layer::Flatten,
        other => return Err(NnError::Format { line, message: format!("unknown layer kind {other:?}") }),
    };
    if let Some(k) = kv.keys().next() {
        return Err(NnError::Format { line, message: format!("unexpected key {k:?} for {kind}") });
    }
    Ok(layer)
}

fn parse_manifest(text: &str, dir: &Path) -> Result<Manifest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == MODEL_HEADER => {}
        _ => return Err(NnError::Format { line: 1, message: format!("missing {MODEL_HEADER:?} header") }),
    }
    let mut codec = None;
    let mut input = None;
    let mut layers = Vec::new();
    let mut weights = None;
    let mut tensors = Vec::new();
    let mut ended = false;
    for (line, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if ended {
            return Err(NnError::Format { line, message: "content after end".into() });
        }
        let words: Vec<&str> = l.split_whitespace().collect();
        let bad = |m: &str| NnError::Format { line, message: m.to_string() };
        match words[0] {
            "layout" => {
                if words.get(1) != Some(&"hwc") || words.len() != 2 {
                    return Err(bad("only layout hwc is supported"));
                }
            }
            "codec" => {
                if words.len() != 3 {
                    return Err(bad("codec needs fraction and magnitude bits"));
                }
                let f = parse_usize(words[1], line, "fraction bits")? as u32;
                let k = parse_usize(words[2], line, "magnitude bits")? as u32;
                codec = Some(FixedPointCodec::new(f, k).map_err(|e| bad(&e.to_string()))?);
            }
            "input" => {
                input = Some(match (words.get(1), words.len()) {
                    (Some(&"image"), 5) => Shape::Image {
                        h: parse_usize(words[2], line, "height")?,
                        w: parse_usize(words[3], line, "width")?,
                        c: parse_usize(words[4], line, "channels")?,
                    },
                    (Some(&"flat"), 3) => Shape::Flat(parse_usize(words[2], line, "length")?),
                    _ => return Err(bad("input must be `image H W C` or `flat N`")),
                });
            }
            "layer" => layers.push(parse_layer(&words[1..], line)?),
            "weights" => {
                if words.len() != 2 {
                    return Err(bad("weights needs one file name"));
                }
                weights = Some(dir.join(words[1]));
            }
            "tensor" => {
                if words.len() != 4 {
                    return Err(bad("tensor needs name, shape and offset"));
                }
                let shape =
                    words[2].split(',').map(|d| parse_usize(d, line, "dimension")).collect::<Result<Vec<_>>>()?;
                let offset = words[3].strip_prefix("offset=").ok_or_else(|| bad("tensor offset must be offset=N"))?;
                tensors.push(TensorEntry {
                    name: words[1].to_string(),
                    shape,
                    offset: parse_usize(offset, line, "offset")?,
                    line,
                });
            }
            "end" => ended = true,
            other => return Err(bad(&format!("unknown directive {other:?}"))),
        }
    }
    if !ended {
        return Err(NnError::Format { line: text.lines().count(), message: "missing end".into() });
    }
    let arch = Architecture {
        input: input.ok_or(NnError::Format { line: 0, message: "missing input line".into() })?,
        layers,
        codec: codec.ok_or(NnError::Format { line: 0, message: "missing codec line".into() })?,
    };
    arch.shape_trace()?;
    Ok(Manifest { arch, weights, tensors })
}

fn manifest_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// Reads only the architecture of a manifest, ignoring any weights.
pub fn load_architecture(path: &Path) -> Result<Architecture> {
    Ok(parse_manifest(&fs::read_to_string(path)?, manifest_dir(path))?.arch)
}

pub fn load_model(path: &Path) -> Result<ModelGraph> {
    let m = parse_manifest(&fs::read_to_string(path)?, manifest_dir(path))?;
    let weights_path = m.weights.ok_or(NnError::Format { line: 0, message: "manifest has no weights file".into() })?;
    let blob = fs::read(&weights_path)?;
    if blob.len() % 8 != 0 {
        return Err(NnError::Format {
            line: 0,
            message: format!("{} is not a whole number of f64 values", weights_path.display()),
        });
    }
    let values: Vec<f64> = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut weights = BTreeMap::new();
    for t in m.tensors {
        let len: usize = t.shape.iter().product();
        let data = values.get(t.offset..t.offset + len).ok_or_else(|| NnError::Format {
            line: t.line,
            message: format!("tensor {} runs past the end of the weights file", t.name),
        })?;
        if weights.insert(t.name.clone(), Tensor::new(t.shape, data.to_vec())?).is_some() {
            return Err(NnError::Format { line: t.line, message: format!("duplicate tensor {}", t.name) });
        }
    }
    let model = ModelGraph { arch: m.arch, weights };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PoolKind;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let arch = Architecture::reference(PoolKind::Average, Shape::Image { h: 30, w: 28, c: 1 });
        let model = ModelGraph::init(arch, 3).unwrap();
        let path = dir.path().join("m.model");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
        assert_eq!(load_architecture(&path).unwrap(), model.arch);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{MODEL_HEADER}\ncodec 13 20\ninput flat 4\nlayer dense units=2 weight=w\nend\n");
        match parse_manifest(&text, Path::new(".")) {
            Err(NnError::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = format!("{MODEL_HEADER}\ncodec 13 20\ninput flat 4\nlayer softmax\nend\n");
        assert!(matches!(parse_manifest(&text, Path::new(".")), Err(NnError::Format { line: 4, .. })));
    }
}
