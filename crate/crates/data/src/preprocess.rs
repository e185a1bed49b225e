//! The two preprocessing recipes.
//!
//! `v1`: grayscale, bilinear resize to 125 wide by 150 high, divide by 255.
//! `v2`: RGB, bicubic resize to 224 x 224, raw 0..255 values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::DynamicImage;

use crate::error::{DataError, Result};
use crate::labels::label_from_filename;
use crate::resize::Plane;

pub const V1_SIZE: (usize, usize) = (125, 150);
pub const V2_SIZE: (usize, usize) = (224, 224);
pub const MIN_DIM: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    V1,
    V2,
}

impl FromStr for Method {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(Method::V1),
            "v2" => Ok(Method::V2),
            other => Err(DataError::Invalid(format!("unknown method {other:?}, expected v1 or v2"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::V1 => "v1",
            Method::V2 => "v2",
        })
    }
}

/// How the `(125, 150)` pair of the v1 recipe is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AxisOrder {
    /// Width 125, height 150.
    #[default]
    WidthHeight,
    /// Height 125, width 150.
    HeightWidth,
}

impl Method {
    /// Output `(height, width, channels)`.
    pub fn output_shape(self, order: AxisOrder) -> (usize, usize, usize) {
        match (self, order) {
            (Method::V1, AxisOrder::WidthHeight) => (V1_SIZE.1, V1_SIZE.0, 1),
            (Method::V1, AxisOrder::HeightWidth) => (V1_SIZE.0, V1_SIZE.1, 1),
            (Method::V2, _) => (V2_SIZE.1, V2_SIZE.0, 3),
        }
    }
}

pub fn load_image(path: &Path) -> Result<DynamicImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| DataError::Ingest { path: path.into(), message: e.to_string() })?
        .with_guessed_format()
        .map_err(|e| DataError::Ingest { path: path.into(), message: e.to_string() })?
        .decode()
        .map_err(|e| DataError::Ingest { path: path.into(), message: e.to_string() })?;
    if img.width() < MIN_DIM || img.height() < MIN_DIM {
        return Err(DataError::Ingest {
            path: path.into(),
            message: format!("{}x{} is below the {MIN_DIM}x{MIN_DIM} minimum", img.width(), img.height()),
        });
    }
    Ok(img)
}

/// Single-channel plane. Grayscale sources are used as-is; colour sources
/// use luma `(299 R + 587 G + 114 B) / 1000`, which is exact for gray pixels.
pub fn gray_plane(img: &DynamicImage) -> Plane {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if let Some(l) = img.as_luma8() {
        return Plane::new(w, h, 1, l.as_raw().iter().map(|&v| f64::from(v)).collect());
    }
    let rgb = img.to_rgb8();
    let data = rgb
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0.map(f64::from);
            (299.0 * r + 587.0 * g + 114.0 * b) / 1000.0
        })
        .collect();
    Plane::new(w, h, 1, data)
}

pub fn rgb_plane(img: &DynamicImage) -> Plane {
    let rgb = img.to_rgb8();
    Plane::new(rgb.width() as usize, rgb.height() as usize, 3, rgb.as_raw().iter().map(|&v| f64::from(v)).collect())
}

pub fn preprocess_v1(img: &DynamicImage, order: AxisOrder) -> Plane {
    let (h, w, _) = Method::V1.output_shape(order);
    let mut p = gray_plane(img).resize_bilinear(w, h);
    for v in &mut p.data {
        *v = (*v / 255.0).clamp(0.0, 1.0);
    }
    p
}

pub fn preprocess_v2(img: &DynamicImage) -> Plane {
    rgb_plane(img).resize_bicubic(V2_SIZE.0, V2_SIZE.1).clamp(0.0, 255.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub plane: Plane,
    /// Present when the file name carries a class keyword.
    pub label: Option<u8>,
}

pub fn preprocess_path(path: &Path, method: Method, order: AxisOrder) -> Result<Preprocessed> {
    let img = load_image(path)?;
    let plane = match method {
        Method::V1 => preprocess_v1(&img, order),
        Method::V2 => preprocess_v2(&img),
    };
    let label = path.to_str().and_then(|s| label_from_filename(s).ok());
    Ok(Preprocessed { plane, label })
}
