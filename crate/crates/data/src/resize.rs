//! Floating-point images and resampling.
//!
//! Output pixel centres map to source coordinates by
//! `src = (dst + 0.5) * (in / out) - 0.5`; taps outside the image are
//! clamped to the border. No antialiasing prefilter is applied on
//! downscaling. Interpolation is written as `p + sum w_i (p_i - p)` so a
//! constant image resamples to exactly the same constant.

/// Height x width x channel image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height * channels, "plane buffer size");
        Plane { width, height, channels, data }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Plane::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> Plane {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let xs: Vec<_> = (0..width).map(|x| linear_taps(x, self.width, width)).collect();
        let ys: Vec<_> = (0..height).map(|y| linear_taps(y, self.height, height)).collect();
        let mut out = Vec::with_capacity(width * height * self.channels);
        for &(y0, y1, ty) in &ys {
            for &(x0, x1, tx) in &xs {
                for c in 0..self.channels {
                    let top = lerp(self.at(x0, y0, c), self.at(x1, y0, c), tx);
                    let bottom = lerp(self.at(x0, y1, c), self.at(x1, y1, c), tx);
                    out.push(lerp(top, bottom, ty));
                }
            }
        }
        Plane::new(width, height, self.channels, out)
    }

    /// Catmull-Rom bicubic (`a = -0.5`), applied separably.
    pub fn resize_bicubic(&self, width: usize, height: usize) -> Plane {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let ch = self.channels;
        let xs: Vec<_> = (0..width).map(|x| cubic_taps(x, self.width, width)).collect();
        let mut horiz = Vec::with_capacity(width * self.height * ch);
        for y in 0..self.height {
            for (idx, w) in &xs {
                for c in 0..ch {
                    horiz.push(combine(idx, w, |i| self.at(i, y, c)));
                }
            }
        }
        let mid = Plane::new(width, self.height, ch, horiz);
        let ys: Vec<_> = (0..height).map(|y| cubic_taps(y, self.height, height)).collect();
        let mut out = Vec::with_capacity(width * height * ch);
        for (idx, w) in &ys {
            for x in 0..width {
                for c in 0..ch {
                    out.push(combine(idx, w, |i| mid.at(x, i, c)));
                }
            }
        }
        Plane::new(width, height, ch, out)
    }

    pub fn clamp(mut self, lo: f64, hi: f64) -> Plane {
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
        self
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> f64 {
    (dst as f64 + 0.5) * (src_len as f64 / dst_len as f64) - 0.5
}

fn linear_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = source_coord(dst, src_len, dst_len).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

fn catmull_rom(d: f64) -> f64 {
    const A: f64 = -0.5;
    let d = d.abs();
    if d <= 1.0 {
        (A + 2.0) * d * d * d - (A + 3.0) * d * d + 1.0
    } else if d < 2.0 {
        A * d * d * d - 5.0 * A * d * d + 8.0 * A * d - 4.0 * A
    } else {
        0.0
    }
}

/// Four clamped tap indices and their weights; index 1 is the anchor tap.
fn cubic_taps(dst: usize, src_len: usize, dst_len: usize) -> ([usize; 4], [f64; 4]) {
    let s = source_coord(dst, src_len, dst_len);
    let base = s.floor();
    let t = s - base;
    let clamp = |i: f64| i.clamp(0.0, (src_len - 1) as f64) as usize;
    let idx = [clamp(base - 1.0), clamp(base), clamp(base + 1.0), clamp(base + 2.0)];
    let w = [catmull_rom(1.0 + t), catmull_rom(t), catmull_rom(1.0 - t), catmull_rom(2.0 - t)];
    (idx, w)
}

fn combine(idx: &[usize; 4], w: &[f64; 4], get: impl Fn(usize) -> f64) -> f64 {
    let anchor = get(idx[1]);
    let mut acc = anchor;
    for k in 0..4 {
        if k != 1 {
            acc += w[k] * (get(idx[k]) - anchor);
        }
    }
    acc
}
