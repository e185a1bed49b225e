//! Plaintext layer kernels and their gradients, plus the index gathering
//! shared with the secure forward pass.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageDims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ConvGeometry {
    pub input: ImageDims,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub filters: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.input.h - self.kernel.0) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.input.w - self.kernel.1) / self.stride + 1
    }

    /// Length of one unrolled receptive field, `kh * kw * c`.
    pub fn patch_len(&self) -> usize {
        self.kernel.0 * self.kernel.1 * self.input.c
    }
}

/// Unrolls receptive fields into an `(out_h * out_w) x patch_len` matrix,
/// columns ordered `(ky, kx, channel)` to match the weight layout.
pub fn im2col<T: Copy>(x: &[T], g: &ConvGeometry) -> Vec<T> {
    let ImageDims { w, c, .. } = g.input;
    let (kh, kw) = g.kernel;
    let mut out = Vec::with_capacity(g.out_h() * g.out_w() * g.patch_len());
    for oy in 0..g.out_h() {
        for ox in 0..g.out_w() {
            for ky in 0..kh {
                let row = (oy * g.stride + ky) * w;
                for kx in 0..kw {
                    let at = (row + ox * g.stride + kx) * c;
                    out.extend_from_slice(&x[at..at + c]);
                }
            }
        }
    }
    out
}

/// Gathers pooling windows so that each output element's `ph * pw` inputs
/// are contiguous, outputs in height, width, channel order.
pub fn pool_windows<T: Copy>(x: &[T], dims: ImageDims, (ph, pw): (usize, usize)) -> Vec<T> {
    let (oh, ow) = (dims.h / ph, dims.w / pw);
    let mut out = Vec::with_capacity(oh * ow * dims.c * ph * pw);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..dims.c {
                for dy in 0..ph {
                    for dx in 0..pw {
                        out.push(x[((oy * ph + dy) * dims.w + ox * pw + dx) * dims.c + ch]);
                    }
                }
            }
        }
    }
    out
}

/// Input index of the `k`-th element of window `o` as laid out by
/// [`pool_windows`].
fn pool_source(dims: ImageDims, (ph, pw): (usize, usize), o: usize, k: usize) -> usize {
    let ow = dims.w / pw;
    let ch = o % dims.c;
    let ox = (o / dims.c) % ow;
    let oy = o / (dims.c * ow);
    let (dy, dx) = (k / pw, k % pw);
    ((oy * ph + dy) * dims.w + ox * pw + dx) * dims.c + ch
}

pub fn conv2d_forward(x: &[f64], g: &ConvGeometry, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let ImageDims { w, c, .. } = g.input;
    let (kh, kw) = g.kernel;
    let f = g.filters;
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut y = vec![0.0; oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            let out = &mut y[(oy * ow + ox) * f..][..f];
            out.copy_from_slice(bias);
            for ky in 0..kh {
                for kx in 0..kw {
                    let xin = &x[((oy * g.stride + ky) * w + ox * g.stride + kx) * c..][..c];
                    for (ci, &v) in xin.iter().enumerate() {
                        let wrow = &weight[((ky * kw + kx) * c + ci) * f..][..f];
                        for (o, &wv) in out.iter_mut().zip(wrow) {
                            *o += v * wv;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients into `dw`, `db` and returns the
/// input gradient (skipped when `need_dx` is false).
pub fn conv2d_backward(
    x: &[f64],
    g: &ConvGeometry,
    weight: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Vec<f64> {
    let ImageDims { w, c, .. } = g.input;
    let (kh, kw) = g.kernel;
    let f = g.filters;
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
    for oy in 0..oh {
        for ox in 0..ow {
            let go = &dy[(oy * ow + ox) * f..][..f];
            for (b, &d) in db.iter_mut().zip(go) {
                *b += d;
            }
            for ky in 0..kh {
                for kx in 0..kw {
                    let at = ((oy * g.stride + ky) * w + ox * g.stride + kx) * c;
                    for ci in 0..c {
                        let v = x[at + ci];
                        let base = ((ky * kw + kx) * c + ci) * f;
                        let dwrow = &mut dw[base..base + f];
                        for (dwv, &d) in dwrow.iter_mut().zip(go) {
                            *dwv += v * d;
                        }
                        if need_dx {
                            let wrow = &weight[base..base + f];
                            dx[at + ci] += wrow.iter().zip(go).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
            }
        }
    }
    dx
}

pub fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let units = bias.len();
    let mut y = bias.to_vec();
    for (i, &v) in x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (o, &wv) in y.iter_mut().zip(&weight[i * units..(i + 1) * units]) {
            *o += v * wv;
        }
    }
    y
}

pub fn dense_backward(
    x: &[f64],
    weight: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Vec<f64> {
    let units = dy.len();
    for (b, &d) in db.iter_mut().zip(dy) {
        *b += d;
    }
    let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
    for (i, &v) in x.iter().enumerate() {
        let row = i * units..(i + 1) * units;
        for (dwv, &d) in dw[row.clone()].iter_mut().zip(dy) {
            *dwv += v * d;
        }
        if need_dx {
            dx[i] = weight[row].iter().zip(dy).map(|(a, b)| a * b).sum();
        }
    }
    dx
}

pub fn relu_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

pub fn relu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter().zip(dy).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect()
}

pub fn maxpool_forward(x: &[f64], dims: ImageDims, window: (usize, usize)) -> Vec<f64> {
    pool_windows(x, dims, window)
        .chunks_exact(window.0 * window.1)
        .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Routes each output gradient to the first maximal input of its window.
pub fn maxpool_backward(x: &[f64], dims: ImageDims, window: (usize, usize), dy: &[f64]) -> Vec<f64> {
    let size = window.0 * window.1;
    let mut dx = vec![0.0; x.len()];
    for (o, win) in pool_windows(x, dims, window).chunks_exact(size).enumerate() {
        let mut best = 0;
        for k in 1..size {
            if win[k] > win[best] {
                best = k;
            }
        }
        dx[pool_source(dims, window, o, best)] += dy[o];
    }
    dx
}

pub fn avgpool_forward(x: &[f64], dims: ImageDims, window: (usize, usize)) -> Vec<f64> {
    let size = window.0 * window.1;
    pool_windows(x, dims, window).chunks_exact(size).map(|w| w.iter().sum::<f64>() / size as f64).collect()
}

pub fn avgpool_backward(x_len: usize, dims: ImageDims, window: (usize, usize), dy: &[f64]) -> Vec<f64> {
    let size = window.0 * window.1;
    let mut dx = vec![0.0; x_len];
    for (o, &d) in dy.iter().enumerate() {
        for k in 0..size {
            dx[pool_source(dims, window, o, k)] += d / size as f64;
        }
    }
    dx
}

/// Numerically stable softmax cross-entropy. Returns the loss and the
/// gradient with respect to the scores.
pub fn softmax_cross_entropy(scores: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = m + z.ln() - scores[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    (loss, grad)
}
