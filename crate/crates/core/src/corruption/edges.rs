//! 8-bit edge and distance machinery used by the liquid spatter kernel.

use super::filters::{resolve, Boundary};

/// Row-major 8-bit buffer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Gray8 {
    fn at(&self, x: isize, y: isize) -> i32 {
        let xx = resolve(x, self.width, Boundary::Reflect101);
        let yy = resolve(y, self.height, Boundary::Reflect101);
        i32::from(self.data[yy * self.width + xx])
    }
}

/// Canny detector with 3x3 Sobel, L1 gradient magnitude and hysteresis.
/// Edge pixels are 255, everything else 0.
pub(crate) fn canny(src: &Gray8, low: i32, high: i32) -> Gray8 {
    let (w, h) = (src.width, src.height);
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    let mut mag = vec![0i32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| src.at(x + dx, y + dy);
            let dx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            let dy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.abs() + dy.abs();
        }
    }

    // Non-maximum suppression across the quantized gradient direction.
    const TAN22: f64 = 0.414_213_562_373_095;
    let m = |x: isize, y: isize| -> i32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let a = mag[i];
            if a <= low {
                continue;
            }
            let (ax, ay) = (f64::from(gx[i].abs()), f64::from(gy[i].abs()));
            let local_max = if ay <= ax * TAN22 {
                a > m(x - 1, y) && a >= m(x + 1, y)
            } else if ay >= ax / TAN22 {
                a > m(x, y - 1) && a >= m(x, y + 1)
            } else if (gx[i] < 0) != (gy[i] < 0) {
                a > m(x - 1, y + 1) && a > m(x + 1, y - 1)
            } else {
                a > m(x - 1, y - 1) && a > m(x + 1, y + 1)
            };
            if local_max {
                class[i] = if a > high { 2 } else { 1 };
            }
        }
    }

    // Hysteresis: grow strong edges through 8-connected weak pixels.
    let mut out = vec![0u8; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| class[i] == 2).collect();
    for &i in &stack {
        out[i] = 255;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && out[j] == 0 {
                    out[j] = 255;
                    stack.push(j);
                }
            }
        }
    }
    Gray8 {
        width: w,
        height: h,
        data: out,
    }
}

/// Exact Euclidean distance from each nonzero pixel to the nearest zero pixel
/// (separable lower-envelope transform). Zero pixels get 0; with no zero pixel
/// at all, every distance is `f64::INFINITY`.
pub(crate) fn distance_transform(src: &Gray8) -> Vec<f64> {
    let (w, h) = (src.width, src.height);
    let mut f: Vec<f64> = src
        .data
        .iter()
        .map(|&v| if v == 0 { 0.0 } else { f64::INFINITY })
        .collect();
    if f.iter().all(|v| v.is_infinite()) {
        return f;
    }
    let mut col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = f[y * w + x];
        }
        let d = edt_1d(&col);
        for y in 0..h {
            f[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        let d = edt_1d(&f[y * w..(y + 1) * w]);
        f[y * w..(y + 1) * w].copy_from_slice(&d);
    }
    f.into_iter().map(f64::sqrt).collect()
}

/// Squared 1-D distance transform of a sampled function.
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::INFINITY; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        return d;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if k > 0 && s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, slot) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *slot = diff * diff + f[p];
    }
    d
}

/// Histogram equalization with the cumulative-count lookup table.
pub(crate) fn equalize_hist(src: &Gray8) -> Gray8 {
    let mut hist = [0usize; 256];
    for &v in &src.data {
        hist[v as usize] += 1;
    }
    let total = src.data.len();
    let first = hist.iter().position(|&c| c > 0).unwrap_or(0);
    let mut lut = [0u8; 256];
    if hist[first] == total {
        lut.iter_mut().for_each(|l| *l = first as u8);
    } else {
        let scale = 255.0 / (total - hist[first]) as f64;
        let mut sum = 0usize;
        for i in first + 1..256 {
            sum += hist[i];
            lut[i] = (sum as f64 * scale).round().clamp(0.0, 255.0) as u8;
        }
    }
    Gray8 {
        width: src.width,
        height: src.height,
        data: src.data.iter().map(|&v| lut[v as usize]).collect(),
    }
}
