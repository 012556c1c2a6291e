//! Plane-level filtering and resampling primitives.

use crate::image::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Boundary {
    /// `aaa|abcd|ddd`
    Nearest,
    /// Half-sample symmetric, `dcba|abcd|dcba`.
    Reflect,
    /// Whole-sample symmetric, `dcb|abcd|cba`.
    Reflect101,
}

#[inline]
pub(crate) fn resolve(i: isize, n: usize, mode: Boundary) -> usize {
    let n_i = n as isize;
    if (0..n_i).contains(&i) {
        return i as usize;
    }
    match mode {
        Boundary::Nearest => i.clamp(0, n_i - 1) as usize,
        Boundary::Reflect => {
            let period = 2 * n_i;
            let m = i.rem_euclid(period);
            (if m < n_i { m } else { period - 1 - m }) as usize
        }
        Boundary::Reflect101 => {
            if n == 1 {
                return 0;
            }
            let period = 2 * (n_i - 1);
            let m = i.rem_euclid(period);
            (if m < n_i { m } else { period - m }) as usize
        }
    }
}

/// Normalized 1-D Gaussian taps over `[-radius, radius]`.
pub(crate) fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|x| libm::exp(-0.5 * (x * x) as f64 / (sigma * sigma)))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Applies the same 1-D taps along rows then columns.
pub(crate) fn separable(src: &Plane, taps: &[f64], mode: Boundary) -> Plane {
    correlate_cols(&correlate_rows(src, taps, mode), taps, mode)
}

fn correlate_rows(src: &Plane, taps: &[f64], mode: Boundary) -> Plane {
    let r = (taps.len() / 2) as isize;
    let mut out = Plane::new(src.width, src.height, 0.0);
    for y in 0..src.height {
        let row = &src.data[y * src.width..(y + 1) * src.width];
        for x in 0..src.width {
            let mut acc = 0.0;
            for (k, w) in taps.iter().enumerate() {
                acc += w * row[resolve(x as isize + k as isize - r, src.width, mode)];
            }
            out.data[y * src.width + x] = acc;
        }
    }
    out
}

fn correlate_cols(src: &Plane, taps: &[f64], mode: Boundary) -> Plane {
    let r = (taps.len() / 2) as isize;
    let mut out = Plane::new(src.width, src.height, 0.0);
    for y in 0..src.height {
        for (k, w) in taps.iter().enumerate() {
            let sy = resolve(y as isize + k as isize - r, src.height, mode);
            let src_row = &src.data[sy * src.width..(sy + 1) * src.width];
            let dst_row = &mut out.data[y * src.width..(y + 1) * src.width];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    out
}

/// Separable Gaussian filter; radius is `round(truncate * sigma)`.
pub(crate) fn gaussian_filter(src: &Plane, sigma: f64, truncate: f64, mode: Boundary) -> Plane {
    let radius = (truncate * sigma + 0.5) as usize;
    if radius == 0 {
        return src.clone();
    }
    separable(src, &gaussian_taps(sigma, radius), mode)
}

/// Dense 2-D correlation with a centred `k x k` kernel (odd `k`).
pub(crate) fn correlate2d(src: &Plane, kernel: &[f64], k: usize, mode: Boundary) -> Plane {
    debug_assert_eq!(kernel.len(), k * k);
    let r = (k / 2) as isize;
    let mut out = Plane::new(src.width, src.height, 0.0);
    for ky in 0..k {
        for kx in 0..k {
            let w = kernel[ky * k + kx];
            if w == 0.0 {
                continue;
            }
            let dy = ky as isize - r;
            let dx = kx as isize - r;
            let cols: Vec<usize> = (0..src.width)
                .map(|x| resolve(x as isize + dx, src.width, mode))
                .collect();
            for y in 0..src.height {
                let sy = resolve(y as isize + dy, src.height, mode);
                let src_row = &src.data[sy * src.width..(sy + 1) * src.width];
                let dst_row = &mut out.data[y * src.width..(y + 1) * src.width];
                for (d, &sx) in dst_row.iter_mut().zip(&cols) {
                    *d += w * src_row[sx];
                }
            }
        }
    }
    out
}

/// 3x3 mean filter.
pub(crate) fn box_blur3(src: &Plane) -> Plane {
    correlate2d(src, &[1.0 / 9.0; 9], 3, Boundary::Reflect101)
}

/// Bilinear sample at fractional `(x, y)`; outside samples resolve via `mode`.
pub(crate) fn bilinear(src: &Plane, x: f64, y: f64, mode: Boundary) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let xa = resolve(x0, src.width, mode);
    let xb = resolve(x0 + 1, src.width, mode);
    let ya = resolve(y0, src.height, mode);
    let yb = resolve(y0 + 1, src.height, mode);
    let top = src.at(xa, ya) * (1.0 - fx) + src.at(xb, ya) * fx;
    let bottom = src.at(xa, yb) * (1.0 - fx) + src.at(xb, yb) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Nearest-neighbour resize with pixel-centre alignment.
pub(crate) fn resize_nearest(src: &Plane, width: usize, height: usize) -> Plane {
    let map = |dst: usize, dst_n: usize, src_n: usize| {
        let s = ((dst as f64 + 0.5) * src_n as f64 / dst_n as f64).floor() as usize;
        s.min(src_n - 1)
    };
    let cols: Vec<usize> = (0..width).map(|x| map(x, width, src.width)).collect();
    Plane::from_fn(width, height, |x, y| {
        src.at(cols[x], map(y, height, src.height))
    })
}

/// Center-crops by `1 / zoom`, rescales bilinearly by `zoom`, and trims back
/// to the input size.
pub(crate) fn clipped_zoom(src: &Plane, zoom: f64) -> Plane {
    let crop_w = ((src.width as f64 / zoom).ceil() as usize).clamp(1, src.width);
    let crop_h = ((src.height as f64 / zoom).ceil() as usize).clamp(1, src.height);
    let left = (src.width - crop_w) / 2;
    let top = (src.height - crop_h) / 2;
    let zoom_w = ((crop_w as f64 * zoom).round() as usize).max(src.width);
    let zoom_h = ((crop_h as f64 * zoom).round() as usize).max(src.height);
    let trim_x = (zoom_w - src.width) / 2;
    let trim_y = (zoom_h - src.height) / 2;
    // Output index o maps to crop coordinate o * (crop - 1) / (zoomed - 1).
    let scale = |crop: usize, zoomed: usize| {
        if zoomed > 1 {
            (crop as f64 - 1.0) / (zoomed as f64 - 1.0)
        } else {
            0.0
        }
    };
    let sx = scale(crop_w, zoom_w);
    let sy = scale(crop_h, zoom_h);
    Plane::from_fn(src.width, src.height, |x, y| {
        let cx = left as f64 + (x + trim_x) as f64 * sx;
        let cy = top as f64 + (y + trim_y) as f64 * sy;
        bilinear(src, cx, cy, Boundary::Nearest)
    })
}

/// One-sided Gaussian motion kernel along `angle_deg`. Tap `i` samples the
/// source `i` pixels along the direction with bilinear interpolation and edge
/// replication.
pub(crate) fn motion_blur(src: &Plane, radius: f64, sigma: f64, angle_deg: f64) -> Plane {
    let width = (2.0 * radius).floor() as usize + 1;
    let raw: Vec<f64> = (0..width)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = raw.iter().sum();
    let angle = angle_deg.to_radians();
    let (sin, cos) = (libm::sin(angle), libm::cos(angle));
    let mut out = Plane::new(src.width, src.height, 0.0);
    for (i, w) in raw.iter().enumerate() {
        let dy = i as f64 * sin;
        let dx = i as f64 * cos;
        if dy.abs() >= src.height as f64 || dx.abs() >= src.width as f64 {
            break;
        }
        let w = w / total;
        for y in 0..src.height {
            for x in 0..src.width {
                out.data[y * src.width + x] +=
                    w * bilinear(src, x as f64 + dx, y as f64 + dy, Boundary::Nearest);
            }
        }
    }
    out
}

/// RGB to HSV on `[0, 1]` values; hue in `[0, 1)`.
pub(crate) fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if delta == 0.0 { 0.0 } else { delta / max };
    if delta == 0.0 {
        return (0.0, s, v);
    }
    // Later branches win ties.
    let h = if b == max {
        4.0 + (r - g) / delta
    } else if g == max {
        2.0 + (b - r) / delta
    } else {
        (g - b) / delta
    };
    ((h / 6.0).rem_euclid(1.0), s, v)
}

pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match (sector as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// ITU-R 601 luma.
#[inline]
pub(crate) fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_modes() {
        let n = 4;
        let idx = |mode| (-3..7).map(|i| resolve(i, n, mode)).collect::<Vec<_>>();
        assert_eq!(idx(Boundary::Nearest), [0, 0, 0, 0, 1, 2, 3, 3, 3, 3]);
        assert_eq!(idx(Boundary::Reflect), [2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(idx(Boundary::Reflect101), [3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn gaussian_preserves_constant_and_mean_mass() {
        let p = Plane::new(20, 16, 0.3);
        let out = gaussian_filter(&p, 2.0, 4.0, Boundary::Reflect);
        assert!(out.data.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn hsv_round_trip() {
        for &(r, g, b) in &[
            (0.2, 0.4, 0.6),
            (1.0, 0.0, 0.0),
            (0.5, 0.5, 0.5),
            (0.9, 0.9, 0.1),
            (0.0, 0.3, 0.3),
        ] {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
    }

    #[test]
    fn zoom_by_one_is_identity() {
        let p = Plane::from_fn(17, 13, |x, y| (x * 3 + y) as f64);
        let z = clipped_zoom(&p, 1.0);
        for (a, b) in p.data.iter().zip(&z.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_resize_identity() {
        let p = Plane::from_fn(10, 10, |x, y| (x + 10 * y) as f64);
        assert_eq!(resize_nearest(&p, 10, 10), p);
    }
}
