//! The corruption kernels. Each takes the resolved table row for its kind.

use super::edges::{canny, distance_transform, equalize_hist, Gray8};
use super::filters::{
    bilinear, box_blur3, clipped_zoom, correlate2d, gaussian_filter, gaussian_taps, hsv_to_rgb,
    luma, motion_blur, resize_nearest, rgb_to_hsv, separable, Boundary,
};
use super::fractal::{plasma_fractal, value_noise};
use super::{CorruptionError, CorruptionKind, CorruptionSpec, ParamVector};
use crate::image::{quantize_u8, Image, Plane, CHANNELS, MIN_SIDE};
use crate::rng::CounterRng;

/// Smallest width/height the kernel accepts for these parameters.
pub(crate) fn min_side(kind: CorruptionKind, params: &ParamVector) -> usize {
    match kind {
        // The swap window spans `h` in `(max_delta, H - max_delta]`.
        CorruptionKind::GlassBlur => (2 * params.at(1) as usize + 2).max(MIN_SIDE),
        _ => MIN_SIDE,
    }
}

pub(crate) fn apply(
    image: &Image,
    spec: &CorruptionSpec,
    params: &ParamVector,
) -> Result<Image, CorruptionError> {
    use CorruptionKind::*;
    let rng = CounterRng::new(spec.seed, spec.kind.index());
    let p = |i| params.at(i);
    let out = match spec.kind {
        GaussianNoise => per_sample(image, |i, x| x + p(0) * rng.normal(i)),
        ShotNoise => {
            let c = p(0);
            per_sample(image, |i, x| rng.stream(i).poisson(x * c) as f64 / c)
        }
        ImpulseNoise => {
            let amount = p(0);
            per_sample(image, |i, x| {
                let mut s = rng.stream(i);
                if s.next_f64() < amount {
                    if s.next_f64() < 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    x
                }
            })
        }
        SpeckleNoise => per_sample(image, |i, x| x + x * p(0) * rng.normal(i)),
        DefocusBlur => {
            let (kernel, k) = disk_kernel(p(0), p(1));
            per_plane(image, |pl| correlate2d(pl, &kernel, k, Boundary::Reflect101))
        }
        GlassBlur => glass_blur(image, p(0), p(1) as usize, p(2) as usize, &rng),
        MotionBlur => {
            let angle = rng.stream(0).uniform(-45.0, 45.0);
            per_plane(image, |pl| motion_blur(pl, p(0), p(1), angle))
        }
        ZoomBlur => {
            let zooms = params.list("zoom_factors").expect("zoom blur row is a list");
            per_plane(image, |pl| {
                let mut acc = pl.clone();
                for &z in zooms {
                    let zoomed = clipped_zoom(pl, z);
                    acc.data.iter_mut().zip(&zoomed.data).for_each(|(a, b)| *a += b);
                }
                acc.map(|v| v / (zooms.len() + 1) as f64)
            })
        }
        GaussianBlur => per_plane(image, |pl| gaussian_filter(pl, p(0), 4.0, Boundary::Reflect)),
        Snow => snow(image, params, &rng),
        Frost => frost(image, p(0), p(1), &rng),
        Fog => fog(image, p(0), p(1), &rng),
        Spatter => spatter(image, params, &rng),
        Brightness => map_hsv(image, |h, s, v| (h, s, (v + p(0)).clamp(0.0, 1.0))),
        Contrast => per_plane(image, |pl| {
            let mean = crate::metrics::stats::kahan_sum(pl.data.iter().copied())
                / pl.data.len() as f64;
            pl.map(|x| (x - mean) * p(0) + mean)
        }),
        Saturate => map_hsv(image, |h, s, v| (h, (s * p(0) + p(1)).clamp(0.0, 1.0), v)),
        Elastic => elastic(image, p(0), p(1), p(2), &rng),
        Pixelate => {
            let scaled = |n: usize| ((n as f64 * p(0) + 1e-9).floor() as usize).max(1);
            let (w, h) = (image.width(), image.height());
            per_plane(image, |pl| {
                resize_nearest(&resize_nearest(pl, scaled(w), scaled(h)), w, h)
            })
        }
        Jpeg => jpeg_round_trip(image, p(0) as u8)?,
    };
    Ok(out)
}

/// Maps every interleaved sample with its flat index (the RNG counter).
fn per_sample(image: &Image, f: impl Fn(u64, f64) -> f64) -> Image {
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| f(i as u64, x))
        .collect();
    Image::from_unclipped(image.width(), image.height(), data).expect("shape preserved")
}

fn per_plane(image: &Image, f: impl Fn(&Plane) -> Plane) -> Image {
    let [r, g, b] = image.planes();
    Image::from_planes(&[f(&r), f(&g), f(&b)])
}

fn map_hsv(image: &Image, f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) -> Image {
    let mut data = image.data().to_vec();
    for px in data.chunks_exact_mut(CHANNELS) {
        let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        let (h, s, v) = f(h, s, v);
        let (r, g, b) = hsv_to_rgb(h, s, v);
        px.copy_from_slice(&[r, g, b]);
    }
    Image::from_unclipped(image.width(), image.height(), data).expect("shape preserved")
}

/// Normalized aliased disk on an integer grid, softened by a small Gaussian
/// (3 taps up to radius 8, 5 taps beyond).
fn disk_kernel(radius: f64, alias_blur: f64) -> (Vec<f64>, usize) {
    let half = (radius.ceil() as isize).max(8);
    let k = (2 * half + 1) as usize;
    let mut disk = Plane::from_fn(k, k, |x, y| {
        let (dx, dy) = ((x as isize - half) as f64, (y as isize - half) as f64);
        if dx * dx + dy * dy <= radius * radius {
            1.0
        } else {
            0.0
        }
    });
    let total: f64 = disk.data.iter().sum();
    disk = disk.map(|v| v / total);
    let taps = gaussian_taps(alias_blur, if radius <= 8.0 { 1 } else { 2 });
    let soft = separable(&disk, &taps, Boundary::Reflect101);
    let total: f64 = soft.data.iter().sum();
    (soft.data.into_iter().map(|v| v / total).collect(), k)
}

fn glass_blur(image: &Image, sigma: f64, delta: usize, iterations: usize, rng: &CounterRng) -> Image {
    let (w, h) = (image.width(), image.height());
    let blurred = image
        .planes()
        .map(|pl| gaussian_filter(&pl, sigma, 4.0, Boundary::Nearest));
    // Work on truncated 8-bit pixels; swaps move whole RGB triples.
    let mut px: Vec<[u8; 3]> = (0..w * h)
        .map(|i| std::array::from_fn(|c| (blurred[c].data[i].clamp(0.0, 1.0) * 255.0) as u8))
        .collect();
    let mut stream = rng.stream(0);
    let d = delta as i64;
    for _ in 0..iterations {
        for y in (delta + 1..=h - delta).rev() {
            for x in (delta + 1..=w - delta).rev() {
                let dx = stream.int_range(-d, d);
                let dy = stream.int_range(-d, d);
                let (yy, xx) = ((y as i64 + dy) as usize, (x as i64 + dx) as usize);
                px.swap(y * w + x, yy * w + xx);
            }
        }
    }
    let planes: [Plane; 3] = std::array::from_fn(|c| Plane {
        width: w,
        height: h,
        data: px.iter().map(|p| f64::from(p[c]) / 255.0).collect(),
    });
    Image::from_planes(&planes.map(|pl| gaussian_filter(&pl, sigma, 4.0, Boundary::Nearest)))
}

fn snow(image: &Image, params: &ParamVector, rng: &CounterRng) -> Image {
    let c: Vec<f64> = (0..7).map(|i| params.at(i)).collect();
    let (w, h) = (image.width(), image.height());
    let flakes = rng.derive(1);
    let mut layer = Plane::from_fn(w, h, |x, y| c[0] + c[1] * flakes.normal((y * w + x) as u64));
    layer = clipped_zoom(&layer, c[2]);
    layer = layer.map(|v| if v < c[3] { 0.0 } else { v.clamp(0.0, 1.0) });
    let angle = rng.derive(2).stream(0).uniform(-135.0, -45.0);
    layer = motion_blur(&layer, c[4], c[5], angle);
    layer = layer.map(|v| f64::from(quantize_u8(v)) / 255.0);
    let flipped = layer.rot180();
    let mut data = image.data().to_vec();
    for (i, px) in data.chunks_exact_mut(CHANNELS).enumerate() {
        let gray = luma(px[0], px[1], px[2]) * 1.5 + 0.5;
        let snowfall = layer.data[i] + flipped.data[i];
        for v in px.iter_mut() {
            let lifted = v.max(gray);
            *v = c[6] * *v + (1.0 - c[6]) * lifted + snowfall;
        }
    }
    Image::from_unclipped(w, h, data).expect("shape preserved")
}

fn frost(image: &Image, c1: f64, c2: f64, rng: &CounterRng) -> Image {
    const TINT: [f64; 3] = [0.86, 0.93, 1.0];
    let texture = value_noise(image.width(), image.height(), 16.0, rng);
    let mut data = image.data().to_vec();
    for (i, px) in data.chunks_exact_mut(CHANNELS).enumerate() {
        for (v, tint) in px.iter_mut().zip(TINT) {
            *v = c1 * *v + c2 * tint * texture.data[i];
        }
    }
    Image::from_unclipped(image.width(), image.height(), data).expect("shape preserved")
}

fn fog(image: &Image, c1: f64, c2: f64, rng: &CounterRng) -> Image {
    let (w, h) = (image.width(), image.height());
    let size = w.max(h).next_power_of_two();
    let plasma = plasma_fractal(size, c2, rng);
    let max = image.data().iter().copied().fold(0.0, f64::max);
    let mut data = image.data().to_vec();
    for (i, px) in data.chunks_exact_mut(CHANNELS).enumerate() {
        let fog = c1 * plasma.at(i % w, i / w);
        for v in px.iter_mut() {
            *v = (*v + fog) * max / (max + c1);
        }
    }
    Image::from_unclipped(w, h, data).expect("shape preserved")
}

/// Water spatter: thresholded smooth noise whose edge-distance field is
/// embossed and tinted pale turquoise. The table's `c6 = 0` selects water at
/// every severity.
fn spatter(image: &Image, params: &ParamVector, rng: &CounterRng) -> Image {
    const WATER: [f64; 3] = [175.0 / 255.0, 238.0 / 255.0, 238.0 / 255.0];
    let c: Vec<f64> = (0..6).map(|i| params.at(i)).collect();
    let (w, h) = (image.width(), image.height());
    let mut liquid = Plane::from_fn(w, h, |x, y| c[0] + c[1] * rng.normal((y * w + x) as u64));
    liquid = gaussian_filter(&liquid, c[2], 4.0, Boundary::Nearest);
    liquid = liquid.map(|v| if v < c[3] { 0.0 } else { v });
    let liquid_u8 = to_gray8(&liquid, |v| (v * 255.0).clamp(0.0, 255.0) as u8);

    let mut edges = canny(&liquid_u8, 50, 150);
    edges.data.iter_mut().for_each(|v| *v = 255 - *v);
    let dist = Plane {
        width: w,
        height: h,
        data: distance_transform(&edges).into_iter().map(|d| d.min(20.0)).collect(),
    };
    let dist = box_blur3(&dist);
    let dist = equalize_hist(&to_gray8(&dist, |v| v.clamp(0.0, 255.0) as u8));
    const EMBOSS: [f64; 9] = [-2.0, -1.0, 0.0, -1.0, 1.0, 1.0, 0.0, 1.0, 2.0];
    let embossed = correlate2d(&from_gray8(&dist), &EMBOSS, 3, Boundary::Reflect101);
    let embossed = from_gray8(&to_gray8(&embossed, |v| v.round().clamp(0.0, 255.0) as u8));
    let dist = box_blur3(&embossed);

    let mut mask: Vec<f64> = liquid_u8
        .data
        .iter()
        .zip(&dist.data)
        .map(|(&l, &d)| f64::from(l) * d)
        .collect();
    let peak = mask.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        mask.iter_mut().for_each(|m| *m = *m / peak * c[4]);
    } else {
        mask.iter_mut().for_each(|m| *m = 0.0);
    }
    let mut data = image.data().to_vec();
    for (i, px) in data.chunks_exact_mut(CHANNELS).enumerate() {
        for (v, tint) in px.iter_mut().zip(WATER) {
            *v += mask[i] * tint;
        }
    }
    Image::from_unclipped(w, h, data).expect("shape preserved")
}

fn to_gray8(plane: &Plane, f: impl Fn(f64) -> u8) -> Gray8 {
    Gray8 {
        width: plane.width,
        height: plane.height,
        data: plane.data.iter().map(|&v| f(v)).collect(),
    }
}

fn from_gray8(gray: &Gray8) -> Plane {
    Plane {
        width: gray.width,
        height: gray.height,
        data: gray.data.iter().map(|&v| f64::from(v)).collect(),
    }
}

/// Random affine jitter of three anchor points by up to `jitter` pixels,
/// followed by a smoothed random displacement field of amplitude `alpha`.
fn elastic(image: &Image, alpha: f64, sigma: f64, jitter: f64, rng: &CounterRng) -> Image {
    let (w, h) = (image.width(), image.height());
    let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
    let s = (w.min(h) / 3) as f64;
    let src = [[cx + s, cy + s], [cx + s, cy - s], [cx - s, cy - s]];
    let mut js = rng.derive(1).stream(0);
    let dst: Vec<[f64; 2]> = src
        .iter()
        .map(|p| [p[0] + js.uniform(-jitter, jitter), p[1] + js.uniform(-jitter, jitter)])
        .collect();
    let inverse = affine_from_points(&[dst[0], dst[1], dst[2]], &src);

    let field = |domain: u64| {
        let r = rng.derive(domain);
        let noise = Plane::from_fn(w, h, |x, y| r.stream((y * w + x) as u64).uniform(-1.0, 1.0));
        gaussian_filter(&noise, sigma, 3.0, Boundary::Reflect).map(|v| v * alpha)
    };
    let (dx, dy) = (field(2), field(3));

    per_plane(image, |pl| {
        let warped = Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            let sx = inverse[0] * x + inverse[1] * y + inverse[2];
            let sy = inverse[3] * x + inverse[4] * y + inverse[5];
            bilinear(pl, sx, sy, Boundary::Reflect101)
        });
        Plane::from_fn(w, h, |x, y| {
            let i = y * w + x;
            bilinear(&warped, x as f64 + dx.data[i], y as f64 + dy.data[i], Boundary::Reflect)
        })
    })
}

/// Row-major 2x3 affine matrix mapping each `from[i]` onto `to[i]`.
fn affine_from_points(from: &[[f64; 2]; 3], to: &[[f64; 2]; 3]) -> [f64; 6] {
    let [[x0, y0], [x1, y1], [x2, y2]] = *from;
    let det = x0 * (y1 - y2) - y0 * (x1 - x2) + (x1 * y2 - x2 * y1);
    let solve = |t0: f64, t1: f64, t2: f64| {
        let a = (t0 * (y1 - y2) - y0 * (t1 - t2) + (t1 * y2 - t2 * y1)) / det;
        let b = (x0 * (t1 - t2) - t0 * (x1 - x2) + (x1 * t2 - x2 * t1)) / det;
        let c = (x0 * (y1 * t2 - y2 * t1) - y0 * (x1 * t2 - x2 * t1) + t0 * (x1 * y2 - x2 * y1)) / det;
        (a, b, c)
    };
    let (a, b, c) = solve(to[0][0], to[1][0], to[2][0]);
    let (d, e, f) = solve(to[0][1], to[1][1], to[2][1]);
    [a, b, c, d, e, f]
}

fn jpeg_round_trip(image: &Image, quality: u8) -> Result<Image, CorruptionError> {
    use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
    let (w, h) = (image.width(), image.height());
    let width = u16::try_from(w).map_err(|_| CorruptionError::EncodeFailure("width exceeds 65535".into()))?;
    let height = u16::try_from(h).map_err(|_| CorruptionError::EncodeFailure("height exceeds 65535".into()))?;
    let rgb = image.to_rgb8();
    let mut bytes = Vec::new();
    let mut encoder = Encoder::new(&mut bytes, quality);
    encoder.set_sampling_factor(SamplingFactor::F_2_2);
    encoder
        .encode(rgb.as_raw(), width, height, ColorType::Rgb)
        .map_err(|e| CorruptionError::EncodeFailure(e.to_string()))?;
    Image::decode(&bytes).map_err(|e| CorruptionError::EncodeFailure(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_maps_anchor_points() {
        let from = [[10.0, 12.0], [40.0, 3.0], [7.0, 30.0]];
        let to = [[11.5, 11.0], [38.0, 4.5], [8.0, 31.0]];
        let m = affine_from_points(&from, &to);
        for (f, t) in from.iter().zip(&to) {
            assert!((m[0] * f[0] + m[1] * f[1] + m[2] - t[0]).abs() < 1e-9);
            assert!((m[3] * f[0] + m[4] * f[1] + m[5] - t[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn disk_kernel_is_normalized() {
        for (r, a) in [(4.75, 0.2), (9.93, 0.5)] {
            let (k, n) = disk_kernel(r, a);
            assert_eq!(k.len(), n * n);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
