//! Seeded procedural textures.

use crate::image::Plane;
use crate::rng::CounterRng;

/// Diamond-square plasma on a `size x size` grid (`size` a power of two),
/// min-max normalized to `[0, 1]`. `wibble` starts at 100 and is divided by
/// `decay` after every level.
pub(crate) fn plasma_fractal(size: usize, decay: f64, rng: &CounterRng) -> Plane {
    assert!(size.is_power_of_two() && size >= 2);
    let mut map = Plane::new(size, size, 0.0);
    let mut step = size;
    let mut wibble = 100.0f64;
    let mut counter = 0u64;
    // Each call perturbs an m x m block of averages with wibble * U(-wibble, wibble).
    let mut wibbled = |sum: f64, wibble: f64| {
        let u = rng.uniform(counter);
        counter += 1;
        sum / 4.0 + wibble * (-wibble + 2.0 * wibble * u)
    };
    while step >= 2 {
        let m = size / step;
        let half = step / 2;
        let ul = |map: &Plane, i: usize, j: usize| map.at((j % m) * step, (i % m) * step);

        // squares
        for i in 0..m {
            for j in 0..m {
                let sum = ul(&map, i, j)
                    + ul(&map, i + 1, j)
                    + ul(&map, i, j + 1)
                    + ul(&map, i + 1, j + 1);
                let v = wibbled(sum, wibble);
                map.set(j * step + half, i * step + half, v);
            }
        }

        // diamonds
        let dr = |map: &Plane, i: usize, j: usize| {
            map.at((j % m) * step + half, (i % m) * step + half)
        };
        let mut left_top = Vec::with_capacity(m * m);
        let mut top_left = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let up = (i + m - 1) % m;
                let back = (j + m - 1) % m;
                left_top.push(dr(&map, i, j) + dr(&map, up, j) + ul(&map, i, j) + ul(&map, i, j + 1));
                top_left.push(dr(&map, i, j) + dr(&map, i, back) + ul(&map, i, j) + ul(&map, i + 1, j));
            }
        }
        for i in 0..m {
            for j in 0..m {
                let v = wibbled(left_top[i * m + j], wibble);
                map.set(j * step + half, i * step, v);
            }
        }
        for i in 0..m {
            for j in 0..m {
                let v = wibbled(top_left[i * m + j], wibble);
                map.set(j * step, i * step + half, v);
            }
        }

        step /= 2;
        wibble /= decay;
    }
    let lo = map.min();
    let shifted = map.map(|v| v - lo);
    let hi = shifted.max();
    if hi > 0.0 {
        shifted.map(|v| v / hi)
    } else {
        shifted
    }
}

/// Octave-summed value noise (4 octaves, persistence 0.5), normalized to
/// `[0, 1]`. Lattice values are hashed from `(octave, cell)`, so the texture
/// extends consistently to any raster size.
pub(crate) fn value_noise(width: usize, height: usize, base_period: f64, rng: &CounterRng) -> Plane {
    const OCTAVES: u32 = 4;
    const PERSISTENCE: f64 = 0.5;
    let lattice = |octave: u32, cx: i64, cy: i64| {
        let key = ((u64::from(octave)) << 56) ^ ((cx as u64 & 0x0FFF_FFFF) << 28) ^ (cy as u64 & 0x0FFF_FFFF);
        rng.uniform(key)
    };
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Plane::from_fn(width, height, |x, y| {
        let mut total = 0.0;
        let mut amplitude = 1.0;
        let mut period = base_period;
        for octave in 0..OCTAVES {
            let fx = x as f64 / period;
            let fy = y as f64 / period;
            let (cx, cy) = (fx.floor() as i64, fy.floor() as i64);
            let (tx, ty) = (smooth(fx - cx as f64), smooth(fy - cy as f64));
            let a = lattice(octave, cx, cy);
            let b = lattice(octave, cx + 1, cy);
            let c = lattice(octave, cx, cy + 1);
            let d = lattice(octave, cx + 1, cy + 1);
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            total += amplitude * (top + (bottom - top) * ty);
            amplitude *= PERSISTENCE;
            period /= 2.0;
        }
        total
    });
    let (lo, hi) = (out.min(), out.max());
    if hi > lo {
        out = out.map(|v| (v - lo) / (hi - lo));
    }
    out
}
