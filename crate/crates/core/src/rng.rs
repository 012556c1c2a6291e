//! Counter-based random numbers.
//!
//! Every random draw in the harness is a pure function of a key and a counter,
//! so results do not depend on evaluation order, thread scheduling, or platform.
//!
//! Algorithm: a key is derived as `mix(seed ^ mix(domain + GOLDEN))`, where
//! `mix` is the SplitMix64 finalizer. Draw `i` for that key seeds a [`Stream`]
//! at `mix(key ^ mix(i * GOLDEN))`; a stream is a plain SplitMix64 sequence.
//! Uniform doubles take the top 53 bits. Normals use Box-Muller with `libm`
//! transcendental functions, which are bit-reproducible across targets.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed generator; `domain` separates independent uses of the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, domain: u64) -> Self {
        Self {
            key: mix64(seed ^ mix64(domain.wrapping_add(GOLDEN))),
        }
    }

    /// Derives a child generator, e.g. one per (kind, purpose) pair.
    pub fn derive(&self, domain: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(domain.wrapping_add(GOLDEN).wrapping_mul(3))),
        }
    }

    /// Independent sequential stream for draw `counter`.
    pub fn stream(&self, counter: u64) -> Stream {
        Stream {
            state: mix64(self.key ^ mix64(counter.wrapping_mul(GOLDEN))),
        }
    }

    pub fn uniform(&self, counter: u64) -> f64 {
        self.stream(counter).next_f64()
    }

    pub fn normal(&self, counter: u64) -> f64 {
        self.stream(counter).next_normal()
    }
}

/// SplitMix64 sequence.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[lo, hi)`; `hi > lo`.
    pub fn int_range(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo) as u64;
        lo + (self.next_u64() % span) as i64
    }

    /// Uniform index in `[0, n)` via the widening-multiply method.
    pub fn below(&mut self, n: usize) -> usize {
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    /// Poisson draw by CDF inversion. Intended for `lambda` up to a few hundred.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        let u = self.next_f64();
        let mut p = libm::exp(-lambda);
        let mut cdf = p;
        let mut k = 0u64;
        let cap = (lambda * 10.0) as u64 + 100;
        while u > cdf && k < cap {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k
    }
}
