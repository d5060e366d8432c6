//! Counter-based substreams and standard normals.
//!
//! Replicate `r` of seed `s` reads ChaCha20 keyed by `s` (expanded with the
//! generator's `seed_from_u64`) on stream `r`. Streams never overlap, and any
//! replicate can be regenerated without touching the others.

use std::f64::consts::TAU;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Name of the generator, recorded in manifests.
pub const GENERATOR: &str = "chacha20/seed_from_u64/stream=replicate; box-muller";

pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        NormalStream { rng, spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller; no rejection, so the number of raw
    /// draws per value is fixed.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut s = NormalStream::new(7, 3);
            (0..16).map(|_| s.normal()).collect()
        };
        let b: Vec<f64> = {
            let mut s = NormalStream::new(7, 3);
            (0..16).map(|_| s.normal()).collect()
        };
        let c: Vec<f64> = {
            let mut s = NormalStream::new(7, 4);
            (0..16).map(|_| s.normal()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn moments() {
        let mut s = NormalStream::new(1, 0);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 4.0 / (n as f64).sqrt());
        assert!((m2 - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
