//! Oracle helpers for the acceptance suite (quadrature, brute grids and
//! an independent sampler), plus serialization of the criteria so the
//! per-criterion runtimes stay meaningful.

#![allow(dead_code)]

use std::sync::{Mutex, MutexGuard, OnceLock};

/// Criteria run one at a time; timing assertions assume no CPU
/// contention from sibling tests.
pub fn serialize_criteria() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    match LOCK.get_or_init(|| Mutex::new(())).lock() {
        Ok(g) => g,
        Err(poisoned) => poisoned.into_inner(),
    }
}

pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1) + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    recurse(&f, a, b, simpson(&f, a, m, b), tol, 60)
}

/// E1 by direct quadrature of its defining integral.
pub fn exp_integral_quadrature(x: f64) -> f64 {
    adaptive_simpson(|t| (-t).exp() / t, x, x + 45.0, 1e-15 * (-x).exp())
}

pub fn grid_max_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, step: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut s = lo;
    while s <= hi {
        let v = f(s);
        if v > best {
            best = v;
        }
        s += step;
    }
    best
}

/// xorshift64 sampler, independent of the library generator.
pub struct OracleRng(u64);

impl OracleRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn uniform(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    pub fn max_exponential(&mut self, k: usize) -> f64 {
        (0..k).map(|_| self.exponential()).fold(0.0, f64::max)
    }
}

#[derive(Default, Clone, Copy)]
pub struct MeanAccumulator {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn sem(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sum_sq / n - self.mean().powi(2)).max(0.0);
        (var / n).sqrt()
    }
}
