//! Small numerical helpers shared by the kernels.

use std::sync::OnceLock;

use crate::siegel::C64;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Principal square root without trigonometry. Agrees with
/// `Complex::sqrt`, including the sign of zero imaginary parts.
#[inline]
pub fn csqrt(z: C64) -> C64 {
    let (a, b) = (z.re, z.im);
    if a == 0.0 && b == 0.0 {
        return C64::new(0.0, b);
    }
    let m = a.hypot(b);
    if a >= 0.0 {
        let t = (0.5 * (m + a)).sqrt();
        C64::new(t, 0.5 * b / t)
    } else {
        let t = (0.5 * (m - a)).sqrt();
        C64::new(0.5 * b.abs() / t, t.copysign(b))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Cached Gauss-Legendre rules for the sizes used in hot loops.
pub fn gl_cached(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; 65] = [const { OnceLock::new() }; 65];
    assert!((1..=64).contains(&n), "cached Gauss-Legendre rules cover 1..=64 nodes");
    RULES[n].get_or_init(|| gauss_legendre(n))
}

/// Radical-inverse (van der Corput) sequence in the given base.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-20);
    }
}

#[cfg(test)]
mod csqrt_tests {
    use super::*;

    #[test]
    fn matches_library_sqrt() {
        let samples = [
            (1.0, 0.0),
            (-1.0, 0.0),
            (-1.0, -0.0),
            (0.0, 2.0),
            (0.0, -2.0),
            (-3.0, 1e-20),
            (-3.0, -1e-20),
            (1e-300, 1e-300),
            (2.5, -7.25),
            (-0.1, 4.0),
            (1e200, 1e200),
        ];
        for (a, b) in samples {
            let z = C64::new(a, b);
            let got = csqrt(z);
            let want = z.sqrt();
            assert!((got - want).norm() <= 1e-15 * want.norm(), "{z}: {got} vs {want}");
            assert_eq!(got.im.is_sign_negative(), want.im.is_sign_negative(), "{z}");
        }
    }
}
