#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thetadiv::siegel::{AbelianPoint, PeriodMatrix, SymplecticMatrix};
use thetadiv::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Symmetric tau with real part in [-1, 1] and `Im tau = A A^t + 0.5 I`.
pub fn random_tau(rng: &mut ChaCha8Rng, g: usize) -> Arc<PeriodMatrix> {
    let a = DMatrix::<f64>::from_fn(g, g, |_, _| rng.gen_range(-0.6..0.6));
    let y = &a * a.transpose() + DMatrix::<f64>::identity(g, g) * 0.5;
    let mut x = DMatrix::<f64>::zeros(g, g);
    for i in 0..g {
        for j in i..g {
            let v = rng.gen_range(-1.0..1.0);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    let tau = DMatrix::from_fn(g, g, |i, j| c(x[(i, j)], y[(i, j)]));
    Arc::new(PeriodMatrix::new(tau).unwrap())
}

/// `z = a + tau b` with `a, b` uniform in the unit cube.
pub fn random_point(rng: &mut ChaCha8Rng, tau: &Arc<PeriodMatrix>) -> AbelianPoint {
    let g = tau.genus();
    let a = DVector::from_fn(g, |_, _| c(rng.gen_range(0.0..1.0), 0.0));
    let b = DVector::from_fn(g, |_, _| c(rng.gen_range(0.0..1.0), 0.0));
    AbelianPoint::new(a + tau.tau() * b, tau.clone()).unwrap()
}

/// Plain lattice sum over the box `|n_k| <= nmax`.
pub fn naive_theta(z: &DVector<C64>, tau: &DMatrix<C64>, nmax: i64) -> C64 {
    let g = z.len();
    let mut n = vec![-nmax; g];
    let mut acc = c(0.0, 0.0);
    loop {
        let nv = DVector::from_fn(g, |i, _| c(n[i] as f64, 0.0));
        let q = (nv.transpose() * tau * &nv)[(0, 0)];
        let l = (nv.transpose() * z)[(0, 0)];
        acc += (c(0.0, std::f64::consts::PI) * (q + l * 2.0)).exp();
        let mut j = 0;
        loop {
            if j == g {
                return acc;
            }
            n[j] += 1;
            if n[j] <= nmax {
                break;
            }
            n[j] = -nmax;
            j += 1;
        }
    }
}

/// `||theta||` from the plain lattice sum.
pub fn naive_theta_norm(z: &DVector<C64>, tau: &PeriodMatrix, nmax: i64) -> f64 {
    let y = z.map(|v| v.im);
    let e = (y.transpose() * tau.im_inverse() * &y)[(0, 0)];
    tau.det_im().powf(0.25) * (-std::f64::consts::PI * e).exp() * naive_theta(z, tau.tau(), nmax).norm()
}

/// Largest entry modulus of a complex matrix or vector.
pub fn cmax<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, C>>(
    m: &nalgebra::Matrix<C64, R, C, S>,
) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

/// A point of the theta divisor near `start`, found by Newton iteration in
/// coordinate `k` with the other coordinates held fixed.
pub fn divisor_point_near(
    ev: &thetadiv::theta::ThetaEvaluator,
    start: &DVector<C64>,
    k: usize,
) -> Option<DVector<C64>> {
    let mut z = start.clone();
    for _ in 0..60 {
        let (v, grad, _) = ev.gradient(z.as_slice());
        if grad[k].norm() < 1e-14 {
            return None;
        }
        let step = v / grad[k];
        z[k] -= step;
        if step.norm() < 1e-14 {
            let (v, _) = ev.value(z.as_slice());
            let _ = v;
            return Some(z);
        }
        if step.norm() > 10.0 {
            return None;
        }
    }
    None
}

/// Divisor points for a random-ish sample, all with nonsingular gradient.
pub fn divisor_points(ev: &thetadiv::theta::ThetaEvaluator, rng: &mut ChaCha8Rng, count: usize) -> Vec<DVector<C64>> {
    let tau = ev.tau().clone();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 50 * count {
        tries += 1;
        let start = random_point(rng, &tau).z;
        let k = rng.gen_range(0..tau.genus());
        if let Some(z) = divisor_point_near(ev, &start, k) {
            let (_, grad, _) = ev.gradient(z.as_slice());
            if grad.norm() > 1e-3 {
                out.push(z);
            }
        }
    }
    out
}

/// Coefficients `c0..c5` of the monic polynomial with the given roots.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut p = vec![c(1.0, 0.0)];
    for r in roots {
        let mut next = vec![c(0.0, 0.0); p.len() + 1];
        for (i, a) in p.iter().enumerate() {
            next[i + 1] += *a;
            next[i] -= *a * r;
        }
        p = next;
    }
    p
}

/// `y^2 = x^5 - x`.
pub fn x5_minus_x() -> Vec<C64> {
    vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
}

/// Five roots in the unit disk, pairwise at least `min_sep` apart.
pub fn random_roots(rng: &mut ChaCha8Rng, min_sep: f64) -> Vec<C64> {
    let mut roots: Vec<C64> = Vec::new();
    while roots.len() < 5 {
        let r = C64::from_polar(rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
        if roots.iter().all(|q| (q - r).norm() >= min_sep) {
            roots.push(r);
        }
    }
    roots
}

/// Generators of the theta group: inversion, even and off-diagonal
/// translations, and a unimodular basis change.
pub fn gamma12_generators(g: usize) -> Vec<SymplecticMatrix> {
    let mut out = vec![SymplecticMatrix::inversion(g)];
    let mut b = DMatrix::<i64>::zeros(g, g);
    b[(0, 0)] = 2;
    out.push(SymplecticMatrix::translation(&b).unwrap());
    if g > 1 {
        let mut b = DMatrix::<i64>::zeros(g, g);
        b[(0, 1)] = 1;
        b[(1, 0)] = 1;
        out.push(SymplecticMatrix::translation(&b).unwrap());
        let mut u = DMatrix::<i64>::identity(g, g);
        u[(0, 1)] = 1;
        out.push(SymplecticMatrix::basis_change(&u).unwrap());
    }
    out
}
