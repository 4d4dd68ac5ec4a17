//! The Riemann theta function with its first and second `z`-derivatives,
//! evaluated by a truncated lattice sum with a certified tail bound, and the
//! invariant norm `||theta||`.
//!
//! All values are returned *scaled*: a jet at `z` holds
//! `theta * exp(-pi y^t Y^-1 y)` (and likewise for the derivatives), with the
//! removed exponent stored in [`ThetaJet::log_scale`]. This keeps every
//! summand bounded by one, independent of how far `z` is from the real torus,
//! and it is exactly the factor that appears in `||theta||` and `||eta||`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{gl_cached, halton, median, CompensatedSum, PRIMES};
use crate::siegel::{AbelianPoint, PeriodMatrix, C64};

/// Smallest accepted truncation tolerance.
pub const MIN_EPS: f64 = 1e-13;
/// Tolerance used when a caller does not pass one.
pub const DEFAULT_EPS: f64 = 1e-12;

/// Value, gradient and Hessian of theta at one point (scaled, see module docs).
#[derive(Debug, Clone)]
pub struct ThetaJet {
    pub value: C64,
    pub grad: DVector<C64>,
    pub hess: DMatrix<C64>,
    /// Absolute truncation bound on every scaled component.
    pub err_bound: f64,
    /// `pi y^t Y^-1 y`; the true jet is the stored one times `exp(log_scale)`.
    pub log_scale: f64,
}

impl ThetaJet {
    /// Unscaled theta value. Overflows for points far from the real torus.
    pub fn value_unscaled(&self) -> C64 {
        self.value * self.log_scale.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Value = 0,
    Gradient = 1,
    Hessian = 2,
}

const BUCKETS: usize = 24;

/// Theta evaluation for one period matrix and one tolerance.
///
/// Truncation radii depend on the tolerance, the derivative order and a bound
/// on the sum's center; they are cached per center bucket.
#[derive(Debug)]
pub struct ThetaEvaluator {
    tau: Arc<PeriodMatrix>,
    eps: f64,
    g: usize,
    re: Vec<f64>,
    im_inv: Vec<f64>,
    /// `sqrt(pi) * L^t`, row-major, upper triangular.
    scaled_chol_t: Vec<f64>,
    /// `sqrt(Y^-1_jj / pi)`, the box half-width per unit radius.
    box_width: Vec<f64>,
    rho: f64,
    radii: [[OnceLock<(f64, f64)>; BUCKETS]; 3],
}

impl ThetaEvaluator {
    pub fn new(tau: Arc<PeriodMatrix>, eps: f64) -> Result<Self> {
        if !(eps >= MIN_EPS) {
            return Err(Error::Precision(format!(
                "theta tolerance {eps:e} is below the double-precision floor {MIN_EPS:e}"
            )));
        }
        let g = tau.genus();
        let l = tau.im_cholesky();
        let mut scaled_chol_t = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..g {
                scaled_chol_t[i * g + j] = PI.sqrt() * l[(j, i)];
            }
        }
        let im_inv = tau.im_inverse();
        let box_width = (0..g).map(|j| (im_inv[(j, j)] / PI).sqrt()).collect();
        Ok(Self {
            g,
            eps,
            re: tau.re().transpose().as_slice().to_vec(),
            im_inv: im_inv.transpose().as_slice().to_vec(),
            scaled_chol_t,
            box_width,
            rho: (PI * tau.lambda_min()).sqrt(),
            radii: Default::default(),
            tau,
        })
    }

    pub fn tau(&self) -> &Arc<PeriodMatrix> {
        &self.tau
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Tail bound for derivative order `k` at truncation radius `r`, for sum
    /// centers with sup-norm at most `cbound`.
    ///
    /// Lattice points `v` of `sqrt(pi) L^t (Z^g - c)` are at least `rho`
    /// apart, so balls of radius `rho/2` around them are disjoint. For a
    /// radial weight `F` decreasing on `[r - rho, inf)` the sum over
    /// `|v| > r` is then bounded by `g (2/rho)^g` times
    /// `int_{r-rho}^inf F(s) (s + rho/2)^(g-1) ds`.
    fn tail_bound(&self, k: u32, cbound: f64, r: f64) -> f64 {
        let g = self.g as i32;
        let rho = self.rho;
        let s_max = self.box_width.iter().cloned().fold(0.0, f64::max);
        let lo = r - rho;
        let (x, w) = gl_cached(12);
        let panels = 24;
        let h = 12.0 / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let a = lo + p as f64 * h;
            for (xi, wi) in x.iter().zip(w) {
                let s = a + 0.5 * h * (xi + 1.0);
                let weight = (2.0 * PI * (cbound + s_max * s)).powi(k as i32);
                acc += 0.5 * h * wi * (-s * s).exp() * weight * (s + 0.5 * rho).powi(g - 1);
            }
        }
        self.g as f64 * (2.0 / rho).powi(g) * acc
    }

    fn radius_for(&self, order: Order, cbound: f64) -> (f64, f64) {
        let k = order as u32;
        // F(s) = exp(-s^2) (a + b s)^k is decreasing for s >= sqrt(k/2).
        let lo_min = self.rho + (k as f64 / 2.0).sqrt() + 0.5;
        let mut lo = lo_min;
        let mut hi = lo_min.max(2.0);
        while self.tail_bound(k, cbound, hi) > self.eps {
            lo = hi;
            hi *= 1.5;
            if hi > 1e3 {
                break;
            }
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.tail_bound(k, cbound, mid) > self.eps {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-3 {
                break;
            }
        }
        (hi, self.tail_bound(k, cbound, hi))
    }

    fn radius(&self, order: Order, cnorm: f64) -> (f64, f64) {
        let bucket = (2.0 * cnorm).ceil() as usize;
        if bucket < BUCKETS {
            *self.radii[order as usize][bucket].get_or_init(|| self.radius_for(order, bucket as f64 / 2.0))
        } else {
            self.radius_for(order, cnorm)
        }
    }

    fn center(&self, z: &[C64]) -> Vec<f64> {
        let g = self.g;
        (0..g).map(|i| -(0..g).map(|j| self.im_inv[i * g + j] * z[j].im).sum::<f64>()).collect()
    }

    /// Certified truncation radius (in the normalized metric) used for the
    /// full jet at `z`, and the corresponding tail bound.
    pub fn truncation_radius(&self, z: &[C64]) -> (f64, f64) {
        let cnorm = self.center(z).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.radius(Order::Hessian, cnorm)
    }

    /// Jet summed over an explicitly given radius, bypassing certification.
    /// `err_bound` is set to NaN.
    pub fn jet_at_radius(&self, z: &[C64], radius: f64) -> ThetaJet {
        let (out, log_scale, _) = self.sum(z, Order::Hessian, Some(radius));
        self.assemble(out, log_scale, f64::NAN)
    }

    /// Sum the series: value, gradient and packed upper Hessian.
    fn sum(&self, z: &[C64], order: Order, radius: Option<f64>) -> (Vec<C64>, f64, f64) {
        let g = self.g;
        let x: Vec<f64> = z.iter().map(|v| v.re).collect();
        let y: Vec<f64> = z.iter().map(|v| v.im).collect();
        let c = self.center(z);
        let log_scale = -PI * (0..g).map(|i| c[i] * y[i]).sum::<f64>();
        let cnorm = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (r, bound) = match radius {
            Some(r) => (r, f64::NAN),
            None => self.radius(order, cnorm),
        };
        let r2 = r * r;
        let lo: Vec<i64> = (0..g).map(|j| (c[j] - r * self.box_width[j]).ceil() as i64).collect();
        let hi: Vec<i64> = (0..g).map(|j| (c[j] + r * self.box_width[j]).floor() as i64).collect();

        let n_hess = g * (g + 1) / 2;
        let n_out = match order {
            Order::Value => 1,
            Order::Gradient => 1 + g,
            Order::Hessian => 1 + g + n_hess,
        };
        let mut acc_re = vec![CompensatedSum::default(); n_out];
        let mut acc_im = vec![CompensatedSum::default(); n_out];
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return (vec![C64::new(0.0, 0.0); n_out], log_scale, bound);
        }
        let mut n = lo.clone();
        let mut d = vec![0.0; g];
        'outer: loop {
            for j in 0..g {
                d[j] = n[j] as f64 - c[j];
            }
            let mut q = 0.0;
            for i in 0..g {
                let mut v = 0.0;
                for j in i..g {
                    v += self.scaled_chol_t[i * g + j] * d[j];
                }
                q += v * v;
            }
            if q <= r2 {
                let mut phase = 0.0;
                for i in 0..g {
                    let ni = n[i] as f64;
                    let mut row = 0.0;
                    for j in 0..g {
                        row += self.re[i * g + j] * n[j] as f64;
                    }
                    phase += ni * (PI * row + 2.0 * PI * x[i]);
                }
                let mag = (-q).exp();
                let (s, co) = phase.sin_cos();
                let (tr, ti) = (mag * co, mag * s);
                acc_re[0].add(tr);
                acc_im[0].add(ti);
                if order != Order::Value {
                    // 2 pi i n_k t
                    for k in 0..g {
                        let w = 2.0 * PI * n[k] as f64;
                        acc_re[1 + k].add(-w * ti);
                        acc_im[1 + k].add(w * tr);
                    }
                }
                if order == Order::Hessian {
                    let mut idx = 1 + g;
                    for j in 0..g {
                        for k in j..g {
                            let w = -4.0 * PI * PI * (n[j] * n[k]) as f64;
                            acc_re[idx].add(w * tr);
                            acc_im[idx].add(w * ti);
                            idx += 1;
                        }
                    }
                }
            }
            // odometer
            let mut j = 0;
            loop {
                if j == g {
                    break 'outer;
                }
                n[j] += 1;
                if n[j] <= hi[j] {
                    break;
                }
                n[j] = lo[j];
                j += 1;
            }
        }
        let out = acc_re.iter().zip(&acc_im).map(|(a, b)| C64::new(a.value(), b.value())).collect();
        (out, log_scale, bound)
    }

    /// Scaled value and its log scale.
    pub fn value(&self, z: &[C64]) -> (C64, f64) {
        let (out, log_scale, _) = self.sum(z, Order::Value, None);
        (out[0], log_scale)
    }

    /// Scaled value and gradient.
    pub fn gradient(&self, z: &[C64]) -> (C64, DVector<C64>, f64) {
        let (out, log_scale, _) = self.sum(z, Order::Gradient, None);
        (out[0], DVector::from_column_slice(&out[1..]), log_scale)
    }

    pub fn jet(&self, z: &[C64]) -> ThetaJet {
        let (out, log_scale, bound) = self.sum(z, Order::Hessian, None);
        self.assemble(out, log_scale, bound)
    }

    fn assemble(&self, out: Vec<C64>, log_scale: f64, bound: f64) -> ThetaJet {
        let g = self.g;
        let grad = DVector::from_column_slice(&out[1..1 + g]);
        let mut hess = DMatrix::from_element(g, g, C64::new(0.0, 0.0));
        let mut idx = 1 + g;
        for j in 0..g {
            for k in j..g {
                hess[(j, k)] = out[idx];
                hess[(k, j)] = out[idx];
                idx += 1;
            }
        }
        ThetaJet { value: out[0], grad, hess, err_bound: bound, log_scale }
    }

    /// `log ||theta||(z) = log|theta| - pi y^t Y^-1 y + (1/4) log det Y`.
    pub fn log_norm(&self, z: &[C64]) -> f64 {
        let (v, _) = self.value(z);
        0.25 * self.tau.det_im().ln() + v.norm().ln()
    }

    pub fn norm(&self, z: &[C64]) -> f64 {
        self.log_norm(z).exp()
    }

    /// Median of `||theta||` over 100 fixed quasi-random torus points.
    pub fn divisor_scale(&self) -> f64 {
        *self.tau.theta_scale_cell().get_or_init(|| {
            let g = self.g;
            let t = self.tau.tau();
            let mut vals: Vec<f64> = (1..=100)
                .map(|i| {
                    let a: Vec<f64> = (0..g).map(|k| halton(i, PRIMES[k])).collect();
                    let b: Vec<f64> = (0..g).map(|k| halton(i, PRIMES[g + k])).collect();
                    let z: Vec<C64> =
                        (0..g).map(|r| C64::new(a[r], 0.0) + (0..g).map(|s| t[(r, s)] * b[s]).sum::<C64>()).collect();
                    self.norm(&z)
                })
                .collect();
            median(&mut vals)
        })
    }
}

/// Exponential factors of one point for [`DifferenceTable`].
#[derive(Debug, Clone)]
pub struct TableFactors {
    /// Real and imaginary parts of `exp(2 pi i n.z')` per table term, `z'`
    /// the reduced point, times `exp(pi i n tau n)` for the first point of
    /// a pair.
    re: Vec<f64>,
    im_part: Vec<f64>,
    /// `Im z'`.
    im: Vec<f64>,
}

/// `log ||theta||(a - b)` for many pairs `(a, b)` at the cost of one short
/// dot product per pair.
///
/// Both points are reduced to `Im z = Y alpha` with `|alpha_j| <= 1/2`, so
/// the sum center of `a - b` has sup-norm at most one and one certified set
/// of lattice terms serves every pair. Then
/// `theta(a - b) = sum_n exp(pi i n tau n) exp(2 pi i n.a) exp(-2 pi i n.b)`.
#[derive(Debug, Clone)]
pub struct DifferenceTable {
    tau: Arc<PeriodMatrix>,
    g: usize,
    /// Per-coordinate bound on `|n_j|`.
    n_max: Vec<i64>,
    /// Per term and coordinate, the position of `exp(2 pi i n_j z_j)` in
    /// the concatenated power table.
    power_index: Vec<u32>,
    /// `exp(pi i n tau n)` per term.
    q: Vec<C64>,
    quarter_log_det: f64,
    /// `Y^-1`, row-major.
    y_inv: Vec<f64>,
    tail: f64,
}

/// Squared distance, in the metric `pi Y`, from `n` to the cube
/// `[-1, 1]^g` of sum centers (projected coordinate descent).
fn distance_to_centers(y: &DMatrix<f64>, n: &[i64]) -> f64 {
    let g = n.len();
    let mut c: Vec<f64> = n.iter().map(|&v| (v as f64).clamp(-1.0, 1.0)).collect();
    for _ in 0..50 {
        for i in 0..g {
            // minimize over c_i with the others fixed
            let mut off = 0.0;
            for j in 0..g {
                if j != i {
                    off += y[(i, j)] * (n[j] as f64 - c[j]);
                }
            }
            c[i] = (n[i] as f64 + off / y[(i, i)]).clamp(-1.0, 1.0);
        }
    }
    let d: Vec<f64> = (0..g).map(|i| n[i] as f64 - c[i]).collect();
    let mut q = 0.0;
    for i in 0..g {
        for j in 0..g {
            q += d[i] * y[(i, j)] * d[j];
        }
    }
    PI * q
}

impl DifferenceTable {
    pub fn new(ev: &ThetaEvaluator) -> Self {
        let g = ev.g;
        let (r, tail) = ev.radius_for(Order::Value, 1.0);
        let n_max: Vec<i64> = ev.box_width.iter().map(|w| (1.0 + r * w).floor() as i64).collect();
        let tau = ev.tau.tau();
        let y = ev.tau.im();
        let mut terms = Vec::new();
        let mut q = Vec::new();
        let mut n: Vec<i64> = n_max.iter().map(|m| -m).collect();
        'outer: loop {
            if distance_to_centers(y, &n) <= r * r * (1.0 + 1e-9) {
                let mut e = C64::new(0.0, 0.0);
                for i in 0..g {
                    for j in 0..g {
                        e += tau[(i, j)] * (n[i] * n[j]) as f64;
                    }
                }
                terms.extend_from_slice(&n);
                q.push((C64::new(0.0, PI) * e).exp());
            }
            let mut j = 0;
            loop {
                if j == g {
                    break 'outer;
                }
                n[j] += 1;
                if n[j] <= n_max[j] {
                    break;
                }
                n[j] = -n_max[j];
                j += 1;
            }
        }
        let mut offset = vec![0i64; g];
        for j in 1..g {
            offset[j] = offset[j - 1] + 2 * n_max[j - 1] + 1;
        }
        let power_index = terms
            .chunks_exact(g)
            .flat_map(|n| (0..g).map(|j| (offset[j] + n[j] + n_max[j]) as u32).collect::<Vec<_>>())
            .collect();
        Self {
            g,
            n_max,
            power_index,
            q,
            quarter_log_det: 0.25 * ev.tau.det_im().ln(),
            y_inv: ev.im_inv.clone(),
            tail,
            tau: ev.tau.clone(),
        }
    }

    /// Number of lattice terms per pair.
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Certified bound on the omitted terms, relative to the scaled value.
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    /// Factors of `z` as the first point of a pair (`negate = false`) or of
    /// `-z` as the second (`negate = true`).
    pub fn factors(&self, z: &[C64], negate: bool) -> TableFactors {
        let g = self.g;
        let sign = if negate { -1.0 } else { 1.0 };
        let y_inv = self.tau.im_inverse();
        let tau = self.tau.tau();
        let m: Vec<f64> = (0..g).map(|i| (0..g).map(|j| y_inv[(i, j)] * z[j].im * sign).sum::<f64>().round()).collect();
        let reduced: Vec<C64> = (0..g)
            .map(|i| {
                let v = z[i] * sign - (0..g).map(|j| tau[(i, j)] * m[j]).sum::<C64>();
                C64::new(v.re - v.re.round(), v.im)
            })
            .collect();
        // powers exp(2 pi i k z'_j) for |k| <= n_max_j, concatenated over j
        let mut powers = Vec::with_capacity(self.n_max.iter().map(|m| 2 * *m as usize + 1).sum());
        for j in 0..g {
            let nm = self.n_max[j] as usize;
            let w = (C64::new(0.0, 2.0 * PI) * reduced[j]).exp();
            let w_inv = w.inv();
            let start = powers.len();
            powers.resize(start + 2 * nm + 1, C64::new(1.0, 0.0));
            let p = &mut powers[start..];
            for k in 1..=nm {
                p[nm + k] = p[nm + k - 1] * w;
                p[nm - k] = p[nm - k + 1] * w_inv;
            }
        }
        let mut re = Vec::with_capacity(self.q.len());
        let mut im_part = Vec::with_capacity(self.q.len());
        for (idx, q) in self.power_index.chunks_exact(g).zip(&self.q) {
            let mut v = if negate { C64::new(1.0, 0.0) } else { *q };
            for &i in idx {
                v *= powers[i as usize];
            }
            re.push(v.re);
            im_part.push(v.im);
        }
        TableFactors { re, im_part, im: reduced.iter().map(|v| v.im).collect() }
    }

    /// `log ||theta||(a - b)`, with `a` from `factors(_, false)` and `b`
    /// from `factors(_, true)`.
    pub fn log_norm(&self, a: &TableFactors, b: &TableFactors) -> f64 {
        const LANES: usize = 4;
        let mut re = [0.0; LANES];
        let mut im = [0.0; LANES];
        let n = a.re.len();
        let (ar, ai, br, bi) = (&a.re[..n], &a.im_part[..n], &b.re[..n], &b.im_part[..n]);
        let full = n / LANES * LANES;
        for k in (0..full).step_by(LANES) {
            for l in 0..LANES {
                let i = k + l;
                re[l] += ar[i] * br[i] - ai[i] * bi[i];
                im[l] += ar[i] * bi[i] + ai[i] * br[i];
            }
        }
        for i in full..n {
            re[0] += ar[i] * br[i] - ai[i] * bi[i];
            im[0] += ar[i] * bi[i] + ai[i] * br[i];
        }
        let re: f64 = re.iter().sum();
        let im: f64 = im.iter().sum();
        let g = self.g;
        let mut quad = 0.0;
        for i in 0..g {
            let yi = a.im[i] + b.im[i];
            for j in 0..g {
                quad += yi * self.y_inv[i * g + j] * (a.im[j] + b.im[j]);
            }
        }
        self.quarter_log_det + 0.5 * (re * re + im * im).ln() - PI * quad
    }
}

/// Value, gradient and Hessian of theta at `p` with truncation bound `eps`.
pub fn theta_jet(p: &AbelianPoint, eps: f64) -> Result<ThetaJet> {
    let ev = ThetaEvaluator::new(p.tau.clone(), eps)?;
    Ok(ev.jet(p.z.as_slice()))
}

/// `||theta||(z, tau) = (det Y)^(1/4) exp(-pi y^t Y^-1 y) |theta(z, tau)|`.
pub fn theta_norm(p: &AbelianPoint) -> Result<f64> {
    let ev = ThetaEvaluator::new(p.tau.clone(), DEFAULT_EPS)?;
    Ok(ev.norm(p.z.as_slice()))
}

/// Whether `||theta||(p)` is below `tol` times the typical size of
/// `||theta||` on the torus.
pub fn on_theta_divisor(p: &AbelianPoint, tol: f64) -> Result<bool> {
    let ev = ThetaEvaluator::new(p.tau.clone(), DEFAULT_EPS)?;
    Ok(ev.norm(p.z.as_slice()) <= tol * ev.divisor_scale())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_g1(z: C64, tau: C64, nmax: i64) -> C64 {
        (-nmax..=nmax)
            .map(|n| {
                let n = n as f64;
                (C64::new(0.0, PI) * (n * n * tau + 2.0 * n * z)).exp()
            })
            .sum()
    }

    #[test]
    fn g1_value_at_origin() {
        let tau = Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 1.0)]).unwrap());
        let ev = ThetaEvaluator::new(tau, 1e-12).unwrap();
        let jet = ev.jet(&[C64::new(0.0, 0.0)]);
        let oracle = naive_g1(C64::new(0.0, 0.0), C64::new(0.0, 1.0), 20);
        assert!((jet.value - oracle).norm() < 1e-12);
        assert!((jet.value.re - 1.0864348).abs() < 1e-7);
        assert!(jet.grad[0].norm() < 1e-12);
        assert!(jet.err_bound <= 1e-12);
    }

    #[test]
    fn rejects_tiny_eps() {
        let tau = Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 1.0)]).unwrap());
        assert!(matches!(ThetaEvaluator::new(tau, 1e-15), Err(Error::Precision(_))));
    }

    #[test]
    fn odd_half_period_is_a_zero() {
        let tau = Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 1.0)]).unwrap());
        let p = AbelianPoint::new(DVector::from_element(1, C64::new(0.5, 0.5)), tau).unwrap();
        assert!(on_theta_divisor(&p, 1e-8).unwrap());
        let q = p.translate(&[3], &[-2]);
        assert!(on_theta_divisor(&q, 1e-8).unwrap());
    }

    #[test]
    fn tail_bound_is_monotone() {
        let tau = Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 0.7), C64::new(0.0, 1.3)]).unwrap());
        let ev = ThetaEvaluator::new(tau, 1e-10).unwrap();
        let a = ev.tail_bound(2, 1.0, 4.0);
        let b = ev.tail_bound(2, 1.0, 5.0);
        assert!(b < a);
        let (r, bound) = ev.radius(Order::Hessian, 0.5);
        assert!(bound <= 1e-10 && r > 0.0);
    }
}
