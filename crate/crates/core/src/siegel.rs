//! Period matrices in the Siegel upper half space, integer symplectic
//! matrices, their action on `C^g x H_g`, and a reduction of `tau` that
//! speeds up theta series convergence.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest condition number of `c tau + d` accepted by [`act`].
pub const MAX_CONDITION: f64 = 1e12;

/// A symmetric complex `g x g` matrix with positive definite imaginary part.
///
/// Derived real data (`Y`, `Y^-1`, its Cholesky factor, `det Y`, the smallest
/// eigenvalue) is computed once at construction; the value is immutable.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    tau: DMatrix<C64>,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    im_inv: DMatrix<f64>,
    im_chol: DMatrix<f64>,
    det_im: f64,
    lambda_min: f64,
    theta_scale: OnceLock<f64>,
}

impl PeriodMatrix {
    pub fn new(tau: DMatrix<C64>) -> Result<Self> {
        let g = tau.nrows();
        if g == 0 || tau.ncols() != g {
            return Err(Error::Invariant(format!(
                "period matrix must be square and non-empty, got {}x{}",
                tau.nrows(),
                tau.ncols()
            )));
        }
        if tau.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invariant("period matrix has non-finite entries".into()));
        }
        let max_abs = tau.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let asym = (0..g)
            .flat_map(|j| (0..g).map(move |k| (j, k)))
            .map(|(j, k)| (tau[(j, k)] - tau[(k, j)]).norm())
            .fold(0.0, f64::max);
        if asym > 1e-10 * (1.0 + max_abs) {
            return Err(Error::Invariant(format!(
                "period matrix is not symmetric (max |tau_jk - tau_kj| = {asym:.3e})"
            )));
        }
        let tau = (&tau + tau.transpose()).map(|v| v * 0.5);
        let re = tau.map(|v| v.re);
        let im = tau.map(|v| v.im);
        let chol = im
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invariant("imaginary part of the period matrix is not positive definite".into()))?;
        let im_chol = chol.l();
        if (0..g).any(|i| im_chol[(i, i)] <= 0.0) {
            return Err(Error::Invariant("imaginary part of the period matrix is not positive definite".into()));
        }
        let det_im = (0..g).map(|i| im_chol[(i, i)] * im_chol[(i, i)]).product();
        let im_inv = chol.inverse();
        let eig = SymmetricEigen::new(im.clone());
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if lambda_min <= 0.0 {
            return Err(Error::Invariant("imaginary part of the period matrix is not positive definite".into()));
        }
        Ok(Self { tau, re, im, im_inv, im_chol, det_im, lambda_min, theta_scale: OnceLock::new() })
    }

    /// Diagonal period matrix `diag(t_1, ..., t_g)`.
    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        let g = entries.len();
        Self::new(DMatrix::from_fn(g, g, |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) }))
    }

    /// Build from row-major entries.
    pub fn from_row_slice(g: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != g * g {
            return Err(Error::Invariant(format!("expected {} entries, got {}", g * g, entries.len())));
        }
        Self::new(DMatrix::from_row_slice(g, g, entries))
    }

    pub fn genus(&self) -> usize {
        self.tau.nrows()
    }

    pub fn tau(&self) -> &DMatrix<C64> {
        &self.tau
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    /// `Y = Im tau`.
    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn im_inverse(&self) -> &DMatrix<f64> {
        &self.im_inv
    }

    /// Lower Cholesky factor `L` with `Y = L L^t`.
    pub fn im_cholesky(&self) -> &DMatrix<f64> {
        &self.im_chol
    }

    pub fn det_im(&self) -> f64 {
        self.det_im
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub(crate) fn theta_scale_cell(&self) -> &OnceLock<f64> {
        &self.theta_scale
    }

    /// `pi * y^t Y^-1 y` for `y = Im z`.
    pub fn gaussian_exponent(&self, z: &DVector<C64>) -> f64 {
        let y = z.map(|v| v.im);
        std::f64::consts::PI * y.dot(&(&self.im_inv * &y))
    }

    /// Write `z = z_red + m + tau n` with integer `m, n` chosen so that the
    /// coordinates of `z_red` in the real basis `(I, tau)` lie in `[-1/2, 1/2]`.
    pub fn reduce_point(&self, z: &DVector<C64>) -> (DVector<C64>, DVector<i64>, DVector<i64>) {
        let y = z.map(|v| v.im);
        let b = &self.im_inv * &y;
        let n = b.map(|v| v.round() as i64);
        let nf = n.map(|v| C64::new(v as f64, 0.0));
        let shifted = z - &self.tau * &nf;
        let m = shifted.map(|v| v.re.round() as i64);
        let red = shifted - m.map(|v| C64::new(v as f64, 0.0));
        (red, m, n)
    }

    /// Euclidean distance from `z` to the nearest lattice point of `Z^g + tau Z^g`.
    pub fn lattice_distance(&self, z: &DVector<C64>) -> f64 {
        let (red, _, _) = self.reduce_point(z);
        let g = self.genus();
        let mut best = red.norm();
        let total = 3usize.pow(2 * g as u32);
        for code in 0..total {
            let mut c = code;
            let mut shift = DVector::from_element(g, C64::new(0.0, 0.0));
            let mut nvec = DVector::from_element(g, C64::new(0.0, 0.0));
            for i in 0..g {
                shift[i] = C64::new((c % 3) as f64 - 1.0, 0.0);
                c /= 3;
            }
            for i in 0..g {
                nvec[i] = C64::new((c % 3) as f64 - 1.0, 0.0);
                c /= 3;
            }
            let cand = &red - &shift - &self.tau * &nvec;
            best = best.min(cand.norm());
        }
        best
    }

    /// Distance between two points of the torus `C^g / (Z^g + tau Z^g)`.
    pub fn torus_distance(&self, a: &DVector<C64>, b: &DVector<C64>) -> f64 {
        self.lattice_distance(&(a - b))
    }
}

/// A point `z` of `C^g` paired with the period matrix of its torus.
#[derive(Debug, Clone)]
pub struct AbelianPoint {
    pub z: DVector<C64>,
    pub tau: Arc<PeriodMatrix>,
}

impl AbelianPoint {
    pub fn new(z: DVector<C64>, tau: Arc<PeriodMatrix>) -> Result<Self> {
        if z.len() != tau.genus() {
            return Err(Error::Invariant(format!("point has {} coordinates but genus is {}", z.len(), tau.genus())));
        }
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invariant("point has non-finite coordinates".into()));
        }
        Ok(Self { z, tau })
    }

    pub fn genus(&self) -> usize {
        self.z.len()
    }

    /// Translate by the lattice vector `m + tau n`.
    pub fn translate(&self, m: &[i64], n: &[i64]) -> Self {
        let g = self.genus();
        let mv = DVector::from_fn(g, |i, _| C64::new(m[i] as f64, 0.0));
        let nv = DVector::from_fn(g, |i, _| C64::new(n[i] as f64, 0.0));
        Self { z: &self.z + mv + self.tau.tau() * nv, tau: self.tau.clone() }
    }
}

/// An element of `Sp(2g, Z)` stored as a `2g x 2g` row-major integer matrix
/// with blocks `(a b; c d)`. Every value of this type satisfies the
/// symplectic relations; the constructors check them exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymplecticMatrix {
    g: usize,
    m: Vec<i64>,
}

fn checked_dot(a: impl Iterator<Item = i64>, b: impl Iterator<Item = i64>) -> Result<i64> {
    a.zip(b).try_fold(0i64, |acc, (x, y)| x.checked_mul(y).and_then(|p| acc.checked_add(p)).ok_or(Error::Overflow))
}

impl SymplecticMatrix {
    /// Build from `g x g` blocks, verifying `a^t c`, `b^t d` symmetric and
    /// `a^t d - c^t b = I` in exact arithmetic.
    pub fn from_blocks(a: &DMatrix<i64>, b: &DMatrix<i64>, c: &DMatrix<i64>, d: &DMatrix<i64>) -> Result<Self> {
        let g = a.nrows();
        for blk in [a, b, c, d] {
            if blk.nrows() != g || blk.ncols() != g {
                return Err(Error::Invariant("symplectic blocks must all be g x g".into()));
            }
        }
        let n = 2 * g;
        let mut m = vec![0i64; n * n];
        for i in 0..g {
            for j in 0..g {
                m[i * n + j] = a[(i, j)];
                m[i * n + g + j] = b[(i, j)];
                m[(g + i) * n + j] = c[(i, j)];
                m[(g + i) * n + g + j] = d[(i, j)];
            }
        }
        let out = Self { g, m };
        out.validate()?;
        Ok(out)
    }

    fn from_raw(g: usize, m: Vec<i64>) -> Result<Self> {
        let out = Self { g, m };
        out.validate()?;
        Ok(out)
    }

    /// Check the symplectic relations; errors name the violated relation.
    pub fn validate(&self) -> Result<()> {
        let g = self.g;
        // (x^t y)_{ij} = sum_k x_{ki} y_{kj}
        let tprod = |x: (usize, usize), y: (usize, usize), i: usize, j: usize| {
            checked_dot((0..g).map(|k| self.block(x, k, i)), (0..g).map(|k| self.block(y, k, j)))
        };
        const A: (usize, usize) = (0, 0);
        const B: (usize, usize) = (0, 1);
        const C: (usize, usize) = (1, 0);
        const D: (usize, usize) = (1, 1);
        for i in 0..g {
            for j in 0..g {
                if tprod(A, C, i, j)? != tprod(A, C, j, i)? {
                    return Err(Error::Invariant("symplectic relation a^t c = c^t a fails".into()));
                }
                if tprod(B, D, i, j)? != tprod(B, D, j, i)? {
                    return Err(Error::Invariant("symplectic relation b^t d = d^t b fails".into()));
                }
                let v = tprod(A, D, i, j)?.checked_sub(tprod(C, B, i, j)?).ok_or(Error::Overflow)?;
                if v != i64::from(i == j) {
                    return Err(Error::Invariant("symplectic relation a^t d - c^t b = I fails".into()));
                }
            }
        }
        Ok(())
    }

    fn block(&self, blk: (usize, usize), i: usize, j: usize) -> i64 {
        let n = 2 * self.g;
        self.m[(blk.0 * self.g + i) * n + blk.1 * self.g + j]
    }

    pub fn genus(&self) -> usize {
        self.g
    }

    pub fn a(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.g, self.g, |i, j| self.block((0, 0), i, j))
    }
    pub fn b(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.g, self.g, |i, j| self.block((0, 1), i, j))
    }
    pub fn c(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.g, self.g, |i, j| self.block((1, 0), i, j))
    }
    pub fn d(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.g, self.g, |i, j| self.block((1, 1), i, j))
    }

    pub fn identity(g: usize) -> Self {
        let n = 2 * g;
        let m = (0..n * n).map(|k| i64::from(k / n == k % n)).collect();
        Self { g, m }
    }

    /// `J = (0 -I; I 0)`, acting by `tau -> -tau^-1`.
    pub fn inversion(g: usize) -> Self {
        let z = DMatrix::zeros(g, g);
        let id = DMatrix::identity(g, g);
        Self::from_blocks(&z, &(-&id), &id, &z).expect("J is symplectic")
    }

    /// `(I b; 0 I)` for symmetric integer `b`, acting by `tau -> tau + b`.
    pub fn translation(b: &DMatrix<i64>) -> Result<Self> {
        let g = b.nrows();
        let id = DMatrix::identity(g, g);
        Self::from_blocks(&id, b, &DMatrix::zeros(g, g), &id)
    }

    /// `(u 0; 0 u^-t)` for unimodular `u`, acting by `tau -> u tau u^t`.
    pub fn basis_change(u: &DMatrix<i64>) -> Result<Self> {
        let g = u.nrows();
        let inv = unimodular_inverse(u)?;
        Self::from_blocks(u, &DMatrix::zeros(g, g), &DMatrix::zeros(g, g), &inv.transpose())
    }

    /// Inversion in the `k`-th coordinate only.
    pub fn partial_inversion(g: usize, k: usize) -> Self {
        let mut a = DMatrix::<i64>::identity(g, g);
        a[(k, k)] = 0;
        let mut b = DMatrix::<i64>::zeros(g, g);
        b[(k, k)] = -1;
        let mut c = DMatrix::<i64>::zeros(g, g);
        c[(k, k)] = 1;
        Self::from_blocks(&a, &b, &c, &a).expect("partial inversion is symplectic")
    }

    /// Exact product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.g != other.g {
            return Err(Error::Invariant("genus mismatch in symplectic product".into()));
        }
        let n = 2 * self.g;
        let mut m = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = checked_dot((0..n).map(|k| self.m[i * n + k]), (0..n).map(|k| other.m[k * n + j]))?;
            }
        }
        Self::from_raw(self.g, m)
    }

    /// Symplectic inverse `(d^t -b^t; -c^t a^t)`.
    pub fn inverse(&self) -> Self {
        let (a, b, c, d) = (self.a(), self.b(), self.c(), self.d());
        Self::from_blocks(&d.transpose(), &(-b.transpose()), &(-c.transpose()), &a.transpose())
            .expect("inverse of a symplectic matrix is symplectic")
    }
}

fn unimodular_inverse(u: &DMatrix<i64>) -> Result<DMatrix<i64>> {
    let g = u.nrows();
    if u.ncols() != g {
        return Err(Error::Invariant("basis change must be square".into()));
    }
    // Gauss-Jordan over the rationals with i128 numerators and a common denominator.
    let mut a: Vec<Vec<i128>> = (0..g)
        .map(|i| (0..2 * g).map(|j| if j < g { u[(i, j)] as i128 } else { i128::from(j - g == i) }).collect())
        .collect();
    let mut prev = 1i128;
    for col in 0..g {
        let piv = (col..g)
            .find(|&r| a[r][col] != 0)
            .ok_or_else(|| Error::Invariant("basis change matrix is singular".into()))?;
        a.swap(col, piv);
        for r in 0..g {
            if r == col {
                continue;
            }
            for j in 0..2 * g {
                if j == col {
                    continue;
                }
                let v = a[col][col]
                    .checked_mul(a[r][j])
                    .and_then(|x| a[r][col].checked_mul(a[col][j]).and_then(|y| x.checked_sub(y)))
                    .ok_or(Error::Overflow)?;
                a[r][j] = v / prev;
            }
            a[r][col] = 0;
        }
        prev = a[col][col];
    }
    // Bareiss leaves det on the diagonal.
    let det = a[0][0];
    if det.abs() != 1 {
        return Err(Error::Invariant(format!("basis change has determinant {det}, not +-1")));
    }
    Ok(DMatrix::from_fn(g, g, |i, j| {
        let v = a[i][g + j] / a[i][i];
        v as i64
    }))
}

fn to_complex(m: &DMatrix<i64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v as f64, 0.0))
}

/// Apply `gamma` to a period matrix. Returns the new period matrix and
/// `c tau + d`.
pub fn act_tau(m: &SymplecticMatrix, tau: &PeriodMatrix) -> Result<(PeriodMatrix, DMatrix<C64>)> {
    if m.genus() != tau.genus() {
        return Err(Error::Invariant("genus mismatch between symplectic matrix and tau".into()));
    }
    let t = tau.tau();
    let denom = to_complex(&m.c()) * t + to_complex(&m.d());
    let svd = SVD::new(denom.clone(), false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(Error::IllConditioned(format!(
            "c tau + d has condition number {:.3e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let inv = denom.clone().try_inverse().ok_or_else(|| Error::IllConditioned("c tau + d is singular".into()))?;
    let num = to_complex(&m.a()) * t + to_complex(&m.b());
    let new_tau = num * inv;
    let new_tau = (&new_tau + new_tau.transpose()).map(|v| v * 0.5);
    Ok((PeriodMatrix::new(new_tau)?, denom))
}

/// `(z, tau) -> ((c tau + d)^-t z, (a tau + b)(c tau + d)^-1)`.
pub fn act(m: &SymplecticMatrix, p: &AbelianPoint) -> Result<AbelianPoint> {
    let (tau, denom) = act_tau(m, &p.tau)?;
    let z = denom.transpose().lu().solve(&p.z).ok_or_else(|| Error::IllConditioned("c tau + d is singular".into()))?;
    AbelianPoint::new(z, Arc::new(tau))
}

/// Membership in Igusa's group: the diagonals of `a^t c` and `b^t d` are even.
pub fn is_in_gamma12(m: &SymplecticMatrix) -> Result<bool> {
    m.validate()?;
    let g = m.genus();
    let (a, b, c, d) = (m.a(), m.b(), m.c(), m.d());
    for i in 0..g {
        let ac = checked_dot((0..g).map(|k| a[(k, i)]), (0..g).map(|k| c[(k, i)]))?;
        let bd = checked_dot((0..g).map(|k| b[(k, i)]), (0..g).map(|k| d[(k, i)]))?;
        if ac.rem_euclid(2) != 0 || bd.rem_euclid(2) != 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// LLL reduction of the lattice with Gram matrix `y`. Returns a unimodular
/// `u` such that `u y u^t` is LLL-reduced (delta = 3/4).
pub fn lll_reduce(y: &DMatrix<f64>) -> DMatrix<i64> {
    let g = y.nrows();
    let mut u = DMatrix::<i64>::identity(g, g);
    let gram = |u: &DMatrix<i64>| {
        let uf = u.map(|v| v as f64);
        &uf * y * uf.transpose()
    };
    let mut k = 1;
    let mut guard = 0;
    while k < g && guard < 10_000 {
        guard += 1;
        let gm = gram(&u);
        let (mu, bstar) = gram_schmidt(&gm);
        for j in (0..k).rev() {
            let q = mu[(k, j)].round();
            if q != 0.0 {
                let q = q as i64;
                for c in 0..g {
                    u[(k, c)] -= q * u[(j, c)];
                }
            }
        }
        let gm = gram(&u);
        let (mu, _) = gram_schmidt(&gm);
        if bstar[k] >= (0.75 - mu[(k, k - 1)] * mu[(k, k - 1)]) * bstar[k - 1] {
            k += 1;
        } else {
            u.swap_rows(k, k - 1);
            k = k.max(2) - 1;
        }
    }
    u
}

fn gram_schmidt(gm: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let g = gm.nrows();
    let mut mu = DMatrix::<f64>::identity(g, g);
    let mut bstar = vec![0.0; g];
    for i in 0..g {
        for j in 0..i {
            let mut s = gm[(i, j)];
            for k in 0..j {
                s -= mu[(j, k)] * mu[(i, k)] * bstar[k];
            }
            mu[(i, j)] = s / bstar[j];
        }
        let mut s = gm[(i, i)];
        for k in 0..i {
            s -= mu[(i, k)] * mu[(i, k)] * bstar[k];
        }
        bstar[i] = s;
    }
    (mu, bstar)
}

/// Reduce `tau` for fast theta convergence: LLL on `Im tau`, integer shift
/// of `Re tau` into `[-1/2, 1/2]`, and an inversion in the first coordinate
/// while `|tau_11| < 1`. Returns the reduced matrix and the witness `gamma`
/// with `reduced = gamma . tau`. The witness lies in `Sp(2g, Z)` but not
/// necessarily in Igusa's group.
pub fn siegel_reduce(tau: &PeriodMatrix) -> Result<(PeriodMatrix, SymplecticMatrix)> {
    let g = tau.genus();
    let mut gamma = SymplecticMatrix::identity(g);
    let mut cur = tau.clone();
    for _ in 0..200 {
        let u = lll_reduce(cur.im());
        if u != DMatrix::identity(g, g) {
            let step = SymplecticMatrix::basis_change(&u)?;
            cur = act_tau(&step, &cur)?.0;
            gamma = step.mul(&gamma)?;
        }
        let shift = cur.re().map(|v| -(v.round() as i64));
        if shift.iter().any(|&v| v != 0) {
            let step = SymplecticMatrix::translation(&shift)?;
            cur = act_tau(&step, &cur)?.0;
            gamma = step.mul(&gamma)?;
        }
        if cur.tau()[(0, 0)].norm() < 1.0 - 1e-12 {
            let step = SymplecticMatrix::partial_inversion(g, 0);
            cur = act_tau(&step, &cur)?.0;
            gamma = step.mul(&gamma)?;
        } else {
            return Ok((cur, gamma));
        }
    }
    Err(Error::Convergence("siegel reduction did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gamma12_examples() {
        assert!(is_in_gamma12(&SymplecticMatrix::identity(2)).unwrap());
        assert!(is_in_gamma12(&SymplecticMatrix::inversion(2)).unwrap());
        let one = DMatrix::from_element(1, 1, 1i64);
        let zero = DMatrix::from_element(1, 1, 0i64);
        let m = SymplecticMatrix::from_blocks(&one, &zero, &one, &one).unwrap();
        assert!(!is_in_gamma12(&m).unwrap());
    }

    #[test]
    fn rejects_non_symplectic() {
        let two = DMatrix::from_element(1, 1, 2i64);
        let zero = DMatrix::from_element(1, 1, 0i64);
        let err = SymplecticMatrix::from_blocks(&two, &zero, &zero, &two).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn overflow_is_reported() {
        let big = DMatrix::from_element(1, 1, i64::MAX / 2);
        let one = DMatrix::from_element(1, 1, 1i64);
        let zero = DMatrix::from_element(1, 1, 0i64);
        let t = SymplecticMatrix::from_blocks(&one, &big, &zero, &one).unwrap();
        assert!(matches!(t.mul(&t).and_then(|m| m.mul(&t)), Err(Error::Overflow)));
    }

    #[test]
    fn inversion_fixes_i() {
        let tau = Arc::new(PeriodMatrix::diagonal(&[c(0.0, 1.0)]).unwrap());
        let p = AbelianPoint::new(DVector::from_element(1, c(0.3, 0.1)), tau).unwrap();
        let q = act(&SymplecticMatrix::inversion(1), &p).unwrap();
        assert!((q.tau.tau()[(0, 0)] - c(0.0, 1.0)).norm() < 1e-14);
        // z' = z / tau = z / i
        assert!((q.z[0] - c(0.3, 0.1) / c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_symmetric_and_non_positive() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.1, 0.0), c(0.2, 0.0), c(0.0, 1.0)]);
        assert!(matches!(PeriodMatrix::new(bad), Err(Error::Invariant(_))));
        let neg = DMatrix::from_row_slice(1, 1, &[c(0.0, -1.0)]);
        assert!(matches!(PeriodMatrix::new(neg), Err(Error::Invariant(_))));
    }

    #[test]
    fn reduce_examples() {
        let t = PeriodMatrix::diagonal(&[c(0.0, 1.0), c(0.0, 1.0)]).unwrap();
        let (r, gam) = siegel_reduce(&t).unwrap();
        assert_eq!(gam, SymplecticMatrix::identity(2));
        assert!((r.tau() - t.tau()).norm() < 1e-15);

        let t = PeriodMatrix::diagonal(&[c(5.0, 1.0)]).unwrap();
        let (r, gam) = siegel_reduce(&t).unwrap();
        assert!((r.tau()[(0, 0)] - c(0.0, 1.0)).norm() < 1e-14);
        assert_eq!(gam.b()[(0, 0)], -5);
        assert_eq!(gam.a()[(0, 0)], 1);
        assert_eq!(gam.c()[(0, 0)], 0);
    }

    #[test]
    fn unimodular_inverse_roundtrip() {
        let u = DMatrix::from_row_slice(3, 3, &[2i64, 1, 0, 1, 1, 0, 3, 5, 1]);
        let inv = unimodular_inverse(&u).unwrap();
        assert_eq!(&u * &inv, DMatrix::identity(3, 3));
        let s = DMatrix::from_row_slice(2, 2, &[2i64, 0, 0, 1]);
        assert!(unimodular_inverse(&s).is_err());
    }
}
