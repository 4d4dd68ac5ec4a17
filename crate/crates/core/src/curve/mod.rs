//! Genus-2 curves `y^2 = f(x)` with `f` a monic squarefree quintic: periods,
//! the Abel-Jacobi map based at infinity, the Riemann constant, the
//! orthonormal holomorphic differentials and the measure `nu`.

mod paths;
pub mod quadrature;
pub mod roots;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::numeric::{halton, PRIMES};
use crate::siegel::{siegel_reduce, AbelianPoint, PeriodMatrix, SymplecticMatrix, C64};
use crate::theta::{ThetaEvaluator, DEFAULT_EPS};

pub use paths::{Branches, PathParams};
use paths::{Pair, PathEnd};

/// Minimal distance between roots of `f`.
pub const MIN_ROOT_SEPARATION: f64 = 1e-6;
/// Agreement required between periods at two path resolutions.
pub const PERIOD_TOL: f64 = 1e-9;
/// Relative `||theta||` bound for images of effective divisors.
pub const DIVISOR_AUDIT_TOL: f64 = 1e-5;
const GENUS: usize = 2;

/// A point of the curve: the Weierstrass point at infinity or an affine
/// point `(x, y)` with `y^2 = f(x)`. `sheet` is the sign of `y` relative to
/// `prod_k sqrt(x - e_k)` (principal roots); it is `+1` at branch points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvePoint {
    Infinity,
    Affine { x: C64, y: C64, sheet: i8 },
}

impl CurvePoint {
    pub fn x(&self) -> Option<C64> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { x, .. } => Some(*x),
        }
    }

    pub fn y(&self) -> Option<C64> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { y, .. } => Some(*y),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    /// Distance in `(x, y)` coordinates; infinity is only near itself.
    pub fn distance(&self, other: &CurvePoint) -> f64 {
        match (self, other) {
            (CurvePoint::Infinity, CurvePoint::Infinity) => 0.0,
            (CurvePoint::Affine { x: a, y: ya, .. }, CurvePoint::Affine { x: b, y: yb, .. }) => {
                ((a - b).norm_sqr() + (ya - yb).norm_sqr()).sqrt()
            }
            _ => f64::INFINITY,
        }
    }
}

/// The hyperelliptic involution `(x, y) -> (x, -y)`.
pub fn involution(p: &CurvePoint) -> CurvePoint {
    match *p {
        CurvePoint::Infinity => CurvePoint::Infinity,
        CurvePoint::Affine { x, y, sheet } => {
            if y == C64::new(0.0, 0.0) {
                *p
            } else {
                CurvePoint::Affine { x, y: -y, sheet: -sheet }
            }
        }
    }
}

/// An effective divisor: a multiset of curve points.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorOnCurve {
    pub points: Vec<CurvePoint>,
}

impl DivisorOnCurve {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        Self { points }
    }

    pub fn point(p: CurvePoint) -> Self {
        Self { points: vec![p] }
    }

    pub fn degree(&self) -> usize {
        self.points.len()
    }

    pub fn involution(&self) -> Self {
        Self { points: self.points.iter().map(involution).collect() }
    }

    pub fn plus(&self, other: &DivisorOnCurve) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self { points }
    }
}

/// A genus-2 curve with all period data. Immutable after [`build_curve`].
#[derive(Debug)]
pub struct CurveModel {
    f_coeffs: [C64; 6],
    branches: Branches,
    /// Branch points in the order used to build the homology basis.
    order: [usize; 5],
    base_x: C64,
    base_y: C64,
    /// Integral from infinity to `(base_x, base_y)`.
    base_integral: Pair,
    signs: [f64; 4],
    gamma: SymplecticMatrix,
    period_a: Matrix2<C64>,
    period_b: Matrix2<C64>,
    a_inv: Matrix2<C64>,
    tau: Arc<PeriodMatrix>,
    raw_asymmetry: f64,
    gram: Matrix2<C64>,
    gram_inv: Matrix2<C64>,
    ortho: Matrix2<C64>,
    kappa: DVector<C64>,
    theta: Arc<ThetaEvaluator>,
    period_refinement_delta: f64,
}

/// Entries of the quintic: ascending coefficients `c0..c4, 1`.
fn validate_coeffs(f_coeffs: &[C64]) -> Result<[C64; 6]> {
    if f_coeffs.len() != 6 {
        return Err(Error::Domain(format!("expected 6 coefficients of a monic quintic, got {}", f_coeffs.len())));
    }
    if f_coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Domain("coefficients must be finite".into()));
    }
    if (f_coeffs[5] - C64::new(1.0, 0.0)).norm() > 1e-14 {
        return Err(Error::Domain("quintic must be monic (leading coefficient 1)".into()));
    }
    let mut out = [C64::new(0.0, 0.0); 6];
    out.copy_from_slice(f_coeffs);
    out[5] = C64::new(1.0, 0.0);
    Ok(out)
}

fn seg_distance(a: C64, b: C64, p: C64) -> f64 {
    let d = b - a;
    let s = ((p - a) * d.conj()).re / d.norm_sqr();
    (a + d * s.clamp(0.0, 1.0) - p).norm()
}

/// Choose the base point direction maximizing how far each straight stem
/// from the base point to a branch point stays from the other branch points.
fn choose_base(br: &Branches, radius: f64) -> C64 {
    let mut best = (f64::NEG_INFINITY, C64::new(radius, 0.0));
    for j in 0..72 {
        let x0 = C64::from_polar(radius, 2.0 * PI * (j as f64 + 0.5) / 72.0);
        let mut clearance = f64::INFINITY;
        for k in 0..5 {
            for i in 0..5 {
                if i != k {
                    clearance = clearance.min(seg_distance(x0, br.e[k], br.e[i]) / br.sep[i]);
                }
            }
        }
        if clearance > best.0 {
            best = (clearance, x0);
        }
    }
    best.1
}

fn mat2(m: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

fn int_mat(m: &DMatrix<i64>) -> Matrix2<C64> {
    Matrix2::from_fn(|i, j| C64::new(m[(i, j)] as f64, 0.0))
}

/// Build the curve `y^2 = f(x)` from ascending coefficients `c0..c4, 1`.
pub fn build_curve(f_coeffs: &[C64]) -> Result<CurveModel> {
    build_curve_with(f_coeffs, DEFAULT_EPS)
}

/// As [`build_curve`], with theta evaluated at tolerance `eps`.
pub fn build_curve_with(f_coeffs: &[C64], eps: f64) -> Result<CurveModel> {
    let coeffs = validate_coeffs(f_coeffs)?;
    let r = roots::roots(&coeffs)?;
    let mut min_sep = f64::INFINITY;
    for i in 0..5 {
        for j in i + 1..5 {
            min_sep = min_sep.min((r[i] - r[j]).norm());
        }
    }
    if min_sep < MIN_ROOT_SEPARATION {
        return Err(Error::Domain(format!(
            "f is not squarefree: roots {min_sep:.3e} apart (minimum {MIN_ROOT_SEPARATION:e})"
        )));
    }
    let branches = Branches::new([r[0], r[1], r[2], r[3], r[4]]);
    let base_x = choose_base(&branches, 4.0 * branches.emax);
    let t0 = base_x.inv().sqrt();
    let base_y = branches.s(t0) / t0.powi(5);
    let base_integral = branches.t_segment(C64::new(0.0, 0.0), t0, &PathParams::STANDARD);

    // order branch points by the angle under which they are seen from x0
    let mut order = [0usize, 1, 2, 3, 4];
    let toward = -base_x;
    order.sort_by(|&a, &b| {
        let aa = ((branches.e[a] - base_x) / toward).arg();
        let ab = ((branches.e[b] - base_x) / toward).arg();
        aa.partial_cmp(&ab).unwrap()
    });

    let mut model = CurveModel {
        f_coeffs: coeffs,
        branches,
        order,
        base_x,
        base_y,
        base_integral,
        signs: [1.0; 4],
        gamma: SymplecticMatrix::identity(2),
        period_a: Matrix2::identity(),
        period_b: Matrix2::identity(),
        a_inv: Matrix2::identity(),
        tau: Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 1.0), C64::new(0.0, 1.0)])?),
        raw_asymmetry: 0.0,
        gram: Matrix2::identity(),
        gram_inv: Matrix2::identity(),
        ortho: Matrix2::identity(),
        kappa: DVector::from_element(2, C64::new(0.0, 0.0)),
        theta: Arc::new(ThetaEvaluator::new(
            Arc::new(PeriodMatrix::diagonal(&[C64::new(0.0, 1.0), C64::new(0.0, 1.0)])?),
            DEFAULT_EPS,
        )?),
        period_refinement_delta: 0.0,
    };

    let loops = model.lollipops(&PathParams::STANDARD, 0.0);
    let loops_fine = model.lollipops(&PathParams::REFINED, 0.0);
    let scale = loops.iter().flat_map(|l| l.iter()).map(|v| v.norm()).fold(1.0, f64::max);
    let delta = loops
        .iter()
        .zip(&loops_fine)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).norm()))
        .fold(0.0, f64::max);
    if delta > PERIOD_TOL * scale {
        return Err(Error::Convergence(format!("periods changed by {delta:.3e} under path refinement")));
    }
    model.period_refinement_delta = delta;

    // sign search for a symplectic basis from the chain of cycles
    let chain = |signs: &[f64; 4]| -> (Matrix2<C64>, Matrix2<C64>) {
        let c: Vec<Pair> = (0..4)
            .map(|k| {
                let s = C64::new(signs[k], 0.0);
                [(loops[k][0] - loops[k + 1][0]) * s, (loops[k][1] - loops[k + 1][1]) * s]
            })
            .collect();
        let a1 = c[0];
        let b1 = c[1];
        let a2 = [c[0][0] + c[2][0], c[0][1] + c[2][1]];
        let b2 = c[3];
        (Matrix2::new(a1[0], a2[0], a1[1], a2[1]), Matrix2::new(b1[0], b2[0], b1[1], b2[1]))
    };
    let mut best: Option<(f64, [f64; 4])> = None;
    for code in 0..8 {
        let signs = [
            1.0,
            if code & 1 == 0 { 1.0 } else { -1.0 },
            if code & 2 == 0 { 1.0 } else { -1.0 },
            if code & 4 == 0 { 1.0 } else { -1.0 },
        ];
        let (pa, pb) = chain(&signs);
        let Some(inv) = pa.try_inverse() else { continue };
        let t = inv * pb;
        let tmax = t.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let asym = (t[(0, 1)] - t[(1, 0)]).norm() / tmax;
        let im = Matrix2::from_fn(|i, j| 0.5 * (t[(i, j)].im + t[(j, i)].im));
        let pd = im[(0, 0)] > 0.0 && im.determinant() > 0.0;
        if pd && best.is_none_or(|(b, _)| asym < b) {
            best = Some((asym, signs));
        }
    }
    let (asym, signs) = best.ok_or_else(|| Error::Convergence("no sign choice gives a valid period matrix".into()))?;
    if asym > 1e-8 {
        return Err(Error::Convergence(format!("period matrix fails the bilinear relations (asymmetry {asym:.3e})")));
    }
    model.signs = signs;
    model.raw_asymmetry = asym;
    let (pa, pb) = chain(&signs);
    let t = pa.try_inverse().unwrap() * pb;
    let raw_tau = PeriodMatrix::new(mat2(&t))?;
    let (_, gamma) = siegel_reduce(&raw_tau)?;
    let (ga, gb, gc, gd) = (int_mat(&gamma.a()), int_mat(&gamma.b()), int_mat(&gamma.c()), int_mat(&gamma.d()));
    let period_a = pb * gc.transpose() + pa * gd.transpose();
    let period_b = pb * ga.transpose() + pa * gb.transpose();
    let a_inv = period_a.try_inverse().ok_or_else(|| Error::IllConditioned("A-period matrix is singular".into()))?;
    let tau = Arc::new(PeriodMatrix::new(mat2(&(a_inv * period_b)))?);
    model.gamma = gamma;
    model.period_a = period_a;
    model.period_b = period_b;
    model.a_inv = a_inv;
    model.tau = tau.clone();
    model.theta = Arc::new(ThetaEvaluator::new(tau.clone(), eps)?);

    // Hodge form of (dx/y, x dx/y) from the periods
    let i2 = C64::new(0.0, 0.5);
    let gram = (period_a * period_b.adjoint() - period_b * period_a.adjoint()) * i2;
    let gram = (gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Convergence("Hodge form of the periods is not positive definite".into()))?;
    let ortho = chol.l().try_inverse().ok_or_else(|| Error::IllConditioned("Hodge form is singular".into()))?;
    model.gram = gram;
    model.gram_inv = gram.try_inverse().unwrap();
    model.ortho = ortho;

    model.kappa = model.find_riemann_constant()?;
    model.audit_divisor_images(200)?;
    Ok(model)
}

impl CurveModel {
    pub fn f_coeffs(&self) -> &[C64; 6] {
        &self.f_coeffs
    }

    pub fn genus(&self) -> usize {
        GENUS
    }

    pub fn branches(&self) -> &Branches {
        &self.branches
    }

    /// Finite branch points `e_1..e_5` in root-finder order.
    pub fn branch_points(&self) -> [C64; 5] {
        self.branches.e
    }

    /// The six Weierstrass points, infinity last.
    pub fn weierstrass_points(&self) -> Vec<CurvePoint> {
        let mut out: Vec<CurvePoint> =
            self.branches.e.iter().map(|&x| CurvePoint::Affine { x, y: C64::new(0.0, 0.0), sheet: 1 }).collect();
        out.push(CurvePoint::Infinity);
        out
    }

    /// `A`-periods: entry `(i, j)` is the integral of the i-th of
    /// `dx/y, x dx/y` over the j-th A-cycle.
    pub fn period_a(&self) -> &Matrix2<C64> {
        &self.period_a
    }

    pub fn period_b(&self) -> &Matrix2<C64> {
        &self.period_b
    }

    pub fn tau(&self) -> &Arc<PeriodMatrix> {
        &self.tau
    }

    /// `|tau_12 - tau_21|` relative to `max |tau|` before symmetrization.
    pub fn raw_asymmetry(&self) -> f64 {
        self.raw_asymmetry
    }

    /// Largest change of a loop integral between the standard and refined
    /// path resolutions.
    pub fn period_refinement_delta(&self) -> f64 {
        self.period_refinement_delta
    }

    /// `(i/2) int omega_i ^ conj(omega_j)` for `omega = (dx/y, x dx/y)`.
    pub fn gram(&self) -> &Matrix2<C64> {
        &self.gram
    }

    /// `M` with `M gram M^H = I`; the orthonormal differentials are
    /// `phi_k(x) dx/y` with `phi = M (1, x)^t`.
    pub fn ortho_basis(&self) -> &Matrix2<C64> {
        &self.ortho
    }

    pub fn riemann_constant(&self) -> &DVector<C64> {
        &self.kappa
    }

    pub fn theta(&self) -> &Arc<ThetaEvaluator> {
        &self.theta
    }

    pub fn symplectic_witness(&self) -> &SymplecticMatrix {
        &self.gamma
    }

    /// Affine point over `x` on the given sheet.
    pub fn point(&self, x: C64, sheet: i8) -> CurvePoint {
        let y = self.branches.y_principal(x);
        if y == C64::new(0.0, 0.0) {
            return CurvePoint::Affine { x, y, sheet: 1 };
        }
        let s = if sheet >= 0 { 1 } else { -1 };
        CurvePoint::Affine { x, y: y * s as f64, sheet: s }
    }

    /// Affine point from coordinates known to satisfy the equation.
    pub(crate) fn point_unchecked(&self, x: C64, y: C64) -> CurvePoint {
        let yp = self.branches.y_principal(x);
        let sheet = if (y - yp).norm() <= (y + yp).norm() { 1 } else { -1 };
        CurvePoint::Affine { x, y, sheet }
    }

    /// Affine point from both coordinates; `y` must satisfy the equation.
    pub fn point_xy(&self, x: C64, y: C64) -> Result<CurvePoint> {
        let f = self.branches.f(x);
        if (y * y - f).norm() > 1e-10 * (1.0 + f.norm()) {
            return Err(Error::Domain(format!("({x}, {y}) is not on the curve")));
        }
        let yp = self.branches.y_principal(x);
        let sheet = if (y - yp).norm() <= (y + yp).norm() { 1 } else { -1 };
        Ok(CurvePoint::Affine { x, y, sheet })
    }

    /// Deterministic quasi-random affine point number `index`, with `|x|`
    /// up to `1.5 max(1, max |e_k|)`.
    pub fn sample_point(&self, index: usize, salt: usize) -> CurvePoint {
        let i = index + 1 + 7919 * salt;
        let r = 1.5 * self.branches.emax * halton(i, PRIMES[0]).sqrt();
        let phi = 2.0 * PI * halton(i, PRIMES[1]);
        let sheet = if halton(i, PRIMES[2]) < 0.5 { 1 } else { -1 };
        self.point(C64::from_polar(r, phi), sheet)
    }

    /// Integrals of `(dx/y, x dx/y)` around the five lollipops, in angular
    /// order, each starting and ending at the base point.
    fn lollipops(&self, p: &PathParams, offset: f64) -> Vec<Pair> {
        let br = &self.branches;
        self.order
            .iter()
            .map(|&k| {
                let ek = br.e[k];
                let mut way = Vec::new();
                if offset != 0.0 {
                    let mid = self.base_x + (ek - self.base_x) * 0.5;
                    let w = mid + (ek - self.base_x) * C64::new(0.0, offset);
                    let clear = (0..5).filter(|&j| j != k).all(|j| {
                        !in_triangle(br.e[j], self.base_x, w, ek)
                            && seg_distance(self.base_x, w, br.e[j]) > p.circle * br.sep[j]
                            && seg_distance(w, ek, br.e[j]) > p.circle * br.sep[j]
                    });
                    if clear {
                        way.push(w);
                    }
                }
                way.push(ek);
                let stem = br.trace(self.base_x, self.base_y, &way, PathEnd::CircleEntry(k), p);
                let u_in = br.u_of(k, stem.x, stem.y);
                let cap = br.u_segment(k, u_in, -u_in, p);
                [stem.integral[0] * 2.0 + cap[0], stem.integral[1] * 2.0 + cap[1]]
            })
            .collect()
    }

    fn periods_from_loops(&self, loops: &[Pair]) -> (Matrix2<C64>, Matrix2<C64>) {
        let s = &self.signs;
        let c: Vec<Pair> = (0..4)
            .map(|k| {
                let sk = C64::new(s[k], 0.0);
                [(loops[k][0] - loops[k + 1][0]) * sk, (loops[k][1] - loops[k + 1][1]) * sk]
            })
            .collect();
        let pa = Matrix2::new(c[0][0], c[0][0] + c[2][0], c[0][1], c[0][1] + c[2][1]);
        let pb = Matrix2::new(c[1][0], c[3][0], c[1][1], c[3][1]);
        let g = &self.gamma;
        let (ga, gb, gc, gd) = (int_mat(&g.a()), int_mat(&g.b()), int_mat(&g.c()), int_mat(&g.d()));
        (pb * gc.transpose() + pa * gd.transpose(), pb * ga.transpose() + pa * gb.transpose())
    }

    /// Periods recomputed along a second family of homotopic paths: stems
    /// bent through an offset waypoint and smaller detour disks.
    pub fn periods_alternate(&self) -> (Matrix2<C64>, Matrix2<C64>) {
        let p = PathParams { gl: 24, piece: 0.2, circle: 0.2 };
        self.periods_from_loops(&self.lollipops(&p, 0.15))
    }

    /// Unnormalized Abel-Jacobi integral from infinity to `p`, continued
    /// along a tracked path (not reduced modulo periods).
    pub fn aj_raw(&self, p: &CurvePoint) -> Pair {
        self.aj_raw_with(p, &PathParams::STANDARD)
    }

    pub fn aj_raw_with(&self, p: &CurvePoint, params: &PathParams) -> Pair {
        let zero = C64::new(0.0, 0.0);
        let (x, y) = match *p {
            CurvePoint::Infinity => return [zero, zero],
            CurvePoint::Affine { x, y, .. } => (x, y),
        };
        let br = &self.branches;
        if x.norm() >= 2.0 * br.emax {
            let t = br.t_of(x, y);
            return br.t_segment(zero, t, params);
        }
        let traced = br.trace(self.base_x, self.base_y, &[x], PathEnd::Point(y), params);
        let mut v = [self.base_integral[0] + traced.integral[0], self.base_integral[1] + traced.integral[1]];
        if !traced.exact && (traced.y - y).norm() > (traced.y + y).norm() {
            // the path ended at the conjugate point
            v = [-v[0], -v[1]];
        }
        v
    }

    /// `A^-1` applied to a raw integral.
    pub fn normalize(&self, raw: &Pair) -> DVector<C64> {
        let v = self.a_inv * Vector2::new(raw[0], raw[1]);
        DVector::from_vec(vec![v[0], v[1]])
    }

    /// Abel-Jacobi image of `p` with base point infinity, reduced modulo
    /// the period lattice.
    pub fn abel_jacobi(&self, p: &CurvePoint) -> AbelianPoint {
        let z = self.normalize(&self.aj_raw(p));
        let (red, _, _) = self.tau.reduce_point(&z);
        AbelianPoint { z: red, tau: self.tau.clone() }
    }

    /// Abel-Jacobi image of an effective divisor.
    pub fn abel_jacobi_divisor(&self, d: &DivisorOnCurve) -> AbelianPoint {
        let mut z = DVector::from_element(2, C64::new(0.0, 0.0));
        for p in &d.points {
            z += self.abel_jacobi(p).z;
        }
        let (red, _, _) = self.tau.reduce_point(&z);
        AbelianPoint { z: red, tau: self.tau.clone() }
    }

    /// `AJ(d) - kappa`; lands on the theta divisor for effective degree-1 `d`.
    pub fn divisor_to_theta_point(&self, d: &DivisorOnCurve) -> Result<AbelianPoint> {
        if d.degree() != GENUS - 1 {
            return Err(Error::Domain(format!(
                "divisor has degree {} but the theta divisor parametrizes degree {}",
                d.degree(),
                GENUS - 1
            )));
        }
        let z = self.abel_jacobi_divisor(d).z - &self.kappa;
        let (red, _, _) = self.tau.reduce_point(&z);
        Ok(AbelianPoint { z: red, tau: self.tau.clone() })
    }

    fn find_riemann_constant(&self) -> Result<DVector<C64>> {
        let samples: Vec<DVector<C64>> = (0..8).map(|i| self.abel_jacobi(&self.sample_point(i, 1)).z).collect();
        let scale = self.theta.divisor_scale();
        let t = self.tau.tau();
        let mut best = (f64::INFINITY, DVector::from_element(2, C64::new(0.0, 0.0)));
        for code in 0..16u32 {
            let a = DVector::from_fn(2, |i, _| C64::new(((code >> i) & 1) as f64 * 0.5, 0.0));
            let b = DVector::from_fn(2, |i, _| C64::new(((code >> (2 + i)) & 1) as f64 * 0.5, 0.0));
            let kappa = a + t * b;
            let worst = samples.iter().map(|z| self.theta.norm((z - &kappa).as_slice()) / scale).fold(0.0, f64::max);
            if worst < best.0 {
                best = (worst, kappa);
            }
        }
        if best.0 > 1e-7 {
            return Err(Error::Inconsistent(format!(
                "no half-period aligns the curve with the theta divisor (best residual {:.3e})",
                best.0
            )));
        }
        Ok(best.1)
    }

    /// Largest `||theta||(AJ(P) - kappa) / scale` over `n` sample points;
    /// errors when it exceeds [`DIVISOR_AUDIT_TOL`].
    pub fn audit_divisor_images(&self, n: usize) -> Result<f64> {
        let scale = self.theta.divisor_scale();
        let worst = (0..n)
            .map(|i| {
                let z = self.abel_jacobi(&self.sample_point(i, 2)).z - &self.kappa;
                self.theta.norm(z.as_slice()) / scale
            })
            .fold(0.0, f64::max);
        if worst > DIVISOR_AUDIT_TOL {
            return Err(Error::Inconsistent(format!(
                "effective divisor image off the theta divisor (relative residual {worst:.3e})"
            )));
        }
        Ok(worst)
    }

    /// `phi(x) = M (1, x)^t`, coefficients of the orthonormal differentials.
    pub fn ortho_coefficients(&self, x: C64) -> Vector2<C64> {
        self.ortho * Vector2::new(C64::new(1.0, 0.0), x)
    }

    /// `(1, x)^H gram^-1 (1, x)`.
    fn hodge_weight(&self, v: Vector2<C64>) -> f64 {
        (v.adjoint() * self.gram_inv * v)[(0, 0)].re
    }

    /// Density of `nu` against Lebesgue measure in the x-chart.
    pub fn nu_density(&self, p: &CurvePoint) -> Result<f64> {
        let x =
            p.x().ok_or_else(|| Error::Domain("nu density is taken in the x-chart; infinity is not in it".into()))?;
        let f = self.branches.f(x).norm();
        if self.branches.dist(x) < 1e-12 || f == 0.0 {
            return Err(Error::Domain("nu density is singular at a branch point in the x-chart".into()));
        }
        Ok(self.hodge_weight(Vector2::new(C64::new(1.0, 0.0), x)) / (GENUS as f64 * f))
    }

    /// Density of `nu` in the u-chart of branch point `k`.
    pub fn nu_density_u(&self, k: usize, u: C64) -> f64 {
        let x = self.branches.e[k] + u * u;
        let h = self.branches.h(k, x);
        4.0 * self.hodge_weight(Vector2::new(C64::new(1.0, 0.0), x)) / (GENUS as f64 * h.norm_sqr())
    }

    /// Density of `nu` in the t-chart at infinity.
    pub fn nu_density_t(&self, t: C64) -> f64 {
        let s = self.branches.s(t);
        4.0 * self.hodge_weight(Vector2::new(t * t, C64::new(1.0, 0.0))) / (GENUS as f64 * s.norm_sqr())
    }

    /// Density of the pullback of `(i/2) sum (Y^-1)_jk dz_j ^ conj(dz_k)`
    /// under the Abel-Jacobi map, in the x-chart, from the derivative
    /// `dz/dx` supplied by the caller.
    pub fn pullback_density(&self, dzdx: &DVector<C64>) -> f64 {
        let yinv = self.tau.im_inverse();
        let mut acc = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                acc += yinv[(j, k)] * (dzdx[j] * dzdx[k].conj()).re;
            }
        }
        acc
    }

    /// Coefficient `W(x)` of the Wronskian `Wr(omega_1, omega_2) = W(x) dx^3`
    /// of the orthonormal differentials: `det M / f(x)`.
    pub fn wronskian_x(&self, x: C64) -> C64 {
        self.ortho.determinant() / self.branches.f(x)
    }

    /// The same section in the coordinate `w = 1/x`:
    /// `-det M / (w^6 f(1/w))`.
    pub fn wronskian_w(&self, w: C64) -> C64 {
        -self.ortho.determinant() / (w.powi(6) * self.branches.f(w.inv()))
    }
}

fn in_triangle(p: C64, a: C64, b: C64, c: C64) -> bool {
    let cross = |u: C64, v: C64| u.re * v.im - u.im * v.re;
    let d1 = cross(b - a, p - a);
    let d2 = cross(c - b, p - b);
    let d3 = cross(a - c, p - c);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}
