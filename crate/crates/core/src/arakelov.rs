//! The canonical Green's function of a genus-2 curve, the Arakelov metric,
//! Faltings' delta invariant, the function `||Lambda||` on the theta divisor
//! and residuals of the identities relating them to `||eta||`.
//!
//! Everything is built on the integral
//!
//! `B(R, S) = int_X log ||theta||(AJ(x) + AJ(R) - AJ(S) - kappa) nu(x)`,
//!
//! which equals `log G(R, S) - A` for a constant `A` of the curve. `A` is
//! fixed by requiring `int log G(P, Q) nu(Q) = 0`. The integrand of `B`
//! vanishes logarithmically at `x = S` and `x = sigma(R)`.
//!
//! # Tolerances
//!
//! Identities are judged against the constants below: results of a single
//! quadrature get [`TOL_SINGLE`], of nested quadratures [`TOL_NESTED`], of
//! limits [`TOL_LIMIT`].

use std::sync::OnceLock;

use crate::curve::quadrature::{Estimate, Node, NuQuadrature, Prepared, QuadratureConfig, SingularDisk};
use crate::curve::{involution, CurveModel, CurvePoint, DivisorOnCurve};
use crate::error::{Error, Result};
use crate::gaussmap::eta_with;
use crate::numeric::CompensatedSum;
use crate::siegel::C64;
use crate::theta::{DifferenceTable, TableFactors};

/// Tolerance for quantities downstream of one quadrature.
pub const TOL_SINGLE: f64 = 2e-2;
/// Tolerance for quantities downstream of nested quadratures.
pub const TOL_NESTED: f64 = 5e-2;
/// Tolerance for quantities downstream of limit extrapolations.
pub const TOL_LIMIT: f64 = 1e-1;
/// Torus distance to the Weierstrass images below which log identities are
/// not evaluated.
pub const EXCLUSION_RADIUS: f64 = 1e-2;
/// Bound on the relative standard deviation of `||Lambda||` over probes.
pub const LAMBDA_REL_STD: f64 = 1e-2;
/// Relative bound on the spread of delta estimates: `1e-3 (1 + |delta|)`.
pub const DELTA_SPREAD_REL: f64 = 1e-3;
/// Smallest admissible factor in the ratio defining `||Lambda||`.
pub const MIN_FACTOR: f64 = 1e-8;
/// Points closer than this are treated as equal in divisor products.
pub const SHARED_POINT: f64 = 1e-10;
/// Points closer than this make a Green's function evaluation near-diagonal.
pub const NEAR_DIAGONAL: f64 = 1e-6;

/// A curve point with its normalized, unreduced Abel-Jacobi image.
#[derive(Debug, Clone, Copy)]
pub struct Marked {
    pub point: CurvePoint,
    pub z: [C64; 2],
}

impl Marked {
    pub fn new(curve: &CurveModel, point: CurvePoint) -> Self {
        let z = curve.normalize(&curve.aj_raw(&point));
        Self { point, z: [z[0], z[1]] }
    }

    pub fn from_node(n: &Node) -> Self {
        Self { point: n.point, z: n.z }
    }

    pub fn involution(&self) -> Self {
        Self { point: involution(&self.point), z: [-self.z[0], -self.z[1]] }
    }
}

/// Bost's constant `A` with the data of its computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BostConstant {
    pub value: f64,
    /// Refinement error of `value`.
    pub error: f64,
    /// The same constant from a second base point.
    pub second: f64,
    pub second_error: f64,
}

/// Evaluates `B`, `log G` and `G` for one curve.
#[derive(Debug)]
pub struct GreenEvaluator<'c> {
    curve: &'c CurveModel,
    quad: NuQuadrature<'c>,
    /// Coarser quadrature for the inner and outer integrals of `A`.
    nested: NuQuadrature<'c>,
    table: DifferenceTable,
    kappa: [C64; 2],
    /// Table factors of the regular nodes, per level of `quad` and `nested`.
    factors: Vec<OnceLock<Vec<TableFactors>>>,
    nested_factors: Vec<OnceLock<Vec<TableFactors>>>,
    bost: BostConstant,
}

#[derive(Debug)]
struct FixedDisk {
    level: i32,
    /// 0 for the point `S` of `B(R, S)`, 1 for `sigma(R)`.
    index: usize,
    point: Marked,
    disk: SingularDisk,
    factors: Vec<TableFactors>,
    weights: Vec<f64>,
}

/// Node count of the nested quadrature relative to the main one.
const NESTED_FRACTION: usize = 4;
/// Levels of the nested quadrature giving `A` and its error.
const NESTED_FINE: i32 = 1;
const NESTED_COARSE: i32 = 0;

impl<'c> GreenEvaluator<'c> {
    /// Green's function with `A` computed from the normalization.
    pub fn new(curve: &'c CurveModel, config: QuadratureConfig) -> Result<Self> {
        let mut ge = Self::with_constant(curve, config, 0.0)?;
        ge.bost = ge.compute_bost()?;
        Ok(ge)
    }

    /// Green's function with a caller-supplied `A` (zero error).
    pub fn with_constant(curve: &'c CurveModel, config: QuadratureConfig, a: f64) -> Result<Self> {
        if curve.genus() != 2 {
            return Err(Error::UnsupportedGenus(curve.genus()));
        }
        if !a.is_finite() {
            return Err(Error::Domain(format!("Bost constant must be finite, got {a}")));
        }
        let nested_config =
            QuadratureConfig::new(config.seed, (config.n_nodes / NESTED_FRACTION).max(100), NESTED_FINE as usize + 1)?;
        let quad = NuQuadrature::new(curve, config);
        let nested = NuQuadrature::new(curve, nested_config);
        let levels = config.refinement_levels.max(NESTED_FINE as usize + 1) + 1;
        let kappa = curve.riemann_constant();
        Ok(Self {
            table: DifferenceTable::new(curve.theta()),
            kappa: [kappa[0], kappa[1]],
            factors: (0..levels).map(|_| OnceLock::new()).collect(),
            nested_factors: (0..levels).map(|_| OnceLock::new()).collect(),
            bost: BostConstant { value: a, error: 0.0, second: a, second_error: 0.0 },
            curve,
            quad,
            nested,
        })
    }

    pub fn curve(&self) -> &'c CurveModel {
        self.curve
    }

    pub fn quadrature(&self) -> &NuQuadrature<'c> {
        &self.quad
    }

    pub fn config(&self) -> &QuadratureConfig {
        self.quad.config()
    }

    pub fn bost(&self) -> &BostConstant {
        &self.bost
    }

    /// Bost's constant `A`.
    pub fn bost_a(&self) -> f64 {
        self.bost.value
    }

    pub fn mark(&self, p: &CurvePoint) -> Marked {
        Marked::new(self.curve, *p)
    }

    fn regular_factors(&self, nested: bool, level: i32) -> &[TableFactors] {
        let (quad, cache) = if nested { (&self.nested, &self.nested_factors) } else { (&self.quad, &self.factors) };
        cache[(level + 1) as usize]
            .get_or_init(|| quad.prepare(level, &[]).regular.iter().map(|n| self.table.factors(&n.z, false)).collect())
    }

    /// `log ||theta||(AJ(x) + AJ(R) - AJ(S) - kappa)` at node `x`.
    pub fn log_theta_shifted(&self, x: &[C64; 2], r: &Marked, s: &Marked) -> f64 {
        let z: Vec<C64> = (0..2).map(|i| x[i] + r.z[i] - s.z[i] - self.kappa[i]).collect();
        self.curve.theta().log_norm(&z)
    }

    /// `B(R, S)` at one level of the main (`nested = false`) or nested
    /// quadrature.
    pub fn bost_integral_level(&self, nested: bool, level: i32, r: &Marked, s: &Marked) -> Result<f64> {
        let quad = if nested { &self.nested } else { &self.quad };
        let sr = r.involution();
        let prepared = quad.prepare_at(level, &[(s.point, s.z), (sr.point, sr.z)]);
        self.sum_prepared(&prepared, self.regular_factors(nested, level), r, s)
    }

    fn sum_prepared(&self, prepared: &Prepared, regular: &[TableFactors], r: &Marked, s: &Marked) -> Result<f64> {
        let b: Vec<C64> = (0..2).map(|i| s.z[i] - r.z[i] + self.kappa[i]).collect();
        let fb = self.table.factors(&b, true);
        let mut acc = CompensatedSum::default();
        for (f, &w) in regular.iter().zip(&prepared.weights) {
            if w != 0.0 {
                acc.add(w * self.table.log_norm(f, &fb));
            }
        }
        for n in &prepared.disk {
            let fa = self.table.factors(&n.z, false);
            acc.add(n.weight * self.table.log_norm(&fa, &fb));
        }
        let v = acc.value();
        if !v.is_finite() {
            return Err(Error::Divergent(format!("Bost integral is {v}")));
        }
        Ok(v)
    }

    /// `B(R, S) = log G(R, S) - A`, with the refinement error of the main
    /// quadrature.
    pub fn bost_integral(&self, r: &Marked, s: &Marked) -> Result<Estimate> {
        let top = self.quad.top_level();
        let fine = self.bost_integral_level(false, top, r, s)?;
        let coarse = self.bost_integral_level(false, top - 1, r, s)?;
        Ok(Estimate { value: fine, error: (fine - coarse).abs() })
    }

    /// Disk of the nested quadrature at a singular point shared by many
    /// integrals, with its table factors and the damped regular weights.
    fn fixed_disk(&self, level: i32, index: usize, f: &Marked) -> FixedDisk {
        let disk = self.nested.singular_disk(level, index, &f.point, f.z, &[]);
        let factors = disk.nodes.iter().map(|n| self.table.factors(&n.z, false)).collect();
        let weights =
            self.nested.regular(level).iter().map(|n| n.weight * (1.0 - disk.psi(self.curve, &n.point))).collect();
        FixedDisk { level, index, point: *f, disk, factors, weights }
    }

    /// `B(R, S)` on the nested quadrature, where one of the singular points
    /// `S` (index 0) and `sigma(R)` (index 1) is the point of `fixed`.
    fn bost_integral_fixed(&self, fixed: &FixedDisk, r: &Marked, s: &Marked) -> Result<f64> {
        let level = fixed.level;
        let moving = if fixed.index == 0 { r.involution() } else { *s };
        if moving.point.distance(&fixed.point.point) < 1e-12 || fixed.disk.is_crowded_by(self.curve, &moving.point) {
            return self.bost_integral_level(true, level, r, s);
        }
        let disk = self.nested.singular_disk(level, 1 - fixed.index, &moving.point, moving.z, &[fixed.point.point]);
        let b: Vec<C64> = (0..2).map(|i| s.z[i] - r.z[i] + self.kappa[i]).collect();
        let fb = self.table.factors(&b, true);
        let regular = self.nested.regular(level);
        let factors = self.regular_factors(true, level);
        let mut acc = CompensatedSum::default();
        for ((n, f), &w0) in regular.iter().zip(factors).zip(&fixed.weights) {
            let w = w0 - n.weight * disk.psi(self.curve, &n.point);
            if w != 0.0 {
                acc.add(w * self.table.log_norm(f, &fb));
            }
        }
        for (n, f) in fixed.disk.nodes.iter().zip(&fixed.factors) {
            acc.add(n.weight * self.table.log_norm(f, &fb));
        }
        for n in &disk.nodes {
            acc.add(n.weight * self.table.log_norm(&self.table.factors(&n.z, false), &fb));
        }
        let v = acc.value();
        if !v.is_finite() {
            return Err(Error::Divergent(format!("Bost integral is {v}")));
        }
        Ok(v)
    }

    /// `int B(P, Q) nu(Q)` by nested quadrature at one level.
    pub fn bost_mean_level(&self, p: &Marked, level: i32) -> Result<f64> {
        let fixed = self.fixed_disk(level, 1, &p.involution());
        let outer = self.nested.prepare_at(level, &[(p.point, p.z)]);
        let mut acc = CompensatedSum::default();
        for (n, &w) in outer.regular.iter().zip(&outer.weights) {
            if w != 0.0 {
                acc.add(w * self.bost_integral_fixed(&fixed, p, &Marked::from_node(n))?);
            }
        }
        for n in &outer.disk {
            acc.add(n.weight * self.bost_integral_fixed(&fixed, p, &Marked::from_node(n))?);
        }
        Ok(acc.value())
    }

    /// `int B(P, Q) nu(Q)` at the fine nested level, with its difference to
    /// the coarse one.
    fn bost_mean(&self, p: &Marked) -> Result<Estimate> {
        let fine = self.bost_mean_level(p, NESTED_FINE)?;
        let coarse = self.bost_mean_level(p, NESTED_COARSE)?;
        Ok(Estimate { value: fine, error: (fine - coarse).abs() })
    }

    fn compute_bost(&self) -> Result<BostConstant> {
        let p1 = self.mark(&self.curve.sample_point(0, 7));
        let p2 = self.mark(&self.curve.sample_point(1, 7));
        let a1 = self.bost_mean(&p1)?;
        let a2 = self.bost_mean(&p2)?;
        let combined = a1.error.hypot(a2.error);
        if (a1.value - a2.value).abs() > 3.0 * combined {
            return Err(Error::Inconsistent(format!(
                "Bost constant from two base points differs by {:.3e} (combined error {combined:.3e})",
                (a1.value - a2.value).abs()
            )));
        }
        Ok(BostConstant { value: -a1.value, error: a1.error, second: -a2.value, second_error: a2.error })
    }

    /// `int log G(P, Q) nu(Q)`, which vanishes by the normalization of `G`.
    pub fn normalization_residual(&self, p: &CurvePoint) -> Result<Estimate> {
        let m = self.bost_mean(&self.mark(p))?;
        Ok(Estimate { value: m.value + self.bost.value, error: m.error.hypot(self.bost.error) })
    }

    /// `A` from the mean of `log ||Lambda||` over the curve, embedded in the
    /// theta divisor by `x -> AJ(x) - kappa`: with
    /// `log ||Lambda||(D) + 3A = log ||theta||(D + R - S) - B(R, S) - B(D, S) - B(sigma D, R)`
    /// and `A = -int log ||Lambda|| nu`, `A` is half the mean of the right
    /// side. The integrand is smooth in `D` since `Lambda` has no zeros.
    pub fn bost_crosscheck(&self, r: &CurvePoint, s: &CurvePoint) -> Result<Estimate> {
        let r = self.mark(r);
        let s = self.mark(s);
        let brs = self.bost_integral(&r, &s)?.value;
        let at = |level: i32| -> Result<f64> {
            let fixed_s = self.fixed_disk(level, 0, &s);
            let fixed_r = self.fixed_disk(level, 0, &r);
            let outer = self.nested.prepare_at(level, &[]);
            let mut acc = CompensatedSum::default();
            for (n, &w) in outer.regular.iter().zip(&outer.weights) {
                if w == 0.0 {
                    continue;
                }
                let d = Marked::from_node(n);
                let theta = self.log_theta_shifted(&d.z, &r, &s);
                let bds = self.bost_integral_fixed(&fixed_s, &d, &s)?;
                let bdr = self.bost_integral_fixed(&fixed_r, &d.involution(), &r)?;
                acc.add(w * (theta - brs - bds - bdr));
            }
            let v = 0.5 * acc.value();
            if !v.is_finite() {
                return Err(Error::Divergent(format!("mean of log ||Lambda|| is {v}")));
            }
            Ok(v)
        };
        let fine = at(NESTED_FINE)?;
        let coarse = at(NESTED_COARSE)?;
        Ok(Estimate { value: fine, error: (fine - coarse).abs() })
    }

    /// `log G(R, S)`; minus infinity for `R = S`.
    pub fn log_green(&self, r: &Marked, s: &Marked) -> Result<f64> {
        let d = r.point.distance(&s.point);
        if d == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if d < NEAR_DIAGONAL {
            log::warn!("Green's function evaluated {d:.1e} from the diagonal; accuracy is degraded");
        }
        Ok(self.bost_integral(r, s)?.value + self.bost.value)
    }

    /// `log G(R, S)` with the refinement error of the Bost integral and the
    /// error of `A` combined.
    pub fn log_green_estimate(&self, r: &Marked, s: &Marked) -> Result<Estimate> {
        if r.point.distance(&s.point) == 0.0 {
            return Ok(Estimate { value: f64::NEG_INFINITY, error: 0.0 });
        }
        let b = self.bost_integral(r, s)?;
        Ok(Estimate { value: b.value + self.bost.value, error: b.error.hypot(self.bost.error) })
    }

    /// `G(R, S)`.
    pub fn green(&self, r: &CurvePoint, s: &CurvePoint) -> Result<f64> {
        Ok(self.log_green(&self.mark(r), &self.mark(s))?.exp())
    }

    /// `log G(D, D') = sum_ij log G(P_i, Q_j)`; minus infinity when the
    /// divisors share a point.
    pub fn log_green_divisor(&self, d1: &DivisorOnCurve, d2: &DivisorOnCurve) -> Result<f64> {
        for p in &d1.points {
            for q in &d2.points {
                if p.distance(q) < SHARED_POINT {
                    return Ok(f64::NEG_INFINITY);
                }
            }
        }
        let m2: Vec<Marked> = d2.points.iter().map(|q| self.mark(q)).collect();
        let mut acc = 0.0;
        for p in &d1.points {
            let mp = self.mark(p);
            for mq in &m2 {
                acc += self.log_green(&mp, mq)?;
            }
        }
        Ok(acc)
    }

    /// `G(D, D') = prod_ij G(P_i, Q_j)`; exactly zero for a shared point.
    pub fn green_divisor(&self, d1: &DivisorOnCurve, d2: &DivisorOnCurve) -> Result<f64> {
        Ok(self.log_green_divisor(d1, d2)?.exp())
    }

    /// `log ||Lambda||(D, R, S) = log ||theta||(D + R - S) - log G(R, S)
    /// - log G(D, S) - log G(sigma D, R)` for a point `D`.
    ///
    /// Errors with [`Error::Degenerate`] when a factor is below
    /// [`MIN_FACTOR`].
    pub fn log_lambda(&self, d: &CurvePoint, r: &CurvePoint, s: &CurvePoint) -> Result<f64> {
        if r.distance(s) < SHARED_POINT {
            return Err(Error::Domain("the probe points of ||Lambda|| must differ".into()));
        }
        let (md, mr, ms) = (self.mark(d), self.mark(r), self.mark(s));
        let theta = self.log_theta_shifted(&md.z, &mr, &ms);
        let g_rs = self.log_green(&mr, &ms)?;
        let g_ds = self.log_green(&md, &ms)?;
        let g_dr = self.log_green(&md.involution(), &mr)?;
        let floor = MIN_FACTOR.ln();
        if [theta, g_rs, g_ds, g_dr].iter().any(|v| *v < floor) {
            return Err(Error::Degenerate(format!(
                "a factor of ||Lambda|| is below {MIN_FACTOR:e} (log values {theta:.3}, {g_rs:.3}, {g_ds:.3}, {g_dr:.3})"
            )));
        }
        Ok(theta - g_rs - g_ds - g_dr)
    }

    /// Quasi-random probe pairs `(R, S)` for `||Lambda||`.
    pub fn probe_pair(&self, index: usize, salt: usize) -> (CurvePoint, CurvePoint) {
        (self.curve.sample_point(2 * index, 11 + salt), self.curve.sample_point(2 * index + 1, 11 + salt))
    }

    /// `log ||Lambda||(D)` with the first admissible probe pair.
    pub fn log_lambda_auto(&self, d: &CurvePoint, salt: usize) -> Result<f64> {
        for i in 0..PROBE_ATTEMPTS {
            let (r, s) = self.probe_pair(i, salt);
            match self.log_lambda(d, &r, &s) {
                Err(Error::Degenerate(_)) => continue,
                other => return other,
            }
        }
        Err(Error::Degenerate(format!(
            "every probe pair for ||Lambda|| hit a zero locus after {PROBE_ATTEMPTS} attempts"
        )))
    }
}

/// Probe pairs tried before a divisor is declared degenerate.
const PROBE_ATTEMPTS: usize = 16;

/// `||Lambda||(D, R, S)` for a degree-1 divisor.
pub fn lambda_norm(ge: &GreenEvaluator, d: &DivisorOnCurve, r: &CurvePoint, s: &CurvePoint) -> Result<f64> {
    Ok(ge.log_lambda(&single_point(d)?, r, s)?.exp())
}

/// `G(D, D')`.
pub fn green_divisor(ge: &GreenEvaluator, d1: &DivisorOnCurve, d2: &DivisorOnCurve) -> Result<f64> {
    ge.green_divisor(d1, d2)
}

/// `G(R, S)`.
pub fn green(ge: &GreenEvaluator, r: &CurvePoint, s: &CurvePoint) -> Result<f64> {
    ge.green(r, s)
}

/// Bost's constant of `c` at quadrature `q`.
pub fn bost_constant(c: &CurveModel, q: &QuadratureConfig) -> Result<BostConstant> {
    Ok(*GreenEvaluator::new(c, *q)?.bost())
}

fn single_point(d: &DivisorOnCurve) -> Result<CurvePoint> {
    if d.degree() != 1 {
        return Err(Error::Domain(format!(
            "genus-2 theta divisor points are divisors of degree 1, got degree {}",
            d.degree()
        )));
    }
    Ok(d.points[0])
}

/// Local coordinate in which `||dz||_Ar` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalChart {
    /// `z = x`.
    X,
    /// `z = 1/x`.
    InverseX,
}

/// Initial step of the limit defining the Arakelov metric.
pub const METRIC_INITIAL_STEP: f64 = 1e-2;
/// Default number of halvings of the step.
pub const METRIC_STEPS: usize = 4;

/// The Arakelov metric on the canonical bundle,
/// `||dz||_Ar(P) = lim_{Q -> P} |z(P) - z(Q)| / G(P, Q)`.
#[derive(Debug, Clone, Copy)]
pub struct ArakelovMetric<'g, 'c> {
    green: &'g GreenEvaluator<'c>,
    steps: usize,
    initial_step: f64,
}

impl<'g, 'c> ArakelovMetric<'g, 'c> {
    pub fn new(green: &'g GreenEvaluator<'c>, extrapolation_steps: usize) -> Result<Self> {
        if extrapolation_steps < 3 {
            return Err(Error::Domain(format!("extrapolation needs at least 3 steps, got {extrapolation_steps}")));
        }
        Ok(Self { green, steps: extrapolation_steps, initial_step: METRIC_INITIAL_STEP })
    }

    pub fn with_initial_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain(format!("initial step must be in (0, 1), got {h}")));
        }
        self.initial_step = h;
        Ok(self)
    }

    pub fn green(&self) -> &'g GreenEvaluator<'c> {
        self.green
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The point with chart coordinate `z(P) + h`, continued along the sheet.
    fn neighbour(&self, x: C64, y: C64, chart: LocalChart, h: C64) -> Result<CurvePoint> {
        let curve = self.green.curve;
        let br = curve.branches();
        let xq = match chart {
            LocalChart::X => x + h,
            LocalChart::InverseX => (x.inv() + h).inv(),
        };
        if 2.0 * (xq - x).norm() >= br.dist(x) {
            return Err(Error::Domain(format!(
                "point at distance {:.3e} from a branch point is too close for step {:.1e}",
                br.dist(x),
                h.norm()
            )));
        }
        Ok(curve.point_unchecked(xq, br.y_continue(x, y, xq)))
    }

    /// `log |z(P) - z(Q_h)| - log G(P, Q_h)` averaged over `Q_{+h}`, `Q_{-h}`.
    fn difference_quotient(&self, p: &Marked, x: C64, y: C64, chart: LocalChart, h: f64) -> Result<f64> {
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let q = self.green.mark(&self.neighbour(x, y, chart, C64::new(sign * h, 0.0))?);
            acc += h.ln() - self.green.log_green(p, &q)?;
        }
        Ok(0.5 * acc)
    }

    /// `log ||dz||_Ar(P)` by Richardson extrapolation over `h, h/2, ...`;
    /// the error is the last change of the extrapolated value.
    pub fn log_dz_norm(&self, p: &CurvePoint, chart: LocalChart) -> Result<Estimate> {
        let (x, y) = match *p {
            CurvePoint::Affine { x, y, .. } => (x, y),
            CurvePoint::Infinity => return Err(Error::Domain("the Arakelov metric is taken in a finite chart".into())),
        };
        if chart == LocalChart::InverseX && x.norm() == 0.0 {
            return Err(Error::Domain("x = 0 is outside the 1/x chart".into()));
        }
        let mp = self.green.mark(p);
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(self.steps);
        let mut diag = Vec::with_capacity(self.steps);
        for k in 0..self.steps {
            let h = self.initial_step * 0.5f64.powi(k as i32);
            let mut row = vec![self.difference_quotient(&mp, x, y, chart, h)?];
            for j in 1..=k {
                let f = 4f64.powi(j as i32);
                row.push(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (f - 1.0));
            }
            diag.push(row[k]);
            table.push(row);
        }
        let changes: Vec<f64> = diag.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let last = changes[changes.len() - 1];
        let before = changes[changes.len() - 2];
        if last > before && last > METRIC_NOISE {
            return Err(Error::Convergence(format!(
                "Arakelov metric extrapolation is not settling (changes {before:.2e} then {last:.2e})"
            )));
        }
        Ok(Estimate { value: diag[self.steps - 1], error: last })
    }

    /// `||dz||_Ar(P)`.
    pub fn dz_norm(&self, p: &CurvePoint, chart: LocalChart) -> Result<f64> {
        Ok(self.log_dz_norm(p, chart)?.value.exp())
    }

    /// `log ||Wr(omega_1, omega_2)||_Ar(P) = log |W(z)| + 3 log ||dz||_Ar(P)`
    /// for the Wronskian `W(z) dz^3` of the orthonormal differentials.
    pub fn log_wronskian_norm(&self, p: &CurvePoint, chart: LocalChart) -> Result<Estimate> {
        let x = p.x().ok_or_else(|| Error::Domain("the Wronskian is taken in a finite chart".into()))?;
        let curve = self.green.curve;
        let w = match chart {
            LocalChart::X => curve.wronskian_x(x),
            LocalChart::InverseX => curve.wronskian_w(x.inv()),
        };
        let dz = self.log_dz_norm(p, chart)?;
        Ok(Estimate { value: w.norm().ln() + 3.0 * dz.value, error: 3.0 * dz.error })
    }
}

/// Changes of the extrapolated metric below this are quadrature noise.
const METRIC_NOISE: f64 = 1e-4;

/// `||dz||_Ar(P)` in the x-chart with the default number of steps.
pub fn arakelov_dz_norm(m: &ArakelovMetric, p: &CurvePoint) -> Result<f64> {
    m.dz_norm(p, LocalChart::X)
}

/// `|det (omega_i(P_j))|` in the x-chart of every point, for the
/// orthonormal differentials `omega_i = phi_i(x) dx / y`.
pub fn ortho_determinant(curve: &CurveModel, points: &[CurvePoint]) -> Result<f64> {
    if points.len() != 2 {
        return Err(Error::Domain(format!("expected 2 points, got {}", points.len())));
    }
    let mut cols = Vec::new();
    for p in points {
        match *p {
            CurvePoint::Affine { x, y, .. } => {
                if y.norm() == 0.0 {
                    return Err(Error::Domain(
                        "orthonormal differentials in the x-chart are singular at a branch point".into(),
                    ));
                }
                let phi = curve.ortho_coefficients(x);
                cols.push([phi[0] / y, phi[1] / y]);
            }
            CurvePoint::Infinity => return Err(Error::Domain("point at infinity is not in the x-chart".into())),
        }
    }
    Ok((cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1]).norm())
}

/// Delta estimates from several tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    /// Mean over tuples.
    pub value: f64,
    /// Largest deviation of a tuple from the mean.
    pub spread: f64,
    pub samples: Vec<f64>,
    /// Largest propagated quadrature and extrapolation error of a tuple.
    pub error: f64,
}

/// Smallest pairwise distance between the points of a delta tuple.
pub const TUPLE_MIN_DISTANCE: f64 = 1e-3;

/// Faltings' delta from one tuple `(P_1, P_2, Q)`:
/// `-8 [log ||theta||(P_1 + P_2 - Q) - log ||det omega_i(P_j)||_Ar
/// + log G(P_1, P_2) - log G(P_1, Q) - log G(P_2, Q)]`.
pub fn delta_tuple(m: &ArakelovMetric, p1: &CurvePoint, p2: &CurvePoint, q: &CurvePoint) -> Result<Estimate> {
    let ge = m.green;
    let curve = ge.curve;
    let pts = [*p1, *p2, *q];
    for i in 0..3 {
        for j in i + 1..3 {
            if pts[i].distance(&pts[j]) < TUPLE_MIN_DISTANCE {
                return Err(Error::Degenerate(format!("tuple points {i} and {j} nearly coincide")));
            }
        }
    }
    let (m1, m2, mq) = (ge.mark(p1), ge.mark(p2), ge.mark(q));
    let z: Vec<C64> = (0..2).map(|i| m1.z[i] + m2.z[i] - mq.z[i] - ge.kappa[i]).collect();
    let theta = curve.theta().log_norm(&z);
    let det = ortho_determinant(curve, &[*p1, *p2])?.ln();
    let n1 = m.log_dz_norm(p1, LocalChart::X)?;
    let n2 = m.log_dz_norm(p2, LocalChart::X)?;
    let g12 = ge.log_green_estimate(&m1, &m2)?;
    let g1q = ge.log_green_estimate(&m1, &mq)?;
    let g2q = ge.log_green_estimate(&m2, &mq)?;
    let value = -8.0 * (theta - det - n1.value - n2.value + g12.value - g1q.value - g2q.value);
    let error = 8.0 * (n1.error + n2.error + g12.error + g1q.error + g2q.error);
    if !value.is_finite() {
        return Err(Error::Degenerate("delta tuple lies on a zero locus".into()));
    }
    Ok(Estimate { value, error })
}

/// Tuples drawn before [`delta`] gives up.
const TUPLE_ATTEMPTS: usize = 64;

/// Faltings' delta from `n_tuples` quasi-random tuples; tuples closer than
/// [`TUPLE_MIN_DISTANCE`] to a degenerate configuration are redrawn.
pub fn delta(m: &ArakelovMetric, n_tuples: usize, salt: usize) -> Result<DeltaEstimate> {
    if n_tuples < 3 {
        return Err(Error::Domain(format!("delta needs at least 3 tuples, got {n_tuples}")));
    }
    let curve = m.green.curve;
    let mut samples = Vec::new();
    let mut error: f64 = 0.0;
    let mut index = 0;
    while samples.len() < n_tuples {
        if index >= TUPLE_ATTEMPTS {
            return Err(Error::Degenerate(format!(
                "only {} admissible delta tuples in {TUPLE_ATTEMPTS} draws",
                samples.len()
            )));
        }
        let pts: Vec<CurvePoint> = (0..3).map(|k| curve.sample_point(3 * index + k, 23 + salt)).collect();
        index += 1;
        match delta_tuple(m, &pts[0], &pts[1], &pts[2]) {
            Ok(e) => {
                samples.push(e.value);
                error = error.max(e.error);
            }
            Err(Error::Degenerate(_)) | Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let value = samples.iter().sum::<f64>() / samples.len() as f64;
    let spread = samples.iter().map(|v| (v - value).abs()).fold(0.0, f64::max);
    Ok(DeltaEstimate { value, spread, samples, error })
}

/// Invariants of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveInvariants {
    pub delta: f64,
    pub delta_spread: f64,
    /// Delta from each tuple.
    pub delta_samples: Vec<f64>,
    pub bost_a: f64,
    pub bost_a_crosscheck: f64,
    pub eta_integral: f64,
    pub errors: InvariantErrors,
}

/// Error estimates of [`CurveInvariants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantErrors {
    pub delta: f64,
    pub bost_a: f64,
    pub bost_a_crosscheck: f64,
    pub eta_integral: f64,
}

/// Delta from 5 tuples, `A` both ways and the `eta` integral.
pub fn curve_invariants(m: &ArakelovMetric, n_tuples: usize) -> Result<CurveInvariants> {
    let ge = m.green;
    let d = delta(m, n_tuples, 0)?;
    let (r, s) = ge.probe_pair(0, 100);
    let cross = ge.bost_crosscheck(&r, &s)?;
    let eta = crate::gaussmap::eta_invariant_with(&ge.quad, 1.0)?;
    Ok(CurveInvariants {
        delta: d.value,
        delta_spread: d.spread,
        delta_samples: d.samples,
        bost_a: ge.bost.value,
        bost_a_crosscheck: cross.value,
        eta_integral: eta.value,
        errors: InvariantErrors {
            delta: d.error,
            bost_a: ge.bost.error,
            bost_a_crosscheck: cross.error,
            eta_integral: eta.error,
        },
    })
}

/// Both sides of an identity and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Residual {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, residual: lhs - rhs }
    }
}

/// Torus distance from `AJ(D) - kappa` to the nearest Weierstrass image.
pub fn ramification_distance(curve: &CurveModel, d: &CurvePoint) -> Result<f64> {
    let z = curve.divisor_to_theta_point(&DivisorOnCurve::point(*d))?.z;
    let tau = curve.tau();
    let mut best = f64::INFINITY;
    for w in curve.weierstrass_points() {
        let zw = curve.divisor_to_theta_point(&DivisorOnCurve::point(w))?.z;
        best = best.min(tau.torus_distance(&z, &zw));
    }
    Ok(best)
}

fn log_eta_at(curve: &CurveModel, d: &CurvePoint) -> Result<f64> {
    let z = curve.divisor_to_theta_point(&DivisorOnCurve::point(*d))?;
    Ok(eta_with(curve.theta(), z.z.as_slice())?.log_norm())
}

fn check_admissible(curve: &CurveModel, d: &CurvePoint) -> Result<()> {
    let dist = ramification_distance(curve, d)?;
    if dist < EXCLUSION_RADIUS {
        return Err(Error::Excluded(format!(
            "divisor is {dist:.2e} from the ramification locus (exclusion radius {EXCLUSION_RADIUS:e})"
        )));
    }
    Ok(())
}

/// `log ||eta||(D) - [-delta/4 + log ||Lambda||(D) + log G(D, sigma D)]`.
pub fn verify_main_theorem(ge: &GreenEvaluator, inv: &CurveInvariants, d: &DivisorOnCurve) -> Result<Residual> {
    main_theorem_with(ge, inv, d, 0)
}

/// As [`verify_main_theorem`], with `||Lambda||` probed from the pair list
/// selected by `salt`.
pub fn main_theorem_with(
    ge: &GreenEvaluator,
    inv: &CurveInvariants,
    d: &DivisorOnCurve,
    salt: usize,
) -> Result<Residual> {
    let p = single_point(d)?;
    check_admissible(ge.curve, &p)?;
    let lhs = log_eta_at(ge.curve, &p)?;
    let lambda = ge.log_lambda_auto(&p, salt)?;
    let mp = ge.mark(&p);
    let g = ge.log_green(&mp, &mp.involution())?;
    Ok(Residual::new(lhs, -inv.delta / 4.0 + lambda + g))
}

/// `log ||eta||(P) - [-3 delta/8 + log ||Wr||_Ar(P)]`.
pub fn verify_wronskian_lemma(
    m: &ArakelovMetric,
    inv: &CurveInvariants,
    p: &CurvePoint,
    chart: LocalChart,
) -> Result<Residual> {
    let curve = m.green.curve;
    check_admissible(curve, p)?;
    let lhs = log_eta_at(curve, p)?;
    let w = m.log_wronskian_norm(p, chart)?;
    if w.value < MIN_FACTOR.ln() {
        return Err(Error::Excluded(format!("Wronskian norm {:.3e} is below {MIN_FACTOR:e}", w.value.exp())));
    }
    Ok(Residual::new(lhs, -3.0 * inv.delta / 8.0 + w.value))
}

/// `zeta(D) = delta/4 - log ||Lambda||(D)`.
pub fn zeta(ge: &GreenEvaluator, inv: &CurveInvariants, d: &CurvePoint) -> Result<f64> {
    Ok(inv.delta / 4.0 - ge.log_lambda_auto(d, 0)?)
}
