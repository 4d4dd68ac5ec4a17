//! The form `eta` on the theta divisor (determinant of the Hessian of theta
//! bordered by its gradient), its norm, and the Gauss map `z -> [theta_1 :
//! ... : theta_g]` on the smooth part of the divisor.

use nalgebra::{DMatrix, DVector};

use crate::curve::quadrature::{Estimate, Node, NuQuadrature, QuadratureConfig, DIVERGENCE_FLOOR};
use crate::curve::CurveModel;
use crate::error::{Error, Result};
use crate::numeric::{median, CompensatedSum};
use crate::siegel::{AbelianPoint, C64};
use crate::theta::{ThetaEvaluator, ThetaJet};

/// Relative tolerance for the on-divisor precondition of [`eta`].
pub const ON_DIVISOR_TOL: f64 = 1e-6;
/// Gradient norm below which a divisor point is treated as singular.
pub const SMOOTH_GRAD_MIN: f64 = 1e-8;
/// `||eta||` at or below this fraction of its Hadamard-type bound is
/// rounding noise and counts as zero.
pub const ETA_ZERO_REL: f64 = 1e-12;

/// `eta` at one point of the divisor.
#[derive(Debug, Clone)]
pub struct EtaValue {
    /// Bordered determinant of the scaled jet; the true value is this times
    /// `exp((g + 1) log_scale)`.
    pub eta: C64,
    pub log_scale: f64,
    /// `(det Y)^((g+5)/4) exp(-pi (g+1) y^t Y^-1 y) |eta|`.
    pub eta_norm: f64,
    /// `||theta||` at the point.
    pub theta_residual: f64,
    /// `(det Y)^((g+5)/4) |grad|^2 |H|^(g-1)` in the same scaling as
    /// `eta_norm`, which it bounds up to a constant.
    pub bound: f64,
    pub genus: usize,
}

impl EtaValue {
    /// `log ||eta||`, or minus infinity when `||eta||` is indistinguishable
    /// from zero.
    pub fn log_norm(&self) -> f64 {
        if self.eta_norm <= ETA_ZERO_REL * self.bound {
            f64::NEG_INFINITY
        } else {
            self.eta_norm.ln()
        }
    }

    pub fn eta_unscaled(&self) -> C64 {
        self.eta * ((self.genus + 1) as f64 * self.log_scale).exp()
    }
}

/// Projective point `[theta_1 : ... : theta_g]`, normalized to unit length
/// with its first nonzero coordinate real and positive.
#[derive(Debug, Clone)]
pub struct GaussPoint {
    pub coords: DVector<C64>,
}

impl GaussPoint {
    pub fn from_vector(v: &DVector<C64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::SingularPoint { grad_norm: n });
        }
        let mut coords = v.map(|c| c / n);
        if let Some(lead) = coords.iter().find(|c| c.norm() > 1e-12).copied() {
            let phase = lead.conj() / lead.norm();
            coords.iter_mut().for_each(|c| *c *= phase);
            // exact zero imaginary part on the leading coordinate
            if let Some(c) = coords.iter_mut().find(|c| c.norm() > 1e-12) {
                c.im = 0.0;
            }
        }
        Ok(Self { coords })
    }

    /// Distance between projective classes: `sqrt(1 - |<u, v>|^2)`.
    pub fn distance(&self, other: &GaussPoint) -> f64 {
        let ip = self.coords.dotc(&other.coords).norm();
        (1.0 - ip * ip).max(0.0).sqrt()
    }
}

/// Determinant of the bordered matrix `[[H, g], [g^t, 0]]` by LU.
pub fn bordered_determinant(hess: &DMatrix<C64>, grad: &DVector<C64>) -> C64 {
    let g = grad.len();
    let mut m = DMatrix::from_element(g + 1, g + 1, C64::new(0.0, 0.0));
    m.view_mut((0, 0), (g, g)).copy_from(hess);
    for i in 0..g {
        m[(i, g)] = grad[i];
        m[(g, i)] = grad[i];
    }
    m.lu().determinant()
}

fn small_det(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    match n {
        0 => C64::new(1.0, 0.0),
        1 => m[(0, 0)],
        _ => (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m[(0, j)] * small_det(&minor) * sign
            })
            .sum(),
    }
}

/// `-g^t adj(H) g`, the cofactor expansion of the bordered determinant.
pub fn bordered_by_cofactors(hess: &DMatrix<C64>, grad: &DVector<C64>) -> C64 {
    let g = grad.len();
    let adj = DMatrix::from_fn(g, g, |i, j| {
        let minor = hess.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        small_det(&minor) * sign
    });
    -(grad.transpose() * adj * grad)[(0, 0)]
}

/// `eta` from a jet already computed at the point; no divisor check.
pub fn eta_from_jet(ev: &ThetaEvaluator, jet: &ThetaJet) -> EtaValue {
    let g = jet.grad.len();
    let eta = bordered_determinant(&jet.hess, &jet.grad);
    let det_y = ev.tau().det_im();
    let norm_factor = det_y.powf((g + 5) as f64 / 4.0);
    let h = jet.hess.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    EtaValue {
        eta,
        log_scale: jet.log_scale,
        eta_norm: norm_factor * eta.norm(),
        theta_residual: det_y.powf(0.25) * jet.value.norm(),
        bound: norm_factor * jet.grad.norm_squared() * h.powi(g as i32 - 1),
        genus: g,
    }
}

/// `eta` at `z`, after checking that `z` lies on the divisor.
pub fn eta_with(ev: &ThetaEvaluator, z: &[C64]) -> Result<EtaValue> {
    let jet = ev.jet(z);
    let value = eta_from_jet(ev, &jet);
    if value.theta_residual > ON_DIVISOR_TOL * ev.divisor_scale() {
        return Err(Error::NotOnDivisor { residual: value.theta_residual });
    }
    Ok(value)
}

/// The bordered determinant `eta` and `||eta||` at a divisor point.
pub fn eta(p: &AbelianPoint, eps: f64) -> Result<EtaValue> {
    let ev = ThetaEvaluator::new(p.tau.clone(), eps)?;
    eta_with(&ev, p.z.as_slice())
}

pub fn gauss_map_with(ev: &ThetaEvaluator, z: &[C64]) -> Result<GaussPoint> {
    let (value, grad, _) = ev.gradient(z);
    let det_y = ev.tau().det_im();
    let residual = det_y.powf(0.25) * value.norm();
    if residual > ON_DIVISOR_TOL * ev.divisor_scale() {
        return Err(Error::NotOnDivisor { residual });
    }
    let n = grad.norm();
    if n < SMOOTH_GRAD_MIN {
        return Err(Error::SingularPoint { grad_norm: n });
    }
    GaussPoint::from_vector(&grad)
}

/// Gauss map at a smooth point of the divisor.
pub fn gauss_map(p: &AbelianPoint, eps: f64) -> Result<GaussPoint> {
    let ev = ThetaEvaluator::new(p.tau.clone(), eps)?;
    gauss_map_with(&ev, p.z.as_slice())
}

/// Reference size of `||eta||` on the divisor, taken from sample points.
///
/// Each sample contributes the Hadamard-type bound
/// `(det Y)^((g+5)/4) |grad|^2 |H|^(g-1)` of its bordered determinant; the
/// scale is the median. Unlike the median of `||eta||` itself this stays
/// positive when `eta` vanishes identically, so relative ramification tests
/// keep their meaning on products of lower-dimensional tori.
#[derive(Debug, Clone, Copy)]
pub struct EtaScale(pub f64);

impl EtaScale {
    pub fn from_samples(ev: &ThetaEvaluator, samples: &[DVector<C64>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("eta scale needs at least one sample".into()));
        }
        let mut bounds: Vec<f64> = samples.iter().map(|z| eta_from_jet(ev, &ev.jet(z.as_slice())).bound).collect();
        Ok(EtaScale(median(&mut bounds)))
    }
}

/// Whether `||eta||(p) <= tol * scale`, i.e. `p` is on the ramification
/// locus of the Gauss map. `p` must be a smooth divisor point.
pub fn is_ramified_with(ev: &ThetaEvaluator, z: &[C64], tol: f64, scale: EtaScale) -> Result<bool> {
    let jet = ev.jet(z);
    let value = eta_from_jet(ev, &jet);
    if value.theta_residual > ON_DIVISOR_TOL * ev.divisor_scale() {
        return Err(Error::NotOnDivisor { residual: value.theta_residual });
    }
    let gn = jet.grad.norm();
    if gn < SMOOTH_GRAD_MIN {
        return Err(Error::SingularPoint { grad_norm: gn });
    }
    Ok(value.eta_norm <= tol * scale.0)
}

pub fn is_ramified(p: &AbelianPoint, tol: f64, scale: EtaScale) -> Result<bool> {
    let ev = ThetaEvaluator::new(p.tau.clone(), crate::theta::DEFAULT_EPS)?;
    is_ramified_with(&ev, p.z.as_slice(), tol, scale)
}

/// `int log ||eta|| nu` over a genus-2 curve: the Gauss-map invariant of
/// its Jacobian, pulled back along `x -> AJ(x) - kappa`, which identifies
/// the curve with the theta divisor.
pub fn eta_invariant(c: &CurveModel, q: &QuadratureConfig) -> Result<Estimate> {
    eta_invariant_with(&NuQuadrature::new(c, *q), 1.0)
}

/// As [`eta_invariant`] on a prepared quadrature, with `||eta||` multiplied
/// by `factor`.
pub fn eta_invariant_with(quad: &NuQuadrature, factor: f64) -> Result<Estimate> {
    let c = quad.curve();
    if c.genus() != 2 {
        return Err(Error::UnsupportedGenus(c.genus()));
    }
    let ev = c.theta();
    let kappa = c.riemann_constant();
    let h = |n: &Node| -> f64 {
        let z = [n.z[0] - kappa[0], n.z[1] - kappa[1]];
        match eta_with(ev, &z) {
            Ok(v) => v.log_norm() + factor.ln(),
            Err(_) => f64::NAN,
        }
    };
    let est = quad.integrate(h, &c.weierstrass_points())?;
    if est.value < DIVERGENCE_FLOOR {
        return Err(Error::Divergent(format!("mean of log ||eta|| is {:.3e}", est.value)));
    }
    Ok(est)
}

/// Weighted mean of `log ||eta||` over divisor points `z` with weights `w`,
/// stopping with a divergence error as soon as the running mean falls below
/// [`DIVERGENCE_FLOOR`].
pub fn log_eta_mean(ev: &ThetaEvaluator, samples: &[(DVector<C64>, f64)]) -> Result<f64> {
    let mut sum = CompensatedSum::default();
    let mut total = 0.0;
    for (i, (z, w)) in samples.iter().enumerate() {
        let v = eta_with(ev, z.as_slice())?;
        sum.add(w * v.log_norm());
        total += w;
        let mean = sum.value() / total;
        if mean.is_nan() || mean < DIVERGENCE_FLOOR {
            return Err(Error::Divergent(format!("running mean of log ||eta|| is {mean:.3e} after {} samples", i + 1)));
        }
    }
    if total <= 0.0 {
        return Err(Error::Domain("log ||eta|| mean needs positive total weight".into()));
    }
    Ok(sum.value() / total)
}
