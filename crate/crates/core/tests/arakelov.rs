mod common;

use std::sync::OnceLock;

use common::*;
use thetadiv::arakelov::*;
use thetadiv::curve::quadrature::QuadratureConfig;
use thetadiv::curve::{build_curve, CurveModel, CurvePoint, DivisorOnCurve};
use thetadiv::{Error, C64};

fn config(seed: u64) -> QuadratureConfig {
    QuadratureConfig::new(seed, 4000, 4).unwrap()
}

fn curve() -> &'static CurveModel {
    static CURVE: OnceLock<CurveModel> = OnceLock::new();
    CURVE.get_or_init(|| build_curve(&x5_minus_x()).unwrap())
}

/// Green's function of `x^5 - x` with Bost's constant computed.
fn green() -> &'static GreenEvaluator<'static> {
    static GREEN: OnceLock<GreenEvaluator<'static>> = OnceLock::new();
    GREEN.get_or_init(|| GreenEvaluator::new(curve(), config(0)).unwrap())
}

/// Green's function up to the additive constant, for checks where `A` cancels.
fn green_shifted() -> &'static GreenEvaluator<'static> {
    static GREEN: OnceLock<GreenEvaluator<'static>> = OnceLock::new();
    GREEN.get_or_init(|| GreenEvaluator::with_constant(curve(), config(0), 0.0).unwrap())
}

fn invariants() -> &'static CurveInvariants {
    static INV: OnceLock<CurveInvariants> = OnceLock::new();
    INV.get_or_init(|| {
        let m = ArakelovMetric::new(green(), METRIC_STEPS).unwrap();
        curve_invariants(&m, 5).unwrap()
    })
}

fn f(curve: &CurveModel, x: C64) -> C64 {
    curve.f_coeffs().iter().rev().fold(c(0.0, 0.0), |acc, a| acc * x + a)
}

/// The point over `x` on the sheet whose `y` is closest to `y_prev`.
fn continued(curve: &CurveModel, x: C64, y_prev: C64) -> CurvePoint {
    let y = f(curve, x).sqrt();
    let y = if (y - y_prev).norm() <= (y + y_prev).norm() { y } else { -y };
    curve.point_xy(x, y).unwrap()
}

fn log_green(ge: &GreenEvaluator, r: &CurvePoint, s: &CurvePoint) -> f64 {
    ge.log_green(&ge.mark(r), &ge.mark(s)).unwrap()
}

#[test]
fn green_is_symmetric() {
    let ge = green_shifted();
    for i in 0..10 {
        let r = curve().sample_point(2 * i, 41);
        let s = curve().sample_point(2 * i + 1, 41);
        let (a, b) = (log_green(ge, &r, &s), log_green(ge, &s, &r));
        assert!((a - b).abs() <= TOL_SINGLE, "pair {i}: {a} vs {b}");
    }
}

#[test]
fn green_vanishes_exactly_on_the_diagonal() {
    let p = curve().sample_point(0, 41);
    assert_eq!(green_shifted().green(&p, &p).unwrap(), 0.0);
}

#[test]
fn green_integrates_to_zero() {
    for i in 0..3 {
        let p = curve().sample_point(i, 43);
        let r = green().normalization_residual(&p).unwrap();
        assert!(r.value.abs() <= TOL_SINGLE, "P {i}: {r:?}");
    }
}

#[test]
fn green_ratio_matches_theta_factorization() {
    let c = curve();
    let ge = green_shifted();
    let kappa = c.riemann_constant();
    for i in 0..4 {
        let pts: Vec<CurvePoint> = (0..4).map(|k| c.sample_point(4 * i + k, 47)).collect();
        let (p1, p2, q, q2) = (&pts[0], &pts[1], &pts[2], &pts[3]);
        let lhs = log_green(ge, p1, q) + log_green(ge, p2, q) - log_green(ge, p1, q2) - log_green(ge, p2, q2);
        let theta = |q: &CurvePoint| {
            let z = c.abel_jacobi(p1).z + c.abel_jacobi(p2).z - c.abel_jacobi(q).z - kappa;
            c.theta().log_norm(z.as_slice())
        };
        let rhs = theta(q) - theta(q2);
        assert!((lhs - rhs).abs() <= TOL_SINGLE, "tuple {i}: {lhs} vs {rhs}");
    }
}

#[test]
fn green_laplacian_is_the_curvature_form() {
    let c = curve();
    // the stencil amplifies quadrature error by 1/h^2; one more level keeps it in budget
    let ge = GreenEvaluator::with_constant(c, QuadratureConfig::new(0, 4000, 5).unwrap(), 0.0).unwrap();
    let ge = &ge;
    let p = c.sample_point(0, 53);
    let h = 1e-3;
    for i in 0..10 {
        let q = c.sample_point(i, 59);
        if q.distance(&p) < 0.2 {
            continue;
        }
        let (x, y) = (q.x().unwrap(), q.y().unwrap());
        let at = |dx: C64| log_green(ge, &p, &continued(c, x + dx, y));
        let lap = (at(c64(h, 0.0)) + at(c64(-h, 0.0)) + at(c64(0.0, h)) + at(c64(0.0, -h)) - 4.0 * at(c64(0.0, 0.0)))
            / (h * h);
        let expected = -2.0 * std::f64::consts::PI * c.nu_density(&q).unwrap();
        assert!((lap - expected).abs() <= TOL_NESTED * expected.abs(), "point {i}: {lap} vs {expected}");
    }
}

fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn bost_constant_is_base_point_independent() {
    let a = green().bost();
    assert!(a.value.is_finite());
    assert!((a.value - a.second).abs() <= 3.0 * a.error.hypot(a.second_error), "{a:?}");
}

#[test]
fn bost_constant_matches_lambda_integral() {
    let ge = green();
    let (r, s) = ge.probe_pair(0, 100);
    let cross = ge.bost_crosscheck(&r, &s).unwrap();
    assert!((cross.value - ge.bost_a()).abs() <= TOL_NESTED, "{cross:?} vs {}", ge.bost_a());
}

#[test]
fn bost_constant_and_delta_are_seed_stable() {
    let other = GreenEvaluator::new(curve(), config(7)).unwrap();
    let (a, b) = (green().bost(), other.bost());
    assert!((a.value - b.value).abs() <= 2.0 * a.error.hypot(b.error), "{a:?} vs {b:?}");

    let d0 = delta(&ArakelovMetric::new(green(), METRIC_STEPS).unwrap(), 3, 0).unwrap();
    let d1 = delta(&ArakelovMetric::new(&other, METRIC_STEPS).unwrap(), 3, 0).unwrap();
    assert!((d0.value - d1.value).abs() <= 3.0 * d0.error.hypot(d1.error), "{d0:?} vs {d1:?}");
}

#[test]
fn metric_needs_three_steps() {
    assert!(matches!(ArakelovMetric::new(green_shifted(), 2), Err(Error::Domain(_))));
}

#[test]
fn metric_transforms_as_a_norm_on_differentials() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    for i in 0..4 {
        let p = curve().sample_point(i, 61);
        let x = p.x().unwrap();
        let dx = m.log_dz_norm(&p, LocalChart::X).unwrap().value;
        let dw = m.log_dz_norm(&p, LocalChart::InverseX).unwrap().value;
        // dw = -dx / x^2
        assert!((dw - (dx - 2.0 * x.norm().ln())).abs() <= 1e-3, "point {i}");
    }
}

#[test]
fn metric_is_positive() {
    let m = ArakelovMetric::new(green(), 3).unwrap();
    for i in 0..20 {
        let p = curve().sample_point(i, 67);
        let v = m.dz_norm(&p, LocalChart::X).unwrap();
        assert!(v > 0.0 && v.is_finite(), "point {i}: {v}");
    }
}

#[test]
fn metric_is_stable_under_halving_the_initial_step() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    let half = m.with_initial_step(0.5 * METRIC_INITIAL_STEP).unwrap();
    for i in 0..3 {
        let p = curve().sample_point(i, 71);
        let a = m.dz_norm(&p, LocalChart::X).unwrap();
        let b = half.dz_norm(&p, LocalChart::X).unwrap();
        assert!((a - b).abs() <= 1e-3 * a, "point {i}: {a} vs {b}");
    }
}

#[test]
fn metric_rejects_points_near_branch_points() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    let p = curve().point(c64(1.0 + 1e-3, 0.0), 1);
    assert!(matches!(m.log_dz_norm(&p, LocalChart::X), Err(Error::Domain(_))));
}

#[test]
fn delta_is_tuple_independent() {
    let inv = invariants();
    assert!(inv.delta.is_finite());
    assert!(inv.delta_spread <= DELTA_SPREAD_REL * (1.0 + inv.delta.abs()), "{inv:?}");
}

#[test]
fn delta_is_invariant_under_relabeling() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    let pts: Vec<CurvePoint> = (0..3).map(|k| curve().sample_point(k, 73)).collect();
    let a = delta_tuple(&m, &pts[0], &pts[1], &pts[2]).unwrap().value;
    let b = delta_tuple(&m, &pts[1], &pts[0], &pts[2]).unwrap().value;
    assert!((a - b).abs() <= DELTA_SPREAD_REL * (1.0 + a.abs()), "{a} vs {b}");
}

#[test]
fn delta_rejects_too_few_tuples() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    assert!(matches!(delta(&m, 2, 0), Err(Error::Domain(_))));
}

#[test]
fn lambda_is_independent_of_probe_points() {
    let ge = green();
    for k in 0..2 {
        let d = curve().sample_point(k, 79);
        let values: Vec<f64> = (0..20)
            .map(|i| {
                let (r, s) = ge.probe_pair(i, 0);
                lambda_norm(ge, &DivisorOnCurve::point(d), &r, &s).unwrap()
            })
            .collect();
        assert!(values.iter().all(|v| *v > 0.0));
        let mean = values.iter().sum::<f64>() / 20.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0;
        assert!(var.sqrt() <= LAMBDA_REL_STD * mean, "divisor {k}: {values:?}");
    }
}

#[test]
fn lambda_is_symmetric_under_the_involution() {
    let ge = green_shifted();
    for i in 0..3 {
        let d = DivisorOnCurve::point(curve().sample_point(i, 83));
        let (r, s) = ge.probe_pair(i, 3);
        let a = lambda_norm(ge, &d, &r, &s).unwrap().ln();
        let b = lambda_norm(ge, &d.involution(), &s, &r).unwrap().ln();
        assert!((a - b).abs() <= TOL_SINGLE, "divisor {i}: {a} vs {b}");
    }
}

#[test]
fn lambda_rejects_coincident_probes() {
    let ge = green_shifted();
    let d = DivisorOnCurve::point(curve().sample_point(0, 83));
    let r = curve().sample_point(1, 83);
    assert!(matches!(lambda_norm(ge, &d, &r, &r), Err(Error::Domain(_))));
}

#[test]
fn divisor_green_vanishes_exactly_on_shared_points() {
    let ge = green_shifted();
    let pts: Vec<CurvePoint> = (0..4).map(|k| curve().sample_point(k, 89)).collect();
    let d1 = DivisorOnCurve::new(vec![pts[0], pts[1]]);
    let d2 = DivisorOnCurve::new(vec![pts[1], pts[2]]);
    let d3 = DivisorOnCurve::new(vec![pts[2], pts[3]]);
    assert_eq!(green_divisor(ge, &d1, &d2).unwrap(), 0.0);
    assert!(green_divisor(ge, &d1, &d3).unwrap() > 0.0);
}

#[test]
fn divisor_green_is_multiplicative_and_symmetric() {
    let ge = green_shifted();
    let pts: Vec<CurvePoint> = (0..5).map(|k| curve().sample_point(k, 97)).collect();
    let d1 = DivisorOnCurve::point(pts[0]);
    let d2 = DivisorOnCurve::new(vec![pts[1], pts[2]]);
    let e = DivisorOnCurve::new(vec![pts[3], pts[4]]);
    let whole = green_divisor(ge, &d1.plus(&d2), &e).unwrap();
    let parts = green_divisor(ge, &d1, &e).unwrap() * green_divisor(ge, &d2, &e).unwrap();
    assert!((whole - parts).abs() <= 1e-10 * whole);
    let a = ge.log_green_divisor(&d2, &e).unwrap();
    let b = ge.log_green_divisor(&e, &d2).unwrap();
    assert!((a - b).abs() <= TOL_SINGLE);
}

#[test]
fn main_theorem_holds_at_admissible_divisors() {
    let ge = green();
    let inv = invariants();
    let mut checked = 0;
    for i in 0..30 {
        let d = DivisorOnCurve::point(curve().sample_point(i, 101));
        match verify_main_theorem(ge, inv, &d) {
            Ok(r) => {
                assert!(r.residual.abs() <= TOL_NESTED, "divisor {i}: {r:?}");
                checked += 1;
            }
            Err(Error::Excluded(_)) => {}
            Err(e) => panic!("divisor {i}: {e}"),
        }
        if checked == 20 {
            break;
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn main_theorem_residual_ignores_probe_choice() {
    let ge = green_shifted();
    let inv = invariants();
    for i in 0..3 {
        let d = DivisorOnCurve::point(curve().sample_point(i, 103));
        let a = main_theorem_with(ge, inv, &d, 0).unwrap().residual;
        let b = main_theorem_with(ge, inv, &d, 5).unwrap().residual;
        assert!((a - b).abs() <= TOL_SINGLE, "divisor {i}: {a} vs {b}");
    }
}

#[test]
fn main_theorem_survives_approach_to_a_weierstrass_point() {
    let c = curve();
    let ge = green();
    let inv = invariants();
    let e = c64(1.0, 0.0);
    let y0 = f(c, e + c64(0.0, 0.3)).sqrt();
    let mut y = y0;
    let mut last_eta = f64::INFINITY;
    let mut reached = false;
    for k in 0..40 {
        let t = 0.3 * 0.8f64.powi(k);
        let p = continued(c, e + c64(0.0, t), y);
        y = p.y().unwrap();
        match verify_main_theorem(ge, inv, &DivisorOnCurve::point(p)) {
            Ok(r) => {
                assert!(r.residual.abs() <= TOL_LIMIT, "t = {t}: {r:?}");
                assert!(r.lhs < last_eta + 1e-9, "log ||eta|| should decrease toward the zero");
                last_eta = r.lhs;
            }
            Err(Error::Excluded(_)) => {
                assert!(ramification_distance(c, &p).unwrap() < EXCLUSION_RADIUS);
                reached = true;
                break;
            }
            Err(err) => panic!("t = {t}: {err}"),
        }
    }
    assert!(reached, "the approach never reached the exclusion radius");
}

#[test]
fn wronskian_lemma_holds_at_generic_points() {
    let m = ArakelovMetric::new(green(), METRIC_STEPS).unwrap();
    let inv = invariants();
    let mut checked = 0;
    for i in 0..15 {
        let p = curve().sample_point(i, 107);
        match verify_wronskian_lemma(&m, inv, &p, LocalChart::X) {
            Ok(r) => {
                assert!(r.residual.abs() <= TOL_LIMIT, "point {i}: {r:?}");
                checked += 1;
            }
            Err(Error::Excluded(_)) => {}
            Err(e) => panic!("point {i}: {e}"),
        }
        if checked == 10 {
            break;
        }
    }
    assert_eq!(checked, 10);
}

#[test]
fn wronskian_residual_is_chart_independent() {
    let m = ArakelovMetric::new(green(), METRIC_STEPS).unwrap();
    let inv = invariants();
    for i in 0..3 {
        let p = curve().sample_point(i, 109);
        let a = verify_wronskian_lemma(&m, inv, &p, LocalChart::X).unwrap().residual;
        let b = verify_wronskian_lemma(&m, inv, &p, LocalChart::InverseX).unwrap().residual;
        assert!((a - b).abs() <= 1e-2, "point {i}: {a} vs {b}");
    }
}

#[test]
fn wronskian_lemma_excludes_weierstrass_points() {
    let m = ArakelovMetric::new(green_shifted(), METRIC_STEPS).unwrap();
    let inv = invariants();
    let p = curve().point(c64(1.0, 1e-4), 1);
    assert!(matches!(verify_wronskian_lemma(&m, inv, &p, LocalChart::X), Err(Error::Excluded(_))));
}

#[test]
fn zeta_is_continuous_past_a_weierstrass_point() {
    let c = curve();
    let ge = green_shifted();
    let inv = invariants();
    // a line passing the branch point x = i at distance 0.05
    let start = c64(-0.3, 1.05);
    let mut y = f(c, start).sqrt();
    let mut prev: Option<f64> = None;
    let mut nearest = f64::INFINITY;
    for k in 0..100 {
        let x = start + c64(0.6 * k as f64 / 99.0, 0.0);
        let p = continued(c, x, y);
        y = p.y().unwrap();
        nearest = nearest.min(ramification_distance(c, &p).unwrap());
        let z = zeta(ge, inv, &p).unwrap();
        if let Some(q) = prev {
            assert!((z - q).abs() <= 0.1, "step {k}: {q} -> {z}");
        }
        prev = Some(z);
    }
    assert!(nearest >= EXCLUSION_RADIUS && nearest < 0.2, "closest approach {nearest}");
}

#[test]
fn invariants_are_finite() {
    let inv = invariants();
    assert!(inv.eta_integral.is_finite());
    assert!((inv.bost_a - inv.bost_a_crosscheck).abs() <= TOL_NESTED);
}
