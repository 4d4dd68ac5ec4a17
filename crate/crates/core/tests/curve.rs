mod common;

use common::*;
use nalgebra::{DVector, Vector2};
use rand::Rng;
use thetadiv::curve::quadrature::{integrate_nu, Node, NuQuadrature, QuadratureConfig};
use thetadiv::curve::*;
use thetadiv::{Error, C64};

fn model() -> CurveModel {
    build_curve(&x5_minus_x()).unwrap()
}

fn cmax2(m: &nalgebra::Matrix2<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn period_matrix_is_symmetric_with_positive_imaginary_part() {
    let m = model();
    let t = m.tau().tau();
    assert!((t - t.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max) <= 1e-10);
    assert!(m.raw_asymmetry() <= 1e-10);
    let y = t.map(|v| v.im);
    assert!(y.cholesky().is_some());
}

#[test]
fn periods_agree_along_homotoped_paths() {
    let m = model();
    let (a, b) = m.periods_alternate();
    let scale = cmax2(m.period_a()).max(cmax2(m.period_b()));
    assert!(cmax2(&(a - m.period_a())) <= 1e-9 * scale);
    assert!(cmax2(&(b - m.period_b())) <= 1e-9 * scale);
}

#[test]
fn gram_is_positive_definite_for_random_quintics() {
    let mut rng = rng(11);
    for _ in 0..10 {
        let roots = random_roots(&mut rng, 0.05);
        let m = build_curve(&poly_from_roots(&roots)).unwrap();
        let g = m.gram();
        assert!(cmax2(&(g - g.adjoint())) <= 1e-9 * cmax2(g));
        assert!(g.cholesky().is_some());
        let t = m.tau().tau();
        assert!((t - t.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max) <= 1e-10);
    }
}

#[test]
fn ortho_basis_whitens_the_gram_matrix() {
    let m = model();
    let mm = m.ortho_basis();
    let back = mm * m.gram() * mm.adjoint();
    let e = back - nalgebra::Matrix2::identity();
    assert!(cmax2(&e) <= 1e-9, "{back}");
}

#[test]
fn rejects_repeated_roots_and_bad_degree() {
    let roots = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1e-9), c(-1.0, 0.0), c(0.0, 1.0)];
    assert!(matches!(build_curve(&poly_from_roots(&roots)), Err(Error::Domain(_))));
    let mut quartic = x5_minus_x();
    quartic.pop();
    assert!(build_curve(&quartic).is_err());
    let mut scaled = x5_minus_x();
    scaled[5] = c(2.0, 0.0);
    assert!(build_curve(&scaled).is_err());
}

#[test]
fn abel_jacobi_basics() {
    let m = model();
    let tau = m.tau();
    assert!(m.abel_jacobi(&CurvePoint::Infinity).z.norm() == 0.0);
    for i in 0..20 {
        let p = m.sample_point(i, 7);
        let s = m.abel_jacobi(&p).z + m.abel_jacobi(&involution(&p)).z;
        assert!(tau.lattice_distance(&s) <= 1e-9, "point {i}: {}", tau.lattice_distance(&s));
    }
    for e in m.branch_points() {
        let w = m.point(e, 1);
        let z = m.abel_jacobi(&w).z * C64::new(2.0, 0.0);
        assert!(tau.lattice_distance(&z) <= 1e-8);
        let t = m.divisor_to_theta_point(&DivisorOnCurve::point(w)).unwrap().z * C64::new(2.0, 0.0);
        assert!(tau.lattice_distance(&t) <= 1e-8);
    }
}

#[test]
fn closed_loops_integrate_to_lattice_vectors() {
    let m = model();
    let br = m.branches();
    let p = PathParams::STANDARD;
    // squares around pairs of branch points, and one around all of them
    let loops: Vec<Vec<C64>> = vec![
        vec![c(-0.5, -0.5), c(1.5, -0.5), c(1.5, 0.5), c(-0.5, 0.5)],
        vec![c(-0.5, -0.5), c(0.5, -0.5), c(0.5, 1.5), c(-0.5, 1.5)],
        vec![c(-2.0, -2.0), c(2.0, -2.0), c(2.0, 2.0), c(-2.0, 2.0)],
        vec![c(-1.5, -0.3), c(1.5, -0.3), c(1.5, 1.5), c(-1.5, 1.5)],
    ];
    for (n, corners) in loops.into_iter().enumerate() {
        let start = corners[0];
        let y0 = br.y_principal(start);
        let mut y = y0;
        let mut acc = [c(0.0, 0.0), c(0.0, 0.0)];
        for i in 0..corners.len() {
            let (seg, y1) = br.x_segment(corners[i], y, corners[(i + 1) % corners.len()], &p);
            acc[0] += seg[0];
            acc[1] += seg[1];
            y = y1;
        }
        // an odd number of enclosed branch points swaps the sheet; go round twice
        if (y - y0).norm() > (y + y0).norm() {
            for i in 0..corners.len() {
                let (seg, y1) = br.x_segment(corners[i], y, corners[(i + 1) % corners.len()], &p);
                acc[0] += seg[0];
                acc[1] += seg[1];
                y = y1;
            }
        }
        assert!((y - y0).norm() < 1e-9);
        let z = m.normalize(&acc);
        assert!(m.tau().lattice_distance(&z) <= 1e-9, "{}", m.tau().lattice_distance(&z));
        // the loop around every branch point is contractible through infinity
        if n != 2 {
            assert!(z.norm() > 1e-3);
        }
    }
}

#[test]
fn effective_divisors_land_on_theta() {
    let m = model();
    assert!(m.audit_divisor_images(200).unwrap() <= DIVISOR_AUDIT_TOL);
}

#[test]
fn shifted_classes_are_off_theta() {
    let m = model();
    let th = m.theta();
    let scale = th.divisor_scale();
    let offset = DVector::from_vec(vec![c(0.31, 0.17), c(-0.23, 0.11)]);
    let mut low = f64::INFINITY;
    for i in 0..50 {
        let d = DivisorOnCurve::point(m.sample_point(i, 5));
        let z = m.divisor_to_theta_point(&d).unwrap().z + &offset;
        low = low.min(th.norm(z.as_slice()) / scale);
    }
    assert!(low > 0.1, "{low}");
}

#[test]
fn involution_properties() {
    let m = model();
    for i in 0..10 {
        let p = m.sample_point(i, 9);
        assert_eq!(involution(&involution(&p)), p);
        assert!(involution(&p).distance(&p) > 1e-6);
        let d = DivisorOnCurve::point(p);
        let a = m.divisor_to_theta_point(&d).unwrap().z;
        let b = m.divisor_to_theta_point(&d.involution()).unwrap().z;
        assert!(m.tau().lattice_distance(&(a + b)) <= 1e-8);
        // D + sigma D is linearly equivalent to twice infinity
        let canon = m.abel_jacobi_divisor(&d.plus(&d.involution())).z;
        let two_inf = m.abel_jacobi_divisor(&DivisorOnCurve::new(vec![CurvePoint::Infinity; 2])).z;
        assert!(m.tau().torus_distance(&canon, &two_inf) <= 1e-8);
    }
    let w = m.weierstrass_points();
    assert_eq!(w.len(), 6);
    for p in &w {
        assert!(involution(p).distance(p) <= 1e-12);
    }
}

#[test]
fn nu_density_is_sheet_independent() {
    let m = model();
    for i in 0..10 {
        let p = m.sample_point(i, 4);
        let a = m.nu_density(&p).unwrap();
        let b = m.nu_density(&involution(&p)).unwrap();
        assert!((a - b).abs() <= 1e-14 * a);
    }
    assert!(m.nu_density(&CurvePoint::Infinity).is_err());
    assert!(m.nu_density(&m.point(c(1.0, 0.0), 1)).is_err());
}

#[test]
fn abel_jacobi_pulls_back_mu_to_g_nu() {
    let m = model();
    let br = m.branches();
    let h = 1e-4;
    for i in 0..20 {
        let p = m.sample_point(i, 6);
        let (x, y) = (p.x().unwrap(), p.y().unwrap());
        // derivative of the Abel-Jacobi map by central differences of path integrals
        let params = PathParams::REFINED;
        let (fwd, _) = br.x_segment(x, y, x + h, &params);
        let (bwd, _) = br.x_segment(x, y, x - h, &params);
        let d = [(fwd[0] - bwd[0]) / (2.0 * h), (fwd[1] - bwd[1]) / (2.0 * h)];
        let dz = m.normalize(&d);
        let lhs = m.pullback_density(&dz);
        let rhs = 2.0 * m.nu_density(&p).unwrap();
        assert!((lhs - rhs).abs() <= 1e-6 * rhs, "{lhs} {rhs}");
    }
}

#[test]
fn nu_has_unit_mass() {
    let m = model();
    let cfg = QuadratureConfig::new(3, 4000, 3).unwrap();
    let est = integrate_nu(&m, |_| 1.0, &cfg).unwrap();
    assert!((est.value - 1.0).abs() <= 1e-3, "{est:?}");
    assert!(est.error <= 1e-3);
    let mut rng = rng(5);
    let roots = random_roots(&mut rng, 0.3);
    let other = build_curve(&poly_from_roots(&roots)).unwrap();
    let est = integrate_nu(&other, |_| 1.0, &cfg).unwrap();
    assert!((est.value - 1.0).abs() <= 1e-3, "{est:?}");
}

#[test]
fn odd_integrands_integrate_to_zero() {
    let m = model();
    let cfg = QuadratureConfig::new(1, 4000, 3).unwrap();
    let odd = |n: &Node| match n.point.y() {
        Some(y) => y.re / (1.0 + y.norm_sqr()),
        None => 0.0,
    };
    let est = integrate_nu(&m, odd, &cfg).unwrap();
    assert!(est.value.abs() <= 3.0 * est.error + 1e-12, "{est:?}");
    assert!(est.value.abs() <= 1e-4, "{est:?}");
}

#[test]
fn quadrature_reproduces_the_gram_matrix() {
    let m = model();
    let q = NuQuadrature::new(&m, QuadratureConfig::new(2, 4000, 3).unwrap());
    let gram_inv = m.gram().try_inverse().unwrap();
    for (j, k) in [(0, 0), (0, 1), (1, 1)] {
        // (i/2) int phi_j conj(phi_k) |dx|^2 / |f|, written against nu
        let entry = |n: &Node, part: fn(C64) -> f64| -> f64 {
            let v = match n.point.x() {
                Some(x) => Vector2::new(c(1.0, 0.0), x),
                None => Vector2::new(c(0.0, 0.0), c(1.0, 0.0)),
            };
            let w = (v.adjoint() * gram_inv * v)[(0, 0)].re;
            part(v[j] * v[k].conj()) * 2.0 / w
        };
        let re = q.integrate(|n| entry(n, |z| z.re), &[]).unwrap();
        let im = q.integrate(|n| entry(n, |z| z.im), &[]).unwrap();
        let got = c(re.value, im.value);
        let want = m.gram()[(j, k)];
        assert!((got - want).norm() <= 1e-3 * cmax2(m.gram()), "{j}{k}: {got} vs {want}");
    }
}

#[test]
fn log_singularities_converge() {
    let m = model();
    let q = NuQuadrature::new(&m, QuadratureConfig::new(4, 4000, 5).unwrap());
    let a = c(0.5, 0.3);
    let sing = [m.point(a, 1), m.point(a, -1), CurvePoint::Infinity];
    let h = |n: &Node| n.point.x().map_or(f64::INFINITY, |x| (x - a).norm().ln());
    let est = q.integrate(h, &sing).unwrap();
    assert!(est.error <= 1e-5, "{est:?}");
    // the seed shifts every grid; the value must not move
    let other = NuQuadrature::new(&m, QuadratureConfig::new(9, 4000, 5).unwrap()).integrate(h, &sing).unwrap();
    assert!((other.value - est.value).abs() <= 1e-5);
}

#[test]
fn quadrature_is_deterministic() {
    let m = model();
    let cfg = QuadratureConfig::new(7, 500, 2).unwrap();
    let h = |n: &Node| n.z[0].re.sin() + n.z[1].im;
    let a = integrate_nu(&m, h, &cfg).unwrap();
    let b = integrate_nu(&m, h, &cfg).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert!(QuadratureConfig::new(0, 99, 2).is_err());
    assert!(QuadratureConfig::new(0, 100, 0).is_err());
}

#[test]
fn wronskian_matches_direct_differentiation() {
    let m = model();
    let br = m.branches();
    let mm = m.ortho_basis();
    let mut rng = rng(3);
    for _ in 0..10 {
        let x = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        if br.dist(x) < 0.2 {
            continue;
        }
        let y = br.y_principal(x);
        // g_k = phi_k / y along the local branch
        let g = |t: C64| -> Vector2<C64> {
            let yt = br.y_continue(x, y, t);
            mm * Vector2::new(c(1.0, 0.0), t) / yt
        };
        let h = 1e-4;
        let d = (g(x + h) - g(x - h)) / c(2.0 * h, 0.0);
        let g0 = g(x);
        let direct = g0[0] * d[1] - g0[1] * d[0];
        let w = m.wronskian_x(x);
        assert!((direct - w).norm() <= 1e-6 * w.norm(), "{direct} {w}");
        // the same section in the chart w = 1/x: W_x = -W_w / x^6
        let ww = m.wronskian_w(x.inv());
        assert!((w + ww / x.powi(6)).norm() <= 1e-10 * w.norm());
        assert!(w.norm() > 0.0);
    }
}
