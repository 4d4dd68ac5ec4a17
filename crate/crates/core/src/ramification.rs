//! Zeros of `eta` along the image of a genus-2 curve in its Jacobian.
//!
//! `x -> eta(AJ(x) - kappa)` is holomorphic in every chart as long as the
//! Abel-Jacobi integral is continued rather than reduced, so its zeros in a
//! region are counted by the winding of `arg eta` around the region's
//! boundary. The census covers a square of the x-plane by a grid of cells
//! (each sheet separately; cells holding a branch point by a double loop,
//! which closes up on the curve) and the rest of the curve by the square's
//! boundary seen from infinity. Cells with zeros are subdivided until their
//! image is small in the torus metric.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::curve::{Branches, CurveModel, PathParams};
use crate::error::{Error, Result};
use crate::gaussmap::{eta_with, ETA_ZERO_REL};
use crate::siegel::C64;

/// Largest change of `arg eta` accepted between consecutive loop samples.
const MAX_ARG_STEP: f64 = PI / 6.0;
const MAX_SPLITS: u32 = 40;

/// A located zero of `eta` on the curve.
#[derive(Debug, Clone)]
pub struct RamificationZero {
    /// `None` for the point at infinity.
    pub x: Option<C64>,
    /// Winding number of `eta` around the point, in a local coordinate.
    pub order: i64,
    /// Largest torus distance from the image of the final bracketing loop
    /// to the image of the nearest Weierstrass point.
    pub bracket_radius: f64,
    /// Index into [`CurveModel::weierstrass_points`] of that point.
    pub weierstrass: usize,
    /// Torus distance from the center of the final bracket to that point.
    pub weierstrass_distance: f64,
}

/// Result of a census.
#[derive(Debug, Clone)]
pub struct Census {
    pub cells: usize,
    pub zeros: Vec<RamificationZero>,
    /// Zeros outside the square, from its boundary seen from infinity.
    pub outside_count: i64,
}

impl Census {
    /// Number of distinct zero locations.
    pub fn distinct(&self) -> usize {
        self.zeros.len()
    }

    /// Whether the zeros are exactly the Weierstrass points, each bracketed
    /// within `tol` in the torus metric.
    pub fn matches_weierstrass(&self, tol: f64) -> bool {
        let mut hit = [false; 6];
        for z in &self.zeros {
            if z.bracket_radius > tol || z.weierstrass_distance > tol || hit[z.weierstrass] {
                return false;
            }
            hit[z.weierstrass] = true;
        }
        let at_infinity = self.zeros.iter().filter(|z| z.x.is_none()).map(|z| z.order).sum::<i64>();
        hit.iter().all(|h| *h) && self.outside_count == at_infinity
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    w: C64,
    y: C64,
    raw: [C64; 2],
    eta: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Chart {
    X,
    T,
}

struct Tracker<'a> {
    curve: &'a CurveModel,
    params: PathParams,
}

impl<'a> Tracker<'a> {
    fn br(&self) -> &Branches {
        self.curve.branches()
    }

    fn divisor_point(&self, raw: &[C64; 2]) -> DVector<C64> {
        self.curve.normalize(raw) - self.curve.riemann_constant()
    }

    fn eta_at(&self, raw: &[C64; 2]) -> Result<C64> {
        let z = self.divisor_point(raw);
        let v = eta_with(self.curve.theta(), z.as_slice())?;
        if v.eta_norm <= ETA_ZERO_REL * v.bound {
            return Err(Error::Degenerate("bracketing loop passes through a zero of eta".into()));
        }
        Ok(v.eta)
    }

    fn start_x(&self, x: C64, sheet: i8) -> Result<State> {
        let p = self.curve.point(x, sheet);
        let raw = self.curve.aj_raw(&p);
        Ok(State { w: x, y: p.y().unwrap(), raw, eta: self.eta_at(&raw)? })
    }

    fn start_t(&self, t: C64) -> Result<State> {
        let raw = self.br().t_segment(C64::new(0.0, 0.0), t, &self.params);
        Ok(State { w: t, y: C64::new(0.0, 0.0), raw, eta: self.eta_at(&raw)? })
    }

    fn step(&self, chart: Chart, s: &State, to: C64) -> Result<State> {
        let br = self.br();
        let (seg, y) = match chart {
            Chart::X => br.x_segment(s.w, s.y, to, &self.params),
            Chart::T => (br.t_segment(s.w, to, &self.params), s.y),
        };
        let raw = [s.raw[0] + seg[0], s.raw[1] + seg[1]];
        Ok(State { w: to, y, raw, eta: self.eta_at(&raw)? })
    }

    /// Move to `to`, accumulating the change of `arg eta`, refining until
    /// each step changes it by at most [`MAX_ARG_STEP`].
    fn walk(
        &self,
        chart: Chart,
        s: State,
        to: C64,
        depth: u32,
        acc: &mut f64,
        images: &mut Vec<DVector<C64>>,
    ) -> Result<State> {
        let next = self.step(chart, &s, to)?;
        let d = (next.eta / s.eta).arg();
        if d.abs() <= MAX_ARG_STEP {
            *acc += d;
            images.push(self.divisor_point(&next.raw));
            return Ok(next);
        }
        if depth >= MAX_SPLITS {
            return Err(Error::Convergence("arg eta cannot be resolved along a loop".into()));
        }
        let mid = s.w + (to - s.w) * 0.5;
        let m = self.walk(chart, s, mid, depth + 1, acc, images)?;
        self.walk(chart, m, to, depth + 1, acc, images)
    }

    /// Winding number of `eta` along the polygon `corners`, traversed
    /// `turns` times, and the divisor points seen on the way.
    fn winding(&self, chart: Chart, mut s: State, corners: &[C64], turns: usize) -> Result<(i64, Vec<DVector<C64>>)> {
        let mut acc = 0.0;
        let mut images = vec![self.divisor_point(&s.raw)];
        for _ in 0..turns {
            for i in 1..=corners.len() {
                s = self.walk(chart, s, corners[i % corners.len()], 0, &mut acc, &mut images)?;
            }
        }
        let n = acc / (2.0 * PI);
        if (n - n.round()).abs() > 1e-3 {
            return Err(Error::Convergence(format!("winding number {n} is not an integer")));
        }
        Ok((n.round() as i64, images))
    }
}

fn square(center: C64, half: f64) -> [C64; 4] {
    [
        center + C64::new(-half, -half),
        center + C64::new(half, -half),
        center + C64::new(half, half),
        center + C64::new(-half, half),
    ]
}

fn inside(center: C64, half: f64, p: C64) -> bool {
    (p.re - center.re).abs() < half && (p.im - center.im).abs() < half
}

/// Winding count of one square cell (both sheets).
fn cell_count(tr: &Tracker, center: C64, half: f64) -> Result<i64> {
    let corners = square(center, half);
    let branch = tr.br().e.iter().any(|e| inside(center, half, *e));
    if branch {
        let s = tr.start_x(corners[0], 1)?;
        Ok(tr.winding(Chart::X, s, &corners, 2)?.0)
    } else {
        let mut n = 0;
        for sheet in [1, -1] {
            let s = tr.start_x(corners[0], sheet)?;
            n += tr.winding(Chart::X, s, &corners, 1)?.0;
        }
        Ok(n)
    }
}

impl<'a> Tracker<'a> {
    fn nearest_weierstrass(&self, z: &DVector<C64>) -> (usize, f64) {
        let tau = self.curve.tau();
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.curve.weierstrass_points().iter().enumerate() {
            let zw = self.divisor_point(&self.curve.aj_raw(w));
            let d = tau.torus_distance(z, &zw);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn bracket(&self, x: Option<C64>, order: i64, images: &[DVector<C64>], center: &DVector<C64>) -> RamificationZero {
        let (weierstrass, weierstrass_distance) = self.nearest_weierstrass(center);
        let wz = self.divisor_point(&self.curve.aj_raw(&self.curve.weierstrass_points()[weierstrass]));
        let tau = self.curve.tau();
        let bracket_radius = images.iter().map(|z| tau.torus_distance(z, &wz)).fold(0.0, f64::max);
        RamificationZero { x, order, bracket_radius, weierstrass, weierstrass_distance }
    }

    /// Shrink a finite cell holding zeros until its image has torus radius
    /// below `tol`.
    fn localize(&self, mut center: C64, mut half: f64, order: i64, tol: f64) -> Result<RamificationZero> {
        for _ in 0..80 {
            let corners = square(center, half);
            let branch = self.br().e.iter().any(|e| inside(center, half, *e));
            let (sheet_start, turns) = if branch { (vec![1i8], 2) } else { (vec![1i8, -1], 1) };
            let mut images = Vec::new();
            for sheet in sheet_start {
                let s = self.start_x(corners[0], sheet)?;
                let (n, im) = self.winding(Chart::X, s, &corners, turns)?;
                if n != 0 {
                    images = im;
                }
            }
            let p = self.curve.point(center, 1);
            let cz = self.divisor_point(&self.curve.aj_raw(&p));
            let z = self.bracket(Some(center), order, &images, &cz);
            if z.bracket_radius <= tol && !images.is_empty() {
                return Ok(z);
            }
            // descend into the quarter that keeps the zeros
            let q = 0.5 * half;
            let mut found = false;
            for off in [C64::new(-q, -q), C64::new(q, -q), C64::new(q, q), C64::new(-q, q)] {
                if cell_count(self, center + off, q)? != 0 {
                    center += off;
                    half = q;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::Inconsistent("zero of eta lost during subdivision".into()));
            }
        }
        Err(Error::Convergence("zero of eta could not be localized".into()))
    }

    fn localize_infinity(&self, tol: f64) -> Result<Option<RamificationZero>> {
        let mut r = 0.3 / self.br().emax.sqrt();
        let circle = |r: f64| -> Vec<C64> { (0..16).map(|k| C64::from_polar(r, 2.0 * PI * k as f64 / 16.0)).collect() };
        let zero_point = self.divisor_point(&[C64::new(0.0, 0.0); 2]);
        for _ in 0..60 {
            let c = circle(r);
            let (n, images) = self.winding(Chart::T, self.start_t(c[0])?, &c, 1)?;
            if n == 0 {
                return Ok(None);
            }
            let z = self.bracket(None, n, &images, &zero_point);
            if z.bracket_radius <= tol {
                return Ok(Some(z));
            }
            r *= 0.5;
        }
        Err(Error::Convergence("zero of eta at infinity could not be localized".into()))
    }
}

/// Census of the zeros of `eta` along the curve, on a grid of
/// `cells_per_side^2` cells, with each zero bracketed to torus radius `tol`.
pub fn ramification_census(curve: &CurveModel, cells_per_side: usize, tol: f64) -> Result<Census> {
    if cells_per_side == 0 {
        return Err(Error::Domain("census needs at least one cell".into()));
    }
    let tr = Tracker { curve, params: PathParams::STANDARD };
    let br = curve.branches();
    let n = cells_per_side;
    let h = 2.5 * br.emax / n as f64;
    // generic offset keeps branch points off the cell edges
    let origin = C64::new(-1.25 * br.emax + 0.137 * h, -1.25 * br.emax + 0.071 * h);
    let half = 0.5 * h;
    let centers: Vec<C64> =
        (0..n * n).map(|k| origin + C64::new(((k % n) as f64 + 0.5) * h, ((k / n) as f64 + 0.5) * h)).collect();
    let counts: Vec<Result<i64>> = centers.par_iter().map(|c| cell_count(&tr, *c, half)).collect();
    let mut zeros = Vec::new();
    for (c, count) in centers.iter().zip(counts) {
        let count = count?;
        if count != 0 {
            zeros.push(tr.localize(*c, half, count, tol)?);
        }
    }
    // zeros outside the square: its boundary, twice around, seen from infinity
    let lo = origin;
    let hi = origin + C64::new(n as f64 * h, n as f64 * h);
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im)];
    let (w, _) = tr.winding(Chart::X, tr.start_x(corners[0], 1)?, &corners, 2)?;
    let outside_count = -w;
    if let Some(z) = tr.localize_infinity(tol)? {
        zeros.push(z);
    }
    Ok(Census { cells: n * n, zeros, outside_count })
}
