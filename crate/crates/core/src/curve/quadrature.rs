//! Deterministic quadrature against `nu` on the curve.
//!
//! `nu` is split by smooth cutoffs into compactly supported pieces: one per
//! finite branch point (integrated in its u-chart), one at infinity (t-chart)
//! and the remainder (x-chart, both sheets). Each piece is smooth with
//! compact support, so a uniform trapezoid grid converges faster than any
//! power of the spacing. Grids are shifted by a seed-dependent offset.
//!
//! Integrable logarithmic singularities of the integrand are declared by the
//! caller. Each gets a disk of its own with geometrically graded polar nodes
//! and a weight `psi` equal to one near the singular point; every other
//! piece is damped by `1 - sum psi`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::paths::{Branches, Pair, PathParams};
use super::{CurveModel, CurvePoint};
use crate::error::{Error, Result};
use crate::numeric::{gl_cached, CompensatedSum};
use crate::siegel::C64;

/// Running-mean threshold below which an integral is reported divergent.
pub const DIVERGENCE_FLOOR: f64 = -1e3;

// cutoff radii around branch points, as fractions of the separation
const BRANCH_INNER: f64 = 0.2;
const BRANCH_OUTER: f64 = 0.45;
// cutoff radii at infinity, as multiples of the largest branch point modulus
const FAR_INNER: f64 = 1.5;
const FAR_OUTER: f64 = 3.0;
// inner radius of the cutoff transition of a singular disk, relative to its radius
const PLATEAU: f64 = 0.1;

/// Resolution and seed of the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureConfig {
    /// Shifts every grid.
    pub seed: u64,
    /// Approximate node count of the coarsest level.
    pub n_nodes: usize,
    /// Number of levels; each doubles the node count. The finest gives the
    /// estimate, the difference to the next coarser the error.
    pub refinement_levels: usize,
}

impl QuadratureConfig {
    pub fn new(seed: u64, n_nodes: usize, refinement_levels: usize) -> Result<Self> {
        if n_nodes < 100 {
            return Err(Error::Domain(format!("n_nodes must be at least 100, got {n_nodes}")));
        }
        if refinement_levels == 0 {
            return Err(Error::Domain("refinement_levels must be positive".into()));
        }
        Ok(Self { seed, n_nodes, refinement_levels })
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { seed: 0, n_nodes: 4000, refinement_levels: 3 }
    }
}

/// An estimate with its refinement error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// A quadrature node: a curve point, its Abel-Jacobi image (normalized,
/// not reduced modulo the lattice) and its weight.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub point: CurvePoint,
    pub z: [C64; 2],
    pub weight: f64,
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// One on `[0, PLATEAU]`, smoothly zero from 1 on.
fn plateau(s: f64) -> f64 {
    smooth_step((1.0 - s) / (1.0 - PLATEAU))
}

fn branch_cutoff(br: &Branches, k: usize, x: C64) -> f64 {
    let a = BRANCH_INNER * br.sep[k];
    let b = BRANCH_OUTER * br.sep[k];
    smooth_step((b - (x - br.e[k]).norm()) / (b - a))
}

fn far_cutoff(br: &Branches, x_abs: f64) -> f64 {
    let a = FAR_INNER * br.emax;
    let b = FAR_OUTER * br.emax;
    smooth_step((x_abs - a) / (b - a))
}

#[derive(Debug, Clone, Copy)]
enum Chart {
    /// x-chart; `y` continued from `(center, y_center)`.
    X { y_center: C64 },
    /// u-chart at finite branch point `k`.
    U(usize),
    /// t-chart at infinity.
    T,
}

/// Disk around a declared singular point.
#[derive(Debug, Clone, Copy)]
struct Disk {
    chart: Chart,
    center: C64,
    radius: f64,
    aj_center: Pair,
}

impl Disk {
    /// Local coordinate of `p`, if `p` is in the chart domain (and on the
    /// disk's sheet for x-charts).
    fn local(&self, br: &Branches, p: &CurvePoint) -> Option<C64> {
        match (self.chart, p) {
            (Chart::T, CurvePoint::Infinity) => Some(C64::new(0.0, 0.0)),
            (_, CurvePoint::Infinity) => None,
            (Chart::X { y_center }, CurvePoint::Affine { x, y, .. }) => {
                if (x - self.center).norm() >= self.radius {
                    return None;
                }
                let yd = br.y_continue(self.center, y_center, *x);
                if (yd - y).norm() <= (yd + y).norm() {
                    Some(*x)
                } else {
                    None
                }
            }
            (Chart::U(k), CurvePoint::Affine { x, y, .. }) => {
                if (x - br.e[k]).norm() >= 0.999 * br.sep[k] {
                    return None;
                }
                Some(br.u_of(k, *x, *y))
            }
            (Chart::T, CurvePoint::Affine { x, y, .. }) => {
                if x.norm() * 0.999 <= br.emax {
                    return None;
                }
                Some(br.t_of(*x, *y))
            }
        }
    }

    fn psi(&self, br: &Branches, p: &CurvePoint) -> f64 {
        self.local(br, p).map_or(0.0, |w| plateau((w - self.center).norm() / self.radius))
    }

    /// Chart integrand of the Abel-Jacobi map at local coordinate `w`.
    fn integrand(&self, br: &Branches, w: C64) -> Pair {
        match self.chart {
            Chart::X { y_center } => Branches::x_integrand(w, br.y_continue(self.center, y_center, w)),
            Chart::U(k) => br.u_integrand(k, w).0,
            Chart::T => br.t_integrand(w),
        }
    }

    /// Curve point, chart integrand and `nu` density at local coordinate `w`.
    fn eval(&self, curve: &CurveModel, w: C64) -> (CurvePoint, Pair, f64) {
        let br = curve.branches();
        match self.chart {
            Chart::X { y_center } => {
                let y = br.y_continue(self.center, y_center, w);
                let p = curve.point_unchecked(w, y);
                let dens = curve.nu_density(&p).unwrap_or(0.0);
                (p, Branches::x_integrand(w, y), dens)
            }
            Chart::U(k) => {
                let (f, x, y) = br.u_integrand(k, w);
                (curve.point_unchecked(x, y), f, curve.nu_density_u(k, w))
            }
            Chart::T => {
                let p = if w.norm() == 0.0 {
                    CurvePoint::Infinity
                } else {
                    curve.point_unchecked(w.powi(-2), br.s(w) / w.powi(5))
                };
                (p, br.t_integrand(w), curve.nu_density_t(w))
            }
        }
    }

    /// Polar nodes graded toward the center, weighted by `psi`. The outer
    /// panel, which holds the transition of `psi`, gets `outer` nodes.
    fn nodes(&self, curve: &CurveModel, per_panel: usize, outer: usize, n_phi: usize, offset: f64) -> Vec<Node> {
        let q = 0.25f64;
        let panels = 8;
        let r = self.radius;
        let mut rule = Vec::new();
        let mut push = |a: f64, b: f64, n: usize| {
            let (x, w) = gl_cached(n);
            for (xi, wi) in x.iter().zip(w) {
                rule.push((a + 0.5 * (b - a) * (xi + 1.0), 0.5 * (b - a) * wi));
            }
        };
        push(0.0, r * q.powi(panels), per_panel);
        for j in (1..panels).rev() {
            push(r * q.powi(j + 1), r * q.powi(j), per_panel);
        }
        push(r * q, r, outer);
        let br = curve.branches();
        let (sx, sw) = gl_cached(6);
        let mut out = Vec::with_capacity(rule.len() * n_phi);
        for j in 0..n_phi {
            let dir = C64::from_polar(1.0, 2.0 * PI * (j as f64 + offset) / n_phi as f64);
            let mut aj = self.aj_center;
            let mut prev = 0.0;
            for &(rho, wr) in &rule {
                // carry the Abel-Jacobi integral out along the ray
                let half = 0.5 * (rho - prev);
                for (xi, wi) in sx.iter().zip(sw) {
                    let f = self.integrand(br, self.center + dir * (prev + half * (xi + 1.0)));
                    let c = dir * (half * wi);
                    aj[0] += f[0] * c;
                    aj[1] += f[1] * c;
                }
                prev = rho;
                let psi = plateau(rho / r);
                if psi == 0.0 {
                    continue;
                }
                let (point, _, dens) = self.eval(curve, self.center + dir * rho);
                let z = curve.normalize(&aj);
                let weight = wr * rho * (2.0 * PI / n_phi as f64) * dens * psi;
                out.push(Node { point, z: [z[0], z[1]], weight });
            }
        }
        out
    }
}

/// Region of the x-plane containing the support of a disk's `psi`.
#[derive(Debug, Clone, Copy)]
enum Bound {
    Near { center: C64, radius: f64 },
    Far { min_abs: f64 },
}

/// Polar nodes around one declared singular point, with the cutoff `psi`
/// that takes the neighbourhood over from the regular grid.
#[derive(Debug, Clone)]
pub struct SingularDisk {
    disk: Disk,
    bound: Bound,
    pub nodes: Vec<Node>,
}

impl SingularDisk {
    fn may_contain(&self, p: &CurvePoint) -> bool {
        match (self.bound, p.x()) {
            (_, None) => true,
            (Bound::Near { center, radius }, Some(x)) => (x - center).norm() < radius,
            (Bound::Far { min_abs }, Some(x)) => x.norm() > min_abs,
        }
    }

    /// Weight of the disk at `p`; the regular nodes are damped by `1 - psi`.
    pub fn psi(&self, curve: &CurveModel, p: &CurvePoint) -> f64 {
        if self.may_contain(p) {
            self.disk.psi(curve.branches(), p)
        } else {
            0.0
        }
    }

    /// Whether `q` is close enough to the center that a disk built with `q`
    /// as another singular point would be smaller.
    pub fn is_crowded_by(&self, curve: &CurveModel, q: &CurvePoint) -> bool {
        self.disk.local(curve.branches(), q).is_some_and(|w| (w - self.disk.center).norm() * 0.9 < self.disk.radius)
    }
}

/// Uniform grid covering the square `|re|, |im| <= half`, shifted by
/// `offset` (in units of the spacing).
fn grid_axis(half: f64, h: f64, offset: f64) -> Vec<f64> {
    let lo = (-half / h - offset).floor() as i64;
    let hi = (half / h - offset).ceil() as i64;
    (lo..=hi).map(|i| (i as f64 + offset) * h).filter(|v| v.abs() <= half).collect()
}

#[derive(Debug, Clone, Copy)]
struct Scales {
    /// Grid spacing of each u-chart piece.
    u: [f64; 5],
    t: f64,
    x: f64,
}

/// Quadrature against `nu` for one curve.
#[derive(Debug)]
pub struct NuQuadrature<'c> {
    curve: &'c CurveModel,
    config: QuadratureConfig,
    /// Spacings at level 0.
    base: Scales,
    /// Nodes for levels `-1 ..= refinement_levels - 1`.
    grids: Vec<OnceLock<Vec<Node>>>,
}

impl<'c> NuQuadrature<'c> {
    pub fn new(curve: &'c CurveModel, config: QuadratureConfig) -> Self {
        let br = curve.branches();
        // spacing is lambda times the width of each piece's cutoff transition
        let u_width: Vec<f64> =
            (0..5).map(|k| br.sep[k].sqrt() * (BRANCH_OUTER.sqrt() - BRANCH_INNER.sqrt())).collect();
        let t_width = (FAR_INNER.powf(-0.5) - FAR_OUTER.powf(-0.5)) / br.emax.sqrt();
        let min_sep = br.sep.iter().cloned().fold(f64::INFINITY, f64::min);
        let x_width = (BRANCH_OUTER - BRANCH_INNER) * min_sep;
        let mut cells = 0.0;
        for k in 0..5 {
            cells += PI * (br.sep[k] * BRANCH_OUTER) / (u_width[k] * u_width[k]);
        }
        cells += PI / (FAR_INNER * br.emax) / (t_width * t_width);
        cells += 2.0 * PI * (FAR_OUTER * br.emax).powi(2) / (x_width * x_width);
        let lambda = (cells / config.n_nodes as f64).sqrt();
        let base = Scales { u: std::array::from_fn(|k| lambda * u_width[k]), t: lambda * t_width, x: lambda * x_width };
        let grids = (0..=config.refinement_levels).map(|_| OnceLock::new()).collect();
        Self { curve, config, base, grids }
    }

    pub fn curve(&self) -> &CurveModel {
        self.curve
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    /// Finest level used by [`integrate`](Self::integrate).
    pub fn top_level(&self) -> i32 {
        self.config.refinement_levels as i32 - 1
    }

    /// Spacing factor of `level` relative to level 0.
    fn refine(level: i32) -> f64 {
        2f64.sqrt().powi(-level)
    }

    fn offset(&self, piece: u64) -> [f64; 2] {
        let s = (self.config.seed.wrapping_mul(31).wrapping_add(piece)) as f64;
        [(s * 0.754_877_666_246_693).fract(), (s * 0.569_840_290_998_053).fract()]
    }

    fn grid(&self, level: i32) -> &[Node] {
        self.grids[(level + 1) as usize].get_or_init(|| {
            let f = Self::refine(level);
            let mut nodes = Vec::new();
            for k in 0..5 {
                nodes.extend(self.u_piece(k, self.base.u[k] * f));
            }
            nodes.extend(self.t_piece(self.base.t * f));
            nodes.extend(self.x_piece(self.base.x * f));
            nodes
        })
    }

    fn u_piece(&self, k: usize, h: f64) -> Vec<Node> {
        let curve = self.curve;
        let br = curve.branches();
        let half = (BRANCH_OUTER * br.sep[k]).sqrt();
        let [o1, o2] = self.offset(k as u64);
        let xs = grid_axis(half, h, o1);
        let ys = grid_axis(half, h, o2);
        let aj0 = curve.aj_raw(&CurvePoint::Affine { x: br.e[k], y: C64::new(0.0, 0.0), sheet: 1 });
        let zero = C64::new(0.0, 0.0);
        let rows: Vec<Vec<Node>> = ys
            .par_iter()
            .map(|&v| {
                let mut row = Vec::new();
                for &re in &xs {
                    let u = C64::new(re, v);
                    let (_, x, y) = br.u_integrand(k, u);
                    let chi = branch_cutoff(br, k, x);
                    if chi == 0.0 {
                        continue;
                    }
                    let seg = br.u_segment(k, zero, u, &PathParams::STANDARD);
                    let z = curve.normalize(&[aj0[0] + seg[0], aj0[1] + seg[1]]);
                    row.push(Node {
                        point: curve.point_unchecked(x, y),
                        z: [z[0], z[1]],
                        weight: h * h * chi * curve.nu_density_u(k, u),
                    });
                }
                row
            })
            .collect();
        rows.into_iter().flatten().collect()
    }

    fn t_piece(&self, h: f64) -> Vec<Node> {
        let curve = self.curve;
        let br = curve.branches();
        let half = 1.0 / (FAR_INNER * br.emax).sqrt();
        let [o1, o2] = self.offset(5);
        let xs = grid_axis(half, h, o1);
        let ys = grid_axis(half, h, o2);
        let zero = C64::new(0.0, 0.0);
        let rows: Vec<Vec<Node>> = ys
            .par_iter()
            .map(|&v| {
                let mut row = Vec::new();
                for &re in &xs {
                    let t = C64::new(re, v);
                    let chi = if t.norm() == 0.0 { 1.0 } else { far_cutoff(br, t.norm_sqr().recip()) };
                    if chi == 0.0 {
                        continue;
                    }
                    let point = if t.norm() == 0.0 {
                        CurvePoint::Infinity
                    } else {
                        curve.point_unchecked(t.powi(-2), br.s(t) / t.powi(5))
                    };
                    let z = curve.normalize(&br.t_segment(zero, t, &PathParams::STANDARD));
                    row.push(Node { point, z: [z[0], z[1]], weight: h * h * chi * curve.nu_density_t(t) });
                }
                row
            })
            .collect();
        rows.into_iter().flatten().collect()
    }

    fn x_piece(&self, h: f64) -> Vec<Node> {
        let curve = self.curve;
        let br = curve.branches();
        let half = FAR_OUTER * br.emax;
        let [o1, o2] = self.offset(6);
        let xs = grid_axis(half, h, o1);
        let ys = grid_axis(half, h, o2);
        let rows: Vec<Vec<Node>> = ys
            .par_iter()
            .map(|&v| {
                let mut row = Vec::new();
                // (x, y, raw Abel-Jacobi) at the previous node of this row
                let mut prev: Option<(C64, C64, Pair)> = None;
                for &re in &xs {
                    let x = C64::new(re, v);
                    let mut rest = 1.0 - far_cutoff(br, x.norm());
                    for k in 0..5 {
                        rest -= branch_cutoff(br, k, x);
                    }
                    if rest.abs() < 1e-300 || br.dist(x) < BRANCH_INNER * 0.999 * min_sep(br) {
                        prev = None;
                        continue;
                    }
                    let (y, raw) = match prev {
                        Some((xp, yp, rawp)) => {
                            let (seg, y) = br.x_segment(xp, yp, x, &PathParams::STANDARD);
                            (y, [rawp[0] + seg[0], rawp[1] + seg[1]])
                        }
                        None => {
                            let p = curve.point(x, 1);
                            (p.y().unwrap(), curve.aj_raw(&p))
                        }
                    };
                    prev = Some((x, y, raw));
                    let p = curve.point_unchecked(x, y);
                    let w = h * h * rest * curve.nu_density(&p).unwrap_or(0.0);
                    let z = curve.normalize(&raw);
                    row.push(Node { point: p, z: [z[0], z[1]], weight: w });
                    row.push(Node { point: super::involution(&p), z: [-z[0], -z[1]], weight: w });
                }
                row
            })
            .collect();
        rows.into_iter().flatten().collect()
    }

    /// Number of regular nodes at `level`.
    pub fn node_count(&self, level: i32) -> usize {
        self.grid(level).len()
    }

    /// Disk around a declared singular point, in the chart best suited to it.
    fn disk_geometry(&self, p: &CurvePoint, aj_center: Pair, others: &[CurvePoint]) -> Disk {
        let curve = self.curve;
        let br = curve.branches();
        let t_max = 1.0 / br.emax.sqrt();
        let mut disk = match *p {
            CurvePoint::Infinity => {
                Disk { chart: Chart::T, center: C64::new(0.0, 0.0), radius: 0.6 * t_max, aj_center }
            }
            CurvePoint::Affine { x, y, .. } => {
                let near = (0..5).find(|&k| (x - br.e[k]).norm() < 0.5 * br.sep[k]);
                if let Some(k) = near {
                    let u = br.u_of(k, x, y);
                    Disk { chart: Chart::U(k), center: u, radius: 0.9 * br.sep[k].sqrt() - u.norm(), aj_center }
                } else if x.norm() > 2.0 * br.emax {
                    let t = br.t_of(x, y);
                    Disk { chart: Chart::T, center: t, radius: 0.6 * (t_max - t.norm()), aj_center }
                } else {
                    Disk {
                        chart: Chart::X { y_center: y },
                        center: x,
                        radius: (0.6 * br.dist(x)).min(br.emax),
                        aj_center,
                    }
                }
            }
        };
        // keep the other singular points outside the support of psi
        for q in others {
            if let Some(w) = disk.local(br, q) {
                let d = (w - disk.center).norm();
                if d > 0.0 {
                    disk.radius = disk.radius.min(0.9 * d);
                }
            }
        }
        disk
    }

    /// Nodes and weights for integrating at `level` an integrand with
    /// integrable log singularities at most at the points of `singular`.
    pub fn prepare(&self, level: i32, singular: &[CurvePoint]) -> Prepared<'_> {
        let sing: Vec<(CurvePoint, Pair)> = singular.iter().map(|p| (*p, self.curve.aj_raw(p))).collect();
        self.prepare_raw(level, &sing)
    }

    /// As [`prepare`](Self::prepare), with the normalized Abel-Jacobi image
    /// of each singular point supplied by the caller.
    pub fn prepare_at(&self, level: i32, singular: &[(CurvePoint, [C64; 2])]) -> Prepared<'_> {
        let a = self.curve.period_a();
        let sing: Vec<(CurvePoint, Pair)> = singular
            .iter()
            .map(|(p, z)| (*p, [a[(0, 0)] * z[0] + a[(0, 1)] * z[1], a[(1, 0)] * z[0] + a[(1, 1)] * z[1]]))
            .collect();
        self.prepare_raw(level, &sing)
    }

    fn prepare_raw(&self, level: i32, singular: &[(CurvePoint, Pair)]) -> Prepared<'_> {
        let mut sing: Vec<(CurvePoint, Pair)> = Vec::new();
        for p in singular {
            if !sing.iter().any(|q| q.0.distance(&p.0) < 1e-12) {
                sing.push(*p);
            }
        }
        let disks: Vec<SingularDisk> = (0..sing.len())
            .map(|i| {
                let others: Vec<CurvePoint> =
                    sing.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.0).collect();
                self.singular_disk_raw(level, i, &sing[i].0, sing[i].1, &others)
            })
            .collect();
        let regular = self.grid(level);
        let weights = regular
            .iter()
            .map(|node| {
                let psi: f64 = disks.iter().map(|d| d.psi(self.curve, &node.point)).sum();
                node.weight * (1.0 - psi)
            })
            .collect();
        let disk = disks.into_iter().flat_map(|d| d.nodes).collect();
        Prepared { regular, weights, disk }
    }

    /// Regular nodes of `level`, with their undamped weights.
    pub fn regular(&self, level: i32) -> &[Node] {
        self.grid(level)
    }

    /// Disk around the singular point `p` with normalized Abel-Jacobi image
    /// `z`, kept clear of `others`. `index` selects the angular offset; the
    /// disks of one integrand should have distinct indices.
    pub fn singular_disk(
        &self,
        level: i32,
        index: usize,
        p: &CurvePoint,
        z: [C64; 2],
        others: &[CurvePoint],
    ) -> SingularDisk {
        let a = self.curve.period_a();
        let raw = [a[(0, 0)] * z[0] + a[(0, 1)] * z[1], a[(1, 0)] * z[0] + a[(1, 1)] * z[1]];
        self.singular_disk_raw(level, index, p, raw, others)
    }

    fn singular_disk_raw(
        &self,
        level: i32,
        index: usize,
        p: &CurvePoint,
        raw: Pair,
        others: &[CurvePoint],
    ) -> SingularDisk {
        let br = self.curve.branches();
        let disk = self.disk_geometry(p, raw, others);
        let lambda = self.base.x / ((BRANCH_OUTER - BRANCH_INNER) * min_sep(br)) * Self::refine(level);
        let per_panel = ((0.5 / lambda).ceil() as usize).clamp(3, 32);
        let outer = ((2.5 / lambda).ceil() as usize).clamp(8, 64);
        let n_phi = ((2.0 * PI / lambda).ceil() as usize).max(12);
        let nodes = disk.nodes(self.curve, per_panel, outer, n_phi, self.offset(100 + index as u64)[0]);
        let bound = match disk.chart {
            Chart::X { .. } => Bound::Near { center: disk.center, radius: disk.radius },
            Chart::U(k) => Bound::Near {
                center: br.e[k] + disk.center * disk.center,
                radius: disk.radius * (2.0 * disk.center.norm() + disk.radius),
            },
            Chart::T => Bound::Far { min_abs: (disk.center.norm() + disk.radius).powi(-2) },
        };
        SingularDisk { disk, bound, nodes }
    }

    /// Integrate `h nu` at one level, `h` having integrable log
    /// singularities at most at the points of `singular`.
    pub fn integrate_level<F>(&self, level: i32, h: &F, singular: &[CurvePoint]) -> Result<f64>
    where
        F: Fn(&Node) -> f64 + Sync,
    {
        self.prepare(level, singular).par_sum(h)
    }

    /// Finest-level estimate and its difference to the next coarser level.
    pub fn integrate<F>(&self, h: F, singular: &[CurvePoint]) -> Result<Estimate>
    where
        F: Fn(&Node) -> f64 + Sync,
    {
        let top = self.top_level();
        let fine = self.integrate_level(top, &h, singular)?;
        let coarse = self.integrate_level(top - 1, &h, singular)?;
        Ok(Estimate { value: fine, error: (fine - coarse).abs() })
    }
}

/// Quadrature nodes for one level and one set of singular points. Regular
/// nodes carry `weights` in place of their own weight; disk nodes are used
/// as they are.
#[derive(Debug)]
pub struct Prepared<'q> {
    pub regular: &'q [Node],
    pub weights: Vec<f64>,
    pub disk: Vec<Node>,
}

impl Prepared<'_> {
    pub fn len(&self) -> usize {
        self.regular.len() + self.disk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn reduce(terms: impl Iterator<Item = f64>) -> Result<f64> {
        let mut acc = CompensatedSum::default();
        for (i, t) in terms.enumerate() {
            if !t.is_finite() {
                return Err(Error::Divergent(format!("integrand is not finite at node {i}")));
            }
            acc.add(t);
        }
        Ok(acc.value())
    }

    /// Sequential sum of `h` against the prepared weights.
    pub fn sum<F>(&self, h: F) -> Result<f64>
    where
        F: Fn(&Node) -> f64,
    {
        let regular = self.regular.iter().zip(&self.weights).map(|(n, &w)| if w == 0.0 { 0.0 } else { w * h(n) });
        let disk = self.disk.iter().map(|n| n.weight * h(n));
        Self::reduce(regular.chain(disk))
    }

    /// As [`sum`](Self::sum), evaluating `h` in parallel. The reduction
    /// order is fixed.
    pub fn par_sum<F>(&self, h: &F) -> Result<f64>
    where
        F: Fn(&Node) -> f64 + Sync,
    {
        let mut terms: Vec<f64> = self
            .regular
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(n, &w)| if w == 0.0 { 0.0 } else { w * h(n) })
            .collect();
        terms.extend(self.disk.par_iter().map(|n| n.weight * h(n)).collect::<Vec<_>>());
        Self::reduce(terms.into_iter())
    }
}

fn min_sep(br: &Branches) -> f64 {
    br.sep.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `int h nu` over the curve at the configured resolution.
pub fn integrate_nu<F>(curve: &CurveModel, h: F, config: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&Node) -> f64 + Sync,
{
    NuQuadrature::new(curve, *config).integrate(h, &[])
}
