//! Local charts of `y^2 = f(x)` and integration of `(dx/y, x dx/y)` along
//! paths on the curve.
//!
//! Three kinds of chart are used:
//! * the x-chart away from branch points, with `y` continued explicitly by
//!   `y(x) = y(a) prod_k sqrt(1 + (x - a)/(a - e_k))` inside the largest disk
//!   around `a` free of branch points;
//! * the u-chart at a branch point `e_k`: `x = e_k + u^2`, `y = u h_k(x)`;
//! * the t-chart at infinity: `x = t^-2`, `y = t^-5 s(t)`.
//!
//! No global branch cut is ever crossed: every square root taken has its
//! argument within distance one of 1.

use crate::numeric::{csqrt, gl_cached};
use crate::siegel::C64;

pub type Pair = [C64; 2];

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn add(a: Pair, b: Pair) -> Pair {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: Pair, s: C64) -> Pair {
    [a[0] * s, a[1] * s]
}

/// Branch-point data of a monic quintic.
#[derive(Debug, Clone)]
pub struct Branches {
    pub e: [C64; 5],
    /// Distance from `e_k` to the nearest other branch point.
    pub sep: [f64; 5],
    /// `prod_{j != k} sqrt(e_k - e_j)`.
    h0: [C64; 5],
    /// `max(1, max_k |e_k|)`.
    pub emax: f64,
}

impl Branches {
    pub fn new(e: [C64; 5]) -> Self {
        let mut sep = [f64::INFINITY; 5];
        let mut h0 = [C64::new(1.0, 0.0); 5];
        for k in 0..5 {
            for j in 0..5 {
                if j != k {
                    sep[k] = sep[k].min((e[k] - e[j]).norm());
                    h0[k] *= csqrt(e[k] - e[j]);
                }
            }
        }
        let emax = e.iter().map(|v| v.norm()).fold(1.0, f64::max);
        Self { e, sep, h0, emax }
    }

    pub fn f(&self, x: C64) -> C64 {
        self.e.iter().map(|&ek| x - ek).product()
    }

    /// Distance from `x` to the nearest branch point.
    pub fn dist(&self, x: C64) -> f64 {
        self.e.iter().map(|&ek| (x - ek).norm()).fold(f64::INFINITY, f64::min)
    }

    /// `prod_k sqrt(x - e_k)` with principal roots; the global sheet
    /// convention.
    pub fn y_principal(&self, x: C64) -> C64 {
        self.e.iter().map(|&ek| csqrt(x - ek)).product()
    }

    /// Continue `y` from `(a, ya)` to `x`; requires `|x - a| < dist(a)`.
    pub fn y_continue(&self, a: C64, ya: C64, x: C64) -> C64 {
        let d = x - a;
        ya * self.e.iter().map(|&ek| csqrt(C64::new(1.0, 0.0) + d / (a - ek))).product::<C64>()
    }

    /// `h_k(x)` with `h_k^2 = prod_{j != k} (x - e_j)`; valid for
    /// `|x - e_k| < sep_k`.
    pub fn h(&self, k: usize, x: C64) -> C64 {
        let ek = self.e[k];
        let mut acc = self.h0[k];
        for (j, &ej) in self.e.iter().enumerate() {
            if j != k {
                acc *= csqrt(C64::new(1.0, 0.0) + (x - ek) / (ek - ej));
            }
        }
        acc
    }

    /// `s(t) = prod_k sqrt(1 - e_k t^2)`; valid for `|t|^2 emax < 1`.
    pub fn s(&self, t: C64) -> C64 {
        let t2 = t * t;
        self.e.iter().map(|&ek| csqrt(C64::new(1.0, 0.0) - ek * t2)).product()
    }

    /// u-coordinate of `(x, y)` at branch point `k`.
    pub fn u_of(&self, k: usize, x: C64, y: C64) -> C64 {
        y / self.h(k, x)
    }

    /// t-coordinate of `(x, y)` near infinity.
    pub fn t_of(&self, x: C64, y: C64) -> C64 {
        let t = csqrt(x.inv());
        let yt = self.s(t) / t.powi(5);
        if (yt - y).norm() <= (yt + y).norm() {
            t
        } else {
            -t
        }
    }

    pub fn x_integrand(x: C64, y: C64) -> Pair {
        let r = y.inv();
        [r, x * r]
    }

    pub fn u_integrand(&self, k: usize, u: C64) -> (Pair, C64, C64) {
        let x = self.e[k] + u * u;
        let h = self.h(k, x);
        let r = C64::new(2.0, 0.0) / h;
        ([r, x * r], x, u * h)
    }

    pub fn t_integrand(&self, t: C64) -> Pair {
        let s = self.s(t);
        let r = C64::new(-2.0, 0.0) / s;
        [r * t * t, r]
    }
}

/// Accuracy controls for path integration.
#[derive(Debug, Clone, Copy)]
pub struct PathParams {
    /// Gauss-Legendre nodes per piece.
    pub gl: usize,
    /// Maximal piece length in units of the distance to the nearest
    /// singularity of the chart.
    pub piece: f64,
    /// Radius of the u-chart detour disks in units of `sep_k`.
    pub circle: f64,
}

impl PathParams {
    pub const STANDARD: PathParams = PathParams { gl: 16, piece: 0.25, circle: 0.3 };
    pub const REFINED: PathParams = PathParams { gl: 32, piece: 0.125, circle: 0.3 };
}

/// How a path ends.
#[derive(Debug, Clone, Copy)]
pub enum PathEnd {
    /// At the curve point `(x, y)` given by the last waypoint and `y`.
    Point(C64),
    /// On the boundary of the detour disk of branch point `k`, along the
    /// last segment.
    CircleEntry(usize),
}

/// Result of integrating along a path.
#[derive(Debug, Clone, Copy)]
pub struct Traced {
    pub integral: Pair,
    /// Final `x` and tracked `y`.
    pub x: C64,
    pub y: C64,
    /// Whether the path provably ends at the requested `(x, y)`; if false,
    /// it ends at `(x, y)` with `y` equal to plus or minus the target.
    pub exact: bool,
}

impl Branches {
    fn radius(&self, k: usize, p: &PathParams) -> f64 {
        p.circle * self.sep[k]
    }

    /// Integrate in the x-chart along the straight segment `a -> b`; the
    /// segment must avoid all branch points.
    pub fn x_segment(&self, a: C64, ya: C64, b: C64, p: &PathParams) -> (Pair, C64) {
        let (nodes, weights) = gl_cached(p.gl);
        let mut acc = [zero(), zero()];
        let mut cur = a;
        let mut ycur = ya;
        let total = (b - a).norm();
        if total == 0.0 {
            return (acc, ya);
        }
        let dir = (b - a) / total;
        let mut travelled = 0.0;
        while travelled < total {
            let len = (total - travelled).min(p.piece * self.dist(cur));
            let next = if travelled + len >= total { b } else { cur + dir * len };
            let half = (next - cur) * 0.5;
            let mid = cur + half;
            let mut piece = [zero(), zero()];
            for (xi, wi) in nodes.iter().zip(weights) {
                let x = mid + half * *xi;
                let y = self.y_continue(cur, ycur, x);
                piece = add(piece, scale(Self::x_integrand(x, y), C64::new(*wi, 0.0)));
            }
            acc = add(acc, scale(piece, half));
            ycur = self.y_continue(cur, ycur, next);
            cur = next;
            travelled += len;
        }
        (acc, ycur)
    }

    /// Integrate in the u-chart of branch point `k` along `ua -> ub`.
    pub fn u_segment(&self, k: usize, ua: C64, ub: C64, p: &PathParams) -> Pair {
        let (nodes, weights) = gl_cached(p.gl);
        let maxlen = p.piece * self.sep[k].sqrt();
        let n = ((ub - ua).norm() / maxlen).ceil().max(1.0) as usize;
        let mut acc = [zero(), zero()];
        for i in 0..n {
            let a = ua + (ub - ua) * (i as f64 / n as f64);
            let b = ua + (ub - ua) * ((i + 1) as f64 / n as f64);
            let half = (b - a) * 0.5;
            let mid = a + half;
            for (xi, wi) in nodes.iter().zip(weights) {
                let (v, _, _) = self.u_integrand(k, mid + half * *xi);
                acc = add(acc, scale(v, half * *wi));
            }
        }
        acc
    }

    /// Integrate in the t-chart along `ta -> tb`.
    pub fn t_segment(&self, ta: C64, tb: C64, p: &PathParams) -> Pair {
        let (nodes, weights) = gl_cached(p.gl);
        let maxlen = p.piece / self.emax.sqrt();
        let n = ((tb - ta).norm() / maxlen).ceil().max(1.0) as usize;
        let mut acc = [zero(), zero()];
        for i in 0..n {
            let a = ta + (tb - ta) * (i as f64 / n as f64);
            let b = ta + (tb - ta) * ((i + 1) as f64 / n as f64);
            let half = (b - a) * 0.5;
            let mid = a + half;
            for (xi, wi) in nodes.iter().zip(weights) {
                let v = self.t_integrand(mid + half * *xi);
                acc = add(acc, scale(v, half * *wi));
            }
        }
        acc
    }

    /// Parameters `s1 < s2` where the line `a + s (b - a)` meets the circle
    /// `|x - c| = r`, if it does.
    fn circle_params(a: C64, b: C64, c: C64, r: f64) -> Option<(f64, f64)> {
        let d = b - a;
        let w = a - c;
        let qa = d.norm_sqr();
        let qb = 2.0 * (d.re * w.re + d.im * w.im);
        let qc = w.norm_sqr() - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        if qa == 0.0 || disc <= 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some(((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)))
    }

    /// Integrate from `(start, y_start)` through `waypoints`, ending as
    /// requested. Waypoints other than the last must lie outside every
    /// detour disk; so must `start`.
    pub fn trace(&self, start: C64, y_start: C64, waypoints: &[C64], end: PathEnd, p: &PathParams) -> Traced {
        let mut acc = [zero(), zero()];
        let mut cur = start;
        let mut ycur = y_start;
        for (i, &b) in waypoints.iter().enumerate() {
            let last = i + 1 == waypoints.len();
            let a = cur;
            // detour disks met by this segment, in order
            let mut hits: Vec<(f64, f64, usize)> = (0..5)
                .filter_map(|k| {
                    Self::circle_params(a, b, self.e[k], self.radius(k, p))
                        .filter(|&(s1, _)| s1 > 0.0 && s1 < 1.0)
                        .map(|(s1, s2)| (s1, s2, k))
                })
                .collect();
            hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            for (s1, s2, k) in hits {
                let x_in = a + (b - a) * s1;
                let (piece, y_in) = self.x_segment(cur, ycur, x_in, p);
                acc = add(acc, piece);
                let u_in = self.u_of(k, x_in, y_in);
                let ends_here = last && (s2 >= 1.0 || matches!(end, PathEnd::CircleEntry(j) if j == k));
                if ends_here {
                    return match end {
                        PathEnd::CircleEntry(_) => Traced { integral: acc, x: x_in, y: y_in, exact: true },
                        PathEnd::Point(yt) => {
                            let u_t = self.u_of(k, b, yt);
                            acc = add(acc, self.u_segment(k, u_in, u_t, p));
                            Traced { integral: acc, x: b, y: yt, exact: true }
                        }
                    };
                }
                let x_out = a + (b - a) * s2;
                let r = csqrt(x_out - self.e[k]);
                let u_out = if (r - u_in).norm() <= (r + u_in).norm() { r } else { -r };
                acc = add(acc, self.u_segment(k, u_in, u_out, p));
                ycur = u_out * self.h(k, x_out);
                cur = x_out;
            }
            // no disk left on this segment
            if last {
                if let PathEnd::Point(yt) = end {
                    if let Some(k) = (0..5).find(|&k| (b - self.e[k]).norm() < self.radius(k, p)) {
                        // the segment started inside the disk of `k`
                        let u_a = self.u_of(k, cur, ycur);
                        let u_t = self.u_of(k, b, yt);
                        acc = add(acc, self.u_segment(k, u_a, u_t, p));
                        return Traced { integral: acc, x: b, y: yt, exact: true };
                    }
                }
            }
            let (piece, yb) = self.x_segment(cur, ycur, b, p);
            acc = add(acc, piece);
            cur = b;
            ycur = yb;
        }
        Traced { integral: acc, x: cur, y: ycur, exact: false }
    }
}
