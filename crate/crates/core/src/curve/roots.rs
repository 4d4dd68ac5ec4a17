//! Roots of a monic polynomial by simultaneous (Aberth) iteration.

use crate::error::{Error, Result};
use crate::siegel::C64;

/// Evaluate `sum coeffs[k] x^k` and its derivative.
pub fn horner(coeffs: &[C64], x: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// All roots of the monic polynomial with ascending coefficients `coeffs`
/// (`coeffs.last() == 1`), polished by Newton steps.
pub fn roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let bound = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> =
        (0..n).map(|k| C64::from_polar(0.5 * bound, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let mut converged = false;
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged && z.iter().any(|&r| horner(coeffs, r).0.norm() > 1e-10 * bound.powi(n as i32)) {
        return Err(Error::Convergence("polynomial root iteration did not converge".into()));
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, *r);
            if dp.norm() > 0.0 {
                *r -= p / dp;
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_x5_minus_x() {
        let c = |v: f64| C64::new(v, 0.0);
        let coeffs = [c(0.0), c(-1.0), c(0.0), c(0.0), c(0.0), c(1.0)];
        let mut r = roots(&coeffs).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let expected = [c(-1.0), C64::new(0.0, -1.0), c(0.0), C64::new(0.0, 1.0), c(1.0)];
        for (a, b) in r.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-13, "{a} vs {b}");
        }
    }
}
