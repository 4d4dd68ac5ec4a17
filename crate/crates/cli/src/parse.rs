//! Complex numbers, coordinate lists and period matrices from the command line.

use nalgebra::DMatrix;
use thetadiv::{Error, C64};

pub fn complex(s: &str) -> Result<C64, Error> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    t.parse::<C64>().map_err(|_| Error::Domain(format!("cannot parse complex number {s:?}")))
}

pub fn complex_list(s: &str) -> Result<Vec<C64>, Error> {
    s.split(',').map(complex).collect()
}

/// `diag(a,b,..)` or `g*g` comma-separated entries, row by row.
pub fn period_matrix(g: usize, s: &str) -> Result<DMatrix<C64>, Error> {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let d = complex_list(inner)?;
        if d.len() != g {
            return Err(Error::Domain(format!("diag() needs {g} entries, got {}", d.len())));
        }
        return Ok(DMatrix::from_fn(g, g, |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) }));
    }
    let e = complex_list(t)?;
    if e.len() != g * g {
        return Err(Error::Domain(format!("tau needs {} entries, got {}", g * g, e.len())));
    }
    Ok(DMatrix::from_row_slice(g, g, &e))
}
