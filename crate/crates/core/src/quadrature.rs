//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Cap on the number of subintervals.
pub const MAX_INTERVALS: usize = 1 << 20;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`. `b < a` gives the
/// signed integral.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = MAX_INTERVALS;
    step(&mut f, a, b, fa, fm, fb, whole, tol, 0, &mut budget)
}

#[allow(clippy::too_many_arguments)]
fn step<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || m <= a || b <= m {
        return Ok(left + right + diff / 15.0);
    }
    if *budget == 0 || depth >= 60 {
        return Err(Error::Quadrature { a, b });
    }
    *budget -= 1;
    let l = step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, budget)?;
    let r = step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, budget)?;
    Ok(l + r)
}
