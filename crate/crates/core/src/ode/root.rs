use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootTolerance {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        Self {
            x_tol: 1e-12,
            f_tol: 0.0,
            max_iter: 200,
        }
    }
}

/// Bracketed root of a continuous scalar function: Illinois-modified secant
/// steps, falling back to bisection whenever the bracket stops halving.
pub fn refine_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: RootTolerance) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut side = 0i8;
    let mut stalls = 0;
    for _ in 0..tol.max_iter {
        let width = (b - a).abs();
        if width <= tol.x_tol {
            break;
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        if stalls >= 2 || !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
            stalls = 0;
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Domain(format!("root function is NaN at {x}")));
        }
        if fx.abs() <= tol.f_tol || fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == (fb > 0.0) {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() > 0.5 * width {
            stalls += 1;
        } else {
            stalls = 0;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}
