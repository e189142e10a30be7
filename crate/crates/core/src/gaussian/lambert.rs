//! Principal branch W0 of the Lambert W function.

use crate::error::{Error, Result};

const INV_E: f64 = 0.367_879_441_171_442_33;

/// w with w·e^w = x on the principal branch, for x ≥ −1/e.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < -INV_E {
        return Err(Error::Domain(format!("lambert_w0 is undefined below -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == -INV_E {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x > 1.0 {
        // Newton on w + ln w = ln x, which never overflows.
        let lx = x.ln();
        let mut w = if x < 10.0 { lx.max(0.5) } else { lx - lx.ln() + lx.ln() / lx };
        for _ in 0..100 {
            let g = w + w.ln() - lx;
            let step = g * w / (w + 1.0);
            w -= step;
            if step.abs() <= 1e-16 * w {
                break;
            }
        }
        return Ok(w);
    }
    let p2 = 2.0 * (1.0 + std::f64::consts::E * x);
    let mut w = if p2 < 0.5 {
        let p = p2.max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p.powi(3) - 43.0 / 540.0 * p.powi(4)
    } else {
        x.ln_1p()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 1e-16 * (1.0 + w.abs()) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}
