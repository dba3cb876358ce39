//! Adaptive quadrature of the defining integral of the Lobachevsky function,
//! kept independent of the series evaluation in the library.

use std::f64::consts::PI;

/// `ln(2 sin u / (u (pi - u)))`, smooth on `[0, pi]`.
fn smooth(u: f64) -> f64 {
    if u < 1e-6 {
        (2.0 * (1.0 - u * u / 6.0) / (PI - u)).ln()
    } else if PI - u < 1e-6 {
        let v = PI - u;
        (2.0 * (1.0 - v * v / 6.0) / u).ln()
    } else {
        (2.0 * u.sin() / (u * (PI - u))).ln()
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (flm, frm) = (smooth(0.5 * (a + m)), smooth(0.5 * (m + b)));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    adapt(a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + adapt(m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn x_ln_x(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// `-int_0^theta ln|2 sin u| du`: the logarithmic singularities at 0 and pi
/// are integrated in closed form, the smooth remainder adaptively.
pub fn lobachevsky_quadrature(theta: f64) -> f64 {
    let sign = theta.signum();
    let r = theta.abs() % PI;
    let remainder = if r == 0.0 {
        0.0
    } else {
        let (fa, fm, fb) = (smooth(0.0), smooth(r / 2.0), smooth(r));
        adapt(0.0, r, fa, fm, fb, simpson(0.0, r, fa, fm, fb), 1e-15, 40)
    };
    let log_u = x_ln_x(r) - r;
    let log_pi_minus_u = -x_ln_x(PI - r) + (PI - r) + x_ln_x(PI) - PI;
    sign * -(log_u + log_pi_minus_u + remainder)
}
