//! The Lobachevsky function, the volume functional and its derivatives along
//! segments of the closed polytope.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{AngleVector, FlatSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LobachevskyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("segment parameter {0} outside the open interval (0, 1)")]
    ParameterOutOfRange(f64),
    #[error("coordinate {0} sits at 0 or pi but is not in the flat set")]
    InconsistentFlatSet(usize),
    #[error("negative argument `{name}` = {value}")]
    NegativeArgument { name: &'static str, value: f64 },
}

const SERIES_TERMS: usize = 40;

/// `zeta(2k) / (k (2k + 1) (2 pi)^(2k))` for `k = 1..=SERIES_TERMS`.
fn clausen_coefficients() -> &'static [f64; SERIES_TERMS] {
    static COEFFS: OnceLock<[f64; SERIES_TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut out = [0.0; SERIES_TERMS];
        let two_pi_sq = (2.0 * PI) * (2.0 * PI);
        let mut scale = 1.0;
        for (idx, c) in out.iter_mut().enumerate() {
            let k = idx + 1;
            scale /= two_pi_sq;
            let zeta = match k {
                1 => PI.powi(2) / 6.0,
                2 => PI.powi(4) / 90.0,
                3 => PI.powi(6) / 945.0,
                4 => PI.powi(8) / 9450.0,
                5 => PI.powi(10) / 93555.0,
                // direct sum; the tail past n = 200 is below 1e-25
                _ => {
                    1.0 + (2..=200)
                        .rev()
                        .map(|n| (n as f64).powi(-2 * k as i32))
                        .sum::<f64>()
                }
            };
            *c = zeta * scale / (k as f64 * (2 * k + 1) as f64);
        }
        out
    })
}

/// Clausen function `Cl2(x) = -int_0^x ln|2 sin(u/2)| du` for `|x| <= pi`.
fn clausen_reduced(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    let mut power = x;
    let mut sum = 0.0;
    for &c in clausen_coefficients() {
        power *= x2;
        let term = c * power;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    x - x * x.abs().ln() + sum
}

/// `Lambda(theta) = -int_0^theta ln|2 sin u| du`.
///
/// Odd and pi-periodic; evaluated as `Cl2(2 theta) / 2` through the
/// Bernoulli expansion of the Clausen function after range reduction.
pub fn lobachevsky(theta: f64) -> f64 {
    if !theta.is_finite() {
        return f64::NAN;
    }
    // reduce to (-pi/2, pi/2]
    let mut r = theta - PI * (theta / PI).round();
    if r <= -PI / 2.0 {
        r += PI;
    }
    0.5 * clausen_reduced(2.0 * r)
}

/// `-ln|2 sin theta|`, the derivative of [`lobachevsky`].
pub fn lobachevsky_derivative(theta: f64) -> f64 {
    -(2.0 * theta.sin()).abs().ln()
}

/// `vol(x) = 1/2 sum_i Lambda(x_i)`.
pub fn volume(x: &AngleVector) -> f64 {
    0.5 * x.iter().map(|&v| lobachevsky(v)).sum::<f64>()
}

/// Sum over tetrahedra of `Lambda(alpha) + Lambda(beta) + Lambda(gamma)`
/// using the three angles at vertex 0 of each tetrahedron.
pub fn volume_by_tetrahedra(x: &AngleVector) -> f64 {
    (0..x.len() / 6)
        .map(|t| {
            let a = x.tet(t);
            lobachevsky(a[0]) + lobachevsky(a[1]) + lobachevsky(a[2])
        })
        .sum()
}

/// Below this, `|sin x|` counts as zero for the `0 ln 0` convention.
const SINE_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDerivativeReport {
    pub t: f64,
    pub value: f64,
    /// Number of indices where the `0 ln 0 = 0` convention fired.
    pub convention_terms: usize,
}

fn check_segment(p: &AngleVector, q: &AngleVector, t: f64) -> Result<(), LobachevskyError> {
    if p.len() != q.len() {
        return Err(LobachevskyError::DimensionMismatch(p.len(), q.len()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(LobachevskyError::ParameterOutOfRange(t));
    }
    Ok(())
}

fn segment_derivative_with(
    p: &AngleVector,
    q: &AngleVector,
    t: f64,
    sine_scale: f64,
) -> Result<SegmentDerivativeReport, LobachevskyError> {
    check_segment(p, q, t)?;
    let mut value = 0.0;
    let mut convention_terms = 0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        let a = qi - pi;
        let x = (1.0 - t) * pi + t * qi;
        let s = x.sin().abs();
        if a == 0.0 {
            if s < SINE_ZERO {
                convention_terms += 1;
            }
            continue;
        }
        value += a * (sine_scale * s).ln();
    }
    Ok(SegmentDerivativeReport {
        t,
        value: -0.5 * value,
        convention_terms,
    })
}

/// `f'(t)` for `f(t) = vol((1 - t) p + t q)` in the reduced form
/// `-1/2 sum a_i ln|sin x_i(t)|`, which uses `sum a_i = 0`.
pub fn segment_derivative(
    p: &AngleVector,
    q: &AngleVector,
    t: f64,
) -> Result<SegmentDerivativeReport, LobachevskyError> {
    segment_derivative_with(p, q, t, 1.0)
}

/// `f'(t)` straight from differentiating the volume: `-1/2 sum a_i ln|2 sin x_i(t)|`.
/// Differs from [`segment_derivative`] by `-ln 2 / 2 * sum a_i`.
pub fn segment_derivative_unreduced(
    p: &AngleVector,
    q: &AngleVector,
    t: f64,
) -> Result<SegmentDerivativeReport, LobachevskyError> {
    segment_derivative_with(p, q, t, 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLimitReport {
    /// `lim_{t -> 0+} f'(t)`; `+inf` when some non-flat boundary coordinate
    /// moves inward, where the derivative diverges.
    pub value: f64,
    /// `sum_{i not in J} a_i ln|sin p_i|`.
    pub smooth_part: f64,
    /// `sum_{i in J} a_i ln|a_i|`.
    pub entropy_part: f64,
    /// `sum_{i in J} a_i`, the coefficient of `ln t` in `f'(t)`.
    pub log_coefficient: f64,
    pub convention_terms: usize,
}

/// One-sided derivative of the volume at `p` in the direction of `q`.
///
/// Near `t = 0` a coordinate at 0 or pi contributes `a_i (ln t + ln|a_i|)` to
/// `sum a_i ln|sin x_i(t)|`, so
/// `lim f'(t) = -1/2 (sum_{i not in J} a_i ln|sin p_i| + sum_{i in J} a_i ln|a_i|)`
/// whenever the `ln t` terms cancel, which happens when `J` is a union of
/// flat tetrahedra and `p`, `q` satisfy the vertex equations.
pub fn boundary_derivative_limit(
    p: &AngleVector,
    q: &AngleVector,
    flat: &FlatSet,
) -> Result<BoundaryLimitReport, LobachevskyError> {
    if p.len() != q.len() {
        return Err(LobachevskyError::DimensionMismatch(p.len(), q.len()));
    }
    let mut smooth_part = 0.0;
    let mut entropy_part = 0.0;
    let mut log_coefficient = 0.0;
    let mut magnitude: f64 = 0.0;
    let mut convention_terms = 0;
    for (i, (&pi, &qi)) in p.iter().zip(q.iter()).enumerate() {
        let a = qi - pi;
        magnitude = magnitude.max(a.abs());
        if flat.contains(i) {
            log_coefficient += a;
            if a == 0.0 {
                convention_terms += 1;
            } else {
                entropy_part += a * a.abs().ln();
            }
        } else {
            let s = pi.sin().abs();
            if pi.min(PI - pi) <= 1e-14 || s == 0.0 {
                return Err(LobachevskyError::InconsistentFlatSet(i));
            }
            if a != 0.0 {
                smooth_part += a * s.ln();
            }
        }
    }
    let value = if log_coefficient > 1e-9 * magnitude.max(1.0) {
        f64::INFINITY
    } else if log_coefficient < -1e-9 * magnitude.max(1.0) {
        f64::NEG_INFINITY
    } else {
        -0.5 * (smooth_part + entropy_part)
    };
    Ok(BoundaryLimitReport {
        value,
        smooth_part,
        entropy_part,
        log_coefficient,
        convention_terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyInequalityReport {
    pub lhs: f64,
    pub satisfied: bool,
}

pub const ENTROPY_TOL: f64 = 1e-12;

#[inline]
fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `(x+y) ln(x+y) - x ln x - y ln y - (c-a) x - (c-b) y`, which is `<= 0`
/// whenever `e^c >= e^a + e^b`. Equivalent to
/// `-x ln x - y ln y - z ln|z| + a x + b y + c z` with `z = -x - y`.
pub fn entropy_inequality(
    x: f64,
    y: f64,
    a: f64,
    b: f64,
    c: f64,
) -> Result<EntropyInequalityReport, LobachevskyError> {
    for (name, value) in [("x", x), ("y", y), ("a", a), ("b", b), ("c", c)] {
        if value < 0.0 || value.is_nan() {
            return Err(LobachevskyError::NegativeArgument { name, value });
        }
    }
    let lhs = x_ln_x(x + y) - x_ln_x(x) - x_ln_x(y) - (c - a) * x - (c - b) * y;
    Ok(EntropyInequalityReport {
        lhs,
        satisfied: lhs <= ENTROPY_TOL,
    })
}

#[cfg(test)]
#[path = "../tests/common/quadrature.rs"]
mod quadrature;
