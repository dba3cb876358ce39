//! The angle-structure polytope and its closure.
//!
//! Coordinates are indexed by the incidence index: entry `6 t + k` is the
//! angle of tetrahedron `t` at the `k`-th vertex pair of [`EDGE_PAIRS`].
//! The closure is `{x in [0, pi]^I : vertex triples sum to pi, edges sum to 2 pi}`.
//!
//! [`EDGE_PAIRS`]: crate::triangulation::EDGE_PAIRS

use std::f64::consts::PI;
use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::triangulation::IncidenceIndex;

/// Default tolerance for boundary classification.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;
/// Tolerance on the max-min-slack value and on equality residuals.
pub const INTERIOR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty closure: {0}")]
    EmptyClosure(String),
    #[error("segment parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("non-finite angle at index {0}")]
    NonFinite(usize),
}

/// A point of `R^I`, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PolytopeError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PolytopeError::NonFinite(i));
        }
        Ok(AngleVector(values))
    }

    pub fn constant(len: usize, value: f64) -> Self {
        AngleVector(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// The six angles of tetrahedron `tet`.
    pub fn tet(&self, tet: usize) -> &[f64] {
        &self.0[6 * tet..6 * tet + 6]
    }

    pub fn max_abs_diff(&self, other: &AngleVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_dvector(v: &DVector<f64>) -> Self {
        AngleVector(v.iter().copied().collect())
    }

    pub(crate) fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl TryFrom<Vec<f64>> for AngleVector {
    type Error = PolytopeError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        AngleVector::new(values)
    }
}

impl From<AngleVector> for Vec<f64> {
    fn from(v: AngleVector) -> Self {
        v.0
    }
}

impl Index<usize> for AngleVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    /// Angles at one vertex of a tetrahedron sum to pi.
    VertexTriple,
    /// Angles around one edge sum to 2 pi.
    EdgeSum,
    /// Added by hand or by pinning.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityRow {
    pub kind: RowKind,
    /// Coefficient-one variables; repeated indices add up.
    pub indices: Vec<usize>,
    pub rhs: f64,
}

/// Equalities `A x = b` plus the box `0 <= x_i <= pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    n_vars: usize,
    rows: Vec<EqualityRow>,
}

impl LinearSystem {
    pub fn from_rows(n_vars: usize, rows: Vec<EqualityRow>) -> Self {
        LinearSystem { n_vars, rows }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of whole tetrahedra covered by the variables.
    pub fn n_tets(&self) -> usize {
        self.n_vars / 6
    }

    pub fn rows(&self) -> &[EqualityRow] {
        &self.rows
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows.len(), self.n_vars);
        for (r, row) in self.rows.iter().enumerate() {
            for &i in &row.indices {
                a[(r, i)] += 1.0;
            }
        }
        a
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.rhs))
    }

    /// Row-wise `(A x)_r - b_r`.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.indices.iter().map(|&i| x[i]).sum::<f64>() - row.rhs)
            .collect()
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.residuals(x).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// A copy with extra rows `x_i = value`.
    pub fn with_pins(&self, pins: &[(usize, f64)]) -> LinearSystem {
        let mut rows = self.rows.clone();
        rows.extend(pins.iter().map(|&(i, v)| EqualityRow {
            kind: RowKind::Custom,
            indices: vec![i],
            rhs: v,
        }));
        LinearSystem {
            n_vars: self.n_vars,
            rows,
        }
    }

    fn check_len(&self, len: usize) -> Result<(), PolytopeError> {
        if len != self.n_vars {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.n_vars,
                found: len,
            });
        }
        Ok(())
    }
}

/// Vertex-triple rows first, then one row per edge class.
pub fn build_constraints(idx: &IncidenceIndex) -> LinearSystem {
    let mut rows: Vec<EqualityRow> = idx
        .triples()
        .iter()
        .map(|tr| EqualityRow {
            kind: RowKind::VertexTriple,
            indices: tr.to_vec(),
            rhs: PI,
        })
        .collect();
    for class in idx.edge_classes() {
        rows.push(EqualityRow {
            kind: RowKind::EdgeSum,
            indices: class.members.iter().map(|&(t, p)| 6 * t + p).collect(),
            rhs: 2.0 * PI,
        });
    }
    LinearSystem::from_rows(idx.len(), rows)
}

/// Coordinates where a closure point sits at 0 or pi.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlatSet {
    indices: Vec<usize>,
}

impl FlatSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        FlatSet { indices }
    }

    pub fn empty() -> Self {
        FlatSet::default()
    }

    /// Coordinates of `x` within `tol` of 0 or pi.
    pub fn of(x: &[f64], tol: f64) -> Self {
        FlatSet::new(
            x.iter()
                .enumerate()
                .filter(|(_, &v)| v <= tol || v >= PI - tol)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// True when every tetrahedron touching the set lies entirely in it.
    pub fn is_tetrahedron_closed(&self) -> bool {
        self.indices
            .iter()
            .all(|&i| (6 * (i / 6)..6 * (i / 6) + 6).all(|j| self.contains(j)))
    }

    /// Tetrahedra all of whose six coordinates are in the set.
    pub fn whole_tets(&self) -> Vec<usize> {
        let mut tets: Vec<usize> = self.indices.iter().map(|i| i / 6).collect();
        tets.dedup();
        tets.into_iter()
            .filter(|&t| (6 * t..6 * t + 6).all(|j| self.contains(j)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Interior,
    Boundary(FlatSet),
    Infeasible {
        max_residual: f64,
        min_coord: f64,
        max_coord: f64,
    },
}

impl Membership {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Membership::Infeasible { .. })
    }
}

pub fn classify_membership(
    sys: &LinearSystem,
    x: &AngleVector,
    tol: f64,
) -> Result<Membership, PolytopeError> {
    sys.check_len(x.len())?;
    let max_residual = sys.max_residual(x.as_slice());
    let min_coord = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max_coord = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_residual > tol || min_coord < -tol || max_coord > PI + tol {
        return Ok(Membership::Infeasible {
            max_residual,
            min_coord,
            max_coord,
        });
    }
    let flat = FlatSet::of(x.as_slice(), tol);
    if flat.is_empty() {
        Ok(Membership::Interior)
    } else {
        Ok(Membership::Boundary(flat))
    }
}

/// Solution set of the equalities as `x0 + N y` with orthonormal `N`.
#[derive(Debug, Clone)]
pub struct AffineSpace {
    pub origin: DVector<f64>,
    pub basis: DMatrix<f64>,
    /// `|A x0 - b|_inf`; large when the equalities are inconsistent.
    pub consistency_residual: f64,
}

impl AffineSpace {
    pub fn new(sys: &LinearSystem) -> Self {
        let n = sys.n_vars();
        let a = sys.matrix();
        let b = sys.rhs();
        let m = a.nrows();
        // pad to at least n rows so the SVD returns the full right basis
        let rows = m.max(n);
        let mut padded = DMatrix::zeros(rows, n);
        padded.view_mut((0, 0), (m, n)).copy_from(&a);
        let mut rhs = DVector::zeros(rows);
        rhs.rows_mut(0, m).copy_from(&b);

        let svd = padded.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let cutoff = 1e-10 * sigma_max.max(1.0);

        let mut origin = DVector::zeros(n);
        let mut null_cols = Vec::new();
        for k in 0..svd.singular_values.len() {
            let s = svd.singular_values[k];
            let v_k = v_t.row(k).transpose();
            if s > cutoff {
                let coeff = u.column(k).dot(&rhs) / s;
                origin += v_k * coeff;
            } else {
                null_cols.push(v_k);
            }
        }
        let basis = if null_cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        let consistency_residual = (&a * &origin - &b).amax();
        AffineSpace {
            origin,
            basis,
            consistency_residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency_residual <= INTERIOR_TOL
    }

    pub fn point(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.origin + &self.basis * y
    }

    /// Orthogonal projection onto the affine space.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.basis.tr_mul(&(x - &self.origin));
        self.point(&y)
    }

    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(&(x - &self.origin))
    }
}

/// Result of the max-min-slack search.
#[derive(Debug, Clone, PartialEq)]
pub enum InteriorPoint {
    Interior {
        point: AngleVector,
        min_slack: f64,
    },
    /// The closure is nonempty but lies in the boundary; `witness` is a
    /// coordinate that cannot be made positive.
    EmptyInterior {
        witness: usize,
        closure_point: AngleVector,
        max_min_slack: f64,
    },
}

/// Point maximizing `min_i min(x_i, pi - x_i)` subject to the equalities.
pub fn interior_point(sys: &LinearSystem) -> Result<InteriorPoint, PolytopeError> {
    let space = AffineSpace::new(sys);
    if !space.is_consistent() {
        return Err(PolytopeError::EmptyClosure(format!(
            "equalities are inconsistent (residual {:.3e})",
            space.consistency_residual
        )));
    }
    let mask = vec![true; sys.n_vars()];
    let (x, slack) = max_min_slack(&space, &mask);
    if slack < -INTERIOR_TOL {
        return Err(PolytopeError::EmptyClosure(format!(
            "no equality solution fits the box (best slack {slack:.3e})"
        )));
    }
    let point = AngleVector::from_dvector(&x);
    if slack <= INTERIOR_TOL {
        let witness = (0..x.len())
            .min_by(|&i, &j| slack_of(x[i]).total_cmp(&slack_of(x[j])))
            .unwrap_or(0);
        return Ok(InteriorPoint::EmptyInterior {
            witness,
            closure_point: clamp_box(point),
            max_min_slack: slack,
        });
    }
    Ok(InteriorPoint::Interior {
        point,
        min_slack: slack,
    })
}

/// A point in the relative interior of the closure, together with the
/// coordinates that every closure point pins to 0 or pi.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeInterior {
    pub point: AngleVector,
    pub pinned: Vec<(usize, f64)>,
    /// Min slack over the unpinned coordinates.
    pub min_slack: f64,
}

/// Like [`interior_point`] but falls back to the relative interior of the
/// smallest face containing the closure.
pub fn relative_interior_point(sys: &LinearSystem) -> Result<RelativeInterior, PolytopeError> {
    match interior_point(sys)? {
        InteriorPoint::Interior { point, min_slack } => Ok(RelativeInterior {
            point,
            pinned: Vec::new(),
            min_slack,
        }),
        InteriorPoint::EmptyInterior { closure_point, .. } => {
            // Along the central path, coordinates forced onto the box collapse
            // with the barrier weight while the rest stay bounded away.
            let pinned: Vec<(usize, f64)> = closure_point
                .iter()
                .enumerate()
                .filter(|(_, &v)| slack_of(v) < 1e-6)
                .map(|(i, &v)| (i, if v < PI / 2.0 { 0.0 } else { PI }))
                .collect();
            let reduced = sys.with_pins(&pinned);
            let space = AffineSpace::new(&reduced);
            if !space.is_consistent() {
                return Err(PolytopeError::EmptyClosure(
                    "pinned face is inconsistent".into(),
                ));
            }
            let mut mask = vec![true; sys.n_vars()];
            for &(i, _) in &pinned {
                mask[i] = false;
            }
            let (x, slack) = max_min_slack(&space, &mask);
            if mask.iter().any(|&m| m) && slack <= INTERIOR_TOL {
                return Err(PolytopeError::EmptyClosure(format!(
                    "face search failed (slack {slack:.3e})"
                )));
            }
            let mut point = x;
            for &(i, v) in &pinned {
                point[i] = v;
            }
            Ok(RelativeInterior {
                point: AngleVector::from_dvector(&point),
                pinned,
                min_slack: if mask.iter().any(|&m| m) { slack } else { 0.0 },
            })
        }
    }
}

#[inline]
fn slack_of(v: f64) -> f64 {
    v.min(PI - v)
}

fn clamp_box(x: AngleVector) -> AngleVector {
    AngleVector(x.0.into_iter().map(|v| v.clamp(0.0, PI)).collect())
}

/// Log-barrier Newton method for `max s` subject to
/// `s <= x_i <= pi - s` over the masked coordinates, `x = x0 + N y`.
/// Returns the final point and its min slack.
pub(crate) fn max_min_slack(space: &AffineSpace, mask: &[bool]) -> (DVector<f64>, f64) {
    let n = space.origin.len();
    let d = space.dim();
    let active: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let min_slack = |x: &DVector<f64>| {
        active
            .iter()
            .map(|&i| slack_of(x[i]))
            .fold(f64::INFINITY, f64::min)
    };
    if active.is_empty() {
        return (space.origin.clone(), f64::INFINITY);
    }

    let mut y = DVector::zeros(d);
    let mut x = space.point(&y);
    let mut s = min_slack(&x) - 1.0;

    let barrier = |x: &DVector<f64>, s: f64, mu: f64| -> f64 {
        let mut val = s;
        for &i in &active {
            let u = x[i] - s;
            let w = PI - x[i] - s;
            if u <= 0.0 || w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            val += mu * (u.ln() + w.ln());
        }
        val
    };

    let mut mu = 1.0;
    while mu > 1e-15 {
        for _ in 0..200 {
            // gradient and Hessian in z = (y, s)
            let mut grad = DVector::zeros(d + 1);
            let mut hess = DMatrix::zeros(d + 1, d + 1);
            grad[d] = 1.0;
            for &i in &active {
                let u = x[i] - s;
                let w = PI - x[i] - s;
                let row = space.basis.row(i);
                let mut gu = DVector::zeros(d + 1);
                let mut gw = DVector::zeros(d + 1);
                for k in 0..d {
                    gu[k] = row[k];
                    gw[k] = -row[k];
                }
                gu[d] = -1.0;
                gw[d] = -1.0;
                grad.axpy(mu / u, &gu, 1.0);
                grad.axpy(mu / w, &gw, 1.0);
                hess.ger(-mu / (u * u), &gu, &gu, 1.0);
                hess.ger(-mu / (w * w), &gw, &gw, 1.0);
            }
            let neg = -&hess + DMatrix::identity(d + 1, d + 1) * 1e-14;
            let step = match neg.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => match neg.lu().solve(&grad) {
                    Some(st) => st,
                    None => grad.clone(),
                },
            };
            let decrement = grad.dot(&step);
            if !decrement.is_finite() || decrement < 1e-14 * mu.max(1e-3) {
                break;
            }
            let f0 = barrier(&x, s, mu);
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-14 {
                let y_new = &y + step.rows(0, d) * alpha;
                let s_new = s + step[d] * alpha;
                let x_new = space.point(&y_new);
                let f1 = barrier(&x_new, s_new, mu);
                if f1.is_finite() && f1 >= f0 + 1e-4 * alpha * decrement {
                    y = y_new;
                    s = s_new;
                    x = x_new;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        mu *= 0.1;
    }
    let slack = min_slack(&x);
    (x, slack)
}

/// `(1 - t) p + t q`.
pub fn segment(p: &AngleVector, q: &AngleVector, t: f64) -> Result<AngleVector, PolytopeError> {
    if p.len() != q.len() {
        return Err(PolytopeError::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(PolytopeError::ParameterOutOfRange(t));
    }
    Ok(AngleVector(
        p.iter()
            .zip(q.iter())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect(),
    ))
}

/// `q - p`.
pub fn difference_vector(p: &AngleVector, q: &AngleVector) -> Result<AngleVector, PolytopeError> {
    if p.len() != q.len() {
        return Err(PolytopeError::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(AngleVector(
        p.iter().zip(q.iter()).map(|(a, b)| b - a).collect(),
    ))
}

/// Random points of the closure by hit-and-run from a relative-interior
/// center. A quarter of the samples are pushed onto the boundary.
#[derive(Debug, Clone)]
pub struct ClosureSampler {
    space: AffineSpace,
    center: DVector<f64>,
    free: Vec<usize>,
    pinned: Vec<(usize, f64)>,
    steps: usize,
}

impl ClosureSampler {
    pub fn new(sys: &LinearSystem) -> Result<Self, PolytopeError> {
        let rel = relative_interior_point(sys)?;
        let reduced = sys.with_pins(&rel.pinned);
        let space = AffineSpace::new(&reduced);
        let mut free_mask = vec![true; sys.n_vars()];
        for &(i, _) in &rel.pinned {
            free_mask[i] = false;
        }
        Ok(ClosureSampler {
            center: rel.point.to_dvector(),
            space,
            free: (0..sys.n_vars()).filter(|&i| free_mask[i]).collect(),
            pinned: rel.pinned,
            steps: 8,
        })
    }

    pub fn center(&self) -> AngleVector {
        AngleVector::from_dvector(&self.center)
    }

    pub fn pinned(&self) -> &[(usize, f64)] {
        &self.pinned
    }

    /// Feasible parameter range of `x + t d` inside the box.
    fn chord(&self, x: &DVector<f64>, dir: &DVector<f64>) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &i in &self.free {
            let di = dir[i];
            if di.abs() < 1e-15 {
                continue;
            }
            let (a, b) = ((0.0 - x[i]) / di, (PI - x[i]) / di);
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        (lo.min(0.0), hi.max(0.0))
    }

    fn random_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<DVector<f64>> {
        let d = self.space.dim();
        if d == 0 {
            return None;
        }
        let y = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let dir = &self.space.basis * y;
        let norm = dir.norm();
        (norm > 0.0).then(|| dir / norm)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AngleVector {
        let mut x = self.center.clone();
        let boundary = rng.random_bool(0.25);
        for step in 0..self.steps {
            let Some(dir) = self.random_direction(rng) else {
                break;
            };
            let (lo, hi) = self.chord(&x, &dir);
            let t = if boundary && step + 1 == self.steps {
                if rng.random_bool(0.5) {
                    hi
                } else {
                    lo
                }
            } else {
                lo + (hi - lo) * rng.random::<f64>()
            };
            x += dir * t;
        }
        self.finish(x)
    }

    /// A point on the boundary reached from the center along a random chord.
    pub fn boundary_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AngleVector {
        let mut x = self.center.clone();
        if let Some(dir) = self.random_direction(rng) {
            let (_, hi) = self.chord(&x, &dir);
            x += dir * hi;
        }
        self.finish(x)
    }

    fn finish(&self, x: DVector<f64>) -> AngleVector {
        let mut v: Vec<f64> = x.iter().map(|v| v.clamp(0.0, PI)).collect();
        for &(i, val) in &self.pinned {
            v[i] = val;
        }
        AngleVector(v)
    }
}
