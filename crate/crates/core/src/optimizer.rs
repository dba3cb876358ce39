//! Volume maximization over the closed angle-structure polytope.
//!
//! The volume is concave on the closure, so a damped Newton ascent in
//! null-space coordinates reaches the maximum from any feasible start. Steps
//! stay strictly inside the box; when the iterates stall against the
//! boundary the collapsing coordinates are pinned and the search continues
//! on that face.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lobachevsky::{boundary_derivative_limit, lobachevsky_derivative, volume};
use crate::polytope::{
    classify_membership, relative_interior_point, AffineSpace, AngleVector, ClosureSampler,
    FlatSet, LinearSystem, Membership, PolytopeError, DEFAULT_BOUNDARY_TOL, INTERIOR_TOL,
};
use crate::triangulation::opposite_pair;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Directional limits up to this value count as non-improving.
pub const DIRECTIONAL_TOL: f64 = 1e-10;
/// Samples farther than this from `p` must lose volume strictly.
pub const STRICT_GAP_DISTANCE: f64 = 1e-4;

const STALL_WINDOW: usize = 10;
const STALL_REL_CHANGE: f64 = 1e-13;
const PIN_SLACK: f64 = 1e-6;
const FRACTION_TO_BOUNDARY: f64 = 0.995;
const CERTIFY_DIRECTIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("equality constraints are inconsistent (residual {0:.3e})")]
    Inconsistent(f64),
    #[error("point is not in the closure (residual {max_residual:.3e}, range [{min_coord:.3e}, {max_coord:.3e}])")]
    Infeasible {
        max_residual: f64,
        min_coord: f64,
        max_coord: f64,
    },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    IterationCap,
    EmptyClosure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TetClass {
    Positive,
    Flat,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Tolerance for the active set and flat-tetrahedron detection.
    pub flat_tol: f64,
    /// Optional start; defaults to the relative-interior point.
    #[serde(skip)]
    pub start: Option<AngleVector>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            flat_tol: DEFAULT_BOUNDARY_TOL,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub point: AngleVector,
    pub volume: f64,
    pub status: Status,
    pub flat_tets: Vec<usize>,
    pub tet_classes: Vec<TetClass>,
    pub active_set: FlatSet,
    /// Norm of the volume gradient projected onto the final face.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Volume after every accepted step.
    #[serde(skip)]
    pub volume_trace: Vec<f64>,
}

/// Face of the closure being searched: pinned coordinates and the affine
/// parametrization of the rest.
struct Face {
    space: AffineSpace,
    free: Vec<usize>,
    pinned: Vec<(usize, f64)>,
}

impl Face {
    fn new(sys: &LinearSystem, pinned: Vec<(usize, f64)>) -> Option<Face> {
        let space = AffineSpace::new(&sys.with_pins(&pinned));
        if !space.is_consistent() {
            return None;
        }
        let mut mask = vec![true; sys.n_vars()];
        for &(i, _) in &pinned {
            mask[i] = false;
        }
        Some(Face {
            space,
            free: (0..sys.n_vars()).filter(|&i| mask[i]).collect(),
            pinned,
        })
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for &i in &self.free {
            g[i] = 0.5 * lobachevsky_derivative(x[i]);
        }
        self.space.basis.tr_mul(&g)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.space.dim();
        let mut h = DMatrix::zeros(d, d);
        for &i in &self.free {
            let row = self.space.basis.row(i).transpose();
            h.ger(-0.5 / x[i].tan(), &row, &row, 1.0);
        }
        h
    }

    /// Largest step along `dir` keeping the free coordinates inside `(0, pi)`.
    fn max_step(&self, x: &DVector<f64>, dir: &DVector<f64>) -> f64 {
        let mut hi = f64::INFINITY;
        for &i in &self.free {
            let di = dir[i];
            if di < -1e-300 {
                hi = hi.min(-x[i] / di);
            } else if di > 1e-300 {
                hi = hi.min((PI - x[i]) / di);
            }
        }
        hi
    }

    fn min_slack(&self, x: &DVector<f64>) -> f64 {
        self.free
            .iter()
            .map(|&i| x[i].min(PI - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    fn snap(&self, x: &mut DVector<f64>) {
        for &(i, v) in &self.pinned {
            x[i] = v;
        }
    }
}

fn vol(x: &DVector<f64>) -> f64 {
    volume(&AngleVector::from_dvector(x))
}

/// Maximizes the volume over the closure of the polytope.
pub fn maximize_volume(
    sys: &LinearSystem,
    opts: &SolveOptions,
) -> Result<OptimizationResult, OptimizerError> {
    let space = AffineSpace::new(sys);
    if !space.is_consistent() {
        return Err(OptimizerError::Inconsistent(space.consistency_residual));
    }
    let rel = match relative_interior_point(sys) {
        Ok(rel) => rel,
        Err(PolytopeError::EmptyClosure(_)) => {
            let point = AngleVector::from_dvector(&space.origin);
            return Ok(OptimizationResult {
                volume: volume(&point),
                active_set: FlatSet::empty(),
                tet_classes: Vec::new(),
                point,
                status: Status::EmptyClosure,
                flat_tets: Vec::new(),
                kkt_residual: f64::INFINITY,
                iterations: 0,
                volume_trace: Vec::new(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let center = rel.point.to_dvector();
    let mut face = Face::new(sys, rel.pinned.clone())
        .ok_or(OptimizerError::Inconsistent(space.consistency_residual))?;

    let mut x = match &opts.start {
        Some(start) => {
            if start.len() != sys.n_vars() {
                return Err(PolytopeError::DimensionMismatch {
                    expected: sys.n_vars(),
                    found: start.len(),
                }
                .into());
            }
            // pull a closure start slightly inside the face
            let s = start.to_dvector();
            face.space.project(&(&s * (1.0 - 1e-6) + &center * 1e-6))
        }
        None => center.clone(),
    };
    face.snap(&mut x);
    if face.min_slack(&x) <= 0.0 {
        x = center.clone();
    }

    let mut trace = vec![vol(&x)];
    let mut iterations = 0;
    let mut status = Status::IterationCap;

    while iterations < opts.max_iter {
        if face.free.is_empty() || face.space.dim() == 0 {
            status = Status::Converged;
            break;
        }
        let g = face.gradient(&x);
        if g.norm() < opts.tol {
            status = Status::Converged;
            break;
        }
        let n_trace = trace.len();
        if n_trace > STALL_WINDOW {
            let now = trace[n_trace - 1];
            let before = trace[n_trace - 1 - STALL_WINDOW];
            if (now - before).abs() <= STALL_REL_CHANGE * now.abs().max(1.0) {
                if face.min_slack(&x) < PIN_SLACK {
                    let mut pinned = face.pinned.clone();
                    for &i in &face.free {
                        if x[i] < PIN_SLACK {
                            pinned.push((i, 0.0));
                        } else if PI - x[i] < PIN_SLACK {
                            pinned.push((i, PI));
                        }
                    }
                    if let Some(next) = Face::new(sys, pinned) {
                        face = next;
                        x = face.space.project(&x);
                        face.snap(&mut x);
                        trace.push(vol(&x));
                        continue;
                    }
                }
                status = Status::Converged;
                break;
            }
        }

        iterations += 1;
        let h = face.hessian(&x);
        let d = face.space.dim();
        let neg = -h + DMatrix::identity(d, d) * 1e-12;
        let step_y = match neg.cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let step_y = if step_y.dot(&g) > 0.0 {
            step_y
        } else {
            g.clone()
        };
        let dir = &face.space.basis * &step_y;
        let alpha_max = face.max_step(&x, &dir);
        let mut alpha = (FRACTION_TO_BOUNDARY * alpha_max).min(1.0);
        let f0 = *trace.last().unwrap();
        let slope = g.dot(&step_y);
        let mut accepted = false;
        while alpha > 1e-16 {
            let mut cand = &x + &dir * alpha;
            face.snap(&mut cand);
            let f1 = vol(&cand);
            if f1 >= f0 + 1e-4 * alpha * slope {
                x = cand;
                trace.push(f1);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no ascent left at double precision
            trace.push(f0);
        }
    }

    let g = face.gradient(&x);
    let kkt_residual = if face.space.dim() == 0 { 0.0 } else { g.norm() };
    let point = AngleVector::from_dvector(&x);
    let tet_classes = classify_tetrahedra(&point, opts.flat_tol);
    let flat_tets = tet_classes
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == TetClass::Flat)
        .map(|(t, _)| t)
        .collect();
    Ok(OptimizationResult {
        volume: volume(&point),
        active_set: FlatSet::of(point.as_slice(), opts.flat_tol),
        point,
        status,
        flat_tets,
        tet_classes,
        kkt_residual,
        iterations,
        volume_trace: trace,
    })
}

/// Flat when one opposite pair sits at pi and the other four angles at 0.
pub fn classify_tetrahedra(p: &AngleVector, tol: f64) -> Vec<TetClass> {
    (0..p.len() / 6)
        .map(|t| {
            let a = p.tet(t);
            if a.iter().all(|&v| v >= tol) {
                return TetClass::Positive;
            }
            let flat = (0..3).any(|k| {
                let kk = opposite_pair(k);
                (0..6).all(|j| {
                    let target = if j == k || j == kk { PI } else { 0.0 };
                    (a[j] - target).abs() <= tol
                })
            });
            if flat {
                TetClass::Flat
            } else {
                TetClass::Invalid
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityCertificate {
    /// One per equality row.
    pub multipliers: Vec<f64>,
    /// `(index, multiplier)` for each active bound.
    pub active_multipliers: Vec<(usize, f64)>,
    pub gradient_residual: f64,
    pub signs_ok: bool,
    /// Largest one-sided directional derivative seen over the probes.
    pub worst_directional: f64,
}

fn check_feasible(
    sys: &LinearSystem,
    p: &AngleVector,
    tol: f64,
) -> Result<FlatSet, OptimizerError> {
    match classify_membership(sys, p, tol.max(INTERIOR_TOL))? {
        Membership::Infeasible {
            max_residual,
            min_coord,
            max_coord,
        } => Err(OptimizerError::Infeasible {
            max_residual,
            min_coord,
            max_coord,
        }),
        Membership::Interior => Ok(FlatSet::empty()),
        Membership::Boundary(flat) => Ok(flat),
    }
}

/// KKT certificate for `p` as a maximizer of the volume on the closure.
///
/// The gradient on the free coordinates is fit by least squares into the row
/// space of the equalities. Bound coordinates have an unbounded gradient, so
/// their sign condition is tested with the one-sided directional limit
/// toward sampled closure points.
pub fn certify(
    sys: &LinearSystem,
    p: &AngleVector,
    tol: f64,
) -> Result<MaximalityCertificate, OptimizerError> {
    let flat = check_feasible(sys, p, tol)?;
    let a = sys.matrix();
    let n = sys.n_vars();
    let free: Vec<usize> = (0..n).filter(|&i| !flat.contains(i)).collect();

    let g_free = DVector::from_iterator(
        free.len(),
        free.iter().map(|&i| 0.5 * lobachevsky_derivative(p[i])),
    );
    let a_free_t = DMatrix::from_fn(free.len(), a.nrows(), |r, c| a[(c, free[r])]);
    let lambda = if free.is_empty() {
        DVector::zeros(a.nrows())
    } else {
        a_free_t
            .clone()
            .svd(true, true)
            .solve(&g_free, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(a.nrows()))
    };
    let gradient_residual = (&a_free_t * &lambda - &g_free).norm();
    let fitted = a.tr_mul(&lambda);
    let active_multipliers = flat.indices().iter().map(|&i| (i, -fitted[i])).collect();

    let mut worst_directional = f64::NEG_INFINITY;
    if !flat.is_empty() {
        let sampler = ClosureSampler::new(sys)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut probes = vec![sampler.center()];
        probes.extend((0..CERTIFY_DIRECTIONS).map(|_| sampler.sample(&mut rng)));
        for q in &probes {
            let limit = boundary_derivative_limit(p, q, &flat)
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY);
            worst_directional = worst_directional.max(limit);
        }
    }
    Ok(MaximalityCertificate {
        multipliers: lambda.iter().copied().collect(),
        active_multipliers,
        gradient_residual,
        signs_ok: worst_directional <= DIRECTIONAL_TOL,
        worst_directional: worst_directional.clamp(0.0, f64::MAX),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub max_spread: f64,
    pub volumes: Vec<f64>,
    pub statuses: Vec<Status>,
    #[serde(skip)]
    pub points: Vec<AngleVector>,
}

/// Start `k` of a multi-start run: a random convex combination of the
/// relative-interior center and a random boundary point.
pub fn random_start(sampler: &ClosureSampler, seed: u64, k: u64) -> AngleVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let edge = sampler.boundary_sample(&mut rng).to_dvector();
    let lambda: f64 = rng.random_range(0.05..0.95);
    AngleVector::from_dvector(&(sampler.center().to_dvector() * lambda + edge * (1.0 - lambda)))
}

/// Runs [`maximize_volume`] from `n_starts` random feasible starts.
pub fn uniqueness_probe(
    sys: &LinearSystem,
    n_starts: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<UniquenessReport, OptimizerError> {
    let sampler = ClosureSampler::new(sys)?;
    let run = |k: usize| {
        let start = random_start(&sampler, seed, k as u64);
        maximize_volume(
            sys,
            &SolveOptions {
                start: Some(start),
                ..opts.clone()
            },
        )
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..n_starts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..n_starts).map(run).collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut max_spread: f64 = 0.0;
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            max_spread = max_spread.max(a.point.max_abs_diff(&b.point));
        }
    }
    Ok(UniquenessReport {
        max_spread,
        volumes: results.iter().map(|r| r.volume).collect(),
        statuses: results.iter().map(|r| r.status).collect(),
        points: results.into_iter().map(|r| r.point).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub all_dominated: bool,
    /// Smallest `vol(p) - vol(q)` over samples farther than
    /// [`STRICT_GAP_DISTANCE`] from `p`.
    pub worst_gap: f64,
    /// Largest one-sided derivative at `p` toward a sample.
    pub worst_directional: f64,
    pub samples: usize,
    /// A sample that beats or matches `p`, if any.
    pub witness: Option<AngleVector>,
}

/// Samples `q` in the closure and checks `vol(p) >= vol(q)` together with
/// the sign of the one-sided derivative at `p` toward `q`.
pub fn dominance_check(
    sys: &LinearSystem,
    p: &AngleVector,
    n_samples: usize,
    seed: u64,
) -> Result<DominanceReport, OptimizerError> {
    let flat = check_feasible(sys, p, DEFAULT_BOUNDARY_TOL)?;
    let sampler = ClosureSampler::new(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut samples = vec![p.clone()];
    if let Some(q) = ascent_witness(sys, p, &flat) {
        samples.push(q);
    }
    while samples.len() < n_samples.max(1) {
        samples.push(sampler.sample(&mut rng));
    }

    let vp = volume(p);
    let mut report = DominanceReport {
        all_dominated: true,
        worst_gap: f64::INFINITY,
        worst_directional: f64::NEG_INFINITY,
        samples: samples.len(),
        witness: None,
    };
    for q in samples {
        let dist = p.max_abs_diff(&q);
        let gap = vp - volume(&q);
        let directional = boundary_derivative_limit(p, &q, &flat)
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY);
        report.worst_directional = report.worst_directional.max(directional);
        let strict = dist > STRICT_GAP_DISTANCE;
        if strict {
            report.worst_gap = report.worst_gap.min(gap);
        }
        let ok = if strict { gap > 0.0 } else { gap >= -1e-12 };
        if !ok || directional > DIRECTIONAL_TOL {
            report.all_dominated = false;
            if report.witness.is_none() {
                report.witness = Some(q);
            }
        }
    }
    Ok(report)
}

/// One projected-gradient step from `p` inside its face, when the step
/// gains volume.
fn ascent_witness(sys: &LinearSystem, p: &AngleVector, flat: &FlatSet) -> Option<AngleVector> {
    let pinned: Vec<(usize, f64)> = flat
        .indices()
        .iter()
        .map(|&i| (i, if p[i] < PI / 2.0 { 0.0 } else { PI }))
        .collect();
    let face = Face::new(sys, pinned)?;
    if face.space.dim() == 0 {
        return None;
    }
    let x = p.to_dvector();
    let g = face.gradient(&x);
    if g.norm() < 1e-8 {
        return None;
    }
    let dir = &face.space.basis * g;
    let mut t = (0.5 * face.max_step(&x, &dir)).min(0.1 / dir.amax());
    let v0 = vol(&x);
    while t > 1e-12 {
        let mut q = &x + &dir * t;
        face.snap(&mut q);
        if vol(&q) > v0 {
            return Some(AngleVector::from_dvector(&q));
        }
        t *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lobachevsky::lobachevsky;
    use crate::polytope::{build_constraints, EqualityRow, RowKind};
    use crate::triangulation::{incidence, pachner_23, parse_triangulation};

    fn system(text: &str) -> LinearSystem {
        build_constraints(&incidence(&parse_triangulation(text).unwrap()))
    }

    fn fig8() -> LinearSystem {
        system(include_str!("../fixtures/fig8.tri"))
    }

    #[test]
    fn fig8_maximum_is_regular() {
        let res = maximize_volume(&fig8(), &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.point.iter().all(|&v| (v - PI / 3.0).abs() < 1e-9));
        assert!((res.volume - 6.0 * lobachevsky(PI / 3.0)).abs() < 1e-12);
        assert!(res.flat_tets.is_empty() && res.active_set.is_empty());
        assert!(res.volume_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn fig8_coarse_grid_agrees() {
        // per tet the angles at vertex 0 determine everything; scan both tets
        // on a grid restricted to the equality solution set
        let sys = fig8();
        let space = AffineSpace::new(&sys);
        let mut best = f64::NEG_INFINITY;
        let steps = 60;
        for i in 1..steps {
            for j in 1..steps - i {
                let (a, b) = (PI * i as f64 / steps as f64, PI * j as f64 / steps as f64);
                let c = PI - a - b;
                let guess = DVector::from_iterator(12, [a, b, c, c, b, a, a, b, c, c, b, a]);
                let x = space.project(&guess);
                if sys.max_residual(x.as_slice()) < 1e-9
                    && x.iter().all(|&v| (0.0..=PI).contains(&v))
                {
                    best = best.max(vol(&x));
                }
            }
        }
        let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
        assert!(res.volume >= best - 1e-12);
        assert!(res.volume - best < 1e-2);
    }

    #[test]
    fn empty_closure_status() {
        let mut rows = vec![];
        for triple in [[0usize, 1, 2], [0, 3, 4], [1, 3, 5], [2, 4, 5]] {
            rows.push(EqualityRow {
                kind: RowKind::VertexTriple,
                indices: triple.to_vec(),
                rhs: PI,
            });
        }
        rows.push(EqualityRow {
            kind: RowKind::Custom,
            indices: vec![0],
            rhs: 4.0,
        });
        let sys = LinearSystem::from_rows(6, rows);
        let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::EmptyClosure);

        let mut rows = sys.rows().to_vec();
        rows.push(EqualityRow {
            kind: RowKind::Custom,
            indices: vec![0],
            rhs: 1.0,
        });
        let bad = LinearSystem::from_rows(6, rows);
        assert!(matches!(
            maximize_volume(&bad, &SolveOptions::default()),
            Err(OptimizerError::Inconsistent(_))
        ));
    }

    #[test]
    fn pachner_result_certifies() {
        let tri = parse_triangulation(include_str!("../fixtures/fig8.tri")).unwrap();
        let moved = pachner_23(&tri, 0, 0).unwrap();
        let sys = build_constraints(&incidence(&moved));
        let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(sys.max_residual(res.point.as_slice()) < 1e-9);
        let cert = certify(&sys, &res.point, DEFAULT_BOUNDARY_TOL).unwrap();
        assert!(cert.gradient_residual < 1e-8, "{cert:?}");
        assert!(cert.signs_ok);
        // a 2-3 move on a geometric triangulation keeps the volume
        assert!((res.volume - 6.0 * lobachevsky(PI / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn certificate_detects_non_critical_points() {
        let sys = fig8();
        let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
        let cert = certify(&sys, &res.point, DEFAULT_BOUNDARY_TOL).unwrap();
        assert!(cert.gradient_residual < 1e-8 && cert.signs_ok);
        assert_eq!(cert.multipliers.len(), sys.rows().len());

        let sampler = ClosureSampler::new(&sys).unwrap();
        let q = random_start(&sampler, 3, 0);
        let cert = certify(&sys, &q, DEFAULT_BOUNDARY_TOL).unwrap();
        assert!(cert.gradient_residual > 1e-3);
    }

    #[test]
    fn flat_boundary_point_has_improving_direction() {
        let sys = fig8();
        let pins = [(0, 0.0), (5, 0.0), (1, 0.0), (4, 0.0), (2, PI), (3, PI)];
        let face = Face::new(&sys, pins.to_vec()).unwrap();
        let mut mask = vec![true; 12];
        for (i, _) in pins {
            mask[i] = false;
        }
        let (x, _) = crate::polytope::max_min_slack(&face.space, &mask);
        let mut x = x;
        face.snap(&mut x);
        let p = AngleVector::from_dvector(&x);
        assert_eq!(classify_tetrahedra(&p, 1e-8)[0], TetClass::Flat);
        let cert = certify(&sys, &p, DEFAULT_BOUNDARY_TOL).unwrap();
        assert!(!cert.signs_ok);
        assert!(cert.worst_directional > 0.0);
    }

    #[test]
    fn starts_agree() {
        let sys = fig8();
        let report = uniqueness_probe(&sys, 8, 5, &SolveOptions::default()).unwrap();
        assert!(report.max_spread < 1e-5);
        let v0 = report.volumes[0];
        assert!(report.volumes.iter().all(|v| (v - v0).abs() < 1e-8));
        let single = uniqueness_probe(&sys, 1, 5, &SolveOptions::default()).unwrap();
        assert_eq!(single.max_spread, 0.0);
    }

    #[test]
    fn dominance_at_optimum_and_failure_elsewhere() {
        let sys = fig8();
        let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
        let report = dominance_check(&sys, &res.point, 200, 1).unwrap();
        assert!(report.all_dominated, "{report:?}");
        assert!(report.worst_directional <= DIRECTIONAL_TOL);
        assert!(report.worst_gap > 0.0);

        let sampler = ClosureSampler::new(&sys).unwrap();
        let p = random_start(&sampler, 9, 2);
        let report = dominance_check(&sys, &p, 50, 1).unwrap();
        assert!(!report.all_dominated);
        let w = report.witness.unwrap();
        assert!(volume(&w) > volume(&p));
    }

    #[test]
    fn classify_patterns() {
        let third = AngleVector::constant(6, PI / 3.0);
        assert_eq!(classify_tetrahedra(&third, 1e-8), vec![TetClass::Positive]);
        let flat = AngleVector::new(vec![0.0, 0.0, PI, PI, 0.0, 0.0]).unwrap();
        assert_eq!(classify_tetrahedra(&flat, 1e-8), vec![TetClass::Flat]);
        let bad = AngleVector::new(vec![0.0, PI / 2.0, PI / 2.0, PI / 2.0, PI / 2.0, 0.0]).unwrap();
        assert_eq!(classify_tetrahedra(&bad, 1e-8), vec![TetClass::Invalid]);
    }

    #[test]
    fn boundary_start_converges() {
        let sys = fig8();
        let sampler = ClosureSampler::new(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = sampler.boundary_sample(&mut rng);
        let res = maximize_volume(
            &sys,
            &SolveOptions {
                start: Some(start),
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.point.iter().all(|&v| (v - PI / 3.0).abs() < 1e-8));
    }
}
