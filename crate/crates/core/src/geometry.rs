//! Decorated ideal tetrahedra in the upper half-space model.
//!
//! Vertices are `0 = infinity`, `1 = 0`, `2 = 1`, `3 = z` on the boundary
//! plane, where `z` is the apex of a Euclidean triangle on `[0, 1]` with
//! angles `alpha` at 0, `beta` at 1 and `gamma` at `z`. The dihedral angles
//! of the ideal tetrahedron are `alpha` on the pair `{inf 0, 1 z}`, `beta` on
//! `{inf 1, 0 z}` and `gamma` on `{inf z, 0 1}`.
//!
//! A decoration picks a horosphere at each vertex: the height of a horizontal
//! plane at infinity, and the Euclidean diameter of a tangent sphere at each
//! finite vertex.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::triangulation::{opposite_pair, pair_index, EDGE_PAIRS};

pub const ANGLE_SUM_TOL: f64 = 1e-12;
/// Smallest angle accepted by [`lemma24_report`].
pub const NEAR_FLAT_GUARD: f64 = 1e-6;
pub const LEMMA25_SLACK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("angles must be positive, got ({0}, {1}, {2})")]
    NonPositiveAngle(f64, f64, f64),
    #[error("angles must sum to pi, got sum {0}")]
    AngleSum(f64),
    #[error("decoration parameters must be positive, got {0:?}")]
    NonPositiveDecoration([f64; 4]),
    #[error("tetrahedron is flat or nearly flat (smallest angle {0:.3e})")]
    NearFlat(f64),
    #[error("vertex index {0} out of range")]
    InvalidVertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedTetrahedron {
    angles: [f64; 3],
    apex: Complex<f64>,
    decoration: [f64; 4],
}

/// Dihedral angle index (0 = alpha, 1 = beta, 2 = gamma) of each edge in
/// [`EDGE_PAIRS`] order.
pub const EDGE_ANGLE: [usize; 6] = [0, 1, 2, 2, 1, 0];

/// Builds the ideal tetrahedron with dihedral angles `(alpha, beta, gamma)`
/// and all decoration parameters 1.
pub fn tetrahedron_from_angles(
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<DecoratedTetrahedron, GeometryError> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(GeometryError::NonPositiveAngle(alpha, beta, gamma));
    }
    let sum = alpha + beta + gamma;
    if (sum - PI).abs() > ANGLE_SUM_TOL {
        return Err(GeometryError::AngleSum(sum));
    }
    // law of sines on the triangle 0, 1, z: |z| = sin(beta) / sin(gamma)
    let apex = Complex::from_polar(beta.sin() / gamma.sin(), alpha);
    Ok(DecoratedTetrahedron {
        angles: [alpha, beta, gamma],
        apex,
        decoration: [1.0; 4],
    })
}

/// Replaces the horosphere parameters.
pub fn set_decoration(
    tet: &DecoratedTetrahedron,
    params: [f64; 4],
) -> Result<DecoratedTetrahedron, GeometryError> {
    if params.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(GeometryError::NonPositiveDecoration(params));
    }
    Ok(DecoratedTetrahedron {
        decoration: params,
        ..tet.clone()
    })
}

impl DecoratedTetrahedron {
    pub fn angles(&self) -> [f64; 3] {
        self.angles
    }

    pub fn apex(&self) -> Complex<f64> {
        self.apex
    }

    pub fn decoration(&self) -> [f64; 4] {
        self.decoration
    }

    /// Boundary position of vertex `v`, `None` for the vertex at infinity.
    pub fn vertex(&self, v: usize) -> Option<Complex<f64>> {
        match v {
            0 => None,
            1 => Some(Complex::new(0.0, 0.0)),
            2 => Some(Complex::new(1.0, 0.0)),
            3 => Some(self.apex),
            _ => panic!("vertex index {v} out of range"),
        }
    }

    /// Dihedral angle at each edge in [`EDGE_PAIRS`] order.
    pub fn edge_angles(&self) -> [f64; 6] {
        EDGE_ANGLE.map(|k| self.angles[k])
    }

    /// Dihedral angles read back from the vertex positions.
    pub fn dihedral_angles(&self) -> [f64; 3] {
        let p = [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), self.apex];
        let angle_at = |o: Complex<f64>, a: Complex<f64>, b: Complex<f64>| {
            let (u, v) = (a - o, b - o);
            (u.re * v.im - u.im * v.re)
                .abs()
                .atan2(u.re * v.re + u.im * v.im)
        };
        [
            angle_at(p[0], p[1], p[2]),
            angle_at(p[1], p[2], p[0]),
            angle_at(p[2], p[0], p[1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLengths {
    /// Signed horosphere distances in [`EDGE_PAIRS`] order.
    pub lengths: [f64; 6],
}

impl EdgeLengths {
    pub fn get(&self, a: u8, b: u8) -> f64 {
        self.lengths[pair_index(a, b)]
    }
}

/// Signed distance between the horospheres at the ends of each edge.
pub fn edge_lengths(tet: &DecoratedTetrahedron) -> EdgeLengths {
    let lengths = EDGE_PAIRS.map(|(a, b)| {
        let (a, b) = (a as usize, b as usize);
        match (tet.vertex(a), tet.vertex(b)) {
            (None, Some(_)) => (tet.decoration[a] / tet.decoration[b]).ln(),
            (Some(_), None) => (tet.decoration[b] / tet.decoration[a]).ln(),
            (Some(p), Some(q)) => {
                ((p - q).norm_sqr() / (tet.decoration[a] * tet.decoration[b])).ln()
            }
            (None, None) => unreachable!(),
        }
    });
    EdgeLengths { lengths }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageLengths {
    /// `W(e) = (L(e) + L(e')) / 2` in [`EDGE_PAIRS`] order.
    pub w: [f64; 6],
}

pub fn average_lengths(tet: &DecoratedTetrahedron) -> AverageLengths {
    average_from_lengths(&edge_lengths(tet))
}

pub fn average_from_lengths(lengths: &EdgeLengths) -> AverageLengths {
    let mut w = [0.0; 6];
    for (k, slot) in w.iter_mut().enumerate() {
        *slot = 0.5 * (lengths.lengths[k] + lengths.lengths[opposite_pair(k)]);
    }
    AverageLengths { w }
}

/// Horocyclic arc lengths cut out of the four face triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorocycleData {
    /// `arcs[f][v]`: arc at vertex `v` inside the face opposite `f`;
    /// zero on the diagonal.
    pub arcs: [[f64; 4]; 4],
}

/// Arcs grouped around one pair of opposite edges `e, e'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcGrouping {
    /// The four arcs at the ends of `e` in the two faces containing `e`.
    pub adjacent: [f64; 4],
    /// The same for `e'`.
    pub adjacent_opposite: [f64; 4],
    /// The remaining four arcs.
    pub remaining: [f64; 4],
}

impl HorocycleData {
    pub fn arc(&self, face: usize, vertex: usize) -> f64 {
        self.arcs[face][vertex]
    }

    pub fn all(&self) -> Vec<f64> {
        (0..4)
            .flat_map(|f| (0..4).filter(move |&v| v != f).map(move |v| (f, v)))
            .map(|(f, v)| self.arcs[f][v])
            .collect()
    }

    /// Groups the twelve arcs around the edge pair containing `EDGE_PAIRS[pair]`.
    pub fn grouping(&self, pair: usize) -> ArcGrouping {
        let (u, v) = EDGE_PAIRS[pair];
        let (w, x) = EDGE_PAIRS[opposite_pair(pair)];
        let (u, v, w, x) = (u as usize, v as usize, w as usize, x as usize);
        ArcGrouping {
            adjacent: [
                self.arcs[w][u],
                self.arcs[w][v],
                self.arcs[x][u],
                self.arcs[x][v],
            ],
            adjacent_opposite: [
                self.arcs[u][w],
                self.arcs[u][x],
                self.arcs[v][w],
                self.arcs[v][x],
            ],
            remaining: [
                self.arcs[w][x],
                self.arcs[x][w],
                self.arcs[u][v],
                self.arcs[v][u],
            ],
        }
    }
}

/// Arc lengths from horosphere geometry: an isometry sending the corner to
/// infinity turns its horosphere into a horizontal plane, where the arc is a
/// Euclidean segment divided by its height.
pub fn horocycle_arcs(tet: &DecoratedTetrahedron) -> HorocycleData {
    let mut arcs = [[0.0; 4]; 4];
    for (f, row) in arcs.iter_mut().enumerate() {
        for u in (0..4).filter(|&u| u != f) {
            let mut others = (0..4).filter(|&k| k != f && k != u);
            let (v, w) = (others.next().unwrap(), others.next().unwrap());
            row[u] = match tet.vertex(u) {
                None => {
                    let (pv, pw) = (tet.vertex(v).unwrap(), tet.vertex(w).unwrap());
                    (pv - pw).norm() / tet.decoration[u]
                }
                Some(pu) => {
                    // zeta -> 1 / (zeta - pu): pu -> infinity, infinity -> 0,
                    // horosphere at pu -> plane at height 1 / diameter
                    let image = |k: usize| match tet.vertex(k) {
                        None => Complex::new(0.0, 0.0),
                        Some(p) => (p - pu).inv(),
                    };
                    tet.decoration[u] * (image(v) - image(w)).norm()
                }
            };
        }
    }
    HorocycleData { arcs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma24Report {
    pub constant: f64,
    pub spread: f64,
}

/// Spread of `W(e_k) - ln|sin theta(e_k)|` over the three opposite pairs.
pub fn lemma24_report(tet: &DecoratedTetrahedron) -> Result<Lemma24Report, GeometryError> {
    lemma24_from_lengths(tet.angles, &edge_lengths(tet))
}

pub fn lemma24_from_lengths(
    angles: [f64; 3],
    lengths: &EdgeLengths,
) -> Result<Lemma24Report, GeometryError> {
    let smallest = angles.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest < NEAR_FLAT_GUARD
        || PI - angles.iter().copied().fold(0.0, f64::max) < NEAR_FLAT_GUARD
    {
        return Err(GeometryError::NearFlat(smallest));
    }
    let w = average_from_lengths(lengths).w;
    // pair k (edges k and 5 - k) carries angle EDGE_ANGLE[k]
    let d: Vec<f64> = (0..3)
        .map(|k| w[k] - angles[EDGE_ANGLE[k]].sin().abs().ln())
        .collect();
    let constant = d.iter().sum::<f64>() / 3.0;
    let spread = d.iter().map(|v| (v - constant).abs()).fold(0.0, f64::max);
    Ok(Lemma24Report { constant, spread })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma25Report {
    /// `e^{W(e_1)} + e^{W(e_2)}` for the tightest ordering.
    pub lhs: f64,
    /// `e^{W(e_3)}` for the tightest ordering.
    pub rhs: f64,
    /// `lhs / rhs - 1`, minimized over the three orderings.
    pub slack: f64,
    pub satisfied: bool,
}

/// Triangle inequality for `e^{W}` over the three edges at `vertex`.
pub fn lemma25_check(
    tet: &DecoratedTetrahedron,
    vertex: usize,
) -> Result<Lemma25Report, GeometryError> {
    lemma25_from_lengths(&edge_lengths(tet), vertex)
}

pub fn lemma25_from_lengths(
    lengths: &EdgeLengths,
    vertex: usize,
) -> Result<Lemma25Report, GeometryError> {
    if vertex > 3 {
        return Err(GeometryError::InvalidVertex(vertex));
    }
    let w = average_from_lengths(lengths).w;
    let at_vertex: Vec<f64> = (0..4u8)
        .filter(|&u| u as usize != vertex)
        .map(|u| w[pair_index(vertex as u8, u)].exp())
        .collect();
    let mut best: Option<Lemma25Report> = None;
    for k in 0..3 {
        let rhs = at_vertex[k];
        let lhs = at_vertex[(k + 1) % 3] + at_vertex[(k + 2) % 3];
        let slack = lhs / rhs - 1.0;
        if best.is_none_or(|b| slack < b.slack) {
            best = Some(Lemma25Report {
                lhs,
                rhs,
                slack,
                satisfied: true,
            });
        }
    }
    let mut report = best.expect("three orderings");
    report.satisfied = report.slack >= -LEMMA25_SLACK_TOL;
    Ok(report)
}

/// `sin theta_k / e^{W_k}` for the three pairs; constant across `k`.
pub fn sine_ratios(tet: &DecoratedTetrahedron) -> [f64; 3] {
    let w = average_lengths(tet).w;
    [0, 1, 2].map(|k| tet.angles[EDGE_ANGLE[k]].sin() / w[k].exp())
}

/// Uniform angles on the simplex, rejecting any below `min_angle`, with
/// decoration parameters `e^u` for `u` uniform in `[-3, 3]`.
pub fn random_tetrahedron<R: Rng + ?Sized>(rng: &mut R, min_angle: f64) -> DecoratedTetrahedron {
    loop {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = (u.min(v), u.max(v));
        let alpha = PI * lo;
        let beta = PI * (hi - lo);
        let gamma = PI - alpha - beta;
        if alpha.min(beta).min(gamma) < min_angle.max(f64::MIN_POSITIVE) {
            continue;
        }
        let decoration = [0; 4].map(|_| rng.random_range(-3.0..3.0f64).exp());
        let tet = tetrahedron_from_angles(alpha, beta, gamma).expect("angles sum to pi");
        return set_decoration(&tet, decoration).expect("positive decoration");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tet(rng: &mut ChaCha8Rng) -> DecoratedTetrahedron {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = (u.min(v), u.max(v));
        let alpha = PI * lo;
        let beta = PI * (hi - lo);
        let gamma = PI - alpha - beta;
        let tet = tetrahedron_from_angles(alpha, beta, gamma).unwrap();
        let params = [0; 4].map(|_| (rng.random::<f64>() * 6.0 - 3.0).exp());
        set_decoration(&tet, params).unwrap()
    }

    fn random_nonflat(rng: &mut ChaCha8Rng) -> DecoratedTetrahedron {
        loop {
            let tet = random_tet(rng);
            if tet.angles().iter().all(|&a| a > 1e-3) {
                return tet;
            }
        }
    }

    /// Signed distance between horospheres along the geodesic joining two
    /// finite points, by bisection for the crossing points and the
    /// arclength parametrization `s = -ln tan(phi / 2)` of the semicircle.
    fn finite_edge_oracle(p: Complex<f64>, dp: f64, q: Complex<f64>, dq: f64) -> f64 {
        let m = (p + q) * 0.5;
        let r = (p - q).norm() / 2.0;
        let dir = (p - m) / r;
        let point = |phi: f64| (m + dir * (r * phi.cos()), r * phi.sin());
        let inside = |phi: f64, center: Complex<f64>, d: f64| {
            let (z, t) = point(phi);
            (z - center).norm_sqr() + (t - d / 2.0).powi(2) < (d / 2.0).powi(2)
        };
        let crossing = |center: Complex<f64>, d: f64, from_zero: bool| {
            let (mut lo, mut hi) = if from_zero {
                (1e-300, PI / 2.0)
            } else {
                (PI / 2.0, PI - 1e-16)
            };
            // grow the bracket if the horosphere covers the midpoint
            if from_zero {
                while inside(hi, center, d) && hi < PI - 1e-12 {
                    hi = 0.5 * (hi + PI);
                }
            } else {
                while inside(lo, center, d) && lo > 1e-12 {
                    lo *= 0.5;
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let in_mid = inside(mid, center, d);
                if in_mid == from_zero {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let phi_p = crossing(p, dp, true);
        let phi_q = crossing(q, dq, false);
        let s = |phi: f64| -(phi / 2.0).tan().ln();
        s(phi_p) - s(phi_q)
    }

    /// `int_d^h dt / t` by composite Simpson in `t`.
    fn vertical_edge_oracle(h: f64, d: f64) -> f64 {
        let (lo, hi, sign) = if h >= d { (d, h, 1.0) } else { (h, d, -1.0) };
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let f = |t: f64| 1.0 / t;
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            acc += f(lo + k as f64 * step) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        sign * acc * step / 3.0
    }

    #[test]
    fn regular_apex() {
        let tet = tetrahedron_from_angles(PI / 3.0, PI / 3.0, PI / 3.0).unwrap();
        assert!((tet.apex() - Complex::new(0.5, 3f64.sqrt() / 2.0)).norm() < 1e-15);
        let tet = tetrahedron_from_angles(PI / 2.0, PI / 4.0, PI / 4.0).unwrap();
        assert!((tet.apex() - Complex::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn angles_round_trip() {
        let tet = tetrahedron_from_angles(0.3, 0.5, PI - 0.8).unwrap();
        let back = tet.dihedral_angles();
        for (a, b) in back.iter().zip(tet.angles()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let tet = random_tet(&mut rng);
            let back = tet.dihedral_angles();
            for (a, b) in back.iter().zip(tet.angles()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            tetrahedron_from_angles(0.0, PI / 2.0, PI / 2.0),
            Err(GeometryError::NonPositiveAngle(..))
        ));
        assert!(matches!(
            tetrahedron_from_angles(1.0, 1.0, 1.0),
            Err(GeometryError::AngleSum(_))
        ));
        let tet = tetrahedron_from_angles(1.0, 1.0, PI - 2.0).unwrap();
        assert!(matches!(
            set_decoration(&tet, [1.0, 0.0, 1.0, 1.0]),
            Err(GeometryError::NonPositiveDecoration(_))
        ));
    }

    #[test]
    fn regular_symmetric_lengths_are_equal() {
        let tet = tetrahedron_from_angles(PI / 3.0, PI / 3.0, PI / 3.0).unwrap();
        let l = edge_lengths(&tet).lengths;
        assert!(l.iter().all(|&v| (v - l[0]).abs() < 1e-14));
        let arcs = horocycle_arcs(&tet).all();
        assert!(arcs.iter().all(|&a| (a - arcs[0]).abs() < 1e-14));
        let w = average_lengths(&tet).w;
        assert!(w.iter().all(|&v| (v - w[0]).abs() < 1e-14));
        assert!(lemma24_report(&tet).unwrap().spread < 1e-12);
        for v in 0..4 {
            let r = lemma25_check(&tet, v).unwrap();
            assert!(r.satisfied && r.slack > 0.9);
        }
    }

    #[test]
    fn vertical_edges_match_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tet = tetrahedron_from_angles(0.7, 1.1, PI - 1.8).unwrap();
        for _ in 0..100 {
            let h = (rng.random::<f64>() * 4.0 - 2.0).exp();
            let d = (rng.random::<f64>() * 4.0 - 2.0).exp();
            let dec = set_decoration(&tet, [h, d, 1.0, 1.0]).unwrap();
            let l = edge_lengths(&dec).get(0, 1);
            assert!((l - vertical_edge_oracle(h, d)).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_edges_match_geodesic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let tet = random_nonflat(&mut rng);
            let l = edge_lengths(&tet);
            let dec = tet.decoration();
            for (a, b) in [(1u8, 2u8), (1, 3), (2, 3)] {
                let (pa, pb) = (
                    tet.vertex(a as usize).unwrap(),
                    tet.vertex(b as usize).unwrap(),
                );
                let oracle = finite_edge_oracle(pa, dec[a as usize], pb, dec[b as usize]);
                assert!(
                    (l.get(a, b) - oracle).abs() < 1e-8,
                    "{} vs {oracle}",
                    l.get(a, b)
                );
            }
        }
    }

    #[test]
    fn doubling_one_horosphere_shifts_incident_edges() {
        let tet = tetrahedron_from_angles(0.4, 1.3, PI - 1.7).unwrap();
        let base = edge_lengths(&tet).lengths;
        for v in 0..4u8 {
            let mut params = [1.0; 4];
            params[v as usize] = 2.0;
            let moved = edge_lengths(&set_decoration(&tet, params).unwrap()).lengths;
            // doubling the height at infinity shrinks that horosphere
            let shift = if v == 0 { 2f64.ln() } else { -(2f64.ln()) };
            for (k, &(a, b)) in EDGE_PAIRS.iter().enumerate() {
                let expected = if a == v || b == v { shift } else { 0.0 };
                assert!((moved[k] - base[k] - expected).abs() < 1e-14);
            }
            assert_eq!(set_decoration(&tet, params).unwrap().angles(), tet.angles());
        }
    }

    #[test]
    fn shrinking_every_horosphere_adds_twice_log() {
        let tet = tetrahedron_from_angles(0.9, 0.9, PI - 1.8).unwrap();
        let base = edge_lengths(&tet).lengths;
        let lambda: f64 = 3.0;
        let shrunk =
            set_decoration(&tet, [lambda, 1.0 / lambda, 1.0 / lambda, 1.0 / lambda]).unwrap();
        for (l0, l1) in base.iter().zip(edge_lengths(&shrunk).lengths) {
            assert!((l1 - l0 - 2.0 * lambda.ln()).abs() < 1e-13);
        }
        // dividing every parameter moves finite horospheres only
        let divided = set_decoration(&tet, [1.0 / lambda; 4]).unwrap();
        let l = edge_lengths(&divided).lengths;
        for (k, &(a, _)) in EDGE_PAIRS.iter().enumerate() {
            let expected = if a == 0 { 0.0 } else { 2.0 * lambda.ln() };
            assert!((l[k] - base[k] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn cosine_law_and_edge_length_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let tet = random_nonflat(&mut rng);
            let l = edge_lengths(&tet);
            let h = horocycle_arcs(&tet);
            assert!(h.all().iter().all(|&a| a > 0.0));
            for f in 0..4 {
                let corners: Vec<usize> = (0..4).filter(|&v| v != f).collect();
                for i in 0..3 {
                    let (u, v) = (corners[(i + 1) % 3], corners[(i + 2) % 3]);
                    let resid = l.get(u as u8, v as u8) + h.arc(f, u).ln() + h.arc(f, v).ln();
                    assert!(resid.abs() < 1e-10, "{resid}");
                }
            }
            for pair in 0..6 {
                let g = h.grouping(pair);
                let resid = l.lengths[pair] + 0.5 * g.adjacent.iter().map(|a| a.ln()).sum::<f64>();
                assert!(resid.abs() < 1e-10);
                let resid = l.lengths[opposite_pair(pair)]
                    + 0.5 * g.adjacent_opposite.iter().map(|a| a.ln()).sum::<f64>();
                assert!(resid.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grouping_partitions_the_twelve_arcs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = horocycle_arcs(&random_nonflat(&mut rng));
        for pair in 0..6 {
            let g = h.grouping(pair);
            let mut got: Vec<f64> = g
                .adjacent
                .iter()
                .chain(&g.adjacent_opposite)
                .chain(&g.remaining)
                .copied()
                .collect();
            let mut all = h.all();
            got.sort_by(f64::total_cmp);
            all.sort_by(f64::total_cmp);
            assert_eq!(got, all);
        }
    }

    #[test]
    fn average_lengths_shift_uniformly_with_decoration() {
        let tet = tetrahedron_from_angles(0.5, 1.0, PI - 1.5).unwrap();
        let w0 = average_lengths(&tet).w;
        let w1 = average_lengths(&set_decoration(&tet, [2.0, 0.5, 3.0, 0.7]).unwrap()).w;
        let shift = w1[0] - w0[0];
        for k in 0..6 {
            assert!((w1[k] - w0[k] - shift).abs() < 1e-13);
            assert_eq!(w0[k], w0[opposite_pair(k)]);
        }
    }

    #[test]
    fn lemma24_spread_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..1000 {
            let tet = random_nonflat(&mut rng);
            let r = lemma24_report(&tet).unwrap();
            assert!(r.spread < 1e-9, "{r:?}");
            let redecorated = set_decoration(&tet, [0.3, 2.0, 5.0, 0.1]).unwrap();
            let r2 = lemma24_report(&redecorated).unwrap();
            assert!(r2.spread < 1e-9);
            let ratios = sine_ratios(&tet);
            for k in 1..3 {
                assert!((ratios[k] / ratios[0] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lemma24_rejects_near_flat() {
        let tet = tetrahedron_from_angles(1e-7, 1.0, PI - 1.0 - 1e-7).unwrap();
        assert!(matches!(
            lemma24_report(&tet),
            Err(GeometryError::NearFlat(_))
        ));
    }

    #[test]
    fn lemma25_holds_and_degenerates() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..1000 {
            let tet = random_nonflat(&mut rng);
            for v in 0..4 {
                assert!(lemma25_check(&tet, v).unwrap().satisfied);
            }
        }
        let eps = 1e-4;
        let tet = tetrahedron_from_angles(eps, eps, PI - 2.0 * eps).unwrap();
        let w = average_lengths(&tet).w;
        // at vertex 0: edges 01 (alpha), 02 (beta), 03 (gamma)
        let ratio = (w[0].exp() + w[1].exp()) / w[2].exp();
        assert!((1.0..=1.001).contains(&ratio), "{ratio}");
        assert!(matches!(
            lemma25_check(&tet, 4),
            Err(GeometryError::InvalidVertex(4))
        ));
    }
}
