//! Acceptance suite: one line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! A criterion listed in `KNOWN_UNATTAINABLE` still prints FAIL when it
//! fails, with its explanation, but does not fail the run.

#[path = "common/quadrature.rs"]
mod quadrature;

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use cuspforge::geometry::{
    average_lengths, lemma24_report, lemma25_check, random_tetrahedron, tetrahedron_from_angles,
};
use cuspforge::lobachevsky::{
    boundary_derivative_limit, entropy_inequality, lobachevsky, segment_derivative, volume,
};
use cuspforge::optimizer::{
    certify, dominance_check, maximize_volume, uniqueness_probe, SolveOptions, Status,
};
use cuspforge::polytope::{
    build_constraints, interior_point, segment, AngleVector, ClosureSampler, FlatSet,
    InteriorPoint, LinearSystem, DEFAULT_BOUNDARY_TOL,
};
use cuspforge::triangulation::{
    edge_classes, first_movable_face, incidence, pachner_23, parse_triangulation, vertex_links,
    Triangulation,
};
use quadrature::lobachevsky_quadrature;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG8: &str = include_str!("../fixtures/fig8.tri");

/// Criteria whose literal statement cannot hold, with the reason.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    1,
    "the stated Lambda(pi/3) = 0.3383213 disagrees with the quadrature oracle \
     (0.33831387) by 7.4e-6; the series and oracle agree to 1e-10",
)];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fig8() -> Triangulation {
    parse_triangulation(FIG8).unwrap()
}

fn fig8_system() -> LinearSystem {
    build_constraints(&incidence(&fig8()))
}

fn f(p: &AngleVector, q: &AngleVector, t: f64) -> f64 {
    volume(&segment(p, q, t).unwrap())
}

fn interior_sample(sampler: &ClosureSampler, rng: &mut ChaCha8Rng) -> AngleVector {
    let q = sampler.sample(rng).into_vec();
    let c = sampler.center().into_vec();
    let lambda: f64 = rng.random_range(0.05..0.95);
    AngleVector::new(
        q.iter()
            .zip(&c)
            .map(|(a, b)| lambda * b + (1.0 - lambda) * a)
            .collect(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let thetas: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..=PI)).collect();
    let clock = Instant::now();
    let values: Vec<f64> = thetas.iter().map(|&t| lobachevsky(t)).collect();
    let elapsed = clock.elapsed().as_secs_f64();
    let worst = thetas
        .iter()
        .zip(&values)
        .map(|(&t, &v)| (v - lobachevsky_quadrature(t)).abs())
        .fold(0.0, f64::max);
    let l6 = lobachevsky(PI / 6.0);
    let l3 = lobachevsky(PI / 3.0);
    let ok6 = (l6 - 0.5074708).abs() < 1e-7;
    let ok3 = (l3 - 0.3383213).abs() < 1e-7;
    outcome(
        worst < 1e-10 && ok6 && ok3 && elapsed < 1.0,
        format!(
            "max |series - quadrature| = {worst:.2e}; Lambda(pi/6) = {l6:.10} ({}); \
             Lambda(pi/3) = {l3:.10} vs stated 0.3383213 ({}); {:.1} ms",
            if ok6 { "ok" } else { "off" },
            if ok3 { "ok" } else { "off" },
            elapsed * 1e3
        ),
    )
}

fn criterion_2() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig8.tri");
    std::fs::write(&path, FIG8).unwrap();
    let clock = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_cuspforge"))
        .arg("solve")
        .arg(&path)
        .output()
        .unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let point: Vec<f64> = serde_json::from_value(report["results"]["point"].clone()).unwrap();
    let vol = report["results"]["volume"].as_f64().unwrap();
    let dist = point
        .iter()
        .map(|v| (v - PI / 3.0).abs())
        .fold(0.0, f64::max);
    let oracle = 6.0 * lobachevsky_quadrature(PI / 3.0);
    let passed = output.status.code() == Some(0)
        && report["results"]["status"] == "converged"
        && dist < 1e-6
        && (vol - 2.0298832).abs() < 1e-6
        && (vol - oracle).abs() < 1e-6
        && elapsed < 1.0;
    outcome(
        passed,
        format!(
            "exit {:?}; |x - pi/3|_inf = {dist:.2e}; volume = {vol:.10} (oracle {oracle:.10}); {:.1} ms",
            output.status.code(),
            elapsed * 1e3
        ),
    )
}

fn criterion_3() -> Outcome {
    let sys = fig8_system();
    let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
    let cert = certify(&sys, &res.point, DEFAULT_BOUNDARY_TOL).unwrap();
    // 30% of the way toward a random interior point stays feasible
    let sampler = ClosureSampler::new(&sys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = interior_sample(&sampler, &mut rng);
    let perturbed = segment(&res.point, &q, 0.3).unwrap();
    let far = certify(&sys, &perturbed, DEFAULT_BOUNDARY_TOL).unwrap();
    outcome(
        cert.gradient_residual < 1e-8 && cert.signs_ok && far.gradient_residual > 1e-3,
        format!(
            "optimum residual {:.2e}, signs_ok {}; perturbed residual {:.2e} (|dx| = {:.3})",
            cert.gradient_residual,
            cert.signs_ok,
            far.gradient_residual,
            perturbed.max_abs_diff(&res.point)
        ),
    )
}

fn criterion_4() -> Outcome {
    let sys = fig8_system();
    let report = uniqueness_probe(&sys, 20, 4, &SolveOptions::default()).unwrap();
    let lo = report.volumes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = report
        .volumes
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let converged = report.statuses.iter().all(|s| *s == Status::Converged);
    outcome(
        converged && report.max_spread < 1e-5 && hi - lo < 1e-8,
        format!(
            "20 starts, max spread {:.2e}, volume range {:.2e}",
            report.max_spread,
            hi - lo
        ),
    )
}

fn criterion_5() -> Outcome {
    let sys = fig8_system();
    let res = maximize_volume(&sys, &SolveOptions::default()).unwrap();
    let report = dominance_check(&sys, &res.point, 1000, 5).unwrap();
    outcome(
        report.all_dominated && report.worst_gap > 0.0 && report.worst_directional <= 1e-10,
        format!(
            "{} samples, worst strict gap {:.3e}, worst directional limit {:.2e}",
            report.samples, report.worst_gap, report.worst_directional
        ),
    )
}

/// Richardson extrapolation of `f'(t)` to `t = 0` from `h, h/2, h/4`.
fn richardson_limit(p: &AngleVector, q: &AngleVector, h: f64) -> f64 {
    let d = |t: f64| segment_derivative(p, q, t).unwrap().value;
    let (d1, d2, d3) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = 2.0 * d2 - d1;
    let r2 = 2.0 * d3 - d2;
    (4.0 * r2 - r1) / 3.0
}

fn flat_point(sys: &LinearSystem, pair: usize) -> Option<AngleVector> {
    let opp = 5 - pair;
    let pins: Vec<(usize, f64)> = (0..6)
        .map(|j| (j, if j == pair || j == opp { PI } else { 0.0 }))
        .collect();
    let reduced = sys.with_pins(&pins);
    match cuspforge::polytope::relative_interior_point(&reduced) {
        Ok(rel) => {
            let mut x = rel.point.into_vec();
            for (i, v) in pins {
                x[i] = v;
            }
            Some(AngleVector::new(x).unwrap())
        }
        Err(_) => None,
    }
}

fn criterion_6() -> Outcome {
    let sys = fig8_system();
    let sampler = ClosureSampler::new(&sys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..100 {
        let p = interior_sample(&sampler, &mut rng);
        let q = interior_sample(&sampler, &mut rng);
        let t = rng.random_range(0.1..0.9);
        let h = 1e-5;
        let fd = (f(&p, &q, t + h) - f(&p, &q, t - h)) / (2.0 * h);
        let exact = segment_derivative(&p, &q, t).unwrap().value;
        worst_fd = worst_fd.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    let mut worst_limit: f64 = 0.0;
    let mut cases = 0;
    for pair in 0..3 {
        let Some(p) = flat_point(&sys, pair) else {
            continue;
        };
        let flat = FlatSet::of(p.as_slice(), DEFAULT_BOUNDARY_TOL);
        for _ in 0..10 {
            let q = interior_sample(&sampler, &mut rng);
            let limit = boundary_derivative_limit(&p, &q, &flat).unwrap().value;
            let extrapolated = richardson_limit(&p, &q, 1e-3);
            worst_limit = worst_limit.max((limit - extrapolated).abs());
            cases += 1;
        }
    }
    outcome(
        worst_fd < 1e-6 && cases > 0 && worst_limit < 1e-4,
        format!(
            "finite-difference relative error {worst_fd:.2e} over 100 segments; \
             boundary limit vs extrapolation {worst_limit:.2e} over {cases} flat cases"
        ),
    )
}

fn criterion_7() -> Outcome {
    let sys = fig8_system();
    let sampler = ClosureSampler::new(&sys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    let h = 1e-3;
    for _ in 0..100 {
        let p = sampler.sample(&mut rng);
        let q = sampler.sample(&mut rng);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let second = f(&p, &q, t - h) - 2.0 * f(&p, &q, t) + f(&p, &q, t + h);
            worst = worst.max(second);
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max second difference {worst:.2e} over 100 segments"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let worst = (0..1000)
        .map(|_| {
            lemma24_report(&random_tetrahedron(&mut rng, 1e-3))
                .unwrap()
                .spread
        })
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-9,
        format!("max spread {worst:.2e} over 1000 tetrahedra"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let tet = random_tetrahedron(&mut rng, 0.0);
        for v in 0..4 {
            worst = worst.min(lemma25_check(&tet, v).unwrap().slack);
        }
    }
    let eps = 1e-4;
    let tet = tetrahedron_from_angles(eps, eps, PI - 2.0 * eps).unwrap();
    let w = average_lengths(&tet).w;
    let ratio = (w[0].exp() + w[1].exp()) / w[2].exp();
    outcome(
        worst >= -1e-12 && (1.0..=1.001).contains(&ratio),
        format!("min slack {worst:.3e}; degenerate ratio {ratio:.12}"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let x = rng.random_range(0.0..10.0);
        let y = rng.random_range(0.0..10.0);
        let a = rng.random_range(0.0..5.0f64);
        let b = rng.random_range(0.0..5.0f64);
        let extra = if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(0.0..3.0)
        };
        let c = (a.exp() + b.exp()).ln() + extra;
        worst = worst.max(entropy_inequality(x, y, a, b, c).unwrap().lhs);
    }
    let eq = entropy_inequality(1.0, 1.0, 0.0, 0.0, 2f64.ln())
        .unwrap()
        .lhs;
    outcome(
        worst <= 1e-12 && eq.abs() < 1e-14,
        format!("max lhs {worst:.3e} over 1e5 samples; equality case {eq:.1e}"),
    )
}

fn criterion_11() -> Outcome {
    let tri = fig8();
    let edges = edge_classes(&tri);
    let links = vertex_links(&tri);
    let base_ok = edges.len() == 2
        && edges.iter().all(|e| e.degree == 6)
        && links.len() == 1
        && links[0].euler_characteristic == 0
        && links[0].orientable;
    let (t, face) = first_movable_face(&tri).unwrap();
    let once = pachner_23(&tri, t, face).unwrap();
    let once_links = vertex_links(&once);
    let once_ok = once.n_tets() == 3
        && edge_classes(&once).len() == 3
        && once_links
            .iter()
            .map(|l| l.euler_characteristic)
            .collect::<Vec<_>>()
            == vec![0];
    let mut cur = tri.clone();
    for _ in 0..5 {
        let (t, face) = first_movable_face(&cur).unwrap();
        cur = pachner_23(&cur, t, face).unwrap();
    }
    let links5 = vertex_links(&cur);
    let sys = build_constraints(&incidence(&cur));
    let closure = match interior_point(&sys) {
        Ok(InteriorPoint::Interior { min_slack, point }) => {
            format!(
                "interior point, min slack {min_slack:.3e}, residual {:.1e}",
                sys.max_residual(point.as_slice())
            )
        }
        Ok(InteriorPoint::EmptyInterior { max_min_slack, .. }) => {
            format!("empty interior reported (best slack {max_min_slack:.2e})")
        }
        Err(e) => format!("error: {e}"),
    };
    let five_ok = cur.n_tets() == 7
        && links5.len() == 1
        && links5[0].euler_characteristic == 0
        && !closure.starts_with("error");
    outcome(
        base_ok && once_ok && five_ok,
        format!(
            "fig8 edges {:?}, links chi {:?}; one move: {} tets, {} edges; five moves: {} tets, {} edges, {closure}",
            edges.iter().map(|e| e.degree).collect::<Vec<_>>(),
            links.iter().map(|l| l.euler_characteristic).collect::<Vec<_>>(),
            once.n_tets(),
            edge_classes(&once).len(),
            cur.n_tets(),
            edge_classes(&cur).len()
        ),
    )
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let y: f64 = rng.random_range(-10.0..10.0);
        worst = worst.max((lobachevsky(-y) + lobachevsky(y)).abs());
        worst = worst.max((lobachevsky(y + PI) - lobachevsky(y)).abs());
        for x in [0.0, PI] {
            worst = worst.max((lobachevsky(x) + lobachevsky(y) + lobachevsky(PI - x - y)).abs());
        }
    }
    outcome(
        worst < 1e-11,
        format!("max identity residual {worst:.2e} over 1000 samples"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "lobachevsky accuracy", criterion_1),
        (2, "figure-eight end-to-end", criterion_2),
        (3, "maximality certificate", criterion_3),
        (4, "uniqueness", criterion_4),
        (5, "dominance", criterion_5),
        (6, "derivative consistency", criterion_6),
        (7, "concavity", criterion_7),
        (8, "average length identity", criterion_8),
        (9, "triangle inequality", criterion_9),
        (10, "entropy inequality", criterion_10),
        (11, "combinatorics", criterion_11),
        (12, "lobachevsky identities", criterion_12),
    ];
    let mut unexpected = 0;
    let mut failed = 0;
    for (id, name, run) in criteria {
        let out = run();
        let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id);
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", out.detail);
        if !out.passed {
            failed += 1;
            match known {
                Some((_, why)) => println!("             known unattainable: {why}"),
                None => unexpected += 1,
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({} known unattainable)",
        12 - failed,
        failed - unexpected
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
