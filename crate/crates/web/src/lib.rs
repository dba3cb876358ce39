//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns plain numbers or a JSON string so the page needs no
//! glue beyond `JSON.parse`.

use std::f64::consts::PI;

use cuspforge::geometry::{
    edge_lengths, lemma24_from_lengths, lemma25_from_lengths, set_decoration,
    tetrahedron_from_angles,
};
use cuspforge::lobachevsky::{segment_derivative, volume};
use cuspforge::optimizer::{maximize_volume, SolveOptions};
use cuspforge::polytope::{build_constraints, segment, ClosureSampler, LinearSystem};
use cuspforge::triangulation::{edge_classes, incidence, parse_triangulation, EDGE_PAIRS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn system(tri_text: &str) -> Result<LinearSystem, JsError> {
    let tri = parse_triangulation(tri_text).map_err(err)?;
    Ok(build_constraints(&incidence(&tri)))
}

/// Maximizes the volume for a `.tri` source and returns the result as JSON.
#[wasm_bindgen]
pub fn solve(tri_text: &str) -> Result<String, JsError> {
    let tri = parse_triangulation(tri_text).map_err(err)?;
    let sys = build_constraints(&incidence(&tri));
    let result = maximize_volume(&sys, &SolveOptions::default()).map_err(err)?;
    let degrees: Vec<usize> = edge_classes(&tri).iter().map(|e| e.members.len()).collect();
    Ok(json!({
        "n_tets": tri.n_tets(),
        "edge_degrees": degrees,
        "volume": result.volume,
        "status": result.status,
        "iterations": result.iterations,
        "flat_tets": result.flat_tets,
        "point": result.point,
    })
    .to_string())
}

/// Samples `f(t) = vol((1 - t) p + t q)` and `f'(t)` on `(0, 1)`, where `p`
/// is the volume maximizer and `q` a random point of the closure.
///
/// Returns `[t0, f0, df0, t1, f1, df1, ...]`.
#[wasm_bindgen]
pub fn segment_profile(tri_text: &str, seed: u64, samples: usize) -> Result<Vec<f64>, JsError> {
    let sys = system(tri_text)?;
    let p = maximize_volume(&sys, &SolveOptions::default())
        .map_err(err)?
        .point;
    let sampler = ClosureSampler::new(&sys).map_err(err)?;
    let q = sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(3 * samples);
    for k in 0..samples {
        let t = (k as f64 + 0.5) / samples as f64;
        let x = segment(&p, &q, t).map_err(err)?;
        let df = segment_derivative(&p, &q, t).map_err(err)?.value;
        out.extend([t, volume(&x), df]);
    }
    Ok(out)
}

/// Decorated ideal tetrahedron with dihedral angles `alpha`, `beta` and
/// `pi - alpha - beta`, and horosphere parameters `exp(logs[v])`.
///
/// Returns the vertex positions, edge lengths and the residuals of the
/// length identities as JSON.
#[wasm_bindgen]
pub fn tetrahedron(alpha: f64, beta: f64, logs: &[f64]) -> Result<String, JsError> {
    let params: [f64; 4] = logs
        .try_into()
        .map_err(|_| err("expected four log decoration parameters"))?;
    let gamma = PI - alpha - beta;
    let tet = tetrahedron_from_angles(alpha, beta, gamma).map_err(err)?;
    let tet = set_decoration(&tet, params.map(f64::exp)).map_err(err)?;
    let lengths = edge_lengths(&tet);
    let lemma24 = lemma24_from_lengths(tet.angles(), &lengths).map_err(err)?;
    let lemma25 = (0..4)
        .map(|v| lemma25_from_lengths(&lengths, v).map(|r| r.slack))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let finite: Vec<[f64; 2]> = (1..4)
        .filter_map(|v| tet.vertex(v))
        .map(|z| [z.re, z.im])
        .collect();
    let edges: Vec<_> = EDGE_PAIRS
        .iter()
        .zip(lengths.lengths)
        .map(|(&(a, b), l)| json!({ "pair": [a, b], "length": l }))
        .collect();
    Ok(json!({
        "angles": tet.angles(),
        "decoration": tet.decoration(),
        "finite_vertices": finite,
        "edges": edges,
        "opposite_sum_spread": lemma24.spread,
        "triangle_slack": lemma25,
    })
    .to_string())
}
