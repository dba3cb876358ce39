//! Ideal triangulations as face-gluing data.
//!
//! A triangulation is a set of tetrahedra with vertices `0..4`, where every
//! face `f` (the face opposite vertex `f`) is glued to a face of some
//! tetrahedron by a vertex permutation. From the gluings we derive edge
//! classes, vertex links and the incidence index used by the angle
//! structure polytope.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertex pairs of a tetrahedron in canonical order.
pub const EDGE_PAIRS: [(u8, u8); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Ordering convention string carried by every serialized angle vector.
pub const ORDERING_CONVENTION: &str = "tet-lex;edges=01,02,03,12,13,23";

/// Index into [`EDGE_PAIRS`] of the pair `{a, b}`.
pub fn pair_index(a: u8, b: u8) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match (lo, hi) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => panic!("invalid vertex pair {{{a}, {b}}}"),
    }
}

/// Index of the pair complementary to `pair`, i.e. the opposite edge.
pub fn opposite_pair(pair: usize) -> usize {
    5 - pair
}

/// A permutation of the four vertices of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm4([u8; 4]);

impl Perm4 {
    pub const IDENTITY: Perm4 = Perm4([0, 1, 2, 3]);

    /// Builds a permutation from its images, rejecting non-bijections.
    pub fn new(images: [u8; 4]) -> Option<Self> {
        let mut seen = [false; 4];
        for &v in &images {
            if v > 3 || seen[v as usize] {
                return None;
            }
            seen[v as usize] = true;
        }
        Some(Perm4(images))
    }

    #[inline]
    pub fn apply(self, v: u8) -> u8 {
        self.0[v as usize]
    }

    pub fn images(self) -> [u8; 4] {
        self.0
    }

    pub fn inverse(self) -> Self {
        let mut out = [0u8; 4];
        for (i, &v) in self.0.iter().enumerate() {
            out[v as usize] = i as u8;
        }
        Perm4(out)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(self, other: Perm4) -> Self {
        let mut out = [0u8; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.apply(other.apply(i as u8));
        }
        Perm4(out)
    }

    /// +1 for even permutations, -1 for odd ones.
    pub fn sign(self) -> i32 {
        let mut s = 1;
        for i in 0..4 {
            for j in (i + 1)..4 {
                if self.0[i] > self.0[j] {
                    s = -s;
                }
            }
        }
        s
    }
}

impl fmt::Display for Perm4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}{b}{c}{d}")
    }
}

/// Destination of one face gluing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gluing {
    pub tet: usize,
    pub face: u8,
    /// Maps vertices of the source tetrahedron to vertices of `tet`.
    pub perm: Perm4,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TriangulationError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unglued face: tetrahedron {tet}, face {face}")]
    UngluedFace { tet: usize, face: u8 },
    #[error("non-involutive gluing at tetrahedron {tet}, face {face}")]
    NonInvolutive { tet: usize, face: u8 },
    #[error("non-bijective permutation at line {line}")]
    NonBijective { line: usize },
    #[error("face glued to itself: tetrahedron {tet}, face {face}")]
    FaceGluedToItself { tet: usize, face: u8 },
    #[error("invalid face: tetrahedron {tet}, face {face}")]
    InvalidFace { tet: usize, face: u8 },
    #[error(
        "unsupported self-gluing: tetrahedron {tet}, face {face} is glued to the same tetrahedron"
    )]
    UnsupportedSelfGluing { tet: usize, face: u8 },
}

/// A closed combinatorial pseudo-manifold given by face gluings. Removing its
/// vertices yields the ideal triangulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangulation {
    gluings: Vec<[Gluing; 4]>,
    label: Option<String>,
}

impl Triangulation {
    /// Validates raw gluing data.
    pub fn from_gluings(
        gluings: Vec<[Gluing; 4]>,
        label: Option<String>,
    ) -> Result<Self, TriangulationError> {
        let n = gluings.len();
        for (t, faces) in gluings.iter().enumerate() {
            for (f, g) in faces.iter().enumerate() {
                let f = f as u8;
                if g.tet >= n || g.face > 3 {
                    return Err(TriangulationError::InvalidFace { tet: t, face: f });
                }
                if g.perm.apply(f) != g.face {
                    return Err(TriangulationError::NonInvolutive { tet: t, face: f });
                }
                if g.tet == t && g.face == f {
                    return Err(TriangulationError::FaceGluedToItself { tet: t, face: f });
                }
                let back = gluings[g.tet][g.face as usize];
                if back.tet != t || back.face != f || back.perm != g.perm.inverse() {
                    return Err(TriangulationError::NonInvolutive { tet: t, face: f });
                }
            }
        }
        Ok(Triangulation { gluings, label })
    }

    pub fn n_tets(&self) -> usize {
        self.gluings.len()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn gluing(&self, tet: usize, face: u8) -> Gluing {
        self.gluings[tet][face as usize]
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    /// Serializes to the `.tri` gluing format.
    pub fn to_tri_string(&self) -> String {
        let mut out = String::from("tri 1\n");
        out.push_str(&format!("tets {}\n", self.n_tets()));
        if let Some(name) = &self.label {
            out.push_str(&format!("name {name}\n"));
        }
        for (t, faces) in self.gluings.iter().enumerate() {
            for (f, g) in faces.iter().enumerate() {
                out.push_str(&format!("glue {t} {f} {} {}\n", g.tet, g.perm));
            }
        }
        out
    }
}

/// Parses the `.tri` gluing format.
///
/// ```text
/// tri 1
/// tets <N>
/// name <label>                     (optional)
/// glue <t> <f> <t'> <p0p1p2p3>     (4N lines)
/// ```
pub fn parse_triangulation(text: &str) -> Result<Triangulation, TriangulationError> {
    let mut header_seen = false;
    let mut n_tets: Option<usize> = None;
    let mut label = None;
    let mut raw: BTreeMap<(usize, u8), (Gluing, usize)> = BTreeMap::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let syntax = |column: usize, message: String| TriangulationError::Syntax {
            line: line_no,
            column,
            message,
        };
        let (col0, keyword) = tokens[0];
        if !header_seen {
            if keyword != "tri" || tokens.len() != 2 || tokens[1].1 != "1" {
                return Err(syntax(col0, "expected format version line `tri 1`".into()));
            }
            header_seen = true;
            continue;
        }
        match keyword {
            "tets" => {
                if n_tets.is_some() {
                    return Err(syntax(col0, "duplicate `tets` line".into()));
                }
                if tokens.len() != 2 {
                    return Err(syntax(col0, "expected `tets <N>`".into()));
                }
                let n = parse_usize(tokens[1]).map_err(|m| syntax(tokens[1].0, m))?;
                if n == 0 {
                    return Err(syntax(
                        tokens[1].0,
                        "tetrahedron count must be positive".into(),
                    ));
                }
                n_tets = Some(n);
            }
            "name" => {
                let start = tokens.get(1).map(|t| t.0).unwrap_or(content.len() + 1);
                label = Some(content[start - 1..].trim().to_string());
            }
            "glue" => {
                let n = n_tets.ok_or_else(|| syntax(col0, "`glue` before `tets`".into()))?;
                if tokens.len() != 5 {
                    return Err(syntax(col0, "expected `glue <t> <f> <t'> <perm>`".into()));
                }
                let t = parse_usize(tokens[1]).map_err(|m| syntax(tokens[1].0, m))?;
                let f = parse_usize(tokens[2]).map_err(|m| syntax(tokens[2].0, m))?;
                let t2 = parse_usize(tokens[3]).map_err(|m| syntax(tokens[3].0, m))?;
                if t >= n {
                    return Err(syntax(tokens[1].0, format!("tetrahedron {t} out of range")));
                }
                if f > 3 {
                    return Err(syntax(tokens[2].0, format!("face {f} out of range")));
                }
                if t2 >= n {
                    return Err(syntax(
                        tokens[3].0,
                        format!("tetrahedron {t2} out of range"),
                    ));
                }
                let (pcol, ptext) = tokens[4];
                if ptext.len() != 4 || !ptext.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(syntax(pcol, format!("malformed permutation `{ptext}`")));
                }
                let digits: Vec<u8> = ptext.bytes().map(|b| b - b'0').collect();
                let perm = Perm4::new([digits[0], digits[1], digits[2], digits[3]])
                    .ok_or(TriangulationError::NonBijective { line: line_no })?;
                let f = f as u8;
                let gluing = Gluing {
                    tet: t2,
                    face: perm.apply(f),
                    perm,
                };
                if raw.insert((t, f), (gluing, line_no)).is_some() {
                    return Err(syntax(col0, format!("duplicate gluing for ({t}, {f})")));
                }
            }
            other => {
                return Err(syntax(col0, format!("unknown directive `{other}`")));
            }
        }
    }

    if !header_seen {
        return Err(TriangulationError::Syntax {
            line: 1,
            column: 1,
            message: "missing format version line `tri 1`".into(),
        });
    }
    let n = n_tets.ok_or(TriangulationError::Syntax {
        line: text.lines().count().max(1),
        column: 1,
        message: "missing `tets` line".into(),
    })?;

    let mut gluings = Vec::with_capacity(n);
    for t in 0..n {
        let mut faces = [Gluing {
            tet: 0,
            face: 0,
            perm: Perm4::IDENTITY,
        }; 4];
        for f in 0..4u8 {
            let (g, _) = raw
                .get(&(t, f))
                .ok_or(TriangulationError::UngluedFace { tet: t, face: f })?;
            faces[f as usize] = *g;
        }
        gluings.push(faces);
    }
    Triangulation::from_gluings(gluings, label)
}

/// Whitespace tokens paired with their 1-based column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_usize((_, tok): (usize, &str)) -> Result<usize, String> {
    tok.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, found `{tok}`"))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller root so class ids follow first appearance
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// One edge of the ideal triangulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClass {
    pub id: usize,
    /// `(tet, pair index)` entries, sorted.
    pub members: Vec<(usize, usize)>,
    pub degree: usize,
}

/// Partitions the `6 n` tetrahedron edges into edge classes by union-find over
/// the gluing-induced edge maps. Classes are numbered by first member.
pub fn edge_classes(tri: &Triangulation) -> Vec<EdgeClass> {
    let n = tri.n_tets();
    let mut ds = DisjointSet::new(6 * n);
    for t in 0..n {
        for f in 0..4u8 {
            let g = tri.gluing(t, f);
            for &(a, b) in EDGE_PAIRS.iter().filter(|(a, b)| *a != f && *b != f) {
                let src = 6 * t + pair_index(a, b);
                let dst = 6 * g.tet + pair_index(g.perm.apply(a), g.perm.apply(b));
                ds.union(src, dst);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for entry in 0..6 * n {
        let root = ds.find(entry);
        by_root
            .entry(root)
            .or_default()
            .push((entry / 6, entry % 6));
    }
    by_root
        .into_values()
        .enumerate()
        .map(|(id, members)| EdgeClass {
            id,
            degree: members.len(),
            members,
        })
        .collect()
}

/// The boundary surface around one ideal vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexLink {
    pub id: usize,
    /// `(tet, vertex)` corners whose triangles make up the link.
    pub corners: Vec<(usize, u8)>,
    pub euler_characteristic: i64,
    pub orientable: bool,
}

impl VertexLink {
    pub fn is_torus_or_klein_bottle(&self) -> bool {
        self.euler_characteristic == 0
    }
}

/// True when every vertex link has Euler characteristic zero.
pub fn is_cusped(links: &[VertexLink]) -> bool {
    !links.is_empty() && links.iter().all(VertexLink::is_torus_or_klein_bottle)
}

/// Assembles the vertex-link surfaces from corner triangles.
///
/// The link triangle at corner `(t, v)` has one vertex per edge of `t` through
/// `v` and one side per face of `t` containing `v`. Link vertices are orbits of
/// edge ends, link edges are face gluings of corners.
pub fn vertex_links(tri: &Triangulation) -> Vec<VertexLink> {
    let n = tri.n_tets();
    let corner = |t: usize, v: u8| 4 * t + v as usize;

    let mut corners = DisjointSet::new(4 * n);
    for t in 0..n {
        for f in 0..4u8 {
            let g = tri.gluing(t, f);
            for v in (0..4u8).filter(|&v| v != f) {
                corners.union(corner(t, v), corner(g.tet, g.perm.apply(v)));
            }
        }
    }

    // Edge ends: (t, v, w) is the end at v of edge vw, indexed 12 t + 3 v + slot(w).
    let end =
        |t: usize, v: u8, w: u8| 12 * t + 3 * v as usize + if w < v { w } else { w - 1 } as usize;
    let mut ends = DisjointSet::new(12 * n);
    for t in 0..n {
        for f in 0..4u8 {
            let g = tri.gluing(t, f);
            for v in (0..4u8).filter(|&v| v != f) {
                for w in (0..4u8).filter(|&w| w != f && w != v) {
                    ends.union(end(t, v, w), end(g.tet, g.perm.apply(v), g.perm.apply(w)));
                }
            }
        }
    }

    // Orientation: the tetrahedron's orientation induces a cyclic order on the
    // link triangle at v. Gluing (t,v)->(t',v') across a side is coherent when
    // the shared side is traversed in opposite directions.
    let side_direction = |v: u8, x: u8, y: u8| -> i32 {
        let w = (0..4u8).find(|&w| w != v && w != x && w != y).unwrap();
        Perm4([v, x, y, w]).sign()
    };
    // parity[c] relative to root, solved by union-find with parity
    let mut parent: Vec<usize> = (0..4 * n).collect();
    let mut parity = vec![0i32; 4 * n];
    fn find(parent: &mut [usize], parity: &mut [i32], x: usize) -> (usize, i32) {
        let mut path = Vec::new();
        let mut cur = x;
        while parent[cur] != cur {
            path.push(cur);
            cur = parent[cur];
        }
        let root = cur;
        // compress
        for &node in path.iter().rev() {
            let p = parent[node];
            if p != root {
                parity[node] ^= parity[p];
            }
            parent[node] = root;
        }
        (root, parity[x])
    }
    let mut bad_roots = std::collections::BTreeSet::new();
    let mut conflicts = Vec::new();
    for t in 0..n {
        for f in 0..4u8 {
            let g = tri.gluing(t, f);
            for v in (0..4u8).filter(|&v| v != f) {
                let (x, y) = {
                    let mut it = (0..4u8).filter(|&u| u != v && u != f);
                    (it.next().unwrap(), it.next().unwrap())
                };
                let v2 = g.perm.apply(v);
                let d1 = side_direction(v, x, y);
                let d2 = side_direction(v2, g.perm.apply(x), g.perm.apply(y));
                // eps1 * d1 == -eps2 * d2  <=> parity(eps1) ^ parity(eps2) == [d1 == d2]
                let rel = i32::from(d1 == d2);
                let a = corner(t, v);
                let b = corner(g.tet, v2);
                let (ra, pa) = find(&mut parent, &mut parity, a);
                let (rb, pb) = find(&mut parent, &mut parity, b);
                if ra == rb {
                    if pa ^ pb != rel {
                        conflicts.push(ra);
                    }
                } else {
                    parent[rb] = ra;
                    parity[rb] = pa ^ pb ^ rel;
                }
            }
        }
    }
    for c in conflicts {
        let (root, _) = find(&mut parent, &mut parity, c);
        bad_roots.insert(root);
    }

    let mut groups: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
    for t in 0..n {
        for v in 0..4u8 {
            groups
                .entry(corners.find(corner(t, v)))
                .or_default()
                .push((t, v));
        }
    }
    groups
        .into_values()
        .enumerate()
        .map(|(id, members)| {
            let faces = members.len() as i64;
            let edges = 3 * faces / 2;
            let mut end_roots = std::collections::BTreeSet::new();
            for &(t, v) in &members {
                for w in (0..4u8).filter(|&w| w != v) {
                    end_roots.insert(ends.find(end(t, v, w)));
                }
            }
            let (t0, v0) = members[0];
            let (root, _) = find(&mut parent, &mut parity, corner(t0, v0));
            VertexLink {
                id,
                euler_characteristic: end_roots.len() as i64 - edges + faces,
                orientable: !bad_roots.contains(&root),
                corners: members,
            }
        })
        .collect()
}

/// The index set of (edge, tetrahedron) incidences with its vertex triples and
/// opposite-edge pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceIndex {
    n_tets: usize,
    /// Entry `i` is `(tet, pair)` with `i = 6 tet + pair`.
    entries: Vec<(usize, usize)>,
    /// Four triples per tetrahedron, one per vertex.
    triples: Vec<[usize; 3]>,
    /// `opposite[i]` is the entry of the complementary vertex pair.
    opposite: Vec<usize>,
    edge_of: Vec<usize>,
    edges: Vec<EdgeClass>,
}

impl IncidenceIndex {
    pub fn n_tets(&self) -> usize {
        self.n_tets
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.triples
    }

    pub fn opposite(&self, i: usize) -> usize {
        self.opposite[i]
    }

    pub fn edge_of(&self, i: usize) -> usize {
        self.edge_of[i]
    }

    pub fn edge_classes(&self) -> &[EdgeClass] {
        &self.edges
    }

    /// Entry indices `6 tet .. 6 tet + 6` of one tetrahedron.
    pub fn tet_entries(&self, tet: usize) -> std::ops::Range<usize> {
        6 * tet..6 * tet + 6
    }

    /// Index set for `n_tets` tetrahedra with caller-supplied edge classes.
    pub fn from_edge_classes(n_tets: usize, edges: Vec<EdgeClass>) -> Self {
        let entries: Vec<(usize, usize)> = (0..n_tets)
            .flat_map(|t| (0..6).map(move |p| (t, p)))
            .collect();
        let mut triples = Vec::with_capacity(4 * n_tets);
        for t in 0..n_tets {
            for v in 0..4u8 {
                let mut tri = [0usize; 3];
                for (k, w) in (0..4u8).filter(|&w| w != v).enumerate() {
                    tri[k] = 6 * t + pair_index(v, w);
                }
                triples.push(tri);
            }
        }
        let opposite = entries
            .iter()
            .map(|&(t, p)| 6 * t + opposite_pair(p))
            .collect();
        let mut edge_of = vec![usize::MAX; 6 * n_tets];
        for class in &edges {
            for &(t, p) in &class.members {
                edge_of[6 * t + p] = class.id;
            }
        }
        IncidenceIndex {
            n_tets,
            entries,
            triples,
            opposite,
            edge_of,
            edges,
        }
    }
}

/// Builds the incidence index in tet-lexicographic order.
pub fn incidence(tri: &Triangulation) -> IncidenceIndex {
    IncidenceIndex::from_edge_classes(tri.n_tets(), edge_classes(tri))
}

/// Performs a 2-3 move across face `face` of tetrahedron `tet`.
///
/// The two tetrahedra sharing the face are replaced by three tetrahedra around
/// a new edge joining the two apexes. New tetrahedra are appended after the
/// untouched ones; each has local vertices `0 = apex of tet`, `1 = apex of the
/// neighbour`, `2, 3 = ` the two face vertices it keeps.
pub fn pachner_23(
    tri: &Triangulation,
    tet: usize,
    face: u8,
) -> Result<Triangulation, TriangulationError> {
    if tet >= tri.n_tets() || face > 3 {
        return Err(TriangulationError::InvalidFace { tet, face });
    }
    let shared = tri.gluing(tet, face);
    if shared.tet == tet {
        return Err(TriangulationError::UnsupportedSelfGluing { tet, face });
    }
    let (s, u) = (tet, shared.tet);
    let sigma = shared.perm;
    let d = face; // apex in s
    let tri_verts: Vec<u8> = (0..4u8).filter(|&v| v != d).collect();

    // Old tetrahedron indices survive compacted; s and u are removed.
    let survivors: Vec<usize> = (0..tri.n_tets()).filter(|&t| t != s && t != u).collect();
    let mut remap = vec![usize::MAX; tri.n_tets()];
    for (new, &old) in survivors.iter().enumerate() {
        remap[old] = new;
    }
    let base = survivors.len();

    // For new tet k (omitting triangle vertex x = tri_verts[k]) the kept
    // triangle vertices, in increasing order of their label in s.
    let kept = |k: usize| -> (u8, u8) {
        let mut it = tri_verts.iter().copied().filter(|&v| v != tri_verts[k]);
        (it.next().unwrap(), it.next().unwrap())
    };

    // Replacement for each external face of s and u: (new tet, new face, rho)
    // where rho maps new local vertices (on that face) to old local vertices.
    let mut replacement: BTreeMap<(usize, u8), (usize, u8, Perm4)> = BTreeMap::new();
    for (k, &x) in tri_verts.iter().enumerate() {
        let (y, z) = kept(k);
        // face of s opposite x is {d, y, z}; new local 0 -> d, 2 -> y, 3 -> z
        let rho_s = Perm4([d, x, y, z]);
        replacement.insert((s, x), (base + k, 1, rho_s));
        // face of u opposite sigma(x) is {e, sigma(y), sigma(z)}; new 1 -> e
        let e = shared.face;
        let rho_u = Perm4([sigma.apply(x), e, sigma.apply(y), sigma.apply(z)]);
        replacement.insert((u, sigma.apply(x)), (base + k, 0, rho_u));
    }

    let placeholder = Gluing {
        tet: 0,
        face: 0,
        perm: Perm4::IDENTITY,
    };
    let mut gluings = vec![[placeholder; 4]; base + 3];

    for &old in &survivors {
        for f in 0..4u8 {
            let g = tri.gluing(old, f);
            let new_g = if let Some(&(nt, nf, rho)) = replacement.get(&(g.tet, g.face)) {
                // old -> (g.tet, g.face) via g.perm, then old local -> new local
                Gluing {
                    tet: nt,
                    face: nf,
                    perm: rho.inverse().compose(g.perm),
                }
            } else {
                Gluing {
                    tet: remap[g.tet],
                    ..g
                }
            };
            gluings[remap[old]][f as usize] = new_g;
        }
    }

    for (&(old_tet, old_face), &(nt, nf, rho)) in &replacement {
        let g = tri.gluing(old_tet, old_face);
        let new_g = if let Some(&(nt2, nf2, rho2)) = replacement.get(&(g.tet, g.face)) {
            Gluing {
                tet: nt2,
                face: nf2,
                perm: rho2.inverse().compose(g.perm).compose(rho),
            }
        } else {
            Gluing {
                tet: remap[g.tet],
                face: g.face,
                perm: g.perm.compose(rho),
            }
        };
        gluings[nt][nf as usize] = new_g;
    }

    // Internal faces: new tet k, face opposite local vertex of y (a kept
    // vertex), is glued to the new tet omitting y, on its face opposite x.
    for (k, &x) in tri_verts.iter().enumerate() {
        let (y, z) = kept(k);
        let local_k = |v: u8| {
            if v == y {
                2u8
            } else if v == z {
                3u8
            } else {
                unreachable!()
            }
        };
        for &w in &[y, z] {
            let j = tri_verts.iter().position(|&v| v == w).unwrap();
            let (yj, zj) = kept(j);
            let local_j = |v: u8| {
                if v == yj {
                    2u8
                } else if v == zj {
                    3u8
                } else {
                    unreachable!()
                }
            };
            let other = if w == y { z } else { y };
            // new tet k local: 0=d, 1=e, local_k(other)=other, local_k(w)=w
            // maps to new tet j local: 0, 1, local_j(other), local_j(x)
            let mut images = [0u8; 4];
            images[0] = 0;
            images[1] = 1;
            images[local_k(other) as usize] = local_j(other);
            images[local_k(w) as usize] = local_j(x);
            let perm = Perm4(images);
            gluings[base + k][local_k(w) as usize] = Gluing {
                tet: base + j,
                face: local_j(x),
                perm,
            };
        }
    }

    Triangulation::from_gluings(gluings, tri.label.clone())
}

/// The first face `(tet, face)` shared by two distinct tetrahedra.
pub fn first_movable_face(tri: &Triangulation) -> Option<(usize, u8)> {
    (0..tri.n_tets())
        .flat_map(|t| (0..4u8).map(move |f| (t, f)))
        .find(|&(t, f)| tri.gluing(t, f).tet != t)
}
