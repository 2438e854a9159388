//! Oriented graphs, square and cubic lattices, paths and face loops.
//!
//! Coordinates are `(column, row[, layer])` with row 0 at the bottom. Every
//! edge points from the larger coordinate to the smaller one along its axis
//! (right to left, top to bottom, upper layer to lower layer).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(pub Vec<usize>);

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub id: String,
    pub origin: usize,
    pub terminus: usize,
    pub axis: Axis,
}

#[derive(Clone, Debug, Default)]
pub struct OrientedGraph {
    vertices: Vec<Vertex>,
    vertex_index: HashMap<Vertex, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<String, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl OrientedGraph {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        let mut g = OrientedGraph::default();
        for v in vertices {
            if g.vertex_index.insert(v.clone(), g.vertices.len()).is_some() {
                return Err(Error::InvalidLattice(format!("duplicate vertex {v}")));
            }
            g.vertices.push(v);
            g.outgoing.push(Vec::new());
            g.incoming.push(Vec::new());
        }
        Ok(g)
    }

    /// Adds the edge `origin → terminus`. Self-loops and duplicates are
    /// rejected.
    pub fn add_edge(&mut self, origin: usize, terminus: usize, axis: Axis) -> Result<usize> {
        if origin == terminus {
            return Err(Error::InvalidLattice(format!("self-loop at {}", self.vertices[origin])));
        }
        let id = format!("e:{}->{}", self.vertices[origin], self.vertices[terminus]);
        if self.edge_index.contains_key(&id) {
            return Err(Error::InvalidLattice(format!("duplicate edge {id}")));
        }
        let k = self.edges.len();
        self.edge_index.insert(id.clone(), k);
        self.edges.push(Edge { id, origin, terminus, axis });
        self.outgoing[origin].push(k);
        self.incoming[terminus].push(k);
        Ok(k)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: &Vertex) -> Option<usize> {
        self.vertex_index.get(v).copied()
    }

    pub fn edge(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    /// `E_v^o`: edges starting at `v`.
    pub fn outgoing(&self, v: usize) -> &[usize] {
        &self.outgoing[v]
    }

    /// `E_v^t`: edges ending at `v`.
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.outgoing[v].len() + self.incoming[v].len()
    }

    /// Edges between `a` and `b` in either orientation, with sign `+1` when
    /// the edge runs `a → b`.
    pub fn edges_between(&self, a: usize, b: usize) -> Vec<(usize, i8)> {
        let fwd = self.outgoing[a].iter().filter(|&&e| self.edges[e].terminus == b).map(|&e| (e, 1));
        let bwd = self.incoming[a].iter().filter(|&&e| self.edges[e].origin == b).map(|&e| (e, -1));
        fwd.chain(bwd).collect()
    }

    /// Pairs of edges joining the same two vertices in opposite directions.
    pub fn antiparallel_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            for &j in &self.outgoing[e.terminus] {
                if self.edges[j].terminus == e.origin && k < j {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Re-checks incidence bookkeeping; returns a description of the first
    /// violation.
    pub fn check_axioms(&self) -> std::result::Result<(), String> {
        for (k, e) in self.edges.iter().enumerate() {
            if e.origin == e.terminus {
                return Err(format!("self-loop {}", e.id));
            }
            if !self.outgoing[e.origin].contains(&k) || !self.incoming[e.terminus].contains(&k) {
                return Err(format!("incidence missing for {}", e.id));
            }
        }
        for v in 0..self.vertices.len() {
            if self.outgoing[v].iter().any(|e| self.incoming[v].contains(e)) {
                return Err(format!("edge both outgoing and incoming at {}", self.vertices[v]));
            }
        }
        let total: usize = (0..self.vertices.len()).map(|v| self.degree(v)).sum();
        if total != 2 * self.edges.len() {
            return Err("incidence sets do not partition the edge ends".into());
        }
        Ok(())
    }
}

/// A walk through the graph with its edges made explicit; `signs[i] = +1`
/// when `edges[i]` runs from `vertices[i]` to `vertices[i+1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    vertices: Vec<usize>,
    edges: Vec<usize>,
    signs: Vec<i8>,
}

impl Path {
    /// Path through `vertices`; each step must be joined by exactly one edge.
    pub fn through(g: &OrientedGraph, vertices: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        let mut signs = Vec::new();
        for w in vertices.windows(2) {
            let cands = g.edges_between(w[0], w[1]);
            match cands.as_slice() {
                [(e, s)] => {
                    edges.push(*e);
                    signs.push(*s);
                }
                [] => return Err(Error::InvalidPath(format!("{} and {} are not adjacent", g.vertices[w[0]], g.vertices[w[1]]))),
                _ => return Err(Error::InvalidPath(format!("{} and {} are joined by several edges", g.vertices[w[0]], g.vertices[w[1]]))),
            }
        }
        Ok(Path { vertices: vertices.to_vec(), edges, signs })
    }

    /// Path starting at `start` that walks along the listed edges.
    pub fn along(g: &OrientedGraph, start: usize, edges: &[usize]) -> Result<Self> {
        let mut vertices = vec![start];
        let mut signs = Vec::new();
        let mut at = start;
        for &k in edges {
            let e = g.edges.get(k).ok_or_else(|| Error::InvalidPath(format!("no edge {k}")))?;
            if e.origin == at {
                signs.push(1);
                at = e.terminus;
            } else if e.terminus == at {
                signs.push(-1);
                at = e.origin;
            } else {
                return Err(Error::InvalidPath(format!("{} does not touch {}", e.id, g.vertices[at])));
            }
            vertices.push(at);
        }
        Ok(Path { vertices, edges: edges.to_vec(), signs })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.first() == self.vertices.last()
    }

    pub fn reversed(&self) -> Path {
        Path {
            vertices: self.vertices.iter().rev().copied().collect(),
            edges: self.edges.iter().rev().copied().collect(),
            signs: self.signs.iter().rev().map(|s| -s).collect(),
        }
    }

    pub fn concat(&self, other: &Path) -> Result<Path> {
        if self.vertices.last() != other.vertices.first() {
            return Err(Error::InvalidPath("paths do not meet".into()));
        }
        let mut p = self.clone();
        p.vertices.extend_from_slice(&other.vertices[1..]);
        p.edges.extend_from_slice(&other.edges);
        p.signs.extend_from_slice(&other.signs);
        Ok(p)
    }

    /// Same closed loop started `k` steps later.
    pub fn rotated(&self, k: usize) -> Result<Path> {
        if !self.is_closed() {
            return Err(Error::InvalidPath("rotation of an open path".into()));
        }
        let n = self.edges.len();
        if n == 0 {
            return Ok(self.clone());
        }
        let k = k % n;
        let mut vertices: Vec<usize> = (0..n).map(|i| self.vertices[(i + k) % n]).collect();
        vertices.push(vertices[0]);
        Ok(Path {
            vertices,
            edges: (0..n).map(|i| self.edges[(i + k) % n]).collect(),
            signs: (0..n).map(|i| self.signs[(i + k) % n]).collect(),
        })
    }
}

/// Orientation signs of a path.
pub fn path_signs(p: &Path) -> &[i8] {
    &p.signs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    SmoothBottom,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" | "torus" => Ok(Boundary::Periodic),
            "smooth-bottom" | "smooth" => Ok(Boundary::SmoothBottom),
            other => Err(Error::InvalidLattice(format!("unsupported boundary `{other}`"))),
        }
    }
}

/// A square plaquette. `edges` are listed counterclockwise starting at the
/// top-right corner: top, left, bottom, right.
#[derive(Clone, Debug)]
pub struct Face {
    pub id: String,
    pub plane: (Axis, Axis),
    pub corner: Vertex,
    pub start: usize,
    pub edges: [usize; 4],
}

/// Square or cubic lattice with its graph, stars and faces.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub extents: Vec<usize>,
    pub periodic: Vec<bool>,
    graph: OrientedGraph,
    stars: Vec<usize>,
    faces: Vec<Face>,
}

impl Lattice {
    pub fn graph(&self) -> &OrientedGraph {
        &self.graph
    }

    /// Vertices carrying a full Gauss-law star (open endpoints excluded).
    pub fn stars(&self) -> &[usize] {
        &self.stars
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn vertex_at(&self, coords: &[usize]) -> Option<usize> {
        self.graph.vertex(&Vertex(coords.to_vec()))
    }

    /// The edge leaving `coords` in the negative direction of `axis`.
    pub fn edge_from(&self, coords: &[usize], axis: Axis) -> Option<usize> {
        let v = self.vertex_at(coords)?;
        self.graph.outgoing(v).iter().copied().find(|&e| self.graph.edges[e].axis == axis)
    }

    pub fn face_loop(&self, f: &Face) -> Path {
        Path::along(&self.graph, f.start, &f.edges).expect("face edges form a loop")
    }

    /// For periodic axes in the xy plane: one straight loop per axis through
    /// the first star, walked along the edge orientation.
    pub fn noncontractible_loops(&self) -> Vec<Path> {
        let Some(&base) = self.stars.first() else { return vec![] };
        let origin = self.graph.vertices[base].0.clone();
        let mut out = Vec::new();
        for axis in [Axis::X, Axis::Y] {
            let a = axis.index();
            if a >= self.extents.len() || !self.periodic[a] {
                continue;
            }
            let mut at = origin.clone();
            let mut edges = Vec::new();
            for _ in 0..self.extents[a] {
                let e = self.edge_from(&at, axis).expect("periodic edge");
                edges.push(e);
                at = self.graph.vertices[self.graph.edges[e].terminus].0.clone();
            }
            out.push(Path::along(&self.graph, base, &edges).expect("straight loop"));
        }
        out
    }
}

fn coords_iter(extents: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in extents {
        out = out.into_iter().flat_map(|c| (0..n).map(move |i| [c.clone(), vec![i]].concat())).collect();
    }
    // Row-major with x fastest reads better in ids and site orders.
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

fn shifted(c: &[usize], axis: usize, extents: &[usize], periodic: &[bool]) -> Option<Vec<usize>> {
    let mut d = c.to_vec();
    d[axis] += 1;
    if d[axis] == extents[axis] {
        if !periodic[axis] {
            return None;
        }
        d[axis] = 0;
    }
    Some(d)
}

/// Adds the kept edges `c + ê_axis → c` and the faces on the selected planes.
fn assemble(
    extents: Vec<usize>,
    periodic: Vec<bool>,
    keep_edge: impl Fn(&[usize], usize) -> bool,
    stars: impl Fn(&[usize]) -> bool,
    face_planes: impl Fn(&[usize], usize, usize) -> bool,
) -> Result<Lattice> {
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let coords = coords_iter(&extents);
    let mut graph = OrientedGraph::new(coords.iter().cloned().map(Vertex).collect())?;
    for c in &coords {
        for a in 0..extents.len() {
            if let Some(d) = shifted(c, a, &extents, &periodic).filter(|d| keep_edge(d, a)) {
                let o = graph.vertex(&Vertex(d)).unwrap();
                let t = graph.vertex(&Vertex(c.clone())).unwrap();
                graph.add_edge(o, t, axes[a])?;
            }
        }
    }
    let star_list = coords.iter().filter(|c| stars(c)).map(|c| graph.vertex(&Vertex(c.clone())).unwrap()).collect();
    let mut faces = Vec::new();
    for c in &coords {
        for a in 0..extents.len() {
            for b in a + 1..extents.len() {
                if !face_planes(c, a, b) {
                    continue;
                }
                let (Some(ca), Some(cb)) = (shifted(c, a, &extents, &periodic), shifted(c, b, &extents, &periodic)) else { continue };
                let Some(cab) = shifted(&ca, b, &extents, &periodic) else { continue };
                let find = |from: &[usize], axis: usize| -> usize {
                    let v = graph.vertex(&Vertex(from.to_vec())).unwrap();
                    *graph.outgoing(v).iter().find(|&&e| graph.edges[e].axis == axes[axis]).unwrap()
                };
                let top = find(&cab, a);
                let left = find(&cb, b);
                let bottom = find(&ca, a);
                let right = find(&cab, b);
                let start = graph.vertex(&Vertex(cab.clone())).unwrap();
                faces.push(Face {
                    id: format!("f:{}:{}{}", Vertex(c.clone()), ["x", "y", "z"][a], ["x", "y", "z"][b]),
                    plane: (axes[a], axes[b]),
                    corner: Vertex(c.clone()),
                    start,
                    edges: [top, left, bottom, right],
                });
            }
        }
    }
    Ok(Lattice { extents, periodic, graph, stars: star_list, faces })
}

/// `w × h` square lattice. `Periodic` is a torus; `SmoothBottom` is periodic
/// in x with `h` rows of stars above a smooth bottom boundary and an extra
/// row of open endpoints on top.
pub fn build_square_lattice(w: usize, h: usize, boundary: Boundary) -> Result<Lattice> {
    if w < 2 || h < 1 || (boundary == Boundary::Periodic && h < 2) {
        return Err(Error::InvalidLattice(format!("{w}×{h} is degenerate; periodic axes need extent ≥ 2")));
    }
    match boundary {
        Boundary::Periodic => assemble(vec![w, h], vec![true, true], |_, _| true, |_| true, |_, _, _| true),
        // Top endpoints keep only their downward edge.
        Boundary::SmoothBottom => assemble(vec![w, h + 1], vec![true, false], move |o, a| a == 1 || o[1] < h, move |c| c[1] < h, move |c, _, _| c[1] + 1 < h),
    }
}

/// `w × h` periodic in x and y, with `d` layers of stars stacked in z between
/// an open bottom layer and an open top layer of endpoints. Vertical rungs
/// run from each layer to the one below.
pub fn build_cubic_lattice(w: usize, h: usize, d: usize, periodic: bool) -> Result<Lattice> {
    if w < 2 || h < 2 || d < 1 {
        return Err(Error::InvalidLattice(format!("{w}×{h}×{d} is degenerate")));
    }
    assemble(
        vec![w, h, d + 2],
        vec![periodic, periodic, false],
        // Endpoint layers only carry their rungs.
        move |o, a| a == 2 || (1..=d).contains(&o[2]),
        move |c| (1..=d).contains(&c[2]),
        move |c, _, b| if b == 2 { (1..d).contains(&c[2]) } else { (1..=d).contains(&c[2]) },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_counts_satisfy_euler() {
        let l = build_square_lattice(2, 2, Boundary::Periodic).unwrap();
        assert_eq!((l.graph().vertices().len(), l.graph().edges().len(), l.faces().len()), (4, 8, 4));
        let l = build_square_lattice(3, 4, Boundary::Periodic).unwrap();
        let (v, e, f) = (l.graph().vertices().len(), l.graph().edges().len(), l.faces().len());
        assert_eq!(v + f, e);
        assert!(l.graph().check_axioms().is_ok());
    }

    #[test]
    fn degenerate_lattices_rejected() {
        assert!(build_square_lattice(1, 1, Boundary::Periodic).is_err());
        assert!("rough".parse::<Boundary>().is_err());
    }

    #[test]
    fn smooth_bottom_boundary_stars_have_three_legs() {
        let l = build_square_lattice(2, 2, Boundary::SmoothBottom).unwrap();
        let g = l.graph();
        for x in 0..2 {
            assert_eq!(g.degree(l.vertex_at(&[x, 0]).unwrap()), 3);
            assert_eq!(g.degree(l.vertex_at(&[x, 1]).unwrap()), 4);
            assert_eq!(g.degree(l.vertex_at(&[x, 2]).unwrap()), 1);
        }
        assert_eq!(l.stars().len(), 4);
        assert_eq!(l.faces().len(), 2);
        assert!(g.check_axioms().is_ok());
    }

    #[test]
    fn edges_run_right_to_left_and_top_to_bottom() {
        let l = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let g = l.graph();
        for e in g.edges() {
            let (o, t) = (&g.vertices()[e.origin].0, &g.vertices()[e.terminus].0);
            let a = e.axis.index();
            assert_eq!((t[a] + 1) % 3, o[a]);
        }
        assert!(g.antiparallel_pairs().is_empty());
        let small = build_square_lattice(2, 2, Boundary::Periodic).unwrap();
        assert_eq!(small.graph().antiparallel_pairs().len(), 4);
    }

    #[test]
    fn bulk_face_has_two_positive_and_two_negative_signs() {
        for l in [build_square_lattice(3, 3, Boundary::Periodic).unwrap(), build_square_lattice(2, 3, Boundary::SmoothBottom).unwrap()] {
            for f in l.faces() {
                let p = l.face_loop(f);
                assert!(p.is_closed());
                assert_eq!(p.len(), 4);
                assert_eq!(path_signs(&p), &[1, 1, -1, -1]);
                assert_eq!(l.graph().vertices()[p.vertices()[0]].0, vec![(f.corner.0[0] + 1) % l.extents[0], (f.corner.0[1] + 1) % l.extents[1]]);
            }
        }
    }

    #[test]
    fn reversal_negates_signs_and_cancels() {
        let l = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let p = l.face_loop(&l.faces()[4]);
        let r = p.reversed();
        assert!(path_signs(&r).iter().zip(path_signs(&p).iter().rev()).all(|(a, b)| *a == -b));
        let word = p.concat(&r).unwrap();
        let n = word.len();
        for i in 0..n / 2 {
            assert_eq!(word.edges()[i], word.edges()[n - 1 - i]);
            assert_eq!(path_signs(&word)[i], -path_signs(&word)[n - 1 - i]);
        }
    }

    #[test]
    fn backtracking_path() {
        let l = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let (v, w) = (l.vertex_at(&[0, 0]).unwrap(), l.vertex_at(&[1, 0]).unwrap());
        let p = Path::through(l.graph(), &[v, w, v]).unwrap();
        assert_eq!(path_signs(&p), &[-1, 1]);
        let p = Path::through(l.graph(), &[w, v, w]).unwrap();
        assert_eq!(path_signs(&p), &[1, -1]);
        let far = l.vertex_at(&[2, 2]).unwrap();
        assert!(Path::through(l.graph(), &[v, far]).is_err());
    }

    #[test]
    fn noncontractible_loops_wrap() {
        let l = build_square_lattice(2, 2, Boundary::Periodic).unwrap();
        let loops = l.noncontractible_loops();
        assert_eq!(loops.len(), 2);
        for p in &loops {
            assert!(p.is_closed());
            assert_eq!(p.len(), 2);
            assert!(path_signs(p).iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn cubic_counts() {
        let l = build_cubic_lattice(2, 2, 1, true).unwrap();
        let g = l.graph();
        // Three vertex layers; in-plane edges only on the star layer.
        assert_eq!(g.vertices().len(), 12);
        assert_eq!(g.edges().len(), 8 + 8);
        assert_eq!(l.faces().len(), 4);
        assert_eq!(l.stars().len(), 4);
        for &v in l.stars() {
            assert_eq!(g.degree(v), 6);
        }
        let l = build_cubic_lattice(2, 2, 2, true).unwrap();
        let count = |p: (Axis, Axis)| l.faces().iter().filter(|f| f.plane == p).count();
        assert_eq!((count((Axis::X, Axis::Y)), count((Axis::X, Axis::Z)), count((Axis::Y, Axis::Z))), (8, 4, 4));
        assert!(l.graph().check_axioms().is_ok());
    }

    #[test]
    fn every_edge_between_stars_lies_on_a_face() {
        for l in [
            build_square_lattice(2, 2, Boundary::Periodic).unwrap(),
            build_square_lattice(3, 3, Boundary::SmoothBottom).unwrap(),
            build_cubic_lattice(2, 2, 3, true).unwrap(),
        ] {
            let g = l.graph();
            for (k, e) in g.edges().iter().enumerate() {
                let both_stars = l.stars().contains(&e.origin) && l.stars().contains(&e.terminus);
                if both_stars {
                    assert!(l.faces().iter().any(|f| f.edges.contains(&k)), "{}", e.id);
                }
                assert_ne!(e.origin, e.terminus);
            }
            for f in l.faces() {
                assert!(l.face_loop(f).is_closed());
            }
        }
    }

    #[test]
    fn rotation_keeps_loop() {
        let l = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let p = l.face_loop(&l.faces()[0]);
        let r = p.rotated(1).unwrap();
        assert!(r.is_closed());
        assert_eq!(r.edges()[3], p.edges()[0]);
    }
}
