//! Triangulations of polygonal planar domains.
//!
//! A [`TriangleMesh`] owns node coordinates, positively oriented triangles and
//! the boundary derived from them. Per-triangle P1 geometry (area and the
//! gradients of the three hat functions) is computed once at construction.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// Area and hat-function gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub basis_gradients: [Vector2<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    nodes: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    boundary_edges: Vec<[usize; 2]>,
    /// Position of each node in `boundary_nodes`, `None` for interior nodes.
    boundary_slot: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
    /// Position of each node in `interior_nodes`, `None` for boundary nodes.
    interior_slot: Vec<Option<usize>>,
    geometry: Vec<ElementGeometry>,
    lumped_mass: Vec<f64>,
}

impl TriangleMesh {
    /// Builds a mesh and derives its boundary.
    ///
    /// Triangles must be counterclockwise with strictly positive area, every
    /// edge may be shared by at most two triangles, and every boundary node
    /// must have exactly one outgoing boundary edge.
    pub fn new(nodes: Vec<Point2<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nodes.len() {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references node {v} but there are {} nodes",
                        nodes.len()
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
        }
        for (i, x) in nodes.iter().enumerate() {
            if !(x.x.is_finite() && x.y.is_finite()) {
                return Err(Error::InvalidMesh(format!("node {i} has non-finite coordinates")));
            }
        }

        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let g = element_geometry(&nodes, tri);
            if !(g.area > 0.0) {
                return Err(Error::DegenerateTriangle { index: t, area: g.area });
            }
            geometry.push(g);
        }

        let boundary_edges = extract_boundary_edges(&triangles)?;
        let boundary_nodes = order_boundary_loops(&boundary_edges, nodes.len())?;

        let mut boundary_slot = vec![None; nodes.len()];
        for (k, &b) in boundary_nodes.iter().enumerate() {
            boundary_slot[b] = Some(k);
        }
        let mut used = vec![false; nodes.len()];
        for tri in &triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(orphan) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("node {orphan} belongs to no triangle")));
        }
        let interior_nodes: Vec<usize> =
            (0..nodes.len()).filter(|&i| boundary_slot[i].is_none()).collect();
        let mut interior_slot = vec![None; nodes.len()];
        for (k, &i) in interior_nodes.iter().enumerate() {
            interior_slot[i] = Some(k);
        }

        let mut lumped_mass = vec![0.0; nodes.len()];
        for (tri, g) in triangles.iter().zip(&geometry) {
            for &v in tri {
                lumped_mass[v] += g.area / 3.0;
            }
        }

        Ok(Self {
            nodes,
            triangles,
            boundary_nodes,
            boundary_edges,
            boundary_slot,
            interior_nodes,
            interior_slot,
            geometry,
            lumped_mass,
        })
    }

    pub fn nodes(&self) -> &[Point2<f64>] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Boundary nodes in loop order (counterclockwise for the outer loop).
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Boundary edges, oriented so the domain lies to their left.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_slot[node].is_some()
    }

    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        self.interior_slot[node]
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Vertex-quadrature weights: one third of the area of every incident triangle.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Area enclosed by the boundary loops (shoelace formula).
    pub fn polygon_area(&self) -> f64 {
        0.5 * self
            .boundary_edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                pa.x * pb.y - pb.x * pa.y
            })
            .sum::<f64>()
    }

    /// Outward unit normal of each boundary edge: the tangent rotated by -pi/2.
    pub fn boundary_normals(&self) -> Vec<Vector2<f64>> {
        self.boundary_edges
            .iter()
            .map(|&[a, b]| {
                let d = self.nodes[b] - self.nodes[a];
                Vector2::new(d.y, -d.x).normalize()
            })
            .collect()
    }

    pub fn centroid(&self, triangle: usize) -> Point2<f64> {
        let [a, b, c] = self.triangles[triangle];
        Point2::from((self.nodes[a].coords + self.nodes[b].coords + self.nodes[c].coords) / 3.0)
    }

    /// Parses the text format: `N_v N_t`, then `N_v` lines `x y`, then `N_t`
    /// lines `i j k` with 0-based, positively oriented vertex indices. Blank
    /// lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line, header) = lines.next().ok_or(Error::MeshParse {
            line: 1,
            message: "empty mesh file".into(),
        })?;
        let counts: Vec<usize> = parse_fields(line, header)?;
        let [n_nodes, n_tris] = counts[..] else {
            return Err(Error::MeshParse {
                line,
                message: format!("expected `N_v N_t`, found {} fields", counts.len()),
            });
        };

        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, l) = lines.next().ok_or(Error::MeshParse {
                line: 0,
                message: format!("expected {n_nodes} node lines"),
            })?;
            let xy: Vec<f64> = parse_fields(line, l)?;
            let [x, y] = xy[..] else {
                return Err(Error::MeshParse { line, message: "expected `x y`".into() });
            };
            nodes.push(Point2::new(x, y));
        }
        let mut triangles = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (line, l) = lines.next().ok_or(Error::MeshParse {
                line: 0,
                message: format!("expected {n_tris} triangle lines"),
            })?;
            let ijk: Vec<usize> = parse_fields(line, l)?;
            let [i, j, k] = ijk[..] else {
                return Err(Error::MeshParse { line, message: "expected `i j k`".into() });
            };
            triangles.push([i, j, k]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::MeshParse { line, message: "trailing content".into() });
        }
        Self::new(nodes, triangles)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.nodes.len(), self.triangles.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
        }
        for [i, j, k] in &self.triangles {
            let _ = writeln!(out, "{i} {j} {k}");
        }
        out
    }
}

fn parse_fields<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|f| {
            f.parse::<T>().map_err(|_| Error::MeshParse {
                line,
                message: format!("cannot parse `{f}`"),
            })
        })
        .collect()
}

fn element_geometry(nodes: &[Point2<f64>], tri: &[usize; 3]) -> ElementGeometry {
    let [p0, p1, p2] = tri.map(|i| nodes[i]);
    let twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    let inv = 1.0 / twice_area;
    ElementGeometry {
        area: 0.5 * twice_area,
        basis_gradients: [
            Vector2::new(p1.y - p2.y, p2.x - p1.x) * inv,
            Vector2::new(p2.y - p0.y, p0.x - p2.x) * inv,
            Vector2::new(p0.y - p1.y, p1.x - p0.x) * inv,
        ],
    }
}

/// Edges used by exactly one triangle, oriented as in that triangle.
fn extract_boundary_edges(triangles: &[[usize; 3]]) -> Result<Vec<[usize; 2]>> {
    let mut uses: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    let mut order = Vec::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = uses.entry(key).or_insert_with(|| {
                order.push(key);
                (0, [a, b])
            });
            entry.0 += 1;
            if entry.0 > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) is shared by more than two triangles"
                )));
            }
        }
    }
    Ok(order
        .into_iter()
        .filter_map(|key| match uses[&key] {
            (1, edge) => Some(edge),
            _ => None,
        })
        .collect())
}

/// Chains boundary edges into closed loops, starting each loop at its
/// smallest unvisited node. Returns the node sequence of all loops.
fn order_boundary_loops(edges: &[[usize; 2]], node_count: usize) -> Result<Vec<usize>> {
    if edges.is_empty() {
        return Err(Error::InvalidMesh("mesh has no boundary".into()));
    }
    let mut next = vec![usize::MAX; node_count];
    for &[a, b] in edges {
        if next[a] != usize::MAX {
            return Err(Error::InvalidMesh(format!(
                "boundary node {a} has two outgoing boundary edges"
            )));
        }
        next[a] = b;
    }
    let mut starts: Vec<usize> = edges.iter().map(|e| e[0]).collect();
    starts.sort_unstable();

    let mut visited = vec![false; node_count];
    let mut ordered = Vec::with_capacity(edges.len());
    for start in starts {
        if visited[start] {
            continue;
        }
        let mut v = start;
        loop {
            visited[v] = true;
            ordered.push(v);
            v = next[v];
            if v == usize::MAX {
                return Err(Error::InvalidMesh("boundary edges do not close".into()));
            }
            if v == start {
                break;
            }
            if visited[v] {
                return Err(Error::InvalidMesh(format!("boundary loop revisits node {v}")));
            }
        }
    }
    if ordered.len() != edges.len() {
        return Err(Error::InvalidMesh("boundary edges do not form closed loops".into()));
    }
    Ok(ordered)
}

/// Uniform triangulation of the unit square with `subdivisions` cells per side.
///
/// Each cell is split along one diagonal, alternating in a checkerboard
/// pattern, so every triangle is right-angled with axis-aligned legs. For an
/// even number of subdivisions the mesh is symmetric under `x2 -> 1 - x2` and
/// `x1 -> 1 - x1`.
pub fn make_unit_square_mesh(subdivisions: usize) -> Result<TriangleMesh> {
    if subdivisions == 0 {
        return Err(Error::InvalidMesh("subdivisions must be at least 1".into()));
    }
    let n = subdivisions;
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // exact endpoints keep the boundary on the square
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            nodes.push(Point2::new(x, y));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    TriangleMesh::new(nodes, triangles)
}
