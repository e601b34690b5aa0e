//! Structured linear-triangle meshes of rectangles, optionally with a
//! circular hole.
//!
//! Grid nodes are numbered row-major from the bottom-left corner and every
//! cell is split along its bottom-left → top-right diagonal. A hole is carved
//! by dropping every triangle whose centroid lies inside the disc; the nodes
//! left on the resulting staircase are then pushed radially onto the circle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FemError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Left,
    Right,
    Top,
    Bottom,
    Hole,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 5] = [
        EdgeLabel::Left,
        EdgeLabel::Right,
        EdgeLabel::Top,
        EdgeLabel::Bottom,
        EdgeLabel::Hole,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeLabel::Left => "left",
            EdgeLabel::Right => "right",
            EdgeLabel::Top => "top",
            EdgeLabel::Bottom => "bottom",
            EdgeLabel::Hole => "hole",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EdgeLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Rectangle,
    RectangleWithHole,
}

/// Rectangle `[0, width] × [0, height]`, optionally with a circular hole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole_center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole_radius: Option<f64>,
}

impl GeometrySpec {
    pub fn rectangle(width: f64, height: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::Rectangle,
            width,
            height,
            hole_center: None,
            hole_radius: None,
        }
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0)
    }

    pub fn with_hole(width: f64, height: f64, center: [f64; 2], radius: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::RectangleWithHole,
            width,
            height,
            hole_center: Some(center),
            hole_radius: Some(radius),
        }
    }

    /// Hole center and radius; the center defaults to the middle of the
    /// rectangle.
    pub fn hole(&self) -> Option<([f64; 2], f64)> {
        match self.kind {
            GeometryKind::Rectangle => None,
            GeometryKind::RectangleWithHole => {
                let c = self
                    .hole_center
                    .unwrap_or([0.5 * self.width, 0.5 * self.height]);
                Some((c, self.hole_radius.unwrap_or(0.0)))
            }
        }
    }

    pub fn has_edge(&self, label: EdgeLabel) -> bool {
        label != EdgeLabel::Hole || self.kind == GeometryKind::RectangleWithHole
    }

    pub fn check(&self) -> Result<(), FemError> {
        if !(self.width.is_finite() && self.width > 0.0 && self.height.is_finite() && self.height > 0.0) {
            return Err(FemError::InvalidGeometry(format!(
                "width and height must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        if let Some(([cx, cy], r)) = self.hole() {
            if !(r.is_finite() && r > 0.0) {
                return Err(FemError::InvalidGeometry(format!("hole radius must be positive, got {r}")));
            }
            let clearance = (cx - r).min(cy - r).min(self.width - cx - r).min(self.height - cy - r);
            if !(clearance > 0.0) {
                return Err(FemError::InvalidGeometry(format!(
                    "hole of radius {r} at ({cx}, {cy}) does not lie strictly inside the {}x{} rectangle",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    /// Node pair in the counter-clockwise order of the owning triangle, so
    /// the outward normal is `(dy, -dx) / len`.
    pub nodes: [usize; 2],
    pub label: EdgeLabel,
    pub triangle: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub width: f64,
    pub height: f64,
    pub hole: Option<([f64; 2], f64)>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri].map(|n| self.nodes[n]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, tri: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[tri].map(|n| self.nodes[n]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn has_label(&self, label: EdgeLabel) -> bool {
        self.boundary_edges.iter().any(|e| e.label == label)
    }

    /// Sorted, de-duplicated nodes lying on edges with `label`.
    pub fn edge_nodes(&self, label: EdgeLabel) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.label == label)
            .flat_map(|e| e.nodes)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn edge_length(&self, label: EdgeLabel) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.label == label)
            .map(|e| {
                let [a, b] = e.nodes.map(|n| self.nodes[n]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Shape-function gradients of a P1 triangle and its area.
    pub fn shape_gradients(&self, tri: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangles[tri].map(|n| self.nodes[n]);
        let two_a = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g = [
            [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a],
            [(c[1] - a[1]) / two_a, (a[0] - c[0]) / two_a],
            [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
        ];
        (g, 0.5 * two_a)
    }

    /// Nodes strictly inside the hole disc (beyond a relative tolerance).
    pub fn nodes_inside_hole(&self) -> Vec<usize> {
        match self.hole {
            None => Vec::new(),
            Some((c, r)) => self
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, p)| (p[0] - c[0]).hypot(p[1] - c[1]) < r * (1.0 - 1e-9))
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

/// Minimum number of nodes a carved hole must be resolved with.
pub const MIN_HOLE_NODES: usize = 8;

pub fn generate_mesh(geom: &GeometrySpec, nx: usize, ny: usize) -> Result<Mesh, FemError> {
    geom.check()?;
    if nx == 0 || ny == 0 {
        return Err(FemError::InvalidGeometry(format!(
            "mesh needs at least one cell per direction, got {nx} x {ny}"
        )));
    }
    let (w, h) = (geom.width, geom.height);
    let stride = nx + 1;
    let mut nodes = Vec::with_capacity(stride * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Exact endpoints keep the outer-edge classification exact.
            let x = if i == nx { w } else { w * i as f64 / nx as f64 };
            let y = if j == ny { h } else { h * j as f64 / ny as f64 };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n0 = j * stride + i;
            let n1 = n0 + 1;
            let n3 = n0 + stride;
            let n2 = n3 + 1;
            triangles.push([n0, n1, n2]);
            triangles.push([n0, n2, n3]);
        }
    }

    let mut on_hole = vec![false; nodes.len()];
    if let Some((c, r)) = geom.hole() {
        carve_hole(&mut nodes, &mut triangles, &mut on_hole, c, r, w, h, nx, ny)?;
    }

    // Drop orphaned nodes, keeping the row-major order of the survivors.
    let mut used = vec![false; nodes.len()];
    for t in &triangles {
        for &n in t {
            used[n] = true;
        }
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept_nodes = Vec::new();
    let mut kept_on_hole = Vec::new();
    for (i, p) in nodes.iter().enumerate() {
        if used[i] {
            remap[i] = kept_nodes.len();
            kept_nodes.push(*p);
            kept_on_hole.push(on_hole[i]);
        }
    }
    for t in &mut triangles {
        for n in t.iter_mut() {
            *n = remap[*n];
        }
    }

    let boundary_edges = label_boundary(&kept_nodes, &triangles, &kept_on_hole, w, h)?;
    let mesh = Mesh {
        nodes: kept_nodes,
        triangles,
        boundary_edges,
        width: w,
        height: h,
        hole: geom.hole(),
    };
    if let Some(bad) = (0..mesh.num_triangles()).find(|&t| !(mesh.signed_area(t) > 0.0)) {
        return Err(FemError::Resolution(format!(
            "triangle {bad} is degenerate after hole projection; refine the mesh"
        )));
    }
    Ok(mesh)
}

#[allow(clippy::too_many_arguments)]
fn carve_hole(
    nodes: &mut [[f64; 2]],
    triangles: &mut Vec<[usize; 3]>,
    on_hole: &mut [bool],
    c: [f64; 2],
    r: f64,
    w: f64,
    h: f64,
    nx: usize,
    ny: usize,
) -> Result<(), FemError> {
    let dist = |p: [f64; 2]| (p[0] - c[0]).hypot(p[1] - c[1]);
    let centroid = |t: &[usize; 3], nodes: &[[f64; 2]]| {
        let [a, b, d] = t.map(|n| nodes[n]);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    };
    // Projection can invert a kept triangle next to the hole. Such
    // triangles join the removed set and the carve is redone from the
    // original positions.
    let original = nodes.to_vec();
    let all = std::mem::take(triangles);
    let mut forced = vec![false; all.len()];
    let mut attempts = 0;
    loop {
        nodes.copy_from_slice(&original);
        on_hole.fill(false);
        let inside: Vec<bool> = all.iter().enumerate().map(|(k, t)| forced[k] || dist(centroid(t, nodes)) < r).collect();
        if !inside.iter().any(|&b| b) {
            return Err(hole_resolution_error(0, nx, ny));
        }
        let mut touches_removed = vec![false; nodes.len()];
        let mut touches_kept = vec![false; nodes.len()];
        for (t, &gone) in all.iter().zip(&inside) {
            for &n in t {
                if gone {
                    touches_removed[n] = true;
                } else {
                    touches_kept[n] = true;
                }
            }
        }
        let scale = w.max(h);
        for i in 0..nodes.len() {
            if !(touches_removed[i] && touches_kept[i]) {
                continue;
            }
            let p = nodes[i];
            if p[0].abs() <= 1e-12 * scale
                || (p[0] - w).abs() <= 1e-12 * scale
                || p[1].abs() <= 1e-12 * scale
                || (p[1] - h).abs() <= 1e-12 * scale
            {
                return Err(FemError::Resolution(
                    "hole reaches the outer boundary at this mesh resolution".into(),
                ));
            }
            let d = dist(p);
            if d == 0.0 {
                return Err(hole_resolution_error(0, nx, ny));
            }
            nodes[i] = [c[0] + r * (p[0] - c[0]) / d, c[1] + r * (p[1] - c[1]) / d];
            on_hole[i] = true;
        }
        // A kept triangle whose three corners all landed on the circle lies
        // inside the disc; drop it.
        let mut inverted = false;
        for (k, t) in all.iter().enumerate() {
            if inside[k] || t.iter().all(|&n| on_hole[n]) {
                continue;
            }
            let [a, b, d] = t.map(|n| nodes[n]);
            let area = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            if !(area > 0.0) && t.iter().any(|&n| on_hole[n]) {
                forced[k] = true;
                inverted = true;
            }
        }
        attempts += 1;
        if !inverted || attempts > 8 {
            *triangles = all
                .iter()
                .zip(&inside)
                .filter(|(t, &gone)| !gone && !t.iter().all(|&n| on_hole[n]))
                .map(|(t, _)| *t)
                .collect();
            break;
        }
    }
    let mut used = vec![false; nodes.len()];
    for t in triangles.iter() {
        for &n in t {
            used[n] = true;
        }
    }
    let count = (0..nodes.len()).filter(|&i| on_hole[i] && used[i]).count();
    if count < MIN_HOLE_NODES {
        return Err(hole_resolution_error(count, nx, ny));
    }
    Ok(())
}

fn hole_resolution_error(count: usize, nx: usize, ny: usize) -> FemError {
    FemError::Resolution(format!(
        "hole resolved by only {count} nodes on a {nx}x{ny} grid (need at least {MIN_HOLE_NODES})"
    ))
}

fn label_boundary(
    nodes: &[[f64; 2]],
    triangles: &[[usize; 3]],
    on_hole: &[bool],
    w: f64,
    h: f64,
) -> Result<Vec<BoundaryEdge>, FemError> {
    // Undirected edge -> (count, directed edge, owner)
    let mut seen: HashMap<(usize, usize), (u32, [usize; 2], usize)> = HashMap::new();
    for (ti, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            seen.entry(key)
                .and_modify(|e| e.0 += 1)
                .or_insert((1, [a, b], ti));
        }
    }
    let tol = 1e-12 * w.max(h);
    let mut edges: BTreeMap<(usize, usize), BoundaryEdge> = BTreeMap::new();
    for (key, (count, directed, owner)) in seen {
        if count != 1 {
            continue;
        }
        let [pa, pb] = directed.map(|n| nodes[n]);
        let label = if on_hole[directed[0]] && on_hole[directed[1]] {
            EdgeLabel::Hole
        } else if pa[0].abs() <= tol && pb[0].abs() <= tol {
            EdgeLabel::Left
        } else if (pa[0] - w).abs() <= tol && (pb[0] - w).abs() <= tol {
            EdgeLabel::Right
        } else if pa[1].abs() <= tol && pb[1].abs() <= tol {
            EdgeLabel::Bottom
        } else if (pa[1] - h).abs() <= tol && (pb[1] - h).abs() <= tol {
            EdgeLabel::Top
        } else {
            return Err(FemError::Resolution(format!(
                "boundary edge {key:?} is neither on the rectangle nor on the hole; refine the mesh"
            )));
        };
        edges.insert(key, BoundaryEdge { nodes: directed, label, triangle: owner });
    }
    Ok(edges.into_values().collect())
}
