//! Structured right-triangle meshes of axis-aligned rectangles with tagged
//! boundary edges.
//!
//! Nodes are numbered row by row, `index = j * (nx + 1) + i`, so node `(i, j)`
//! sits at `(i * lx / nx, j * ly / ny)`. Every grid cell is split along its
//! bottom-left to top-right diagonal into two counterclockwise right triangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary role of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Homogeneous Dirichlet part.
    Gamma0,
    /// Flux / traction part.
    Gamma1,
    /// Homogeneous Neumann part (everything not otherwise tagged).
    Gamma2,
}

/// One side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A closed interval `[start, end]` on one side of the rectangle, measured
/// along that side from its lower coordinate (`x` for bottom/top, `y` for
/// left/right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub side: Side,
    pub start: f64,
    pub end: f64,
    pub tag: BoundaryTag,
}

impl Segment {
    pub fn new(side: Side, start: f64, end: f64, tag: BoundaryTag) -> Self {
        Self {
            side,
            start,
            end,
            tag,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundarySpec {
    pub segments: Vec<Segment>,
}

impl BoundarySpec {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
}

impl Mesh {
    /// Structured mesh of `[0, lx] x [0, ly]` with `nx x ny` cells. All
    /// boundary edges start out tagged [`BoundaryTag::Gamma2`].
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "rectangle sides must be positive, got {lx} x {ly}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!(
                "subdivision counts must be at least 1, got {nx} x {ny}"
            )));
        }

        let stride = nx + 1;
        let mut nodes = Vec::with_capacity(stride * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = j * stride + i;
                let b = a + 1;
                let c = b + stride;
                let d = a + stride;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        // Counterclockwise walk around the boundary.
        let node = |i: usize, j: usize| j * stride + i;
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        let mut push = |n0, n1, side| {
            boundary_edges.push(BoundaryEdge {
                nodes: [n0, n1],
                side,
                tag: BoundaryTag::Gamma2,
            })
        };
        for i in 0..nx {
            push(node(i, 0), node(i + 1, 0), Side::Bottom);
        }
        for j in 0..ny {
            push(node(nx, j), node(nx, j + 1), Side::Right);
        }
        for i in (0..nx).rev() {
            push(node(i + 1, ny), node(i, ny), Side::Top);
        }
        for j in (0..ny).rev() {
            push(node(0, j + 1), node(0, j), Side::Left);
        }

        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            lx,
            ly,
            nx,
            ny,
        })
    }

    /// Returns a copy with boundary edges retagged according to `spec`. An
    /// edge receives a segment's tag iff both endpoints lie in the segment's
    /// closed interval; every other edge becomes `Gamma2`.
    pub fn tag_boundary(&self, spec: &BoundarySpec) -> Result<Self> {
        for (k, seg) in spec.segments.iter().enumerate() {
            let length = self.side_length(seg.side);
            let tol = 1e-12 * length;
            if !(seg.start.is_finite() && seg.end.is_finite()) || seg.start > seg.end {
                return Err(Error::InvalidBoundary(format!(
                    "segment {k}: interval [{}, {}] is empty or not finite",
                    seg.start, seg.end
                )));
            }
            if seg.start < -tol || seg.end > length + tol {
                return Err(Error::InvalidBoundary(format!(
                    "segment {k}: interval [{}, {}] leaves the {:?} side of length {length}",
                    seg.start, seg.end, seg.side
                )));
            }
            if seg.tag == BoundaryTag::Gamma2 {
                continue;
            }
            for (m, other) in spec.segments.iter().enumerate().skip(k + 1) {
                if other.side == seg.side
                    && other.tag != BoundaryTag::Gamma2
                    && seg.start.max(other.start) < seg.end.min(other.end) - tol
                {
                    return Err(Error::InvalidBoundary(format!(
                        "segments {k} and {m} overlap on the {:?} side",
                        seg.side
                    )));
                }
            }
        }

        let mut tagged = self.clone();
        for edge in &mut tagged.boundary_edges {
            let length = self.side_length(edge.side);
            let tol = 1e-12 * length;
            let s0 = self.coordinate_along(edge.side, edge.nodes[0]);
            let s1 = self.coordinate_along(edge.side, edge.nodes[1]);
            edge.tag = spec
                .segments
                .iter()
                .filter(|seg| seg.side == edge.side)
                .find(|seg| {
                    let inside = |s: f64| s >= seg.start - tol && s <= seg.end + tol;
                    inside(s0) && inside(s1)
                })
                .map_or(BoundaryTag::Gamma2, |seg| seg.tag);
        }
        Ok(tagged)
    }

    fn side_length(&self, side: Side) -> f64 {
        match side {
            Side::Bottom | Side::Top => self.lx,
            Side::Left | Side::Right => self.ly,
        }
    }

    fn coordinate_along(&self, side: Side, node: usize) -> f64 {
        let [x, y] = self.nodes[node];
        match side {
            Side::Bottom | Side::Top => x,
            Side::Left | Side::Right => y,
        }
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Largest distance between two points of the rectangle.
    pub fn diameter(&self) -> f64 {
        self.lx.hypot(self.ly)
    }

    /// Signed area of triangle `t` (positive for counterclockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|n| self.nodes[n]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edges_tagged(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Sorted, deduplicated endpoints of all edges carrying `tag`.
    pub fn nodes_tagged(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.edges_tagged(tag).flat_map(|e| e.nodes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Total length of the edges carrying `tag`.
    pub fn tagged_length(&self, tag: BoundaryTag) -> f64 {
        self.edges_tagged(tag)
            .map(|e| {
                let [p, q] = e.nodes.map(|n| self.nodes[n]);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .sum()
    }
}
