use crate::domain_map::{Point, SamplePoint};
use crate::error::{param_err, Result};

/// Boundary side flags; a corner vertex carries two of them.
pub mod side {
    pub const BOTTOM: u8 = 1;
    pub const RIGHT: u8 = 2;
    pub const TOP: u8 = 4;
    pub const LEFT: u8 = 8;
}

/// Structured triangulation of the unit square with `n x n` vertices.
///
/// Vertex `(i, j)` sits at `(i h, j h)` with id `j n + i`; every cell is cut
/// along its `(i, j) - (i+1, j+1)` diagonal into two counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<u8>,
}

impl Mesh {
    pub fn n_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Side flags of each vertex (zero for interior vertices).
    pub fn boundary_flags(&self) -> &[u8] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v] != 0
    }

    /// Signed area of a triangle.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb - pa).perp(&(pc - pa)))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Edge midpoints of triangle `[a, b, c]` in the order `ab, bc, ca`.
    pub fn edge_midpoints(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        let v = &self.vertices;
        [
            (v[a] + v[b]) * 0.5,
            (v[b] + v[c]) * 0.5,
            (v[c] + v[a]) * 0.5,
        ]
    }

    /// Default sample set for the deformation assumption check: every vertex
    /// (probed from each adjacent piece via the element centroids) plus every
    /// element edge midpoint.
    pub fn assumption_samples(&self) -> Vec<SamplePoint> {
        let mut out = Vec::with_capacity(self.triangles.len() * 6);
        for t in 0..self.triangles.len() {
            let probe = self.centroid(t);
            for &v in &self.triangles[t] {
                out.push(SamplePoint {
                    x: self.vertices[v],
                    probe,
                });
            }
            for m in self.edge_midpoints(t) {
                out.push(SamplePoint { x: m, probe });
            }
        }
        out
    }
}

/// Builds the structured mesh with `n >= 3` vertices per side.
pub fn build_mesh(n: usize) -> Result<Mesh> {
    if n < 3 {
        return param_err(format!("mesh needs at least 3 vertices per side, got {n}"));
    }
    let last = (n - 1) as f64;
    let mut vertices = Vec::with_capacity(n * n);
    let mut boundary = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push(Point::new(i as f64 / last, j as f64 / last));
            let mut flags = 0;
            if j == 0 {
                flags |= side::BOTTOM;
            }
            if j == n - 1 {
                flags |= side::TOP;
            }
            if i == 0 {
                flags |= side::LEFT;
            }
            if i == n - 1 {
                flags |= side::RIGHT;
            }
            boundary.push(flags);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let v00 = j * n + i;
            let v10 = v00 + 1;
            let v01 = v00 + n;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(Mesh {
        n,
        vertices,
        triangles,
        boundary,
    })
}
