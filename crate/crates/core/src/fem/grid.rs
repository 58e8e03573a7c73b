use serde::{Deserialize, Serialize};

/// Side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// One boundary edge of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub side: Side,
    pub nodes: [usize; 2],
    pub length: f64,
}

/// Uniform rectangular grid of `nx × ny` bilinear elements on `[0, lx] × [0, ly]`.
///
/// Node `(i, j)` has index `j·(nx+1) + i`; element `(ex, ey)` has index
/// `ey·nx + ex` and nodes listed counter-clockwise from its lower-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl StructuredGrid {
    /// Grid on the unit square.
    pub fn unit(nx: usize, ny: usize) -> Self {
        Self::with_extent(nx, ny, 1.0, 1.0)
    }

    pub fn with_extent(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        assert!(nx > 0 && ny > 0, "grid needs at least one element per direction");
        StructuredGrid {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        }
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % (self.nx + 1), k / (self.nx + 1))
    }

    pub fn node_coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(k);
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn element_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_ij(e);
        let n0 = self.node(ex, ey);
        let row = self.nx + 1;
        [n0, n0 + 1, n0 + 1 + row, n0 + row]
    }

    pub fn element_centroid(&self, e: usize) -> (f64, f64) {
        let (ex, ey) = self.element_ij(e);
        ((ex as f64 + 0.5) * self.hx, (ey as f64 + 0.5) * self.hy)
    }

    pub fn is_boundary_node(&self, k: usize) -> bool {
        let (i, j) = self.node_ij(k);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Boundary edges, side by side.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let mut out = Vec::with_capacity(2 * (self.nx + self.ny));
        for i in 0..self.nx {
            out.push(BoundaryEdge {
                side: Side::Bottom,
                nodes: [self.node(i, 0), self.node(i + 1, 0)],
                length: self.hx,
            });
        }
        for j in 0..self.ny {
            out.push(BoundaryEdge {
                side: Side::Right,
                nodes: [self.node(self.nx, j), self.node(self.nx, j + 1)],
                length: self.hy,
            });
        }
        for i in 0..self.nx {
            out.push(BoundaryEdge {
                side: Side::Top,
                nodes: [self.node(i, self.ny), self.node(i + 1, self.ny)],
                length: self.hx,
            });
        }
        for j in 0..self.ny {
            out.push(BoundaryEdge {
                side: Side::Left,
                nodes: [self.node(0, j), self.node(0, j + 1)],
                length: self.hy,
            });
        }
        out
    }

    /// Nodal values of a function of position.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|k| {
                let (x, y) = self.node_coords(k);
                f(x, y)
            })
            .collect()
    }

    /// Mean of the four nodal values of each element.
    pub fn element_means(&self, nodal: &[f64]) -> Vec<f64> {
        (0..self.n_elements())
            .map(|e| self.element_nodes(e).iter().map(|&k| nodal[k]).sum::<f64>() * 0.25)
            .collect()
    }
}
