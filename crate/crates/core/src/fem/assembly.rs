//! Assembly of the bilinear forms on a [`StructuredGrid`].

use super::grid::{Side, StructuredGrid};
use super::sparse::CsrMatrix;
use crate::quadrature::GAUSS2_UNIT;
use crate::{Error, Result};
use rayon::prelude::*;

/// Symmetric 2×2 coefficient tensor stored as `[a11, a12, a22]`.
pub type Tensor2 = [f64; 3];

/// Velocity values at the 2×2 Gauss points of one element, in the order
/// `(ξ₀,η₀), (ξ₁,η₀), (ξ₀,η₁), (ξ₁,η₁)`.
pub type GaussVelocity = [[f64; 2]; 4];

/// Shape functions and gradients at the 2×2 Gauss points of a grid element.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub phi: [[f64; 4]; 4],
    pub dx: [[f64; 4]; 4],
    pub dy: [[f64; 4]; 4],
    /// Quadrature weight of each Gauss point (area/4).
    pub weight: f64,
    /// `hy/hx`.
    aspect: f64,
}

impl ElementBasis {
    pub fn new(grid: &StructuredGrid) -> Self {
        let (hx, hy) = (grid.hx, grid.hy);
        let mut phi = [[0.0; 4]; 4];
        let mut dx = [[0.0; 4]; 4];
        let mut dy = [[0.0; 4]; 4];
        for (g, (xi, eta)) in gauss_points().into_iter().enumerate() {
            phi[g] = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
            dx[g] = [-(1.0 - eta) / hx, (1.0 - eta) / hx, eta / hx, -eta / hx];
            dy[g] = [-(1.0 - xi) / hy, -xi / hy, xi / hy, (1.0 - xi) / hy];
        }
        ElementBasis {
            phi,
            dx,
            dy,
            weight: 0.25 * grid.element_area(),
            aspect: hy / hx,
        }
    }

    /// Element stiffness matrix for a constant tensor, from the closed-form
    /// integrals of the bilinear basis.
    pub fn stiffness(&self, a: Tensor2) -> [[f64; 4]; 4] {
        const XX: [[f64; 4]; 4] = [[2.0, -2.0, -1.0, 1.0], [-2.0, 2.0, 1.0, -1.0], [-1.0, 1.0, 2.0, -2.0], [1.0, -1.0, -2.0, 2.0]];
        const YY: [[f64; 4]; 4] = [[2.0, 1.0, -1.0, -2.0], [1.0, 2.0, -2.0, -1.0], [-1.0, -2.0, 2.0, 1.0], [-2.0, -1.0, 1.0, 2.0]];
        const XY: [[f64; 4]; 4] = [[1.0, 0.0, -1.0, 0.0], [0.0, -1.0, 0.0, 1.0], [-1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, -1.0]];
        let cx = a[0] * self.aspect / 6.0;
        let cy = a[2] / (self.aspect * 6.0);
        let cxy = a[1] * 0.5;
        let mut k = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] = cx * XX[i][j] + cy * YY[i][j] + cxy * XY[i][j];
            }
        }
        k
    }

    /// Gradient of the bilinear interpolant of nodal values at each Gauss point.
    pub fn gradients(&self, local: [f64; 4]) -> [[f64; 2]; 4] {
        let mut out = [[0.0; 2]; 4];
        for (g, o) in out.iter_mut().enumerate() {
            for a in 0..4 {
                o[0] += self.dx[g][a] * local[a];
                o[1] += self.dy[g][a] * local[a];
            }
        }
        out
    }
}

fn gauss_points() -> [(f64, f64); 4] {
    let [a, b] = GAUSS2_UNIT;
    [(a, a), (b, a), (a, b), (b, b)]
}

fn local(grid: &StructuredGrid, e: usize, nodal: &[f64]) -> [f64; 4] {
    let n = grid.element_nodes(e);
    [nodal[n[0]], nodal[n[1]], nodal[n[2]], nodal[n[3]]]
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Stiffness matrix of `∫ a ∇u·∇v` with a positive scalar per element.
pub fn assemble_diffusion(grid: &StructuredGrid, coeff: &[f64]) -> Result<CsrMatrix> {
    check_len(grid.n_elements(), coeff.len())?;
    if let Some((e, c)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Assembly(format!("diffusion coefficient {c} on element {e} is not positive")));
    }
    let tensors: Vec<Tensor2> = coeff.iter().map(|&c| [c, 0.0, c]).collect();
    assemble_diffusion_tensor(grid, &tensors)
}

/// Stiffness matrix of `∫ A ∇u·∇v` with a symmetric positive definite tensor per element.
pub fn assemble_diffusion_tensor(grid: &StructuredGrid, tensors: &[Tensor2]) -> Result<CsrMatrix> {
    let n = grid.n_nodes();
    let map: Vec<usize> = (0..n).collect();
    assemble_diffusion_mapped(grid, tensors, &map, n)
}

/// Stiffness matrix with nodes identified through `dof_map` (node → dof), used
/// for periodic problems.
pub fn assemble_diffusion_mapped(
    grid: &StructuredGrid,
    tensors: &[Tensor2],
    dof_map: &[usize],
    n_dofs: usize,
) -> Result<CsrMatrix> {
    check_len(grid.n_elements(), tensors.len())?;
    check_len(grid.n_nodes(), dof_map.len())?;
    for (e, a) in tensors.iter().enumerate() {
        let det = a[0] * a[2] - a[1] * a[1];
        if !(a[0] > 0.0 && det > 0.0 && a.iter().all(|v| v.is_finite())) {
            return Err(Error::Assembly(format!("coefficient tensor {a:?} on element {e} is not positive definite")));
        }
    }
    let basis = ElementBasis::new(grid);
    let element_mats: Vec<[[f64; 4]; 4]> = tensors.par_iter().map(|&a| basis.stiffness(a)).collect();
    let mut triplets = Vec::with_capacity(16 * grid.n_elements());
    for (e, k) in element_mats.iter().enumerate() {
        let nodes = grid.element_nodes(e);
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((dof_map[nodes[i]], dof_map[nodes[j]], k[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n_dofs, &triplets, true))
}

/// Row-sum lumped mass of `∫ w u v` with a nonnegative scalar per element.
pub fn assemble_lumped_mass(grid: &StructuredGrid, weight: &[f64]) -> Result<Vec<f64>> {
    check_len(grid.n_elements(), weight.len())?;
    if let Some((e, w)) = weight.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Assembly(format!("mass weight {w} on element {e} is negative")));
    }
    let q = 0.25 * grid.element_area();
    let mut m = vec![0.0; grid.n_nodes()];
    for (e, &w) in weight.iter().enumerate() {
        for k in grid.element_nodes(e) {
            m[k] += q * w;
        }
    }
    Ok(m)
}

/// Lumped boundary mass `∫_∂Ω v ds` per node over the given sides.
pub fn boundary_mass(grid: &StructuredGrid, sides: &[Side]) -> Vec<f64> {
    let mut m = vec![0.0; grid.n_nodes()];
    for edge in grid.boundary_edges() {
        if sides.contains(&edge.side) {
            for k in edge.nodes {
                m[k] += 0.5 * edge.length;
            }
        }
    }
    m
}

/// Robin term `coefficient ∫_∂Ω (u − ambient) v ds` on all four sides with a
/// lumped boundary mass: returns the diagonal operator and the load vector.
pub fn assemble_robin(grid: &StructuredGrid, coefficient: f64, ambient: f64) -> (Vec<f64>, Vec<f64>) {
    assemble_robin_with(grid, &Side::ALL, coefficient, |_, _, _| ambient)
}

/// Robin term on a subset of sides with a position-dependent ambient value.
pub fn assemble_robin_with<F: Fn(Side, f64, f64) -> f64>(
    grid: &StructuredGrid,
    sides: &[Side],
    coefficient: f64,
    ambient: F,
) -> (Vec<f64>, Vec<f64>) {
    let mut diag = vec![0.0; grid.n_nodes()];
    let mut load = vec![0.0; grid.n_nodes()];
    if coefficient == 0.0 {
        return (diag, load);
    }
    for edge in grid.boundary_edges() {
        if !sides.contains(&edge.side) {
            continue;
        }
        for k in edge.nodes {
            let (x, y) = grid.node_coords(k);
            let w = 0.5 * edge.length * coefficient;
            diag[k] += w;
            load[k] += w * ambient(edge.side, x, y);
        }
    }
    (diag, load)
}

/// Convection matrix `C_jk = ∫ φ_k q·∇φ_j` for a velocity constant on each element.
pub fn assemble_convection(grid: &StructuredGrid, velocity: &[[f64; 2]]) -> Result<CsrMatrix> {
    check_len(grid.n_elements(), velocity.len())?;
    let at_gauss: Vec<GaussVelocity> = velocity.iter().map(|&v| [v; 4]).collect();
    assemble_convection_gauss(grid, &at_gauss)
}

/// Convection matrix for a velocity given at the Gauss points of each element.
pub fn assemble_convection_gauss(grid: &StructuredGrid, velocity: &[GaussVelocity]) -> Result<CsrMatrix> {
    check_len(grid.n_elements(), velocity.len())?;
    if velocity.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Assembly("non-finite convection velocity".into()));
    }
    let basis = ElementBasis::new(grid);
    let mats: Vec<[[f64; 4]; 4]> = velocity
        .par_iter()
        .map(|q| {
            let mut c = [[0.0; 4]; 4];
            for g in 0..4 {
                for j in 0..4 {
                    let qg = q[g][0] * basis.dx[g][j] + q[g][1] * basis.dy[g][j];
                    for k in 0..4 {
                        c[j][k] += basis.weight * qg * basis.phi[g][k];
                    }
                }
            }
            c
        })
        .collect();
    let mut triplets = Vec::with_capacity(16 * grid.n_elements());
    for (e, c) in mats.iter().enumerate() {
        let nodes = grid.element_nodes(e);
        for j in 0..4 {
            for k in 0..4 {
                triplets.push((nodes[j], nodes[k], c[j][k]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(grid.n_nodes(), &triplets, false))
}

/// Flux `q = A ∇u_h` at the Gauss points of every element.
pub fn flux_at_gauss(grid: &StructuredGrid, tensors: &[Tensor2], u: &[f64]) -> Result<Vec<GaussVelocity>> {
    check_len(grid.n_elements(), tensors.len())?;
    check_len(grid.n_nodes(), u.len())?;
    let basis = ElementBasis::new(grid);
    Ok((0..grid.n_elements())
        .into_par_iter()
        .map(|e| {
            let a = tensors[e];
            let grads = basis.gradients(local(grid, e, u));
            let mut q = [[0.0; 2]; 4];
            for g in 0..4 {
                let [gx, gy] = grads[g];
                q[g] = [a[0] * gx + a[1] * gy, a[1] * gx + a[2] * gy];
            }
            q
        })
        .collect())
}

/// Divergence-free velocity `q = (∂ψ/∂y, −∂ψ/∂x)` of the bilinear interpolant
/// of a nodal stream function. Tangent to the boundary when `ψ` is constant there.
pub fn velocity_from_stream_function(grid: &StructuredGrid, psi: &[f64]) -> Result<Vec<GaussVelocity>> {
    check_len(grid.n_nodes(), psi.len())?;
    let basis = ElementBasis::new(grid);
    Ok((0..grid.n_elements())
        .map(|e| {
            let grads = basis.gradients(local(grid, e, psi));
            let mut q = [[0.0; 2]; 4];
            for g in 0..4 {
                q[g] = [grads[g][1], -grads[g][0]];
            }
            q
        })
        .collect())
}
