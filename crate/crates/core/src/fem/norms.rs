//! Discrete norms with the consistent (unlumped) mass matrix.

use super::grid::StructuredGrid;
use crate::{Error, Result};

const ELEMENT_MASS: [[f64; 4]; 4] = [
    [4.0, 2.0, 1.0, 2.0],
    [2.0, 4.0, 2.0, 1.0],
    [1.0, 2.0, 4.0, 2.0],
    [2.0, 1.0, 2.0, 4.0],
];

fn check(grid: &StructuredGrid, field: &[f64]) -> Result<()> {
    if field.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_nodes(),
            actual: field.len(),
        });
    }
    Ok(())
}

/// `∫ u_h²` of the bilinear interpolant.
pub fn l2_norm_sq(grid: &StructuredGrid, field: &[f64]) -> Result<f64> {
    check(grid, field)?;
    let scale = grid.element_area() / 36.0;
    let mut total = 0.0;
    for e in 0..grid.n_elements() {
        let n = grid.element_nodes(e);
        let u = [field[n[0]], field[n[1]], field[n[2]], field[n[3]]];
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += ELEMENT_MASS[i][j] * u[i] * u[j];
            }
        }
        total += s;
    }
    Ok((scale * total).max(0.0))
}

pub fn l2_norm(grid: &StructuredGrid, field: &[f64]) -> Result<f64> {
    Ok(l2_norm_sq(grid, field)?.sqrt())
}

/// `∫ u_h v_h`.
pub fn l2_inner(grid: &StructuredGrid, u: &[f64], v: &[f64]) -> Result<f64> {
    check(grid, u)?;
    check(grid, v)?;
    let scale = grid.element_area() / 36.0;
    let mut total = 0.0;
    for e in 0..grid.n_elements() {
        let n = grid.element_nodes(e);
        for i in 0..4 {
            for j in 0..4 {
                total += ELEMENT_MASS[i][j] * u[n[i]] * v[n[j]];
            }
        }
    }
    Ok(scale * total)
}

pub fn l2_distance(grid: &StructuredGrid, a: &[f64], b: &[f64]) -> Result<f64> {
    check(grid, a)?;
    check(grid, b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(grid, &d)
}

/// `∫_∂Ω u_h² ds`.
pub fn boundary_l2_norm_sq(grid: &StructuredGrid, field: &[f64]) -> Result<f64> {
    check(grid, field)?;
    Ok(grid
        .boundary_edges()
        .iter()
        .map(|e| {
            let (a, b) = (field[e.nodes[0]], field[e.nodes[1]]);
            e.length / 3.0 * (a * a + a * b + b * b)
        })
        .sum())
}

/// `∫ |∇u_h|²`.
pub fn h1_seminorm_sq(grid: &StructuredGrid, field: &[f64]) -> Result<f64> {
    check(grid, field)?;
    let basis = super::assembly::ElementBasis::new(grid);
    let mut total = 0.0;
    for e in 0..grid.n_elements() {
        let n = grid.element_nodes(e);
        let g = basis.gradients([field[n[0]], field[n[1]], field[n[2]], field[n[3]]]);
        for q in g {
            total += basis.weight * (q[0] * q[0] + q[1] * q[1]);
        }
    }
    Ok(total)
}

/// Space-time distance `(Σ_i h ‖a_i − b_i‖²)^½` over time levels `1..`; level 0
/// (the initial data) is excluded, matching a piecewise-constant-in-time
/// reconstruction of the implicit scheme.
pub fn l2_distance_spacetime(grid: &StructuredGrid, h: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b).skip(1) {
        total += h * l2_distance(grid, x, y)?.powi(2);
    }
    Ok(total.sqrt())
}

/// Boundary counterpart of [`l2_distance_spacetime`].
pub fn boundary_distance_spacetime(grid: &StructuredGrid, h: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b).skip(1) {
        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        total += h * boundary_l2_norm_sq(grid, &d)?;
    }
    Ok(total.sqrt())
}
