//! Periodic cell problems and effective coefficients.
//!
//! For a two-phase cell with scalar phase coefficients the corrector `w_i`
//! solves `−∇·(a(e_i + ∇w_i)) = 0` with periodic boundary conditions and zero
//! mean, and the effective tensor is `A*_ij = ∫ a(δ_ij + ∂_i w_j)`.
//!
//! Because both mobility and conductivity factor into a state-dependent scalar
//! times a phase pattern, the normalized tensor depends on the state only
//! through the contrast `cement/aggregate`. [`ContrastTable`] tabulates it.

use crate::fem::{assemble_diffusion_mapped, solve_spd, CsrMatrix, StructuredGrid, Tensor2};
use crate::laws::MaterialLaws;
use crate::microstructure::{CellRaster, Phase};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Linear tolerance of the cell solves.
const CELL_TOL: f64 = 1e-12;

/// Format version of serialized contrast tables.
pub const TABLE_VERSION: u32 = 1;

/// Scalar coefficient of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCoefficients {
    pub cement: f64,
    pub aggregate: f64,
}

impl PhaseCoefficients {
    pub fn of(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Cement => self.cement,
            Phase::Aggregate => self.aggregate,
        }
    }

    pub fn harmonic_mean(&self, cement_fraction: f64) -> f64 {
        1.0 / (cement_fraction / self.cement + (1.0 - cement_fraction) / self.aggregate)
    }

    pub fn arithmetic_mean(&self, cement_fraction: f64) -> f64 {
        cement_fraction * self.cement + (1.0 - cement_fraction) * self.aggregate
    }
}

/// Corrector of one direction on the periodic cell grid.
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub resolution: usize,
    /// Direction `i` (0 or 1) of the unit gradient `e_i`.
    pub direction: usize,
    /// Values at the `resolution²` periodic degrees of freedom; node `(i, j)`
    /// with `i, j < resolution` is dof `j·resolution + i`.
    pub values: Vec<f64>,
}

impl CorrectorField {
    /// Value at node `(i, j)` of the `(resolution+1)²` cell grid.
    pub fn at_node(&self, i: usize, j: usize) -> f64 {
        let n = self.resolution;
        self.values[(j % n) * n + (i % n)]
    }

    /// Mean over the cell.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Effective 2×2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor(pub [[f64; 2]; 2]);

impl EffectiveTensor {
    pub fn identity() -> Self {
        EffectiveTensor([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scaled(&self, s: f64) -> Self {
        let m = self.0;
        EffectiveTensor([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    /// `|A12 − A21| / max|A_ij|`.
    pub fn relative_asymmetry(&self) -> f64 {
        let m = self.0;
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (m[0][1] - m[1][0]).abs() / scale
        }
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [a, b, c] = self.symmetric();
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn is_spd(&self) -> bool {
        self.eigenvalues()[0] > 0.0
    }

    /// Symmetric part as `[a11, a12, a22]`.
    pub fn symmetric(&self) -> Tensor2 {
        let m = self.0;
        [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]]
    }
}

/// Discretized periodic unit cell.
#[derive(Debug, Clone)]
pub struct CellProblem {
    grid: StructuredGrid,
    phases: Vec<Phase>,
    dof_map: Vec<usize>,
    resolution: usize,
}

impl CellProblem {
    /// `resolution` elements per side; must be a multiple of the raster size
    /// so every element lies inside one raster cell.
    pub fn new(raster: &CellRaster, resolution: usize) -> Result<Self> {
        let m = raster.resolution();
        if resolution < 2 || !resolution.is_multiple_of(m) {
            return Err(Error::config(
                "/cell/resolution",
                format!("cell resolution {resolution} must be a positive multiple of the raster size {m}"),
            ));
        }
        let grid = StructuredGrid::unit(resolution, resolution);
        let per = resolution / m;
        let phases = (0..grid.n_elements())
            .map(|e| {
                let (ex, ey) = grid.element_ij(e);
                raster.phase(ex / per, ey / per)
            })
            .collect();
        let dof_map = (0..grid.n_nodes())
            .map(|k| {
                let (i, j) = grid.node_ij(k);
                (j % resolution) * resolution + (i % resolution)
            })
            .collect();
        Ok(CellProblem {
            grid,
            phases,
            dof_map,
            resolution,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    fn coefficients(&self, coeff: PhaseCoefficients) -> Result<Vec<f64>> {
        if !(coeff.cement > 0.0 && coeff.aggregate > 0.0 && coeff.cement.is_finite() && coeff.aggregate.is_finite()) {
            return Err(Error::config(
                "/coefficients",
                format!("phase coefficients must be positive, got {coeff:?}"),
            ));
        }
        Ok(self.phases.iter().map(|&p| coeff.of(p)).collect())
    }

    /// Load `−∫ a e_i·∇φ_j` of the cell problem in direction `i`.
    fn load(&self, a: &[f64], direction: usize) -> Vec<f64> {
        let (hx, hy) = (self.grid.hx, self.grid.hy);
        // ∫_e ∂φ_k/∂x and ∂φ_k/∂y over one element, local node order.
        let ix = [-0.5 * hy, 0.5 * hy, 0.5 * hy, -0.5 * hy];
        let iy = [-0.5 * hx, -0.5 * hx, 0.5 * hx, 0.5 * hx];
        let integrals = if direction == 0 { ix } else { iy };
        let mut rhs = vec![0.0; self.resolution * self.resolution];
        for (e, &ae) in a.iter().enumerate() {
            for (k, node) in self.grid.element_nodes(e).into_iter().enumerate() {
                rhs[self.dof_map[node]] -= ae * integrals[k];
            }
        }
        rhs
    }

    fn operator(&self, a: &[f64]) -> Result<CsrMatrix> {
        let tensors: Vec<Tensor2> = a.iter().map(|&c| [c, 0.0, c]).collect();
        let k = assemble_diffusion_mapped(&self.grid, &tensors, &self.dof_map, self.resolution * self.resolution)?;
        Ok(pin_first_dof(&k))
    }

    fn solve_with(&self, op: &CsrMatrix, a: &[f64], direction: usize) -> Result<CorrectorField> {
        let mut rhs = self.load(a, direction);
        rhs[0] = 0.0;
        let mut values = if rhs.iter().all(|&v| v.abs() <= 1e-300) {
            vec![0.0; rhs.len()]
        } else {
            solve_spd(op, &rhs, CELL_TOL, None)?.x
        };
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        Ok(CorrectorField {
            resolution: self.resolution,
            direction,
            values,
        })
    }

    /// Corrector for direction `direction` (0 = x, 1 = y).
    pub fn solve_corrector(&self, coeff: PhaseCoefficients, direction: usize) -> Result<CorrectorField> {
        assert!(direction < 2);
        let a = self.coefficients(coeff)?;
        let op = self.operator(&a)?;
        self.solve_with(&op, &a, direction)
    }

    /// Both correctors and the effective tensor.
    pub fn effective_tensor_with_correctors(
        &self,
        coeff: PhaseCoefficients,
    ) -> Result<(EffectiveTensor, [CorrectorField; 2])> {
        let a = self.coefficients(coeff)?;
        let op = self.operator(&a)?;
        let w0 = self.solve_with(&op, &a, 0)?;
        let w1 = self.solve_with(&op, &a, 1)?;
        let (hx, hy) = (self.grid.hx, self.grid.hy);
        let area = hx * hy;
        let mut m = [[0.0; 2]; 2];
        for (e, &ae) in a.iter().enumerate() {
            let nodes = self.grid.element_nodes(e);
            for (j, w) in [&w0, &w1].into_iter().enumerate() {
                let v: Vec<f64> = nodes.iter().map(|&n| w.values[self.dof_map[n]]).collect();
                // Element averages of ∂w/∂x and ∂w/∂y for a bilinear function.
                let dx = 0.5 * ((v[1] - v[0]) + (v[2] - v[3])) / hx;
                let dy = 0.5 * ((v[3] - v[0]) + (v[2] - v[1])) / hy;
                m[0][j] += ae * area * (if j == 0 { 1.0 } else { 0.0 } + dx);
                m[1][j] += ae * area * (if j == 1 { 1.0 } else { 0.0 } + dy);
            }
        }
        Ok((EffectiveTensor(m), [w0, w1]))
    }

    pub fn effective_tensor(&self, coeff: PhaseCoefficients) -> Result<EffectiveTensor> {
        Ok(self.effective_tensor_with_correctors(coeff)?.0)
    }
}

/// Replaces row and column 0 by the identity row.
fn pin_first_dof(k: &CsrMatrix) -> CsrMatrix {
    let mut t = Vec::with_capacity(k.nnz());
    t.push((0, 0, 1.0));
    for i in 1..k.dim() {
        for (j, v) in k.row(i) {
            if j != 0 {
                t.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(k.dim(), &t, true)
}

/// Corrector of the cell problem in one direction.
pub fn solve_corrector(
    raster: &CellRaster,
    coeff: PhaseCoefficients,
    direction: usize,
    resolution: usize,
) -> Result<CorrectorField> {
    CellProblem::new(raster, resolution)?.solve_corrector(coeff, direction)
}

/// Effective tensor `∫ a(I + ∇w)`.
pub fn effective_tensor(raster: &CellRaster, coeff: PhaseCoefficients, resolution: usize) -> Result<EffectiveTensor> {
    CellProblem::new(raster, resolution)?.effective_tensor(coeff)
}

/// `χ_c* = ∫ χ_c`.
pub fn cement_fraction(raster: &CellRaster) -> f64 {
    crate::microstructure::volume_fraction(raster)
}

/// `b* = ρ_w [χ* φ_c(r) + (1 − χ*) φ_a] S(p)`.
pub fn effective_b(chi: f64, laws: &MaterialLaws, p: f64, r: f64) -> f64 {
    laws.constants.rho_w
        * (chi * laws.porosity(Phase::Cement, r) + (1.0 - chi) * laws.porosity(Phase::Aggregate, r))
        * laws.saturation(p)
}

/// `σ* = χ* ρ_sc c_sc (1 − φ_c(r)) + (1 − χ*) ρ_sa c_sa (1 − φ_a)`.
pub fn effective_sigma(chi: f64, laws: &MaterialLaws, r: f64) -> f64 {
    chi * laws.eval_sigma(Phase::Cement, r) + (1.0 - chi) * laws.eval_sigma(Phase::Aggregate, r)
}

/// Contrast nodes `10^(j/32)` covering `[lo, hi]` (33 nodes per decade, with
/// contrast 1 always a node).
pub fn log_contrast_grid(lo: f64, hi: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo);
    let j0 = (32.0 * lo.log10() + 1e-9).floor() as i64;
    let j1 = (32.0 * hi.log10() - 1e-9).ceil() as i64;
    (j0..=j1.max(j0)).map(|j| 10f64.powf(j as f64 / 32.0)).collect()
}

/// Normalized effective tensors `K̂*(c)` (aggregate coefficient 1, cement
/// coefficient `c`) on a grid of contrasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTable {
    pub version: u32,
    pub raster_hash: String,
    pub resolution: usize,
    pub contrasts: Vec<f64>,
    pub tensors: Vec<[[f64; 2]; 2]>,
}

/// Builds the table, solving the cell problems for all nodes in parallel.
pub fn build_contrast_table(raster: &CellRaster, contrast_grid: &[f64], resolution: usize) -> Result<ContrastTable> {
    if contrast_grid.is_empty() {
        return Err(Error::config("/contrast_grid", "empty contrast grid"));
    }
    if contrast_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::config("/contrast_grid", "contrasts must be positive"));
    }
    if contrast_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("/contrast_grid", "contrast grid must be strictly increasing"));
    }
    let problem = CellProblem::new(raster, resolution)?;
    let tensors: Vec<[[f64; 2]; 2]> = contrast_grid
        .par_iter()
        .map(|&c| {
            problem
                .effective_tensor(PhaseCoefficients {
                    cement: c,
                    aggregate: 1.0,
                })
                .map(|t| t.0)
        })
        .collect::<Result<_>>()?;
    Ok(ContrastTable {
        version: TABLE_VERSION,
        raster_hash: raster.hash(),
        resolution,
        contrasts: contrast_grid.to_vec(),
        tensors,
    })
}

/// Table covering the whole contrast range `[lo, hi]` with the default node spacing.
pub fn build_contrast_table_for_range(raster: &CellRaster, lo: f64, hi: f64, resolution: usize) -> Result<ContrastTable> {
    build_contrast_table(raster, &log_contrast_grid(lo, hi), resolution)
}

/// Contrast range `[k1/k_a, k2/k_a]` of the mobility permitted by the assumption bounds.
pub fn mobility_contrast_range(laws: &MaterialLaws) -> (f64, f64) {
    let ka = laws.laws.perm_aggregate;
    (laws.bounds.k1 / ka, laws.bounds.k2 / ka)
}

/// Contrast range `[λ1/λ2, λ2/λ1]` of the conductivity.
pub fn conductivity_contrast_range(laws: &MaterialLaws) -> (f64, f64) {
    let (l1, l2) = (laws.bounds.lambda1, laws.bounds.lambda2);
    (l1 / l2, l2 / l1)
}

impl ContrastTable {
    pub fn range(&self) -> (f64, f64) {
        (self.contrasts[0], *self.contrasts.last().unwrap())
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let (a, b) = self.range();
        a <= lo * (1.0 + 1e-12) && b >= hi * (1.0 - 1e-12)
    }

    /// `K̂*(c)` by monotone piecewise-cubic interpolation in `log c`.
    pub fn query(&self, contrast: f64) -> Result<EffectiveTensor> {
        let (lo, hi) = self.range();
        let tol = 1e-12;
        if !(contrast >= lo * (1.0 - tol) && contrast <= hi * (1.0 + tol)) {
            return Err(Error::ContrastRange { contrast, lo, hi });
        }
        let n = self.contrasts.len();
        if n == 1 {
            return Ok(EffectiveTensor(self.tensors[0]));
        }
        let x: Vec<f64> = self.contrasts.iter().map(|c| c.ln()).collect();
        let t = contrast.clamp(lo, hi).ln();
        let k = x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let y: Vec<f64> = self.tensors.iter().map(|m| m[a][b]).collect();
                out[a][b] = pchip_eval(&x, &y, k, t);
            }
        }
        Ok(EffectiveTensor(out))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let t: ContrastTable = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        if t.version != TABLE_VERSION {
            return Err(Error::config("/version", format!("unsupported table version {}", t.version)));
        }
        if t.contrasts.is_empty() || t.contrasts.len() != t.tensors.len() {
            return Err(Error::config("/tensors", "table has inconsistent lengths"));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// CSV with header `contrast,k11,k12,k21,k22`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("contrast,k11,k12,k21,k22\n");
        for (c, m) in self.contrasts.iter().zip(&self.tensors) {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                c, m[0][0], m[0][1], m[1][0], m[1][1]
            ));
        }
        s
    }
}

/// Node slopes of the Fritsch–Carlson/Butland monotone cubic.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn pchip_eval(x: &[f64], y: &[f64], k: usize, t: f64) -> f64 {
    // Slopes only depend on the neighbours, so compute them locally.
    let lo = k.saturating_sub(2);
    let hi = (k + 4).min(x.len());
    let m = pchip_slopes(&x[lo..hi], &y[lo..hi]);
    let (m0, m1) = (m[k - lo], m[k + 1 - lo]);
    let h = x[k + 1] - x[k];
    let s = (t - x[k]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[k] + (s3 - 2.0 * s2 + s) * h * m0 + (-2.0 * s3 + 3.0 * s2) * y[k + 1] + (s3 - s2) * h * m1
}

/// `A* = ρ_w k_R(S(p))/μ(θ) · k_a · K̂*(k_c(r)/k_a)`.
pub fn query_effective_a(table: &ContrastTable, laws: &MaterialLaws, p: f64, theta: f64, r: f64) -> Result<EffectiveTensor> {
    let ka = laws.laws.perm_aggregate;
    let k_hat = table.query(laws.permeability(Phase::Cement, r) / ka)?;
    let scale = laws.constants.rho_w * laws.rel_perm(laws.saturation(p)) / laws.viscosity(theta) * ka;
    Ok(k_hat.scaled(scale))
}

/// `Λ* = λ_a(p, θ) · L̂*(λ_c(p, θ, r)/λ_a(p, θ))`.
pub fn query_effective_lambda(table: &ContrastTable, laws: &MaterialLaws, p: f64, theta: f64, r: f64) -> Result<EffectiveTensor> {
    let la = laws.eval_lambda(Phase::Aggregate, p, theta, r);
    let lc = laws.eval_lambda(Phase::Cement, p, theta, r);
    Ok(table.query(lc / la)?.scaled(la))
}
