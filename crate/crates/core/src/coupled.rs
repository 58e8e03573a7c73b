//! Semi-implicit time stepping for the coupled pressure / temperature /
//! hydration system.
//!
//! Each step solves, in order,
//!
//! 1. the nonlinear pressure problem, with `k_c`, `μ` lagged and `k_R(S(p))`,
//!    `S(p)`, `f(p, θ_prev, r_prev)` and `φ_c(r_prev + h f)` implicit;
//! 2. the memory update `r = r_prev + h f(p, θ_prev, r_prev)`;
//! 3. the temperature problem, linear in `θ`, with `λ` lagged and the convective
//!    flux `a(p, θ_prev, r_prev)∇p` taken from step 1.
//!
//! Time-derivative, source and boundary terms use lumped (nodal) masses, the
//! diffusion of moisture is discretized in the Kirchhoff variable `u = κ(p)`.
//! With bilinear elements on square cells this makes the pressure system an
//! M-matrix problem, so `p_∞ ≤ p ≤ 0` holds node by node.
//!
//! The same stepper runs the resolved (meso) problem and the homogenized one;
//! only the [`CoefficientProvider`] differs.

use crate::cell::{
    conductivity_contrast_range, mobility_contrast_range, ContrastTable, EffectiveTensor,
};
use crate::fem::{
    assemble_convection_gauss, assemble_diffusion_tensor, assemble_lumped_mass, boundary_mass, flux_at_gauss,
    solve_general, solve_spd, CsrMatrix, Side, StructuredGrid, Tensor2,
};
use crate::laws::{KirchhoffMap, MaterialLaws};
use crate::microstructure::{MesoTiling, Phase};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Absolute tolerance (Pa) of the pressure bounds check.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-9;

/// How the coefficients vary in space.
#[derive(Debug, Clone)]
pub enum ProviderMode {
    /// Resolved microstructure: every element is pure cement or pure aggregate.
    Meso(MesoTiling),
    /// Homogenized medium with tabulated effective tensors.
    Macro {
        mobility: ContrastTable,
        conductivity: ContrastTable,
        cement_fraction: f64,
    },
}

/// Evaluates the discrete coefficients of either the meso or the homogenized
/// problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct CoefficientProvider {
    mode: ProviderMode,
    laws: MaterialLaws,
    grid: StructuredGrid,
    kirchhoff: KirchhoffMap,
    /// Cement indicator (or `χ*`) per element.
    element_chi: Vec<f64>,
    element_phase: Vec<Option<Phase>>,
    /// Lumped `∫ χ_c φ_j` and `∫ χ_a φ_j`.
    cement_weight: Vec<f64>,
    aggregate_weight: Vec<f64>,
    /// Lumped `∫_∂Ω φ_j`.
    boundary: Vec<f64>,
}

impl CoefficientProvider {
    /// Resolved problem on the tiling's macro grid.
    pub fn meso(tiling: MesoTiling, laws: MaterialLaws) -> Result<Self> {
        let n = tiling.macro_resolution();
        let grid = StructuredGrid::unit(n, n);
        let element_phase: Vec<Option<Phase>> = (0..grid.n_elements())
            .map(|e| {
                let (ex, ey) = grid.element_ij(e);
                Some(tiling.element_phase(ex, ey))
            })
            .collect();
        let element_chi = element_phase.iter().map(|p| p.unwrap().cement_indicator()).collect();
        Self::build(ProviderMode::Meso(tiling), laws, grid, element_chi, element_phase)
    }

    /// Homogenized problem on an `n × n` grid. Both tables must cover the
    /// contrast ranges allowed by the assumption bounds.
    pub fn homogenized(
        resolution: usize,
        mobility: ContrastTable,
        conductivity: ContrastTable,
        cement_fraction: f64,
        laws: MaterialLaws,
    ) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::config("/grid/n", "grid needs at least one element"));
        }
        if !(0.0..=1.0).contains(&cement_fraction) {
            return Err(Error::config("/cement_fraction", format!("{cement_fraction} outside [0, 1]")));
        }
        let (lo, hi) = mobility_contrast_range(&laws);
        if !mobility.covers(lo, hi) {
            let (a, b) = mobility.range();
            return Err(Error::ContrastRange { contrast: if lo < a { lo } else { hi }, lo: a, hi: b });
        }
        let (lo, hi) = conductivity_contrast_range(&laws);
        if !conductivity.covers(lo, hi) {
            let (a, b) = conductivity.range();
            return Err(Error::ContrastRange { contrast: if lo < a { lo } else { hi }, lo: a, hi: b });
        }
        let grid = StructuredGrid::unit(resolution, resolution);
        let ne = grid.n_elements();
        Self::build(
            ProviderMode::Macro {
                mobility,
                conductivity,
                cement_fraction,
            },
            laws,
            grid,
            vec![cement_fraction; ne],
            vec![None; ne],
        )
    }

    fn build(
        mode: ProviderMode,
        laws: MaterialLaws,
        grid: StructuredGrid,
        element_chi: Vec<f64>,
        element_phase: Vec<Option<Phase>>,
    ) -> Result<Self> {
        let cement_weight = assemble_lumped_mass(&grid, &element_chi)?;
        let chi_a: Vec<f64> = element_chi.iter().map(|c| 1.0 - c).collect();
        let aggregate_weight = assemble_lumped_mass(&grid, &chi_a)?;
        let boundary = boundary_mass(&grid, &Side::ALL);
        let kirchhoff = KirchhoffMap::new(&laws);
        Ok(CoefficientProvider {
            mode,
            laws,
            grid,
            kirchhoff,
            element_chi,
            element_phase,
            cement_weight,
            aggregate_weight,
            boundary,
        })
    }

    pub fn mode(&self) -> &ProviderMode {
        &self.mode
    }

    pub fn laws(&self) -> &MaterialLaws {
        &self.laws
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn kirchhoff(&self) -> &KirchhoffMap {
        &self.kirchhoff
    }

    pub fn element_cement_fraction(&self) -> &[f64] {
        &self.element_chi
    }

    pub fn cement_weight(&self) -> &[f64] {
        &self.cement_weight
    }

    pub fn aggregate_weight(&self) -> &[f64] {
        &self.aggregate_weight
    }

    pub fn boundary_weight(&self) -> &[f64] {
        &self.boundary
    }

    /// Element tensors `D_e` with `a∇p = D_e ∇κ(p)`, evaluated at element means
    /// of the lagged `θ` and `r`.
    pub fn mobility_tensors(&self, theta: &[f64], r: &[f64]) -> Result<Vec<Tensor2>> {
        let tm = self.grid.element_means(theta);
        let rm = self.grid.element_means(r);
        let l = &self.laws;
        (0..self.grid.n_elements())
            .map(|e| match (&self.mode, self.element_phase[e]) {
                (ProviderMode::Meso(_), Some(phase)) => {
                    let c = l.mobility_prefactor(phase, tm[e], rm[e]);
                    Ok([c, 0.0, c])
                }
                (ProviderMode::Macro { mobility, .. }, _) => {
                    let ka = l.laws.perm_aggregate;
                    let k_hat = mobility.query(l.permeability(Phase::Cement, rm[e]) / ka)?;
                    let s = l.constants.rho_w * ka / l.viscosity(tm[e]);
                    Ok(k_hat.scaled(s).symmetric())
                }
                _ => unreachable!("meso element without phase"),
            })
            .collect()
    }

    /// Element conductivity tensors at element means of lagged `p`, `θ`, `r`.
    pub fn conductivity_tensors(&self, p: &[f64], theta: &[f64], r: &[f64]) -> Result<Vec<Tensor2>> {
        let pm = self.grid.element_means(p);
        let tm = self.grid.element_means(theta);
        let rm = self.grid.element_means(r);
        let l = &self.laws;
        (0..self.grid.n_elements())
            .map(|e| match (&self.mode, self.element_phase[e]) {
                (ProviderMode::Meso(_), Some(phase)) => {
                    let c = l.eval_lambda(phase, pm[e], tm[e], rm[e]);
                    Ok([c, 0.0, c])
                }
                (ProviderMode::Macro { conductivity, .. }, _) => {
                    let la = l.eval_lambda(Phase::Aggregate, pm[e], tm[e], rm[e]);
                    let lc = l.eval_lambda(Phase::Cement, pm[e], tm[e], rm[e]);
                    let t: EffectiveTensor = conductivity.query(lc / la)?.scaled(la);
                    Ok(t.symmetric())
                }
                _ => unreachable!("meso element without phase"),
            })
            .collect()
    }

    /// Storage coefficient of node `j`: `ρ_w [w_c φ_c(r) + w_a φ_a]`.
    fn storage_coefficient(&self, j: usize, r: f64) -> f64 {
        let l = &self.laws;
        l.constants.rho_w
            * (self.cement_weight[j] * l.porosity(Phase::Cement, r)
                + self.aggregate_weight[j] * l.porosity(Phase::Aggregate, r))
    }

    /// Nodal moisture content `B_j = ρ_w [w_c φ_c(r_j) + w_a φ_a] S(p_j)`.
    pub fn moisture_content(&self, p: &[f64], r: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|j| self.storage_coefficient(j, r[j]) * self.laws.saturation(p[j]))
            .collect()
    }

    /// Nodal solid heat capacity `Σ_j = w_c ρ_sc c_sc (1 − φ_c(r_j)) + w_a ρ_sa c_sa (1 − φ_a)`.
    pub fn solid_capacity(&self, r: &[f64]) -> Vec<f64> {
        let l = &self.laws;
        (0..r.len())
            .map(|j| {
                self.cement_weight[j] * l.eval_sigma(Phase::Cement, r[j])
                    + self.aggregate_weight[j] * l.eval_sigma(Phase::Aggregate, r[j])
            })
            .collect()
    }
}

/// Nodal initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `base + amplitude · exp(−|x − center|²/width²)`.
    Gaussian {
        base: f64,
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    /// Independent uniform samples in `[lo, hi]` per node.
    Random {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl FieldSpec {
    pub fn sample(&self, grid: &StructuredGrid) -> Vec<f64> {
        match *self {
            FieldSpec::Constant { value } => vec![value; grid.n_nodes()],
            FieldSpec::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => grid.interpolate(|x, y| {
                let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                base + amplitude * (-d2 / (width * width)).exp()
            }),
            FieldSpec::Random { lo, hi, seed } => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                (0..grid.n_nodes()).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect()
            }
        }
    }
}

/// Initial pressure and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub p: FieldSpec,
    pub theta: FieldSpec,
}

impl InitialCondition {
    pub fn sample(&self, grid: &StructuredGrid) -> (Vec<f64>, Vec<f64>) {
        (self.p.sample(grid), self.theta.sample(grid))
    }
}

/// Fields at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub step: usize,
    pub time: f64,
    /// Capillary pressure (Pa).
    pub p: Vec<f64>,
    /// Temperature (K).
    pub theta: Vec<f64>,
    /// Hydration degree.
    pub r: Vec<f64>,
}

impl SimulationState {
    /// Initial state with `r ≡ 0`.
    pub fn initial(p0: Vec<f64>, theta0: Vec<f64>) -> Self {
        let n = p0.len();
        SimulationState {
            step: 0,
            time: 0.0,
            p: p0,
            theta: theta0,
            r: vec![0.0; n],
        }
    }
}

/// Time discretization and solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepConfig {
    /// Final time `T` (s).
    pub final_time: f64,
    pub n_steps: usize,
    /// Relative residual tolerance of the pressure iteration.
    #[serde(default = "default_tol_p")]
    pub tol_p: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    /// Relative tolerance of the linear solves.
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
    /// Step-length reduction factor of the line search.
    #[serde(default = "default_damping")]
    pub damping: f64,
    /// Element Péclet number above which a warning is logged.
    #[serde(default = "default_peclet_warn")]
    pub peclet_warn: f64,
    /// Element Péclet number above which the step is aborted.
    #[serde(default = "default_peclet_max")]
    pub peclet_max: f64,
}

fn default_tol_p() -> f64 {
    1e-9
}
fn default_max_inner() -> usize {
    200
}
fn default_linear_tol() -> f64 {
    1e-12
}
fn default_damping() -> f64 {
    0.7
}
fn default_peclet_warn() -> f64 {
    1.0
}
fn default_peclet_max() -> f64 {
    2.0
}

impl TimeStepConfig {
    pub fn new(final_time: f64, n_steps: usize) -> Self {
        TimeStepConfig {
            final_time,
            n_steps,
            tol_p: default_tol_p(),
            max_inner: default_max_inner(),
            linear_tol: default_linear_tol(),
            damping: default_damping(),
            peclet_warn: default_peclet_warn(),
            peclet_max: default_peclet_max(),
        }
    }

    pub fn h(&self) -> f64 {
        self.final_time / self.n_steps.max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::config("/time/final_time", "final time must be positive"));
        }
        if !(self.tol_p > 0.0) {
            return Err(Error::config("/time/tol_p", "tol_p must be positive"));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol <= 1e-4) {
            return Err(Error::config("/time/linear_tol", "linear_tol must lie in (0, 1e-4]"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::config("/time/damping", "damping must lie in (0, 1)"));
        }
        if self.max_inner == 0 {
            return Err(Error::config("/time/max_inner", "max_inner must be positive"));
        }
        Ok(())
    }
}

/// Diagnostics of the pressure solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub iterations: usize,
    /// `‖F‖/scale` per iteration, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    /// `|Σ_j F_j|` relative to the summed magnitudes of the old and new moisture contents, boundary and source terms.
    pub mass_balance: f64,
}

/// Diagnostics of one full time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub pressure: PressureReport,
    pub heat_iterations: usize,
    pub heat_residual: f64,
    pub peclet: f64,
    pub max_principle_ok: bool,
    pub memory_ok: bool,
    pub p_min: f64,
    pub p_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub wall_time_s: f64,
}

/// All time levels of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: StructuredGrid,
    pub h: f64,
    pub states: Vec<SimulationState>,
    pub reports: Vec<StepReport>,
    /// Lumped cement and aggregate measure of every node.
    pub cement_weight: Vec<f64>,
    pub aggregate_weight: Vec<f64>,
}

impl Trajectory {
    pub fn p_fields(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.p.clone()).collect()
    }

    pub fn theta_fields(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.theta.clone()).collect()
    }

    pub fn r_fields(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.r.clone()).collect()
    }

    pub fn last(&self) -> &SimulationState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pieces of the discrete pressure equation at a given `u`.
struct PressureTerms {
    p: Vec<f64>,
    residual: Vec<f64>,
    storage: Vec<f64>,
    /// `(ρ_w/h)[w_c φ_c(r) + w_a φ_a] S(p)`, the new content before differencing.
    content: Vec<f64>,
    boundary: Vec<f64>,
    source: Vec<f64>,
    /// `∂F_j/∂u_j` minus the stiffness diagonal.
    jac_diag: Vec<f64>,
}

struct PressureSystem<'a> {
    provider: &'a CoefficientProvider,
    prev: &'a SimulationState,
    h: f64,
    stiffness: CsrMatrix,
    /// `(ρ_w/h)[w_c φ_c(r_prev) + w_a φ_a] S(p_prev)`.
    g: Vec<f64>,
    scale: f64,
}

impl<'a> PressureSystem<'a> {
    fn new(provider: &'a CoefficientProvider, prev: &'a SimulationState, h: f64) -> Result<Self> {
        let grid = provider.grid();
        let tensors = provider.mobility_tensors(&prev.theta, &prev.r)?;
        let stiffness = assemble_diffusion_tensor(grid, &tensors)?;
        let g: Vec<f64> = provider
            .moisture_content(&prev.p, &prev.r)
            .into_iter()
            .map(|b| b / h)
            .collect();
        let c = &provider.laws().constants;
        let bflux: Vec<f64> = (0..g.len())
            .map(|j| c.beta_e * provider.boundary[j] * (prev.p[j] - c.p_inf))
            .collect();
        let scale = norm2(&g) + norm2(&bflux);
        Ok(PressureSystem {
            provider,
            prev,
            h,
            stiffness,
            g,
            scale,
        })
    }

    fn terms(&self, u: &[f64]) -> Result<PressureTerms> {
        let pv = self.provider;
        let laws = pv.laws();
        let c = &laws.constants;
        let km = pv.kirchhoff();
        let n = u.len();
        let ku = self.stiffness.mul_vec(u);
        let mut t = PressureTerms {
            p: vec![0.0; n],
            residual: vec![0.0; n],
            storage: vec![0.0; n],
            content: vec![0.0; n],
            boundary: vec![0.0; n],
            source: vec![0.0; n],
            jac_diag: vec![0.0; n],
        };
        let rho_h = c.rho_w / self.h;
        for j in 0..n {
            let p = km.inverse(u[j])?;
            let (theta0, r0) = (self.prev.theta[j], self.prev.r[j]);
            let (f, fp) = laws.hydration_rate_dp(p, theta0, r0);
            let r_new = r0 + self.h * f;
            let (wc, wa) = (pv.cement_weight[j], pv.aggregate_weight[j]);
            let phi_c = laws.porosity(Phase::Cement, r_new);
            let dphi_c = laws.laws.porosity_cement.derivative(r_new);
            let phi_a = laws.porosity(Phase::Aggregate, r_new);
            let s = laws.saturation(p);
            let ds = laws.saturation_derivative(p);
            let coef = rho_h * (wc * phi_c + wa * phi_a);
            let storage = coef * s - self.g[j];
            let boundary = c.beta_e * pv.boundary[j] * (p - c.p_inf);
            let source = c.alpha1 * wc * f;
            // d/dp of storage + boundary − source.
            let dn = coef * ds + rho_h * wc * dphi_c * self.h * fp * s + c.beta_e * pv.boundary[j] - c.alpha1 * wc * fp;
            t.p[j] = p;
            t.storage[j] = storage;
            t.content[j] = coef * s;
            t.boundary[j] = boundary;
            t.source[j] = source;
            t.residual[j] = ku[j] + storage + boundary - source;
            t.jac_diag[j] = dn / km.rel_perm(p);
        }
        Ok(t)
    }

    fn relative(&self, t: &PressureTerms) -> f64 {
        norm2(&t.residual) / self.scale
    }
}

/// Pressure step with the default configuration controls. Returns the new
/// nodal pressure.
pub fn pressure_step(
    prev: &SimulationState,
    provider: &CoefficientProvider,
    cfg: &TimeStepConfig,
) -> Result<(Vec<f64>, PressureReport)> {
    let sys = PressureSystem::new(provider, prev, cfg.h())?;
    let km = provider.kirchhoff();
    let u_hi = km.u_hi();
    let mut u: Vec<f64> = prev.p.iter().map(|&p| km.forward(p)).collect::<Result<_>>()?;
    let mut terms = sys.terms(&u)?;
    let mut res = sys.relative(&terms);
    let mut history = vec![res];
    let step_failure = |message: String, history: &Vec<f64>| Error::StepFailure {
        step: prev.step + 1,
        message,
        residual_history: history.clone(),
    };
    let mut iterations = 0;
    let mut converged = res <= cfg.tol_p;
    let mut polish = 0;
    while iterations < cfg.max_inner {
        if converged {
            // Extra Newton steps while they still pay off by an order of magnitude.
            if polish >= 2 || res == 0.0 {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let mut jac = sys.stiffness.clone();
        jac.add_diagonal(&terms.jac_diag);
        let rhs: Vec<f64> = terms.residual.iter().map(|r| -r).collect();
        let lin_tol = cfg.linear_tol.min(1e-4);
        let delta = match solve_spd(&jac, &rhs, lin_tol, None) {
            Ok(s) => s.x,
            Err(Error::Solver { .. }) => solve_general(&jac, &rhs, lin_tol, None)?.x,
            Err(e) => return Err(e),
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&delta)
                .map(|(a, d)| a + lambda * d)
                .collect();
            if trial.iter().all(|&v| v <= u_hi && v.is_finite()) {
                let tt = sys.terms(&trial)?;
                let tr = sys.relative(&tt);
                if tr < (1.0 - 1e-4 * lambda) * res || (converged && tr < res) {
                    accepted = Some((trial, tt, tr));
                    break;
                }
            }
            lambda *= cfg.damping;
        }
        match accepted {
            Some((trial, tt, tr)) => {
                let gain = res / tr.max(f64::MIN_POSITIVE);
                u = trial;
                terms = tt;
                res = tr;
                history.push(res);
                if converged && gain < 10.0 {
                    break;
                }
                if res <= cfg.tol_p {
                    converged = true;
                }
            }
            None => {
                if converged {
                    break;
                }
                return Err(step_failure(
                    format!("line search failed at relative residual {res:.3e}"),
                    &history,
                ));
            }
        }
    }
    if !converged {
        return Err(step_failure(
            format!("no convergence after {} iterations (relative residual {res:.3e})", cfg.max_inner),
            &history,
        ));
    }
    let total: f64 = terms.residual.iter().sum();
    // Relative to the gross moisture terms: the net storage change is a
    // difference of two nearly equal contents and vanishes near equilibrium.
    let magnitude: f64 = terms
        .content
        .iter()
        .chain(&sys.g)
        .chain(&terms.boundary)
        .chain(&terms.source)
        .map(|v| v.abs())
        .sum();
    let mass_balance = if magnitude > 0.0 { total.abs() / magnitude } else { total.abs() };
    Ok((
        terms.p,
        PressureReport {
            iterations,
            residual_history: history,
            final_residual: res,
            converged,
            mass_balance,
        },
    ))
}

/// `r = r_prev + h f(p, θ_prev, r_prev)` node by node.
pub fn memory_step(p_new: &[f64], prev: &SimulationState, h: f64, laws: &MaterialLaws) -> Vec<f64> {
    (0..p_new.len())
        .map(|j| prev.r[j] + h * laws.hydration_rate(p_new[j], prev.theta[j], prev.r[j]))
        .collect()
}

/// Diagnostics of the temperature solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub peclet: f64,
}

/// Temperature step, linear in the new temperature. Solved for the increment
/// `θ − θ_prev` so that exact equilibria are reproduced to round-off.
pub fn temperature_step(
    p_new: &[f64],
    r_new: &[f64],
    prev: &SimulationState,
    provider: &CoefficientProvider,
    cfg: &TimeStepConfig,
) -> Result<(Vec<f64>, HeatReport)> {
    let grid = provider.grid();
    let laws = provider.laws();
    let c = &laws.constants;
    let h = cfg.h();
    let n = grid.n_nodes();
    let km = provider.kirchhoff();

    let lambda = provider.conductivity_tensors(&prev.p, &prev.theta, &prev.r)?;
    let mut op = assemble_diffusion_tensor(grid, &lambda)?;

    // Convective flux a(p, θ_prev, r_prev)∇p = D ∇κ(p).
    let d = provider.mobility_tensors(&prev.theta, &prev.r)?;
    let u: Vec<f64> = p_new.iter().map(|&p| km.forward(p)).collect::<Result<_>>()?;
    let q = flux_at_gauss(grid, &d, &u)?;
    let mut peclet: f64 = 0.0;
    for qe in &q {
        for g in qe {
            let speed = (g[0] * g[0] + g[1] * g[1]).sqrt();
            peclet = peclet.max(c.c_w * speed * grid.hx.max(grid.hy) / laws.bounds.lambda1);
        }
    }
    if peclet > cfg.peclet_max {
        return Err(Error::StepFailure {
            step: prev.step + 1,
            message: format!("element Peclet number {peclet:.3} exceeds {}", cfg.peclet_max),
            residual_history: Vec::new(),
        });
    }
    if peclet > cfg.peclet_warn {
        log::warn!("step {}: element Peclet number {peclet:.3}", prev.step + 1);
    }
    let conv = assemble_convection_gauss(grid, &q)?;
    op = op.add_scaled(c.c_w, &conv);

    let e_new: Vec<f64> = provider
        .moisture_content(p_new, r_new)
        .iter()
        .zip(provider.solid_capacity(r_new))
        .map(|(b, s)| c.c_w * b + s)
        .collect();
    let e_old: Vec<f64> = provider
        .moisture_content(&prev.p, &prev.r)
        .iter()
        .zip(provider.solid_capacity(&prev.r))
        .map(|(b, s)| c.c_w * b + s)
        .collect();
    let mut diag = vec![0.0; n];
    let mut load = vec![0.0; n];
    for j in 0..n {
        let m = provider.boundary[j];
        diag[j] = e_new[j] / h + c.alpha_e * m + c.c_w * c.beta_e * m * (p_new[j] - c.p_inf);
        let f = laws.hydration_rate(p_new[j], prev.theta[j], prev.r[j]);
        load[j] = c.alpha2 * provider.cement_weight[j] * f + e_old[j] * prev.theta[j] / h + c.alpha_e * m * c.theta_inf;
    }
    op.add_diagonal(&diag);
    let a_theta = op.mul_vec(&prev.theta);
    let rhs: Vec<f64> = load.iter().zip(&a_theta).map(|(l, a)| l - a).collect();
    let sol = solve_general(&op, &rhs, cfg.linear_tol, None)?;
    let theta = prev.theta.iter().zip(&sol.x).map(|(t, d)| t + d).collect();
    Ok((
        theta,
        HeatReport {
            iterations: sol.iterations,
            relative_residual: sol.relative_residual,
            peclet,
        },
    ))
}

/// One full step: pressure, memory, temperature.
pub fn step(prev: &SimulationState, provider: &CoefficientProvider, cfg: &TimeStepConfig) -> Result<(SimulationState, StepReport)> {
    let start = Instant::now();
    let h = cfg.h();
    let laws = provider.laws();
    let (p, pressure) = pressure_step(prev, provider, cfg)?;
    let r = memory_step(&p, prev, h, laws);
    let (theta, heat) = temperature_step(&p, &r, prev, provider, cfg)?;
    let time = prev.time + h;
    let (p_min, p_max) = min_max(&p);
    let (theta_min, theta_max) = min_max(&theta);
    let (r_min, r_max) = min_max(&r);
    let p_inf = laws.constants.p_inf;
    let max_principle_ok = p_min >= p_inf - MAX_PRINCIPLE_TOL && p_max <= MAX_PRINCIPLE_TOL;
    let r_cap = laws.bounds.c_f * time;
    let memory_ok = r.iter().zip(&prev.r).all(|(a, b)| a >= b) && r_min >= 0.0 && r_max <= r_cap * (1.0 + 1e-12);
    let state = SimulationState {
        step: prev.step + 1,
        time,
        p,
        theta,
        r,
    };
    let report = StepReport {
        step: state.step,
        time,
        pressure,
        heat_iterations: heat.iterations,
        heat_residual: heat.relative_residual,
        peclet: heat.peclet,
        max_principle_ok,
        memory_ok,
        p_min,
        p_max,
        theta_min,
        theta_max,
        r_min,
        r_max,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((state, report))
}

/// Checks the initial data: `p_∞ < p₀ ≤ 0` and finite `θ₀`.
pub fn check_initial_data(provider: &CoefficientProvider, p0: &[f64], theta0: &[f64]) -> Result<()> {
    let n = provider.grid().n_nodes();
    for v in [p0.len(), theta0.len()] {
        if v != n {
            return Err(Error::DimensionMismatch { expected: n, actual: v });
        }
    }
    let p_inf = provider.laws().constants.p_inf;
    if let Some(p) = p0.iter().find(|&&p| !(p > p_inf && p <= 0.0)) {
        return Err(Error::config(
            "/initial/p0",
            format!("initial pressure {p} violates p_inf < p0 <= 0 (p_inf = {p_inf})"),
        ));
    }
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::config("/initial/theta0", "initial temperature must be finite"));
    }
    Ok(())
}

/// Runs the scheme and returns whatever was computed; a failing step ends the
/// run and its error is returned alongside the partial trajectory.
pub fn run_simulation_partial(
    p0: Vec<f64>,
    theta0: Vec<f64>,
    provider: &CoefficientProvider,
    cfg: &TimeStepConfig,
) -> (Trajectory, Option<Error>) {
    let mut traj = Trajectory {
        grid: provider.grid().clone(),
        h: cfg.h(),
        states: Vec::new(),
        reports: Vec::new(),
        cement_weight: provider.cement_weight.clone(),
        aggregate_weight: provider.aggregate_weight.clone(),
    };
    if let Err(e) = cfg.validate().and_then(|_| check_initial_data(provider, &p0, &theta0)) {
        return (traj, Some(e));
    }
    traj.states.push(SimulationState::initial(p0, theta0));
    for _ in 0..cfg.n_steps {
        match step(traj.last(), provider, cfg) {
            Ok((s, r)) => {
                log::debug!(
                    "step {} t={:.3e} newton={} res={:.2e} mass={:.2e}",
                    r.step,
                    r.time,
                    r.pressure.iterations,
                    r.pressure.final_residual,
                    r.pressure.mass_balance
                );
                traj.states.push(s);
                traj.reports.push(r);
            }
            Err(e) => return (traj, Some(e)),
        }
    }
    (traj, None)
}

/// Runs `cfg.n_steps` steps from `(p₀, θ₀)` with `r₀ ≡ 0`.
pub fn run_simulation(
    p0: Vec<f64>,
    theta0: Vec<f64>,
    provider: &CoefficientProvider,
    cfg: &TimeStepConfig,
) -> Result<Trajectory> {
    match run_simulation_partial(p0, theta0, provider, cfg) {
        (t, None) => Ok(t),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests;
