//! Numerical experiments around the homogenization limit: ε-sweeps, a priori
//! bound monitors, time translations, oscillating averages and time-step
//! self-convergence.

use crate::cell::{
    build_contrast_table_for_range, cement_fraction, conductivity_contrast_range, mobility_contrast_range,
};
use crate::coupled::{
    run_simulation, CoefficientProvider, InitialCondition, Trajectory, TimeStepConfig, MAX_PRINCIPLE_TOL,
};
use crate::fem::{
    boundary_distance_spacetime, h1_seminorm_sq, l2_distance, l2_distance_spacetime, l2_norm_sq, StructuredGrid,
};
use crate::laws::{HydrationLaw, MaterialLaws, ThetaPotentialTable};
use crate::microstructure::{rasterize_seeded, CellRaster, MesoTiling, Phase, UnitCellGeometry};
use crate::quadrature::GAUSS4_UNIT;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Factor by which monitored constants may vary across an ε-sweep before the
/// run is flagged. A heuristic stand-in for "independent of ε".
pub const UNIFORMITY_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSweepConfig {
    /// Scale parameters; each must be the reciprocal of an integer.
    pub epsilons: Vec<f64>,
    /// Meso grid resolution for each ε.
    pub resolutions: Vec<usize>,
    /// Resolution of the homogenized run, which is also the comparison grid.
    pub macro_resolution: usize,
    pub geometry: UnitCellGeometry,
    /// Raster resolution `m` of the unit cell.
    pub raster_resolution: usize,
    /// Grid resolution of the cell problems behind the contrast tables.
    pub cell_resolution: usize,
    pub time: TimeStepConfig,
    pub initial: InitialCondition,
    #[serde(default)]
    pub laws: MaterialLaws,
    /// Seed of a random raster geometry.
    #[serde(default)]
    pub seed: u64,
}

impl EpsilonSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::config("/epsilons", "at least one epsilon is needed"));
        }
        if self.epsilons.len() != self.resolutions.len() {
            return Err(Error::config(
                "/resolutions",
                format!("{} resolutions for {} epsilons", self.resolutions.len(), self.epsilons.len()),
            ));
        }
        if self.macro_resolution == 0 {
            return Err(Error::config("/macro_resolution", "must be positive"));
        }
        for (k, &n) in self.resolutions.iter().enumerate() {
            if n % self.macro_resolution != 0 {
                return Err(Error::config(
                    format!("/resolutions/{k}"),
                    format!("{n} is not a multiple of the comparison grid {}", self.macro_resolution),
                ));
            }
        }
        self.time.validate()
    }
}

/// Distances between meso and homogenized trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonError {
    pub epsilon: f64,
    pub error_p: f64,
    pub error_theta: f64,
    pub error_r: f64,
    pub boundary_error_p: f64,
    pub boundary_error_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub entries: Vec<EpsilonError>,
    /// Whether the p and θ distances decrease strictly along the list.
    pub monotone: bool,
    /// Last over first distance, for p and θ.
    pub final_ratio_p: f64,
    pub final_ratio_theta: f64,
    /// Largest max/min ratio of the monitored constants across all meso runs.
    pub uniformity_ratio: f64,
    /// Whether every meso run passed its a priori checks.
    pub bounds_ok: bool,
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,error_p,error_theta,error_r\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.epsilon, e.error_p, e.error_theta, e.error_r
            ));
        }
        s
    }
}

/// Restriction of a nodal field on an `n × n` grid to the `c × c` grid whose
/// nodes it contains.
pub fn restrict_to(fine: &StructuredGrid, values: &[f64], coarse: &StructuredGrid) -> Result<Vec<f64>> {
    if !fine.nx.is_multiple_of(coarse.nx) || !fine.ny.is_multiple_of(coarse.ny) {
        return Err(Error::config(
            "/grid/n",
            format!("grid {}x{} does not contain the nodes of {}x{}", fine.nx, fine.ny, coarse.nx, coarse.ny),
        ));
    }
    let (sx, sy) = (fine.nx / coarse.nx, fine.ny / coarse.ny);
    Ok((0..coarse.n_nodes())
        .map(|k| {
            let (i, j) = coarse.node_ij(k);
            values[fine.node(i * sx, j * sy)]
        })
        .collect())
}

fn restrict_all(fine: &StructuredGrid, fields: Vec<Vec<f64>>, coarse: &StructuredGrid) -> Result<Vec<Vec<f64>>> {
    fields.iter().map(|f| restrict_to(fine, f, coarse)).collect()
}

/// Homogenized provider for a raster, with tables covering the admissible
/// contrast ranges.
pub fn homogenized_provider(
    raster: &CellRaster,
    cell_resolution: usize,
    resolution: usize,
    laws: &MaterialLaws,
) -> Result<CoefficientProvider> {
    let (lo, hi) = mobility_contrast_range(laws);
    let mobility = build_contrast_table_for_range(raster, lo, hi, cell_resolution)?;
    let (lo, hi) = conductivity_contrast_range(laws);
    let conductivity = build_contrast_table_for_range(raster, lo, hi, cell_resolution)?;
    CoefficientProvider::homogenized(resolution, mobility, conductivity, cement_fraction(raster), laws.clone())
}

/// Solves the homogenized problem once and the meso problem for every ε, and
/// compares them on the homogenized grid.
pub fn run_epsilon_sweep(cfg: &EpsilonSweepConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let raster = rasterize_seeded(&cfg.geometry, cfg.raster_resolution, cfg.seed)?;
    let tilings: Vec<MesoTiling> = cfg
        .epsilons
        .iter()
        .zip(&cfg.resolutions)
        .map(|(&eps, &n)| MesoTiling::new(eps, raster.clone(), n))
        .collect::<Result<_>>()?;
    let mac = homogenized_provider(&raster, cfg.cell_resolution, cfg.macro_resolution, &cfg.laws)?;
    let coarse = mac.grid().clone();
    let (p0, t0) = cfg.initial.sample(&coarse);
    let reference = run_simulation(p0, t0, &mac, &cfg.time)?;

    let runs: Vec<Trajectory> = tilings
        .into_par_iter()
        .map(|tiling| {
            let provider = CoefficientProvider::meso(tiling, cfg.laws.clone())?;
            let (p0, t0) = cfg.initial.sample(provider.grid());
            run_simulation(p0, t0, &provider, &cfg.time)
        })
        .collect::<Result<_>>()?;

    let h = cfg.time.h();
    let mut entries = Vec::new();
    let mut monitors = Vec::new();
    for (traj, &eps) in runs.iter().zip(&cfg.epsilons) {
        let p = restrict_all(&traj.grid, traj.p_fields(), &coarse)?;
        let th = restrict_all(&traj.grid, traj.theta_fields(), &coarse)?;
        let r = restrict_all(&traj.grid, traj.r_fields(), &coarse)?;
        entries.push(EpsilonError {
            epsilon: eps,
            error_p: l2_distance_spacetime(&coarse, h, &p, &reference.p_fields())?,
            error_theta: l2_distance_spacetime(&coarse, h, &th, &reference.theta_fields())?,
            error_r: l2_distance_spacetime(&coarse, h, &r, &reference.r_fields())?,
            boundary_error_p: boundary_distance_spacetime(&coarse, h, &p, &reference.p_fields())?,
            boundary_error_theta: boundary_distance_spacetime(&coarse, h, &th, &reference.theta_fields())?,
        });
        monitors.push(check_apriori_bounds(traj, &cfg.laws));
    }
    let monotone = entries
        .windows(2)
        .all(|w| w[1].error_p < w[0].error_p && w[1].error_theta < w[0].error_theta);
    let first = &entries[0];
    let last = entries.last().unwrap();
    let ratio = |a: f64, b: f64| if a > 0.0 { b / a } else if b == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ErrorReport {
        final_ratio_p: ratio(first.error_p, last.error_p),
        final_ratio_theta: ratio(first.error_theta, last.error_theta),
        monotone,
        uniformity_ratio: uniformity_ratio(&monitors),
        bounds_ok: monitors.iter().all(|m| m.passed()),
        entries,
    })
}

/// One a priori bound evaluated over a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest `bound − value` over all steps and nodes (negative when violated).
    pub worst_margin: f64,
}

/// Per-step quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub step: usize,
    pub time: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub theta_abs_max: f64,
    pub r_max: f64,
    /// `∫ Θ(p(t)) dx`.
    pub energy: f64,
    /// `Σ h ‖p‖²_{W^{1,2}}` up to this step.
    pub cumulative_h1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriMonitor {
    pub rows: Vec<MonitorRow>,
    pub checks: Vec<BoundCheck>,
}

impl AprioriMonitor {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Quantities whose bounds should not depend on ε.
    pub fn constants(&self) -> [f64; 3] {
        let fold = |f: fn(&MonitorRow) -> f64| self.rows.iter().map(f).fold(0.0, f64::max);
        [
            fold(|r| r.energy),
            fold(|r| r.theta_abs_max),
            self.rows.last().map_or(0.0, |r| r.cumulative_h1),
        ]
    }
}

/// Largest max/min ratio, over the monitored constants, across several runs.
pub fn uniformity_ratio(monitors: &[AprioriMonitor]) -> f64 {
    let mut worst: f64 = 1.0;
    for k in 0..3 {
        let vals: Vec<f64> = monitors.iter().map(|m| m.constants()[k]).collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            worst = worst.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
        }
    }
    worst
}

struct Margin {
    name: &'static str,
    worst: f64,
}

impl Margin {
    fn new(name: &'static str) -> Self {
        Margin { name, worst: f64::INFINITY }
    }

    fn update(&mut self, bound_minus_value: f64) {
        self.worst = self.worst.min(bound_minus_value);
    }

    fn finish(self, tol: f64) -> BoundCheck {
        BoundCheck {
            name: self.name.to_string(),
            passed: self.worst >= -tol,
            worst_margin: self.worst,
        }
    }
}

/// Evaluates the a priori bounds along a trajectory. Never fails; problems are
/// reported through the checks.
///
/// * pressure: `p_∞ ≤ p ≤ 0`;
/// * memory: `r` nondecreasing with `0 ≤ r ≤ C_f t`;
/// * temperature: without hydration, between the extremes of `θ₀` and `θ_∞`;
///   otherwise inside the Gronwall envelope driven by `C_f`;
/// * energy: `ρ_w ∫ φ Θ(p(t))` below its initial value plus the work of the
///   hydration sink and of the boundary exchange.
pub fn check_apriori_bounds(traj: &Trajectory, laws: &MaterialLaws) -> AprioriMonitor {
    let c = &laws.constants;
    let b = &laws.bounds;
    let grid = &traj.grid;
    let theta_table = ThetaPotentialTable::new(laws);
    let mut rows = Vec::new();
    if traj.states.is_empty() {
        return AprioriMonitor { rows, checks: Vec::new() };
    }
    let lumped = {
        let mut m = vec![0.0; grid.n_nodes()];
        for e in 0..grid.n_elements() {
            for n in grid.element_nodes(e) {
                m[n] += grid.element_area() / 4.0;
            }
        }
        m
    };
    let perimeter = 2.0 * (grid.lx + grid.ly);
    let area = grid.lx * grid.ly;

    let first = &traj.states[0];
    let theta_lo0 = first.theta.iter().cloned().fold(c.theta_inf, f64::min);
    let theta_hi0 = first.theta.iter().cloned().fold(c.theta_inf, f64::max);
    let no_source = matches!(laws.laws.hydration, HydrationLaw::Zero);
    let e_min = [Phase::Cement, Phase::Aggregate]
        .iter()
        .map(|&ph| laws.solid_heat_capacity(ph) * (1.0 - b.phi2.max(laws.laws.porosity_aggregate)))
        .fold(f64::INFINITY, f64::min);
    let shift = c.alpha2 / (c.c_w * c.alpha1.abs());
    let c5 = c.c_w * c.alpha1.abs() * b.c_f / e_min;
    let c6 = laws.solid_heat_capacity(Phase::Cement) * b.c_phi * b.c_f / e_min;

    let weighted_energy = |s: &crate::coupled::SimulationState| -> f64 {
        (0..s.p.len())
            .map(|j| {
                let phi = traj.cement_weight[j] * laws.porosity(Phase::Cement, s.r[j])
                    + traj.aggregate_weight[j] * laws.porosity(Phase::Aggregate, s.r[j]);
                c.rho_w * phi * theta_table.eval(s.p[j])
            })
            .sum()
    };
    let energy0 = weighted_energy(first);
    let budget_rate = c.alpha1.abs() * b.c_f * c.p_inf.abs() * area + c.beta_e * c.p_inf * c.p_inf / 4.0 * perimeter;

    let mut m_p = Margin::new("p_inf <= p <= 0");
    let mut m_r = Margin::new("0 <= r <= C_f t");
    let mut m_mono = Margin::new("r nondecreasing");
    let mut m_theta = Margin::new("theta envelope");
    let mut m_energy = Margin::new("energy budget");
    let mut cumulative = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        let mut p_min = f64::INFINITY;
        let mut p_max = f64::NEG_INFINITY;
        for &p in &s.p {
            p_min = p_min.min(p);
            p_max = p_max.max(p);
        }
        m_p.update((p_min - c.p_inf).min(-p_max));
        let r_max = s.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r_min = s.r.iter().cloned().fold(f64::INFINITY, f64::min);
        m_r.update(r_min.min(b.c_f * s.time - r_max));
        if i > 0 {
            let prev = &traj.states[i - 1];
            let worst = s.r.iter().zip(&prev.r).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
            m_mono.update(worst);
        }
        let (lo, hi) = if no_source {
            (theta_lo0, theta_hi0)
        } else {
            (
                theta_lo0 * (-c6 * s.time).exp(),
                (theta_hi0 + shift) * (c5 * s.time).exp() - shift,
            )
        };
        let mut theta_abs_max: f64 = 0.0;
        for &t in &s.theta {
            m_theta.update((t - lo).min(hi - t));
            theta_abs_max = theta_abs_max.max(t.abs());
        }
        let energy: f64 = s.p.iter().zip(&lumped).map(|(&p, m)| m * theta_table.eval(p)).sum();
        m_energy.update(energy0 + budget_rate * s.time - weighted_energy(s));
        if i > 0 {
            cumulative += traj.h * (l2_norm_sq(grid, &s.p).unwrap_or(f64::NAN) + h1_seminorm_sq(grid, &s.p).unwrap_or(f64::NAN));
        }
        rows.push(MonitorRow {
            step: s.step,
            time: s.time,
            p_min,
            p_max,
            theta_abs_max,
            r_max,
            energy,
            cumulative_h1: cumulative,
        });
    }
    let theta_tol = 1e-9 * c.theta_inf;
    let energy_tol = 1e-9 * (energy0.abs() + budget_rate * traj.last().time).max(1e-300);
    let checks = vec![
        m_p.finish(MAX_PRINCIPLE_TOL),
        m_r.finish(1e-15 * (1.0 + b.c_f * traj.last().time)),
        m_mono.finish(0.0),
        m_theta.finish(theta_tol),
        m_energy.finish(energy_tol),
    ];
    AprioriMonitor { rows, checks }
}

/// Discrete translation functionals for a shift `τ = k h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRow {
    pub tau: f64,
    /// `Σ h ∫ (S(p(t+τ)) − S(p(t)))(p(t+τ) − p(t))`, nodal quadrature.
    pub e_p: f64,
    /// `Σ h ‖θ(t+τ) − θ(t)‖²`.
    pub e_theta: f64,
    /// `Σ h ‖r(t+τ) − r(t)‖²`.
    pub e_r: f64,
}

impl TranslationRow {
    pub fn normalized(&self) -> [f64; 3] {
        [self.e_p / self.tau, self.e_theta / self.tau, self.e_r / self.tau]
    }
}

pub fn translations_to_csv(rows: &[TranslationRow]) -> String {
    let mut s = String::from("tau,E_p,E_theta,E_r\n");
    for r in rows {
        s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", r.tau, r.e_p, r.e_theta, r.e_r));
    }
    s
}

/// Time translations of a trajectory. The trajectory is read as piecewise
/// constant in time, `u(t) = uⁱ` on `(t_{i−1}, t_i]`, so the integral over
/// `(0, T − τ)` is the sum over `i = 1..N−k`.
pub fn translation_estimate(traj: &Trajectory, laws: &MaterialLaws, taus: &[f64]) -> Result<Vec<TranslationRow>> {
    let h = traj.h;
    let grid = &traj.grid;
    let n_steps = traj.states.len().saturating_sub(1);
    let lumped: Vec<f64> = {
        let mut m = vec![0.0; grid.n_nodes()];
        for e in 0..grid.n_elements() {
            for n in grid.element_nodes(e) {
                m[n] += grid.element_area() / 4.0;
            }
        }
        m
    };
    let sat: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| s.p.iter().map(|&p| laws.saturation(p)).collect())
        .collect();
    taus.iter()
        .map(|&tau| {
            let k = (tau / h).round();
            if !(k >= 1.0) || (tau - k * h).abs() > 1e-9 * tau || k as usize > n_steps {
                return Err(Error::config(
                    "/taus",
                    format!("tau = {tau} is not a positive multiple k*h with h = {h} and k <= {n_steps}"),
                ));
            }
            let k = k as usize;
            let mut row = TranslationRow {
                tau,
                e_p: 0.0,
                e_theta: 0.0,
                e_r: 0.0,
            };
            for i in 1..=(n_steps - k) {
                let (a, b) = (&traj.states[i], &traj.states[i + k]);
                row.e_p += h * (0..a.p.len())
                    .map(|j| lumped[j] * (sat[i + k][j] - sat[i][j]) * (b.p[j] - a.p[j]))
                    .sum::<f64>();
                row.e_theta += h * l2_distance(grid, &b.theta, &a.theta)?.powi(2);
                row.e_r += h * l2_distance(grid, &b.r, &a.r)?.powi(2);
            }
            Ok(row)
        })
        .collect()
}

/// `|∫ χ_c(x/ε) g(x) dx − χ* ∫ g dx|` for one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub epsilon: f64,
    pub error: f64,
    /// Ratio to the previous row's error.
    pub ratio: Option<f64>,
}

/// Weak-limit test for the periodic indicator on `(0,1)²`. Each raster
/// sub-cell is integrated with a 4×4 Gauss rule. The deviation is evaluated as
/// `m⁻² Σ_ab χ_ab Σ_cd (G_ab − G_cd)`, with `G_ab` the integral of `g` over all
/// sub-cells at raster position `ab`; this vanishes exactly when `g` is
/// constant.
pub fn oscillating_average_test<G: Fn(f64, f64) -> f64 + Sync>(
    raster: &CellRaster,
    epsilons: &[f64],
    probe: G,
) -> Result<Vec<OscillationRow>> {
    let m = raster.resolution();
    let mut rows: Vec<OscillationRow> = Vec::new();
    for &eps in epsilons {
        let tiling = MesoTiling::new(eps, raster.clone(), m * (1.0 / eps).round() as usize)?;
        let cells = tiling.cells_per_side();
        let sub = 1.0 / (cells * m) as f64;
        let g_pos: Vec<f64> = (0..m * m)
            .into_par_iter()
            .map(|ab| {
                let (a, bb) = (ab % m, ab / m);
                let mut total = 0.0;
                for cy in 0..cells {
                    for cx in 0..cells {
                        let x0 = (cx * m + a) as f64 * sub;
                        let y0 = (cy * m + bb) as f64 * sub;
                        let mut s = 0.0;
                        let (pts, wts) = GAUSS4_UNIT;
                        for (&xq, &wx) in pts.iter().zip(&wts) {
                            for (&yq, &wy) in pts.iter().zip(&wts) {
                                s += wx * wy * probe(x0 + xq * sub, y0 + yq * sub);
                            }
                        }
                        total += s * sub * sub;
                    }
                }
                total
            })
            .collect();
        let mut dev = 0.0;
        for ab in 0..m * m {
            if raster.values()[ab] == 0 {
                continue;
            }
            let mut inner = 0.0;
            for cd in 0..m * m {
                inner += g_pos[ab] - g_pos[cd];
            }
            dev += inner;
        }
        let error = (dev / (m * m) as f64).abs();
        let ratio = rows.last().map(|r| error / r.error);
        rows.push(OscillationRow { epsilon: eps, error, ratio });
    }
    Ok(rows)
}

/// Observed orders of the scheme in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub steps: Vec<usize>,
    /// `‖u_h − u_{h/2}‖` at the final time for consecutive pairs, per field `[p, θ, r]`.
    pub differences: Vec<[f64; 3]>,
    /// `log₂` of consecutive difference ratios, per field.
    pub orders: Vec<[f64; 3]>,
}

/// Runs the same problem with `n, 2n, 4n, …` steps and estimates the order
/// from successive differences, `log₂(‖u_h − u_{h/2}‖ / ‖u_{h/2} − u_{h/4}‖)`.
pub fn timestep_self_convergence(
    provider: &CoefficientProvider,
    initial: &InitialCondition,
    cfg: &TimeStepConfig,
    step_counts: &[usize],
) -> Result<OrderEstimate> {
    if step_counts.len() < 3 {
        return Err(Error::config("/steps", "at least three step sizes are needed"));
    }
    for w in step_counts.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::config("/steps", "step counts must double"));
        }
    }
    let grid = provider.grid();
    let (p0, t0) = initial.sample(grid);
    let finals: Vec<[Vec<f64>; 3]> = step_counts
        .par_iter()
        .map(|&n| {
            let c = TimeStepConfig { n_steps: n, ..cfg.clone() };
            let t = run_simulation(p0.clone(), t0.clone(), provider, &c)?;
            let s = t.last();
            Ok([s.p.clone(), s.theta.clone(), s.r.clone()])
        })
        .collect::<Result<_>>()?;
    let mut differences = Vec::new();
    for w in finals.windows(2) {
        let mut d = [0.0; 3];
        for k in 0..3 {
            d[k] = l2_distance(grid, &w[0][k], &w[1][k])?;
        }
        differences.push(d);
    }
    let orders = differences
        .windows(2)
        .map(|w| {
            let mut o = [0.0; 3];
            for k in 0..3 {
                o[k] = (w[0][k] / w[1][k]).log2();
            }
            o
        })
        .collect();
    Ok(OrderEstimate {
        steps: step_counts.to_vec(),
        differences,
        orders,
    })
}
