use super::*;
use crate::cell::build_contrast_table_for_range;
use crate::laws::HydrationLaw;
use crate::microstructure::{rasterize, CellRaster, UnitCellGeometry};
use crate::quadrature::adaptive_simpson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk_provider(n: usize, laws: MaterialLaws) -> CoefficientProvider {
    let raster = rasterize(&UnitCellGeometry::DiskInclusion { radius: 0.3 }, 4).unwrap();
    let tiling = MesoTiling::new(0.5, raster, n).unwrap();
    CoefficientProvider::meso(tiling, laws).unwrap()
}

fn random_initial(grid: &StructuredGrid, laws: &MaterialLaws, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_inf = laws.constants.p_inf;
    let p = (0..grid.n_nodes()).map(|_| p_inf * rng.gen_range(0.05..0.9)).collect();
    let t = (0..grid.n_nodes())
        .map(|_| laws.constants.theta_inf + rng.gen_range(-5.0..5.0))
        .collect();
    (p, t)
}

/// Kirchhoff transform by direct quadrature, independent of the table.
fn kappa(laws: &MaterialLaws, p: f64) -> f64 {
    let g = |x: f64| laws.truncated_rel_perm(x);
    let p_inf = laws.constants.p_inf;
    if p >= p_inf {
        -adaptive_simpson(&g, p, 0.0, 1e-6, 50)
    } else {
        -adaptive_simpson(&g, p_inf, 0.0, 1e-6, 50) + laws.k0() * (p - p_inf)
    }
}

/// Bilinear shape functions and gradients on an `hx × hy` element, local
/// coordinates `(s, t) ∈ [0,1]²`, nodes counter-clockwise from the origin.
fn shape(s: f64, t: f64, hx: f64, hy: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let phi = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
    let grad = [
        [-(1.0 - t) / hx, -(1.0 - s) / hy],
        [(1.0 - t) / hx, -s / hy],
        [t / hx, s / hy],
        [-t / hx, (1.0 - s) / hy],
    ];
    (phi, grad)
}

fn gauss_points() -> [(f64, f64); 4] {
    let a = 0.5 - 0.5 / 3f64.sqrt();
    let b = 0.5 + 0.5 / 3f64.sqrt();
    [(a, a), (b, a), (b, b), (a, b)]
}

/// Dense re-assembly of `Σ_e ∫ D_e ∇w·∇φ_j` and the Gauss-point fluxes.
fn dense_diffusion(grid: &StructuredGrid, tensors: &[Tensor2], w: &[f64]) -> (Vec<f64>, Vec<[[f64; 2]; 4]>) {
    let mut out = vec![0.0; grid.n_nodes()];
    let mut fluxes = Vec::new();
    let wq = grid.hx * grid.hy / 4.0;
    for e in 0..grid.n_elements() {
        let nodes = grid.element_nodes(e);
        let d = tensors[e];
        let mut fe = [[0.0; 2]; 4];
        for (k, (s, t)) in gauss_points().into_iter().enumerate() {
            let (_, grad) = shape(s, t, grid.hx, grid.hy);
            let mut gw = [0.0; 2];
            for a in 0..4 {
                gw[0] += w[nodes[a]] * grad[a][0];
                gw[1] += w[nodes[a]] * grad[a][1];
            }
            let q = [d[0] * gw[0] + d[1] * gw[1], d[1] * gw[0] + d[2] * gw[1]];
            fe[k] = q;
            for a in 0..4 {
                out[nodes[a]] += wq * (q[0] * grad[a][0] + q[1] * grad[a][1]);
            }
        }
        fluxes.push(fe);
    }
    (out, fluxes)
}

/// Nodal `∫ χ φ_j` with the row-sum lumped mass, from element indicators.
fn lumped(grid: &StructuredGrid, chi: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; grid.n_nodes()];
    for e in 0..grid.n_elements() {
        for n in grid.element_nodes(e) {
            m[n] += chi[e] * grid.hx * grid.hy / 4.0;
        }
    }
    m
}

fn boundary_lumped(grid: &StructuredGrid) -> Vec<f64> {
    let mut m = vec![0.0; grid.n_nodes()];
    for i in 0..grid.nx {
        for (a, b) in [(grid.node(i, 0), grid.node(i + 1, 0)), (grid.node(i, grid.ny), grid.node(i + 1, grid.ny))] {
            m[a] += grid.hx / 2.0;
            m[b] += grid.hx / 2.0;
        }
    }
    for j in 0..grid.ny {
        for (a, b) in [(grid.node(0, j), grid.node(0, j + 1)), (grid.node(grid.nx, j), grid.node(grid.nx, j + 1))] {
            m[a] += grid.hy / 2.0;
            m[b] += grid.hy / 2.0;
        }
    }
    m
}

fn element_mean(grid: &StructuredGrid, v: &[f64], e: usize) -> f64 {
    grid.element_nodes(e).iter().map(|&n| v[n]).sum::<f64>() / 4.0
}

fn element_phase_of(provider: &CoefficientProvider, e: usize) -> Phase {
    Phase::from_indicator(provider.element_cement_fraction()[e].round() as u8)
}

/// Residuals of the pressure and temperature equations recomputed from the
/// laws with dense assembly; returned relative to the size of their terms.
fn audit(provider: &CoefficientProvider, prev: &SimulationState, next: &SimulationState, h: f64) -> (f64, f64) {
    let laws = provider.laws();
    let c = &laws.constants;
    let grid = provider.grid();
    let n = grid.n_nodes();
    let ne = grid.n_elements();
    let chi: Vec<f64> = provider.element_cement_fraction().to_vec();
    let wc = lumped(grid, &chi);
    let wa = lumped(grid, &chi.iter().map(|x| 1.0 - x).collect::<Vec<_>>());
    let mb = boundary_lumped(grid);

    let mob: Vec<Tensor2> = (0..ne)
        .map(|e| {
            let ph = element_phase_of(provider, e);
            let k = laws.permeability(ph, element_mean(grid, &prev.r, e));
            let v = c.rho_w * k / laws.viscosity(element_mean(grid, &prev.theta, e));
            [v, 0.0, v]
        })
        .collect();
    let u: Vec<f64> = next.p.iter().map(|&p| kappa(laws, p)).collect();
    let (ku, q) = dense_diffusion(grid, &mob, &u);

    let f: Vec<f64> = (0..n)
        .map(|j| laws.hydration_rate(next.p[j], prev.theta[j], prev.r[j]))
        .collect();
    let b = |j: usize, p: f64, r: f64| {
        c.rho_w * (wc[j] * laws.porosity(Phase::Cement, r) + wa[j] * laws.porosity(Phase::Aggregate, r)) * laws.saturation(p)
    };
    let mut res_p = vec![0.0; n];
    let mut mag_p = vec![0.0; n];
    for j in 0..n {
        assert!((next.r[j] - (prev.r[j] + h * f[j])).abs() <= 1e-15 * (1.0 + next.r[j].abs()));
        let storage = (b(j, next.p[j], next.r[j]) - b(j, prev.p[j], prev.r[j])) / h;
        let bnd = c.beta_e * mb[j] * (next.p[j] - c.p_inf);
        let src = c.alpha1 * wc[j] * f[j];
        res_p[j] = ku[j] + storage + bnd - src;
        mag_p[j] = ku[j].abs() + storage.abs() + bnd.abs() + src.abs();
    }

    let lam: Vec<Tensor2> = (0..ne)
        .map(|e| {
            let ph = element_phase_of(provider, e);
            let v = laws.eval_lambda(
                ph,
                element_mean(grid, &prev.p, e),
                element_mean(grid, &prev.theta, e),
                element_mean(grid, &prev.r, e),
            );
            [v, 0.0, v]
        })
        .collect();
    let (lt, _) = dense_diffusion(grid, &lam, &next.theta);
    // Convection c_w ∫ θ q·∇ψ.
    let mut conv = vec![0.0; n];
    let wq = grid.hx * grid.hy / 4.0;
    for e in 0..ne {
        let nodes = grid.element_nodes(e);
        for (k, (s, t)) in gauss_points().into_iter().enumerate() {
            let (phi, grad) = shape(s, t, grid.hx, grid.hy);
            let th: f64 = (0..4).map(|a| phi[a] * next.theta[nodes[a]]).sum();
            for a in 0..4 {
                conv[nodes[a]] += c.c_w * wq * th * (q[e][k][0] * grad[a][0] + q[e][k][1] * grad[a][1]);
            }
        }
    }
    let sigma = |j: usize, r: f64| {
        wc[j] * laws.solid_heat_capacity(Phase::Cement) * (1.0 - laws.porosity(Phase::Cement, r))
            + wa[j] * laws.solid_heat_capacity(Phase::Aggregate) * (1.0 - laws.porosity(Phase::Aggregate, r))
    };
    let mut res_t = 0.0;
    let mut mag_t = 0.0;
    for j in 0..n {
        let e_new = c.c_w * b(j, next.p[j], next.r[j]) + sigma(j, next.r[j]);
        let e_old = c.c_w * b(j, prev.p[j], prev.r[j]) + sigma(j, prev.r[j]);
        let time = (e_new * next.theta[j] - e_old * prev.theta[j]) / h;
        let bnd = c.alpha_e * mb[j] * (next.theta[j] - c.theta_inf)
            + c.c_w * c.beta_e * mb[j] * next.theta[j] * (next.p[j] - c.p_inf);
        let src = c.alpha2 * wc[j] * f[j];
        let r = time + lt[j] + conv[j] + bnd - src;
        res_t += r * r;
        mag_t += (time.abs() + lt[j].abs() + conv[j].abs() + bnd.abs() + src.abs()).powi(2);
    }
    let rp = res_p.iter().map(|x| x * x).sum::<f64>().sqrt() / mag_p.iter().map(|x| x * x).sum::<f64>().sqrt();
    (rp, (res_t / mag_t).sqrt())
}

#[test]
fn step_satisfies_independently_assembled_equations() {
    let laws = MaterialLaws::reference();
    let provider = disk_provider(8, laws.clone());
    let (p0, t0) = random_initial(provider.grid(), &laws, 3);
    let cfg = TimeStepConfig::new(2e4, 4);
    let traj = run_simulation(p0, t0, &provider, &cfg).unwrap();
    assert_eq!(traj.states.len(), 5);
    for w in traj.states.windows(2) {
        let (rp, rt) = audit(&provider, &w[0], &w[1], cfg.h());
        // The oracle's Kirchhoff transform is itself only accurate to ~1e-8.
        assert!(rp < 1e-6, "pressure residual {rp:e}");
        assert!(rt < 1e-9, "temperature residual {rt:e}");
    }
    assert!(traj.states.last().unwrap().r.iter().any(|&r| r > 0.0));
}

#[test]
fn pressure_iteration_converges_quadratically() {
    let laws = MaterialLaws::reference();
    let provider = disk_provider(8, laws.clone());
    let (p0, t0) = random_initial(provider.grid(), &laws, 11);
    let cfg = TimeStepConfig::new(5e4, 1);
    let prev = SimulationState::initial(p0, t0);
    let (_, rep) = pressure_step(&prev, &provider, &cfg).unwrap();
    assert!(rep.converged);
    assert!(rep.final_residual <= 1e-9);
    assert!(rep.iterations < 20, "{:?}", rep.residual_history);
    assert!(rep.mass_balance < 1e-10, "mass balance {:e}", rep.mass_balance);
}

#[test]
fn bounds_and_memory_hold_over_a_run() {
    let laws = MaterialLaws::reference();
    let provider = disk_provider(16, laws.clone());
    let (p0, t0) = random_initial(provider.grid(), &laws, 5);
    let cfg = TimeStepConfig::new(1e5, 10);
    let traj = run_simulation(p0, t0, &provider, &cfg).unwrap();
    for r in &traj.reports {
        assert!(r.max_principle_ok, "step {} p in [{}, {}]", r.step, r.p_min, r.p_max);
        assert!(r.memory_ok);
        assert!(r.pressure.mass_balance < 1e-9);
    }
}

#[test]
fn equilibrium_temperature_is_preserved_without_hydration() {
    let mut laws = MaterialLaws::reference();
    laws.laws.hydration = HydrationLaw::Zero;
    let provider = disk_provider(8, laws.clone());
    let (p0, _) = random_initial(provider.grid(), &laws, 9);
    let t0 = vec![laws.constants.theta_inf; p0.len()];
    let cfg = TimeStepConfig::new(1e5, 5);
    let traj = run_simulation(p0, t0, &provider, &cfg).unwrap();
    for s in &traj.states {
        for &t in &s.theta {
            assert!((t - laws.constants.theta_inf).abs() < 1e-7, "{t}");
        }
        assert!(s.r.iter().all(|&r| r == 0.0));
    }
}

#[test]
fn uniform_state_at_ambient_stays_put_without_drying() {
    let mut laws = MaterialLaws::reference();
    laws.laws.hydration = HydrationLaw::Zero;
    laws.constants.beta_e = 1e-30;
    let provider = disk_provider(8, laws.clone());
    let n = provider.grid().n_nodes();
    let p0 = vec![0.5 * laws.constants.p_inf; n];
    let t0 = vec![laws.constants.theta_inf; n];
    let traj = run_simulation(p0.clone(), t0, &provider, &TimeStepConfig::new(1e4, 3)).unwrap();
    for (a, b) in traj.last().p.iter().zip(&p0) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn macro_and_meso_agree_for_identical_phases() {
    let mut laws = MaterialLaws::reference();
    laws.laws.hydration = HydrationLaw::Zero;
    laws.laws.perm_cement = crate::laws::HydrationDependence::Constant {
        value: laws.laws.perm_aggregate,
    };
    laws.laws.porosity_cement = crate::laws::HydrationDependence::Constant {
        value: laws.laws.porosity_aggregate,
    };
    laws.laws.conductivity_cement = laws.laws.conductivity_aggregate.clone();
    laws.constants.rho_sc = laws.constants.rho_sa;
    laws.constants.c_sc = laws.constants.c_sa;
    let meso = disk_provider(8, laws.clone());
    let raster = rasterize(&UnitCellGeometry::DiskInclusion { radius: 0.3 }, 4).unwrap();
    let chi = crate::cell::cement_fraction(&raster);
    let (lo, hi) = mobility_contrast_range(&laws);
    let mt = build_contrast_table_for_range(&raster, lo, hi, 8).unwrap();
    let (lo, hi) = conductivity_contrast_range(&laws);
    let ct = build_contrast_table_for_range(&raster, lo, hi, 8).unwrap();
    let mac = CoefficientProvider::homogenized(8, mt, ct, chi, laws.clone()).unwrap();
    let (p0, t0) = random_initial(meso.grid(), &laws, 1);
    let cfg = TimeStepConfig::new(2e4, 2);
    let a = run_simulation(p0.clone(), t0.clone(), &meso, &cfg).unwrap();
    let b = run_simulation(p0, t0, &mac, &cfg).unwrap();
    for (x, y) in a.last().p.iter().zip(&b.last().p) {
        assert!((x - y).abs() < 1e-6 * x.abs().max(1.0), "{x} vs {y}");
    }
    for (x, y) in a.last().theta.iter().zip(&b.last().theta) {
        assert!((x - y).abs() < 1e-8 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn homogenized_provider_rejects_short_tables() {
    let laws = MaterialLaws::reference();
    let raster = CellRaster::uniform(2, Phase::Cement);
    let short = crate::cell::build_contrast_table(&raster, &[1.0, 2.0], 2).unwrap();
    let err = CoefficientProvider::homogenized(4, short.clone(), short, 0.5, laws).unwrap_err();
    assert!(matches!(err, Error::ContrastRange { .. }));
}

#[test]
fn invalid_initial_data_is_rejected() {
    let laws = MaterialLaws::reference();
    let provider = disk_provider(8, laws.clone());
    let n = provider.grid().n_nodes();
    let mut p0 = vec![-1e5; n];
    p0[3] = 10.0;
    let cfg = TimeStepConfig::new(1.0, 1);
    let (traj, err) = run_simulation_partial(p0, vec![300.0; n], &provider, &cfg);
    assert!(traj.states.is_empty());
    assert!(err.unwrap().is_validation());
    let bad = run_simulation(vec![-1.0; 3], vec![300.0; 3], &provider, &cfg);
    assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn peclet_limit_aborts_with_partial_trajectory() {
    let mut laws = MaterialLaws::reference();
    laws.laws.perm_aggregate = 1e-11;
    laws.laws.perm_cement = crate::laws::HydrationDependence::Constant { value: 1e-11 };
    let provider = disk_provider(8, laws.clone());
    let (p0, t0) = random_initial(provider.grid(), &laws, 2);
    let cfg = TimeStepConfig::new(10.0, 3);
    let (traj, err) = run_simulation_partial(p0, t0, &provider, &cfg);
    assert_eq!(traj.states.len(), 1);
    match err.unwrap() {
        Error::StepFailure { step, message, .. } => {
            assert_eq!(step, 1);
            assert!(message.contains("Peclet"));
        }
        e => panic!("unexpected {e}"),
    }
}

fn single_phase_provider(n: usize, laws: MaterialLaws) -> CoefficientProvider {
    let tiling = MesoTiling::new(1.0, CellRaster::uniform(2, Phase::Cement), n).unwrap();
    CoefficientProvider::meso(tiling, laws).unwrap()
}

#[test]
fn pressure_step_matches_dense_picard_oracle() {
    use nalgebra::{DMatrix, DVector};
    let laws = MaterialLaws::reference();
    let c = laws.constants.clone();
    let provider = single_phase_provider(8, laws.clone());
    let grid = provider.grid().clone();
    let n = grid.n_nodes();
    let (p0, t0) = random_initial(&grid, &laws, 21);
    let mut prev = SimulationState::initial(p0, t0);
    for (j, r) in prev.r.iter_mut().enumerate() {
        *r = 0.05 * (j % 5) as f64;
    }
    let cfg = TimeStepConfig::new(3e4, 1);
    let h = cfg.h();
    let (p_solver, _) = pressure_step(&prev, &provider, &cfg).unwrap();

    // Dense stiffness from columns of the independent element assembly.
    let mob: Vec<Tensor2> = (0..grid.n_elements())
        .map(|e| {
            let v = c.rho_w * laws.permeability(Phase::Cement, element_mean(&grid, &prev.r, e))
                / laws.viscosity(element_mean(&grid, &prev.theta, e));
            [v, 0.0, v]
        })
        .collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let (kc, _) = dense_diffusion(&grid, &mob, &e);
        for row in 0..n {
            k[(row, col)] = kc[row];
        }
    }
    let w = lumped(&grid, &vec![1.0; grid.n_elements()]);
    let mb = boundary_lumped(&grid);
    let kappa_fine = |p: f64| {
        let g = |x: f64| laws.truncated_rel_perm(x);
        -adaptive_simpson(&g, p, 0.0, 1e-4, 60)
    };
    let residual = |p: &DVector<f64>| -> DVector<f64> {
        let u = DVector::from_iterator(n, p.iter().map(|&x| kappa_fine(x)));
        let mut f = &k * u;
        for j in 0..n {
            let rate = laws.hydration_rate(p[j], prev.theta[j], prev.r[j]);
            let r_new = prev.r[j] + h * rate;
            let b_new = c.rho_w * w[j] * laws.porosity(Phase::Cement, r_new) * laws.saturation(p[j]);
            let b_old = c.rho_w * w[j] * laws.porosity(Phase::Cement, prev.r[j]) * laws.saturation(prev.p[j]);
            f[j] += (b_new - b_old) / h + c.beta_e * mb[j] * (p[j] - c.p_inf) - c.alpha1 * w[j] * rate;
        }
        f
    };
    let mut p = DVector::from_vec(prev.p.clone());
    let mut converged = false;
    for _ in 0..400 {
        let f = residual(&p);
        // Frozen-coefficient linearization, damped.
        let mut m = k.clone();
        for col in 0..n {
            let kr = laws.truncated_rel_perm(p[col]);
            for row in 0..n {
                m[(row, col)] *= kr;
            }
        }
        for j in 0..n {
            let phi = laws.porosity(Phase::Cement, prev.r[j]);
            m[(j, j)] += c.rho_w * w[j] * phi * laws.saturation_derivative(p[j]) / h + c.beta_e * mb[j];
        }
        let step = m.lu().solve(&f).unwrap();
        p -= 0.7 * &step;
        if step.amax() < 1e-6 {
            converged = true;
            break;
        }
    }
    assert!(converged);
    for j in 0..n {
        let d = (p[j] - p_solver[j]).abs() / c.p_inf.abs();
        assert!(d <= 1e-8, "node {j}: {} vs {} ({d:e})", p[j], p_solver[j]);
    }
}

#[test]
fn no_flux_no_source_keeps_pressure() {
    let mut laws = MaterialLaws::reference();
    laws.laws.hydration = HydrationLaw::Zero;
    laws.constants.beta_e = 0.0;
    let provider = disk_provider(8, laws.clone());
    let n = provider.grid().n_nodes();
    let p_bar = laws.constants.p_inf + 1e5;
    let prev = SimulationState::initial(vec![p_bar; n], vec![300.0; n]);
    let (p, rep) = pressure_step(&prev, &provider, &TimeStepConfig::new(1e4, 1)).unwrap();
    assert!(rep.converged);
    for v in p {
        assert!((v - p_bar).abs() <= 1e-9 * p_bar.abs(), "{v}");
    }
}

#[test]
fn drying_from_uniform_state_stays_between_ambient_and_start() {
    let mut laws = MaterialLaws::reference();
    laws.laws.hydration = HydrationLaw::Zero;
    let provider = disk_provider(8, laws.clone());
    let n = provider.grid().n_nodes();
    let p_bar = laws.constants.p_inf + 2e5;
    let traj = run_simulation(vec![p_bar; n], vec![300.0; n], &provider, &TimeStepConfig::new(1e6, 5)).unwrap();
    for s in &traj.states[1..] {
        for &p in &s.p {
            assert!(p >= laws.constants.p_inf && p <= p_bar, "{p}");
        }
    }
}

#[test]
fn zero_steps_returns_initial_state() {
    let laws = MaterialLaws::reference();
    let provider = disk_provider(8, laws.clone());
    let (p0, t0) = random_initial(provider.grid(), &laws, 8);
    let traj = run_simulation(p0.clone(), t0.clone(), &provider, &TimeStepConfig::new(1.0, 0)).unwrap();
    assert_eq!(traj.states.len(), 1);
    assert_eq!(traj.states[0].p, p0);
    assert_eq!(traj.states[0].theta, t0);
    assert!(traj.states[0].r.iter().all(|&r| r == 0.0));
}

#[test]
fn memory_error_is_first_order_against_fine_reference() {
    let laws = MaterialLaws::reference();
    let provider = single_phase_provider(8, laws.clone());
    let (_, t0) = random_initial(provider.grid(), &laws, 13);
    let p0 = vec![0.3 * laws.constants.p_inf; t0.len()];
    let final_r = |n: usize| {
        run_simulation(p0.clone(), t0.clone(), &provider, &TimeStepConfig::new(1e5, n))
            .unwrap()
            .last()
            .r
            .clone()
    };
    let reference = final_r(2000);
    let err = |r: Vec<f64>| crate::fem::l2_distance(provider.grid(), &r, &reference).unwrap();
    let (e20, e40) = (err(final_r(20)), err(final_r(40)));
    let ratio = e20 / e40;
    assert!((1.6..2.6).contains(&ratio), "{e20:e} {e40:e} {ratio}");
}
