//! Sampled checks of the structural assumptions on the laws.
//!
//! Every check is evaluated on finitely many points, so a pass is necessary but
//! not sufficient for the assumption to hold.

use super::MaterialLaws;
use crate::microstructure::Phase;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    /// Assumption label, "(i)" to "(v)".
    pub assumption: String,
    pub passed: bool,
    /// Smallest slack over all samples; negative when violated.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failure_summary(&self) -> String {
        let parts: Vec<String> = self
            .failures()
            .map(|c| format!("{} \"{}\" (margin {:.3e})", c.assumption, c.name, c.worst_margin))
            .collect();
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("; ")
        }
    }

    /// Turns a failing report into an error.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Validation(Box::new(self)))
        }
    }
}

/// Accumulates the minimum margin of one check.
struct Tracker {
    name: &'static str,
    assumption: &'static str,
    worst: f64,
}

impl Tracker {
    fn new(name: &'static str, assumption: &'static str) -> Self {
        Tracker {
            name,
            assumption,
            worst: f64::INFINITY,
        }
    }

    /// Records a sample whose slack is `margin`; `strict` requires `margin > 0`.
    fn see(&mut self, margin: f64) {
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst = self.worst.min(m);
    }

    fn finish(self, strict: bool) -> AssumptionCheck {
        let passed = if strict { self.worst > 0.0 } else { self.worst >= 0.0 };
        AssumptionCheck {
            name: self.name.to_string(),
            assumption: self.assumption.to_string(),
            passed,
            worst_margin: self.worst,
        }
    }
}

fn single(name: &'static str, assumption: &'static str, margin: f64, strict: bool) -> AssumptionCheck {
    let mut t = Tracker::new(name, assumption);
    t.see(margin);
    t.finish(strict)
}

/// Checks the laws against assumptions (i)–(v) on `n_samples` points per
/// variable over the declared domains
/// `p ∈ [4 p_∞, |p_∞|]`, `θ ∈ [θ_∞/2, 3θ_∞/2]`, `r ∈ [−1, 3]`.
///
/// The report is returned even when checks fail; call
/// [`ValidationReport::into_result`] to turn failures into an error.
pub fn validate_assumptions(m: &MaterialLaws, n_samples: usize) -> Result<ValidationReport> {
    if n_samples < 100 {
        return Err(Error::config("/n_samples", format!("need at least 100 samples, got {n_samples}")));
    }
    let c = &m.constants;
    let bd = &m.bounds;
    let p_inf = c.p_inf;
    let (p_lo, p_hi) = if p_inf < 0.0 { (4.0 * p_inf, -p_inf) } else { (-4e6, 4e6) };
    let (t_lo, t_hi) = (0.5 * c.theta_inf.abs(), 1.5 * c.theta_inf.abs().max(1.0));
    let (r_lo, r_hi) = (-1.0, 3.0);
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (0..n_samples).map(|k| lo + (hi - lo) * k as f64 / (n_samples - 1) as f64).collect()
    };
    let ps = grid(p_lo, p_hi);
    let ts = grid(t_lo, t_hi);
    let rs = grid(r_lo, r_hi);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let triples: Vec<(f64, f64, f64)> = (0..n_samples)
        .map(|_| {
            (
                rng.gen_range(p_lo..p_hi),
                rng.gen_range(t_lo..t_hi),
                rng.gen_range(r_lo..r_hi),
            )
        })
        .collect();
    let mut checks = Vec::new();

    // (i) saturation
    let mut s_pos = Tracker::new("0 < S", "(i)");
    let mut s_max = Tracker::new("S <= C_s", "(i)");
    let mut ds_pos = Tracker::new("0 < S'", "(i)");
    let mut ds_max = Tracker::new("S' <= S_L", "(i)");
    for &p in &ps {
        let s = m.saturation(p);
        let ds = m.saturation_derivative(p);
        s_pos.see(s);
        s_max.see(bd.c_s - s);
        ds_pos.see(ds);
        ds_max.see(bd.s_l - ds);
    }
    checks.push(s_pos.finish(true));
    checks.push(s_max.finish(false));
    checks.push(ds_pos.finish(true));
    checks.push(ds_max.finish(false));

    // (ii) permeabilities, viscosity, conductivities
    let mut kc_lo = Tracker::new("k1 <= k_c", "(ii)");
    let mut kc_hi = Tracker::new("k_c <= k2", "(ii)");
    for &r in &rs {
        let k = m.permeability(Phase::Cement, r);
        kc_lo.see(k - bd.k1);
        kc_hi.see(bd.k2 - k);
    }
    checks.push(single("0 < k1", "(ii)", bd.k1, true));
    checks.push(kc_lo.finish(false));
    checks.push(kc_hi.finish(false));
    checks.push(single("0 < k_a", "(ii)", m.laws.perm_aggregate, true));

    let ss = grid(0.0, bd.c_s);
    let mut kr_pos = Tracker::new("0 < k_R", "(ii)");
    let mut kr_mono = Tracker::new("k_R strictly increasing", "(ii)");
    for (k, &s) in ss.iter().enumerate() {
        let v = m.rel_perm(s);
        kr_pos.see(v);
        if k > 0 {
            kr_mono.see(v - m.rel_perm(ss[k - 1]));
        }
    }
    checks.push(kr_pos.finish(true));
    checks.push(kr_mono.finish(true));

    let mut mu_lo = Tracker::new("mu1 <= mu", "(ii)");
    let mut mu_hi = Tracker::new("mu <= mu2", "(ii)");
    for &t in &ts {
        let mu = m.viscosity(t);
        mu_lo.see(mu - bd.mu1);
        mu_hi.see(bd.mu2 - mu);
    }
    checks.push(single("0 < mu1", "(ii)", bd.mu1, true));
    checks.push(mu_lo.finish(false));
    checks.push(mu_hi.finish(false));

    let mut lc_lo = Tracker::new("lambda1 < lambda_c", "(ii)");
    let mut lc_hi = Tracker::new("lambda_c < lambda2", "(ii)");
    let mut la_lo = Tracker::new("lambda1 < lambda_a", "(ii)");
    let mut la_hi = Tracker::new("lambda_a < lambda2", "(ii)");
    let mut see_lambda = |p: f64, t: f64, r: f64| {
        let lc = m.eval_lambda(Phase::Cement, p, t, r);
        let la = m.eval_lambda(Phase::Aggregate, p, t, r);
        lc_lo.see(lc - bd.lambda1);
        lc_hi.see(bd.lambda2 - lc);
        la_lo.see(la - bd.lambda1);
        la_hi.see(bd.lambda2 - la);
    };
    for &(p, t, r) in &triples {
        see_lambda(p, t, r);
    }
    for k in 0..n_samples {
        let (p, t, r) = triples[k];
        see_lambda(ps[k], t, r);
        see_lambda(p, ts[k], r);
        see_lambda(p, t, rs[k]);
    }
    checks.push(single("0 < lambda1", "(ii)", bd.lambda1, true));
    checks.push(lc_lo.finish(true));
    checks.push(lc_hi.finish(true));
    checks.push(la_lo.finish(true));
    checks.push(la_hi.finish(true));

    // (iii) porosity
    let mut phi_lo = Tracker::new("phi1 <= phi_c", "(iii)");
    let mut phi_hi = Tracker::new("phi_c <= phi2", "(iii)");
    let mut lip = Tracker::new("phi_c Lipschitz with C_phi", "(iii)");
    for (k, &r) in rs.iter().enumerate() {
        let phi = m.porosity(Phase::Cement, r);
        phi_lo.see(phi - bd.phi1);
        phi_hi.see(bd.phi2 - phi);
        if k > 0 {
            let dr = r - rs[k - 1];
            let dphi = (phi - m.porosity(Phase::Cement, rs[k - 1])).abs();
            // Relative slack absorbs rounding when the bound is attained.
            lip.see(bd.c_phi * dr * (1.0 + 1e-9) - dphi);
        }
    }
    for &(_, _, r1) in &triples {
        let r2 = r1 + 1e-4;
        let dphi = (m.porosity(Phase::Cement, r2) - m.porosity(Phase::Cement, r1)).abs();
        lip.see(bd.c_phi * 1e-4 * (1.0 + 1e-6) - dphi);
    }
    checks.push(single("0 < C_phi", "(iii)", bd.c_phi, true));
    checks.push(single("0 < phi1", "(iii)", bd.phi1, true));
    checks.push(phi_lo.finish(false));
    checks.push(phi_hi.finish(false));
    checks.push(lip.finish(false));
    let phi_a = m.laws.porosity_aggregate;
    checks.push(single("0 < phi_a < 1", "(iii)", phi_a.min(1.0 - phi_a), true));

    // (iv) hydration rate
    let mut f_pos = Tracker::new("0 <= f", "(iv)");
    let mut f_max = Tracker::new("f <= C_f", "(iv)");
    let mut f_cut = Tracker::new("f = 0 for p <= p_inf", "(iv)");
    let mut see_f = |p: f64, t: f64, r: f64| {
        let f = m.hydration_rate(p, t, r);
        f_pos.see(f);
        f_max.see(bd.c_f - f);
        if p <= p_inf {
            f_cut.see(-f.abs());
        }
    };
    for &(p, t, r) in &triples {
        see_f(p, t, r);
        see_f(p_inf - (p - p_lo).abs() * 0.25, t, r);
    }
    for k in 0..n_samples {
        let (p, t, r) = triples[k];
        see_f(ps[k], t, r);
        see_f(p, ts[k], r);
        see_f(p, t, rs[k]);
    }
    see_f(p_inf, c.theta_inf, 0.0);
    checks.push(f_pos.finish(false));
    checks.push(f_max.finish(false));
    checks.push(f_cut.finish(false));

    // (v) constants
    checks.push(single("alpha_e > 0", "(v)", c.alpha_e, true));
    checks.push(single("beta_e > 0", "(v)", c.beta_e, true));
    checks.push(single("alpha1 < 0", "(v)", -c.alpha1, true));
    checks.push(single("alpha2 > 0", "(v)", c.alpha2, true));
    checks.push(single("p_inf < 0", "(v)", -p_inf, true));
    checks.push(single("theta_inf > 0", "(v)", c.theta_inf, true));
    checks.push(single(
        "alpha1 + rho_w C_phi C_s < 0",
        "(v)",
        -(c.alpha1 + c.rho_w * bd.c_phi * bd.c_s),
        true,
    ));
    let positive = c.rho_w.min(c.c_w).min(c.rho_sc).min(c.c_sc).min(c.rho_sa).min(c.c_sa);
    checks.push(single("densities and heat capacities > 0", "(v)", positive, true));

    Ok(ValidationReport { n_samples, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::HydrationDependence;

    #[test]
    fn defaults_pass() {
        let r = validate_assumptions(&MaterialLaws::reference(), 200).unwrap();
        assert!(r.passed(), "{}", r.failure_summary());
        assert!(r.checks.len() > 30);
    }

    #[test]
    fn positive_alpha1_fails_by_name() {
        let mut m = MaterialLaws::reference();
        m.constants.alpha1 = 1.0;
        let r = validate_assumptions(&m, 100).unwrap();
        let c = r.check("alpha1 < 0").unwrap();
        assert!(!c.passed);
        assert_eq!(c.assumption, "(v)");
        let err = r.into_result().unwrap_err();
        assert!(err.to_string().contains("alpha1 < 0"));
    }

    #[test]
    fn steep_porosity_fails_lipschitz() {
        let mut m = MaterialLaws::reference();
        m.laws.porosity_cement = HydrationDependence::HydrationDecay {
            initial: 0.2,
            hydrated: 0.1,
            rate: 5.0,
        };
        let r = validate_assumptions(&m, 100).unwrap();
        assert!(!r.check("phi_c Lipschitz with C_phi").unwrap().passed);
    }

    #[test]
    fn positive_ambient_pressure_fails() {
        let mut m = MaterialLaws::reference();
        m.constants.p_inf = 1000.0;
        let r = validate_assumptions(&m, 100).unwrap();
        assert!(!r.check("p_inf < 0").unwrap().passed);
    }

    #[test]
    fn too_few_samples_is_config_error() {
        assert!(matches!(
            validate_assumptions(&MaterialLaws::reference(), 99),
            Err(Error::Config { .. })
        ));
    }
}
