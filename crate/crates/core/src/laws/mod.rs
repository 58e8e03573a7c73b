//! Constitutive functions, physical constants and the per-phase coefficients
//! `b`, `σ`, `a`, `λ` built from them.

mod functions;
mod kirchhoff;
mod validation;

pub use functions::{
    ConductivityLaw, HydrationDependence, HydrationLaw, RelPermLaw, SaturationLaw, ViscosityLaw,
};
pub use kirchhoff::{KirchhoffMap, ThetaPotentialTable};
pub use validation::{validate_assumptions, AssumptionCheck, ValidationReport};

use crate::microstructure::Phase;
use crate::quadrature::adaptive_simpson;
use serde::{Deserialize, Serialize};

/// Material and boundary constants, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Density of water (kg/m³).
    pub rho_w: f64,
    /// Specific heat of water (J/(kg·K)).
    pub c_w: f64,
    pub rho_sc: f64,
    pub c_sc: f64,
    pub rho_sa: f64,
    pub c_sa: f64,
    /// Heat transfer coefficient of the Robin condition.
    pub alpha_e: f64,
    /// Moisture transfer coefficient of the Robin condition.
    pub beta_e: f64,
    /// Water consumption per unit hydration.
    pub alpha1: f64,
    /// Heat released per unit hydration.
    pub alpha2: f64,
    /// Ambient capillary pressure (Pa), negative.
    pub p_inf: f64,
    /// Ambient temperature (K).
    pub theta_inf: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            rho_w: 1000.0,
            c_w: 4180.0,
            rho_sc: 2000.0,
            c_sc: 1000.0,
            rho_sa: 2200.0,
            c_sa: 1000.0,
            alpha_e: 10.0,
            beta_e: 2e-11,
            alpha1: -200.0,
            alpha2: 1.5e8,
            p_inf: -4e6,
            theta_inf: 293.15,
        }
    }
}

/// Declared constants of the structural assumptions. Validation checks the
/// laws against these numbers; the solvers use some of them (`C_s`, `C_f`)
/// directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBounds {
    pub c_s: f64,
    pub s_l: f64,
    pub k1: f64,
    pub k2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub c_phi: f64,
    pub c_f: f64,
}

impl Default for AssumptionBounds {
    fn default() -> Self {
        AssumptionBounds {
            c_s: 1.0,
            s_l: 1e-6,
            k1: 4e-17,
            k2: 6e-16,
            mu1: 2.5e-4,
            mu2: 2e-3,
            lambda1: 0.5,
            lambda2: 4.0,
            phi1: 0.09,
            phi2: 0.21,
            c_phi: 0.15,
            c_f: 1e-5,
        }
    }
}

/// The constitutive functions of both phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstitutiveLaws {
    pub saturation: SaturationLaw,
    pub rel_perm: RelPermLaw,
    pub perm_cement: HydrationDependence,
    pub perm_aggregate: f64,
    pub viscosity: ViscosityLaw,
    pub conductivity_cement: ConductivityLaw,
    pub conductivity_aggregate: ConductivityLaw,
    pub porosity_cement: HydrationDependence,
    pub porosity_aggregate: f64,
    pub hydration: HydrationLaw,
}

impl Default for ConstitutiveLaws {
    fn default() -> Self {
        let p_inf = PhysicalConstants::default().p_inf;
        ConstitutiveLaws {
            saturation: SaturationLaw::RegularizedVanGenuchten {
                residual: 0.05,
                saturated: 1.0,
                alpha: 1e-6,
                n: 2.0,
                blend: 0.02,
                blend_scale: 1e6,
            },
            rel_perm: RelPermLaw::PowerWithFloor {
                floor: 1e-2,
                exponent: 3.0,
                saturated: 1.0,
            },
            perm_cement: HydrationDependence::HydrationDecay {
                initial: 5e-16,
                hydrated: 5e-17,
                rate: 2.0,
            },
            perm_aggregate: 1e-16,
            viscosity: ViscosityLaw::Linear {
                reference: 1e-3,
                theta_ref: 293.15,
                slope: -2e-5,
                min: 3e-4,
                max: 1.8e-3,
            },
            conductivity_cement: ConductivityLaw::Affine {
                base: 1.0,
                per_saturation: 0.8,
                per_kelvin: 0.0,
                theta_ref: 293.15,
                per_hydration: 0.5,
                min: 0.6,
                max: 3.0,
            },
            conductivity_aggregate: ConductivityLaw::Affine {
                base: 2.5,
                per_saturation: 0.5,
                per_kelvin: 0.0,
                theta_ref: 293.15,
                per_hydration: 0.0,
                min: 0.6,
                max: 3.5,
            },
            porosity_cement: HydrationDependence::HydrationDecay {
                initial: 0.2,
                hydrated: 0.1,
                rate: 1.5,
            },
            porosity_aggregate: 0.05,
            hydration: HydrationLaw::Standard {
                rate: 1e-5,
                ramp_width: 0.25 * p_inf.abs(),
                theta_ref: 293.15,
                theta_sensitivity: 0.02,
                r_max: 1.0,
            },
        }
    }
}

/// Laws, constants and declared bounds bundled together; this is what every
/// solver receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaterialLaws {
    pub laws: ConstitutiveLaws,
    pub constants: PhysicalConstants,
    pub bounds: AssumptionBounds,
}

impl MaterialLaws {
    /// Default law set; satisfies all structural assumptions.
    pub fn reference() -> Self {
        Self::default()
    }

    pub fn saturation(&self, p: f64) -> f64 {
        self.laws.saturation.value(p)
    }

    pub fn saturation_derivative(&self, p: f64) -> f64 {
        self.laws.saturation.derivative(p)
    }

    pub fn rel_perm(&self, s: f64) -> f64 {
        self.laws.rel_perm.value(s)
    }

    /// `k̃_r(ξ) = k_R(S(max(ξ, p_∞)))`.
    pub fn truncated_rel_perm(&self, xi: f64) -> f64 {
        self.rel_perm(self.saturation(xi.max(self.constants.p_inf)))
    }

    pub fn porosity(&self, phase: Phase, r: f64) -> f64 {
        match phase {
            Phase::Cement => self.laws.porosity_cement.value(r),
            Phase::Aggregate => self.laws.porosity_aggregate,
        }
    }

    pub fn permeability(&self, phase: Phase, r: f64) -> f64 {
        match phase {
            Phase::Cement => self.laws.perm_cement.value(r),
            Phase::Aggregate => self.laws.perm_aggregate,
        }
    }

    pub fn viscosity(&self, theta: f64) -> f64 {
        self.laws.viscosity.value(theta)
    }

    pub fn hydration_rate(&self, p: f64, theta: f64, r: f64) -> f64 {
        self.laws.hydration.value(p, theta, r, self.constants.p_inf)
    }

    pub fn hydration_rate_dp(&self, p: f64, theta: f64, r: f64) -> (f64, f64) {
        self.laws.hydration.value_and_dp(p, theta, r, self.constants.p_inf)
    }

    /// Volumetric heat capacity `ρ c` of the solid skeleton of a phase, before
    /// the porosity factor.
    pub fn solid_heat_capacity(&self, phase: Phase) -> f64 {
        let c = &self.constants;
        match phase {
            Phase::Cement => c.rho_sc * c.c_sc,
            Phase::Aggregate => c.rho_sa * c.c_sa,
        }
    }

    /// Moisture content `b = ρ_w φ(r) S(p)`.
    pub fn eval_b(&self, phase: Phase, p: f64, r: f64) -> f64 {
        self.constants.rho_w * self.porosity(phase, r) * self.saturation(p)
    }

    /// Heat capacity of the solid `σ = ρ c (1 − φ)`.
    pub fn eval_sigma(&self, phase: Phase, r: f64) -> f64 {
        self.solid_heat_capacity(phase) * (1.0 - self.porosity(phase, r))
    }

    /// Mobility `a = ρ_w k_R(S(p)) k(r) / μ(θ)`.
    pub fn eval_a(&self, phase: Phase, p: f64, theta: f64, r: f64) -> f64 {
        self.constants.rho_w * self.rel_perm(self.saturation(p)) * self.permeability(phase, r)
            / self.viscosity(theta)
    }

    /// The part of `a` that multiplies `k_R`: `ρ_w k(r)/μ(θ)`. The pressure
    /// solver applies it to the Kirchhoff variable.
    pub fn mobility_prefactor(&self, phase: Phase, theta: f64, r: f64) -> f64 {
        self.constants.rho_w * self.permeability(phase, r) / self.viscosity(theta)
    }

    /// Thermal conductivity `λ_c(p, θ, r)` or `λ_a(p, θ)`.
    pub fn eval_lambda(&self, phase: Phase, p: f64, theta: f64, r: f64) -> f64 {
        let s = self.saturation(p);
        match phase {
            Phase::Cement => self.laws.conductivity_cement.value(s, theta, r),
            Phase::Aggregate => self.laws.conductivity_aggregate.value(s, theta, 0.0),
        }
    }

    /// `Θ(ξ) = ∫₀^ξ S'(z) z dz` by adaptive quadrature.
    pub fn theta_potential(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let g = |z: f64| self.saturation_derivative(z) * z;
        let scale = self.bounds.s_l.max(1e-300) * xi * xi;
        adaptive_simpson(&g, 0.0, xi, 1e-14 * scale, 50)
    }

    /// `K₀ = k_R(S(p_∞))`, lower bound of the truncated permeability.
    pub fn k0(&self) -> f64 {
        self.rel_perm(self.saturation(self.constants.p_inf))
    }

    /// `K₁ = k_R(C_s)`.
    pub fn k1_rel(&self) -> f64 {
        self.rel_perm(self.bounds.c_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trivial() -> MaterialLaws {
        let mut m = MaterialLaws::reference();
        m.constants.rho_w = 1.0;
        m.laws.saturation = SaturationLaw::Constant { value: 0.5 };
        m.laws.porosity_aggregate = 0.1;
        m.laws.rel_perm = RelPermLaw::Constant { value: 1.0 };
        m.laws.viscosity = ViscosityLaw::Constant { value: 1.0 };
        m.laws.perm_aggregate = 2.0;
        m
    }

    #[test]
    fn b_of_aggregate_is_plain_product() {
        let m = trivial();
        assert!((m.eval_b(Phase::Aggregate, -1e5, 0.3) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn b_of_cement_at_zero_hydration() {
        let m = MaterialLaws::reference();
        let p = -1e6;
        let expected = m.constants.rho_w * 0.2 * m.saturation(p);
        assert!((m.eval_b(Phase::Cement, p, 0.0) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn a_and_sigma_trivial_values() {
        let m = trivial();
        assert_eq!(m.eval_a(Phase::Aggregate, -3.0, 300.0, 0.0), 2.0);
        let mut m2 = trivial();
        m2.constants.rho_sa = 10.0;
        m2.constants.c_sa = 1.0;
        assert!((m2.eval_sigma(Phase::Aggregate, 0.0) - 9.0).abs() < 1e-14);
    }

    /// Independent re-implementation of the default law set, written out
    /// from the formulas rather than through the enum machinery.
    fn oracle(p: f64, theta: f64, r: f64, cement: bool) -> (f64, f64, f64, f64) {
        let vg = if p < 0.0 {
            1.0 / (1.0 + (1e-6 * -p).powi(2)).sqrt()
        } else {
            1.0
        };
        let s = 0.05 + 0.93 * vg + 0.02 * (0.5 + (p / 1e6).atan() / std::f64::consts::PI);
        let kr = 0.01 + 0.99 * s.clamp(0.0, 1.0).powi(3);
        let rp = r.max(0.0);
        let phi = if cement { 0.1 + 0.1 * (-1.5 * rp).exp() } else { 0.05 };
        let k = if cement { 5e-17 + 4.5e-16 * (-2.0 * rp).exp() } else { 1e-16 };
        let mu = (1e-3 - 2e-5 * (theta - 293.15)).clamp(3e-4, 1.8e-3);
        let lam = if cement {
            (1.0 + 0.8 * s + 0.5 * r).clamp(0.6, 3.0)
        } else {
            (2.5 + 0.5 * s).clamp(0.6, 3.5)
        };
        let rhoc = if cement { 2.0e6 } else { 2.2e6 };
        (1000.0 * phi * s, rhoc * (1.0 - phi), 1000.0 * kr * k / mu, lam)
    }

    #[test]
    fn coefficients_match_independent_evaluation() {
        let m = MaterialLaws::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = rng.gen_range(-5e6..0.0);
            let theta = rng.gen_range(250.0..350.0);
            let r = rng.gen_range(0.0..1.5);
            for (phase, cement) in [(Phase::Cement, true), (Phase::Aggregate, false)] {
                let (b, sigma, a, lam) = oracle(p, theta, r, cement);
                let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs();
                assert!(close(m.eval_b(phase, p, r), b));
                assert!(close(m.eval_sigma(phase, r), sigma));
                assert!(close(m.eval_a(phase, p, theta, r), a));
                assert!(close(m.eval_lambda(phase, p, theta, r), lam));
            }
        }
    }

    #[test]
    fn theta_potential_closed_form_for_linear_saturation() {
        let mut m = MaterialLaws::reference();
        m.laws.saturation = SaturationLaw::Linear {
            intercept: 0.5,
            slope: 2e-7,
        };
        m.bounds.s_l = 2e-7;
        assert_eq!(m.theta_potential(0.0), 0.0);
        for &xi in &[-1e6, -2.5e6, 4e5] {
            let exact = 2e-7 * xi * xi / 2.0;
            assert!((m.theta_potential(xi) - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn theta_potential_against_riemann_sum() {
        let m = MaterialLaws::reference();
        for &xi in &[-3.9e6, -2e6, -5e5, -1e4] {
            // Integration by parts: Θ(ξ) = ξS(ξ) − ∫₀^ξ S, midpoint rule.
            let n = 400_000;
            let dz = xi / n as f64;
            let int_s: f64 = (0..n).map(|k| m.saturation((k as f64 + 0.5) * dz)).sum::<f64>() * dz;
            let oracle = xi * m.saturation(xi) - int_s;
            let v = m.theta_potential(xi);
            assert!(v >= 0.0);
            assert!((v - oracle).abs() <= 1e-8 * oracle.abs(), "{xi}: {v} vs {oracle}");
        }
    }

    #[test]
    fn theta_potential_inequality() {
        let m = MaterialLaws::reference();
        let table = ThetaPotentialTable::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p_inf = m.constants.p_inf;
        for _ in 0..1000 {
            let x1 = rng.gen_range(p_inf..0.0);
            let x2 = rng.gen_range(p_inf..0.0);
            let lhs = table.eval(x1) - table.eval(x2);
            let rhs = (m.saturation(x1) - m.saturation(x2)) * x1;
            assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0), "{x1} {x2}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn truncated_rel_perm_matches_composition() {
        let m = MaterialLaws::reference();
        let p_inf = m.constants.p_inf;
        for k in 0..100 {
            let xi = p_inf * 1.5 + k as f64 * 6e4;
            let v = m.truncated_rel_perm(xi);
            if xi > p_inf {
                assert_eq!(v, m.rel_perm(m.saturation(xi)));
            } else {
                assert_eq!(v, m.k0());
            }
            assert!(v >= m.k0() && v <= m.k1_rel());
        }
    }

    #[test]
    fn config_round_trip_through_json() {
        let m = MaterialLaws::reference();
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back: MaterialLaws = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}
