//! Parametric families for each constitutive function.
//!
//! Every family has a `Constant` member so that tests can switch individual
//! nonlinearities off.

use serde::{Deserialize, Serialize};

/// Degree of saturation `S(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SaturationLaw {
    Constant { value: f64 },
    /// `S(p) = intercept + slope·p`; only meaningful on a bounded test interval.
    Linear { intercept: f64, slope: f64 },
    /// van Genuchten retention curve blended with a small arctangent ramp so the
    /// derivative stays strictly positive on the whole real line:
    ///
    /// `S = s_r + (s_max − s_r − blend)·VG(p) + blend·(½ + atan(p/blend_scale)/π)`
    /// with `VG(p) = (1 + (−αp)ⁿ)^(−1+1/n)` for `p < 0` and `VG = 1` otherwise.
    RegularizedVanGenuchten {
        residual: f64,
        saturated: f64,
        alpha: f64,
        n: f64,
        blend: f64,
        blend_scale: f64,
    },
}

impl SaturationLaw {
    pub fn value(&self, p: f64) -> f64 {
        match *self {
            SaturationLaw::Constant { value } => value,
            SaturationLaw::Linear { intercept, slope } => intercept + slope * p,
            SaturationLaw::RegularizedVanGenuchten {
                residual,
                saturated,
                alpha,
                n,
                blend,
                blend_scale,
            } => {
                let vg = if p < 0.0 {
                    let m = 1.0 - 1.0 / n;
                    (1.0 + (-alpha * p).powf(n)).powf(-m)
                } else {
                    1.0
                };
                residual
                    + (saturated - residual - blend) * vg
                    + blend * (0.5 + (p / blend_scale).atan() / std::f64::consts::PI)
            }
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            SaturationLaw::Constant { .. } => 0.0,
            SaturationLaw::Linear { slope, .. } => slope,
            SaturationLaw::RegularizedVanGenuchten {
                residual,
                saturated,
                alpha,
                n,
                blend,
                blend_scale,
            } => {
                let dvg = if p < 0.0 {
                    let m = 1.0 - 1.0 / n;
                    let x = -alpha * p;
                    let xn = x.powf(n);
                    m * n * alpha * x.powf(n - 1.0) * (1.0 + xn).powf(-m - 1.0)
                } else {
                    0.0
                };
                let z = p / blend_scale;
                (saturated - residual - blend) * dvg
                    + blend / (std::f64::consts::PI * blend_scale * (1.0 + z * z))
            }
        }
    }
}

/// Relative hydraulic conductivity `k_R(s)` on `[0, C_s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelPermLaw {
    Constant { value: f64 },
    /// `k_R(s) = floor + (1 − floor)·(s/saturated)^exponent`, argument clamped to `[0, saturated]`.
    PowerWithFloor {
        floor: f64,
        exponent: f64,
        saturated: f64,
    },
}

impl RelPermLaw {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            RelPermLaw::Constant { value } => value,
            RelPermLaw::PowerWithFloor {
                floor,
                exponent,
                saturated,
            } => {
                let x = (s / saturated).clamp(0.0, 1.0);
                floor + (1.0 - floor) * x.powf(exponent)
            }
        }
    }
}

/// A rate-decaying function of the hydration degree,
/// `hydrated + (initial − hydrated)·exp(−rate·max(r, 0))`.
///
/// Used for the intrinsic permeability `k_c(r)` and the porosity `φ_c(r)` of
/// the cement paste.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HydrationDependence {
    Constant {
        value: f64,
    },
    HydrationDecay {
        initial: f64,
        hydrated: f64,
        rate: f64,
    },
}

impl HydrationDependence {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            HydrationDependence::Constant { value } => value,
            HydrationDependence::HydrationDecay {
                initial,
                hydrated,
                rate,
            } => hydrated + (initial - hydrated) * (-rate * r.max(0.0)).exp(),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            HydrationDependence::Constant { .. } => 0.0,
            HydrationDependence::HydrationDecay {
                initial,
                hydrated,
                rate,
            } => {
                if r <= 0.0 {
                    0.0
                } else {
                    -rate * (initial - hydrated) * (-rate * r).exp()
                }
            }
        }
    }
}

/// Kinematic viscosity `μ(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViscosityLaw {
    Constant {
        value: f64,
    },
    /// `clamp(reference + slope·(θ − theta_ref), min, max)`.
    Linear {
        reference: f64,
        theta_ref: f64,
        slope: f64,
        min: f64,
        max: f64,
    },
}

impl ViscosityLaw {
    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            ViscosityLaw::Constant { value } => value,
            ViscosityLaw::Linear {
                reference,
                theta_ref,
                slope,
                min,
                max,
            } => (reference + slope * (theta - theta_ref)).clamp(min, max),
        }
    }
}

/// Thermal conductivity of one phase. The aggregate law is evaluated with
/// `r = 0` since `λ_a` does not depend on the hydration degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConductivityLaw {
    Constant {
        value: f64,
    },
    /// `clamp(base + per_saturation·S(p) + per_kelvin·(θ − theta_ref) + per_hydration·r, min, max)`.
    Affine {
        base: f64,
        per_saturation: f64,
        per_kelvin: f64,
        theta_ref: f64,
        per_hydration: f64,
        min: f64,
        max: f64,
    },
}

impl ConductivityLaw {
    pub fn value(&self, saturation: f64, theta: f64, r: f64) -> f64 {
        match *self {
            ConductivityLaw::Constant { value } => value,
            ConductivityLaw::Affine {
                base,
                per_saturation,
                per_kelvin,
                theta_ref,
                per_hydration,
                min,
                max,
            } => (base + per_saturation * saturation + per_kelvin * (theta - theta_ref) + per_hydration * r)
                .clamp(min, max),
        }
    }
}

/// Hydration rate `f(p, θ, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HydrationLaw {
    Zero,
    /// `f = rate` for `p > p_∞`, zero otherwise.
    ConstantAbove { rate: f64 },
    /// `f = rate · g₁(p) · g₂(θ) · g₃(r)` with
    /// `g₁` a C¹ smoothstep from 0 at `p_∞` to 1 at `p_∞ + ramp_width`,
    /// `g₂ = clamp(½ + theta_sensitivity·(θ − theta_ref), 0, 1)` and
    /// `g₃ = clamp(1 − r/r_max, 0, 1)`.
    Standard {
        rate: f64,
        ramp_width: f64,
        theta_ref: f64,
        theta_sensitivity: f64,
        r_max: f64,
    },
}

fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0)
    } else {
        (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s))
    }
}

impl HydrationLaw {
    pub fn value(&self, p: f64, theta: f64, r: f64, p_inf: f64) -> f64 {
        self.value_and_dp(p, theta, r, p_inf).0
    }

    /// `(f, ∂f/∂p)`.
    pub fn value_and_dp(&self, p: f64, theta: f64, r: f64, p_inf: f64) -> (f64, f64) {
        match *self {
            HydrationLaw::Zero => (0.0, 0.0),
            HydrationLaw::ConstantAbove { rate } => {
                if p > p_inf {
                    (rate, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            HydrationLaw::Standard {
                rate,
                ramp_width,
                theta_ref,
                theta_sensitivity,
                r_max,
            } => {
                let (g1, dg1) = smoothstep((p - p_inf) / ramp_width);
                let g2 = (0.5 + theta_sensitivity * (theta - theta_ref)).clamp(0.0, 1.0);
                let g3 = (1.0 - r / r_max).clamp(0.0, 1.0);
                let c = rate * g2 * g3;
                (c * g1, c * dg1 / ramp_width)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vg() -> SaturationLaw {
        SaturationLaw::RegularizedVanGenuchten {
            residual: 0.05,
            saturated: 1.0,
            alpha: 1e-6,
            n: 2.0,
            blend: 0.02,
            blend_scale: 1e6,
        }
    }

    #[test]
    fn saturation_derivative_matches_central_difference() {
        let s = vg();
        for &p in &[-6e6, -3e6, -1e6, -2e5, -1.0, 3e5, 2e6] {
            let h = 1.0;
            let fd = (s.value(p + h) - s.value(p - h)) / (2.0 * h);
            let d = s.derivative(p);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-12), "p={p}: {fd} vs {d}");
        }
    }

    #[test]
    fn saturation_is_continuous_through_zero() {
        let s = vg();
        assert!((s.value(-1e-6) - s.value(1e-6)).abs() < 1e-12);
        assert!(s.value(1e9) < 1.0);
    }

    #[test]
    fn hydration_dp_matches_central_difference() {
        let f = HydrationLaw::Standard {
            rate: 1e-5,
            ramp_width: 1e6,
            theta_ref: 293.15,
            theta_sensitivity: 0.02,
            r_max: 1.0,
        };
        let p_inf = -4e6;
        for &p in &[-3.7e6, -3.2e6, -2.0e6] {
            let (_, d) = f.value_and_dp(p, 300.0, 0.3, p_inf);
            let fd = (f.value(p + 1.0, 300.0, 0.3, p_inf) - f.value(p - 1.0, 300.0, 0.3, p_inf)) / 2.0;
            assert!((d - fd).abs() <= 1e-6 * d.abs(), "{d} vs {fd}");
        }
        assert_eq!(f.value(p_inf, 300.0, 0.0, p_inf), 0.0);
        assert_eq!(f.value(p_inf - 10.0, 300.0, 0.0, p_inf), 0.0);
    }

    #[test]
    fn hydration_decay_derivative() {
        let law = HydrationDependence::HydrationDecay {
            initial: 0.2,
            hydrated: 0.1,
            rate: 1.5,
        };
        let r = 0.4;
        let fd = (law.value(r + 1e-6) - law.value(r - 1e-6)) / 2e-6;
        assert!((fd - law.derivative(r)).abs() < 1e-8);
        assert_eq!(law.value(-3.0), 0.2);
    }
}
