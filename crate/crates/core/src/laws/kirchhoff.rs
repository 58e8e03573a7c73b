//! Kirchhoff transformation `κ(ξ) = ∫₀^ξ k̃_r` and its inverse, plus a
//! tabulated version of the potential `Θ`.

use super::MaterialLaws;
use crate::quadrature::adaptive_simpson;
use crate::{Error, Result};

/// Number of table intervals on `[p_∞, 0]`.
const INTERVALS: usize = 4096;

/// Cubic Hermite table on a uniform grid whose node `zero_index` sits exactly at 0.
#[derive(Debug, Clone)]
struct HermiteTable {
    lo: f64,
    step: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    /// Tabulates the primitive `F(ξ) = ∫₀^ξ g` of `g` on `[lo, hi]`, with `F(0) = 0`.
    fn primitive<G: Fn(f64) -> f64>(g: &G, lo: f64, intervals_below_zero: usize, intervals_above_zero: usize, scale: f64) -> Self {
        let step = -lo / intervals_below_zero as f64;
        let n = intervals_below_zero + intervals_above_zero;
        let nodes: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    lo
                } else {
                    (k as f64 - intervals_below_zero as f64) * step
                }
            })
            .collect();
        let mut values = vec![0.0; n + 1];
        let tol = 1e-15 * scale * step;
        for k in (0..intervals_below_zero).rev() {
            values[k] = values[k + 1] - adaptive_simpson(g, nodes[k], nodes[k + 1], tol, 40);
        }
        for k in intervals_below_zero + 1..=n {
            values[k] = values[k - 1] + adaptive_simpson(g, nodes[k - 1], nodes[k], tol, 40);
        }
        let slopes = nodes.iter().map(|&x| g(x)).collect();
        HermiteTable {
            lo,
            step,
            nodes,
            values,
            slopes,
        }
    }

    fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn interval_of(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.step).floor();
        (k.max(0.0) as usize).min(self.nodes.len() - 2)
    }

    fn eval_in(&self, k: usize, x: f64) -> f64 {
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let d = x1 - x0;
        let t = (x - x0) / d;
        hermite(t, self.values[k], self.values[k + 1], d * self.slopes[k], d * self.slopes[k + 1])
    }

    fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.interval_of(x), x)
    }
}

fn hermite(t: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
}

fn hermite_dt(t: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    (6.0 * t2 - 6.0 * t) * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1
}

/// Tabulated Kirchhoff map for a fixed law set.
///
/// The table covers `[p_∞, p_hi]` with `p_hi = |p_∞|/4`; below `p_∞` the map is
/// continued exactly as the linear function `κ(p_∞) + K₀(ξ − p_∞)`. Queries
/// above `p_hi` (or inverse queries above `κ(p_hi)`) are refused.
#[derive(Debug, Clone)]
pub struct KirchhoffMap {
    table: HermiteTable,
    p_inf: f64,
    k0: f64,
    k1: f64,
    laws: MaterialLaws,
}

impl KirchhoffMap {
    pub fn new(laws: &MaterialLaws) -> Self {
        let p_inf = laws.constants.p_inf;
        assert!(p_inf < 0.0, "Kirchhoff map needs p_inf < 0");
        let g = |x: f64| laws.truncated_rel_perm(x);
        let k1 = laws.k1_rel();
        let table = HermiteTable::primitive(&g, p_inf, INTERVALS, INTERVALS / 4, k1);
        KirchhoffMap {
            table,
            p_inf,
            k0: laws.k0(),
            k1,
            laws: laws.clone(),
        }
    }

    /// `K₀ = k_R(S(p_∞))`.
    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// `K₁ = k_R(C_s)`.
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// Truncated permeability `k̃_r(ξ)`, the exact derivative of `κ`.
    pub fn rel_perm(&self, xi: f64) -> f64 {
        self.laws.truncated_rel_perm(xi)
    }

    /// Upper end of the tabulated pressure range.
    pub fn p_hi(&self) -> f64 {
        self.table.hi()
    }

    /// Largest admissible value of `u = κ(p)`.
    pub fn u_hi(&self) -> f64 {
        *self.table.values.last().unwrap()
    }

    pub fn forward(&self, xi: f64) -> Result<f64> {
        if xi < self.p_inf {
            return Ok(self.table.values[0] + self.k0 * (xi - self.p_inf));
        }
        if xi > self.p_hi() || !xi.is_finite() {
            return Err(Error::KirchhoffRange {
                value: xi,
                lo: f64::NEG_INFINITY,
                hi: self.p_hi(),
            });
        }
        Ok(self.table.eval(xi))
    }

    pub fn inverse(&self, u: f64) -> Result<f64> {
        let values = &self.table.values;
        if u < values[0] {
            return Ok(self.p_inf + (u - values[0]) / self.k0);
        }
        if u > self.u_hi() || !u.is_finite() {
            return Err(Error::KirchhoffRange {
                value: u,
                lo: f64::NEG_INFINITY,
                hi: self.u_hi(),
            });
        }
        // Last node with value <= u.
        let k = values.partition_point(|&v| v <= u).saturating_sub(1).min(values.len() - 2);
        let t = &self.table;
        let (x0, x1) = (t.nodes[k], t.nodes[k + 1]);
        let d = x1 - x0;
        let (y0, y1, m0, m1) = (values[k], values[k + 1], d * t.slopes[k], d * t.slopes[k + 1]);
        if u == y0 {
            return Ok(x0);
        }
        if u == y1 {
            return Ok(x1);
        }
        // Safeguarded Newton on the monotone cubic.
        let (mut a, mut b) = (0.0, 1.0);
        let mut s = (u - y0) / (y1 - y0);
        for _ in 0..100 {
            let r = hermite(s, y0, y1, m0, m1) - u;
            if r > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let dr = hermite_dt(s, y0, y1, m0, m1);
            let mut next = s - r / dr;
            if !(next > a && next < b) || dr <= 0.0 {
                next = 0.5 * (a + b);
            }
            if (next - s).abs() <= 1e-16 || b - a <= 1e-16 {
                s = next;
                break;
            }
            s = next;
        }
        Ok(x0 + s * d)
    }
}

/// Tabulated `Θ(ξ) = ∫₀^ξ S'(z) z dz` on `[2 p_∞, |p_∞|]`; falls back to
/// direct quadrature outside.
#[derive(Debug, Clone)]
pub struct ThetaPotentialTable {
    table: HermiteTable,
    laws: MaterialLaws,
}

impl ThetaPotentialTable {
    pub fn new(laws: &MaterialLaws) -> Self {
        let p_inf = laws.constants.p_inf;
        let g = |z: f64| laws.saturation_derivative(z) * z;
        let scale = laws.bounds.s_l * p_inf.abs();
        let table = HermiteTable::primitive(&g, 2.0 * p_inf, 2 * INTERVALS, INTERVALS, scale);
        ThetaPotentialTable {
            table,
            laws: laws.clone(),
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        if xi < self.table.lo || xi > self.table.hi() {
            self.laws.theta_potential(xi)
        } else {
            self.table.eval(xi)
        }
    }
}
