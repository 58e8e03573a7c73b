//! One-dimensional quadrature helpers.

/// Adaptive Simpson integration of `f` over `[a, b]` (either orientation).
///
/// `tol` is an absolute tolerance on the whole interval; recursion stops at
/// `max_depth` regardless.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Four-point Gauss-Legendre rule on `[0, 1]`: (abscissae, weights).
pub const GAUSS4_UNIT: ([f64; 4], [f64; 4]) = {
    const A: f64 = 0.339_981_043_584_856_26;
    const B: f64 = 0.861_136_311_594_052_6;
    const WA: f64 = 0.652_145_154_862_546_1;
    const WB: f64 = 0.347_854_845_137_453_9;
    (
        [0.5 - 0.5 * B, 0.5 - 0.5 * A, 0.5 + 0.5 * A, 0.5 + 0.5 * B],
        [0.5 * WB, 0.5 * WA, 0.5 * WA, 0.5 * WB],
    )
};

/// Two-point Gauss-Legendre abscissae on `[0, 1]` (weights are 1/2 each).
pub const GAUSS2_UNIT: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_reverse_orientation() {
        let f = |x: f64| 3.0 * x * x + 1.0;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-14, 30);
        assert!((v - 10.0).abs() < 1e-12);
        let w = adaptive_simpson(&f, 2.0, 0.0, 1e-14, 30);
        assert!((w + 10.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_transcendental() {
        let v = adaptive_simpson(&f64::exp, 0.0, 1.0, 1e-13, 40);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gauss4_integrates_degree_seven() {
        let (x, w) = GAUSS4_UNIT;
        let s: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 1.0 / 8.0).abs() < 1e-15);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
