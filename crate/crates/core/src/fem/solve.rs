//! Jacobi-preconditioned Krylov solvers.

use super::sparse::CsrMatrix;
use crate::{Error, Result};

/// Outcome of a converged linear solve.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖A x − b‖ / ‖b‖` recomputed from the returned solution.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_inputs(op: &CsrMatrix, rhs: &[f64], rel_tol: f64) -> Result<()> {
    if rhs.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            actual: rhs.len(),
        });
    }
    if !(rel_tol > 0.0 && rel_tol <= 1e-4) {
        return Err(Error::config("/rel_tol", format!("linear tolerance {rel_tol} outside (0, 1e-4]")));
    }
    Ok(())
}

fn inverse_diagonal(op: &CsrMatrix) -> Vec<f64> {
    op.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn true_residual(op: &CsrMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let ax = op.mul_vec(x);
    rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn default_max_iter(n: usize) -> usize {
    10 * n + 1000
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. `x0` is an optional initial guess.
pub fn solve_spd(op: &CsrMatrix, rhs: &[f64], rel_tol: f64, x0: Option<&[f64]>) -> Result<LinearSolve> {
    check_inputs(op, rhs, rel_tol)?;
    if !op.is_symmetric() {
        return Err(Error::Assembly("solve_spd called on an operator not flagged symmetric".into()));
    }
    let n = op.dim();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(op);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let max_iter = default_max_iter(n);
    let mut history = Vec::new();
    let mut total = 0;
    // One restart from the true residual guards against drift of the recursive residual.
    for _attempt in 0..3 {
        let mut r = true_residual(op, &x, rhs);
        let mut rn = norm(&r) / bnorm;
        history.push(rn);
        if rn <= rel_tol {
            return Ok(LinearSolve {
                x,
                iterations: total,
                relative_residual: rn,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while total < max_iter {
            total += 1;
            op.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::Solver {
                    iterations: total,
                    final_residual: rn,
                    residual_history: history,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rn = norm(&r) / bnorm;
            history.push(rn);
            if rn <= 0.5 * rel_tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * dinv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let true_rn = norm(&true_residual(op, &x, rhs)) / bnorm;
        if true_rn <= rel_tol {
            return Ok(LinearSolve {
                x,
                iterations: total,
                relative_residual: true_rn,
            });
        }
        if total >= max_iter {
            break;
        }
    }
    let final_residual = norm(&true_residual(op, &x, rhs)) / bnorm;
    Err(Error::Solver {
        iterations: total,
        final_residual,
        residual_history: history,
    })
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular operators.
pub fn solve_general(op: &CsrMatrix, rhs: &[f64], rel_tol: f64, x0: Option<&[f64]>) -> Result<LinearSolve> {
    check_inputs(op, rhs, rel_tol)?;
    let n = op.dim();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(op);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let max_iter = default_max_iter(n);
    let mut history = Vec::new();
    let mut total = 0;
    for _attempt in 0..4 {
        let mut r = true_residual(op, &x, rhs);
        let mut rn = norm(&r) / bnorm;
        history.push(rn);
        if rn <= rel_tol {
            return Ok(LinearSolve {
                x,
                iterations: total,
                relative_residual: rn,
            });
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut breakdown = false;
        while total < max_iter {
            total += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                breakdown = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = p[i] * dinv[i];
            }
            op.mul_vec_into(&y, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                breakdown = true;
                break;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm <= 0.5 * rel_tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                rn = norm(&s) / bnorm;
                history.push(rn);
                break;
            }
            for i in 0..n {
                z[i] = s[i] * dinv[i];
            }
            op.mul_vec_into(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                breakdown = true;
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            rn = norm(&r) / bnorm;
            history.push(rn);
            if rn <= 0.5 * rel_tol {
                break;
            }
            if omega == 0.0 {
                breakdown = true;
                break;
            }
        }
        let true_rn = norm(&true_residual(op, &x, rhs)) / bnorm;
        if true_rn <= rel_tol {
            return Ok(LinearSolve {
                x,
                iterations: total,
                relative_residual: true_rn,
            });
        }
        if total >= max_iter && !breakdown {
            break;
        }
    }
    let final_residual = norm(&true_residual(op, &x, rhs)) / bnorm;
    Err(Error::Solver {
        iterations: total,
        final_residual,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let s = solve_spd(&a, &b, 1e-10, None).unwrap();
        assert_eq!(s.x, b);
        let g = solve_general(&a, &b, 1e-10, None).unwrap();
        assert_eq!(g.x, b);
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]], true);
        let s = solve_spd(&a, &[3.0, 3.0], 1e-12, None).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..n).map(|k| b[i][k] * b[j][k]).sum();
                a[i][j] = v;
                a[j][i] = v;
            }
            a[i][i] += n as f64 * 0.1;
        }
        CsrMatrix::from_dense(&a, true)
    }

    #[test]
    fn random_spd_residual_is_recomputed() {
        let a = random_spd(50, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = solve_spd(&a, &b, 1e-10, None).unwrap();
        let r = true_residual(&a, &s.x, &b);
        assert!(norm(&r) <= 1e-10 * norm(&b));
    }

    #[test]
    fn nonsymmetric_system() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t, false);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let s = solve_general(&a, &b, 1e-11, None).unwrap();
        assert!(norm(&true_residual(&a, &s.x, &b)) <= 1e-11 * norm(&b));
    }

    #[test]
    fn tolerance_outside_contract_is_rejected() {
        let a = CsrMatrix::identity(2);
        assert!(solve_spd(&a, &[1.0, 1.0], 1e-3, None).is_err());
    }

    #[test]
    fn nonconvergence_carries_history() {
        // Indefinite operator flagged symmetric: CG breaks down.
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]], true);
        match solve_spd(&a, &[1.0, 1.0], 1e-10, None) {
            Err(Error::Solver { residual_history, .. }) => assert!(!residual_history.is_empty()),
            other => panic!("expected solver error, got {other:?}"),
        }
    }
}
