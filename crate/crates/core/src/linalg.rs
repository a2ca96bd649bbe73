//! Small dense linear-algebra helpers shared by the exact solvers.
//!
//! Everything here is dense LU with partial pivoting via `nalgebra`; the
//! systems are tiny (at most a few thousand states for the brute-force
//! oracle, a few dozen otherwise).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solve `a * x = b`, verifying the relative residual afterwards.
pub fn solve(a: DMatrix<f64>, b: DVector<f64>, tolerance: f64, context: &str) -> Result<Vec<f64>> {
    let residual_scale = b.amax().max(1.0);
    let lu = a.clone().lu();
    let x = lu.solve(&b).ok_or_else(|| Error::SingularSystem {
        context: context.to_string(),
    })?;
    let residual = (&a * &x - &b).amax() / residual_scale;
    if !residual.is_finite() || residual > tolerance {
        return Err(Error::ResidualTooLarge {
            context: context.to_string(),
            residual,
            tolerance,
        });
    }
    Ok(x.data.into())
}

/// Stationary distribution of a row-stochastic matrix with a single
/// recurrent class.
///
/// Solves the global balance equations `m^T P = m^T`, `sum m = 1` by
/// replacing one balance equation with the normalization row. The replaced
/// equation is redundant only if its state carries stationary mass, so on a
/// residual failure the next candidate row is tried.
pub fn stationary_distribution(p: &DMatrix<f64>, tolerance: f64) -> Result<Vec<f64>> {
    let n = p.nrows();
    assert_eq!(n, p.ncols());
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let balance = p.transpose() - DMatrix::<f64>::identity(n, n);
    let mut last = Err(Error::SingularSystem {
        context: "stationary distribution".to_string(),
    });
    for replaced in [0, n - 1, n / 2].into_iter().chain(1..n.saturating_sub(1)) {
        let mut a = balance.clone();
        let mut b = DVector::zeros(n);
        for j in 0..n {
            a[(replaced, j)] = 1.0;
        }
        b[replaced] = 1.0;
        match solve(a, b, tolerance, "stationary distribution") {
            Ok(m) => {
                if m.iter().all(|&x| x >= -1e-9) {
                    let total: f64 = m.iter().map(|x| x.max(0.0)).sum();
                    let balance_residual = balance_residual(p, &m);
                    if balance_residual <= tolerance {
                        return Ok(m.into_iter().map(|x| x.max(0.0) / total).collect());
                    }
                    last = Err(Error::ResidualTooLarge {
                        context: "stationary distribution".to_string(),
                        residual: balance_residual,
                        tolerance,
                    });
                }
            }
            Err(e) => last = Err(e),
        }
    }
    last
}

fn balance_residual(p: &DMatrix<f64>, m: &[f64]) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut flow = 0.0;
        for i in 0..n {
            flow += m[i] * p[(i, j)];
        }
        worst = worst.max((flow - m[j]).abs());
    }
    worst
}
