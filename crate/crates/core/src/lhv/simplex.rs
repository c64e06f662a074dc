//! Phase-1 simplex for the equality-form feasibility problem
//! `{ x ≥ 0 : A x = b }` with `b ≥ 0`.
//!
//! One artificial variable per row, cost = sum of artificials, Bland's
//! anti-cycling rule throughout. Sized for the small dense systems this
//! crate produces (tens of rows, up to a few thousand columns), where
//! robustness matters far more than speed.

/// Outcome of the phase-1 solve.
#[derive(Debug, Clone)]
pub struct Phase1Solution {
    /// Optimal value of the artificial-variable sum (the L1 residual of
    /// the best approximate solution). Zero (up to rounding) iff the
    /// system is feasible.
    pub objective: f64,
    /// Values of the structural variables at the optimum.
    pub x: Vec<f64>,
    /// Simplex multipliers y at the optimum. They satisfy
    /// yᵀ A_j ≤ 0 for every structural column j and yᵀ b = objective,
    /// so y separates b from the cone when the objective is positive.
    pub dual: Vec<f64>,
}

const PIVOT_EPS: f64 = 1e-11;

/// Solves min Σ artificials subject to A x + s = b, x, s ≥ 0.
///
/// `columns` is column-major: `columns[j][i]` is A[i][j]. All entries
/// of `b` must be nonnegative (probabilities are).
pub fn phase_one(columns: &[Vec<f64>], b: &[f64]) -> Phase1Solution {
    let m = b.len();
    let n = columns.len();
    assert!(columns.iter().all(|col| col.len() == m), "ragged column");
    assert!(b.iter().all(|&v| v >= 0.0), "negative right-hand side");

    // Tableau rows 0..m: [A | I | b]; row m: reduced costs and -objective.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..m {
            t[i][j] = col[i];
        }
    }
    for i in 0..m {
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    // Phase-1 costs: 0 for structural, 1 for artificial. With the
    // artificial basis, reduced costs are c_j − Σ_i a_ij.
    for j in 0..width {
        let mut sum = 0.0;
        for i in 0..m {
            sum += t[i][j];
        }
        let c = if (n..n + m).contains(&j) { 1.0 } else { 0.0 };
        t[m][j] = c - sum;
    }
    // ... except the rhs cell, which carries −objective.
    t[m][width - 1] = -b.iter().sum::<f64>();

    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut iterations = 0usize;
    let max_iterations = 200 * (n + m) + 1000;

    loop {
        // Bland: entering column = smallest index with negative reduced cost.
        let entering = (0..n + m).find(|&j| t[m][j] < -PIVOT_EPS);
        let Some(entering) = entering else { break };

        // Ratio test; Bland ties broken by the smallest basis variable.
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let coeff = t[i][entering];
            if coeff > PIVOT_EPS {
                let ratio = t[i][width - 1] / coeff;
                let better = match leaving {
                    None => true,
                    Some(cur) => {
                        ratio < best_ratio - PIVOT_EPS
                            || (ratio < best_ratio + PIVOT_EPS && basis[i] < basis[cur])
                    }
                };
                if better {
                    leaving = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        // Phase-1 objective is bounded below by zero, so a pivot row
        // always exists; guard anyway.
        let Some(leaving) = leaving else { break };

        let pivot = t[leaving][entering];
        for v in t[leaving].iter_mut() {
            *v /= pivot;
        }
        for r in 0..=m {
            if r == leaving {
                continue;
            }
            let factor = t[r][entering];
            if factor == 0.0 {
                continue;
            }
            for j in 0..width {
                t[r][j] -= factor * t[leaving][j];
            }
            t[r][entering] = 0.0;
        }
        basis[leaving] = entering;

        iterations += 1;
        if iterations >= max_iterations {
            break;
        }
    }

    let mut x = vec![0.0; n];
    let mut objective = 0.0;
    for i in 0..m {
        let value = t[i][width - 1];
        if basis[i] < n {
            x[basis[i]] = value.max(0.0);
        } else {
            objective += value.max(0.0);
        }
    }
    // Multipliers from the artificial columns: y_i = 1 − reduced cost.
    let dual: Vec<f64> = (0..m).map(|i| 1.0 - t[m][n + i]).collect();

    Phase1Solution { objective, x, dual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_system_reaches_zero() {
        // x0 + x1 = 1, x0 - x1 = 0 → x = (0.5, 0.5)
        let columns = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        // b must be ≥ 0: rewrite second row as x0 ... use b = (1, 0).
        let sol = phase_one(&columns, &[1.0, 0.0]);
        assert!(sol.objective < 1e-12);
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system_keeps_positive_objective_and_valid_dual() {
        // x = 1 and x = 0 simultaneously (x ≥ 0, one variable).
        let columns = vec![vec![1.0, 1.0]];
        let b = [1.0, 0.0];
        let sol = phase_one(&columns, &b);
        assert!(sol.objective > 0.5);
        // Dual certificate: yᵀ A_j ≤ 0 for all j, yᵀ b = objective.
        let y_dot_col: f64 = sol.dual[0] * 1.0 + sol.dual[1] * 1.0;
        assert!(y_dot_col <= 1e-9);
        let y_dot_b: f64 = sol.dual[0] * b[0] + sol.dual[1] * b[1];
        assert!((y_dot_b - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows_are_handled() {
        // Same row twice: x0 = 1 (twice) with a second variable free.
        let columns = vec![vec![1.0, 1.0], vec![0.0, 0.0]];
        let sol = phase_one(&columns, &[1.0, 1.0]);
        assert!(sol.objective < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_vertices_terminate() {
        // Multiple zero-rhs rows force degenerate pivots; Bland must
        // still terminate.
        let columns = vec![
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        let sol = phase_one(&columns, &[1.0, 0.0, 0.0]);
        assert!(sol.objective >= -1e-12);
    }
}
