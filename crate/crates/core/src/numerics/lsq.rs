//! Levenberg–Marquardt for small (≤ a handful of parameters) dense
//! nonlinear least-squares problems with a forward-difference Jacobian.

#[derive(Debug, Clone, PartialEq)]
pub struct LsqOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-15,
            xtol: 1e-13,
        }
    }
}

/// Minimises `Σ r_i(p)²` where `residuals(p, out)` fills `out`.
pub fn levenberg_marquardt<F>(mut residuals: F, start: &[f64], m: usize, options: LsqOptions) -> LsqOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = start.len();
    let mut p = start.to_vec();
    let mut r = vec![0.0; m];
    residuals(&p, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * n];
    let mut r_trial = vec![0.0; m];
    let mut p_trial = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        for j in 0..n {
            let step = 1e-7 * p[j].abs().max(1e-3);
            p_trial.copy_from_slice(&p);
            p_trial[j] += step;
            residuals(&p_trial, &mut r_trial);
            for i in 0..m {
                jac[i * n + j] = (r_trial[i] - r[i]) / step;
            }
        }
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in 0..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for a in 0..n {
                lhs[a * n + a] += lambda * jtj[a * n + a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = solve_dense(lhs, rhs, n) else {
                lambda *= 10.0;
                continue;
            };
            for j in 0..n {
                p_trial[j] = p[j] + delta[j];
            }
            residuals(&p_trial, &mut r_trial);
            let trial_cost = sum_sq(&r_trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let rel_step = delta
                    .iter()
                    .zip(&p)
                    .map(|(d, v)| d.abs() / v.abs().max(1e-8))
                    .fold(0.0, f64::max);
                p.copy_from_slice(&p_trial);
                r.copy_from_slice(&r_trial);
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_drop < options.ftol || rel_step < options.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent direction left: at a (local) minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }

    LsqOutcome {
        params: p,
        cost,
        iterations,
        converged,
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Gaussian elimination with partial pivoting on a row-major `n×n` system.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Ordinary least squares for `y ≈ Σ_j c_j · basis_j(x)`; returns the
/// coefficients and the residual sum of squares.
pub fn linear_least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = columns.len();
    let mut ata = vec![0.0; n * n];
    let mut aty = vec![0.0; n];
    for a in 0..n {
        aty[a] = columns[a].iter().zip(y).map(|(u, v)| u * v).sum();
        for b in 0..n {
            ata[a * n + b] = columns[a].iter().zip(&columns[b]).map(|(u, v)| u * v).sum();
        }
    }
    let coeffs = solve_dense(ata, aty, n)?;
    let rss = y
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let fit: f64 = (0..n).map(|j| coeffs[j] * columns[j][i]).sum();
            (v - fit).powi(2)
        })
        .sum();
    Some((coeffs, rss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_damped_cosine() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let truth = [0.7, 1.1];
        let model = |p: &[f64], x: f64| p[0] * (-0.1 * x).exp() * (3.0 * x - p[1]).cos();
        let ys: Vec<f64> = xs.iter().map(|&x| model(&truth, x)).collect();
        let out = levenberg_marquardt(
            |p, r| {
                for (i, &x) in xs.iter().enumerate() {
                    r[i] = model(p, x) - ys[i];
                }
            },
            &[0.5, 1.3],
            xs.len(),
            LsqOptions::default(),
        );
        assert!(out.converged);
        assert!((out.params[0] - 0.7).abs() < 1e-9);
        assert!((out.params[1] - 1.1).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_of_a_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 0.5 * x).collect();
        let (c, rss) = linear_least_squares(&[vec![1.0; 10], xs], &ys).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        assert!(rss < 1e-20);
    }
}
