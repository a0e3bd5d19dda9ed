/// Central-difference gradient `(f(p + h e_i) - f(p - h e_i)) / 2h`.
pub fn finite_diff_grad<F>(f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Element-wise agreement test used by the gradient checks: relative error
/// below `rel_tol`, or absolute error below `abs_tol` near zero.
pub fn grads_agree(analytic: &[f64], numeric: &[f64], rel_tol: f64, abs_tol: f64) -> Result<(), String> {
    if analytic.len() != numeric.len() {
        return Err(format!("length {} vs {}", analytic.len(), numeric.len()));
    }
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let diff = (a - n).abs();
        if diff < abs_tol {
            continue;
        }
        let rel = diff / a.abs().max(n.abs());
        if rel >= rel_tol {
            return Err(format!("param {i}: analytic {a} numeric {n} rel err {rel:e}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn error_shrinks_quadratically_in_h() {
        // f = x^3 has central-difference error exactly h^2 at any x.
        let f = |p: &[f64]| p[0].powi(3);
        let exact = 3.0 * 1.5f64.powi(2);
        let e1 = (finite_diff_grad(f, &[1.5], 1e-2)[0] - exact).abs();
        let e2 = (finite_diff_grad(f, &[1.5], 5e-3)[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }
}
