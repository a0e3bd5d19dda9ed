/// Probabilities are clamped to this band before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Two-class softmax cross-entropy plus `(lambda / 2) * sum_sq_params`.
///
/// `label` is the index of the true class (1 = permissible). Returns the loss
/// and its gradient with respect to the two logits; the penalty gradient
/// `lambda * theta` is added to parameter gradients separately.
pub fn cross_entropy_with_l2(logits: [f64; 2], label: usize, sum_sq_params: f64, lambda: f64) -> (f64, [f64; 2]) {
    let p1 = prob_class1(logits);
    let p = p1.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let l = if label == 1 { 1.0 } else { 0.0 };
    let ce = -(l * p.ln() + (1.0 - l) * (1.0 - p).ln());
    let loss = ce + 0.5 * lambda * sum_sq_params;
    // d/dz_1 = p1 - l, d/dz_0 = -(p1 - l)
    let g = p1 - l;
    (loss, [-g, g])
}

/// Softmax probability of class 1 for two logits.
pub fn prob_class1(logits: [f64; 2]) -> f64 {
    1.0 / (1.0 + (logits[0] - logits[1]).exp())
}

/// Mean squared error and its gradient `2 (pred - target) / N`.
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "mse length mismatch");
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cost_ln2() {
        for label in [0, 1] {
            let (l, _) = cross_entropy_with_l2([0.3, 0.3], label, 0.0, 0.0);
            assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_prediction_costs_nothing() {
        let (l, g) = cross_entropy_with_l2([-50.0, 50.0], 1, 0.0, 0.0);
        assert!(l < 1e-12);
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn l2_penalty_is_additive() {
        let (l, _) = cross_entropy_with_l2([1.0, 1.0], 0, 4.0, 0.01);
        assert!((l - (std::f64::consts::LN_2 + 0.02)).abs() < 1e-12);
    }

    #[test]
    fn saturated_wrong_prediction_stays_finite() {
        let (l, g) = cross_entropy_with_l2([1e6, -1e6], 1, 0.0, 0.0);
        assert!(l.is_finite() && g.iter().all(|v| v.is_finite()));
        assert!((l - (-PROB_CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn logit_gradient_matches_central_difference() {
        let z = [0.4, -1.1];
        for label in [0, 1] {
            let (_, g) = cross_entropy_with_l2(z, label, 0.0, 0.0);
            for k in 0..2 {
                let h = 1e-6;
                let mut zp = z;
                let mut zm = z;
                zp[k] += h;
                zm[k] -= h;
                let fd = (cross_entropy_with_l2(zp, label, 0.0, 0.0).0 - cross_entropy_with_l2(zm, label, 0.0, 0.0).0) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[2.0, 5.0], &[2.0, 5.0]).0, 0.0);
        let (l, g) = mse(&[1.0], &[3.0]);
        assert_eq!(l, 4.0);
        assert_eq!(g, vec![-4.0]);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).0, 1.0);
    }
}
