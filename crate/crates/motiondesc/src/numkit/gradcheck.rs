//! Finite-difference verification of analytic gradients.

use super::NumError;

/// Default perturbation for central differences.
pub const DEFAULT_PERTURBATION: f64 = 1e-5;

/// Compare the analytic gradient of `eval` against central finite
/// differences at `params` and return the worst relative error.
///
/// `eval` maps a parameter vector to `(value, gradient)`. For each
/// coordinate the numeric derivative is `(f(p+h) - f(p-h)) / 2h` and the
/// relative error is `|a - n| / max(1e-8, |a| + |n|)`, which stays bounded
/// when both derivatives are near zero.
pub fn grad_check<F>(eval: &F, params: &[f64], h: f64) -> Result<f64, NumError>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "perturbation must be positive");
    let (value, analytic) = eval(params);
    if !value.is_finite() {
        return Err(NumError::NonFinite("grad_check evaluation"));
    }
    if analytic.len() != params.len() {
        return Err(NumError::DimMismatch {
            context: "grad_check",
            left: params.len(),
            right: analytic.len(),
        });
    }
    let mut worst = 0.0f64;
    let mut perturbed = params.to_vec();
    for i in 0..params.len() {
        perturbed[i] = params[i] + h;
        let (plus, _) = eval(&perturbed);
        perturbed[i] = params[i] - h;
        let (minus, _) = eval(&perturbed);
        perturbed[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NumError::NonFinite("grad_check evaluation"));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        let eval = |p: &[f64]| (p[0] * p[0], vec![2.0 * p[0]]);
        let err = grad_check(&eval, &[3.0], 1e-5).unwrap();
        assert!(err < 1e-9, "rel err {err}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        // 10% too large: the harness must notice.
        let eval = |p: &[f64]| (p[0] * p[0], vec![2.2 * p[0]]);
        let err = grad_check(&eval, &[3.0], 1e-5).unwrap();
        assert!(err > 1e-2, "rel err {err}");
    }

    #[test]
    fn non_finite_evaluation_errors() {
        let eval = |p: &[f64]| (p[0].ln(), vec![1.0 / p[0]]);
        // ln goes NaN for the negative-side perturbation around 0.
        assert!(matches!(
            grad_check(&eval, &[0.0], 1e-5),
            Err(NumError::NonFinite(_))
        ));
    }
}
