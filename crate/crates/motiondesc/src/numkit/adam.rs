//! Adam with decoupled weight decay, over flat parameter slices.

use super::NumError;

/// Optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    /// First-moment accumulator, same length as the parameters.
    pub m: Vec<f64>,
    /// Second-moment accumulator, same length as the parameters.
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn new(len: usize) -> Self {
        AdamState::with_hyper(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One Adam update with bias-corrected moments. Weight decay is decoupled:
/// parameters are shrunk by `(1 - lr * weight_decay)` before the moment
/// update is applied.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), NumError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NumError::DimMismatch {
            context: "adam_step",
            left: params.len(),
            right: grads.len().max(state.m.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let shrink = 1.0 - lr * weight_decay;
    for i in 0..params.len() {
        params[i] *= shrink;
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[4.0], &mut st, 0.1, 0.0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-8, "got {}", p[0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut p = vec![0.5, -2.0, 3.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut st, 0.1, 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn two_steps_match_scalar_oracle() {
        // Expected values from the hand-scripted run in
        // tools/reference_streams.py (f(t) = t^2 from t = 1, lr = 0.1).
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        let g1 = 2.0 * p[0];
        adam_step(&mut p, &[g1], &mut st, 0.1, 0.0).unwrap();
        assert!((p[0] - 0.9000000005).abs() < 1e-12, "step 1: {}", p[0]);
        let g2 = 2.0 * p[0];
        adam_step(&mut p, &[g2], &mut st, 0.1, 0.0).unwrap();
        assert!((p[0] - 0.8004122286917928).abs() < 1e-12, "step 2: {}", p[0]);
    }

    #[test]
    fn decay_shrinks_before_update() {
        // With zero gradient the only effect is the multiplicative shrink.
        let mut p = vec![10.0];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[0.0], &mut st, 0.5, 0.2).unwrap();
        assert!((p[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(2);
        assert!(adam_step(&mut p, &[0.0; 3], &mut st, 0.1, 0.0).is_err());
    }
}
