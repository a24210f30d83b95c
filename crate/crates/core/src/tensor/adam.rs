//! Adam optimizer over flat parameter vectors.

use crate::error::{Error, Result};

/// First/second moment buffers plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place. The learning rate is passed per
/// call so an external decay schedule can shrink it between steps.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dimension(
            "adam_step",
            format!(
                "params {} / grads {} / state {}",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    if lr <= 0.0 {
        return Err(Error::config(format!("adam learning rate must be > 0, got {lr}")));
    }
    let (b1, b2) = betas;
    state.t += 1;
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

/// Convenience wrapper pairing state with fixed betas/eps.
#[derive(Clone, Debug)]
pub struct Adam {
    pub state: AdamState,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Adam {
            state: AdamState::new(dim),
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        adam_step(params, grads, &mut self.state, lr, self.betas, self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let g = vec![3.0, -0.25, 1e-3];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, 0.1, (0.9, 0.999), 1e-8).unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            // Bias correction makes the first update lr * g / (|g| + eps).
            assert!((pi + 0.1 * gi.signum()).abs() < 1e-4, "p={pi} g={gi}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.5, -2.0];
        let g = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st, 0.1, (0.9, 0.999), 1e-8).unwrap();
        }
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // 200 steps minimizing (theta - 5)^2 from 0 at lr 0.1.
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        for _ in 0..200 {
            let g = vec![2.0 * (p[0] - 5.0)];
            adam_step(&mut p, &g, &mut st, 0.1, (0.9, 0.999), 1e-8).unwrap();
        }
        assert!((p[0] - 5.0).abs() < 0.1, "theta={}", p[0]);
    }

    #[test]
    fn rejects_bad_lengths_and_lr() {
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        assert!(adam_step(&mut p, &[1.0, 2.0], &mut st, 0.1, (0.9, 0.999), 1e-8).is_err());
        assert!(adam_step(&mut p, &[1.0], &mut st, 0.0, (0.9, 0.999), 1e-8).is_err());
    }
}
