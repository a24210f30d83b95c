//! Finite-difference gradient oracle.
//!
//! Deliberately independent of the tape: it only re-evaluates a forward
//! closure, so it can falsify the recorded gradient rules.

/// Central-difference gradient of `f` at `theta` with step `h`.
pub fn finite_difference<F>(mut f: F, theta: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; theta.len()];
    let mut work = theta.to_vec();
    for i in 0..theta.len() {
        let orig = work[i];
        work[i] = orig + h;
        let up = f(&work);
        work[i] = orig - h;
        let down = f(&work);
        work[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Largest elementwise deviation between `analytic` and `numeric`, measured
/// as `|a - n| / max(rel_floor, |a|, |n|)` so tiny gradients compare on an
/// absolute scale.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / abs_floor.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_analytic_gradient_of_quadratic() {
        // f(x) = sum x_i^2, grad = 2x.
        let theta = vec![1.0, -2.0, 0.5];
        let g = finite_difference(|x| x.iter().map(|v| v * v).sum(), &theta, 1e-5);
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi - 2.0 * ti).abs() < 1e-8);
        }
    }

    #[test]
    fn relative_error_uses_absolute_floor() {
        let e = max_relative_error(&[0.0], &[5e-7], 1e-6);
        assert!((e - 0.5).abs() < 1e-12);
    }
}
