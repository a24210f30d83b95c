//! Analytic two-task problems for exercising the Pareto machinery.

use crate::error::Result;

use super::TwoTaskObjective;

/// L_m(theta) = ||theta - c_m||^2 over theta in R^2. The Pareto front is the
/// segment between the two centers.
#[derive(Clone, Debug)]
pub struct QuadraticToy {
    pub centers: [[f64; 2]; 2],
}

impl QuadraticToy {
    /// The standard instance with centers (1, 0) and (0, 1).
    pub fn standard() -> Self {
        QuadraticToy {
            centers: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Euclidean distance from `theta` to the segment joining the centers.
    pub fn distance_to_front(&self, theta: &[f64]) -> f64 {
        let a = self.centers[0];
        let b = self.centers[1];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [theta[0] - a[0], theta[1] - a[1]];
        let denom = ab[0] * ab[0] + ab[1] * ab[1];
        let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / denom).clamp(0.0, 1.0);
        let px = a[0] + t * ab[0] - theta[0];
        let py = a[1] + t * ab[1] - theta[1];
        (px * px + py * py).sqrt()
    }
}

impl TwoTaskObjective for QuadraticToy {
    fn dim(&self) -> usize {
        2
    }

    fn losses(&mut self, theta: &[f64]) -> Result<[f64; 2]> {
        Ok(std::array::from_fn(|m| {
            let c = self.centers[m];
            (theta[0] - c[0]).powi(2) + (theta[1] - c[1]).powi(2)
        }))
    }

    fn losses_and_grads(&mut self, theta: &[f64]) -> Result<([f64; 2], [Vec<f64>; 2])> {
        let losses = self.losses(theta)?;
        let grads = std::array::from_fn(|m| {
            let c = self.centers[m];
            vec![2.0 * (theta[0] - c[0]), 2.0 * (theta[1] - c[1])]
        });
        Ok((losses, grads))
    }
}

/// Decoupled scalar tasks: L1 = (theta_0 - a)^2, L2 = (theta_1 - b)^2.
/// Gradients are orthogonal, so any nonnegative weighting descends both.
#[derive(Clone, Debug)]
pub struct DecoupledToy {
    pub targets: [f64; 2],
}

impl TwoTaskObjective for DecoupledToy {
    fn dim(&self) -> usize {
        2
    }

    fn losses(&mut self, theta: &[f64]) -> Result<[f64; 2]> {
        Ok([
            (theta[0] - self.targets[0]).powi(2),
            (theta[1] - self.targets[1]).powi(2),
        ])
    }

    fn losses_and_grads(&mut self, theta: &[f64]) -> Result<([f64; 2], [Vec<f64>; 2])> {
        let losses = self.losses(theta)?;
        let grads = [
            vec![2.0 * (theta[0] - self.targets[0]), 0.0],
            vec![0.0, 2.0 * (theta[1] - self.targets[1])],
        ];
        Ok((losses, grads))
    }
}

/// Scalar two-task problem L1 = (theta - 1)^2, L2 = (theta + 1)^2 embedded
/// in a single parameter.
#[derive(Clone, Debug)]
pub struct ScalarToy;

impl TwoTaskObjective for ScalarToy {
    fn dim(&self) -> usize {
        1
    }

    fn losses(&mut self, theta: &[f64]) -> Result<[f64; 2]> {
        Ok([(theta[0] - 1.0).powi(2), (theta[0] + 1.0).powi(2)])
    }

    fn losses_and_grads(&mut self, theta: &[f64]) -> Result<([f64; 2], [Vec<f64>; 2])> {
        let losses = self.losses(theta)?;
        let grads = [
            vec![2.0 * (theta[0] - 1.0)],
            vec![2.0 * (theta[0] + 1.0)],
        ];
        Ok((losses, grads))
    }
}
