//! Pareto multi-task learning: decompose the two-task problem into K
//! preference-constrained subproblems, find an initial feasible point per
//! sub-region, then run constrained multi-objective descent in the reduced
//! objective/constraint space.
//!
//! Losses are normalized by their values at the starting parameters before
//! any sub-region geometry is evaluated, so the two tasks compare on the
//! same scale regardless of their raw magnitudes.

pub mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{adam_step, AdamState};

/// K unit preference vectors fanned over the nonnegative quadrant at evenly
/// spaced angles, axes included. Indexing is 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceSet {
    vectors: Vec<[f64; 2]>,
}

pub fn make_preferences(k: usize) -> Result<PreferenceSet> {
    if k < 2 {
        return Err(Error::config(format!("preference count must be >= 2, got {k}")));
    }
    let mut vectors = Vec::with_capacity(k);
    for i in 0..k {
        let v = if i == 0 {
            [1.0, 0.0]
        } else if i == k - 1 {
            [0.0, 1.0]
        } else {
            let theta = i as f64 / (k - 1) as f64 * std::f64::consts::FRAC_PI_2;
            [theta.cos(), theta.sin()]
        };
        vectors.push(v);
    }
    Ok(PreferenceSet { vectors })
}

impl PreferenceSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, k: usize) -> [f64; 2] {
        self.vectors[k]
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Sub-region membership: `v` is in region k iff u_k attains the maximal
/// inner product with `v` over all preference vectors (ties shared).
pub fn in_subregion(v: [f64; 2], k: usize, prefs: &PreferenceSet) -> bool {
    let own = dot2(prefs.get(k), v);
    prefs.vectors.iter().all(|&u| dot2(u, v) <= own)
}

/// Membership with a relative slack, for feasibility decisions where a
/// boundary point must not be rejected over floating-point asymmetries in
/// the preference angles.
pub fn in_subregion_slack(v: [f64; 2], k: usize, prefs: &PreferenceSet, slack: f64) -> bool {
    let own = dot2(prefs.get(k), v);
    let tol = slack * (v[0].abs() + v[1].abs()).max(1e-300);
    prefs.vectors.iter().all(|&u| dot2(u, v) <= own + tol)
}

/// Constraint value G_j = (u_j - u_k) . v over normalized losses; feasible
/// means G_j <= 0 for every j.
pub fn constraint_value(v: [f64; 2], j: usize, k: usize, prefs: &PreferenceSet) -> f64 {
    let uj = prefs.get(j);
    let uk = prefs.get(k);
    (uj[0] - uk[0]) * v[0] + (uj[1] - uk[1]) * v[1]
}

/// Result of the min-norm solve over the convex hull of gradients.
#[derive(Clone, Debug)]
pub struct MinNorm {
    /// Simplex weights, one per input gradient.
    pub lambda: Vec<f64>,
    /// The common-descent direction: minus the min-norm hull element.
    pub direction: Vec<f64>,
    /// Euclidean norm of the min-norm element.
    pub norm: f64,
}

/// Solve min over the simplex of ||sum lambda_i g_i||^2. Two gradients use
/// the closed-form clipped projection; more use Frank-Wolfe iterations on
/// the Gram matrix (with away steps for convergence), tolerance 1e-9, at
/// most 1000 iterations.
pub fn min_norm_direction(gradients: &[Vec<f64>]) -> Result<MinNorm> {
    if gradients.is_empty() {
        return Err(Error::contract("min_norm_direction over no gradients".to_string()));
    }
    let dim = gradients[0].len();
    if gradients.iter().any(|g| g.len() != dim) {
        return Err(Error::dimension("min_norm_direction", "gradient lengths differ".to_string()));
    }
    if gradients.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numeric {
            step: 0,
            detail: "non-finite gradient in min-norm solve".to_string(),
        });
    }
    let n = gradients.len();
    let lambda = match n {
        1 => vec![1.0],
        2 => {
            let g1 = &gradients[0];
            let g2 = &gradients[1];
            // argmin_t ||t g1 + (1-t) g2||^2 = (g2 - g1).g2 / ||g1 - g2||^2
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..dim {
                let d = g1[i] - g2[i];
                num += -d * g2[i];
                den += d * d;
            }
            let t = if den <= 0.0 {
                0.5
            } else {
                (num / den).clamp(0.0, 1.0)
            };
            vec![t, 1.0 - t]
        }
        _ => {
            let mut gram = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let d: f64 = gradients[i]
                        .iter()
                        .zip(&gradients[j])
                        .map(|(&a, &b)| a * b)
                        .sum();
                    gram[i][j] = d;
                    gram[j][i] = d;
                }
            }
            frank_wolfe_simplex(&gram, 1e-9, 1000)
        }
    };
    let mut direction = vec![0.0; dim];
    for (l, g) in lambda.iter().zip(gradients) {
        if *l == 0.0 {
            continue;
        }
        for (d, &gi) in direction.iter_mut().zip(g) {
            *d -= l * gi;
        }
    }
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(MinNorm {
        lambda,
        direction,
        norm,
    })
}

/// Frank-Wolfe with away steps and exact line search for
/// min lambda^T G lambda over the probability simplex.
fn frank_wolfe_simplex(gram: &[Vec<f64>], tol: f64, max_iters: usize) -> Vec<f64> {
    let n = gram.len();
    let mut lambda = vec![1.0 / n as f64; n];
    let mut glambda = vec![0.0; n]; // G . lambda
    let recompute = |lambda: &[f64], glambda: &mut [f64]| {
        for i in 0..n {
            glambda[i] = gram[i].iter().zip(lambda).map(|(&g, &l)| g * l).sum();
        }
    };
    recompute(&lambda, &mut glambda);
    // Gap tolerance relative to the problem scale, so the solution is
    // invariant to uniform rescaling of the gradients.
    let scale = (0..n).map(|i| gram[i][i]).fold(0.0f64, f64::max).max(1e-300);
    let tol = tol * scale;

    for _ in 0..max_iters {
        let value: f64 = lambda.iter().zip(&glambda).map(|(&l, &q)| l * q).sum();
        // Toward vertex: smallest entry of G.lambda.
        let s = (0..n)
            .min_by(|&a, &b| glambda[a].partial_cmp(&glambda[b]).unwrap())
            .unwrap();
        let gap_fw = value - glambda[s];
        if gap_fw <= tol {
            break;
        }
        // Away vertex: largest entry among the support.
        let v = (0..n)
            .filter(|&i| lambda[i] > 0.0)
            .max_by(|&a, &b| glambda[a].partial_cmp(&glambda[b]).unwrap())
            .unwrap();
        let gap_away = glambda[v] - value;

        let (dir_to, dir_from, gamma_max) = if gap_fw >= gap_away {
            (s, usize::MAX, 1.0)
        } else {
            let l = lambda[v];
            (usize::MAX, v, if l < 1.0 { l / (1.0 - l) } else { 1.0 })
        };

        // d = e_s - lambda (toward) or lambda - e_v (away); exact step for
        // the quadratic: gamma* = -grad.d / (2 d^T G d), grad = 2 G lambda.
        let mut d = vec![0.0; n];
        if dir_to != usize::MAX {
            for i in 0..n {
                d[i] = -lambda[i];
            }
            d[dir_to] += 1.0;
        } else {
            d.copy_from_slice(&lambda);
            d[dir_from] -= 1.0;
        }
        let grad_dot_d: f64 = (0..n).map(|i| 2.0 * glambda[i] * d[i]).sum();
        let mut dgd = 0.0;
        for i in 0..n {
            if d[i] == 0.0 {
                continue;
            }
            let gd: f64 = gram[i].iter().zip(&d).map(|(&g, &x)| g * x).sum();
            dgd += d[i] * gd;
        }
        let gamma = if dgd <= 0.0 {
            gamma_max
        } else {
            (-grad_dot_d / (2.0 * dgd)).clamp(0.0, gamma_max)
        };
        if gamma <= 0.0 {
            break;
        }
        for i in 0..n {
            lambda[i] = (lambda[i] + gamma * d[i]).max(0.0);
        }
        let sum: f64 = lambda.iter().sum();
        for l in lambda.iter_mut() {
            *l /= sum;
        }
        recompute(&lambda, &mut glambda);
    }
    // Snap to the exact minimizer on the support Frank-Wolfe identified:
    // solve the equality-constrained problem min l^T G l, sum l = 1 there.
    if let Some(polished) = polish_on_support(gram, &lambda) {
        let value = |l: &[f64]| -> f64 {
            let mut v = 0.0;
            for i in 0..n {
                if l[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    v += l[i] * gram[i][j] * l[j];
                }
            }
            v
        };
        if value(&polished) <= value(&lambda) + 1e-30 {
            return polished;
        }
    }
    lambda
}

/// Exact solve of min l^T G l with sum l = 1 restricted to the support of
/// `lambda`. Vectors whose exact weight comes out negative are dropped and
/// the system re-solved; returns None if every reduction fails.
fn polish_on_support(gram: &[Vec<f64>], lambda: &[f64]) -> Option<Vec<f64>> {
    let n = gram.len();
    let mut support: Vec<usize> = (0..n).filter(|&i| lambda[i] > 1e-12).collect();
    while !support.is_empty() {
        if support.len() == 1 {
            let mut out = vec![0.0; n];
            out[support[0]] = 1.0;
            return Some(out);
        }
        let x = solve_stationarity(gram, &support)?;
        let sum: f64 = x.iter().sum();
        if sum.abs() < 1e-300 {
            return None;
        }
        let weights: Vec<f64> = x.iter().map(|&xi| xi / sum).collect();
        if let Some(worst) = (0..weights.len())
            .filter(|&i| weights[i] < 0.0)
            .min_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap())
        {
            support.remove(worst);
            continue;
        }
        let mut out = vec![0.0; n];
        for (&i, &w) in support.iter().zip(&weights) {
            out[i] = w;
        }
        return Some(out);
    }
    None
}

/// Gaussian elimination for G_S x = 1 over the support indices.
fn solve_stationarity(gram: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let m = support.len();
    let mut a: Vec<Vec<f64>> = support
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = support.iter().map(|&j| gram[i][j]).collect();
            row.push(1.0);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for j in col..=m {
            a[col][j] /= p;
        }
        for r in 0..m {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in col..=m {
                        a[r][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    Some((0..m).map(|r| a[r][m]).collect())
}

/// A differentiable two-task problem over flat parameters.
///
/// `losses_and_grads` may be stochastic (advancing an internal mini-batch);
/// `losses` should be a stable evaluation (fixed batch or full data) so
/// feasibility tests do not jitter.
pub trait TwoTaskObjective {
    fn dim(&self) -> usize;
    fn losses(&mut self, theta: &[f64]) -> Result<[f64; 2]>;
    fn losses_and_grads(&mut self, theta: &[f64]) -> Result<([f64; 2], [Vec<f64>; 2])>;
}

/// Outcome of the initial-solution search.
#[derive(Clone, Debug)]
pub struct InitialSearch {
    pub theta: Vec<f64>,
    pub feasible: bool,
    pub iterations: usize,
}

fn check_finite(losses: [f64; 2], step: usize, lr: f64) -> Result<()> {
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric {
            step,
            detail: format!("non-finite losses {losses:?} at lr {lr}"),
        });
    }
    Ok(())
}

fn normalize(losses: [f64; 2], normalizer: [f64; 2]) -> [f64; 2] {
    [losses[0] / normalizer[0], losses[1] / normalizer[1]]
}

/// Gradient direction, or the zero vector for a (near-)zero gradient.
fn unit_or_zero(g: &[f64]) -> Vec<f64> {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-300 {
        return vec![0.0; g.len()];
    }
    g.iter().map(|x| x / norm).collect()
}

/// Sequential gradient search for a point whose (normalized) loss vector
/// lies in sub-region k: repeatedly step along the min-norm direction of
/// the violated constraint gradients, theta <- theta + eta * d.
pub fn find_initial_solution<O: TwoTaskObjective>(
    obj: &mut O,
    theta0: &[f64],
    k: usize,
    prefs: &PreferenceSet,
    normalizer: [f64; 2],
    eta: f64,
    max_iters: usize,
) -> Result<InitialSearch> {
    let mut theta = theta0.to_vec();
    let mut iterations = 0;
    for iter in 0..=max_iters {
        iterations = iter;
        // Feasibility on the stable evaluation so membership does not
        // jitter with the mini-batch schedule; a 1e-9 relative slack keeps
        // exact boundary starts from being chased over rounding noise.
        let stable = obj.losses(&theta)?;
        check_finite(stable, iter, eta)?;
        let v = normalize(stable, normalizer);
        if in_subregion_slack(v, k, prefs, 1e-9) {
            return Ok(InitialSearch {
                theta,
                feasible: true,
                iterations: iter,
            });
        }
        if iter == max_iters {
            break;
        }
        let (losses, grads) = obj.losses_and_grads(&theta)?;
        check_finite(losses, iter, eta)?;
        // Not in the region, so at least one constraint is violated (the
        // membership test and the constraint signs are the same inequality).
        // Each violated gradient grad G_j = Sum c_m grad(L_m / L0_m) is
        // unit-normalized so no single constraint dominates the solve.
        let mut violated = Vec::new();
        for j in 0..prefs.len() {
            if j == k {
                continue;
            }
            if constraint_value(v, j, k, prefs) > 0.0 {
                let uj = prefs.get(j);
                let uk = prefs.get(k);
                let c = [uj[0] - uk[0], uj[1] - uk[1]];
                let g: Vec<f64> = grads[0]
                    .iter()
                    .zip(&grads[1])
                    .map(|(&g1, &g2)| c[0] * g1 / normalizer[0] + c[1] * g2 / normalizer[1])
                    .collect();
                violated.push(unit_or_zero(&g));
            }
        }
        let mn = min_norm_direction(&violated)?;
        if mn.norm <= 1e-12 {
            break;
        }
        // Unit-normalized step: eta is the step length, independent of the
        // (normalizer-amplified) gradient scale.
        let inv = 1.0 / mn.norm;
        for (t, d) in theta.iter_mut().zip(&mn.direction) {
            *t += eta * d * inv;
        }
    }
    Ok(InitialSearch {
        theta,
        feasible: false,
        iterations,
    })
}

/// One constrained-descent direction solve in the reduced space of the two
/// objective gradients plus the active-constraint gradients.
#[derive(Clone, Debug)]
pub enum StepOutcome {
    /// Common descent direction and the per-task weights it implies.
    Descend {
        direction: Vec<f64>,
        alpha: [f64; 2],
        lambda: Vec<f64>,
    },
    /// Min-norm element vanished: restricted Pareto-critical point.
    Critical { alpha: [f64; 2] },
}

/// `active` carries the preference-difference coefficients (u_j - u_k) of
/// each active constraint. Gradients are expected on the normalized loss
/// scale.
pub fn pareto_step(
    grad_l1: &[f64],
    grad_l2: &[f64],
    active: &[[f64; 2]],
    critical_tol: f64,
) -> Result<StepOutcome> {
    if grad_l1.len() != grad_l2.len() {
        return Err(Error::dimension("pareto_step", "task gradient lengths differ".to_string()));
    }
    let mut vectors: Vec<Vec<f64>> = vec![grad_l1.to_vec(), grad_l2.to_vec()];
    for c in active {
        let g: Vec<f64> = grad_l1
            .iter()
            .zip(grad_l2)
            .map(|(&a, &b)| c[0] * a + c[1] * b)
            .collect();
        vectors.push(g);
    }
    let mn = min_norm_direction(&vectors)?;

    // Fold constraint weights back into the two task weights, clamp at
    // zero, and renormalize to sum one.
    let mut alpha = [mn.lambda[0], mn.lambda[1]];
    for (i, c) in active.iter().enumerate() {
        alpha[0] += mn.lambda[2 + i] * c[0];
        alpha[1] += mn.lambda[2 + i] * c[1];
    }
    alpha[0] = alpha[0].max(0.0);
    alpha[1] = alpha[1].max(0.0);
    let sum = alpha[0] + alpha[1];
    if sum <= 1e-12 {
        alpha = [0.5, 0.5];
    } else {
        alpha[0] /= sum;
        alpha[1] /= sum;
    }

    if mn.norm <= critical_tol {
        return Ok(StepOutcome::Critical { alpha });
    }
    Ok(StepOutcome::Descend {
        direction: mn.direction,
        alpha,
        lambda: mn.lambda,
    })
}

/// One row of the training trajectory log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub l1: f64,
    pub l2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub k: usize,
}

#[derive(Clone, Debug)]
pub struct ParetoTrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub lr: f64,
    /// Learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    /// Constraint activation tolerance on normalized losses.
    pub eps_active: f64,
    /// Cap on simultaneously active constraints.
    pub max_active: usize,
    pub critical_tol: f64,
}

impl Default for ParetoTrainConfig {
    fn default() -> Self {
        ParetoTrainConfig {
            epochs: 10,
            steps_per_epoch: 10,
            lr: 0.01,
            lr_decay: 0.95,
            betas: (0.9, 0.999),
            eps: 1e-8,
            eps_active: 1e-3,
            max_active: 5,
            critical_tol: 1e-10,
        }
    }
}

/// Result of one constrained subproblem.
#[derive(Clone, Debug)]
pub struct ParetoRun {
    pub k: usize,
    pub theta: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_losses: [f64; 2],
    pub normalizer: [f64; 2],
    pub initial: InitialSearch,
    /// Terminated at a restricted Pareto-critical point.
    pub critical: bool,
}

/// Initial-solution search followed by constrained descent with Adam on the
/// weighted two-task loss. The loss normalizer is fixed from theta0.
pub fn run_subproblem<O: TwoTaskObjective>(
    obj: &mut O,
    theta0: &[f64],
    k: usize,
    prefs: &PreferenceSet,
    search_eta: f64,
    search_iters: usize,
    cfg: &ParetoTrainConfig,
) -> Result<ParetoRun> {
    if k >= prefs.len() {
        return Err(Error::config(format!("sub-region index {k} out of range")));
    }
    let l0 = obj.losses(theta0)?;
    check_finite(l0, 0, cfg.lr)?;
    let normalizer = [l0[0].max(1e-12), l0[1].max(1e-12)];

    let initial = find_initial_solution(obj, theta0, k, prefs, normalizer, search_eta, search_iters)?;
    let theta = initial.theta.clone();
    train_pareto(obj, theta, k, prefs, normalizer, initial, cfg)
}

/// The constrained-descent phase. Per step: evaluate both task losses and
/// gradients on the current batch, determine the active constraints, solve
/// the reduced min-norm problem for (alpha1, alpha2), and take an Adam step
/// on the weighted loss gradient.
pub fn train_pareto<O: TwoTaskObjective>(
    obj: &mut O,
    mut theta: Vec<f64>,
    k: usize,
    prefs: &PreferenceSet,
    normalizer: [f64; 2],
    initial: InitialSearch,
    cfg: &ParetoTrainConfig,
) -> Result<ParetoRun> {
    let mut adam = AdamState::new(theta.len());
    let mut lr = cfg.lr;
    let mut trajectory = Vec::new();
    let mut critical = false;
    let mut step = 0usize;

    'outer: for _epoch in 0..cfg.epochs {
        for _ in 0..cfg.steps_per_epoch {
            let (losses, grads) = obj.losses_and_grads(&theta)?;
            check_finite(losses, step, lr)?;
            let v = normalize(losses, normalizer);
            // Unit-normalized task gradients: the min-norm solve over raw
            // gradients hands all the weight to whichever task happens to
            // have the smaller gradient norm, starving the other. With unit
            // directions the two-vector solve balances and the constraint
            // fold-back shifts the weights only near region boundaries.
            // Exactly zero gradients stay zero so Pareto-critical points
            // are still detected.
            let g1 = unit_or_zero(&grads[0]);
            let g2 = unit_or_zero(&grads[1]);

            // Active constraints: G_j >= -eps, largest values first, capped.
            let mut active: Vec<(f64, [f64; 2])> = (0..prefs.len())
                .filter(|&j| j != k)
                .filter_map(|j| {
                    let gval = constraint_value(v, j, k, prefs);
                    if gval >= -cfg.eps_active {
                        let uj = prefs.get(j);
                        let uk = prefs.get(k);
                        Some((gval, [uj[0] - uk[0], uj[1] - uk[1]]))
                    } else {
                        None
                    }
                })
                .collect();
            active.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            active.truncate(cfg.max_active);
            let coeffs: Vec<[f64; 2]> = active.iter().map(|(_, c)| *c).collect();

            let outcome = pareto_step(&g1, &g2, &coeffs, cfg.critical_tol)?;
            match outcome {
                StepOutcome::Critical { alpha } => {
                    trajectory.push(TrajectoryPoint {
                        step,
                        l1: losses[0],
                        l2: losses[1],
                        alpha1: alpha[0],
                        alpha2: alpha[1],
                        k,
                    });
                    critical = true;
                    break 'outer;
                }
                StepOutcome::Descend { alpha, .. } => {
                    trajectory.push(TrajectoryPoint {
                        step,
                        l1: losses[0],
                        l2: losses[1],
                        alpha1: alpha[0],
                        alpha2: alpha[1],
                        k,
                    });
                    let combined: Vec<f64> = g1
                        .iter()
                        .zip(&g2)
                        .map(|(&a, &b)| alpha[0] * a + alpha[1] * b)
                        .collect();
                    adam_step(&mut theta, &combined, &mut adam, lr, cfg.betas, cfg.eps)?;
                }
            }
            step += 1;
        }
        lr *= cfg.lr_decay;
    }

    let final_losses = obj.losses(&theta)?;
    Ok(ParetoRun {
        k,
        theta,
        trajectory,
        final_losses,
        normalizer,
        initial,
        critical,
    })
}
