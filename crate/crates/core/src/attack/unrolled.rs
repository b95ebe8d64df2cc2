use serde::{Deserialize, Serialize};

use super::greedy::project_feasible;
use super::{clean_start, AttackOutcome, Draft, SemiOnlineAttackConfig};
use crate::data::{Label, LabeledExample, LearnerConfig, Stream};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{sigmoid, softplus};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WkOptions {
    /// Ascent iterations.
    pub iters: usize,
    /// Initial step size.
    pub step: f64,
    pub max_backtracks: usize,
}

impl Default for WkOptions {
    fn default() -> Self {
        Self {
            iters: 100,
            step: 1.0,
            max_backtracks: 20,
        }
    }
}

/// Runs the one-sided updates `theta += eta sigmoid(-theta . z) z`.
fn unroll(theta0: &[f64], points: &[Vec<f64>], eta: f64) -> Vec<Vec<f64>> {
    let mut thetas = Vec::with_capacity(points.len() + 1);
    let mut theta = theta0.to_vec();
    thetas.push(theta.clone());
    for z in points {
        let s = sigmoid(-linalg::dot(&theta, z));
        linalg::axpy(eta * s, z, &mut theta);
        thetas.push(theta.clone());
    }
    thetas
}

fn validation_loss(theta: &[f64], validation: &[LabeledExample]) -> f64 {
    validation
        .iter()
        .map(|ex| softplus(-ex.y.sign() * linalg::dot(theta, &ex.x)))
        .sum()
}

/// Summed validation loss of the model reached by applying the one-sided
/// points `points` (all labeled +1) in order from `theta0`.
pub fn wk_objective(
    theta0: &[f64],
    points: &[Vec<f64>],
    eta: f64,
    validation: &[LabeledExample],
) -> f64 {
    let thetas = unroll(theta0, points, eta);
    validation_loss(thetas.last().expect("nonempty"), validation)
}

/// [`wk_objective`] and its gradient with respect to every point, by reverse
/// accumulation through the unrolled updates.
pub fn wk_gradient(
    theta0: &[f64],
    points: &[Vec<f64>],
    eta: f64,
    validation: &[LabeledExample],
) -> (f64, Vec<Vec<f64>>) {
    let thetas = unroll(theta0, points, eta);
    let last = thetas.last().expect("nonempty");
    let value = validation_loss(last, validation);
    let mut g = vec![0.0; theta0.len()];
    for ex in validation {
        let ys = ex.y.sign();
        let w = -ys * sigmoid(-ys * linalg::dot(last, &ex.x));
        linalg::axpy(w, &ex.x, &mut g);
    }
    let mut grads = vec![Vec::new(); points.len()];
    for i in (0..points.len()).rev() {
        let theta = &thetas[i];
        let z = &points[i];
        let s = sigmoid(-linalg::dot(theta, z));
        let ds = s * (1.0 - s);
        let zg = linalg::dot(z, &g);
        grads[i] = g
            .iter()
            .zip(theta)
            .map(|(gi, ti)| eta * (s * gi - ds * ti * zg))
            .collect();
        linalg::axpy(-eta * ds * zg, z, &mut g);
    }
    (value, grads)
}

/// Jointly optimizes all `K` poison points by projected gradient ascent on the
/// validation loss of the final model.
///
/// Points are kept in one-sided form with label +1 and turned into labeled
/// examples only when emitted. Every iterate is feasible; the best one seen is
/// returned, so the result never scores below the initialization.
pub fn semi_online_wk_attack(
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
    validation: &Stream,
    opts: &WkOptions,
) -> Result<AttackOutcome> {
    if validation.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    validation.check_dim(config.dimension())?;
    let theta_tilde0 = clean_start(config, clean, atk, defense)?;
    let gamma0 = atk.gamma0(theta_tilde0.dist(&atk.theta_star));
    let mut draft = Draft::new(clean, gamma0);
    if atk.budget == 0 {
        return draft.finish(config, atk, defense);
    }
    let cap = atk.radius.min(defense.radius());
    let val = validation.items();
    let theta0 = &theta_tilde0.theta;

    let init = initial_point(
        defense,
        &theta_tilde0.theta,
        &atk.theta_star.theta,
        gamma0,
        atk.radius,
        cap,
    )
    .ok_or_else(|| Error::Attack("no feasible initialization for the unrolled attack".into()))?;
    let mut points = vec![init; atk.budget];
    let mut value = wk_objective(theta0, &points, atk.eta, val);
    let mut step = opts.step;
    for _ in 0..opts.iters {
        let (_, grads) = wk_gradient(theta0, &points, atk.eta, val);
        if grads.iter().all(|g| linalg::norm(g) < 1e-14) {
            break;
        }
        let mut improved = false;
        for _ in 0..opts.max_backtracks {
            let trial: Option<Vec<Vec<f64>>> = points
                .iter()
                .zip(&grads)
                .map(|(z, g)| {
                    project_feasible(defense, &linalg::add(z, &linalg::scale(g, step)), cap)
                })
                .collect();
            if let Some(trial) = trial {
                let v = wk_objective(theta0, &trial, atk.eta, val);
                if v > value {
                    points = trial;
                    value = v;
                    improved = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    for (t, z) in points.iter().enumerate() {
        let point = defense
            .materialize_one_sided(z)
            .ok_or_else(|| Error::Internal(format!("point {t} left the feasible set")))?;
        draft.push(point);
    }
    draft.finish(config, atk, defense)
}

/// The projected simplistic direction, falling back to the nearest feasible
/// point to it and then to the class centroids.
fn initial_point(
    defense: &DefenseSpec,
    theta: &[f64],
    target: &[f64],
    gamma0: f64,
    radius: f64,
    cap: f64,
) -> Option<Vec<f64>> {
    let dir = linalg::scale(&linalg::sub(target, theta), gamma0);
    if !linalg::is_zero(&dir) {
        if let Ok(p) = defense.project_direction(&dir, Label::Pos, radius) {
            return Some(p.apply(&dir, Label::Pos).one_sided());
        }
        if let Some(p) = project_feasible(defense, &dir, cap) {
            return Some(p);
        }
    }
    let stats = defense.stats()?;
    project_feasible(defense, &stats.mu_plus, cap)
        .or_else(|| project_feasible(defense, &linalg::neg(&stats.mu_minus), cap))
}
