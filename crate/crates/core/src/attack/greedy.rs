use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{clean_start, AttackOutcome, AttackTraceStep, Draft, SemiOnlineAttackConfig};
use crate::data::{Label, LearnerConfig, Stream};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{ogd_step_in_place, sigmoid};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyOptions {
    /// Projected-gradient iterations per start.
    pub iters: usize,
    /// Random feasible starts in addition to the structured ones.
    pub random_starts: usize,
    pub max_backtracks: usize,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            iters: 40,
            random_starts: 4,
            max_backtracks: 30,
        }
    }
}

/// `||theta + eta s z - target||^2` with `s = sigmoid(-theta . z)`, `z = y x`.
fn objective(theta: &[f64], target: &[f64], eta: f64, z: &[f64]) -> f64 {
    let s = sigmoid(-linalg::dot(theta, z));
    theta
        .iter()
        .zip(target)
        .zip(z)
        .map(|((t, g), zi)| {
            let v = t + eta * s * zi - g;
            v * v
        })
        .sum()
}

fn gradient(theta: &[f64], target: &[f64], eta: f64, z: &[f64]) -> Vec<f64> {
    let s = sigmoid(-linalg::dot(theta, z));
    let v: Vec<f64> = theta
        .iter()
        .zip(target)
        .zip(z)
        .map(|((t, g), zi)| t + eta * s * zi - g)
        .collect();
    let zv = linalg::dot(z, &v);
    v.iter()
        .zip(theta)
        .map(|(vi, ti)| 2.0 * eta * (s * vi - s * (1.0 - s) * zv * ti))
        .collect()
}

/// Projects a one-sided point into the defense and under the attack's norm cap.
pub(super) fn project_feasible(defense: &DefenseSpec, z: &[f64], cap: f64) -> Option<Vec<f64>> {
    let mut p = defense.project_one_sided(z)?;
    let n = linalg::norm(&p);
    if n > cap {
        p = linalg::scale(&p, cap / n);
    }
    defense.one_sided_contains(&p).then_some(p)
}

fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = linalg::norm(&g);
    if n == 0.0 {
        return vec![0.0; d];
    }
    let u: f64 = rng.random();
    linalg::scale(&g, r * u.powf(1.0 / d as f64) / n)
}

/// Per step, approximately minimizes the post-update distance to the target
/// over feasible examples by multi-start projected gradient descent.
///
/// The start set always contains the simplistic attack's candidate, so each
/// step is at least as good as that attack's step from the same model.
pub fn greedy_attack(
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
    opts: &GreedyOptions,
) -> Result<AttackOutcome> {
    let theta_tilde0 = clean_start(config, clean, atk, defense)?;
    let target = &atk.theta_star.theta;
    let gamma0 = atk.gamma0(theta_tilde0.dist(&atk.theta_star));
    let cap = atk.radius.min(defense.radius());
    let d = target.len();
    let mut rng = ChaCha8Rng::seed_from_u64(atk.seed);
    let mut draft = Draft::new(clean, gamma0);
    let mut theta = theta_tilde0.theta;

    for t in 0..atk.budget {
        let dist = linalg::dist(&theta, target);
        if dist < atk.epsilon {
            break;
        }
        let dir = linalg::sub(target, &theta);
        let mut starts: Vec<Vec<f64>> = Vec::new();
        let simple = linalg::scale(&dir, gamma0);
        if let Ok(p) = defense.project_direction(&simple, Label::Pos, atk.radius) {
            starts.push(p.apply(&simple, Label::Pos).one_sided());
        }
        if let Some(stats) = defense.stats() {
            starts.extend(project_feasible(defense, &stats.mu_plus, cap));
            starts.extend(project_feasible(
                defense,
                &linalg::neg(&stats.mu_minus),
                cap,
            ));
        }
        for _ in 0..opts.random_starts {
            let z = random_in_ball(&mut rng, d, cap);
            starts.extend(project_feasible(defense, &z, cap));
        }

        let current = dist * dist;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            let (f, z) = descend(&theta, target, atk.eta, start, defense, cap, opts);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, z));
            }
        }
        let Some((f, z)) = best.filter(|(f, _)| *f < current) else {
            draft.diagnostic = Some(format!(
                "step {t}: no feasible example reduces the distance"
            ));
            break;
        };
        let Some(point) = defense.materialize_one_sided(&z) else {
            return Err(Error::Internal(format!(
                "step {t}: greedy candidate is infeasible"
            )));
        };
        ogd_step_in_place(&mut theta, &point, config.eta);
        draft.trace.push(AttackTraceStep {
            t,
            gamma_star: None,
            gamma: f.sqrt(),
            c: 1.0,
            flipped: point.y == Label::Neg,
            point: point.clone(),
            dist_to_target: dist,
        });
        draft.push(point);
    }
    draft.finish(config, atk, defense)
}

fn descend(
    theta: &[f64],
    target: &[f64],
    eta: f64,
    start: Vec<f64>,
    defense: &DefenseSpec,
    cap: f64,
    opts: &GreedyOptions,
) -> (f64, Vec<f64>) {
    let mut z = start;
    let mut f = objective(theta, target, eta, &z);
    let mut lr = 1.0;
    for _ in 0..opts.iters {
        let g = gradient(theta, target, eta, &z);
        let gn = linalg::norm(&g);
        if gn < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..opts.max_backtracks {
            let trial = linalg::sub(&z, &linalg::scale(&g, lr));
            if let Some(p) = project_feasible(defense, &trial, cap) {
                let fp = objective(theta, target, eta, &p);
                if fp < f {
                    z = p;
                    f = fp;
                    improved = true;
                    lr *= 2.0;
                    break;
                }
            }
            lr *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (f, z)
}
