use std::sync::LazyLock;

use super::{clean_start, AttackOutcome, AttackTraceStep, Draft, SemiOnlineAttackConfig};
use crate::data::{Label, LearnerConfig, Stream};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::ogd_step_in_place;
use crate::linalg;
use crate::roots::bisect;

/// Maximizer `u` of `u / (1 + e^u)`, i.e. the root of `(u - 1) e^u = 1`.
static PEAK: LazyLock<f64> =
    LazyLock::new(|| bisect(|u| (u - 1.0) * u.exp() - 1.0, 1.0, 2.0, 1e-15).expect("bracketed"));

/// Smallest `gamma` in `(0, gamma_max]` with `gamma / (1 + exp(a gamma)) = 1 / eta`.
///
/// For `a <= 0` the left side is increasing; for `a > 0` it rises to a single
/// peak at `gamma = PEAK / a` and then decays, so the first crossing lies
/// before the peak. Solved by bisection to `1e-10`.
pub fn solve_gamma_star(a: f64, eta: f64, gamma_max: f64) -> Option<f64> {
    if !(eta > 0.0 && gamma_max > 0.0) {
        return None;
    }
    let target = 1.0 / eta;
    let g = |gamma: f64| gamma / (1.0 + (a * gamma).exp()) - target;
    let hi = if a > 0.0 {
        gamma_max.min(*PEAK / a)
    } else {
        gamma_max
    };
    if g(hi) < 0.0 {
        return None;
    }
    bisect(g, 0.0, hi, 1e-10).filter(|&r| r > 0.0)
}

/// Appends points along `theta_star - theta_tilde_t`, each scaled so that a
/// single OGD step lands on the target when the norm cap allows it and
/// otherwise moves a fixed fraction of the way there.
pub fn simplistic_attack(
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
) -> Result<AttackOutcome> {
    let theta_tilde0 = clean_start(config, clean, atk, defense)?;
    let target = &atk.theta_star.theta;
    let gamma0 = atk.gamma0(theta_tilde0.dist(&atk.theta_star));
    let mut draft = Draft::new(clean, gamma0);
    let mut theta = theta_tilde0.theta;

    for t in 0..atk.budget {
        let dist = linalg::dist(&theta, target);
        if dist < atk.epsilon {
            break;
        }
        let dir = linalg::sub(target, &theta);
        let gamma_star = solve_gamma_star(linalg::dot(&theta, &dir), atk.eta, gamma0);
        let gamma = gamma_star.map_or(gamma0, |g| g.min(gamma0));
        let x = linalg::scale(&dir, gamma);
        let proj = match defense.project_direction(&x, Label::Pos, atk.radius) {
            Ok(p) => p,
            Err(Error::Infeasible) => {
                draft.diagnostic = Some(format!(
                    "step {t}: no feasible scaling of the attack direction"
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let point = proj.apply(&x, Label::Pos);
        if !defense.contains(&point) {
            return Err(Error::Internal(format!(
                "step {t}: projected point is infeasible"
            )));
        }
        ogd_step_in_place(&mut theta, &point, config.eta);
        draft.trace.push(AttackTraceStep {
            t,
            gamma_star,
            gamma,
            c: proj.c,
            flipped: proj.flipped,
            point: point.clone(),
            dist_to_target: dist,
        });
        draft.push(point);
    }
    draft.finish(config, atk, defense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledExample, Model};
    use crate::learner::ogd_run;

    #[test]
    fn gamma_star_closed_form_at_zero_slope() {
        let g = solve_gamma_star(0.0, 1.0, 10.0).unwrap();
        assert!((g - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_star_positive_slope() {
        // mpmath findroot of x/(1+exp(0.25 x)) = 1
        let g = solve_gamma_star(0.25, 1.0, 10.0).unwrap();
        assert!((g - 3.258_106_472_784_339).abs() < 1e-9);
    }

    #[test]
    fn gamma_star_absent_when_curve_stays_low() {
        assert_eq!(solve_gamma_star(5.0, 1.0, 1.0), None);
        // dense grid confirms no crossing on (0, 1]
        assert!((1..=100_000).all(|k| {
            let x = k as f64 * 1e-5;
            x / (1.0 + (5.0 * x).exp()) < 1.0
        }));
    }

    #[test]
    fn gamma_star_picks_first_of_two_roots() {
        // a > 0 with a high enough peak crosses 1/eta twice
        let g = solve_gamma_star(0.1, 1.0, 100.0).unwrap();
        let f = |x: f64| x / (1.0 + (0.1 * x).exp());
        assert!((f(g) - 1.0).abs() < 1e-8);
        assert!((1..1000).all(|k| f(g * k as f64 / 1000.0) < 1.0));
    }

    fn scalar_setup(budget: usize) -> (LearnerConfig, SemiOnlineAttackConfig, DefenseSpec) {
        let cfg = LearnerConfig::from_zero(1.0, 1).unwrap();
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![1.0]), budget, 1e-3, 10.0, 1.0).unwrap();
        (cfg, atk, DefenseSpec::l2_ball(10.0).unwrap())
    }

    #[test]
    fn target_already_reached_inserts_nothing() {
        let cfg = LearnerConfig::new(1.0, Model::new(vec![1.0])).unwrap();
        let (_, atk, ball) = scalar_setup(10);
        let out = simplistic_attack(&cfg, &Stream::new(), &atk, &ball).unwrap();
        assert_eq!(out.inserted_count, 0);
        assert!(out.succeeded);
    }

    #[test]
    fn scalar_trace_matches_hand_oracle() {
        let (cfg, atk, ball) = scalar_setup(100);
        let out = simplistic_attack(&cfg, &Stream::new(), &atk, &ball).unwrap();
        assert_eq!(out.gamma0, 1.0);
        // independent scalar recursion: x = gamma0 (1 - theta), theta += x / (1 + e^{theta x})
        let mut th = 0.0f64;
        for step in &out.trace {
            let x = 1.0 - th;
            assert!((step.point.x[0] - x).abs() < 1e-14);
            assert_eq!(step.point.y, Label::Pos);
            th += x / (1.0 + (th * x).exp());
        }
        assert!((out.trace[0].point.x[0] - 1.0).abs() < 1e-15);
        assert!((out.trace[1].point.x[0] - 0.5).abs() < 1e-15);
        assert!((out.trace[2].dist_to_target - (1.0 - 0.718_911_749_557_100_9)).abs() < 1e-12);
        assert!(out.succeeded);
        // C ~ 3.192 gives ceil(C log 1000) = 23
        assert!(out.inserted_count <= 23);
        assert_eq!(out.inserted_count, 11);
        assert!((out.final_model.theta[0] - th).abs() < 1e-14);
    }

    #[test]
    fn final_model_matches_learner_replay() {
        let cfg = LearnerConfig::from_zero(0.5, 2).unwrap();
        let clean = Stream::clean(vec![
            LabeledExample::new(vec![1.0, 0.5], Label::Pos).unwrap(),
            LabeledExample::new(vec![-0.3, 1.0], Label::Neg).unwrap(),
        ]);
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![-1.0, 2.0]), 50, 1e-6, 1.5, 0.5).unwrap();
        let ball = DefenseSpec::l2_ball(1.5).unwrap();
        let out = simplistic_attack(&cfg, &clean, &atk, &ball).unwrap();
        let replay = ogd_run(&cfg, &out.poisoned_stream, Some(&ball)).unwrap();
        assert_eq!(replay.final_model(), &out.final_model);
        assert!(out.poison_points().iter().all(|p| ball.contains(p)));
        assert_eq!(
            out.poisoned_stream.poison_positions(),
            (2..2 + out.inserted_count).collect::<Vec<_>>()
        );
    }

    #[test]
    fn infeasible_direction_halts() {
        let cfg = LearnerConfig::from_zero(1.0, 2).unwrap();
        let st = crate::defense::CentroidStats::new(vec![0.0, 5.0], vec![0.0, -5.0]).unwrap();
        let def = DefenseSpec::centroid(10.0, 0.5, st).unwrap();
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![1.0, 0.0]), 5, 1e-3, 10.0, 1.0).unwrap();
        let out = simplistic_attack(&cfg, &Stream::new(), &atk, &def).unwrap();
        assert_eq!(out.inserted_count, 0);
        assert!(!out.succeeded);
        assert!(out.diagnostic.is_some());
    }

    #[test]
    fn trace_serialization_is_optional() {
        let (cfg, atk, ball) = scalar_setup(3);
        let out = simplistic_attack(&cfg, &Stream::new(), &atk, &ball).unwrap();
        let slim: serde_json::Value = serde_json::from_str(&out.to_json(false).unwrap()).unwrap();
        assert_eq!(slim["trace"].as_array().unwrap().len(), 0);
        let full: serde_json::Value = serde_json::from_str(&out.to_json(true).unwrap()).unwrap();
        assert_eq!(full["trace"].as_array().unwrap().len(), 3);
    }
}
