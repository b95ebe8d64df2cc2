use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{basis_draws, gen_sign_task, unit_entry};
use crate::attack::{fully_online_drive, Schedule, SemiOnlineAttackConfig, Subroutine};
use crate::data::{Label, LabeledExample, LearnerConfig, Model};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{ogd_step_sparse, TrajectoryMode};
use crate::linalg::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeBoundOutcome {
    pub mistakes: usize,
    pub budget: usize,
    pub clean_count: usize,
    pub online_error: f64,
    pub final_theta: f64,
}

impl MistakeBoundOutcome {
    /// Misclassified clean points never exceed the poison count plus the
    /// possible mistake of the zero initial model.
    pub fn within_bound(&self) -> bool {
        self.mistakes <= self.budget + 1
    }
}

/// One poison point right after each of the first `budget` clean points.
pub fn mistake_positions_tight(budget: usize) -> BTreeSet<usize> {
    (0..budget).map(|k| 2 * k + 1).collect()
}

/// `budget` slots drawn uniformly without replacement from `0..horizon`.
pub fn mistake_positions_random(
    horizon: usize,
    budget: usize,
    seed: u64,
) -> Result<BTreeSet<usize>> {
    if budget > horizon {
        return Err(Error::invalid(format!(
            "budget {budget} exceeds horizon {horizon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, horizon, budget)
        .into_iter()
        .collect())
}

/// The sign task under an L2 ball of radius 1 with `eta = 1` and `theta_0 = 0`,
/// the attacker emitting `(-1, +1)` at every slot in `positions`.
pub fn run_mistake_bound(
    clean_count: usize,
    positions: &BTreeSet<usize>,
    seed: u64,
) -> Result<MistakeBoundOutcome> {
    let horizon = clean_count + positions.len();
    let schedule = Schedule::new(horizon, positions.clone())?;
    let config = LearnerConfig::from_zero(1.0, 1)?;
    let defense = DefenseSpec::l2_ball(1.0)?;
    // the target is unused by the custom attacker
    let atk = SemiOnlineAttackConfig::new(Model::new(vec![-1.0]), 1, 1e-3, 1.0, 1.0)?;
    let mut sub = Subroutine::Custom(Box::new(|_, _| {
        Some(LabeledExample {
            x: vec![-1.0],
            y: Label::Pos,
        })
    }));
    let out = fully_online_drive(
        &config,
        gen_sign_task(clean_count, seed).items().to_vec(),
        &schedule,
        &mut sub,
        &atk,
        &defense,
        TrajectoryMode::FinalOnly,
    )?;
    Ok(MistakeBoundOutcome {
        mistakes: out.mistakes,
        budget: positions.len(),
        clean_count: out.clean_count,
        online_error: out.online_error,
        final_theta: out.final_model().theta[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedErrorConfig {
    pub d: usize,
    /// Support size of each poison point.
    pub m: usize,
    pub clean_count: usize,
    /// Clean points per poison point.
    pub cycle: usize,
    pub seed: u64,
}

impl Default for ForcedErrorConfig {
    fn default() -> Self {
        Self {
            d: 10_000,
            m: 1_000,
            clean_count: 1_000_000,
            cycle: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedErrorOutcome {
    pub mistakes: usize,
    pub clean_count: usize,
    pub online_error: f64,
    /// Poison slots at which the attacker had a full support.
    pub nonzero_poison: usize,
    /// Poison slots at which it emitted the zero vector.
    pub zero_poison: usize,
}

fn track(nonneg: &mut usize, old: f64, new: f64) {
    match (old >= 0.0, new >= 0.0) {
        (true, false) => *nonneg -= 1,
        (false, true) => *nonneg += 1,
        _ => {}
    }
}

/// The basis task with the attacker that pushes `m` nonnegative coordinates
/// down, one poison point after every `cycle` clean points, under an L2 ball
/// of radius 1 with `eta = 1`.
///
/// Runs on sparse updates and keeps a running count of nonnegative
/// coordinates, so the support is only searched when it can be filled.
pub fn run_forced_error(cfg: &ForcedErrorConfig) -> Result<ForcedErrorOutcome> {
    if cfg.d == 0 || cfg.m == 0 || cfg.m > cfg.d || cfg.cycle == 0 {
        return Err(Error::invalid(format!(
            "forced-error run needs 1 <= m <= d and cycle >= 1 (d={}, m={}, cycle={})",
            cfg.d, cfg.m, cfg.cycle
        )));
    }
    let (d, m) = (cfg.d, cfg.m);
    let eta = 1.0;
    let v = unit_entry(m);
    let mut theta = vec![0.0; d];
    let mut nonneg = d;
    let mut out = ForcedErrorOutcome {
        mistakes: 0,
        clean_count: cfg.clean_count,
        online_error: 0.0,
        nonzero_poison: 0,
        zero_poison: 0,
    };
    for (k, e) in basis_draws(d, cfg.seed).take(cfg.clean_count).enumerate() {
        if theta[e.index] <= 0.0 {
            out.mistakes += 1;
        }
        ogd_step_sparse(&mut theta, &e.to_sparse(d), e.sign, eta, |_, o, n| {
            track(&mut nonneg, o, n)
        });
        if k % cfg.cycle == cfg.cycle - 1 {
            if nonneg >= m {
                let support: Vec<usize> = (0..d).filter(|&j| theta[j] >= 0.0).take(m).collect();
                let x = SparseVector::new(d, support, vec![-v; m]).expect("sorted support");
                ogd_step_sparse(&mut theta, &x, Label::Pos, eta, |_, o, n| {
                    track(&mut nonneg, o, n)
                });
                out.nonzero_poison += 1;
            } else {
                out.zero_poison += 1;
            }
        }
    }
    out.online_error = out.mistakes as f64 / cfg.clean_count.max(1) as f64;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{forced_error_point, gen_basis_task};

    #[test]
    fn tight_attacker_reaches_the_bound() {
        let out = run_mistake_bound(1000, &mistake_positions_tight(100), 1).unwrap();
        assert!(out.within_bound());
        // every poisoned model misclassifies the next clean point
        assert!(out.mistakes >= 100, "{}", out.mistakes);
    }

    #[test]
    fn random_attackers_stay_within_bound() {
        for seed in 0..50 {
            let pos = mistake_positions_random(1100, 100, seed).unwrap();
            assert_eq!(pos.len(), 100);
            let out = run_mistake_bound(1000, &pos, seed).unwrap();
            assert!(
                out.within_bound(),
                "seed {seed}: {} > {}",
                out.mistakes,
                out.budget + 1
            );
        }
    }

    #[test]
    fn no_poison_only_first_point_can_fail() {
        let out = run_mistake_bound(500, &BTreeSet::new(), 4).unwrap();
        assert!(out.mistakes <= 1);
    }

    #[test]
    fn sparse_runner_matches_generic_driver() {
        let cfg = ForcedErrorConfig {
            d: 60,
            m: 8,
            clean_count: 3000,
            cycle: 10,
            seed: 11,
        };
        let fast = run_forced_error(&cfg).unwrap();

        let clean: Vec<LabeledExample> = gen_basis_task(60, 3000, 11)
            .unwrap()
            .into_iter()
            .map(|e| e.to_dense(60))
            .collect();
        let slots: BTreeSet<usize> = (0..300).map(|k| 11 * k + 10).collect();
        let schedule = Schedule::new(3300, slots).unwrap();
        let config = LearnerConfig::from_zero(1.0, 60).unwrap();
        let ball = DefenseSpec::l2_ball(1.0).unwrap();
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![-1.0; 60]), 1, 1e-3, 1.0, 1.0).unwrap();
        let mut sub = Subroutine::Custom(Box::new(|_, th: &Model| {
            Some(forced_error_point(th, 8).unwrap())
        }));
        let slow = fully_online_drive(
            &config,
            clean,
            &schedule,
            &mut sub,
            &atk,
            &ball,
            TrajectoryMode::FinalOnly,
        )
        .unwrap();
        assert_eq!(fast.mistakes, slow.mistakes);
        assert_eq!(fast.online_error, slow.online_error);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = ForcedErrorConfig {
            m: 20,
            d: 10,
            ..ForcedErrorConfig::default()
        };
        assert!(run_forced_error(&cfg).is_err());
    }
}
