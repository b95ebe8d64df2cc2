use std::collections::BTreeSet;
use std::fmt;

use super::{
    greedy_attack, semi_online_wk_attack, simplistic_attack, GreedyOptions, SemiOnlineAttackConfig,
    WkOptions,
};
use crate::data::{LabeledExample, LearnerConfig, Model, Stream, Trajectory};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{is_correct, ogd_step_in_place, TrajectoryMode};

/// `(slot, theta_t) -> point`; `None` skips the slot.
pub type PointFn<'a> = Box<dyn FnMut(usize, &Model) -> Option<LabeledExample> + Send + 'a>;

/// Produces the poison point for one attacker-controlled slot.
pub enum Subroutine<'a> {
    Simplistic,
    Greedy(GreedyOptions),
    SemiOnlineWk {
        validation: &'a Stream,
        opts: WkOptions,
    },
    /// Caller-supplied points.
    Custom(PointFn<'a>),
}

impl fmt::Debug for Subroutine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subroutine::Simplistic => f.write_str("Simplistic"),
            Subroutine::Greedy(o) => f.debug_tuple("Greedy").field(o).finish(),
            Subroutine::SemiOnlineWk { opts, .. } => {
                f.debug_struct("SemiOnlineWk").field("opts", opts).finish()
            }
            Subroutine::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Subroutine<'_> {
    /// One semi-online attack from `theta_t` with an empty clean stream and budget 1.
    fn next_point(
        &mut self,
        t: usize,
        config: &LearnerConfig,
        theta_t: &Model,
        atk: &SemiOnlineAttackConfig,
        defense: &DefenseSpec,
    ) -> Result<Option<LabeledExample>> {
        let local = LearnerConfig {
            eta: config.eta,
            theta0: theta_t.clone(),
        };
        let one = atk.clone().with_budget(1);
        let empty = Stream::new();
        let out = match self {
            Subroutine::Custom(f) => return Ok(f(t, theta_t)),
            Subroutine::Simplistic => simplistic_attack(&local, &empty, &one, defense),
            Subroutine::Greedy(o) => greedy_attack(&local, &empty, &one, defense, o),
            Subroutine::SemiOnlineWk { validation, opts } => {
                semi_online_wk_attack(&local, &empty, &one, defense, validation, opts)
            }
        };
        match out {
            Ok(o) => Ok(o.poison_points().first().map(|p| (*p).clone())),
            Err(Error::Infeasible | Error::Attack(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Which of the `horizon` slots belong to the attacker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub horizon: usize,
    pub poison_slots: BTreeSet<usize>,
}

impl Schedule {
    pub fn new(horizon: usize, poison_slots: BTreeSet<usize>) -> Result<Self> {
        if let Some(&last) = poison_slots.last() {
            if last >= horizon {
                return Err(Error::invalid(format!(
                    "poison slot {last} is outside the horizon {horizon}"
                )));
            }
        }
        Ok(Self {
            horizon,
            poison_slots,
        })
    }

    pub fn clean_count(&self) -> usize {
        self.horizon - self.poison_slots.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullyOnlineOutcome {
    /// Emitted examples; skipped slots contribute nothing.
    pub stream: Stream,
    /// Slot index of every stream entry.
    pub slots: Vec<usize>,
    /// Models before and after each stream entry (final only in `FinalOnly` mode).
    pub trajectory: Trajectory,
    /// Mistakes of `theta_t` on the clean example at each clean slot, over the clean slot count.
    pub online_error: f64,
    pub mistakes: usize,
    pub clean_count: usize,
    /// Attacker slots for which the subroutine produced no feasible point.
    pub skipped: Vec<usize>,
}

impl FullyOnlineOutcome {
    pub fn final_model(&self) -> &Model {
        self.trajectory.final_model()
    }
}

/// Interleaves clean draws with attacker points and runs filtered OGD.
///
/// At an attacker slot the subroutine sees only the current model; clean
/// examples are pulled from `clean_source` one at a time, so nothing about
/// the future is revealed to it. Each clean example is scored by the model
/// in place before it arrives.
pub fn fully_online_drive(
    config: &LearnerConfig,
    clean_source: impl IntoIterator<Item = LabeledExample>,
    schedule: &Schedule,
    subroutine: &mut Subroutine<'_>,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
    mode: TrajectoryMode,
) -> Result<FullyOnlineOutcome> {
    let d = config.dimension();
    defense.check_dim(d)?;
    crate::error::check_dim(d, atk.theta_star.dim())?;
    if schedule.clean_count() == 0 {
        return Err(Error::UndefinedMetric("online error with no clean slots"));
    }
    let mut clean = clean_source.into_iter();
    let mut theta = config.theta0.theta.clone();
    let mut stream = Stream::new();
    let mut slots = Vec::with_capacity(schedule.horizon);
    let mut models = Vec::new();
    if mode == TrajectoryMode::Full {
        models.push(Model::new(theta.clone()));
    }
    let mut accepted = Vec::with_capacity(schedule.horizon);
    let mut skipped = Vec::new();
    let mut mistakes = 0;

    for t in 0..schedule.horizon {
        let ex = if schedule.poison_slots.contains(&t) {
            let current = Model::new(theta.clone());
            match subroutine.next_point(t, config, &current, atk, defense)? {
                Some(p) if defense.contains(&p) => {
                    crate::error::check_dim(d, p.dim())?;
                    stream.push_poison(p.clone());
                    p
                }
                _ => {
                    skipped.push(t);
                    continue;
                }
            }
        } else {
            let ex = clean
                .next()
                .ok_or_else(|| Error::invalid(format!("clean source exhausted at slot {t}")))?;
            crate::error::check_dim(d, ex.dim())?;
            if !is_correct(&Model::new(theta.clone()), &ex)? {
                mistakes += 1;
            }
            stream.push_clean(ex.clone());
            ex
        };
        let ok = defense.contains(&ex);
        if ok {
            ogd_step_in_place(&mut theta, &ex, config.eta);
        }
        accepted.push(ok);
        slots.push(t);
        if mode == TrajectoryMode::Full {
            models.push(Model::new(theta.clone()));
        }
    }
    if mode == TrajectoryMode::FinalOnly {
        models.push(Model::new(theta));
    }
    let clean_count = schedule.clean_count();
    Ok(FullyOnlineOutcome {
        stream,
        slots,
        trajectory: Trajectory { models, accepted },
        online_error: mistakes as f64 / clean_count as f64,
        mistakes,
        clean_count,
        skipped,
    })
}
