//! Semi-online poisoning attacks and the fully-online wrapper.
//!
//! Every semi-online attack learns `theta_tilde_0` from the clean stream
//! (filtered by the defense, exactly as the learner would), then appends its
//! poison to the end of the stream. Inserted points are always feasible.

mod concentrated;
mod fully_online;
mod greedy;
mod simplistic;
mod unrolled;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledExample, LearnerConfig, Model, Stream};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{ogd_final, ogd_step_in_place};

pub use concentrated::concentrated_attack;
pub use fully_online::{fully_online_drive, FullyOnlineOutcome, Schedule, Subroutine};
pub use greedy::{greedy_attack, GreedyOptions};
pub use simplistic::{simplistic_attack, solve_gamma_star};
pub use unrolled::{semi_online_wk_attack, wk_gradient, wk_objective, WkOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiOnlineAttackConfig {
    pub theta_star: Model,
    /// Maximum number of inserted examples `K`.
    pub budget: usize,
    pub epsilon: f64,
    /// Norm cap `R` of attack points.
    pub radius: f64,
    /// The attacker's copy of the learning rate.
    pub eta: f64,
    lambda: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SemiOnlineAttackConfig {
    pub fn new(
        theta_star: Model,
        budget: usize,
        epsilon: f64,
        radius: f64,
        eta: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid(format!(
                "attack radius must be positive, got {radius}"
            )));
        }
        if !(eta > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        let lambda = theta_star.norm();
        Ok(Self {
            theta_star,
            budget,
            epsilon,
            radius,
            eta,
            lambda,
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// `||theta_star||`
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `min(R / ||theta_tilde_0 - theta_star||, 1 / eta)`
    pub fn gamma0(&self, dist0: f64) -> f64 {
        if dist0 > 0.0 {
            (self.radius / dist0).min(1.0 / self.eta)
        } else {
            1.0 / self.eta
        }
    }
}

/// One iteration of an attack that builds its poison point by point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTraceStep {
    pub t: usize,
    /// Root of the one-step equation, when it exists below `gamma0`.
    pub gamma_star: Option<f64>,
    pub gamma: f64,
    /// Projection scale.
    pub c: f64,
    pub flipped: bool,
    pub point: LabeledExample,
    /// `||theta_tilde_t - theta_star||` before this point is applied.
    pub dist_to_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub poisoned_stream: Stream,
    pub inserted_count: usize,
    pub final_model: Model,
    /// `||final_model - theta_star|| <= epsilon`
    pub succeeded: bool,
    pub trace: Vec<AttackTraceStep>,
    pub gamma0: f64,
    /// Why the attack stopped early, if it did.
    pub diagnostic: Option<String>,
}

impl AttackOutcome {
    /// JSON form; the per-step trace is dropped unless requested.
    pub fn to_json(&self, include_trace: bool) -> Result<String> {
        if include_trace {
            Ok(serde_json::to_string(self)?)
        } else {
            let mut slim = self.clone();
            slim.trace.clear();
            Ok(serde_json::to_string(&slim)?)
        }
    }

    /// The inserted examples, in stream order.
    pub fn poison_points(&self) -> Vec<&LabeledExample> {
        self.poisoned_stream
            .iter()
            .filter_map(|(ex, p)| p.then_some(ex))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Simplistic,
    Greedy,
    SemiOnlineWk,
    Concentrated,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Simplistic,
        AttackKind::Greedy,
        AttackKind::SemiOnlineWk,
        AttackKind::Concentrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Simplistic => "simplistic",
            AttackKind::Greedy => "greedy",
            AttackKind::SemiOnlineWk => "semi_online_wk",
            AttackKind::Concentrated => "concentrated",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "simplistic" | "straight" => Ok(AttackKind::Simplistic),
            "greedy" => Ok(AttackKind::Greedy),
            "semi_online_wk" | "wk" => Ok(AttackKind::SemiOnlineWk),
            "concentrated" => Ok(AttackKind::Concentrated),
            other => Err(Error::invalid(format!("unknown attack '{other}'"))),
        }
    }
}

/// Options shared by [`run_attack`] for the attacks that need more than the config.
#[derive(Debug, Clone, Default)]
pub struct AttackOptions {
    pub greedy: GreedyOptions,
    pub wk: WkOptions,
    /// Validation set for Semi-Online-WK.
    pub validation: Stream,
    /// Random orderings tried by the Concentrated attack.
    pub random_orders: usize,
}

/// Dispatches to the attack named by `kind`.
pub fn run_attack(
    kind: AttackKind,
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
    opts: &AttackOptions,
) -> Result<AttackOutcome> {
    match kind {
        AttackKind::Simplistic => simplistic_attack(config, clean, atk, defense),
        AttackKind::Greedy => greedy_attack(config, clean, atk, defense, &opts.greedy),
        AttackKind::SemiOnlineWk => {
            semi_online_wk_attack(config, clean, atk, defense, &opts.validation, &opts.wk)
        }
        AttackKind::Concentrated => {
            concentrated_attack(config, clean, atk, defense, opts.random_orders.max(1))
        }
    }
}

/// Validates inputs and learns `theta_tilde_0` on the filtered clean stream.
fn clean_start(
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
) -> Result<Model> {
    let d = config.dimension();
    crate::error::check_dim(d, atk.theta_star.dim())?;
    defense.check_dim(d)?;
    ogd_final(config, clean, None)
}

/// Semi-online learner: the defense constrains inserted points only, so clean
/// examples always update the model.
fn replay(config: &LearnerConfig, stream: &Stream, defense: &DefenseSpec) -> Result<Model> {
    let d = config.dimension();
    stream.check_dim(d)?;
    let mut theta = config.theta0.theta.clone();
    for (ex, poison) in stream.iter() {
        if !poison || defense.contains(ex) {
            ogd_step_in_place(&mut theta, ex, config.eta);
        }
    }
    Ok(Model::new(theta))
}

/// An attack's poisoned stream before the learner is replayed over it.
struct Draft {
    stream: Stream,
    inserted_count: usize,
    trace: Vec<AttackTraceStep>,
    gamma0: f64,
    diagnostic: Option<String>,
}

impl Draft {
    fn new(clean: &Stream, gamma0: f64) -> Self {
        Self {
            stream: clean.clone(),
            inserted_count: 0,
            trace: Vec::new(),
            gamma0,
            diagnostic: None,
        }
    }

    fn push(&mut self, ex: LabeledExample) {
        self.stream.push_poison(ex);
        self.inserted_count += 1;
    }

    /// Replays the learner over the poisoned stream and packages the result.
    fn finish(
        self,
        config: &LearnerConfig,
        atk: &SemiOnlineAttackConfig,
        defense: &DefenseSpec,
    ) -> Result<AttackOutcome> {
        let final_model = replay(config, &self.stream, defense)?;
        let succeeded = final_model.dist(&atk.theta_star) <= atk.epsilon;
        Ok(AttackOutcome {
            poisoned_stream: self.stream,
            inserted_count: self.inserted_count,
            final_model,
            succeeded,
            trace: self.trace,
            gamma0: self.gamma0,
            diagnostic: self.diagnostic,
        })
    }
}
