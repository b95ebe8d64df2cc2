//! Online data-poisoning attacks against an online-gradient-descent logistic
//! learner, feasible-set defenses, easy/hard regime certificates and the
//! experiment harness that sweeps them.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod regime;
pub mod roots;
pub mod tasks;
pub mod verify;

pub use attack::{AttackKind, AttackOptions, AttackOutcome, SemiOnlineAttackConfig};
pub use data::{Label, LabeledExample, LearnerConfig, Model, Stream, Trajectory};
pub use defense::{
    CentroidStats, DefenseKind, DefenseSpec, FeasibleSegment, LabelingOracle, TauMode,
};
pub use error::{Error, Result};
pub use harness::{FullyOnlineSweep, SemiOnlineSweep};
pub use learner::TrajectoryMode;
pub use regime::{RegimeKind, RegimeVerdict};
pub use tasks::DatasetBundle;
