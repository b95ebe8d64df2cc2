//! Examples, streams and models shared by every other module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// A binary label in `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// Label of a nonzero real; `None` for zero or NaN.
    pub fn of(v: f64) -> Option<Self> {
        if v > 0.0 {
            Some(Label::Pos)
        } else if v < 0.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "+1",
            Label::Neg => "-1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledExample {
    /// Builds an example, rejecting non-finite features.
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {i} is not finite")));
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(x, y) -> (-x, -y)`: same OGD update, opposite label.
    pub fn flipped(&self) -> Self {
        Self {
            x: linalg::neg(&self.x),
            y: self.y.flip(),
        }
    }

    /// The label-`+1` representative `y * x`.
    pub fn one_sided(&self) -> Vec<f64> {
        match self.y {
            Label::Pos => self.x.clone(),
            Label::Neg => linalg::neg(&self.x),
        }
    }
}

/// An ordered stream of examples with a parallel record of which were inserted by an adversary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    items: Vec<LabeledExample>,
    poison_flags: Vec<bool>,
}

impl Stream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clean(items: Vec<LabeledExample>) -> Self {
        let poison_flags = vec![false; items.len()];
        Self {
            items,
            poison_flags,
        }
    }

    pub fn from_parts(items: Vec<LabeledExample>, poison_flags: Vec<bool>) -> Result<Self> {
        if items.len() != poison_flags.len() {
            return Err(Error::invalid(format!(
                "{} items but {} poison flags",
                items.len(),
                poison_flags.len()
            )));
        }
        Ok(Self {
            items,
            poison_flags,
        })
    }

    pub fn push_clean(&mut self, ex: LabeledExample) {
        self.items.push(ex);
        self.poison_flags.push(false);
    }

    pub fn push_poison(&mut self, ex: LabeledExample) {
        self.items.push(ex);
        self.poison_flags.push(true);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[LabeledExample] {
        &self.items
    }

    pub fn poison_flags(&self) -> &[bool] {
        &self.poison_flags
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LabeledExample, bool)> {
        self.items.iter().zip(self.poison_flags.iter().copied())
    }

    pub fn poison_count(&self) -> usize {
        self.poison_flags.iter().filter(|&&p| p).count()
    }

    /// Positions of adversarial insertions.
    pub fn poison_positions(&self) -> Vec<usize> {
        self.poison_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
            .collect()
    }

    /// Common feature dimension, or `None` for an empty stream.
    pub fn dim(&self) -> Option<usize> {
        self.items.first().map(LabeledExample::dim)
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        self.items.iter().try_for_each(|ex| check_dim(d, ex.dim()))
    }
}

impl FromIterator<LabeledExample> for Stream {
    fn from_iter<I: IntoIterator<Item = LabeledExample>>(iter: I) -> Self {
        Stream::clean(iter.into_iter().collect())
    }
}

/// Linear model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Model {
    pub theta: Vec<f64>,
}

impl Model {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            theta: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.theta)
    }

    pub fn dist(&self, other: &Model) -> f64 {
        linalg::dist(&self.theta, &other.theta)
    }

    pub fn negated(&self) -> Model {
        Model::new(linalg::neg(&self.theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }
}

impl From<Vec<f64>> for Model {
    fn from(theta: Vec<f64>) -> Self {
        Self { theta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub eta: f64,
    pub theta0: Model,
}

impl LearnerConfig {
    pub fn new(eta: f64, theta0: Model) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        Ok(Self { eta, theta0 })
    }

    /// Learner starting from the origin.
    pub fn from_zero(eta: f64, d: usize) -> Result<Self> {
        Self::new(eta, Model::zeros(d))
    }

    pub fn dimension(&self) -> usize {
        self.theta0.dim()
    }
}

/// Models visited by an OGD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `theta_0 ..= theta_T`; only the last model in final-only mode.
    pub models: Vec<Model>,
    /// Whether step `t` passed the defense filter.
    pub accepted: Vec<bool>,
}

impl Trajectory {
    pub fn final_model(&self) -> &Model {
        self.models.last().expect("trajectory always holds theta_0")
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }
}
