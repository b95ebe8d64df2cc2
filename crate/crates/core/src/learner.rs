//! Online gradient descent on the logistic loss.
//!
//! The learner sees one example per step and, when the example passes the
//! defense filter, applies `theta <- theta - eta * grad`. Rejected examples
//! leave the model untouched.

use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledExample, LearnerConfig, Model, Stream, Trajectory};
use crate::defense::DefenseSpec;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, SparseVector};

/// `log(1 + exp(u))` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-u))`.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Signed margin `y * theta^T x`.
pub fn margin(theta: &Model, ex: &LabeledExample) -> Result<f64> {
    check_dim(theta.dim(), ex.dim())?;
    Ok(ex.y.sign() * linalg::dot(&theta.theta, &ex.x))
}

pub fn logistic_loss(theta: &Model, ex: &LabeledExample) -> Result<f64> {
    Ok(softplus(-margin(theta, ex)?))
}

/// Gradient of the logistic loss with respect to `theta`: `-y x sigma(-y theta^T x)`.
pub fn logistic_grad(theta: &Model, ex: &LabeledExample) -> Result<Vec<f64>> {
    let z = margin(theta, ex)?;
    let coef = -ex.y.sign() * sigmoid(-z);
    Ok(ex.x.iter().map(|xi| coef * xi).collect())
}

pub fn ogd_step(theta: &Model, ex: &LabeledExample, eta: f64) -> Result<Model> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    let g = logistic_grad(theta, ex)?;
    Ok(Model::new(
        theta
            .theta
            .iter()
            .zip(&g)
            .map(|(t, gi)| t - eta * gi)
            .collect(),
    ))
}

/// In-place variant of [`ogd_step`] used by the hot loops.
pub(crate) fn ogd_step_in_place(theta: &mut [f64], ex: &LabeledExample, eta: f64) {
    let z = ex.y.sign() * linalg::dot(theta, &ex.x);
    let coef = -ex.y.sign() * sigmoid(-z);
    for (t, xi) in theta.iter_mut().zip(&ex.x) {
        *t -= eta * (coef * xi);
    }
}

/// OGD step that only touches the nonzero coordinates of `x`.
///
/// `on_update(i, old, new)` is called for every touched coordinate, which lets
/// callers maintain running statistics (e.g. the count of nonnegative
/// coordinates) without rescanning the model.
pub fn ogd_step_sparse(
    theta: &mut [f64],
    x: &SparseVector,
    y: Label,
    eta: f64,
    mut on_update: impl FnMut(usize, f64, f64),
) {
    debug_assert_eq!(theta.len(), x.dim());
    let z = y.sign() * x.dot_dense(theta);
    let coef = -y.sign() * sigmoid(-z);
    for (i, xi) in x.iter() {
        let old = theta[i];
        theta[i] = old - eta * (coef * xi);
        on_update(i, old, theta[i]);
    }
}

/// How much of the trajectory [`ogd_run_with`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TrajectoryMode {
    #[default]
    Full,
    /// Keep only the final model; `accepted` is still recorded.
    FinalOnly,
}

/// Runs OGD over `stream`, skipping examples the defense rejects.
pub fn ogd_run(
    config: &LearnerConfig,
    stream: &Stream,
    defense: Option<&DefenseSpec>,
) -> Result<Trajectory> {
    ogd_run_with(config, stream, defense, TrajectoryMode::Full)
}

pub fn ogd_run_with(
    config: &LearnerConfig,
    stream: &Stream,
    defense: Option<&DefenseSpec>,
    mode: TrajectoryMode,
) -> Result<Trajectory> {
    let d = config.dimension();
    stream.check_dim(d)?;
    if let Some(def) = defense {
        def.check_dim(d)?;
    }
    let mut theta = config.theta0.theta.clone();
    let mut models = Vec::with_capacity(match mode {
        TrajectoryMode::Full => stream.len() + 1,
        TrajectoryMode::FinalOnly => 1,
    });
    if mode == TrajectoryMode::Full {
        models.push(Model::new(theta.clone()));
    }
    let mut accepted = Vec::with_capacity(stream.len());
    for ex in stream.items() {
        let ok = defense.is_none_or(|def| def.contains(ex));
        if ok {
            ogd_step_in_place(&mut theta, ex, config.eta);
        }
        accepted.push(ok);
        if mode == TrajectoryMode::Full {
            models.push(Model::new(theta.clone()));
        }
    }
    if mode == TrajectoryMode::FinalOnly {
        models.push(Model::new(theta));
    }
    Ok(Trajectory { models, accepted })
}

/// Final model of a filtered OGD pass.
pub fn ogd_final(
    config: &LearnerConfig,
    stream: &Stream,
    defense: Option<&DefenseSpec>,
) -> Result<Model> {
    let t = ogd_run_with(config, stream, defense, TrajectoryMode::FinalOnly)?;
    Ok(t.models
        .into_iter()
        .next_back()
        .expect("final model present"))
}

/// Outcome of `sgn(theta^T x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Label(Label),
    Abstain,
}

pub fn predict(theta: &Model, x: &[f64]) -> Result<Prediction> {
    check_dim(theta.dim(), x.len())?;
    Ok(match Label::of(linalg::dot(&theta.theta, x)) {
        Some(l) => Prediction::Label(l),
        None => Prediction::Abstain,
    })
}

/// A prediction counts as correct only when `y theta^T x > 0`; abstaining is an error.
pub fn is_correct(theta: &Model, ex: &LabeledExample) -> Result<bool> {
    Ok(margin(theta, ex)? > 0.0)
}

/// Fraction of examples misclassified by `theta` (abstentions count as errors).
pub fn error_rate(theta: &Model, examples: &[LabeledExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::UndefinedMetric("error rate of an empty set"));
    }
    let mut wrong = 0usize;
    for ex in examples {
        if !is_correct(theta, ex)? {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / examples.len() as f64)
}

pub fn cosine_similarity(a: &Model, b: &Model) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedMetric(
            "cosine similarity with a zero vector",
        ));
    }
    Ok((linalg::dot(&a.theta, &b.theta) / (na * nb)).clamp(-1.0, 1.0))
}
