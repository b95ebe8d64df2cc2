//! Synthetic tasks, dataset ingestion and the adversarial stream runners.

mod adversarial;
mod dataset;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledExample, Model, Stream};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseVector};

pub use adversarial::{
    mistake_positions_random, mistake_positions_tight, run_forced_error, run_mistake_bound,
    ForcedErrorConfig, ForcedErrorOutcome, MistakeBoundOutcome,
};
pub use dataset::{
    load_csv_dataset, normalize, split_and_normalize, write_csv_dataset, CsvOptions, DatasetBundle,
    LabelColumn, NormScope, Normalization, NormalizationRecord, SplitSizes,
};

/// What a synthetic task looks like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    /// `x` uniform over `{[1], [-1]}` with `y = sign(x)`.
    SignTask,
    /// Signed basis vectors in dimension `d`; the attacker touches `m`
    /// coordinates and inserts one point per `cycle` clean points.
    BasisTask { d: usize, m: usize, cycle: usize },
    /// Two isotropic Gaussians at `±(mean_sep / 2) v`.
    Gaussian { d: usize, mean_sep: f64, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub kind: TaskKind,
    /// Number of clean examples.
    pub horizon: usize,
    pub seed: u64,
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TaskKind::SignTask => {}
            TaskKind::BasisTask { d, m, cycle } => {
                if d == 0 || m == 0 || m > d || cycle == 0 {
                    return Err(Error::invalid(format!(
                        "basis task needs 1 <= m <= d and cycle >= 1 (d={d}, m={m}, cycle={cycle})"
                    )));
                }
            }
            TaskKind::Gaussian { d, mean_sep, noise } => {
                if d == 0 || !(mean_sep >= 0.0) || !(noise > 0.0) {
                    return Err(Error::invalid(format!(
                        "gaussian task needs d >= 1, mean_sep >= 0, noise > 0 (d={d}, mean_sep={mean_sep}, noise={noise})"
                    )));
                }
            }
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        Ok(())
    }
}

fn coin(rng: &mut ChaCha8Rng) -> Label {
    if rng.random::<bool>() {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// `t` examples `([±1], ±1)`.
pub fn gen_sign_task(t: usize, seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..t)
        .map(|_| {
            let y = coin(&mut rng);
            LabeledExample {
                x: vec![y.sign()],
                y,
            }
        })
        .collect()
}

/// A signed basis vector `sign * e_index` labeled by its sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisExample {
    pub index: usize,
    pub sign: Label,
}

impl BasisExample {
    pub fn to_sparse(self, d: usize) -> SparseVector {
        SparseVector::new(d, vec![self.index], vec![self.sign.sign()]).expect("index below d")
    }

    pub fn to_dense(self, d: usize) -> LabeledExample {
        let mut x = vec![0.0; d];
        x[self.index] = self.sign.sign();
        LabeledExample { x, y: self.sign }
    }
}

/// `n` draws uniform over `{±e_1, ..., ±e_d}`.
pub fn gen_basis_task(d: usize, n: usize, seed: u64) -> Result<Vec<BasisExample>> {
    if d == 0 {
        return Err(Error::invalid("basis task needs d >= 1"));
    }
    Ok(basis_draws(d, seed).take(n).collect())
}

/// Endless seeded stream of basis draws; [`gen_basis_task`] takes a prefix.
pub(crate) fn basis_draws(d: usize, seed: u64) -> impl Iterator<Item = BasisExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || BasisExample {
        index: rng.random_range(0..d),
        sign: coin(&mut rng),
    })
}

/// `1 / sqrt(m)`, rounded down until `m` copies have computed norm at most 1.
pub(crate) fn unit_entry(m: usize) -> f64 {
    let mut v = 1.0 / (m as f64).sqrt();
    while linalg::norm(&vec![v; m]) > 1.0 {
        v = v.next_down();
    }
    v
}

/// Support of the attacker's point: the first `m` coordinates with
/// `theta_j >= 0`, or `None` when there are fewer than `m`.
pub fn forced_error_support(theta: &[f64], m: usize) -> Option<Vec<usize>> {
    let idx: Vec<usize> = theta
        .iter()
        .enumerate()
        .filter(|(_, t)| **t >= 0.0)
        .map(|(i, _)| i)
        .take(m)
        .collect();
    (m > 0 && idx.len() == m).then_some(idx)
}

/// `-1/sqrt(m)` on the first `m` nonnegative coordinates of `theta`, label +1;
/// the zero vector when fewer than `m` coordinates are nonnegative.
pub fn forced_error_point(theta: &Model, m: usize) -> Result<LabeledExample> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let mut x = vec![0.0; theta.dim()];
    if let Some(idx) = forced_error_support(&theta.theta, m) {
        let v = unit_entry(m);
        for i in idx {
            x[i] = -v;
        }
    }
    Ok(LabeledExample { x, y: Label::Pos })
}

/// Raw two-Gaussian sample before shuffling and normalization.
pub fn gaussian_points(
    d: usize,
    mean_sep: f64,
    noise: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    SyntheticTaskSpec {
        kind: TaskKind::Gaussian { d, mean_sep, noise },
        horizon: n.max(1),
        seed,
    }
    .validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let gn = linalg::norm(&g);
    let v = if gn > 0.0 {
        linalg::scale(&g, 1.0 / gn)
    } else {
        vec![1.0; d]
    };
    let half = linalg::scale(&v, mean_sep / 2.0);
    Ok((0..n)
        .map(|_| {
            let y = coin(&mut rng);
            let x = half
                .iter()
                .map(|h| y.sign() * h + noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            LabeledExample { x, y }
        })
        .collect())
}

/// Two-Gaussian task, shuffled, split and normalized like a loaded dataset.
pub fn gen_gaussian_task(
    d: usize,
    mean_sep: f64,
    noise: f64,
    sizes: SplitSizes,
    scope: NormScope,
    seed: u64,
) -> Result<DatasetBundle> {
    let mut pts = gaussian_points(d, mean_sep, noise, sizes.total(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    pts.shuffle(&mut rng);
    split_and_normalize(pts, sizes, scope, seed)
}
