//! Reproducible semi-online and fully-online sweeps, result files and plots.

mod offline;
mod output;
mod plot;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    fully_online_drive, run_attack, AttackKind, AttackOptions, GreedyOptions, Schedule,
    SemiOnlineAttackConfig, Subroutine, WkOptions,
};
use crate::data::{LabeledExample, LearnerConfig, Model, Stream};
use crate::defense::{
    calibrate_tau, fit_centroids, CentroidStats, DefenseKind, DefenseSpec, TauMode,
};
use crate::error::{Error, Result};
use crate::learner::{cosine_similarity, error_rate, ogd_final, TrajectoryMode};
use crate::linalg;
use crate::regime::{classify, regime_boundaries, RegimeBoundaries, RegimeKind, RegimeProblem};
use crate::tasks::DatasetBundle;

pub use offline::{fit_offline, offline_optimal_error};
pub use output::{emit_results, read_results_csv, read_results_json, ResultFormat, ResultsFile};
pub use plot::{emit_plot, fully_plot_data, render_svg, semi_plot_data, PlotData};

/// Semi-online sweep over percentile thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemiOnlineSweep {
    pub dataset: String,
    pub defense: DefenseKind,
    pub attacks: Vec<AttackKind>,
    /// Threshold percentiles of the clean train scores, in `(0, 100]`.
    pub percentiles: Vec<f64>,
    pub budget: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    /// Norm cap of the centroid and slab defenses; the largest train norm when unset.
    pub norm_cap: Option<f64>,
    pub greedy: GreedyOptions,
    pub wk: WkOptions,
    pub random_orders: usize,
}

impl Default for SemiOnlineSweep {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            defense: DefenseKind::Slab,
            attacks: AttackKind::ALL.to_vec(),
            percentiles: (1..=10).map(|i| 10.0 * i as f64).collect(),
            budget: 100,
            eta: 0.01,
            epsilon: 1e-3,
            seeds: vec![0],
            norm_cap: None,
            greedy: GreedyOptions::default(),
            wk: WkOptions::default(),
            random_orders: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiOnlineRunRecord {
    pub dataset: String,
    pub defense: DefenseKind,
    pub percentile: f64,
    pub tau: Option<f64>,
    pub attack: AttackKind,
    pub budget: usize,
    pub eta: f64,
    pub seed: u64,
    pub cos_to_target: Option<f64>,
    pub test_error: Option<f64>,
    pub inserted: Option<usize>,
    pub regime: Option<RegimeKind>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiOnlineReport {
    pub records: Vec<SemiOnlineRunRecord>,
    /// Regime thresholds relative to the undefended clean model.
    pub boundaries: Option<RegimeBoundaries>,
}

fn stats_for(kind: DefenseKind, bundle: &DatasetBundle) -> Result<Option<CentroidStats>> {
    match kind {
        DefenseKind::Centroid | DefenseKind::Slab => Ok(Some(fit_centroids(&bundle.init)?)),
        DefenseKind::L2Ball => Ok(fit_centroids(&bundle.init).ok()),
        DefenseKind::LabelingOracle => Err(Error::UnsupportedVariant("labeling oracle")),
    }
}

fn max_norm(s: &Stream) -> f64 {
    s.items()
        .iter()
        .map(|e| linalg::norm(&e.x))
        .fold(0.0, f64::max)
}

fn shuffled(stream: &Stream, seed: u64) -> Stream {
    let mut items = stream.items().to_vec();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Stream::clean(items)
}

/// Calibrates the defense at one threshold level; L2 thresholds its own norm score.
fn build_defense(
    kind: DefenseKind,
    train: &Stream,
    stats: Option<&CentroidStats>,
    mode: TauMode,
    norm_cap: Option<f64>,
) -> Result<(f64, DefenseSpec)> {
    let tau = calibrate_tau(train, kind, stats, mode)?;
    let cap = norm_cap.unwrap_or_else(|| max_norm(train));
    Ok((tau, DefenseSpec::from_kind(kind, cap, tau, stats)?))
}

fn check_bundle(bundle: &DatasetBundle) -> Result<usize> {
    if bundle.train.is_empty() || bundle.init.is_empty() {
        return Err(Error::invalid(
            "bundle needs nonempty init and train splits",
        ));
    }
    bundle
        .dim()
        .ok_or_else(|| Error::invalid("bundle is empty"))
}

/// For every threshold percentile, seed and attack: learn `theta_tilde_0` on
/// the (seed-shuffled) train split, target its negation, run the attack and
/// score the result. The defense constrains inserted points only.
///
/// Attack failures are recorded in the cell, not raised.
pub fn run_semi_online(
    bundle: &DatasetBundle,
    sweep: &SemiOnlineSweep,
) -> Result<SemiOnlineReport> {
    if sweep.attacks.is_empty() {
        return Err(Error::invalid("no attacks requested"));
    }
    let d = check_bundle(bundle)?;
    let stats = stats_for(sweep.defense, bundle)?;
    let config = LearnerConfig::from_zero(sweep.eta, d)?;

    let cells: Vec<(f64, u64, AttackKind)> = sweep
        .percentiles
        .iter()
        .flat_map(|&p| {
            sweep
                .seeds
                .iter()
                .flat_map(move |&s| sweep.attacks.iter().map(move |&a| (p, s, a)))
        })
        .collect();
    let records = cells
        .par_iter()
        .map(|&(p, seed, attack)| {
            let mut rec = SemiOnlineRunRecord {
                dataset: sweep.dataset.clone(),
                defense: sweep.defense,
                percentile: p,
                tau: None,
                attack,
                budget: sweep.budget,
                eta: sweep.eta,
                seed,
                cos_to_target: None,
                test_error: None,
                inserted: None,
                regime: None,
                error: None,
            };
            if let Err(e) = semi_cell(bundle, sweep, &config, stats.as_ref(), &mut rec) {
                rec.error = Some(e.to_string());
            }
            rec
        })
        .collect();

    let boundaries = ogd_final(&config, &bundle.train, None)
        .ok()
        .and_then(|clean| {
            let problem =
                RegimeProblem::new(sweep.eta, vec![0.0; d], clean.negated().theta, clean.theta)
                    .ok()?;
            regime_boundaries(sweep.defense, stats.as_ref(), &problem).ok()
        });
    Ok(SemiOnlineReport {
        records,
        boundaries,
    })
}

fn semi_cell(
    bundle: &DatasetBundle,
    sweep: &SemiOnlineSweep,
    config: &LearnerConfig,
    stats: Option<&CentroidStats>,
    rec: &mut SemiOnlineRunRecord,
) -> Result<()> {
    let train = shuffled(&bundle.train, rec.seed);
    let (tau, defense) = build_defense(
        sweep.defense,
        &train,
        stats,
        TauMode::Percentile(rec.percentile),
        sweep.norm_cap,
    )?;
    rec.tau = Some(tau);
    let theta_tilde0 = ogd_final(config, &train, None)?;
    let theta_star = theta_tilde0.negated();
    if let Ok(problem) = RegimeProblem::new(
        sweep.eta,
        config.theta0.theta.clone(),
        theta_star.theta.clone(),
        theta_tilde0.theta.clone(),
    ) {
        rec.regime = classify(&defense, &problem).ok().map(|v| v.kind);
    }
    let atk = SemiOnlineAttackConfig::new(
        theta_star,
        sweep.budget,
        sweep.epsilon,
        defense.radius(),
        sweep.eta,
    )?
    .with_seed(rec.seed);
    let opts = AttackOptions {
        greedy: sweep.greedy.clone(),
        wk: sweep.wk.clone(),
        validation: bundle.init.clone(),
        random_orders: sweep.random_orders,
    };
    let out = run_attack(rec.attack, config, &train, &atk, &defense, &opts)?;
    rec.inserted = Some(out.inserted_count);
    rec.test_error = if bundle.test.is_empty() {
        None
    } else {
        Some(error_rate(&out.final_model, bundle.test.items())?)
    };
    rec.cos_to_target = Some(cosine_similarity(&out.final_model, &atk.theta_star)?);
    Ok(())
}

/// Fully-online sweep over retention fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FullyOnlineSweep {
    pub dataset: String,
    pub defense: DefenseKind,
    /// Subroutines run at each attacker slot; the concentrated attack is not one.
    pub attacks: Vec<AttackKind>,
    /// Fractions of clean train points each threshold keeps.
    pub retention: Vec<f64>,
    /// Attacker slots as a fraction of the horizon.
    pub budget_fraction: f64,
    /// Total number of slots `T`.
    pub horizon: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub norm_cap: Option<f64>,
    pub greedy: GreedyOptions,
    pub wk: WkOptions,
}

impl Default for FullyOnlineSweep {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            defense: DefenseKind::Slab,
            attacks: vec![
                AttackKind::Simplistic,
                AttackKind::Greedy,
                AttackKind::SemiOnlineWk,
            ],
            retention: vec![0.3, 0.5, 0.7, 0.9, 1.0],
            budget_fraction: 0.1,
            horizon: 1000,
            eta: 0.01,
            epsilon: 1e-3,
            seeds: (0..10).collect(),
            norm_cap: None,
            greedy: GreedyOptions::default(),
            wk: WkOptions {
                iters: 20,
                ..WkOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullyOnlineRunRecord {
    pub dataset: String,
    pub defense: DefenseKind,
    pub retention: f64,
    pub tau: Option<f64>,
    pub attack: AttackKind,
    pub budget_fraction: f64,
    pub horizon: usize,
    pub poison_count: usize,
    pub seed: u64,
    /// Mistakes at clean slots over the number of clean slots.
    pub online_error: Option<f64>,
    pub offline_optimal_error: Option<f64>,
    pub skipped: Option<usize>,
    pub error: Option<String>,
}

/// Attacker slots and clean draws shared by every cell of one seed.
struct SeedDraw {
    schedule: Schedule,
    clean: Vec<LabeledExample>,
    offline: Option<f64>,
}

fn draw_seed(bundle: &DatasetBundle, sweep: &FullyOnlineSweep, seed: u64) -> Result<SeedDraw> {
    let poison = (sweep.budget_fraction * sweep.horizon as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots: BTreeSet<usize> = rand::seq::index::sample(&mut rng, sweep.horizon, poison)
        .into_iter()
        .collect();
    let schedule = Schedule::new(sweep.horizon, slots)?;
    let train = bundle.train.items();
    let clean: Vec<LabeledExample> = (0..schedule.clean_count())
        .map(|_| train[rng.random_range(0..train.len())].clone())
        .collect();
    let offline = offline_optimal_error(&clean).ok();
    Ok(SeedDraw {
        schedule,
        clean,
        offline,
    })
}

/// For every seed, retention level and attack: draw the attacker slots
/// uniformly without replacement, sample clean points from the train split,
/// and drive the learner with the attack as the per-slot subroutine. The
/// target is the negation of the model fitted on the init split.
pub fn run_fully_online(
    bundle: &DatasetBundle,
    sweep: &FullyOnlineSweep,
) -> Result<Vec<FullyOnlineRunRecord>> {
    if sweep.attacks.is_empty() {
        return Err(Error::invalid("no attacks requested"));
    }
    if sweep.attacks.contains(&AttackKind::Concentrated) {
        return Err(Error::invalid(
            "the concentrated attack has no fully-online form",
        ));
    }
    if !(sweep.budget_fraction >= 0.0 && sweep.budget_fraction < 1.0) || sweep.horizon == 0 {
        return Err(Error::invalid(format!(
            "need budget fraction in [0, 1) and a positive horizon (got {}, {})",
            sweep.budget_fraction, sweep.horizon
        )));
    }
    let d = check_bundle(bundle)?;
    let stats = stats_for(sweep.defense, bundle)?;
    let config = LearnerConfig::from_zero(sweep.eta, d)?;
    let target = ogd_final(&config, &bundle.init, None)?.negated();

    let draws: Vec<(u64, Result<SeedDraw>)> = sweep
        .seeds
        .par_iter()
        .map(|&s| (s, draw_seed(bundle, sweep, s)))
        .collect();
    let cells: Vec<(usize, f64, AttackKind)> = (0..draws.len())
        .flat_map(|i| {
            sweep
                .retention
                .iter()
                .flat_map(move |&q| sweep.attacks.iter().map(move |&a| (i, q, a)))
        })
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(i, q, attack)| {
            let (seed, draw) = &draws[i];
            let mut rec = FullyOnlineRunRecord {
                dataset: sweep.dataset.clone(),
                defense: sweep.defense,
                retention: q,
                tau: None,
                attack,
                budget_fraction: sweep.budget_fraction,
                horizon: sweep.horizon,
                poison_count: 0,
                seed: *seed,
                online_error: None,
                offline_optimal_error: None,
                skipped: None,
                error: None,
            };
            let res = match draw {
                Ok(draw) => fully_cell(
                    bundle,
                    sweep,
                    &config,
                    stats.as_ref(),
                    &target,
                    draw,
                    &mut rec,
                ),
                Err(e) => Err(Error::invalid(e.to_string())),
            };
            if let Err(e) = res {
                rec.error = Some(e.to_string());
            }
            rec
        })
        .collect())
}

fn fully_cell(
    bundle: &DatasetBundle,
    sweep: &FullyOnlineSweep,
    config: &LearnerConfig,
    stats: Option<&CentroidStats>,
    target: &Model,
    draw: &SeedDraw,
    rec: &mut FullyOnlineRunRecord,
) -> Result<()> {
    rec.poison_count = draw.schedule.poison_slots.len();
    rec.offline_optimal_error = draw.offline;
    let (tau, defense) = build_defense(
        sweep.defense,
        &bundle.train,
        stats,
        TauMode::Retention(rec.retention),
        sweep.norm_cap,
    )?;
    rec.tau = Some(tau);
    let atk = SemiOnlineAttackConfig::new(
        target.clone(),
        1,
        sweep.epsilon,
        defense.radius(),
        sweep.eta,
    )?
    .with_seed(rec.seed);
    let mut sub = match rec.attack {
        AttackKind::Simplistic => Subroutine::Simplistic,
        AttackKind::Greedy => Subroutine::Greedy(sweep.greedy.clone()),
        AttackKind::SemiOnlineWk => Subroutine::SemiOnlineWk {
            validation: &bundle.init,
            opts: sweep.wk.clone(),
        },
        AttackKind::Concentrated => {
            return Err(Error::invalid(
                "the concentrated attack has no fully-online form",
            ))
        }
    };
    let out = fully_online_drive(
        config,
        draw.clean.iter().cloned(),
        &draw.schedule,
        &mut sub,
        &atk,
        &defense,
        TrajectoryMode::FinalOnly,
    )?;
    rec.online_error = Some(out.online_error);
    rec.skipped = Some(out.skipped.len());
    Ok(())
}
