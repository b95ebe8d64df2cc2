//! Executable checks of the rate bounds, regime dichotomy, lower-bound tasks
//! and numerical properties. Each check reports pass/fail with a one-line detail.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    run_attack, simplistic_attack, wk_gradient, wk_objective, AttackKind, AttackOptions,
    SemiOnlineAttackConfig,
};
use crate::data::{Label, LabeledExample, LearnerConfig, Model, Stream};
use crate::defense::{kind_score, CentroidStats, DefenseKind, DefenseSpec};
use crate::error::Result;
use crate::harness::{emit_results, run_semi_online, ResultFormat, SemiOnlineSweep};
use crate::learner::{cosine_similarity, logistic_grad, logistic_loss, ogd_final, ogd_run};
use crate::linalg;
use crate::regime::{
    classify, halfspace_separates, intermediate_case_suite, rate_constant, rate_steps,
    regime_boundaries, RegimeKind, RegimeProblem,
};
use crate::tasks::{
    gen_gaussian_task, mistake_positions_random, mistake_positions_tight, run_forced_error,
    run_mistake_bound, DatasetBundle, ForcedErrorConfig, NormScope, SplitSizes,
};

/// Checks that fail for a documented reason rather than a defect, with that reason.
pub const KNOWN_GAPS: &[(&str, &str)] = &[(
    "rate bound",
    "the ceil(C log(lambda/eps)) budget undercounts when the clean model starts farther than lambda from the target",
)];

pub fn known_gap(name: &str) -> Option<&'static str> {
    KNOWN_GAPS.iter().find(|g| g.0 == name).map(|g| g.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Runs `f`, then also fails the check when it took longer than `limit`.
fn timed(name: &str, limit: Duration, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let res = f();
    let took = start.elapsed();
    let (mut passed, mut detail) = match res {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if took > limit {
        passed = false;
        detail.push_str(&format!("; over the {}s limit", limit.as_secs_f64()));
    }
    CheckResult {
        name: name.into(),
        passed,
        detail,
        seconds: took.as_secs_f64(),
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// The one-dimensional rapid, slow and impossible cases.
pub fn check_intermediate_cases() -> CheckResult {
    timed("intermediate cases", Duration::from_secs(1), || {
        let r = intermediate_case_suite();
        let slow = |x: f64| r.slow.iter().find(|c| c.r == x).cloned();
        let (s10, s20) = (slow(10.0), slow(20.0));
        let counts = |c: &Option<crate::regime::SlowCase>, want: usize| {
            c.as_ref().is_some_and(|c| {
                c.bound == want && c.bound_simulated == want && c.simulated >= want
            })
        };
        let ok = (r.rapid_x - 1.629).abs() <= 1e-3
            && (r.rapid_theta - 1.0).abs() <= 1e-9
            && counts(&s10, 8)
            && counts(&s20, 551)
            && (r.impossible_theta - 1.0568).abs() <= 1e-3
            && r.impossible_monotone
            && r.further_steps >= 1000;
        let sim = |c: Option<crate::regime::SlowCase>| c.map_or(0, |c| c.simulated);
        Ok((
            ok,
            format!(
                "x = {:.4}, slow counts {} / {} (exact dynamics {} / {}), one-step theta = {:.4}, monotone over {} steps: {}",
                r.rapid_x,
                s10.as_ref().map_or(0, |c| c.bound),
                s20.as_ref().map_or(0, |c| c.bound),
                sim(s10.clone()),
                sim(s20.clone()),
                r.impossible_theta,
                r.further_steps,
                r.impossible_monotone
            ),
        ))
    })
}

/// Simplistic attack against an L2 ball on random instances, with the
/// budget set to the rate bound.
pub fn check_rate_bound(instances: u64) -> CheckResult {
    timed("rate bound", Duration::from_secs(10), || {
        let eps = 1e-3;
        let mut ok = 0;
        let mut beyond_lambda = 0;
        let mut within_dist_bound = 0;
        for seed in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(1..=20usize);
            let eta = rng.random_range(0.05..1.0);
            let radius = rng.random_range(0.5..10.0);
            let lambda = rng.random_range(1.0..5.0);
            let g = normal_vec(&mut rng, d);
            let theta_star = linalg::scale(&g, lambda / linalg::norm(&g));
            let w = normal_vec(&mut rng, d);
            let n = rng.random_range(0..50);
            let clean: Vec<LabeledExample> = (0..n)
                .map(|_| {
                    let x = normal_vec(&mut rng, d);
                    let y = if linalg::dot(&x, &w) >= 0.0 {
                        Label::Pos
                    } else {
                        Label::Neg
                    };
                    LabeledExample { x, y }
                })
                .collect();
            let clean = Stream::clean(clean);
            let config = LearnerConfig::from_zero(eta, d)?;
            let ball = DefenseSpec::l2_ball(radius)?;
            let dist0 = linalg::dist(&ogd_final(&config, &clean, None)?.theta, &theta_star);
            if dist0 > lambda {
                beyond_lambda += 1;
            }
            let (_, c) = rate_constant(eta, radius, lambda, dist0)?;
            let k = rate_steps(c, lambda, eps);
            let atk = SemiOnlineAttackConfig::new(Model::new(theta_star), k, eps, radius, eta)?;
            let out = simplistic_attack(&config, &clean, &atk, &ball)?;
            if out.succeeded && out.inserted_count <= k {
                ok += 1;
            } else if dist0 > lambda {
                // the contraction starts from dist0, so give the attack that horizon
                let k_dist = rate_steps(c, dist0, eps);
                let out = simplistic_attack(&config, &clean, &atk.with_budget(k_dist), &ball)?;
                if out.succeeded {
                    within_dist_bound += 1;
                }
            }
        }
        Ok((
            ok == instances,
            format!(
                "{ok}/{instances} reached eps within ceil(C log(lambda/eps)); {} of the misses made it within ceil(C log(dist0/eps)); {beyond_lambda} instances start farther than lambda",
                within_dist_bound
            ),
        ))
    })
}

/// The one-dimensional hard task: clean mistakes never exceed the poison count plus one.
pub fn check_mistake_bound(trials: u64) -> CheckResult {
    timed("mistake bound", Duration::from_secs(30), || {
        let horizon = 10_000;
        let budget = horizon / 10;
        let clean = horizon - budget;
        let tight = run_mistake_bound(clean, &mistake_positions_tight(budget), 0)?;
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|s| run_mistake_bound(clean, &mistake_positions_random(horizon, budget, s)?, s))
            .collect::<Result<Vec<_>>>()?;
        let bad = outcomes.iter().filter(|o| !o.within_bound()).count();
        let worst = outcomes.iter().map(|o| o.mistakes).max().unwrap_or(0);
        Ok((
            tight.within_bound() && bad == 0,
            format!(
                "T = {horizon}, |I| = {budget}: tight attacker {} mistakes, random adversaries worst {worst}, {bad}/{trials} over |I| + 1",
                tight.mistakes
            ),
        ))
    })
}

/// The sparse high-dimensional task: the explicit attacker forces at least half errors.
pub fn check_forced_error(seeds: u64) -> CheckResult {
    timed("forced error", Duration::from_secs(120), || {
        let errors = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                run_forced_error(&ForcedErrorConfig {
                    seed,
                    ..ForcedErrorConfig::default()
                })
                .map(|o| o.online_error)
            })
            .collect::<Result<Vec<_>>>()?;
        let pass = errors.iter().filter(|&&e| e >= 0.5).count();
        let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
        let need = seeds - seeds / 20;
        Ok((
            pass as u64 >= need,
            format!(
                "{pass}/{seeds} seeds with clean error >= 0.5 (need {need}); min error {min:.3}"
            ),
        ))
    })
}

/// A constructed two-dimensional cell: clean points near the class centroids.
struct Cell {
    defense: DefenseSpec,
    expect: RegimeKind,
}

fn centroid_cloud(stats: &CentroidStats, n: usize, seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Stream::clean(
        (0..n)
            .map(|i| {
                let y = if i % 2 == 0 { Label::Pos } else { Label::Neg };
                let x = stats
                    .centroid(y)
                    .iter()
                    .map(|m| m + 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                LabeledExample { x, y }
            })
            .collect(),
    )
}

fn constructed_cells() -> Result<Vec<(CentroidStats, Cell)>> {
    let facing = CentroidStats::new(vec![2.0, 0.0], vec![-2.0, 0.0])?;
    let unit = CentroidStats::new(vec![1.0, 0.0], vec![-1.0, 0.0])?;
    // the negated clean model points along +x, away from both one-sided centroids
    let opposed = CentroidStats::new(vec![-2.0, 0.0], vec![2.0, 0.0])?;
    let mut cells = Vec::new();
    for tau in [0.5, 1.0, 1.5] {
        cells.push((
            opposed.clone(),
            Cell {
                defense: DefenseSpec::centroid(10.0, tau, opposed.clone())?,
                expect: RegimeKind::Hard,
            },
        ));
    }
    for tau in [1.0, 2.0, 8.0] {
        cells.push((
            opposed.clone(),
            Cell {
                defense: DefenseSpec::slab(10.0, tau, opposed.clone())?,
                expect: RegimeKind::Hard,
            },
        ));
    }
    for tau in [2.5, 3.0, 4.0] {
        cells.push((
            facing.clone(),
            Cell {
                defense: DefenseSpec::centroid(10.0, tau, facing.clone())?,
                expect: RegimeKind::Easy,
            },
        ));
        cells.push((
            unit.clone(),
            Cell {
                defense: DefenseSpec::slab(10.0, tau, unit.clone())?,
                expect: RegimeKind::Easy,
            },
        ));
    }
    for r in [0.5, 1.0, 5.0] {
        cells.push((
            facing.clone(),
            Cell {
                defense: DefenseSpec::l2_ball(r)?,
                expect: RegimeKind::Easy,
            },
        ));
    }
    Ok(cells)
}

/// Hard cells stay anti-aligned under every attack with a large budget;
/// Easy cells reach the target within the rate bound at `eta = 1`.
pub fn check_regime_consistency() -> CheckResult {
    timed("regime consistency", Duration::from_secs(60), || {
        let eta = 1.0;
        let eps = 1e-3;
        let cells = constructed_cells()?;
        let results = cells
            .par_iter()
            .enumerate()
            .map(|(i, (stats, cell))| -> Result<(bool, String)> {
                let clean = centroid_cloud(stats, 40, i as u64);
                let config = LearnerConfig::from_zero(eta, 2)?;
                let tilde0 = ogd_final(&config, &clean, None)?;
                let target = tilde0.negated();
                let problem = RegimeProblem::new(
                    eta,
                    vec![0.0; 2],
                    target.theta.clone(),
                    tilde0.theta.clone(),
                )?;
                let verdict = classify(&cell.defense, &problem)?;
                let name = format!(
                    "{} tau={:?}",
                    cell.defense.kind(),
                    cell.defense.tau().unwrap_or(cell.defense.radius())
                );
                if verdict.kind != cell.expect {
                    return Ok((false, format!("{name} classified {:?}", verdict.kind)));
                }
                match verdict.kind {
                    RegimeKind::Hard => {
                        let witness = verdict
                            .witness
                            .as_ref()
                            .expect("hard verdicts carry a witness");
                        if !halfspace_separates(&cell.defense, witness, 20_000, i as u64)? {
                            return Ok((false, format!("{name}: witness halfspace violated")));
                        }
                        let atk = SemiOnlineAttackConfig::new(
                            target.clone(),
                            10_000,
                            eps,
                            cell.defense.radius(),
                            eta,
                        )?
                        .with_seed(i as u64);
                        let opts = AttackOptions {
                            validation: clean.clone(),
                            random_orders: 2,
                            ..AttackOptions::default()
                        };
                        for kind in AttackKind::ALL {
                            let out =
                                run_attack(kind, &config, &clean, &atk, &cell.defense, &opts)?;
                            let cos = cosine_similarity(&out.final_model, &target)?;
                            if cos >= 0.0 {
                                return Ok((false, format!("{name}: {kind} reached cos {cos:.4}")));
                            }
                        }
                        Ok((true, name))
                    }
                    _ => {
                        let seg = verdict
                            .segment
                            .as_ref()
                            .expect("easy verdicts carry a segment");
                        let c = verdict.c.expect("easy verdicts carry a rate constant");
                        let k = rate_steps(c, target.norm(), eps);
                        let atk = SemiOnlineAttackConfig::new(target.clone(), k, eps, seg.r, eta)?;
                        let out = simplistic_attack(&config, &clean, &atk, &cell.defense)?;
                        let cos = cosine_similarity(&out.final_model, &target)?;
                        Ok((
                            cos >= 0.99,
                            format!("{name}: cos {cos:.4} after {} of {k}", out.inserted_count),
                        ))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let hard = cells
            .iter()
            .filter(|c| c.1.expect == RegimeKind::Hard)
            .count();
        let failed: Vec<&String> = results.iter().filter(|r| !r.0).map(|r| &r.1).collect();
        Ok((
            failed.is_empty(),
            if failed.is_empty() {
                format!(
                    "{hard} hard cells stayed below cos 0 under all four attacks at K = 10000; {} easy cells reached cos >= 0.99",
                    cells.len() - hard
                )
            } else {
                format!("failing cells: {failed:?}")
            },
        ))
    })
}

fn trend_bundle(seed: u64) -> Result<DatasetBundle> {
    let sizes = SplitSizes {
        init: 100,
        train: 300,
        test: 300,
    };
    gen_gaussian_task(2, 4.0, 1.0, sizes, NormScope::AllPoints, seed)
}

/// Share of train points the slab keeps at its Hard-band edge, when there is one.
fn hard_band_retention(bundle: &DatasetBundle, eta: f64) -> Result<Option<f64>> {
    let stats = crate::defense::fit_centroids(&bundle.init)?;
    let config = LearnerConfig::from_zero(eta, 2)?;
    let tilde0 = ogd_final(&config, &bundle.train, None)?;
    let problem = RegimeProblem::new(eta, vec![0.0; 2], tilde0.negated().theta, tilde0.theta)?;
    let Some(edge) = regime_boundaries(DefenseKind::Slab, Some(&stats), &problem)?.tau_hard else {
        return Ok(None);
    };
    let mut kept = 0;
    for ex in bundle.train.items() {
        if kind_score(DefenseKind::Slab, Some(&stats), ex)? <= edge {
            kept += 1;
        }
    }
    Ok(Some(kept as f64 / bundle.train.len() as f64))
}

/// Mean cosine to the target rises from the 10th to the 100th percentile
/// threshold, and the slab Hard band keeps most clean points.
pub fn check_gaussian_trend() -> CheckResult {
    timed("gaussian trend", Duration::from_secs(60), || {
        let eta = 0.1;
        let attacks = [
            AttackKind::Simplistic,
            AttackKind::Greedy,
            AttackKind::SemiOnlineWk,
        ];
        let bundles = (0..5).map(trend_bundle).collect::<Result<Vec<_>>>()?;
        let mut lines = Vec::new();
        let mut ok = true;
        for defense in [
            DefenseKind::L2Ball,
            DefenseKind::Centroid,
            DefenseKind::Slab,
        ] {
            let sweep = SemiOnlineSweep {
                dataset: "gaussian".into(),
                defense,
                attacks: attacks.to_vec(),
                percentiles: vec![10.0, 100.0],
                budget: 200,
                eta,
                seeds: vec![0, 1],
                ..SemiOnlineSweep::default()
            };
            let mut records = Vec::new();
            for b in &bundles {
                records.extend(run_semi_online(b, &sweep)?.records);
            }
            for a in attacks {
                let mean = |p: f64| {
                    let v: Vec<f64> = records
                        .iter()
                        .filter(|r| r.attack == a && r.percentile == p)
                        .filter_map(|r| r.cos_to_target)
                        .collect();
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                };
                let (lo, hi) = (mean(10.0), mean(100.0));
                let errors = records
                    .iter()
                    .filter(|r| r.attack == a && r.error.is_some())
                    .count();
                ok &= hi > lo && errors == 0;
                lines.push(format!("{defense}/{a} {lo:.3}->{hi:.3}"));
            }
        }
        let retained = bundles
            .iter()
            .map(|b| hard_band_retention(b, eta))
            .collect::<Result<Vec<_>>>()?;
        let best = retained.iter().flatten().copied().fold(0.0, f64::max);
        ok &= best >= 0.7;
        Ok((
            ok,
            format!(
                "{}; slab hard band keeps up to {:.0}% of train points",
                lines.join(", "),
                100.0 * best
            ),
        ))
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn property_gradients(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    let h = 1e-6;
    for _ in 0..50 {
        let d = rng.random_range(1..6);
        let theta = Model::new(normal_vec(rng, d));
        let ex = LabeledExample {
            x: normal_vec(rng, d),
            y: if rng.random::<bool>() {
                Label::Pos
            } else {
                Label::Neg
            },
        };
        let g = logistic_grad(&theta, &ex)?;
        for (i, &gi) in g.iter().enumerate() {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p.theta[i] += h;
            m.theta[i] -= h;
            let fd = (logistic_loss(&p, &ex)? - logistic_loss(&m, &ex)?) / (2.0 * h);
            if gi.abs().max(fd.abs()) > 1e-6 {
                worst = worst.max(rel_err(gi, fd));
            }
        }
    }
    for _ in 0..20 {
        let d = rng.random_range(1..4);
        let k = rng.random_range(1..5);
        let theta0 = normal_vec(rng, d);
        let points: Vec<Vec<f64>> = (0..k).map(|_| normal_vec(rng, d)).collect();
        let validation: Vec<LabeledExample> = (0..5)
            .map(|i| LabeledExample {
                x: normal_vec(rng, d),
                y: if i % 2 == 0 { Label::Pos } else { Label::Neg },
            })
            .collect();
        let eta = 0.5;
        let (_, grad) = wk_gradient(&theta0, &points, eta, &validation);
        for (j, row) in grad.iter().enumerate() {
            for i in 0..d {
                let mut p = points.clone();
                let mut m = points.clone();
                p[j][i] += h;
                m[j][i] -= h;
                let fd = (wk_objective(&theta0, &p, eta, &validation)
                    - wk_objective(&theta0, &m, eta, &validation))
                    / (2.0 * h);
                if row[i].abs().max(fd.abs()) > 1e-6 {
                    worst = worst.max(rel_err(row[i], fd));
                }
            }
        }
    }
    Ok(worst)
}

fn property_flip(rng: &mut ChaCha8Rng) -> Result<bool> {
    let d = 4;
    let items: Vec<LabeledExample> = (0..200)
        .map(|_| LabeledExample {
            x: normal_vec(rng, d),
            y: if rng.random::<bool>() {
                Label::Pos
            } else {
                Label::Neg
            },
        })
        .collect();
    let flipped: Vec<LabeledExample> = items
        .iter()
        .enumerate()
        .map(|(i, e)| if i % 3 == 0 { e.flipped() } else { e.clone() })
        .collect();
    let config = LearnerConfig::from_zero(0.3, d)?;
    let ball = DefenseSpec::l2_ball(2.0)?;
    for def in [None, Some(&ball)] {
        let a = ogd_run(&config, &Stream::clean(items.clone()), def)?;
        let b = ogd_run(&config, &Stream::clean(flipped.clone()), def)?;
        if a.models != b.models {
            return Ok(false);
        }
    }
    Ok(true)
}

fn property_projection(rng: &mut ChaCha8Rng) -> Result<bool> {
    let stats = CentroidStats::new(vec![1.0, 0.5], vec![-0.5, 1.0])?;
    let defenses = [
        DefenseSpec::l2_ball(1.5)?,
        DefenseSpec::centroid(3.0, 0.8, stats.clone())?,
        DefenseSpec::slab(3.0, 0.6, stats)?,
    ];
    for def in &defenses {
        for _ in 0..10 {
            let x = linalg::scale(&normal_vec(rng, 2), 2.0);
            let y = if rng.random::<bool>() {
                Label::Pos
            } else {
                Label::Neg
            };
            let r_cap: f64 = 3.0;
            let c_max = r_cap.min(def.radius()) / linalg::norm(&x);
            let steps = (c_max / 1e-4).ceil() as usize;
            let grid = (1..=steps)
                .map(|k| (k as f64 * 1e-4).min(c_max))
                .filter(|&c| {
                    def.contains_parts(&linalg::scale(&x, c), y)
                        || def.contains_parts(&linalg::scale(&x, -c), y.flip())
                })
                .map(|c| (c - 1.0).abs())
                .fold(f64::INFINITY, f64::min);
            match def.project_direction(&x, y, r_cap) {
                Ok(p) => {
                    let ex = p.apply(&x, y);
                    if !def.contains(&ex) || (p.c - 1.0).abs() > grid + 1e-4 {
                        return Ok(false);
                    }
                }
                Err(_) if grid.is_infinite() => {}
                Err(_) => return Ok(false),
            }
        }
    }
    Ok(true)
}

fn property_filter(rng: &mut ChaCha8Rng) -> Result<bool> {
    let d = 3;
    let ball = DefenseSpec::l2_ball(1.0)?;
    let items: Vec<LabeledExample> = (0..300)
        .map(|_| LabeledExample {
            x: linalg::scale(&normal_vec(rng, d), 0.8),
            y: if rng.random::<bool>() {
                Label::Pos
            } else {
                Label::Neg
            },
        })
        .collect();
    let traj = ogd_run(
        &LearnerConfig::from_zero(0.5, d)?,
        &Stream::clean(items),
        Some(&ball),
    )?;
    Ok(traj
        .accepted
        .iter()
        .enumerate()
        .all(|(t, &ok)| ok || traj.models[t] == traj.models[t + 1]))
}

fn property_csv() -> Result<bool> {
    let bundle = gen_gaussian_task(
        3,
        3.0,
        1.0,
        SplitSizes {
            init: 50,
            train: 150,
            test: 50,
        },
        NormScope::AllPoints,
        9,
    )?;
    let sweep = SemiOnlineSweep {
        defense: DefenseKind::Slab,
        percentiles: vec![50.0, 100.0],
        budget: 10,
        seeds: vec![0, 1],
        wk: crate::attack::WkOptions {
            iters: 5,
            ..Default::default()
        },
        ..SemiOnlineSweep::default()
    };
    let dir = std::env::temp_dir();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let path = dir.join(format!("ogd-poison-verify-{}-{i}.csv", std::process::id()));
        let rep = run_semi_online(&bundle, &sweep)?;
        emit_results(&path, ResultFormat::Csv, &sweep, &rep.records)?;
        bytes.push(std::fs::read(&path).map_err(|e| crate::error::Error::io(&path, e))?);
        let _ = std::fs::remove_file(&path);
    }
    Ok(!bytes[0].is_empty() && bytes[0] == bytes[1])
}

/// Gradients against finite differences, flip equivalence, projection
/// optimality against a grid, filter inertness and CSV determinism.
pub fn check_properties() -> CheckResult {
    timed("property suites", Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grad = property_gradients(&mut rng)?;
        let flip = property_flip(&mut rng)?;
        let proj = property_projection(&mut rng)?;
        let filter = property_filter(&mut rng)?;
        let csv = property_csv()?;
        Ok((
            grad <= 1e-4 && flip && proj && filter && csv,
            format!(
                "gradient rel err {grad:.1e}, flip identical {flip}, projection optimal {proj}, filter inert {filter}, csv deterministic {csv}"
            ),
        ))
    })
}

/// Every check at its full scale.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_intermediate_cases(),
        check_rate_bound(100),
        check_mistake_bound(1000),
        check_forced_error(20),
        check_regime_consistency(),
        check_gaussian_trend(),
        check_properties(),
    ]
}
