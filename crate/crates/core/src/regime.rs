//! Easy / hard / intermediate regime classification with checkable certificates.
//!
//! An Easy verdict carries a segment from the origin along `theta_star -
//! theta_tilde_0` that lies inside the one-sided feasible set; a Hard verdict
//! carries a halfspace through the origin that contains the one-sided feasible
//! set but not the ray from `theta_0` towards `theta_star`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::defense::{
    centroid_segment_radius, CentroidStats, DefenseKind, DefenseSpec, FeasibleSegment,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::roots::bisect;

/// Draw cap for [`halfspace_separates`].
pub const MAX_DRAWS: usize = 1_000_000;

/// Returns `(gamma0, C)` where `gamma0 = min(R / dist0, 1 / eta)` and
/// `C = -1 / ln(1 - eta gamma0 / (1 + exp(lambda^2 gamma0)))`.
pub fn rate_constant(eta: f64, radius: f64, lambda: f64, dist0: f64) -> Result<(f64, f64)> {
    if !(eta > 0.0 && radius > 0.0 && dist0 > 0.0 && lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "rate constant needs eta, R, dist0 > 0 and lambda >= 0 (eta={eta}, R={radius}, lambda={lambda}, dist0={dist0})"
        )));
    }
    let gamma0 = (radius / dist0).min(1.0 / eta);
    let rho = eta * gamma0 / (1.0 + (lambda * lambda * gamma0).exp());
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Internal(format!(
            "contraction factor {rho} outside (0, 1)"
        )));
    }
    Ok((gamma0, -1.0 / (-rho).ln_1p()))
}

/// `ceil(C ln(lambda / epsilon))`, never below zero.
pub fn rate_steps(c: f64, lambda: f64, epsilon: f64) -> usize {
    (c * (lambda / epsilon).ln()).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Easy,
    Hard,
    Intermediate,
}

/// `{x : normal . x <= 0}` contains the one-sided feasible set and excludes
/// the open ray along `excluded_direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceWitness {
    pub normal: Vec<f64>,
    pub excluded_direction: Vec<f64>,
}

impl HalfspaceWitness {
    pub fn is_strict(&self) -> bool {
        linalg::dot(&self.normal, &self.excluded_direction) > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub kind: RegimeKind,
    /// Rate constant of an Easy verdict.
    pub c: Option<f64>,
    pub segment: Option<FeasibleSegment>,
    pub witness: Option<HalfspaceWitness>,
    pub note: Option<String>,
}

impl RegimeVerdict {
    fn intermediate(note: Option<String>) -> Self {
        Self {
            kind: RegimeKind::Intermediate,
            c: None,
            segment: None,
            witness: None,
            note,
        }
    }

    fn hard(witness: HalfspaceWitness) -> Self {
        Self {
            kind: RegimeKind::Hard,
            c: None,
            segment: None,
            witness: Some(witness),
            note: None,
        }
    }
}

/// The models a verdict is relative to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeProblem {
    pub eta: f64,
    /// Learner initialization.
    pub theta0: Vec<f64>,
    pub theta_star: Vec<f64>,
    /// Model after the clean stream.
    pub theta_tilde0: Vec<f64>,
}

impl RegimeProblem {
    pub fn new(
        eta: f64,
        theta0: Vec<f64>,
        theta_star: Vec<f64>,
        theta_tilde0: Vec<f64>,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        check_dim(theta0.len(), theta_star.len())?;
        check_dim(theta0.len(), theta_tilde0.len())?;
        Ok(Self {
            eta,
            theta0,
            theta_star,
            theta_tilde0,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    /// `theta_star - theta_tilde_0`, the direction of Easy segments.
    pub fn attack_direction(&self) -> Vec<f64> {
        linalg::sub(&self.theta_star, &self.theta_tilde0)
    }

    /// `theta_star - theta_0`, the ray a Hard witness must exclude.
    pub fn target_offset(&self) -> Vec<f64> {
        linalg::sub(&self.theta_star, &self.theta0)
    }

    fn easy(&self, r: f64, note: Option<String>) -> Result<RegimeVerdict> {
        let u = self.attack_direction();
        let dist0 = linalg::norm(&u);
        let (_, c) = rate_constant(self.eta, r, linalg::norm(&self.theta_star), dist0)?;
        Ok(RegimeVerdict {
            kind: RegimeKind::Easy,
            c: Some(c),
            segment: Some(FeasibleSegment::new(r, u)?),
            witness: None,
            note,
        })
    }

    fn check(&self) -> Result<()> {
        if linalg::is_zero(&self.attack_direction()) {
            return Err(Error::invalid("theta_star equals the clean model"));
        }
        if linalg::is_zero(&self.target_offset()) {
            return Err(Error::invalid("theta_star equals the initial model"));
        }
        Ok(())
    }
}

/// The L2 ball is always Easy with a segment of length `R`.
pub fn classify_l2(radius: f64, problem: &RegimeProblem) -> Result<RegimeVerdict> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "radius must be positive, got {radius}"
        )));
    }
    problem.check()?;
    problem.easy(radius, None)
}

/// Projections of the centroids onto the target offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidGeometry {
    /// Projection of `mu_plus` onto `theta_star - theta_0`.
    pub u_plus: Vec<f64>,
    /// Projection of `mu_minus` onto `theta_0 - theta_star`.
    pub u_minus: Vec<f64>,
    /// `<mu_plus, theta_star - theta_0>`
    pub plus_inner: f64,
    /// `<mu_minus, theta_0 - theta_star>`
    pub minus_inner: f64,
}

impl CentroidGeometry {
    pub fn new(stats: &CentroidStats, problem: &RegimeProblem) -> Result<Self> {
        check_dim(problem.dim(), stats.dim())?;
        let d = problem.target_offset();
        let dd = linalg::dot(&d, &d);
        if dd == 0.0 {
            return Err(Error::invalid("theta_star equals the initial model"));
        }
        let plus_inner = linalg::dot(&stats.mu_plus, &d);
        let minus_inner = -linalg::dot(&stats.mu_minus, &d);
        Ok(Self {
            u_plus: linalg::scale(&d, plus_inner / dd),
            u_minus: linalg::scale(&d, -minus_inner / dd),
            plus_inner,
            minus_inner,
        })
    }

    /// Both centroids point away from the target offset.
    pub fn sign_conditions(&self) -> bool {
        self.plus_inner < 0.0 && self.minus_inner < 0.0
    }

    pub fn hard_threshold(&self) -> Option<f64> {
        self.sign_conditions()
            .then(|| linalg::norm(&self.u_plus).min(linalg::norm(&self.u_minus)))
    }
}

fn centroid_easy_threshold(stats: &CentroidStats) -> f64 {
    linalg::norm(&stats.mu_plus).min(linalg::norm(&stats.mu_minus))
}

/// Centroid defense: Easy when `tau > min(||mu_+||, ||mu_-||)`; Hard when both
/// centroids point away from the target offset and `tau <= min(||u_+||, ||u_-||)`.
pub fn classify_centroid(
    stats: &CentroidStats,
    tau: f64,
    radius: f64,
    problem: &RegimeProblem,
) -> Result<RegimeVerdict> {
    problem.check()?;
    let geom = CentroidGeometry::new(stats, problem)?;
    if tau > centroid_easy_threshold(stats) {
        let u = problem.attack_direction();
        // one-sided negatives live in the ball around -mu_minus
        let r = [
            centroid_segment_radius(&stats.mu_plus, tau, &u),
            centroid_segment_radius(&linalg::neg(&stats.mu_minus), tau, &u),
        ]
        .into_iter()
        .flatten()
        .fold(0.0f64, f64::max)
        .min(radius);
        if r > 0.0 {
            return problem.easy(r, None);
        }
        return Ok(RegimeVerdict::intermediate(Some(
            "easy condition holds but the norm cap is zero".into(),
        )));
    }
    if let Some(th) = geom.hard_threshold() {
        if tau <= th {
            let d = problem.target_offset();
            return Ok(RegimeVerdict::hard(HalfspaceWitness {
                normal: d.clone(),
                excluded_direction: d,
            }));
        }
    }
    Ok(RegimeVerdict::intermediate(None))
}

/// Slab offsets with `beta` oriented towards the attack direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    /// `±(mu_plus - mu_minus)` with `beta . (theta_star - theta_tilde_0) >= 0`.
    pub beta: Vec<f64>,
    /// `-beta . mu_plus`
    pub b_plus: f64,
    /// `beta . mu_minus`
    pub b_minus: f64,
}

impl SlabGeometry {
    pub fn new(stats: &CentroidStats, problem: &RegimeProblem) -> Result<Self> {
        check_dim(problem.dim(), stats.dim())?;
        let beta = if linalg::dot(&stats.beta, &problem.attack_direction()) >= 0.0 {
            stats.beta.clone()
        } else {
            linalg::neg(&stats.beta)
        };
        Ok(Self {
            b_plus: -linalg::dot(&beta, &stats.mu_plus),
            b_minus: linalg::dot(&beta, &stats.mu_minus),
            beta,
        })
    }

    /// Sides `b` with `tau - b > 0 > -tau - b`.
    fn easy_sides(&self, tau: f64) -> impl Iterator<Item = f64> + '_ {
        [self.b_plus, self.b_minus]
            .into_iter()
            .filter(move |b| tau - b > 0.0 && 0.0 > -tau - b)
    }

    fn hard_condition(&self, tau: f64) -> bool {
        [self.b_plus, self.b_minus]
            .iter()
            .all(|b| 0.0 >= tau - b && tau - b > -tau - b)
    }
}

/// Slab defense: Easy when `tau > |b|` on either side; Hard when
/// `0 < tau <= min(b_+, b_-)` and `beta` strictly separates the target offset.
///
/// Without that last sign condition only the simplistic attack is ruled out,
/// which is reported as Intermediate with a note.
pub fn classify_slab(
    stats: &CentroidStats,
    tau: f64,
    radius: f64,
    problem: &RegimeProblem,
) -> Result<RegimeVerdict> {
    problem.check()?;
    let geom = SlabGeometry::new(stats, problem)?;
    let bn = linalg::norm(&geom.beta);
    if bn == 0.0 {
        return Ok(RegimeVerdict::intermediate(Some(
            "centroids coincide".into(),
        )));
    }
    let sides: Vec<f64> = geom.easy_sides(tau).collect();
    if !sides.is_empty() {
        let r = sides
            .iter()
            .map(|b| (tau - b) / bn)
            .fold(f64::INFINITY, f64::min)
            .min(radius);
        if r > 0.0 {
            return problem.easy(r, None);
        }
        return Ok(RegimeVerdict::intermediate(Some(
            "easy condition holds but the norm cap is zero".into(),
        )));
    }
    if geom.hard_condition(tau) {
        let d = problem.target_offset();
        if linalg::dot(&geom.beta, &d) > 0.0 {
            return Ok(RegimeVerdict::hard(HalfspaceWitness {
                normal: geom.beta,
                excluded_direction: d,
            }));
        }
        return Ok(RegimeVerdict::intermediate(Some(
            "simplistic attack is blocked, but beta does not separate the target offset".into(),
        )));
    }
    Ok(RegimeVerdict::intermediate(None))
}

/// Dispatches on the defense variant. The labeling oracle has no closed-form classifier.
pub fn classify(defense: &DefenseSpec, problem: &RegimeProblem) -> Result<RegimeVerdict> {
    defense.check_dim(problem.dim())?;
    match defense {
        DefenseSpec::L2Ball { radius } => classify_l2(*radius, problem),
        DefenseSpec::Centroid { radius, tau, stats } => {
            classify_centroid(stats, *tau, *radius, problem)
        }
        DefenseSpec::Slab { radius, tau, stats } => classify_slab(stats, *tau, *radius, problem),
        DefenseSpec::LabelingOracle { .. } => Err(Error::UnsupportedVariant("labeling oracle")),
    }
}

/// Checks `samples` evenly spaced points `c u / ||u||`, `c in (0, r]`.
pub fn segment_feasible(defense: &DefenseSpec, segment: &FeasibleSegment, samples: usize) -> bool {
    let n = samples.max(2);
    (1..=n).all(|k| defense.one_sided_contains(&segment.point(segment.r * k as f64 / n as f64)))
}

fn uniform_ball(rng: &mut ChaCha8Rng, center: &[f64], r: f64) -> Vec<f64> {
    let d = center.len();
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let gn = linalg::norm(&g);
    let u: f64 = rng.random();
    let s = if gn > 0.0 {
        r * u.powf(1.0 / d as f64) / gn
    } else {
        0.0
    };
    center.iter().zip(&g).map(|(c, gi)| c + s * gi).collect()
}

/// Falsification check of a Hard certificate: draws feasible one-sided points
/// by rejection sampling and asserts each lies in the witness halfspace.
///
/// Proposals mix the norm-cap ball with `tau`-balls around `mu_+` and `-mu_-`.
/// Returns `Inconclusive` if no feasible point turns up in [`MAX_DRAWS`].
pub fn halfspace_separates(
    defense: &DefenseSpec,
    witness: &HalfspaceWitness,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let d = witness.normal.len();
    defense.check_dim(d)?;
    check_dim(d, witness.excluded_direction.len())?;
    if !witness.is_strict() {
        return Ok(false);
    }
    let r = defense.radius();
    let mut centers: Vec<(Vec<f64>, f64)> = vec![(vec![0.0; d], r)];
    if let (Some(stats), Some(tau)) = (defense.stats(), defense.tau()) {
        let spread = if defense.kind() == DefenseKind::Slab {
            tau.max(r)
        } else {
            tau
        };
        centers.push((stats.mu_plus.clone(), spread));
        centers.push((linalg::neg(&stats.mu_minus), spread));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    for draw in 0..MAX_DRAWS {
        if found >= samples {
            break;
        }
        let (c, s) = &centers[draw % centers.len()];
        let z = uniform_ball(&mut rng, c, *s);
        if defense.one_sided_contains(&z) {
            found += 1;
            if linalg::dot(&witness.normal, &z) > 1e-9 {
                return Ok(false);
            }
        }
    }
    if found == 0 {
        return Err(Error::Inconclusive(format!(
            "no feasible point in {MAX_DRAWS} draws"
        )));
    }
    Ok(true)
}

/// Threshold boundaries for plotting: Easy for `tau > tau_easy`, Hard for
/// `tau <= tau_hard`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeBoundaries {
    pub tau_easy: Option<f64>,
    pub tau_hard: Option<f64>,
}

pub fn regime_boundaries(
    kind: DefenseKind,
    stats: Option<&CentroidStats>,
    problem: &RegimeProblem,
) -> Result<RegimeBoundaries> {
    match kind {
        DefenseKind::L2Ball => Ok(RegimeBoundaries {
            tau_easy: Some(0.0),
            tau_hard: None,
        }),
        DefenseKind::LabelingOracle => Err(Error::UnsupportedVariant("labeling oracle")),
        DefenseKind::Centroid => {
            let stats =
                stats.ok_or_else(|| Error::invalid("centroid boundaries need class centroids"))?;
            let geom = CentroidGeometry::new(stats, problem)?;
            Ok(RegimeBoundaries {
                tau_easy: Some(centroid_easy_threshold(stats)),
                tau_hard: geom.hard_threshold(),
            })
        }
        DefenseKind::Slab => {
            let stats =
                stats.ok_or_else(|| Error::invalid("slab boundaries need class centroids"))?;
            let geom = SlabGeometry::new(stats, problem)?;
            let tau_easy = geom.b_plus.abs().min(geom.b_minus.abs());
            let m = geom.b_plus.min(geom.b_minus);
            let separates = linalg::dot(&geom.beta, &problem.target_offset()) > 0.0;
            Ok(RegimeBoundaries {
                tau_easy: (linalg::norm(&geom.beta) > 0.0).then_some(tau_easy),
                tau_hard: (m > 0.0 && separates).then_some(m),
            })
        }
    }
}

/// One constant-magnitude case: the attacker may only insert `(r, +1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowCase {
    pub r: f64,
    /// `ceil(0.5 (1 + e^{r/2}) / r)`
    pub bound: usize,
    /// Steps of the worst-case recurrence `theta += r / (1 + e^{r/2})` until `theta >= 1`.
    pub bound_simulated: usize,
    /// Insertions of `(r, +1)` until `theta >= 1`.
    pub simulated: usize,
}

/// The three one-dimensional cases starting from `theta = 0.5` with target 1 and `eta = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateReport {
    /// Single point reaching the target exactly.
    pub rapid_x: f64,
    /// Model after inserting `rapid_x`.
    pub rapid_theta: f64,
    pub slow: Vec<SlowCase>,
    /// Model after one insertion of `(2.5, +1)`.
    pub impossible_theta: f64,
    /// Every further `(2.5, +1)` insertion increased the model.
    pub impossible_monotone: bool,
    /// Smallest `|theta - 1|` over the further insertions.
    pub impossible_min_gap: f64,
    pub further_steps: usize,
}

fn scalar_step(theta: f64, x: f64) -> f64 {
    theta + x / (1.0 + (theta * x).exp())
}

pub fn slow_case(r: f64) -> SlowCase {
    let bound = (0.5 * (1.0 + (0.5 * r).exp()) / r).ceil() as usize;
    // theta stays in [0.5, 1], so no step gains more than this
    let max_gain = r / (1.0 + (0.5 * r).exp());
    let mut theta = 0.5;
    let mut bound_simulated = 0;
    while theta < 1.0 {
        theta += max_gain;
        bound_simulated += 1;
    }
    let mut theta = 0.5;
    let mut simulated = 0;
    while theta < 1.0 {
        theta = scalar_step(theta, r);
        simulated += 1;
    }
    SlowCase {
        r,
        bound,
        bound_simulated,
        simulated,
    }
}

pub fn intermediate_case_suite() -> IntermediateReport {
    // x / (1 + e^{x/2}) = 1/2 has its first root below the peak at x = 2 * 1.2785
    let rapid_x =
        bisect(|x| x / (1.0 + (0.5 * x).exp()) - 0.5, 0.0, 2.5, 1e-13).expect("bracketed");
    let impossible_theta = scalar_step(0.5, 2.5);
    let further_steps = 1000;
    let mut theta = impossible_theta;
    let mut monotone = true;
    let mut min_gap = (theta - 1.0).abs();
    for _ in 0..further_steps {
        let next = scalar_step(theta, 2.5);
        monotone &= next > theta;
        theta = next;
        min_gap = min_gap.min((theta - 1.0).abs());
    }
    IntermediateReport {
        rapid_x,
        rapid_theta: scalar_step(0.5, rapid_x),
        slow: [5.0, 10.0, 15.0, 20.0].into_iter().map(slow_case).collect(),
        impossible_theta,
        impossible_monotone: monotone,
        impossible_min_gap: min_gap,
        further_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(theta_star: &[f64]) -> RegimeProblem {
        RegimeProblem::new(
            1.0,
            vec![0.0; theta_star.len()],
            theta_star.to_vec(),
            vec![0.0; theta_star.len()],
        )
        .unwrap()
    }

    #[test]
    fn rate_constant_values() {
        let (g, c) = rate_constant(1.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(g, 1.0);
        // -1 / ln(1 - 1/(1+e)) evaluated independently
        assert!((c - 3.192_219_284_529_739_5).abs() < 1e-12);
        let (_, c0) = rate_constant(1.0, 10.0, 0.0, 1.0).unwrap();
        assert!((c0 - 1.0 / -(0.5f64).ln()).abs() < 1e-12);
        let (_, small) = rate_constant(1.0, 1e-3, 1.0, 1.0).unwrap();
        assert!((small - 2000.0).abs() / 2000.0 < 0.01);
        assert!(rate_constant(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn l2_is_always_easy() {
        for r in [1e-3, 0.5, 10.0] {
            let v = classify_l2(r, &problem(&[1.0, 0.0])).unwrap();
            assert_eq!(v.kind, RegimeKind::Easy);
            let ball = DefenseSpec::l2_ball(r).unwrap();
            assert!(segment_feasible(&ball, v.segment.as_ref().unwrap(), 100));
        }
        let v = classify_l2(10.0, &problem(&[1.0])).unwrap();
        assert!((v.c.unwrap() - 3.192_219_284_529_739_5).abs() < 1e-12);
    }

    #[test]
    fn segment_check_rejects_overlong_segment() {
        let ball = DefenseSpec::l2_ball(1.0).unwrap();
        assert!(segment_feasible(
            &ball,
            &FeasibleSegment::new(1.0, vec![3.0, 4.0]).unwrap(),
            100
        ));
        assert!(!segment_feasible(
            &ball,
            &FeasibleSegment::new(1.01, vec![3.0, 4.0]).unwrap(),
            100
        ));
    }

    fn hard_centroid_stats() -> CentroidStats {
        CentroidStats::new(vec![-2.0, 0.0], vec![2.0, 0.0]).unwrap()
    }

    #[test]
    fn centroid_verdicts() {
        let easy = CentroidStats::new(vec![2.0, 0.0], vec![-2.0, 0.0]).unwrap();
        let v = classify_centroid(&easy, 3.0, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Easy);
        let def = DefenseSpec::centroid(10.0, 3.0, easy).unwrap();
        assert!(segment_feasible(&def, v.segment.as_ref().unwrap(), 1000));
        // one-sided ball around mu_plus along +x reaches 2 + 3
        assert!((v.segment.unwrap().r - 5.0).abs() < 1e-12);

        let hard = hard_centroid_stats();
        let v = classify_centroid(&hard, 1.5, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Hard);
        let def = DefenseSpec::centroid(10.0, 1.5, hard.clone()).unwrap();
        assert!(halfspace_separates(&def, v.witness.as_ref().unwrap(), 100_000, 1).unwrap());

        // min ||mu|| = 2, so tau = 2.5 already puts the origin inside a ball
        let v = classify_centroid(&hard, 2.5, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Easy);
        let def = DefenseSpec::centroid(10.0, 2.5, hard).unwrap();
        assert!(segment_feasible(&def, v.segment.as_ref().unwrap(), 1000));

        // ||u|| = 2 < ||mu|| = sqrt 5 leaves a gap between the regimes
        let gap = CentroidStats::new(vec![-2.0, 1.0], vec![2.0, 1.0]).unwrap();
        let v = classify_centroid(&gap, 2.1, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Intermediate);
    }

    #[test]
    fn centroid_boundaries_match_classifier() {
        let stats = CentroidStats::new(vec![-2.0, 0.5], vec![3.0, -1.0]).unwrap();
        let p = problem(&[1.0, 0.2]);
        let b = regime_boundaries(DefenseKind::Centroid, Some(&stats), &p).unwrap();
        let (te, th) = (b.tau_easy.unwrap(), b.tau_hard.unwrap());
        for k in 0..1000 {
            let tau = k as f64 * 0.005;
            let v = classify_centroid(&stats, tau, 100.0, &p).unwrap();
            assert_eq!(v.kind == RegimeKind::Easy, tau > te, "tau {tau}");
            assert_eq!(v.kind == RegimeKind::Hard, tau <= th, "tau {tau}");
        }
        let hb = regime_boundaries(
            DefenseKind::Centroid,
            Some(&hard_centroid_stats()),
            &problem(&[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(hb.tau_easy, Some(2.0));
        assert_eq!(hb.tau_hard, Some(2.0));
    }

    #[test]
    fn slab_verdicts() {
        let easy = CentroidStats::new(vec![1.0, 0.0], vec![-1.0, 0.0]).unwrap();
        let g = SlabGeometry::new(&easy, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!((g.b_plus, g.b_minus), (-2.0, -2.0));
        let v = classify_slab(&easy, 3.0, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Easy);
        assert!((v.segment.as_ref().unwrap().r - 2.5).abs() < 1e-12);
        let def = DefenseSpec::slab(10.0, 3.0, easy).unwrap();
        assert!(segment_feasible(&def, v.segment.as_ref().unwrap(), 1000));

        let hard = hard_centroid_stats();
        let g = SlabGeometry::new(&hard, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(g.beta, vec![4.0, 0.0]);
        assert_eq!((g.b_plus, g.b_minus), (8.0, 8.0));
        let v = classify_slab(&hard, 2.0, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Hard);
        let def = DefenseSpec::slab(10.0, 2.0, hard.clone()).unwrap();
        assert!(halfspace_separates(&def, v.witness.as_ref().unwrap(), 100_000, 2).unwrap());
        let v = classify_slab(&hard, 9.0, 10.0, &problem(&[1.0, 0.0])).unwrap();
        assert_eq!(v.kind, RegimeKind::Easy);
        let b = regime_boundaries(DefenseKind::Slab, Some(&hard), &problem(&[1.0, 0.0])).unwrap();
        assert_eq!((b.tau_easy, b.tau_hard), (Some(8.0), Some(8.0)));
    }

    #[test]
    fn slab_blocked_without_separation_is_intermediate() {
        // beta oriented by theta_tilde_0 but theta_0 lies on the far side
        let hard = hard_centroid_stats();
        let p = RegimeProblem::new(1.0, vec![2.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let v = classify_slab(&hard, 2.0, 10.0, &p).unwrap();
        assert_eq!(v.kind, RegimeKind::Intermediate);
        assert!(v.note.is_some());
    }

    #[test]
    fn l2_ball_has_no_separating_halfspace() {
        let ball = DefenseSpec::l2_ball(1.0).unwrap();
        let w = HalfspaceWitness {
            normal: vec![1.0, 0.0],
            excluded_direction: vec![1.0, 0.0],
        };
        assert!(!halfspace_separates(&ball, &w, 1000, 3).unwrap());
        let flat = HalfspaceWitness {
            normal: vec![1.0, 0.0],
            excluded_direction: vec![0.0, 1.0],
        };
        assert!(!flat.is_strict());
        assert!(!halfspace_separates(&ball, &flat, 10, 3).unwrap());
    }

    #[test]
    fn empty_feasible_set_is_inconclusive() {
        let stats = CentroidStats::new(vec![50.0], vec![-50.0]).unwrap();
        let def = DefenseSpec::centroid(1.0, 0.5, stats).unwrap();
        let w = HalfspaceWitness {
            normal: vec![1.0],
            excluded_direction: vec![1.0],
        };
        assert!(matches!(
            halfspace_separates(&def, &w, 10, 0),
            Err(Error::Inconclusive(_))
        ));
    }

    #[test]
    fn intermediate_cases() {
        let r = intermediate_case_suite();
        assert!((r.rapid_x - 1.629).abs() < 1e-3);
        assert!((r.rapid_theta - 1.0).abs() < 1e-10);
        let by_r = |x: f64| r.slow.iter().find(|c| c.r == x).unwrap().clone();
        assert_eq!(by_r(10.0).bound, 8);
        assert_eq!(by_r(20.0).bound, 551);
        assert!(r
            .slow
            .iter()
            .all(|c| c.bound_simulated == c.bound && c.simulated >= c.bound));
        assert_eq!(by_r(10.0).simulated, 217);
        assert!((r.impossible_theta - 1.0568).abs() < 1e-3);
        assert!(r.impossible_monotone);
        assert!(r.impossible_min_gap > 0.0567);
    }

    #[test]
    fn oracle_is_unsupported() {
        use crate::defense::LabelingOracle;
        let def = DefenseSpec::labeling_oracle(
            1.0,
            LabelingOracle::Linear {
                weights: vec![1.0],
                bias: 0.0,
            },
        )
        .unwrap();
        assert!(matches!(
            classify(&def, &problem(&[1.0])),
            Err(Error::UnsupportedVariant(_))
        ));
    }
}
