//! Feasible-set defenses.
//!
//! Every defense is a membership predicate over labeled examples. The
//! data-driven ones (centroid distance and slab) are calibrated on a clean
//! initialization set and never updated from the stream afterwards. All
//! inequalities are non-strict: a point exactly on the boundary is feasible.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{Label, LabeledExample, Stream};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Pulls projected points slightly inside the boundary so that rounding
/// cannot push them back out.
const INTERIOR: f64 = 1.0 - 1e-12;

/// Grid resolution for defenses without a closed-form scale interval.
const ORACLE_GRID: usize = 10_000;

pub type OracleFn = Arc<dyn Fn(&[f64]) -> Label + Send + Sync>;

/// A labeling function `g(x)`.
#[derive(Clone)]
pub enum LabelingOracle {
    /// `g(x) = sgn(w^T x + b)`, with ties labeled `+1`.
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Custom(OracleFn),
}

impl LabelingOracle {
    pub fn label(&self, x: &[f64]) -> Label {
        match self {
            LabelingOracle::Linear { weights, bias } => {
                if linalg::dot(weights, x) + bias >= 0.0 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
            LabelingOracle::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for LabelingOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelingOracle::Linear { weights, bias } => f
                .debug_struct("Linear")
                .field("weights", weights)
                .field("bias", bias)
                .finish(),
            LabelingOracle::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for LabelingOracle {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                LabelingOracle::Linear {
                    weights: a,
                    bias: b,
                },
                LabelingOracle::Linear {
                    weights: c,
                    bias: d,
                },
            ) => a == c && b == d,
            (LabelingOracle::Custom(a), LabelingOracle::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Class centroids of a clean initialization set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidStats {
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    /// `mu_plus - mu_minus`
    pub beta: Vec<f64>,
}

impl CentroidStats {
    pub fn new(mu_plus: Vec<f64>, mu_minus: Vec<f64>) -> Result<Self> {
        check_dim(mu_plus.len(), mu_minus.len())?;
        let beta = linalg::sub(&mu_plus, &mu_minus);
        Ok(Self {
            mu_plus,
            mu_minus,
            beta,
        })
    }

    pub fn centroid(&self, y: Label) -> &[f64] {
        match y {
            Label::Pos => &self.mu_plus,
            Label::Neg => &self.mu_minus,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu_plus.len()
    }
}

/// Class means of `init_set`. Both labels must be present.
pub fn fit_centroids(init_set: &Stream) -> Result<CentroidStats> {
    let d = init_set
        .dim()
        .ok_or_else(|| Error::Calibration("initialization set is empty".into()))?;
    init_set.check_dim(d)?;
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for ex in init_set.items() {
        let k = match ex.y {
            Label::Pos => 0,
            Label::Neg => 1,
        };
        linalg::axpy(1.0, &ex.x, &mut sums[k]);
        counts[k] += 1;
    }
    for (k, name) in [(0, "+1"), (1, "-1")] {
        if counts[k] == 0 {
            return Err(Error::Calibration(format!(
                "initialization set has no examples labeled {name}"
            )));
        }
    }
    let [sp, sm] = sums;
    CentroidStats::new(
        linalg::scale(&sp, 1.0 / counts[0] as f64),
        linalg::scale(&sm, 1.0 / counts[1] as f64),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    L2Ball,
    LabelingOracle,
    Centroid,
    Slab,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::L2Ball => "l2_ball",
            DefenseKind::LabelingOracle => "labeling_oracle",
            DefenseKind::Centroid => "centroid",
            DefenseKind::Slab => "slab",
        }
    }

    /// Whether the defense exposes a scalar score that `tau` thresholds.
    pub fn is_score_based(self) -> bool {
        !matches!(self, DefenseKind::LabelingOracle)
    }
}

impl fmt::Display for DefenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefenseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l2" | "l2_ball" | "l2_norm" => Ok(DefenseKind::L2Ball),
            "oracle" | "labeling_oracle" => Ok(DefenseKind::LabelingOracle),
            "centroid" | "l2_centroid" => Ok(DefenseKind::Centroid),
            "slab" => Ok(DefenseKind::Slab),
            other => Err(Error::invalid(format!("unknown defense kind '{other}'"))),
        }
    }
}

/// A feasible-set defense.
#[derive(Debug, Clone, PartialEq)]
pub enum DefenseSpec {
    /// `||x|| <= radius`
    L2Ball { radius: f64 },
    /// `||x|| <= radius` and `y = g(x)`
    LabelingOracle { radius: f64, oracle: LabelingOracle },
    /// `||x|| <= radius` and `||x - mu_y|| <= tau`
    Centroid {
        radius: f64,
        tau: f64,
        stats: CentroidStats,
    },
    /// `||x|| <= radius` and `|beta^T (x - mu_y)| <= tau`
    Slab {
        radius: f64,
        tau: f64,
        stats: CentroidStats,
    },
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite and nonnegative, got {v}"
        )))
    }
}

impl DefenseSpec {
    pub fn l2_ball(radius: f64) -> Result<Self> {
        check_nonneg("radius", radius)?;
        Ok(DefenseSpec::L2Ball { radius })
    }

    pub fn labeling_oracle(radius: f64, oracle: LabelingOracle) -> Result<Self> {
        check_nonneg("radius", radius)?;
        Ok(DefenseSpec::LabelingOracle { radius, oracle })
    }

    pub fn centroid(radius: f64, tau: f64, stats: CentroidStats) -> Result<Self> {
        check_nonneg("radius", radius)?;
        check_nonneg("tau", tau)?;
        Ok(DefenseSpec::Centroid { radius, tau, stats })
    }

    pub fn slab(radius: f64, tau: f64, stats: CentroidStats) -> Result<Self> {
        check_nonneg("radius", radius)?;
        check_nonneg("tau", tau)?;
        Ok(DefenseSpec::Slab { radius, tau, stats })
    }

    /// Builds a defense of `kind` from its threshold. For the L2 ball the
    /// threshold is the radius itself and `radius` is ignored.
    pub fn from_kind(
        kind: DefenseKind,
        radius: f64,
        tau: f64,
        stats: Option<&CentroidStats>,
    ) -> Result<Self> {
        let need_stats = || {
            stats
                .cloned()
                .ok_or_else(|| Error::invalid(format!("{kind} defense needs centroid statistics")))
        };
        match kind {
            DefenseKind::L2Ball => Self::l2_ball(tau),
            DefenseKind::Centroid => Self::centroid(radius, tau, need_stats()?),
            DefenseKind::Slab => Self::slab(radius, tau, need_stats()?),
            DefenseKind::LabelingOracle => Err(Error::UnsupportedVariant("labeling_oracle")),
        }
    }

    pub fn kind(&self) -> DefenseKind {
        match self {
            DefenseSpec::L2Ball { .. } => DefenseKind::L2Ball,
            DefenseSpec::LabelingOracle { .. } => DefenseKind::LabelingOracle,
            DefenseSpec::Centroid { .. } => DefenseKind::Centroid,
            DefenseSpec::Slab { .. } => DefenseKind::Slab,
        }
    }

    /// The norm cap `R`.
    pub fn radius(&self) -> f64 {
        match self {
            DefenseSpec::L2Ball { radius }
            | DefenseSpec::LabelingOracle { radius, .. }
            | DefenseSpec::Centroid { radius, .. }
            | DefenseSpec::Slab { radius, .. } => *radius,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            DefenseSpec::Centroid { tau, .. } | DefenseSpec::Slab { tau, .. } => Some(*tau),
            _ => None,
        }
    }

    /// Threshold on the defense score: `tau`, or the radius for the L2 ball.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            DefenseSpec::L2Ball { radius } => Some(*radius),
            DefenseSpec::Centroid { tau, .. } | DefenseSpec::Slab { tau, .. } => Some(*tau),
            DefenseSpec::LabelingOracle { .. } => None,
        }
    }

    pub fn stats(&self) -> Option<&CentroidStats> {
        match self {
            DefenseSpec::Centroid { stats, .. } | DefenseSpec::Slab { stats, .. } => Some(stats),
            _ => None,
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            DefenseSpec::Centroid { stats, .. } | DefenseSpec::Slab { stats, .. } => {
                check_dim(d, stats.dim())
            }
            DefenseSpec::LabelingOracle {
                oracle: LabelingOracle::Linear { weights, .. },
                ..
            } => check_dim(d, weights.len()),
            _ => Ok(()),
        }
    }

    /// Membership of `(x, y)` in the feasible set.
    pub fn contains_parts(&self, x: &[f64], y: Label) -> bool {
        let n = linalg::norm(x);
        if n > self.radius() {
            return false;
        }
        match self {
            DefenseSpec::L2Ball { .. } => true,
            DefenseSpec::LabelingOracle { oracle, .. } => oracle.label(x) == y,
            DefenseSpec::Centroid { tau, stats, .. } => linalg::dist(x, stats.centroid(y)) <= *tau,
            DefenseSpec::Slab { tau, stats, .. } => slab_score(stats, x, y) <= *tau,
        }
    }

    pub fn contains(&self, ex: &LabeledExample) -> bool {
        self.contains_parts(&ex.x, ex.y)
    }

    /// Membership of `z` in the one-sided set `{(y x, +1) : (x, y) feasible}`.
    pub fn one_sided_contains(&self, z: &[f64]) -> bool {
        self.contains_parts(z, Label::Pos) || self.contains_parts(&linalg::neg(z), Label::Neg)
    }

    /// The scalar score thresholded by the defense (`||x||` for the L2 ball).
    pub fn score(&self, ex: &LabeledExample) -> Result<f64> {
        match self {
            DefenseSpec::L2Ball { .. } => Ok(linalg::norm(&ex.x)),
            DefenseSpec::LabelingOracle { .. } => Err(Error::UnsupportedVariant("labeling_oracle")),
            DefenseSpec::Centroid { stats, .. } => Ok(linalg::dist(&ex.x, stats.centroid(ex.y))),
            DefenseSpec::Slab { stats, .. } => Ok(slab_score(stats, &ex.x, ex.y)),
        }
    }

    /// Feasible interval of scales `c` in `[0, c_max]` such that `(c x, y)`
    /// is feasible. `None` for the labeling oracle (no closed form) or an
    /// empty interval.
    fn scale_interval(&self, x: &[f64], y: Label, c_max: f64) -> Option<(f64, f64)> {
        let (lo, hi) = match self {
            DefenseSpec::L2Ball { .. } => (0.0, c_max),
            DefenseSpec::LabelingOracle { .. } => return None,
            DefenseSpec::Centroid { tau, stats, .. } => {
                // ||c x - mu||^2 <= tau^2  <=>  a c^2 - 2 b c + k <= 0
                let mu = stats.centroid(y);
                let a = linalg::dot(x, x);
                let b = linalg::dot(x, mu);
                let k = linalg::dot(mu, mu) - tau * tau;
                let disc = b * b - a * k;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                ((b - s) / a, (b + s) / a)
            }
            DefenseSpec::Slab { tau, stats, .. } => {
                // |c p - q| <= tau
                let p = linalg::dot(&stats.beta, x);
                let q = linalg::dot(&stats.beta, stats.centroid(y));
                if p == 0.0 {
                    if q.abs() <= *tau {
                        (0.0, c_max)
                    } else {
                        return None;
                    }
                } else {
                    let (a, b) = ((q - tau) / p, (q + tau) / p);
                    (a.min(b), a.max(b))
                }
            }
        };
        let (lo, hi) = (lo.max(0.0), hi.min(c_max));
        (lo <= hi).then_some((lo, hi))
    }

    /// Feasible scale closest to 1 for one label orientation, or `None`.
    fn closest_scale(&self, x: &[f64], y: Label, c_max: f64) -> Option<f64> {
        if let DefenseSpec::LabelingOracle { .. } = self {
            return self.closest_scale_by_grid(x, y, c_max);
        }
        let (lo, hi) = self.scale_interval(x, y, c_max)?;
        let c = 1.0f64.clamp(lo, hi);
        let mid = 0.5 * (lo + hi);
        // closed-form endpoints can land a rounding error outside the set
        for nudge in [0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
            let cand = c + (mid - c) * nudge;
            if cand > 0.0 && self.contains_parts(&linalg::scale(x, cand), y) {
                return Some(cand);
            }
        }
        None
    }

    fn closest_scale_by_grid(&self, x: &[f64], y: Label, c_max: f64) -> Option<f64> {
        let step = c_max / ORACLE_GRID as f64;
        std::iter::once(1.0f64.min(c_max))
            .chain((1..=ORACLE_GRID).map(|k| k as f64 * step))
            .filter(|&c| c > 0.0 && self.contains_parts(&linalg::scale(x, c), y))
            .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
    }

    /// Scales `x` by the `c` in `[0, r_cap / ||x||]` closest to 1 such that
    /// `(c x, y)` or `(-c x, -y)` is feasible, preferring the former on ties.
    pub fn project_direction(&self, x: &[f64], y: Label, r_cap: f64) -> Result<Projection> {
        let n = linalg::norm(x);
        if n == 0.0 {
            return Err(Error::invalid("cannot project the zero vector"));
        }
        let c_max = r_cap.min(self.radius()) / n;
        let direct = self.closest_scale(x, y, c_max);
        let flipped = self.closest_scale(&linalg::neg(x), y.flip(), c_max);
        match (direct, flipped) {
            (Some(a), Some(b)) if (b - 1.0).abs() < (a - 1.0).abs() => Ok(Projection {
                c: b,
                flipped: true,
            }),
            (Some(a), _) => Ok(Projection {
                c: a,
                flipped: false,
            }),
            (None, Some(b)) => Ok(Projection {
                c: b,
                flipped: true,
            }),
            (None, None) => Err(Error::Infeasible),
        }
    }

    /// Largest feasible scale of `x` with the label held fixed, capped at `c_max`.
    pub fn max_feasible_scale(&self, x: &[f64], y: Label, c_max: f64) -> Option<f64> {
        if linalg::is_zero(x) {
            return None;
        }
        if let DefenseSpec::LabelingOracle { .. } = self {
            let step = c_max / ORACLE_GRID as f64;
            return (1..=ORACLE_GRID)
                .rev()
                .map(|k| k as f64 * step)
                .find(|&c| self.contains_parts(&linalg::scale(x, c), y));
        }
        let c_max = c_max.min(self.radius() / linalg::norm(x));
        let (lo, hi) = self.scale_interval(x, y, c_max)?;
        for nudge in [0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
            let cand = hi - (hi - lo) * nudge;
            if cand > 0.0 && self.contains_parts(&linalg::scale(x, cand), y) {
                return Some(cand);
            }
        }
        None
    }

    /// Approximate nearest feasible point to `x` with label `y`.
    ///
    /// Closed forms per constraint (radial scaling into balls, clipping the
    /// slab coordinate), alternated until the point is feasible.
    pub fn project_point(&self, x: &[f64], y: Label) -> Option<Vec<f64>> {
        let mut p = x.to_vec();
        for _ in 0..200 {
            if self.contains_parts(&p, y) {
                return Some(p);
            }
            match self {
                DefenseSpec::L2Ball { .. } | DefenseSpec::LabelingOracle { .. } => {}
                DefenseSpec::Centroid { tau, stats, .. } => {
                    let mu = stats.centroid(y);
                    let dv = linalg::sub(&p, mu);
                    let dn = linalg::norm(&dv);
                    if dn > *tau {
                        p = linalg::add(mu, &linalg::scale(&dv, tau * INTERIOR / dn));
                    }
                }
                DefenseSpec::Slab { tau, stats, .. } => {
                    let bb = linalg::dot(&stats.beta, &stats.beta);
                    if bb > 0.0 {
                        let s = linalg::dot(&stats.beta, &linalg::sub(&p, stats.centroid(y)));
                        let clipped = s.clamp(-tau * INTERIOR, tau * INTERIOR);
                        if s != clipped {
                            linalg::axpy((clipped - s) / bb, &stats.beta, &mut p);
                        }
                    }
                }
            }
            let n = linalg::norm(&p);
            let r = self.radius();
            if n > r {
                p = linalg::scale(&p, r * INTERIOR / n);
            }
            if let DefenseSpec::L2Ball { .. } | DefenseSpec::LabelingOracle { .. } = self {
                return self.contains_parts(&p, y).then_some(p);
            }
        }
        self.contains_parts(&p, y).then_some(p)
    }

    /// Nearest one-sided feasible point to `z`: the closer of the projections
    /// onto `F_+` and onto the mirrored `-F_-`.
    pub fn project_one_sided(&self, z: &[f64]) -> Option<Vec<f64>> {
        let pos = self.project_point(z, Label::Pos);
        let neg = self
            .project_point(&linalg::neg(z), Label::Neg)
            .map(|p| linalg::neg(&p));
        match (pos, neg) {
            (Some(a), Some(b)) => {
                if linalg::dist(&b, z) < linalg::dist(&a, z) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (a, b) => a.or(b),
        }
    }

    /// Turns a one-sided point back into a feasible labeled example.
    pub fn materialize_one_sided(&self, z: &[f64]) -> Option<LabeledExample> {
        if self.contains_parts(z, Label::Pos) {
            return Some(LabeledExample {
                x: z.to_vec(),
                y: Label::Pos,
            });
        }
        let nz = linalg::neg(z);
        self.contains_parts(&nz, Label::Neg)
            .then_some(LabeledExample {
                x: nz,
                y: Label::Neg,
            })
    }
}

fn slab_score(stats: &CentroidStats, x: &[f64], y: Label) -> f64 {
    let mu = stats.centroid(y);
    stats
        .beta
        .iter()
        .zip(x.iter().zip(mu))
        .map(|(b, (xi, mi))| b * (xi - mi))
        .sum::<f64>()
        .abs()
}

/// Result of [`DefenseSpec::project_direction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub c: f64,
    /// The example was emitted as `(-c x, -y)`.
    pub flipped: bool,
}

impl Projection {
    pub fn apply(&self, x: &[f64], y: Label) -> LabeledExample {
        let s = if self.flipped { -self.c } else { self.c };
        LabeledExample {
            x: linalg::scale(x, s),
            y: if self.flipped { y.flip() } else { y },
        }
    }
}

/// Score of `ex` under a defense kind, before a threshold is chosen.
pub fn kind_score(
    kind: DefenseKind,
    stats: Option<&CentroidStats>,
    ex: &LabeledExample,
) -> Result<f64> {
    let stats =
        || stats.ok_or_else(|| Error::invalid(format!("{kind} score needs centroid statistics")));
    match kind {
        DefenseKind::L2Ball => Ok(linalg::norm(&ex.x)),
        DefenseKind::Centroid => Ok(linalg::dist(&ex.x, stats()?.centroid(ex.y))),
        DefenseKind::Slab => Ok(slab_score(stats()?, &ex.x, ex.y)),
        DefenseKind::LabelingOracle => Err(Error::UnsupportedVariant("labeling_oracle")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    /// Nearest-rank percentile in `(0, 100]`.
    Percentile(f64),
    /// Fraction of clean points kept, in `(0, 1]`.
    Retention(f64),
}

impl TauMode {
    fn fraction(self) -> Result<f64> {
        match self {
            TauMode::Percentile(p) if p > 0.0 && p <= 100.0 => Ok(p / 100.0),
            TauMode::Retention(q) if q > 0.0 && q <= 1.0 => Ok(q),
            other => Err(Error::Calibration(format!(
                "threshold level out of range: {other:?}"
            ))),
        }
    }
}

/// Smallest score `s` such that at least `fraction` of `scores` are `<= s`.
pub fn nearest_rank(scores: &[f64], fraction: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Calibration("no scores to calibrate on".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against 0.7 * 10 = 7.000000000000001
    let rank = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// Threshold for `kind` calibrated on the scores of a clean stream.
pub fn calibrate_tau(
    stream: &Stream,
    kind: DefenseKind,
    stats: Option<&CentroidStats>,
    mode: TauMode,
) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::Calibration("calibration stream is empty".into()));
    }
    let scores = stream
        .items()
        .iter()
        .map(|ex| kind_score(kind, stats, ex))
        .collect::<Result<Vec<_>>>()?;
    nearest_rank(&scores, mode.fraction()?)
}

/// The segment `{c u / ||u|| : 0 < c <= r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSegment {
    pub r: f64,
    pub u: Vec<f64>,
}

impl FeasibleSegment {
    pub fn new(r: f64, u: Vec<f64>) -> Result<Self> {
        if !(r > 0.0) || linalg::is_zero(&u) {
            return Err(Error::invalid(
                "segment needs r > 0 and a nonzero direction",
            ));
        }
        Ok(Self { r, u })
    }

    pub fn point(&self, c: f64) -> Vec<f64> {
        linalg::scale(&self.u, c / linalg::norm(&self.u))
    }
}

/// Longest segment from the origin along `u` that stays inside the ball
/// `||x - mu|| <= tau`. `None` when the ball misses the ray or does not
/// contain the segment's origin end.
pub fn centroid_segment_radius(mu: &[f64], tau: f64, u: &[f64]) -> Option<f64> {
    let un = linalg::norm(u);
    if un == 0.0 {
        return None;
    }
    let mn = linalg::norm(mu);
    // ||mu|| cos(alpha)
    let proj = if mn == 0.0 {
        0.0
    } else {
        linalg::dot(mu, u) / un
    };
    let disc = proj * proj - mn * mn + tau * tau;
    if disc < 0.0 {
        return None;
    }
    let (lo, hi) = (proj - disc.sqrt(), proj + disc.sqrt());
    (hi > 0.0 && lo <= 0.0).then_some(hi)
}

#[derive(Serialize, Deserialize)]
struct DefenseJson {
    kind: DefenseKind,
    #[serde(rename = "R")]
    radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_plus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_minus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle_bias: Option<f64>,
}

impl Serialize for DefenseSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut j = DefenseJson {
            kind: self.kind(),
            radius: self.radius(),
            tau: self.tau(),
            mu_plus: self.stats().map(|st| st.mu_plus.clone()),
            mu_minus: self.stats().map(|st| st.mu_minus.clone()),
            oracle_weights: None,
            oracle_bias: None,
        };
        if let DefenseSpec::LabelingOracle { oracle, .. } = self {
            match oracle {
                LabelingOracle::Linear { weights, bias } => {
                    j.oracle_weights = Some(weights.clone());
                    j.oracle_bias = Some(*bias);
                }
                LabelingOracle::Custom(_) => {
                    return Err(serde::ser::Error::custom(
                        "custom labeling oracles cannot be serialized",
                    ))
                }
            }
        }
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DefenseSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = DefenseJson::deserialize(d)?;
        let stats = || match (&j.mu_plus, &j.mu_minus) {
            (Some(p), Some(m)) => {
                CentroidStats::new(p.clone(), m.clone()).map_err(D::Error::custom)
            }
            _ => Err(D::Error::custom("mu_plus and mu_minus are required")),
        };
        let tau = || j.tau.ok_or_else(|| D::Error::custom("tau is required"));
        let spec = match j.kind {
            DefenseKind::L2Ball => DefenseSpec::l2_ball(j.radius),
            DefenseKind::Centroid => DefenseSpec::centroid(j.radius, tau()?, stats()?),
            DefenseKind::Slab => DefenseSpec::slab(j.radius, tau()?, stats()?),
            DefenseKind::LabelingOracle => {
                let weights = j
                    .oracle_weights
                    .clone()
                    .ok_or_else(|| D::Error::custom("oracle_weights is required"))?;
                DefenseSpec::labeling_oracle(
                    j.radius,
                    LabelingOracle::Linear {
                        weights,
                        bias: j.oracle_bias.unwrap_or(0.0),
                    },
                )
            }
        };
        spec.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(x: &[f64], y: Label) -> LabeledExample {
        LabeledExample::new(x.to_vec(), y).unwrap()
    }

    fn stats(p: &[f64], m: &[f64]) -> CentroidStats {
        CentroidStats::new(p.to_vec(), m.to_vec()).unwrap()
    }

    fn sign_oracle() -> LabelingOracle {
        LabelingOracle::Linear {
            weights: vec![1.0, 0.0],
            bias: 0.0,
        }
    }

    #[test]
    fn ball_boundary_is_inclusive() {
        let b = DefenseSpec::l2_ball(1.0).unwrap();
        assert!(b.contains(&ex(&[0.6, 0.8], Label::Pos)));
        assert!(b.contains(&ex(&[0.6, 0.8], Label::Neg)));
        assert!(!b.contains(&ex(&[0.6, 0.81], Label::Neg)));
    }

    #[test]
    fn slab_and_centroid_membership() {
        let s = DefenseSpec::slab(10.0, 1.0, stats(&[1.0, 0.0], &[-1.0, 0.0])).unwrap();
        assert!(s.contains(&ex(&[0.5, 3.0], Label::Pos)));
        assert!(!s.contains(&ex(&[0.4, 3.0], Label::Pos)));
        let c = DefenseSpec::centroid(10.0, 1.0, stats(&[2.0, 0.0], &[-1.0, 0.0])).unwrap();
        assert!(!c.contains(&ex(&[0.0, 0.0], Label::Pos)));
        assert!(c.contains(&ex(&[0.0, 0.0], Label::Neg)));
    }

    #[test]
    fn norm_cap_applies_to_data_driven_defenses() {
        let c = DefenseSpec::centroid(1.0, 100.0, stats(&[0.0, 0.0], &[0.0, 0.0])).unwrap();
        assert!(!c.contains(&ex(&[2.0, 0.0], Label::Pos)));
    }

    #[test]
    fn oracle_membership_and_one_sided() {
        let o = DefenseSpec::labeling_oracle(1.0, sign_oracle()).unwrap();
        assert!(o.contains(&ex(&[0.5, 0.0], Label::Pos)));
        assert!(!o.contains(&ex(&[0.5, 0.0], Label::Neg)));
        assert!(o.one_sided_contains(&[0.5, 0.0]));
        // (-z, -1) with z = [-0.5, 0] is ([0.5, 0], -1), which the oracle labels +1
        assert!(!o.one_sided_contains(&[-0.5, 0.0]));
        assert!(o.contains(&ex(&[-0.5, 0.0], Label::Neg)));
        let custom = DefenseSpec::labeling_oracle(
            1.0,
            LabelingOracle::Custom(Arc::new(|_: &[f64]| Label::Neg)),
        )
        .unwrap();
        assert!(custom.contains(&ex(&[0.1, 0.1], Label::Neg)));
        assert!(serde_json::to_string(&custom).is_err());
    }

    #[test]
    fn one_sided_ball_is_norm_check() {
        let b = DefenseSpec::l2_ball(2.0).unwrap();
        assert!(b.one_sided_contains(&[2.0, 0.0]));
        assert!(!b.one_sided_contains(&[2.0, 0.1]));
    }

    #[test]
    fn one_sided_centroid_checks_both_memberships() {
        let st = stats(&[2.0, 0.0], &[1.0, 1.0]);
        for tau in [0.5, 1.0, 1.5, 2.0, 2.5] {
            let c = DefenseSpec::centroid(10.0, tau, st.clone()).unwrap();
            let brute =
                linalg::norm(&st.mu_plus) <= tau || linalg::norm(&linalg::neg(&st.mu_minus)) <= tau;
            assert_eq!(c.one_sided_contains(&[0.0, 0.0]), brute, "tau={tau}");
        }
    }

    #[test]
    fn centroid_fit() {
        let s = Stream::clean(vec![
            ex(&[1.0, 0.0], Label::Pos),
            ex(&[3.0, 0.0], Label::Pos),
            ex(&[-1.0, 0.0], Label::Neg),
        ]);
        let st = fit_centroids(&s).unwrap();
        assert_eq!(st.mu_plus, vec![2.0, 0.0]);
        assert_eq!(st.mu_minus, vec![-1.0, 0.0]);
        assert_eq!(st.beta, vec![3.0, 0.0]);

        let mut rev = s.items().to_vec();
        rev.reverse();
        assert_eq!(fit_centroids(&Stream::clean(rev)).unwrap(), st);

        let one_class = Stream::clean(vec![ex(&[1.0], Label::Pos)]);
        assert!(matches!(
            fit_centroids(&one_class),
            Err(Error::Calibration(_))
        ));
        assert!(matches!(
            fit_centroids(&Stream::new()),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn single_example_per_class_is_its_own_centroid() {
        let s = Stream::clean(vec![
            ex(&[0.3, 0.1], Label::Neg),
            ex(&[-0.2, 0.9], Label::Pos),
        ]);
        let st = fit_centroids(&s).unwrap();
        assert_eq!(st.mu_plus, vec![-0.2, 0.9]);
        assert_eq!(st.mu_minus, vec![0.3, 0.1]);
    }

    #[test]
    fn scores() {
        let slab = DefenseSpec::slab(10.0, 1.0, stats(&[1.0, 0.0], &[-1.0, 0.0])).unwrap();
        assert_eq!(slab.score(&ex(&[1.0, 7.0], Label::Pos)).unwrap(), 0.0);
        let cen = DefenseSpec::centroid(10.0, 1.0, stats(&[1.0, 2.0], &[-1.0, 0.0])).unwrap();
        assert_eq!(cen.score(&ex(&[1.0, 2.0], Label::Pos)).unwrap(), 0.0);
        let ball = DefenseSpec::l2_ball(1.0).unwrap();
        assert_eq!(ball.score(&ex(&[3.0, 4.0], Label::Neg)).unwrap(), 5.0);
        let o = DefenseSpec::labeling_oracle(1.0, sign_oracle()).unwrap();
        assert!(matches!(
            o.score(&ex(&[1.0, 0.0], Label::Pos)),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn nearest_rank_percentiles() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&s, 0.5).unwrap(), 5.0);
        assert_eq!(nearest_rank(&s, 0.1).unwrap(), 1.0);
        assert_eq!(nearest_rank(&s, 1.0).unwrap(), 10.0);
        assert_eq!(nearest_rank(&s, 0.7).unwrap(), 7.0);
        assert!(nearest_rank(&[], 0.5).is_err());
    }

    #[test]
    fn calibrate_on_norms() {
        let stream: Stream = (1..=10).map(|i| ex(&[i as f64], Label::Pos)).collect();
        let t = |m| calibrate_tau(&stream, DefenseKind::L2Ball, None, m).unwrap();
        assert_eq!(t(TauMode::Percentile(50.0)), 5.0);
        assert_eq!(t(TauMode::Retention(1.0)), 10.0);
        assert_eq!(t(TauMode::Percentile(10.0)), 1.0);
        assert!(calibrate_tau(
            &Stream::new(),
            DefenseKind::L2Ball,
            None,
            TauMode::Retention(0.5)
        )
        .is_err());
        assert!(
            calibrate_tau(&stream, DefenseKind::L2Ball, None, TauMode::Retention(0.0)).is_err()
        );
        assert!(calibrate_tau(&stream, DefenseKind::Slab, None, TauMode::Retention(0.5)).is_err());
    }

    #[test]
    fn projection_l2_closed_form() {
        let b = DefenseSpec::l2_ball(2.0).unwrap();
        let p = b.project_direction(&[3.0, 4.0], Label::Pos, 2.0).unwrap();
        assert!((p.c - 0.4).abs() < 1e-15);
        assert!(!p.flipped);
        let p = b.project_direction(&[0.3, 0.4], Label::Pos, 2.0).unwrap();
        assert_eq!(p.c, 1.0);
    }

    #[test]
    fn projection_slab_interval() {
        let s = DefenseSpec::slab(10.0, 1.0, stats(&[1.0, 0.0], &[-1.0, 0.0])).unwrap();
        let p = s.project_direction(&[2.0, 0.0], Label::Pos, 10.0).unwrap();
        assert!((p.c - 0.75).abs() < 1e-9, "{p:?}");
        assert!(!p.flipped);
        assert!(s.contains(&p.apply(&[2.0, 0.0], Label::Pos)));
    }

    #[test]
    fn projection_prefers_flip_when_closer() {
        // (c x, +1) needs c in [1/4, 3/4]; (-c x, -1) has the same slab and is symmetric,
        // so shift mu_minus to make the flipped side contain c = 1.
        let s = DefenseSpec::slab(10.0, 1.0, stats(&[1.0, 0.0], &[-2.0, 0.0])).unwrap();
        let p = s.project_direction(&[2.0, 0.0], Label::Pos, 10.0).unwrap();
        assert!(p.flipped);
        assert!((p.c - 1.0).abs() < 1e-12);
        assert!(s.contains(&p.apply(&[2.0, 0.0], Label::Pos)));
    }

    #[test]
    fn projection_infeasible() {
        let c = DefenseSpec::centroid(10.0, 0.5, stats(&[0.0, 3.0], &[0.0, 3.0])).unwrap();
        assert!(matches!(
            c.project_direction(&[1.0, 0.0], Label::Pos, 10.0),
            Err(Error::Infeasible)
        ));
        assert!(c.project_direction(&[0.0, 0.0], Label::Pos, 10.0).is_err());
    }

    /// Grid scan over `c` used as an independent oracle for projections.
    fn grid_best(def: &DefenseSpec, x: &[f64], y: Label, r_cap: f64) -> Option<f64> {
        let c_max = r_cap.min(def.radius()) / linalg::norm(x);
        let n = (c_max / 1e-4).ceil() as usize;
        (1..=n)
            .map(|k| (k as f64 * 1e-4).min(c_max))
            .filter(|&c| {
                def.contains_parts(&linalg::scale(x, c), y)
                    || def.contains_parts(&linalg::scale(x, -c), y.flip())
            })
            .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
    }

    #[test]
    fn centroid_projection_matches_grid_scan() {
        let def = DefenseSpec::centroid(3.0, 0.8, stats(&[1.0, 0.5], &[-0.5, 1.0])).unwrap();
        for x in [[2.0, 1.0], [0.5, 0.2], [-1.0, 3.0], [4.0, -1.0]] {
            let got = def.project_direction(&x, Label::Pos, 3.0);
            let want = grid_best(&def, &x, Label::Pos, 3.0);
            match (got, want) {
                (Ok(p), Some(w)) => assert!((p.c - 1.0).abs() <= (w - 1.0).abs() + 1e-4, "{x:?}"),
                (Err(Error::Infeasible), None) => {}
                (g, w) => panic!("{x:?}: {g:?} vs {w:?}"),
            }
        }
    }

    #[test]
    fn oracle_projection_by_grid() {
        let o = DefenseSpec::labeling_oracle(1.0, sign_oracle()).unwrap();
        let p = o.project_direction(&[2.0, 0.0], Label::Pos, 1.0).unwrap();
        assert!(!p.flipped);
        assert!((p.c - 0.5).abs() < 1e-12);
        let p = o.project_direction(&[-2.0, 0.0], Label::Neg, 1.0).unwrap();
        assert!((p.c - 0.5).abs() < 1e-12);
        assert!(matches!(
            o.project_direction(&[-2.0, 0.0], Label::Pos, 1.0),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn segment_radius_cases() {
        assert_eq!(
            centroid_segment_radius(&[0.0, 0.0], 2.0, &[0.3, -1.0]),
            Some(2.0)
        );
        assert_eq!(
            centroid_segment_radius(&[1.0, 0.0], 2.0, &[1.0, 0.0]),
            Some(3.0)
        );
        let r = centroid_segment_radius(&[1.0, 0.0], 2.0, &[0.0, 1.0]).unwrap();
        assert!((r - 3f64.sqrt()).abs() < 1e-15);
        assert!((linalg::dist(&[0.0, r], &[1.0, 0.0]) - 2.0).abs() < 1e-12);
        assert_eq!(centroid_segment_radius(&[3.0, 0.0], 1.0, &[0.0, 1.0]), None);
        assert_eq!(centroid_segment_radius(&[3.0, 0.0], 1.0, &[1.0, 0.0]), None);
    }

    #[test]
    fn json_roundtrip_and_schema() {
        let s = DefenseSpec::slab(2.0, 0.5, stats(&[1.0, 0.0], &[-1.0, 0.0])).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["kind"], "slab");
        assert_eq!(j["R"], 2.0);
        assert_eq!(j["tau"], 0.5);
        let back: DefenseSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let ball: DefenseSpec = serde_json::from_str(r#"{"kind":"l2_ball","R":3.0}"#).unwrap();
        assert_eq!(ball, DefenseSpec::l2_ball(3.0).unwrap());
        assert!(serde_json::from_str::<DefenseSpec>(r#"{"kind":"centroid","R":3.0}"#).is_err());
        assert!(serde_json::from_str::<DefenseSpec>(r#"{"kind":"l2_ball","R":-1.0}"#).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("l2".parse::<DefenseKind>().unwrap(), DefenseKind::L2Ball);
        assert_eq!("Slab".parse::<DefenseKind>().unwrap(), DefenseKind::Slab);
        assert!("knn".parse::<DefenseKind>().is_err());
    }

    fn arb_defense() -> impl Strategy<Value = DefenseSpec> {
        let st = (
            prop::collection::vec(-2.0f64..2.0, 3),
            prop::collection::vec(-2.0f64..2.0, 3),
        )
            .prop_map(|(p, m)| CentroidStats::new(p, m).unwrap());
        (0.5f64..4.0, 0.0f64..3.0, st, 0u8..3).prop_map(|(r, tau, st, k)| match k {
            0 => DefenseSpec::l2_ball(r).unwrap(),
            1 => DefenseSpec::centroid(r, tau, st).unwrap(),
            _ => DefenseSpec::slab(r, tau, st).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn contains_iff_score_and_norm(def in arb_defense(), x in prop::collection::vec(-3.0f64..3.0, 3), pos in any::<bool>()) {
            let e = ex(&x, if pos { Label::Pos } else { Label::Neg });
            let by_score = def.score(&e).unwrap() <= def.threshold().unwrap() && linalg::norm(&x) <= def.radius();
            prop_assert_eq!(def.contains(&e), by_score);
        }

        #[test]
        fn projection_is_feasible_and_optimal(def in arb_defense(), x in prop::collection::vec(-3.0f64..3.0, 3), r_cap in 0.5f64..4.0) {
            prop_assume!(linalg::norm(&x) > 1e-3);
            let got = def.project_direction(&x, Label::Pos, r_cap);
            let want = grid_best(&def, &x, Label::Pos, r_cap);
            match got {
                Ok(p) => {
                    prop_assert!(p.c > 0.0 && p.c <= r_cap.min(def.radius()) / linalg::norm(&x) + 1e-12);
                    prop_assert!(def.contains(&p.apply(&x, Label::Pos)));
                    if let Some(w) = want {
                        prop_assert!((p.c - 1.0).abs() <= (w - 1.0).abs() + 1e-4);
                    }
                }
                Err(Error::Infeasible) => prop_assert!(want.is_none()),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn tau_is_monotone_in_percentile(scores in prop::collection::vec(0.0f64..10.0, 1..50), p1 in 1.0f64..100.0, p2 in 1.0f64..100.0) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(nearest_rank(&scores, lo / 100.0).unwrap() <= nearest_rank(&scores, hi / 100.0).unwrap());
        }

        #[test]
        fn slab_score_ignores_beta_sign(p in prop::collection::vec(-2.0f64..2.0, 3), m in prop::collection::vec(-2.0f64..2.0, 3), x in prop::collection::vec(-3.0f64..3.0, 3)) {
            let a = CentroidStats::new(p.clone(), m.clone()).unwrap();
            let mut b = a.clone();
            b.beta = linalg::neg(&b.beta);
            for y in [Label::Pos, Label::Neg] {
                prop_assert_eq!(slab_score(&a, &x, y), slab_score(&b, &x, y));
            }
        }

        #[test]
        fn projected_points_are_feasible(def in arb_defense(), x in prop::collection::vec(-5.0f64..5.0, 3)) {
            if let Some(z) = def.project_one_sided(&x) {
                prop_assert!(def.one_sided_contains(&z));
                prop_assert!(def.materialize_one_sided(&z).is_some_and(|e| def.contains(&e)));
            }
        }
    }
}
