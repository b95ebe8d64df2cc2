//! Fixtures shared by the benchmarks.

use ogd_poison::defense::{calibrate_tau, fit_centroids};
use ogd_poison::learner::ogd_final;
use ogd_poison::linalg::SparseVector;
use ogd_poison::tasks::{gen_gaussian_task, NormScope, SplitSizes};
use ogd_poison::{
    DatasetBundle, DefenseKind, DefenseSpec, LearnerConfig, Model, SemiOnlineAttackConfig, TauMode,
};

/// A two-Gaussian task with everything an attack needs already fitted.
pub struct AttackFixture {
    pub bundle: DatasetBundle,
    pub config: LearnerConfig,
    pub defense: DefenseSpec,
    pub attack: SemiOnlineAttackConfig,
}

pub fn gaussian_bundle(d: usize, train: usize) -> DatasetBundle {
    let sizes = SplitSizes {
        init: 200,
        train,
        test: 200,
    };
    gen_gaussian_task(d, 4.0, 1.0, sizes, NormScope::AllPoints, 7).expect("valid task")
}

/// Slab defense at the median score, target the negated clean model.
pub fn attack_fixture(d: usize, train: usize, budget: usize) -> AttackFixture {
    let bundle = gaussian_bundle(d, train);
    let config = LearnerConfig::from_zero(0.1, d).expect("valid config");
    let stats = fit_centroids(&bundle.init).expect("both classes present");
    let tau = calibrate_tau(
        &bundle.train,
        DefenseKind::Slab,
        Some(&stats),
        TauMode::Percentile(50.0),
    )
    .expect("calibrates");
    let radius = bundle
        .train
        .items()
        .iter()
        .map(|e| e.x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let defense = DefenseSpec::slab(radius, tau, stats).expect("valid defense");
    let clean = ogd_final(&config, &bundle.train, None).expect("runs");
    let target = Model::new(clean.theta.iter().map(|v| -v).collect());
    let attack =
        SemiOnlineAttackConfig::new(target, budget, 1e-3, radius, 0.1).expect("valid attack");
    AttackFixture {
        bundle,
        config,
        defense,
        attack,
    }
}

/// One-hot sparse vectors cycling through `d` coordinates.
pub fn sparse_basis(d: usize, n: usize) -> Vec<SparseVector> {
    (0..n)
        .map(|i| SparseVector::new(d, vec![i % d], vec![1.0]).expect("index in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_consistent() {
        let f = attack_fixture(3, 100, 10);
        assert_eq!(f.bundle.dim(), Some(3));
        assert_eq!(f.attack.budget, 10);
        assert_eq!(sparse_basis(4, 9).len(), 9);
    }
}
