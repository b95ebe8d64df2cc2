use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{clean_start, AttackOutcome, Draft, SemiOnlineAttackConfig};
use crate::data::{Label, LabeledExample, LearnerConfig, Model, Stream};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::learner::{cosine_similarity, ogd_step_in_place};
use crate::linalg;

/// Places every same-label poison point at one location: the feasible point
/// of largest norm along `y (theta_star - theta_tilde_0)`.
///
/// Tries the label splits all +1, half and half, and all -1, each under the
/// positive-first, negative-first and `random_orders` shuffled orderings, and
/// keeps the variant whose final model has the highest cosine similarity to
/// the target. Splits that need an infeasible location are skipped.
pub fn concentrated_attack(
    config: &LearnerConfig,
    clean: &Stream,
    atk: &SemiOnlineAttackConfig,
    defense: &DefenseSpec,
    random_orders: usize,
) -> Result<AttackOutcome> {
    if random_orders == 0 {
        return Err(Error::invalid(
            "concentrated attack needs at least one random order",
        ));
    }
    let theta_tilde0 = clean_start(config, clean, atk, defense)?;
    let dist0 = theta_tilde0.dist(&atk.theta_star);
    let mut draft = Draft::new(clean, atk.gamma0(dist0));
    let k = atk.budget;
    if k == 0 {
        return draft.finish(config, atk, defense);
    }
    if dist0 == 0.0 {
        draft.diagnostic = Some("clean model already equals the target".into());
        return draft.finish(config, atk, defense);
    }
    let unit = linalg::scale(
        &linalg::sub(&atk.theta_star.theta, &theta_tilde0.theta),
        1.0 / dist0,
    );
    let location = |y: Label| -> Option<LabeledExample> {
        let x = linalg::scale(&unit, y.sign());
        let c = defense.max_feasible_scale(&x, y, atk.radius)?;
        let ex = LabeledExample {
            x: linalg::scale(&x, c),
            y,
        };
        defense.contains(&ex).then_some(ex)
    };
    let pos = location(Label::Pos);
    let neg = location(Label::Neg);

    let mut rng = ChaCha8Rng::seed_from_u64(atk.seed);
    let mut best: Option<(f64, f64, Vec<Label>)> = None;
    for n_pos in [k, k / 2, 0] {
        let n_neg = k - n_pos;
        if (n_pos > 0 && pos.is_none()) || (n_neg > 0 && neg.is_none()) {
            continue;
        }
        let mut orders = Vec::with_capacity(2 + random_orders);
        let pos_first: Vec<Label> = std::iter::repeat_n(Label::Pos, n_pos)
            .chain(std::iter::repeat_n(Label::Neg, n_neg))
            .collect();
        let mut neg_first = pos_first.clone();
        neg_first.reverse();
        orders.push(pos_first.clone());
        orders.push(neg_first);
        for _ in 0..random_orders {
            let mut o = pos_first.clone();
            o.shuffle(&mut rng);
            orders.push(o);
        }
        for order in orders {
            let mut theta = theta_tilde0.theta.clone();
            for y in &order {
                let ex = if *y == Label::Pos {
                    pos.as_ref()
                } else {
                    neg.as_ref()
                };
                ogd_step_in_place(&mut theta, ex.expect("checked above"), config.eta);
            }
            let model = Model::new(theta);
            let Ok(cos) = cosine_similarity(&model, &atk.theta_star) else {
                continue;
            };
            let dist = model.dist(&atk.theta_star);
            let better = best
                .as_ref()
                .is_none_or(|(bc, bd, _)| cos > *bc || (cos == *bc && dist < *bd));
            if better {
                best = Some((cos, dist, order));
            }
        }
    }

    match best {
        Some((_, _, order)) => {
            for y in order {
                let ex = if y == Label::Pos {
                    pos.clone()
                } else {
                    neg.clone()
                };
                draft.push(ex.expect("checked above"));
            }
        }
        None => draft.diagnostic = Some("no feasible concentrated location".into()),
    }
    draft.finish(config, atk, defense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defense::CentroidStats;

    #[test]
    fn l2_all_positive_points_sit_on_the_sphere() {
        let cfg = LearnerConfig::from_zero(1.0, 2).unwrap();
        let ball = DefenseSpec::l2_ball(2.0).unwrap();
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![3.0, 4.0]), 6, 1e-3, 2.0, 1.0).unwrap();
        let out = concentrated_attack(&cfg, &Stream::new(), &atk, &ball, 3).unwrap();
        assert_eq!(out.inserted_count, 6);
        // for L2 every split reaches the same location set; positives are +R d / |d|
        for p in out.poison_points() {
            let want = if p.y == Label::Pos {
                [1.2, 1.6]
            } else {
                [-1.2, -1.6]
            };
            assert!(linalg::dist(&p.x, &want) < 1e-12);
        }
    }

    #[test]
    fn zero_budget_unchanged() {
        let cfg = LearnerConfig::from_zero(1.0, 2).unwrap();
        let ball = DefenseSpec::l2_ball(2.0).unwrap();
        let atk =
            SemiOnlineAttackConfig::new(Model::new(vec![3.0, 4.0]), 0, 1e-3, 2.0, 1.0).unwrap();
        let clean = Stream::clean(vec![
            LabeledExample::new(vec![1.0, 0.0], Label::Pos).unwrap()
        ]);
        let out = concentrated_attack(&cfg, &clean, &atk, &ball, 1).unwrap();
        assert_eq!(out.poisoned_stream, clean);
    }

    #[test]
    fn returned_variant_is_the_argmax() {
        let cfg = LearnerConfig::from_zero(0.5, 2).unwrap();
        let stats = CentroidStats::new(vec![1.0, 1.0], vec![-1.0, 0.5]).unwrap();
        let def = DefenseSpec::slab(3.0, 0.8, stats).unwrap();
        let atk = SemiOnlineAttackConfig::new(Model::new(vec![1.0, 2.0]), 5, 1e-3, 3.0, 0.5)
            .unwrap()
            .with_seed(4);
        let out = concentrated_attack(&cfg, &Stream::new(), &atk, &def, 4).unwrap();
        assert!(out.poison_points().iter().all(|p| def.contains(p)));
        let got = cosine_similarity(&out.final_model, &atk.theta_star).unwrap();
        // every split of identical points in either block order
        let n = linalg::norm(&atk.theta_star.theta);
        let unit = linalg::scale(&atk.theta_star.theta, 1.0 / n);
        let at = |y: Label| {
            let x = linalg::scale(&unit, y.sign());
            def.max_feasible_scale(&x, y, 3.0).map(|c| LabeledExample {
                x: linalg::scale(&x, c),
                y,
            })
        };
        let (pos, neg) = (at(Label::Pos), at(Label::Neg));
        assert!(pos.is_some() && neg.is_some());
        for n_pos in [5usize, 2, 0] {
            for first_pos in [true, false] {
                let mut order = vec![true; n_pos];
                order.extend(vec![false; 5 - n_pos]);
                if !first_pos {
                    order.reverse();
                }
                let mut theta = vec![0.0, 0.0];
                let mut ok = true;
                for is_pos in order {
                    match if is_pos { &pos } else { &neg } {
                        Some(ex) => ogd_step_in_place(&mut theta, ex, 0.5),
                        None => ok = false,
                    }
                }
                if let (true, Ok(c)) = (ok, cosine_similarity(&Model::new(theta), &atk.theta_star))
                {
                    assert!(got >= c - 1e-12);
                }
            }
        }
    }
}
