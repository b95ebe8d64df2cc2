use crate::data::{LabeledExample, Model};
use crate::error::{Error, Result};
use crate::learner::{error_rate, sigmoid};
use crate::linalg;

/// Norm at which the offline fit stops growing on separable data.
const NORM_CAP: f64 = 1e6;

/// Full-batch gradient descent on the mean logistic loss with step `1 / L`,
/// `L = sum ||x||^2 / (4 n)`. Stops when the gradient norm drops below `1e-6`
/// or after `1e4` epochs; the iterate is rescaled onto the ball of radius
/// `1e6` whenever it leaves it.
pub fn fit_offline(examples: &[LabeledExample]) -> Result<Model> {
    let d = examples
        .first()
        .map(|e| e.dim())
        .ok_or_else(|| Error::invalid("offline fit needs at least one example"))?;
    for e in examples {
        crate::error::check_dim(d, e.dim())?;
    }
    let n = examples.len() as f64;
    let lip = examples
        .iter()
        .map(|e| linalg::dot(&e.x, &e.x))
        .sum::<f64>()
        / (4.0 * n);
    let mut theta = vec![0.0; d];
    if lip == 0.0 {
        return Ok(Model::new(theta));
    }
    let lr = 1.0 / lip;
    let mut grad = vec![0.0; d];
    for _ in 0..10_000 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for e in examples {
            let ys = e.y.sign();
            let w = -ys * sigmoid(-ys * linalg::dot(&theta, &e.x)) / n;
            linalg::axpy(w, &e.x, &mut grad);
        }
        if linalg::norm(&grad) < 1e-6 {
            break;
        }
        linalg::axpy(-lr, &grad, &mut theta);
        let tn = linalg::norm(&theta);
        if tn > NORM_CAP {
            theta = linalg::scale(&theta, NORM_CAP / tn);
        }
    }
    Ok(Model::new(theta))
}

/// 0/1 error of [`fit_offline`] on its own training examples.
pub fn offline_optimal_error(examples: &[LabeledExample]) -> Result<f64> {
    let m = fit_offline(examples)?;
    error_rate(&m, examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::tasks::{gaussian_points, gen_sign_task};

    #[test]
    fn separable_data_has_zero_error() {
        let s = gen_sign_task(200, 2);
        assert_eq!(offline_optimal_error(s.items()).unwrap(), 0.0);
        let pts = gaussian_points(3, 12.0, 1.0, 400, 8).unwrap();
        assert_eq!(offline_optimal_error(&pts).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_classes_near_half() {
        let pts = gaussian_points(2, 0.0, 1.0, 4000, 3).unwrap();
        let e = offline_optimal_error(&pts).unwrap();
        // sd of a fair error rate over 4000 points is 0.0079
        assert!((e - 0.5).abs() < 5.0 * 0.0079, "{e}");
    }

    #[test]
    fn converges_on_overlapping_classes() {
        let pts = vec![
            LabeledExample::new(vec![1.0], Label::Pos).unwrap(),
            LabeledExample::new(vec![1.0], Label::Pos).unwrap(),
            LabeledExample::new(vec![1.0], Label::Neg).unwrap(),
        ];
        // minimizer of 2 softplus(-t) + softplus(t) is ln 2
        let m = fit_offline(&pts).unwrap();
        assert!((m.theta[0] - 2f64.ln()).abs() < 1e-5);
    }
}
