use super::{ClassifierError, LogRegParams};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn score(w: &[f64; 3], x: &[f64; 2]) -> f64 {
    w[0] + w[1] * x[0] + w[2] * x[1]
}

/// Full-batch gradient descent per class from zero weights.
pub(super) fn fit(
    data: &[(&str, [f64; 2])],
    classes: &[String],
    p: &LogRegParams,
) -> Result<Vec<[f64; 3]>, ClassifierError> {
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) || p.max_iter == 0 {
        return Err(ClassifierError::Train("learning_rate and max_iter must be positive".into()));
    }
    let n = data.len() as f64;
    Ok(classes
        .iter()
        .map(|class| {
            let y: Vec<f64> = data.iter().map(|(l, _)| if *l == class { 1.0 } else { 0.0 }).collect();
            let mut w = [0.0; 3];
            for _ in 0..p.max_iter {
                let mut g = [0.0; 3];
                for ((_, x), &t) in data.iter().zip(&y) {
                    let e = sigmoid(score(&w, x)) - t;
                    g[0] += e;
                    g[1] += e * x[0];
                    g[2] += e * x[1];
                }
                for j in 0..3 {
                    g[j] = g[j] / n + if j > 0 { p.l2 * w[j] } else { 0.0 };
                }
                for j in 0..3 {
                    w[j] -= p.learning_rate * g[j];
                }
                if g.iter().all(|v| v.abs() < p.tol) {
                    break;
                }
            }
            w
        })
        .collect())
}

pub(super) fn probabilities(weights: &[[f64; 3]], x: &[f64; 2]) -> Vec<f64> {
    weights.iter().map(|w| sigmoid(score(w, x))).collect()
}
