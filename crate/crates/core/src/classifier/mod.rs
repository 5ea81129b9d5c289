//! Device-identity classifiers over fingerprint features: KNN (the
//! production model) and one-vs-rest logistic regression as a baseline.

mod logreg;
mod metrics;

pub use metrics::{evaluate, EvalReport};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{Dataset, FeatureVector};
use crate::rng::rng_from;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("stratification: {0}")]
    Split(String),
    #[error("training: {0}")]
    Train(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MIN_ROWS_PER_DEVICE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum Algo {
    Knn { k: usize },
    LogisticRegression(LogRegParams),
}

impl Default for Algo {
    fn default() -> Self {
        Algo::Knn { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once every gradient component is below this.
    pub tol: f64,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.5,
            max_iter: 5000,
            tol: 1e-6,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Population statistics; constant features get unit scale.
    pub fn fit(xs: &[[f64; 2]]) -> Self {
        let n = xs.len() as f64;
        let mut means = vec![0.0; 2];
        let mut stds = vec![0.0; 2];
        for d in 0..2 {
            let m = xs.iter().map(|x| x[d]).sum::<f64>() / n;
            let v = xs.iter().map(|x| (x[d] - m).powi(2)).sum::<f64>() / n;
            means[d] = m;
            stds[d] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        Scaler { means, stds }
    }

    pub fn apply(&self, x: &[f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.means[0]) / self.stds[0],
            (x[1] - self.means[1]) / self.stds[1],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPoint {
    pub label: String,
    pub x: [f64; 2],
}

/// On-disk layout: `{algo, k?, weights?, points?, scaler, classes, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Per class: `[bias, w_cfo, w_skew]` in standardized space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<[f64; 3]>>,
    /// Standardized training points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<StoredPoint>>,
    pub scaler: Scaler,
    /// Sorted class labels.
    pub classes: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub device_id: String,
    pub confidence: f64,
}

fn labeled(rows: &[FeatureVector]) -> Result<Vec<(&str, [f64; 2])>, ClassifierError> {
    rows.iter()
        .map(|f| {
            let label = f
                .device_id
                .as_deref()
                .ok_or_else(|| ClassifierError::Input("feature vector without a label".into()))?;
            let x = f.as_array();
            if !x.iter().all(|v| v.is_finite()) {
                return Err(ClassifierError::Input(format!("non-finite features for {label}")));
            }
            Ok((label, x))
        })
        .collect()
}

/// Stratified split: each device's rows are shuffled with a stream derived
/// from `(seed, device index in label order)` and the first
/// `round(n·fraction)` go to training. Both halves keep input order.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), ClassifierError> {
    let rows: Vec<FeatureVector> = dataset.rows.iter().map(|r| r.features()).collect();
    split_features(&rows, train_fraction, seed)
}

pub fn split_features(
    rows: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), ClassifierError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifierError::Split(format!(
            "train_fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    if rows.is_empty() {
        return Err(ClassifierError::Split("empty dataset".into()));
    }
    let labels = labeled(rows)?;
    let mut by_device: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (l, _)) in labels.iter().enumerate() {
        by_device.entry(l).or_default().push(i);
    }
    let mut is_train = vec![false; rows.len()];
    for (d, (device, idx)) in by_device.iter_mut().enumerate() {
        if idx.len() < MIN_ROWS_PER_DEVICE {
            return Err(ClassifierError::Split(format!(
                "{device} has {} rows, need at least {MIN_ROWS_PER_DEVICE}",
                idx.len()
            )));
        }
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        if n_train == 0 || n_train == idx.len() {
            return Err(ClassifierError::Split(format!(
                "{device}: fraction {train_fraction} leaves an empty side"
            )));
        }
        idx.shuffle(&mut rng_from(seed, &[d as u64]));
        for &i in &idx[..n_train] {
            is_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in rows.iter().zip(is_train) {
        if t {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((train, test))
}

pub fn train(rows: &[FeatureVector], algo: &Algo, seed: u64) -> Result<TrainedModel, ClassifierError> {
    let data = labeled(rows)?;
    let classes: Vec<String> = data
        .iter()
        .map(|(l, _)| l.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(ClassifierError::Train(format!(
            "need at least 2 classes, got {}",
            classes.len()
        )));
    }
    let raw: Vec<[f64; 2]> = data.iter().map(|(_, x)| *x).collect();
    let scaler = Scaler::fit(&raw);
    let scaled: Vec<(&str, [f64; 2])> = data.iter().map(|(l, x)| (*l, scaler.apply(x))).collect();

    match *algo {
        Algo::Knn { k } => {
            if k == 0 || k % 2 == 0 {
                return Err(ClassifierError::Train(format!("k must be odd and positive, got {k}")));
            }
            Ok(TrainedModel {
                algo: "knn".into(),
                k: Some(k),
                weights: None,
                points: Some(
                    scaled
                        .into_iter()
                        .map(|(l, x)| StoredPoint { label: l.to_string(), x })
                        .collect(),
                ),
                scaler,
                classes,
                seed,
            })
        }
        Algo::LogisticRegression(params) => {
            let weights = logreg::fit(&scaled, &classes, &params)?;
            Ok(TrainedModel {
                algo: "logistic_regression".into(),
                k: None,
                weights: Some(weights),
                points: None,
                scaler,
                classes,
                seed,
            })
        }
    }
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<Vec<u8>, ClassifierError> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let m: TrainedModel = serde_json::from_slice(bytes)?;
        m.check()?;
        Ok(m)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        w.write_all(&self.to_json()?)?;
        Ok(())
    }

    fn check(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::Input(format!("model file: {m}")));
        if self.scaler.means.len() != 2 || self.scaler.stds.len() != 2 {
            return bad("scaler must have two features");
        }
        match self.algo.as_str() {
            "knn" => match (self.k, &self.points) {
                (Some(k), Some(p)) if k % 2 == 1 && !p.is_empty() => Ok(()),
                _ => bad("knn needs odd k and points"),
            },
            "logistic_regression" => match &self.weights {
                Some(w) if w.len() == self.classes.len() => Ok(()),
                _ => bad("weights must match classes"),
            },
            other => bad(&format!("unknown algo {other}")),
        }
    }
}

/// KNN: majority among the k nearest standardized points (equal distances
/// resolved by training order), confidence = vote share; tied votes go to
/// the label with the smaller mean neighbour distance, then the
/// lexicographically smaller label. LR: highest one-vs-rest probability,
/// confidence normalized over classes, ties to the smaller label.
pub fn predict(model: &TrainedModel, feat: &FeatureVector) -> Result<Prediction, ClassifierError> {
    let raw = feat.as_array();
    if !raw.iter().all(|v| v.is_finite()) {
        return Err(ClassifierError::Input("non-finite features".into()));
    }
    let x = model.scaler.apply(&raw);
    if let (Some(k), Some(points)) = (model.k, &model.points) {
        return Ok(knn_vote(points, k, &x));
    }
    if let Some(w) = &model.weights {
        let probs = logreg::probabilities(w, &x);
        let total: f64 = probs.iter().sum();
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        return Ok(Prediction {
            device_id: model.classes[best].clone(),
            confidence: if total > 0.0 { probs[best] / total } else { 1.0 / probs.len() as f64 },
        });
    }
    Err(ClassifierError::Input("model has neither points nor weights".into()))
}

fn knn_vote(points: &[StoredPoint], k: usize, x: &[f64; 2]) -> Prediction {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (((p.x[0] - x[0]).powi(2) + (p.x[1] - x[1]).powi(2)).sqrt(), i))
        .collect();
    let k = k.min(d.len());
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &mut d[..k];
    nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(dist, i) in nearest.iter() {
        let e = tally.entry(points[i].label.as_str()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += dist;
    }
    // BTreeMap iterates labels in order, so strict comparisons keep the
    // lexicographically first among full ties.
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (votes, sum)) in tally {
        let mean = sum / votes as f64;
        best = match best {
            Some((_, bv, bm)) if votes < bv || (votes == bv && mean >= bm) => best,
            _ => Some((label, votes, mean)),
        };
    }
    let (label, votes, _) = best.expect("k >= 1");
    Prediction {
        device_id: label.to_string(),
        confidence: votes as f64 / k as f64,
    }
}

/// Standardizes against the training split only; convenience for the
/// common split → train → evaluate pipeline.
pub fn train_and_evaluate(
    dataset: &Dataset,
    algo: &Algo,
    train_fraction: f64,
    seed: u64,
) -> Result<(TrainedModel, EvalReport), ClassifierError> {
    let (tr, te) = split(dataset, train_fraction, seed)?;
    let model = train(&tr, algo, seed)?;
    let mut report = evaluate(&model, &te)?;
    report.split_seed = Some(seed);
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{LabeledRow, Scenario};

    pub(crate) fn fv(label: &str, cfo: f64, skew: f64) -> FeatureVector {
        FeatureVector {
            cfo_hz: cfo,
            skew_deg: skew,
            device_id: Some(label.into()),
        }
    }

    fn dataset(per: usize, devices: usize) -> Dataset {
        let rows = (0..devices)
            .flat_map(|d| {
                (0..per).map(move |f| LabeledRow {
                    device_id: format!("d{d}"),
                    cfo_hz: d as f64 * 100.0 + f as f64 * 0.1,
                    skew_deg: (f % 7) as f64,
                    scenario: Scenario::FixedSkew3Deg,
                    frame_idx: f,
                    seed: 0,
                })
            })
            .collect();
        Dataset::new(rows, Scenario::FixedSkew3Deg, 0).unwrap()
    }

    #[test]
    fn split_counts_and_determinism() {
        let ds = dataset(200, 3);
        let (tr, te) = split(&ds, 0.8, 9).unwrap();
        assert_eq!(tr.len(), 480);
        assert_eq!(te.len(), 120);
        for d in 0..3 {
            let l = format!("d{d}");
            assert_eq!(tr.iter().filter(|f| f.device_id.as_deref() == Some(&l)).count(), 160);
        }
        assert_eq!(split(&ds, 0.8, 9).unwrap(), (tr.clone(), te.clone()));
        assert_ne!(split(&ds, 0.8, 10).unwrap().0, tr);
    }

    #[test]
    fn split_guards() {
        let ds = dataset(200, 2);
        assert!(split(&ds, 1.0, 0).is_err());
        assert!(split(&ds, 0.0, 0).is_err());
        assert!(matches!(split(&dataset(4, 2), 0.8, 0), Err(ClassifierError::Split(_))));
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![fv("a", 0.0, 0.0), fv("a", 1.0, 1.0)];
        assert!(matches!(train(&rows, &Algo::default(), 0), Err(ClassifierError::Train(_))));
    }

    #[test]
    fn even_k_rejected() {
        let rows = vec![fv("a", 0.0, 0.0), fv("b", 1.0, 1.0)];
        assert!(train(&rows, &Algo::Knn { k: 2 }, 0).is_err());
    }

    #[test]
    fn k1_recovers_training_point() {
        let rows = vec![fv("a", 0.0, 0.0), fv("b", 10.0, 1.0), fv("c", 20.0, -1.0)];
        let m = train(&rows, &Algo::Knn { k: 1 }, 0).unwrap();
        let p = predict(&m, &rows[1]).unwrap();
        assert_eq!(p.device_id, "b");
        assert_eq!(p.confidence, 1.0);
    }

    #[test]
    fn tie_breaks_by_mean_distance_then_label() {
        // one vote each; "b" and "c" sit nearer than "a"
        let rows = vec![fv("a", -3.0, 0.0), fv("c", 1.0, 0.0), fv("b", -1.0, 0.0)];
        let m = train(&rows, &Algo::Knn { k: 3 }, 0).unwrap();
        let p = predict(&m, &fv("q", 0.0, 0.0)).unwrap();
        assert_eq!(p.device_id, "b");
        assert!((p.confidence - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_query_rejected() {
        let rows = vec![fv("a", 0.0, 0.0), fv("b", 1.0, 1.0)];
        let m = train(&rows, &Algo::Knn { k: 1 }, 0).unwrap();
        assert!(predict(&m, &fv("q", f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn model_json_round_trip_is_stable() {
        let ds = dataset(20, 3);
        let (tr, _) = split(&ds, 0.8, 1).unwrap();
        for algo in [Algo::Knn { k: 5 }, Algo::LogisticRegression(LogRegParams::default())] {
            let a = train(&tr, &algo, 1).unwrap();
            let b = train(&tr, &algo, 1).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            let back = TrainedModel::from_json(&a.to_json().unwrap()).unwrap();
            assert_eq!(back, a);
        }
        let text = String::from_utf8(train(&tr, &Algo::default(), 1).unwrap().to_json().unwrap()).unwrap();
        for key in ["\"algo\"", "\"k\"", "\"points\"", "\"scaler\"", "\"means\"", "\"stds\"", "\"classes\"", "\"seed\""] {
            assert!(text.contains(key), "{key}");
        }
    }
}
