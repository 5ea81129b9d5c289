use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{predict, ClassifierError, TrainedModel};
use crate::fingerprint::FeatureVector;

/// Macro averages run over the classes present in the test labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub recall_mean: f64,
    pub precision_mean: f64,
    pub f1_mean: f64,
    /// Row and column labels of `confusion`.
    pub classes: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub n_test: usize,
    pub split_seed: Option<u64>,
}

pub fn evaluate(model: &TrainedModel, test: &[FeatureVector]) -> Result<EvalReport, ClassifierError> {
    if test.is_empty() {
        return Err(ClassifierError::Input("empty test set".into()));
    }
    let mut pairs = Vec::with_capacity(test.len());
    for f in test {
        let truth = f
            .device_id
            .clone()
            .ok_or_else(|| ClassifierError::Input("test row without a label".into()))?;
        pairs.push((truth, predict(model, f)?.device_id));
    }
    Ok(EvalReport::from_pairs(&pairs, &model.classes))
}

impl EvalReport {
    /// Builds the report from `(truth, predicted)` pairs. `known` lists
    /// labels to include even if absent from the pairs.
    pub fn from_pairs(pairs: &[(String, String)], known: &[String]) -> Self {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for l in known.iter().map(String::as_str).chain(pairs.iter().flat_map(|(t, p)| [t.as_str(), p.as_str()])) {
            index.entry(l).or_insert(0);
        }
        let classes: Vec<String> = index.keys().map(|s| s.to_string()).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let n = classes.len();
        let mut confusion = vec![vec![0u64; n]; n];
        for (t, p) in pairs {
            confusion[index[t.as_str()]][index[p.as_str()]] += 1;
        }

        let total = pairs.len() as f64;
        let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
        let mut recall_sum = 0.0;
        let mut precision_sum = 0.0;
        let mut f1_sum = 0.0;
        let mut present = 0usize;
        for c in 0..n {
            let support: u64 = confusion[c].iter().sum();
            if support == 0 {
                continue;
            }
            present += 1;
            let predicted: u64 = (0..n).map(|r| confusion[r][c]).sum();
            let tp = confusion[c][c] as f64;
            let recall = tp / support as f64;
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            recall_sum += recall;
            precision_sum += precision;
            f1_sum += f1(precision, recall);
        }
        let denom = present.max(1) as f64;
        EvalReport {
            accuracy: if total > 0.0 { trace as f64 / total } else { 0.0 },
            recall_mean: recall_sum / denom,
            precision_mean: precision_sum / denom,
            f1_mean: f1_sum / denom,
            classes,
            confusion,
            n_test: pairs.len(),
            split_seed: None,
        }
    }

    pub fn precision(&self, c: usize) -> f64 {
        let col: u64 = self.confusion.iter().map(|r| r[c]).sum();
        if col == 0 {
            0.0
        } else {
            self.confusion[c][c] as f64 / col as f64
        }
    }

    pub fn recall(&self, c: usize) -> f64 {
        let row: u64 = self.confusion[c].iter().sum();
        if row == 0 {
            0.0
        } else {
            self.confusion[c][c] as f64 / row as f64
        }
    }

    pub fn f1(&self, c: usize) -> f64 {
        f1(self.precision(c), self.recall(c))
    }

    pub fn to_json(&self) -> Result<Vec<u8>, ClassifierError> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    /// True labels down the rows, predictions across the columns.
    pub fn write_confusion_csv<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        write!(w, "true\\predicted")?;
        for c in &self.classes {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            write!(w, "{c}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
