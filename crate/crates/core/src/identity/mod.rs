//! The identification attack: gradient-boosted trees over gait feature rows,
//! repeated stratified k-fold evaluation, weighted F1 and confusion matrices.

mod gbm;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

pub use gbm::{predict, train_gbm, GbmModel, Hyper, Node, Tree};

use crate::gait::{GaitFeatureRow, FEATURE_NAMES, STEP_LENGTH_FEATURES};
use crate::math;
use crate::{Error, Result};

/// Labeled feature vectors. Absent features are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<String>,
    pub include_step_length: bool,
}

impl Dataset {
    /// Builds a dataset from gait rows, labeled by subject. Without step
    /// length the two step-length columns are dropped (8 features).
    pub fn from_rows(rows: &[GaitFeatureRow], include_step_length: bool) -> Self {
        let keep: Vec<usize> = (0..FEATURE_NAMES.len())
            .filter(|i| include_step_length || !STEP_LENGTH_FEATURES.contains(i))
            .collect();
        Dataset {
            feature_names: keep.iter().map(|&i| FEATURE_NAMES[i].to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| {
                    let v = r.values();
                    keep.iter().map(|&i| v[i]).collect()
                })
                .collect(),
            labels: rows.iter().map(|r| r.subject_id.clone()).collect(),
            include_step_length,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for l in &self.labels {
            *m.entry(l.clone()).or_insert(0) += 1;
        }
        m
    }

    /// Checks arity and label count; `folds` adds the per-class minimum.
    pub fn validate(&self, folds: Option<usize>) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(Error::Shape {
                expected: self.rows.len(),
                got: self.labels.len(),
            });
        }
        let arity = self.feature_names.len();
        if let Some(r) = self.rows.iter().find(|r| r.len() != arity) {
            return Err(Error::Shape {
                expected: arity,
                got: r.len(),
            });
        }
        let counts = self.class_counts();
        if counts.len() < 2 {
            return Err(Error::DegenerateDataset(format!(
                "{} distinct label(s), need at least 2",
                counts.len()
            )));
        }
        if let Some(k) = folds {
            if let Some((class, &rows)) = counts.iter().find(|(_, &n)| n < k) {
                return Err(Error::Stratification {
                    class: class.clone(),
                    rows,
                    folds: k,
                });
            }
        }
        Ok(())
    }

    /// Copy with labels permuted uniformly at random.
    pub fn shuffled_labels(&self, seed: u64) -> Self {
        let mut out = self.clone();
        shuffle(&mut out.labels, &mut ChaCha8Rng::seed_from_u64(seed));
        out
    }

    /// Copy without the classes that have fewer than `min_rows` rows.
    pub fn without_small_classes(&self, min_rows: usize) -> (Self, Vec<String>) {
        let counts = self.class_counts();
        let dropped: Vec<String> = counts
            .iter()
            .filter(|(_, &n)| n < min_rows)
            .map(|(c, _)| c.clone())
            .collect();
        let mut out = self.clone();
        out.rows.clear();
        out.labels.clear();
        for (r, l) in self.rows.iter().zip(&self.labels) {
            if !dropped.contains(l) {
                out.rows.push(r.clone());
                out.labels.push(l.clone());
            }
        }
        (out, dropped)
    }
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub repeat: usize,
    pub fold: usize,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub weighted_f1_mean: f64,
    /// Population standard deviation over folds.
    pub weighted_f1_std: f64,
    pub per_fold: Vec<FoldScore>,
    /// Rows are true classes, columns predictions; summed over folds and
    /// divided by the repeat count, so each row sums to its class support.
    pub confusion_matrix: Vec<Vec<f64>>,
    /// Recall per class from the confusion matrix.
    pub per_class_accuracy: Vec<f64>,
}

/// Support-weighted mean of per-class F1. Rows are true classes.
pub fn weighted_f1(confusion: &[Vec<f64>]) -> Result<f64> {
    let k = confusion.len();
    if confusion.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("confusion matrix must be square".into()));
    }
    if confusion.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation("confusion counts must be finite and >= 0".into()));
    }
    let total: f64 = confusion.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("weighted F1 of an empty confusion matrix".into()));
    }
    let mut acc = 0.0;
    for c in 0..k {
        let tp = confusion[c][c];
        let support: f64 = confusion[c].iter().sum();
        let predicted: f64 = confusion.iter().map(|r| r[c]).sum();
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        acc += support * f1;
    }
    Ok(acc / total)
}

/// Stratified fold of each row: every class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes stay
/// balanced.
fn stratified_folds(data: &Dataset, classes: &[String], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold_of = vec![0; data.len()];
    let mut next = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| &data.labels[i] == class).collect();
        shuffle(&mut members, rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

/// Repeated stratified k-fold cross-validation.
pub fn evaluate_cv(data: &Dataset, hyper: &Hyper, folds: usize, repeats: usize, seed: u64) -> Result<EvalReport> {
    if folds < 2 {
        return Err(Error::Config("folds must be >= 2".into()));
    }
    if repeats < 1 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    hyper.validate()?;
    data.validate(Some(folds))?;
    let classes = data.classes();
    let k = classes.len();
    let label_idx: Vec<usize> = data
        .labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap_or(0))
        .collect();
    let mut total = vec![vec![0.0; k]; k];
    let mut per_fold = Vec::with_capacity(folds * repeats);
    for rep in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(math::derive_seed(seed, rep as u64));
        let fold_of = stratified_folds(data, &classes, folds, &mut rng);
        for fold in 0..folds {
            let train: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] == fold).collect();
            let model_seed = math::derive_seed(seed, (1 + rep * folds + fold) as u64 * 0x1_0000);
            let model = gbm::train_on(data, &train, hyper, model_seed)?;
            let mut cm = vec![vec![0.0; k]; k];
            for &i in &test {
                let (_, p) = predict(&model, &data.rows[i])?;
                cm[label_idx[i]][gbm::argmax(&p)] += 1.0;
            }
            let correct: f64 = (0..k).map(|c| cm[c][c]).sum();
            per_fold.push(FoldScore {
                repeat: rep,
                fold,
                weighted_f1: weighted_f1(&cm)?,
                accuracy: correct / test.len() as f64,
            });
            for (t, row) in total.iter_mut().zip(&cm) {
                for (a, b) in t.iter_mut().zip(row) {
                    *a += b;
                }
            }
        }
    }
    let n = per_fold.len() as f64;
    let mean = per_fold.iter().map(|f| f.weighted_f1).sum::<f64>() / n;
    let var = per_fold
        .iter()
        .map(|f| (f.weighted_f1 - mean) * (f.weighted_f1 - mean))
        .sum::<f64>()
        / n;
    for row in &mut total {
        for v in row.iter_mut() {
            *v /= repeats as f64;
        }
    }
    let per_class_accuracy = total
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row[c] / s
            } else {
                0.0
            }
        })
        .collect();
    Ok(EvalReport {
        classes,
        weighted_f1_mean: mean.clamp(0.0, 1.0),
        weighted_f1_std: math::sqrt(var),
        per_fold,
        confusion_matrix: total,
        per_class_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<Option<f64>>>, labels: Vec<&str>) -> Dataset {
        Dataset {
            feature_names: (0..rows[0].len()).map(|i| format!("f{i}")).collect(),
            rows,
            labels: labels.into_iter().map(String::from).collect(),
            include_step_length: false,
        }
    }

    fn separable() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let a = i < 20;
            rows.push(vec![Some(if a { i as f64 } else { 100.0 + i as f64 }), Some((i % 7) as f64)]);
            labels.push(if a { "a" } else { "b" });
        }
        ds(rows, labels)
    }

    #[test]
    fn weighted_f1_examples() {
        assert_eq!(weighted_f1(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap(), 1.0);
        assert!((weighted_f1(&[vec![5.0, 5.0], vec![5.0, 5.0]]).unwrap() - 0.5).abs() < 1e-12);
        assert!((weighted_f1(&[vec![10.0, 0.0], vec![10.0, 0.0]]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            weighted_f1(&[vec![0.0, 0.0], vec![0.0, 0.0]]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn separable_training_fits() {
        let data = separable();
        let hyper = Hyper {
            n_stages: 50,
            ..Hyper::default()
        };
        let model = train_gbm(&data, &hyper, 0).unwrap();
        model.validate().unwrap();
        for (row, label) in data.rows.iter().zip(&data.labels) {
            let (got, p) = predict(&model, row).unwrap();
            assert_eq!(&got, label);
            assert!(p.iter().copied().fold(0.0, f64::max) > 0.9);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_vectors_split_evenly() {
        let data = ds(vec![vec![Some(1.0)]; 10], vec!["a", "b", "a", "b", "a", "b", "a", "b", "a", "b"]);
        let model = train_gbm(&data, &Hyper::default(), 0).unwrap();
        let (_, p) = predict(&model, &[Some(1.0)]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_learning_rate_gives_priors() {
        let data = ds(
            vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)], vec![Some(4.0)]],
            vec!["a", "a", "a", "b"],
        );
        let hyper = Hyper {
            learning_rate: 0.0,
            n_stages: 5,
            ..Hyper::default()
        };
        let model = train_gbm(&data, &hyper, 0).unwrap();
        let (label, p) = predict(&model, &[None]).unwrap();
        assert_eq!(label, "a");
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert!(matches!(predict(&model, &[None, None]), Err(Error::Shape { .. })));
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = ds(vec![vec![Some(1.0)], vec![Some(2.0)]], vec!["a", "a"]);
        assert!(matches!(train_gbm(&data, &Hyper::default(), 0), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn cv_on_separable_data_and_stratification_error() {
        let report = evaluate_cv(&separable(), &Hyper::default(), 3, 2, 1).unwrap();
        assert!(report.weighted_f1_mean >= 0.9);
        assert_eq!(report.per_fold.len(), 6);
        for (row, c) in report.confusion_matrix.iter().zip([20.0, 20.0]) {
            assert!((row.iter().sum::<f64>() - c).abs() < 1e-9);
        }
        let small = ds(
            vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)], vec![Some(4.0)], vec![Some(5.0)]],
            vec!["a", "a", "a", "b", "b"],
        );
        match evaluate_cv(&small, &Hyper::default(), 3, 1, 0) {
            Err(Error::Stratification { class, rows: 2, folds: 3 }) => assert_eq!(class, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = separable().shuffled_labels(3);
        let hyper = Hyper {
            subsample: 0.7,
            n_stages: 20,
            ..Hyper::default()
        };
        assert_eq!(train_gbm(&data, &hyper, 9).unwrap(), train_gbm(&data, &hyper, 9).unwrap());
        assert_eq!(
            evaluate_cv(&data, &hyper, 3, 2, 9).unwrap(),
            evaluate_cv(&data, &hyper, 3, 2, 9).unwrap()
        );
    }
}
