use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::math;
use crate::{Error, Result};

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Fraction of rows drawn (without replacement) for each stage.
    pub subsample: f64,
    pub min_samples_leaf: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            subsample: 1.0,
            min_samples_leaf: 1,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages < 1 {
            return Err(Error::Config("n_stages must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must be in (0, 1]".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Multinomial gradient-boosted trees: one regression tree per class per
/// stage, fit to log-loss pseudo-residuals, with Newton leaf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Log class priors, the starting scores.
    pub init: Vec<f64>,
    /// Per-column training medians used to fill absent values.
    pub medians: Vec<f64>,
    /// `stages[s][k]` is class `k`'s tree at stage `s`.
    pub stages: Vec<Vec<Tree>>,
}

impl GbmModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn impute(&self, v: &[Option<f64>]) -> Vec<f64> {
        v.iter()
            .zip(&self.medians)
            .map(|(x, m)| x.unwrap_or(*m))
            .collect()
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for stage in &self.stages {
            for (k, tree) in stage.iter().enumerate() {
                f[k] += self.learning_rate * tree.predict(x);
            }
        }
        f
    }

    /// Checks that every tree only references valid features.
    pub fn validate(&self) -> Result<()> {
        if self.n_stages < 1 || self.stages.len() != self.n_stages {
            return Err(Error::Validation("model stage count mismatch".into()));
        }
        let n = self.n_features();
        for stage in &self.stages {
            if stage.len() != self.classes.len() {
                return Err(Error::Validation("stage tree count mismatch".into()));
            }
            if stage.iter().filter_map(Tree::max_feature).any(|f| f >= n) {
                return Err(Error::Validation("tree references unknown feature".into()));
            }
        }
        Ok(())
    }
}

fn softmax(f: &[f64]) -> Vec<f64> {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| math::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Class label and class probabilities for one feature vector. Absent
/// values are filled with the model's training medians.
pub fn predict(model: &GbmModel, vector: &[Option<f64>]) -> Result<(String, Vec<f64>)> {
    if vector.len() != model.n_features() {
        return Err(Error::Shape {
            expected: model.n_features(),
            got: vector.len(),
        });
    }
    let p = softmax(&model.scores(&model.impute(vector)));
    Ok((model.classes[argmax(&p)].clone(), p))
}

struct TreeFit<'a> {
    x: &'a [Vec<f64>],
    /// Row indices sorted by each feature, over the whole training set.
    order: &'a [Vec<usize>],
    residual: &'a [f64],
    hess: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    scale: f64,
}

impl TreeFit<'_> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let num: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let den: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        if den.abs() < 1e-150 {
            0.0
        } else {
            self.scale * num / den
        }
    }

    /// Best variance-reduction split of `rows`: (feature, threshold, gain).
    /// Thresholds are midpoints between consecutive distinct values; ties
    /// keep the lowest feature and lowest threshold.
    fn best_split(&self, rows: &[usize], member: &[bool]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = Vec::with_capacity(n);
        for (f, ord) in self.order.iter().enumerate() {
            sorted.clear();
            sorted.extend(ord.iter().copied().filter(|&i| member[i]));
            let mut left = 0.0;
            for j in 0..n - 1 {
                left += self.residual[sorted[j]];
                let (a, b) = (self.x[sorted[j]][f], self.x[sorted[j + 1]][f]);
                let nl = j + 1;
                let nr = n - nl;
                if a == b || nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / nr as f64 - base;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, a + (b - a) / 2.0, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, member: &mut [bool], nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth < self.max_depth && rows.len() >= 2 * self.min_leaf {
            for &i in &rows {
                member[i] = true;
            }
            let s = self.best_split(&rows, member);
            for &i in &rows {
                member[i] = false;
            }
            s
        } else {
            None
        };
        match split {
            None => nodes[id] = Node::Leaf { value: self.leaf_value(&rows) },
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
                let left = self.grow(l, depth + 1, member, nodes);
                let right = self.grow(r, depth + 1, member, nodes);
                nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }
}

/// Column medians over present values (0 for all-absent columns).
pub(crate) fn column_medians(rows: &[&[Option<f64>]], n_features: usize) -> Vec<f64> {
    (0..n_features)
        .map(|f| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r[f]).collect();
            math::median(&vals).unwrap_or(0.0)
        })
        .collect()
}

/// Trains on every row of `data`.
pub fn train_gbm(data: &Dataset, hyper: &Hyper, seed: u64) -> Result<GbmModel> {
    let all: Vec<usize> = (0..data.len()).collect();
    train_on(data, &all, hyper, seed)
}

/// Trains on the rows `idx` of `data`.
pub(crate) fn train_on(data: &Dataset, idx: &[usize], hyper: &Hyper, seed: u64) -> Result<GbmModel> {
    hyper.validate()?;
    let classes = data.classes();
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        let k = classes.binary_search(&data.labels[i]).map_err(|_| Error::Validation("unknown label".into()))?;
        labels.push(k);
    }
    let present: Vec<usize> = {
        let mut seen = vec![false; classes.len()];
        for &k in &labels {
            seen[k] = true;
        }
        (0..classes.len()).filter(|&k| seen[k]).collect()
    };
    if present.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "training data has {} distinct label(s), need at least 2",
            present.len()
        )));
    }
    let nf = data.feature_names.len();
    let raw: Vec<&[Option<f64>]> = idx.iter().map(|&i| data.rows[i].as_slice()).collect();
    let medians = column_medians(&raw, nf);
    let x: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| r.iter().zip(&medians).map(|(v, m)| v.unwrap_or(*m)).collect())
        .collect();
    let n = x.len();
    let k_count = classes.len();

    // Classes absent from the training rows get a vanishing prior.
    let mut counts = vec![0usize; k_count];
    for &k in &labels {
        counts[k] += 1;
    }
    let init: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { -30.0 } else { math::ln(c as f64 / n as f64) })
        .collect();

    let mut order: Vec<Vec<usize>> = (0..nf)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            o
        })
        .collect();
    let full_order = order.clone();

    let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (k_count as f64 - 1.0) / k_count as f64;
    let mut stages = Vec::with_capacity(hyper.n_stages);
    let mut residual = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut member = vec![false; n];
    for _ in 0..hyper.n_stages {
        let rows: Vec<usize> = if hyper.subsample < 1.0 {
            let take = ((hyper.subsample * n as f64) as usize).max(1);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let mut chosen = perm[..take].to_vec();
            chosen.sort_unstable();
            let mut keep = vec![false; n];
            for &i in &chosen {
                keep[i] = true;
            }
            for (o, full) in order.iter_mut().zip(&full_order) {
                o.clear();
                o.extend(full.iter().copied().filter(|&i| keep[i]));
            }
            chosen
        } else {
            (0..n).collect()
        };
        let probs: Vec<Vec<f64>> = f.iter().map(|s| softmax(s)).collect();
        let mut stage = Vec::with_capacity(k_count);
        for k in 0..k_count {
            for i in 0..n {
                let y = if labels[i] == k { 1.0 } else { 0.0 };
                let r = y - probs[i][k];
                residual[i] = r;
                hess[i] = r.abs() * (1.0 - r.abs());
            }
            let fit = TreeFit {
                x: &x,
                order: &order,
                residual: &residual,
                hess: &hess,
                max_depth: hyper.max_depth,
                min_leaf: hyper.min_samples_leaf,
                scale,
            };
            let mut nodes = Vec::new();
            fit.grow(rows.clone(), 0, &mut member, &mut nodes);
            stage.push(Tree { nodes });
        }
        for (i, xi) in x.iter().enumerate() {
            for (k, tree) in stage.iter().enumerate() {
                f[i][k] += hyper.learning_rate * tree.predict(xi);
            }
        }
        stages.push(stage);
    }
    Ok(GbmModel {
        classes,
        feature_names: data.feature_names.clone(),
        n_stages: hyper.n_stages,
        learning_rate: hyper.learning_rate,
        max_depth: hyper.max_depth,
        init,
        medians,
        stages,
    })
}
