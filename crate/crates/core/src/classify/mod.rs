//! Cash-out classifiers (logistic regression, CART, gradient-boosted trees),
//! evaluation metrics, stratified cross-validation and feature importance.

pub mod metrics;
pub mod tree;

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::io::fmt_f64;
use crate::rng;
pub use metrics::{auc, metrics, roc_curve, Confusion, EvalReport, RocPoint};
use tree::{grow, GrowParams, Tree};

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn new(names: Vec<String>, ids: Vec<String>, x: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self> {
        if ids.len() != x.len() || y.len() != x.len() {
            return Err(Error::Schema("ids, rows and labels differ in length".into()));
        }
        if let Some(row) = x.iter().find(|r| r.len() != names.len()) {
            return Err(Error::Dimension { expected: names.len(), got: row.len() });
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite feature value".into()));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::Schema("labels must be 0 or 1".into()));
        }
        if names.iter().collect::<HashSet<_>>().len() != names.len() {
            return Err(Error::Schema("duplicate feature names".into()));
        }
        Ok(Dataset { names, ids, x, y })
    }

    pub fn from_table(table: &FeatureTable) -> Result<Self> {
        Self::new(
            table.names.clone(),
            table.rows.iter().map(|r| r.client_id.clone()).collect(),
            table.rows.iter().map(|r| r.values.clone()).collect(),
            table.rows.iter().map(|r| r.label).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_features()).map(|f| self.x.iter().map(|r| r[f]).collect()).collect()
    }

    fn require_both_classes(&self) -> Result<()> {
        let pos = self.y.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == self.len() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Per-sample weights: ones, or inverse class frequency when `balanced`.
pub fn sample_weights(y: &[u8], balanced: bool) -> Vec<f64> {
    if !balanced {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let w1 = if pos > 0.0 { n / (2.0 * pos) } else { 0.0 };
    let w0 = if pos < n { n / (2.0 * (n - pos)) } else { 0.0 };
    y.iter().map(|&l| if l == 1 { w1 } else { w0 }).collect()
}

fn weighted_rate(y: &[u8], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    y.iter().zip(w).filter(|(&l, _)| l == 1).map(|(_, w)| w).sum::<f64>() / total
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub balanced: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1e-3, epochs: 500, lr: 0.1, balanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub balanced: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 6, min_leaf: 20, balanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub balanced: bool,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { rounds: 200, learning_rate: 0.1, max_depth: 3, min_leaf: 20, balanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Constant scorer predicting the training base rate.
    BaseRate,
    Logistic(LogisticConfig),
    Tree(TreeConfig),
    Gbt(GbtConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BaseRate => "baserate",
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Gbt(_) => "gbt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    BaseRate {
        rate: f64,
    },
    Logistic {
        means: Vec<f64>,
        scales: Vec<f64>,
        /// Coefficients on standardized features.
        weights: Vec<f64>,
        intercept: f64,
    },
    Tree {
        tree: Tree,
    },
    Gbt {
        base_rate: f64,
        initial_logit: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub features: Vec<String>,
    pub model: Model,
}

const MODEL_FORMAT: &str = "notesforge-classifier/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(flatten)]
    inner: TrainedModel,
}

impl TrainedModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.features.len() {
            return Err(Error::Dimension { expected: self.features.len(), got: x.len() });
        }
        Ok(match &self.model {
            Model::BaseRate { rate } => *rate,
            Model::Logistic { means, scales, weights, intercept } => {
                let z: f64 = x
                    .iter()
                    .zip(means.iter().zip(scales))
                    .zip(weights)
                    .map(|((v, (m, s)), w)| w * (v - m) / s)
                    .sum();
                sigmoid(intercept + z)
            }
            Model::Tree { tree } => tree.predict(x),
            Model::Gbt { base_rate, initial_logit, learning_rate, trees } => {
                if trees.is_empty() {
                    *base_rate
                } else {
                    sigmoid(initial_logit + learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>())
                }
            }
        })
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.x.iter().map(|r| self.predict_proba(r)).collect()
    }

    /// Logistic: |standardized coefficient|; trees: total impurity decrease
    /// per feature. Descending, ties by name.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut imp = vec![0.0; self.features.len()];
        match &self.model {
            Model::BaseRate { .. } => {}
            Model::Logistic { weights, .. } => imp.iter_mut().zip(weights).for_each(|(i, w)| *i = w.abs()),
            Model::Tree { tree } => tree.add_importance(&mut imp),
            Model::Gbt { trees, .. } => trees.iter().for_each(|t| t.add_importance(&mut imp)),
        }
        let mut ranked: Vec<(String, f64)> = self.features.iter().cloned().zip(imp).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile { format: MODEL_FORMAT.into(), inner: self.clone() };
        serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        let m = file.inner;
        let p = m.features.len();
        let ok = match &m.model {
            Model::BaseRate { rate } => (0.0..=1.0).contains(rate),
            Model::Logistic { means, scales, weights, intercept } => {
                means.len() == p
                    && scales.len() == p
                    && weights.len() == p
                    && intercept.is_finite()
                    && scales.iter().all(|s| *s > 0.0 && s.is_finite())
                    && means.iter().chain(weights).all(|v| v.is_finite())
            }
            Model::Tree { tree } => tree.is_valid(p),
            Model::Gbt { trees, initial_logit, learning_rate, base_rate } => {
                trees.iter().all(|t| t.is_valid(p)) && initial_logit.is_finite() && learning_rate.is_finite() && (0.0..=1.0).contains(base_rate)
            }
        };
        if !ok {
            return Err(Error::ModelFormat("model parameters are inconsistent".into()));
        }
        Ok(m)
    }
}

/// Fraction of the top `k` ranked features whose name starts with `note.`.
pub fn top_k_source_share(ranking: &[(String, f64)], k: usize) -> Result<f64> {
    if k == 0 || k > ranking.len() {
        return Err(Error::Config(format!("k must be in 1..={}", ranking.len())));
    }
    Ok(ranking[..k].iter().filter(|(n, _)| n.starts_with("note.")).count() as f64 / k as f64)
}

pub fn train(data: &Dataset, spec: &ModelSpec) -> Result<TrainedModel> {
    match spec {
        ModelSpec::BaseRate => {
            if data.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            Ok(TrainedModel {
                features: data.names.clone(),
                model: Model::BaseRate { rate: weighted_rate(&data.y, &vec![1.0; data.len()]) },
            })
        }
        ModelSpec::Logistic(c) => train_logistic(data, c).map(|(m, _)| m),
        ModelSpec::Tree(c) => train_tree(data, c),
        ModelSpec::Gbt(c) => train_gbt(data, c).map(|(m, _)| m),
    }
}

/// Standardize columns in place; constant columns get scale 1.
fn standardize(data: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let mut cols = data.columns();
    let mut means = Vec::with_capacity(cols.len());
    let mut scales = Vec::with_capacity(cols.len());
    for col in &mut cols {
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let s = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.iter_mut().for_each(|v| *v = (*v - m) / s);
        means.push(m);
        scales.push(s);
    }
    (cols, means, scales)
}

/// Weighted mean log-loss plus `l2/2·|w|²`, and its gradient
/// `(d/dw, d/db)`, on column-major standardized features.
pub fn logistic_objective(cols: &[Vec<f64>], y: &[u8], sw: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len();
    let total: f64 = sw.iter().sum();
    let mut z = vec![b; n];
    for (col, wj) in cols.iter().zip(w) {
        for (zi, v) in z.iter_mut().zip(col) {
            *zi += wj * v;
        }
    }
    let mut loss = 0.0;
    let mut resid = vec![0.0; n];
    for i in 0..n {
        // log(1 + e^z) − y·z, computed stably
        let zi = z[i];
        let softplus = if zi > 0.0 { zi + (-zi).exp().ln_1p() } else { zi.exp().ln_1p() };
        loss += sw[i] * (softplus - y[i] as f64 * zi);
        resid[i] = sw[i] * (sigmoid(zi) - y[i] as f64);
    }
    loss = loss / total + 0.5 * l2 * w.iter().map(|x| x * x).sum::<f64>();
    let gw = cols
        .iter()
        .zip(w)
        .map(|(col, wj)| col.iter().zip(&resid).map(|(v, r)| v * r).sum::<f64>() / total + l2 * wj)
        .collect();
    let gb = resid.iter().sum::<f64>() / total;
    (loss, gw, gb)
}

/// Full-batch gradient descent from `w = 0`, `b = logit(base rate)`.
/// Returns the model and the loss before each epoch plus the final loss.
pub fn train_logistic(data: &Dataset, config: &LogisticConfig) -> Result<(TrainedModel, Vec<f64>)> {
    data.require_both_classes()?;
    if !(config.lr > 0.0) || config.l2 < 0.0 {
        return Err(Error::Config("logistic needs lr > 0 and l2 >= 0".into()));
    }
    let sw = sample_weights(&data.y, config.balanced);
    let (cols, means, scales) = standardize(data);
    let mut w = vec![0.0; cols.len()];
    let mut b = logit(weighted_rate(&data.y, &sw));
    let mut history = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, gw, gb) = logistic_objective(&cols, &data.y, &sw, &w, b, config.l2);
        history.push(loss);
        w.iter_mut().zip(&gw).for_each(|(wj, g)| *wj -= config.lr * g);
        b -= config.lr * gb;
    }
    history.push(logistic_objective(&cols, &data.y, &sw, &w, b, config.l2).0);
    let model = Model::Logistic { means, scales, weights: w, intercept: b };
    Ok((TrainedModel { features: data.names.clone(), model }, history))
}

pub fn train_tree(data: &Dataset, config: &TreeConfig) -> Result<TrainedModel> {
    if config.max_depth == 0 {
        return Err(Error::Config("max_depth must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sw = sample_weights(&data.y, config.balanced);
    let target: Vec<f64> = data.y.iter().map(|&l| l as f64).collect();
    let leaf = |s: &[usize]| {
        let w: f64 = s.iter().map(|&i| sw[i]).sum();
        s.iter().map(|&i| sw[i] * target[i]).sum::<f64>() / w
    };
    let params = GrowParams { max_depth: config.max_depth, min_leaf: config.min_leaf, gain_scale: 2.0 };
    let tree = grow(&data.columns(), &target, &sw, &params, &leaf);
    Ok(TrainedModel { features: data.names.clone(), model: Model::Tree { tree } })
}

fn mean_log_loss(f: &[f64], y: &[u8], sw: &[f64]) -> f64 {
    let total: f64 = sw.iter().sum();
    f.iter()
        .zip(y)
        .zip(sw)
        .map(|((&z, &l), w)| {
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            w * (softplus - l as f64 * z)
        })
        .sum::<f64>()
        / total
}

/// Logistic-loss boosting. Each round fits a variance-criterion regression
/// tree to the residuals `y − p` and sets leaves by one Newton step
/// `Σr / Σp(1−p)`. Returns the model and the training loss after each round
/// (entry 0 is the initial constant model).
pub fn train_gbt(data: &Dataset, config: &GbtConfig) -> Result<(TrainedModel, Vec<f64>)> {
    data.require_both_classes()?;
    if config.max_depth == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Config("gbt needs max_depth >= 1 and learning_rate > 0".into()));
    }
    let sw = sample_weights(&data.y, config.balanced);
    let base_rate = weighted_rate(&data.y, &sw);
    let initial_logit = logit(base_rate);
    let cols = data.columns();
    let n = data.len();
    let mut f = vec![initial_logit; n];
    let mut history = vec![mean_log_loss(&f, &data.y, &sw)];
    let mut trees = Vec::with_capacity(config.rounds);
    let params = GrowParams { max_depth: config.max_depth, min_leaf: config.min_leaf, gain_scale: 1.0 };
    for _ in 0..config.rounds {
        let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let resid: Vec<f64> = data.y.iter().zip(&p).map(|(&l, p)| l as f64 - p).collect();
        let leaf = |s: &[usize]| {
            let num: f64 = s.iter().map(|&i| sw[i] * resid[i]).sum();
            let den: f64 = s.iter().map(|&i| sw[i] * p[i] * (1.0 - p[i])).sum();
            if den.abs() < 1e-150 {
                0.0
            } else {
                num / den
            }
        };
        let tree = grow(&cols, &resid, &sw, &params, &leaf);
        for (fi, row) in f.iter_mut().zip(&data.x) {
            *fi += config.learning_rate * tree.predict(row);
        }
        history.push(mean_log_loss(&f, &data.y, &sw));
        trees.push(tree);
    }
    let model = Model::Gbt { base_rate, initial_logit, learning_rate: config.learning_rate, trees };
    Ok((TrainedModel { features: data.names.clone(), model }, history))
}

/// Fold index per sample. Each class is shuffled with its own seeded stream
/// and dealt round-robin; the dealing position carries over between
/// classes so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::TooFewPerClass { class, count: idx.len(), folds: k });
        }
        idx.shuffle(&mut rng::stream(seed, &format!("kfold/{class}")));
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = (offset + j) % k;
        }
        offset = (offset + labels.iter().filter(|&&l| l == class).count()) % k;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub train: EvalReport,
    pub test: EvalReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub model: String,
    pub folds: Vec<FoldReport>,
    pub mean_train: MeanMetrics,
    pub mean_test: MeanMetrics,
    /// Fold whose test AUC is the (lower) median; its ROC is the one reported.
    pub representative_fold: usize,
}

fn mean_metrics<'a>(reports: impl Iterator<Item = &'a EvalReport> + Clone) -> MeanMetrics {
    let n = reports.clone().count() as f64;
    let aucs: Option<Vec<f64>> = reports.clone().map(|r| r.auc).collect();
    MeanMetrics {
        accuracy: reports.clone().map(|r| r.accuracy).sum::<f64>() / n,
        weighted_f1: reports.map(|r| r.weighted_f1).sum::<f64>() / n,
        auc: aucs.map(|a| a.iter().sum::<f64>() / n),
    }
}

/// Train on k−1 folds and evaluate on the held-out fold, for each fold.
pub fn cross_validate(data: &Dataset, spec: &ModelSpec, k: usize, seed: u64) -> Result<CvReport> {
    let folds = stratified_kfold(&data.y, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for fold in 0..k {
        let test_rows: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == fold).collect();
        let train_rows: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != fold).collect();
        let (train_set, test_set) = (data.subset(&train_rows), data.subset(&test_rows));
        let model = train(&train_set, spec)?;
        reports.push(FoldReport {
            fold,
            train: metrics(&model.predict_all(&train_set)?, &train_set.y, 0.5)?,
            test: metrics(&model.predict_all(&test_set)?, &test_set.y, 0.5)?,
            test_rows,
        });
    }
    let mut by_auc: Vec<&FoldReport> = reports.iter().collect();
    by_auc.sort_by(|a, b| {
        let key = |r: &FoldReport| r.test.auc.unwrap_or(r.test.accuracy);
        key(a).total_cmp(&key(b)).then(a.fold.cmp(&b.fold))
    });
    let representative_fold = by_auc[(k - 1) / 2].fold;
    Ok(CvReport {
        model: spec.name().to_string(),
        mean_train: mean_metrics(reports.iter().map(|r| &r.train)),
        mean_test: mean_metrics(reports.iter().map(|r| &r.test)),
        folds: reports,
        representative_fold,
    })
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    n: usize,
    accuracy: f64,
    weighted_f1: f64,
    auc: Option<f64>,
    confusion: &'a Confusion,
}

impl<'a> From<&'a EvalReport> for EvalSummary<'a> {
    fn from(r: &'a EvalReport) -> Self {
        EvalSummary { n: r.n, accuracy: r.accuracy, weighted_f1: r.weighted_f1, auc: r.auc, confusion: &r.confusion }
    }
}

impl CvReport {
    /// Metrics as JSON; ROC points go to a separate CSV.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Fold<'a> {
            fold: usize,
            train: EvalSummary<'a>,
            test: EvalSummary<'a>,
        }
        let folds: Vec<Fold> = self
            .folds
            .iter()
            .map(|f| Fold { fold: f.fold, train: (&f.train).into(), test: (&f.test).into() })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "model": self.model,
            "mean_train": self.mean_train,
            "mean_test": self.mean_test,
            "representative_fold": self.representative_fold,
            "folds": folds,
        }))
        .expect("report serializes")
    }

    pub fn representative_roc(&self) -> &[RocPoint] {
        &self.folds[self.representative_fold].test.roc
    }
}

pub fn eval_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(&EvalSummary::from(report)).expect("report serializes")
}

pub fn write_roc<W: Write + ?Sized>(w: &mut W, roc: &[RocPoint]) -> std::io::Result<()> {
    writeln!(w, "fpr,tpr,threshold")?;
    for p in roc {
        writeln!(w, "{},{},{}", fmt_f64(p.fpr), fmt_f64(p.tpr), fmt_f64(p.threshold))?;
    }
    Ok(())
}

pub fn write_importance<W: Write + ?Sized>(w: &mut W, ranking: &[(String, f64)]) -> std::io::Result<()> {
    writeln!(w, "rank,feature,importance,source_group")?;
    for (i, (name, imp)) in ranking.iter().enumerate() {
        let group = name.split('.').next().unwrap_or("");
        writeln!(w, "{},{},{},{}", i + 1, name, fmt_f64(*imp), group)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<u8>) -> Dataset {
        let p = x.first().map_or(0, Vec::len);
        let names = (0..p).map(|j| format!("f{}", j + 1)).collect();
        let ids = (0..y.len()).map(|i| format!("c{i}")).collect();
        Dataset::new(names, ids, x, y).unwrap()
    }

    fn xor(n: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.gen_range(-1.0..1.0);
            let b: f64 = r.gen_range(-1.0..1.0);
            x.push(vec![a, b]);
            y.push(((a > 0.0) != (b > 0.0)) as u8);
        }
        dataset(x, y)
    }

    fn accuracy(model: &TrainedModel, data: &Dataset) -> f64 {
        metrics(&model.predict_all(data).unwrap(), &data.y, 0.5).unwrap().accuracy
    }

    #[test]
    fn intercept_only_logistic_is_base_rate() {
        let y: Vec<u8> = (0..100).map(|i| (i < 30) as u8).collect();
        let data = dataset(vec![vec![]; 100], y);
        let (m, _) = train_logistic(&data, &LogisticConfig::default()).unwrap();
        assert!((m.predict_proba(&[]).unwrap() - 0.3).abs() < 1e-6);
        let single = dataset(vec![vec![1.0]; 3], vec![1, 1, 1]);
        assert!(matches!(train_logistic(&single, &LogisticConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut r = rng::seeded(4);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let y: Vec<u8> = (0..20).map(|_| r.gen_range(0..2)).collect();
        let sw: Vec<f64> = (0..20).map(|_| r.gen_range(0.5..2.0)).collect();
        let w = vec![0.3, -0.7, 1.1];
        let b = 0.2;
        let (_, gw, gb) = logistic_objective(&cols, &y, &sw, &w, b, 0.05);
        let h = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let num = (logistic_objective(&cols, &y, &sw, &wp, b, 0.05).0 - logistic_objective(&cols, &y, &sw, &wm, b, 0.05).0) / (2.0 * h);
            worst = worst.max(rel(gw[j], num));
        }
        let num = (logistic_objective(&cols, &y, &sw, &w, b + h, 0.05).0 - logistic_objective(&cols, &y, &sw, &w, b - h, 0.05).0) / (2.0 * h);
        worst = worst.max(rel(gb, num));
        assert!(worst <= 1e-5, "{worst}");
    }

    #[test]
    fn separable_blobs_and_monotone_loss() {
        let mut r = rng::seeded(9);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let c = (i % 2) as f64;
            x.push(vec![c * 4.0 + r.gen_range(-1.0..1.0), c * 4.0 + r.gen_range(-1.0..1.0)]);
            y.push(c as u8);
        }
        let data = dataset(x, y);
        let (train_rows, test_rows): (Vec<usize>, Vec<usize>) = (0..400).partition(|i| i % 4 != 0);
        let (m, hist) = train_logistic(&data.subset(&train_rows), &LogisticConfig::default()).unwrap();
        assert!(accuracy(&m, &data.subset(&test_rows)) >= 0.95);
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        // all-zero standardized input → σ(intercept)
        let Model::Logistic { means, intercept, .. } = &m.model else { unreachable!() };
        assert!((m.predict_proba(means).unwrap() - sigmoid(*intercept)).abs() < 1e-15);
        assert!(matches!(m.predict_proba(&[1.0]), Err(Error::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn tree_basics() {
        let pure = dataset(vec![vec![1.0], vec![2.0]], vec![1, 1]);
        let m = train_tree(&pure, &TreeConfig { min_leaf: 1, ..Default::default() }).unwrap();
        let Model::Tree { tree } = &m.model else { unreachable!() };
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(m.predict_proba(&[5.0]).unwrap(), 1.0);

        let data = xor(400, 1);
        let m = train_tree(&data, &TreeConfig { max_depth: 1, min_leaf: 1, ..Default::default() }).unwrap();
        assert!(accuracy(&m, &data) <= 0.75);
    }

    #[test]
    fn gbt_beats_logistic_on_xor() {
        let train_set = xor(600, 2);
        let test_set = xor(400, 3);
        let cfg = GbtConfig { rounds: 50, max_depth: 2, ..Default::default() };
        let (g, hist) = train_gbt(&train_set, &cfg).unwrap();
        assert!(accuracy(&g, &test_set) >= 0.9);
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let (l, _) = train_logistic(&train_set, &LogisticConfig::default()).unwrap();
        assert!(accuracy(&l, &test_set) <= 0.6);
        let Model::Gbt { trees, .. } = &g.model else { unreachable!() };
        assert_eq!(trees.len(), 50);
    }

    #[test]
    fn gbt_limits_and_manual_sum() {
        let data = xor(200, 5);
        let base = data.y.iter().filter(|&&l| l == 1).count() as f64 / 200.0;
        let (zero, _) = train_gbt(&data, &GbtConfig { rounds: 0, ..Default::default() }).unwrap();
        assert_eq!(zero.predict_proba(&[0.3, 0.1]).unwrap(), base);
        let (tiny, _) = train_gbt(&data, &GbtConfig { rounds: 1, learning_rate: 1e-9, ..Default::default() }).unwrap();
        assert!((tiny.predict_proba(&[0.3, 0.1]).unwrap() - base).abs() < 1e-8);

        let (two, _) = train_gbt(&data, &GbtConfig { rounds: 2, ..Default::default() }).unwrap();
        let Model::Gbt { initial_logit, learning_rate, trees, .. } = &two.model else { unreachable!() };
        let x = [0.5, -0.2];
        let manual = sigmoid(initial_logit + learning_rate * (trees[0].predict(&x) + trees[1].predict(&x)));
        assert_eq!(two.predict_proba(&x).unwrap(), manual);
    }

    #[test]
    fn importance_ordering() {
        let m = TrainedModel {
            features: vec!["f1".into(), "f2".into(), "f3".into()],
            model: Model::Logistic { means: vec![0.0; 3], scales: vec![1.0; 3], weights: vec![2.0, -3.0, 2.0], intercept: 0.0 },
        };
        let names: Vec<String> = m.feature_importance().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["f2", "f1", "f3"]);

        let mut data = xor(200, 6);
        data.names = vec!["a".into(), "b".into()];
        data.x.iter_mut().for_each(|r| r.push(1.0));
        data.names.push("constant".into());
        let (g, _) = train_gbt(&data, &GbtConfig { rounds: 10, max_depth: 2, ..Default::default() }).unwrap();
        let imp = g.feature_importance();
        assert_eq!(imp.last().unwrap(), &("constant".to_string(), 0.0));

        let ranking: Vec<(String, f64)> = ["note.a", "txn.b", "note.c", "txn.d"].iter().map(|n| (n.to_string(), 1.0)).collect();
        assert_eq!(top_k_source_share(&ranking, 1).unwrap(), 1.0);
        assert_eq!(top_k_source_share(&ranking, 4).unwrap(), 0.5);
        assert!(top_k_source_share(&ranking, 5).is_err());
    }

    #[test]
    fn kfold_examples() {
        let y: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let folds = stratified_kfold(&y, 5, 1).unwrap();
        for f in 0..5 {
            let members: Vec<usize> = (0..10).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|&&i| y[i] == 1).count(), 1);
        }
        assert!(matches!(stratified_kfold(&[0, 0, 0, 1], 2, 0), Err(Error::TooFewPerClass { class: 1, .. })));
    }

    #[test]
    fn cross_validation_contract() {
        let y: Vec<u8> = (0..100).map(|i| (i % 5 == 0) as u8).collect();
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let data = dataset(x, y);
        let report = cross_validate(&data, &ModelSpec::BaseRate, 5, 3).unwrap();
        assert!((report.mean_train.accuracy - 0.8).abs() < 1e-12);
        assert!((report.mean_test.accuracy - 0.8).abs() < 1e-12);
        let mut seen: Vec<usize> = report.folds.iter().flat_map(|f| f.test_rows.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
        let again = cross_validate(&data, &ModelSpec::BaseRate, 5, 3).unwrap();
        assert_eq!(report, again);
        assert!(report.to_json().contains("\"representative_fold\""));
    }

    #[test]
    fn model_json_round_trip() {
        let data = xor(100, 8);
        for spec in [
            ModelSpec::BaseRate,
            ModelSpec::Logistic(LogisticConfig::default()),
            ModelSpec::Tree(TreeConfig { min_leaf: 2, ..Default::default() }),
            ModelSpec::Gbt(GbtConfig { rounds: 5, ..Default::default() }),
        ] {
            let m = train(&data, &spec).unwrap();
            let json = m.to_json().unwrap();
            assert_eq!(TrainedModel::from_json(&json).unwrap(), m);
        }
        assert!(TrainedModel::from_json("{\"format\":\"x\"}").is_err());
    }
}
