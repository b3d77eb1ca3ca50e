//! Classification metrics, repeat-consumption baselines and the multi-split
//! evaluation harness.
//!
//! Every exposure of every held-out pair is scored. A model sees only the
//! pair's own earlier listens (including earlier held-out ones) plus what it
//! learned from the training split.

use std::fmt;
use std::io::Write;

use log::info;
use rayon::prelude::*;

use crate::data::{holdout_split, Dataset, PairSequence};
use crate::error::{Error, Result};
use crate::kernel::{base_level, DEFAULT_DECAY};
use crate::model::ModelParams;
use crate::train::{calibrate_threshold, train, TrainConfig, TrainOutcome};

/// `(TPR + TNR) / 2` from confusion counts.
pub fn balanced_accuracy_from_counts(true_pos: usize, false_neg: usize, true_neg: usize, false_pos: usize) -> f64 {
    let tpr = true_pos as f64 / (true_pos + false_neg) as f64;
    let tnr = true_neg as f64 / (true_neg + false_pos) as f64;
    (tpr + tnr) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Confusion {
    tp: usize,
    fn_: usize,
    tn: usize,
    fp: usize,
}

fn confusion(truth: &[bool], pred: &[bool]) -> Result<Confusion> {
    if truth.len() != pred.len() {
        return Err(Error::Validation(format!(
            "{} labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut c = Confusion::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
        }
    }
    if c.tp + c.fn_ == 0 || c.tn + c.fp == 0 {
        return Err(Error::Precondition("both classes must be present in the true labels".into()));
    }
    Ok(c)
}

pub fn balanced_accuracy(truth: &[bool], pred: &[bool]) -> Result<f64> {
    let c = confusion(truth, pred)?;
    Ok(balanced_accuracy_from_counts(c.tp, c.fn_, c.tn, c.fp))
}

/// Per-class F1 averaged with true-label support weights. A class whose
/// precision and recall are both zero contributes an F1 of zero.
pub fn weighted_f1(truth: &[bool], pred: &[bool]) -> Result<f64> {
    let c = confusion(truth, pred)?;
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let n = truth.len() as f64;
    let pos_support = (c.tp + c.fn_) as f64 / n;
    let neg_support = (c.tn + c.fp) as f64 / n;
    Ok(pos_support * f1(c.tp, c.fp, c.fn_) + neg_support * f1(c.tn, c.fn_, c.fp))
}

/// Predicts each exposure from the previous one; the first exposure is
/// predicted as a listen.
pub fn prev_predict(labels: &[bool]) -> Vec<bool> {
    let mut out = Vec::with_capacity(labels.len());
    if !labels.is_empty() {
        out.push(true);
        out.extend_from_slice(&labels[..labels.len() - 1]);
    }
    out
}

/// Base-level activation used as an interest score.
pub fn bl_score(history: &[f64], t: f64, decay: f64) -> f64 {
    base_level(history, t, decay)
}

pub fn base_level_scores(sequences: &[PairSequence], decay: f64) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for seq in sequences {
        for j in 0..seq.len() {
            scores.push(bl_score(seq.history_at(j), seq.times[j], decay));
            labels.push(seq.labels[j]);
        }
    }
    (scores, labels)
}

/// Decay grid `0.05, 0.10, ..., 1.50`.
pub fn default_decay_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub decay: f64,
    pub threshold: f64,
    pub balanced_accuracy: f64,
}

/// Picks the decay whose calibrated base-level threshold gives the best
/// validation balanced accuracy. Ties go to the smaller decay.
pub fn fit_decay(validation: &[PairSequence], grid: &[f64]) -> Result<DecayFit> {
    if grid.is_empty() {
        return Err(Error::Validation("decay grid is empty".into()));
    }
    let mut best: Option<DecayFit> = None;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &decay in &sorted {
        let (scores, labels) = base_level_scores(validation, decay);
        let threshold = calibrate_threshold(&scores, &labels)?;
        let preds: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
        let ba = balanced_accuracy(&labels, &preds)?;
        if best.is_none_or(|b| ba > b.balanced_accuracy) {
            best = Some(DecayFit {
                decay,
                threshold,
                balanced_accuracy: ba,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// One scored exposure of a held-out pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub user: usize,
    pub item: usize,
    /// 1-based position among all exposures of the pair.
    pub exposure_index: usize,
    pub t: f64,
    pub truth: bool,
    pub score: f64,
    pub predicted: bool,
}

pub fn predict_sequences(params: &ModelParams, threshold: f64, sequences: &[PairSequence]) -> Vec<Prediction> {
    let mut out = Vec::new();
    for seq in sequences {
        for j in 0..seq.len() {
            let score = params.score(seq.user, seq.item, seq.history_at(j), seq.times[j]);
            out.push(Prediction {
                user: seq.user,
                item: seq.item,
                exposure_index: j + 1,
                t: seq.times[j],
                truth: seq.labels[j],
                score,
                predicted: score > threshold,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Ex2Vec,
    Bl,
    BlFit,
    Prev,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ex2Vec, ModelKind::Bl, ModelKind::BlFit, ModelKind::Prev];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ex2Vec => "Ex2Vec",
            ModelKind::Bl => "BL",
            ModelKind::BlFit => "BL_fit",
            ModelKind::Prev => "Prev",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub model: ModelKind,
    pub seed: u64,
    pub balanced_accuracy: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub model: ModelKind,
    pub splits: usize,
    pub ba_mean: f64,
    pub ba_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

/// Mean and sample standard deviation (`n - 1` denominator; zero for `n < 2`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub scores: Vec<SplitScore>,
}

impl EvalReport {
    pub fn summary(&self, model: ModelKind) -> Option<Summary> {
        let rows: Vec<&SplitScore> = self.scores.iter().filter(|s| s.model == model).collect();
        if rows.is_empty() {
            return None;
        }
        let ba: Vec<f64> = rows.iter().map(|r| r.balanced_accuracy).collect();
        let f1: Vec<f64> = rows.iter().map(|r| r.weighted_f1).collect();
        let (ba_mean, ba_std) = mean_std(&ba);
        let (f1_mean, f1_std) = mean_std(&f1);
        Some(Summary {
            model,
            splits: rows.len(),
            ba_mean,
            ba_std,
            f1_mean,
            f1_std,
        })
    }

    pub fn summaries(&self) -> Vec<Summary> {
        ModelKind::ALL.iter().filter_map(|&m| self.summary(m)).collect()
    }

    pub fn score(&self, model: ModelKind, seed: u64) -> Option<&SplitScore> {
        self.scores.iter().find(|s| s.model == model && s.seed == seed)
    }

    /// `model,seed,balanced_accuracy,weighted_f1` with one row per split,
    /// followed by a `mean` and a `std` row per model.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let err = |e: std::io::Error| Error::Validation(format!("report write failed: {e}"));
        writeln!(w, "model,seed,balanced_accuracy,weighted_f1").map_err(err)?;
        for s in &self.scores {
            writeln!(w, "{},{},{},{}", s.model, s.seed, s.balanced_accuracy, s.weighted_f1).map_err(err)?;
        }
        for s in self.summaries() {
            writeln!(w, "{},mean,{},{}", s.model, s.ba_mean, s.f1_mean).map_err(err)?;
            writeln!(w, "{},std,{},{}", s.model, s.ba_std, s.f1_std).map_err(err)?;
        }
        Ok(())
    }

    /// Percentages with two decimals, `mean ± std`.
    pub fn table(&self) -> String {
        let mut out = format!("{:<8} {:>22} {:>22}\n", "Model", "Balanced Accuracy (%)", "Weighted F1 (%)");
        for s in self.summaries() {
            out.push_str(&format!(
                "{:<8} {:>22} {:>22}\n",
                s.model.name(),
                format!("{:.2} ± {:.2}", 100.0 * s.ba_mean, 100.0 * s.ba_std),
                format!("{:.2} ± {:.2}", 100.0 * s.f1_mean, 100.0 * s.f1_std),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub train: TrainConfig,
    /// Decay used by the plain BL baseline.
    pub bl_decay: f64,
    pub decay_grid: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            bl_decay: DEFAULT_DECAY,
            decay_grid: default_decay_grid(),
        }
    }
}

/// Everything produced for one split.
#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub decay_fit: DecayFit,
    pub bl_threshold: f64,
    pub predictions: Vec<Prediction>,
    pub scores: Vec<SplitScore>,
}

fn sequences_for(all: &[PairSequence], pairs: &[(usize, usize)]) -> Vec<PairSequence> {
    pairs
        .iter()
        .map(|p| {
            let k = all
                .binary_search_by(|s| (s.user, s.item).cmp(p))
                .expect("held-out pair comes from the dataset");
            all[k].clone()
        })
        .collect()
}

fn thresholded(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// Splits with `seed`, trains Ex2Vec, calibrates every threshold on the
/// validation pairs, and scores all test exposures.
pub fn evaluate_split(dataset: &Dataset, seed: u64, config: &EvalConfig) -> Result<SplitEvaluation> {
    let split = holdout_split(dataset, seed)?;
    let all = dataset.pair_sequences();
    let validation = sequences_for(&all, &split.validation);
    let test = sequences_for(&all, &split.test);

    let train_config = TrainConfig {
        seed: config.train.seed.wrapping_add(seed),
        ..config.train.clone()
    };
    let outcome = train(&split.train, &validation, &train_config)?;
    info!(
        "split {seed}: selected lr {} epoch {} (val BA {:.4})",
        outcome.lr, outcome.epoch, outcome.val_balanced_accuracy
    );

    let predictions = predict_sequences(&outcome.params, outcome.threshold, &test);
    let truth: Vec<bool> = predictions.iter().map(|p| p.truth).collect();
    let ex2vec_pred: Vec<bool> = predictions.iter().map(|p| p.predicted).collect();

    let (bl_val, bl_val_labels) = base_level_scores(&validation, config.bl_decay);
    let bl_threshold = calibrate_threshold(&bl_val, &bl_val_labels)?;
    let (bl_test, _) = base_level_scores(&test, config.bl_decay);
    let bl_pred = thresholded(&bl_test, bl_threshold);

    let decay_fit = fit_decay(&validation, &config.decay_grid)?;
    let (fit_test, _) = base_level_scores(&test, decay_fit.decay);
    let fit_pred = thresholded(&fit_test, decay_fit.threshold);

    let prev_pred: Vec<bool> = test.iter().flat_map(|s| prev_predict(&s.labels)).collect();

    let mut scores = Vec::with_capacity(4);
    for (model, pred) in [
        (ModelKind::Ex2Vec, &ex2vec_pred),
        (ModelKind::Bl, &bl_pred),
        (ModelKind::BlFit, &fit_pred),
        (ModelKind::Prev, &prev_pred),
    ] {
        scores.push(SplitScore {
            model,
            seed,
            balanced_accuracy: balanced_accuracy(&truth, pred)?,
            weighted_f1: weighted_f1(&truth, pred)?,
        });
    }
    Ok(SplitEvaluation {
        seed,
        outcome,
        decay_fit,
        bl_threshold,
        predictions,
        scores,
    })
}

/// Runs [`evaluate_split`] for every seed and pools the per-split scores.
/// Splits are independent and run in parallel; any failure fails the report.
pub fn evaluate_models(dataset: &Dataset, seeds: &[u64], config: &EvalConfig) -> Result<EvalReport> {
    let splits: Vec<SplitEvaluation> = seeds
        .par_iter()
        .map(|&seed| evaluate_split(dataset, seed, config))
        .collect::<Result<_>>()?;
    let mut scores: Vec<SplitScore> = splits.into_iter().flat_map(|s| s.scores).collect();
    scores.sort_by_key(|s| (s.model, s.seed));
    Ok(EvalReport { scores })
}
