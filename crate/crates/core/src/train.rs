//! Adam training loop, learning-rate selection and threshold calibration.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, PairSequence};
use crate::error::{Error, Result};
use crate::eval::balanced_accuracy_from_counts;
use crate::model::{accumulate_gradients, Gradients, ModelParams, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr_grid: Vec<f64>,
    pub batch_size: usize,
    pub l2_weight: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 64,
            epochs: 100,
            lr_grid: vec![5e-5, 2e-4, 7.5e-4, 1e-3],
            batch_size: 512,
            l2_weight: 1e-4,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 9] = [
        "dim",
        "epochs",
        "lr_grid",
        "batch_size",
        "l2_weight",
        "seed",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|lr| !(*lr > 0.0) || !lr.is_finite()) {
            return bad("lr_grid must hold positive learning rates");
        }
        if !(self.l2_weight >= 0.0) {
            return bad("l2_weight must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
        }
        match key {
            "dim" => self.dim = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "lr_grid" => {
                self.lr_grid = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<f64>>>()?
            }
            "batch_size" => self.batch_size = num(key, value)?,
            "l2_weight" => self.l2_weight = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_eps" => self.adam_eps = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Resolved `(key, value)` pairs in [`Self::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let grid = self
            .lr_grid
            .iter()
            .map(|lr| lr.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("dim", self.dim.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr_grid", grid),
            ("batch_size", self.batch_size.to_string()),
            ("l2_weight", self.l2_weight.to_string()),
            ("seed", self.seed.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
        ]
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Adam moment accumulators mirroring the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        let grads = Gradients::zeros_like(params);
        let shapes: Vec<Vec<f64>> = grads.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        OptimizerState {
            step: 0,
            beta1,
            beta2,
            eps,
            first: shapes.clone(),
            second: shapes,
        }
    }

    pub fn from_config(params: &ModelParams, config: &TrainConfig) -> Self {
        Self::new(params, config.adam_beta1, config.adam_beta2, config.adam_eps)
    }
}

/// Standard-normal embeddings; scalars at their fixed starting values;
/// step-size and bias terms at zero.
pub fn init_params(config: &TrainConfig, n_users: usize, n_items: usize, seed: u64) -> ModelParams {
    let mut params = ModelParams::new(n_users, n_items, config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in params.user_emb.iter_mut().chain(params.item_emb.iter_mut()) {
        *x = StandardNormal.sample(&mut rng);
    }
    params
}

/// One bias-corrected Adam update over every trainable scalar, followed by
/// the cutoff projection.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut OptimizerState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, g), m), v) in params
        .trainable_slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.project();
}

/// Threshold maximising balanced accuracy of `score > threshold`.
///
/// Candidates are 0, 1 and the midpoints between consecutive distinct
/// scores; ties go to the smallest candidate. Scores may include
/// `-inf`, which stays below every candidate.
pub fn calibrate_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Precondition(
            "threshold calibration needs both positive and negative labels".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| scores[k]).collect();
    // positives among the first k sorted scores
    let mut pos_prefix = Vec::with_capacity(sorted.len() + 1);
    pos_prefix.push(0usize);
    for &k in &order {
        pos_prefix.push(pos_prefix.last().unwrap() + usize::from(labels[k]));
    }

    let mut candidates = vec![0.0, 1.0];
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let mid = if a == f64::NEG_INFINITY {
            f64::MIN
        } else {
            let m = a + (b - a) / 2.0;
            if m >= b {
                a
            } else {
                m
            }
        };
        candidates.push(mid);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best = (f64::NEG_INFINITY, 0.0);
    for &c in &candidates {
        let below = sorted.partition_point(|&s| s <= c);
        let false_neg = pos_prefix[below];
        let true_neg = below - false_neg;
        let true_pos = positives - false_neg;
        let false_pos = negatives - true_neg;
        let ba = balanced_accuracy_from_counts(true_pos, false_neg, true_neg, false_pos);
        if ba > best.0 {
            best = (ba, c);
        }
    }
    Ok(best.1)
}

/// Scores every exposure of every sequence, using each pair's own earlier
/// listens as history.
pub fn score_sequences(params: &ModelParams, sequences: &[PairSequence]) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for seq in sequences {
        for j in 0..seq.len() {
            scores.push(params.score(seq.user, seq.item, seq.history_at(j), seq.times[j]));
            labels.push(seq.labels[j]);
        }
    }
    (scores, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_balanced_accuracy: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub threshold: f64,
    pub lr: f64,
    pub epoch: usize,
    pub val_balanced_accuracy: f64,
    pub log: Vec<TrainLogRow>,
    /// Optimizer steps taken per learning rate, in grid order.
    pub steps: Vec<(f64, u64)>,
    /// Learning rates abandoned after a non-finite loss.
    pub diverged: Vec<f64>,
}

struct LrRun {
    lr: f64,
    log: Vec<TrainLogRow>,
    best: Option<(f64, usize, f64, ModelParams)>,
    steps: u64,
    diverged: bool,
}

fn epoch_seed(seed: u64, lr_index: usize, epoch: usize) -> u64 {
    seed ^ ((lr_index as u64 + 1) << 48) ^ ((epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_lr(
    lr_index: usize,
    lr: f64,
    train_seqs: &[PairSequence],
    slots: &[(u32, u32)],
    validation: &[PairSequence],
    init: &ModelParams,
    config: &TrainConfig,
) -> Result<LrRun> {
    let mut params = init.clone();
    let mut state = OptimizerState::from_config(&params, config);
    let mut grads = Gradients::zeros_like(&params);
    let mut order: Vec<(u32, u32)> = slots.to_vec();
    let mut batch: Vec<Sample<'_>> = Vec::with_capacity(config.batch_size);
    let mut run = LrRun {
        lr,
        log: Vec::new(),
        best: None,
        steps: 0,
        diverged: false,
    };

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, lr_index, epoch));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&(s, j)| {
                let seq = &train_seqs[s as usize];
                let j = j as usize;
                Sample {
                    user: seq.user,
                    item: seq.item,
                    t: seq.times[j],
                    label: seq.labels[j],
                    history: seq.history_at(j),
                }
            }));
            grads.reset();
            let loss = accumulate_gradients(&params, &batch, config.l2_weight, &mut grads);
            if !loss.is_finite() {
                run.diverged = true;
                break;
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, lr);
        }
        run.steps = state.step;
        if run.diverged || !params.is_finite() {
            run.diverged = true;
            warn!("lr {lr}: non-finite loss in epoch {epoch}, abandoning this learning rate");
            break;
        }
        let (scores, labels) = score_sequences(&params, validation);
        let threshold = calibrate_threshold(&scores, &labels)?;
        let preds: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
        let ba = crate::eval::balanced_accuracy(&labels, &preds)?;
        let train_loss = if slots.is_empty() { 0.0 } else { loss_sum / slots.len() as f64 };
        info!("lr {lr} epoch {epoch}: loss {train_loss:.5} val BA {ba:.4}");
        run.log.push(TrainLogRow {
            epoch,
            lr,
            train_loss,
            val_balanced_accuracy: ba,
            threshold,
        });
        if run.best.as_ref().is_none_or(|b| ba > b.0) {
            run.best = Some((ba, epoch, threshold, params.clone()));
        }
    }
    Ok(run)
}

/// Trains one model per learning rate and keeps the `(lr, epoch)` checkpoint
/// with the highest validation balanced accuracy.
///
/// Every learning rate starts from the same initialisation. Runs are
/// independent, so they execute in parallel without affecting results.
pub fn train(train_data: &Dataset, validation: &[PairSequence], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if validation.iter().all(PairSequence::is_empty) {
        return Err(Error::Precondition("validation set is empty".into()));
    }
    let train_seqs = train_data.pair_sequences();
    let slots: Vec<(u32, u32)> = train_seqs
        .iter()
        .enumerate()
        .flat_map(|(s, seq)| (0..seq.len()).map(move |j| (s as u32, j as u32)))
        .collect();
    let init = init_params(config, train_data.n_users(), train_data.n_items(), config.seed);

    let runs: Vec<LrRun> = config
        .lr_grid
        .par_iter()
        .enumerate()
        .map(|(k, &lr)| run_lr(k, lr, &train_seqs, &slots, validation, &init, config))
        .collect::<Result<_>>()?;

    let mut log = Vec::new();
    let mut steps = Vec::new();
    let mut diverged = Vec::new();
    let mut best: Option<(f64, f64, usize, f64, ModelParams)> = None;
    for run in runs {
        log.extend(run.log);
        steps.push((run.lr, run.steps));
        if run.diverged {
            diverged.push(run.lr);
        }
        if let Some((ba, epoch, threshold, params)) = run.best {
            if best.as_ref().is_none_or(|b| ba > b.0) {
                best = Some((ba, run.lr, epoch, threshold, params));
            }
        }
    }
    let (val_balanced_accuracy, lr, epoch, threshold, params) =
        best.ok_or_else(|| Error::Precondition("every learning rate diverged".into()))?;
    Ok(TrainOutcome {
        params,
        threshold,
        lr,
        epoch,
        val_balanced_accuracy,
        log,
        steps,
        diverged,
    })
}

/// Writes the training log as `epoch,lr,train_loss,val_balanced_accuracy,threshold`.
pub fn write_train_log<W: Write>(rows: &[TrainLogRow], mut writer: W) -> Result<()> {
    let err = |e: std::io::Error| Error::Validation(format!("log write failed: {e}"));
    writeln!(writer, "epoch,lr,train_loss,val_balanced_accuracy,threshold").map_err(err)?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.epoch, r.lr, r.train_loss, r.val_balanced_accuracy, r.threshold
        )
        .map_err(err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{InteractionEvent, TimeUnit};
    use crate::eval::balanced_accuracy;

    #[test]
    fn config_defaults_and_parsing() {
        let cfg = TrainConfig::parse("# comment\n\ndim = 8\nlr_grid=1e-3,5e-4\nseed=42\n").unwrap();
        assert_eq!(cfg.dim, 8);
        assert_eq!(cfg.lr_grid, vec![1e-3, 5e-4]);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(TrainConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
        assert!(TrainConfig::parse("bogus=1").is_err());
        assert!(TrainConfig::parse("dim").is_err());
        assert!(TrainConfig::parse("dim=0").is_err());
        assert!(TrainConfig::parse("lr_grid=-1").is_err());
        for key in TrainConfig::KEYS {
            assert!(TrainConfig::default().entries().iter().any(|(k, _)| *k == key));
        }
    }

    #[test]
    fn init_matches_starting_values() {
        let cfg = TrainConfig {
            dim: 4,
            ..Default::default()
        };
        let p = init_params(&cfg, 3, 5, 9);
        assert_eq!(p.alpha, 1.0);
        assert_eq!(p.beta, -0.0065);
        assert_eq!(p.gamma, 0.5);
        assert_eq!(p.cutoff, 3.0);
        assert_eq!(p.decay, 0.5);
        assert_eq!(p.lambda, 0.0);
        assert!(p.user_bias.iter().chain(&p.item_bias).chain(&p.lambda_user_bias).all(|&b| b == 0.0));
        assert_eq!(p, init_params(&cfg, 3, 5, 9));
        assert_ne!(p.user_emb, init_params(&cfg, 3, 5, 10).user_emb);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = ModelParams::new(1, 1, 1);
        let mut g = Gradients::zeros_like(&p);
        g.alpha = 1.0;
        let mut state = OptimizerState::new(&p, 0.9, 0.999, 1e-8);
        let before = p.alpha;
        adam_step(&mut p, &g, &mut state, 1e-3);
        // oracle: m_hat = v_hat = 1 on the first step
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p.alpha - before - expected).abs() < 1e-15);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = TrainConfig {
            dim: 3,
            ..Default::default()
        };
        let mut p = init_params(&cfg, 2, 2, 0);
        let before = p.clone();
        let g = Gradients::zeros_like(&p);
        let mut state = OptimizerState::from_config(&p, &cfg);
        adam_step(&mut p, &g, &mut state, 1e-3);
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn cutoff_is_projected() {
        let mut p = ModelParams::new(1, 1, 1);
        p.cutoff = 1e-3 + 1e-4;
        let mut g = Gradients::zeros_like(&p);
        g.cutoff = 1.0;
        let mut state = OptimizerState::new(&p, 0.9, 0.999, 1e-8);
        adam_step(&mut p, &g, &mut state, 0.5);
        assert_eq!(p.cutoff, 1e-3);
    }

    #[test]
    fn calibration_worked_example() {
        let t = calibrate_threshold(&[0.2, 0.6, 0.8], &[false, true, true]).unwrap();
        assert!((t - 0.4).abs() < 1e-15);
    }

    #[test]
    fn calibration_inverted_and_constant_scores() {
        let t = calibrate_threshold(&[0.9, 0.8, 0.1, 0.2], &[false, false, true, true]).unwrap();
        let preds: Vec<bool> = [0.9, 0.8, 0.1, 0.2].iter().map(|&s| s > t).collect();
        let ba = balanced_accuracy(&[false, false, true, true], &preds).unwrap();
        assert!(ba <= 0.5);
        assert_eq!(calibrate_threshold(&[0.5, 0.5], &[true, false]).unwrap(), 0.0);
        assert!(calibrate_threshold(&[0.5, 0.7], &[true, true]).is_err());
    }

    #[test]
    fn calibration_handles_sentinel_scores() {
        let scores = [f64::NEG_INFINITY, f64::NEG_INFINITY, -0.5, 1.7];
        let labels = [false, false, true, true];
        let t = calibrate_threshold(&scores, &labels).unwrap();
        assert!(t.is_finite());
        assert!(scores.iter().zip(&labels).all(|(&s, &l)| (s > t) == l));
    }

    fn tiny_dataset(seed: u64) -> (Dataset, Vec<PairSequence>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = Vec::new();
        for u in 0..10 {
            for i in 0..10 {
                let mut t = rng.random_range(0.0..5.0);
                let like = (u + i) % 3 != 0;
                for _ in 0..rng.random_range(3..8) {
                    t += rng.random_range(0.5..10.0);
                    let listened = if like { rng.random_bool(0.85) } else { rng.random_bool(0.15) };
                    events.push(InteractionEvent {
                        user: u,
                        item: i,
                        t,
                        listened,
                    });
                }
            }
        }
        let d = Dataset::from_events(events, 10, 10, TimeUnit::Hours).unwrap();
        let seqs = d.pair_sequences();
        (d, seqs)
    }

    #[test]
    fn one_epoch_takes_ceil_steps() {
        let (d, seqs) = tiny_dataset(0);
        let cfg = TrainConfig {
            dim: 4,
            epochs: 1,
            lr_grid: vec![1e-3],
            batch_size: 64,
            ..Default::default()
        };
        let out = train(&d, &seqs[..10], &cfg).unwrap();
        assert_eq!(out.steps, vec![(1e-3, d.len().div_ceil(64) as u64)]);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn diverging_lr_is_skipped() {
        let (d, seqs) = tiny_dataset(1);
        let cfg = TrainConfig {
            dim: 4,
            epochs: 2,
            lr_grid: vec![f64::MAX, 1e-3],
            batch_size: 32,
            ..Default::default()
        };
        let out = train(&d, &seqs[..20], &cfg).unwrap();
        assert_eq!(out.diverged, vec![f64::MAX]);
        assert_eq!(out.lr, 1e-3);
    }

    #[test]
    fn empty_validation_is_an_error() {
        let (d, _) = tiny_dataset(2);
        assert!(train(&d, &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (d, seqs) = tiny_dataset(3);
        let cfg = TrainConfig {
            dim: 4,
            epochs: 3,
            lr_grid: vec![1e-3, 2e-4],
            batch_size: 50,
            ..Default::default()
        };
        let a = train(&d, &seqs[..15], &cfg).unwrap();
        let b = train(&d, &seqs[..15], &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn loss_decreases_on_tiny_data() {
        let mut decreasing = 0;
        let seeds = 20;
        for seed in 0..seeds {
            let (d, seqs) = tiny_dataset(100 + seed);
            let cfg = TrainConfig {
                dim: 8,
                epochs: 10,
                lr_grid: vec![1e-3],
                batch_size: 32,
                seed,
                ..Default::default()
            };
            let out = train(&d, &seqs[..20], &cfg).unwrap();
            if out.log.last().unwrap().train_loss < out.log.first().unwrap().train_loss {
                decreasing += 1;
            }
        }
        assert!(decreasing as f64 >= 0.95 * seeds as f64, "{decreasing}/{seeds}");
    }

    #[test]
    fn train_log_format() {
        let rows = [TrainLogRow {
            epoch: 1,
            lr: 0.001,
            train_loss: 0.5,
            val_balanced_accuracy: 0.75,
            threshold: 0.25,
        }];
        let mut buf = Vec::new();
        write_train_log(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,lr,train_loss,val_balanced_accuracy,threshold\n1,0.001,0.5,0.75,0.25\n"
        );
    }
}
