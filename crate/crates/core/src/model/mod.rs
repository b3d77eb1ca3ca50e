//! The Ex2Vec scoring model.
//!
//! For a user `u`, item `i` and the pair's past listen times, the forward pass is
//!
//! ```text
//! base      = ||u_emb - i_emb||
//! lambda_u  = max(lambda + lambda_bias[u], 0)
//! eff       = max(base - lambda_u * K(t; c, d), 0)
//! interest  = alpha * eff + beta * eff^2 + gamma + user_bias[u] + item_bias[i]
//! score     = sigmoid(interest)
//! ```
//!
//! where `K` is the [exposure kernel](crate::kernel::exposure_kernel). Training
//! minimises the mean binary cross-entropy plus an L2 penalty on the embedding
//! rows touched by the batch. Gradients are derived by hand; [`gradcheck`]
//! compares them against central differences.

mod checkpoint;
pub mod gradcheck;

use crate::error::{Error, Result};
use crate::kernel::{exposure_kernel_with_cutoff_grad, DEFAULT_DECAY};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use gradcheck::{compare_gradients, finite_diff_check, GradCheckEntry, GradCheckReport};

/// Scores are clipped to `[EPS, 1 - EPS]` inside the loss.
pub const LOSS_EPS: f64 = 1e-7;
/// Lower bound enforced on the cutoff after every optimizer step.
pub const MIN_CUTOFF: f64 = 1e-3;
/// Below this distance the Euclidean gradient is taken as zero.
pub const DISTANCE_GRAD_FLOOR: f64 = 1e-8;

/// All model parameters. Embedding tables are row-major `n x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub user_emb: Vec<f64>,
    pub item_emb: Vec<f64>,
    pub lambda: f64,
    pub lambda_user_bias: Vec<f64>,
    pub cutoff: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Fixed kernel decay; never trained.
    pub decay: f64,
}

impl ModelParams {
    /// Zero embeddings and biases with the standard initial scalars.
    pub fn new(n_users: usize, n_items: usize, dim: usize) -> Self {
        ModelParams {
            dim,
            user_emb: vec![0.0; n_users * dim],
            item_emb: vec![0.0; n_items * dim],
            lambda: 0.0,
            lambda_user_bias: vec![0.0; n_users],
            cutoff: 3.0,
            alpha: 1.0,
            beta: -0.0065,
            gamma: 0.5,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            decay: DEFAULT_DECAY,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn user_row(&self, user: usize) -> &[f64] {
        &self.user_emb[user * self.dim..(user + 1) * self.dim]
    }

    pub fn item_row(&self, item: usize) -> &[f64] {
        &self.item_emb[item * self.dim..(item + 1) * self.dim]
    }

    /// `lambda + lambda_bias[user]` before the clamp at zero.
    pub fn raw_user_lambda(&self, user: usize) -> f64 {
        self.lambda + self.lambda_user_bias[user]
    }

    pub fn user_lambda(&self, user: usize) -> f64 {
        self.raw_user_lambda(user).max(0.0)
    }

    /// Distance part of the forward pass.
    pub fn effective_distance(&self, user: usize, item: usize, history: &[f64], t: f64) -> DistanceTrace {
        let base_dist = euclidean(self.user_row(user), self.item_row(item));
        let (kernel_value, _) = exposure_kernel_with_cutoff_grad(history, t, self.cutoff, self.decay);
        let (effective_dist, clamped) = modulated_distance(base_dist, self.user_lambda(user), kernel_value);
        DistanceTrace {
            base_dist,
            kernel_value,
            effective_dist,
            clamped,
        }
    }

    pub fn interest(&self, effective_dist: f64, user: usize, item: usize) -> f64 {
        quadratic_interest(self.alpha, self.beta, self.gamma, effective_dist)
            + self.user_bias[user]
            + self.item_bias[item]
    }

    pub fn forward(&self, sample: &Sample<'_>) -> ForwardTrace {
        let base_dist = euclidean(self.user_row(sample.user), self.item_row(sample.item));
        let (kernel_value, kernel_dcutoff) =
            exposure_kernel_with_cutoff_grad(sample.history, sample.t, self.cutoff, self.decay);
        let raw_lambda = self.raw_user_lambda(sample.user);
        let pre_clamp = base_dist - raw_lambda.max(0.0) * kernel_value;
        let effective_dist = pre_clamp.max(0.0);
        let interest = self.interest(effective_dist, sample.user, sample.item);
        ForwardTrace {
            base_dist,
            kernel_value,
            effective_dist,
            clamped: pre_clamp < 0.0,
            interest,
            score: predict_score(interest),
            pre_clamp,
            raw_lambda,
            kernel_dcutoff,
        }
    }

    /// Predicted listen probability for one exposure.
    pub fn score(&self, user: usize, item: usize, history: &[f64], t: f64) -> f64 {
        self.forward(&Sample {
            user,
            item,
            t,
            label: false,
            history,
        })
        .score
    }

    /// Keeps the cutoff inside its feasible region.
    pub fn project(&mut self) {
        if !(self.cutoff >= MIN_CUTOFF) {
            self.cutoff = MIN_CUTOFF;
        }
    }

    /// Trainable tensors in a fixed order shared with [`Gradients::slices`].
    pub(crate) fn trainable_slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.user_emb,
            &mut self.item_emb,
            std::slice::from_mut(&mut self.lambda),
            &mut self.lambda_user_bias,
            std::slice::from_mut(&mut self.cutoff),
            std::slice::from_mut(&mut self.alpha),
            std::slice::from_mut(&mut self.beta),
            std::slice::from_mut(&mut self.gamma),
            &mut self.user_bias,
            &mut self.item_bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        let scalars = [self.lambda, self.cutoff, self.alpha, self.beta, self.gamma, self.decay];
        scalars.iter().all(|x| x.is_finite())
            && [
                &self.user_emb,
                &self.item_emb,
                &self.lambda_user_bias,
                &self.user_bias,
                &self.item_bias,
            ]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// One training or scoring example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub user: usize,
    pub item: usize,
    pub t: f64,
    pub label: bool,
    /// Past listen times of this pair, all strictly before `t`.
    pub history: &'a [f64],
}

/// [`Sample`] that owns its history.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedSample {
    pub user: usize,
    pub item: usize,
    pub t: f64,
    pub label: bool,
    pub history: Vec<f64>,
}

impl OwnedSample {
    pub fn as_sample(&self) -> Sample<'_> {
        Sample {
            user: self.user,
            item: self.item,
            t: self.t,
            label: self.label,
            history: &self.history,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceTrace {
    pub base_dist: f64,
    pub kernel_value: f64,
    pub effective_dist: f64,
    pub clamped: bool,
}

/// Forward-pass intermediates, reused by the backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardTrace {
    pub base_dist: f64,
    pub kernel_value: f64,
    pub effective_dist: f64,
    pub clamped: bool,
    pub interest: f64,
    pub score: f64,
    pub pre_clamp: f64,
    pub raw_lambda: f64,
    pub kernel_dcutoff: f64,
}

/// Euclidean distance between two embeddings.
pub fn base_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(euclidean(u, v))
}

fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `max(base - lambda_u * kernel, 0)` and whether the clamp fired.
pub fn modulated_distance(base_dist: f64, user_lambda: f64, kernel_value: f64) -> (f64, bool) {
    let pre = base_dist - user_lambda * kernel_value;
    (pre.max(0.0), pre < 0.0)
}

pub fn quadratic_interest(alpha: f64, beta: f64, gamma: f64, dist: f64) -> f64 {
    alpha * dist + beta * dist * dist + gamma
}

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
pub fn predict_score(interest: f64) -> f64 {
    if interest >= 0.0 {
        1.0 / (1.0 + (-interest).exp())
    } else {
        let e = interest.exp();
        e / (1.0 + e)
    }
}

fn clipped_bce(score: f64, label: bool) -> f64 {
    let p = score.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

fn touched(mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn l2_penalty(params: &ModelParams, batch: &[Sample<'_>]) -> f64 {
    let users = touched(batch.iter().map(|s| s.user).collect());
    let items = touched(batch.iter().map(|s| s.item).collect());
    let sq = |row: &[f64]| row.iter().map(|x| x * x).sum::<f64>();
    users.iter().map(|&u| sq(params.user_row(u))).sum::<f64>()
        + items.iter().map(|&i| sq(params.item_row(i))).sum::<f64>()
}

/// Mean clipped binary cross-entropy plus `l2_weight` times the squared norm
/// of every embedding row the batch touches.
pub fn batch_loss(params: &ModelParams, batch: &[Sample<'_>], l2_weight: f64) -> f64 {
    assert!(!batch.is_empty(), "batch must not be empty");
    let bce: f64 = batch
        .iter()
        .map(|s| clipped_bce(params.forward(s).score, s.label))
        .sum::<f64>()
        / batch.len() as f64;
    if l2_weight == 0.0 {
        bce
    } else {
        bce + l2_weight * l2_penalty(params, batch)
    }
}

/// Gradient with the same layout as the trainable fields of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dim: usize,
    pub user_emb: Vec<f64>,
    pub item_emb: Vec<f64>,
    pub lambda: f64,
    pub lambda_user_bias: Vec<f64>,
    pub cutoff: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            dim: params.dim,
            user_emb: vec![0.0; params.user_emb.len()],
            item_emb: vec![0.0; params.item_emb.len()],
            lambda: 0.0,
            lambda_user_bias: vec![0.0; params.lambda_user_bias.len()],
            cutoff: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            user_bias: vec![0.0; params.user_bias.len()],
            item_bias: vec![0.0; params.item_bias.len()],
        }
    }

    pub fn reset(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }

    pub(crate) fn slices(&self) -> [&[f64]; 10] {
        [
            &self.user_emb,
            &self.item_emb,
            std::slice::from_ref(&self.lambda),
            &self.lambda_user_bias,
            std::slice::from_ref(&self.cutoff),
            std::slice::from_ref(&self.alpha),
            std::slice::from_ref(&self.beta),
            std::slice::from_ref(&self.gamma),
            &self.user_bias,
            &self.item_bias,
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.user_emb,
            &mut self.item_emb,
            std::slice::from_mut(&mut self.lambda),
            &mut self.lambda_user_bias,
            std::slice::from_mut(&mut self.cutoff),
            std::slice::from_mut(&mut self.alpha),
            std::slice::from_mut(&mut self.beta),
            std::slice::from_mut(&mut self.gamma),
            &mut self.user_bias,
            &mut self.item_bias,
        ]
    }
}

/// Analytic gradient of [`batch_loss`].
pub fn gradients(params: &ModelParams, batch: &[Sample<'_>], l2_weight: f64) -> Gradients {
    let mut grads = Gradients::zeros_like(params);
    accumulate_gradients(params, batch, l2_weight, &mut grads);
    grads
}

/// Adds the gradient of [`batch_loss`] into `grads` and returns the loss.
///
/// Samples are processed in batch order so the reduction is deterministic.
pub fn accumulate_gradients(
    params: &ModelParams,
    batch: &[Sample<'_>],
    l2_weight: f64,
    grads: &mut Gradients,
) -> f64 {
    assert!(!batch.is_empty(), "batch must not be empty");
    let dim = params.dim;
    let scale = 1.0 / batch.len() as f64;
    let mut bce = 0.0;
    for s in batch {
        let fw = params.forward(s);
        bce += clipped_bce(fw.score, s.label);

        // d(loss)/d(interest); zero where the score clip is active
        let y = if s.label { 1.0 } else { 0.0 };
        let g_interest = if fw.score < LOSS_EPS || fw.score > 1.0 - LOSS_EPS {
            0.0
        } else {
            (fw.score - y) * scale
        };
        if g_interest == 0.0 {
            continue;
        }
        let eff = fw.effective_dist;
        grads.alpha += g_interest * eff;
        grads.beta += g_interest * eff * eff;
        grads.gamma += g_interest;
        grads.user_bias[s.user] += g_interest;
        grads.item_bias[s.item] += g_interest;

        if fw.pre_clamp <= 0.0 {
            continue;
        }
        let g_dist = g_interest * (params.alpha + 2.0 * params.beta * eff);

        if fw.base_dist >= DISTANCE_GRAD_FLOOR {
            let u = params.user_row(s.user);
            let v = params.item_row(s.item);
            let k = g_dist / fw.base_dist;
            let gu = &mut grads.user_emb[s.user * dim..(s.user + 1) * dim];
            for d in 0..dim {
                gu[d] += k * (u[d] - v[d]);
            }
            let gv = &mut grads.item_emb[s.item * dim..(s.item + 1) * dim];
            for d in 0..dim {
                gv[d] -= k * (u[d] - v[d]);
            }
        }

        if fw.raw_lambda >= 0.0 {
            let g_lambda = -g_dist * fw.kernel_value;
            grads.lambda += g_lambda;
            grads.lambda_user_bias[s.user] += g_lambda;
            grads.cutoff += -g_dist * fw.raw_lambda * fw.kernel_dcutoff;
        }
    }
    bce *= scale;

    if l2_weight == 0.0 {
        return bce;
    }
    let users = touched(batch.iter().map(|s| s.user).collect());
    let items = touched(batch.iter().map(|s| s.item).collect());
    let mut penalty = 0.0;
    for &u in &users {
        let row = params.user_row(u);
        let g = &mut grads.user_emb[u * dim..(u + 1) * dim];
        for d in 0..dim {
            penalty += row[d] * row[d];
            g[d] += 2.0 * l2_weight * row[d];
        }
    }
    for &i in &items {
        let row = params.item_row(i);
        let g = &mut grads.item_emb[i * dim..(i + 1) * dim];
        for d in 0..dim {
            penalty += row[d] * row[d];
            g[d] += 2.0 * l2_weight * row[d];
        }
    }
    bce + l2_weight * penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::exposure_kernel;
    use proptest::prelude::*;

    fn two_d(u: [f64; 2], v: [f64; 2]) -> ModelParams {
        let mut p = ModelParams::new(1, 1, 2);
        p.user_emb = u.to_vec();
        p.item_emb = v.to_vec();
        p
    }

    #[test]
    fn base_distance_examples() {
        assert_eq!(base_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(base_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            base_distance(&[0.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn base_distance_componentwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..80);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut acc = 0.0;
            for k in 0..n {
                acc += (u[k] - v[k]).powi(2);
            }
            assert!((base_distance(&u, &v).unwrap() - acc.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_distance_examples() {
        let (d, clamped) = modulated_distance(5.0, 1.0, 0.882253);
        assert!((d - 4.117747).abs() < 1e-12);
        assert!(!clamped);
        let (d, clamped) = modulated_distance(0.5, 1.0, 0.882253);
        assert_eq!(d, 0.0);
        assert!(clamped);
    }

    #[test]
    fn effective_distance_with_history_and_without() {
        let mut p = two_d([0.0, 0.0], [3.0, 4.0]);
        p.lambda = 1.0;
        let empty = p.effective_distance(0, 0, &[], 10.0);
        assert_eq!(empty.effective_dist, 5.0);
        let tr = p.effective_distance(0, 0, &[0.0, 1.0, 3.0], 10.0);
        let k = exposure_kernel(&[0.0, 1.0, 3.0], 10.0, 3.0, 0.5);
        assert_eq!(tr.kernel_value, k);
        assert!((tr.effective_dist - (5.0 - k)).abs() < 1e-15);
        assert!((tr.effective_dist - 4.117747).abs() < 1e-6);
    }

    #[test]
    fn negative_user_lambda_is_clamped() {
        let mut p = two_d([0.0, 0.0], [3.0, 4.0]);
        p.lambda = 0.2;
        p.lambda_user_bias[0] = -1.0;
        assert_eq!(p.user_lambda(0), 0.0);
        assert_eq!(p.effective_distance(0, 0, &[0.0], 1.0).effective_dist, 5.0);
    }

    #[test]
    fn lambda_at_zero_still_learns() {
        // initial values sit on the clamp boundary; the data must be able to move them
        let p = two_d([0.0, 0.0], [3.0, 4.0]);
        let history = [0.0, 1.0];
        let batch = [Sample {
            user: 0,
            item: 0,
            t: 3.0,
            label: true,
            history: &history,
        }];
        let g = gradients(&p, &batch, 0.0);
        assert!(g.lambda != 0.0 && g.lambda_user_bias[0] != 0.0);
        assert_eq!(g.cutoff, 0.0);
    }

    #[test]
    fn interest_examples() {
        let p = ModelParams::new(1, 1, 2);
        assert_eq!(p.interest(0.0, 0, 0), 0.5);
        let i = quadratic_interest(1.0, -0.0065, 0.5, 4.117747);
        assert!((i - 4.50753).abs() < 5e-6, "{i}");
        // vertex of the initial quadratic
        let vertex = -p.alpha / (2.0 * p.beta);
        assert!((vertex - 76.923).abs() < 1e-3);
        let at = |d: f64| p.interest(d, 0, 0);
        assert!(at(vertex) > at(vertex - 0.5) && at(vertex) > at(vertex + 0.5));
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(predict_score(0.0), 0.5);
        assert!(predict_score(800.0) <= 1.0 && predict_score(800.0) > 0.999);
        assert!(predict_score(-1000.0) >= 0.0 && predict_score(-1000.0).is_finite());
        for x in [0.3, 2.0, 17.5, 300.0] {
            assert!((predict_score(x) + predict_score(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bce_of_coin_flip_is_ln2() {
        let p = ModelParams::new(1, 1, 2);
        // interest 0 at distance 0 requires gamma = 0
        let mut p = p;
        p.gamma = 0.0;
        let batch = [Sample {
            user: 0,
            item: 0,
            t: 1.0,
            label: true,
            history: &[],
        }];
        assert!((batch_loss(&p, &batch, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        // zero embeddings: penalty vanishes as well
        assert!((batch_loss(&p, &batch, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    fn random_problem(seed: u64) -> (ModelParams, Vec<OwnedSample>) {
        gradcheck::random_problem(seed)
    }

    #[test]
    fn batch_loss_matches_scalar_oracle() {
        for seed in 0..20 {
            let (p, owned) = random_problem(seed);
            let batch: Vec<Sample<'_>> = owned.iter().map(OwnedSample::as_sample).collect();
            let l2 = 1e-3;
            // scalar-by-scalar recomputation
            let mut total = 0.0;
            for s in &owned {
                let u = p.user_row(s.user);
                let v = p.item_row(s.item);
                let mut sq = 0.0;
                for k in 0..p.dim {
                    sq += (u[k] - v[k]) * (u[k] - v[k]);
                }
                let mut kernel = 0.0;
                for &tj in &s.history {
                    if s.t > tj {
                        kernel += 1.0 / (s.t - tj + p.cutoff).sqrt();
                    }
                }
                let lam = (p.lambda + p.lambda_user_bias[s.user]).max(0.0);
                let d = (sq.sqrt() - lam * kernel).max(0.0);
                let x = p.alpha * d + p.beta * d * d + p.gamma + p.user_bias[s.user] + p.item_bias[s.item];
                let y = (1.0 / (1.0 + (-x).exp())).clamp(1e-7, 1.0 - 1e-7);
                total += if s.label { -y.ln() } else { -(1.0 - y).ln() };
            }
            let mut reg = 0.0;
            let mut seen_u = std::collections::HashSet::new();
            let mut seen_i = std::collections::HashSet::new();
            for s in &owned {
                if seen_u.insert(s.user) {
                    reg += p.user_row(s.user).iter().map(|x| x * x).sum::<f64>();
                }
                if seen_i.insert(s.item) {
                    reg += p.item_row(s.item).iter().map(|x| x * x).sum::<f64>();
                }
            }
            let oracle = total / owned.len() as f64 + l2 * reg;
            let got = batch_loss(&p, &batch, l2);
            assert!((got - oracle).abs() < 1e-10, "seed {seed}: {got} vs {oracle}");
        }
    }

    #[test]
    fn clamped_sample_only_moves_offsets() {
        let mut p = two_d([0.0, 0.0], [0.3, 0.4]);
        p.lambda = 2.0;
        let history = [0.0, 1.0, 2.0];
        let batch = [Sample {
            user: 0,
            item: 0,
            t: 3.0,
            label: true,
            history: &history,
        }];
        assert!(p.forward(&batch[0]).clamped);
        let g = gradients(&p, &batch, 0.0);
        assert!(g.user_emb.iter().chain(&g.item_emb).all(|&x| x == 0.0));
        assert_eq!(g.lambda, 0.0);
        assert_eq!(g.lambda_user_bias[0], 0.0);
        assert_eq!(g.cutoff, 0.0);
        assert_eq!(g.beta, 0.0);
        assert_ne!(g.gamma, 0.0);
        assert_ne!(g.user_bias[0], 0.0);
        assert_ne!(g.item_bias[0], 0.0);
    }

    #[test]
    fn coincident_embeddings_have_zero_distance_gradient() {
        let p = two_d([1.0, 1.0], [1.0, 1.0]);
        let batch = [Sample {
            user: 0,
            item: 0,
            t: 3.0,
            label: false,
            history: &[],
        }];
        let g = gradients(&p, &batch, 0.0);
        assert!(g.user_emb.iter().all(|x| x.is_finite() && *x == 0.0));
    }

    proptest! {
        #[test]
        fn effective_distance_bounded_by_base(
            u in prop::collection::vec(-3.0f64..3.0, 4),
            v in prop::collection::vec(-3.0f64..3.0, 4),
            lambda in -1.0f64..3.0,
            gaps in prop::collection::vec(0.1f64..20.0, 0..20),
            dt in 0.01f64..30.0,
        ) {
            let mut p = ModelParams::new(1, 1, 4);
            p.user_emb = u;
            p.item_emb = v;
            p.lambda = lambda;
            let mut t = 0.0;
            let hist: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
            let now = t + dt;
            let tr = p.effective_distance(0, 0, &hist, now);
            prop_assert!(tr.effective_dist >= 0.0 && tr.effective_dist <= tr.base_dist);
            // forgetting: later evaluation never shrinks the distance
            let later = p.effective_distance(0, 0, &hist, now + 5.0);
            prop_assert!(later.effective_dist >= tr.effective_dist);
            // one more listen never increases it
            let mut longer = hist.clone();
            longer.push(now);
            let after = p.effective_distance(0, 0, &longer, now + dt);
            let before = p.effective_distance(0, 0, &hist, now + dt);
            prop_assert!(after.effective_dist <= before.effective_dist);
            // score stays strictly inside (0, 1)
            let score = p.score(0, 0, &hist, now);
            prop_assert!(score > 0.0 && score < 1.0);
        }

        #[test]
        fn concave_interest_peaks_at_vertex(alpha in 0.1f64..5.0, beta in -2.0f64..-0.01, d in 0.0f64..100.0) {
            let vertex = -alpha / (2.0 * beta);
            let at = |x: f64| quadratic_interest(alpha, beta, 0.5, x);
            prop_assert!(at(vertex) >= at(d) - 1e-9);
            prop_assert!(predict_score(at(vertex)) >= predict_score(at(d)));
        }
    }
}
