//! Central finite-difference validation of the analytic gradients.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use super::{batch_loss, gradients, Gradients, ModelParams, OwnedSample, Sample, DISTANCE_GRAD_FLOOR, LOSS_EPS};
use crate::error::{Error, Result};

/// Coordinates sampled per embedding table or per-entity vector.
pub const SAMPLED_COORDINATES: usize = 10;
/// Coordinates whose perturbation comes this close to a kink are skipped.
pub const BOUNDARY_MARGIN: f64 = 1e-6;
/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR)` as denominator.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn entry(&self, name: &str) -> Option<&GradCheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    UserEmb(usize),
    ItemEmb(usize),
    Lambda,
    LambdaUserBias(usize),
    Cutoff,
    Alpha,
    Beta,
    Gamma,
    UserBias(usize),
    ItemBias(usize),
}

impl Coord {
    fn slot<'p>(&self, p: &'p mut ModelParams) -> &'p mut f64 {
        match *self {
            Coord::UserEmb(k) => &mut p.user_emb[k],
            Coord::ItemEmb(k) => &mut p.item_emb[k],
            Coord::Lambda => &mut p.lambda,
            Coord::LambdaUserBias(u) => &mut p.lambda_user_bias[u],
            Coord::Cutoff => &mut p.cutoff,
            Coord::Alpha => &mut p.alpha,
            Coord::Beta => &mut p.beta,
            Coord::Gamma => &mut p.gamma,
            Coord::UserBias(u) => &mut p.user_bias[u],
            Coord::ItemBias(i) => &mut p.item_bias[i],
        }
    }

    fn analytic(&self, g: &Gradients) -> f64 {
        match *self {
            Coord::UserEmb(k) => g.user_emb[k],
            Coord::ItemEmb(k) => g.item_emb[k],
            Coord::Lambda => g.lambda,
            Coord::LambdaUserBias(u) => g.lambda_user_bias[u],
            Coord::Cutoff => g.cutoff,
            Coord::Alpha => g.alpha,
            Coord::Beta => g.beta,
            Coord::Gamma => g.gamma,
            Coord::UserBias(u) => g.user_bias[u],
            Coord::ItemBias(i) => g.item_bias[i],
        }
    }
}

/// Which side of every kink each sample sits on. Zero means within the margin.
fn regime(params: &ModelParams, batch: &[Sample<'_>]) -> Vec<i8> {
    let side = |x: f64| {
        if x > BOUNDARY_MARGIN {
            1
        } else if x < -BOUNDARY_MARGIN {
            -1
        } else {
            0
        }
    };
    let mut out = Vec::with_capacity(batch.len() * 5);
    for s in batch {
        let fw = params.forward(s);
        out.push(side(fw.pre_clamp));
        out.push(side(fw.raw_lambda));
        out.push(side(fw.base_dist - DISTANCE_GRAD_FLOOR));
        out.push(side(fw.score - LOSS_EPS));
        out.push(side(1.0 - LOSS_EPS - fw.score));
    }
    out
}

fn sample_indices(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<usize> {
    if pool.len() <= n {
        pool.to_vec()
    } else {
        pool.choose_multiple(rng, n).copied().collect()
    }
}

/// Compares the analytic gradient from [`gradients`] against central
/// differences with step `h`.
pub fn finite_diff_check(
    params: &ModelParams,
    batch: &[Sample<'_>],
    l2_weight: f64,
    h: f64,
    tol: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = gradients(params, batch, l2_weight);
    compare_gradients(params, batch, l2_weight, &analytic, h, tol, seed)
}

/// Same as [`finite_diff_check`] but against a caller-supplied gradient.
pub fn compare_gradients(
    params: &ModelParams,
    batch: &[Sample<'_>],
    l2_weight: f64,
    analytic: &Gradients,
    h: f64,
    tol: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Validation(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    if batch.is_empty() {
        return Err(Error::Validation("finite-difference check needs a non-empty batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = params.dim;
    let mut users: Vec<usize> = batch.iter().map(|s| s.user).collect();
    users.sort_unstable();
    users.dedup();
    let mut items: Vec<usize> = batch.iter().map(|s| s.item).collect();
    items.sort_unstable();
    items.dedup();
    let user_coords: Vec<usize> = users.iter().flat_map(|&u| u * dim..(u + 1) * dim).collect();
    let item_coords: Vec<usize> = items.iter().flat_map(|&i| i * dim..(i + 1) * dim).collect();

    let groups: Vec<(&'static str, Vec<Coord>)> = vec![
        (
            "user_emb",
            sample_indices(&mut rng, &user_coords, SAMPLED_COORDINATES)
                .into_iter()
                .map(Coord::UserEmb)
                .collect(),
        ),
        (
            "item_emb",
            sample_indices(&mut rng, &item_coords, SAMPLED_COORDINATES)
                .into_iter()
                .map(Coord::ItemEmb)
                .collect(),
        ),
        ("lambda", vec![Coord::Lambda]),
        (
            "lambda_user_bias",
            sample_indices(&mut rng, &users, SAMPLED_COORDINATES)
                .into_iter()
                .map(Coord::LambdaUserBias)
                .collect(),
        ),
        ("cutoff", vec![Coord::Cutoff]),
        ("alpha", vec![Coord::Alpha]),
        ("beta", vec![Coord::Beta]),
        ("gamma", vec![Coord::Gamma]),
        (
            "user_bias",
            sample_indices(&mut rng, &users, SAMPLED_COORDINATES)
                .into_iter()
                .map(Coord::UserBias)
                .collect(),
        ),
        (
            "item_bias",
            sample_indices(&mut rng, &items, SAMPLED_COORDINATES)
                .into_iter()
                .map(Coord::ItemBias)
                .collect(),
        ),
    ];

    let base_regime = regime(params, batch);
    let base_smooth = !base_regime.contains(&0);
    let mut probe = params.clone();
    let mut entries = Vec::with_capacity(groups.len());
    for (name, coords) in groups {
        let mut entry = GradCheckEntry {
            name,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
            passed: true,
        };
        for coord in coords {
            let x0 = *coord.slot(&mut probe);
            *coord.slot(&mut probe) = x0 + h;
            let plus_regime = regime(&probe, batch);
            let plus = batch_loss(&probe, batch, l2_weight);
            *coord.slot(&mut probe) = x0 - h;
            let minus_regime = regime(&probe, batch);
            let minus = batch_loss(&probe, batch, l2_weight);
            *coord.slot(&mut probe) = x0;

            if !base_smooth || plus_regime != base_regime || minus_regime != base_regime {
                entry.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let exact = coord.analytic(analytic);
            let denom = exact.abs().max(numeric.abs()).max(REL_FLOOR);
            let rel = (exact - numeric).abs() / denom;
            entry.checked += 1;
            entry.max_rel_error = entry.max_rel_error.max(rel);
            if !(rel < tol) {
                entry.passed = false;
            }
        }
        entries.push(entry);
    }
    Ok(GradCheckReport { tolerance: tol, entries })
}

/// Random model and batch used for gradient checking.
///
/// Embedding dimension is drawn from {2, 8, 64}, histories have 0 to 50
/// events, and scalars are spread so that some samples hit the distance
/// clamp and some users have a clamped step size.
pub fn random_problem(seed: u64) -> (ModelParams, Vec<OwnedSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = *[2usize, 8, 64].choose(&mut rng).expect("non-empty");
    let n_users = rng.random_range(2..7);
    let n_items = rng.random_range(2..7);
    let mut p = ModelParams::new(n_users, n_items, dim);
    let scale = rng.random_range(0.3..1.5) / (dim as f64).sqrt();
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    for x in p.user_emb.iter_mut().chain(p.item_emb.iter_mut()) {
        *x = normal(&mut rng) * scale;
    }
    p.lambda = rng.random_range(0.0..0.6);
    for b in p.lambda_user_bias.iter_mut() {
        *b = 0.2 * normal(&mut rng);
    }
    p.cutoff = rng.random_range(0.5..5.0);
    p.alpha = rng.random_range(0.5..3.0);
    p.beta = -rng.random_range(0.05..1.5);
    p.gamma = rng.random_range(-1.0..1.0);
    for b in p.user_bias.iter_mut().chain(p.item_bias.iter_mut()) {
        *b = 0.3 * normal(&mut rng);
    }

    let gaps = LogNormal::new(1.0, 1.0).expect("valid lognormal");
    let batch_size = rng.random_range(1..25);
    let samples = (0..batch_size)
        .map(|_| {
            let len = rng.random_range(0..=50);
            let mut t = rng.random_range(0.0..100.0);
            let history: Vec<f64> = (0..len)
                .map(|_| {
                    t += gaps.sample(&mut rng) + 1e-3;
                    t
                })
                .collect();
            OwnedSample {
                user: rng.random_range(0..n_users),
                item: rng.random_range(0..n_items),
                t: t + gaps.sample(&mut rng) + 1e-3,
                label: rng.random_bool(0.5),
                history,
            }
        })
        .collect();
    (p, samples)
}
