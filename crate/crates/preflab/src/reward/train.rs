//! Likelihood training of reward models with early stopping.

use super::{FeatureConfig, RewardModel, TrainReport};
use crate::datagen::Trajectory;
use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::{
    self, NetParams, NetSpec, NetWorkspace, OptAlgo, OptState,
};
use crate::prefs::{PreferenceDataset, Split};
use crate::rng;
use rand::Rng;
use std::collections::HashMap;

/// Hyperparameters for one training run. `batch_size = 0` means full-batch,
/// the default for these dataset sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub algo: OptAlgo,
    pub lr: f64,
    pub weight_decay: f64,
    pub l1: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience > self.max_epochs {
            return Err(Error::invalid("patience must not exceed max_epochs"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        Ok(())
    }
}

/// Named regularization presets used by the experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Plain runs: weight decay 0.01, no l1.
    Baseline,
    /// Feature sweep: l1 0.1, no weight decay.
    FeatureSweep,
    /// Capacity ladder: weight decay 0.01, l1 0.01.
    Capacity,
    /// Data-collection comparison: weight decay 0.01, l1 0.01.
    Datagen,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::FeatureSweep => "feature_sweep",
            Preset::Capacity => "capacity",
            Preset::Datagen => "datagen",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Preset::Baseline),
            "feature_sweep" => Ok(Preset::FeatureSweep),
            "capacity" => Ok(Preset::Capacity),
            "datagen" => Ok(Preset::Datagen),
            other => Err(Error::invalid(format!("unknown preset '{other}'"))),
        }
    }

    pub fn train_config(self, seed: u64) -> TrainConfig {
        let (weight_decay, l1) = match self {
            Preset::Baseline => (0.01, 0.0),
            Preset::FeatureSweep => (0.0, 0.1),
            Preset::Capacity | Preset::Datagen => (0.01, 0.01),
        };
        TrainConfig {
            algo: OptAlgo::Adam,
            lr: 0.01,
            weight_decay,
            l1,
            max_epochs: 100,
            patience: 10,
            batch_size: 0,
            seed,
        }
    }
}

#[inline]
fn sigmoid(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `-ln sigmoid(d) = softplus(-d)`.
#[inline]
fn nll_of_gap(d: f64) -> f64 {
    if d > 0.0 {
        (-d).exp().ln_1p()
    } else {
        -d + d.exp().ln_1p()
    }
}

fn compute_logits(spec: &NetSpec, params: &NetParams, feats: &[Vec<Vec<f64>>]) -> Vec<f64> {
    exec::par_map(feats.len(), |t| {
        let mut ws = NetWorkspace::default();
        feats[t]
            .iter()
            .fold(0.0, |acc, x| acc + numerics::forward_unchecked(spec, params, x, &mut ws))
    })
}

fn mean_pair_loss(logits: &[f64], pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(i, j)| nll_of_gap(logits[j] - logits[i]))
        .sum();
    total / pairs.len() as f64
}

fn accuracy(logits: &[f64], pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            if logits[j] > logits[i] {
                1.0
            } else if logits[j] == logits[i] {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    total / pairs.len() as f64
}

/// Mean Bradley-Terry negative log likelihood over `pairs` (indices into
/// `feats`, worse trajectory first), and its gradient in the parameters.
/// This is the exact quantity the training loop descends; it is exposed so
/// the gradient can be verified independently against finite differences.
pub fn bt_loss_and_grad(
    spec: &NetSpec,
    params: &NetParams,
    feats: &[Vec<Vec<f64>>],
    pairs: &[(usize, usize)],
) -> (f64, NetParams) {
    let logits = compute_logits(spec, params, feats);
    let n = pairs.len() as f64;
    let mut coeff = vec![0.0; feats.len()];
    let mut loss = 0.0;
    for &(i, j) in pairs {
        let d = logits[j] - logits[i];
        loss += nll_of_gap(d);
        // d(nll)/d(logit_j) = sigmoid(d) - 1, and the negative for logit_i.
        let g = (sigmoid(d) - 1.0) / n;
        coeff[j] += g;
        coeff[i] -= g;
    }
    loss /= n;

    let per_traj = exec::par_map(feats.len(), |t| {
        if coeff[t] == 0.0 {
            return None;
        }
        let mut ws = NetWorkspace::default();
        let mut g = NetParams::zeros(spec);
        for x in &feats[t] {
            numerics::accumulate_grad_unchecked(spec, params, x, coeff[t], &mut g, &mut ws);
        }
        Some(g)
    });
    let mut grads = NetParams::zeros(spec);
    for g in per_traj.into_iter().flatten() {
        grads.add_scaled(&g, 1.0);
    }
    (loss, grads)
}

/// Featurizes every step of every referenced trajectory and returns the
/// tensors plus the pair lists re-indexed into them.
#[allow(clippy::type_complexity)]
fn prepare(
    dataset: &PreferenceDataset,
    trajs: &[Trajectory],
    features: FeatureConfig,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let by_id: HashMap<u32, &Trajectory> = trajs.iter().map(|t| (t.id, t)).collect();
    let mut local_of: HashMap<u32, usize> = HashMap::new();
    let mut feats: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut map_pair = |first: u32, second: u32| -> Result<(usize, usize)> {
        let mut local = |id: u32| -> Result<usize> {
            if let Some(&l) = local_of.get(&id) {
                return Ok(l);
            }
            let t = by_id
                .get(&id)
                .ok_or_else(|| Error::invalid(format!("pair references unknown id {id}")))?;
            let mut per_step = Vec::with_capacity(t.steps.len());
            for s in &t.steps {
                per_step.push(features.features(&s.raw, &s.privileged));
            }
            feats.push(per_step);
            local_of.insert(id, feats.len() - 1);
            Ok(feats.len() - 1)
        };
        Ok((local(first)?, local(second)?))
    };
    let mut train_pairs = Vec::new();
    let mut val_pairs = Vec::new();
    for p in &dataset.pairs {
        let ij = map_pair(p.first, p.second)?;
        match p.split {
            Split::Train => train_pairs.push(ij),
            Split::Val => val_pairs.push(ij),
        }
    }
    Ok((feats, train_pairs, val_pairs))
}

/// Fits a reward model by maximum likelihood over the training pairs,
/// early-stopping on validation loss and restoring the best-validation
/// parameters.
pub fn train(
    dataset: &PreferenceDataset,
    trajs: &[Trajectory],
    features: FeatureConfig,
    hidden: &[usize],
    tc: &TrainConfig,
) -> Result<RewardModel> {
    tc.validate()?;
    if dataset.pairs.is_empty() {
        return Err(Error::invalid("empty preference dataset"));
    }
    if dataset.count(Split::Val) == 0 {
        return Err(Error::invalid("dataset has no validation split; apply split() first"));
    }
    let env = trajs
        .first()
        .ok_or_else(|| Error::invalid("empty trajectory set"))?
        .env;
    let input_dim = features.input_dim(env)?;
    let spec = NetSpec::mlp(input_dim, hidden);

    let (feats, train_pairs, val_pairs) = prepare(dataset, trajs, features)?;
    let mut params = NetParams::init(&spec, tc.seed);
    let mut opt = match tc.algo {
        OptAlgo::Sgd => OptState::sgd(tc.lr),
        OptAlgo::Adam => OptState::adam(tc.lr),
    }
    .with_weight_decay(tc.weight_decay)
    .with_l1(tc.l1);

    // Initial validation loss counts as the stopping baseline.
    let logits0 = compute_logits(&spec, &params, &feats);
    let mut best_val = mean_pair_loss(&logits0, &val_pairs);
    let mut best_params = params.clone();
    let mut since_best = 0usize;
    let mut epochs_run = 0usize;

    let full_batch = tc.batch_size == 0 || tc.batch_size >= train_pairs.len();

    for epoch in 1..=tc.max_epochs {
        epochs_run = epoch;
        if full_batch {
            let (loss, grads) = bt_loss_and_grad(&spec, &params, &feats, &train_pairs);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
            }
            opt.step(&spec, &mut params, &grads)?;
        } else {
            let mut order: Vec<usize> = (0..train_pairs.len()).collect();
            let mut r = rng::stream(tc.seed, &[0xba7c4, epoch as u64]);
            for i in (1..order.len()).rev() {
                let j = r.random_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(tc.batch_size) {
                let batch: Vec<(usize, usize)> = chunk.iter().map(|&i| train_pairs[i]).collect();
                let (loss, grads) = bt_loss_and_grad(&spec, &params, &feats, &batch);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
                }
                opt.step(&spec, &mut params, &grads)?;
            }
        }

        let logits = compute_logits(&spec, &params, &feats);
        let train_loss = mean_pair_loss(&logits, &train_pairs);
        let val_loss = mean_pair_loss(&logits, &val_pairs);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
        }
        if val_loss < best_val {
            best_val = val_loss;
            best_params = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tc.patience {
                break;
            }
        }
    }

    let logits = compute_logits(&spec, &best_params, &feats);
    let report = TrainReport {
        epochs_run,
        best_val_loss: best_val,
        train_loss: mean_pair_loss(&logits, &train_pairs),
        train_acc: accuracy(&logits, &train_pairs),
        val_acc: accuracy(&logits, &val_pairs),
    };
    let mut model = RewardModel::new(env, features, spec, best_params)?;
    model.report = report;
    Ok(model)
}
