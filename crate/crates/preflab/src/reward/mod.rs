//! Reward models trained on pairwise preferences.
//!
//! A model maps per-step features to a scalar; a trajectory's score is the
//! sum over its steps, and the probability that one trajectory is preferred
//! over another is the softmax of the two scores. Training maximizes the
//! likelihood of the labeled pairs (cross-entropy with trajectory scores as
//! logits).

mod train;

pub use train::{bt_loss_and_grad, train, Preset, TrainConfig};

use crate::datagen::Trajectory;
use crate::envs::{self, EnvId};
use crate::error::{Error, Result};
use crate::numerics::{
    self, read_checkpoint, write_checkpoint, NetParams, NetSpec, NetWorkspace,
};
use crate::util::fmt_f64;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    PrivilegedOnly,
    RawOnly,
    /// Privileged features plus the first `k` raw features in the
    /// environment's default order.
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    /// Number of raw features appended; only meaningful for `Augmented`.
    pub k: usize,
}

impl FeatureConfig {
    pub fn privileged() -> Self {
        FeatureConfig { mode: FeatureMode::PrivilegedOnly, k: 0 }
    }

    pub fn raw() -> Self {
        FeatureConfig { mode: FeatureMode::RawOnly, k: 0 }
    }

    pub fn augmented(k: usize) -> Self {
        FeatureConfig { mode: FeatureMode::Augmented, k }
    }

    pub fn input_dim(&self, env: EnvId) -> Result<usize> {
        match self.mode {
            FeatureMode::PrivilegedOnly => Ok(envs::priv_dim(env)),
            FeatureMode::RawOnly => Ok(envs::raw_dim(env)),
            FeatureMode::Augmented => {
                if self.k > envs::raw_dim(env) {
                    Err(Error::invalid(format!(
                        "k = {} exceeds raw dimension {} of {env}",
                        self.k,
                        envs::raw_dim(env)
                    )))
                } else {
                    Ok(envs::priv_dim(env) + self.k)
                }
            }
        }
    }

    /// Assembles the feature vector for one step into `out`.
    pub fn features_into(&self, raw: &[f64], privileged: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self.mode {
            FeatureMode::PrivilegedOnly => out.extend_from_slice(privileged),
            FeatureMode::RawOnly => out.extend_from_slice(raw),
            FeatureMode::Augmented => {
                out.extend_from_slice(privileged);
                out.extend_from_slice(&raw[..self.k]);
            }
        }
    }

    pub fn features(&self, raw: &[f64], privileged: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.features_into(raw, privileged, &mut out);
        out
    }

    /// Feature names in input order, from the environment's documented
    /// raw/privileged orderings.
    pub fn feature_names(&self, env: EnvId) -> Vec<String> {
        let raw = envs::raw_feature_names(env);
        let privileged = envs::priv_feature_names(env);
        let mut names = Vec::new();
        match self.mode {
            FeatureMode::PrivilegedOnly => {
                names.extend(privileged.iter().map(|s| format!("priv:{s}")))
            }
            FeatureMode::RawOnly => names.extend(raw.iter().map(|s| format!("raw:{s}"))),
            FeatureMode::Augmented => {
                names.extend(privileged.iter().map(|s| format!("priv:{s}")));
                names.extend(raw.iter().take(self.k).map(|s| format!("raw:{s}")));
            }
        }
        names
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode {
            FeatureMode::PrivilegedOnly => "privileged_only",
            FeatureMode::RawOnly => "raw_only",
            FeatureMode::Augmented => "augmented",
        }
    }

    pub fn parse_mode(mode: &str, k: usize) -> Result<Self> {
        match mode {
            "privileged_only" | "privileged" => Ok(FeatureConfig::privileged()),
            "raw_only" | "raw" => Ok(FeatureConfig::raw()),
            "augmented" => Ok(FeatureConfig::augmented(k)),
            other => Err(Error::invalid(format!("unknown feature mode '{other}'"))),
        }
    }
}

/// Training summary carried by a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct RewardModel {
    pub env: EnvId,
    pub features: FeatureConfig,
    pub spec: NetSpec,
    pub params: NetParams,
    pub report: TrainReport,
}

impl RewardModel {
    pub fn new(
        env: EnvId,
        features: FeatureConfig,
        spec: NetSpec,
        params: NetParams,
    ) -> Result<Self> {
        if spec.final_bias {
            return Err(Error::invalid("reward models must not carry a final bias"));
        }
        if spec.input_dim != features.input_dim(env)? {
            return Err(Error::invalid(format!(
                "netspec input_dim {} does not match feature dim {}",
                spec.input_dim,
                features.input_dim(env)?
            )));
        }
        params.check_shapes(&spec)?;
        params.validate_finite()?;
        Ok(RewardModel {
            env,
            features,
            spec,
            params,
            report: TrainReport::default(),
        })
    }

    /// Per-step model output on this model's feature view.
    pub fn step_reward_ws(
        &self,
        raw: &[f64],
        privileged: &[f64],
        feat_buf: &mut Vec<f64>,
        ws: &mut NetWorkspace,
    ) -> f64 {
        self.features.features_into(raw, privileged, feat_buf);
        numerics::forward_unchecked(&self.spec, &self.params, feat_buf, ws)
    }

    pub fn step_reward(&self, raw: &[f64], privileged: &[f64]) -> f64 {
        let mut buf = Vec::new();
        let mut ws = NetWorkspace::default();
        self.step_reward_ws(raw, privileged, &mut buf, &mut ws)
    }

    /// Trajectory score: the sum of per-step outputs.
    pub fn traj_return_logit(&self, traj: &Trajectory) -> Result<f64> {
        if traj.env != self.env {
            return Err(Error::invalid(format!(
                "trajectory env {} does not match model env {}",
                traj.env, self.env
            )));
        }
        let mut buf = Vec::new();
        let mut ws = NetWorkspace::default();
        let mut sum = 0.0;
        for step in &traj.steps {
            if step.raw.len() != envs::raw_dim(self.env)
                || step.privileged.len() != envs::priv_dim(self.env)
            {
                return Err(Error::invalid("step observation dims do not match env"));
            }
            sum += self.step_reward_ws(&step.raw, &step.privileged, &mut buf, &mut ws);
        }
        Ok(sum)
    }

    /// Probability that `b` is preferred over `a`.
    pub fn pref_prob(&self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        Ok(bt_prob(self.traj_return_logit(a)?, self.traj_return_logit(b)?))
    }

    /// Fraction of pairs in `split` ranked correctly; exact ties count 0.5.
    pub fn pairwise_accuracy(
        &self,
        dataset: &crate::prefs::PreferenceDataset,
        trajs: &[Trajectory],
        split: crate::prefs::Split,
    ) -> Result<f64> {
        let by_id: std::collections::HashMap<u32, &Trajectory> =
            trajs.iter().map(|t| (t.id, t)).collect();
        let mut logit_cache: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
        let mut total = 0.0;
        let mut n = 0usize;
        for pair in dataset.split_pairs(split) {
            for id in [pair.first, pair.second] {
                if !logit_cache.contains_key(&id) {
                    let t = by_id
                        .get(&id)
                        .ok_or_else(|| Error::invalid(format!("unknown trajectory id {id}")))?;
                    logit_cache.insert(id, self.traj_return_logit(t)?);
                }
            }
            let li = logit_cache[&pair.first];
            let lj = logit_cache[&pair.second];
            total += if lj > li {
                1.0
            } else if lj == li {
                0.5
            } else {
                0.0
            };
            n += 1;
        }
        if n == 0 {
            return Err(Error::invalid("no pairs in the requested split"));
        }
        Ok(total / n as f64)
    }
}

/// Bradley-Terry probability that the second score wins, computed with
/// max-subtraction so extreme logits cannot overflow.
pub fn bt_prob(logit_a: f64, logit_b: f64) -> f64 {
    let m = logit_a.max(logit_b);
    let ea = (logit_a - m).exp();
    let eb = (logit_b - m).exp();
    eb / (ea + eb)
}

/// Architecture ladder in increasing capacity order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub name: &'static str,
    pub hidden: Vec<usize>,
}

impl ArchSpec {
    pub fn to_netspec(&self, input_dim: usize) -> NetSpec {
        NetSpec::mlp(input_dim, &self.hidden)
    }
}

pub fn capacity_ladder() -> Vec<ArchSpec> {
    vec![
        ArchSpec { name: "linear", hidden: vec![] },
        ArchSpec { name: "h64", hidden: vec![64] },
        ArchSpec { name: "h128", hidden: vec![128] },
        ArchSpec { name: "h64x64", hidden: vec![64, 64] },
        ArchSpec { name: "h128x64", hidden: vec![128, 64] },
        ArchSpec { name: "h128x128", hidden: vec![128, 128] },
        ArchSpec { name: "h256x128", hidden: vec![256, 128] },
        ArchSpec { name: "h256x256", hidden: vec![256, 256] },
    ]
}

/// Looks up an architecture by ladder name, or parses `a,b,...` widths.
pub fn arch_by_name(name: &str) -> Result<Vec<usize>> {
    if let Some(a) = capacity_ladder().into_iter().find(|a| a.name == name) {
        return Ok(a.hidden);
    }
    if name == "(128,64)" || name == "128x64" {
        return Ok(vec![128, 64]);
    }
    name.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("unknown architecture '{name}'")))
        })
        .collect()
}

/// Model artifact: a feature header, a training-report line, then the
/// parameter checkpoint.
pub fn write_model<W: Write>(model: &RewardModel, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "features mode={} k={} env={}",
        model.features.mode_name(),
        model.features.k,
        model.env
    )?;
    let r = &model.report;
    writeln!(
        out,
        "report epochs={} best_val_loss={} train_loss={} train_acc={} val_acc={}",
        r.epochs_run,
        fmt_f64(r.best_val_loss),
        fmt_f64(r.train_loss),
        fmt_f64(r.train_acc),
        fmt_f64(r.val_acc)
    )?;
    write_checkpoint(&model.spec, &model.params, out)
}

pub fn read_model<R: BufRead>(input: &mut R) -> Result<RewardModel> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "features" {
        return Err(Error::parse("model artifact", "expected features header"));
    }
    let get = |i: usize, key: &str| -> Result<String> {
        toks[i]
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::parse("model artifact", format!("expected {key}=<value>")))
    };
    let mode = get(1, "mode")?;
    let k: usize = get(2, "k")?
        .parse()
        .map_err(|e| Error::parse("model artifact", format!("k: {e}")))?;
    let env = EnvId::parse(&get(3, "env")?)?;
    let features = FeatureConfig::parse_mode(&mode, k)?;

    let mut report_line = String::new();
    input.read_line(&mut report_line)?;
    let rtoks: Vec<&str> = report_line.split_whitespace().collect();
    if rtoks.len() != 6 || rtoks[0] != "report" {
        return Err(Error::parse("model artifact", "expected report line"));
    }
    let rget = |i: usize, key: &str| -> Result<String> {
        rtoks[i]
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::parse("model artifact", format!("expected {key}=<value>")))
    };
    let report = TrainReport {
        epochs_run: rget(1, "epochs")?
            .parse()
            .map_err(|e| Error::parse("model artifact", format!("epochs: {e}")))?,
        best_val_loss: rget(2, "best_val_loss")?
            .parse()
            .map_err(|e| Error::parse("model artifact", format!("best_val_loss: {e}")))?,
        train_loss: rget(3, "train_loss")?
            .parse()
            .map_err(|e| Error::parse("model artifact", format!("train_loss: {e}")))?,
        train_acc: rget(4, "train_acc")?
            .parse()
            .map_err(|e| Error::parse("model artifact", format!("train_acc: {e}")))?,
        val_acc: rget(5, "val_acc")?
            .parse()
            .map_err(|e| Error::parse("model artifact", format!("val_acc: {e}")))?,
    };

    let (spec, params) = read_checkpoint(input)?;
    let mut model = RewardModel::new(env, features, spec, params)?;
    model.report = report;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{SourceTag, TrajStep, Trajectory};
    use crate::numerics::Mat64;

    fn linear_model(env: EnvId, features: FeatureConfig, w: &[f64]) -> RewardModel {
        let spec = NetSpec::linear(w.len());
        let params = NetParams {
            weights: vec![Mat64::from_rows(&[w.to_vec()]).unwrap()],
            biases: vec![],
        };
        RewardModel::new(env, features, spec, params).unwrap()
    }

    fn traj_with_priv(env: EnvId, id: u32, privs: &[Vec<f64>]) -> Trajectory {
        let raw_d = envs::raw_dim(env);
        let steps: Vec<TrajStep> = privs
            .iter()
            .map(|p| TrajStep {
                raw: vec![0.0; raw_d],
                privileged: p.clone(),
                a: vec![0.0, 0.0],
                r: 0.0,
            })
            .collect();
        Trajectory { id, env, source: SourceTag::Epsilon, ret: 0.0, success: None, steps }
    }

    #[test]
    fn zero_model_scores_zero() {
        let model = linear_model(EnvId::Reacher, FeatureConfig::privileged(), &[0.0]);
        let t = traj_with_priv(EnvId::Reacher, 0, &[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(model.traj_return_logit(&t).unwrap(), 0.0);
    }

    #[test]
    fn linear_privileged_logit_is_negative_distance_sum() {
        let model = linear_model(EnvId::Reacher, FeatureConfig::privileged(), &[-1.0]);
        let t = traj_with_priv(EnvId::Reacher, 0, &[vec![0.5], vec![0.25], vec![0.75]]);
        let logit = model.traj_return_logit(&t).unwrap();
        assert!((logit + 1.5).abs() < 1e-12);
    }

    #[test]
    fn logit_matches_independent_per_step_loop() {
        // Random-ish model checked against a hand-rolled step loop.
        let env = EnvId::Feeding;
        let features = FeatureConfig::augmented(4);
        let spec = NetSpec::mlp(features.input_dim(env).unwrap(), &[6]);
        let params = NetParams::init(&spec, 42);
        let model = RewardModel::new(env, features, spec.clone(), params.clone()).unwrap();

        let trajs = crate::datagen::default_epsilon_set(env, 1);
        let t = &trajs[17];
        let mut oracle = 0.0;
        for step in &t.steps {
            let mut feats = step.privileged.clone();
            feats.extend_from_slice(&step.raw[..4]);
            oracle += numerics::forward(&spec, &params, &feats).unwrap();
        }
        let got = model.traj_return_logit(t).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn bt_prob_trivials() {
        assert_eq!(bt_prob(1.0, 1.0), 0.5);
        let p = bt_prob(0.0, 3.0f64.ln());
        assert!((p - 0.75).abs() < 1e-12);
        // Overflow safety at a huge gap.
        let p = bt_prob(1000.0, 0.0);
        assert!(p >= 0.0 && p < 1e-300);
        let p = bt_prob(0.0, 1000.0);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bt_prob_antisymmetry() {
        let mut x: f64 = 0.3;
        for _ in 0..100 {
            x = (x * 97.0 + 13.7).sin() * 50.0;
            let y = (x * 31.0).cos() * 40.0;
            let s = bt_prob(x, y) + bt_prob(y, x);
            assert!((s - 1.0).abs() < 1e-12, "x={x} y={y} s={s}");
        }
    }

    #[test]
    fn equal_horizon_shift_invariance_is_exact() {
        // Integer-valued logits keep all arithmetic exact, so adding the
        // same per-step constant to both trajectories changes nothing.
        let t = 100.0;
        let c = 3.0;
        let (la, lb) = (17.0, 42.0);
        let p0 = bt_prob(la, lb);
        let p1 = bt_prob(la + t * c, lb + t * c);
        assert_eq!(p0.to_bits(), p1.to_bits());
    }

    #[test]
    fn ladder_matches_contract() {
        let ladder = capacity_ladder();
        assert_eq!(ladder.len(), 8);
        assert!(ladder[0].hidden.is_empty());
        assert_eq!(ladder[7].hidden, vec![256, 256]);
        assert_eq!(arch_by_name("h128x64").unwrap(), vec![128, 64]);
        assert_eq!(arch_by_name("32,16").unwrap(), vec![32, 16]);
        assert!(arch_by_name("nope").is_err());
    }

    #[test]
    fn feature_views() {
        let raw = vec![1.0, 2.0, 3.0];
        let privileged = vec![10.0, 20.0];
        assert_eq!(FeatureConfig::privileged().features(&raw, &privileged), vec![10.0, 20.0]);
        assert_eq!(FeatureConfig::raw().features(&raw, &privileged), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            FeatureConfig::augmented(2).features(&raw, &privileged),
            vec![10.0, 20.0, 1.0, 2.0]
        );
        // k = 0 augmentation equals privileged-only by definition.
        assert_eq!(
            FeatureConfig::augmented(0).features(&raw, &privileged),
            FeatureConfig::privileged().features(&raw, &privileged)
        );
    }

    #[test]
    fn env_mismatch_is_rejected() {
        let model = linear_model(EnvId::Reacher, FeatureConfig::privileged(), &[1.0]);
        let t = traj_with_priv(EnvId::Feeding, 0, &[vec![1.0, 0.0, 0.0]]);
        assert!(model.traj_return_logit(&t).is_err());
    }

    #[test]
    fn model_artifact_round_trips() {
        let env = EnvId::Itch;
        let features = FeatureConfig::augmented(5);
        let spec = NetSpec::mlp(features.input_dim(env).unwrap(), &[8]);
        let params = NetParams::init(&spec, 9);
        let mut model = RewardModel::new(env, features, spec, params).unwrap();
        model.report = TrainReport {
            epochs_run: 37,
            best_val_loss: 0.123,
            train_loss: 0.1,
            train_acc: 0.9,
            val_acc: 0.85,
        };
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model(&mut std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(model.env, back.env);
        assert_eq!(model.features, back.features);
        assert_eq!(model.spec, back.spec);
        assert_eq!(model.params, back.params);
        assert_eq!(model.report, back.report);
    }
}
