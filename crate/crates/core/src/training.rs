//! REINFORCE training of the policy network.
//!
//! Each epoch draws a fresh batch of instances with random starting
//! solutions and lets the current policy modify them step after step. The
//! modified solutions are carried over from step to step, so improving moves
//! get rarer as the policy gets better. Every `T` steps the discounted
//! returns of the window weight a policy-gradient update. The epoch ends once
//! the batch-mean objective has not reached a new best for `k_max`
//! consecutive steps.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{generate, Instance, ProblemKind, RngSeed, Sense, Solution};
use crate::model::{
    backward, forward_batch, sample_action, save_checkpoint, BatchForward, Hyper, MaskPolicy, Mode, ModelParams,
    Scalar, StateBatch,
};
use crate::operators::{apply_in_place, node_pair_action, OperatorKind};

/// How a step's reward is derived from objective values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RewardVariant {
    /// Improvement over the initial solution.
    Rf1,
    /// Improvement over the best solution seen so far, clamped at zero.
    Rf2,
    /// Improvement over the previous solution.
    Rf3,
}

impl std::str::FromStr for RewardVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RF1" => Ok(RewardVariant::Rf1),
            "RF2" => Ok(RewardVariant::Rf2),
            "RF3" => Ok(RewardVariant::Rf3),
            _ => Err(Error::arg(format!("unknown reward variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::arg(format!("unknown optimizer '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub problem: ProblemKind,
    pub instance_size: usize,
    pub d: usize,
    pub layers: usize,
    pub n_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub episode_len: usize,
    pub k_max: usize,
    pub grad_clip_norm: f64,
    pub reward_variant: RewardVariant,
    pub operator: OperatorKind,
    pub optimizer: OptimizerKind,
    pub mask: MaskPolicy,
    /// Hard cap on steps per epoch, on top of the stall rule.
    pub max_steps_per_epoch: Option<usize>,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            problem: ProblemKind::Prp,
            instance_size: 20,
            d: 128,
            layers: 3,
            n_epochs: 5000,
            batch_size: 64,
            learning_rate: 1e-4,
            gamma: 0.1,
            episode_len: 20,
            k_max: 5,
            grad_clip_norm: 1.0,
            reward_variant: RewardVariant::Rf3,
            operator: OperatorKind::Insert,
            optimizer: OptimizerKind::Sgd,
            mask: MaskPolicy::Invalid,
            max_steps_per_epoch: None,
            seed: RngSeed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.episode_len == 0 || self.k_max == 0 || self.batch_size == 0 {
            return bad("episode_len, k_max and batch_size must be at least 1".into());
        }
        if self.d == 0 || self.layers == 0 {
            return bad("d and layers must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate must be finite and non-negative, got {}", self.learning_rate));
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!("gradient clip norm must be positive, got {}", self.grad_clip_norm));
        }
        if self.instance_size < 2 || (self.problem == ProblemKind::Gpp && self.instance_size % 2 == 1) {
            return bad(format!("invalid instance size {} for {}", self.instance_size, self.problem));
        }
        if self.operator.acts_on_partitions() != (self.problem == ProblemKind::Gpp) {
            return bad(format!("operator {} does not apply to {}", self.operator, self.problem));
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper::new(self.d, self.layers, self.problem)
    }
}

/// Reward of a move from `f_curr` to `f_next`; all values are raw
/// objectives, oriented internally so that improvement is positive.
pub fn reward(variant: RewardVariant, f_next: f64, f_curr: f64, f_init: f64, f_best: f64, sense: Sense) -> f64 {
    let s = |v: f64| sense.score(v);
    match variant {
        RewardVariant::Rf1 => s(f_next) - s(f_init),
        RewardVariant::Rf2 => s(f_next).max(s(f_best)) - s(f_best),
        RewardVariant::Rf3 => s(f_next) - s(f_curr),
    }
}

/// `R_t = sum_i gamma^i * rewards[t + i]` within the window.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Rescales trainable gradients so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_gradient<F: Scalar>(grads: &mut ModelParams<F>, max_norm: f64) -> f64 {
    let norm = grads.trainable_norm();
    if norm > max_norm {
        grads.scale_trainable(F::from_f64(max_norm / norm).unwrap());
    }
    norm
}

/// Stall rule: counts consecutive steps without a new best batch mean.
#[derive(Debug, Clone)]
pub struct StallCounter {
    best: f64,
    k: usize,
    k_max: usize,
}

impl StallCounter {
    /// `start` is the oriented batch-mean objective before the first step.
    pub fn new(start: f64, k_max: usize) -> Self {
        StallCounter { best: start, k: 0, k_max }
    }

    /// Records a step; returns `true` when the loop must stop.
    pub fn observe(&mut self, mean: f64) -> bool {
        if mean > self.best {
            self.best = mean;
            self.k = 0;
        } else {
            self.k += 1;
        }
        self.k >= self.k_max
    }

    pub fn count(&self) -> usize {
        self.k
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// First-order optimizer state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam { m: Box<ModelParams<f32>>, v: Box<ModelParams<f32>>, t: i32 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: &ModelParams<f32>) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => {
                Optimizer::Adam { m: Box::new(params.zeros_like()), v: Box::new(params.zeros_like()), t: 0 }
            }
        }
    }

    /// Descends along `grads`, the gradient of the loss to minimize.
    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &ModelParams<f32>, lr: f64) {
        match self {
            Optimizer::Sgd => params.add_scaled(grads, -lr as f32),
            Optimizer::Adam { m, v, t } => {
                const B1: f32 = 0.9;
                const B2: f32 = 0.999;
                const EPS: f32 = 1e-8;
                *t += 1;
                let c1 = 1.0 - B1.powi(*t);
                let c2 = 1.0 - B2.powi(*t);
                let lr = lr as f32;
                let g = grads.tensors();
                let mut ms = m.tensors_mut();
                let mut vs = v.tensors_mut();
                for (k, (_, role, p)) in params.tensors_mut().into_iter().enumerate() {
                    if role != crate::model::TensorRole::Trainable {
                        continue;
                    }
                    let (gk, mk, vk) = (g[k].3, &mut *ms[k].2, &mut *vs[k].2);
                    for i in 0..p.len() {
                        mk[i] = B1 * mk[i] + (1.0 - B1) * gk[i];
                        vk[i] = B2 * vk[i] + (1.0 - B2) * gk[i] * gk[i];
                        p[i] -= lr * (mk[i] / c1) / ((vk[i] / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Batch mean of the summed (undiscounted) rewards of the epoch.
    pub mean_return: f64,
    /// Batch mean of the best raw objective reached.
    pub mean_best_objective: f64,
    pub steps: usize,
    pub updates: usize,
    pub seconds: f64,
}

struct WindowStep {
    input: StateBatch<f32>,
    retained: Option<BatchForward<f32>>,
    cells: Vec<usize>,
    rewards: Vec<f64>,
}

/// Bytes kept per step when the forward pass is retained for the update.
fn retained_bytes(config: &TrainConfig) -> usize {
    let n = config.instance_size;
    let edges = config.batch_size * n * n;
    let per_edge = config.d * (6 * config.layers + 2) + 2 * crate::model::DECODER_WIDTHS.iter().sum::<usize>();
    edges * per_edge * 4
}

const RETAIN_LIMIT: usize = 768 << 20;

/// One epoch: fresh instances, policy rollouts until the stall rule
/// fires, one update per window of `episode_len` steps.
pub fn train_epoch<R: Rng>(
    params: &mut ModelParams<f32>,
    optimizer: &mut Optimizer,
    config: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochReport> {
    let start = Instant::now();
    let b_size = config.batch_size;
    let n = config.instance_size;
    let sense = config.problem.sense();
    let insts: Vec<Instance> =
        (0..b_size).map(|_| generate(config.problem, n, RngSeed(rng.gen()))).collect::<Result<_>>()?;
    let mut sols: Vec<Solution> = insts.iter().map(|i| i.random_solution(rng)).collect();
    let f_init: Vec<f64> = insts.iter().zip(&sols).map(|(i, s)| i.objective(s)).collect::<Result<_>>()?;
    let mut f_curr = f_init.clone();
    let mut f_best = f_init.clone();
    let mut total = vec![0.0; b_size];
    let mean_score = |f: &[f64]| f.iter().map(|&v| sense.score(v)).sum::<f64>() / f.len() as f64;
    let mut stall = StallCounter::new(mean_score(&f_init), config.k_max);
    let retain = retained_bytes(config) * config.episode_len <= RETAIN_LIMIT;

    let mut window: Vec<WindowStep> = Vec::with_capacity(config.episode_len);
    let mut steps = 0;
    let mut updates = 0;
    loop {
        steps += 1;
        let states: Vec<(&Instance, &Solution)> = insts.iter().zip(&sols).collect();
        let input = StateBatch::<f32>::build(&states, config.operator, config.mask)?;
        let fwd = forward_batch(params, &input, Mode::Train, retain)?;
        if let Some(stats) = &fwd.stats {
            params.update_running_stats(stats);
        }
        let mut cells = Vec::with_capacity(b_size);
        let mut rewards = Vec::with_capacity(b_size);
        for b in 0..b_size {
            let dist = fwd.distribution(b);
            let pair = sample_action(&dist, rng);
            let a = node_pair_action(&sols[b], None, pair.u, pair.v);
            config.operator.validate(&sols[b], a)?;
            apply_in_place(config.operator, &mut sols[b], a);
            let f_next = insts[b].objective(&sols[b])?;
            let r = reward(config.reward_variant, f_next, f_curr[b], f_init[b], f_best[b], sense);
            if !r.is_finite() {
                return Err(Error::Numeric(format!("non-finite reward at step {steps}")));
            }
            total[b] += r;
            if sense.better(f_next, f_best[b]) {
                f_best[b] = f_next;
            }
            f_curr[b] = f_next;
            cells.push(pair.cell(n));
            rewards.push(r);
        }
        window.push(WindowStep { input, retained: retain.then_some(fwd), cells, rewards });

        let stalled = stall.observe(mean_score(&f_curr));
        let capped = config.max_steps_per_epoch.is_some_and(|m| steps >= m);
        if window.len() == config.episode_len || stalled || capped {
            update(params, optimizer, config, &mut window)?;
            updates += 1;
        }
        if stalled || capped {
            break;
        }
    }
    Ok(EpochReport {
        epoch,
        mean_return: total.iter().sum::<f64>() / b_size as f64,
        mean_best_objective: f_best.iter().sum::<f64>() / b_size as f64,
        steps,
        updates,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Policy-gradient step on a window: loss
/// `(1 / (B * T)) * sum_{b,t} R_{b,t} * -log p(a_{b,t} | s_{b,t})`.
fn update(
    params: &mut ModelParams<f32>,
    optimizer: &mut Optimizer,
    config: &TrainConfig,
    window: &mut Vec<WindowStep>,
) -> Result<()> {
    let t_len = window.len();
    let b_size = config.batch_size;
    let scale = 1.0 / (t_len * b_size) as f64;
    let returns: Vec<Vec<f64>> = (0..b_size)
        .map(|b| {
            let r: Vec<f64> = window.iter().map(|s| s.rewards[b]).collect();
            discounted_return(&r, config.gamma)
        })
        .collect();
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for (t, step) in window.drain(..).enumerate() {
        let fwd = match step.retained {
            Some(f) => f,
            // parameters are unchanged within a window, so this reproduces
            // the distribution the actions were sampled from
            None => forward_batch(params, &step.input, Mode::Train, true)?,
        };
        let weights: Vec<f64> = (0..b_size).map(|b| returns[b][t] * scale).collect();
        for b in 0..b_size {
            loss -= weights[b] * fwd.probs[[b, step.cells[b]]].ln();
        }
        backward(params, &fwd, &step.cells, &weights, &mut grads)?;
    }
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::Numeric(format!("non-finite loss or gradient (loss {loss})")));
    }
    clip_gradient(&mut grads, config.grad_clip_norm);
    optimizer.step(params, &grads, config.learning_rate);
    if !params.all_finite() {
        return Err(Error::Numeric("parameters became non-finite after an update".into()));
    }
    Ok(())
}

/// Stateful driver: parameters, optimizer and RNG of one training run.
pub struct Trainer {
    pub config: TrainConfig,
    pub params: ModelParams<f32>,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(config.hyper(), config.seed);
        Self::with_params(config, params)
    }

    /// Continues from given parameters (e.g. a checkpoint).
    pub fn with_params(config: TrainConfig, params: ModelParams<f32>) -> Result<Self> {
        config.validate()?;
        if params.hyper.problem != config.problem {
            return Err(Error::arg("parameters were built for a different problem"));
        }
        let optimizer = Optimizer::new(config.optimizer, &params);
        let rng = ChaCha8Rng::seed_from_u64(config.seed.derive(u64::MAX).0);
        Ok(Trainer { config, params, optimizer, rng, epoch: 0 })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        self.epoch += 1;
        train_epoch(&mut self.params, &mut self.optimizer, &self.config, self.epoch, &mut self.rng)
    }
}

/// Output options for [`train`].
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    pub log: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Save the checkpoint every this many epochs (and at the end).
    pub checkpoint_every: Option<usize>,
    /// Write wall-clock seconds to the log; zeros otherwise so logs are
    /// reproducible byte for byte.
    pub record_time: bool,
}

pub const TRAIN_LOG_HEADER: &str = "epoch,mean_return,mean_best_objective,seconds";

fn append_row(path: &Path, r: &EpochReport, record_time: bool) -> Result<()> {
    let mut f = fs::OpenOptions::new().append(true).open(path)?;
    let secs = if record_time { r.seconds } else { 0.0 };
    writeln!(f, "{},{},{},{}", r.epoch, r.mean_return, r.mean_best_objective, secs)?;
    Ok(())
}

/// Full run of `n_epochs` epochs.
pub fn train(config: &TrainConfig, out: &TrainOutputs) -> Result<(ModelParams<f32>, Vec<EpochReport>)> {
    let mut trainer = Trainer::new(config.clone())?;
    if let Some(log) = &out.log {
        fs::write(log, format!("{TRAIN_LOG_HEADER}\n"))?;
    }
    let mut reports = Vec::with_capacity(config.n_epochs);
    let mut last_good = trainer.params.clone();
    for _ in 0..config.n_epochs {
        match trainer.run_epoch() {
            Ok(r) => {
                if let Some(log) = &out.log {
                    append_row(log, &r, out.record_time)?;
                }
                reports.push(r);
                last_good.clone_from(&trainer.params);
                if let (Some(path), Some(every)) = (&out.checkpoint, out.checkpoint_every) {
                    if every > 0 && trainer.epoch() % every == 0 {
                        save_checkpoint(path, &trainer.params)?;
                    }
                }
            }
            Err(e) => {
                if let Some(path) = &out.checkpoint {
                    save_checkpoint(path, &last_good)?;
                }
                return Err(e);
            }
        }
    }
    if let Some(path) = &out.checkpoint {
        save_checkpoint(path, &trainer.params)?;
    }
    Ok((trainer.params, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_variants() {
        let s = Sense::Maximize;
        assert_eq!(reward(RewardVariant::Rf3, 5.0, 5.0, 1.0, 9.0, s), 0.0);
        assert_eq!(reward(RewardVariant::Rf2, 4.0, 5.0, 1.0, 9.0, s), 0.0);
        assert_eq!(reward(RewardVariant::Rf2, 10.5, 5.0, 1.0, 9.0, s), 1.5);
        // worsening move that still beats the initial solution
        let r = reward(RewardVariant::Rf1, 4.0, 6.0, 2.0, 6.0, s);
        assert!(r > 0.0);
        // minimization flips the orientation
        assert_eq!(reward(RewardVariant::Rf3, 3.0, 5.0, 5.0, 5.0, Sense::Minimize), 2.0);
    }

    #[test]
    fn discounted_returns_by_hand() {
        assert_eq!(discounted_return(&[1.0, 2.0, 3.0], 0.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(discounted_return(&[1.0; 4], 1.0), vec![4.0, 3.0, 2.0, 1.0]);
        let r = discounted_return(&[1.0, 2.0, 3.0], 0.1);
        for (a, b) in r.iter().zip([1.23, 2.3, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping() {
        let p = ModelParams::<f64>::init(Hyper::new(4, 1, ProblemKind::Prp), RngSeed(1));
        let mut g = p.clone();
        let before = g.trainable_norm();
        assert!(before > 1.0);
        clip_gradient(&mut g, 1.0);
        assert!((g.trainable_norm() - 1.0).abs() < 1e-9);
        let mut h = p.clone();
        clip_gradient(&mut h, before + 1.0);
        assert_eq!(h, p);
    }

    #[test]
    fn stall_counter_script() {
        let mut s = StallCounter::new(0.0, 3);
        assert!(!s.observe(1.0));
        assert!(!s.observe(0.5));
        assert!(!s.observe(1.0));
        assert!(!s.observe(2.0));
        assert_eq!(s.count(), 0);
        assert!(!s.observe(2.0));
        assert!(!s.observe(1.9));
        assert!(s.observe(1.0));
        assert_eq!(s.best(), 2.0);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.gamma = 1.5;
        assert!(c.validate().is_err());
        let c = TrainConfig { problem: ProblemKind::Gpp, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { instance_size: 9, operator: OperatorKind::GppSwap, ..c };
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&TrainConfig::default()).unwrap();
        assert!(json.contains("\"reward_variant\":\"RF3\""));
        let back: TrainConfig = serde_json::from_str(r#"{"n_epochs": 3, "operator": "swap"}"#).unwrap();
        assert_eq!((back.n_epochs, back.operator, back.batch_size), (3, OperatorKind::Swap, 64));
    }
}
