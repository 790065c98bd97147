//! Clipped policy optimization: rollouts, discounted returns, one-step
//! advantages, the clipped surrogate and value regression, updated with
//! Adam.

mod task;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use task::{greedy_rollout, BanditPolicy, BanditTask, EnvTask, Task};

use crate::error::{Error, Result};
use crate::msha::{MshaPolicy, NetInput, PolicyOutput};
use crate::nn::{clip_grad_norm, Adam, Graph, ParamStore, Tensor};
use crate::rng::stream;

/// A network with a policy head and a value head over one input type.
pub trait ActorCritic {
    type Input: Clone;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn forward(&self, g: &mut Graph, store: &ParamStore, x: &Self::Input) -> Result<PolicyOutput>;
}

impl ActorCritic for MshaPolicy {
    type Input = NetInput;
    fn params(&self) -> &ParamStore {
        &self.store
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
    fn forward(&self, g: &mut Graph, store: &ParamStore, x: &NetInput) -> Result<PolicyOutput> {
        self.forward_with(g, store, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Clip range `ε`.
    pub clip: f64,
    /// Discount in the one-step advantage (`η`).
    pub eta: f64,
    /// Discount of the returns (`ζ`).
    pub zeta: f64,
    /// Episodes `K`.
    pub episodes: usize,
    /// Samples collected before each update.
    pub batch_size: usize,
    /// Samples per gradient step; `None` uses the whole batch.
    pub minibatch: Option<usize>,
    pub epochs: usize,
    pub normalize_advantages: bool,
    /// Weight of the value loss in the combined objective.
    pub value_coef: f64,
    /// Joint gradient-norm limit; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            clip: 0.2,
            eta: 0.99,
            zeta: 0.99,
            episodes: 800,
            batch_size: 400,
            minibatch: None,
            epochs: 4,
            normalize_advantages: true,
            value_coef: 0.5,
            max_grad_norm: Some(0.5),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) || !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return bad("eta and zeta must lie in (0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.minibatch == Some(0) {
            return bad("batch size, minibatch and epochs must be positive");
        }
        Ok(())
    }
}

/// One recorded transition.
#[derive(Debug, Clone)]
pub struct Sample<I> {
    pub input: I,
    pub action: usize,
    /// Log-probability of `action` under the behavior policy.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// Value of the successor observation; zero after a terminal step.
    pub next_value: f64,
    pub done: bool,
    /// Discounted return `R_cd`.
    pub ret: f64,
    pub advantage: f64,
}

/// `R_cd(t) = r(t) + ζ·R_cd(t + 1)`, zero beyond the end.
pub fn compute_returns(rewards: &[f64], zeta: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + zeta * acc;
        out[t] = acc;
    }
    out
}

/// `Â = r + η·V(o') − V(o)`.
pub fn compute_advantage(reward: f64, v_next: f64, v_now: f64, eta: f64) -> f64 {
    reward + eta * v_next - v_now
}

/// `min(ρ·Â, clip(ρ, 1 − ε, 1 + ε)·Â)`.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

fn sample_action(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.len() - 1
}

/// Policy and value outputs for one input.
pub fn evaluate<P: ActorCritic>(policy: &P, x: &P::Input) -> Result<(Vec<f64>, f64)> {
    let mut g = Graph::new();
    let out = policy.forward(&mut g, policy.params(), x)?;
    let probs = g.value(out.log_probs).data.iter().map(|l| l.exp()).collect();
    Ok((probs, g.value(out.value).item()))
}

/// Runs one episode sampling from the policy. Returns the samples with
/// returns and advantages filled in, and the total reward.
pub fn collect_episode<P: ActorCritic, T: Task<Input = P::Input>>(
    policy: &P,
    task: &mut T,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Sample<P::Input>>> {
    let mut x = task.reset()?;
    let mut samples: Vec<Sample<P::Input>> = Vec::new();
    loop {
        let (probs, value) = evaluate(policy, &x)?;
        if let Some(prev) = samples.last_mut() {
            prev.next_value = value;
        }
        let action = sample_action(&probs, rng);
        let (next, reward, done) = task.step(action)?;
        samples.push(Sample {
            input: x,
            action,
            log_prob: probs[action].ln(),
            reward,
            value,
            next_value: 0.0,
            done,
            ret: 0.0,
            advantage: 0.0,
        });
        if done {
            break;
        }
        x = next;
    }
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward).collect();
    for (s, r) in samples.iter_mut().zip(compute_returns(&rewards, cfg.zeta)) {
        s.ret = r;
        s.advantage = compute_advantage(s.reward, s.next_value, s.value, cfg.eta);
    }
    Ok(samples)
}

/// Mean clipped surrogate `L_pf` and mean squared value error `L_vf` of a
/// batch under `store`, using each sample's stored advantage.
pub fn ppo_loss<P: ActorCritic>(policy: &P, store: &ParamStore, batch: &[Sample<P::Input>], eps: f64) -> Result<(f64, f64)> {
    let mut pf = 0.0;
    let mut vf = 0.0;
    for s in batch {
        let mut g = Graph::new();
        let out = policy.forward(&mut g, store, &s.input)?;
        let lp = g.value(out.log_probs).data[s.action];
        let ratio = (lp - s.log_prob).exp();
        if !ratio.is_finite() {
            return Err(Error::Numeric("probability ratio".into()));
        }
        pf += clipped_objective(ratio, s.advantage, eps);
        vf += (g.value(out.value).item() - s.ret).powi(2);
    }
    let n = batch.len() as f64;
    Ok((pf / n, vf / n))
}

/// Per-sample share of `−L_pf + c·L_vf` for a batch of `n` samples.
pub(crate) fn sample_loss<P: ActorCritic>(
    g: &mut Graph,
    policy: &P,
    store: &ParamStore,
    s: &Sample<P::Input>,
    cfg: &TrainConfig,
    n: usize,
) -> Result<crate::nn::NodeId> {
    let n = n as f64;
    let out = policy.forward(g, store, &s.input)?;
    let lp = g.pick(out.log_probs, &[s.action])?;
    let lp = g.add_scalar(lp, -s.log_prob);
    let ratio = g.exp(lp);
    if !g.value(ratio).is_finite() {
        return Err(Error::Numeric("probability ratio".into()));
    }
    let unclipped = g.scale(ratio, s.advantage);
    let clipped = g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    let clipped = g.scale(clipped, s.advantage);
    let surrogate = g.minimum(unclipped, clipped)?;
    let err = g.add_scalar(out.value, -s.ret);
    let sq = g.square(err);
    let policy_part = g.scale(surrogate, -1.0 / n);
    let value_part = g.scale(sq, cfg.value_coef / n);
    let loss = g.add(policy_part, value_part)?;
    Ok(g.sum(loss))
}

/// Gradient of `−L_pf + c·L_vf` over `batch`.
fn batch_gradients<P: ActorCritic>(policy: &P, batch: &[&Sample<P::Input>], cfg: &TrainConfig) -> Result<Vec<Tensor>> {
    let store = policy.params();
    let mut total: Vec<Tensor> = store.tensors().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
    for s in batch {
        let mut g = Graph::new();
        let loss = sample_loss(&mut g, policy, store, s, cfg, batch.len())?;
        for (t, gr) in total.iter_mut().zip(g.backward(loss)?.params(store)) {
            t.add_assign(&gr);
        }
    }
    Ok(total)
}

/// Statistics of one update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_objective: f64,
    pub value_loss: f64,
    pub grad_norm: f64,
}

/// Epochs of minibatch steps over `batch`.
pub fn update<P: ActorCritic>(
    policy: &mut P,
    adam: &mut Adam,
    batch: &mut [Sample<P::Input>],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    if cfg.normalize_advantages && batch.len() > 1 {
        let n = batch.len() as f64;
        let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = batch.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        for s in batch.iter_mut() {
            s.advantage = (s.advantage - mean) / std;
        }
    }
    let (policy_objective, value_loss) = ppo_loss(policy, policy.params(), batch, cfg.clip)?;
    let size = cfg.minibatch.unwrap_or(batch.len()).min(batch.len()).max(1);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut grad_norm = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(size) {
            let mb: Vec<&Sample<P::Input>> = chunk.iter().map(|&i| &batch[i]).collect();
            let mut grads = batch_gradients(policy, &mb, cfg)?;
            grad_norm = match cfg.max_grad_norm {
                Some(m) => clip_grad_norm(&mut grads, m),
                None => grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt(),
            };
            if !grad_norm.is_finite() {
                return Err(Error::Numeric("gradient".into()));
            }
            adam.step(policy.params_mut(), &grads);
        }
    }
    Ok(UpdateStats {
        policy_objective,
        value_loss,
        grad_norm,
    })
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub total_reward: f64,
    pub td: f64,
    pub pr: f64,
    pub connectivity: f64,
}

impl CurveRow {
    pub const CSV_HEADER: &'static str = "episode,total_reward,TD,PR,connectivity";

    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.episode, self.total_reward, self.td, self.pr, self.connectivity)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    pub updates: Vec<UpdateStats>,
}

/// Trains `policy` on `task` for `cfg.episodes` episodes. Updates run
/// whenever `cfg.batch_size` samples have been collected and once more on
/// any remainder at the end. `on_episode` sees every curve row with the
/// current policy.
pub fn train<P: ActorCritic, T: Task<Input = P::Input>>(
    policy: &mut P,
    task: &mut T,
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&P, &CurveRow) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut rollout_rng = stream(cfg.seed, "rollout");
    let mut batch_rng = stream(cfg.seed, "minibatch");
    let mut adam = Adam::new(policy.params(), cfg.learning_rate);
    let mut report = TrainReport::default();
    let mut buffer: Vec<Sample<P::Input>> = Vec::new();
    for episode in 0..cfg.episodes {
        let samples = collect_episode(policy, task, cfg, &mut rollout_rng).map_err(|e| match e {
            Error::Numeric(what) => Error::Numeric(format!("{what} in episode {episode}")),
            e => e,
        })?;
        let summary = task.summary();
        let row = CurveRow {
            episode,
            total_reward: samples.iter().map(|s| s.reward).sum(),
            td: summary.td,
            pr: summary.pr,
            connectivity: summary.connectivity,
        };
        buffer.extend(samples);
        let last = episode + 1 == cfg.episodes;
        if buffer.len() >= cfg.batch_size || (last && !buffer.is_empty()) {
            let stats = update(policy, &mut adam, &mut buffer, cfg, &mut batch_rng).map_err(|e| match e {
                Error::Numeric(what) => Error::Numeric(format!("{what} in episode {episode}")),
                e => e,
            })?;
            report.updates.push(stats);
            buffer.clear();
        }
        on_episode(policy, &row)?;
        report.curve.push(row);
    }
    Ok(report)
}
