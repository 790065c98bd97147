use super::ActorCritic;
use crate::env::{Env, EnvState, TraceRecorder};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, Metrics};
use crate::msha::{NetInput, PolicyOutput};
use crate::nn::{Graph, ParamStore, Tensor};
use crate::trace::EpisodeTrace;

/// Summary of the last finished episode for the learning curve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeSummary {
    pub td: f64,
    pub pr: f64,
    pub connectivity: f64,
}

/// An episodic environment producing policy inputs.
pub trait Task {
    type Input: Clone;
    fn reset(&mut self) -> Result<Self::Input>;
    /// Applies an action; returns the next input, the reward and the done
    /// flag.
    fn step(&mut self, action: usize) -> Result<(Self::Input, f64, bool)>;
    fn summary(&self) -> EpisodeSummary {
        EpisodeSummary::default()
    }
}

/// The ride-sharing environment as a training task.
pub struct EnvTask<'a> {
    pub env: Env<'a>,
    state: Option<EnvState>,
    recorder: Option<TraceRecorder>,
    last: Option<EpisodeTrace>,
}

impl<'a> EnvTask<'a> {
    pub fn new(env: Env<'a>) -> Self {
        EnvTask {
            env,
            state: None,
            recorder: None,
            last: None,
        }
    }

    /// Trace of the last finished episode.
    pub fn last_trace(&self) -> Option<&EpisodeTrace> {
        self.last.as_ref()
    }

    pub fn last_metrics(&self) -> Option<Metrics> {
        self.last.as_ref().and_then(|t| compute_metrics(t, self.env.scenario).ok())
    }
}

impl Task for EnvTask<'_> {
    type Input = NetInput;

    fn reset(&mut self) -> Result<NetInput> {
        let (state, obs) = self.env.reset();
        self.recorder = Some(TraceRecorder::start(&self.env, &state));
        self.state = Some(state);
        NetInput::from_observation(&obs)
    }

    fn step(&mut self, action: usize) -> Result<(NetInput, f64, bool)> {
        let state = self.state.as_mut().ok_or_else(|| Error::State("step before reset".into()))?;
        let tr = self.env.step(state, action)?;
        let rec = self.recorder.as_mut().expect("recorder lives with the state");
        rec.record(&self.env, state, action, &tr);
        if tr.done {
            let rec = self.recorder.take().unwrap();
            self.last = Some(rec.finish(state));
        }
        Ok((NetInput::from_observation(&tr.observation)?, tr.reward, tr.done))
    }

    fn summary(&self) -> EpisodeSummary {
        match self.last_metrics() {
            Some(m) => EpisodeSummary {
                td: m.td,
                pr: m.pr,
                connectivity: m.connectivity,
            },
            None => EpisodeSummary::default(),
        }
    }
}

/// Rolls out the argmax policy and returns the trace.
pub fn greedy_rollout(policy: &crate::msha::MshaPolicy, env: &Env<'_>) -> Result<EpisodeTrace> {
    let (mut state, mut obs) = env.reset();
    let mut rec = TraceRecorder::start(env, &state);
    while !state.done {
        let (probs, _) = policy.evaluate(&obs)?;
        let action = probs
            .iter()
            .enumerate()
            .fold(0, |best, (a, &p)| if p > probs[best] { a } else { best });
        let tr = env.step(&mut state, action)?;
        rec.record(env, &state, action, &tr);
        obs = tr.observation;
    }
    Ok(rec.finish(&state))
}

/// Multi-armed bandit with fixed per-arm rewards; every episode is one pull.
#[derive(Debug, Clone)]
pub struct BanditTask {
    pub rewards: Vec<f64>,
}

impl Task for BanditTask {
    type Input = ();
    fn reset(&mut self) -> Result<()> {
        Ok(())
    }
    fn step(&mut self, action: usize) -> Result<((), f64, bool)> {
        let r = *self
            .rewards
            .get(action)
            .ok_or(Error::Action { action, max: self.rewards.len() - 1 })?;
        Ok(((), r, true))
    }
}

/// Free logits and a free value estimate.
#[derive(Debug, Clone)]
pub struct BanditPolicy {
    pub store: ParamStore,
}

impl BanditPolicy {
    pub fn new(arms: usize) -> Self {
        let mut store = ParamStore::new();
        store.add("logits", Tensor::zeros(1, arms));
        store.add("value", Tensor::zeros(1, 1));
        BanditPolicy { store }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let l = &self.store.tensors()[0].data;
        let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = l.iter().map(|v| (v - max).exp()).sum();
        l.iter().map(|v| (v - max).exp() / z).collect()
    }
}

impl ActorCritic for BanditPolicy {
    type Input = ();
    fn params(&self) -> &ParamStore {
        &self.store
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
    fn forward(&self, g: &mut Graph, store: &ParamStore, _: &()) -> Result<PolicyOutput> {
        let logits = g.param(store, 0);
        let value = g.param(store, 1);
        Ok(PolicyOutput {
            log_probs: g.log_softmax(logits),
            value,
        })
    }
}
