//! Episode loop, baselines and training logs.

use std::io::Write;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::ReplayBuffer;
use super::sac::MetaSacAgent;
use crate::env::FimStarEnv;
use crate::error::Result;
use crate::scalar::Scalar;

pub const TRAINING_LOG_HEADER: [&str; 8] =
    ["episode", "reward", "ee", "rate", "power", "critic_loss", "actor_loss", "meta_loss"];

/// Independent random streams of one run. Arms that share a seed see the
/// same tasks and the same initial weights.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub tasks: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub explore: ChaCha8Rng,
    pub updates: ChaCha8Rng,
    pub meta: ChaCha8Rng,
}

impl RunStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self { tasks: stream(0), init: stream(1), explore: stream(2), updates: stream(3), meta: stream(4) }
    }
}

/// One row of the training log. Episode metrics are step averages; the reward
/// is the episode return; losses average over the episode's gradient
/// iterations and are NaN when none ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub reward: f64,
    pub ee: f64,
    pub rate: f64,
    pub power: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub meta_loss: f64,
}

#[derive(Default)]
struct EpisodeAccumulator {
    steps: usize,
    reward: f64,
    ee: f64,
    rate: f64,
    power: f64,
}

impl EpisodeAccumulator {
    fn add<T: Scalar>(&mut self, reward: T, m: &crate::metrics::LinkMetrics<T>) {
        self.steps += 1;
        self.reward += reward.as_f64();
        self.ee += m.ee.as_f64();
        self.rate += m.sum_rate.as_f64();
        self.power += m.power.total.as_f64();
    }

    fn finish(self, episode: usize, losses: [f64; 3]) -> EpisodeLog {
        let n = self.steps.max(1) as f64;
        EpisodeLog {
            episode,
            reward: self.reward,
            ee: self.ee / n,
            rate: self.rate / n,
            power: self.power / n,
            critic_loss: losses[0],
            actor_loss: losses[1],
            meta_loss: losses[2],
        }
    }
}

/// Mean of `metric` over the last `window` episodes (all of them if fewer).
pub fn final_window_mean(log: &[EpisodeLog], window: usize, metric: impl Fn(&EpisodeLog) -> f64) -> f64 {
    let tail = &log[log.len().saturating_sub(window)..];
    mean_or_nan(&tail.iter().map(metric).collect::<Vec<_>>())
}

fn mean_or_nan(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Collects one episode of transitions, then runs `g_max` gradient
/// iterations once the buffer holds a full batch.
pub fn train<T: Scalar>(
    agent: &mut MetaSacAgent<T>,
    env: &mut FimStarEnv<T>,
    buffer: &mut ReplayBuffer<T>,
    episodes: usize,
    g_max: usize,
    streams: &mut RunStreams,
) -> Result<Vec<EpisodeLog>> {
    let mut log = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let (_, mut state) = env.reset(&mut streams.tasks)?;
        agent.observe_state(state.values.view());
        let mut acc = EpisodeAccumulator::default();
        loop {
            let action = agent.act(state.values.view(), &mut streams.explore, false)?;
            let out = env.step(action.view())?;
            buffer.push(
                state.values.as_slice().expect("contiguous"),
                action.as_slice().expect("contiguous"),
                out.reward,
                out.state.values.as_slice().expect("contiguous"),
            )?;
            agent.observe_state(out.state.values.view());
            acc.add(out.reward, &out.metrics);
            state = out.state;
            if out.done {
                break;
            }
        }
        let (mut critic, mut actor, mut meta) = (Vec::new(), Vec::new(), Vec::new());
        if buffer.len() >= agent.hyper.batch_size {
            for _ in 0..g_max {
                let stats = agent.gradient_iteration(buffer, &mut streams.updates, &mut streams.meta)?;
                critic.push(stats.critic_loss.as_f64());
                actor.push(stats.actor_loss.as_f64());
                if let Some(m) = stats.meta_loss {
                    meta.push(m.as_f64());
                }
            }
        }
        log.push(acc.finish(episode, [mean_or_nan(&critic), mean_or_nan(&actor), mean_or_nan(&meta)]));
    }
    Ok(log)
}

/// Uniform actions on `[-1, 1]`, drawn from the exploration stream.
pub fn run_random_policy<T: Scalar>(
    env: &mut FimStarEnv<T>,
    episodes: usize,
    streams: &mut RunStreams,
) -> Result<Vec<EpisodeLog>> {
    let dim = env.action_dim();
    let mut log = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        env.reset(&mut streams.tasks)?;
        let mut acc = EpisodeAccumulator::default();
        loop {
            let action = Array1::from_shape_fn(dim, |_| T::of(streams.explore.random_range(-1.0..=1.0)));
            let out = env.step(action.view())?;
            acc.add(out.reward, &out.metrics);
            if out.done {
                break;
            }
        }
        log.push(acc.finish(episode, [f64::NAN; 3]));
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    pub ee: f64,
    pub rate: f64,
    pub power: f64,
}

/// Runs the actor without learning or normalizer updates.
pub fn evaluate_policy<T: Scalar, R: Rng + ?Sized>(
    agent: &MetaSacAgent<T>,
    env: &mut FimStarEnv<T>,
    episodes: usize,
    rng: &mut R,
    deterministic: bool,
) -> Result<PolicyEvaluation> {
    let (mut ee, mut rate, mut power, mut steps) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..episodes {
        let (_, mut state) = env.reset(rng)?;
        loop {
            let action = agent.act(state.values.view(), rng, deterministic)?;
            let out = env.step(action.view())?;
            ee += out.metrics.ee.as_f64();
            rate += out.metrics.sum_rate.as_f64();
            power += out.metrics.power.total.as_f64();
            steps += 1;
            state = out.state;
            if out.done {
                break;
            }
        }
    }
    let n = steps.max(1) as f64;
    Ok(PolicyEvaluation { ee: ee / n, rate: rate / n, power: power / n })
}

pub fn write_training_log<W: Write>(out: W, log: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in log {
        w.serialize(row)?;
    }
    if log.is_empty() {
        w.write_record(TRAINING_LOG_HEADER)?;
    }
    w.flush()?;
    Ok(())
}
