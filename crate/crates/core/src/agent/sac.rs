use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::losses::{actor_objective, critic_loss, meta_critic_loss, meta_gradient, td_target};
use super::normalizer::RunningNormalizer;
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::harness::config::AgentConfig;
use crate::nn::{deterministic_action, sanitize_action, squash_forward, standard_normal_matrix, Gradients, Mlp};
use crate::scalar::Scalar;

const OBSERVATION_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacHyper<T> {
    pub lr_actor: T,
    pub lr_critic: T,
    pub lr_meta: T,
    pub gamma: T,
    pub tau: T,
    pub entropy_weight: T,
    pub batch_size: usize,
    pub reward_scale: T,
}

impl<T: Scalar> SacHyper<T> {
    pub fn from_config(cfg: &AgentConfig) -> Self {
        Self {
            lr_actor: T::of(cfg.lr_actor),
            lr_critic: T::of(cfg.lr_critic),
            lr_meta: T::of(cfg.lr_meta),
            gamma: T::of(cfg.gamma),
            tau: T::of(cfg.tau),
            entropy_weight: T::of(cfg.entropy_weight),
            batch_size: cfg.batch_size,
            reward_scale: T::of(cfg.reward_scale),
        }
    }
}

/// Record of one actor step, consumed by the meta-critic update that follows it.
#[derive(Debug, Clone)]
pub struct ActorStep<T> {
    generation: u64,
    pub theta_pre: Mlp<T>,
    pub theta_old: Mlp<T>,
    pub theta_new: Mlp<T>,
    pub trn_states: Array2<T>,
    pub trn_noise: Array2<T>,
    pub actor_loss: T,
    pub aux_loss: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats<T> {
    pub critic_loss: T,
    pub actor_loss: T,
    pub meta_loss: Option<T>,
}

/// Soft actor-critic with an optional learned meta-critic loss on the actor.
#[derive(Debug, Clone)]
pub struct MetaSacAgent<T> {
    pub hyper: SacHyper<T>,
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
    pub meta_critic: Option<Mlp<T>>,
    pub normalizer: Option<RunningNormalizer>,
    state_dim: usize,
    action_dim: usize,
    generation: u64,
    rejected_updates: u64,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Network shapes `(actor, critic, meta-critic)` for the given problem size.
pub fn network_widths(state_dim: usize, action_dim: usize, cfg: &AgentConfig) -> [Vec<usize>; 3] {
    [
        widths(state_dim, &cfg.actor_hidden, 2 * action_dim),
        widths(state_dim + action_dim, &cfg.critic_hidden, 1),
        widths(state_dim + action_dim, &cfg.meta_hidden, 1),
    ]
}

impl<T: Scalar> MetaSacAgent<T> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let [actor_w, critic_w, meta_w] = network_widths(state_dim, action_dim, cfg);
        let actor = Mlp::new(&actor_w, rng)?;
        let critic = Mlp::new(&critic_w, rng)?;
        let meta_critic = if cfg.meta_critic {
            let mut m = Mlp::new(&meta_w, rng)?;
            m.zero_output_layer();
            Some(m)
        } else {
            None
        };
        Ok(Self {
            hyper: SacHyper::from_config(cfg),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            meta_critic,
            normalizer: cfg.normalize_observations.then(|| RunningNormalizer::new(state_dim, OBSERVATION_CLIP)),
            state_dim,
            action_dim,
            generation: 0,
            rejected_updates: 0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn has_meta_critic(&self) -> bool {
        self.meta_critic.is_some()
    }

    /// Updates discarded because they produced non-finite parameters.
    pub fn rejected_updates(&self) -> u64 {
        self.rejected_updates
    }

    pub fn observe_state(&mut self, state: ArrayView1<T>) {
        if let Some(n) = self.normalizer.as_mut() {
            n.update(state);
        }
    }

    pub fn normalize(&self, states: ArrayView2<T>) -> Array2<T> {
        match &self.normalizer {
            Some(n) => n.normalize(states),
            None => states.to_owned(),
        }
    }

    /// Samples `tanh(μ + σξ)`, or returns `tanh(μ)` when `deterministic`.
    pub fn act<R: Rng + ?Sized>(&self, state: ArrayView1<T>, rng: &mut R, deterministic: bool) -> Result<Array1<T>> {
        let s = self.normalize(state.insert_axis(Axis(0)));
        let mut a = if deterministic {
            deterministic_action(&self.actor, s.view())?
        } else {
            let head = self.actor.forward(s.view())?;
            let noise = standard_normal_matrix(rng, 1, self.action_dim);
            squash_forward(head.view(), noise.view())?.action
        };
        sanitize_action(&mut a);
        Ok(a.row(0).to_owned())
    }

    fn apply_guarded(net: &mut Mlp<T>, grads: &Gradients<T>, lr: T, rejected: &mut u64) -> Result<bool> {
        if !grads.is_finite() {
            *rejected += 1;
            return Ok(false);
        }
        let mut candidate = net.clone();
        candidate.apply_gradient(grads, lr)?;
        if candidate.is_finite() {
            *net = candidate;
            Ok(true)
        } else {
            *rejected += 1;
            Ok(false)
        }
    }

    /// One SGD step on the soft-Q loss. States must already be normalized.
    pub fn critic_update(
        &mut self,
        states: ArrayView2<T>,
        actions: ArrayView2<T>,
        rewards: ArrayView1<T>,
        next_states: ArrayView2<T>,
        next_noise: ArrayView2<T>,
    ) -> Result<T> {
        let h = self.hyper;
        let scaled = rewards.mapv(|r| r * h.reward_scale);
        let targets = td_target(
            &self.target_actor,
            &self.target_critic,
            scaled.view(),
            next_states,
            next_noise,
            h.gamma,
            h.entropy_weight,
        )?;
        let (loss, grads) = critic_loss(&self.critic, states, actions, targets.view())?;
        Self::apply_guarded(&mut self.critic, &grads, h.lr_critic, &mut self.rejected_updates)?;
        Ok(loss)
    }

    /// `θ_old = θ − lr ∇J(D_trn; θ)`, then, with a meta-critic,
    /// `θ_new = θ_old − lr ∇L_mc(D_trn; θ)`. The live actor becomes `θ_new`.
    pub fn actor_update(&mut self, states: ArrayView2<T>, noise: ArrayView2<T>) -> Result<ActorStep<T>> {
        let h = self.hyper;
        let theta_pre = self.actor.clone();
        let (actor_loss, g_trn) = actor_objective(&theta_pre, &self.critic, states, noise, h.entropy_weight)?;
        let mut theta_old = theta_pre.clone();
        if !Self::apply_guarded(&mut theta_old, &g_trn, h.lr_actor, &mut self.rejected_updates)? {
            theta_old = theta_pre.clone();
        }
        let mut theta_new = theta_old.clone();
        let mut aux_loss = None;
        if let Some(meta) = &self.meta_critic {
            let (aux, g_mc) = meta_critic_loss(&theta_pre, meta, states, noise)?;
            Self::apply_guarded(&mut theta_new, &g_mc, h.lr_actor, &mut self.rejected_updates)?;
            aux_loss = Some(aux);
        }
        self.actor = theta_new.clone();
        self.generation += 1;
        Ok(ActorStep {
            generation: self.generation,
            theta_pre,
            theta_old,
            theta_new,
            trn_states: states.to_owned(),
            trn_noise: noise.to_owned(),
            actor_loss,
            aux_loss,
        })
    }

    /// Descends `L_meta = J(D_val; θ_new) − J(D_val; θ_old)` in the
    /// meta-critic parameters. `step` must come from the latest actor update.
    pub fn meta_update(
        &mut self,
        step: &ActorStep<T>,
        val_states: ArrayView2<T>,
        val_noise: ArrayView2<T>,
    ) -> Result<T> {
        if step.generation != self.generation {
            return Err(Error::InvalidState(format!(
                "meta update given actor step {} but the actor is at step {}",
                step.generation, self.generation
            )));
        }
        let h = self.hyper;
        let Some(meta) = self.meta_critic.as_mut() else {
            return Err(Error::InvalidState("agent has no meta-critic".into()));
        };
        let (j_new, g_val) = actor_objective(&step.theta_new, &self.critic, val_states, val_noise, h.entropy_weight)?;
        let (j_old, _) = actor_objective(&step.theta_old, &self.critic, val_states, val_noise, h.entropy_weight)?;
        let grads =
            meta_gradient(&step.theta_pre, meta, step.trn_states.view(), step.trn_noise.view(), &g_val, h.lr_actor)?;
        Self::apply_guarded(meta, &grads, h.lr_meta, &mut self.rejected_updates)?;
        Ok(j_new - j_old)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.target_actor.soft_update(&self.actor, self.hyper.tau)?;
        self.target_critic.soft_update(&self.critic, self.hyper.tau)
    }

    /// One gradient iteration: critic, actor, meta-critic (validation batch
    /// and noise drawn from `meta_rng`), then target tracking.
    pub fn gradient_iteration<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer<T>,
        rng: &mut R1,
        meta_rng: &mut R2,
    ) -> Result<UpdateStats<T>> {
        let b = self.hyper.batch_size;
        let trn = buffer.sample(rng, b)?;
        let states = self.normalize(trn.states.view());
        let next_states = self.normalize(trn.next_states.view());
        let next_noise = standard_normal_matrix(rng, b, self.action_dim);
        let critic_loss = self.critic_update(
            states.view(),
            trn.actions.view(),
            trn.rewards.view(),
            next_states.view(),
            next_noise.view(),
        )?;
        let noise = standard_normal_matrix(rng, b, self.action_dim);
        let step = self.actor_update(states.view(), noise.view())?;
        let meta_loss = if self.has_meta_critic() {
            let val = buffer.sample(meta_rng, b)?;
            let val_states = self.normalize(val.states.view());
            let val_noise = standard_normal_matrix(meta_rng, b, self.action_dim);
            Some(self.meta_update(&step, val_states.view(), val_noise.view())?)
        } else {
            None
        };
        self.soft_update_targets()?;
        Ok(UpdateStats { critic_loss, actor_loss: step.actor_loss, meta_loss })
    }

    /// Named networks in checkpoint order.
    pub fn networks(&self) -> Vec<(&str, &Mlp<T>)> {
        let mut nets = vec![
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("target_actor", &self.target_actor),
            ("target_critic", &self.target_critic),
        ];
        if let Some(m) = &self.meta_critic {
            nets.push(("meta_critic", m));
        }
        nets
    }
}
