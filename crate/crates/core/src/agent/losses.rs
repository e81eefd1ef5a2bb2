//! Losses of the soft actor-critic and the meta-critic, each with its exact
//! gradient. States are expected already normalized.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::nn::{squash_backward, squash_forward, squash_tangent, Gradients, Mlp};
use crate::scalar::Scalar;

pub fn state_action<T: Scalar>(states: ArrayView2<T>, actions: ArrayView2<T>) -> Result<Array2<T>> {
    if states.nrows() != actions.nrows() {
        return Err(Error::arg("state and action batches differ in length"));
    }
    Ok(concatenate![Axis(1), states, actions])
}

/// Soft TD target `y = r + γ (Q'(s', a') − λ log π'(a'|s'))`, with
/// `a' = tanh(μ' + σ' ξ')` drawn from the target actor.
#[allow(clippy::too_many_arguments)]
pub fn td_target<T: Scalar>(
    target_actor: &Mlp<T>,
    target_critic: &Mlp<T>,
    rewards: ArrayView1<T>,
    next_states: ArrayView2<T>,
    next_noise: ArrayView2<T>,
    gamma: T,
    lambda: T,
) -> Result<Array1<T>> {
    let head = target_actor.forward(next_states)?;
    let out = squash_forward(head.view(), next_noise)?;
    let q_next = target_critic.forward(state_action(next_states, out.action.view())?.view())?;
    Ok(Array1::from_shape_fn(rewards.len(), |b| rewards[b] + gamma * (q_next[(b, 0)] - lambda * out.log_prob[b])))
}

/// `mean (Q(s, a) − y)²` and its gradient with respect to the critic.
pub fn critic_loss<T: Scalar>(
    critic: &Mlp<T>,
    states: ArrayView2<T>,
    actions: ArrayView2<T>,
    targets: ArrayView1<T>,
) -> Result<(T, Gradients<T>)> {
    let x = state_action(states, actions)?;
    let cache = critic.forward_cached(x.view())?;
    let q = cache.output();
    let batch = T::of_usize(targets.len());
    let residual = Array2::from_shape_fn(q.raw_dim(), |(b, _)| q[(b, 0)] - targets[b]);
    let loss = residual.iter().map(|&e| e * e).sum::<T>() / batch;
    let upstream = residual.mapv(|e| T::of(2.0) * e / batch);
    let (grads, _) = critic.backward(&cache, upstream.view())?;
    Ok((loss, grads))
}

/// Actor objective `J = mean[λ log π(a|s) − Q(s, a)]` with `a = tanh(μ + σξ)`
/// and its gradient with respect to the actor.
pub fn actor_objective<T: Scalar>(
    actor: &Mlp<T>,
    critic: &Mlp<T>,
    states: ArrayView2<T>,
    noise: ArrayView2<T>,
    lambda: T,
) -> Result<(T, Gradients<T>)> {
    let cache = actor.forward_cached(states)?;
    let out = squash_forward(cache.output().view(), noise)?;
    let x = state_action(states, out.action.view())?;
    let q_cache = critic.forward_cached(x.view())?;
    let batch = T::of_usize(states.nrows());
    let value = out.log_prob.iter().zip(q_cache.output().column(0)).map(|(&lp, &q)| lambda * lp - q).sum::<T>() / batch;
    let upstream = Array2::from_elem((states.nrows(), 1), -T::one() / batch);
    let (_, dx) = critic.backward(&q_cache, upstream.view())?;
    let d_action = dx.slice(ndarray::s![.., states.ncols()..]).to_owned();
    let d_log_prob = Array1::from_elem(states.nrows(), lambda / batch);
    let d_head = squash_backward(&out, d_action.view(), d_log_prob.view());
    let (grads, _) = actor.backward(&cache, d_head.view())?;
    Ok((value, grads))
}

/// Meta-critic auxiliary loss `mean M_η(s, a(θ))` and its gradient with
/// respect to the actor.
pub fn meta_critic_loss<T: Scalar>(
    actor: &Mlp<T>,
    meta: &Mlp<T>,
    states: ArrayView2<T>,
    noise: ArrayView2<T>,
) -> Result<(T, Gradients<T>)> {
    let cache = actor.forward_cached(states)?;
    let out = squash_forward(cache.output().view(), noise)?;
    let x = state_action(states, out.action.view())?;
    let m_cache = meta.forward_cached(x.view())?;
    let batch = T::of_usize(states.nrows());
    let value = m_cache.output().column(0).sum() / batch;
    let upstream = Array2::from_elem((states.nrows(), 1), T::one() / batch);
    let (_, dx) = meta.backward(&m_cache, upstream.view())?;
    let d_action = dx.slice(ndarray::s![.., states.ncols()..]).to_owned();
    let d_head = squash_backward(&out, d_action.view(), Array1::zeros(states.nrows()).view());
    let (grads, _) = actor.backward(&cache, d_head.view())?;
    Ok((value, grads))
}

/// Gradient with respect to the meta-critic of
/// `J(D_val; θ_new(η))`, where `θ_new = θ_old − lr ∇_θ L_mc(D_trn; θ, η)` and
/// `val_grad = ∇_θ J(D_val; θ_new)`.
///
/// By the chain rule this equals
/// `−lr/B ∂/∂η Σ_b ⟨∇_a M_η(s_b, a_b), J_θ a_b · val_grad⟩`, i.e. the
/// parameter gradient of an input-directional derivative of `M_η`.
pub fn meta_gradient<T: Scalar>(
    actor: &Mlp<T>,
    meta: &Mlp<T>,
    states: ArrayView2<T>,
    noise: ArrayView2<T>,
    val_grad: &Gradients<T>,
    lr_actor: T,
) -> Result<Gradients<T>> {
    let (head, d_head) = actor.jvp_params(states, val_grad)?;
    let out = squash_forward(head.view(), noise)?;
    let v = squash_tangent(&out, d_head.view());
    let x = state_action(states, out.action.view())?;
    let dx = state_action(Array2::zeros(states.raw_dim()).view(), v.view())?;
    let batch = T::of_usize(states.nrows());
    let upstream = Array2::from_elem((states.nrows(), 1), -lr_actor / batch);
    meta.input_tangent_param_grad(x.view(), dx.view(), upstream.view())
}

/// Inputs of one bi-level meta step, kept together so the objective can be
/// re-evaluated at perturbed meta parameters.
#[derive(Debug, Clone)]
pub struct MetaProblem<'a, T> {
    pub actor: &'a Mlp<T>,
    pub critic: &'a Mlp<T>,
    pub trn_states: ArrayView2<'a, T>,
    pub trn_noise: ArrayView2<'a, T>,
    pub val_states: ArrayView2<'a, T>,
    pub val_noise: ArrayView2<'a, T>,
    pub lr_actor: T,
    pub lambda: T,
}

/// Result of the inner step: `θ_old` (plain SAC step), `θ_new` (with the
/// meta-critic term), and the validation improvement between them.
#[derive(Debug, Clone)]
pub struct InnerStep<T> {
    pub theta_old: Mlp<T>,
    pub theta_new: Mlp<T>,
    pub actor_loss: T,
    pub aux_loss: T,
    pub meta_loss: T,
    pub val_grad: Gradients<T>,
}

impl<T: Scalar> MetaProblem<'_, T> {
    pub fn inner_step(&self, meta: &Mlp<T>) -> Result<InnerStep<T>> {
        let (actor_loss, g_trn) =
            actor_objective(self.actor, self.critic, self.trn_states, self.trn_noise, self.lambda)?;
        let (aux_loss, g_mc) = meta_critic_loss(self.actor, meta, self.trn_states, self.trn_noise)?;
        let mut theta_old = self.actor.clone();
        theta_old.apply_gradient(&g_trn, self.lr_actor)?;
        let mut theta_new = theta_old.clone();
        theta_new.apply_gradient(&g_mc, self.lr_actor)?;
        let (j_new, val_grad) = actor_objective(&theta_new, self.critic, self.val_states, self.val_noise, self.lambda)?;
        let (j_old, _) = actor_objective(&theta_old, self.critic, self.val_states, self.val_noise, self.lambda)?;
        Ok(InnerStep { theta_old, theta_new, actor_loss, aux_loss, meta_loss: j_new - j_old, val_grad })
    }

    /// `L_meta(η) = J(D_val; θ_new(η)) − J(D_val; θ_old)`.
    pub fn meta_loss(&self, meta: &Mlp<T>) -> Result<T> {
        Ok(self.inner_step(meta)?.meta_loss)
    }

    pub fn meta_gradient(&self, meta: &Mlp<T>, val_grad: &Gradients<T>) -> Result<Gradients<T>> {
        meta_gradient(self.actor, meta, self.trn_states, self.trn_noise, val_grad, self.lr_actor)
    }
}
