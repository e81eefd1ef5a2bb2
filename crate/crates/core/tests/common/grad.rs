//! Finite-difference checks of every analytic gradient on reduced networks.

use fimstar_core::agent::{actor_objective, critic_loss, meta_critic_loss, td_target, MetaProblem};
use fimstar_core::nn::{squash_backward, squash_forward, squash_tangent, standard_normal_matrix, Mlp};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::max_fd_error;

const S: usize = 3;
const D: usize = 2;
const B: usize = 4;

fn with_params(net: &Mlp<f64>, p: &[f64]) -> Mlp<f64> {
    let mut n = net.clone();
    n.set_flat_params(p).unwrap();
    n
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `(check name, max relative error)` for every gradient in the learner.
pub fn gradient_suite(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // plain network
    let net = Mlp::<f64>::new(&[S, 5, 4, 3], &mut rng).unwrap();
    let x = matrix(&mut rng, B, S);
    let up = matrix(&mut rng, B, 3);
    let theta = net.flat_params();
    let cache = net.forward_cached(x.view()).unwrap();
    let (g, gx) = net.backward(&cache, up.view()).unwrap();
    out.push((
        "mlp parameter gradient",
        max_fd_error(|p| dot(&with_params(&net, p).forward(x.view()).unwrap(), &up), &theta, &g.flat()),
    ));
    let xf: Vec<f64> = x.iter().copied().collect();
    out.push((
        "mlp input gradient",
        max_fd_error(
            |v| dot(&net.forward(Array2::from_shape_vec((B, S), v.to_vec()).unwrap().view()).unwrap(), &up),
            &xf,
            &gx.iter().copied().collect::<Vec<_>>(),
        ),
    ));
    let mut dir = net.gradients_zeros();
    for l in dir.layers.iter_mut() {
        l.weight.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        l.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    let (_, d_out) = net.jvp_params(x.view(), &dir).unwrap();
    let dflat = dir.flat();
    out.push((
        "mlp parameter jvp",
        max_fd_error(
            |t| {
                let p: Vec<f64> = theta.iter().zip(&dflat).map(|(a, b)| a + t[0] * b).collect();
                dot(&with_params(&net, &p).forward(x.view()).unwrap(), &up)
            },
            &[0.0],
            &[dot(&d_out, &up)],
        ),
    ));
    let dx = matrix(&mut rng, B, S);
    let (_, dx_out) = net.jvp_input(x.view(), dx.view()).unwrap();
    out.push((
        "mlp input jvp",
        max_fd_error(|t| dot(&net.forward((&x + &(&dx * t[0])).view()).unwrap(), &up), &[0.0], &[dot(&dx_out, &up)]),
    ));
    let tg = net.input_tangent_param_grad(x.view(), dx.view(), up.view()).unwrap();
    out.push((
        "mlp input-tangent parameter gradient",
        max_fd_error(|p| dot(&with_params(&net, p).jvp_input(x.view(), dx.view()).unwrap().1, &up), &theta, &tg.flat()),
    ));

    // squashed Gaussian
    let head = Array2::from_shape_fn((B, 2 * D), |(_, j)| {
        if j < D {
            rng.random_range(-1.0..1.0)
        } else {
            rng.random_range(-1.5..0.5)
        }
    });
    let noise: Array2<f64> = standard_normal_matrix(&mut rng, B, D);
    let d_action = matrix(&mut rng, B, D);
    let d_lp = Array1::from_shape_fn(B, |_| rng.random_range(-1.0..1.0));
    let objective = |h: &[f64]| {
        let o = squash_forward(Array2::from_shape_vec((B, 2 * D), h.to_vec()).unwrap().view(), noise.view()).unwrap();
        dot(&o.action, &d_action) + o.log_prob.iter().zip(&d_lp).map(|(a, b)| a * b).sum::<f64>()
    };
    let sq = squash_forward(head.view(), noise.view()).unwrap();
    let g_head = squash_backward(&sq, d_action.view(), d_lp.view());
    let hflat: Vec<f64> = head.iter().copied().collect();
    out.push((
        "squashed gaussian log-prob and action",
        max_fd_error(objective, &hflat, &g_head.iter().copied().collect::<Vec<_>>()),
    ));
    let d_head = matrix(&mut rng, B, 2 * D);
    let tangent = squash_tangent(&sq, d_head.view());
    out.push((
        "squashed action tangent",
        max_fd_error(
            |t| {
                let h = &head + &(&d_head * t[0]);
                dot(&squash_forward(h.view(), noise.view()).unwrap().action, &d_action)
            },
            &[0.0],
            &[dot(&tangent, &d_action)],
        ),
    ));

    // learner losses
    let actor = Mlp::<f64>::new(&[S, 6, 5, 2 * D], &mut rng).unwrap();
    let critic = Mlp::<f64>::new(&[S + D, 6, 5, 1], &mut rng).unwrap();
    let target_actor = Mlp::<f64>::new(&[S, 6, 5, 2 * D], &mut rng).unwrap();
    let target_critic = Mlp::<f64>::new(&[S + D, 6, 5, 1], &mut rng).unwrap();
    let meta = Mlp::<f64>::new(&[S + D, 5, 4, 1], &mut rng).unwrap();
    let states = matrix(&mut rng, B, S);
    let next_states = matrix(&mut rng, B, S);
    let actions = matrix(&mut rng, B, D).mapv(|v: f64| v.tanh());
    let rewards = Array1::from_shape_fn(B, |_| rng.random_range(-1.0..1.0));
    let next_noise: Array2<f64> = standard_normal_matrix(&mut rng, B, D);
    let lambda = 0.2;
    let y =
        td_target(&target_actor, &target_critic, rewards.view(), next_states.view(), next_noise.view(), 0.99, lambda)
            .unwrap();
    let (_, gc) = critic_loss(&critic, states.view(), actions.view(), y.view()).unwrap();
    out.push((
        "critic td loss",
        max_fd_error(
            |p| critic_loss(&with_params(&critic, p), states.view(), actions.view(), y.view()).unwrap().0,
            &critic.flat_params(),
            &gc.flat(),
        ),
    ));
    let noise: Array2<f64> = standard_normal_matrix(&mut rng, B, D);
    let (_, ga) = actor_objective(&actor, &critic, states.view(), noise.view(), lambda).unwrap();
    out.push((
        "actor objective",
        max_fd_error(
            |p| actor_objective(&with_params(&actor, p), &critic, states.view(), noise.view(), lambda).unwrap().0,
            &actor.flat_params(),
            &ga.flat(),
        ),
    ));
    let (_, gm) = meta_critic_loss(&actor, &meta, states.view(), noise.view()).unwrap();
    out.push((
        "meta-critic loss",
        max_fd_error(
            |p| meta_critic_loss(&with_params(&actor, p), &meta, states.view(), noise.view()).unwrap().0,
            &actor.flat_params(),
            &gm.flat(),
        ),
    ));

    let val_states = matrix(&mut rng, B, S);
    let val_noise: Array2<f64> = standard_normal_matrix(&mut rng, B, D);
    let problem = MetaProblem {
        actor: &actor,
        critic: &critic,
        trn_states: states.view(),
        trn_noise: noise.view(),
        val_states: val_states.view(),
        val_noise: val_noise.view(),
        lr_actor: 0.1,
        lambda,
    };
    let step = problem.inner_step(&meta).unwrap();
    let g_eta = problem.meta_gradient(&meta, &step.val_grad).unwrap();
    out.push((
        "meta chain",
        max_fd_error(|p| problem.meta_loss(&with_params(&meta, p)).unwrap(), &meta.flat_params(), &g_eta.flat()),
    ));
    out
}
