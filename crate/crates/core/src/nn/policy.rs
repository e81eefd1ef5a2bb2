//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The actor emits `2D` values per state: the mean followed by the raw log
//! standard deviation. Samples are reparameterized as `a = tanh(μ + σ ξ)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside `log(1 − tanh² + ε)`.
pub const SQUASH_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GaussianPolicyOutput<T> {
    /// Raw head output, `batch × 2D`.
    pub head: Array2<T>,
    pub mean: Array2<T>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Array2<T>,
    pub noise: Array2<T>,
    pub pre_tanh: Array2<T>,
    /// In `(−1, 1)`.
    pub action: Array2<T>,
    pub log_prob: Array1<T>,
}

impl<T: Scalar> GaussianPolicyOutput<T> {
    pub fn action_dim(&self) -> usize {
        self.mean.ncols()
    }

    fn log_std_active(&self, b: usize, i: usize) -> bool {
        let raw = self.head[(b, self.action_dim() + i)];
        raw >= T::of(LOG_STD_MIN) && raw <= T::of(LOG_STD_MAX)
    }
}

pub fn standard_normal_matrix<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let v: f64 = StandardNormal.sample(rng);
        T::of(v)
    })
}

/// Applies the squashed-Gaussian transform to head outputs with given noise.
pub fn squash_forward<T: Scalar>(head: ArrayView2<T>, noise: ArrayView2<T>) -> Result<GaussianPolicyOutput<T>> {
    if !head.ncols().is_multiple_of(2) || noise.dim() != (head.nrows(), head.ncols() / 2) {
        return Err(Error::arg(format!("policy head {:?} and noise {:?} are inconsistent", head.dim(), noise.dim())));
    }
    let d = head.ncols() / 2;
    let mean = head.slice(s![.., ..d]).to_owned();
    let log_std = head.slice(s![.., d..]).mapv(|v| v.max(T::of(LOG_STD_MIN)).min(T::of(LOG_STD_MAX)));
    let pre_tanh = &mean + &(log_std.mapv(T::exp) * noise);
    let action = pre_tanh.mapv(T::tanh);
    let eps = T::of(SQUASH_EPS);
    let half_log_2pi = T::of(0.5 * (2.0 * std::f64::consts::PI).ln());
    let half = T::of(0.5);
    let log_prob = Array1::from_shape_fn(head.nrows(), |b| {
        (0..d)
            .map(|i| {
                let xi = noise[(b, i)];
                let a = action[(b, i)];
                -half * xi * xi - log_std[(b, i)] - half_log_2pi - (T::one() - a * a + eps).ln()
            })
            .sum()
    });
    Ok(GaussianPolicyOutput {
        head: head.to_owned(),
        mean,
        log_std,
        noise: noise.to_owned(),
        pre_tanh,
        action,
        log_prob,
    })
}

/// Gradient with respect to the head outputs of
/// `Σ_b (d_action_b · a_b + d_log_prob_b · log π_b)`.
pub fn squash_backward<T: Scalar>(
    out: &GaussianPolicyOutput<T>,
    d_action: ArrayView2<T>,
    d_log_prob: ArrayView1<T>,
) -> Array2<T> {
    let (batch, d) = out.mean.dim();
    let eps = T::of(SQUASH_EPS);
    let two = T::of(2.0);
    let mut grad = Array2::zeros((batch, 2 * d));
    for b in 0..batch {
        for i in 0..d {
            let a = out.action[(b, i)];
            let sech2 = T::one() - a * a;
            let du = d_action[(b, i)] * sech2 + d_log_prob[b] * two * a * sech2 / (sech2 + eps);
            grad[(b, i)] = du;
            if out.log_std_active(b, i) {
                let sigma = out.log_std[(b, i)].exp();
                grad[(b, d + i)] = du * sigma * out.noise[(b, i)] - d_log_prob[b];
            }
        }
    }
    grad
}

/// Directional derivative of the action given a tangent of the head outputs.
pub fn squash_tangent<T: Scalar>(out: &GaussianPolicyOutput<T>, d_head: ArrayView2<T>) -> Array2<T> {
    let (batch, d) = out.mean.dim();
    Array2::from_shape_fn((batch, d), |(b, i)| {
        let a = out.action[(b, i)];
        let mut du = d_head[(b, i)];
        if out.log_std_active(b, i) {
            du += out.log_std[(b, i)].exp() * out.noise[(b, i)] * d_head[(b, d + i)];
        }
        (T::one() - a * a) * du
    })
}

/// Draws `a = tanh(μ + σξ)` for every state row.
pub fn sample_squashed_gaussian<T: Scalar, R: Rng + ?Sized>(
    policy: &Mlp<T>,
    state: ArrayView2<T>,
    rng: &mut R,
) -> Result<GaussianPolicyOutput<T>> {
    let head = policy.forward(state)?;
    let noise = standard_normal_matrix(rng, head.nrows(), head.ncols() / 2);
    squash_forward(head.view(), noise.view())
}

/// `tanh(μ)`, the noise-free action.
pub fn deterministic_action<T: Scalar>(policy: &Mlp<T>, state: ArrayView2<T>) -> Result<Array2<T>> {
    let head = policy.forward(state)?;
    let d = head.ncols() / 2;
    Ok(head.slice(s![.., ..d]).mapv(T::tanh))
}

/// Replaces non-finite entries by zero and clips into `[−1, 1]`.
pub fn sanitize_action<T: Scalar>(action: &mut Array2<T>) {
    Zip::from(action).for_each(|a| {
        *a = if a.is_finite() { a.max(-T::one()).min(T::one()) } else { T::zero() };
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mode_density() {
        let d = 3;
        let head = Array2::<f64>::zeros((1, 2 * d));
        let noise = Array2::<f64>::zeros((1, d));
        let out = squash_forward(head.view(), noise.view()).unwrap();
        assert!(out.action.iter().all(|&a| a == 0.0));
        let want = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - d as f64 * (1.0 + SQUASH_EPS).ln();
        assert!((out.log_prob[0] - want).abs() < 1e-12);
    }

    #[test]
    fn clamp_floor_is_deterministic() {
        let head = array![[0.7, -100.0]];
        let out = squash_forward(head.view(), array![[3.0]].view()).unwrap();
        assert_eq!(out.log_std[(0, 0)], LOG_STD_MIN);
        assert!((out.action[(0, 0)] - 0.7f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn gaussian_part_decreases_away_from_mean() {
        let head = array![[0.2, 0.0, -0.4, -0.5]];
        let lp = |xi: f64| {
            let out = squash_forward(head.view(), array![[xi, 0.5 * xi]].view()).unwrap();
            let jac: f64 = out.action.iter().map(|a| (1.0 - a * a + SQUASH_EPS).ln()).sum();
            out.log_prob[0] + jac
        };
        let mut prev = lp(0.0);
        for k in 1..20 {
            let cur = lp(0.25 * k as f64);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn sanitize_handles_nan() {
        let mut a = array![[f64::NAN, 2.0, -0.5, f64::NEG_INFINITY]];
        sanitize_action(&mut a);
        assert_eq!(a, array![[0.0, 1.0, -0.5, 0.0]]);
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        assert!(squash_forward(Array2::<f64>::zeros((2, 3)).view(), Array2::zeros((2, 1)).view()).is_err());
        assert!(squash_forward(Array2::<f64>::zeros((2, 4)).view(), Array2::zeros((1, 2)).view()).is_err());
    }
}
