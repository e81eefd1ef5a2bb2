//! Independent reference implementations shared by the integration tests.
//! Everything here is written with plain loops over `f64` and `Complex<f64>`.
#![allow(dead_code)]

use fimstar_core::geometry::{ChannelSet, FimShape, PathCluster, Task};
use fimstar_core::harness::ScenarioConfig;
use fimstar_core::metrics::AllocationDecision;
use fimstar_core::ris::{RisMode, Sector, StarBdRisParams};
use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;
use std::f64::consts::PI;

pub type C = Complex<f64>;

pub fn steering_oracle(x: &[f64], y: &[f64], z: &[f64], azimuth: f64, elevation: f64, wavelength: f64) -> Vec<C> {
    let omega = 2.0 * PI / wavelength;
    (0..x.len())
        .map(|m| {
            let arg = x[m] * elevation.sin() * azimuth.cos()
                + y[m] * elevation.sin() * azimuth.sin()
                + z[m] * elevation.cos();
            C::new((omega * arg).cos(), (omega * arg).sin())
        })
        .collect()
}

pub fn cluster_oracle(x: &[f64], y: &[f64], z: &[f64], c: &PathCluster<f64>, wavelength: f64) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); x.len()];
    for p in 0..c.gains.len() {
        let v = steering_oracle(x, y, z, c.azimuths[p], c.elevations[p], wavelength);
        for m in 0..x.len() {
            out[m] += c.gains[p] * v[m];
        }
    }
    out
}

/// Dense sector matrices built straight from the parameters.
#[allow(clippy::needless_range_loop)]
pub fn sector_oracle(mode: RisMode, p: &StarBdRisParams<f64>, sector: Sector) -> Vec<Vec<C>> {
    let k = p.beta.len();
    let mut phi = vec![vec![C::new(0.0, 0.0); k]; k];
    for i in 0..k {
        phi[i][i] = match (mode, sector) {
            (RisMode::StarBd, Sector::Transmission) => C::from_polar(p.beta[i].sqrt(), p.phase_t[i]),
            (RisMode::StarBd, Sector::Reflection) => C::from_polar((1.0 - p.beta[i]).sqrt(), p.phase_r[i]),
            (RisMode::Diagonal, Sector::Transmission) => C::new(0.0, 0.0),
            (RisMode::Diagonal, Sector::Reflection) => C::from_polar(1.0, p.phase_r[i]),
            (RisMode::None, _) => C::new(0.0, 0.0),
        };
    }
    phi
}

/// `h^H Φ H^H + g^H` by explicit triple loop.
pub fn effective_oracle(g: &[C], h_ru: &[C], h_br: &Array2<C>, phi: &[Vec<C>]) -> Vec<C> {
    let (m, k) = h_br.dim();
    (0..m)
        .map(|mm| {
            let mut acc = g[mm].conj();
            for a in 0..k {
                for b in 0..k {
                    acc += h_ru[a].conj() * phi[a][b] * h_br[(mm, b)].conj();
                }
            }
            acc
        })
        .collect()
}

pub fn sinr_oracle(ch: &ChannelSet<f64>, d: &AllocationDecision<f64>, mode: RisMode) -> Array2<f64> {
    let (users, subs) = (ch.users, ch.subcarriers);
    Array2::from_shape_fn((users, subs), |(u, n)| {
        let phi = sector_oracle(mode, &d.ris, ch.sector_of_user[u]);
        let e = effective_oracle(ch.g(u, n).as_slice().unwrap(), ch.h_ru(u, n).as_slice().unwrap(), &ch.h_br[n], &phi);
        let gain = |i: usize| -> f64 {
            let w = d.beam(i, n);
            let mut s = C::new(0.0, 0.0);
            for m in 0..e.len() {
                s += e[m] * w[m];
            }
            s.norm_sqr()
        };
        let mut interference = 0.0;
        for j in 0..users {
            if j != u {
                interference += d.assignment[(j, n)] * gain(j);
            }
        }
        d.assignment[(u, n)] * gain(u) / (interference + ch.noise_power[(u, n)])
    })
}

pub fn rate_oracle(sinr: &Array2<f64>) -> f64 {
    sinr.iter().map(|g| (1.0 + g).log2()).sum()
}

pub fn power_oracle(d: &AllocationDecision<f64>, cfg: &ScenarioConfig) -> f64 {
    let p = &cfg.power;
    let mut radiated = 0.0;
    for u in 0..d.users {
        for n in 0..d.subcarriers {
            radiated += d.assignment[(u, n)] * d.beam(u, n).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    p.p_static_bs_w + p.p_static_ris_w + d.ris.beta.len() as f64 * p.p_per_element_ris_w + radiated / p.amp_efficiency
}

/// Small random scenario: `M ≤ 3`, `K ≤ 4`, `U ≤ 3`, `N ≤ 2`.
pub fn small_config<R: Rng>(rng: &mut R) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.system.fim_mx = rng.random_range(1..=3);
    cfg.system.fim_mz = 1;
    cfg.system.k_ris = rng.random_range(1..=4);
    cfg.system.ris_mx = if cfg.system.k_ris % 2 == 0 { 2 } else { 1 };
    cfg.system.users_t = 1;
    cfg.system.users_r = rng.random_range(1..=2);
    cfg.system.subcarriers = rng.random_range(1..=2);
    cfg.system.paths = rng.random_range(1..=4);
    cfg
}

pub fn random_shape<R: Rng>(rng: &mut R, task: &Task<f64>) -> FimShape<f64> {
    let y = (0..task.fim.len()).map(|_| rng.random_range(task.y_min..=task.y_max)).collect();
    FimShape::new(y, task.y_min, task.y_max).unwrap()
}

pub fn random_decision<R: Rng>(rng: &mut R, task: &Task<f64>, shape: FimShape<f64>) -> AllocationDecision<f64> {
    let (users, subs, m, k) = (task.users, task.subcarriers, task.fim.len(), task.k_ris());
    let beams = (0..users * subs)
        .map(|_| Array1::from_shape_fn(m, |_| C::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))))
        .collect();
    let assignment = Array2::from_shape_fn((users, subs), |_| if rng.random_bool(0.6) { 1.0 } else { 0.0 });
    let ris = StarBdRisParams::new(
        (0..k).map(|_| rng.random_range(0.0..=1.0)).collect(),
        (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
    )
    .unwrap();
    AllocationDecision { users, subcarriers: subs, beams, assignment, fim_shape: shape, ris }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite differences of `f` at `x`, one coordinate at a time.
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between an analytic gradient and central differences.
pub fn max_fd_error(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let numeric = finite_difference(f, x, 1e-6);
    numeric.iter().zip(analytic).map(|(&n, &a)| relative_error(a, n)).fold(0.0, f64::max)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub mod grad;
