//! Dual-sector STAR-BD-RIS under the cell-wise single-connected architecture.
//!
//! Each sector matrix is diagonal, so the joint unitary constraint
//! `Σ_s (Φ^s)^H Φ^s = I` collapses to `|Φ^{T,k}|² + |Φ^{R,k}|² = 1` per element.
//! [`StarBdRisParams`] parameterizes element `k` by a transmitted power share
//! `β_k` and one phase per sector, which satisfies that constraint exactly.

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coverage region of a user relative to the RIS plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    Transmission,
    Reflection,
}

/// Which surface (if any) assists the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    /// Dual-sector STAR-BD-RIS.
    StarBd,
    /// Conventional reflect-only diagonal RIS.
    Diagonal,
    /// Direct link only.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarBdRisParams<T> {
    /// Transmission-sector power share per element, in `[0, 1]`.
    pub beta: Vec<T>,
    pub phase_t: Vec<T>,
    pub phase_r: Vec<T>,
}

impl<T: Scalar> StarBdRisParams<T> {
    pub fn new(beta: Vec<T>, phase_t: Vec<T>, phase_r: Vec<T>) -> Result<Self> {
        let params = Self { beta, phase_t, phase_r };
        params.validate()?;
        Ok(params)
    }

    /// Equal split with zero phases.
    pub fn balanced(k_ris: usize) -> Self {
        Self { beta: vec![T::of(0.5); k_ris], phase_t: vec![T::zero(); k_ris], phase_r: vec![T::zero(); k_ris] }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.beta.len();
        if self.phase_t.len() != k || self.phase_r.len() != k {
            return Err(Error::arg(format!(
                "RIS parameter lengths differ: beta {k}, phase_t {}, phase_r {}",
                self.phase_t.len(),
                self.phase_r.len()
            )));
        }
        for (idx, &b) in self.beta.iter().enumerate() {
            if !(b >= T::zero() && b <= T::one()) {
                return Err(Error::arg(format!("beta[{idx}] = {b} is outside [0, 1]")));
            }
        }
        if self.phase_t.iter().chain(&self.phase_r).any(|p| !p.is_finite()) {
            return Err(Error::arg("RIS phases must be finite"));
        }
        Ok(())
    }
}

/// Transmission and reflection sector matrices, both `K_RIS × K_RIS`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorMatrices<T> {
    pub phi_t: Array2<Complex<T>>,
    pub phi_r: Array2<Complex<T>>,
}

impl<T: Scalar> SectorMatrices<T> {
    /// Both sectors switched off (no surface present).
    pub fn zeros(k_ris: usize) -> Self {
        Self { phi_t: Array2::zeros((k_ris, k_ris)), phi_r: Array2::zeros((k_ris, k_ris)) }
    }

    pub fn k_ris(&self) -> usize {
        self.phi_t.nrows()
    }

    pub fn sector(&self, sector: Sector) -> &Array2<Complex<T>> {
        match sector {
            Sector::Transmission => &self.phi_t,
            Sector::Reflection => &self.phi_r,
        }
    }

    /// Whether every off-diagonal entry of both matrices is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        [&self.phi_t, &self.phi_r]
            .iter()
            .all(|m| m.indexed_iter().all(|((i, j), v)| i == j || (v.re == T::zero() && v.im == T::zero())))
    }

    /// `Σ_s |Φ^{s,k}|² − 1` for every element.
    pub fn element_deviation(&self) -> Vec<T> {
        (0..self.k_ris()).map(|k| self.phi_t[(k, k)].norm_sqr() + self.phi_r[(k, k)].norm_sqr() - T::one()).collect()
    }
}

fn diag_from<T: Scalar>(entries: impl Iterator<Item = Complex<T>>, k: usize) -> Array2<Complex<T>> {
    let mut m = Array2::zeros((k, k));
    for (i, v) in entries.enumerate() {
        m[(i, i)] = v;
    }
    m
}

/// `Φ^{T,k} = √β_k e^{jθ_k^T}`, `Φ^{R,k} = √(1−β_k) e^{jθ_k^R}`.
pub fn build_sector_matrices<T: Scalar>(params: &StarBdRisParams<T>) -> Result<SectorMatrices<T>> {
    params.validate()?;
    let k = params.len();
    let phi_t = diag_from(params.beta.iter().zip(&params.phase_t).map(|(&b, &p)| Complex::from_polar(b.sqrt(), p)), k);
    let phi_r = diag_from(
        params.beta.iter().zip(&params.phase_r).map(|(&b, &p)| Complex::from_polar((T::one() - b).sqrt(), p)),
        k,
    );
    Ok(SectorMatrices { phi_t, phi_r })
}

/// Max-norm of `Σ_s (Φ^s)^H Φ^s − I`.
///
/// Computed as a full matrix product, so it also catches non-diagonal inputs.
pub fn check_joint_unitary<T: Scalar>(m: &SectorMatrices<T>) -> T {
    let k = m.k_ris();
    let mut worst = T::zero();
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex::new(T::zero(), T::zero());
            for phi in [&m.phi_t, &m.phi_r] {
                for l in 0..k {
                    acc = acc + phi[(l, i)].conj() * phi[(l, j)];
                }
            }
            if i == j {
                acc.re -= T::one();
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// Maps squashed agent outputs in `[-1, 1]` onto valid parameters.
pub fn project_raw<T: Scalar>(raw_beta: &[T], raw_phase_t: &[T], raw_phase_r: &[T]) -> StarBdRisParams<T> {
    let half = T::of(0.5);
    let two_pi = T::TAU();
    let phase = |r: T| {
        let p = (r.max(-T::one()).min(T::one()) + T::one()) * half * two_pi;
        if p >= two_pi {
            p - two_pi
        } else {
            p
        }
    };
    StarBdRisParams {
        beta: raw_beta.iter().map(|&r| ((r + T::one()) * half).max(T::zero()).min(T::one())).collect(),
        phase_t: raw_phase_t.iter().map(|&r| phase(r)).collect(),
        phase_r: raw_phase_r.iter().map(|&r| phase(r)).collect(),
    }
}

/// Lossless reflect-only diagonal RIS: `Φ^R = diag(e^{jθ_k^R})`, `Φ^T = 0`.
pub fn d_ris_baseline<T: Scalar>(params: &StarBdRisParams<T>) -> SectorMatrices<T> {
    let k = params.len();
    SectorMatrices {
        phi_t: Array2::zeros((k, k)),
        phi_r: diag_from(params.phase_r.iter().map(|&p| Complex::from_polar(T::one(), p)), k),
    }
}

/// Sector matrices actually deployed for `mode`.
pub fn sectors_for_mode<T: Scalar>(mode: RisMode, params: &StarBdRisParams<T>) -> Result<SectorMatrices<T>> {
    match mode {
        RisMode::StarBd => build_sector_matrices(params),
        RisMode::Diagonal => Ok(d_ris_baseline(params)),
        RisMode::None => Ok(SectorMatrices::zeros(params.len())),
    }
}
