//! Effective channels, SINR, rate, power, energy efficiency and the residuals
//! of every constraint of the allocation problem.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::{ChannelSet, FimShape};
use crate::harness::config::ScenarioConfig;
use crate::ris::{Sector, SectorMatrices, StarBdRisParams};
use crate::scalar::Scalar;

/// Full set of decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationDecision<T> {
    pub users: usize,
    pub subcarriers: usize,
    /// Beamformers `w_u^n`, indexed `u * N + n`.
    pub beams: Vec<Array1<Complex<T>>>,
    /// Subcarrier assignment `α_{u,n}`, `U × N`. Real-valued so that
    /// non-binary violators can be represented.
    pub assignment: Array2<T>,
    pub fim_shape: FimShape<T>,
    pub ris: StarBdRisParams<T>,
}

impl<T: Scalar> AllocationDecision<T> {
    /// No users scheduled, zero beams, flat surface, balanced RIS.
    pub fn null(users: usize, subcarriers: usize, m: usize, k_ris: usize, shape: FimShape<T>) -> Self {
        Self {
            users,
            subcarriers,
            beams: vec![Array1::zeros(m); users * subcarriers],
            assignment: Array2::zeros((users, subcarriers)),
            fim_shape: shape,
            ris: StarBdRisParams::balanced(k_ris),
        }
    }

    pub fn beam(&self, u: usize, n: usize) -> &Array1<Complex<T>> {
        &self.beams[u * self.subcarriers + n]
    }

    /// `Σ_u α_{u,n} ‖w_u^n‖²` for subcarrier `n`.
    pub fn subcarrier_power(&self, n: usize) -> T {
        (0..self.users).map(|u| self.assignment[(u, n)] * self.beam(u, n).iter().map(|c| c.norm_sqr()).sum::<T>()).sum()
    }

    pub fn radiated_power(&self) -> T {
        (0..self.subcarriers).map(|n| self.subcarrier_power(n)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel<T> {
    pub p_static_bs: T,
    pub p_static_ris: T,
    pub p_per_element_ris: T,
    pub amp_efficiency: T,
    pub u_max: usize,
    pub p_max: T,
}

impl<T: Scalar> PowerModel<T> {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            p_static_bs: T::of(cfg.power.p_static_bs_w),
            p_static_ris: T::of(cfg.power.p_static_ris_w),
            p_per_element_ris: T::of(cfg.power.p_per_element_ris_w),
            amp_efficiency: T::of(cfg.power.amp_efficiency),
            u_max: cfg.system.u_max,
            p_max: T::of(cfg.system.p_max_w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown<T> {
    pub total: T,
    /// Static circuit power `P_T1`.
    pub circuit: T,
    /// Amplifier input power `P_T2`.
    pub transmit: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics<T> {
    pub sinr: Array2<T>,
    /// Spectral efficiency `R_T` in bits/s/Hz.
    pub sum_rate: T,
    pub power: PowerBreakdown<T>,
    /// `R_T / P_T` in bits/s/Hz per watt.
    pub ee: T,
}

impl<T: Scalar> LinkMetrics<T> {
    pub fn zeros(users: usize, subcarriers: usize) -> Self {
        Self {
            sinr: Array2::zeros((users, subcarriers)),
            sum_rate: T::zero(),
            power: PowerBreakdown { total: T::zero(), circuit: T::zero(), transmit: T::zero() },
            ee: T::zero(),
        }
    }
}

/// `(h_u^{n,RU})^H Φ^s (H_n^{BR})^H + (g_u^n)^H` as a length-`M` row.
pub fn effective_channel<T: Scalar>(
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
    sector_of_user: &[Sector],
    u: usize,
    n: usize,
) -> Result<Array1<Complex<T>>> {
    if u >= channels.users || n >= channels.subcarriers || sector_of_user.len() != channels.users {
        return Err(Error::arg(format!(
            "user {u} / subcarrier {n} / sector map of {} users does not fit a {}×{} channel set",
            sector_of_user.len(),
            channels.users,
            channels.subcarriers
        )));
    }
    let k = channels.k_ris();
    if sectors.k_ris() != k {
        return Err(Error::arg(format!("sector matrices are {}×{0} but the RIS has {k} elements", sectors.k_ris())));
    }
    let phi = sectors.sector(sector_of_user[u]);
    let h_ru = channels.h_ru(u, n);
    let h_br = &channels.h_br[n];
    let zero = Complex::new(T::zero(), T::zero());
    // row = h^H Φ
    let mut row = vec![zero; k];
    for (l, r) in row.iter_mut().enumerate() {
        for kk in 0..k {
            let p = phi[(kk, l)];
            if p != zero {
                *r = *r + h_ru[kk].conj() * p;
            }
        }
    }
    let g = channels.g(u, n);
    Ok(Array1::from_shape_fn(g.len(), |m| {
        let mut acc = g[m].conj();
        for (l, r) in row.iter().enumerate() {
            acc = acc + *r * h_br[(m, l)].conj();
        }
        acc
    }))
}

/// `|e_u^n · w_i^n|²` for every `(u, n, i)`: the building block of every SINR.
#[derive(Debug, Clone)]
pub struct LinkGains<T> {
    /// Shape `U × N × U`, indexed `(receiver, subcarrier, beam owner)`.
    pub gain: Array3<T>,
    pub assignment: Array2<T>,
    pub noise_power: Array2<T>,
}

impl<T: Scalar> LinkGains<T> {
    pub fn compute(
        decision: &AllocationDecision<T>,
        channels: &ChannelSet<T>,
        sectors: &SectorMatrices<T>,
    ) -> Result<Self> {
        check_decision(decision, channels)?;
        let (users, subs) = (channels.users, channels.subcarriers);
        let mut gain = Array3::zeros((users, subs, users));
        for u in 0..users {
            for n in 0..subs {
                let e = effective_channel(channels, sectors, &channels.sector_of_user, u, n)?;
                for i in 0..users {
                    let w = decision.beam(i, n);
                    let s =
                        e.iter().zip(w.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b);
                    gain[(u, n, i)] = s.norm_sqr();
                }
            }
        }
        Ok(Self { gain, assignment: decision.assignment.clone(), noise_power: channels.noise_power.clone() })
    }

    pub fn users(&self) -> usize {
        self.gain.dim().0
    }

    pub fn subcarriers(&self) -> usize {
        self.gain.dim().1
    }

    /// SINR at user `u`'s receiver on subcarrier `n` treating beam `i` as the
    /// desired signal and every other scheduled beam as interference.
    pub fn cross_sinr(&self, u: usize, i: usize, n: usize) -> T {
        let num = self.assignment[(i, n)] * self.gain[(u, n, i)];
        let interference: T =
            (0..self.users()).filter(|&j| j != i).map(|j| self.assignment[(j, n)] * self.gain[(u, n, j)]).sum();
        num / (interference + self.noise_power[(u, n)])
    }

    pub fn sinr(&self) -> Array2<T> {
        Array2::from_shape_fn((self.users(), self.subcarriers()), |(u, n)| self.cross_sinr(u, u, n))
    }

    /// `Σ_{u≠i} Σ_n (Γ_u^n(i) − Γ_u^n(u))`.
    pub fn sic_margin_sum(&self) -> T {
        let mut total = T::zero();
        for n in 0..self.subcarriers() {
            for u in 0..self.users() {
                let own = self.cross_sinr(u, u, n);
                for i in (0..self.users()).filter(|&i| i != u) {
                    total = total + self.cross_sinr(u, i, n) - own;
                }
            }
        }
        total
    }

    /// Smallest single ordered-pair SIC margin (infinite with one user).
    pub fn sic_worst_pair(&self) -> T {
        let mut worst = T::infinity();
        for n in 0..self.subcarriers() {
            for u in 0..self.users() {
                let own = self.cross_sinr(u, u, n);
                for i in (0..self.users()).filter(|&i| i != u) {
                    worst = worst.min(self.cross_sinr(u, i, n) - own);
                }
            }
        }
        worst
    }
}

fn check_decision<T: Scalar>(decision: &AllocationDecision<T>, channels: &ChannelSet<T>) -> Result<()> {
    let (u, n, m) = (channels.users, channels.subcarriers, channels.fim_elements());
    if decision.users != u
        || decision.subcarriers != n
        || decision.assignment.dim() != (u, n)
        || decision.beams.len() != u * n
        || decision.beams.iter().any(|w| w.len() != m)
    {
        return Err(Error::arg(format!("decision does not match a {u}-user, {n}-subcarrier, {m}-element system")));
    }
    Ok(())
}

/// SINR for every user and subcarrier.
pub fn sinr<T: Scalar>(
    decision: &AllocationDecision<T>,
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
) -> Result<Array2<T>> {
    Ok(LinkGains::compute(decision, channels, sectors)?.sinr())
}

pub fn cross_sinr<T: Scalar>(
    u: usize,
    i: usize,
    n: usize,
    decision: &AllocationDecision<T>,
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
) -> Result<T> {
    if u >= channels.users || i >= channels.users || n >= channels.subcarriers {
        return Err(Error::arg(format!("index ({u}, {i}, {n}) out of range")));
    }
    Ok(LinkGains::compute(decision, channels, sectors)?.cross_sinr(u, i, n))
}

/// `R_T = Σ_u Σ_n log2(1 + Γ_u^n)`.
pub fn sum_rate<T: Scalar>(sinr: &Array2<T>) -> T {
    sinr.iter().map(|&g| g.ln_1p()).sum::<T>() / T::LN_2()
}

pub fn total_power<T: Scalar>(decision: &AllocationDecision<T>, pm: &PowerModel<T>) -> PowerBreakdown<T> {
    let k = T::of_usize(decision.ris.len());
    let circuit = pm.p_static_bs + pm.p_static_ris + k * pm.p_per_element_ris;
    let transmit = decision.radiated_power() / pm.amp_efficiency;
    PowerBreakdown { total: circuit + transmit, circuit, transmit }
}

pub fn energy_efficiency<T: Scalar>(rate: T, power: T) -> Result<T> {
    if !(power > T::zero()) {
        return Err(Error::InvalidState(format!("total power must be positive, got {power}")));
    }
    Ok(rate / power)
}

pub fn evaluate<T: Scalar>(
    decision: &AllocationDecision<T>,
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
    pm: &PowerModel<T>,
) -> Result<(LinkMetrics<T>, LinkGains<T>)> {
    let gains = LinkGains::compute(decision, channels, sectors)?;
    let sinr = gains.sinr();
    let rate = sum_rate(&sinr);
    let power = total_power(decision, pm);
    let ee = energy_efficiency(rate, power.total)?;
    Ok((LinkMetrics { sinr, sum_rate: rate, power, ee }, gains))
}

/// Residual per constraint; non-negative means satisfied, except the binary
/// and RIS entries, which are equalities and read zero when satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport<T> {
    /// SIC margin in the summed form used by the reward.
    pub sic_margin_sum: T,
    /// SIC margin of the worst ordered pair.
    pub sic_worst_pair: T,
    /// `min_n (U_max − Σ_u α_{u,n})`.
    pub user_count: T,
    /// `min_n (P_max − Σ_u α_{u,n}‖w_u^n‖²)`.
    pub power: T,
    /// Smallest distance of any height to its bounds.
    pub shape: T,
    /// `−max_{u,n} min(|α|, |1 − α|)`.
    pub binary: T,
    /// `−max_k |Σ_s |Φ^{s,k}|² − 1|`.
    pub ris: T,
}

impl<T: Scalar> ConstraintReport<T> {
    pub fn user_count_ok(&self) -> bool {
        self.user_count >= T::zero()
    }

    pub fn power_ok(&self, tol: T) -> bool {
        self.power >= -tol
    }

    pub fn shape_ok(&self) -> bool {
        self.shape >= T::zero()
    }

    pub fn binary_ok(&self) -> bool {
        self.binary == T::zero()
    }

    pub fn ris_ok(&self, tol: T) -> bool {
        self.ris >= -tol
    }

    /// The constraints the action decoder enforces: user count, power, shape,
    /// binary assignment and RIS energy split.
    pub fn decoded_constraints_ok(&self, tol: T) -> bool {
        self.user_count_ok() && self.power_ok(tol) && self.shape_ok() && self.binary_ok() && self.ris_ok(tol)
    }
}

pub fn constraint_report<T: Scalar>(
    decision: &AllocationDecision<T>,
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
    pm: &PowerModel<T>,
) -> Result<ConstraintReport<T>> {
    let gains = LinkGains::compute(decision, channels, sectors)?;
    Ok(constraint_report_from(decision, &gains, sectors, pm))
}

pub(crate) fn constraint_report_from<T: Scalar>(
    decision: &AllocationDecision<T>,
    gains: &LinkGains<T>,
    sectors: &SectorMatrices<T>,
    pm: &PowerModel<T>,
) -> ConstraintReport<T> {
    let subs = decision.subcarriers;
    let u_max = T::of_usize(pm.u_max);
    let user_count = (0..subs).map(|n| u_max - decision.assignment.column(n).sum()).fold(T::infinity(), T::min);
    let power = (0..subs).map(|n| pm.p_max - decision.subcarrier_power(n)).fold(T::infinity(), T::min);
    let binary = -decision.assignment.iter().map(|&a| a.abs().min((T::one() - a).abs())).fold(T::zero(), T::max);
    let ris = -sectors.element_deviation().into_iter().map(T::abs).fold(T::zero(), T::max);
    ConstraintReport {
        sic_margin_sum: gains.sic_margin_sum(),
        sic_worst_pair: gains.sic_worst_pair(),
        user_count,
        power,
        shape: decision.fim_shape.bound_residual(),
        binary,
        ris,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ris::build_sector_matrices;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    /// One RIS element, one antenna, `users` users on one subcarrier.
    fn scalar_system(users: usize, g: Vec<Complex<f64>>, noise: f64) -> ChannelSet<f64> {
        ChannelSet {
            users,
            subcarriers: 1,
            g: g.into_iter().map(|v| Array1::from(vec![v])).collect(),
            h_br: vec![Array2::from_elem((1, 1), c(0.0, 0.0))],
            h_ru: vec![Array1::from(vec![c(0.0, 0.0)]); users],
            noise_power: Array2::from_elem((users, 1), noise),
            sector_of_user: vec![Sector::Reflection; users],
        }
    }

    fn decision(users: usize, beams: Vec<Complex<f64>>, alpha: Vec<f64>) -> AllocationDecision<f64> {
        AllocationDecision {
            users,
            subcarriers: 1,
            beams: beams.into_iter().map(|b| Array1::from(vec![b])).collect(),
            assignment: Array2::from_shape_vec((users, 1), alpha).unwrap(),
            fim_shape: FimShape::flat(1, 0.0, 0.06),
            ris: StarBdRisParams::balanced(1),
        }
    }

    fn table_power() -> PowerModel<f64> {
        PowerModel::from_config(&ScenarioConfig::default())
    }

    #[test]
    fn ris_off_gives_direct_link() {
        let ch = scalar_system(1, vec![c(0.3, -0.7)], 1.0);
        let e = effective_channel(&ch, &SectorMatrices::zeros(1), &ch.sector_of_user, 0, 0).unwrap();
        assert_eq!(e[0], c(0.3, 0.7));
    }

    #[test]
    fn cascaded_scalar_link() {
        let mut ch = scalar_system(1, vec![c(0.0, 0.0)], 1.0);
        ch.h_ru[0] = Array1::from(vec![c(0.5, 0.2)]);
        ch.h_br[0] = Array2::from_elem((1, 1), c(-1.0, 0.4));
        let id = SectorMatrices {
            phi_t: Array2::from_elem((1, 1), c(1.0, 0.0)),
            phi_r: Array2::from_elem((1, 1), c(1.0, 0.0)),
        };
        let e = effective_channel(&ch, &id, &ch.sector_of_user, 0, 0).unwrap();
        let want = c(0.5, 0.2).conj() * c(-1.0, 0.4).conj();
        assert!((e[0] - want).norm() < 1e-15);
        assert!(effective_channel(&ch, &id, &ch.sector_of_user, 1, 0).is_err());
    }

    #[test]
    fn single_user_sinr_is_snr() {
        let ch = scalar_system(1, vec![c(3f64.sqrt(), 0.0)], 1.0);
        let d = decision(1, vec![c(1.0, 0.0)], vec![1.0]);
        let s = sinr(&d, &ch, &SectorMatrices::zeros(1)).unwrap();
        assert!((s[(0, 0)] - 3.0).abs() < 1e-12);
        let d = decision(1, vec![c(1.0, 0.0)], vec![0.0]);
        assert_eq!(sinr(&d, &ch, &SectorMatrices::zeros(1)).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn symmetric_pair_has_equal_sinr() {
        let ch = scalar_system(2, vec![c(1.0, 0.0), c(1.0, 0.0)], 0.5);
        let d = decision(2, vec![c(1.0, 0.0), c(1.0, 0.0)], vec![1.0, 1.0]);
        let s = sinr(&d, &ch, &SectorMatrices::zeros(1)).unwrap();
        assert!((s[(0, 0)] - s[(1, 0)]).abs() < 1e-15);
        assert!((s[(0, 0)] - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn cross_sinr_consistency() {
        let ch = scalar_system(2, vec![c(1.0, 0.5), c(0.2, 1.0)], 0.1);
        let d = decision(2, vec![c(1.0, 0.0), c(0.0, 1.0)], vec![1.0, 0.0]);
        let sectors = SectorMatrices::zeros(1);
        let s = sinr(&d, &ch, &sectors).unwrap();
        assert_eq!(cross_sinr(0, 0, 0, &d, &ch, &sectors).unwrap(), s[(0, 0)]);
        assert_eq!(cross_sinr(0, 1, 0, &d, &ch, &sectors).unwrap(), 0.0);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(sum_rate(&Array2::<f64>::zeros((2, 2))), 0.0);
        assert!((sum_rate(&Array2::from_elem((1, 1), 1.0f64)) - 1.0).abs() < 1e-15);
        assert!((sum_rate(&Array2::from_elem((1, 2), 3.0f64)) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn power_examples() {
        let pm = table_power();
        let mut d = decision(1, vec![c(0.0, 0.0)], vec![1.0]);
        d.ris = StarBdRisParams::balanced(16);
        let p = total_power(&d, &pm);
        assert!((p.total - 1.10528).abs() < 1e-12);
        assert_eq!(p.total, p.circuit);

        let pm = PowerModel { amp_efficiency: 0.5, ..pm };
        let d = decision(2, vec![c(0.5f64.sqrt(), 0.0), c(5.0, 0.0)], vec![1.0, 0.0]);
        let p = total_power(&d, &pm);
        assert!((p.transmit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ee_examples() {
        assert_eq!(energy_efficiency(0.0, 1.2).unwrap(), 0.0);
        assert_eq!(energy_efficiency(2.0, 1.0).unwrap(), 2.0);
        assert!(matches!(energy_efficiency(1.0, 0.0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn user_count_violation_is_minus_one() {
        let ch = scalar_system(3, vec![c(1.0, 0.0); 3], 1.0);
        let pm = PowerModel { u_max: 2, ..table_power() };
        let d = decision(3, vec![c(0.1, 0.0); 3], vec![1.0, 1.0, 1.0]);
        let sectors = build_sector_matrices(&StarBdRisParams::balanced(1)).unwrap();
        let r = constraint_report(&d, &ch, &sectors, &pm).unwrap();
        assert_eq!(r.user_count, -1.0);
        assert!(!r.user_count_ok());
        assert!(r.ris.abs() <= 1e-12);
        assert!(r.binary_ok());
        let d = decision(3, vec![c(0.1, 0.0); 3], vec![0.5, 1.0, 0.0]);
        let r = constraint_report(&d, &ch, &sectors, &pm).unwrap();
        assert_eq!(r.binary, -0.5);
    }
}
