//! The allocation problem as an episodic MDP.
//!
//! Action layout (all entries in `[-1, 1]`):
//!
//! | block        | length   | meaning                                              |
//! |--------------|----------|------------------------------------------------------|
//! | heights      | `M`      | FIM heights, affine onto `[y_min, y_max]`            |
//! | beams        | `2·M·U·N`| `w_u^n[m]` at `((u·N + n)·M + m)·2`, real then imag  |
//! | logits       | `U·N`    | assignment score of user `u` on subcarrier `n`       |
//! | beta         | `K`      | transmission power share                             |
//! | phase_t      | `K`      | transmission phase                                   |
//! | phase_r      | `K`      | reflection phase                                     |
//!
//! State layout: real/imag pairs of every `g_u^n`, `h_u^{n,RU}`, `H_n^{BR}`
//! (row-major), then `Γ_u^n` and `R_T`.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{sample_task, ChannelSet, FimShape, Task};
use crate::harness::config::ScenarioConfig;
use crate::metrics::{constraint_report_from, evaluate, AllocationDecision, LinkMetrics, PowerModel};
use crate::ris::{project_raw, sectors_for_mode, RisMode, SectorMatrices};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub users: usize,
    pub subcarriers: usize,
    pub fim_elements: usize,
    pub k_ris: usize,
}

impl StateLayout {
    pub fn g_offset(&self, u: usize, n: usize) -> usize {
        2 * (u * self.subcarriers + n) * self.fim_elements
    }

    pub fn h_ru_offset(&self, u: usize, n: usize) -> usize {
        2 * self.users * self.subcarriers * self.fim_elements + 2 * (u * self.subcarriers + n) * self.k_ris
    }

    pub fn h_br_offset(&self, n: usize) -> usize {
        2 * self.users * self.subcarriers * (self.fim_elements + self.k_ris) + 2 * n * self.fim_elements * self.k_ris
    }

    pub fn sinr_offset(&self) -> usize {
        2 * (self.users * self.subcarriers * (self.fim_elements + self.k_ris)
            + self.subcarriers * self.fim_elements * self.k_ris)
    }

    pub fn rate_offset(&self) -> usize {
        self.sinr_offset() + self.users * self.subcarriers
    }

    /// `2(UNM + UNK + NMK) + UN + 1`.
    pub fn len(&self) -> usize {
        self.rate_offset() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVec<T> {
    pub values: Array1<T>,
    pub layout: StateLayout,
}

impl<T: Scalar> StateVec<T> {
    fn complex_block(&self, offset: usize, len: usize) -> Vec<Complex<T>> {
        (0..len).map(|i| Complex::new(self.values[offset + 2 * i], self.values[offset + 2 * i + 1])).collect()
    }

    pub fn g(&self, u: usize, n: usize) -> Array1<Complex<T>> {
        Array1::from(self.complex_block(self.layout.g_offset(u, n), self.layout.fim_elements))
    }

    pub fn h_ru(&self, u: usize, n: usize) -> Array1<Complex<T>> {
        Array1::from(self.complex_block(self.layout.h_ru_offset(u, n), self.layout.k_ris))
    }

    pub fn h_br(&self, n: usize) -> Array2<Complex<T>> {
        let (m, k) = (self.layout.fim_elements, self.layout.k_ris);
        Array2::from_shape_vec((m, k), self.complex_block(self.layout.h_br_offset(n), m * k)).expect("block size")
    }

    pub fn sinr(&self, u: usize, n: usize) -> T {
        self.values[self.layout.sinr_offset() + u * self.layout.subcarriers + n]
    }

    pub fn sum_rate(&self) -> T {
        self.values[self.layout.rate_offset()]
    }
}

pub fn encode_state<T: Scalar>(channels: &ChannelSet<T>, metrics: &LinkMetrics<T>) -> Result<StateVec<T>> {
    let layout = StateLayout {
        users: channels.users,
        subcarriers: channels.subcarriers,
        fim_elements: channels.fim_elements(),
        k_ris: channels.k_ris(),
    };
    if metrics.sinr.dim() != (layout.users, layout.subcarriers) {
        return Err(Error::arg("metrics do not match the channel set"));
    }
    let mut values = Vec::with_capacity(layout.len());
    let mut push = |c: &Complex<T>| {
        values.push(c.re);
        values.push(c.im);
    };
    channels.g.iter().flat_map(|v| v.iter()).for_each(&mut push);
    channels.h_ru.iter().flat_map(|v| v.iter()).for_each(&mut push);
    channels.h_br.iter().flat_map(|m| m.iter()).for_each(&mut push);
    values.extend(metrics.sinr.iter().copied());
    values.push(metrics.sum_rate);
    debug_assert_eq!(values.len(), layout.len());
    Ok(StateVec { values: Array1::from(values), layout })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub users: usize,
    pub subcarriers: usize,
    pub fim_elements: usize,
    pub k_ris: usize,
}

impl ActionLayout {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            users: cfg.users(),
            subcarriers: cfg.system.subcarriers,
            fim_elements: cfg.fim_elements(),
            k_ris: cfg.system.k_ris,
        }
    }

    pub fn heights(&self) -> usize {
        0
    }

    pub fn beam(&self, u: usize, n: usize, m: usize) -> usize {
        self.fim_elements + 2 * ((u * self.subcarriers + n) * self.fim_elements + m)
    }

    pub fn logit(&self, u: usize, n: usize) -> usize {
        self.fim_elements * (1 + 2 * self.users * self.subcarriers) + u * self.subcarriers + n
    }

    pub fn beta(&self) -> usize {
        self.logit(0, 0) + self.users * self.subcarriers
    }

    pub fn phase_t(&self) -> usize {
        self.beta() + self.k_ris
    }

    pub fn phase_r(&self) -> usize {
        self.phase_t() + self.k_ris
    }

    /// `M + 2MUN + UN + 3K`.
    pub fn dim(&self) -> usize {
        self.phase_r() + self.k_ris
    }

    pub fn state_layout(&self) -> StateLayout {
        StateLayout {
            users: self.users,
            subcarriers: self.subcarriers,
            fim_elements: self.fim_elements,
            k_ris: self.k_ris,
        }
    }
}

/// Maps a squashed action onto a decision that satisfies the user-count, power,
/// shape, binary and RIS constraints by construction.
pub fn decode_action<T: Scalar>(
    action: ArrayView1<T>,
    layout: &ActionLayout,
    y_min: T,
    y_max: T,
    pm: &PowerModel<T>,
) -> Result<AllocationDecision<T>> {
    if action.len() != layout.dim() {
        return Err(Error::arg(format!("action has {} entries, layout expects {}", action.len(), layout.dim())));
    }
    let clip = |v: T| if v.is_finite() { v.max(-T::one()).min(T::one()) } else { T::zero() };
    let half = T::of(0.5);
    let (users, subs, m) = (layout.users, layout.subcarriers, layout.fim_elements);

    let y = (0..m)
        .map(|i| {
            (y_min + (clip(action[layout.heights() + i]) + T::one()) * half * (y_max - y_min)).max(y_min).min(y_max)
        })
        .collect();
    let fim_shape = FimShape { y, y_min, y_max };

    let mut assignment = Array2::zeros((users, subs));
    let mut beams = vec![Array1::zeros(m); users * subs];
    for n in 0..subs {
        let mut order: Vec<usize> = (0..users).collect();
        // stable sort keeps the lowest index first among equal logits
        order.sort_by(|&a, &b| {
            clip(action[layout.logit(b, n)])
                .partial_cmp(&clip(action[layout.logit(a, n)]))
                .expect("clipped logits are finite")
        });
        let mut scheduled: Vec<usize> =
            order.iter().copied().filter(|&u| clip(action[layout.logit(u, n)]) > T::zero()).take(pm.u_max).collect();
        if scheduled.is_empty() {
            scheduled.push(order[0]);
        }
        let mut raw_power = T::zero();
        for &u in &scheduled {
            assignment[(u, n)] = T::one();
            let w = Array1::from_shape_fn(m, |i| {
                Complex::new(clip(action[layout.beam(u, n, i)]), clip(action[layout.beam(u, n, i) + 1]))
            });
            raw_power += w.iter().map(|c| c.norm_sqr()).sum::<T>();
            beams[u * subs + n] = w;
        }
        if raw_power > pm.p_max {
            let scale = (pm.p_max / raw_power).sqrt();
            for &u in &scheduled {
                beams[u * subs + n].mapv_inplace(|c| c * scale);
            }
        }
    }

    let k = layout.k_ris;
    let slice = |start: usize| -> Vec<T> { (start..start + k).map(|i| clip(action[i])).collect() };
    let ris = project_raw(&slice(layout.beta()), &slice(layout.phase_t()), &slice(layout.phase_r()));
    Ok(AllocationDecision { users, subcarriers: subs, beams, assignment, fim_shape, ris })
}

/// `ν_1 … ν_5`, non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights<T>(pub [T; 5]);

impl<T: Scalar> RewardWeights<T> {
    pub fn new(weights: [T; 5]) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= T::zero() && w <= T::one())) {
            return Err(Error::arg("reward weights must lie in [0, 1]"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::arg(format!("reward weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(cfg.reward.weights.map(T::of))
    }
}

/// Individual terms of the shaped reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms<T> {
    pub ee: T,
    pub sic_margin: T,
    pub user_slack: T,
    pub power_slack: T,
    pub ris_deviation: T,
    /// Weighted sum before the feasibility branch.
    pub shaped: T,
    /// Whether the shape and binary-assignment constraints hold.
    pub feasible: bool,
    pub reward: T,
}

pub fn reward<T: Scalar>(
    decision: &AllocationDecision<T>,
    channels: &ChannelSet<T>,
    sectors: &SectorMatrices<T>,
    pm: &PowerModel<T>,
    weights: &RewardWeights<T>,
) -> Result<RewardTerms<T>> {
    let (metrics, gains) = evaluate(decision, channels, sectors, pm)?;
    Ok(reward_from(decision, &metrics, &gains, sectors, pm, weights))
}

fn reward_from<T: Scalar>(
    decision: &AllocationDecision<T>,
    metrics: &LinkMetrics<T>,
    gains: &crate::metrics::LinkGains<T>,
    sectors: &SectorMatrices<T>,
    pm: &PowerModel<T>,
    weights: &RewardWeights<T>,
) -> RewardTerms<T> {
    let nu = weights.0;
    let report = constraint_report_from(decision, gains, sectors, pm);
    let u_max = T::of_usize(pm.u_max);
    let user_slack: T = (0..decision.subcarriers).map(|n| u_max - decision.assignment.column(n).sum()).sum();
    let power_slack = pm.p_max - decision.radiated_power();
    let ris_deviation = sectors.element_deviation().into_iter().sum::<T>().abs();
    let shaped = nu[0] * metrics.ee + nu[1] * report.sic_margin_sum + nu[2] * user_slack + nu[3] * power_slack
        - nu[4] * ris_deviation;
    let feasible = report.shape_ok() && report.binary_ok();
    RewardTerms {
        ee: metrics.ee,
        sic_margin: report.sic_margin_sum,
        user_slack,
        power_slack,
        ris_deviation,
        shaped,
        feasible,
        reward: if feasible { shaped } else { -shaped.abs() },
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub state: StateVec<T>,
    pub reward: T,
    pub done: bool,
    pub metrics: LinkMetrics<T>,
    pub terms: RewardTerms<T>,
    pub decision: AllocationDecision<T>,
}

/// Episodic environment over quasi-static channels: one task per episode.
#[derive(Debug, Clone)]
pub struct FimStarEnv<T> {
    scenario: ScenarioConfig,
    mode: RisMode,
    power: PowerModel<T>,
    weights: RewardWeights<T>,
    layout: ActionLayout,
    t_max: usize,
    task: Option<Task<T>>,
    steps: usize,
}

impl<T: Scalar> FimStarEnv<T> {
    pub fn new(scenario: &ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            mode: scenario.system.ris_mode,
            power: PowerModel::from_config(scenario),
            weights: RewardWeights::from_config(scenario)?,
            layout: ActionLayout::from_config(scenario),
            t_max: scenario.t_max,
            scenario: scenario.clone(),
            task: None,
            steps: 0,
        })
    }

    pub fn with_mode(mut self, mode: RisMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> RisMode {
        self.mode
    }

    pub fn action_layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn state_dim(&self) -> usize {
        self.layout.state_layout().len()
    }

    pub fn action_dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn power_model(&self) -> &PowerModel<T> {
        &self.power
    }

    pub fn weights(&self) -> &RewardWeights<T> {
        &self.weights
    }

    pub fn task(&self) -> Option<&Task<T>> {
        self.task.as_ref()
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Draws a new task and observes it under the null decision.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(ChannelSet<T>, StateVec<T>)> {
        let task: Task<T> = sample_task(rng, &self.scenario)?;
        self.reset_with_task(task)
    }

    pub fn reset_with_task(&mut self, task: Task<T>) -> Result<(ChannelSet<T>, StateVec<T>)> {
        let shape = task.flat_shape();
        let channels = task.channels(&shape)?;
        let null = AllocationDecision::null(task.users, task.subcarriers, task.fim.len(), task.k_ris(), shape);
        let sectors = sectors_for_mode(self.mode, &null.ris)?;
        let (metrics, _) = evaluate(&null, &channels, &sectors, &self.power)?;
        let state = encode_state(&channels, &metrics)?;
        self.task = Some(task);
        self.steps = 0;
        Ok((channels, state))
    }

    pub fn decode(&self, action: ArrayView1<T>) -> Result<AllocationDecision<T>> {
        let task = self.task.as_ref().ok_or_else(|| Error::InvalidState("step before reset".into()))?;
        decode_action(action, &self.layout, task.y_min, task.y_max, &self.power)
    }

    /// Evaluates `decision` on the current task without advancing time.
    pub fn evaluate_decision(
        &self,
        decision: &AllocationDecision<T>,
    ) -> Result<(ChannelSet<T>, LinkMetrics<T>, RewardTerms<T>)> {
        let task = self.task.as_ref().ok_or_else(|| Error::InvalidState("evaluate before reset".into()))?;
        let channels = task.channels(&decision.fim_shape)?;
        let sectors = sectors_for_mode(self.mode, &decision.ris)?;
        let (metrics, gains) = evaluate(decision, &channels, &sectors, &self.power)?;
        let terms = reward_from(decision, &metrics, &gains, &sectors, &self.power, &self.weights);
        Ok((channels, metrics, terms))
    }

    pub fn step(&mut self, action: ArrayView1<T>) -> Result<StepOutcome<T>> {
        let decision = self.decode(action)?;
        let (channels, metrics, terms) = self.evaluate_decision(&decision)?;
        let state = encode_state(&channels, &metrics)?;
        self.steps += 1;
        Ok(StepOutcome { state, reward: terms.reward, done: self.steps >= self.t_max, metrics, terms, decision })
    }
}
