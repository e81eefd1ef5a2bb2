//! Scenario configuration: a TOML document with nested sections.
//!
//! Every key has a default, so an empty file yields the full reference
//! scenario. Unknown keys are rejected. Any key can be overridden through an
//! environment variable named `FIMSTAR_<SECTION>__<KEY>` (or `FIMSTAR_<KEY>`
//! for top-level keys), e.g. `FIMSTAR_AGENT__LR_ACTOR=0.01`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ris::RisMode;

pub const ENV_PREFIX: &str = "FIMSTAR_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub episodes: usize,
    pub t_max: usize,
    /// Gradient steps per episode; `0` means "same as `t_max`".
    pub g_max: usize,
    pub seeds: Vec<u64>,
    pub system: SystemConfig,
    pub power: PowerConfig,
    pub geometry: GeometryConfig,
    pub reward: RewardConfig,
    pub agent: AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub users_t: usize,
    pub users_r: usize,
    pub fim_mx: usize,
    pub fim_mz: usize,
    pub fim_dx_m: f64,
    pub fim_dz_m: f64,
    /// Morphing range `y_max − y_min` in carrier wavelengths.
    pub morph_range_wavelengths: f64,
    pub k_ris: usize,
    /// RIS elements per row; `k_ris` must be a multiple of it.
    pub ris_mx: usize,
    pub ris_spacing_m: f64,
    pub subcarriers: usize,
    pub u_max: usize,
    pub p_max_w: f64,
    pub noise_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub paths: usize,
    pub ris_mode: RisMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub p_static_bs_w: f64,
    pub p_static_ris_w: f64,
    pub p_per_element_ris_w: f64,
    pub amp_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub ris_position_m: [f64; 3],
    pub user_center_distance_m: f64,
    pub user_radius_m: f64,
    pub pathloss_ref_db: f64,
    pub exponent_direct: f64,
    pub exponent_ris: f64,
    /// Extra penetration loss on the blocked BS–user link.
    pub direct_blockage_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// `ν_1 … ν_5`: EE, SIC margins, user-count slack, power slack, RIS deviation.
    pub weights: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub meta_hidden: Vec<usize>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_meta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub entropy_weight: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Disable to get vanilla SAC.
    pub meta_critic: bool,
    /// Multiplies rewards before they enter the TD target.
    pub reward_scale: f64,
    /// Whiten observations with running statistics.
    pub normalize_observations: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            episodes: 6000,
            t_max: 20,
            g_max: 0,
            seeds: vec![1],
            system: SystemConfig::default(),
            power: PowerConfig::default(),
            geometry: GeometryConfig::default(),
            reward: RewardConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            users_t: 4,
            users_r: 4,
            fim_mx: 2,
            fim_mz: 1,
            fim_dx_m: 0.05,
            fim_dz_m: 0.05,
            morph_range_wavelengths: 0.5,
            k_ris: 16,
            ris_mx: 4,
            ris_spacing_m: 0.05,
            subcarriers: 4,
            u_max: 2,
            p_max_w: 0.5,
            noise_dbm_per_hz: -170.0,
            bandwidth_hz: 10e6,
            carrier_hz: 2.4e9,
            paths: 4,
            ris_mode: RisMode::StarBd,
        }
    }
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { p_static_bs_w: 1.0, p_static_ris_w: 0.1, p_per_element_ris_w: 0.33e-3, amp_efficiency: 0.8 }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            ris_position_m: [30.0, 0.0, 5.0],
            user_center_distance_m: 40.0,
            user_radius_m: 10.0,
            pathloss_ref_db: -30.0,
            exponent_direct: 3.5,
            exponent_ris: 2.2,
            direct_blockage_db: 0.0,
        }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { weights: [0.6, 0.1, 0.1, 0.1, 0.1] }
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            meta_hidden: vec![64, 64],
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            lr_meta: 1e-3,
            gamma: 0.99,
            tau: 0.01,
            entropy_weight: 0.2,
            batch_size: 32,
            replay_capacity: 1_000_000,
            meta_critic: true,
            reward_scale: 1.0,
            normalize_observations: true,
        }
    }
}

impl ScenarioConfig {
    /// Reduced profile that trains in well under a minute per seed on one core.
    pub fn desk() -> Self {
        let mut cfg = Self { episodes: 300, seeds: vec![1, 2, 3, 4, 5], ..Self::default() };
        cfg.system.users_t = 2;
        cfg.system.users_r = 2;
        cfg.system.subcarriers = 2;
        cfg.system.k_ris = 8;
        cfg.agent.actor_hidden = vec![64, 64];
        cfg.agent.critic_hidden = vec![64, 64];
        cfg.agent.entropy_weight = 0.002;
        cfg.agent.reward_scale = 0.1;
        // the summed SIC margin is in squared-SINR units, orders of magnitude
        // above the other terms; its weight brings it to the same scale
        cfg.reward.weights = [0.69999, 1e-5, 0.1, 0.1, 0.1];
        // without a weakened direct link the RIS barely matters at this size
        cfg.geometry.direct_blockage_db = 10.0;
        cfg
    }

    pub fn users(&self) -> usize {
        self.system.users_t + self.system.users_r
    }

    pub fn fim_elements(&self) -> usize {
        self.system.fim_mx * self.system.fim_mz
    }

    pub fn gradient_steps(&self) -> usize {
        if self.g_max == 0 {
            self.t_max
        } else {
            self.g_max
        }
    }

    pub fn carrier_wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.system.carrier_hz
    }

    /// Noise power per subcarrier in watts.
    pub fn noise_power_w(&self) -> f64 {
        let per_hz_w = 10f64.powf((self.system.noise_dbm_per_hz - 30.0) / 10.0);
        per_hz_w * self.system.bandwidth_hz / self.system.subcarriers as f64
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, std::iter::empty::<(String, String)>())
    }

    /// Parses `text`, applies `(KEY, value)` overrides named like the
    /// environment variables (prefix optional), then validates.
    pub fn from_toml_with_overrides<I, K, V>(text: &str, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key.as_ref(), value.as_ref())?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(field_of(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        }
        fn at_least_one(field: &str, v: usize) -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(field, "must be at least 1"))
            }
        }
        let s = &self.system;
        at_least_one("t_max", self.t_max)?;
        at_least_one("system.users_t", s.users_t)?;
        at_least_one("system.users_r", s.users_r)?;
        at_least_one("system.fim_mx", s.fim_mx)?;
        at_least_one("system.fim_mz", s.fim_mz)?;
        at_least_one("system.k_ris", s.k_ris)?;
        at_least_one("system.ris_mx", s.ris_mx)?;
        at_least_one("system.subcarriers", s.subcarriers)?;
        at_least_one("system.u_max", s.u_max)?;
        at_least_one("system.paths", s.paths)?;
        if !s.k_ris.is_multiple_of(s.ris_mx) {
            return Err(Error::config(
                "system.ris_mx",
                format!("k_ris = {} is not a multiple of ris_mx = {}", s.k_ris, s.ris_mx),
            ));
        }
        positive("system.fim_dx_m", s.fim_dx_m)?;
        positive("system.fim_dz_m", s.fim_dz_m)?;
        positive("system.morph_range_wavelengths", s.morph_range_wavelengths)?;
        positive("system.ris_spacing_m", s.ris_spacing_m)?;
        positive("system.p_max_w", s.p_max_w)?;
        positive("system.bandwidth_hz", s.bandwidth_hz)?;
        positive("system.carrier_hz", s.carrier_hz)?;
        if !s.noise_dbm_per_hz.is_finite() {
            return Err(Error::config("system.noise_dbm_per_hz", "must be finite"));
        }
        let p = &self.power;
        positive("power.p_static_bs_w", p.p_static_bs_w)?;
        positive("power.p_static_ris_w", p.p_static_ris_w)?;
        positive("power.p_per_element_ris_w", p.p_per_element_ris_w)?;
        if !(p.amp_efficiency > 0.0 && p.amp_efficiency < 1.0) {
            return Err(Error::config("power.amp_efficiency", "must lie in (0, 1)"));
        }
        let g = &self.geometry;
        positive("geometry.user_center_distance_m", g.user_center_distance_m)?;
        positive("geometry.user_radius_m", g.user_radius_m)?;
        positive("geometry.exponent_direct", g.exponent_direct)?;
        positive("geometry.exponent_ris", g.exponent_ris)?;
        if g.direct_blockage_db < 0.0 {
            return Err(Error::config("geometry.direct_blockage_db", "must be non-negative"));
        }
        if g.ris_position_m.iter().any(|v| !v.is_finite()) || !g.pathloss_ref_db.is_finite() {
            return Err(Error::config("geometry", "positions and reference gain must be finite"));
        }
        let w = &self.reward.weights;
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("reward.weights", "each weight must lie in [0, 1]"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("reward.weights", format!("must sum to 1, got {total}")));
        }
        let a = &self.agent;
        positive("agent.lr_critic", a.lr_critic)?;
        if !(a.lr_actor >= 0.0 && a.lr_actor.is_finite()) {
            return Err(Error::config("agent.lr_actor", "must be non-negative"));
        }
        if !(a.lr_meta >= 0.0 && a.lr_meta.is_finite()) {
            return Err(Error::config("agent.lr_meta", "must be non-negative"));
        }
        if !(a.gamma >= 0.0 && a.gamma < 1.0) {
            return Err(Error::config("agent.gamma", "must lie in [0, 1)"));
        }
        if !(a.tau > 0.0 && a.tau <= 1.0) {
            return Err(Error::config("agent.tau", "must lie in (0, 1]"));
        }
        if !(a.entropy_weight >= 0.0 && a.entropy_weight.is_finite()) {
            return Err(Error::config("agent.entropy_weight", "must be non-negative"));
        }
        positive("agent.reward_scale", a.reward_scale)?;
        at_least_one("agent.batch_size", a.batch_size)?;
        if a.replay_capacity < a.batch_size {
            return Err(Error::config("agent.replay_capacity", "must be at least batch_size"));
        }
        for (field, widths) in [
            ("agent.actor_hidden", &a.actor_hidden),
            ("agent.critic_hidden", &a.critic_hidden),
            ("agent.meta_hidden", &a.meta_hidden),
        ] {
            if widths.contains(&0) {
                return Err(Error::config(field, "hidden widths must be at least 1"));
            }
        }
        Ok(())
    }
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reads a config file and applies `FIMSTAR_*` environment overrides.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ScenarioConfig::from_toml_with_overrides(&text, env_overrides())
}

/// All `FIMSTAR_*` variables in the process environment, sorted by name.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut vars: Vec<_> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    vars
}

fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let name = key.strip_prefix(ENV_PREFIX).unwrap_or(key).to_ascii_lowercase();
    let path: Vec<&str> = name.split("__").collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "malformed override key"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for part in parents {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table =
            entry.as_table_mut().ok_or_else(|| Error::config(path.join("."), format!("`{part}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn field_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    // serde reports unknown/invalid fields with the name in backticks
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "<document>".to_string())
}
