//! Named experiments: which arms to train and how their logs are stored.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::io::write_atomic;
use crate::agent::{run_random_policy, train, write_training_log, EpisodeLog, MetaSacAgent, ReplayBuffer, RunStreams};
use crate::env::FimStarEnv;
use crate::error::{Error, Result};
use crate::ris::RisMode;

pub const LEARNING_RATES: [f64; 4] = [0.99, 0.1, 0.001, 1e-5];
pub const USER_COUNTS: [usize; 3] = [4, 6, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    LrSweep,
    UserSweep,
    VariantCompare,
    PowerCurve,
}

impl Experiment {
    pub const ALL: [Experiment; 4] =
        [Experiment::LrSweep, Experiment::UserSweep, Experiment::VariantCompare, Experiment::PowerCurve];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LrSweep => "lr_sweep",
            Experiment::UserSweep => "user_sweep",
            Experiment::VariantCompare => "variant_compare",
            Experiment::PowerCurve => "power_curve",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Meta-SAC, or vanilla SAC when the config disables the meta-critic.
    Learned,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub policy: Policy,
    pub config: ScenarioConfig,
}

impl Arm {
    fn learned(name: impl Into<String>, config: ScenarioConfig) -> Self {
        Self { name: name.into(), policy: Policy::Learned, config }
    }

    fn random(config: &ScenarioConfig) -> Self {
        Self { name: "random".into(), policy: Policy::Random, config: config.clone() }
    }
}

pub fn lr_arm_name(lr: f64) -> String {
    format!("lr_{lr:e}")
}

pub fn arms(experiment: Experiment, base: &ScenarioConfig) -> Vec<Arm> {
    let with = |f: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match experiment {
        Experiment::LrSweep | Experiment::PowerCurve => {
            let mut arms: Vec<Arm> = LEARNING_RATES
                .iter()
                .map(|&lr| Arm::learned(lr_arm_name(lr), with(&|c| c.agent.lr_actor = lr)))
                .collect();
            arms.push(Arm::random(base));
            arms
        }
        Experiment::UserSweep => USER_COUNTS
            .iter()
            .map(|&u| {
                Arm::learned(
                    format!("users_{u}"),
                    with(&|c| {
                        c.system.users_t = u / 2;
                        c.system.users_r = u - u / 2;
                    }),
                )
            })
            .collect(),
        Experiment::VariantCompare => vec![
            Arm::learned("meta_sac_star_bd_ris", with(&|c| c.system.ris_mode = RisMode::StarBd)),
            Arm::learned("meta_sac_d_ris", with(&|c| c.system.ris_mode = RisMode::Diagonal)),
            Arm::learned("meta_sac_no_ris", with(&|c| c.system.ris_mode = RisMode::None)),
            Arm::learned(
                "sac_star_bd_ris",
                with(&|c| {
                    c.system.ris_mode = RisMode::StarBd;
                    c.agent.meta_critic = false;
                }),
            ),
            Arm::random(&with(&|c| c.system.ris_mode = RisMode::StarBd)),
        ],
    }
}

/// Trains (or rolls out) one arm for one seed.
pub fn run_arm(arm: &Arm, seed: u64) -> Result<Vec<EpisodeLog>> {
    let cfg = &arm.config;
    let mut env = FimStarEnv::<f64>::new(cfg)?;
    let mut streams = RunStreams::from_seed(seed);
    match arm.policy {
        Policy::Random => run_random_policy(&mut env, cfg.episodes, &mut streams),
        Policy::Learned => {
            let mut agent = MetaSacAgent::new(env.state_dim(), env.action_dim(), &cfg.agent, &mut streams.init)?;
            let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity, env.state_dim(), env.action_dim())?;
            train(&mut agent, &mut env, &mut buffer, cfg.episodes, cfg.gradient_steps(), &mut streams)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub log: Vec<EpisodeLog>,
}

pub fn log_file_name(arm: &str, seed: u64) -> String {
    format!("{arm}_seed{seed}.csv")
}

pub fn render_log(log: &[EpisodeLog]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    write_training_log(&mut bytes, log)?;
    Ok(bytes)
}

/// Runs every `(arm, seed)` pair, seed-parallel, and optionally writes one
/// CSV per pair into `out_dir`. Results come back in arm-major order.
pub fn run_experiment(
    experiment: Experiment,
    config: &ScenarioConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<RunResult>> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::arg("at least one seed is required"));
    }
    let arms = arms(experiment, config);
    let jobs: Vec<(&Arm, u64)> = arms.iter().flat_map(|a| seeds.iter().map(move |&s| (a, s))).collect();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("config.toml"), config.to_toml_string().as_bytes())?;
    }
    jobs.par_iter()
        .map(|&(arm, seed)| {
            let log = run_arm(arm, seed)?;
            if let Some(dir) = out_dir {
                write_atomic(&dir.join(log_file_name(&arm.name, seed)), &render_log(&log)?)?;
            }
            Ok(RunResult { arm: arm.name.clone(), seed, log })
        })
        .collect()
}

pub fn output_paths(experiment: Experiment, config: &ScenarioConfig, seeds: &[u64], out_dir: &Path) -> Vec<PathBuf> {
    arms(experiment, config)
        .iter()
        .flat_map(|a| seeds.iter().map(move |&s| out_dir.join(log_file_name(&a.name, s))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!(matches!("fig9".parse::<Experiment>(), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn arm_sets() {
        let cfg = ScenarioConfig::desk();
        let lr = arms(Experiment::LrSweep, &cfg);
        assert_eq!(lr.iter().filter(|a| a.policy == Policy::Learned).count(), 4);
        assert_eq!(lr[2].config.agent.lr_actor, 0.001);
        let users: Vec<usize> = arms(Experiment::UserSweep, &cfg).iter().map(|a| a.config.users()).collect();
        assert_eq!(users, vec![4, 6, 8]);
        let v = arms(Experiment::VariantCompare, &cfg);
        assert_eq!(v.len(), 5);
        assert!(!v[3].config.agent.meta_critic);
        assert_eq!(v[2].config.system.ris_mode, RisMode::None);
    }

    #[test]
    fn lr_names() {
        assert_eq!(lr_arm_name(0.001), "lr_1e-3");
        assert_eq!(lr_arm_name(0.99), "lr_9.9e-1");
    }
}
