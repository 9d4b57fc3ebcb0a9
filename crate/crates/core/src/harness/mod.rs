//! Experiment orchestration: random instances, learners and static baselines
//! played against a fixed reward schedule, exact regret traces, and the
//! artifacts written from them.

pub mod check;
pub mod cli;
mod monitor;
mod plot;
mod trace;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{generate_rewards, AdversaryKind, AdversarySpec};
use crate::error::{Error, Result};
use crate::learner::{EpisodeUpdate, LearnerState};
use crate::mdp::{
    best_static_policy, episode_value, hindsight_optimum, Dims, Policy, RewardSequence, TabularMdp,
};
use crate::olo::OloStrategy;

pub use monitor::{InvariantMonitor, Violation, LEARNER_INVARIANTS};
pub use plot::{emit_plot, regret_bands, render_svg, PlotOptions, RegretBand};
pub use trace::{emit_csv, format_g17, read_csv, RegretTrace, TraceRow, TraceSummary, CSV_HEADER};

/// Per-entry floor added before normalising random kernel rows.
pub const KERNEL_ROW_FLOOR: f64 = 0.05;

/// Environment variable capping the number of seeds run in parallel.
pub const THREADS_ENV: &str = "AML_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    ApoMvpPoly,
    ApoMvpExp,
    ApoMvpAdahedge,
    UniformStatic,
    HindsightOracle,
}

impl Algo {
    pub const ALL: [Algo; 5] = [
        Algo::ApoMvpPoly,
        Algo::ApoMvpExp,
        Algo::ApoMvpAdahedge,
        Algo::UniformStatic,
        Algo::HindsightOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::ApoMvpPoly => "apo_mvp_poly",
            Algo::ApoMvpExp => "apo_mvp_exp",
            Algo::ApoMvpAdahedge => "apo_mvp_adahedge",
            Algo::UniformStatic => "uniform_static",
            Algo::HindsightOracle => "hindsight_oracle",
        }
    }

    /// OLO strategy driving the learner, or `None` for static players.
    pub fn olo_strategy(&self) -> Option<OloStrategy> {
        match self {
            Algo::ApoMvpPoly => Some(OloStrategy::PolynomialPotential),
            Algo::ApoMvpExp => Some(OloStrategy::ExponentialPotential),
            Algo::ApoMvpAdahedge => Some(OloStrategy::AdaHedge),
            Algo::UniformStatic | Algo::HindsightOracle => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algo::ALL.iter().map(Algo::as_str).collect();
                Error::invalid(format!(
                    "unknown algo {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_num_seeds() -> usize {
    1
}

fn default_output_path() -> PathBuf {
    PathBuf::from("regret.csv")
}

fn default_adversary() -> AdversarySpec {
    AdversarySpec {
        kind: AdversaryKind::Switching { switch_period: 64 },
        seed: 0,
    }
}

/// Everything needed to reproduce a run. Serialized as the CLI's JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "T")]
    pub episodes: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub algo: Algo,
    #[serde(default = "default_adversary")]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub mdp_seed: u64,
    #[serde(default)]
    pub run_seed: u64,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default = "default_output_path")]
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            states: 3,
            actions: 2,
            horizon: 3,
            episodes: 1024,
            delta: default_delta(),
            algo: Algo::ApoMvpExp,
            adversary: default_adversary(),
            mdp_seed: 0,
            run_seed: 0,
            num_seeds: default_num_seeds(),
            output_path: default_output_path(),
        }
    }
}

impl ExperimentConfig {
    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.states, self.actions, self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()?;
        if self.episodes == 0 {
            return Err(Error::invalid("T must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.num_seeds == 0 {
            return Err(Error::invalid("num_seeds must be positive"));
        }
        self.adversary.validate()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Run seed of the `index`-th repetition.
    pub fn seed_for(&self, index: usize) -> u64 {
        self.run_seed.wrapping_add(index as u64)
    }
}

/// Random kernel: each row is `U[0,1] + floor` per entry, normalised.
pub fn random_mdp(dims: Dims, seed: u64) -> Result<TabularMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(dims.kernel_entries());
    for _ in 0..(dims.horizon - 1) * dims.states * dims.actions {
        let row: Vec<f64> = (0..dims.states)
            .map(|_| rng.gen::<f64>() + KERNEL_ROW_FLOOR)
            .collect();
        let z: f64 = row.iter().sum();
        transitions.extend(row.into_iter().map(|x| x / z));
    }
    TabularMdp::new(dims, transitions, 0)
}

/// The environment and reward schedule shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: TabularMdp,
    pub rewards: RewardSequence,
}

impl Instance {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims()?;
        Ok(Instance {
            mdp: random_mdp(dims, config.mdp_seed)?,
            rewards: generate_rewards(&config.adversary, dims, config.episodes as usize)?,
        })
    }
}

enum Player {
    Static(Policy),
    Learner(Box<LearnerState>, Box<InvariantMonitor>),
}

/// Plays one seed and returns the trace together with any invariant
/// violations the monitor saw.
pub fn run_seed_collecting(
    config: &ExperimentConfig,
    instance: &Instance,
    seed: u64,
) -> Result<(RegretTrace, Vec<Violation>)> {
    let started = Instant::now();
    let mdp = &instance.mdp;
    let rewards = &instance.rewards;
    let dims = mdp.dims();
    if rewards.dims() != dims {
        return Err(Error::invalid("reward schedule does not match the MDP"));
    }
    let (best_policy, best_total) = best_static_policy(mdp, rewards)?;
    let episodes = rewards.len();

    let mut player = match config.algo.olo_strategy() {
        Some(strategy) => {
            let learner = LearnerState::new(dims, episodes as u64, config.delta, strategy)?;
            let monitor = InvariantMonitor::new(&learner, best_policy.clone());
            Player::Learner(Box::new(learner), Box::new(monitor))
        }
        None if config.algo == Algo::HindsightOracle => Player::Static(best_policy),
        None => Player::Static(Policy::uniform(dims)),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summed = vec![0.0; dims.sa_entries()];
    let mut played_total = 0.0;
    let mut rows = Vec::with_capacity(episodes);

    for (t, reward) in rewards.episodes().iter().enumerate() {
        let (policy, epoch) = match &mut player {
            Player::Static(p) => (p.clone(), 1),
            Player::Learner(l, m) => {
                m.before_episode(l);
                (l.policy().clone(), l.epoch_index())
            }
        };
        let expected = episode_value(mdp, &policy, reward)?;

        let mut s = mdp.initial_state();
        let mut realized = 0.0;
        for h in 0..dims.horizon {
            let a = match &player {
                Player::Static(p) => p.sample_action(h, s, &mut rng),
                Player::Learner(l, _) => l.act(h, s, &mut rng)?,
            };
            realized += reward.get(h, s, a);
            if h + 1 < dims.horizon {
                let next = mdp.step(h, s, a, &mut rng);
                if let Player::Learner(l, _) = &mut player {
                    l.record_transition(h, s, a, next)?;
                }
                s = next;
            }
        }

        if let Player::Learner(l, m) = &mut player {
            let update = l.end_of_episode_update(reward)?;
            let estimates = match &update {
                EpisodeUpdate::PolicyUpdate(est) => Some(est),
                EpisodeUpdate::EpochSwitch => None,
            };
            m.after_episode(l, &policy, reward, mdp, estimates);
        }

        for (acc, v) in summed.iter_mut().zip(reward.values()) {
            *acc += v;
        }
        let (_, hindsight) = hindsight_optimum(mdp, &summed)?;
        played_total += expected;
        rows.push(TraceRow {
            t: t as u64 + 1,
            realized_return: realized,
            expected_value: expected,
            hindsight_cum: hindsight,
            regret_cum: hindsight - played_total,
            epoch,
        });
    }

    let epochs = rows.last().map_or(1, |r| r.epoch);
    let (optimism_held, violations) = match player {
        Player::Static(_) => (None, Vec::new()),
        Player::Learner(_, m) => {
            let (optimism, violations) = m.finish(epochs);
            (Some(optimism), violations)
        }
    };
    let trace = RegretTrace {
        algo: config.algo,
        seed,
        rows,
        summary: TraceSummary {
            final_regret: best_total - played_total,
            epochs,
            wall_time_s: started.elapsed().as_secs_f64(),
            optimism_held,
        },
    };
    Ok((trace, violations))
}

/// Plays one seed, failing on the first invariant violation.
pub fn run_seed(config: &ExperimentConfig, instance: &Instance, seed: u64) -> Result<RegretTrace> {
    let (trace, violations) = run_seed_collecting(config, instance, seed)?;
    match violations.first() {
        Some(v) => Err(Error::Invariant(format!(
            "{} (seed {seed}): {}",
            v.invariant, v.detail
        ))),
        None => Ok(trace),
    }
}

/// Thread count from `AML_THREADS`, defaulting to the machine's parallelism.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every seed of `config` on a shared instance, in parallel. Traces come
/// back in seed order.
pub fn run_on_instance(config: &ExperimentConfig, instance: &Instance) -> Result<Vec<RegretTrace>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_budget())
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..config.num_seeds)
            .into_par_iter()
            .map(|i| run_seed(config, instance, config.seed_for(i)))
            .collect()
    })
}

/// Builds the instance described by `config` and runs all its seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    let instance = Instance::from_config(config)?;
    run_on_instance(config, &instance)
}

/// Output path for one seed: `path` itself for single-seed runs, otherwise
/// `<stem>_seed<seed>.<ext>`.
pub fn seed_output_path(path: &Path, seed: u64, num_seeds: usize) -> PathBuf {
    if num_seeds == 1 {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map_or_else(|| "regret".into(), |s| s.to_string_lossy().into_owned());
    let ext = path
        .extension()
        .map_or_else(|| "csv".into(), |e| e.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_seed{seed}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(algo: Algo) -> ExperimentConfig {
        ExperimentConfig {
            episodes: 64,
            algo,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn algo_names_round_trip() {
        for a in Algo::ALL {
            assert_eq!(a.as_str().parse::<Algo>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{a}\""));
        }
        assert!("ppo".parse::<Algo>().is_err());
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"S":2,"A":2,"H":2,"T":10,"algo":"uniform_static"}"#).unwrap();
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.num_seeds, 1);
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"S":2,"A":2,"H":2,"T":10,"algo":"uniform_static","bogus":1}"#
        )
        .is_err());
        let bad = ExperimentConfig {
            delta: 1.0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { states: 0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_mdp_rows_are_floored() {
        let d = Dims::new(4, 3, 3).unwrap();
        let mdp = random_mdp(d, 9).unwrap();
        let min = 0.05 / (4.0 * 1.05);
        assert!(mdp.transitions().iter().all(|&p| p >= min));
        assert_eq!(mdp, random_mdp(d, 9).unwrap());
    }

    #[test]
    fn hindsight_oracle_has_zero_final_regret() {
        let trace = &run_experiment(&config(Algo::HindsightOracle)).unwrap()[0];
        assert!(trace.summary.final_regret.abs() < 1e-9);
        assert!(trace.rows.last().unwrap().regret_cum.abs() < 1e-9);
    }

    #[test]
    fn single_action_uniform_has_zero_regret() {
        let c = ExperimentConfig {
            actions: 1,
            ..config(Algo::UniformStatic)
        };
        let trace = &run_experiment(&c).unwrap()[0];
        assert!(trace.rows.iter().all(|r| r.regret_cum.abs() < 1e-9));
    }

    #[test]
    fn learner_trace_shape() {
        let c = ExperimentConfig {
            num_seeds: 3,
            ..config(Algo::ApoMvpPoly)
        };
        let traces = run_experiment(&c).unwrap();
        assert_eq!(traces.len(), 3);
        for (i, tr) in traces.iter().enumerate() {
            assert_eq!(tr.seed, i as u64);
            assert_eq!(tr.rows.len(), 64);
            assert_eq!(tr.rows[0].epoch, 1);
            assert!(tr.rows.windows(2).all(|w| w[0].epoch <= w[1].epoch));
            assert_eq!(tr.rows.last().unwrap().epoch, tr.summary.epochs);
        }
    }

    #[test]
    fn seed_paths() {
        let p = Path::new("out/regret.csv");
        assert_eq!(seed_output_path(p, 3, 1), p);
        assert_eq!(seed_output_path(p, 3, 2), Path::new("out/regret_seed3.csv"));
    }
}
