//! The APO-MVP learner.
//!
//! Per episode the learner plays its current policy, counts transitions and,
//! once the reward function is revealed, builds optimistic Q/V/advantage
//! estimates by backward induction on the estimated kernel with exploration
//! bonuses. Advantage vectors are fed to one OLO instance per (stage, state),
//! whose weights become the next policy.
//!
//! The kernel estimate and bonuses change only when some visit count
//! `n_h(s, a)` reaches a power of two. Such an event ends the current epoch:
//! every OLO history is dropped and the next episode starts from the uniform
//! policy. Inside an epoch the estimated model is frozen, which is what lets
//! the OLO layer treat each epoch as an ordinary online problem.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{policy_backup, Dims, Policy, RewardFunction};
use crate::olo::{OloConfig, OloState, OloStrategy};

/// Visit counts `n_h(s, a)` and `n_h(s, a, s')` for stages `0..H-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    dims: Dims,
    n_sa: Vec<u64>,
    n_sas: Vec<u64>,
}

/// Local epoch level `l = floor(log2 n) + 1`, with `l = 0` for `n = 0`.
pub fn count_level(n: u64) -> u32 {
    if n == 0 {
        0
    } else {
        64 - n.leading_zeros()
    }
}

impl CountTables {
    pub fn new(dims: Dims) -> Self {
        let sa = (dims.horizon - 1) * dims.states * dims.actions;
        CountTables {
            dims,
            n_sa: vec![0; sa],
            n_sas: vec![0; sa * dims.states],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.n_sa[self.dims.hsa(h, s, a)]
    }

    pub fn transitions_to(&self, h: usize, s: usize, a: usize, s_next: usize) -> u64 {
        self.n_sas[self.dims.kernel_row(h, s, a) + s_next]
    }

    /// All `n_h(s, a, .)` for one `(h, s, a)`.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let off = self.dims.kernel_row(h, s, a);
        &self.n_sas[off..off + self.dims.states]
    }

    /// Profile `l_h(s, a)` for every counted triple, flat `[H-1][S][A]`.
    pub fn profile(&self) -> Vec<u32> {
        self.n_sa.iter().map(|&n| count_level(n)).collect()
    }

    /// Number of recorded transitions at stage `h`.
    pub fn stage_total(&self, h: usize) -> u64 {
        let per_stage = self.dims.states * self.dims.actions;
        self.n_sa[h * per_stage..(h + 1) * per_stage].iter().sum()
    }

    fn increment(&mut self, h: usize, s: usize, a: usize, s_next: usize) -> u64 {
        let i = self.dims.hsa(h, s, a);
        self.n_sa[i] += 1;
        self.n_sas[i * self.dims.states + s_next] += 1;
        self.n_sa[i]
    }
}

/// Recomputes global epoch indices from successive count snapshots.
///
/// Feed the snapshot taken after each episode (the all-zero table before
/// episode 1 is implicit). After `t` snapshots, [`epoch`](Self::epoch) is the
/// epoch of episode `t + 1`: one plus the number of episodes whose counts
/// moved at least one profile entry.
#[derive(Debug, Clone)]
pub struct EpochReplay {
    previous: Vec<u32>,
    epoch: u64,
}

impl EpochReplay {
    pub fn new(dims: Dims) -> Self {
        EpochReplay {
            previous: CountTables::new(dims).profile(),
            epoch: 1,
        }
    }

    pub fn push(&mut self, counts: &CountTables) -> u64 {
        let profile = counts.profile();
        let moved: i64 = profile
            .iter()
            .zip(&self.previous)
            .map(|(&now, &before)| i64::from(now) - i64::from(before))
            .sum();
        self.epoch += moved.clamp(0, 1) as u64;
        self.previous = profile;
        self.epoch
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// Global epoch index implied by count snapshots taken at episode
/// boundaries. The first snapshot is the state before episode 1.
pub fn epoch_index_from_profiles(count_history: &[CountTables]) -> u64 {
    let Some(first) = count_history.first() else {
        return 1;
    };
    let mut replay = EpochReplay {
        previous: first.profile(),
        epoch: 1,
    };
    for snapshot in &count_history[1..] {
        replay.push(snapshot);
    }
    replay.epoch()
}

/// Optimistic estimates for one episode, all flat over `[H][S][A]` or `[H][S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimates {
    dims: Dims,
    pub q_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
}

impl ValueEstimates {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_hat[self.dims.hsa(h, s, a)]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v_hat[self.dims.hs(h, s)]
    }

    /// `A_hat_h(s, .)`.
    pub fn advantage_row(&self, h: usize, s: usize) -> &[f64] {
        let off = self.dims.hsa(h, s, 0);
        &self.a_hat[off..off + self.dims.actions]
    }
}

/// What happened at the end of an episode.
#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeUpdate {
    /// A count hit a power of two: histories were dropped and a new epoch begins.
    EpochSwitch,
    /// Advantages were fed to the OLO layer.
    PolicyUpdate(ValueEstimates),
}

#[derive(Debug, Clone)]
pub struct LearnerState {
    dims: Dims,
    episodes: u64,
    delta: f64,
    log_j: f64,
    counts: CountTables,
    p_hat: Vec<f64>,
    bonus: Vec<f64>,
    olo_configs: Vec<OloConfig>,
    olo: Vec<OloState>,
    policy: Policy,
    epoch: u64,
    trigger_pending: bool,
}

/// Bound on `|A_hat_h|` at zero-based stage `h`: `(H - h) (H + 1)`.
///
/// Each stage adds at most a reward of 1 and a bonus of `H`, and estimates
/// are never clipped.
pub fn advantage_bound(horizon: usize, h: usize) -> f64 {
    ((horizon - h) * (horizon + 1)) as f64
}

impl LearnerState {
    /// `episodes` is the total number of episodes `T` the learner will play.
    pub fn new(dims: Dims, episodes: u64, delta: f64, strategy: OloStrategy) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if episodes == 0 {
            return Err(Error::invalid("number of episodes must be positive"));
        }
        let Dims {
            states,
            actions,
            horizon,
        } = dims;
        let t = episodes as f64;
        let j = 2.0 * (states * actions * horizon) as f64 * t * (2.0 * t).log2() / delta;
        let h_f = horizon as f64;

        let mut bonus = vec![0.0; dims.sa_entries()];
        bonus[..(horizon - 1) * states * actions].fill(h_f);

        // Rewards plus bonuses lie in [0, H + 1]; advantages at stage h reach
        // (H - h)(H + 1), which the OLO layer must accept.
        let olo_configs = (0..horizon)
            .map(|h| {
                OloConfig::new(actions, h_f + 1.0, strategy)?
                    .with_input_bound(advantage_bound(horizon, h))
            })
            .collect::<Result<Vec<_>>>()?;
        let olo = (0..horizon * states)
            .map(|hs| OloState::new(&olo_configs[hs / states]))
            .collect::<Result<Vec<_>>>()?;

        Ok(LearnerState {
            dims,
            episodes,
            delta,
            log_j: j.ln(),
            counts: CountTables::new(dims),
            p_hat: vec![1.0 / states as f64; dims.kernel_entries()],
            bonus,
            olo_configs,
            olo,
            policy: Policy::uniform(dims),
            epoch: 1,
            trigger_pending: false,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn horizon_episodes(&self) -> u64 {
        self.episodes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ln J` with `J = 2 S A T H log2(2T) / delta`.
    pub fn log_j(&self) -> f64 {
        self.log_j
    }

    pub fn counts(&self) -> &CountTables {
        &self.counts
    }

    /// Kernel estimate, flat `[H-1][S][A][S]`.
    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// Bonuses, flat `[H][S][A]`; the last stage is identically zero.
    pub fn bonus(&self) -> &[f64] {
        &self.bonus
    }

    pub fn bonus_at(&self, h: usize, s: usize, a: usize) -> f64 {
        self.bonus[self.dims.hsa(h, s, a)]
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn olo_state(&self, h: usize, s: usize) -> &OloState {
        &self.olo[self.dims.hs(h, s)]
    }

    pub fn olo_config(&self, h: usize) -> &OloConfig {
        &self.olo_configs[h]
    }

    /// Index of the current global epoch, starting at 1.
    pub fn epoch_index(&self) -> u64 {
        self.epoch
    }

    /// Number of epochs started so far.
    pub fn epoch_count(&self) -> u64 {
        self.epoch
    }

    pub fn trigger_pending(&self) -> bool {
        self.trigger_pending
    }

    /// Bonus for a triple whose count just reached `2^(l-1)`.
    fn bonus_for(&self, refresh_count: u64) -> f64 {
        let h = self.dims.horizon as f64;
        (2.0 * h * h * self.log_j / refresh_count as f64)
            .sqrt()
            .min(h)
    }

    /// Samples `a ~ pi_h(. | s)` from the current policy.
    pub fn act<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> Result<usize> {
        self.dims.check_stage(h)?;
        self.dims.check_state(s)?;
        Ok(self.policy.sample_action(h, s, rng))
    }

    /// Records `s -> s_next` under action `a` at stage `h < H - 1`. Returns
    /// whether the count hit a power of two, refreshing that row of the
    /// kernel estimate and its bonus.
    pub fn record_transition(
        &mut self,
        h: usize,
        s: usize,
        a: usize,
        s_next: usize,
    ) -> Result<bool> {
        if h + 1 >= self.dims.horizon {
            return Err(Error::OutOfRange(format!(
                "no transition out of stage {h} with horizon {}",
                self.dims.horizon
            )));
        }
        self.dims.check_state(s)?;
        self.dims.check_action(a)?;
        self.dims.check_state(s_next)?;

        let n = self.counts.increment(h, s, a, s_next);
        if !n.is_power_of_two() {
            return Ok(false);
        }
        let off = self.dims.kernel_row(h, s, a);
        let denom = n as f64;
        for (p, &c) in self.p_hat[off..off + self.dims.states]
            .iter_mut()
            .zip(self.counts.transition_row(h, s, a))
        {
            *p = c as f64 / denom;
        }
        let b = self.bonus_for(n);
        let i = self.dims.hsa(h, s, a);
        self.bonus[i] = b;
        self.trigger_pending = true;
        Ok(true)
    }

    /// Optimistic backward induction for `policy` on the frozen kernel
    /// estimate with `reward + bonus`. No clipping is applied.
    pub fn compute_optimistic_values(
        &self,
        reward: &RewardFunction,
        policy: &Policy,
    ) -> Result<ValueEstimates> {
        if reward.dims() != self.dims || policy.dims() != self.dims {
            return Err(Error::invalid(
                "reward or policy shape does not match the learner",
            ));
        }
        let tables = policy_backup(self.dims, &self.p_hat, policy, |h, s, a| {
            reward.get(h, s, a) + self.bonus[self.dims.hsa(h, s, a)]
        });
        let mut a_hat = tables.q.clone();
        for (hs, row) in a_hat.chunks_mut(self.dims.actions).enumerate() {
            let v = tables.v[hs];
            row.iter_mut().for_each(|q| *q -= v);
        }
        Ok(ValueEstimates {
            dims: self.dims,
            q_hat: tables.q,
            v_hat: tables.v,
            a_hat,
        })
    }

    /// Closes the episode once its reward function is revealed and prepares
    /// the next policy.
    pub fn end_of_episode_update(&mut self, reward: &RewardFunction) -> Result<EpisodeUpdate> {
        if self.trigger_pending {
            for (hs, st) in self.olo.iter_mut().enumerate() {
                *st = OloState::new(&self.olo_configs[hs / self.dims.states])?;
            }
            self.policy = Policy::uniform(self.dims);
            self.epoch += 1;
            self.trigger_pending = false;
            return Ok(EpisodeUpdate::EpochSwitch);
        }

        let estimates = self.compute_optimistic_values(reward, &self.policy)?;
        let states = self.dims.states;
        for h in 0..self.dims.horizon {
            let config = self.olo_configs[h];
            for s in 0..states {
                let st = &mut self.olo[h * states + s];
                st.observe(&config, estimates.advantage_row(h, s))?;
                self.policy.set_row(h, s, st.weights());
            }
        }
        Ok(EpisodeUpdate::PolicyUpdate(estimates))
    }
}
