use crate::learner::{advantage_bound, EpochReplay, LearnerState, ValueEstimates};
use crate::mdp::{policy_backup, Dims, Policy, RewardFunction, TabularMdp};

/// Names of the per-run learner invariants, in reporting order.
pub const LEARNER_INVARIANTS: [&str; 6] = [
    "epoch_count_bound",
    "within_epoch_freeze",
    "advantage_zero_sum",
    "advantage_feed_bound",
    "bonus_range",
    "epoch_profile_consistency",
];

const ZERO_SUM_TOLERANCE: f64 = 1e-9;
const OPTIMISM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    pub episode: u64,
    pub detail: String,
}

/// Watches a learner episode by episode and records every broken invariant.
///
/// Also tracks the optimism event: at every episode, the best static policy
/// evaluated on the estimated model with `reward + bonus` must dominate its
/// true Q-values everywhere.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    dims: Dims,
    episodes_total: u64,
    comparator: Policy,
    episode: u64,
    frozen_epoch: u64,
    frozen_p_hat: Vec<u64>,
    frozen_bonus: Vec<u64>,
    start_p_hat: Vec<f64>,
    start_bonus: Vec<f64>,
    replay: EpochReplay,
    optimism: bool,
    violations: Vec<Violation>,
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

impl InvariantMonitor {
    pub fn new(learner: &LearnerState, comparator: Policy) -> Self {
        let dims = learner.dims();
        InvariantMonitor {
            dims,
            episodes_total: learner.horizon_episodes(),
            comparator,
            episode: 0,
            frozen_epoch: 0,
            frozen_p_hat: Vec::new(),
            frozen_bonus: Vec::new(),
            start_p_hat: Vec::new(),
            start_bonus: Vec::new(),
            replay: EpochReplay::new(dims),
            optimism: true,
            violations: Vec::new(),
        }
    }

    fn report(&mut self, invariant: &'static str, detail: String) {
        // one entry per invariant is enough to diagnose a run
        if self.violations.iter().all(|v| v.invariant != invariant) {
            self.violations.push(Violation {
                invariant,
                episode: self.episode,
                detail,
            });
        }
    }

    /// Call before the episode's first action.
    pub fn before_episode(&mut self, learner: &LearnerState) {
        self.episode += 1;
        let epoch = learner.epoch_index();
        if epoch != self.replay.epoch() {
            self.report(
                "epoch_profile_consistency",
                format!(
                    "learner epoch {epoch}, profile replay {}",
                    self.replay.epoch()
                ),
            );
        }
        let p_bits = bits(learner.p_hat());
        let b_bits = bits(learner.bonus());
        if epoch == self.frozen_epoch {
            if p_bits != self.frozen_p_hat || b_bits != self.frozen_bonus {
                self.report(
                    "within_epoch_freeze",
                    format!("kernel estimate or bonus changed inside epoch {epoch}"),
                );
            }
        } else {
            self.frozen_epoch = epoch;
            self.frozen_p_hat = p_bits;
            self.frozen_bonus = b_bits;
            self.check_bonus(learner);
        }
        self.start_p_hat = learner.p_hat().to_vec();
        self.start_bonus = learner.bonus().to_vec();
    }

    fn check_bonus(&mut self, learner: &LearnerState) {
        let d = self.dims;
        let h_f = d.horizon as f64;
        for h in 0..d.horizon {
            for s in 0..d.states {
                for a in 0..d.actions {
                    let b = learner.bonus_at(h, s, a);
                    let ok = if h + 1 == d.horizon {
                        b == 0.0
                    } else {
                        (0.0..=h_f).contains(&b)
                    };
                    if !ok {
                        self.report("bonus_range", format!("b[{h},{s},{a}] = {b}"));
                    }
                }
            }
        }
    }

    /// Call after `end_of_episode_update`, with the policy that was played.
    pub fn after_episode(
        &mut self,
        learner: &LearnerState,
        played: &Policy,
        reward: &RewardFunction,
        mdp: &TabularMdp,
        estimates: Option<&ValueEstimates>,
    ) {
        let d = self.dims;
        if let Some(est) = estimates {
            for h in 0..d.horizon {
                let bound = advantage_bound(d.horizon, h);
                for s in 0..d.states {
                    let row = est.advantage_row(h, s);
                    let mean: f64 = played.row(h, s).iter().zip(row).map(|(p, x)| p * x).sum();
                    if mean.abs() > ZERO_SUM_TOLERANCE {
                        self.report(
                            "advantage_zero_sum",
                            format!("(h={h}, s={s}) weighted advantage {mean:e}"),
                        );
                    }
                    if let Some(x) = row.iter().find(|x| x.abs() > bound) {
                        self.report(
                            "advantage_feed_bound",
                            format!("(h={h}, s={s}) advantage {x} exceeds {bound}"),
                        );
                    }
                }
            }
        }

        if self.optimism {
            let truth = policy_backup(d, mdp.transitions(), &self.comparator, |h, s, a| {
                reward.get(h, s, a)
            });
            let bonus = &self.start_bonus;
            let optimistic = policy_backup(d, &self.start_p_hat, &self.comparator, |h, s, a| {
                reward.get(h, s, a) + bonus[d.hsa(h, s, a)]
            });
            self.optimism = optimistic
                .q
                .iter()
                .zip(&truth.q)
                .all(|(hat, q)| *hat >= q - OPTIMISM_TOLERANCE);
        }

        let replayed = self.replay.push(learner.counts());
        if replayed != learner.epoch_index() {
            self.report(
                "epoch_profile_consistency",
                format!(
                    "learner epoch {}, profile replay {replayed}",
                    learner.epoch_index()
                ),
            );
        }
    }

    /// `m(T) <= S A H log2(2T)`.
    pub fn epoch_bound(&self) -> f64 {
        let d = self.dims;
        (d.states * d.actions * d.horizon) as f64 * (2.0 * self.episodes_total as f64).log2()
    }

    /// Final checks; returns whether optimism held throughout, and all violations.
    pub fn finish(mut self, epochs: u64) -> (bool, Vec<Violation>) {
        let bound = self.epoch_bound();
        if epochs as f64 > bound {
            self.report("epoch_count_bound", format!("{epochs} epochs > {bound}"));
        }
        (self.optimism, self.violations)
    }
}
