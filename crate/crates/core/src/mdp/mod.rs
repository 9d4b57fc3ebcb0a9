//! Ground-truth environment: tabular episodic MDPs with time-inhomogeneous
//! kernels, exact policy evaluation by backward induction, trajectory
//! sampling and the best static policy in hindsight.

mod json;

use rand::Rng;

use crate::error::{Error, Result};

pub use json::InstanceDocument;

/// Tolerance for "sums to one" checks on probability rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// State, action and stage counts shared by every table in an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::invalid(format!(
                "dimensions must be positive (S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Dims {
            states,
            actions,
            horizon,
        })
    }

    /// Number of (stage, state, action) entries over all `horizon` stages.
    pub fn sa_entries(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    /// Number of (stage, state, action, next state) entries over the
    /// `horizon - 1` stages that have a kernel.
    pub fn kernel_entries(&self) -> usize {
        (self.horizon - 1) * self.states * self.actions * self.states
    }

    #[inline]
    pub fn hs(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    #[inline]
    pub fn hsa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    /// Offset of the kernel row `P_h(. | s, a)`.
    #[inline]
    pub fn kernel_row(&self, h: usize, s: usize, a: usize) -> usize {
        self.hsa(h, s, a) * self.states
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.states {
            return Err(Error::OutOfRange(format!(
                "state {s} not in 0..{}",
                self.states
            )));
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.actions {
            return Err(Error::OutOfRange(format!(
                "action {a} not in 0..{}",
                self.actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_stage(&self, h: usize) -> Result<()> {
        if h >= self.horizon {
            return Err(Error::OutOfRange(format!(
                "stage {h} not in 0..{}",
                self.horizon
            )));
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid(format!(
                "{}: entry {p} is not a probability",
                what()
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::invalid(format!("{}: sums to {sum}", what())));
    }
    Ok(())
}

/// Draws an index from a probability vector by inverse CDF.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left `acc` slightly below one.
    last_positive
}

/// The true environment.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dims: Dims,
    transitions: Vec<f64>,
    initial_state: usize,
}

impl TabularMdp {
    /// `transitions` is the flat `[H-1][S][A][S]` array in row-major order.
    pub fn new(dims: Dims, transitions: Vec<f64>, initial_state: usize) -> Result<Self> {
        if transitions.len() != dims.kernel_entries() {
            return Err(Error::invalid(format!(
                "expected {} transition entries for {} stage slices, got {}",
                dims.kernel_entries(),
                dims.horizon - 1,
                transitions.len()
            )));
        }
        dims.check_state(initial_state)
            .map_err(|_| Error::invalid(format!("initial state {initial_state} out of range")))?;
        for h in 0..dims.horizon - 1 {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let off = dims.kernel_row(h, s, a);
                    check_distribution(&transitions[off..off + dims.states], || {
                        format!("transition row (h={h}, s={s}, a={a})")
                    })?;
                }
            }
        }
        Ok(TabularMdp {
            dims,
            transitions,
            initial_state,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let off = self.dims.kernel_row(h, s, a);
        &self.transitions[off..off + self.dims.states]
    }

    /// Samples the next state from `P_h(. | s, a)`. Requires `h < horizon - 1`.
    pub fn step<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, rng: &mut R) -> usize {
        sample_categorical(self.transition_row(h, s, a), rng)
    }
}

/// One episode's reward function `r_h(s, a)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    dims: Dims,
    values: Vec<f64>,
}

impl RewardFunction {
    /// `values` is the flat `[H][S][A]` array.
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.sa_entries() {
            return Err(Error::invalid(format!(
                "expected {} reward entries, got {}",
                dims.sa_entries(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid(format!("reward {bad} outside [0, 1]")));
        }
        Ok(RewardFunction { dims, values })
    }

    pub fn constant(dims: Dims, c: f64) -> Result<Self> {
        Self::new(dims, vec![c; dims.sa_entries()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.dims.hsa(h, s, a)]
    }
}

/// The oblivious adversary's full schedule, fixed before interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSequence {
    dims: Dims,
    episodes: Vec<RewardFunction>,
}

impl RewardSequence {
    pub fn new(episodes: Vec<RewardFunction>) -> Result<Self> {
        let first = episodes
            .first()
            .ok_or_else(|| Error::invalid("reward sequence is empty"))?;
        let dims = first.dims();
        if episodes.iter().any(|r| r.dims() != dims) {
            return Err(Error::invalid("reward functions disagree on dimensions"));
        }
        Ok(RewardSequence { dims, episodes })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[RewardFunction] {
        &self.episodes
    }

    pub fn get(&self, t: usize) -> &RewardFunction {
        &self.episodes[t]
    }

    /// Entrywise sum of the reward functions, flat `[H][S][A]`.
    pub fn summed(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dims.sa_entries()];
        for r in &self.episodes {
            for (acc, v) in total.iter_mut().zip(r.values()) {
                *acc += v;
            }
        }
        total
    }
}

/// Per-stage, per-state action distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dims: Dims,
    dist: Vec<f64>,
}

impl Policy {
    pub fn uniform(dims: Dims) -> Self {
        Policy {
            dims,
            dist: vec![1.0 / dims.actions as f64; dims.sa_entries()],
        }
    }

    /// `dist` is the flat `[H][S][A]` array.
    pub fn new(dims: Dims, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != dims.sa_entries() {
            return Err(Error::invalid(format!(
                "expected {} policy entries, got {}",
                dims.sa_entries(),
                dist.len()
            )));
        }
        for (i, row) in dist.chunks(dims.actions).enumerate() {
            check_distribution(row, || {
                format!("policy row (h={}, s={})", i / dims.states, i % dims.states)
            })?;
        }
        Ok(Policy { dims, dist })
    }

    /// Deterministic policy from one action per `(h, s)`, indexed `h * S + s`.
    pub fn deterministic(dims: Dims, actions: &[usize]) -> Result<Self> {
        if actions.len() != dims.horizon * dims.states {
            return Err(Error::invalid("one action per (stage, state) required"));
        }
        let mut dist = vec![0.0; dims.sa_entries()];
        for (hs, &a) in actions.iter().enumerate() {
            dims.check_action(a)?;
            dist[hs * dims.actions + a] = 1.0;
        }
        Ok(Policy { dims, dist })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let off = self.dims.hsa(h, s, 0);
        &self.dist[off..off + self.dims.actions]
    }

    /// Overwrites one row. The caller guarantees `row` is a distribution.
    pub(crate) fn set_row(&mut self, h: usize, s: usize, row: &[f64]) {
        let off = self.dims.hsa(h, s, 0);
        self.dist[off..off + self.dims.actions].copy_from_slice(row);
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(h, s), rng)
    }
}

/// Value and Q-value tables, `V[h][s]` and `Q[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    dims: Dims,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl ValueTables {
    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[self.dims.hs(h, s)]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.dims.hsa(h, s, a)]
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
}

/// Backward Bellman recursion for a fixed policy under an arbitrary kernel
/// (flat `[H-1][S][A][S]`) and stage reward.
pub(crate) fn policy_backup(
    dims: Dims,
    kernel: &[f64],
    policy: &Policy,
    reward: impl Fn(usize, usize, usize) -> f64,
) -> ValueTables {
    let Dims {
        states,
        actions,
        horizon,
    } = dims;
    let mut v = vec![0.0; horizon * states];
    let mut q = vec![0.0; dims.sa_entries()];
    for h in (0..horizon).rev() {
        for s in 0..states {
            let mut vs = 0.0;
            for a in 0..actions {
                let mut qa = reward(h, s, a);
                if h + 1 < horizon {
                    let off = dims.kernel_row(h, s, a);
                    let next = &v[(h + 1) * states..(h + 2) * states];
                    qa += kernel[off..off + states]
                        .iter()
                        .zip(next)
                        .map(|(p, vn)| p * vn)
                        .sum::<f64>();
                }
                q[dims.hsa(h, s, a)] = qa;
                vs += policy.dist[dims.hsa(h, s, a)] * qa;
            }
            v[dims.hs(h, s)] = vs;
        }
    }
    ValueTables { dims, v, q }
}

fn check_same(dims: Dims, other: Dims, what: &str) -> Result<()> {
    if dims != other {
        return Err(Error::invalid(format!(
            "{what} dimensions {other:?} do not match MDP {dims:?}"
        )));
    }
    Ok(())
}

/// Exact evaluation of `policy` against `reward` under the true kernel.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardFunction,
) -> Result<ValueTables> {
    check_same(mdp.dims, policy.dims, "policy")?;
    check_same(mdp.dims, reward.dims, "reward")?;
    Ok(policy_backup(
        mdp.dims,
        &mdp.transitions,
        policy,
        |h, s, a| reward.get(h, s, a),
    ))
}

/// `V_1(s1)` of `policy` under `reward`.
pub fn episode_value(mdp: &TabularMdp, policy: &Policy, reward: &RewardFunction) -> Result<f64> {
    Ok(evaluate_policy(mdp, policy, reward)?.v(0, mdp.initial_state))
}

/// Deterministic maximizer of `V_1(s1)` for a flat `[H][S][A]` reward table
/// whose entries need not lie in `[0, 1]` (typically a sum of reward
/// functions). Ties go to the lowest action index.
pub fn hindsight_optimum(mdp: &TabularMdp, summed_reward: &[f64]) -> Result<(Policy, f64)> {
    let dims = mdp.dims;
    if summed_reward.len() != dims.sa_entries() {
        return Err(Error::invalid("summed reward has the wrong shape"));
    }
    let Dims {
        states,
        actions,
        horizon,
    } = dims;
    let mut v = vec![0.0; horizon * states];
    let mut choice = vec![0usize; horizon * states];
    for h in (0..horizon).rev() {
        for s in 0..states {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..actions {
                let mut qa = summed_reward[dims.hsa(h, s, a)];
                if h + 1 < horizon {
                    let next = &v[(h + 1) * states..(h + 2) * states];
                    qa += mdp
                        .transition_row(h, s, a)
                        .iter()
                        .zip(next)
                        .map(|(p, vn)| p * vn)
                        .sum::<f64>();
                }
                if qa > best {
                    best = qa;
                    best_a = a;
                }
            }
            v[dims.hs(h, s)] = best;
            choice[dims.hs(h, s)] = best_a;
        }
    }
    let policy = Policy::deterministic(dims, &choice)?;
    Ok((policy, v[dims.hs(0, mdp.initial_state)]))
}

/// Best static policy in hindsight and its total value `max_pi sum_t V_1^{pi, r_t}(s1)`.
///
/// Values are linear in the reward, so the maximization over the whole
/// sequence is a single dynamic program on the summed reward.
pub fn best_static_policy(mdp: &TabularMdp, rewards: &RewardSequence) -> Result<(Policy, f64)> {
    if rewards.is_empty() {
        return Err(Error::invalid("reward sequence is empty"));
    }
    check_same(mdp.dims, rewards.dims, "reward sequence")?;
    hindsight_optimum(mdp, &rewards.summed())
}

/// Exact state-visit distribution per stage, flat `[H][S]`.
pub fn forward_occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    check_same(mdp.dims, policy.dims, "policy")?;
    let Dims {
        states, horizon, ..
    } = mdp.dims;
    let mut mu = vec![0.0; horizon * states];
    mu[mdp.initial_state] = 1.0;
    for h in 0..horizon - 1 {
        for s in 0..states {
            let mass = mu[h * states + s];
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.row(h, s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (sn, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    mu[(h + 1) * states + sn] += mass * pa * p;
                }
            }
        }
    }
    Ok(mu)
}

/// The (state, action) pairs visited in one episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    /// Sum of per-step rewards along the trajectory.
    pub fn realized_return(&self, reward: &RewardFunction) -> f64 {
        self.steps
            .iter()
            .enumerate()
            .map(|(h, &(s, a))| reward.get(h, s, a))
            .sum()
    }
}

/// Rolls out one episode of `policy` in `mdp`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    rng: &mut R,
) -> Result<Trajectory> {
    check_same(mdp.dims, policy.dims, "policy")?;
    let horizon = mdp.dims.horizon;
    let mut steps = Vec::with_capacity(horizon);
    let mut s = mdp.initial_state;
    for h in 0..horizon {
        let a = policy.sample_action(h, s, rng);
        steps.push((s, a));
        if h + 1 < horizon {
            s = mdp.step(h, s, a, rng);
        }
    }
    Ok(Trajectory { steps })
}
