//! Independent oracles shared by the integration tests. Nothing here calls
//! the dynamic programs under test.
#![allow(dead_code)]

use aml::mdp::{Dims, Policy, RewardFunction, RewardSequence, TabularMdp};
use aml::olo::{OloConfig, OloState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalised random vector with the last entry set so the sum is exactly one.
pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
    let z: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / z).collect();
    let head: f64 = out[..n - 1].iter().sum();
    out[n - 1] = 1.0 - head;
    out
}

pub fn random_mdp<R: Rng>(dims: Dims, rng: &mut R) -> TabularMdp {
    let mut p = Vec::new();
    for _ in 0..(dims.horizon - 1) * dims.states * dims.actions {
        p.extend(random_simplex(dims.states, rng));
    }
    let s1 = rng.gen_range(0..dims.states);
    TabularMdp::new(dims, p, s1).unwrap()
}

pub fn random_policy<R: Rng>(dims: Dims, rng: &mut R) -> Policy {
    let mut dist = Vec::new();
    for _ in 0..dims.horizon * dims.states {
        dist.extend(random_simplex(dims.actions, rng));
    }
    Policy::new(dims, dist).unwrap()
}

pub fn random_reward<R: Rng>(dims: Dims, rng: &mut R) -> RewardFunction {
    RewardFunction::new(dims, (0..dims.sa_entries()).map(|_| rng.gen()).collect()).unwrap()
}

pub fn random_sequence<R: Rng>(dims: Dims, t: usize, rng: &mut R) -> RewardSequence {
    RewardSequence::new((0..t).map(|_| random_reward(dims, rng)).collect()).unwrap()
}

/// Expected return by summing over every (state, action) path weighted by
/// its probability.
pub fn enumerate_expected_return(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardFunction,
) -> f64 {
    fn walk(
        mdp: &TabularMdp,
        policy: &Policy,
        reward: &RewardFunction,
        h: usize,
        s: usize,
        prob: f64,
        acc: f64,
    ) -> f64 {
        let d = mdp.dims();
        let mut total = 0.0;
        for a in 0..d.actions {
            let pa = policy.row(h, s)[a];
            if pa == 0.0 {
                continue;
            }
            let gained = acc + reward.get(h, s, a);
            if h + 1 == d.horizon {
                total += prob * pa * gained;
            } else {
                for (sn, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > 0.0 {
                        total += walk(mdp, policy, reward, h + 1, sn, prob * pa * p, gained);
                    }
                }
            }
        }
        total
    }
    walk(mdp, policy, reward, 0, mdp.initial_state(), 1.0, 0.0)
}

/// Every deterministic policy, as one action per (stage, state).
pub fn all_deterministic_policies(dims: Dims) -> Vec<Policy> {
    let slots = dims.horizon * dims.states;
    let count = dims.actions.pow(slots as u32);
    (0..count)
        .map(|mut code| {
            let actions: Vec<usize> = (0..slots)
                .map(|_| {
                    let a = code % dims.actions;
                    code /= dims.actions;
                    a
                })
                .collect();
            Policy::deterministic(dims, &actions).unwrap()
        })
        .collect()
}

/// Best total value over all deterministic policies, each scored episode by
/// episode with path enumeration.
pub fn brute_force_hindsight(mdp: &TabularMdp, rewards: &RewardSequence) -> f64 {
    all_deterministic_policies(mdp.dims())
        .iter()
        .map(|pi| {
            rewards
                .episodes()
                .iter()
                .map(|r| enumerate_expected_return(mdp, pi, r))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    /// Independent uniform draws in `[-M, M]^K`.
    Iid,
    /// `v/2, -v, v, -v, ...` for a random `v`: punishes follow-the-leader.
    Alternating,
    /// Sees the weights and picks the sign vector in `{-M, M}^K` that
    /// maximises the regret after this round.
    GreedyAdversarial,
}

/// Plays `rounds` rounds of `opponent` against `config`; returns the regret
/// measured directly from the played weights.
pub fn play_olo(config: &OloConfig, opponent: Opponent, rounds: usize, seed: u64) -> f64 {
    let k = config.num_arms;
    let m = config.reward_bound;
    let mut rng = rng(seed);
    let mut st = OloState::new(config).unwrap();
    let mut sums = vec![0.0; k];
    let mut mix = 0.0;
    let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-m..=m)).collect();
    for t in 0..rounds {
        let w = st.weights().to_vec();
        let g: Vec<f64> = match opponent {
            Opponent::Iid => (0..k).map(|_| rng.gen_range(-m..=m)).collect(),
            Opponent::Alternating => {
                let scale = if t == 0 {
                    0.5
                } else if t % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                v.iter().map(|x| x * scale).collect()
            }
            Opponent::GreedyAdversarial => {
                let mut best = (f64::NEG_INFINITY, Vec::new());
                for code in 0..(1u32 << k) {
                    let g: Vec<f64> = (0..k)
                        .map(|j| if code >> j & 1 == 1 { m } else { -m })
                        .collect();
                    let gain: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let lead = sums
                        .iter()
                        .zip(&g)
                        .map(|(s, x)| s + x)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let regret = lead - (mix + gain);
                    if regret > best.0 {
                        best = (regret, g);
                    }
                }
                best.1
            }
        };
        mix += w.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        for (s, x) in sums.iter_mut().zip(&g) {
            *s += x;
        }
        st.observe(config, &g).unwrap();
    }
    sums.iter().copied().fold(f64::NEG_INFINITY, f64::max) - mix
}
