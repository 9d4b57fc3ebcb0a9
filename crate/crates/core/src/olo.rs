//! Online linear optimization over the probability simplex.
//!
//! A strategy picks weights `w_t` over `K` arms, then observes a signed reward
//! vector `g_t` in `[-M, M]^K`. Its regret after `T` rounds is
//! `max_k sum_t g_{t,k} - sum_t <w_t, g_t>`, and each strategy here keeps it
//! below `2 M B_{T,K}` (see [`regret_bound`]).
//!
//! All three strategies only need per-arm cumulative rewards plus two scalar
//! accumulators, so [`OloState`] is O(K) regardless of history length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OloStrategy {
    /// `Phi(x) = max(x, 0)^(2 ln K)` applied to cumulative regrets.
    PolynomialPotential,
    /// Exponential weights with `eta_t = (1/M) sqrt(ln K / t)`.
    ExponentialPotential,
    /// Exponential weights with a learning rate tuned on the observed
    /// squared reward magnitudes.
    AdaHedge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OloConfig {
    pub num_arms: usize,
    /// Scale `M` of the rewards; sets the exponential learning rate and the
    /// regret guarantee.
    pub reward_bound: f64,
    /// Largest `|g_k|` accepted by [`OloState::observe`]. Equal to
    /// `reward_bound` unless widened with [`OloConfig::with_input_bound`].
    pub input_bound: f64,
    pub strategy: OloStrategy,
}

impl OloConfig {
    pub fn new(num_arms: usize, reward_bound: f64, strategy: OloStrategy) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::invalid("OLO needs at least one arm"));
        }
        if !(reward_bound > 0.0 && reward_bound.is_finite()) {
            return Err(Error::invalid(format!(
                "OLO reward bound must be positive, got {reward_bound}"
            )));
        }
        Ok(OloConfig {
            num_arms,
            reward_bound,
            input_bound: reward_bound,
            strategy,
        })
    }

    /// Accepts inputs up to `bound >= reward_bound` in magnitude. The
    /// guarantee of [`regret_bound`] only covers inputs within `reward_bound`.
    pub fn with_input_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= self.reward_bound && bound.is_finite()) {
            return Err(Error::invalid(format!(
                "input bound {bound} must be at least the reward bound {}",
                self.reward_bound
            )));
        }
        self.input_bound = bound;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OloState {
    rounds: u64,
    cumulative_rewards: Vec<f64>,
    cumulative_mix_reward: f64,
    squared_max_sum: f64,
    weights: Vec<f64>,
}

impl OloState {
    /// Empty history with uniform weights.
    pub fn new(config: &OloConfig) -> Result<Self> {
        if config.num_arms == 0 {
            return Err(Error::invalid("OLO needs at least one arm"));
        }
        let k = config.num_arms;
        Ok(OloState {
            rounds: 0,
            cumulative_rewards: vec![0.0; k],
            cumulative_mix_reward: 0.0,
            squared_max_sum: 0.0,
            weights: vec![1.0 / k as f64; k],
        })
    }

    /// Number of observed rounds.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Per-arm sums `G_k = sum_t g_{t,k}`.
    pub fn cumulative_rewards(&self) -> &[f64] {
        &self.cumulative_rewards
    }

    /// `sum_t <w_t, g_t>`.
    pub fn cumulative_mix_reward(&self) -> f64 {
        self.cumulative_mix_reward
    }

    /// `sum_t max_k g_{t,k}^2`.
    pub fn squared_max_sum(&self) -> f64 {
        self.squared_max_sum
    }

    /// Weights to play in the next round.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Regret against the best single arm so far.
    pub fn regret(&self) -> f64 {
        let best = self
            .cumulative_rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.cumulative_mix_reward
    }

    /// Reveals `g` for the round just played with [`weights`](Self::weights)
    /// and moves to the next round.
    pub fn observe(&mut self, config: &OloConfig, g: &[f64]) -> Result<()> {
        if g.len() != self.cumulative_rewards.len() {
            return Err(Error::invalid(format!(
                "reward vector has {} entries, expected {}",
                g.len(),
                self.cumulative_rewards.len()
            )));
        }
        let m = config.input_bound;
        if let Some(bad) = g.iter().find(|x| x.is_nan() || x.abs() > m) {
            return Err(Error::OutOfRange(format!(
                "OLO reward {bad} exceeds the configured bound {m}"
            )));
        }
        let mix: f64 = self.weights.iter().zip(g).map(|(w, x)| w * x).sum();
        self.cumulative_mix_reward += mix;
        for (acc, x) in self.cumulative_rewards.iter_mut().zip(g) {
            *acc += x;
        }
        self.squared_max_sum += g.iter().map(|x| x * x).fold(0.0, f64::max);
        self.rounds += 1;
        self.weights = compute_weights(self, config);
        Ok(())
    }
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Softmax of `eta * G` with the maximum subtracted before exponentiation.
fn exponential_weights(cumulative: &[f64], eta: f64) -> Vec<f64> {
    let top = cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = cumulative.iter().map(|g| (eta * (g - top)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Closed-form weights of `config.strategy` for the history summarised in `state`.
pub fn compute_weights(state: &OloState, config: &OloConfig) -> Vec<f64> {
    let k = state.cumulative_rewards.len();
    if k == 1 {
        return vec![1.0];
    }
    if state.rounds == 0 {
        return uniform(k);
    }
    let ln_k = (k as f64).ln();
    match config.strategy {
        OloStrategy::PolynomialPotential => {
            let regrets: Vec<f64> = state
                .cumulative_rewards
                .iter()
                .map(|g| (g - state.cumulative_mix_reward).max(0.0))
                .collect();
            let top = regrets.iter().copied().fold(0.0, f64::max);
            if top <= 0.0 {
                return uniform(k);
            }
            // Normalising by the largest regret leaves the ratios unchanged.
            let exponent = 2.0 * ln_k;
            let mut w: Vec<f64> = regrets.iter().map(|r| (r / top).powf(exponent)).collect();
            let z: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= z);
            w
        }
        OloStrategy::ExponentialPotential => {
            let eta = (ln_k / state.rounds as f64).sqrt() / config.reward_bound;
            exponential_weights(&state.cumulative_rewards, eta)
        }
        OloStrategy::AdaHedge => {
            if state.squared_max_sum <= 0.0 {
                return uniform(k);
            }
            let scale = f64::max(4.0, 2f64.powf(-0.25) * ln_k.sqrt());
            let eta = scale / state.squared_max_sum.sqrt();
            exponential_weights(&state.cumulative_rewards, eta)
        }
    }
}

/// `2 M B_{T,K}`, the regret guarantee of the configured strategy over `T` rounds.
pub fn regret_bound(config: &OloConfig, rounds: u64) -> f64 {
    if config.num_arms <= 1 {
        return 0.0;
    }
    let t_ln_k = rounds as f64 * (config.num_arms as f64).ln();
    let b = match config.strategy {
        OloStrategy::PolynomialPotential => (6.0 * t_ln_k).sqrt(),
        OloStrategy::ExponentialPotential => t_ln_k.sqrt(),
        OloStrategy::AdaHedge => 4.0 * t_ln_k.sqrt(),
    };
    2.0 * config.reward_bound * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [OloStrategy; 3] = [
        OloStrategy::PolynomialPotential,
        OloStrategy::ExponentialPotential,
        OloStrategy::AdaHedge,
    ];

    fn cfg(k: usize, m: f64, strategy: OloStrategy) -> OloConfig {
        OloConfig::new(k, m, strategy).unwrap()
    }

    #[test]
    fn init_is_uniform_with_empty_accumulators() {
        let c = cfg(4, 1.0, OloStrategy::PolynomialPotential);
        let st = OloState::new(&c).unwrap();
        assert_eq!(st.weights(), &[0.25; 4]);
        assert_eq!(st.rounds(), 0);
        assert_eq!(st.cumulative_rewards(), &[0.0; 4]);
        assert_eq!(st.cumulative_mix_reward(), 0.0);
        assert_eq!(st.squared_max_sum(), 0.0);
        assert_eq!(
            OloState::new(&cfg(1, 1.0, OloStrategy::AdaHedge))
                .unwrap()
                .weights(),
            &[1.0]
        );
    }

    #[test]
    fn zero_arms_or_bad_bound_rejected() {
        assert!(OloConfig::new(0, 1.0, OloStrategy::AdaHedge).is_err());
        assert!(OloConfig::new(2, 0.0, OloStrategy::AdaHedge).is_err());
    }

    #[test]
    fn observe_accumulates_with_weights_in_force() {
        let c = cfg(2, 1.0, OloStrategy::ExponentialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[1.0, 0.0]).unwrap();
        assert_eq!(st.cumulative_rewards(), &[1.0, 0.0]);
        assert_eq!(st.cumulative_mix_reward(), 0.5);
        assert_eq!(st.rounds(), 1);
    }

    #[test]
    fn zero_vector_only_advances_the_clock() {
        for s in ALL {
            let c = cfg(3, 1.0, s);
            let mut st = OloState::new(&c).unwrap();
            st.observe(&c, &[0.0; 3]).unwrap();
            assert_eq!(st.rounds(), 1);
            assert_eq!(st.cumulative_rewards(), &[0.0; 3]);
            assert_eq!(st.cumulative_mix_reward(), 0.0);
            assert_eq!(st.weights(), &[1.0 / 3.0; 3]);
        }
    }

    #[test]
    fn opposite_vectors_cancel() {
        let c = cfg(2, 1.0, OloStrategy::ExponentialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[1.0, -1.0]).unwrap();
        st.observe(&c, &[-1.0, 1.0]).unwrap();
        assert_eq!(st.cumulative_rewards(), &[0.0, 0.0]);
    }

    #[test]
    fn out_of_range_reward_is_rejected() {
        let c = cfg(2, 1.0, OloStrategy::PolynomialPotential);
        let mut st = OloState::new(&c).unwrap();
        assert!(matches!(
            st.observe(&c, &[1.5, 0.0]),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            st.observe(&c, &[f64::NAN, 0.0]),
            Err(Error::OutOfRange(_))
        ));
        assert_eq!(st.rounds(), 0);
    }

    #[test]
    fn widened_input_bound() {
        let c = cfg(2, 1.0, OloStrategy::ExponentialPotential)
            .with_input_bound(3.0)
            .unwrap();
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[2.5, -3.0]).unwrap();
        assert!(st.observe(&c, &[3.5, 0.0]).is_err());
        assert!(cfg(2, 2.0, OloStrategy::AdaHedge)
            .with_input_bound(1.0)
            .is_err());
    }

    #[test]
    fn polynomial_single_positive_regret_takes_all_mass() {
        let c = cfg(2, 1.0, OloStrategy::PolynomialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[1.0, 0.0]).unwrap();
        // regrets (0.5, -0.5): potentials (0.5^(2 ln 2), 0)
        assert_eq!(st.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn polynomial_nonpositive_regrets_fall_back_to_uniform() {
        let c = cfg(2, 1.0, OloStrategy::PolynomialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[0.5, 0.5]).unwrap();
        assert_eq!(st.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn exponential_closed_form_two_arms() {
        let c = cfg(2, 1.0, OloStrategy::ExponentialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[1.0, 0.0]).unwrap();
        let e = 2f64.ln().sqrt().exp();
        let expected = e / (e + 1.0);
        assert!((st.weights()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn exponential_equal_sums_are_uniform() {
        let c = cfg(3, 2.0, OloStrategy::ExponentialPotential);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[1.5, 1.5, 1.5]).unwrap();
        st.observe(&c, &[-0.5, -0.5, -0.5]).unwrap();
        for w in st.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn adahedge_learning_rate() {
        let c = cfg(2, 1.0, OloStrategy::AdaHedge);
        let mut st = OloState::new(&c).unwrap();
        st.observe(&c, &[0.5, -1.0]).unwrap();
        assert_eq!(st.squared_max_sum(), 1.0);
        // eta = 4 / 1, G = (0.5, -1)
        let expected = 1.0 / (1.0 + (-4.0f64 * 1.5).exp());
        assert!((st.weights()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn exponential_is_stable_for_large_sums() {
        let c = cfg(3, 1.0, OloStrategy::ExponentialPotential);
        let st = OloState {
            rounds: 1,
            cumulative_rewards: vec![1e4, 1e4 - 1.0, -1e4],
            cumulative_mix_reward: 0.0,
            squared_max_sum: 1.0,
            weights: uniform(3),
        };
        let w = compute_weights(&st, &c);
        assert!(w.iter().all(|x| x.is_finite()));
        let eta = 3f64.ln().sqrt();
        let expected = 1.0 / (1.0 + (-eta).exp() + (-2e4 * eta).exp());
        assert!((w[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn bound_values() {
        let p = cfg(2, 1.0, OloStrategy::PolynomialPotential);
        assert!((regret_bound(&p, 6) - 2.0 * 6.0 * 2f64.ln().sqrt()).abs() < 1e-12);
        let a = cfg(4, 2.0, OloStrategy::AdaHedge);
        let expected = 2.0 * 2.0 * 4.0 * (100.0 * 4f64.ln()).sqrt();
        assert!((regret_bound(&a, 100) - expected).abs() < 1e-12);
        let e = cfg(3, 1.0, OloStrategy::ExponentialPotential);
        assert!((regret_bound(&e, 10) - 2.0 * (10.0 * 3f64.ln()).sqrt()).abs() < 1e-12);
        for s in ALL {
            assert_eq!(regret_bound(&cfg(1, 3.0, s), 1000), 0.0);
        }
    }

    fn history() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
        (1usize..7).prop_flat_map(|k| {
            (
                Just(k),
                prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, k), 0..40),
            )
        })
    }

    proptest! {
        #[test]
        fn weights_are_distributions((k, gs) in history(), pick in 0usize..3) {
            let c = cfg(k, 1.0, ALL[pick]);
            let mut st = OloState::new(&c).unwrap();
            for g in &gs {
                st.observe(&c, g).unwrap();
                let w = st.weights();
                prop_assert!(w.iter().all(|x| *x >= 0.0 && x.is_finite()));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (gk, _) in st.cumulative_rewards().iter().zip(w) {
                    prop_assert!(gk.abs() <= st.rounds() as f64 * c.reward_bound + 1e-9);
                }
            }
        }

        #[test]
        fn shift_invariant_potentials((k, gs) in history(), shift in -1.0f64..1.0, pick in 0usize..2) {
            let c = cfg(k, 2.0, ALL[pick]);
            let mut plain = OloState::new(&c).unwrap();
            let mut shifted = OloState::new(&c).unwrap();
            for g in &gs {
                plain.observe(&c, g).unwrap();
                let moved: Vec<f64> = g.iter().map(|x| x + shift).collect();
                shifted.observe(&c, &moved).unwrap();
                for (a, b) in plain.weights().iter().zip(shifted.weights()) {
                    prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                }
            }
        }
    }
}
