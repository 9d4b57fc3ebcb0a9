//! Oblivious reward schedules. Every generator materialises the whole
//! sequence up front from its seed, so the schedule cannot depend on
//! anything the learner does.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dims, RewardFunction, RewardSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Every entry drawn independently from `U[0, 1]`.
    IidUniform,
    /// Two fixed random reward functions, alternating every `switch_period` episodes.
    Switching { switch_period: u64 },
    /// A sinusoidal profile over actions whose phase advances by
    /// `drift_rate` cycles per episode.
    Drifting { drift_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    #[serde(default)]
    pub seed: u64,
}

impl AdversarySpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AdversaryKind::Switching { switch_period: 0 } => {
                Err(Error::invalid("switch_period must be at least 1"))
            }
            AdversaryKind::Drifting { drift_rate }
                if !(drift_rate >= 0.0 && drift_rate.is_finite()) =>
            {
                Err(Error::invalid(format!(
                    "drift_rate must be >= 0, got {drift_rate}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn random_table<R: Rng>(dims: Dims, rng: &mut R) -> Vec<f64> {
    (0..dims.sa_entries()).map(|_| rng.gen::<f64>()).collect()
}

/// Materialises `episodes` reward functions for the given dimensions.
pub fn generate_rewards(
    spec: &AdversarySpec,
    dims: Dims,
    episodes: usize,
) -> Result<RewardSequence> {
    spec.validate()?;
    if episodes == 0 {
        return Err(Error::invalid("number of episodes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let functions = match spec.kind {
        AdversaryKind::IidUniform => (0..episodes)
            .map(|_| RewardFunction::new(dims, random_table(dims, &mut rng)))
            .collect::<Result<Vec<_>>>()?,
        AdversaryKind::Switching { switch_period } => {
            let first = RewardFunction::new(dims, random_table(dims, &mut rng))?;
            let second = RewardFunction::new(dims, random_table(dims, &mut rng))?;
            (0..episodes as u64)
                .map(|t| {
                    if (t / switch_period) % 2 == 0 {
                        first.clone()
                    } else {
                        second.clone()
                    }
                })
                .collect()
        }
        AdversaryKind::Drifting { drift_rate } => {
            let phases: Vec<f64> = (0..dims.horizon * dims.states)
                .map(|_| rng.gen::<f64>() * TAU)
                .collect();
            let actions = dims.actions as f64;
            (0..episodes)
                .map(|t| {
                    let shift = drift_rate * t as f64;
                    let values = (0..dims.sa_entries())
                        .map(|i| {
                            let a = (i % dims.actions) as f64;
                            let angle = TAU * (shift + a / actions) + phases[i / dims.actions];
                            (0.5 * (1.0 + angle.cos())).clamp(0.0, 1.0)
                        })
                        .collect();
                    RewardFunction::new(dims, values)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    RewardSequence::new(functions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims() -> Dims {
        Dims::new(3, 2, 3).unwrap()
    }

    #[test]
    fn switching_with_full_period_is_constant() {
        let spec = AdversarySpec {
            kind: AdversaryKind::Switching { switch_period: 20 },
            seed: 4,
        };
        let seq = generate_rewards(&spec, dims(), 20).unwrap();
        assert!(seq.episodes().iter().all(|r| r == seq.get(0)));
    }

    #[test]
    fn switching_alternates() {
        let spec = AdversarySpec {
            kind: AdversaryKind::Switching { switch_period: 3 },
            seed: 4,
        };
        let seq = generate_rewards(&spec, dims(), 12).unwrap();
        assert_eq!(seq.get(0), seq.get(2));
        assert_ne!(seq.get(2), seq.get(3));
        assert_eq!(seq.get(3), seq.get(5));
        assert_eq!(seq.get(0), seq.get(6));
    }

    #[test]
    fn zero_drift_is_constant() {
        let spec = AdversarySpec {
            kind: AdversaryKind::Drifting { drift_rate: 0.0 },
            seed: 1,
        };
        let seq = generate_rewards(&spec, dims(), 5).unwrap();
        assert!(seq.episodes().iter().all(|r| r == seq.get(0)));
    }

    #[test]
    fn drift_period_returns_to_start() {
        let spec = AdversarySpec {
            kind: AdversaryKind::Drifting { drift_rate: 0.25 },
            seed: 1,
        };
        let seq = generate_rewards(&spec, dims(), 5).unwrap();
        for (x, y) in seq.get(0).values().iter().zip(seq.get(4).values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_parameters() {
        let bad = AdversarySpec {
            kind: AdversaryKind::Switching { switch_period: 0 },
            seed: 0,
        };
        assert!(generate_rewards(&bad, dims(), 3).is_err());
        let bad = AdversarySpec {
            kind: AdversaryKind::Drifting { drift_rate: -1.0 },
            seed: 0,
        };
        assert!(generate_rewards(&bad, dims(), 3).is_err());
        assert!(serde_json::from_str::<AdversarySpec>(r#"{"kind":"bursty","seed":1}"#).is_err());
    }

    #[test]
    fn json_shape() {
        let spec: AdversarySpec =
            serde_json::from_str(r#"{"kind":"switching","switch_period":64,"seed":7}"#).unwrap();
        assert_eq!(spec.kind, AdversaryKind::Switching { switch_period: 64 });
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn iid_mean_is_one_half() {
        let d = Dims::new(10, 10, 10).unwrap();
        let spec = AdversarySpec {
            kind: AdversaryKind::IidUniform,
            seed: 2024,
        };
        let seq = generate_rewards(&spec, d, 1000).unwrap();
        let n = (d.sa_entries() * 1000) as f64;
        let mean = seq.summed().iter().sum::<f64>() / n;
        // 1e6 draws: standard error 2.9e-4
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    fn any_spec() -> impl Strategy<Value = AdversarySpec> {
        let kind = prop_oneof![
            Just(AdversaryKind::IidUniform),
            (1u64..50).prop_map(|p| AdversaryKind::Switching { switch_period: p }),
            (0.0f64..3.0).prop_map(|r| AdversaryKind::Drifting { drift_rate: r }),
        ];
        (kind, any::<u64>()).prop_map(|(kind, seed)| AdversarySpec { kind, seed })
    }

    proptest! {
        #[test]
        fn rewards_in_unit_interval_and_reproducible(spec in any_spec(), s in 1usize..4, a in 1usize..4, h in 1usize..4, t in 1usize..30) {
            let d = Dims::new(s, a, h).unwrap();
            let one = generate_rewards(&spec, d, t).unwrap();
            let two = generate_rewards(&spec, d, t).unwrap();
            prop_assert_eq!(one.len(), t);
            prop_assert!(one.episodes().iter().all(|r| r.values().iter().all(|x| (0.0..=1.0).contains(x))));
            prop_assert_eq!(one, two);
        }
    }
}
