use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dims, RewardFunction, RewardSequence, TabularMdp};
use crate::error::{Error, Result};

/// JSON exchange format for an instance: the MDP plus, optionally, the
/// reward schedule. Nested arrays are `transitions[H-1][S][A][S]` and
/// `rewards[T][H][S][A]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub s1: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<Vec<Vec<Vec<f64>>>>>,
}

fn flatten4(nested: &[Vec<Vec<Vec<f64>>>], shape: [usize; 4], what: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid(format!("{what} does not have shape {shape:?}"));
    if nested.len() != shape[0] {
        return Err(bad());
    }
    let mut flat = Vec::with_capacity(shape.iter().product());
    for a in nested {
        if a.len() != shape[1] {
            return Err(bad());
        }
        for b in a {
            if b.len() != shape[2] {
                return Err(bad());
            }
            for c in b {
                if c.len() != shape[3] {
                    return Err(bad());
                }
                flat.extend_from_slice(c);
            }
        }
    }
    Ok(flat)
}

fn unflatten4(flat: &[f64], shape: [usize; 4]) -> Vec<Vec<Vec<Vec<f64>>>> {
    let [d0, d1, d2, d3] = shape;
    (0..d0)
        .map(|i| {
            (0..d1)
                .map(|j| {
                    (0..d2)
                        .map(|k| {
                            let off = ((i * d1 + j) * d2 + k) * d3;
                            flat[off..off + d3].to_vec()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

impl InstanceDocument {
    pub fn from_parts(mdp: &TabularMdp, rewards: Option<&RewardSequence>) -> Self {
        let d = mdp.dims();
        InstanceDocument {
            states: d.states,
            actions: d.actions,
            horizon: d.horizon,
            s1: mdp.initial_state(),
            transitions: unflatten4(
                mdp.transitions(),
                [d.horizon - 1, d.states, d.actions, d.states],
            ),
            rewards: rewards.map(|seq| {
                seq.episodes()
                    .iter()
                    .map(|r| unflatten4(r.values(), [1, d.horizon, d.states, d.actions]).remove(0))
                    .collect()
            }),
        }
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.states, self.actions, self.horizon)
    }

    pub fn mdp(&self) -> Result<TabularMdp> {
        let d = self.dims()?;
        let flat = flatten4(
            &self.transitions,
            [d.horizon - 1, d.states, d.actions, d.states],
            "transitions",
        )?;
        TabularMdp::new(d, flat, self.s1)
    }

    /// The reward schedule, if the document carries one.
    pub fn reward_sequence(&self) -> Result<Option<RewardSequence>> {
        let d = self.dims()?;
        let Some(rewards) = &self.rewards else {
            return Ok(None);
        };
        let flat = flatten4(
            rewards,
            [rewards.len(), d.horizon, d.states, d.actions],
            "rewards",
        )?;
        let episodes = flat
            .chunks(d.sa_entries())
            .map(|c| RewardFunction::new(d, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        RewardSequence::new(episodes).map(Some)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_instance(
        seed: u64,
        s: usize,
        a: usize,
        h: usize,
        t: usize,
    ) -> (TabularMdp, RewardSequence) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Dims::new(s, a, h).unwrap();
        let mut p = Vec::new();
        for _ in 0..(h - 1) * s * a {
            let row: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 0.05).collect();
            let z: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|x| x / z).collect();
            // force an exact unit sum so validation never depends on rounding
            let head: f64 = row[..s - 1].iter().sum();
            row[s - 1] = (1.0 - head).max(0.0);
            p.extend(row);
        }
        let mdp = TabularMdp::new(d, p, rng.gen_range(0..s)).unwrap();
        let rewards = (0..t)
            .map(|_| {
                RewardFunction::new(d, (0..d.sa_entries()).map(|_| rng.gen()).collect()).unwrap()
            })
            .collect();
        (mdp, RewardSequence::new(rewards).unwrap())
    }

    #[test]
    fn top_level_keys() {
        let (mdp, seq) = random_instance(1, 2, 2, 2, 3);
        let json = InstanceDocument::from_parts(&mdp, Some(&seq))
            .to_json()
            .unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["S", "A", "H", "s1", "transitions", "rewards"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(value["transitions"].as_array().unwrap().len(), 1);
        assert_eq!(value["rewards"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn single_stage_has_no_transitions() {
        let (mdp, _) = random_instance(2, 3, 2, 1, 1);
        let doc = InstanceDocument::from_parts(&mdp, None);
        assert!(doc.transitions.is_empty());
        assert!(!doc.to_json().unwrap().contains("rewards"));
        assert_eq!(doc.mdp().unwrap(), mdp);
    }

    #[test]
    fn ragged_arrays_are_rejected() {
        let (mdp, _) = random_instance(3, 2, 2, 3, 1);
        let mut doc = InstanceDocument::from_parts(&mdp, None);
        doc.transitions[1][0].pop();
        assert!(matches!(doc.mdp(), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(seed in any::<u64>(), s in 1usize..4, a in 1usize..4, h in 1usize..4, t in 1usize..4) {
            let (mdp, seq) = random_instance(seed, s, a, h, t);
            let json = InstanceDocument::from_parts(&mdp, Some(&seq)).to_json().unwrap();
            let back = InstanceDocument::from_json(&json).unwrap();
            let mdp2 = back.mdp().unwrap();
            let seq2 = back.reward_sequence().unwrap().unwrap();
            prop_assert!(mdp.transitions().iter().zip(mdp2.transitions()).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert_eq!(mdp2.initial_state(), mdp.initial_state());
            for (r, r2) in seq.episodes().iter().zip(seq2.episodes()) {
                prop_assert!(r.values().iter().zip(r2.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
