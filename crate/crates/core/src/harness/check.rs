//! Invariant suite behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_seed_collecting, Algo, ExperimentConfig, Instance, LEARNER_INVARIANTS};
use crate::error::Result;
use crate::mdp::{best_static_policy, evaluate_policy, forward_occupancy, Dims, Policy};
use crate::olo::{regret_bound, OloConfig, OloState, OloStrategy};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, failure: Option<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed: failure.is_none(),
            detail: failure.unwrap_or_default(),
        }
    }
}

fn random_policy<R: Rng>(dims: Dims, rng: &mut R) -> Policy {
    let mut dist = Vec::with_capacity(dims.sa_entries());
    for _ in 0..dims.horizon * dims.states {
        let row: Vec<f64> = (0..dims.actions).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let z: f64 = row.iter().sum();
        let mut row: Vec<f64> = row.into_iter().map(|x| x / z).collect();
        let head: f64 = row[..dims.actions - 1].iter().sum();
        row[dims.actions - 1] = 1.0 - head;
        dist.extend(row);
    }
    Policy::new(dims, dist).expect("normalised rows")
}

/// Runs every invariant on the instance described by `config` (its `algo`
/// field is ignored; all learners are exercised).
pub fn run_invariant_suite(config: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let instance = Instance::from_config(config)?;
    let mdp = &instance.mdp;
    let dims = mdp.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(config.run_seed);
    let mut out = Vec::new();

    let policies: Vec<Policy> = (0..100).map(|_| random_policy(dims, &mut rng)).collect();

    let mut failure = None;
    'outer: for (pi, reward) in policies
        .iter()
        .zip(instance.rewards.episodes().iter().cycle())
    {
        let tables = evaluate_policy(mdp, pi, reward)?;
        for h in 0..dims.horizon {
            let cap = (dims.horizon - h) as f64;
            for s in 0..dims.states {
                let v = tables.v(h, s);
                if !(-1e-12..=cap + 1e-12).contains(&v) {
                    failure = Some(format!("V[{h}][{s}] = {v} outside [0, {cap}]"));
                    break 'outer;
                }
            }
        }
    }
    out.push(CheckOutcome::new("value_range", failure));

    let mut failure = None;
    for pi in &policies {
        let mu = forward_occupancy(mdp, pi)?;
        if let Some((h, slice)) = mu
            .chunks(dims.states)
            .enumerate()
            .find(|(_, c)| (c.iter().sum::<f64>() - 1.0).abs() > 1e-12)
        {
            failure = Some(format!(
                "stage {h} occupancy sums to {}",
                slice.iter().sum::<f64>()
            ));
            break;
        }
    }
    out.push(CheckOutcome::new("occupancy_normalized", failure));

    let (_, best) = best_static_policy(mdp, &instance.rewards)?;
    let mut failure = None;
    for pi in &policies {
        let mut total = 0.0;
        for r in instance.rewards.episodes() {
            total += evaluate_policy(mdp, pi, r)?.v(0, mdp.initial_state());
        }
        if total > best + 1e-9 {
            failure = Some(format!(
                "random policy scored {total} > hindsight optimum {best}"
            ));
            break;
        }
    }
    out.push(CheckOutcome::new("hindsight_maximality", failure));

    let mut weights_failure = None;
    let mut bound_failure = None;
    for strategy in [
        OloStrategy::PolynomialPotential,
        OloStrategy::ExponentialPotential,
        OloStrategy::AdaHedge,
    ] {
        for k in [2usize, 4] {
            let olo = OloConfig::new(k, 2.0, strategy)?;
            let mut st = OloState::new(&olo)?;
            for _ in 0..500 {
                let g: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..=2.0)).collect();
                st.observe(&olo, &g)?;
                let w = st.weights();
                if w.iter().any(|x| *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    weights_failure.get_or_insert(format!("{strategy:?} K={k}: weights {w:?}"));
                }
            }
            let bound = regret_bound(&olo, st.rounds());
            if st.regret() > bound {
                bound_failure.get_or_insert(format!(
                    "{strategy:?} K={k}: regret {} > bound {bound}",
                    st.regret()
                ));
            }
        }
    }
    out.push(CheckOutcome::new("olo_weights_valid", weights_failure));
    out.push(CheckOutcome::new("olo_regret_bound", bound_failure));

    let mut learner_failures: Vec<Option<String>> = vec![None; LEARNER_INVARIANTS.len()];
    let mut regret_failure = None;
    let mut determinism_failure = None;
    for algo in [Algo::ApoMvpPoly, Algo::ApoMvpExp, Algo::ApoMvpAdahedge] {
        let cfg = ExperimentConfig {
            algo,
            ..config.clone()
        };
        let seed = config.run_seed;
        let (trace, violations) = run_seed_collecting(&cfg, &instance, seed)?;
        for v in violations {
            let slot = LEARNER_INVARIANTS
                .iter()
                .position(|n| *n == v.invariant)
                .expect("known invariant");
            learner_failures[slot]
                .get_or_insert(format!("{algo} episode {}: {}", v.episode, v.detail));
        }
        let played: f64 = trace.rows.iter().map(|r| r.expected_value).sum();
        let last = trace.rows.last().map_or(0.0, |r| r.regret_cum);
        if (last - (best - played)).abs() > 1e-8 {
            regret_failure
                .get_or_insert(format!("{algo}: final regret {last} vs {}", best - played));
        }
        let (again, _) = run_seed_collecting(&cfg, &instance, seed)?;
        if again.rows != trace.rows {
            determinism_failure.get_or_insert(format!("{algo}: rerun produced a different trace"));
        }
    }
    for (name, failure) in LEARNER_INVARIANTS.iter().zip(learner_failures) {
        out.push(CheckOutcome::new(*name, failure));
    }
    out.push(CheckOutcome::new(
        "regret_matches_hindsight",
        regret_failure,
    ));
    out.push(CheckOutcome::new("determinism", determinism_failure));
    Ok(out)
}
