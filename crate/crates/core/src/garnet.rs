//! Garnet random MDPs: each `(s, a)` moves to `b` distinct uniformly chosen
//! successors with probabilities given by sorted uniform spacings.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::run_rng;
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::scalar::Real;

/// Stream id reserved for instance generation.
const GARNET_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarnetSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub seed: u64,
}

impl Default for GarnetSpec {
    fn default() -> Self {
        Self {
            num_states: 10,
            num_actions: 5,
            branching: 3,
            seed: 0,
        }
    }
}

pub fn gen_garnet<T: Real>(spec: &GarnetSpec, gamma: T) -> Result<TabularMdp<T>> {
    let (ns, na, b) = (spec.num_states, spec.num_actions, spec.branching);
    if ns == 0 || na == 0 {
        return Err(Error::invalid("garnet", "state and action counts must be positive"));
    }
    if b == 0 || b > ns {
        return Err(Error::invalid("branching", format!("{b} is outside [1, {ns}]")));
    }
    let mut rng = run_rng(spec.seed, GARNET_STREAM);
    let mut transitions = vec![T::zero(); ns * na * ns];
    let mut rewards = Vec::with_capacity(ns * na);
    let mut cuts = Vec::with_capacity(b + 1);
    for i in 0..ns * na {
        rewards.push(T::lit(rng.random::<f64>()));
        let succ = sample(&mut rng, ns, b).into_vec();
        cuts.clear();
        cuts.push(0.0);
        cuts.extend((1..b).map(|_| rng.random::<f64>()));
        cuts.push(1.0);
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        let row = &mut transitions[i * ns..(i + 1) * ns];
        for (j, &s2) in succ.iter().enumerate() {
            row[s2] = T::lit(cuts[j + 1] - cuts[j]);
        }
        // absorb rounding so the row sums to one
        let total: T = row.iter().copied().sum();
        let last = succ[b - 1];
        row[last] = row[last] + (T::one() - total);
    }
    TabularMdp::new(ns, na, gamma, transitions, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_branching_is_positive() {
        let spec = GarnetSpec {
            num_states: 6,
            num_actions: 2,
            branching: 6,
            seed: 3,
        };
        let mdp = gen_garnet::<f64>(&spec, 0.9).unwrap();
        assert!(mdp.transitions().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = GarnetSpec::default();
        let a = gen_garnet::<f64>(&spec, 0.9).unwrap();
        let b = gen_garnet::<f64>(&spec, 0.9).unwrap();
        assert_eq!(
            serde_json::to_string(&a.to_json()).unwrap(),
            serde_json::to_string(&b.to_json()).unwrap()
        );
        let other = gen_garnet::<f64>(&GarnetSpec { seed: 1, ..spec }, 0.9).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn branching_range_is_checked() {
        let spec = GarnetSpec {
            branching: 11,
            ..GarnetSpec::default()
        };
        assert!(gen_garnet::<f64>(&spec, 0.9).is_err());
    }
}
