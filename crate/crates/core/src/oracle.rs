//! Exact solvers used as ground truth: value iteration, exact PMD and the
//! noise-free one-step TD-PMD recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_abs_diff;
use crate::mdp::{bellman_q, greedy_policy, max_values, optimal_bellman_q, policy_value, Policy, QVec, TabularMdp, VVec};
use crate::mirror::MirrorMap;
use crate::scalar::Real;

/// Default value-iteration accuracy.
pub const DEFAULT_VI_TOL: f64 = 1e-10;

/// Output of [`value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution<T> {
    pub q_star: QVec<T>,
    pub v_star: VVec<T>,
    /// Greedy with respect to `q_star`, lowest index on ties.
    pub pi_star: Policy<T>,
    pub iterations: usize,
    /// `‖F Q* - Q*‖∞` at the returned iterate.
    pub residual: T,
}

/// Solution JSON, with `pi_star` as one row per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionJson {
    pub q_star: Vec<f64>,
    pub v_star: Vec<f64>,
    pub pi_star: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
}

impl<T: Real> OptimalSolution<T> {
    pub fn to_json(&self) -> SolutionJson {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        SolutionJson {
            q_star: f(&self.q_star),
            v_star: f(&self.v_star),
            pi_star: self.pi_star.rows().iter().map(|r| f(r)).collect(),
            residual: self.residual.to_f64_lossy(),
            iterations: self.iterations,
        }
    }
}

/// Iterates `Q <- F Q` from zero until `‖FQ - Q‖∞ <= tol (1-γ) / (2γ)`,
/// which puts the returned iterate within `tol` of `Q*`.
pub fn value_iteration<T: Real>(mdp: &TabularMdp<T>, tol: T) -> Result<OptimalSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let g = mdp.gamma();
    let threshold = if g == T::zero() {
        T::infinity()
    } else {
        tol * (T::one() - g) / (T::lit(2.0) * g)
    };
    let mut q = vec![T::zero(); mdp.num_pairs()];
    let mut iterations = 0;
    loop {
        let next = optimal_bellman_q(mdp, &q);
        let step = max_abs_diff(&next, &q);
        q = next;
        iterations += 1;
        if step <= threshold {
            break;
        }
    }
    let residual = max_abs_diff(&optimal_bellman_q(mdp, &q), &q);
    let v_star = max_values(mdp.num_actions(), &q);
    let pi_star = greedy_policy(mdp.num_actions(), &q);
    Ok(OptimalSolution {
        q_star: q,
        v_star,
        pi_star,
        iterations,
        residual,
    })
}

/// First `n + 1` value-iteration iterates `Q_0 = 0, ..., Q_n`.
pub fn value_iteration_iterates<T: Real>(mdp: &TabularMdp<T>, n: usize) -> Vec<QVec<T>> {
    let mut out = vec![vec![T::zero(); mdp.num_pairs()]];
    for _ in 0..n {
        let next = optimal_bellman_q(mdp, out.last().expect("nonempty"));
        out.push(next);
    }
    out
}

/// PMD with the true critic: `π_{k+1} = pmd_step(π_k, Q^{π_k}, η)`.
/// Returns `(π_k, Q^{π_k})` for `k = 0..=K`.
pub fn exact_pmd<T: Real>(
    mdp: &TabularMdp<T>,
    map: &MirrorMap<T>,
    eta: T,
    k_iters: usize,
    pi0: &Policy<T>,
) -> Result<Vec<(Policy<T>, QVec<T>)>> {
    let mut out = Vec::with_capacity(k_iters + 1);
    let mut pi = pi0.clone();
    for k in 0..=k_iters {
        let (_, q) = policy_value(mdp, &pi)?;
        let next = if k < k_iters {
            Some(map.pmd_update(&pi, &q, eta)?)
        } else {
            None
        };
        out.push((pi, q));
        match next {
            Some(p) => pi = p,
            None => break,
        }
    }
    Ok(out)
}

/// Noise-free TD-PMD: `π_{k+1} = pmd_step(π_k, Q^k, η)`, `Q^{k+1} = F^{π_{k+1}} Q^k`,
/// from `Q^0 = 0`. Returns `(π_k, Q^k)` for `k = 0..=K`.
pub fn exact_td_pmd<T: Real>(
    mdp: &TabularMdp<T>,
    map: &MirrorMap<T>,
    eta: T,
    k_iters: usize,
    pi0: &Policy<T>,
) -> Result<Vec<(Policy<T>, QVec<T>)>> {
    let mut out = Vec::with_capacity(k_iters + 1);
    let mut pi = pi0.clone();
    let mut q = vec![T::zero(); mdp.num_pairs()];
    for k in 0..=k_iters {
        if k == k_iters {
            out.push((pi, q));
            break;
        }
        let next_pi = map.pmd_update(&pi, &q, eta)?;
        let next_q = bellman_q(mdp, &next_pi, &q);
        out.push((pi, q));
        pi = next_pi;
        q = next_q;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_optimum() {
        let mdp = TabularMdp::<f64>::new(1, 1, 0.5, vec![1.0], vec![1.0]).unwrap();
        let sol = value_iteration(&mdp, 1e-10).unwrap();
        assert!((sol.q_star[0] - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_reward_stops_after_one_sweep() {
        let mdp = TabularMdp::new(2, 2, 0.9, vec![0.5; 8], vec![0.0; 4]).unwrap();
        let sol = value_iteration(&mdp, 1e-10).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.q_star, vec![0.0; 4]);
    }

    #[test]
    fn zero_step_pmd_is_constant() {
        let mdp = TabularMdp::new(2, 2, 0.9, vec![0.5; 8], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let pi0 = Policy::uniform(2, 2);
        let seq = exact_pmd(&mdp, &MirrorMap::negative_entropy(), 0.0, 5, &pi0).unwrap();
        assert_eq!(seq.len(), 6);
        assert!(seq.iter().all(|(p, _)| *p == pi0));
    }
}
