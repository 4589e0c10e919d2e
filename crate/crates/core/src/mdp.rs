//! Finite MDPs, policies, Bellman operators, transition matrices and closed-form
//! policy evaluation.
//!
//! Every vector over state-action pairs is laid out state-major: the entry for
//! `(s, a)` lives at `s * num_actions + a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Action-value vector of length `|S||A|`, state-major.
pub type QVec<T> = Vec<T>;
/// State-value vector of length `|S|`.
pub type VVec<T> = Vec<T>;
/// Probability vector over states.
pub type StateDist<T> = Vec<T>;
/// Probability vector over state-action pairs, state-major.
pub type StateActionDist<T> = Vec<T>;

/// Finite discounted MDP with rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    num_states: usize,
    num_actions: usize,
    gamma: T,
    /// `P(s'|s,a)` at `(s * |A| + a) * |S| + s'`.
    transitions: Vec<T>,
    rewards: Vec<T>,
}

fn check_row<T: Real>(row: &[T], tol: f64, field: impl Fn() -> String) -> Result<()> {
    let mut sum = T::zero();
    for &p in row {
        if !p.is_finite() || p < T::zero() {
            return Err(Error::invalid(field(), format!("entry {p} is not a probability")));
        }
        sum = sum + p;
    }
    if (sum - T::one()).abs().to_f64_lossy() > tol {
        return Err(Error::invalid(field(), format!("row sums to {sum}, not 1")));
    }
    Ok(())
}

impl<T: Real> TabularMdp<T> {
    /// Builds a validated MDP from flat state-major tables.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: T,
        transitions: Vec<T>,
        rewards: Vec<T>,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid("num_states", "must be positive"));
        }
        if num_actions == 0 {
            return Err(Error::invalid("num_actions", "must be positive"));
        }
        if !(gamma >= T::zero() && gamma < T::one()) {
            return Err(Error::invalid("gamma", format!("{gamma} is outside [0, 1)")));
        }
        let n = num_states * num_actions;
        if transitions.len() != n * num_states {
            return Err(Error::invalid(
                "transitions",
                format!("expected {} entries, got {}", n * num_states, transitions.len()),
            ));
        }
        if rewards.len() != n {
            return Err(Error::invalid(
                "rewards",
                format!("expected {n} entries, got {}", rewards.len()),
            ));
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let i = s * num_actions + a;
                check_row(&transitions[i * num_states..(i + 1) * num_states], T::INPUT_TOL, || {
                    format!("transitions[{s}][{a}]")
                })?;
                let r = rewards[i];
                if !(r >= T::zero() && r <= T::one()) {
                    return Err(Error::invalid(
                        format!("rewards[{s}][{a}]"),
                        format!("{r} is outside [0, 1]"),
                    ));
                }
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            transitions,
            rewards,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `|S||A|`.
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `1 / (1 - γ)`, the range bound of every value function.
    pub fn value_bound(&self) -> T {
        T::one() / (T::one() - self.gamma)
    }

    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    /// Next-state distribution `P(·|s,a)`.
    pub fn next_dist(&self, s: usize, a: usize) -> &[T] {
        let i = self.index(s, a) * self.num_states;
        &self.transitions[i..i + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.rewards[self.index(s, a)]
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[T] {
        &self.transitions
    }

    /// Same dynamics with a different discount factor.
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            gamma,
            self.transitions.clone(),
            self.rewards.clone(),
        )
    }

    pub fn to_json(&self) -> MdpJson {
        let (ns, na) = (self.num_states, self.num_actions);
        MdpJson {
            num_states: ns,
            num_actions: na,
            gamma: self.gamma.to_f64_lossy(),
            transitions: (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| self.next_dist(s, a).iter().map(|p| p.to_f64_lossy()).collect())
                        .collect()
                })
                .collect(),
            rewards: (0..ns)
                .map(|s| (0..na).map(|a| self.reward(s, a).to_f64_lossy()).collect())
                .collect(),
        }
    }

    pub fn from_json(j: &MdpJson) -> Result<Self> {
        let (ns, na) = (j.num_states, j.num_actions);
        if j.transitions.len() != ns {
            return Err(Error::invalid("transitions", format!("expected {ns} state rows")));
        }
        if j.rewards.len() != ns {
            return Err(Error::invalid("rewards", format!("expected {ns} state rows")));
        }
        let mut transitions = Vec::with_capacity(ns * na * ns);
        let mut rewards = Vec::with_capacity(ns * na);
        for s in 0..ns {
            if j.transitions[s].len() != na {
                return Err(Error::invalid(format!("transitions[{s}]"), format!("expected {na} actions")));
            }
            if j.rewards[s].len() != na {
                return Err(Error::invalid(format!("rewards[{s}]"), format!("expected {na} actions")));
            }
            for a in 0..na {
                let row = &j.transitions[s][a];
                if row.len() != ns {
                    return Err(Error::invalid(
                        format!("transitions[{s}][{a}]"),
                        format!("expected {ns} successor probabilities"),
                    ));
                }
                transitions.extend(row.iter().map(|&p| T::lit(p)));
                rewards.push(T::lit(j.rewards[s][a]));
            }
        }
        Self::new(ns, na, T::lit(j.gamma), transitions, rewards)
    }
}

/// JSON form of an MDP; `transitions` is indexed `[s][a][s']`, `rewards` `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpJson {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

/// Row-stochastic policy `π(a|s)`, stored state-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    num_states: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Real> Policy<T> {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<T>) -> Result<Self> {
        Self::with_tolerance(num_states, num_actions, probs, T::INPUT_TOL)
    }

    /// Validates against the looser tolerance used for computed outputs.
    pub(crate) fn computed(num_states: usize, num_actions: usize, probs: Vec<T>) -> Result<Self> {
        Self::with_tolerance(num_states, num_actions, probs, T::OUTPUT_TOL)
    }

    fn with_tolerance(num_states: usize, num_actions: usize, probs: Vec<T>, tol: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid("policy", "empty state or action space"));
        }
        if probs.len() != num_states * num_actions {
            return Err(Error::invalid(
                "policy",
                format!("expected {} entries, got {}", num_states * num_actions, probs.len()),
            ));
        }
        for s in 0..num_states {
            check_row(&probs[s * num_actions..(s + 1) * num_actions], tol, || format!("policy[{s}]"))?;
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = T::one() / T::count(num_actions);
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    /// Deterministic policy playing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![T::zero(); actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::invalid(format!("policy[{s}]"), format!("action {a} out of range")));
            }
            probs[s * num_actions + a] = T::one();
        }
        Self::new(actions.len(), num_actions, probs)
    }

    /// Assembles a policy from rows already known to be on the simplex.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != na) {
            return Err(Error::invalid("policy", "ragged rows"));
        }
        Self::computed(ns, na, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[s * self.num_actions + a]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Smallest entry `min_{s,a} π(a|s)`.
    pub fn min_prob(&self) -> T {
        self.probs.iter().fold(T::infinity(), |m, &p| m.min(p))
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.num_states).map(|s| self.row(s).to_vec()).collect()
    }
}

fn check_policy_shape<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>) {
    assert_eq!(
        (pi.num_states(), pi.num_actions()),
        (mdp.num_states(), mdp.num_actions()),
        "policy shape does not match the MDP"
    );
}

/// Greedy actions of a Q-vector, lowest index on ties.
pub fn greedy_actions<T: Real>(num_actions: usize, q: &[T]) -> Vec<usize> {
    q.chunks(num_actions)
        .map(|row| {
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Deterministic greedy policy of `q`, lowest index on ties.
pub fn greedy_policy<T: Real>(num_actions: usize, q: &[T]) -> Policy<T> {
    Policy::deterministic(num_actions, &greedy_actions(num_actions, q)).expect("greedy actions are in range")
}

/// `⟨π(·|s), Q(s,·)⟩` for every state.
pub fn state_values<T: Real>(pi: &Policy<T>, q: &[T]) -> VVec<T> {
    let na = pi.num_actions();
    (0..pi.num_states())
        .map(|s| dot(pi.row(s), &q[s * na..(s + 1) * na]))
        .collect()
}

/// `max_a Q(s,a)` for every state.
pub fn max_values<T: Real>(num_actions: usize, q: &[T]) -> VVec<T> {
    q.chunks(num_actions)
        .map(|row| row.iter().fold(T::neg_infinity(), |m, &v| m.max(v)))
        .collect()
}

/// `r + γ P v`, lifting a state function to state-action pairs.
pub fn q_from_v<T: Real>(mdp: &TabularMdp<T>, v: &[T]) -> QVec<T> {
    let g = mdp.gamma();
    (0..mdp.num_states())
        .flat_map(|s| (0..mdp.num_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.reward(s, a) + g * dot(mdp.next_dist(s, a), v))
        .collect()
}

/// `r^π(s) = Σ_a π(a|s) r(s,a)`.
pub fn policy_reward<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> VVec<T> {
    state_values(pi, mdp.rewards())
}

/// Closed-form `(V^π, Q^π)` from the linear system `(I - γ P_S^π) V = r^π`.
pub fn policy_value<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> Result<(VVec<T>, QVec<T>)> {
    check_policy_shape(mdp, pi);
    let p = transition_matrix_s(mdp, pi);
    let n = mdp.num_states();
    let g = mdp.gamma();
    let lhs = Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() } - g * p[(i, j)]);
    let v = lhs.solve(&policy_reward(mdp, pi))?;
    let q = q_from_v(mdp, &v);
    Ok((v, q))
}

/// `F^π Q = r + γ P_{S×A}^π Q`.
pub fn bellman_q<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>, q: &[T]) -> QVec<T> {
    check_policy_shape(mdp, pi);
    q_from_v(mdp, &state_values(pi, q))
}

/// Optimal operator `F Q = r + γ E[max_a' Q(s',a')]`.
pub fn optimal_bellman_q<T: Real>(mdp: &TabularMdp<T>, q: &[T]) -> QVec<T> {
    q_from_v(mdp, &max_values(mdp.num_actions(), q))
}

/// `T^π V = r^π + γ P_S^π V`.
pub fn bellman_v<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>, v: &[T]) -> VVec<T> {
    state_values(pi, &q_from_v(mdp, v))
}

/// State transition matrix `P_S^π(s,s') = Σ_a π(a|s) P(s'|s,a)`.
pub fn transition_matrix_s<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> Matrix<T> {
    check_policy_shape(mdp, pi);
    let n = mdp.num_states();
    let mut m = Matrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let w = pi.prob(s, a);
            if w == T::zero() {
                continue;
            }
            for (s2, &p) in mdp.next_dist(s, a).iter().enumerate() {
                m[(s, s2)] = m[(s, s2)] + w * p;
            }
        }
    }
    m
}

/// State-action transition matrix `P_{S×A}^π((s,a),(s',a')) = P(s'|s,a) π(a'|s')`.
pub fn transition_matrix_sa<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> Matrix<T> {
    check_policy_shape(mdp, pi);
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = ns * na;
    let mut m = Matrix::zeros(n, n);
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            for (s2, &p) in mdp.next_dist(s, a).iter().enumerate() {
                for a2 in 0..na {
                    m[(i, s2 * na + a2)] = p * pi.prob(s2, a2);
                }
            }
        }
    }
    m
}

/// Composition kernel `P_S^{π_b} P_S^{π}` of a behavior step followed by a target step.
pub fn compose_s<T: Real>(mdp: &TabularMdp<T>, pi_b: &Policy<T>, pi: &Policy<T>) -> Matrix<T> {
    transition_matrix_s(mdp, pi_b).matmul(&transition_matrix_s(mdp, pi))
}

/// Discounted visitation `d^π_μ = (1-γ) μᵀ (I - γ P_S^π)^{-1}`.
pub fn visitation<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>, mu: &[T]) -> Result<StateDist<T>> {
    let n = mdp.num_states();
    if mu.len() != n {
        return Err(Error::invalid("mu", format!("expected {n} entries")));
    }
    check_row(mu, T::INPUT_TOL.max(1e-10), || "mu".to_string())?;
    let p = transition_matrix_s(mdp, pi);
    let g = mdp.gamma();
    let lhs_t = Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() } - g * p[(j, i)]);
    let x = lhs_t.solve(mu)?;
    Ok(x.into_iter().map(|v| (T::one() - g) * v).collect())
}

/// Residual of the performance-difference identity
/// `[V^π - V](μ) = (1/(1-γ)) [T^π V - V](d^π_μ)`.
pub fn perf_diff_check<T: Real>(mdp: &TabularMdp<T>, pi: &Policy<T>, v: &[T], mu: &[T]) -> Result<T> {
    let (v_pi, _) = policy_value(mdp, pi)?;
    let d = visitation(mdp, pi, mu)?;
    let lhs: T = mu.iter().zip(v_pi.iter().zip(v)).map(|(&m, (&a, &b))| m * (a - b)).sum();
    let tv = bellman_v(mdp, pi, v);
    let adv: T = d.iter().zip(tv.iter().zip(v)).map(|(&w, (&a, &b))| w * (a - b)).sum();
    Ok((lhs - adv / (T::one() - mdp.gamma())).abs())
}

/// `V(μ) = Σ_s μ(s) V(s)`.
pub fn value_at<T: Real>(v: &[T], mu: &[T]) -> T {
    dot(v, mu)
}

/// `max_{s,a} |π(a|s) - π'(a|s)|`.
pub fn policy_distance<T: Real>(a: &Policy<T>, b: &Policy<T>) -> T {
    crate::linalg::max_abs_diff(a.probs(), b.probs())
}
