//! Expected TD-PMD (off-policy data), approximate TD-PMD (mixed-policy data)
//! and batch Q-learning, with the weighted Bellman operator and step-size rules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{composed_weights, step_mixed, step_offpolicy, BehaviorModel};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mdp::{
    bellman_q, greedy_policy, max_values, optimal_bellman_q, state_values, Policy, QVec, TabularMdp,
};
use crate::mirror::{MirrorKind, MirrorMap};
use crate::scalar::Real;

/// Which of the three algorithms to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoKind {
    /// Expected TD-PMD on off-policy Markov data.
    Expected,
    /// Approximate TD-PMD on mixed-policy Markov data.
    Approximate,
    /// Batch Q-learning.
    BatchQ,
}

impl AlgoKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Expected => "expected",
            AlgoKind::Approximate => "approximate",
            AlgoKind::BatchQ => "batch-q",
        }
    }
}

/// Policy step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum EtaMode {
    Constant(f64),
    /// `η_k = η · max(‖D^{π̃_k}_{π_k}‖∞, 1e-12)`.
    Adaptive(f64),
    /// `η_k = max(2 max_s Δ_{k,s}^{-1}, floor)`.
    QlearningEquiv(f64),
}

/// Batch sizes `B_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BatchSchedule {
    Constant(usize),
    /// One entry per iteration.
    Explicit(Vec<usize>),
    /// `B_k = ⌈b0 · growth^k⌉`.
    Geometric { b0: f64, growth: f64 },
}

impl BatchSchedule {
    pub fn at(&self, k: usize) -> usize {
        match self {
            BatchSchedule::Constant(b) => *b,
            BatchSchedule::Explicit(v) => v.get(k).copied().unwrap_or(0),
            BatchSchedule::Geometric { b0, growth } => {
                let x = (b0 * growth.powf(k as f64)).ceil();
                if x >= usize::MAX as f64 {
                    usize::MAX
                } else {
                    x as usize
                }
            }
        }
    }

    /// `B_k^{-1/2}` as a real.
    pub fn inv_sqrt<T: Real>(&self, k: usize) -> T {
        T::one() / T::count(self.at(k)).sqrt()
    }

    /// `Σ_{k<n} B_k`.
    pub fn total(&self, n: usize) -> u128 {
        (0..n).map(|k| self.at(k) as u128).sum()
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            BatchSchedule::Explicit(v) if v.len() < n => Err(Error::invalid(
                "batch_schedule",
                format!("needs {n} entries, has {}", v.len()),
            )),
            BatchSchedule::Geometric { b0, growth } if !(*b0 > 0.0 && *growth > 0.0) => {
                Err(Error::invalid("batch_schedule", "geometric parameters must be positive"))
            }
            _ => match (0..n).find(|&k| self.at(k) == 0) {
                Some(k) => Err(Error::invalid("batch_schedule", format!("B_{k} is zero"))),
                None => Ok(()),
            },
        }
    }
}

/// Run configuration; field names match the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    pub algo_kind: AlgoKind,
    pub map: MirrorKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub eta_mode: EtaMode,
    pub batch_schedule: BatchSchedule,
    pub theta: f64,
    pub seed: u64,
    #[serde(default)]
    pub run_id: u64,
    #[serde(default)]
    pub noise_free: bool,
    /// Initial chain state.
    #[serde(default)]
    pub s0: usize,
}

impl AlgoConfig {
    /// Number of critic updates performed: `K + 1` for the PMD variants
    /// (`k = 0..=K`), `K` for batch Q-learning.
    pub fn num_updates(&self) -> usize {
        match self.algo_kind {
            AlgoKind::BatchQ => self.k,
            _ => self.k + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("{} is outside (0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid("theta", format!("{} is outside [0, 1]", self.theta)));
        }
        let eta = match self.eta_mode {
            EtaMode::Constant(e) | EtaMode::Adaptive(e) | EtaMode::QlearningEquiv(e) => e,
        };
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta_mode", format!("{eta} must be finite and nonnegative")));
        }
        self.batch_schedule.validate(self.num_updates())
    }
}

/// Averaging weights `c_t = ϑ^{B-t-1} / Σ_{u<B} ϑ^u` with `0⁰ = 1`.
#[derive(Debug, Clone, Copy)]
pub struct TdWeights<T> {
    theta: T,
    batch: usize,
    norm: T,
}

impl<T: Real> TdWeights<T> {
    pub fn new(batch: usize, theta: T) -> Result<Self> {
        if batch == 0 {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(Error::invalid("theta", format!("{theta} is outside [0, 1]")));
        }
        let norm = if theta == T::one() {
            T::count(batch)
        } else if theta == T::zero() {
            T::one()
        } else {
            (T::one() - pow_count(theta, batch)) / (T::one() - theta)
        };
        Ok(Self { theta, batch, norm })
    }

    pub fn weight(&self, t: usize) -> T {
        if self.theta == T::one() {
            return T::one() / self.norm;
        }
        pow_count(self.theta, self.batch - t - 1) / self.norm
    }
}

fn pow_count<T: Real>(x: T, n: usize) -> T {
    match i32::try_from(n) {
        Ok(e) => x.powi(e),
        Err(_) => x.powf(T::count(n)),
    }
}

/// Weight vector `(c_0, ..., c_{B-1})`.
pub fn td_weights<T: Real>(batch: usize, theta: T) -> Result<Vec<T>> {
    let w = TdWeights::new(batch, theta)?;
    Ok((0..batch).map(|t| w.weight(t)).collect())
}

/// A TD error: the vector that is zero except at `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdError<T> {
    pub index: usize,
    pub value: T,
}

impl<T: Real> TdError<T> {
    pub fn to_dense(&self, len: usize) -> QVec<T> {
        let mut v = vec![T::zero(); len];
        v[self.index] = self.value;
        v
    }
}

/// `r + γ⟨π_target(·|s'), Q(s',·)⟩ - Q(s,a)` at `(s,a)`.
pub fn expected_td_error<T: Real>(
    mdp: &TabularMdp<T>,
    q: &[T],
    pi_target: &Policy<T>,
    tuple: &crate::chain::OffPolicyTuple<T>,
) -> TdError<T> {
    let na = mdp.num_actions();
    let next = dot(pi_target.row(tuple.s_next), &q[tuple.s_next * na..(tuple.s_next + 1) * na]);
    let index = tuple.s * na + tuple.a;
    TdError {
        index,
        value: tuple.r + mdp.gamma() * next - q[index],
    }
}

/// `r + γ Q(s',a') - Q(s,a)` at `(s,a)`.
pub fn approx_td_error<T: Real>(mdp: &TabularMdp<T>, q: &[T], tuple: &crate::chain::MixedTuple<T>) -> TdError<T> {
    let na = mdp.num_actions();
    let index = tuple.s * na + tuple.a;
    TdError {
        index,
        value: tuple.r + mdp.gamma() * q[tuple.s_next * na + tuple.a_next] - q[index],
    }
}

/// `Q + α Σ (F^π Q - Q)` with `Σ = diag(weights)`.
pub fn weighted_bellman<T: Real>(
    mdp: &TabularMdp<T>,
    pi: &Policy<T>,
    weights: &[T],
    alpha: T,
    q: &[T],
) -> Result<QVec<T>> {
    check_weights(weights)?;
    let fq = bellman_q(mdp, pi, q);
    Ok(q.iter()
        .zip(&fq)
        .zip(weights)
        .map(|((&x, &f), &w)| x + alpha * w * (f - x))
        .collect())
}

fn check_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::ExplorationFailure("a state-action weight is zero".into()));
    }
    Ok(())
}

/// Contraction factor `1 - α(1-γ)σ̃` of the weighted operator.
pub fn contraction_factor<T: Real>(gamma: T, alpha: T, sigma_floor: T) -> T {
    T::one() - alpha * (T::one() - gamma) * sigma_floor
}

/// `η_base · max(max_s D_h(π̃_k(·|s)‖π_k(·|s)), 1e-12)` with `π̃_k` greedy on `q_k`.
pub fn adaptive_eta<T: Real>(map: &MirrorMap<T>, pi_k: &Policy<T>, q_k: &[T], eta_base: T) -> Result<T> {
    let greedy = greedy_policy(pi_k.num_actions(), q_k);
    let d = map.max_divergence(&greedy, pi_k)?;
    Ok(eta_base * d.max(T::lit(1e-12)))
}

/// Value gap `Δ_s` of one row: best value minus best value strictly below it.
/// Infinite for an all-ties row.
pub fn value_gap<T: Real>(row: &[T]) -> T {
    let top = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let second = row
        .iter()
        .filter(|&&v| v < top)
        .fold(T::neg_infinity(), |m, &v| m.max(v));
    top - second
}

/// `max(2 max_s Δ_s^{-1}, eta_floor)`; rows that are all ties contribute zero.
pub fn qlearning_equiv_eta<T: Real>(q_k: &[T], num_actions: usize, eta_floor: T) -> T {
    let worst = q_k
        .chunks(num_actions)
        .map(|row| T::one() / value_gap(row))
        .fold(T::zero(), T::max);
    (T::lit(2.0) * worst).max(eta_floor)
}

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    /// Policy in force at iteration `k`. For batch Q-learning this is the
    /// greedy policy of `q_k`.
    pub pi_k: Policy<T>,
    pub q_k: QVec<T>,
    /// Policy step size; infinite for the greedy step of batch Q-learning.
    pub eta_k: T,
    pub b_k: usize,
    pub delta_bar: QVec<T>,
    pub omega_bar: QVec<T>,
    /// Samples drawn up to and including iteration `k`.
    pub samples_cumulative: u64,
    /// Smallest critic weight of the exact operator `ω̄_k` is measured against.
    pub sigma_floor: T,
}

/// Output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub kind: AlgoKind,
    pub trace: Vec<IterationRecord<T>>,
    /// Critic after the last update.
    pub q_final: QVec<T>,
    /// Policy after the last update (the greedy policy of `q_final` for batch Q-learning).
    pub pi_final: Policy<T>,
    /// `π_K`, the policy the last-iterate guarantees are about.
    pub pi_last: Policy<T>,
    pub pi_hat: Policy<T>,
    pub hat_index: usize,
    pub total_samples: u64,
}

impl<T: Real> RunResult<T> {
    /// `Q^0, ..., Q^n` including the final critic.
    pub fn q_iterates(&self) -> Vec<&QVec<T>> {
        self.trace.iter().map(|r| &r.q_k).chain(std::iter::once(&self.q_final)).collect()
    }
}

/// Expected TD-PMD on off-policy Markov data from `behavior.pi_b`.
pub fn run_expected_td_pmd<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    config: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult<T>> {
    run(mdp, AlgoKind::Expected, behavior, config, rng)
}

/// Approximate TD-PMD on mixed-policy Markov data.
pub fn run_approximate_td_pmd<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    config: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult<T>> {
    if !(pi_b.min_prob() > T::zero()) {
        return Err(Error::ExplorationFailure(
            "behavior policy assigns zero probability to some action".into(),
        ));
    }
    let behavior = MixedBehavior { pi_b };
    run(mdp, AlgoKind::Approximate, &behavior, config, rng)
}

/// Batch Q-learning on off-policy Markov data, arithmetic batch mean.
pub fn run_batch_q_learning<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    config: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult<T>> {
    run(mdp, AlgoKind::BatchQ, behavior, config, rng)
}

/// Dispatches on `config.algo_kind`.
pub fn run_config<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    config: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult<T>> {
    match config.algo_kind {
        AlgoKind::Expected => run_expected_td_pmd(mdp, behavior, config, rng),
        AlgoKind::Approximate => run_approximate_td_pmd(mdp, &behavior.pi_b, config, rng),
        AlgoKind::BatchQ => run_batch_q_learning(mdp, behavior, config, rng),
    }
}

struct MixedBehavior<'a, T> {
    pi_b: &'a Policy<T>,
}

trait Sampling<T: Real> {
    fn pi_b(&self) -> &Policy<T>;
    /// Critic weights for the exact operator paired with target `pi_next`.
    fn weights(&self, mdp: &TabularMdp<T>, pi_next: &Policy<T>) -> Result<Vec<T>>;
}

impl<T: Real> Sampling<T> for BehaviorModel<T> {
    fn pi_b(&self) -> &Policy<T> {
        &self.pi_b
    }
    fn weights(&self, _: &TabularMdp<T>, _: &Policy<T>) -> Result<Vec<T>> {
        check_weights(&self.sigma)?;
        Ok(self.sigma.clone())
    }
}

impl<T: Real> Sampling<T> for MixedBehavior<'_, T> {
    fn pi_b(&self) -> &Policy<T> {
        self.pi_b
    }
    fn weights(&self, mdp: &TabularMdp<T>, pi_next: &Policy<T>) -> Result<Vec<T>> {
        let w = composed_weights(mdp, self.pi_b, pi_next)?;
        check_weights(&w)?;
        Ok(w)
    }
}

fn run<T: Real, R: Rng + ?Sized, S: Sampling<T>>(
    mdp: &TabularMdp<T>,
    kind: AlgoKind,
    sampling: &S,
    config: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult<T>> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let pi_b = sampling.pi_b();
    if (pi_b.num_states(), pi_b.num_actions()) != (ns, na) {
        return Err(Error::invalid("behavior", "policy shape does not match the MDP"));
    }
    if config.s0 >= ns {
        return Err(Error::invalid("s0", format!("state {} out of range", config.s0)));
    }
    let updates = config.num_updates();
    config.batch_schedule.validate(updates)?;
    let map = MirrorMap::<T>::new(config.map);
    let alpha = T::lit(config.alpha);
    let theta = if kind == AlgoKind::BatchQ {
        T::one()
    } else {
        T::lit(config.theta)
    };
    let gamma = mdp.gamma();

    let mut pi = Policy::uniform(ns, na);
    let mut q = vec![T::zero(); ns * na];
    let mut s = config.s0;
    let mut samples = 0u64;
    let mut trace = Vec::with_capacity(updates);

    for k in 0..updates {
        let (eta_k, pi_next) = if kind == AlgoKind::BatchQ {
            (T::infinity(), greedy_policy(na, &q))
        } else {
            let eta = match config.eta_mode {
                EtaMode::Constant(e) => T::lit(e),
                EtaMode::Adaptive(e) => adaptive_eta(&map, &pi, &q, T::lit(e))?,
                EtaMode::QlearningEquiv(e) => qlearning_equiv_eta(&q, na, T::lit(e)),
            };
            (eta, map.pmd_update(&pi, &q, eta)?)
        };

        let weights = sampling.weights(mdp, &pi_next)?;
        let fq = if kind == AlgoKind::BatchQ {
            optimal_bellman_q(mdp, &q)
        } else {
            bellman_q(mdp, &pi_next, &q)
        };
        let increment: Vec<T> = weights
            .iter()
            .zip(fq.iter().zip(&q))
            .map(|(&w, (&f, &x))| w * (f - x))
            .collect();

        let b_k = config.batch_schedule.at(k);
        let delta_bar = if config.noise_free {
            increment.clone()
        } else {
            let c = TdWeights::new(b_k, theta)?;
            let mut acc = vec![T::zero(); ns * na];
            match kind {
                AlgoKind::Approximate => {
                    for t in 0..b_k {
                        let (tuple, next) = step_mixed(mdp, pi_b, &pi_next, s, rng);
                        s = next;
                        let i = tuple.s * na + tuple.a;
                        let td = tuple.r + gamma * q[tuple.s_next * na + tuple.a_next] - q[i];
                        acc[i] = acc[i] + c.weight(t) * td;
                    }
                }
                _ => {
                    let next_value = if kind == AlgoKind::BatchQ {
                        max_values(na, &q)
                    } else {
                        state_values(&pi_next, &q)
                    };
                    for t in 0..b_k {
                        let tuple = step_offpolicy(mdp, pi_b, s, rng);
                        s = tuple.s_next;
                        let i = tuple.s * na + tuple.a;
                        let td = tuple.r + gamma * next_value[tuple.s_next] - q[i];
                        acc[i] = acc[i] + c.weight(t) * td;
                    }
                }
            }
            samples += b_k as u64;
            acc
        };
        let omega_bar: Vec<T> = if config.noise_free {
            vec![T::zero(); ns * na]
        } else {
            delta_bar.iter().zip(&increment).map(|(&d, &i)| d - i).collect()
        };
        let sigma_floor = weights.iter().fold(T::infinity(), |m, &w| m.min(w));
        let q_next: Vec<T> = q.iter().zip(&delta_bar).map(|(&x, &d)| x + alpha * d).collect();

        trace.push(IterationRecord {
            k,
            pi_k: if kind == AlgoKind::BatchQ { pi_next.clone() } else { pi },
            q_k: q,
            eta_k,
            b_k,
            delta_bar,
            omega_bar,
            samples_cumulative: samples,
            sigma_floor,
        });
        q = q_next;
        pi = pi_next;
    }

    let hat_index = rng.random_range(0..=config.k);
    let pi_final = if kind == AlgoKind::BatchQ {
        greedy_policy(na, &q)
    } else {
        pi
    };
    let policy_at = |i: usize| -> Policy<T> {
        if i < trace.len() {
            trace[i].pi_k.clone()
        } else {
            pi_final.clone()
        }
    };
    let pi_big_k = policy_at(config.k);
    let pi_hat = policy_at(hat_index);
    Ok(RunResult {
        kind,
        trace,
        q_final: q,
        pi_final,
        pi_last: pi_big_k,
        pi_hat,
        hat_index,
        total_samples: samples,
    })
}
