//! Markov-chain analytics and seeded trajectory samplers.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::io::fmt_float;
use crate::linalg::{l1_norm, Lu, Matrix};
use crate::mdp::{compose_s, transition_matrix_s, Policy, StateActionDist, StateDist, TabularMdp};
use crate::scalar::Real;

/// Random stream used by every sampler; counter-based, one stream per run.
pub type RunRng = ChaCha12Rng;

/// Independent stream for `(master_seed, run_id)`.
pub fn run_rng(master_seed: u64, run_id: u64) -> RunRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(run_id);
    rng
}

/// Inverse-CDF draw from `probs` in stored order.
pub fn sample_categorical<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > T::zero() {
            acc = acc + p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Total variation distance `½‖p - q‖₁`.
pub fn d_tv<T: Real>(p: &[T], q: &[T]) -> T {
    assert_eq!(p.len(), q.len(), "length mismatch");
    T::lit(0.5) * p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reach<T: Real>(p: &Matrix<T>, reverse: bool) -> Vec<Option<usize>> {
    let n = p.rows();
    let mut level = vec![None; n];
    level[0] = Some(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("queued nodes have levels");
        for v in 0..n {
            let w = if reverse { p[(v, u)] } else { p[(u, v)] };
            if w > T::zero() && level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

/// Irreducible and aperiodic, decided on the positive-entry digraph.
pub fn check_ergodicity<T: Real>(p: &Matrix<T>) -> bool {
    let n = p.rows();
    if n == 0 || p.cols() != n {
        return false;
    }
    let fwd = reach(p, false);
    if fwd.iter().any(Option::is_none) || reach(p, true).iter().any(Option::is_none) {
        return false;
    }
    let mut period = 0;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > T::zero() {
                let (lu, lv) = (fwd[u].unwrap_or(0), fwd[v].unwrap_or(0));
                period = gcd(period, (lu + 1).abs_diff(lv));
            }
        }
    }
    period == 1
}

fn stationary_residual<T: Real>(p: &Matrix<T>, nu: &[T]) -> T {
    let next = p.vec_mul(nu);
    l1_norm(&crate::linalg::sub(&next, nu))
}

fn normalized<T: Real>(mut v: Vec<T>) -> Vec<T> {
    for x in v.iter_mut() {
        *x = x.max(T::zero());
    }
    let z: T = v.iter().copied().sum();
    v.into_iter().map(|x| x / z).collect()
}

/// Unique stationary distribution of an ergodic stochastic matrix.
///
/// A direct solve gives the starting point; power iteration then drives the
/// residual `‖νP - ν‖₁` below `1e-12` (or a few ulps for `f32`).
pub fn stationary_dist<T: Real>(p: &Matrix<T>) -> Result<StateDist<T>> {
    if !check_ergodicity(p) {
        return Err(Error::NotErgodic(format!("{}-state transition matrix", p.rows())));
    }
    let n = p.rows();
    let mut system = Matrix::from_fn(n, n, |i, j| {
        if i == n - 1 {
            T::one()
        } else {
            let id = if i == j { T::one() } else { T::zero() };
            id - p[(j, i)]
        }
    });
    if n == 1 {
        system[(0, 0)] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let mut nu = match Lu::new(&system).and_then(|lu| lu.solve(&rhs)) {
        Ok(x) => normalized(x),
        Err(_) => vec![T::one() / T::count(n); n],
    };
    let tol = T::lit(1e-12).max(T::epsilon() * T::count(16 * n));
    let mut iters = 0;
    while stationary_residual(p, &nu) > tol && iters < 1_000_000 {
        nu = normalized(p.vec_mul(&nu));
        iters += 1;
    }
    Ok(nu)
}

/// Certified geometric mixing envelope `sup_s d_TV(P^t(s,·), ν) <= m κ^t` for `t <= horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingEstimate<T> {
    pub m: T,
    pub kappa: T,
    pub horizon: usize,
    /// `e(t)` for `t = 0..=horizon`.
    pub tv_profile: Vec<T>,
}

/// Clamp margin for `κ`.
pub const KAPPA_MARGIN: f64 = 1e-6;

impl<T: Real> MixingEstimate<T> {
    /// `⌈log_κ m^{-1}⌉ + 1/(1-κ)`, the sensitivity constant of the stationary
    /// distribution to kernel perturbations.
    pub fn perturbation_constant(&self) -> T {
        let tau = ((-self.m.ln()) / self.kappa.ln()).ceil();
        tau + T::one() / (T::one() - self.kappa)
    }

    /// Merges envelopes of several chains into one valid for all of them.
    pub fn uniform(estimates: &[MixingEstimate<T>]) -> Option<Self> {
        let first = estimates.first()?;
        let mut out = MixingEstimate {
            m: first.m,
            kappa: first.kappa,
            horizon: first.horizon,
            tv_profile: first.tv_profile.clone(),
        };
        for e in &estimates[1..] {
            out.m = out.m.max(e.m);
            out.kappa = out.kappa.max(e.kappa);
            out.horizon = out.horizon.min(e.horizon);
            for (a, &b) in out.tv_profile.iter_mut().zip(&e.tv_profile) {
                *a = a.max(b);
            }
        }
        out.tv_profile.truncate(out.horizon + 1);
        Some(out)
    }
}

/// Fits `(m, κ)` to the decay of `e(t) = max_s d_TV(P^t(s,·), ν)` over `t <= t_max`.
pub fn estimate_mixing<T: Real>(p: &Matrix<T>, nu: &[T], t_max: usize) -> Result<MixingEstimate<T>> {
    if t_max < 2 {
        return Err(Error::invalid("t_max", "must be at least 2"));
    }
    if !check_ergodicity(p) {
        return Err(Error::NotErgodic(format!("{}-state transition matrix", p.rows())));
    }
    let n = p.rows();
    let mut pt = Matrix::identity(n);
    let mut profile = Vec::with_capacity(t_max + 1);
    for _ in 0..=t_max {
        let e = (0..n).map(|s| d_tv(pt.row(s), nu)).fold(T::zero(), T::max);
        profile.push(e);
        pt = pt.matmul(p);
    }
    let lo = T::lit(KAPPA_MARGIN);
    let hi = T::one() - lo;
    let mut kappa = T::zero();
    for (t, &e) in profile.iter().enumerate().skip(t_max.div_ceil(2).max(1)) {
        kappa = kappa.max(e.powf(T::one() / T::count(t)));
    }
    kappa = (kappa * T::lit(1.05)).max(lo).min(hi);
    let ln_k = kappa.ln();
    let mut m = T::one();
    for (t, &e) in profile.iter().enumerate() {
        if e > T::zero() {
            m = m.max((e.ln() - T::count(t) * ln_k).exp());
        }
    }
    if !m.is_finite() {
        return Err(Error::invalid("mixing", "envelope constant overflowed"));
    }
    let slack = T::one() + T::lit(1e-9);
    for (t, &e) in profile.iter().enumerate() {
        let env = (m.ln() + T::count(t) * ln_k).exp() * slack;
        if e > env && e > T::epsilon() {
            return Err(Error::invalid("mixing", format!("envelope fails at t = {t}")));
        }
    }
    Ok(MixingEstimate {
        m,
        kappa,
        horizon: t_max,
        tv_profile: profile,
    })
}

/// Behavior policy with its stationary state and state-action distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorModel<T> {
    pub pi_b: Policy<T>,
    pub nu: StateDist<T>,
    /// `σ(s,a) = ν(s) π_b(a|s)`, state-major.
    pub sigma: StateActionDist<T>,
    pub sigma_floor: T,
    pub pi_floor: T,
    pub nu_floor: T,
}

impl<T: Real> BehaviorModel<T> {
    /// Checks full action support and ergodicity of `P_S^{π_b}`.
    pub fn new(mdp: &TabularMdp<T>, pi_b: Policy<T>) -> Result<Self> {
        let pi_floor = pi_b.min_prob();
        if !(pi_floor > T::zero()) {
            return Err(Error::ExplorationFailure(
                "behavior policy assigns zero probability to some action".into(),
            ));
        }
        let nu = stationary_dist(&transition_matrix_s(mdp, &pi_b))?;
        let sigma = state_action_weights(&pi_b, &nu);
        let sigma_floor = min_entry(&sigma);
        let nu_floor = min_entry(&nu);
        Ok(Self {
            pi_b,
            nu,
            sigma,
            sigma_floor,
            pi_floor,
            nu_floor,
        })
    }

    pub fn uniform(mdp: &TabularMdp<T>) -> Result<Self> {
        Self::new(mdp, Policy::uniform(mdp.num_states(), mdp.num_actions()))
    }

    /// Kernel `P_S^{π_b}`.
    pub fn kernel(&self, mdp: &TabularMdp<T>) -> Matrix<T> {
        transition_matrix_s(mdp, &self.pi_b)
    }
}

fn min_entry<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::infinity(), |m, &x| m.min(x))
}

/// `σ(s,a) = ν(s) π(a|s)`.
pub fn state_action_weights<T: Real>(pi: &Policy<T>, nu: &[T]) -> StateActionDist<T> {
    let na = pi.num_actions();
    (0..pi.num_states() * na).map(|i| nu[i / na] * pi.probs()[i]).collect()
}

/// Stationary distribution of the composed chain `P_S^{π_b} P_S^{π}`.
pub fn composed_stationary<T: Real>(mdp: &TabularMdp<T>, pi_b: &Policy<T>, pi: &Policy<T>) -> Result<StateDist<T>> {
    stationary_dist(&compose_s(mdp, pi_b, pi))
}

/// Weights `ν^{π_b∘π}(s) π_b(a|s)` of the mixed-sampling critic.
pub fn composed_weights<T: Real>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    pi: &Policy<T>,
) -> Result<StateActionDist<T>> {
    Ok(state_action_weights(pi_b, &composed_stationary(mdp, pi_b, pi)?))
}

/// Off-policy transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffPolicyTuple<T> {
    pub s: usize,
    pub a: usize,
    pub r: T,
    pub s_next: usize,
}

/// Mixed-policy transition `(s, a, r, s', a')` with `a' ~ π_target(·|s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedTuple<T> {
    pub s: usize,
    pub a: usize,
    pub r: T,
    pub s_next: usize,
    pub a_next: usize,
}

/// One off-policy step from `s`: `a ~ π_b(·|s)`, `s' ~ P(·|s,a)`.
pub fn step_offpolicy<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    s: usize,
    rng: &mut R,
) -> OffPolicyTuple<T> {
    let a = sample_categorical(pi_b.row(s), rng);
    let s_next = sample_categorical(mdp.next_dist(s, a), rng);
    OffPolicyTuple {
        s,
        a,
        r: mdp.reward(s, a),
        s_next,
    }
}

/// One mixed step from `s`; returns the tuple and the next chain state
/// drawn from `P(·|s', a')`.
pub fn step_mixed<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    pi_target: &Policy<T>,
    s: usize,
    rng: &mut R,
) -> (MixedTuple<T>, usize) {
    let a = sample_categorical(pi_b.row(s), rng);
    let s_next = sample_categorical(mdp.next_dist(s, a), rng);
    let a_next = sample_categorical(pi_target.row(s_next), rng);
    let chain = sample_categorical(mdp.next_dist(s_next, a_next), rng);
    (
        MixedTuple {
            s,
            a,
            r: mdp.reward(s, a),
            s_next,
            a_next,
        },
        chain,
    )
}

/// `B` consecutive off-policy tuples from `s0`, plus the final state `s_B`.
pub fn sample_offpolicy<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    s0: usize,
    batch: usize,
    rng: &mut R,
) -> Result<(Vec<OffPolicyTuple<T>>, usize)> {
    if batch == 0 {
        return Err(Error::invalid("batch", "must be at least 1"));
    }
    let mut s = s0;
    let mut out = Vec::with_capacity(batch);
    for _ in 0..batch {
        let t = step_offpolicy(mdp, pi_b, s, rng);
        s = t.s_next;
        out.push(t);
    }
    Ok((out, s))
}

/// `B` consecutive mixed tuples from `s0`, plus the final chain state.
pub fn sample_mixed<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    pi_target: &Policy<T>,
    s0: usize,
    batch: usize,
    rng: &mut R,
) -> Result<(Vec<MixedTuple<T>>, usize)> {
    if batch == 0 {
        return Err(Error::invalid("batch", "must be at least 1"));
    }
    let mut s = s0;
    let mut out = Vec::with_capacity(batch);
    for _ in 0..batch {
        let (t, next) = step_mixed(mdp, pi_b, pi_target, s, rng);
        s = next;
        out.push(t);
    }
    Ok((out, s))
}

/// CSV dump of sampled trajectories: `k,t,s,a,r,s_next[,a_next]`.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(w: W, mixed: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        let mut header = vec!["k", "t", "s", "a", "r", "s_next"];
        if mixed {
            header.push("a_next");
        }
        inner.write_record(&header).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn write_offpolicy<T: Real>(&mut self, k: usize, tuples: &[OffPolicyTuple<T>]) -> Result<()> {
        for (t, x) in tuples.iter().enumerate() {
            self.inner
                .write_record([
                    k.to_string(),
                    t.to_string(),
                    x.s.to_string(),
                    x.a.to_string(),
                    fmt_float(x.r.to_f64_lossy()),
                    x.s_next.to_string(),
                ])
                .map_err(csv_err)?;
        }
        Ok(())
    }

    pub fn write_mixed<T: Real>(&mut self, k: usize, tuples: &[MixedTuple<T>]) -> Result<()> {
        for (t, x) in tuples.iter().enumerate() {
            self.inner
                .write_record([
                    k.to_string(),
                    t.to_string(),
                    x.s.to_string(),
                    x.a.to_string(),
                    fmt_float(x.r.to_f64_lossy()),
                    x.s_next.to_string(),
                    x.a_next.to_string(),
                ])
                .map_err(csv_err)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::invalid("trajectory", e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid("trajectory", e.to_string())
}
