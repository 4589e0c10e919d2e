//! Extraction of the problem constants the bounds depend on.

use crate::algo::RunResult;
use crate::chain::{composed_stationary, estimate_mixing, state_action_weights, BehaviorModel, MixingEstimate};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{compose_s, Policy, TabularMdp};
use crate::mirror::MirrorMap;
use crate::scalar::Real;

use super::bounds::{l_constant, BoundInputs};

/// Horizons tried by [`tight_mixing`].
pub const MIXING_HORIZONS: [usize; 7] = [4, 8, 16, 32, 64, 128, 200];

/// Profile values at or below this are treated as round-off.
pub const MIXING_NOISE_FLOOR: f64 = 1e-10;

/// Envelope for `p` with the smallest `m/(1-κ)` among the horizons in
/// [`MIXING_HORIZONS`] whose last profile value is still above
/// [`MIXING_NOISE_FLOOR`]. Falls back to the shortest horizon when the chain
/// reaches the floor before any of them.
pub fn tight_mixing<T: Real>(p: &Matrix<T>, nu: &[T]) -> Result<MixingEstimate<T>> {
    let floor = T::lit(MIXING_NOISE_FLOOR);
    let mut best: Option<MixingEstimate<T>> = None;
    let score = |e: &MixingEstimate<T>| e.m / (T::one() - e.kappa);
    for &t in &MIXING_HORIZONS {
        let est = match estimate_mixing(p, nu, t) {
            Ok(e) => e,
            Err(e @ Error::NotErgodic(_)) => return Err(e),
            Err(_) => continue,
        };
        if est.tv_profile[t] <= floor {
            if best.is_none() && t == MIXING_HORIZONS[0] {
                best = Some(est);
            }
            break;
        }
        if best.as_ref().is_none_or(|b| score(&est) < score(b)) {
            best = Some(est);
        }
    }
    best.ok_or_else(|| Error::invalid("mixing", "no horizon produced a certified envelope"))
}

/// `max_s D_h(π*(·|s)‖π_0(·|s))`.
pub fn initial_divergence<T: Real>(map: &MirrorMap<T>, pi_star: &Policy<T>, pi0: &Policy<T>) -> Result<T> {
    map.max_divergence(pi_star, pi0)
}

/// Constants for off-policy sampling from `behavior`.
pub fn extract_constants<T: Real>(
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    map: &MirrorMap<T>,
    pi0: &Policy<T>,
    pi_star: &Policy<T>,
    alpha: T,
) -> Result<BoundInputs<T>> {
    if !(behavior.sigma_floor > T::zero()) {
        return Err(Error::ExplorationFailure("a stationary state-action weight is zero".into()));
    }
    let mixing = tight_mixing(&behavior.kernel(mdp), &behavior.nu)?;
    finish(mdp, map, pi0, pi_star, alpha, behavior.sigma_floor, mixing)
}

/// Constants for mixed-policy sampling along a sequence of target policies.
///
/// `σ̃` is the smallest weight `ν^{π_b∘π}(s) π_b(a|s)` over `policies`, and
/// the mixing envelope is the uniform envelope of the composed chains.
pub fn extract_constants_mixed<T: Real>(
    mdp: &TabularMdp<T>,
    pi_b: &Policy<T>,
    policies: &[&Policy<T>],
    map: &MirrorMap<T>,
    pi0: &Policy<T>,
    pi_star: &Policy<T>,
    alpha: T,
) -> Result<BoundInputs<T>> {
    if !(pi_b.min_prob() > T::zero()) {
        return Err(Error::ExplorationFailure(
            "behavior policy assigns zero probability to some action".into(),
        ));
    }
    if policies.is_empty() {
        return Err(Error::invalid("policies", "need at least one target policy"));
    }
    let mut sigma_floor = T::infinity();
    let mut envelopes = Vec::with_capacity(policies.len());
    for pi in policies {
        let nu = composed_stationary(mdp, pi_b, pi)?;
        let floor = state_action_weights(pi_b, &nu).into_iter().fold(T::infinity(), T::min);
        sigma_floor = sigma_floor.min(floor);
        envelopes.push(tight_mixing(&compose_s(mdp, pi_b, pi), &nu)?);
    }
    if !(sigma_floor > T::zero()) {
        return Err(Error::ExplorationFailure("a composed state-action weight is zero".into()));
    }
    let mixing = MixingEstimate::uniform(&envelopes).expect("nonempty");
    finish(mdp, map, pi0, pi_star, alpha, sigma_floor, mixing)
}

/// Policies `π_k` visited by a run, every `stride`-th one plus the last.
pub fn sampled_policies<T: Real>(run: &RunResult<T>, stride: usize) -> Vec<&Policy<T>> {
    let stride = stride.max(1);
    let n = run.trace.len();
    let mut out: Vec<&Policy<T>> = run.trace.iter().step_by(stride).map(|r| &r.pi_k).collect();
    if n > 0 && !(n - 1).is_multiple_of(stride) {
        out.push(&run.trace[n - 1].pi_k);
    }
    out.push(&run.pi_final);
    out
}

/// Smallest critic weight seen over a run.
pub fn running_sigma_floor<T: Real>(run: &RunResult<T>) -> T {
    run.trace.iter().fold(T::infinity(), |m, r| m.min(r.sigma_floor))
}

fn finish<T: Real>(
    mdp: &TabularMdp<T>,
    map: &MirrorMap<T>,
    pi0: &Policy<T>,
    pi_star: &Policy<T>,
    alpha: T,
    sigma_floor: T,
    mixing: MixingEstimate<T>,
) -> Result<BoundInputs<T>> {
    let d0 = initial_divergence(map, pi_star, pi0)?;
    let l_const = l_constant(mdp.num_actions(), &mixing);
    let inputs = BoundInputs {
        gamma: mdp.gamma(),
        alpha,
        lambda: map.lambda,
        card_a: mdp.num_actions(),
        card_s: mdp.num_states(),
        sigma_floor,
        mixing,
        d0,
        l_const,
    };
    inputs.validate()?;
    Ok(inputs)
}
