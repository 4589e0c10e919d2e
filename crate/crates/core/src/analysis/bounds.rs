//! Right-hand sides of the convergence guarantees and the step-size and batch
//! schedules that make them smaller than a target accuracy.
//!
//! All mixing constants are estimated, so every value returned here is an
//! estimated-constant bound.

use serde::{Deserialize, Serialize};

use crate::algo::BatchSchedule;
use crate::chain::MixingEstimate;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Problem constants the guarantees depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs<T> {
    pub gamma: T,
    pub alpha: T,
    pub lambda: T,
    pub card_a: usize,
    pub card_s: usize,
    /// `σ̃`: smallest stationary state-action weight (running minimum for mixed sampling).
    pub sigma_floor: T,
    pub mixing: MixingEstimate<T>,
    /// `‖D^{π*}_{π_0}‖∞`.
    pub d0: T,
    /// `|A| (⌈log_κ m^{-1}⌉ + 1/(1-κ))`.
    pub l_const: T,
}

impl<T: Real> BoundInputs<T> {
    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        if !(self.gamma >= zero && self.gamma < one) {
            return Err(Error::invalid("gamma", "outside [0, 1)"));
        }
        if !(self.alpha > zero && self.alpha <= one) {
            return Err(Error::invalid("alpha", "outside (0, 1]"));
        }
        if !(self.lambda > zero) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        if !(self.sigma_floor > zero && self.sigma_floor <= one) {
            return Err(Error::invalid("sigma_floor", "outside (0, 1]"));
        }
        if !(self.mixing.kappa > zero && self.mixing.kappa < one) {
            return Err(Error::invalid("kappa", "outside (0, 1)"));
        }
        if !(self.mixing.m > zero) {
            return Err(Error::invalid("m", "must be positive"));
        }
        if self.card_a == 0 || self.card_s == 0 {
            return Err(Error::invalid("cardinality", "state and action counts must be positive"));
        }
        Ok(())
    }

    /// Critic contraction rate `ρ = 1 - (1-γ) α σ̃`.
    pub fn rho(&self) -> T {
        T::one() - (T::one() - self.gamma) * self.alpha * self.sigma_floor
    }

    /// Noise constant `C₁ = (4|S||A|/(1-γ)² · (1 + m/(1-κ)))^{1/2}`.
    pub fn noise_constant(&self) -> T {
        noise_constant(self.card_s, self.card_a, self.gamma, self.mixing.m, self.mixing.kappa)
    }
}

/// `L = |A| (⌈log_κ m^{-1}⌉ + 1/(1-κ))`.
pub fn l_constant<T: Real>(card_a: usize, mixing: &MixingEstimate<T>) -> T {
    T::count(card_a) * mixing.perturbation_constant()
}

/// `(4|S||A|/(1-γ)² · (1 + m/(1-κ)))^{1/2}`.
pub fn noise_constant<T: Real>(card_s: usize, card_a: usize, gamma: T, m: T, kappa: T) -> T {
    let one = T::one();
    let g = one - gamma;
    (T::lit(4.0) * T::count(card_s * card_a) / (g * g) * (one + m / (one - kappa))).sqrt()
}

/// Mixing-bias term of the constant-step analysis, by the four regimes of `ϑ` against `κ`.
pub fn psi_bound<T: Real>(batch: usize, theta: T, m: T, kappa: T, gamma: T) -> T {
    let one = T::one();
    let g = one - gamma;
    let b = T::count(batch);
    if theta == one {
        m / (b * g * (one - kappa))
    } else if theta < kappa {
        m * kappa.powf(b) / (g * (kappa - theta))
    } else if theta == kappa {
        m * b * theta.powf(b - one) / g
    } else {
        m * theta.powf(b) / (g * (theta - kappa))
    }
}

/// `Ξ(t) = Σ_{k<t} ρ^{t-1-k} B_k^{-1/2}` with `ρ = 1 - (1-γ) α σ̃`.
pub fn xi<T: Real>(t: usize, alpha: T, sigma_floor: T, gamma: T, schedule: &BatchSchedule) -> T {
    let rho = T::one() - (T::one() - gamma) * alpha * sigma_floor;
    let mut acc = T::zero();
    for k in 0..t {
        acc = acc * rho + schedule.inv_sqrt::<T>(k);
    }
    acc
}

/// Guarantee to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    /// Average suboptimality of expected TD-PMD with a constant step.
    T1,
    /// Last-iterate `‖Q* - Q^{π_K}‖∞` of expected TD-PMD with adaptive steps.
    T2,
    /// Average suboptimality of approximate TD-PMD with a constant step.
    T3,
    /// Last-iterate `‖Q* - Q^{π_K}‖∞` of approximate TD-PMD with adaptive steps.
    T4,
    /// `‖Q* - Q^K‖∞` of batch Q-learning.
    Cor1,
}

fn constant_step_multiplier<T: Real>(which: Statement, inputs: &BoundInputs<T>) -> T {
    match which {
        Statement::T3 => T::lit(6.0) + T::lit(4.0) * inputs.l_const,
        _ => T::lit(6.0),
    }
}

/// Step size minimizing the constant-step bound:
/// `η = (α λ σ̃² (1-γ)⁴ ‖D‖ / (c |A|² (K+1)))^{1/2}` with `c = 6` or `6 + 4L`.
pub fn theorem_optimal_eta<T: Real>(which: Statement, inputs: &BoundInputs<T>, k_iters: usize) -> T {
    let g = T::one() - inputs.gamma;
    let a = T::count(inputs.card_a);
    let c = constant_step_multiplier(which, inputs);
    let s = inputs.sigma_floor;
    (inputs.alpha * inputs.lambda * s * s * g.powi(4) * inputs.d0 / (c * a * a * T::count(k_iters + 1))).sqrt()
}

/// Evaluates the right-hand side of `which`.
///
/// For the constant-step statements `T1`/`T3`, `eta = None` gives the closed
/// form at the optimal step; `Some(η)` gives the bound before the step is
/// optimized, valid for any constant `η > 0`. Those statements need a
/// constant batch schedule and use `theta`.
/// `T2`/`T4` need the adaptive base step `eta`; `Cor1` ignores it.
pub fn theorem_bound<T: Real>(
    which: Statement,
    inputs: &BoundInputs<T>,
    k_iters: usize,
    schedule: &BatchSchedule,
    theta: T,
    eta: Option<T>,
) -> Result<T> {
    inputs.validate()?;
    let one = T::one();
    let two = T::lit(2.0);
    let g = one - inputs.gamma;
    let (alpha, s) = (inputs.alpha, inputs.sigma_floor);
    let a = T::count(inputs.card_a);
    let kp1 = T::count(k_iters + 1);
    match which {
        Statement::T1 | Statement::T3 => {
            let batch = match schedule {
                BatchSchedule::Constant(b) => *b,
                _ => return Err(Error::invalid("batch_schedule", "constant-step bounds need a constant batch")),
            };
            if !(theta >= T::zero() && theta <= one) {
                return Err(Error::invalid("theta", "outside [0, 1]"));
            }
            let psi = psi_bound(batch, theta, inputs.mixing.m, inputs.mixing.kappa, inputs.gamma);
            let tail = two * psi / (s * g * g);
            let first = T::lit(3.0) / (kp1 * alpha * s * g.powi(3));
            let c = constant_step_multiplier(which, inputs);
            match eta {
                None => {
                    let mid = two / kp1.sqrt()
                        * (c * a * a * inputs.d0 / (alpha * inputs.lambda * s * s * g.powi(6))).sqrt();
                    Ok(first + mid + tail)
                }
                Some(eta) => {
                    if !(eta > T::zero()) {
                        return Err(Error::invalid("eta", "must be positive"));
                    }
                    let drift = inputs.d0 / (eta * g * kp1);
                    let shift = c * a * a * eta / (alpha * s * s * inputs.lambda * g.powi(5));
                    Ok(drift + first + shift + tail)
                }
            }
        }
        Statement::T2 | Statement::T4 => {
            if k_iters == 0 {
                return Err(Error::invalid("K", "last-iterate bounds need K >= 1"));
            }
            let eta = eta.ok_or_else(|| Error::invalid("eta", "adaptive bounds need the base step"))?;
            if !(eta > T::zero()) {
                return Err(Error::invalid("eta", "must be positive"));
            }
            let rho = inputs.rho();
            let c1 = inputs.noise_constant();
            let xi_k = xi(k_iters, alpha, s, inputs.gamma, schedule);
            let xi_km1 = xi(k_iters - 1, alpha, s, inputs.gamma, schedule);
            let last = schedule.inv_sqrt::<T>(k_iters - 1);
            Ok(two / (alpha * s * g * g) * rho.powi(k_iters as i32 - 1)
                + two * inputs.gamma / (alpha * eta * g * g * s * s)
                + c1 / (s * g) * (xi_k + xi_km1 + last))
        }
        Statement::Cor1 => {
            let rho = inputs.rho();
            let c1 = inputs.noise_constant();
            Ok(rho.powf(T::count(k_iters)) / g + alpha * c1 * xi(k_iters, alpha, s, inputs.gamma, schedule))
        }
    }
}

/// Which accuracy-driven schedule to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Constant step, constant batch, `0 < ϑ < κ`.
    ConstantStep,
    /// Adaptive step with geometrically growing batches.
    Adaptive,
    /// Batch Q-learning with geometrically growing batches.
    BatchQ,
}

/// `(K, η, B_k)` meeting a target accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct RemarkSchedule<T> {
    pub kind: ScheduleKind,
    pub k_iters: usize,
    /// Constant step for [`ScheduleKind::ConstantStep`], adaptive base step
    /// for [`ScheduleKind::Adaptive`], unused (zero) for batch Q-learning.
    pub eta: T,
    pub batch: BatchSchedule,
    /// `Σ_k B_k` over the iterations the algorithm performs.
    pub total_samples: u128,
    /// Closed-form upper bound on the total, where one is available.
    pub total_bound: Option<T>,
}

fn ceil_count<T: Real>(x: T, field: &str) -> Result<usize> {
    let x = x.ceil().max(T::one());
    x.to_usize()
        .ok_or_else(|| Error::invalid(field, format!("value {x} does not fit an iteration or batch count")))
}

/// Schedules for accuracy `eps`.
///
/// `theta` is only used by [`ScheduleKind::ConstantStep`].
pub fn remark_schedules<T: Real>(
    kind: ScheduleKind,
    eps: T,
    inputs: &BoundInputs<T>,
    theta: T,
) -> Result<RemarkSchedule<T>> {
    inputs.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let one = T::one();
    let g = one - inputs.gamma;
    let (alpha, s) = (inputs.alpha, inputs.sigma_floor);
    let mix = one + inputs.mixing.m / (one - inputs.mixing.kappa);
    let rho = inputs.rho();
    let gap = one - rho.sqrt();
    let card_sa = T::count(inputs.card_s * inputs.card_a);
    match kind {
        ScheduleKind::Adaptive => {
            let rate = one - g * alpha * s * s;
            let k_real = (T::lit(6.0) / (alpha * s * g * g * eps)).ln() / (one / rate).ln() + one;
            let k_iters = ceil_count(k_real, "K")?;
            let eta = T::lit(6.0) * inputs.gamma / (alpha * g * g * s * s * eps);
            let pre = T::lit(81.0) / (s * s * g * g) * (T::lit(4.0) * card_sa / (g * g) * mix) / (gap * gap);
            let batch = (0..=k_iters)
                .map(|k| {
                    let e = k_iters as i32 - k as i32 - 2;
                    ceil_count(pre * rho.powi(e) / (eps * eps), "B_k")
                })
                .collect::<Result<Vec<_>>>()?;
            let total = batch.iter().map(|&b| b as u128).sum();
            let total_bound = pre * rho.powi(-2) / (g * alpha * s) / (eps * eps);
            Ok(RemarkSchedule {
                kind,
                k_iters,
                eta,
                batch: BatchSchedule::Explicit(batch),
                total_samples: total,
                total_bound: Some(total_bound),
            })
        }
        ScheduleKind::BatchQ => {
            let k_real = (T::lit(2.0) / (eps * g)).ln() / (one / rho).ln();
            let k_iters = ceil_count(k_real, "K")?;
            let pre = T::lit(16.0) * alpha * alpha * card_sa / (eps * eps * g * g) * mix / (gap * gap);
            let batch = (0..k_iters)
                .map(|k| ceil_count(pre * rho.powi(k_iters as i32 - k as i32 - 1), "B_k"))
                .collect::<Result<Vec<_>>>()?;
            let total = batch.iter().map(|&b| b as u128).sum();
            Ok(RemarkSchedule {
                kind,
                k_iters,
                eta: T::zero(),
                batch: BatchSchedule::Explicit(batch),
                total_samples: total,
                total_bound: Some(pre / (g * alpha * s)),
            })
        }
        ScheduleKind::ConstantStep => {
            let kappa = inputs.mixing.kappa;
            if !(theta > T::zero() && theta < kappa) {
                return Err(Error::invalid("theta", "constant-step schedule needs 0 < theta < kappa"));
            }
            let a = T::count(inputs.card_a);
            let k1 = T::lit(9.0) / (alpha * s * g.powi(3) * eps);
            let k2 = T::lit(216.0) * a * a * inputs.d0 / (alpha * inputs.lambda * s * s * g.powi(6) * eps * eps);
            let k_iters = ceil_count(k1.max(k2), "K")?;
            let b_real = (T::lit(6.0) / eps * inputs.mixing.m / (s * g.powi(3) * (kappa - theta))).ln()
                / (one / kappa).ln();
            let b = ceil_count(b_real, "B")?;
            let eta = theorem_optimal_eta(Statement::T1, inputs, k_iters);
            Ok(RemarkSchedule {
                kind,
                k_iters,
                eta,
                batch: BatchSchedule::Constant(b),
                total_samples: (k_iters as u128 + 1) * b as u128,
                total_bound: None,
            })
        }
    }
}
