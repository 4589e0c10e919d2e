//! Runs the invariant checks of every module on one instance and reports
//! measured value against bound for each.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algo::{run_expected_td_pmd, weighted_bellman, AlgoConfig, AlgoKind, BatchSchedule, EtaMode};
use crate::chain::{d_tv, run_rng, stationary_dist, BehaviorModel, RunRng};
use crate::error::Result;
use crate::linalg::{max_abs, max_abs_diff, Matrix};
use crate::mdp::{
    bellman_q, optimal_bellman_q, perf_diff_check, policy_value, value_at, visitation, Policy, TabularMdp,
};
use crate::mirror::{shift_bound, MirrorMap};
use crate::oracle::{exact_pmd, value_iteration};
use crate::scalar::Real;

use super::constants::{extract_constants, tight_mixing};
use super::decomposition::bias_decomposition;

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub lemma: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&ReportEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Run parameters for the sampled checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Critic step. Values above one are accepted so that violations can be injected.
    pub alpha: f64,
    pub eta: f64,
    pub k_iters: usize,
    pub batch: usize,
    pub theta: f64,
    /// Random draws per contraction check.
    pub draws: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta: 0.1,
            k_iters: 20,
            batch: 16,
            theta: 0.5,
            draws: 200,
        }
    }
}

const ABS_SLACK: f64 = 1e-12;

fn entry<T: Real>(lemma: &str, measured: T, bound: T, slack: f64) -> ReportEntry {
    let (m, b) = (measured.to_f64_lossy(), bound.to_f64_lossy());
    ReportEntry {
        lemma: lemma.to_string(),
        pass: m.is_finite() && m <= b + slack,
        measured: m,
        bound: b,
    }
}

fn random_q<T: Real>(n: usize, hi: T, rng: &mut RunRng) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.random::<f64>()) * hi).collect()
}

fn random_policy<T: Real>(ns: usize, na: usize, rng: &mut RunRng) -> Result<Policy<T>> {
    let rows = (0..ns)
        .map(|_| {
            let w: Vec<f64> = (0..na).map(|_| rng.random::<f64>() + 1e-3).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| T::lit(x / z)).collect()
        })
        .collect();
    Policy::from_rows(rows)
}

fn ratio<T: Real>(num: T, den: T) -> T {
    if den > T::zero() {
        num / den
    } else {
        T::zero()
    }
}

/// Checks every invariant on `mdp` with data from `behavior`.
///
/// Sampled checks use one expected TD-PMD run per seed.
pub fn run_property_suite<T: Real>(
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    map: &MirrorMap<T>,
    seeds: &[u64],
    options: &SuiteOptions,
) -> Result<Report> {
    let (ns, na, n) = (mdp.num_states(), mdp.num_actions(), mdp.num_pairs());
    let gamma = mdp.gamma();
    let one = T::one();
    let g = one - gamma;
    let vmax = mdp.value_bound();
    let alpha = T::lit(options.alpha);
    let eta = T::lit(options.eta);
    let mu = vec![one / T::count(ns); ns];
    let mut out = Vec::new();
    let mut rng = run_rng(seeds.first().copied().unwrap_or(0), u64::MAX - 1);

    let sol = value_iteration(mdp, T::lit(1e-12))?;
    let (v_star, q_pi_star) = policy_value(mdp, &sol.pi_star)?;
    out.push(entry("optimal-q-consistency", max_abs_diff(&q_pi_star, &sol.q_star), T::lit(2e-10), 0.0));

    let mut pd = T::zero();
    let mut vis = T::zero();
    let mut bc = T::zero();
    let mut obc = T::zero();
    let mut wbc = T::zero();
    let mut shift = T::neg_infinity();
    for _ in 0..options.draws {
        let pi = random_policy::<T>(ns, na, &mut rng)?;
        let q1 = random_q(n, vmax, &mut rng);
        let q2 = random_q(n, vmax, &mut rng);
        let v: Vec<T> = random_q(ns, vmax, &mut rng);
        pd = pd.max(perf_diff_check(mdp, &pi, &v, &mu)?);
        let d = visitation(mdp, &pi, &mu)?;
        let total: T = d.iter().copied().sum();
        let neg = d.iter().fold(T::zero(), |m, &x| m.max(-x));
        vis = vis.max((total - one).abs()).max(neg);
        let dq = max_abs_diff(&q1, &q2);
        bc = bc.max(ratio(max_abs_diff(&bellman_q(mdp, &pi, &q1), &bellman_q(mdp, &pi, &q2)), dq));
        obc = obc.max(ratio(max_abs_diff(&optimal_bellman_q(mdp, &q1), &optimal_bellman_q(mdp, &q2)), dq));
        let w1 = weighted_bellman(mdp, &pi, &behavior.sigma, alpha, &q1)?;
        let w2 = weighted_bellman(mdp, &pi, &behavior.sigma, alpha, &q2)?;
        wbc = wbc.max(ratio(max_abs_diff(&w1, &w2), dq));
        let next = map.pmd_update(&pi, &q1, eta)?;
        for s in 0..ns {
            let moved = max_abs_diff(next.row(s), pi.row(s));
            shift = shift.max(moved - shift_bound(map, &q1[s * na..(s + 1) * na], eta));
        }
    }
    out.push(entry("performance-difference", pd, T::lit(1e-9), 0.0));
    out.push(entry("visitation-distribution", vis, T::lit(1e-10), 0.0));
    out.push(entry("bellman-contraction", bc, gamma, ABS_SLACK));
    out.push(entry("optimal-bellman-contraction", obc, gamma, ABS_SLACK));
    let rho = one - alpha * g * behavior.sigma_floor;
    out.push(entry("weighted-bellman-contraction", wbc, rho, ABS_SLACK));
    out.push(entry("policy-shift", shift.max(T::zero()), T::zero(), ABS_SLACK));

    let pi0 = Policy::uniform(ns, na);
    let k_exact = 50;
    let seq = exact_pmd(mdp, map, eta, k_exact, &pi0)?;
    let v_star_mu = value_at(&v_star, &mu);
    let mut avg = T::zero();
    for (pi, _) in &seq {
        avg = avg + v_star_mu - value_at(&policy_value(mdp, pi)?.0, &mu);
    }
    avg = avg / T::count(k_exact + 1);
    let d0 = map.max_divergence(&sol.pi_star, &pi0)?;
    let exact_bound = (d0 / (eta * g) + one / (g * g)) / T::count(k_exact + 1);
    out.push(entry("exact-pmd-bound", avg, exact_bound, ABS_SLACK));

    let inputs = extract_constants(mdp, behavior, map, &pi0, &sol.pi_star, alpha.min(one))?;
    let config = AlgoConfig {
        algo_kind: AlgoKind::Expected,
        map: map.kind,
        k: options.k_iters,
        alpha: options.alpha,
        eta_mode: EtaMode::Constant(options.eta),
        batch_schedule: BatchSchedule::Constant(options.batch),
        theta: options.theta,
        seed: 0,
        run_id: 0,
        noise_free: false,
        s0: 0,
    };
    let mut excursion = T::zero();
    let mut telescoping = T::zero();
    let (mut c_sum, mut d_sum, mut e_sum) = (T::zero(), T::zero(), T::zero());
    let mut b0_excess = T::neg_infinity();
    let k_probe = options.k_iters;
    for &seed in seeds {
        let run = run_expected_td_pmd(mdp, behavior, &config, &mut run_rng(seed, 0))?;
        for q in run.q_iterates() {
            for &x in q.iter() {
                excursion = excursion.max(-x).max(x - vmax);
            }
        }
        for s in 0..ns {
            let dec = bias_decomposition(&run, k_probe, mdp, behavior, alpha, &sol.pi_star, s)?;
            telescoping = telescoping.max(dec.residual / (one + dec.lhs.abs()));
            let abs_sum = |v: &[T]| v.iter().map(|x| x.abs()).sum::<T>();
            c_sum = c_sum.max(abs_sum(&dec.c));
            d_sum = d_sum.max(abs_sum(&dec.d));
            e_sum = e_sum.max(abs_sum(&dec.e));
            let b0_bound = T::lit(2.0) / g * rho.powi(k_probe as i32);
            b0_excess = b0_excess.max(dec.b0.abs() - b0_bound);
        }
    }
    let a2 = T::count(na * na);
    let lam = map.lambda;
    let sb = behavior.sigma_floor;
    out.push(entry("critic-bounded", excursion.max(T::zero()), T::zero(), ABS_SLACK));
    out.push(entry("telescoping-identity", telescoping, T::lit(1e-9), 0.0));
    out.push(entry("b0-term-bound", b0_excess.max(T::zero()), T::zero(), ABS_SLACK));
    let c_bound = T::lit(2.0) * gamma * a2 * eta / (alpha * lam * sb * g.powi(4));
    out.push(entry("c-term-bound", c_sum, c_bound, ABS_SLACK));
    let d_bound = a2 * eta / (alpha * lam * sb * g.powi(3));
    out.push(entry("d-term-bound", d_sum, d_bound, ABS_SLACK));
    let e_bound = T::lit(2.0) * gamma * a2 * eta / (alpha * lam * sb * sb * g.powi(4));
    out.push(entry("e-term-bound", e_sum, e_bound, ABS_SLACK));

    let moment_config = AlgoConfig {
        theta: 1.0,
        ..config.clone()
    };
    let mut moment = T::zero();
    let mut count = 0usize;
    for &seed in seeds {
        let run = run_expected_td_pmd(mdp, behavior, &moment_config, &mut run_rng(seed, 1))?;
        for rec in &run.trace {
            moment = moment + max_abs(&rec.omega_bar);
            count += 1;
        }
    }
    let moment = moment / T::count(count.max(1));
    let moment_bound = inputs.noise_constant() / T::count(options.batch).sqrt();
    out.push(entry("noise-moment", moment, moment_bound, ABS_SLACK));

    let p = behavior.kernel(mdp);
    let mix = tight_mixing(&p, &behavior.nu)?;
    let mut worst = T::neg_infinity();
    for _ in 0..10 {
        let eps = T::lit(0.05 * rng.random::<f64>());
        let target = random_policy::<T>(ns, ns, &mut rng)?;
        let perturbed = Matrix::from_fn(ns, ns, |i, j| (one - eps) * p[(i, j)] + eps * target.prob(i, j));
        let nu2 = stationary_dist(&perturbed)?;
        let dist = perturbed.sub(&p).inf_norm();
        let tv = d_tv(&behavior.nu, &nu2);
        worst = worst.max(tv - mix.perturbation_constant() * dist);
    }
    out.push(entry("stationary-perturbation", worst.max(T::zero()), T::zero(), ABS_SLACK));

    Ok(Report { entries: out })
}
