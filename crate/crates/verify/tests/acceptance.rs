//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use pmdlab::algo::{
    run_approximate_td_pmd, run_batch_q_learning, run_expected_td_pmd, weighted_bellman, AlgoConfig, AlgoKind,
    BatchSchedule, EtaMode, RunResult,
};
use pmdlab::analysis::{
    bias_decomposition, extract_constants, extract_constants_mixed, remark_schedules, running_sigma_floor,
    sampled_policies, theorem_bound, theorem_optimal_eta, tight_mixing, ScheduleKind, Statement,
};
use pmdlab::chain::{composed_weights, d_tv, run_rng, stationary_dist, BehaviorModel};
use pmdlab::garnet::{gen_garnet, GarnetSpec};
use pmdlab::linalg::{max_abs, max_abs_diff, Matrix};
use pmdlab::mdp::{bellman_q, optimal_bellman_q, policy_value, value_at, Policy, TabularMdp};
use pmdlab::mirror::{MirrorKind, MirrorMap};
use pmdlab::oracle::{exact_pmd, value_iteration, OptimalSolution};
use rand::Rng;

type Mdp = TabularMdp<f64>;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn garnet(ns: usize, na: usize, b: usize, seed: u64, gamma: f64) -> Mdp {
    let spec = GarnetSpec {
        num_states: ns,
        num_actions: na,
        branching: b,
        seed,
    };
    gen_garnet(&spec, gamma).expect("valid garnet")
}

fn solve(mdp: &Mdp) -> OptimalSolution<f64> {
    value_iteration(mdp, 1e-12).expect("value iteration")
}

fn uniform_mu(ns: usize) -> Vec<f64> {
    vec![1.0 / ns as f64; ns]
}

fn config(kind: AlgoKind, map: MirrorKind, k: usize, alpha: f64, eta: EtaMode, batch: BatchSchedule, theta: f64) -> AlgoConfig {
    AlgoConfig {
        algo_kind: kind,
        map,
        k,
        alpha,
        eta_mode: eta,
        batch_schedule: batch,
        theta,
        seed: 0,
        run_id: 0,
        noise_free: false,
        s0: 0,
    }
}

fn run(mdp: &Mdp, behavior: &BehaviorModel<f64>, cfg: &AlgoConfig, seed: u64) -> RunResult<f64> {
    let mut rng = run_rng(seed, cfg.run_id);
    match cfg.algo_kind {
        AlgoKind::Expected => run_expected_td_pmd(mdp, behavior, cfg, &mut rng),
        AlgoKind::Approximate => run_approximate_td_pmd(mdp, &behavior.pi_b, cfg, &mut rng),
        AlgoKind::BatchQ => run_batch_q_learning(mdp, behavior, cfg, &mut rng),
    }
    .expect("run succeeds")
}

/// Mean over `k = 0..=K` of `V*(μ) - V^{π_k}(μ)`: the expectation over a uniform `K̂`.
fn mean_suboptimality(mdp: &Mdp, v_star: &[f64], run: &RunResult<f64>) -> f64 {
    let mu = uniform_mu(mdp.num_states());
    let top = value_at(v_star, &mu);
    let total: f64 = run
        .trace
        .iter()
        .map(|r| top - value_at(&policy_value(mdp, &r.pi_k).expect("evaluation").0, &mu))
        .sum();
    total / run.trace.len() as f64
}

// 1
const ORACLE_GAP_TOL: f64 = 2e-10;
const ORACLE_TIME_LIMIT_S: f64 = 1.0;

fn oracle_consistency() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mdp = garnet(10, 5, 3, seed, 0.9);
        let sol = solve(&mdp);
        let (_, q_pi) = policy_value(&mdp, &sol.pi_star).expect("evaluation");
        worst = worst.max(max_abs_diff(&q_pi, &sol.q_star));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= ORACLE_GAP_TOL && secs < ORACLE_TIME_LIMIT_S,
        detail: format!("max |Q^pi* - Q*| = {worst:.2e} <= {ORACLE_GAP_TOL:.0e}, {secs:.3} s < {ORACLE_TIME_LIMIT_S} s"),
    }
}

// 2
const EXACT_PMD_K: usize = 500;

fn exact_pmd_bound() -> Outcome {
    let mut min_slack = f64::INFINITY;
    for seed in 0..10 {
        let mdp = garnet(10, 5, 3, 100 + seed, 0.9);
        let sol = solve(&mdp);
        let mu = uniform_mu(10);
        let top = value_at(&sol.v_star, &mu);
        let pi0 = Policy::uniform(10, 5);
        let g = 1.0 - mdp.gamma();
        for kind in [MirrorKind::NegativeEntropy, MirrorKind::SquaredL2] {
            let map = MirrorMap::new(kind);
            let d0 = map.max_divergence(&sol.pi_star, &pi0).expect("finite divergence");
            for eta in [0.1, 1.0, 10.0] {
                let seq = exact_pmd(&mdp, &map, eta, EXACT_PMD_K, &pi0).expect("exact pmd");
                let avg: f64 = seq
                    .iter()
                    .map(|(pi, _)| top - value_at(&policy_value(&mdp, pi).unwrap().0, &mu))
                    .sum::<f64>()
                    / (EXACT_PMD_K + 1) as f64;
                let bound = (d0 / (eta * g) + 1.0 / (g * g)) / (EXACT_PMD_K + 1) as f64;
                min_slack = min_slack.min(bound - avg);
            }
        }
    }
    Outcome {
        pass: min_slack >= 0.0,
        detail: format!("min(bound - mean suboptimality) = {min_slack:.3e} >= 0 over 10 instances x 2 maps x 3 steps"),
    }
}

// 3
const TELESCOPING_TOL: f64 = 1e-9;
const TELESCOPING_TIME_LIMIT_S: f64 = 30.0;

fn telescoping() -> Outcome {
    let start = Instant::now();
    let mut probe_rng = run_rng(2024, 3);
    let mut worst = [0.0f64; 2];
    for (slot, kind) in [AlgoKind::Expected, AlgoKind::Approximate].into_iter().enumerate() {
        for probe in 0..30 {
            let ns = probe_rng.random_range(3..=6);
            let na = probe_rng.random_range(2..=3);
            let inst: u64 = probe_rng.random_range(0..1000);
            let seed: u64 = probe_rng.random();
            let k = probe_rng.random_range(0..=20);
            let s = probe_rng.random_range(0..ns);
            let map = if probe % 2 == 0 {
                MirrorKind::NegativeEntropy
            } else {
                MirrorKind::SquaredL2
            };
            let mdp = garnet(ns, na, ns.min(3), inst, 0.9);
            let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
            let sol = solve(&mdp);
            let cfg = config(kind, map, k, 0.7, EtaMode::Constant(1.0), BatchSchedule::Constant(8), 0.5);
            let r = run(&mdp, &behavior, &cfg, seed);
            let dec = bias_decomposition(&r, k, &mdp, &behavior, 0.7, &sol.pi_star, s).expect("decomposition");
            worst[slot] = worst[slot].max(dec.residual / (1.0 + dec.lhs.abs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst.iter().all(|&w| w <= TELESCOPING_TOL) && secs < TELESCOPING_TIME_LIMIT_S,
        detail: format!(
            "relative residual expected {:.2e}, approximate {:.2e} <= {TELESCOPING_TOL:.0e}, {secs:.2} s",
            worst[0], worst[1]
        ),
    }
}

// 4
const CRITIC_RANGE_SLACK: f64 = 1e-12;

fn critic_bounded() -> Outcome {
    let mdp = garnet(5, 3, 5, 7, 0.9);
    let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
    let hi = mdp.value_bound();
    let mut violations = 0usize;
    let mut runs = 0usize;
    for kind in [AlgoKind::Expected, AlgoKind::Approximate, AlgoKind::BatchQ] {
        for map in [MirrorKind::NegativeEntropy, MirrorKind::SquaredL2] {
            let cfg = config(kind, map, 200, 1.0, EtaMode::Constant(1.0), BatchSchedule::Constant(8), 0.5);
            for seed in 0..100 {
                let r = run(&mdp, &behavior, &cfg, seed);
                runs += 1;
                for q in r.q_iterates() {
                    violations += q.iter().filter(|&&x| x < -CRITIC_RANGE_SLACK || x > hi + CRITIC_RANGE_SLACK).count();
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} entries outside [0, 1/(1-gamma)] over {runs} runs, K = 200"),
    }
}

// 5
fn qlearning_equivalence() -> Outcome {
    let k = 100;
    let mut mismatched = 0usize;
    let mut not_greedy = 0usize;
    for seed in 0..10u64 {
        let mdp = garnet(5, 3, 3, 40 + seed, 0.9);
        let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
        let pmd = config(
            AlgoKind::Expected,
            MirrorKind::SquaredL2,
            k,
            0.5,
            EtaMode::QlearningEquiv(1.0),
            BatchSchedule::Constant(8),
            1.0,
        );
        let q_cfg = AlgoConfig {
            algo_kind: AlgoKind::BatchQ,
            ..pmd.clone()
        };
        let a = run(&mdp, &behavior, &pmd, seed);
        let b = run(&mdp, &behavior, &q_cfg, seed);
        let qa = &a.trace[..=k];
        let qb = b.q_iterates();
        for (x, y) in qa.iter().zip(&qb) {
            if x.q_k.iter().zip(y.iter()).any(|(u, v)| u.to_bits() != v.to_bits()) {
                mismatched += 1;
            }
        }
        let na = mdp.num_actions();
        for j in 0..k {
            let q = &qa[j].q_k;
            let next = &qa[j + 1].pi_k;
            for s in 0..mdp.num_states() {
                let row = &q[s * na..(s + 1) * na];
                let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let off: f64 = (0..na).filter(|&a| row[a] < top).map(|a| next.prob(s, a)).sum();
                let on: f64 = (0..na).filter(|&a| row[a] == top).map(|a| next.prob(s, a)).sum();
                if off != 0.0 || on != 1.0 {
                    not_greedy += 1;
                }
            }
        }
    }
    Outcome {
        pass: mismatched == 0 && not_greedy == 0,
        detail: format!("{mismatched} critic iterates differ bitwise, {not_greedy} non-greedy policy rows (10 seeds, K = 100)"),
    }
}

// 6
const DOMINATION_K: usize = 2000;
const DOMINATION_B: usize = 64;
const DOMINATION_THETA: f64 = 0.5;
const DOMINATION_SEEDS: u64 = 200;
const MIXING_STRIDE: usize = 200;

fn theorem_domination() -> Outcome {
    let start = Instant::now();
    let alpha = 1.0;
    let mut lines = Vec::new();
    let mut pass = true;
    let batch = BatchSchedule::Constant(DOMINATION_B);
    for inst in 0..5u64 {
        let mdp = garnet(5, 3, 5, 200 + inst, 0.9);
        let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
        let sol = solve(&mdp);
        let map = MirrorMap::negative_entropy();
        let pi0 = Policy::uniform(5, 3);

        let c1 = extract_constants(&mdp, &behavior, &map, &pi0, &sol.pi_star, alpha).expect("constants");
        let eta1 = theorem_optimal_eta(Statement::T1, &c1, DOMINATION_K);
        let bound1 =
            theorem_bound(Statement::T1, &c1, DOMINATION_K, &batch, DOMINATION_THETA, None).expect("bound");
        let cfg = config(
            AlgoKind::Expected,
            MirrorKind::NegativeEntropy,
            DOMINATION_K,
            alpha,
            EtaMode::Constant(eta1),
            batch.clone(),
            DOMINATION_THETA,
        );
        let mut m1 = 0.0;
        for seed in 0..DOMINATION_SEEDS {
            m1 += mean_suboptimality(&mdp, &sol.v_star, &run(&mdp, &behavior, &cfg, seed));
        }
        m1 /= DOMINATION_SEEDS as f64;

        let probe = extract_constants_mixed(&mdp, &behavior.pi_b, &[&pi0, &sol.pi_star], &map, &pi0, &sol.pi_star, alpha)
            .expect("probe constants");
        let eta3 = theorem_optimal_eta(Statement::T3, &probe, DOMINATION_K);
        let cfg3 = AlgoConfig {
            algo_kind: AlgoKind::Approximate,
            eta_mode: EtaMode::Constant(eta3),
            ..cfg.clone()
        };
        let mut m3 = 0.0;
        let mut floor = probe.sigma_floor;
        let mut runs = Vec::with_capacity(DOMINATION_SEEDS as usize);
        for seed in 0..DOMINATION_SEEDS {
            let r = run(&mdp, &behavior, &cfg3, seed);
            m3 += mean_suboptimality(&mdp, &sol.v_star, &r);
            floor = floor.min(running_sigma_floor(&r));
            runs.push(r);
        }
        m3 /= DOMINATION_SEEDS as f64;
        let mut visited = vec![&pi0, &sol.pi_star];
        for r in &runs {
            visited.extend(sampled_policies(r, MIXING_STRIDE));
        }
        let mut c3 = extract_constants_mixed(&mdp, &behavior.pi_b, &visited, &map, &pi0, &sol.pi_star, alpha)
            .expect("realized constants");
        c3.sigma_floor = c3.sigma_floor.min(floor);
        let bound3 =
            theorem_bound(Statement::T3, &c3, DOMINATION_K, &batch, DOMINATION_THETA, Some(eta3)).expect("bound");

        pass &= m1 <= bound1 && m3 <= bound3;
        lines.push(format!("[{m1:.3e} <= {bound1:.3e}; {m3:.3e} <= {bound3:.3e}]"));
    }
    Outcome {
        pass,
        detail: format!(
            "seed-averaged suboptimality vs bound, expected then approximate: {} ({:.1} s)",
            lines.join(" "),
            start.elapsed().as_secs_f64()
        ),
    }
}

// 7
const SLOPE_EPS: [f64; 3] = [0.4, 0.2, 0.1];
const SLOPE_SEEDS: u64 = 50;
const SLOPE_RANGE: (f64, f64) = (-2.4, -1.6);
/// Samples the suite may draw for this criterion, about one minute of sampling.
const SLOPE_SAMPLE_BUDGET: u128 = 2_000_000_000;

fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn adaptive_slope() -> Outcome {
    let mdp = garnet(6, 2, 6, 0, 0.1);
    let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
    let sol = solve(&mdp);
    let map = MirrorMap::negative_entropy();
    let pi0 = Policy::uniform(6, 2);
    let inputs = extract_constants(&mdp, &behavior, &map, &pi0, &sol.pi_star, 1.0).expect("constants");
    let schedules: Vec<_> = SLOPE_EPS
        .iter()
        .map(|&eps| remark_schedules(ScheduleKind::Adaptive, eps, &inputs, 0.0).expect("schedule"))
        .collect();
    let lx: Vec<f64> = SLOPE_EPS.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = schedules.iter().map(|s| (s.total_samples as f64).ln()).collect();
    let slope = regression_slope(&lx, &ly);
    let slope_ok = slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1;
    let needed: u128 = schedules.iter().map(|s| s.total_samples).sum::<u128>() * SLOPE_SEEDS as u128;

    // Noise-free runs at the scheduled K and step: the infinite-batch limit, not counted.
    let limit: Vec<String> = schedules
        .iter()
        .map(|s| {
            let mut cfg = config(
                AlgoKind::Expected,
                MirrorKind::NegativeEntropy,
                s.k_iters,
                1.0,
                EtaMode::Adaptive(s.eta),
                s.batch.clone(),
                1.0,
            );
            cfg.noise_free = true;
            let r = run(&mdp, &behavior, &cfg, 0);
            let (_, q) = policy_value(&mdp, &r.pi_last).expect("evaluation");
            format!("{:.1e}", max_abs_diff(&q, &sol.q_star))
        })
        .collect();

    if needed > SLOPE_SAMPLE_BUDGET {
        return Outcome {
            pass: false,
            detail: format!(
                "slope {slope:.3} (in range: {slope_ok}); sampled accuracy not measured: the schedules need {:.3e} \
                 samples for {SLOPE_SEEDS} seeds, budget {:.1e}; noise-free limit errors {}",
                needed as f64,
                SLOPE_SAMPLE_BUDGET as f64,
                limit.join(", ")
            ),
        };
    }
    let mut errors = Vec::new();
    for (s, &eps) in schedules.iter().zip(&SLOPE_EPS) {
        let cfg = config(
            AlgoKind::Expected,
            MirrorKind::NegativeEntropy,
            s.k_iters,
            1.0,
            EtaMode::Adaptive(s.eta),
            s.batch.clone(),
            1.0,
        );
        let mut mean = 0.0;
        for seed in 0..SLOPE_SEEDS {
            let r = run(&mdp, &behavior, &cfg, seed);
            let (_, q) = policy_value(&mdp, &r.pi_last).expect("evaluation");
            mean += max_abs_diff(&q, &sol.q_star);
        }
        errors.push((mean / SLOPE_SEEDS as f64, eps));
    }
    Outcome {
        pass: slope_ok && errors.iter().all(|(m, e)| m <= e),
        detail: format!("slope {slope:.3}, errors {errors:?}"),
    }
}

// 8
const MOMENT_SEEDS: u64 = 500;
const MOMENT_BATCHES: [usize; 3] = [16, 64, 256];
const MOMENT_RATIO_FACTOR: f64 = 1.5;

fn noise_moment() -> Outcome {
    let mdp = garnet(3, 2, 3, 1, 0.9);
    let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
    let sol = solve(&mdp);
    let map = MirrorMap::negative_entropy();
    let inputs =
        extract_constants(&mdp, &behavior, &map, &Policy::uniform(3, 2), &sol.pi_star, 1.0).expect("constants");
    let c1 = inputs.noise_constant();
    let mut means = Vec::new();
    let mut pass = true;
    for &b in &MOMENT_BATCHES {
        let cfg = config(
            AlgoKind::Expected,
            MirrorKind::NegativeEntropy,
            10,
            1.0,
            EtaMode::Constant(1.0),
            BatchSchedule::Constant(b),
            1.0,
        );
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..MOMENT_SEEDS {
            for rec in &run(&mdp, &behavior, &cfg, seed).trace {
                total += max_abs(&rec.omega_bar);
                count += 1;
            }
        }
        let mean = total / count as f64;
        pass &= mean <= c1 / (b as f64).sqrt();
        means.push(mean);
    }
    let mut ratios = Vec::new();
    for w in means.windows(2).zip(MOMENT_BATCHES.windows(2)) {
        let (m, b) = w;
        let ratio = m[0] / m[1];
        let expected = (b[1] as f64 / b[0] as f64).sqrt();
        pass &= ratio >= expected / MOMENT_RATIO_FACTOR && ratio <= expected * MOMENT_RATIO_FACTOR;
        ratios.push(ratio);
    }
    Outcome {
        pass,
        detail: format!(
            "mean |omega|_inf {:?} vs C1/sqrt(B) {:?}; consecutive ratios {:?} vs 2 within x{MOMENT_RATIO_FACTOR}",
            means.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>(),
            MOMENT_BATCHES.iter().map(|&b| format!("{:.3e}", c1 / (b as f64).sqrt())).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
        ),
    }
}

// 9
const PERTURBATION_SIZE: f64 = 0.05;

fn stationary_perturbation() -> Outcome {
    let mut rng = run_rng(99, 9);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let random_stochastic = |rng: &mut pmdlab::chain::RunRng| {
        let mut m = Matrix::<f64>::from_fn(5, 5, |_, _| rng.random::<f64>() + 1e-3);
        for i in 0..5 {
            let z: f64 = m.row(i).iter().sum();
            for j in 0..5 {
                m[(i, j)] /= z;
            }
        }
        m
    };
    for _ in 0..20 {
        let p = random_stochastic(&mut rng);
        let r = random_stochastic(&mut rng);
        let nu = stationary_dist(&p).expect("stationary");
        let est = tight_mixing(&p, &nu).expect("certified envelope");
        // ‖P - P̃‖∞ = ε ‖P - R‖∞ <= 2ε
        let eps = PERTURBATION_SIZE / 2.0 * rng.random::<f64>();
        let q = Matrix::from_fn(5, 5, |i, j| (1.0 - eps) * p[(i, j)] + eps * r[(i, j)]);
        let dist = p.sub(&q).inf_norm();
        assert!(dist <= PERTURBATION_SIZE);
        let nu2 = stationary_dist(&q).expect("stationary");
        let slack = est.perturbation_constant() * dist - d_tv(&nu, &nu2);
        worst = worst.max(-slack);
        if slack < 0.0 {
            violations += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations on 20 chains; largest excess {worst:.3e}"),
    }
}

// 10
const CONTRACTION_DRAWS: usize = 1000;
const CONTRACTION_SLACK: f64 = 1e-12;

fn contraction() -> Outcome {
    let mdp = garnet(6, 3, 3, 5, 0.9);
    let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
    let gamma = mdp.gamma();
    let alpha = 0.8;
    let mut rng = run_rng(10, 10);
    let n = mdp.num_pairs();
    let mut excess = [f64::NEG_INFINITY; 4];
    for _ in 0..CONTRACTION_DRAWS {
        let q1: Vec<f64> = (0..n).map(|_| 20.0 * rng.random::<f64>() - 10.0).collect();
        let q2: Vec<f64> = (0..n).map(|_| 20.0 * rng.random::<f64>() - 10.0).collect();
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            })
            .collect();
        let pi = Policy::from_rows(rows).expect("policy");
        let dq = max_abs_diff(&q1, &q2);
        let r0 = max_abs_diff(&bellman_q(&mdp, &pi, &q1), &bellman_q(&mdp, &pi, &q2)) / dq;
        excess[0] = excess[0].max(r0 - gamma);
        let r1 = max_abs_diff(&optimal_bellman_q(&mdp, &q1), &optimal_bellman_q(&mdp, &q2)) / dq;
        excess[1] = excess[1].max(r1 - gamma);
        let w = &behavior.sigma;
        let r2 = max_abs_diff(
            &weighted_bellman(&mdp, &pi, w, alpha, &q1).unwrap(),
            &weighted_bellman(&mdp, &pi, w, alpha, &q2).unwrap(),
        ) / dq;
        excess[2] = excess[2].max(r2 - (1.0 - alpha * (1.0 - gamma) * behavior.sigma_floor));
        let wc = composed_weights(&mdp, &behavior.pi_b, &pi).expect("composed weights");
        let floor = wc.iter().cloned().fold(f64::INFINITY, f64::min);
        let r3 = max_abs_diff(
            &weighted_bellman(&mdp, &pi, &wc, alpha, &q1).unwrap(),
            &weighted_bellman(&mdp, &pi, &wc, alpha, &q2).unwrap(),
        ) / dq;
        excess[3] = excess[3].max(r3 - (1.0 - alpha * (1.0 - gamma) * floor));
    }
    Outcome {
        pass: excess.iter().all(|&e| e <= CONTRACTION_SLACK),
        detail: format!(
            "largest ratio minus factor: policy {:.2e}, optimal {:.2e}, off-policy weighted {:.2e}, mixed weighted {:.2e}",
            excess[0], excess[1], excess[2], excess[3]
        ),
    }
}

// 11
const BATCH_Q_EPS: f64 = 0.1;
const BATCH_Q_SEEDS: u64 = 50;
const BATCH_Q_INSTANCES: [u64; 3] = [31, 3, 14];

fn batch_q_accuracy() -> Outcome {
    let start = Instant::now();
    let mut means = Vec::new();
    for &inst in &BATCH_Q_INSTANCES {
        let mdp = garnet(2, 2, 2, inst, 0.1);
        let behavior = BehaviorModel::uniform(&mdp).expect("ergodic");
        let sol = solve(&mdp);
        let inputs = extract_constants(&mdp, &behavior, &MirrorMap::squared_l2(), &Policy::uniform(2, 2), &sol.pi_star, 1.0)
            .expect("constants");
        let sched = remark_schedules(ScheduleKind::BatchQ, BATCH_Q_EPS, &inputs, 0.0).expect("schedule");
        let cfg = config(
            AlgoKind::BatchQ,
            MirrorKind::SquaredL2,
            sched.k_iters,
            1.0,
            EtaMode::Constant(0.0),
            sched.batch.clone(),
            1.0,
        );
        let mut mean = 0.0;
        for seed in 0..BATCH_Q_SEEDS {
            mean += max_abs_diff(&run(&mdp, &behavior, &cfg, seed).q_final, &sol.q_star);
        }
        means.push(mean / BATCH_Q_SEEDS as f64);
    }
    Outcome {
        pass: means.iter().all(|&m| m <= BATCH_Q_EPS),
        detail: format!(
            "mean |Q* - Q^K|_inf {:?} <= {BATCH_Q_EPS} ({:.1} s)",
            means.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("oracle consistency", oracle_consistency),
        ("exact PMD average suboptimality bound", exact_pmd_bound),
        ("pathwise bias telescoping", telescoping),
        ("critic stays in [0, 1/(1-gamma)]", critic_bounded),
        ("squared-l2 TD-PMD equals batch Q-learning", qlearning_equivalence),
        ("constant-step bounds dominate suboptimality", theorem_domination),
        ("adaptive-step sample complexity slope", adaptive_slope),
        ("batch noise moment scaling", noise_moment),
        ("stationary distribution perturbation", stationary_perturbation),
        ("operator contraction factors", contraction),
        ("batch Q-learning accuracy schedule", batch_q_accuracy),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.contains(&(i + 1)) {
            continue;
        }
        let out = check();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
