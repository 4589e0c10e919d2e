use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use pmdlab::algo::{run_config, AlgoConfig, AlgoKind, RunResult};
use pmdlab::analysis::{bias_decomposition, run_property_suite, BiasDecomposition, SuiteOptions};
use pmdlab::chain::{run_rng, BehaviorModel};
use pmdlab::garnet::{gen_garnet, GarnetSpec};
use pmdlab::linalg::{max_abs, max_abs_diff};
use pmdlab::mdp::{policy_value, value_at, MdpJson, Policy, TabularMdp};
use pmdlab::mirror::{MirrorKind, MirrorMap};
use pmdlab::oracle::{value_iteration, OptimalSolution};

use crate::output::{csv_line, read_json, write_file, write_json, Cell, CliError, CliResult};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "PMDLAB_SEED";

/// Tolerance used for the optimal values every command compares against.
pub const SOLVE_TOL: f64 = 1e-12;

pub fn resolve_seed(flag: Option<u64>) -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

pub fn parse_map(s: &str) -> Result<MirrorKind, String> {
    match s {
        "negative-entropy" | "entropy" => Ok(MirrorKind::NegativeEntropy),
        "squared-l2" | "l2" => Ok(MirrorKind::SquaredL2),
        _ => Err(format!("unknown map `{s}`, expected negative-entropy or squared-l2")),
    }
}

/// Where the MDP comes from: a JSON file, or a Garnet instance.
#[derive(Args, Debug, Clone)]
pub struct MdpArgs {
    /// MDP JSON as written by `gen`.
    #[arg(long, conflicts_with_all = ["states", "actions", "branching", "gamma", "garnet_seed"])]
    pub mdp: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub states: usize,
    #[arg(long, default_value_t = 5)]
    pub actions: usize,
    #[arg(long, default_value_t = 3)]
    pub branching: usize,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Seed of the generated instance when `--mdp` is absent.
    #[arg(long, default_value_t = 0)]
    pub garnet_seed: u64,
}

impl MdpArgs {
    pub fn load(&self) -> CliResult<TabularMdp<f64>> {
        match &self.mdp {
            Some(path) => {
                let j: MdpJson = read_json(path)?;
                Ok(TabularMdp::from_json(&j)?)
            }
            None => {
                let spec = GarnetSpec {
                    num_states: self.states,
                    num_actions: self.actions,
                    branching: self.branching,
                    seed: self.garnet_seed,
                };
                Ok(gen_garnet(&spec, self.gamma)?)
            }
        }
    }
}

pub fn load_behavior(mdp: &TabularMdp<f64>, path: Option<&Path>) -> CliResult<BehaviorModel<f64>> {
    match path {
        None => Ok(BehaviorModel::uniform(mdp)?),
        Some(p) => {
            let rows: Vec<Vec<f64>> = read_json(p)?;
            let pi = Policy::from_rows(rows)?;
            if (pi.num_states(), pi.num_actions()) != (mdp.num_states(), mdp.num_actions()) {
                return Err(CliError::Usage(format!("{}: policy shape does not match the MDP", p.display())));
            }
            Ok(BehaviorModel::new(mdp, pi)?)
        }
    }
}

pub fn load_mu(ns: usize, path: Option<&Path>) -> CliResult<Vec<f64>> {
    match path {
        None => Ok(vec![1.0 / ns as f64; ns]),
        Some(p) => {
            let mu: Vec<f64> = read_json(p)?;
            let ok = mu.len() == ns && mu.iter().all(|&x| x >= 0.0) && (mu.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
            if !ok {
                return Err(CliError::Usage(format!(
                    "{}: mu must be a distribution over {ns} states",
                    p.display()
                )));
            }
            Ok(mu)
        }
    }
}

pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<AlgoConfig> {
    let mut cfg: AlgoConfig = read_json(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(mdp: &TabularMdp<f64>, behavior: &BehaviorModel<f64>, cfg: &AlgoConfig) -> CliResult<RunResult<f64>> {
    let mut rng = run_rng(cfg.seed, cfg.run_id);
    Ok(run_config(mdp, behavior, cfg, &mut rng)?)
}

// gen

pub fn gen(mdp: &MdpArgs, seed: Option<u64>, out: &Path) -> CliResult<()> {
    if mdp.mdp.is_some() {
        return Err(CliError::Usage("gen builds a Garnet instance; --mdp is not accepted".into()));
    }
    let spec = GarnetSpec {
        num_states: mdp.states,
        num_actions: mdp.actions,
        branching: mdp.branching,
        seed: seed.unwrap_or(mdp.garnet_seed),
    };
    let m = gen_garnet::<f64>(&spec, mdp.gamma)?;
    write_json(out, &m.to_json())
}

// solve

pub fn solve(mdp: &MdpArgs, tol: f64, out: &Path) -> CliResult<()> {
    let m = mdp.load()?;
    let sol = value_iteration(&m, tol)?;
    write_json(out, &sol.to_json())
}

// run

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a AlgoConfig,
    total_samples: u64,
    /// Index of the uniformly drawn output iterate.
    hat_index: usize,
    subopt_last: f64,
    subopt_hat: f64,
    qstar_gap_final: f64,
    q_final: &'a [f64],
    pi_final: Vec<Vec<f64>>,
    pi_last: Vec<Vec<f64>>,
}

pub fn optimal(mdp: &TabularMdp<f64>) -> CliResult<OptimalSolution<f64>> {
    Ok(value_iteration(mdp, SOLVE_TOL)?)
}

/// `V*(μ) - V^π(μ)`.
pub fn suboptimality(mdp: &TabularMdp<f64>, v_star: &[f64], pi: &Policy<f64>, mu: &[f64]) -> CliResult<f64> {
    let (v, _) = policy_value(mdp, pi)?;
    Ok(value_at(v_star, mu) - value_at(&v, mu))
}

pub const RUN_HEADER: &str = "k,eta_k,b_k,samples_cum,subopt_V,qstar_gap,critic_gap,omega_inf\n";

/// The per-iteration CSV.
pub fn run_csv(mdp: &TabularMdp<f64>, sol: &OptimalSolution<f64>, run: &RunResult<f64>, mu: &[f64]) -> CliResult<String> {
    let mut out = String::from(RUN_HEADER);
    let top = value_at(&sol.v_star, mu);
    for rec in &run.trace {
        let (v, q_pi) = policy_value(mdp, &rec.pi_k)?;
        out.push_str(&csv_line(&[
            Cell::Int(rec.k as u128),
            Cell::Float(rec.eta_k),
            Cell::Int(rec.b_k as u128),
            Cell::Int(u128::from(rec.samples_cumulative)),
            Cell::Float(top - value_at(&v, mu)),
            Cell::Float(max_abs_diff(&sol.q_star, &rec.q_k)),
            Cell::Float(max_abs_diff(&q_pi, &rec.q_k)),
            Cell::Float(max_abs(&rec.omega_bar)),
        ]));
    }
    Ok(out)
}

pub struct RunArgs<'a> {
    pub mdp: &'a MdpArgs,
    pub config: &'a Path,
    pub behavior: Option<&'a Path>,
    pub mu: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out_dir: &'a Path,
}

pub fn run(args: RunArgs<'_>) -> CliResult<()> {
    let mdp = args.mdp.load()?;
    let cfg = load_config(args.config, args.seed)?;
    let behavior = load_behavior(&mdp, args.behavior)?;
    let mu = load_mu(mdp.num_states(), args.mu)?;
    let sol = optimal(&mdp)?;
    let result = execute(&mdp, &behavior, &cfg)?;
    write_file(&args.out_dir.join("run.csv"), &run_csv(&mdp, &sol, &result, &mu)?)?;
    let summary = RunSummary {
        config: &cfg,
        total_samples: result.total_samples,
        hat_index: result.hat_index,
        subopt_last: suboptimality(&mdp, &sol.v_star, &result.pi_last, &mu)?,
        subopt_hat: suboptimality(&mdp, &sol.v_star, &result.pi_hat, &mu)?,
        qstar_gap_final: max_abs_diff(&sol.q_star, &result.q_final),
        q_final: &result.q_final,
        pi_final: result.pi_final.rows(),
        pi_last: result.pi_last.rows(),
    };
    write_json(&args.out_dir.join("result.json"), &summary)
}

// check

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[arg(long, value_parser = parse_map, default_value = "negative-entropy")]
    pub map: MirrorKind,
    /// Number of seeded runs, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    pub runs: u64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Random draws per operator check.
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
}

pub fn check(
    mdp: &MdpArgs,
    args: &CheckArgs,
    behavior: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha.is_finite()) {
        return Err(CliError::Usage(format!("--alpha {} must be positive", args.alpha)));
    }
    if args.runs == 0 || args.batch == 0 {
        return Err(CliError::Usage("--runs and --batch must be positive".into()));
    }
    let m = mdp.load()?;
    let b = load_behavior(&m, behavior)?;
    let first = seed.unwrap_or(0);
    let seeds: Vec<u64> = (0..args.runs).map(|i| first.wrapping_add(i)).collect();
    let options = SuiteOptions {
        alpha: args.alpha,
        eta: args.eta,
        k_iters: args.k,
        batch: args.batch,
        theta: args.theta,
        draws: args.draws,
    };
    let report = run_property_suite(&m, &b, &MirrorMap::new(args.map), &seeds, &options)?;
    write_json(out, &report)?;
    match report.failures().len() {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}

// decompose

pub struct DecomposeArgs<'a> {
    pub mdp: &'a MdpArgs,
    pub config: &'a Path,
    pub behavior: Option<&'a Path>,
    pub k: Option<usize>,
    pub state: Option<usize>,
    pub seed: Option<u64>,
    pub out: &'a Path,
}

pub fn decompose(args: DecomposeArgs<'_>) -> CliResult<()> {
    let mdp = args.mdp.load()?;
    let cfg = load_config(args.config, args.seed)?;
    if cfg.algo_kind == AlgoKind::BatchQ {
        return Err(CliError::Usage("decompose needs a TD-PMD configuration, not batch-q".into()));
    }
    let behavior = load_behavior(&mdp, args.behavior)?;
    let sol = optimal(&mdp)?;
    let result = execute(&mdp, &behavior, &cfg)?;
    let k = args.k.unwrap_or(cfg.k);
    let states: Vec<usize> = match args.state {
        Some(s) => vec![s],
        None => (0..mdp.num_states()).collect(),
    };
    let out: Vec<BiasDecomposition<f64>> = states
        .into_iter()
        .map(|s| bias_decomposition(&result, k, &mdp, &behavior, cfg.alpha, &sol.pi_star, s))
        .collect::<pmdlab::Result<_>>()?;
    write_json(args.out, &out)
}
