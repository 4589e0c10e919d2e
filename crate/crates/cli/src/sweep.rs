//! Grids of runs over target accuracies, algorithms, maps and seeds.

use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use pmdlab::algo::{AlgoConfig, AlgoKind, EtaMode};
use pmdlab::analysis::{extract_constants, extract_constants_mixed, remark_schedules, ScheduleKind};
use pmdlab::chain::BehaviorModel;
use pmdlab::mdp::{Policy, TabularMdp};
use pmdlab::mirror::{MirrorKind, MirrorMap};
use pmdlab::oracle::OptimalSolution;

use crate::output::{csv_line, read_json, write_file, Cell, CliError, CliResult};

use super::commands::{execute, load_mu, optimal, run_csv, suboptimality};

fn default_budget() -> u64 {
    1_000_000_000
}

/// Sweep file. `base` supplies every run parameter the grid does not vary.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: AlgoConfig,
    pub algos: Vec<AlgoKind>,
    /// Defaults to the map of `base`.
    #[serde(default)]
    pub maps: Vec<MirrorKind>,
    /// Stream labels; each must be below 2^32.
    pub seeds: Vec<u64>,
    /// Target accuracies. Needs `schedule`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Step and batch rule derived from each accuracy for the TD-PMD cells;
    /// batch Q-learning cells always use their own geometric schedule.
    #[serde(default)]
    pub schedule: Option<ScheduleKind>,
    /// Upper limit on the samples the whole sweep may draw.
    #[serde(default = "default_budget")]
    pub max_samples: u64,
}

impl SweepSpec {
    fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Usage(format!("sweep: {m}")));
        if self.algos.is_empty() {
            return bad("`algos` is empty");
        }
        if self.seeds.is_empty() {
            return bad("`seeds` is empty");
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("`seeds` contains duplicates");
        }
        if seen.last().is_some_and(|&s| s >= 1 << 32) {
            return bad("`seeds` entries must be below 2^32");
        }
        match self.schedule {
            None if !self.epsilons.is_empty() => bad("`epsilons` needs a `schedule`"),
            Some(ScheduleKind::BatchQ) => bad("`schedule` is adaptive or constant-step"),
            Some(_) if self.epsilons.is_empty() => bad("`schedule` needs `epsilons`"),
            _ if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) => bad("`epsilons` must be positive"),
            _ => Ok(()),
        }
    }
}

struct SweepCell {
    eps: Option<f64>,
    eps_index: usize,
    config: AlgoConfig,
    total: u128,
}

fn cell_configs(
    spec: &SweepSpec,
    mdp: &TabularMdp<f64>,
    behavior: &BehaviorModel<f64>,
    sol: &OptimalSolution<f64>,
) -> CliResult<Vec<SweepCell>> {
    let maps = if spec.maps.is_empty() {
        vec![spec.base.map]
    } else {
        spec.maps.clone()
    };
    let eps_list: Vec<Option<f64>> = if spec.epsilons.is_empty() {
        vec![None]
    } else {
        spec.epsilons.iter().map(|&e| Some(e)).collect()
    };
    let pi0 = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let mut out = Vec::new();
    for (eps_index, &eps) in eps_list.iter().enumerate() {
        for &algo in &spec.algos {
            for &map in &maps {
                let mut config = AlgoConfig {
                    algo_kind: algo,
                    map,
                    ..spec.base.clone()
                };
                if let (Some(eps), Some(kind)) = (eps, spec.schedule) {
                    let mirror = MirrorMap::new(map);
                    let alpha = config.alpha;
                    let inputs = match algo {
                        AlgoKind::Approximate => extract_constants_mixed(
                            mdp,
                            &behavior.pi_b,
                            &[&pi0, &sol.pi_star],
                            &mirror,
                            &pi0,
                            &sol.pi_star,
                            alpha,
                        )?,
                        _ => extract_constants(mdp, behavior, &mirror, &pi0, &sol.pi_star, alpha)?,
                    };
                    let kind = if algo == AlgoKind::BatchQ { ScheduleKind::BatchQ } else { kind };
                    let s = remark_schedules(kind, eps, &inputs, config.theta)?;
                    config.k = s.k_iters;
                    config.batch_schedule = s.batch;
                    match kind {
                        ScheduleKind::Adaptive => config.eta_mode = EtaMode::Adaptive(s.eta),
                        ScheduleKind::ConstantStep => config.eta_mode = EtaMode::Constant(s.eta),
                        ScheduleKind::BatchQ => {}
                    }
                }
                config.validate()?;
                let total = if config.noise_free {
                    0
                } else {
                    config.batch_schedule.total(config.num_updates())
                };
                out.push(SweepCell {
                    eps,
                    eps_index,
                    config,
                    total,
                });
            }
        }
    }
    Ok(out)
}

pub fn sweep(mdp: &TabularMdp<f64>, spec_path: &Path, seed: Option<u64>, out_dir: &Path) -> CliResult<()> {
    let spec: SweepSpec = read_json(spec_path)?;
    spec.validate()?;
    let master = seed.unwrap_or(spec.base.seed);
    let behavior = BehaviorModel::uniform(mdp)?;
    let sol = optimal(mdp)?;
    let mu = load_mu(mdp.num_states(), None)?;
    let cells = cell_configs(&spec, mdp, &behavior, &sol)?;

    let needed: u128 = cells.iter().map(|c| c.total * spec.seeds.len() as u128).sum();
    if needed > u128::from(spec.max_samples) {
        return Err(CliError::Usage(format!(
            "sweep: the grid needs {needed} samples, above `max_samples` = {}",
            spec.max_samples
        )));
    }
    let multi_map = cells.iter().any(|c| c.config.map != cells[0].config.map);
    let label = |c: &AlgoConfig| {
        if multi_map {
            format!("{}/{}", c.algo_kind.name(), map_name(c.map))
        } else {
            c.algo_kind.name().to_string()
        }
    };

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|i| spec.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<CliResult<f64>> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let cell = &cells[i];
            let cfg = AlgoConfig {
                seed: master,
                run_id: ((i as u64) << 32) | s,
                ..cell.config.clone()
            };
            let run = execute(mdp, &behavior, &cfg)?;
            assert_eq!(u128::from(run.total_samples), cell.total, "executed schedule differs from the planned one");
            let name = format!(
                "{}-{}-eps{}-seed{}.csv",
                cfg.algo_kind.name(),
                map_name(cfg.map),
                cell.eps_index,
                s
            );
            write_file(&out_dir.join("runs").join(name), &run_csv(mdp, &sol, &run, &mu)?)?;
            suboptimality(mdp, &sol.v_star, &run.pi_last, &mu)
        })
        .collect();

    let mut subopts = Vec::with_capacity(results.len());
    for r in results {
        subopts.push(r?);
    }
    let mut summary = String::from("eps,algo,seeds,mean_subopt,total_samples\n");
    let per = spec.seeds.len();
    for (i, cell) in cells.iter().enumerate() {
        let mean = subopts[i * per..(i + 1) * per].iter().sum::<f64>() / per as f64;
        summary.push_str(&csv_line(&[
            cell.eps.map_or(Cell::Text(String::new()), Cell::Float),
            Cell::Text(label(&cell.config)),
            Cell::Int(per as u128),
            Cell::Float(mean),
            Cell::Int(cell.total),
        ]));
    }
    write_file(&out_dir.join("summary.csv"), &summary)
}

fn map_name(m: MirrorKind) -> &'static str {
    match m {
        MirrorKind::NegativeEntropy => "negative-entropy",
        MirrorKind::SquaredL2 => "squared-l2",
    }
}
