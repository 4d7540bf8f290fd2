//! Independent runs over consecutive seeds, executed in parallel.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::output::{write_trajectory, BatchRow};
use crate::scenario::Scenario;
use crate::sim::{run_with, TrajectoryLog};

/// Seed of run `k` in a batch started at `seed`.
pub fn run_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

fn summarize(k: usize, seed: u64, log: &TrajectoryLog) -> BatchRow {
    BatchRow {
        run: k,
        seed,
        outcome: log.outcome.name().to_string(),
        final_time: log.rows.last().map_or(0.0, |r| r.time),
        max_metrics: log.max_metrics(),
        near_violations: log.near_violations.len(),
    }
}

/// Validate every run's initial conditions, then execute all runs. With
/// `out_dir`, each run's trajectory is written to `run_NNNN.csv`.
pub fn batch_run(
    scenario: &Scenario,
    n_runs: usize,
    seed: u64,
    jobs: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<Vec<BatchRow>> {
    if n_runs == 0 {
        return Err(Error::Domain("batch needs at least one run".into()));
    }
    let configs: Vec<_> = (0..n_runs)
        .map(|k| {
            let mut s = scenario.clone();
            s.sim.seed = run_seed(seed, k);
            s
        })
        .collect();
    let mut violations = Vec::new();
    for s in &configs {
        violations.extend(s.violations());
    }
    if !violations.is_empty() {
        violations.dedup();
        return Err(Error::Validation(violations));
    }
    let work = || {
        configs
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                let log = run_with(s, s.sim)?;
                if let Some(dir) = out_dir {
                    write_trajectory(&log, &dir.join(format!("run_{k:04}.csv")))?;
                }
                Ok(summarize(k, s.sim.seed, &log))
            })
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}
