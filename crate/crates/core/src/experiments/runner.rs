use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{run_method, ExperimentPlan, Method, SweepVar};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::system_model::{PhaseProfile, SystemConfig};

/// One method on one drop at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_value: usize,
    pub drop: usize,
    pub num_users: usize,
    pub sum_rate: f64,
    pub avg_rate: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub sweep_var: SweepVar,
    /// Sorted by method, sweep value, then drop.
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn rows_for(&self, method: Method, value: usize) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.method == method && r.sweep_value == value)
    }

    /// Mean sum-rate over drops.
    pub fn mean_sum_rate(&self, method: Method, value: usize) -> Option<f64> {
        let (n, s) = self.rows_for(method, value).fold((0usize, 0.0), |(n, s), r| (n + 1, s + r.sum_rate));
        (n > 0).then(|| s / n as f64)
    }

    /// Mean per-user rate over drops.
    pub fn mean_avg_rate(&self, method: Method, value: usize) -> Option<f64> {
        let (n, s) = self.rows_for(method, value).fold((0usize, 0.0), |(n, s), r| (n + 1, s + r.avg_rate));
        (n > 0).then(|| s / n as f64)
    }
}

/// Seed of drop `d`: channels and random phases of the drop derive from it,
/// and it is the same at every sweep point.
pub fn drop_seed(base: u64, drop: usize) -> u64 {
    base.wrapping_add(drop as u64)
}

/// Random RIS profiles of a drop, one per BS, on a stream separate from the
/// channel draws.
pub fn drop_phases(cfg: &SystemConfig, seed: u64) -> Vec<PhaseProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..cfg.num_bs).map(|_| PhaseProfile::random(cfg.ris_elements, &mut rng)).collect()
}

fn run_drop(plan: &ExperimentPlan, value: usize, drop: usize) -> Result<Vec<ResultRow>> {
    let cfg = plan.config_at(value);
    let seed = drop_seed(cfg.seed, drop);
    let channels = ChannelSet::for_drop(&cfg, seed);
    let phases = drop_phases(&cfg, seed);
    plan.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let run =
                run_method(method, &channels, &cfg, &plan.settings, plan.policy, &phases).map_err(|e| {
                    Error::Plan(format!("{method} at {} = {value}, drop {drop}: {e}", plan.sweep_var))
                })?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            log::debug!("{method} {}={value} drop={drop} sum_rate={:.4}", plan.sweep_var, run.sum_rate);
            Ok(ResultRow {
                method,
                sweep_value: value,
                drop,
                num_users: cfg.num_users,
                sum_rate: run.sum_rate,
                avg_rate: run.sum_rate / cfg.num_users as f64,
                wall_ms,
            })
        })
        .collect()
}

/// Runs every method on every drop at every sweep point. Drops run in
/// parallel on `threads` workers (all cores when `None`); the table does not
/// depend on the thread count.
pub fn run_plan(plan: &ExperimentPlan, threads: Option<usize>) -> Result<ResultTable> {
    let jobs: Vec<(usize, usize)> =
        plan.values.iter().flat_map(|&v| (0..plan.drops).map(move |d| (v, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Plan(format!("thread pool: {e}")))?;
    let per_job: Vec<Vec<ResultRow>> =
        pool.install(|| jobs.par_iter().map(|&(v, d)| run_drop(plan, v, d)).collect::<Result<_>>())?;
    let mut rows: Vec<ResultRow> = per_job.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.method, r.sweep_value, r.drop));
    Ok(ResultTable { sweep_var: plan.sweep_var, rows })
}
