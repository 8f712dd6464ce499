//! Parallel slope-experiment sweeps and their CSV format.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::run_on_sequence;
use super::{derive_seed, HarnessError, PolicySpec};
use crate::auction::{switch_count, temporal_variation};
use crate::environments::{EnvironmentSpec, Pattern};

pub const RESULTS_HEADER: [&str; 10] = [
    "pattern",
    "alpha",
    "T",
    "policy",
    "seed",
    "final_regret_expected",
    "final_regret_realized",
    "V_T_measured",
    "L_T_measured",
    "wall_ms",
];

fn default_runs() -> usize {
    50
}

fn default_true() -> bool {
    true
}

fn default_beta() -> f64 {
    2.0 / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub patterns: Vec<Pattern>,
    pub alphas: Vec<f64>,
    pub horizons: Vec<usize>,
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Record wall-clock time per row; when false `wall_ms` is written as 0
    /// so outputs are byte-identical across executions.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a.is_finite() && (0.0..=1.0).contains(&a)) {
                return Err(HarnessError::config(format!("alphas[{i}]"), format!("alpha must lie in [0, 1], got {a}")));
            }
        }
        if let Some(i) = self.horizons.iter().position(|&t| t == 0) {
            return Err(HarnessError::config(format!("horizons[{i}]"), "T must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(HarnessError::config("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        for p in &self.policies {
            p.validate()?;
        }
        Ok(())
    }

    /// Seed of replication `run`; shared by every pattern, alpha, horizon
    /// and policy so comparisons use common random numbers.
    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(self.base_seed, run as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pattern: String,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub policy: String,
    pub seed: u64,
    pub final_regret_expected: f64,
    pub final_regret_realized: f64,
    #[serde(rename = "V_T_measured")]
    pub variation_measured: f64,
    #[serde(rename = "L_T_measured")]
    pub switches_measured: usize,
    pub wall_ms: f64,
}

/// Rows plus the failures recorded along the way. Failed cells still
/// produce a row, with NaN regrets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<String>,
}

struct Cell {
    pattern: Pattern,
    alpha: f64,
    horizon: usize,
    run: usize,
}

/// Runs the full cross product. `workers` caps the thread count; `progress`
/// receives `(finished cells, total cells)`.
pub fn run_sweep(
    config: &SweepConfig,
    workers: Option<usize>,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let mut cells = Vec::new();
    for &pattern in &config.patterns {
        for &alpha in &config.alphas {
            for &horizon in &config.horizons {
                for run in 0..config.runs {
                    cells.push(Cell {
                        pattern,
                        alpha,
                        horizon,
                        run,
                    });
                }
            }
        }
    }
    if config.policies.is_empty() {
        return Ok(SweepOutcome {
            rows: Vec::new(),
            failures: Vec::new(),
        });
    }
    let done = AtomicUsize::new(0);
    let total = cells.len();
    let work = || -> Vec<(Vec<ResultRow>, Vec<String>)> {
        cells
            .par_iter()
            .map(|cell| {
                let out = run_cell(config, cell);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(report) = progress {
                    report(finished, total);
                }
                out
            })
            .collect()
    };
    let per_cell = match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    };
    let mut rows = Vec::with_capacity(total * config.policies.len());
    let mut failures = Vec::new();
    for (r, f) in per_cell {
        rows.extend(r);
        failures.extend(f);
    }
    Ok(SweepOutcome { rows, failures })
}

fn run_cell(config: &SweepConfig, cell: &Cell) -> (Vec<ResultRow>, Vec<String>) {
    let seed = config.run_seed(cell.run);
    let mut env = EnvironmentSpec::for_pattern(cell.pattern, cell.horizon, cell.alpha, seed);
    env.beta = config.beta;
    let row = |policy: &PolicySpec| ResultRow {
        pattern: cell.pattern.to_string(),
        alpha: cell.alpha,
        horizon: cell.horizon,
        policy: policy.label().to_owned(),
        seed,
        final_regret_expected: f64::NAN,
        final_regret_realized: f64::NAN,
        variation_measured: f64::NAN,
        switches_measured: 0,
        wall_ms: 0.0,
    };
    let context = |e: &HarnessError| {
        format!(
            "pattern={} alpha={} T={} seed={}: {e}",
            cell.pattern, cell.alpha, cell.horizon, seed
        )
    };
    let sequence = match env.generate() {
        Ok(s) => s,
        Err(e) => {
            let e = HarnessError::from(e);
            return (config.policies.iter().map(row).collect(), vec![context(&e)]);
        }
    };
    let rivals = sequence.rival_bids();
    let variation = temporal_variation(&rivals);
    let switches = switch_count(&rivals, 0.0);
    let mut rows = Vec::with_capacity(config.policies.len());
    let mut failures = Vec::new();
    for policy in &config.policies {
        let mut r = row(policy);
        r.variation_measured = variation;
        r.switches_measured = switches;
        let start = Instant::now();
        match run_on_sequence(policy, &env, &sequence) {
            Ok(trace) => {
                r.final_regret_expected = trace.final_regret_expected();
                r.final_regret_realized = trace.final_regret_realized();
            }
            Err(e) => failures.push(format!("{} policy={}", context(&e), policy.label())),
        }
        if config.timing {
            r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        }
        rows.push(r);
    }
    (rows, failures)
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.pattern.clone(),
            r.alpha.to_string(),
            r.horizon.to_string(),
            r.policy.clone(),
            r.seed.to_string(),
            r.final_regret_expected.to_string(),
            r.final_regret_realized.to_string(),
            r.variation_measured.to_string(),
            r.switches_measured.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(HarnessError::config(
            "results.csv",
            format!("unexpected header `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    rdr.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}
