use super::config::{positive_lambdas, Dynamic};
use super::{cell, csv_text, gnuplot_blocks, pool_estimates, Interval, Output, OutputFile, Pair, Runner};
use crate::analytics::SystemParams;
use crate::controller::ControllerConfig;
use crate::des::{run_sim, SimConfig};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

const CONTROLLER_STREAM: u64 = 0xC7;

/// Fixed against dynamic `n_c` in one `(pair, SNR, lambda)` cell. Both runs
/// of a replication share their arrival and success seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRow {
    pub pair: Pair,
    pub snr_db: f64,
    pub lambda: f64,
    /// False when the fixed `n_c` is unstable at this rate; such cells are
    /// not simulated.
    pub stable: bool,
    pub n_c_max: u32,
    pub fixed: Option<Interval>,
    pub dynamic: Option<Interval>,
    pub dynamic_mean_n_c: Option<f64>,
}

impl DynamicRow {
    pub fn reduction_pct(&self) -> Option<f64> {
        Some(100.0 * (1.0 - self.dynamic?.mean / self.fixed?.mean))
    }
}

/// Averages over the stable cells of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSummary {
    pub pair: Pair,
    pub cells: usize,
    pub fixed_mean: f64,
    pub dynamic_mean: f64,
}

impl PairSummary {
    pub fn reduction_pct(&self) -> f64 {
        100.0 * (1.0 - self.dynamic_mean / self.fixed_mean)
    }
}

/// Controller settings for one cell: the ceiling is optionally lowered to
/// the largest stable `n_c`, and the start clamped into the new range.
fn cell_controller(spec: &Dynamic, lambda: f64, seed: u64) -> Result<ControllerConfig> {
    let mut c = spec.controller.clone();
    c.seed = derive_seed(seed, &[CONTROLLER_STREAM]);
    if spec.cap_at_stability {
        let mut cap = c.n_c_max;
        while cap > c.n_c_min && !SystemParams::new(lambda, cap)?.is_stable() {
            cap -= 1;
        }
        c.n_c_max = cap;
        c.initial_nc = c.initial_nc.min(cap);
    }
    c.validate()?;
    Ok(c)
}

fn run_cell(runner: &Runner, index: u64, &(pair, snr_db, lambda): &(Pair, f64, f64)) -> Result<DynamicRow> {
    let cfg = runner.config();
    let spec = &cfg.dynamic;
    let curve = runner.curve(pair, snr_db)?;
    let fixed_params = SystemParams::new(lambda, spec.fixed_n_c)?;
    let mut row = DynamicRow {
        pair,
        snr_db,
        lambda,
        stable: fixed_params.is_stable(),
        n_c_max: cell_controller(spec, lambda, 0)?.n_c_max,
        fixed: None,
        dynamic: None,
        dynamic_mean_n_c: None,
    };
    if !row.stable {
        return Ok(row);
    }
    let (mut fixed, mut dynamic, mut n_c_sum) = (Vec::new(), Vec::new(), 0.0);
    for rep in 0..u64::from(cfg.replications) {
        let seed = derive_seed(cfg.seed, &[index, rep]);
        let mut sim = SimConfig::new(fixed_params, cfg.horizon, seed);
        sim.view = cfg.curve_view;
        fixed.extend(run_sim(&sim, curve)?.stats.paoti);

        let ctl = cell_controller(spec, lambda, seed)?;
        let sim = SimConfig { params: SystemParams::new(lambda, ctl.initial_nc)?, ..sim }.with_controller(ctl);
        let stats = run_sim(&sim, curve)?.stats;
        dynamic.extend(stats.paoti);
        n_c_sum += stats.mean_n_c;
    }
    let reps = cfg.replications as usize;
    if fixed.len() == reps && dynamic.len() == reps {
        row.fixed = pool_estimates(&fixed);
        row.dynamic = pool_estimates(&dynamic);
    }
    row.dynamic_mean_n_c = Some(n_c_sum / reps as f64);
    Ok(row)
}

/// Runs every cell and averages per pair.
pub fn dynamic_table(runner: &Runner) -> Result<(Vec<DynamicRow>, Vec<PairSummary>)> {
    let cfg = runner.config();
    positive_lambdas("dynamic.lambda", &cfg.dynamic.lambda)?;
    if cfg.dynamic.fixed_n_c == 0 {
        return Err(Error::Config("dynamic.fixed_n_c must be at least 1".into()));
    }
    cfg.dynamic.controller.validate()?;
    let mut cells = Vec::new();
    for &pair in &cfg.pairs {
        for &snr in &cfg.snr_db {
            for &lambda in &cfg.dynamic.lambda {
                cells.push((pair, snr, lambda));
            }
        }
    }
    let rows = runner.map_cells(&cells, |i, c| run_cell(runner, i, c))?;
    let summaries = cfg
        .pairs
        .iter()
        .map(|&pair| {
            let done: Vec<_> =
                rows.iter().filter(|r| r.pair == pair).filter_map(|r| Some((r.fixed?.mean, r.dynamic?.mean))).collect();
            let n = done.len() as f64;
            PairSummary {
                pair,
                cells: done.len(),
                fixed_mean: done.iter().map(|d| d.0).sum::<f64>() / n,
                dynamic_mean: done.iter().map(|d| d.1).sum::<f64>() / n,
            }
        })
        .collect();
    Ok((rows, summaries))
}

/// Average measured PAoTI with fixed and with adaptive `n_c`, per pair.
pub fn compare_dynamic(runner: &Runner) -> Result<Output> {
    let (rows, summaries) = dynamic_table(runner)?;
    let fixed_n_c = runner.config().dynamic.fixed_n_c.to_string();
    let detail = csv_text(
        &[
            "dataset",
            "model",
            "snr_db",
            "lambda",
            "status",
            "fixed_n_c",
            "fixed_paoti",
            "fixed_ci",
            "dynamic_paoti",
            "dynamic_ci",
            "dynamic_mean_n_c",
            "n_c_max",
            "reduction_pct",
        ],
        rows.iter().map(|r| {
            vec![
                r.pair.dataset.to_string(),
                r.pair.model.to_string(),
                r.snr_db.to_string(),
                r.lambda.to_string(),
                if r.stable { "ok" } else { "unstable" }.to_string(),
                fixed_n_c.clone(),
                cell(r.fixed.map(|i| i.mean)),
                cell(r.fixed.map(|i| i.halfwidth)),
                cell(r.dynamic.map(|i| i.mean)),
                cell(r.dynamic.map(|i| i.halfwidth)),
                cell(r.dynamic_mean_n_c),
                r.n_c_max.to_string(),
                cell(r.reduction_pct()),
            ]
        }),
    )?;
    let summary_csv = csv_text(
        &["dataset", "model", "cells", "fixed_paoti", "dynamic_paoti", "reduction_pct"],
        summaries.iter().map(|s| {
            vec![
                s.pair.dataset.to_string(),
                s.pair.model.to_string(),
                s.cells.to_string(),
                s.fixed_mean.to_string(),
                s.dynamic_mean.to_string(),
                s.reduction_pct().to_string(),
            ]
        }),
    )?;
    let mut files = vec![
        OutputFile { name: "compare_dynamic.csv".into(), contents: detail },
        OutputFile { name: "compare_dynamic_summary.csv".into(), contents: summary_csv },
    ];
    if runner.config().gnuplot {
        let mut blocks: Vec<(String, Vec<Vec<Option<f64>>>)> = Vec::new();
        for r in &rows {
            let title = format!("{} snr_db={}", r.pair, r.snr_db);
            if blocks.last().is_none_or(|b| b.0 != title) {
                blocks.push((title, Vec::new()));
            }
            let line = vec![Some(r.lambda), r.fixed.map(|i| i.mean), r.dynamic.map(|i| i.mean), r.dynamic_mean_n_c];
            blocks.last_mut().expect("just pushed").1.push(line);
        }
        files.push(OutputFile {
            name: "compare_dynamic.dat".into(),
            contents: gnuplot_blocks(&["lambda", "fixed_paoti", "dynamic_paoti", "dynamic_mean_n_c"], &blocks),
        });
    }
    let mut summary = String::new();
    for s in &summaries {
        summary.push_str(&format!(
            "{}: fixed {:.3} dynamic {:.3} reduction {:.1}% over {} cells\n",
            s.pair,
            s.fixed_mean,
            s.dynamic_mean,
            s.reduction_pct(),
            s.cells
        ));
    }
    Ok(Output { files, summary, passed: true })
}
