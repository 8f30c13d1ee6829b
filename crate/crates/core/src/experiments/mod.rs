//! Sweeps, comparisons and self-checks driven by an [`ExperimentConfig`].
//!
//! Every command enumerates its cells in a fixed order, runs them on a
//! worker pool and collects results back in cell order, so the emitted files
//! do not depend on the number of workers. Replication `r` of cell `c` is
//! seeded with `derive_seed(seed, [c, r])`.

mod config;
mod dynamic;
mod sweep;
mod validate;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use config::{Dynamic, ExperimentConfig, Mode, Pair, SweepLambda, SweepNc, Validate};
pub use dynamic::{compare_dynamic, dynamic_table, DynamicRow, PairSummary};
pub use sweep::{sweep_lambda, sweep_nc, ResultRow, Status};
pub use validate::{validate, validate_checks, Check};

use crate::accuracy::{fit_parametric, load_tables, AccuracyCurve, CurveSet};
use crate::des::Estimate;
use crate::error::{Error, Result};
use crate::fixtures;

/// Loaded curves plus a worker pool.
pub struct Runner {
    config: ExperimentConfig,
    curves: CurveSet,
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `jobs = None` uses one worker per core.
    pub fn new(config: ExperimentConfig, jobs: Option<usize>) -> Result<Self> {
        config.check_common()?;
        let curves =
            if config.curves == "synthetic" { fixtures::synthetic_curves() } else { load_tables(&config.curves)? };
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            if j == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Self { config, curves, pool })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn curves(&self) -> &CurveSet {
        &self.curves
    }

    fn curve(&self, pair: Pair, snr_db: f64) -> Result<&AccuracyCurve> {
        self.curves.get(pair.dataset, pair.model, snr_db)
    }

    /// Maps `f` over `cells` on the pool; results come back in cell order.
    fn map_cells<C, T, F>(&self, cells: &[C], f: F) -> Result<Vec<T>>
    where
        C: Sync,
        T: Send,
        F: Fn(u64, &C) -> Result<T> + Sync,
    {
        self.pool.install(|| cells.par_iter().enumerate().map(|(i, c)| f(i as u64, c)).collect())
    }
}

/// One file produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Everything a command produced. `passed` is false only when a check
/// failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub files: Vec<OutputFile>,
    pub summary: String,
    pub passed: bool,
}

impl Output {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Mean and 95% half-width pooled over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub halfwidth: f64,
    /// Standard error of `mean`.
    pub se: f64,
}

/// Pools replication estimates: with one replication its batch-means
/// interval is used, otherwise a t interval over the replication means.
pub(crate) fn pool_estimates(ests: &[Estimate]) -> Option<Interval> {
    match ests {
        [] => None,
        [e] => Some(Interval { mean: e.mean, halfwidth: e.halfwidth, se: e.se }),
        _ => {
            let r = ests.len() as f64;
            let mean = ests.iter().map(|e| e.mean).sum::<f64>() / r;
            let var = ests.iter().map(|e| (e.mean - mean).powi(2)).sum::<f64>() / (r - 1.0);
            let se = (var / r).sqrt();
            let t = StudentsT::new(0.0, 1.0, r - 1.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
            Some(Interval { mean, halfwidth: t * se, se })
        }
    }
}

/// Empty cell for missing values, shortest round-trip text otherwise.
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// gnuplot data file: blocks separated by two blank lines, each headed by a
/// comment, missing values written as `NaN`.
pub(crate) fn gnuplot_blocks(columns: &[&str], blocks: &[(String, Vec<Vec<Option<f64>>>)]) -> String {
    let mut out = format!("# {}\n", columns.join(" "));
    for (i, (title, rows)) in blocks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {title}");
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| v.map_or_else(|| "NaN".to_string(), |x| x.to_string())).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

/// Fits the parametric saturating curve to every loaded curve.
pub fn fit_curves(runner: &Runner) -> Result<Output> {
    let curves: Vec<&AccuracyCurve> = runner.curves().iter().collect();
    let reports = runner.map_cells(&curves, |_, c| fit_parametric(c))?;
    let rows = curves.iter().zip(&reports).map(|(c, r)| {
        let k = c.key();
        vec![
            k.dataset.to_string(),
            k.model.to_string(),
            k.snr_db.to_string(),
            r.params.p_max.to_string(),
            r.params.alpha.to_string(),
            r.params.n0.to_string(),
            r.rms.to_string(),
            r.degenerate.to_string(),
        ]
    });
    let csv = csv_text(&["dataset", "model", "snr_db", "p_max", "alpha", "n0", "rms", "degenerate"], rows)?;
    let degenerate = reports.iter().filter(|r| r.degenerate).count();
    Ok(Output {
        files: vec![OutputFile { name: "fit_curves.csv".into(), contents: csv }],
        summary: format!("fitted {} curves ({degenerate} degenerate)\n", reports.len()),
        passed: true,
    })
}
