use std::fmt;

use super::config::{positive_lambdas, positive_nc};
use super::{cell, csv_text, gnuplot_blocks, pool_estimates, Interval, Output, OutputFile, Pair, Runner};
use crate::analytics::{paoi_closed_form, paoti_closed_form, SystemParams};
use crate::des::{run_sim, SimConfig};
use crate::error::Result;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// `lambda * n_c >= 1`.
    Unstable,
    /// `p_c = 0`: no classification ever succeeds, PAoTI is infinite.
    Divergent,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Unstable => "unstable",
            Status::Divergent => "divergent",
        })
    }
}

/// One `(pair, SNR, lambda, n_c)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub pair: Pair,
    pub snr_db: f64,
    pub lambda: f64,
    pub n_c: u32,
    pub p_c: f64,
    pub status: Status,
    pub paoti: Option<f64>,
    pub paoi: Option<f64>,
    pub sim_paoti: Option<Interval>,
    pub sim_paoi: Option<Interval>,
}

const HEADER: [&str; 14] = [
    "dataset",
    "model",
    "snr_db",
    "lambda",
    "n_c",
    "p_c",
    "rho",
    "status",
    "paoti",
    "paoi",
    "sim_paoti_mean",
    "sim_paoti_ci",
    "sim_paoi_mean",
    "sim_paoi_ci",
];

impl ResultRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.pair.dataset.to_string(),
            self.pair.model.to_string(),
            self.snr_db.to_string(),
            self.lambda.to_string(),
            self.n_c.to_string(),
            self.p_c.to_string(),
            (self.lambda * f64::from(self.n_c)).to_string(),
            self.status.to_string(),
            cell(self.paoti),
            cell(self.paoi),
            cell(self.sim_paoti.map(|i| i.mean)),
            cell(self.sim_paoti.map(|i| i.halfwidth)),
            cell(self.sim_paoi.map(|i| i.mean)),
            cell(self.sim_paoi.map(|i| i.halfwidth)),
        ]
    }

    /// Closed-form PAoTI when present, else the simulated mean.
    fn best_paoti(&self) -> Option<f64> {
        self.paoti.or(self.sim_paoti.map(|i| i.mean))
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    pair: Pair,
    snr_db: f64,
    lambda: f64,
    n_c: u32,
}

fn run_cell(runner: &Runner, index: u64, c: &Cell) -> Result<ResultRow> {
    let cfg = runner.config();
    let curve = runner.curve(c.pair, c.snr_db)?;
    let p_c = curve.lookup_view(c.n_c, cfg.curve_view);
    let params = SystemParams::new(c.lambda, c.n_c)?;
    let mut row = ResultRow {
        pair: c.pair,
        snr_db: c.snr_db,
        lambda: c.lambda,
        n_c: c.n_c,
        p_c,
        status: Status::Ok,
        paoti: None,
        paoi: None,
        sim_paoti: None,
        sim_paoi: None,
    };
    if !params.is_stable() {
        row.status = Status::Unstable;
        return Ok(row);
    }
    if p_c <= 0.0 {
        row.status = Status::Divergent;
    }
    if cfg.mode.closed_form() {
        row.paoi = Some(paoi_closed_form(c.lambda, c.n_c)?);
        row.paoti = paoti_closed_form(c.lambda, c.n_c, p_c).ok();
    }
    if cfg.mode.simulation() {
        let mut paoti = Vec::new();
        let mut paoi = Vec::new();
        for rep in 0..u64::from(cfg.replications) {
            let mut sim = SimConfig::new(params, cfg.horizon, derive_seed(cfg.seed, &[index, rep]));
            sim.view = cfg.curve_view;
            let stats = run_sim(&sim, curve)?.stats;
            paoi.push(stats.paoi);
            paoti.extend(stats.paoti);
        }
        row.sim_paoi = pool_estimates(&paoi);
        if paoti.len() == paoi.len() {
            row.sim_paoti = pool_estimates(&paoti);
        }
    }
    Ok(row)
}

fn cells(runner: &Runner, lambdas: &[f64], ncs: &[u32], lambda_outer: bool) -> Vec<Cell> {
    let cfg = runner.config();
    let mut out = Vec::new();
    for &pair in &cfg.pairs {
        for &snr_db in &cfg.snr_db {
            if lambda_outer {
                for &lambda in lambdas {
                    for &n_c in ncs {
                        out.push(Cell { pair, snr_db, lambda, n_c });
                    }
                }
            } else {
                for &n_c in ncs {
                    for &lambda in lambdas {
                        out.push(Cell { pair, snr_db, lambda, n_c });
                    }
                }
            }
        }
    }
    out
}

/// Rows grouped by consecutive runs sharing everything but the swept
/// coordinate.
fn groups(rows: &[ResultRow], same: impl Fn(&ResultRow, &ResultRow) -> bool) -> Vec<&[ResultRow]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || !same(&rows[start], &rows[i]) {
            out.push(&rows[start..i]);
            start = i;
        }
    }
    out
}

/// Smallest PAoTI in a group; ties keep the first row.
fn argmin(group: &[ResultRow]) -> Option<&ResultRow> {
    group.iter().filter(|r| r.status == Status::Ok && r.best_paoti().is_some()).fold(
        None,
        |best: Option<&ResultRow>, r| match best {
            Some(b) if b.best_paoti() <= r.best_paoti() => Some(b),
            _ => Some(r),
        },
    )
}

fn plot_row(x: f64, r: &ResultRow) -> Vec<Option<f64>> {
    vec![Some(x), r.paoti, r.sim_paoti.map(|i| i.mean), r.sim_paoti.map(|i| i.halfwidth), r.paoi]
}

fn finish(
    runner: &Runner,
    stem: &str,
    rows: &[ResultRow],
    optimum_header: [&str; 6],
    optimum: Vec<Vec<String>>,
    plot: Option<String>,
) -> Result<Output> {
    let mut files = vec![
        OutputFile { name: format!("{stem}.csv"), contents: csv_text(&HEADER, rows.iter().map(ResultRow::record))? },
        OutputFile { name: format!("{stem}_optimum.csv"), contents: csv_text(&optimum_header, optimum)? },
    ];
    if let (true, Some(p)) = (runner.config().gnuplot, plot) {
        files.push(OutputFile { name: format!("{stem}.dat"), contents: p });
    }
    let unstable = rows.iter().filter(|r| r.status == Status::Unstable).count();
    Ok(Output { files, summary: format!("{stem}: {} cells, {unstable} unstable\n", rows.len()), passed: true })
}

/// PAoTI against `n_c` for every `(pair, SNR, lambda)`, plus the argmin of
/// each curve.
pub fn sweep_nc(runner: &Runner) -> Result<Output> {
    let spec = &runner.config().sweep_nc;
    positive_lambdas("sweep_nc.lambda", &spec.lambda)?;
    positive_nc("sweep_nc.n_c", &spec.n_c)?;
    let cells = cells(runner, &spec.lambda, &spec.n_c, true);
    let rows = runner.map_cells(&cells, |i, c| run_cell(runner, i, c))?;
    let grouped = groups(&rows, |a, b| a.pair == b.pair && a.snr_db == b.snr_db && a.lambda == b.lambda);
    let optimum = grouped
        .iter()
        .map(|g| {
            let best = argmin(g);
            vec![
                g[0].pair.dataset.to_string(),
                g[0].pair.model.to_string(),
                g[0].snr_db.to_string(),
                g[0].lambda.to_string(),
                best.map(|r| r.n_c.to_string()).unwrap_or_default(),
                cell(best.and_then(ResultRow::best_paoti)),
            ]
        })
        .collect();
    let plot = grouped
        .iter()
        .map(|g| {
            let title = format!("{} snr_db={} lambda={}", g[0].pair, g[0].snr_db, g[0].lambda);
            (title, g.iter().map(|r| plot_row(f64::from(r.n_c), r)).collect())
        })
        .collect::<Vec<_>>();
    let plot = gnuplot_blocks(&["n_c", "paoti", "sim_paoti", "sim_paoti_ci", "paoi"], &plot);
    finish(
        runner,
        "sweep_nc",
        &rows,
        ["dataset", "model", "snr_db", "lambda", "n_c_star", "paoti_star"],
        optimum,
        Some(plot),
    )
}

/// PAoTI against `lambda` for every `(pair, SNR, n_c)`, plus the grid argmin
/// of each curve.
pub fn sweep_lambda(runner: &Runner) -> Result<Output> {
    let spec = &runner.config().sweep_lambda;
    positive_lambdas("sweep_lambda.lambda", &spec.lambda)?;
    positive_nc("sweep_lambda.n_c", &spec.n_c)?;
    let cells = cells(runner, &spec.lambda, &spec.n_c, false);
    let rows = runner.map_cells(&cells, |i, c| run_cell(runner, i, c))?;
    let grouped = groups(&rows, |a, b| a.pair == b.pair && a.snr_db == b.snr_db && a.n_c == b.n_c);
    let optimum = grouped
        .iter()
        .map(|g| {
            let best = argmin(g);
            vec![
                g[0].pair.dataset.to_string(),
                g[0].pair.model.to_string(),
                g[0].snr_db.to_string(),
                g[0].n_c.to_string(),
                best.map(|r| r.lambda.to_string()).unwrap_or_default(),
                cell(best.and_then(ResultRow::best_paoti)),
            ]
        })
        .collect();
    let plot = grouped
        .iter()
        .map(|g| {
            let title = format!("{} snr_db={} n_c={}", g[0].pair, g[0].snr_db, g[0].n_c);
            (title, g.iter().map(|r| plot_row(r.lambda, r)).collect())
        })
        .collect::<Vec<_>>();
    let plot = gnuplot_blocks(&["lambda", "paoti", "sim_paoti", "sim_paoti_ci", "paoi"], &plot);
    finish(
        runner,
        "sweep_lambda",
        &rows,
        ["dataset", "model", "snr_db", "n_c", "lambda_star", "paoti_star"],
        optimum,
        Some(plot),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accuracy::{CurveKey, CurveSet, CurveSource, Dataset, Model};
    use crate::experiments::{ExperimentConfig, Mode};

    fn closed_form_runner(edit: impl FnOnce(&mut ExperimentConfig)) -> Runner {
        let mut cfg = ExperimentConfig { mode: Mode::ClosedForm, ..ExperimentConfig::default() };
        edit(&mut cfg);
        Runner::new(cfg, Some(2)).unwrap()
    }

    #[test]
    fn sweep_nc_optimum_follows_snr() {
        let runner = closed_form_runner(|c| c.pairs.truncate(1));
        let out = sweep_nc(&runner).unwrap();
        let opt = out.file("sweep_nc_optimum.csv").unwrap();
        let n_star: Vec<u32> = opt.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
        assert_eq!(n_star, vec![5, 4, 4]);
        assert!(n_star.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unstable_rows_have_empty_numbers() {
        let runner = closed_form_runner(|c| c.pairs.truncate(1));
        let out = sweep_lambda(&runner).unwrap();
        let csv = out.file("sweep_lambda.csv").unwrap();
        let unstable: Vec<&str> = csv.lines().filter(|l| l.contains(",unstable,")).collect();
        // lambda 0.20..=0.25 at n_c = 5, three SNRs
        assert_eq!(unstable.len(), 18);
        for l in unstable {
            assert!(l.ends_with(",unstable,,,,,,"), "{l}");
        }
    }

    #[test]
    fn lambda_optimum_matches_dense_scan() {
        let runner = closed_form_runner(|c| {
            c.pairs.truncate(1);
            c.snr_db = vec![3.0];
            c.sweep_lambda.lambda = (1..200).map(|i| f64::from(i) / 1000.0).collect();
        });
        let out = sweep_lambda(&runner).unwrap();
        let opt = out.file("sweep_lambda_optimum.csv").unwrap();
        let f: Vec<&str> = opt.lines().nth(1).unwrap().split(',').collect();
        let lambda_star: f64 = f[4].parse().unwrap();
        let best: f64 = f[5].parse().unwrap();

        let p = runner.curve(runner.config().pairs[0], 3.0).unwrap().lookup(5);
        let scan = (1..200_000)
            .map(|i| f64::from(i) / 1e6)
            .map(|l| (l, paoti_closed_form(l, 5, p).unwrap()))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!((lambda_star - scan.0).abs() <= 0.0005 + 1e-12, "{lambda_star} vs {}", scan.0);
        assert!(best >= scan.1 && best - scan.1 < 1e-2 * scan.1);
    }

    #[test]
    fn perfect_classifier_gives_equal_columns() {
        let key = CurveKey::new(Dataset::Mnist, Model::Fnn, 0.0);
        let flat = crate::AccuracyCurve::new(key, vec![(1, 1.0), (16, 1.0)], CurveSource::Synthetic).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.csv");
        crate::accuracy::write_tables(&CurveSet::new(vec![flat]).unwrap(), std::fs::File::create(&path).unwrap())
            .unwrap();
        let runner = closed_form_runner(|c| {
            c.curves = path.to_string_lossy().into_owned();
            c.pairs.truncate(1);
            c.snr_db = vec![0.0];
        });
        let out = sweep_nc(&runner).unwrap();
        for l in out.file("sweep_nc.csv").unwrap().lines().skip(1).filter(|l| l.contains(",ok,")) {
            let f: Vec<f64> = l.split(',').skip(8).take(2).map(|x| x.parse().unwrap()).collect();
            assert!((f[0] - f[1]).abs() <= 1e-12 * f[1], "{l}");
        }
    }

    #[test]
    fn simulated_cells_cover_closed_form() {
        let mut cfg = ExperimentConfig::default();
        cfg.pairs.truncate(1);
        cfg.snr_db = vec![5.0];
        cfg.horizon = 100_000;
        cfg.sweep_nc.n_c = vec![2, 4, 6, 8];
        let runner = Runner::new(cfg, Some(4)).unwrap();
        let out = sweep_nc(&runner).unwrap();
        for l in out.file("sweep_nc.csv").unwrap().lines().skip(1) {
            let f: Vec<f64> = l.split(',').skip(8).map(|x| x.parse().unwrap()).collect();
            let (cf, sim, ci) = (f[0], f[2], f[3]);
            assert!((cf - sim).abs() <= 1.5 * ci, "{l}");
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mk = |jobs| {
            let mut cfg = ExperimentConfig { horizon: 5_000, gnuplot: true, ..ExperimentConfig::default() };
            cfg.sweep_nc.n_c = vec![1, 3, 5, 7, 9, 11, 13];
            sweep_nc(&Runner::new(cfg, Some(jobs)).unwrap()).unwrap()
        };
        let a = mk(1);
        assert_eq!(a, mk(4));
        assert!(a.file("sweep_nc.dat").unwrap().contains("# MNIST+CNN snr_db=3 lambda=0.09\n1 "));
    }

    #[test]
    fn empty_grid_is_config_error() {
        let runner = closed_form_runner(|c| c.sweep_nc.n_c.clear());
        assert!(matches!(sweep_nc(&runner), Err(crate::Error::Config(_))));
        let runner = closed_form_runner(|c| c.sweep_lambda.lambda = vec![0.1, -1.0]);
        assert!(matches!(sweep_lambda(&runner), Err(crate::Error::Config(_))));
    }
}
