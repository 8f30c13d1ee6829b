//! Acceptance suite. Prints one PASS/FAIL line per criterion. Failures are
//! reported but only turn into a nonzero exit with `PAOTI_STRICT=1`, since
//! some criteria are statistical and can miss on a fixed seed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paoti_core::accuracy::{CurveKey, CurveSource};
use paoti_core::analytics::{analyze, is_unimodal, md1_components, optimal_nc, paoti_closed_form, paoti_profile};
use paoti_core::controller::follow_oracle;
use paoti_core::experiments::dynamic_table;
use paoti_core::fixtures::{self, shape_study};
use paoti_core::{
    run_sim, AccuracyCurve, ControllerConfig, ControllerState, CurveView, Dataset, ExperimentConfig, Model, PeakKind,
    Runner, SignMode, SimConfig, SystemParams,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn flat(p_c: f64) -> AccuracyCurve {
    let key = CurveKey::new(Dataset::Mnist, Model::Fnn, 0.0);
    AccuracyCurve::new(key, vec![(1, p_c), (64, p_c)], CurveSource::Synthetic).unwrap()
}

const LAMBDAS: [f64; 3] = [0.05, 0.09, 0.15];
const NCS: [u32; 4] = [1, 2, 4, 5];
const PCS: [f64; 3] = [0.5, 0.9, 1.0];
const EVENTS: u64 = 1_000_000;

/// `(lambda, n_c, p_c, mean PAoTI peak, mean waiting)`
type GridRun = (f64, u32, f64, f64, f64);

/// Mean simulated PAoTI and waiting time on the 3x4x3 grid at 1e6 events.
fn grid_runs() -> (Vec<GridRun>, Duration) {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut seed = 100;
    for lambda in LAMBDAS {
        for n_c in NCS {
            for p_c in PCS {
                seed += 1;
                let cfg = SimConfig::new(SystemParams::new(lambda, n_c).unwrap(), EVENTS, seed);
                let stats = run_sim(&cfg, &flat(p_c)).unwrap().stats;
                out.push((lambda, n_c, p_c, stats.paoti.unwrap().mean, stats.waiting.mean));
            }
        }
    }
    (out, start.elapsed())
}

fn closed_form_agreement(runs: &[GridRun], took: Duration) -> Outcome {
    let worst = runs
        .iter()
        .map(|&(l, n, p, sim, _)| {
            let cf = paoti_closed_form(l, n, p).unwrap();
            ((sim - cf) / cf).abs()
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: runs.len() == 36 && worst <= 0.01 && took <= Duration::from_secs(60),
        detail: format!("36 cells, worst relative error {:.4}%, {:.1} s", 100.0 * worst, took.as_secs_f64()),
    }
}

fn waiting_agreement(runs: &[GridRun]) -> Outcome {
    let mut worst = (0.0, 0.0, 0);
    for &(l, n, _, _, w) in runs {
        let exact = md1_components(&SystemParams::new(l, n).unwrap()).unwrap().1;
        let err = ((w - exact) / exact).abs();
        if err > worst.0 {
            worst = (err, l, n);
        }
    }
    Outcome {
        pass: worst.0 <= 0.01,
        detail: format!("worst relative error {:.4}% at lambda={} n_c={}", 100.0 * worst.0, worst.1, worst.2),
    }
}

fn identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n_c = rng.random_range(1..=64u32);
        let lambda = rng.random_range(1e-4..0.9999) / f64::from(n_c);
        let p_c = rng.random_range(1e-3..=1.0);
        let sum = analyze(&SystemParams::new(lambda, n_c).unwrap(), p_c).unwrap().paoti;
        let reduced = paoti_closed_form(lambda, n_c, p_c).unwrap();
        worst = worst.max(((sum - reduced) / reduced).abs());
    }
    Outcome { pass: worst <= 1e-9, detail: format!("10000 draws, worst relative gap {worst:.3e}") }
}

fn collapse() -> Outcome {
    let cfg = SimConfig::new(SystemParams::new(0.09, 5).unwrap(), 100_000, 42).with_trace();
    let trace = run_sim(&cfg, &flat(1.0)).unwrap().trace.unwrap();
    let stream = |kind| trace.peaks.iter().filter(|p| p.kind == kind).map(|p| (p.t_peak, p.value)).collect::<Vec<_>>();
    let (paoi, paoti) = (stream(PeakKind::Paoi), stream(PeakKind::Paoti));
    Outcome {
        pass: paoi.len() == 100_000 && paoi == paoti,
        detail: format!("{} PAoI peaks, {} PAoTI peaks, identical: {}", paoi.len(), paoti.len(), paoi == paoti),
    }
}

fn shape() -> Outcome {
    let lambda = 0.09;
    let mut unimodal = true;
    let mut n_star = Vec::new();
    for (params, curve) in shape_study() {
        let profile: Vec<f64> =
            paoti_profile(&curve, lambda, 1..=16, CurveView::Raw).into_iter().map(|p| p.1).collect();
        unimodal &= profile.len() >= 3 && is_unimodal(&profile);
        n_star.push((params.p_max, params.alpha, optimal_nc(&curve, lambda, 1..=16).unwrap().n_c));
    }
    // grid is p_max-major: index 3 * i + j for p_max[i], alpha[j]
    let at = |i: usize, j: usize| n_star[3 * i + j].2;
    let mono_p = (0..3).all(|j| at(0, j) >= at(1, j) && at(1, j) >= at(2, j));
    let mono_a = (0..3).all(|i| at(i, 0) >= at(i, 1) && at(i, 1) >= at(i, 2));
    let table: Vec<String> = n_star.iter().map(|(p, a, n)| format!("({p},{a})->{n}")).collect();
    Outcome {
        pass: unimodal && mono_p && mono_a,
        detail: format!(
            "unimodal over stable n_c: {unimodal}, nonincreasing in p_max: {mono_p}, in alpha: {mono_a}; {}",
            table.join(" ")
        ),
    }
}

fn controller_oracle() -> Outcome {
    let mut curves: Vec<AccuracyCurve> = fixtures::synthetic_curves().iter().cloned().collect();
    curves.extend(shape_study().into_iter().map(|c| c.1));
    let (mut runs, mut failures, mut skipped) = (0, Vec::new(), 0);
    for lambda in [0.03, 0.05] {
        for curve in &curves {
            let profile: Vec<f64> =
                paoti_profile(curve, lambda, 1..=16, CurveView::Raw).into_iter().map(|p| p.1).collect();
            if profile.len() != 16 || !is_unimodal(&profile) {
                skipped += 1;
                continue;
            }
            let target = optimal_nc(curve, lambda, 1..=16).unwrap().n_c;
            for start in 1..=16u32 {
                let cfg = ControllerConfig {
                    initial_nc: start,
                    n_c_min: 1,
                    n_c_max: 16,
                    sign_mode: SignMode::Descent,
                    seed: u64::from(start),
                    ..ControllerConfig::default()
                };
                let mut state = ControllerState::reset(cfg).unwrap();
                let traj = follow_oracle(&mut state, 1_000, |n| profile[n as usize - 1]);
                let near = |n: &u32| n.abs_diff(target) <= 2;
                // first index after which the trajectory never leaves the band
                let settle = traj.iter().rposition(|n| !near(n)).map_or(0, |i| i + 1);
                runs += 1;
                if settle > 500 {
                    failures.push(format!("{} lambda={lambda} start={start} settle={settle}", curve.key()));
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty() && skipped == 0,
        detail: format!(
            "{runs} trajectories, {} outside +-2 after 500 updates, {skipped} curves skipped {:?}",
            failures.len(),
            failures
        ),
    }
}

fn controller_des() -> Outcome {
    let start = Instant::now();
    let runner = Runner::new(ExperimentConfig::default(), None).unwrap();
    let (rows, summaries) = dynamic_table(&runner).unwrap();
    let took = start.elapsed();
    let cnn = summaries.iter().find(|s| s.pair.dataset == Dataset::Mnist && s.pair.model == Model::Cnn).unwrap();
    let top = runner.config().dynamic.lambda.iter().copied().fold(0.0, f64::max);
    let top_ok = rows.iter().filter(|r| r.lambda == top).all(|r| r.dynamic.unwrap().mean <= r.fixed.unwrap().mean);
    let all: Vec<String> = summaries.iter().map(|s| format!("{} {:.1}%", s.pair, s.reduction_pct())).collect();
    Outcome {
        pass: cnn.reduction_pct() >= 20.0 && top_ok && took <= Duration::from_secs(300),
        detail: format!(
            "MNIST+CNN reduction {:.1}% (all: {}); dynamic <= fixed in every cell at lambda={top}: {top_ok}; {:.1} s",
            cnn.reduction_pct(),
            all.join(", "),
            took.as_secs_f64()
        ),
    }
}

fn run_cli(verb: &str, config: &Path, out: &Path, jobs: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_paoti"))
        .args([verb, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--seed", "11", "--jobs", jobs])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    std::fs::write(
        &config,
        "horizon = 20000\ngnuplot = true\n[validate]\nhorizon = 20000\nreplications = 2\nidentity_draws = 1000\n",
    )
    .unwrap();
    let mut diffs = Vec::new();
    let mut files = 0;
    for verb in ["sweep-nc", "sweep-lambda", "compare-dynamic", "validate", "fit-curves"] {
        let (a, b) = (tmp.path().join(format!("{verb}-a")), tmp.path().join(format!("{verb}-b")));
        // validate may exit 1 on a statistical miss; the bytes still have to match
        run_cli(verb, &config, &a, "1");
        run_cli(verb, &config, &b, "3");
        let (fa, fb) = (read_dir(&a), read_dir(&b));
        files += fa.len();
        if fa.is_empty() || fa != fb {
            diffs.push(verb);
        }
    }
    Outcome {
        pass: diffs.is_empty(),
        detail: format!("5 commands run twice (1 and 3 workers), {files} files compared, differing: {diffs:?}"),
    }
}

fn main() {
    let (runs, took) = grid_runs();
    let results = [
        ("closed-form vs simulated PAoTI, 3x4x3 grid, 1e6 events, 1%, 60 s", closed_form_agreement(&runs, took)),
        ("component sum equals reduced closed form to 1e-9", identity()),
        ("M/D/1 mean waiting within 1% at 1e6 arrivals", waiting_agreement(&runs)),
        ("p_c = 1 PAoTI peaks equal PAoI peaks event by event", collapse()),
        ("shape study: unimodal, n_c* nonincreasing in p_max and alpha", shape()),
        ("controller: descent reaches +-2 of argmin within 500 oracle updates", controller_oracle()),
        ("controller: DES dynamic n_c >= 20% below fixed n_c = 5, 5 min", controller_des()),
        ("CLI output byte-identical across reruns", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 && std::env::var_os("PAOTI_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
