use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{positive_lambdas, positive_nc};
use super::{csv_text, Output, OutputFile, Runner};
use crate::accuracy::{AccuracyCurve, CurveKey, CurveSource, Dataset, Model};
use crate::analytics::{analyze, md1_components, paoi_closed_form, paoti_closed_form, SystemParams};
use crate::des::{run_sim, Estimate, PeakKind, SimConfig};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

const IDENTITY_STREAM: u64 = 0x1D;
const COLLAPSE_STREAM: u64 = 0xC0;

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub lambda: Option<f64>,
    pub n_c: Option<u32>,
    pub p_c: Option<f64>,
    pub expected: f64,
    pub observed: f64,
    /// Standard error of `observed` for statistical checks.
    pub se: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn z(&self) -> Option<f64> {
        self.se.map(|se| (self.observed - self.expected) / se)
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.name.to_string(),
            opt(self.lambda.map(|v| v.to_string())),
            opt(self.n_c.map(|v| v.to_string())),
            opt(self.p_c.map(|v| v.to_string())),
            self.expected.to_string(),
            self.observed.to_string(),
            opt(self.se.map(|v| v.to_string())),
            opt(self.z().map(|v| v.to_string())),
            if self.pass { "pass" } else { "fail" }.to_string(),
        ]
    }
}

fn flat_curve(p_c: f64, top: u32) -> Result<AccuracyCurve> {
    let key = CurveKey::new(Dataset::Mnist, Model::Fnn, 0.0);
    AccuracyCurve::new(key, vec![(1, p_c), (top.max(1) + 1, p_c)], CurveSource::Synthetic)
}

/// Mean of the replication means with the standard error of that mean.
fn pooled(ests: &[Estimate]) -> (f64, f64) {
    let r = ests.len() as f64;
    let mean = ests.iter().map(|e| e.mean).sum::<f64>() / r;
    let se = ests.iter().map(|e| e.se * e.se).sum::<f64>().sqrt() / r;
    (mean, se)
}

/// Largest relative gap between the component sum and the reduced PAoTI
/// expression over random stable parameters.
fn identity_check(seed: u64, draws: u32) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[IDENTITY_STREAM]));
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let n_c = rng.random_range(1..=32u32);
        let lambda = rng.random_range(0.001..0.999) / f64::from(n_c);
        let p_c = rng.random_range(0.01..=1.0);
        let sum = analyze(&SystemParams::new(lambda, n_c)?, p_c)?.paoti;
        let reduced = paoti_closed_form(lambda, n_c, p_c)?;
        worst = worst.max((sum - reduced).abs() / reduced);
    }
    Ok(Check {
        name: "identity",
        lambda: None,
        n_c: None,
        p_c: None,
        expected: 0.0,
        observed: worst,
        se: None,
        pass: worst <= 1e-9,
    })
}

/// With a perfect classifier the PAoTI and PAoI peak streams coincide.
fn collapse_check(seed: u64, padding: u32) -> Result<Check> {
    let (lambda, n_c) = (0.09, 5);
    let mut sim =
        SimConfig::new(SystemParams::new(lambda, n_c)?, 10_000, derive_seed(seed, &[COLLAPSE_STREAM])).with_trace();
    sim.service_padding = padding;
    let trace = run_sim(&sim, &flat_curve(1.0, n_c)?)?.trace.expect("trace requested");
    let paoi = trace.peaks.iter().filter(|p| p.kind == PeakKind::Paoi);
    let paoti = trace.peaks.iter().filter(|p| p.kind == PeakKind::Paoti);
    let (a, b): (Vec<_>, Vec<_>) =
        (paoi.map(|p| (p.t_peak, p.value)).collect(), paoti.map(|p| (p.t_peak, p.value)).collect());
    let mismatches = a.len().abs_diff(b.len()) + a.iter().zip(&b).filter(|(x, y)| x != y).count();
    Ok(Check {
        name: "collapse",
        lambda: Some(lambda),
        n_c: Some(n_c),
        p_c: Some(1.0),
        expected: 0.0,
        observed: mismatches as f64,
        se: None,
        pass: mismatches == 0,
    })
}

fn cell_checks(runner: &Runner, index: u64, &(lambda, n_c, p_c): &(f64, u32, f64)) -> Result<Vec<Check>> {
    let cfg = runner.config();
    let spec = &cfg.validate;
    let params = SystemParams::new(lambda, n_c)?;
    let curve = flat_curve(p_c, n_c)?;
    let (mut paoti, mut paoi, mut wait) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..u64::from(spec.replications) {
        let mut sim = SimConfig::new(params, spec.horizon, derive_seed(cfg.seed, &[index, rep]));
        sim.service_padding = spec.service_padding;
        let stats = run_sim(&sim, &curve)?.stats;
        paoti.extend(stats.paoti);
        paoi.push(stats.paoi);
        wait.push(stats.waiting);
    }
    let check = |name, expected: f64, ests: &[Estimate]| {
        let (observed, se) = pooled(ests);
        Check {
            name,
            lambda: Some(lambda),
            n_c: Some(n_c),
            p_c: Some(p_c),
            expected,
            observed,
            se: Some(se),
            pass: ests.len() == spec.replications as usize && (observed - expected).abs() <= spec.tolerance_se * se,
        }
    };
    Ok(vec![
        check("paoti", paoti_closed_form(lambda, n_c, p_c)?, &paoti),
        check("paoi", paoi_closed_form(lambda, n_c)?, &paoi),
        check("waiting", md1_components(&params)?.1, &wait),
    ])
}

/// Every check of the report, in order: identity, collapse, then three
/// statistical checks per `(lambda, n_c, p_c)` cell.
pub fn validate_checks(runner: &Runner) -> Result<Vec<Check>> {
    let cfg = runner.config();
    let spec = &cfg.validate;
    positive_lambdas("validate.lambda", &spec.lambda)?;
    positive_nc("validate.n_c", &spec.n_c)?;
    super::config::nonempty("validate.p_c", &spec.p_c)?;
    if spec.horizon == 0 || spec.replications == 0 {
        return Err(Error::Config("validate.horizon and validate.replications must be at least 1".into()));
    }
    if !(spec.tolerance_se > 0.0) {
        return Err(Error::Config(format!("validate.tolerance_se = {} must be positive", spec.tolerance_se)));
    }
    if let Some(p) = spec.p_c.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::Config(format!("validate.p_c = {p} must be in (0, 1]")));
    }
    let mut cells = Vec::new();
    for &lambda in &spec.lambda {
        for &n_c in &spec.n_c {
            SystemParams::new(lambda, n_c)?
                .ensure_stable()
                .map_err(|e| Error::Config(format!("validate grid: {e}")))?;
            for &p_c in &spec.p_c {
                cells.push((lambda, n_c, p_c));
            }
        }
    }
    let mut checks =
        vec![identity_check(cfg.seed, spec.identity_draws)?, collapse_check(cfg.seed, spec.service_padding)?];
    for c in runner.map_cells(&cells, |i, c| cell_checks(runner, i, c))? {
        checks.extend(c);
    }
    Ok(checks)
}

/// Closed form against simulation over the validation grid. `passed` is
/// false if any check fails.
pub fn validate(runner: &Runner) -> Result<Output> {
    let checks = validate_checks(runner)?;
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    let csv = csv_text(
        &["check", "lambda", "n_c", "p_c", "expected", "observed", "se", "z", "pass"],
        checks.iter().map(Check::record),
    )?;
    let mut summary = format!("{} checks, {} failed\n", checks.len(), failed.len());
    for c in &failed {
        summary.push_str(&format!(
            "FAIL {} lambda={:?} n_c={:?} p_c={:?}: expected {} observed {}\n",
            c.name, c.lambda, c.n_c, c.p_c, c.expected, c.observed
        ));
    }
    Ok(Output {
        files: vec![OutputFile { name: "validate.csv".into(), contents: csv }],
        summary,
        passed: failed.is_empty(),
    })
}
