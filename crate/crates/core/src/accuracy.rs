//! Classification-accuracy curves `p_c(n_c)`.
//!
//! A curve is the only thing the simulator needs to know about the
//! encoder/decoder pair: the probability that a sample sent with `n_c`
//! channel uses is classified correctly at a given SNR. Curves come from the
//! trainer's accuracy table, from a [`ParametricCurve`], or from a fit.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of the accuracy-table CSV shared with the trainer.
pub const TABLE_HEADER: [&str; 7] = ["dataset", "model", "snr_db", "n_c", "p_c", "n_test", "seed"];

/// Tolerance used when matching SNR labels.
const SNR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "MNIST")]
    Mnist,
    #[serde(rename = "CIFAR10", alias = "CIFAR-10")]
    Cifar10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "FNN")]
    Fnn,
    #[serde(rename = "CNN")]
    Cnn,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Mnist => "MNIST",
            Dataset::Cifar10 => "CIFAR10",
        })
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MNIST" => Ok(Dataset::Mnist),
            "CIFAR10" | "CIFAR-10" => Ok(Dataset::Cifar10),
            other => Err(format!("unknown dataset `{other}`")),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Fnn => "FNN",
            Model::Cnn => "CNN",
        })
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FNN" => Ok(Model::Fnn),
            "CNN" => Ok(Model::Cnn),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveSource {
    Trained,
    Synthetic,
    Fitted,
}

/// Which view of a curve to read.
///
/// `Raw` returns the measured accuracies as they are. `Monotone` returns the
/// isotonic (nondecreasing) regression of the raw points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveView {
    #[default]
    Raw,
    Monotone,
}

/// Identifies one curve: a (dataset, model, SNR) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveKey {
    pub dataset: Dataset,
    pub model: Model,
    pub snr_db: f64,
}

impl CurveKey {
    pub fn new(dataset: Dataset, model: Model, snr_db: f64) -> Self {
        Self { dataset, model, snr_db }
    }

    pub fn matches(&self, dataset: Dataset, model: Model, snr_db: f64) -> bool {
        self.dataset == dataset && self.model == model && (self.snr_db - snr_db).abs() <= SNR_EPS
    }

    fn sort_key(&self, other: &Self) -> Ordering {
        (self.dataset, self.model).cmp(&(other.dataset, other.model)).then(self.snr_db.total_cmp(&other.snr_db))
    }
}

impl fmt::Display for CurveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{} @ {} dB", self.dataset, self.model, self.snr_db)
    }
}

/// Accuracy `p_c` as a function of the number of channel uses for one
/// (dataset, model, SNR) triple.
///
/// Invariants: at least two points, `n_c` strictly increasing and positive,
/// every `p_c` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    key: CurveKey,
    points: Vec<(u32, f64)>,
    monotone: Vec<f64>,
    source: CurveSource,
}

impl AccuracyCurve {
    pub fn new(key: CurveKey, points: Vec<(u32, f64)>, source: CurveSource) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation(format!("{key}: a curve needs at least 2 points, got {}", points.len())));
        }
        for (i, &(n_c, p_c)) in points.iter().enumerate() {
            if n_c == 0 {
                return Err(Error::Validation(format!("{key}: n_c must be positive")));
            }
            if !(0.0..=1.0).contains(&p_c) {
                return Err(Error::Validation(format!("{key}: p_c = {p_c} at n_c = {n_c} is outside [0, 1]")));
            }
            if i > 0 && points[i - 1].0 >= n_c {
                return Err(Error::Validation(format!(
                    "{key}: n_c values must be strictly increasing ({} then {n_c})",
                    points[i - 1].0
                )));
            }
        }
        let values: Vec<f64> = points.iter().map(|&(_, p)| p).collect();
        let monotone = isotonic_nondecreasing(&values);
        Ok(Self { key, points, monotone, source })
    }

    pub fn key(&self) -> &CurveKey {
        &self.key
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    /// Points of the isotonic-regularized view.
    pub fn monotone_points(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.points.iter().zip(&self.monotone).map(|(&(n, _), &p)| (n, p))
    }

    /// Smallest and largest tabulated `n_c`.
    pub fn n_c_span(&self) -> (u32, u32) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Raw-view accuracy at `n_c`.
    pub fn lookup(&self, n_c: u32) -> f64 {
        self.interpolate(f64::from(n_c), CurveView::Raw)
    }

    pub fn lookup_view(&self, n_c: u32, view: CurveView) -> f64 {
        self.interpolate(f64::from(n_c), view)
    }

    /// Piecewise-linear interpolation between knots, clamped to the end
    /// values outside the tabulated range.
    pub fn interpolate(&self, x: f64, view: CurveView) -> f64 {
        let value = |i: usize| match view {
            CurveView::Raw => self.points[i].1,
            CurveView::Monotone => self.monotone[i],
        };
        let last = self.points.len() - 1;
        if x <= f64::from(self.points[0].0) {
            return value(0);
        }
        if x >= f64::from(self.points[last].0) {
            return value(last);
        }
        // first knot strictly greater than x
        let hi = self.points.partition_point(|&(n, _)| f64::from(n) <= x);
        let lo = hi - 1;
        let (x0, x1) = (f64::from(self.points[lo].0), f64::from(self.points[hi].0));
        let (y0, y1) = (value(lo), value(hi));
        if x == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Accuracy at `n_c` on the raw view of `curve`.
pub fn lookup_pc(curve: &AccuracyCurve, n_c: u32) -> Result<f64> {
    if n_c == 0 {
        return Err(Error::Config("n_c must be at least 1".into()));
    }
    Ok(curve.lookup(n_c))
}

/// Pool-adjacent-violators regression onto nondecreasing sequences.
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m1, w1) = blocks[blocks.len() - 1];
            let (m0, w0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let w = w0 + w1;
            *blocks.last_mut().unwrap() = ((m0 * w0 as f64 + m1 * w1 as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// Saturating-exponential accuracy model
/// `p(n) = p_max * (1 - exp(-alpha * (n - n0)))`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricCurve {
    pub p_max: f64,
    pub alpha: f64,
    pub n0: f64,
}

impl ParametricCurve {
    pub fn new(p_max: f64, alpha: f64, n0: f64) -> Result<Self> {
        if !(p_max > 0.0 && p_max <= 1.0) {
            return Err(Error::Validation(format!("p_max = {p_max} must be in (0, 1]")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Validation(format!("alpha = {alpha} must be positive")));
        }
        if !n0.is_finite() {
            return Err(Error::Validation(format!("n0 = {n0} must be finite")));
        }
        Ok(Self { p_max, alpha, n0 })
    }

    pub fn eval(&self, n: f64) -> f64 {
        let t = n - self.n0;
        if t <= 0.0 {
            return 0.0;
        }
        (self.p_max * (1.0 - (-self.alpha * t).exp())).clamp(0.0, 1.0)
    }

    /// Tabulates the model on `grid`. The result must still satisfy the
    /// curve invariants, so a single-point grid is rejected.
    pub fn synthesize(&self, key: CurveKey, grid: &[u32]) -> Result<AccuracyCurve> {
        synth_curve(self, key, grid)
    }
}

pub fn synth_curve(params: &ParametricCurve, key: CurveKey, grid: &[u32]) -> Result<AccuracyCurve> {
    if grid.is_empty() {
        return Err(Error::Validation(format!("{key}: empty n_c grid")));
    }
    let points = grid.iter().map(|&n| (n, params.eval(f64::from(n)))).collect();
    AccuracyCurve::new(key, points, CurveSource::Synthetic)
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Floor for `alpha`; a degenerate (flat) fit pins alpha here.
    pub alpha_min: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { alpha_min: 1e-3, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub params: ParametricCurve,
    /// Root-mean-square residual over the fitted points.
    pub rms: f64,
    /// Set when the points carry no shape information (all equal).
    pub degenerate: bool,
}

/// Least-squares fit of a [`ParametricCurve`] to the raw points of `curve`.
pub fn fit_parametric(curve: &AccuracyCurve) -> Result<FitReport> {
    fit_parametric_with(curve, FitOptions::default())
}

pub fn fit_parametric_with(curve: &AccuracyCurve, opts: FitOptions) -> Result<FitReport> {
    let pts: Vec<(f64, f64)> = curve.points().iter().map(|&(n, p)| (f64::from(n), p)).collect();
    if pts.len() < 3 {
        return Err(Error::Validation(format!("{}: fitting needs at least 3 points, got {}", curve.key(), pts.len())));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, p)| (lo.min(p), hi.max(p)));
    if hi - lo < 1e-12 {
        // Flat: push the onset far enough left that the exponential term
        // vanishes over the whole grid.
        let p_max = hi.max(f64::MIN_POSITIVE);
        let n0 = pts[0].0 - 40.0 / opts.alpha_min;
        let params = ParametricCurve { p_max, alpha: opts.alpha_min, n0 };
        return Ok(FitReport { params, rms: rms(&params, &pts), degenerate: true });
    }

    let mut best: Option<(ParametricCurve, f64)> = None;
    for start in initial_guesses(&pts, opts) {
        let fitted = levenberg_marquardt(start, &pts, opts);
        let cost = sum_sq(&fitted, &pts);
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((fitted, cost));
        }
    }
    let (params, _) = best.expect("at least one start");
    Ok(FitReport { params, rms: rms(&params, &pts), degenerate: false })
}

fn initial_guesses(pts: &[(f64, f64)], opts: FitOptions) -> Vec<ParametricCurve> {
    let p_hi = pts.iter().map(|&(_, p)| p).fold(0.0, f64::max);
    let mut out = Vec::new();
    for scale in [1.0, 1.02, 1.1] {
        let p_max = (p_hi * scale).clamp(1e-6, 1.0);
        // linearize: -ln(1 - p / p_max) = alpha * (n - n0)
        let lin: Vec<(f64, f64)> = pts
            .iter()
            .filter(|&&(_, p)| p > 0.0 && p / p_max < 0.999)
            .map(|&(n, p)| (n, -(1.0 - p / p_max).ln()))
            .collect();
        if lin.len() >= 2 {
            let k = lin.len() as f64;
            let mx = lin.iter().map(|v| v.0).sum::<f64>() / k;
            let my = lin.iter().map(|v| v.1).sum::<f64>() / k;
            let sxx: f64 = lin.iter().map(|v| (v.0 - mx).powi(2)).sum();
            let sxy: f64 = lin.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
            if sxx > 0.0 && sxy > 0.0 {
                let alpha = (sxy / sxx).max(opts.alpha_min);
                let n0 = mx - my / alpha;
                out.push(ParametricCurve { p_max, alpha, n0 });
            }
        }
        out.push(ParametricCurve { p_max, alpha: 0.5, n0: 0.0 });
    }
    out
}

fn residuals<'a>(c: &ParametricCurve, pts: &'a [(f64, f64)]) -> impl Iterator<Item = f64> + 'a {
    let c = *c;
    pts.iter().map(move |&(n, p)| c.p_max * (1.0 - (-c.alpha * (n - c.n0)).exp()) - p)
}

fn sum_sq(c: &ParametricCurve, pts: &[(f64, f64)]) -> f64 {
    residuals(c, pts).map(|r| r * r).sum()
}

fn rms(c: &ParametricCurve, pts: &[(f64, f64)]) -> f64 {
    // evaluated on the clamped model, which is what callers consume
    let ss: f64 = pts.iter().map(|&(n, p)| (c.eval(n) - p).powi(2)).sum();
    (ss / pts.len() as f64).sqrt()
}

fn project(c: ParametricCurve, opts: FitOptions) -> ParametricCurve {
    ParametricCurve { p_max: c.p_max.clamp(1e-9, 1.0), alpha: c.alpha.max(opts.alpha_min), n0: c.n0 }
}

fn levenberg_marquardt(start: ParametricCurve, pts: &[(f64, f64)], opts: FitOptions) -> ParametricCurve {
    let mut cur = project(start, opts);
    let mut cost = sum_sq(&cur, pts);
    let mut damping = 1e-3;
    for _ in 0..opts.max_iterations {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&(n, _), r) in pts.iter().zip(residuals(&cur, pts)) {
            let e = (-cur.alpha * (n - cur.n0)).exp();
            let j = [1.0 - e, cur.p_max * (n - cur.n0) * e, -cur.p_max * cur.alpha * e];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while damping < 1e12 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += damping * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(m, jtr.map(|v| -v)) else {
                damping *= 10.0;
                continue;
            };
            let cand = project(
                ParametricCurve { p_max: cur.p_max + step[0], alpha: cur.alpha + step[1], n0: cur.n0 + step[2] },
                opts,
            );
            let c = sum_sq(&cand, pts);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                cur = cand;
                cost = c;
                damping = (damping / 10.0).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            damping *= 10.0;
        }
        if !improved || cost < 1e-28 {
            break;
        }
    }
    cur
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// All curves of one accuracy table, ordered by (dataset, model, SNR).
#[derive(Debug, Clone, Default)]
pub struct CurveSet {
    curves: Vec<AccuracyCurve>,
}

impl CurveSet {
    pub fn new(mut curves: Vec<AccuracyCurve>) -> Result<Self> {
        curves.sort_by(|a, b| a.key.sort_key(&b.key));
        for w in curves.windows(2) {
            if w[0].key.matches(w[1].key.dataset, w[1].key.model, w[1].key.snr_db) {
                return Err(Error::Validation(format!("duplicate curve {}", w[0].key)));
            }
        }
        Ok(Self { curves })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AccuracyCurve> {
        self.curves.iter()
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn get(&self, dataset: Dataset, model: Model, snr_db: f64) -> Result<&AccuracyCurve> {
        self.curves.iter().find(|c| c.key.matches(dataset, model, snr_db)).ok_or_else(|| Error::MissingCurve {
            dataset: dataset.to_string(),
            model: model.to_string(),
            snr_db,
        })
    }
}

impl<'a> IntoIterator for &'a CurveSet {
    type Item = &'a AccuracyCurve;
    type IntoIter = std::slice::Iter<'a, AccuracyCurve>;

    fn into_iter(self) -> Self::IntoIter {
        self.curves.iter()
    }
}

/// Reads an accuracy table from disk.
pub fn load_tables(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tables(file, &path.display().to_string())
}

/// `(n_c, p_c, line)` of one table row.
type Row = (u32, f64, u64);

/// Parses an accuracy table. `origin` labels errors.
pub fn parse_tables(reader: impl Read, origin: &str) -> Result<CurveSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, msg: String| Error::Parse { path: origin.to_string(), line, msg };

    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let header: Vec<&str> = headers.iter().collect();
    if header != TABLE_HEADER {
        return Err(parse_err(1, format!("expected header `{}`", TABLE_HEADER.join(","))));
    }

    let mut groups: Vec<(CurveKey, Vec<Row>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let dataset: Dataset = field(0).parse().map_err(|m| parse_err(line, m))?;
        let model: Model = field(1).parse().map_err(|m| parse_err(line, m))?;
        let snr_db: f64 = parse_num(field(2), "snr_db").map_err(|m| parse_err(line, m))?;
        let n_c: u32 = parse_num(field(3), "n_c").map_err(|m| parse_err(line, m))?;
        let p_c: f64 = parse_num(field(4), "p_c").map_err(|m| parse_err(line, m))?;
        for (i, name) in [(5, "n_test"), (6, "seed")] {
            if !field(i).is_empty() {
                parse_num::<u64>(field(i), name).map_err(|m| parse_err(line, m))?;
            }
        }
        if !snr_db.is_finite() {
            return Err(parse_err(line, format!("snr_db `{}` is not finite", field(2))));
        }
        if n_c == 0 {
            return Err(Error::Validation(format!("{origin}: line {line}: n_c must be positive")));
        }
        if !(0.0..=1.0).contains(&p_c) {
            return Err(Error::Validation(format!("{origin}: line {line}: p_c = {p_c} is outside [0, 1]")));
        }
        let idx = match groups.iter().position(|(k, _)| k.matches(dataset, model, snr_db)) {
            Some(i) => i,
            None => {
                groups.push((CurveKey::new(dataset, model, snr_db), Vec::new()));
                groups.len() - 1
            }
        };
        let rows = &mut groups[idx].1;
        if let Some(&(_, _, first)) = rows.iter().find(|r| r.0 == n_c) {
            return Err(Error::Validation(format!(
                "{origin}: line {line}: duplicate n_c = {n_c} for {} (first seen on line {first})",
                groups[idx].0
            )));
        }
        rows.push((n_c, p_c, line));
    }

    let curves = groups
        .into_iter()
        .map(|(key, mut rows)| {
            rows.sort_by_key(|r| r.0);
            AccuracyCurve::new(key, rows.into_iter().map(|(n, p, _)| (n, p)).collect(), CurveSource::Trained)
        })
        .collect::<Result<Vec<_>>>()?;
    CurveSet::new(curves)
}

fn parse_num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {name} `{s}`"))
}

/// Writes curves in the accuracy-table format. `n_test` and `seed` are
/// left empty for curves that were not measured.
pub fn write_tables<'a>(curves: impl IntoIterator<Item = &'a AccuracyCurve>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for curve in curves {
        let k = curve.key();
        for &(n_c, p_c) in curve.points() {
            w.write_record([
                k.dataset.to_string(),
                k.model.to_string(),
                k.snr_db.to_string(),
                n_c.to_string(),
                p_c.to_string(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<accuracy table>", e))?;
    Ok(())
}
