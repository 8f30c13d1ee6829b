//! Closed-form peak ages for Poisson arrivals, deterministic service of
//! `n_c` time units and success-gated age resets.
//!
//! With `mu = 1/n_c` and `rho = lambda * n_c` the M/D/1 components are
//! `E[Y] = 1/lambda`, `E[W] = rho / (2 mu (1 - rho))` and `E[S] = n_c`.
//! A failed classification leaves the age growing, which adds the expected
//! extra interarrival time `(1 - p_c) / (lambda p_c)` until an informative
//! update gets through.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::accuracy::{AccuracyCurve, CurveView};
use crate::error::{Error, Result};

/// Arrival rate and number of channel uses of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    lambda: f64,
    n_c: u32,
}

impl SystemParams {
    /// Validates `lambda > 0` and `n_c >= 1`. Stability is checked by the
    /// steady-state functions, not here, so that unstable points can still
    /// be simulated or reported.
    pub fn new(lambda: f64, n_c: u32) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("arrival rate lambda = {lambda} must be positive")));
        }
        if n_c == 0 {
            return Err(Error::Config("n_c must be at least 1".into()));
        }
        Ok(Self { lambda, n_c })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_c(&self) -> u32 {
        self.n_c
    }

    /// Service rate `1 / n_c`.
    pub fn mu(&self) -> f64 {
        1.0 / f64::from(self.n_c)
    }

    /// Utilization `lambda * n_c`.
    pub fn rho(&self) -> f64 {
        self.lambda * f64::from(self.n_c)
    }

    pub fn is_stable(&self) -> bool {
        self.rho() < 1.0
    }

    pub fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable { rho: self.rho(), lambda: self.lambda, n_c: self.n_c })
        }
    }
}

/// Component decomposition of the peak ages at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticResult {
    pub paoti: f64,
    pub paoi: f64,
    /// Mean interarrival time.
    pub e_y: f64,
    /// Mean extra interarrival time until a correctly classified update.
    pub e_that: f64,
    /// Mean waiting time.
    pub e_w: f64,
    /// Mean service time.
    pub e_s: f64,
}

/// `(E[Y], E[W], E[S])` of the M/D/1 queue.
pub fn md1_components(params: &SystemParams) -> Result<(f64, f64, f64)> {
    params.ensure_stable()?;
    let (mu, rho) = (params.mu(), params.rho());
    Ok((1.0 / params.lambda(), rho / (2.0 * mu * (1.0 - rho)), 1.0 / mu))
}

pub fn expected_extra_interarrival(lambda: f64, p_c: f64) -> Result<f64> {
    check_accuracy(p_c)?;
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("arrival rate lambda = {lambda} must be positive")));
    }
    Ok((1.0 - p_c) / (lambda * p_c))
}

/// PAoTI in its reduced form
/// `1 / (lambda p_c) + (2 - lambda n_c) n_c / (2 (1 - lambda n_c))`.
pub fn paoti_closed_form(lambda: f64, n_c: u32, p_c: f64) -> Result<f64> {
    let params = SystemParams::new(lambda, n_c)?;
    params.ensure_stable()?;
    check_accuracy(p_c)?;
    let n = f64::from(n_c);
    let ln = lambda * n;
    Ok(1.0 / (lambda * p_c) + (2.0 - ln) * n / (2.0 * (1.0 - ln)))
}

/// PAoI `E[Y] + E[W] + E[S]`; does not depend on the classifier.
pub fn paoi_closed_form(lambda: f64, n_c: u32) -> Result<f64> {
    let (e_y, e_w, e_s) = md1_components(&SystemParams::new(lambda, n_c)?)?;
    Ok(e_y + e_w + e_s)
}

/// Sums the four components. Independent of [`paoti_closed_form`]'s reduced
/// expression, so the two serve as cross-checks of each other.
pub fn analyze(params: &SystemParams, p_c: f64) -> Result<AnalyticResult> {
    let (e_y, e_w, e_s) = md1_components(params)?;
    let e_that = expected_extra_interarrival(params.lambda(), p_c)?;
    Ok(AnalyticResult { paoti: e_y + e_that + e_w + e_s, paoi: e_y + e_w + e_s, e_y, e_that, e_w, e_s })
}

fn check_accuracy(p_c: f64) -> Result<()> {
    if p_c == 0.0 {
        return Err(Error::Divergent { p_c });
    }
    if !(p_c > 0.0 && p_c <= 1.0) {
        return Err(Error::Config(format!("classification accuracy p_c = {p_c} must be in (0, 1]")));
    }
    Ok(())
}

/// Age-optimal number of channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum {
    pub n_c: u32,
    pub paoti: f64,
}

/// Exhaustive search for the `n_c` minimizing PAoTI over the stable part of
/// `range`. Ties go to the smaller `n_c`.
pub fn optimal_nc(curve: &AccuracyCurve, lambda: f64, range: RangeInclusive<u32>) -> Result<Optimum> {
    optimal_nc_with(curve, lambda, range, CurveView::Raw)
}

pub fn optimal_nc_with(
    curve: &AccuracyCurve,
    lambda: f64,
    range: RangeInclusive<u32>,
    view: CurveView,
) -> Result<Optimum> {
    if range.is_empty() || *range.start() == 0 {
        return Err(Error::Config(format!("invalid n_c range {range:?}")));
    }
    let mut best: Option<Optimum> = None;
    for n_c in range.clone() {
        let params = SystemParams::new(lambda, n_c)?;
        if !params.is_stable() {
            // rho grows with n_c, so nothing further is stable either
            break;
        }
        let p_c = curve.lookup_view(n_c, view);
        let paoti = match paoti_closed_form(lambda, n_c, p_c) {
            Ok(v) => v,
            Err(Error::Divergent { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|b| paoti < b.paoti) {
            best = Some(Optimum { n_c, paoti });
        }
    }
    best.ok_or_else(|| {
        let n_c = *range.start();
        Error::Unstable { rho: lambda * f64::from(n_c), lambda, n_c }
    })
}

/// PAoTI at every stable `n_c` of `range`, in order.
pub fn paoti_profile(
    curve: &AccuracyCurve,
    lambda: f64,
    range: RangeInclusive<u32>,
    view: CurveView,
) -> Vec<(u32, f64)> {
    range
        .filter_map(|n_c| {
            let p_c = curve.lookup_view(n_c, view);
            paoti_closed_form(lambda, n_c, p_c).ok().map(|v| (n_c, v))
        })
        .collect()
}

/// True when `values` strictly decreases to a single minimum and strictly
/// increases after it. Either run may be empty.
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut i = 1;
    while i < values.len() && values[i] < values[i - 1] {
        i += 1;
    }
    while i < values.len() && values[i] > values[i - 1] {
        i += 1;
    }
    i >= values.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accuracy::{CurveKey, CurveSource, Dataset, Model, ParametricCurve};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn md1_components_at_reference_point() {
        let (e_y, e_w, e_s) = md1_components(&SystemParams::new(0.09, 5).unwrap()).unwrap();
        assert!(close(e_y, 11.111_111_111_111_11, 1e-12));
        assert!(close(e_w, 2.045_454_545_454_545, 1e-12));
        assert_eq!(e_s, 5.0);
    }

    #[test]
    fn waiting_vanishes_at_light_load() {
        let (_, e_w, _) = md1_components(&SystemParams::new(1e-9, 5).unwrap()).unwrap();
        assert!(e_w < 1e-7);
    }

    #[test]
    fn saturated_queue_is_unstable() {
        let err = md1_components(&SystemParams::new(0.2, 5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Unstable { rho, .. } if (rho - 1.0).abs() < 1e-12));
        assert!(err.to_string().contains("rho"));
        assert!(paoti_closed_form(0.25, 5, 0.9).is_err());
        assert!(paoi_closed_form(0.2, 5).is_err());
    }

    #[test]
    fn extra_interarrival_values() {
        assert_eq!(expected_extra_interarrival(0.3, 1.0).unwrap(), 0.0);
        assert!(close(expected_extra_interarrival(0.1, 0.5).unwrap(), 10.0, 1e-12));
        assert!(close(expected_extra_interarrival(0.09, 0.9).unwrap(), 1.234_567_901_234_567_6, 1e-12));
        assert!(matches!(expected_extra_interarrival(0.1, 0.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn paoti_reference_values() {
        assert!(close(paoti_closed_form(0.09, 5, 1.0).unwrap(), 18.156_565_656_565_654, 1e-12));
        assert!(close(paoti_closed_form(0.09, 5, 0.9).unwrap(), 19.391_133_557_800_224, 1e-12));
        assert!(close(paoti_closed_form(0.05, 1, 0.5).unwrap(), 41.026_315_789_473_685, 1e-12));
        assert!(matches!(paoti_closed_form(0.05, 1, 0.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn paoi_reference_values() {
        assert!(close(paoi_closed_form(0.09, 5).unwrap(), 18.156_565_656_565_654, 1e-12));
        assert!(close(paoi_closed_form(0.5, 1).unwrap(), 3.5, 1e-12));
    }

    fn synthetic(p_max: f64, alpha: f64) -> AccuracyCurve {
        ParametricCurve::new(p_max, alpha, 0.0)
            .unwrap()
            .synthesize(CurveKey::new(Dataset::Mnist, Model::Fnn, 0.0), &(1..=16).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn perfect_classifier_prefers_fewest_channel_uses() {
        let c = AccuracyCurve::new(
            CurveKey::new(Dataset::Mnist, Model::Cnn, 5.0),
            (1..=16).map(|n| (n, 1.0)).collect(),
            CurveSource::Synthetic,
        )
        .unwrap();
        assert_eq!(optimal_nc(&c, 0.09, 1..=16).unwrap().n_c, 1);
        assert_eq!(optimal_nc(&c, 0.09, 3..=16).unwrap().n_c, 3);
    }

    #[test]
    fn optimum_matches_full_grid_scan() {
        // independent reduced form: 1/(l p) + n + l n^2 / (2 (1 - l n))
        let c = synthetic(0.98, 0.9);
        let lambda = 0.09;
        let mut best = (0, f64::INFINITY);
        for n in 1..=16u32 {
            let nf = f64::from(n);
            if lambda * nf >= 1.0 {
                continue;
            }
            let p = 0.98 * (1.0 - (-0.9 * nf).exp());
            let v = 1.0 / (lambda * p) + nf + lambda * nf * nf / (2.0 * (1.0 - lambda * nf));
            if v < best.1 {
                best = (n, v);
            }
        }
        let opt = optimal_nc(&c, lambda, 1..=16).unwrap();
        assert_eq!(opt.n_c, best.0);
        assert!(close(opt.paoti, best.1, 1e-12));
        assert_eq!(opt.n_c, 3);
    }

    #[test]
    fn no_stable_point_is_an_error() {
        let c = synthetic(0.9, 0.5);
        assert!(matches!(optimal_nc(&c, 0.5, 2..=16), Err(Error::Unstable { .. })));
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(optimal_nc(&c, 0.09, empty).is_err());
    }

    #[test]
    fn unimodality_detector() {
        assert!(is_unimodal(&[3.0, 2.0, 1.0, 2.0, 5.0]));
        assert!(is_unimodal(&[1.0, 2.0, 3.0]));
        assert!(is_unimodal(&[3.0, 2.0]));
        assert!(!is_unimodal(&[3.0, 1.0, 2.0, 1.5, 4.0]));
        assert!(!is_unimodal(&[1.0, 1.0, 2.0]));
    }

    fn stable_point() -> impl Strategy<Value = (f64, u32, f64)> {
        (1u32..40, 0.001f64..0.999, 0.001f64..=1.0).prop_map(|(n_c, rho, p_c)| (rho / f64::from(n_c), n_c, p_c))
    }

    proptest! {
        #[test]
        fn component_sum_equals_reduced_form((lambda, n_c, p_c) in stable_point()) {
            let reduced = paoti_closed_form(lambda, n_c, p_c).unwrap();
            let sum = analyze(&SystemParams::new(lambda, n_c).unwrap(), p_c).unwrap();
            prop_assert!((reduced - sum.paoti).abs() <= 1e-9 * reduced);
            prop_assert!(sum.paoti >= sum.paoi);
            prop_assert!([sum.e_y, sum.e_that, sum.e_w, sum.e_s].iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn paoti_dominates_paoi((lambda, n_c, p_c) in stable_point()) {
            let paoti = paoti_closed_form(lambda, n_c, p_c).unwrap();
            let paoi = paoi_closed_form(lambda, n_c).unwrap();
            if p_c < 1.0 {
                prop_assert!(paoti > paoi);
            } else {
                prop_assert!((paoti - paoi).abs() <= 1e-12 * paoi);
            }
        }

        #[test]
        fn paoti_decreases_in_accuracy((lambda, n_c, p_c) in stable_point(), f in 0.1f64..0.99) {
            let lo = p_c * f;
            prop_assert!(paoti_closed_form(lambda, n_c, lo).unwrap() > paoti_closed_form(lambda, n_c, p_c).unwrap());
        }

        #[test]
        fn paoi_increases_in_channel_uses(lambda in 0.001f64..0.5) {
            let values: Vec<f64> = (1..=64).map_while(|n| paoi_closed_form(lambda, n).ok()).collect();
            prop_assert!(values.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn diverges_at_the_edges() {
        let small = paoti_closed_form(0.09, 5, 1e-9).unwrap();
        assert!(small > 1e9);
        let near_bound = paoti_closed_form(0.2 - 1e-9, 5, 0.9).unwrap();
        assert!(near_bound > 1e8);
    }
}
