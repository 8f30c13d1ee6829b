//! Shipped synthetic accuracy curves.
//!
//! Saturating-exponential curves on `n_c in 1..=16` for the three
//! dataset/model pairs at SNR 0, 3 and 5 dB. Parameters were picked so that
//! the curves rise steeply at small `n_c`, flatten out, improve with SNR and
//! rank MNIST+CNN above MNIST+FNN above CIFAR10+CNN. At `lambda = 0.09`
//! their age-optimal `n_c` is 5, 4, 4 for the MNIST pairs and 6, 5, 4 for
//! CIFAR10+CNN across the three SNRs.

use crate::accuracy::{AccuracyCurve, CurveKey, CurveSet, Dataset, Model, ParametricCurve};

pub const SNR_GRID_DB: [f64; 3] = [0.0, 3.0, 5.0];

pub const PAIRS: [(Dataset, Model); 3] =
    [(Dataset::Mnist, Model::Fnn), (Dataset::Mnist, Model::Cnn), (Dataset::Cifar10, Model::Cnn)];

pub fn grid() -> Vec<u32> {
    (1..=16).collect()
}

/// `(p_max, alpha)` per pair and SNR, `n0 = 0`.
const PARAMS: [[(f64, f64); 3]; 3] = [
    [(0.90, 0.22), (0.93, 0.33), (0.95, 0.40)],
    [(0.93, 0.25), (0.96, 0.35), (0.98, 0.45)],
    [(0.70, 0.15), (0.75, 0.25), (0.80, 0.37)],
];

pub fn parametric(dataset: Dataset, model: Model, snr_db: f64) -> Option<ParametricCurve> {
    let pair = PAIRS.iter().position(|&p| p == (dataset, model))?;
    let snr = SNR_GRID_DB.iter().position(|&s| (s - snr_db).abs() < 1e-9)?;
    let (p_max, alpha) = PARAMS[pair][snr];
    Some(ParametricCurve { p_max, alpha, n0: 0.0 })
}

pub fn synthetic_curves() -> CurveSet {
    let grid = grid();
    let mut curves = Vec::new();
    for (dataset, model) in PAIRS {
        for snr_db in SNR_GRID_DB {
            let params = parametric(dataset, model, snr_db).expect("fixture table covers every pair");
            curves.push(
                params.synthesize(CurveKey::new(dataset, model, snr_db), &grid).expect("fixture parameters are valid"),
            );
        }
    }
    CurveSet::new(curves).expect("fixture keys are distinct")
}

/// Curves of the shape study: `p_max` in {0.9, 0.95, 0.99} crossed with
/// `alpha` in {0.3, 0.6, 0.9}, `n0 = 0`.
pub fn shape_study() -> Vec<(ParametricCurve, AccuracyCurve)> {
    let grid = grid();
    let mut out = Vec::new();
    for p_max in [0.9, 0.95, 0.99] {
        for alpha in [0.3, 0.6, 0.9] {
            let params = ParametricCurve { p_max, alpha, n0: 0.0 };
            let curve =
                params.synthesize(CurveKey::new(Dataset::Mnist, Model::Fnn, 0.0), &grid).expect("valid parameters");
            out.push((params, curve));
        }
    }
    out
}
