use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean; NaN with fewer than two batches.
    pub se: f64,
    /// Half-width of the 95% confidence interval.
    pub halfwidth: f64,
    pub count: u64,
}

impl Estimate {
    /// True when `target` lies within `k` standard errors of the mean.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Accumulates observations into a fixed number of contiguous batches,
/// indexed by the departure that produced them.
#[derive(Debug, Clone)]
pub(crate) struct BatchMeans {
    sums: Vec<f64>,
    counts: Vec<u64>,
    span: u64,
}

impl BatchMeans {
    /// `span` is the number of departure indices covered, `batches` the
    /// target batch count.
    pub fn new(span: u64, batches: usize) -> Self {
        let b = batches.clamp(1, span.max(1) as usize);
        Self { sums: vec![0.0; b], counts: vec![0; b], span: span.max(1) }
    }

    pub fn push(&mut self, index: u64, value: f64) {
        let b = ((u128::from(index) * self.sums.len() as u128) / u128::from(self.span)) as usize;
        let b = b.min(self.sums.len() - 1);
        self.sums[b] += value;
        self.counts[b] += 1;
    }

    pub fn estimate(&self) -> Option<Estimate> {
        let count: u64 = self.counts.iter().sum();
        if count == 0 {
            return None;
        }
        let mean = self.sums.iter().sum::<f64>() / count as f64;
        let means: Vec<f64> =
            self.sums.iter().zip(&self.counts).filter(|(_, &c)| c > 0).map(|(&s, &c)| s / c as f64).collect();
        let b = means.len();
        if b < 2 {
            return Some(Estimate { mean, se: f64::NAN, halfwidth: f64::NAN, count });
        }
        let bm = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
        let se = (var / b as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (b - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
        Some(Estimate { mean, se, halfwidth: t * se, count })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_batches_give_textbook_interval() {
        let mut bm = BatchMeans::new(4, 4);
        for (i, v) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            bm.push(i as u64, v);
        }
        let e = bm.estimate().unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.count, 4);
        // sd of {1,2,3,4} is sqrt(5/3)
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert!((e.halfwidth / e.se - 3.182_446_305_284_263).abs() < 1e-6);
    }

    #[test]
    fn empty_and_single_batch() {
        assert!(BatchMeans::new(10, 4).estimate().is_none());
        let mut bm = BatchMeans::new(1, 32);
        bm.push(0, 7.0);
        let e = bm.estimate().unwrap();
        assert_eq!(e.mean, 7.0);
        assert!(e.se.is_nan());
    }
}
