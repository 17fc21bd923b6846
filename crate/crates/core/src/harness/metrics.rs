//! Detection, estimation and localization error metrics plus simple
//! aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::CMatrix;

/// Fraction of users whose activity was misjudged.
pub fn metric_pe(zeta: &[bool], zeta_hat: &[bool]) -> Result<f64> {
    if zeta.len() != zeta_hat.len() || zeta.is_empty() {
        return Err(Error::Shape("activity vectors differ in length".into()));
    }
    let wrong = zeta.iter().zip(zeta_hat).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / zeta.len() as f64)
}

/// `Σ‖h − ĥ‖² / Σ‖h‖²` over all pilots.
pub fn nmse_ratio(h: &CMatrix, h_hat: &CMatrix) -> Result<f64> {
    if h.shape() != h_hat.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", h.shape(), h_hat.shape())));
    }
    let sig: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if !(sig > 0.0) {
        return Err(Error::ZeroReference);
    }
    let err: f64 = h.iter().zip(h_hat.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / sig)
}

/// NMSE in dB; an exact estimate gives `-inf`.
pub fn metric_nmse_db(h: &CMatrix, h_hat: &CMatrix) -> Result<f64> {
    Ok(ratio_to_db(nmse_ratio(h, h_hat)?))
}

pub fn ratio_to_db(r: f64) -> f64 {
    10.0 * r.log10()
}

/// `sqrt(((x̂−x)² + (ŷ−y)²)/2)`.
pub fn metric_rmse_xy(truth: &Point, est: &Point) -> f64 {
    (((est.x - truth.x).powi(2) + (est.y - truth.y).powi(2)) / 2.0).sqrt()
}

/// Mean and 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

pub fn mean_ci(v: &[f64]) -> MeanCi {
    let n = v.len();
    if n == 0 {
        return MeanCi {
            mean: f64::NAN,
            ci95: f64::NAN,
            n,
        };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ci95 = if n > 1 {
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    MeanCi { mean, ci95, n }
}

/// Empirical CDF over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    sorted: Vec<f64>,
}

impl Cdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| !x.is_nan()).collect();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let count = self.sorted.partition_point(|&s| s <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Sorted samples paired with their cumulative fractions.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, (i + 1) as f64 / n))
            .collect()
    }

    pub fn median(&self) -> f64 {
        let n = self.sorted.len();
        match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => self.sorted[n / 2],
            _ => 0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2]),
        }
    }
}
