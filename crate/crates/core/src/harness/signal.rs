//! Post-processing of force histories and error ladders.

use crate::error::{Error, Result};

/// Fraction of a series discarded as start-up transient before estimating
/// the shedding frequency.
pub const TRANSIENT_FRACTION: f64 = 0.3;

/// Strouhal number from a lift history sampled every `dt`.
///
/// The first 30% of the series is dropped; the period is the mean spacing
/// of upward zero crossings of the remaining, mean-subtracted signal.
pub fn strouhal(lift: &[f64], dt: f64, d: f64, u: f64) -> Result<f64> {
    if !(dt > 0.0 && d > 0.0 && u > 0.0) {
        return Err(Error::Argument(format!("strouhal needs dt, D, U > 0, got {dt}, {d}, {u}")));
    }
    let start = (lift.len() as f64 * TRANSIENT_FRACTION).ceil() as usize;
    let tail = &lift[start.min(lift.len())..];
    let crossings = upward_crossings(tail);
    if crossings.len() < 3 {
        return Err(Error::InsufficientCycles { crossings: crossings.len() });
    }
    let period = dt * (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Ok(d / (u * period))
}

/// Fractional sample positions where the mean-subtracted series crosses
/// zero from below.
fn upward_crossings(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let scale = series.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (k, w) in series.windows(2).enumerate() {
        let (a, b) = (w[0] - mean, w[1] - mean);
        if a < 0.0 && b >= 0.0 {
            out.push(k as f64 + a / (a - b));
        }
    }
    out
}

/// Three-point moving average with the end points kept.
pub fn smooth3(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::Argument(format!("smoothing needs at least 3 samples, got {}", series.len())));
    }
    let mut out = series.to_vec();
    for i in 1..series.len() - 1 {
        out[i] = (series[i - 1] + series[i] + series[i + 1]) / 3.0;
    }
    Ok(out)
}

/// Observed order between two meshes that differ by a factor of two in `h`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

pub fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Root mean square (about zero).
pub fn rms(series: &[f64]) -> f64 {
    (series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64).sqrt()
}

/// Quadrature cost of one adaptive level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRow {
    pub level: u32,
    pub n_quad_points: usize,
    pub assembly_wall_ms: f64,
    /// `n(L+1)/n(L)`; absent for the deepest level.
    pub growth: Option<f64>,
}

/// Point-count growth per level from `(level, points, assembly ms)` samples.
pub fn cost_curves(samples: &[(u32, usize, f64)]) -> Result<Vec<CostRow>> {
    if samples.len() < 3 {
        return Err(Error::Argument(format!("cost curves need at least 3 levels, got {}", samples.len())));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.0);
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &(level, n, ms))| CostRow {
            level,
            n_quad_points: n,
            assembly_wall_ms: ms,
            growth: sorted.get(k + 1).filter(|next| next.0 == level + 1).map(|next| next.1 as f64 / n as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn strouhal_of_a_pure_tone() {
        let s: Vec<f64> = (0..4000).map(|k| (2.0 * PI * 0.147 * k as f64 * 0.1).sin()).collect();
        let st = strouhal(&s, 0.1, 1.0, 1.0).unwrap();
        assert!((st - 0.147).abs() < 1e-3, "{st}");
    }

    #[test]
    fn strouhal_rejects_flat_series() {
        assert!(matches!(strouhal(&[2.0; 500], 0.1, 1.0, 1.0), Err(Error::InsufficientCycles { crossings: 0 })));
    }

    #[test]
    fn strouhal_follows_dominant_tone() {
        let s: Vec<f64> = (0..4000)
            .map(|k| {
                let t = k as f64 * 0.1;
                (2.0 * PI * 0.15 * t).sin() + 0.1 * (2.0 * PI * 0.41 * t + 0.3).sin()
            })
            .collect();
        let st = strouhal(&s, 0.1, 2.0, 4.0).unwrap();
        assert!((st - 0.15 * 2.0 / 4.0).abs() < 1e-3, "{st}");
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth3(&[2.0; 5]).unwrap(), vec![2.0; 5]);
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        let ramp: Vec<f64> = (0..10).map(|k| 0.5 * k as f64 - 1.0).collect();
        for (a, b) in smooth3(&ramp).unwrap().iter().zip(&ramp) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(smooth3(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn rate_is_log2_ratio() {
        assert_eq!(convergence_rate(4.0, 1.0), 2.0);
        assert_eq!(convergence_rate(1.0, 0.125), 3.0);
    }

    #[test]
    fn cost_growth_factors() {
        let rows = cost_curves(&[(3, 200, 2.0), (2, 100, 1.0), (4, 500, 5.0)]).unwrap();
        assert_eq!(rows[0].growth, Some(2.0));
        assert_eq!(rows[1].growth, Some(2.5));
        assert_eq!(rows[2].growth, None);
        assert!(cost_curves(&[(1, 1, 0.0), (2, 2, 0.0)]).is_err());
    }
}
