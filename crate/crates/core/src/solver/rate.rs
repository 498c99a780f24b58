//! Least-squares fit of `log(total error)` against `k`.

use serde::{Deserialize, Serialize};

use super::IterateTrace;

pub const DEFAULT_WINDOW_UPPER: f64 = 1e-1;
pub const DEFAULT_WINDOW_LOWER: f64 = 1e-8;
const MIN_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub k_start: usize,
    pub k_end: usize,
}

impl RateFit {
    /// Per-iteration contraction `exp(slope)`.
    pub fn ratio(&self) -> f64 {
        self.slope.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RateFitOutcome {
    Fit(RateFit),
    InsufficientData { points: usize },
}

impl RateFitOutcome {
    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            RateFitOutcome::Fit(f) => Some(f),
            RateFitOutcome::InsufficientData { .. } => None,
        }
    }
}

impl std::fmt::Display for RateFitOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateFitOutcome::Fit(r) => write!(
                f,
                "slope {:.6e} per iteration (ratio {:.6}), R^2 {:.6}, {} points on k in [{}, {}]",
                r.slope,
                r.ratio(),
                r.r_squared,
                r.points,
                r.k_start,
                r.k_end
            ),
            RateFitOutcome::InsufficientData { points } => {
                write!(f, "insufficient data ({points} usable points)")
            }
        }
    }
}

/// Fits rows from the first one whose total error is below `upper` through
/// the first one below `lower` (or the last row). Rows with a nonpositive
/// total are skipped.
pub fn fit_linear_rate(trace: &IterateTrace, upper: f64, lower: f64) -> RateFitOutcome {
    let rows: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .map(|r| (r.k as f64, r.total_error()))
        .filter(|&(_, e)| e > 0.0 && e.is_finite())
        .collect();
    let Some(start) = rows.iter().position(|&(_, e)| e < upper) else {
        return RateFitOutcome::InsufficientData { points: 0 };
    };
    let end = rows[start..]
        .iter()
        .position(|&(_, e)| e < lower)
        .map_or(rows.len() - 1, |i| start + i);
    let window = &rows[start..=end];
    if window.len() < MIN_POINTS {
        return RateFitOutcome::InsufficientData {
            points: window.len(),
        };
    }
    let m = window.len() as f64;
    let mean_k = window.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = window.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(k, e) in window {
        let dk = k - mean_k;
        let dy = e.ln() - mean_y;
        sxy += dk * dy;
        sxx += dk * dk;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_k;
    let ss_res: f64 = window
        .iter()
        .map(|&(k, e)| (e.ln() - intercept - slope * k).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    RateFitOutcome::Fit(RateFit {
        slope,
        intercept,
        r_squared,
        points: window.len(),
        k_start: window[0].0 as usize,
        k_end: window[window.len() - 1].0 as usize,
    })
}
