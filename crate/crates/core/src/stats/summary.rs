use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile of sorted data at position `1 + (n-1)p`
/// (the "type 7" convention). `sorted` must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with divisor n − 1.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Distribution summary of bootstrap values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub sd: f64,
    pub median: f64,
    pub q2_5: f64,
    pub q97_5: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Summary {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean: mean(values),
            sd: if values.len() > 1 { variance(values).sqrt() } else { 0.0 },
            median: quantile_sorted(&sorted, 0.5),
            q2_5: quantile_sorted(&sorted, 0.025),
            q97_5: quantile_sorted(&sorted, 0.975),
        }
    }
}
