//! Small numeric helpers shared by the analysis and Monte Carlo modules.
//!
//! All spreads use the population convention (divide by N). Inputs are
//! sorted before reduction so results do not depend on input order.

/// Sorted copy; total order so NaN cannot poison comparisons silently.
fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let v = sorted(values);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Population standard deviation (divide by N, not N-1).
pub fn population_std(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let m = mean(values)?;
    let v = sorted(values);
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Some((ss / v.len() as f64).sqrt())
}

/// Sample standard deviation (divide by N-1). Kept only so callers can
/// demonstrate which convention a quoted number used.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let v = sorted(values);
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Some((ss / (v.len() - 1) as f64).sqrt())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let v = sorted(values);
    let n = v.len();
    if n % 2 == 1 {
        Some(v[n / 2])
    } else {
        Some(0.5 * (v[n / 2 - 1] + v[n / 2]))
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad(values: &[f64]) -> Option<f64> {
    let med = median(values)?;
    let dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
    median(&dev)
}
