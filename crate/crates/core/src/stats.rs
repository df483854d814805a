//! Small summary statistics used by the experiment drivers.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean; 0 for fewer than two samples.
    pub stderr: f64,
}

pub fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let count = xs.len();
    if count == 0 {
        return MeanStderr { count, mean: f64::NAN, stderr: 0.0 };
    }
    let mean = xs.iter().sum::<f64>() / count as f64;
    let stderr = if count < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    };
    MeanStderr { count, mean, stderr }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub const Z95: f64 = 1.959_963_984_540_054;

/// Weighted least-squares non-increasing fit (pool adjacent violators).
pub fn decreasing_isotonic_fit(ys: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(ys.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (&y, &w) in ys.iter().zip(weights) {
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, l1 + l2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, l)| std::iter::repeat_n(m, l))
        .collect()
}
