//! Stress versus mean-square extension loops of start-up extension.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopMetrics {
    /// Enclosed area, positive when the loading branch lies above the
    /// relaxation branch (clockwise traversal).
    pub area: f64,
    /// Largest vertical gap between the loading and relaxation branches.
    pub width: f64,
    /// Index of the largest extension.
    pub peak: usize,
    /// First index after the peak within 5% of the starting extension.
    pub closing: usize,
}

/// Signed shoelace area of the closed polygon, counterclockwise positive.
pub fn shoelace(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for k in 0..n {
        let l = (k + 1) % n;
        s += x[k] * y[l] - x[l] * y[k];
    }
    0.5 * s
}

/// Value of a polyline at abscissa `x`, taken on the first segment that
/// spans it.
fn branch_value(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    for k in 0..xs.len().saturating_sub(1) {
        let (a, b) = (xs[k], xs[k + 1]);
        if (a <= x && x <= b) || (b <= x && x <= a) {
            if a == b {
                return Some(ys[k]);
            }
            let w = (x - a) / (b - a);
            return Some((1.0 - w) * ys[k] + w * ys[k + 1]);
        }
    }
    None
}

/// Loop of the trajectory `(x, y)` truncated where it first returns within
/// 5% of its starting extension after the extension peak.
pub fn hysteresis_loop(x: &[f64], y: &[f64]) -> Result<LoopMetrics> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::DegenerateLoop("fewer than three points".into()));
    }
    let peak = (0..x.len()).fold(0, |m, k| if x[k] > x[m] { k } else { m });
    let start = x[0];
    let tol = 0.05 * start.abs();
    let closing = (peak + 1..x.len())
        .find(|&k| x[k] <= start + tol)
        .ok_or_else(|| Error::DegenerateLoop("the extension never returns to its starting value".into()))?;
    let (xs, ys) = (&x[..=closing], &y[..=closing]);
    let area = -shoelace(xs, ys);

    let (lx, ly) = (&x[..=peak], &y[..=peak]);
    let (rx, ry) = (&x[peak..=closing], &y[peak..=closing]);
    let lo = lx.iter().chain(rx).cloned().fold(f64::INFINITY, f64::min).max(start.min(x[closing]));
    let hi = x[peak];
    let mut width = 0.0f64;
    const SAMPLES: usize = 400;
    for s in 0..=SAMPLES {
        let xv = lo + (hi - lo) * s as f64 / SAMPLES as f64;
        if let (Some(a), Some(b)) = (branch_value(lx, ly, xv), branch_value(rx, ry, xv)) {
            width = width.max((a - b).abs());
        }
    }
    Ok(LoopMetrics {
        area,
        width,
        peak,
        closing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retraced_path_has_zero_area() {
        let x = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0];
        let y = [0.0, 1.0, 4.0, 9.0, 4.0, 1.0, 0.0];
        let m = hysteresis_loop(&x, &y).unwrap();
        assert_eq!(m.area, 0.0);
        assert_eq!(m.width, 0.0);
        assert_eq!((m.peak, m.closing), (3, 6));
    }

    #[test]
    fn parallelogram_area_is_exact() {
        // clockwise: up the left edge, right along the top, down, back
        let x = [1.0, 2.0, 4.0, 3.0, 1.0];
        let y = [0.0, 2.0, 2.0, 0.0, 0.0];
        let m = hysteresis_loop(&x, &y).unwrap();
        assert_eq!(m.area, 4.0);
        assert!((m.width - 2.0).abs() < 1e-12);
        assert_eq!(shoelace(&[0.0, 2.0, 3.0, 1.0], &[0.0, 0.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn open_trajectory_is_degenerate() {
        let x = [1.0, 2.0, 3.0, 2.5];
        let y = [0.0, 1.0, 2.0, 1.0];
        assert!(matches!(hysteresis_loop(&x, &y), Err(Error::DegenerateLoop(_))));
    }
}
