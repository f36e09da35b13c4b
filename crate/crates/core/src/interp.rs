//! Piecewise interpolation of tabulated data.
//!
//! The cubic option is the Fritsch–Carlson monotone Hermite scheme (PCHIP):
//! it is C¹, never overshoots the data, and preserves monotone runs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    MonotoneCubic,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("table needs at least two knots, got {0}")]
    TooShort(usize),
    #[error("knots must be strictly increasing (violation at index {0})")]
    NonMonotone(usize),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
    kind: Interpolation,
}

impl Interpolant {
    pub fn new(points: &[(f64, f64)], kind: Interpolation) -> Result<Self, TableError> {
        if points.len() < 2 {
            return Err(TableError::TooShort(points.len()));
        }
        for (i, (a, b)) in points.iter().enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(TableError::NonFinite(i));
            }
        }
        for i in 1..points.len() {
            if points[i].0 <= points[i - 1].0 {
                return Err(TableError::NonMonotone(i));
            }
        }
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let slopes = match kind {
            Interpolation::Linear => Vec::new(),
            Interpolation::MonotoneCubic => pchip_slopes(&x, &y),
        };
        Ok(Interpolant { x, y, slopes, kind })
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= self.x.len() => self.x.len() - 2,
            i => i - 1,
        }
    }

    /// Evaluates with clamping: outside the knot range the end value is held.
    pub fn eval_clamped(&self, t: f64) -> f64 {
        if t <= self.x_min() {
            return self.y[0];
        }
        if t >= self.x_max() {
            return *self.y.last().unwrap();
        }
        self.eval_inside(t)
    }

    fn eval_inside(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;
        match self.kind {
            Interpolation::Linear => y0 + s * (y1 - y0),
            Interpolation::MonotoneCubic => {
                let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
            }
        }
    }

    /// Taylor coefficients `[f, f', f''/2, f'''/6]` of the first segment,
    /// expanded about the first knot.
    pub fn leading_taylor(&self) -> [f64; 4] {
        let h = self.x[1] - self.x[0];
        let (y0, y1) = (self.y[0], self.y[1]);
        match self.kind {
            Interpolation::Linear => [y0, (y1 - y0) / h, 0.0, 0.0],
            Interpolation::MonotoneCubic => {
                let (d0, d1) = (self.slopes[0], self.slopes[1]);
                let delta = (y1 - y0) / h;
                let c2 = (3.0 * delta - 2.0 * d0 - d1) / h;
                let c3 = (d0 + d1 - 2.0 * delta) / (h * h);
                [y0, d0, c2, c3]
            }
        }
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        for kind in [Interpolation::Linear, Interpolation::MonotoneCubic] {
            let f = Interpolant::new(&pts, kind).unwrap();
            for &(x, y) in &pts {
                assert!((f.eval_clamped(x) - y).abs() < 1e-14);
            }
            assert!((f.eval_clamped(2.5) - 6.0).abs() < 1e-14);
            assert_eq!(f.eval_clamped(10.0), 11.0);
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let pts = [(0.0, 0.0), (1.0, 0.1), (2.0, 5.0), (3.0, 5.1), (4.0, 9.0)];
        let f = Interpolant::new(&pts, Interpolation::MonotoneCubic).unwrap();
        let mut prev = f.eval_clamped(0.0);
        for i in 1..=400 {
            let v = f.eval_clamped(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(
            Interpolant::new(&[(0.0, 1.0)], Interpolation::Linear),
            Err(TableError::TooShort(1))
        );
        assert_eq!(
            Interpolant::new(&[(0.0, 1.0), (0.0, 2.0)], Interpolation::Linear),
            Err(TableError::NonMonotone(1))
        );
    }

    #[test]
    fn leading_taylor_matches_first_segment() {
        let pts = [(0.0, 1.0), (0.5, 1.2), (1.0, 2.0), (2.0, 2.5)];
        let f = Interpolant::new(&pts, Interpolation::MonotoneCubic).unwrap();
        let c = f.leading_taylor();
        let t = 0.3;
        let series = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        assert!((series - f.eval_clamped(t)).abs() < 1e-13);
    }
}
