//! Shape-preserving piecewise-cubic interpolation (PCHIP).
//!
//! Monotone data stays monotone through the interpolant, so a tabulated
//! phase-mismatch curve cannot pick up spurious zero crossings from
//! overshoot. Linear data is reproduced exactly.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Endpoint-limited Fritsch-Butland derivatives at the knots.
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain("interpolation arrays differ in length"));
        }
        let n = x.len();
        if n < 2 {
            return Err(Error::domain("interpolation needs at least 2 points"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("interpolation abscissae must be strictly increasing"));
        }

        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = h
            .iter()
            .zip(y.windows(2))
            .map(|(hk, w)| (w[1] - w[0]) / hk)
            .collect();

        let mut slope = vec![0.0; n];
        if n == 2 {
            slope[0] = d[0];
            slope[1] = d[0];
        } else {
            for k in 1..n - 1 {
                // weighted harmonic mean of the neighbouring secants; zero at
                // local extrema so monotonicity is preserved
                if d[k - 1] * d[k] <= 0.0 {
                    slope[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slope[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
                }
            }
            slope[0] = edge_slope(h[0], h[1], d[0], d[1]);
            slope[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }

        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slope,
        })
    }

    pub fn min_x(&self) -> f64 {
        self.x[0]
    }

    pub fn max_x(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Hermite evaluation; `t` must already be inside the data range.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    /// Analytic derivative of [`eval`](Self::eval) with respect to `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[i] + dh10 * self.slope[i] + dh01 * self.y[i + 1] + dh11 * self.slope[i + 1]
    }
}

/// Three-point one-sided estimate for an endpoint derivative, limited so the
/// boundary segment cannot overshoot (scipy's pchip endpoint rule).
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
