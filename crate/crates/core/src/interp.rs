//! Shape-preserving piecewise cubic interpolation of nonnegative samples.

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slope limiting.
///
/// On intervals where both endpoint values are positive the cubic is built
/// for `ln y` (so exponential decay is reproduced exactly); elsewhere it is
/// built for `y` itself and clamped at zero.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    pieces: Vec<Piece>,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    log: bool,
    y0: f64,
    y1: f64,
    m0: f64,
    m1: f64,
}

fn limit(delta: f64, mut m0: f64, mut m1: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    if m0 * delta < 0.0 {
        m0 = 0.0;
    }
    if m1 * delta < 0.0 {
        m1 = 0.0;
    }
    let a = m0 / delta;
    let b = m1 / delta;
    let s = a * a + b * b;
    if s > 9.0 {
        let tau = 3.0 / s.sqrt();
        m0 = tau * a * delta;
        m1 = tau * b * delta;
    }
    (m0, m1)
}

/// Three-point slope estimates for samples without derivatives.
fn estimate_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
    (0..n)
        .map(|i| {
            if i == 0 {
                d[0]
            } else if i == n - 1 {
                d[n - 2]
            } else {
                let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                (d[i - 1] * h1 + d[i] * h0) / (h0 + h1)
            }
        })
        .collect()
}

impl MonotoneCubic {
    /// `dys` are exact derivatives at the nodes; when absent they are estimated.
    pub fn new(xs: &[f64], ys: &[f64], dys: Option<&[f64]>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || dys.is_some_and(|d| d.len() != n) {
            return Err(Error::InvalidArgument("interpolant needs >= 2 matching samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("interpolation nodes must increase strictly".into()));
        }
        if ys.iter().any(|y| !y.is_finite() || *y < 0.0) {
            return Err(Error::Numerical("interpolated samples must be finite and >= 0".into()));
        }
        let exact = dys.is_some();
        let slopes = match dys {
            Some(d) => d.to_vec(),
            None => estimate_slopes(xs, ys),
        };
        let pieces = (0..n - 1)
            .map(|i| {
                let h = xs[i + 1] - xs[i];
                let (y0, y1) = (ys[i], ys[i + 1]);
                if y0 > 0.0 && y1 > 0.0 {
                    let (l0, l1) = (y0.ln(), y1.ln());
                    let (m0, m1) = if exact {
                        (slopes[i] / y0, slopes[i + 1] / y1)
                    } else {
                        limit((l1 - l0) / h, slopes[i] / y0, slopes[i + 1] / y1)
                    };
                    Piece {
                        log: true,
                        y0: l0,
                        y1: l1,
                        m0,
                        m1,
                    }
                } else {
                    let (m0, m1) = limit((y1 - y0) / h, slopes[i], slopes[i + 1]);
                    Piece {
                        log: false,
                        y0,
                        y1,
                        m0,
                        m1,
                    }
                }
            })
            .collect();
        Ok(MonotoneCubic {
            xs: xs.to_vec(),
            pieces,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Value at `x`; arguments outside the domain are clamped to it.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p => (p - 1).min(self.pieces.len() - 1),
        };
        let p = &self.pieces[i];
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * p.y0
            + (s3 - 2.0 * s2 + s) * h * p.m0
            + (-2.0 * s3 + 3.0 * s2) * p.y1
            + (s3 - s2) * h * p.m1;
        if p.log {
            v.exp()
        } else {
            v.max(0.0)
        }
    }
}
