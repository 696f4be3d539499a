//! Overall operation cost as a maximum of affine functions of `(y_hat, y)`.
//!
//! On the product of DA partition `o` and RT partition `n` the DA and RT
//! duals are constant, so the cost there equals
//!
//! ```text
//! (lambda_o - gamma_n) * y_hat + gamma_n * y
//!     - nu_o . da_caps - mu_n . down_caps - eta_n . up_caps
//! ```
//!
//! Every such segment is a lower bound on the cost everywhere in the
//! feasible box, so the cost is their pointwise maximum.

use std::io::Write;

use thiserror::Error;

use crate::dispatch::{Partition, ResourceFleet, Stage};
use crate::TOL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("point (y_hat = {y_hat}, y = {y}) is outside the feasible box")]
    OutOfBox { y_hat: f64, y: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

/// RT partition label. Deficit partitions order before surplus ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RtIndex {
    Deficit(usize),
    Surplus(usize),
}

impl std::fmt::Display for RtIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RtIndex::Deficit(i) => write!(f, "deficit-{i}"),
            RtIndex::Surplus(j) => write!(f, "surplus-{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentId {
    pub da: usize,
    pub rt: RtIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineSegment {
    pub coef_yhat: f64,
    pub coef_y: f64,
    pub intercept: f64,
    pub da_index: usize,
    pub rt_index: RtIndex,
}

impl AffineSegment {
    pub fn eval(&self, y_hat: f64, y: f64) -> f64 {
        self.coef_yhat * y_hat + self.coef_y * y + self.intercept
    }

    pub fn id(&self) -> SegmentId {
        SegmentId { da: self.da_index, rt: self.rt_index }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSurface {
    pub segments: Vec<AffineSegment>,
    pub fleet_digest: String,
    pub y_hat_range: (f64, f64),
    pub deviation_range: (f64, f64),
    n_up: usize,
}

impl CostSurface {
    /// One segment per (DA partition, RT partition) pair, in DA-major order.
    pub fn build(fleet: &ResourceFleet) -> Self {
        let (da, rt) = fleet.enumerate_partitions();
        let n_up = fleet.up_costs().len();
        let mut segments = Vec::with_capacity(da.len() * rt.len());
        for o in &da {
            let da_term = dot(&o.cap_duals, fleet.da_caps());
            for n in &rt {
                let (eta, mu) = n.cap_duals.split_at(n_up);
                let intercept = -da_term - dot(mu, fleet.down_caps()) - dot(eta, fleet.up_caps());
                segments.push(AffineSegment {
                    coef_yhat: o.price - n.price,
                    coef_y: n.price,
                    intercept,
                    da_index: o.index,
                    rt_index: rt_label(n),
                });
            }
        }
        Self {
            segments,
            fleet_digest: fleet.digest(),
            y_hat_range: (0.0, fleet.total_da()),
            deviation_range: (-fleet.total_down(), fleet.total_up()),
            n_up,
        }
    }

    pub fn in_box(&self, y_hat: f64, y: f64) -> bool {
        let d = y - y_hat;
        y_hat >= self.y_hat_range.0 - TOL
            && y_hat <= self.y_hat_range.1 + TOL
            && d >= self.deviation_range.0 - TOL
            && d <= self.deviation_range.1 + TOL
    }

    /// Feasible forecasts for realization `y`.
    pub fn forecast_bounds(&self, y: f64) -> Option<(f64, f64)> {
        let lo = self.y_hat_range.0.max(y - self.deviation_range.1);
        let hi = self.y_hat_range.1.min(y - self.deviation_range.0);
        (lo <= hi + TOL).then_some((lo, hi.max(lo)))
    }

    /// Project a forecast onto the feasible range for `y`; the flag reports
    /// whether it moved. Returns `None` if `y` admits no feasible forecast.
    pub fn clamp_forecast(&self, y_hat: f64, y: f64) -> Option<(f64, bool)> {
        let (lo, hi) = self.forecast_bounds(y)?;
        if y_hat < lo - TOL || y_hat > hi + TOL {
            Some((y_hat.clamp(lo, hi), true))
        } else {
            Some((y_hat, false))
        }
    }

    /// Max over segments without the box check.
    pub fn eval_unchecked(&self, y_hat: f64, y: f64) -> f64 {
        self.segments.iter().map(|s| s.eval(y_hat, y)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, y_hat: f64, y: f64) -> Result<f64, SurfaceError> {
        if !self.in_box(y_hat, y) {
            return Err(SurfaceError::OutOfBox { y_hat, y });
        }
        Ok(self.eval_unchecked(y_hat, y))
    }

    /// A maximizing segment; among maximizers within `TOL`, the
    /// lexicographically lowest `(da, rt)`.
    pub fn active_segment(&self, y_hat: f64, y: f64) -> Result<SegmentId, SurfaceError> {
        let best = self.eval(y_hat, y)?;
        Ok(self.active_unchecked(y_hat, y, best))
    }

    pub(crate) fn active_unchecked(&self, y_hat: f64, y: f64, best: f64) -> SegmentId {
        self.segments
            .iter()
            .filter(|s| s.eval(y_hat, y) >= best - TOL)
            .map(AffineSegment::id)
            .min()
            .expect("surface has segments")
    }

    /// Largest `|coef_yhat|` over segments ($/kW).
    pub fn max_yhat_slope(&self) -> f64 {
        self.segments.iter().fold(0.0, |a, s| a.max(s.coef_yhat.abs()))
    }

    /// Numeric RT label used in exported tables: deficit `i` is `i`, surplus
    /// `j` is the number of up resources plus `j`.
    pub fn rt_number(&self, rt: RtIndex) -> usize {
        match rt {
            RtIndex::Deficit(i) => i,
            RtIndex::Surplus(j) => self.n_up + j,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SurfaceError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SurfaceError::Io(e.to_string());
        w.write_record(["da_index", "rt_index", "coef_yhat", "coef_y", "intercept"]).map_err(io)?;
        for s in &self.segments {
            w.write_record([
                s.da_index.to_string(),
                self.rt_number(s.rt_index).to_string(),
                s.coef_yhat.to_string(),
                s.coef_y.to_string(),
                s.intercept.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| SurfaceError::Io(e.to_string()))
    }

    /// `points` evenly spaced `(y_hat, cost)` samples across the feasible
    /// forecast range for a fixed realization `y`.
    pub fn plot_samples(&self, y: f64, points: usize) -> Result<Vec<(f64, f64)>, SurfaceError> {
        let (lo, hi) = self.forecast_bounds(y).ok_or(SurfaceError::OutOfBox { y_hat: f64::NAN, y })?;
        let n = points.max(2);
        Ok((0..n)
            .map(|k| {
                let yh = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                (yh, self.eval_unchecked(yh, y))
            })
            .collect())
    }
}

fn rt_label(p: &Partition) -> RtIndex {
    match p.stage {
        Stage::RtDeficit => RtIndex::Deficit(p.index),
        Stage::RtSurplus => RtIndex::Surplus(p.index),
        Stage::Da => unreachable!("RT partition expected"),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
