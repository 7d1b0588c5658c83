//! Key-rate maximization over the free protocol parameters (sending
//! probability, intensity cap, PE fraction) at a fixed channel point.
//!
//! A coarse grid scan is followed by bracket refinement around the
//! incumbent: each depth level shrinks every axis range by a fixed factor
//! and rescans. The objective has cliffs (zero-key statuses participate
//! with rate 0) and is cheap per evaluation, which is why no gradients are
//! used. Results are deterministic for a given [`SearchSpace`] regardless
//! of thread count: grid points are ranked by (rate, scan index).

use crate::channel::ChannelParams;
use crate::security::{evaluate_symmetric, KeyRateResult, ProtocolPoint, SecurityBudget};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("search axis `{name}` invalid: {reason}")]
    InvalidAxis { name: &'static str, reason: String },
    #[error("refinement shrink factor must exceed 1, got {0}")]
    InvalidShrink(f64),
}

/// Grid spacing of one search axis. Probability- and intensity-like
/// parameters span decades, so their grids default to log spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// One axis of the search grid. `lo == hi` collapses the axis to a point;
/// otherwise at least two grid points are required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: Scale,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            scale: Scale::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            scale: Scale::Log,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            points: 1,
            scale: Scale::Linear,
        }
    }

    fn validate(&self, name: &'static str, min: f64, max: f64) -> Result<(), OptimizerError> {
        let fail = |reason: String| Err(OptimizerError::InvalidAxis { name, reason });
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return fail(format!("bad range [{}, {}]", self.lo, self.hi));
        }
        if self.lo <= min || self.hi >= max {
            return fail(format!(
                "range [{}, {}] must lie strictly inside ({min}, {max})",
                self.lo, self.hi
            ));
        }
        if self.scale == Scale::Log && self.lo <= 0.0 {
            return fail("log-scaled axis needs a positive lower bound".to_string());
        }
        if self.lo < self.hi && self.points < 2 {
            return fail(format!("{} grid points over a nonempty range", self.points));
        }
        if self.points == 0 {
            return fail("zero grid points".to_string());
        }
        Ok(())
    }

    fn values(&self) -> Vec<f64> {
        if self.lo == self.hi || self.points == 1 {
            return vec![self.lo];
        }
        let n = (self.points - 1) as f64;
        match self.scale {
            Scale::Linear => {
                let step = (self.hi - self.lo) / n;
                (0..self.points)
                    .map(|i| self.lo + step * i as f64)
                    .collect()
            }
            Scale::Log => {
                let (llo, lhi) = (self.lo.ln(), self.hi.ln());
                let step = (lhi - llo) / n;
                (0..self.points)
                    .map(|i| (llo + step * i as f64).exp())
                    .collect()
            }
        }
    }

    /// Sub-range of the given width (linear or log width, per the axis
    /// scale) centered at `center`, clamped into the original range.
    fn refined_around(&self, center: f64, factor: f64) -> AxisRange {
        if self.lo == self.hi {
            return *self;
        }
        match self.scale {
            Scale::Linear => {
                let half = (self.hi - self.lo) / factor / 2.0;
                AxisRange {
                    lo: (center - half).max(self.lo),
                    hi: (center + half).min(self.hi),
                    ..*self
                }
            }
            Scale::Log => {
                let half = (self.hi.ln() - self.lo.ln()) / factor / 2.0;
                AxisRange {
                    lo: (center.ln() - half).exp().max(self.lo),
                    hi: (center.ln() + half).exp().min(self.hi),
                    ..*self
                }
            }
        }
    }
}

/// Grid ranges, resolutions and refinement schedule of one optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub p_send: AxisRange,
    pub mu_max: AxisRange,
    pub p_pe: AxisRange,
    pub depth: u32,
    pub shrink: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        self.p_send.validate("p_send", 0.0, 1.0)?;
        self.mu_max.validate("mu_max", 0.0, f64::INFINITY)?;
        self.p_pe.validate("p_pe", 0.0, 1.0)?;
        if !(self.shrink > 1.0 && self.shrink.is_finite()) {
            return Err(OptimizerError::InvalidShrink(self.shrink));
        }
        Ok(())
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            p_send: AxisRange::log(1e-3, 0.5, 16),
            mu_max: AxisRange::log(1e-5, 0.5, 16),
            p_pe: AxisRange::new(0.05, 0.95, 16),
            depth: 3,
            shrink: 4.0,
        }
    }
}

/// The argmax point together with its evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPoint {
    pub point: ProtocolPoint,
    pub result: KeyRateResult,
}

struct Incumbent {
    rate: f64,
    index: usize,
    point: ProtocolPoint,
    result: KeyRateResult,
}

#[allow(clippy::too_many_arguments)]
fn scan_grid(
    channel: &ChannelParams,
    n_total: f64,
    xi: u32,
    budget: &SecurityBudget,
    ec_efficiency: f64,
    p_send: &AxisRange,
    mu_max: &AxisRange,
    p_pe: &AxisRange,
) -> Result<Incumbent, crate::Error> {
    let mut grid = Vec::new();
    for &s in &p_send.values() {
        for &m in &mu_max.values() {
            for &f in &p_pe.values() {
                grid.push(ProtocolPoint {
                    p_send: s,
                    mu_max: m,
                    p_pe: f,
                });
            }
        }
    }

    let evaluate = |(index, point): (usize, &ProtocolPoint)| -> Result<Incumbent, crate::Error> {
        let result = evaluate_symmetric(channel, n_total, xi, budget, ec_efficiency, point)?;
        Ok(Incumbent {
            rate: result.rate,
            index,
            point: *point,
            result,
        })
    };
    // Higher rate wins; ties go to the earliest scan index so the outcome
    // does not depend on the thread count.
    let better = |a: Incumbent, b: Incumbent| {
        if (b.rate, a.index) > (a.rate, b.index) {
            b
        } else {
            a
        }
    };

    #[cfg(feature = "parallel")]
    {
        grid.par_iter()
            .enumerate()
            .map(evaluate)
            .try_reduce_with(|a, b| Ok(better(a, b)))
            .expect("grid is nonempty")
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut best: Option<Incumbent> = None;
        for item in grid.iter().enumerate() {
            let cand = evaluate(item)?;
            best = Some(match best {
                None => cand,
                Some(cur) => better(cur, cand),
            });
        }
        Ok(best.expect("grid is nonempty"))
    }
}

/// Maximizes the key rate over `space`. Zero-key points participate with
/// rate 0; the best evaluation (and the parameters achieving it) is
/// returned even if every point is zero-key.
pub fn optimize_point(
    channel: &ChannelParams,
    n_total: f64,
    xi: u32,
    budget: &SecurityBudget,
    ec_efficiency: f64,
    space: &SearchSpace,
) -> Result<OptimizedPoint, crate::Error> {
    space.validate()?;

    let mut best = scan_grid(
        channel,
        n_total,
        xi,
        budget,
        ec_efficiency,
        &space.p_send,
        &space.mu_max,
        &space.p_pe,
    )?;

    for level in 1..=space.depth {
        let factor = space.shrink.powi(level as i32);
        let p_send = space.p_send.refined_around(best.point.p_send, factor);
        let mu_max = space.mu_max.refined_around(best.point.mu_max, factor);
        let p_pe = space.p_pe.refined_around(best.point.p_pe, factor);
        let cand = scan_grid(
            channel, n_total, xi, budget, ec_efficiency, &p_send, &mu_max, &p_pe,
        )?;
        // Refinement may only improve the incumbent.
        if cand.rate > best.rate {
            best = cand;
        }
    }

    Ok(OptimizedPoint {
        point: best.point,
        result: best.result,
    })
}
