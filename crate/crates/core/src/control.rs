//! Control-function construction from a fitted hours distribution regression.
//!
//! The control function is the conditional rank of hours given covariates.
//! With a discrete estimated CDF the rank is set-identified within an
//! interval: for a worker with hours h it lies in (F(h-), F(h)], and for a
//! nonworker in (0, F(0)]. The default mode draws the rank uniformly from
//! that interval (one independent draw per row, seeded deterministically);
//! point mode assigns the upper endpoint to workers instead.

use crate::dr::DrFit;
use crate::error::{Error, Result};
use crate::model::YearSample;
use crate::rng;

/// How worker ranks are resolved inside their identification interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfMode {
    /// Uniform draw in (F(h-), F(h)] per worker (default).
    Interval,
    /// Deterministic upper endpoint F(h) per worker.
    Point,
}

impl std::str::FromStr for CfMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "interval" => Ok(CfMode::Interval),
            "point" => Ok(CfMode::Point),
            other => Err(format!(
                "unknown control-function mode `{other}` (expected `interval` or `point`)"
            )),
        }
    }
}

/// Per-row control-function values for one year sample.
#[derive(Debug, Clone)]
pub struct ControlFunctionSet {
    pub mode: CfMode,
    /// Resolved rank per row (the draw, or the upper endpoint in point mode).
    pub v: Vec<f64>,
    /// Interval lower endpoint per row (F(h-) for workers, 0 for nonworkers).
    pub lower: Vec<f64>,
    /// Interval upper endpoint per row (F(h) for workers, F(0) for nonworkers).
    pub upper: Vec<f64>,
    /// Predicted nonparticipation probability F(0) per row.
    pub participation_threshold: Vec<f64>,
}

/// Builds control functions for every row of `sample` from its fitted,
/// rearranged hours distribution regression. Draws are seeded per row from
/// `(seed, year, row)`, so results do not depend on evaluation order.
pub fn control_functions(
    fit: &DrFit,
    sample: &YearSample,
    mode: CfMode,
    seed: u64,
) -> Result<ControlFunctionSet> {
    if !fit.rearranged {
        return Err(Error::Invalid(
            "control functions require a rearranged hours fit".into(),
        ));
    }
    if fit.thresholds.first() != Some(&0.0) {
        return Err(Error::Invalid(
            "hours threshold grid must start at 0".into(),
        ));
    }
    let n = sample.n();
    let year_tag = sample.year as i64 as u64;
    let mut v = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut thr_out = Vec::with_capacity(n);
    let mut curve = Vec::new();
    for i in 0..n {
        fit.predict_curve_into(sample.basis_p.row(i), &mut curve);
        let thr = curve[0];
        let h = sample.obs[i].hours;
        let (lo, hi) = if h > 0.0 {
            let upper_idx = fit.cell_of(h).expect("grid starts at 0");
            let lower_idx = fit.thresholds.partition_point(|t| *t < h) - 1;
            (curve[lower_idx], curve[upper_idx])
        } else {
            (0.0, thr)
        };
        if hi < lo {
            return Err(Error::IntervalInverted { row: i });
        }
        let draw = if h > 0.0 && mode == CfMode::Point {
            hi
        } else {
            let mut r = rng::stream(seed, &[year_tag, i as u64]);
            let u = rng::uniform_open(&mut r);
            hi - u * (hi - lo)
        };
        v.push(draw);
        lower.push(lo);
        upper.push(hi);
        thr_out.push(thr);
    }
    Ok(ControlFunctionSet {
        mode,
        v,
        lower,
        upper,
        participation_threshold: thr_out,
    })
}
