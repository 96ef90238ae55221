//! Weighted bootstrap for the decomposition terms.
//!
//! Each replication multiplies every observation's weight by an independent
//! mean-one exponential draw (per-year, per-replication streams, so results
//! do not depend on scheduling), refits every stage from scratch on the
//! reweighted samples — including the trimming cap and control functions —
//! and recomputes the decomposition on the same earnings grid as the point
//! estimate. Percentile intervals use left-inverse order statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{self, FitSettings, YearModel};
use crate::decomposition::{self, DecompRecord, Functional, TermSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{Observation, YearSample};
use crate::rng;

pub const DEFAULT_REPS: usize = 500;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Replications may fail (e.g. reweighting degenerates a cell); more than
/// this fraction of failures triggers a warning.
pub const MAX_DROP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub reps: usize,
    pub level: f64,
    /// Seed for the replication weight draws (independent of the estimation
    /// seed used for control-function draws).
    pub seed: u64,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        BootstrapPlan {
            reps: DEFAULT_REPS,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

/// Point estimate plus percentile interval for every term of one functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub functional: Functional,
    pub point: DecompRecord,
    pub absolute_lower: TermSet,
    pub absolute_upper: TermSet,
    /// Present when every completed replication had a nonzero base value.
    pub relative_lower: Option<TermSet>,
    pub relative_upper: Option<TermSet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub base_year: i32,
    pub comparison_year: i32,
    pub level: f64,
    pub requested: usize,
    pub completed: usize,
    pub dropped: usize,
    pub records: Vec<BootstrapRecord>,
    pub warnings: Vec<String>,
    /// Largest absolute telescoping defect |participation + hours +
    /// composition + wage_structure - total| observed across the point
    /// estimate and every completed replication and functional.
    pub max_telescope_residual: f64,
}

/// Left-inverse empirical quantile of sorted replication values: the
/// smallest value whose empirical CDF reaches `tau`. With two replications
/// the 2.5th and 97.5th percentiles are the minimum and maximum.
fn percentile(sorted: &[f64], tau: f64) -> f64 {
    let b = sorted.len();
    let k = (tau * b as f64).ceil() as usize;
    sorted[k.clamp(1, b) - 1]
}

fn drop_warning(requested: usize, dropped: usize) -> Option<String> {
    if dropped as f64 > MAX_DROP_FRACTION * requested as f64 {
        Some(format!(
            "{dropped} of {requested} bootstrap replications failed and were dropped; \
             intervals may be unreliable"
        ))
    } else {
        None
    }
}

fn reweight(obs: &[Observation], year: i32, rep: u64, seed: u64) -> Vec<Observation> {
    let mut r = rng::stream(seed, &[rep, year as i64 as u64]);
    obs.iter()
        .map(|o| {
            let mut o = o.clone();
            o.weight *= rng::exponential(&mut r);
            o
        })
        .collect()
}

fn fit_models(
    years_obs: &BTreeMap<i32, Vec<Observation>>,
    settings: &FitSettings,
) -> Result<BTreeMap<i32, YearModel>> {
    let mut models = BTreeMap::new();
    for (&year, obs) in years_obs {
        let sample = YearSample::new(year, obs.clone(), &settings.basis, settings.trim_quantile)?;
        models.insert(year, counterfactual::fit_year(sample, settings)?);
    }
    Ok(models)
}

/// Runs the full weighted bootstrap for a two-year decomposition.
///
/// The earnings grid stays fixed at the one supplied (normally built from
/// the point-estimate samples); every replication refits all stages on
/// reweighted data with a replication-specific control-function seed.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_decomposition(
    years_obs: &BTreeMap<i32, Vec<Observation>>,
    settings: &FitSettings,
    base: i32,
    comparison: i32,
    functionals: &[Functional],
    y_grid: &[f64],
    allow_zero: bool,
    plan: &BootstrapPlan,
) -> Result<BootstrapResult> {
    if !(0.0 < plan.level && plan.level < 1.0) {
        return Err(Error::Invalid(format!(
            "confidence level {} outside (0, 1)",
            plan.level
        )));
    }
    if plan.reps < 2 {
        return Err(Error::Invalid("bootstrap needs at least 2 replications".into()));
    }
    let point_models = fit_models(years_obs, settings)?;
    let point =
        decomposition::decompose_series(&point_models, base, comparison, functionals, y_grid, allow_zero)?;
    drop(point_models);

    let reps: Vec<Option<Vec<DecompRecord>>> = exec::map_collect(plan.reps, |b| {
        let mut rep_obs = BTreeMap::new();
        for (&year, obs) in years_obs {
            rep_obs.insert(year, reweight(obs, year, b as u64, plan.seed));
        }
        let mut rep_settings = settings.clone();
        rep_settings.seed = rng::mix(settings.seed, &[b as u64]);
        let models = match fit_models(&rep_obs, &rep_settings) {
            Ok(m) => m,
            Err(_) => return None,
        };
        decomposition::decompose_series(&models, base, comparison, functionals, y_grid, allow_zero)
            .ok()
    });
    let completed: Vec<Vec<DecompRecord>> = reps.into_iter().flatten().collect();
    let dropped = plan.reps - completed.len();
    if completed.len() < 2 {
        return Err(Error::TooFewObservations {
            context: "completed bootstrap replications".into(),
            needed: 2,
            got: completed.len(),
        });
    }

    let telescope = |recs: &[DecompRecord]| -> f64 {
        recs.iter()
            .map(|r| {
                let t = &r.absolute;
                (t.participation + t.hours + t.composition + t.wage_structure - t.total).abs()
            })
            .fold(0.0, f64::max)
    };
    let max_telescope_residual = completed
        .iter()
        .map(|r| telescope(r))
        .fold(telescope(&point), f64::max);

    let alpha = 1.0 - plan.level;
    let (tau_lo, tau_hi) = (alpha / 2.0, 1.0 - alpha / 2.0);
    let mut records = Vec::with_capacity(functionals.len());
    for (fi, f) in functionals.iter().enumerate() {
        let mut abs_cols: [Vec<f64>; 5] = Default::default();
        let mut rel_cols: [Vec<f64>; 5] = Default::default();
        let mut rel_complete = true;
        for rep in &completed {
            let rec = &rep[fi];
            for (c, v) in rec.absolute.as_array().into_iter().enumerate() {
                abs_cols[c].push(v);
            }
            match &rec.relative {
                Some(rel) => {
                    for (c, v) in rel.as_array().into_iter().enumerate() {
                        rel_cols[c].push(v);
                    }
                }
                None => rel_complete = false,
            }
        }
        let bounds = |cols: &mut [Vec<f64>; 5], tau: f64| -> TermSet {
            let mut out = [0.0; 5];
            for (c, col) in cols.iter_mut().enumerate() {
                col.sort_unstable_by(f64::total_cmp);
                out[c] = percentile(col, tau);
            }
            TermSet::from_array(out)
        };
        let absolute_lower = bounds(&mut abs_cols, tau_lo);
        let absolute_upper = bounds(&mut abs_cols, tau_hi);
        let (relative_lower, relative_upper) = if rel_complete {
            (
                Some(bounds(&mut rel_cols, tau_lo)),
                Some(bounds(&mut rel_cols, tau_hi)),
            )
        } else {
            (None, None)
        };
        records.push(BootstrapRecord {
            functional: *f,
            point: point[fi].clone(),
            absolute_lower,
            absolute_upper,
            relative_lower,
            relative_upper,
        });
    }
    let mut warnings = Vec::new();
    if let Some(w) = drop_warning(plan.reps, dropped) {
        warnings.push(w);
    }
    Ok(BootstrapResult {
        base_year: base,
        comparison_year: comparison,
        level: plan.level,
        requested: plan.reps,
        completed: completed.len(),
        dropped,
        records,
        warnings,
        max_telescope_residual,
    })
}
