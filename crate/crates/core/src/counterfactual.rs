//! Counterfactual earnings distributions composed from per-year fits.
//!
//! A component tuple (q, r, s, p) names the year supplying each channel:
//! q the participation margin, r the hours structure, s the population
//! composition, and p the wage structure. The counterfactual CDF at y
//! averages, over year-s rows, the probability that participation-adjusted
//! earnings fall at or below y: rows whose rank sits at or below year q's
//! participation threshold (or whose year-r counterfactual hours are zero)
//! contribute probability one for every y >= 0, and the rest contribute the
//! year-p conditional wage CDF evaluated at y divided by their year-r
//! conditional hours quantile.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::control::{self, CfMode, ControlFunctionSet};
use crate::dr::{self, DrFit, HoursSupport};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::YearSample;
use crate::stats;
use crate::structural::{self, LasfFit, LdsfFit};

/// Default earnings-grid size (weighted quantile levels of positive
/// earnings, pooled across years; the point 0 is always prepended).
pub const DEFAULT_Y_POINTS: usize = 500;

/// Estimation settings shared by every year.
#[derive(Debug, Clone)]
pub struct FitSettings {
    pub basis: BasisSpec,
    pub trim_quantile: f64,
    pub hours_points: usize,
    pub wage_points: usize,
    pub cf_mode: CfMode,
    pub seed: u64,
}

impl FitSettings {
    pub fn new(basis: BasisSpec, seed: u64) -> FitSettings {
        FitSettings {
            basis,
            trim_quantile: crate::model::DEFAULT_TRIM_QUANTILE,
            hours_points: dr::DEFAULT_MAX_THRESHOLDS,
            wage_points: structural::DEFAULT_WAGE_POINTS,
            cf_mode: CfMode::Interval,
            seed,
        }
    }
}

/// Everything fitted for one year: the sample, the hours distribution
/// regression with its quantile support, control functions, and the two
/// wage-stage fits.
#[derive(Debug, Clone)]
pub struct YearModel {
    pub year: i32,
    pub sample: YearSample,
    pub hours_fit: DrFit,
    pub hours_support: HoursSupport,
    pub cf: ControlFunctionSet,
    pub ldsf: LdsfFit,
    pub lasf: LasfFit,
}

/// Fits all stages for one year sample.
pub fn fit_year(sample: YearSample, settings: &FitSettings) -> Result<YearModel> {
    if sample.basis_p.cols() != settings.basis.p_len() {
        return Err(Error::BasisMismatch);
    }
    let values: Vec<f64> = sample.obs.iter().map(|o| o.hours).collect();
    let weights = sample.weights();
    let grid = dr::hours_grid(&values, &weights, settings.hours_points);
    let context = format!("hours fit, year {}", sample.year);
    let hours_fit = dr::fit_dr(
        &sample.basis_p,
        &values,
        &weights,
        &grid,
        &settings.basis.p_names(),
        &context,
    )?
    .into_rearranged();
    let hours_support = HoursSupport::new(&hours_fit, &values);
    let cf = control::control_functions(&hours_fit, &sample, settings.cf_mode, settings.seed)?;
    let ldsf = structural::fit_ldsf(&sample, &cf, &settings.basis.m_terms, settings.wage_points)?;
    let lasf = structural::fit_lasf(&sample, &cf, &settings.basis.m_terms)?;
    Ok(YearModel {
        year: sample.year,
        sample,
        hours_fit,
        hours_support,
        cf,
        ldsf,
        lasf,
    })
}

/// Rebuilds a year model around previously fitted stages (e.g. reloaded from
/// a cache): recomputes the hours quantile support and redraws the seeded
/// control functions, which are deterministic given the fit and settings.
pub fn assemble_year(
    sample: YearSample,
    settings: &FitSettings,
    hours_fit: DrFit,
    ldsf: LdsfFit,
    lasf: LasfFit,
) -> Result<YearModel> {
    if sample.basis_p.cols() != settings.basis.p_len()
        || hours_fit.d() != sample.basis_p.cols()
        || ldsf.m_terms != settings.basis.m_terms
        || lasf.m_terms != settings.basis.m_terms
    {
        return Err(Error::BasisMismatch);
    }
    let values: Vec<f64> = sample.obs.iter().map(|o| o.hours).collect();
    let hours_support = HoursSupport::new(&hours_fit, &values);
    let cf = control::control_functions(&hours_fit, &sample, settings.cf_mode, settings.seed)?;
    Ok(YearModel {
        year: sample.year,
        sample,
        hours_fit,
        hours_support,
        cf,
        ldsf,
        lasf,
    })
}

/// Component years (participation, hours, composition, wage structure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigTuple {
    pub q: i32,
    pub r: i32,
    pub s: i32,
    pub p: i32,
}

impl ConfigTuple {
    pub fn same(year: i32) -> ConfigTuple {
        ConfigTuple { q: year, r: year, s: year, p: year }
    }

    pub fn slug(&self) -> String {
        format!("q{}_r{}_s{}_p{}", self.q, self.r, self.s, self.p)
    }
}

impl std::fmt::Display for ConfigTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(q={}, r={}, s={}, p={})", self.q, self.r, self.s, self.p)
    }
}

/// A counterfactual earnings CDF evaluated on a fixed grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualCdf {
    pub config: ConfigTuple,
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn lookup<'m>(models: &'m BTreeMap<i32, YearModel>, year: i32) -> Result<&'m YearModel> {
    models.get(&year).ok_or(Error::UnknownYear(year))
}

fn check_basis_compatibility(models: &[&YearModel]) -> Result<()> {
    let first = models[0];
    for m in &models[1..] {
        if m.sample.basis_p.cols() != first.sample.basis_p.cols()
            || m.ldsf.m_terms != first.ldsf.m_terms
        {
            return Err(Error::BasisMismatch);
        }
    }
    Ok(())
}

/// Default evaluation grid: weighted quantiles of pooled positive earnings
/// across the given samples, with 0 prepended.
pub fn default_y_grid(samples: &[&YearSample], points: usize) -> Vec<f64> {
    let mut earnings = Vec::new();
    let mut weights = Vec::new();
    for s in samples {
        for o in &s.obs {
            if o.earnings > 0.0 {
                earnings.push(o.earnings);
                weights.push(o.weight);
            }
        }
    }
    let mut grid = if earnings.is_empty() {
        Vec::new()
    } else {
        let taus: Vec<f64> = (1..=points).map(|k| k as f64 / points as f64).collect();
        let mut g = stats::weighted_quantiles(&earnings, &weights, &taus);
        g.sort_unstable_by(f64::total_cmp);
        g.dedup();
        g
    };
    grid.insert(0, 0.0);
    grid
}

/// Distinct design rows stop being worth caching beyond this count
/// (continuous covariates); the evaluation then predicts per row.
const PATTERN_CACHE_CAP: usize = 4096;

/// Counterfactual hours per composition-year row: year-q participation
/// threshold and year-r hours quantile at the row's rank. Zero marks a row
/// outside the participation region (or with a zero quantile); such rows
/// contribute probability one at every earnings level. The hours curve and
/// threshold depend on the row only through its design values, so they are
/// computed once per distinct pattern when the design is discrete.
fn counterfactual_hours_per_row(mq: &YearModel, mr: &YearModel, ms: &YearModel) -> Vec<f64> {
    let n = ms.sample.n();
    match stats::row_patterns(&ms.sample.basis_p, PATTERN_CACHE_CAP) {
        Some((idx, reps)) => {
            let per_pattern: Vec<(f64, Vec<f64>)> = exec::map_collect(reps.len(), |p| {
                let row = ms.sample.basis_p.row(reps[p]);
                let thr = mq.hours_fit.predict_min(row);
                let curve = mr.hours_fit.predict_curve(row);
                (thr, curve)
            });
            exec::map_collect(n, |i| {
                let (thr, curve) = &per_pattern[idx[i]];
                let vhat = ms.cf.v[i];
                if vhat <= *thr {
                    0.0
                } else {
                    dr::quantile_from_curve(curve, vhat, &mr.hours_support)
                }
            })
        }
        None => exec::map_collect(n, |i| {
            let row = ms.sample.basis_p.row(i);
            let vhat = ms.cf.v[i];
            let thr = mq.hours_fit.predict_min(row);
            if vhat <= thr {
                return 0.0;
            }
            let curve = mr.hours_fit.predict_curve(row);
            dr::quantile_from_curve(&curve, vhat, &mr.hours_support)
        }),
    }
}

/// Evaluates the counterfactual CDF for one component tuple on `y_grid`.
pub fn counterfactual_cdf(
    models: &BTreeMap<i32, YearModel>,
    config: ConfigTuple,
    y_grid: &[f64],
) -> Result<CounterfactualCdf> {
    if y_grid.is_empty() || y_grid[0] < 0.0 || y_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "earnings grid must be nonnegative and strictly increasing".into(),
        ));
    }
    let mq = lookup(models, config.q)?;
    let mr = lookup(models, config.r)?;
    let ms = lookup(models, config.s)?;
    let mp = lookup(models, config.p)?;
    check_basis_compatibility(&[mq, mr, ms, mp])?;

    let n = ms.sample.n();
    let width = y_grid.len();
    let hours = counterfactual_hours_per_row(mq, mr, ms);
    let wage_thresholds = &mp.ldsf.fit.thresholds;
    let acc = exec::accumulate_with(
        n,
        width + 1,
        || (Vec::new(), Vec::new()),
        |i, (mrow, wcurve): &mut (Vec<f64>, Vec<f64>), acc| {
            let o = &ms.sample.obs[i];
            let w = o.weight;
            acc[width] += w;
            let h = hours[i];
            if h == 0.0 {
                for slot in acc[..width].iter_mut() {
                    *slot += w;
                }
                return;
            }
            let vhat = ms.cf.v[i];
            mp.ldsf.wage_curve_into(&o.x, vhat, mrow, wcurve);
            let mut j = 0usize;
            for k in 0..width {
                let cut = y_grid[k] / h;
                while j < wage_thresholds.len() && wage_thresholds[j] <= cut {
                    j += 1;
                }
                if j > 0 {
                    acc[k] += w * wcurve[j - 1];
                }
            }
        },
    );
    let total = acc[width];
    if total <= 0.0 {
        return Err(Error::Invalid("zero total weight in composition year".into()));
    }
    let values = acc[..width].iter().map(|a| a / total).collect();
    Ok(CounterfactualCdf {
        config,
        y_grid: y_grid.to_vec(),
        values,
    })
}

/// Left-inverse quantile of a step CDF tabulated on a grid: the smallest
/// grid point where the CDF reaches `tau`.
pub fn grid_quantile(grid: &[f64], values: &[f64], tau: f64) -> Result<f64> {
    if !(0.0 < tau && tau < 1.0) {
        return Err(Error::Invalid(format!("quantile level {tau} outside (0, 1)")));
    }
    match values.iter().position(|&v| v >= tau) {
        Some(k) => Ok(grid[k]),
        None => Err(Error::GridTooShort {
            tau,
            reached: *values.last().unwrap_or(&0.0),
        }),
    }
}

/// Mean implied by a step CDF on a grid: the integral of the survival
/// function, truncated at the top grid point.
pub fn grid_mean(grid: &[f64], values: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..grid.len() - 1 {
        total += (1.0 - values[k]) * (grid[k + 1] - grid[k]);
    }
    total
}

impl CounterfactualCdf {
    /// Left-inverse quantile on the evaluation grid.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        grid_quantile(&self.y_grid, &self.values, tau)
    }

    /// Mean implied by the step CDF on the grid.
    pub fn mean(&self) -> f64 {
        grid_mean(&self.y_grid, &self.values)
    }
}

/// One overlap failure found by [`check_support`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportIssue {
    /// "wage" when a composition-year worker cell is missing from the
    /// wage-structure year; "hours" when a composition-year covariate cell is
    /// missing from the participation or hours year.
    pub condition: String,
    pub cell: String,
    /// Weighted share of the composition-year rows in the failing cell.
    pub mass: f64,
}

fn discretize_columns(
    years: &[&YearModel],
    pick: fn(&crate::model::Observation) -> &[f64],
) -> Vec<Vec<f64>> {
    // Per column: pooled sorted distinct values if few, else pooled decile
    // boundaries. Returned as per-column boundary lists; a value's cell is
    // the count of boundaries at or below it.
    let ncols = years
        .first()
        .map(|m| pick(&m.sample.obs[0]).len())
        .unwrap_or(0);
    let mut out = Vec::with_capacity(ncols);
    for c in 0..ncols {
        let mut pooled = Vec::new();
        for m in years {
            for o in &m.sample.obs {
                pooled.push(pick(o)[c]);
            }
        }
        let mut distinct = pooled.clone();
        distinct.sort_unstable_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() <= 10 {
            out.push(distinct);
        } else {
            let w = vec![1.0; pooled.len()];
            let taus: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
            let mut bounds = stats::weighted_quantiles(&pooled, &w, &taus);
            bounds.sort_unstable_by(f64::total_cmp);
            bounds.dedup();
            out.push(bounds);
        }
    }
    out
}

fn cell_index(bounds: &[Vec<f64>], values: &[f64]) -> Vec<usize> {
    bounds
        .iter()
        .zip(values)
        .map(|(b, v)| b.partition_point(|x| x <= v))
        .collect()
}

fn v_bin(v: f64) -> usize {
    ((v * 10.0).floor() as usize).min(9)
}

/// Checks covariate/rank overlap between the years of a component tuple:
/// worker (x, v)-cells of the composition year that also participate in the
/// participation year must appear among wage-structure-year worker cells, and
/// composition-year (x, z)-cells must appear in both the participation and
/// hours years. Returns the violations (empty when overlap holds).
pub fn check_support(
    models: &BTreeMap<i32, YearModel>,
    config: ConfigTuple,
) -> Result<Vec<SupportIssue>> {
    let mq = lookup(models, config.q)?;
    let mr = lookup(models, config.r)?;
    let ms = lookup(models, config.s)?;
    let mp = lookup(models, config.p)?;
    check_basis_compatibility(&[mq, mr, ms, mp])?;
    let all = [mq, mr, ms, mp];
    let x_bounds = discretize_columns(&all, |o| &o.x);
    let z_bounds = discretize_columns(&all, |o| &o.z);

    let worker_xv = |m: &YearModel| -> BTreeSet<(Vec<usize>, usize)> {
        structural::trimmed_worker_indices(&m.sample)
            .into_iter()
            .map(|i| {
                let o = &m.sample.obs[i];
                (cell_index(&x_bounds, &o.x), v_bin(m.cf.v[i]))
            })
            .collect()
    };
    let xz_cells = |m: &YearModel| -> BTreeSet<(Vec<usize>, Vec<usize>)> {
        m.sample
            .obs
            .iter()
            .map(|o| (cell_index(&x_bounds, &o.x), cell_index(&z_bounds, &o.z)))
            .collect()
    };

    let xv_q = worker_xv(mq);
    let xv_s = worker_xv(ms);
    let xv_p = worker_xv(mp);
    let xz_q = xz_cells(mq);
    let xz_r = xz_cells(mr);

    let total_s: f64 = stats::pairwise_sum(&ms.sample.weights());
    let mut issues = Vec::new();

    // Wage condition: composition-year worker cells shared with the
    // participation year must be covered by the wage year.
    let mut missing_xv: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
    for i in structural::trimmed_worker_indices(&ms.sample) {
        let o = &ms.sample.obs[i];
        let cell = (cell_index(&x_bounds, &o.x), v_bin(ms.cf.v[i]));
        if xv_q.contains(&cell) && xv_s.contains(&cell) && !xv_p.contains(&cell) {
            *missing_xv.entry(cell).or_insert(0.0) += o.weight;
        }
    }
    for ((xc, vb), mass) in missing_xv {
        issues.push(SupportIssue {
            condition: "wage".into(),
            cell: format!("x-cell {xc:?}, rank bin {vb}"),
            mass: mass / total_s,
        });
    }

    // Hours condition: composition-year covariate cells must appear in both
    // the participation year and the hours year.
    let mut missing_xz: BTreeMap<(Vec<usize>, Vec<usize>), f64> = BTreeMap::new();
    for o in &ms.sample.obs {
        let cell = (cell_index(&x_bounds, &o.x), cell_index(&z_bounds, &o.z));
        if !(xz_q.contains(&cell) && xz_r.contains(&cell)) {
            *missing_xz.entry(cell).or_insert(0.0) += o.weight;
        }
    }
    for ((xc, zc), mass) in missing_xz {
        issues.push(SupportIssue {
            condition: "hours".into(),
            cell: format!("x-cell {xc:?}, z-cell {zc:?}"),
            mass: mass / total_s,
        });
    }
    Ok(issues)
}
