//! Sequential decomposition of distributional change between two years.
//!
//! Starting from the base year's own distribution, the component years are
//! switched to the comparison year one at a time — participation, then
//! hours, then composition, then wage structure — and each switch's effect
//! on a chosen functional is one decomposition term. The terms telescope: by
//! construction they sum to the total change in the functional. A two-term
//! variant decomposes the hours distribution itself (structure versus
//! composition), and a variance helper splits log annual hours into weekly
//! hours and weeks worked.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{
    self, ConfigTuple, CounterfactualCdf, YearModel,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::YearSample;
use crate::stats;

/// A scalar summary of a distribution, evaluated on tabulated step CDFs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Quantile { tau: f64 },
    Mean,
    /// Ratio of an upper to a lower quantile (e.g. 0.9 over 0.1).
    Ratio { hi: f64, lo: f64 },
}

impl Functional {
    pub fn slug(&self) -> String {
        fn pct(tau: f64) -> String {
            let p = tau * 100.0;
            if (p - p.round()).abs() < 1e-9 {
                format!("{}", p.round() as i64)
            } else {
                format!("{p}")
            }
        }
        match *self {
            Functional::Quantile { tau } => format!("q{}", pct(tau)),
            Functional::Mean => "mean".into(),
            Functional::Ratio { hi, lo } => format!("ratio{}_{}", pct(hi), pct(lo)),
        }
    }

    /// Evaluates the functional on a step CDF. A quantile that lands on the
    /// zero atom is an error unless `allow_zero` is set; a ratio whose
    /// denominator quantile is zero is always an error.
    pub fn eval(
        &self,
        grid: &[f64],
        values: &[f64],
        config: &str,
        allow_zero: bool,
    ) -> Result<f64> {
        match *self {
            Functional::Quantile { tau } => {
                let q = counterfactual::grid_quantile(grid, values, tau)?;
                if q == 0.0 && !allow_zero {
                    return Err(Error::ZeroAtomQuantile {
                        config: config.to_string(),
                        tau,
                    });
                }
                Ok(q)
            }
            Functional::Mean => Ok(counterfactual::grid_mean(grid, values)),
            Functional::Ratio { hi, lo } => {
                let num = counterfactual::grid_quantile(grid, values, hi)?;
                let den = counterfactual::grid_quantile(grid, values, lo)?;
                if den == 0.0 {
                    return Err(Error::ZeroDenominator {
                        config: config.to_string(),
                    });
                }
                Ok(num / den)
            }
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;

    /// Parses the slug forms: `mean`, `q<percent>` (e.g. `q50`, `q99.9`) and
    /// `ratio<hi>_<lo>` (e.g. `ratio90_10`).
    fn from_str(s: &str) -> Result<Functional> {
        fn pct(s: &str, whole: &str) -> Result<f64> {
            let p: f64 = s
                .parse()
                .map_err(|_| Error::Invalid(format!("bad functional name {whole:?}")))?;
            if !(0.0 < p && p < 100.0) {
                return Err(Error::Invalid(format!(
                    "percent {p} in functional {whole:?} outside (0, 100)"
                )));
            }
            Ok(p / 100.0)
        }
        if s == "mean" {
            Ok(Functional::Mean)
        } else if let Some(rest) = s.strip_prefix("ratio") {
            let (hi_s, lo_s) = rest
                .split_once('_')
                .ok_or_else(|| Error::Invalid(format!("bad functional name {s:?}")))?;
            let (hi, lo) = (pct(hi_s, s)?, pct(lo_s, s)?);
            if hi <= lo {
                return Err(Error::Invalid(format!(
                    "ratio functional {s:?} needs upper percent above lower"
                )));
            }
            Ok(Functional::Ratio { hi, lo })
        } else if let Some(rest) = s.strip_prefix('q') {
            Ok(Functional::Quantile { tau: pct(rest, s)? })
        } else {
            Err(Error::Invalid(format!("bad functional name {s:?}")))
        }
    }
}

/// The four decomposition terms plus their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermSet {
    pub participation: f64,
    pub hours: f64,
    pub composition: f64,
    pub wage_structure: f64,
    pub total: f64,
}

impl TermSet {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.participation,
            self.hours,
            self.composition,
            self.wage_structure,
            self.total,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> TermSet {
        TermSet {
            participation: a[0],
            hours: a[1],
            composition: a[2],
            wage_structure: a[3],
            total: a[4],
        }
    }
}

/// One functional's decomposition between two years.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompRecord {
    pub base_year: i32,
    pub comparison_year: i32,
    pub functional: Functional,
    /// Functional at the base year's own distribution.
    pub base_value: f64,
    /// Functional at the comparison year's own distribution.
    pub comparison_value: f64,
    pub absolute: TermSet,
    /// Terms divided by `base_value`; absent when the base value is zero.
    pub relative: Option<TermSet>,
}

/// The switching chain from base-year to comparison-year configuration:
/// participation, hours, composition, then wage structure.
pub fn chain_configs(base: i32, comparison: i32) -> [ConfigTuple; 5] {
    let (b, t) = (base, comparison);
    [
        ConfigTuple { q: b, r: b, s: b, p: b },
        ConfigTuple { q: t, r: b, s: b, p: b },
        ConfigTuple { q: t, r: t, s: b, p: b },
        ConfigTuple { q: t, r: t, s: t, p: b },
        ConfigTuple { q: t, r: t, s: t, p: t },
    ]
}

fn relative_terms(abs: &TermSet, base_value: f64) -> Option<TermSet> {
    if base_value == 0.0 {
        return None;
    }
    let a = abs.as_array().map(|x| x / base_value);
    Some(TermSet::from_array(a))
}

/// Decomposes several functionals at once, evaluating each distinct
/// configuration in the chain exactly once.
pub fn decompose_series(
    models: &BTreeMap<i32, YearModel>,
    base: i32,
    comparison: i32,
    functionals: &[Functional],
    y_grid: &[f64],
    allow_zero: bool,
) -> Result<Vec<DecompRecord>> {
    let chain = chain_configs(base, comparison);
    let mut cache: BTreeMap<ConfigTuple, CounterfactualCdf> = BTreeMap::new();
    for cfg in chain {
        if !cache.contains_key(&cfg) {
            let cdf = counterfactual::counterfactual_cdf(models, cfg, y_grid)?;
            cache.insert(cfg, cdf);
        }
    }
    let mut out = Vec::with_capacity(functionals.len());
    for f in functionals {
        let mut phi = [0.0; 5];
        for (k, cfg) in chain.iter().enumerate() {
            let cdf = &cache[cfg];
            phi[k] = f.eval(&cdf.y_grid, &cdf.values, &cfg.slug(), allow_zero)?;
        }
        let abs = TermSet {
            participation: phi[1] - phi[0],
            hours: phi[2] - phi[1],
            composition: phi[3] - phi[2],
            wage_structure: phi[4] - phi[3],
            total: phi[4] - phi[0],
        };
        out.push(DecompRecord {
            base_year: base,
            comparison_year: comparison,
            functional: *f,
            base_value: phi[0],
            comparison_value: phi[4],
            absolute: abs,
            relative: relative_terms(&abs, phi[0]),
        });
    }
    Ok(out)
}

/// Decomposes a single functional between two years.
pub fn decompose_functional(
    models: &BTreeMap<i32, YearModel>,
    base: i32,
    comparison: i32,
    functional: Functional,
    y_grid: &[f64],
    allow_zero: bool,
) -> Result<DecompRecord> {
    Ok(decompose_series(models, base, comparison, &[functional], y_grid, allow_zero)?
        .pop()
        .expect("one functional in, one record out"))
}

/// Two-term decomposition of an hours-distribution functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoursDecompRecord {
    pub base_year: i32,
    pub comparison_year: i32,
    pub functional: Functional,
    pub base_value: f64,
    pub comparison_value: f64,
    /// Effect of switching the hours structure at fixed composition.
    pub structure: f64,
    /// Effect of switching the composition under the base structure.
    pub composition: f64,
    pub total: f64,
    pub relative_structure: Option<f64>,
    pub relative_composition: Option<f64>,
}

/// Weighted average of the structure year's predicted hours CDF over the
/// composition year's rows, tabulated on the structure year's grid.
fn hours_mixture_cdf(structure: &YearModel, composition: &YearModel) -> (Vec<f64>, Vec<f64>) {
    let n = composition.sample.n();
    let width = structure.hours_fit.len();
    let acc = exec::accumulate(n, width + 1, |i, acc| {
        let w = composition.sample.obs[i].weight;
        acc[width] += w;
        let mut curve = Vec::new();
        structure
            .hours_fit
            .predict_curve_into(composition.sample.basis_p.row(i), &mut curve);
        for k in 0..width {
            acc[k] += w * curve[k];
        }
    });
    let total = acc[width];
    (
        structure.hours_fit.thresholds.clone(),
        acc[..width].iter().map(|a| a / total).collect(),
    )
}

/// Decomposes hours-distribution change into structure and composition.
pub fn decompose_hours(
    models: &BTreeMap<i32, YearModel>,
    base: i32,
    comparison: i32,
    functionals: &[Functional],
    allow_zero: bool,
) -> Result<Vec<HoursDecompRecord>> {
    let mb = models.get(&base).ok_or(Error::UnknownYear(base))?;
    let mt = models.get(&comparison).ok_or(Error::UnknownYear(comparison))?;
    if mb.sample.basis_p.cols() != mt.sample.basis_p.cols() {
        return Err(Error::BasisMismatch);
    }
    // (structure year, composition year) mixtures.
    let (grid_bb, val_bb) = hours_mixture_cdf(mb, mb);
    let (grid_bt, val_bt) = hours_mixture_cdf(mb, mt);
    let (grid_tt, val_tt) = hours_mixture_cdf(mt, mt);
    let mut out = Vec::with_capacity(functionals.len());
    for f in functionals {
        let phi_bb = f.eval(&grid_bb, &val_bb, "hours base/base", allow_zero)?;
        let phi_bt = f.eval(&grid_bt, &val_bt, "hours base/comparison", allow_zero)?;
        let phi_tt = f.eval(&grid_tt, &val_tt, "hours comparison/comparison", allow_zero)?;
        let structure = phi_tt - phi_bt;
        let composition = phi_bt - phi_bb;
        out.push(HoursDecompRecord {
            base_year: base,
            comparison_year: comparison,
            functional: *f,
            base_value: phi_bb,
            comparison_value: phi_tt,
            structure,
            composition,
            total: phi_tt - phi_bb,
            relative_structure: (phi_bb != 0.0).then(|| structure / phi_bb),
            relative_composition: (phi_bb != 0.0).then(|| composition / phi_bb),
        });
    }
    Ok(out)
}

/// Weighted population moments of log components for one year's workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub year: i32,
    /// Weighted worker count.
    pub workers_weight: f64,
    pub var_log_earnings: f64,
    pub var_log_wage: f64,
    pub var_log_hours: f64,
    pub cov_log_wage_hours: f64,
    pub var_log_weekly_hours: f64,
    pub var_log_weeks: f64,
    pub cov_log_weekly_weeks: f64,
}

/// Splits log earnings and log annual hours variance over workers. Log
/// earnings variance is computed from the sum of the log wage and log hours
/// (and log hours from its weekly/weeks split), so the identities
/// var(ln Y) = var(ln W) + var(ln H) + 2 cov and
/// var(ln H) = var(ln weekly) + var(ln weeks) + 2 cov hold by construction.
pub fn variance_log_components(sample: &YearSample) -> Result<VarianceComponents> {
    let mut lw = Vec::new();
    let mut lwk = Vec::new();
    let mut lweeks = Vec::new();
    let mut weights = Vec::new();
    for o in &sample.obs {
        if !o.is_worker() {
            continue;
        }
        let (Some(weekly), Some(weeks)) = (o.weekly_hours, o.weeks) else {
            return Err(Error::MissingComponents);
        };
        if !(weekly > 0.0 && weeks > 0.0) {
            return Err(Error::MissingComponents);
        }
        lw.push(o.wage.expect("workers carry wages").ln());
        lwk.push(weekly.ln());
        lweeks.push(weeks.ln());
        weights.push(o.weight);
    }
    if weights.is_empty() {
        return Err(Error::Invalid(format!(
            "no workers in year {}",
            sample.year
        )));
    }
    let lh: Vec<f64> = lwk.iter().zip(&lweeks).map(|(a, b)| a + b).collect();
    let ly: Vec<f64> = lw.iter().zip(&lh).map(|(a, b)| a + b).collect();
    Ok(VarianceComponents {
        year: sample.year,
        workers_weight: stats::pairwise_sum(&weights),
        var_log_earnings: stats::weighted_variance(&ly, &weights),
        var_log_wage: stats::weighted_variance(&lw, &weights),
        var_log_hours: stats::weighted_variance(&lh, &weights),
        cov_log_wage_hours: stats::weighted_covariance(&lw, &lh, &weights),
        var_log_weekly_hours: stats::weighted_variance(&lwk, &weights),
        var_log_weeks: stats::weighted_variance(&lweeks, &weights),
        cov_log_weekly_weeks: stats::weighted_covariance(&lwk, &lweeks, &weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::control::CfMode;
    use crate::counterfactual::{default_y_grid, fit_year, FitSettings};
    use crate::dgp::{Copula, DgpSpec, EMarginal, GForm, KForm, YearDgp};
    use crate::model::Observation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn functional_slugs_round_trip_through_parsing() {
        let cases = [
            Functional::Mean,
            Functional::Quantile { tau: 0.5 },
            Functional::Quantile { tau: 0.999 },
            Functional::Ratio { hi: 0.9, lo: 0.1 },
        ];
        for f in cases {
            let parsed: Functional = f.slug().parse().unwrap();
            assert_eq!(parsed.slug(), f.slug());
        }
        for bad in ["q0", "q100", "median", "ratio10_90", "ratio50", "q5x"] {
            assert!(bad.parse::<Functional>().is_err(), "{bad} should not parse");
        }
    }

    fn spec_two_years(n: usize) -> DgpSpec {
        DgpSpec {
            years: vec![
                YearDgp {
                    year: 0,
                    n,
                    g: GForm::Exp { a: 2.0, b: 0.3, sigma: 0.4, scale: 1.0 },
                    k: KForm { scale: 600.0, c: 0.4, d: 0.3, f: 0.4, s: 1.0, cut: None, ramp: None },
                    copula: Copula::Gaussian { rho: 0.4 },
                    e_marginal: EMarginal::StdNormal,
                    x_levels: vec![0.0, 1.0],
                    x_probs: vec![0.55, 0.45],
                    z_levels: vec![0.0, 1.0],
                    z_probs: vec![0.5, 0.5],
                    bunching: None,
                },
                YearDgp {
                    year: 1,
                    n,
                    g: GForm::Exp { a: 2.4, b: 0.35, sigma: 0.45, scale: 1.0 },
                    k: KForm { scale: 640.0, c: 0.55, d: 0.3, f: 0.4, s: 1.0, cut: None, ramp: None },
                    copula: Copula::Gaussian { rho: 0.4 },
                    e_marginal: EMarginal::StdNormal,
                    x_levels: vec![0.0, 1.0],
                    x_probs: vec![0.45, 0.55],
                    z_levels: vec![0.0, 1.0],
                    z_probs: vec![0.5, 0.5],
                    bunching: None,
                },
            ],
        }
    }

    fn fit_all(spec: &DgpSpec, data_seed: u64, mode: CfMode) -> BTreeMap<i32, YearModel> {
        let years = crate::dgp::simulate(spec, data_seed).unwrap();
        let mut settings = FitSettings::new(BasisSpec::linear(spec.dx(), spec.dz()), 17);
        settings.cf_mode = mode;
        years
            .into_iter()
            .map(|(y, obs)| {
                let sample =
                    crate::model::YearSample::new(y, obs, &settings.basis, 0.99).unwrap();
                (y, fit_year(sample, &settings).unwrap())
            })
            .collect()
    }

    #[test]
    fn terms_telescope_to_the_total() {
        let spec = spec_two_years(1500);
        let models = fit_all(&spec, 41, CfMode::Interval);
        let samples: Vec<&YearSample> = models.values().map(|m| &m.sample).collect();
        let y_grid = default_y_grid(&samples, 300);
        let functionals = [
            Functional::Quantile { tau: 0.5 },
            Functional::Mean,
            Functional::Ratio { hi: 0.9, lo: 0.5 },
        ];
        let records = decompose_series(&models, 0, 1, &functionals, &y_grid, true).unwrap();
        assert_eq!(records.len(), 3);
        for rec in &records {
            let a = rec.absolute;
            let sum = a.participation + a.hours + a.composition + a.wage_structure;
            assert!(
                (sum - a.total).abs() < 1e-10,
                "telescoping residual {} for {:?}",
                (sum - a.total).abs(),
                rec.functional
            );
            assert_abs_diff_eq!(
                a.total,
                rec.comparison_value - rec.base_value,
                epsilon = 1e-12
            );
            let rel = rec.relative.as_ref().expect("nonzero base value");
            assert_abs_diff_eq!(
                rel.total * rec.base_value,
                a.total,
                epsilon = 1e-9 * a.total.abs().max(1.0)
            );
        }
    }

    #[test]
    fn series_matches_single_functional_calls() {
        let spec = spec_two_years(1000);
        let models = fit_all(&spec, 43, CfMode::Interval);
        let samples: Vec<&YearSample> = models.values().map(|m| &m.sample).collect();
        let y_grid = default_y_grid(&samples, 200);
        let fs = [Functional::Mean, Functional::Quantile { tau: 0.75 }];
        let series = decompose_series(&models, 0, 1, &fs, &y_grid, true).unwrap();
        for (k, f) in fs.iter().enumerate() {
            let single = decompose_functional(&models, 0, 1, *f, &y_grid, true).unwrap();
            assert_eq!(series[k].absolute, single.absolute);
            assert_eq!(series[k].base_value, single.base_value);
        }
    }

    #[test]
    fn duplicated_year_decomposes_to_exact_zeros() {
        // Two years backed by byte-identical data and point-mode control
        // functions: every chain configuration produces the same CDF, so all
        // terms are exactly zero.
        let one = spec_two_years(1200).years[0].clone();
        // Simulate year 0 and copy its rows to year 1.
        let spec0 = DgpSpec { years: vec![one] };
        let obs0 = crate::dgp::simulate(&spec0, 7).unwrap().remove(&0).unwrap();
        let mut settings = FitSettings::new(BasisSpec::linear(1, 1), 23);
        settings.cf_mode = CfMode::Point;
        let mut models = BTreeMap::new();
        for year in [0, 1] {
            let sample =
                crate::model::YearSample::new(year, obs0.clone(), &settings.basis, 0.99)
                    .unwrap();
            models.insert(year, fit_year(sample, &settings).unwrap());
        }
        let samples: Vec<&YearSample> = models.values().map(|m| &m.sample).collect();
        let y_grid = default_y_grid(&samples, 250);
        let recs = decompose_series(
            &models,
            0,
            1,
            &[Functional::Quantile { tau: 0.5 }, Functional::Mean],
            &y_grid,
            true,
        )
        .unwrap();
        for rec in &recs {
            assert_eq!(rec.absolute.participation, 0.0);
            assert_eq!(rec.absolute.hours, 0.0);
            assert_eq!(rec.absolute.composition, 0.0);
            assert_eq!(rec.absolute.wage_structure, 0.0);
            assert_eq!(rec.absolute.total, 0.0);
        }
        let hrecs =
            decompose_hours(&models, 0, 1, &[Functional::Mean], true).unwrap();
        assert_eq!(hrecs[0].structure, 0.0);
        assert_eq!(hrecs[0].composition, 0.0);
    }

    #[test]
    fn hours_terms_telescope() {
        let spec = spec_two_years(1500);
        let models = fit_all(&spec, 47, CfMode::Interval);
        let recs = decompose_hours(
            &models,
            0,
            1,
            &[Functional::Mean, Functional::Quantile { tau: 0.5 }],
            true,
        )
        .unwrap();
        for rec in &recs {
            assert!(
                (rec.structure + rec.composition - rec.total).abs() < 1e-10,
                "residual for {:?}",
                rec.functional
            );
            assert_abs_diff_eq!(
                rec.total,
                rec.comparison_value - rec.base_value,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_denominator_ratio_is_rejected() {
        let grid = vec![0.0, 5.0, 10.0];
        let values = vec![0.3, 0.6, 1.0];
        // Lower quantile 0.1 sits on the zero atom.
        let f = Functional::Ratio { hi: 0.9, lo: 0.1 };
        let err = f.eval(&grid, &values, "test", true).unwrap_err();
        assert!(matches!(err, Error::ZeroDenominator { .. }), "{err}");
        // A zero quantile alone errs only when not allowed.
        let q = Functional::Quantile { tau: 0.25 };
        assert_eq!(q.eval(&grid, &values, "test", true).unwrap(), 0.0);
        let err = q.eval(&grid, &values, "test", false).unwrap_err();
        assert!(matches!(err, Error::ZeroAtomQuantile { .. }), "{err}");
    }

    #[test]
    fn relative_terms_absent_when_base_is_zero() {
        let abs = TermSet {
            participation: 0.5,
            hours: 0.25,
            composition: 0.0,
            wage_structure: 0.25,
            total: 1.0,
        };
        assert!(relative_terms(&abs, 0.0).is_none());
        let rel = relative_terms(&abs, 2.0).unwrap();
        assert_eq!(rel.total, 0.5);
        assert_eq!(rel.participation, 0.25);
    }

    #[test]
    fn log_variance_split_matches_hand_computation() {
        let mk = |weekly: f64, weeks: f64, wage: f64| Observation {
            earnings: wage * weekly * weeks,
            hours: weekly * weeks,
            wage: Some(wage),
            x: vec![],
            z: vec![],
            weekly_hours: Some(weekly),
            weeks: Some(weeks),
            weight: 1.0,
        };
        let nonworker = Observation {
            earnings: 0.0,
            hours: 0.0,
            wage: None,
            x: vec![],
            z: vec![],
            weekly_hours: None,
            weeks: None,
            weight: 1.0,
        };
        let obs = vec![mk(40.0, 50.0, 10.0), mk(30.0, 40.0, 20.0), nonworker];
        let spec = BasisSpec::linear(0, 0);
        let sample = crate::model::YearSample::new(5, obs, &spec, 0.99).unwrap();
        let vc = variance_log_components(&sample).unwrap();
        // Two equal-weight points: var = (d/2)^2 * 2 / 2 = d^2 / 4.
        let d_wk = (40.0f64.ln() - 30.0f64.ln()) / 2.0;
        let d_weeks = (50.0f64.ln() - 40.0f64.ln()) / 2.0;
        let d_w = (10.0f64.ln() - 20.0f64.ln()) / 2.0;
        assert_abs_diff_eq!(vc.var_log_weekly_hours, d_wk * d_wk, epsilon = 1e-14);
        assert_abs_diff_eq!(vc.var_log_weeks, d_weeks * d_weeks, epsilon = 1e-14);
        assert_abs_diff_eq!(vc.cov_log_weekly_weeks, d_wk * d_weeks, epsilon = 1e-14);
        assert_abs_diff_eq!(vc.var_log_wage, d_w * d_w, epsilon = 1e-14);
        assert_eq!(vc.workers_weight, 2.0);
        // Identities hold to floating-point exactness.
        let hours_resid = vc.var_log_hours
            - (vc.var_log_weekly_hours + vc.var_log_weeks + 2.0 * vc.cov_log_weekly_weeks);
        let earn_resid = vc.var_log_earnings
            - (vc.var_log_wage + vc.var_log_hours + 2.0 * vc.cov_log_wage_hours);
        assert!(hours_resid.abs() < 1e-12, "hours identity {hours_resid}");
        assert!(earn_resid.abs() < 1e-12, "earnings identity {earn_resid}");
    }

    #[test]
    fn missing_components_is_an_error() {
        let obs = vec![Observation {
            earnings: 20000.0,
            hours: 2000.0,
            wage: Some(10.0),
            x: vec![],
            z: vec![],
            weekly_hours: None,
            weeks: None,
            weight: 1.0,
        }; 3];
        let spec = BasisSpec::linear(0, 0);
        let sample = crate::model::YearSample::new(5, obs, &spec, 0.99).unwrap();
        let err = variance_log_components(&sample).unwrap_err();
        assert!(matches!(err, Error::MissingComponents), "{err}");
    }

    #[test]
    fn functional_slugs_are_stable() {
        assert_eq!(Functional::Quantile { tau: 0.5 }.slug(), "q50");
        assert_eq!(Functional::Mean.slug(), "mean");
        assert_eq!(Functional::Ratio { hi: 0.9, lo: 0.1 }.slug(), "ratio90_10");
        assert_eq!(Functional::Quantile { tau: 0.925 }.slug(), "q92.5");
    }
}
