//! End-to-end checks of the estimation pipeline against the generator's
//! closed-form and Monte Carlo reference values.

use std::collections::BTreeMap;

use earndist::basis::BasisSpec;
use earndist::control::CfMode;
use earndist::counterfactual::{self, ConfigTuple, FitSettings, YearModel};
use earndist::dgp::{self, Copula, DgpSpec, EMarginal, GForm, KForm, YearDgp};
use earndist::model::YearSample;
use earndist::stats;

fn fit_all(spec: &DgpSpec, data_seed: u64, fit_seed: u64) -> BTreeMap<i32, YearModel> {
    let years = dgp::simulate(spec, data_seed).unwrap();
    let settings = FitSettings::new(BasisSpec::linear(spec.dx(), spec.dz()), fit_seed);
    years
        .into_iter()
        .map(|(y, obs)| {
            let sample = YearSample::new(y, obs, &settings.basis, 0.99).unwrap();
            (y, counterfactual::fit_year(sample, &settings).unwrap())
        })
        .collect()
}

/// Exactly specified wage stage: logistic-location shock law with an
/// exponential wage structure makes the wage distribution regression's
/// logistic index linear in (1, x, v, v^2, xv).
fn well_specified_year(year: i32, n: usize, a: f64, c: f64) -> YearDgp {
    YearDgp {
        year,
        n,
        g: GForm::Exp { a, b: 0.4, sigma: 1.0, scale: 1.0 },
        k: KForm { scale: 600.0, c, d: 0.3, f: 0.5, s: 1.0, cut: None, ramp: None },
        copula: Copula::LogisticLocation { mu0: 0.0, mu1: 1.2, mu2: -0.4, scale: 0.5 },
        e_marginal: EMarginal::StdNormal,
        x_levels: vec![0.0, 1.0],
        x_probs: vec![0.5, 0.5],
        z_levels: vec![0.0, 1.0],
        z_probs: vec![0.5, 0.5],
        bunching: None,
    }
}

#[test]
fn wage_distribution_fit_recovers_true_conditional_cdf() {
    let year = well_specified_year(0, 12_000, 1.5, 0.4);
    let spec = DgpSpec { years: vec![year] };
    let models = fit_all(&spec, 101, 55);
    let m = &models[&0];
    // True conditional CDF: P(exp(a + b x + e) <= w | V = v) with
    // e | V = v ~ Logistic(mu(v), s).
    let (a, b, s_log) = (1.5, 0.4, 0.5);
    let mu = |v: f64| 1.2 * v - 0.4 * v * v;
    let mut worst: f64 = 0.0;
    for x_raw in [0.0, 1.0] {
        for v in [0.35, 0.5, 0.7, 0.85] {
            for w in [3.0f64, 6.0, 10.0, 18.0, 30.0] {
                let e_star = w.ln() - a - b * x_raw;
                let truth = stats::logistic((e_star - mu(v)) / s_log);
                let got = m.ldsf.eval(&[x_raw], v, w);
                worst = worst.max((got - truth).abs());
            }
        }
    }
    assert!(worst < 0.035, "sup error {worst}");
}

#[test]
fn wage_mean_fit_recovers_linear_truth() {
    // Linear wage structure with logistic-location mean linear in v gives a
    // conditional mean inside the fitted span: E[w | x, v] =
    // scale (a + b x + e_coef (mu1 v + mu2 v^2)).
    let year = YearDgp {
        year: 0,
        n: 12_000,
        g: GForm::Linear { a: 2.0, b: 0.5, e_coef: 0.3, scale: 10.0 },
        k: KForm { scale: 600.0, c: 0.4, d: 0.3, f: 0.5, s: 1.0, cut: None, ramp: None },
        copula: Copula::LogisticLocation { mu0: 0.0, mu1: 1.0, mu2: -0.3, scale: 0.1 },
        e_marginal: EMarginal::StdNormal,
        x_levels: vec![0.0, 1.0],
        x_probs: vec![0.5, 0.5],
        z_levels: vec![0.0, 1.0],
        z_probs: vec![0.5, 0.5],
        bunching: None,
    };
    let spec = DgpSpec { years: vec![year.clone()] };
    let models = fit_all(&spec, 103, 57);
    let m = &models[&0];
    for x_raw in [0.0, 1.0] {
        for v in [0.35, 0.5, 0.7, 0.85] {
            let truth = 10.0 * (2.0 + 0.5 * x_raw + 0.3 * (1.0 * v - 0.3 * v * v));
            let got = m.lasf.eval(&[x_raw], v);
            assert!(
                (got - truth).abs() < 0.05 * truth,
                "x = {x_raw}, v = {v}: {got} vs {truth}"
            );
            // The Monte Carlo oracle agrees with the closed form.
            let mc = dgp::oracle_wage_mean(&year, x_raw, v, 200_000, 7);
            assert!((mc - truth).abs() < 0.02 * truth, "oracle {mc} vs {truth}");
        }
    }
}

#[test]
fn average_participation_threshold_equals_nonemployment_share() {
    let spec = DgpSpec { years: vec![well_specified_year(0, 6000, 1.5, 0.3)] };
    let models = fit_all(&spec, 105, 59);
    let m = &models[&0];
    let weights = m.sample.weights();
    let total = stats::pairwise_sum(&weights);
    let mut thr_sum = 0.0;
    let mut nonworker = 0.0;
    for i in 0..m.sample.n() {
        thr_sum += weights[i] * m.cf.participation_threshold[i];
        if !m.sample.obs[i].is_worker() {
            nonworker += weights[i];
        }
    }
    // Intercept score equation of the threshold-zero fit: the weighted mean
    // predicted nonparticipation probability equals the weighted share.
    assert!(
        (thr_sum / total - nonworker / total).abs() < 1e-6,
        "{} vs {}",
        thr_sum / total,
        nonworker / total
    );
}

#[test]
fn resolved_ranks_make_shock_independent_of_instruments() {
    // Within a band of resolved ranks, the wage shock distribution must not
    // depend on z (the exclusion restriction the control function enforces).
    let spec = DgpSpec { years: vec![well_specified_year(0, 16_000, 1.5, 0.4)] };
    let years = dgp::simulate_with_latents(&spec, 107).unwrap();
    let (obs, lat) = &years[&0];
    let settings = FitSettings::new(BasisSpec::linear(1, 1), 61);
    let sample = YearSample::new(0, obs.clone(), &settings.basis, 0.99).unwrap();
    let model = counterfactual::fit_year(sample, &settings).unwrap();
    let mut e_z0 = Vec::new();
    let mut e_z1 = Vec::new();
    for i in 0..model.sample.n() {
        let o = &model.sample.obs[i];
        if o.is_worker() && (0.4..0.6).contains(&model.cf.v[i]) {
            if o.z[0] == 0.0 {
                e_z0.push(lat.e[i]);
            } else {
                e_z1.push(lat.e[i]);
            }
        }
    }
    assert!(e_z0.len() > 300 && e_z1.len() > 300);
    let ks = stats::ks_two_sample(&e_z0, &e_z1);
    assert!(ks < 0.08, "KS distance {ks} between z groups at fixed rank");
}

#[test]
fn cross_year_counterfactual_matches_monte_carlo_oracle() {
    let spec = DgpSpec {
        years: vec![
            well_specified_year(0, 8000, 1.5, 0.3),
            well_specified_year(1, 8000, 1.9, 0.6),
        ],
    };
    let models = fit_all(&spec, 109, 63);
    let samples: Vec<&YearSample> = models.values().map(|m| &m.sample).collect();
    let y_grid = counterfactual::default_y_grid(&samples, 120);
    for (q, r, s, p) in [(0, 0, 1, 1), (1, 1, 0, 0), (1, 0, 0, 1)] {
        let cfg = ConfigTuple { q, r, s, p };
        let est = counterfactual::counterfactual_cdf(&models, cfg, &y_grid).unwrap();
        let oracle =
            dgp::oracle_counterfactual_cdf(&spec, q, r, s, p, &y_grid, 400_000, 65).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..y_grid.len() {
            worst = worst.max((est.values[k] - oracle[k]).abs());
        }
        assert!(worst < 0.05, "config {cfg}: sup distance {worst}");
    }
}

#[test]
fn interval_ranks_stay_uniform_under_bunching() {
    let mut year = well_specified_year(0, 12_000, 1.5, 0.4);
    year.bunching = Some(earndist::dgp::Bunching { atom: 1500.0, prob: 0.25 });
    let spec = DgpSpec { years: vec![year] };
    let models = fit_all(&spec, 111, 67);
    let m = &models[&0];
    let ks = stats::ks_uniform(&m.cf.v, 0.0, 1.0);
    assert!(ks < 0.03, "KS distance from uniform {ks}");
    // Point mode concentrates ranks and must fail the same check.
    let years = dgp::simulate(&spec, 111).unwrap();
    let mut settings = FitSettings::new(BasisSpec::linear(1, 1), 67);
    settings.cf_mode = CfMode::Point;
    let sample = YearSample::new(0, years[&0].clone(), &settings.basis, 0.99).unwrap();
    let point_model = counterfactual::fit_year(sample, &settings).unwrap();
    let ks_point = stats::ks_uniform(&point_model.cf.v, 0.0, 1.0);
    assert!(ks_point > ks, "point mode should look less uniform");
}
