//! Temporary profiling harness for the bootstrap-coverage hot path.

use std::collections::BTreeMap;
use std::time::Instant;

use earndist::basis::BasisSpec;
use earndist::bootstrap::{bootstrap_decomposition, BootstrapPlan};
use earndist::counterfactual::{counterfactual_cdf, default_y_grid, fit_year, FitSettings};
use earndist::decomposition::{chain_configs, decompose_series, Functional};
use earndist::dgp::{simulate, Copula, DgpSpec, EMarginal, GForm, KForm, YearDgp};
use earndist::model::YearSample;
use earndist::rng;

fn k_form(scale: f64, c: f64, d: f64, f: f64, s: f64) -> KForm {
    KForm { scale, c, d, f, s, cut: None, ramp: None }
}

fn exp_g(a: f64, b: f64) -> GForm {
    GForm::Exp { a, b, sigma: 0.8, scale: 1.0 }
}

fn year_dgp(year: i32, n: usize, x_hi: f64, g: GForm, k: KForm) -> YearDgp {
    YearDgp {
        year,
        n,
        x_levels: vec![0.0, 1.0],
        x_probs: vec![1.0 - x_hi, x_hi],
        z_levels: vec![0.0, 1.0],
        z_probs: vec![0.5, 0.5],
        g,
        k,
        copula: Copula::LogisticLocation { mu0: 0.0, mu1: 1.1, mu2: -0.4, scale: 0.6 },
        e_marginal: EMarginal::StdNormal,
        bunching: None,
    }
}

fn canonical_spec(n: usize) -> DgpSpec {
    DgpSpec {
        years: vec![
            year_dgp(0, n, 0.45, exp_g(1.5, 0.4), k_form(600.0, 0.5, 0.3, 0.5, 1.0)),
            year_dgp(1, n, 0.55, exp_g(1.7, 0.5), k_form(650.0, 0.8, 0.3, 0.5, 1.0)),
        ],
    }
}

#[test]
#[ignore = "profiling only"]
fn profile_coverage_dataset() {
    let spec = canonical_spec(5_000);
    let basis = BasisSpec::interacted(1, 1);
    let years = simulate(&spec, rng::mix(999, &[2, 0])).expect("simulate");

    let mut settings = FitSettings::new(basis.clone(), rng::mix(999, &[3, 0]));
    settings.hours_points = 250;
    settings.wage_points = 200;

    let t = Instant::now();
    let samples: Vec<YearSample> = years
        .iter()
        .map(|(&year, obs)| {
            YearSample::new(year, obs.clone(), &basis, settings.trim_quantile).expect("sample")
        })
        .collect();
    eprintln!("samples: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let refs: Vec<&YearSample> = samples.iter().collect();
    let t = Instant::now();
    let y_grid = default_y_grid(&refs, 400);
    eprintln!("y_grid: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    let mut models = BTreeMap::new();
    for (&year, obs) in &years {
        let sample = YearSample::new(year, obs.clone(), &basis, settings.trim_quantile)
            .expect("sample");
        models.insert(year, fit_year(sample, &settings).expect("fit"));
    }
    eprintln!("fit both years (point): {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    for cfg in chain_configs(0, 1) {
        counterfactual_cdf(&models, cfg, &y_grid).expect("cdf");
    }
    eprintln!("5 chain cdf evals: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    decompose_series(&models, 0, 1, &[Functional::Quantile { tau: 0.5 }], &y_grid, false)
        .expect("decompose");
    eprintln!("decompose_series: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    let plan = BootstrapPlan { reps: 10, level: 0.95, seed: rng::mix(999, &[4, 0]) };
    bootstrap_decomposition(
        &years,
        &settings,
        0,
        1,
        &[Functional::Quantile { tau: 0.5 }],
        &y_grid,
        false,
        &plan,
    )
    .expect("bootstrap");
    eprintln!("10 bootstrap reps: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
}
