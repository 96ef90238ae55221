//! Subcommand orchestration: data loading, fit caching, support checks and
//! the plot-ready output tables, all under one output directory.
//!
//! Every run writes `manifest.json` recording the configuration hash, the
//! derived seeds and the produced files. Fitted stages are cached under
//! `cache/<config-hash>/`; a rerun with the same effective configuration
//! reloads them instead of refitting (logged as a cache hit on stderr).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write as _};
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use earndist::bootstrap::{self, BootstrapPlan};
use earndist::counterfactual::{self, ConfigTuple, FitSettings, SupportIssue, YearModel};
use earndist::decomposition::{self, DecompRecord};
use earndist::dgp;
use earndist::dr::DrFit;
use earndist::model::{self, Observation, YearSample};
use earndist::structural::{LasfFit, LdsfFit};
use earndist::Error;

use crate::config::RunConfig;

pub const TERM_NAMES: [&str; 5] =
    ["participation", "hours", "composition", "wage_structure", "total"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Fit,
    Decompose,
    HoursDecompose,
    Bootstrap,
    Diagnostics,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Fit => "fit",
            CommandKind::Decompose => "decompose",
            CommandKind::HoursDecompose => "hours-decompose",
            CommandKind::Bootstrap => "bootstrap",
            CommandKind::Diagnostics => "diagnostics",
        }
    }

    fn needs_comparisons(self) -> bool {
        matches!(
            self,
            CommandKind::Decompose | CommandKind::HoursDecompose | CommandKind::Bootstrap
        )
    }
}

/// Flat run record; deliberately free of timestamps, host details and cache
/// state so that identical runs produce identical manifests.
#[derive(Serialize)]
struct Manifest<'r> {
    command: &'static str,
    config_hash: &'r str,
    master_seed: u64,
    simulation_seed: Option<u64>,
    estimation_seed: u64,
    bootstrap_seed: u64,
    bootstrap_reps: usize,
    bootstrap_level: f64,
    group: String,
    base_year: i32,
    comparison_years: &'r [i32],
    functionals: Vec<String>,
    outputs: &'r [String],
    warnings: &'r [String],
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    years: Vec<i32>,
}

#[derive(Serialize, Deserialize)]
struct YearStageMeta {
    ldsf_n_used: usize,
    lasf_coef: Vec<f64>,
    lasf_n_used: usize,
}

struct Loaded {
    years: BTreeMap<i32, Vec<Observation>>,
    dx: usize,
    dz: usize,
}

pub struct Runner {
    config: RunConfig,
    hash: String,
    strict_support: bool,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Runner {
    pub fn new(config: RunConfig, strict_support: bool) -> Runner {
        let hash = config.config_hash();
        Runner { config, hash, strict_support, outputs: Vec::new(), warnings: Vec::new() }
    }

    pub fn run(&mut self, command: CommandKind) -> anyhow::Result<()> {
        let out_dir = self.config.output.dir.clone();
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        // A fresh run invalidates any error record a failed one left behind.
        let stale = out_dir.join("error.json");
        if stale.exists() {
            let _ = fs::remove_file(stale);
        }
        let data = self.load_data()?;
        let (base, comparisons) = self.select_years(&data, command)?;
        match command {
            CommandKind::Simulate => self.run_simulate(&data)?,
            CommandKind::Fit => self.run_fit(&data, base, &comparisons)?,
            CommandKind::Decompose => self.run_decompose(&data, base, &comparisons)?,
            CommandKind::HoursDecompose => self.run_hours(&data, base, &comparisons)?,
            CommandKind::Bootstrap => self.run_bootstrap(&data, base, &comparisons)?,
            CommandKind::Diagnostics => self.run_diagnostics(&data, base, &comparisons)?,
        }
        self.write_manifest(command, base, &comparisons)
    }

    fn load_data(&mut self) -> anyhow::Result<Loaded> {
        if let Some(spec) = &self.config.dgp {
            let years = dgp::simulate(spec, self.config.simulation_seed())?;
            return Ok(Loaded { years, dx: spec.dx(), dz: spec.dz() });
        }
        let schema = self.config.schema()?;
        let input = self.config.input.as_ref().expect("validated source");
        let file = File::open(&input.path)
            .with_context(|| format!("opening input {}", input.path.display()))?;
        let result = model::ingest(BufReader::new(file), &schema)?;
        if !result.rejected.is_empty() {
            let first = &result.rejected[0];
            self.warnings.push(format!(
                "{} input row(s) rejected (first: line {}, {})",
                result.rejected.len(),
                first.line,
                first.reason
            ));
        }
        if result.years.is_empty() {
            bail!("input {} has no usable rows", input.path.display());
        }
        Ok(Loaded { years: result.years, dx: schema.x.len(), dz: schema.z.len() })
    }

    fn select_years(
        &self,
        data: &Loaded,
        command: CommandKind,
    ) -> anyhow::Result<(i32, Vec<i32>)> {
        let base = self.config.estimation.base_year;
        if !data.years.contains_key(&base) {
            return Err(Error::UnknownYear(base).into());
        }
        let explicit = &self.config.estimation.comparison_years;
        let comparisons: Vec<i32> = if explicit.is_empty() {
            data.years.keys().copied().filter(|y| *y != base).collect()
        } else {
            for y in explicit {
                if !data.years.contains_key(y) {
                    return Err(Error::UnknownYear(*y).into());
                }
            }
            explicit.clone()
        };
        if command.needs_comparisons() && comparisons.is_empty() {
            bail!("{} needs at least one comparison year", command.name());
        }
        Ok((base, comparisons))
    }

    fn settings(&self, data: &Loaded) -> anyhow::Result<FitSettings> {
        self.config.fit_settings(data.dx, data.dz)
    }

    fn build_samples(
        &self,
        data: &Loaded,
        settings: &FitSettings,
        years: &[i32],
    ) -> anyhow::Result<(BTreeMap<i32, YearSample>, Vec<String>)> {
        let mut samples = BTreeMap::new();
        let mut warnings = Vec::new();
        for &y in years {
            let obs = data.years.get(&y).cloned().ok_or(Error::UnknownYear(y))?;
            let sample = YearSample::new(y, obs, &settings.basis, settings.trim_quantile)?;
            for w in &sample.warnings {
                warnings.push(format!("year {y}: {w}"));
            }
            samples.insert(y, sample);
        }
        Ok((samples, warnings))
    }

    // ---- fit cache ----------------------------------------------------

    fn cache_dir(&self) -> PathBuf {
        self.config.output.dir.join("cache").join(&self.hash)
    }

    fn load_or_fit(
        &mut self,
        data: &Loaded,
        settings: &FitSettings,
        years: &[i32],
    ) -> anyhow::Result<BTreeMap<i32, YearModel>> {
        let dir = self.cache_dir();
        if dir.join("meta.json").is_file() {
            match self.try_load_cache(data, settings, years) {
                Ok(Some((models, warnings))) => {
                    eprintln!("cache hit for config {}: reusing fitted stages", self.hash);
                    self.warnings.extend(warnings);
                    return Ok(models);
                }
                Ok(None) => {}
                Err(e) => {
                    self.warnings.push(format!("ignoring unusable fit cache: {e:#}"));
                }
            }
        }
        eprintln!("cache miss for config {}: fitting {} year(s)", self.hash, years.len());
        let (samples, warnings) = self.build_samples(data, settings, years)?;
        self.warnings.extend(warnings);
        let mut models = BTreeMap::new();
        for (y, sample) in samples {
            models.insert(y, counterfactual::fit_year(sample, settings)?);
        }
        if let Err(e) = self.store_cache(&models) {
            self.warnings.push(format!("fit cache not written: {e:#}"));
        }
        Ok(models)
    }

    /// Ok(None) when the cache does not cover the requested years.
    fn try_load_cache(
        &self,
        data: &Loaded,
        settings: &FitSettings,
        years: &[i32],
    ) -> anyhow::Result<Option<(BTreeMap<i32, YearModel>, Vec<String>)>> {
        let dir = self.cache_dir();
        let meta: CacheMeta =
            serde_json::from_reader(BufReader::new(File::open(dir.join("meta.json"))?))
                .context("cache meta.json")?;
        if years.iter().any(|y| !meta.years.contains(y)) {
            return Ok(None);
        }
        let (samples, warnings) = self.build_samples(data, settings, years)?;
        let mut models = BTreeMap::new();
        for (y, sample) in samples {
            let hours = DrFit::read_csv(BufReader::new(File::open(
                dir.join(format!("hours_{y}.csv")),
            )?))?
            .into_rearranged();
            let wage = DrFit::read_csv(BufReader::new(File::open(
                dir.join(format!("wage_{y}.csv")),
            )?))?
            .into_rearranged();
            let stage: YearStageMeta =
                serde_json::from_reader(BufReader::new(File::open(
                    dir.join(format!("meta_{y}.json")),
                )?))
                .with_context(|| format!("cache meta_{y}.json"))?;
            let ldsf = LdsfFit {
                fit: wage,
                m_terms: settings.basis.m_terms.clone(),
                n_used: stage.ldsf_n_used,
            };
            let lasf = LasfFit {
                coef: stage.lasf_coef,
                m_terms: settings.basis.m_terms.clone(),
                n_used: stage.lasf_n_used,
            };
            models.insert(y, counterfactual::assemble_year(sample, settings, hours, ldsf, lasf)?);
        }
        Ok(Some((models, warnings)))
    }

    fn store_cache(&self, models: &BTreeMap<i32, YearModel>) -> anyhow::Result<()> {
        let dir = self.cache_dir();
        fs::create_dir_all(&dir)?;
        for (y, m) in models {
            m.hours_fit
                .write_csv(BufWriter::new(File::create(dir.join(format!("hours_{y}.csv")))?))?;
            m.ldsf
                .fit
                .write_csv(BufWriter::new(File::create(dir.join(format!("wage_{y}.csv")))?))?;
            let stage = YearStageMeta {
                ldsf_n_used: m.ldsf.n_used,
                lasf_coef: m.lasf.coef.clone(),
                lasf_n_used: m.lasf.n_used,
            };
            serde_json::to_writer(
                BufWriter::new(File::create(dir.join(format!("meta_{y}.json")))?),
                &stage,
            )?;
        }
        // The completeness marker goes last so interrupted writes are never
        // mistaken for a valid cache.
        let meta = CacheMeta { years: models.keys().copied().collect() };
        serde_json::to_writer(
            BufWriter::new(File::create(dir.join("meta.json"))?),
            &meta,
        )?;
        Ok(())
    }

    // ---- support ------------------------------------------------------

    /// Runs the overlap check for every configuration in the decomposition
    /// chains, records warnings and errors out under --strict-support.
    fn support_report(
        &mut self,
        models: &BTreeMap<i32, YearModel>,
        base: i32,
        comparisons: &[i32],
        condition: Option<&str>,
    ) -> anyhow::Result<Vec<(ConfigTuple, SupportIssue)>> {
        let mut configs = BTreeSet::new();
        for &c in comparisons {
            for cfg in decomposition::chain_configs(base, c) {
                configs.insert(cfg);
            }
        }
        let mut found = Vec::new();
        for cfg in configs {
            for issue in counterfactual::check_support(models, cfg)? {
                if condition.is_none_or(|c| issue.condition == c) {
                    found.push((cfg, issue));
                }
            }
        }
        for (cfg, issue) in &found {
            self.warnings.push(format!(
                "support: config {} misses {} cell {} with mass {:.4}",
                cfg.slug(),
                issue.condition,
                issue.cell,
                issue.mass
            ));
        }
        if self.strict_support && !found.is_empty() {
            let (cfg, first) = &found[0];
            return Err(Error::SupportViolation {
                config: cfg.slug(),
                detail: format!(
                    "{} overlap violation(s); first: {} cell {} with mass {:.4}",
                    found.len(),
                    first.condition,
                    first.cell,
                    first.mass
                ),
            }
            .into());
        }
        Ok(found)
    }

    // ---- subcommands --------------------------------------------------

    fn run_simulate(&mut self, data: &Loaded) -> anyhow::Result<()> {
        if self.config.dgp.is_none() {
            bail!("simulate needs a [dgp] data source");
        }
        let path = self.config.output.dir.join("simulated.csv");
        model::write_csv(
            BufWriter::new(File::create(&path)?),
            &data.years,
            data.dx,
            data.dz,
        )?;
        self.outputs.push("simulated.csv".into());
        Ok(())
    }

    fn run_fit(&mut self, data: &Loaded, base: i32, comparisons: &[i32]) -> anyhow::Result<()> {
        let settings = self.settings(data)?;
        let years = years_with_base(base, comparisons);
        let models = self.load_or_fit(data, &settings, &years)?;
        let mut w = self.create_csv("fit_summary.csv")?;
        w.write_record([
            "year",
            "rows",
            "total_weight",
            "employment_rate",
            "trim_cap",
            "hours_thresholds",
            "hours_degenerate",
            "wage_rows",
            "wage_thresholds",
            "wage_degenerate",
        ])?;
        for (y, m) in &models {
            let weights = m.sample.weights();
            let total: f64 = earndist::stats::pairwise_sum(&weights);
            let workers: f64 = m
                .sample
                .obs
                .iter()
                .filter(|o| o.is_worker())
                .map(|o| o.weight)
                .sum();
            let degenerate = |fit: &DrFit| fit.status.iter().filter(|s| s.is_degenerate()).count();
            w.write_record([
                y.to_string(),
                m.sample.n().to_string(),
                fmt(total),
                fmt(workers / total),
                fmt(m.sample.trim_cap),
                m.hours_fit.len().to_string(),
                degenerate(&m.hours_fit).to_string(),
                m.ldsf.n_used.to_string(),
                m.ldsf.fit.len().to_string(),
                degenerate(&m.ldsf.fit).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn run_decompose(
        &mut self,
        data: &Loaded,
        base: i32,
        comparisons: &[i32],
    ) -> anyhow::Result<()> {
        let settings = self.settings(data)?;
        let years = years_with_base(base, comparisons);
        let models = self.load_or_fit(data, &settings, &years)?;
        let y_grid = self.y_grid(&models);
        self.support_report(&models, base, comparisons, None)?;
        let functionals = self.config.functionals();
        let allow_zero = self.config.estimation.allow_zero_quantiles;
        let mut series: BTreeMap<i32, Vec<DecompRecord>> = BTreeMap::new();
        for &comp in comparisons {
            series.insert(
                comp,
                decomposition::decompose_series(
                    &models,
                    base,
                    comp,
                    &functionals,
                    &y_grid,
                    allow_zero,
                )?,
            );
        }
        let group = self.config.group_label();
        for (fi, f) in functionals.iter().enumerate() {
            let name = format!("series_{group}_{}.csv", f.slug());
            let mut w = self.create_csv(&name)?;
            let mut header = vec![
                "base_year".to_string(),
                "comparison_year".to_string(),
                "base_value".to_string(),
                "comparison_value".to_string(),
            ];
            header.extend(TERM_NAMES.map(str::to_string));
            header.extend(TERM_NAMES.map(|t| format!("rel_{t}")));
            w.write_record(&header)?;
            for &comp in comparisons {
                let r = &series[&comp][fi];
                let mut rec = vec![
                    r.base_year.to_string(),
                    r.comparison_year.to_string(),
                    fmt(r.base_value),
                    fmt(r.comparison_value),
                ];
                rec.extend(r.absolute.as_array().map(fmt));
                match &r.relative {
                    Some(rel) => rec.extend(rel.as_array().map(fmt)),
                    None => rec.extend(std::iter::repeat_n(String::new(), 5)),
                }
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        if self.config.output.cdf_dumps {
            let mut configs = BTreeSet::new();
            for &comp in comparisons {
                configs.extend(decomposition::chain_configs(base, comp));
            }
            for cfg in configs {
                let cdf = counterfactual::counterfactual_cdf(&models, cfg, &y_grid)?;
                let name = format!("cdf_{}.csv", cfg.slug());
                let mut w = self.create_csv(&name)?;
                w.write_record(["y", "cdf"])?;
                for (y, v) in cdf.y_grid.iter().zip(&cdf.values) {
                    w.write_record([fmt(*y), fmt(*v)])?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }

    fn run_hours(
        &mut self,
        data: &Loaded,
        base: i32,
        comparisons: &[i32],
    ) -> anyhow::Result<()> {
        let settings = self.settings(data)?;
        let years = years_with_base(base, comparisons);
        let models = self.load_or_fit(data, &settings, &years)?;
        self.support_report(&models, base, comparisons, Some("hours"))?;
        let functionals = self.config.functionals();
        let allow_zero = self.config.estimation.allow_zero_quantiles;
        let group = self.config.group_label();
        let mut series = BTreeMap::new();
        for &comp in comparisons {
            series.insert(
                comp,
                decomposition::decompose_hours(&models, base, comp, &functionals, allow_zero)?,
            );
        }
        for (fi, f) in functionals.iter().enumerate() {
            let name = format!("hours_series_{group}_{}.csv", f.slug());
            let mut w = self.create_csv(&name)?;
            w.write_record([
                "base_year",
                "comparison_year",
                "base_value",
                "comparison_value",
                "structure",
                "composition",
                "total",
                "rel_structure",
                "rel_composition",
            ])?;
            for &comp in comparisons {
                let r = &series[&comp][fi];
                w.write_record([
                    r.base_year.to_string(),
                    r.comparison_year.to_string(),
                    fmt(r.base_value),
                    fmt(r.comparison_value),
                    fmt(r.structure),
                    fmt(r.composition),
                    fmt(r.total),
                    fmt_opt(r.relative_structure),
                    fmt_opt(r.relative_composition),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn run_bootstrap(
        &mut self,
        data: &Loaded,
        base: i32,
        comparisons: &[i32],
    ) -> anyhow::Result<()> {
        let settings = self.settings(data)?;
        let years = years_with_base(base, comparisons);
        let models = self.load_or_fit(data, &settings, &years)?;
        let y_grid = self.y_grid(&models);
        self.support_report(&models, base, comparisons, None)?;
        drop(models);
        let functionals = self.config.functionals();
        let allow_zero = self.config.estimation.allow_zero_quantiles;
        let plan = BootstrapPlan {
            reps: self.config.bootstrap.reps,
            level: self.config.bootstrap.level,
            seed: self.config.bootstrap_seed(),
        };
        let mut results = BTreeMap::new();
        for &comp in comparisons {
            let mut pair = BTreeMap::new();
            for y in [base, comp] {
                pair.insert(y, data.years[&y].clone());
            }
            let result = bootstrap::bootstrap_decomposition(
                &pair,
                &settings,
                base,
                comp,
                &functionals,
                &y_grid,
                allow_zero,
                &plan,
            )?;
            for w in &result.warnings {
                self.warnings.push(format!("bootstrap {base}->{comp}: {w}"));
            }
            results.insert(comp, result);
        }
        let group = self.config.group_label();
        for (fi, f) in functionals.iter().enumerate() {
            let name = format!("bootstrap_{group}_{}.csv", f.slug());
            let mut w = self.create_csv(&name)?;
            w.write_record([
                "comparison_year",
                "term",
                "point",
                "lower",
                "upper",
                "rel_point",
                "rel_lower",
                "rel_upper",
            ])?;
            for &comp in comparisons {
                let record = &results[&comp].records[fi];
                let point = record.point.absolute.as_array();
                let lower = record.absolute_lower.as_array();
                let upper = record.absolute_upper.as_array();
                let rel_point = record.point.relative.map(|t| t.as_array());
                let rel_lower = record.relative_lower.map(|t| t.as_array());
                let rel_upper = record.relative_upper.map(|t| t.as_array());
                for (ti, term) in TERM_NAMES.iter().enumerate() {
                    w.write_record([
                        comp.to_string(),
                        (*term).to_string(),
                        fmt(point[ti]),
                        fmt(lower[ti]),
                        fmt(upper[ti]),
                        fmt_opt(rel_point.map(|a| a[ti])),
                        fmt_opt(rel_lower.map(|a| a[ti])),
                        fmt_opt(rel_upper.map(|a| a[ti])),
                    ])?;
                }
            }
            w.flush()?;
        }
        Ok(())
    }

    fn run_diagnostics(
        &mut self,
        data: &Loaded,
        base: i32,
        comparisons: &[i32],
    ) -> anyhow::Result<()> {
        let settings = self.settings(data)?;
        let years = years_with_base(base, comparisons);
        let models = self.load_or_fit(data, &settings, &years)?;

        let mut w = self.create_csv("diagnostics.csv")?;
        w.write_record([
            "year",
            "total_weight",
            "employment_rate",
            "workers_weight",
            "var_log_earnings",
            "var_log_wage",
            "var_log_hours",
            "cov_log_wage_hours",
            "earnings_identity_residual",
            "var_log_weekly_hours",
            "var_log_weeks",
            "cov_log_weekly_weeks",
            "hours_identity_residual",
        ])?;
        let mut variance_missing = Vec::new();
        for (y, m) in &models {
            let weights = m.sample.weights();
            let total = earndist::stats::pairwise_sum(&weights);
            let workers: f64 = m
                .sample
                .obs
                .iter()
                .filter(|o| o.is_worker())
                .map(|o| o.weight)
                .sum();
            let mut rec = vec![y.to_string(), fmt(total), fmt(workers / total)];
            match decomposition::variance_log_components(&m.sample) {
                Ok(v) => {
                    let earnings_residual = v.var_log_earnings
                        - v.var_log_wage
                        - v.var_log_hours
                        - 2.0 * v.cov_log_wage_hours;
                    let hours_residual = v.var_log_hours
                        - v.var_log_weekly_hours
                        - v.var_log_weeks
                        - 2.0 * v.cov_log_weekly_weeks;
                    rec.extend([
                        fmt(v.workers_weight),
                        fmt(v.var_log_earnings),
                        fmt(v.var_log_wage),
                        fmt(v.var_log_hours),
                        fmt(v.cov_log_wage_hours),
                        fmt(earnings_residual),
                        fmt(v.var_log_weekly_hours),
                        fmt(v.var_log_weeks),
                        fmt(v.cov_log_weekly_weeks),
                        fmt(hours_residual),
                    ]);
                }
                Err(Error::MissingComponents) => {
                    variance_missing.push(*y);
                    rec.extend(std::iter::repeat_n(String::new(), 10));
                }
                Err(e) => return Err(e.into()),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        if !variance_missing.is_empty() {
            self.warnings.push(format!(
                "variance components skipped for year(s) {variance_missing:?}: \
                 weekly hours/weeks not available for every worker"
            ));
        }

        let issues = self.support_report(&models, base, comparisons, None)?;
        let group = self.config.group_label();
        let name = format!("support_{group}.csv");
        let mut w = self.create_csv(&name)?;
        w.write_record(["config", "condition", "cell", "mass"])?;
        for (cfg, issue) in &issues {
            w.write_record([
                cfg.slug(),
                issue.condition.clone(),
                issue.cell.clone(),
                fmt(issue.mass),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    // ---- output plumbing ----------------------------------------------

    fn y_grid(&self, models: &BTreeMap<i32, YearModel>) -> Vec<f64> {
        let samples: Vec<&YearSample> = models.values().map(|m| &m.sample).collect();
        counterfactual::default_y_grid(&samples, self.config.estimation.y_points)
    }

    fn create_csv(&mut self, name: &str) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
        let path = self.config.output.dir.join(name);
        let file = File::create(&path)
            .with_context(|| format!("creating output {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(csv::Writer::from_writer(BufWriter::new(file)))
    }

    fn write_manifest(
        &mut self,
        command: CommandKind,
        base: i32,
        comparisons: &[i32],
    ) -> anyhow::Result<()> {
        let manifest = Manifest {
            command: command.name(),
            config_hash: &self.hash,
            master_seed: self.config.seed,
            simulation_seed: self.config.dgp.is_some().then(|| self.config.simulation_seed()),
            estimation_seed: self.config.estimation_seed(),
            bootstrap_seed: self.config.bootstrap_seed(),
            bootstrap_reps: self.config.bootstrap.reps,
            bootstrap_level: self.config.bootstrap.level,
            group: self.config.group_label(),
            base_year: base,
            comparison_years: comparisons,
            functionals: self.config.estimation.functionals.clone(),
            outputs: &self.outputs,
            warnings: &self.warnings,
        };
        let path = self.config.output.dir.join("manifest.json");
        let mut file = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut file, &manifest)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}

fn years_with_base(base: i32, comparisons: &[i32]) -> Vec<i32> {
    let mut years = vec![base];
    years.extend_from_slice(comparisons);
    years
}

/// Shortest round-trip decimal form; stable across runs and platforms.
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}
