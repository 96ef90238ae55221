//! Run configuration: a single TOML file describing the data source (CSV or
//! synthetic generator), estimation settings, bootstrap plan and outputs.
//!
//! One master seed drives everything; the simulation, estimation
//! (control-function) and bootstrap seeds are derived from it with fixed
//! tags, so two runs with equal effective configuration are identical.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use earndist::basis::BasisSpec;
use earndist::control::CfMode;
use earndist::counterfactual::FitSettings;
use earndist::decomposition::Functional;
use earndist::dgp::DgpSpec;
use earndist::model::Schema;
use earndist::rng;

/// Top-level configuration. Every omitted optional field takes the default
/// shown by `--print-config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; all other randomness is derived from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgp: Option<DgpSpec>,
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// CSV data source and column mapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(default = "default_year_column")]
    pub year: String,
    #[serde(default = "default_earnings_column")]
    pub earnings: String,
    #[serde(default = "default_hours_column")]
    pub hours: String,
    /// Hourly wage column; derived as earnings/hours when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wage: Option<String>,
    /// Covariate columns entering the outcome model.
    #[serde(default)]
    pub x: Vec<String>,
    /// Excluded columns shifting hours but not wages.
    #[serde(default)]
    pub z: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weekly_hours: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weeks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    /// Keep only rows whose `group_column` cell equals `group_value`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_value: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub base_year: i32,
    /// Years compared against the base; empty means every other year,
    /// ascending.
    #[serde(default)]
    pub comparison_years: Vec<i32>,
    /// Basis preset: "linear", "interacted" or "quadratic". Ignored when
    /// explicit term lists are given.
    #[serde(default = "default_basis")]
    pub basis: String,
    /// Explicit participation-stage terms (overrides the preset together
    /// with `m_terms`), e.g. ["1", "x0", "z0", "x0*z0"].
    #[serde(default)]
    pub p_terms: Vec<String>,
    /// Explicit wage-stage terms in covariates and the resolved rank v,
    /// e.g. ["1", "x0", "v", "v^2", "x0*v"].
    #[serde(default)]
    pub m_terms: Vec<String>,
    #[serde(default = "default_trim_quantile")]
    pub trim_quantile: f64,
    #[serde(default = "default_hours_points")]
    pub hours_points: usize,
    #[serde(default = "default_wage_points")]
    pub wage_points: usize,
    /// Number of earnings-grid quantiles for counterfactual CDFs.
    #[serde(default = "default_y_points")]
    pub y_points: usize,
    /// Resolution of censored ranks: "interval" (draw within the identified
    /// interval) or "point" (upper endpoint).
    #[serde(default = "default_cf_mode")]
    pub control_function: String,
    /// Let quantile functionals land on the zero atom instead of erroring.
    #[serde(default)]
    pub allow_zero_quantiles: bool,
    /// Functional slugs: "q<percent>", "mean", "ratio<hi>_<lo>".
    #[serde(default = "default_functionals")]
    pub functionals: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { reps: default_reps(), level: default_level() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    /// Also write one CSV per counterfactual configuration in the chain.
    #[serde(default = "default_true")]
    pub cdf_dumps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_output_dir(), cdf_dumps: true }
    }
}

fn default_year_column() -> String {
    "year".into()
}
fn default_earnings_column() -> String {
    "earnings".into()
}
fn default_hours_column() -> String {
    "hours".into()
}
fn default_basis() -> String {
    "linear".into()
}
fn default_trim_quantile() -> f64 {
    earndist::model::DEFAULT_TRIM_QUANTILE
}
fn default_hours_points() -> usize {
    earndist::dr::DEFAULT_MAX_THRESHOLDS
}
fn default_wage_points() -> usize {
    earndist::structural::DEFAULT_WAGE_POINTS
}
fn default_y_points() -> usize {
    earndist::counterfactual::DEFAULT_Y_POINTS
}
fn default_cf_mode() -> String {
    "interval".into()
}
fn default_functionals() -> Vec<String> {
    ["q10", "q25", "q50", "q75", "q90", "mean", "ratio90_10"]
        .map(String::from)
        .to_vec()
}
fn default_reps() -> usize {
    earndist::bootstrap::DEFAULT_REPS
}
fn default_level() -> f64 {
    earndist::bootstrap::DEFAULT_LEVEL
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading configuration {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing configuration {}", path.display()))?;
        Ok(config)
    }

    /// Checks everything checkable without touching the data.
    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.input, &self.dgp) {
            (Some(_), Some(_)) => {
                bail!("configuration has both [input] and [dgp]; choose one data source")
            }
            (None, None) => bail!("configuration needs a data source: [input] or [dgp]"),
            _ => {}
        }
        if let Some(dgp) = &self.dgp {
            dgp.validate().context("invalid [dgp]")?;
        }
        let est = &self.estimation;
        if !(0.0 < est.trim_quantile && est.trim_quantile <= 1.0) {
            bail!("estimation.trim_quantile {} outside (0, 1]", est.trim_quantile);
        }
        for (name, points) in [
            ("hours_points", est.hours_points),
            ("wage_points", est.wage_points),
            ("y_points", est.y_points),
        ] {
            if points < 2 {
                bail!("estimation.{name} must be at least 2");
            }
        }
        CfMode::from_str(&est.control_function).map_err(|e| anyhow::anyhow!(e))?;
        if est.p_terms.is_empty() != est.m_terms.is_empty() {
            bail!("estimation.p_terms and estimation.m_terms must be given together");
        }
        if est.p_terms.is_empty() && !matches!(est.basis.as_str(), "linear" | "interacted" | "quadratic")
        {
            bail!(
                "estimation.basis {:?} is not one of linear, interacted, quadratic",
                est.basis
            );
        }
        if est.functionals.is_empty() {
            bail!("estimation.functionals must not be empty");
        }
        let mut seen = BTreeSet::new();
        for f in &est.functionals {
            Functional::from_str(f).map_err(anyhow::Error::from)?;
            if !seen.insert(f.clone()) {
                bail!("duplicate functional {f:?}");
            }
        }
        if est.comparison_years.contains(&est.base_year) {
            bail!("estimation.comparison_years must not contain the base year");
        }
        let mut years = BTreeSet::new();
        for y in &est.comparison_years {
            if !years.insert(*y) {
                bail!("duplicate comparison year {y}");
            }
        }
        if !(0.0 < self.bootstrap.level && self.bootstrap.level < 1.0) {
            bail!("bootstrap.level {} outside (0, 1)", self.bootstrap.level);
        }
        if self.bootstrap.reps < 2 {
            bail!("bootstrap.reps must be at least 2");
        }
        Ok(())
    }

    /// Seed for drawing the synthetic data set.
    pub fn simulation_seed(&self) -> u64 {
        rng::mix(self.seed, &[1])
    }

    /// Seed for the estimation stage's rank draws.
    pub fn estimation_seed(&self) -> u64 {
        rng::mix(self.seed, &[2])
    }

    /// Seed for the bootstrap replication weights.
    pub fn bootstrap_seed(&self) -> u64 {
        rng::mix(self.seed, &[3])
    }

    /// Short label naming the analysed group in output file names.
    pub fn group_label(&self) -> String {
        let raw = self
            .input
            .as_ref()
            .and_then(|i| i.group_value.as_deref())
            .unwrap_or("all");
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
            .collect()
    }

    /// FNV-1a hash of the canonical serialized configuration, excluding the
    /// [output] section (moving the output directory or toggling dumps does
    /// not change any estimate). Used as the run identity and fit-cache key.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'c> {
            seed: u64,
            input: &'c Option<InputConfig>,
            dgp: &'c Option<DgpSpec>,
            estimation: &'c EstimationConfig,
            bootstrap: &'c BootstrapConfig,
        }
        let canonical = serde_json::to_string(&Hashed {
            seed: self.seed,
            input: &self.input,
            dgp: &self.dgp,
            estimation: &self.estimation,
            bootstrap: &self.bootstrap,
        })
        .expect("configuration serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canonical.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    /// The effective configuration with every default filled in, as TOML.
    pub fn print(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing effective configuration")
    }

    pub fn functionals(&self) -> Vec<Functional> {
        self.estimation
            .functionals
            .iter()
            .map(|s| s.parse().expect("validated functional"))
            .collect()
    }

    /// Builds the basis for the given covariate/instrument dimensions.
    pub fn basis(&self, dx: usize, dz: usize) -> anyhow::Result<BasisSpec> {
        let est = &self.estimation;
        let basis = if !est.p_terms.is_empty() {
            let spec = BasisSpec::from_strings(&est.p_terms, &est.m_terms)?;
            spec.validate(dx, dz)?;
            spec
        } else {
            match est.basis.as_str() {
                "linear" => BasisSpec::linear(dx, dz),
                "interacted" => BasisSpec::interacted(dx, dz),
                "quadratic" => BasisSpec::quadratic(dx, dz),
                other => bail!("unknown basis preset {other:?}"),
            }
        };
        Ok(basis)
    }

    pub fn fit_settings(&self, dx: usize, dz: usize) -> anyhow::Result<FitSettings> {
        let est = &self.estimation;
        Ok(FitSettings {
            basis: self.basis(dx, dz)?,
            trim_quantile: est.trim_quantile,
            hours_points: est.hours_points,
            wage_points: est.wage_points,
            cf_mode: CfMode::from_str(&est.control_function).map_err(|e| anyhow::anyhow!(e))?,
            seed: self.estimation_seed(),
        })
    }

    pub fn schema(&self) -> anyhow::Result<Schema> {
        let input = self
            .input
            .as_ref()
            .context("no [input] section; this data source is synthetic")?;
        let group = match (&input.group_column, &input.group_value) {
            (Some(c), Some(v)) => Some((c.clone(), v.clone())),
            (None, None) => None,
            _ => bail!("input.group_column and input.group_value must be given together"),
        };
        Ok(Schema {
            year: input.year.clone(),
            earnings: input.earnings.clone(),
            hours: input.hours.clone(),
            wage: input.wage.clone(),
            x: input.x.clone(),
            z: input.z.clone(),
            weekly_hours: input.weekly_hours.clone(),
            weeks: input.weeks.clone(),
            weight: input.weight.clone(),
            group,
        })
    }
}
