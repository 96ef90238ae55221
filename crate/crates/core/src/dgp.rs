//! Synthetic-data generator with closed-form targets.
//!
//! Each year draws (X, Z) from finite marginals, a rank U uniform on (0, 1),
//! latent hours k(X, Z, U) strictly increasing in U and censored at zero, and
//! a wage g(X, E) where E depends on U only through the chosen copula. Since
//! every ingredient is explicit, the same structures evaluated directly give
//! Monte Carlo oracles for counterfactual distributions, conditional wage
//! means at fixed rank, and employment rates — the reference values the
//! estimation pipeline is validated against.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::model::Observation;
use crate::rng;
use crate::stats;

/// Wages are floored at this value so multiplicative structures can never
/// emit a nonpositive wage; simulation and oracles apply the same floor.
pub const WAGE_FLOOR: f64 = 1e-6;

/// Wage structure g(x, e); `x` is the raw level, not the dummy encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GForm {
    /// scale * exp(a + b x + sigma e)
    Exp { a: f64, b: f64, sigma: f64, scale: f64 },
    /// scale * (a + b x + e_coef e), floored at a small positive wage
    Linear { a: f64, b: f64, e_coef: f64, scale: f64 },
    /// Constant wage c
    Constant { c: f64 },
}

impl GForm {
    pub fn eval(&self, x_raw: f64, e: f64) -> f64 {
        let w = match *self {
            GForm::Exp { a, b, sigma, scale } => scale * (a + b * x_raw + sigma * e).exp(),
            GForm::Linear { a, b, e_coef, scale } => scale * (a + b * x_raw + e_coef * e),
            GForm::Constant { c } => c,
        };
        w.max(WAGE_FLOOR)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GForm::Exp { a, b, sigma, scale } => {
                a.is_finite() && b.is_finite() && sigma >= 0.0 && scale > 0.0
            }
            GForm::Linear { a, b, e_coef, scale } => {
                a.is_finite() && b.is_finite() && e_coef.is_finite() && scale > 0.0
            }
            GForm::Constant { c } => c > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dgp(format!("invalid wage structure {self:?}")))
        }
    }
}

/// Optional hours floor that phases in linearly over a rank window: the
/// latent hours become max(base, h * min((u - u0) / (u1 - u0), 1)). Choosing
/// h at or below the base value at u1 keeps the result strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub u0: f64,
    pub u1: f64,
    pub h: f64,
}

/// Latent hours k(x, z, u) = scale * (c + d x + f z + s * norm_inv(u)), with
/// an optional phase-in ramp; strictly increasing in u (validated by probe).
///
/// `cut` pushes the latent value far below zero for ranks at or below it
/// while leaving every rank above untouched: a pure participation-cutoff
/// change that keeps the positive part of the hours structure identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KForm {
    pub scale: f64,
    pub c: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub f: f64,
    pub s: f64,
    #[serde(default)]
    pub cut: Option<f64>,
    #[serde(default)]
    pub ramp: Option<Ramp>,
}

impl KForm {
    /// Uncensored latent hours at rank u.
    pub fn eval(&self, x_raw: f64, z_raw: f64, u: f64) -> f64 {
        let base = self.scale * (self.c + self.d * x_raw + self.f * z_raw + self.s * stats::norm_inv(u));
        let raw = match self.ramp {
            None => base,
            Some(Ramp { u0, u1, h }) => base.max(h * (((u - u0) / (u1 - u0)).min(1.0))),
        };
        match self.cut {
            Some(cut) if u <= cut => raw - self.scale * 1e6,
            _ => raw,
        }
    }

    fn validate(&self, x_levels: &[f64], z_levels: &[f64]) -> Result<()> {
        if !(self.scale > 0.0 && self.s > 0.0) {
            return Err(Error::Dgp("hours structure needs scale > 0 and s > 0".into()));
        }
        if let Some(cut) = self.cut {
            if !(0.0 < cut && cut < 1.0) {
                return Err(Error::Dgp(format!(
                    "participation cut must lie strictly inside (0, 1), got {cut}"
                )));
            }
        }
        if let Some(Ramp { u0, u1, h }) = self.ramp {
            if !(0.0 <= u0 && u0 < u1 && u1 <= 1.0 && h > 0.0) {
                return Err(Error::Dgp(format!(
                    "hours ramp needs 0 <= u0 < u1 <= 1 and h > 0, got {:?}",
                    self.ramp
                )));
            }
        }
        // Numeric strict-monotonicity probe on a fine rank grid per cell.
        for &x in x_levels {
            for &z in z_levels {
                let mut prev = f64::NEG_INFINITY;
                for j in 1..1000 {
                    let u = j as f64 / 1000.0;
                    let k = self.eval(x, z, u);
                    if k <= prev {
                        return Err(Error::Dgp(format!(
                            "latent hours not strictly increasing in rank at \
                             x = {x}, z = {z}, u = {u}"
                        )));
                    }
                    prev = k;
                }
            }
        }
        Ok(())
    }
}

/// Marginal distribution of the wage shock E (used by the rank-preserving
/// and Gaussian couplings; the logistic-location coupling fixes the
/// conditional law directly and ignores it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum EMarginal {
    StdNormal,
    Uniform { lo: f64, hi: f64 },
}

impl EMarginal {
    fn quantile(&self, p: f64) -> f64 {
        match *self {
            EMarginal::StdNormal => stats::norm_inv(p),
            EMarginal::Uniform { lo, hi } => lo + (hi - lo) * p,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            EMarginal::StdNormal => Ok(()),
            EMarginal::Uniform { lo, hi } => {
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::Dgp("uniform shock marginal needs lo < hi".into()))
                }
            }
        }
    }
}

/// Dependence between the hours rank U and the wage shock E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Copula {
    /// Gaussian coupling with correlation rho on the latent normal scale.
    Gaussian { rho: f64 },
    /// E is the marginal quantile of U itself (perfect rank dependence).
    Comonotone,
    /// E | U = v follows Logistic(mu0 + mu1 v + mu2 v^2, scale); chosen so
    /// the wage-stage regression is exactly correctly specified under an
    /// exponential wage structure.
    LogisticLocation { mu0: f64, mu1: f64, mu2: f64, scale: f64 },
}

impl Copula {
    /// Draws E given U = u.
    pub fn draw(&self, marginal: EMarginal, u: f64, r: &mut ChaCha12Rng) -> f64 {
        match *self {
            Copula::Gaussian { rho } => {
                let xi = stats::norm_inv(rng::uniform_open(r));
                let latent = rho * stats::norm_inv(u) + (1.0 - rho * rho).sqrt() * xi;
                match marginal {
                    EMarginal::StdNormal => latent,
                    EMarginal::Uniform { .. } => marginal.quantile(stats::norm_cdf(latent)),
                }
            }
            Copula::Comonotone => marginal.quantile(u),
            Copula::LogisticLocation { mu0, mu1, mu2, scale } => {
                let t = rng::uniform_open(r);
                mu0 + mu1 * u + mu2 * u * u + scale * stats::logit(t)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Copula::Gaussian { rho } => {
                if rho.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Dgp(format!("gaussian coupling needs |rho| < 1, got {rho}")))
                }
            }
            Copula::Comonotone => Ok(()),
            Copula::LogisticLocation { scale, .. } => {
                if scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Dgp("logistic-location coupling needs scale > 0".into()))
                }
            }
        }
    }
}

/// Post-censoring bunching: each worker's hours are replaced by `atom` with
/// probability `prob`, independently of everything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bunching {
    pub atom: f64,
    pub prob: f64,
}

/// Full generating process for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDgp {
    pub year: i32,
    pub n: usize,
    /// Raw levels of X with sampling probabilities; the first level is the
    /// reference category, the rest are emitted as dummy columns.
    pub x_levels: Vec<f64>,
    pub x_probs: Vec<f64>,
    pub z_levels: Vec<f64>,
    pub z_probs: Vec<f64>,
    pub g: GForm,
    pub k: KForm,
    pub copula: Copula,
    pub e_marginal: EMarginal,
    #[serde(default)]
    pub bunching: Option<Bunching>,
}

fn validate_marginal(name: &str, levels: &[f64], probs: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.len() != probs.len() {
        return Err(Error::Dgp(format!(
            "{name} levels/probabilities must be non-empty and equal-length"
        )));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Dgp(format!("{name} levels must be distinct")));
    }
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Dgp(format!("{name} probabilities must be nonnegative")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Dgp(format!("{name} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl YearDgp {
    pub fn dx(&self) -> usize {
        self.x_levels.len() - 1
    }

    pub fn dz(&self) -> usize {
        self.z_levels.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Dgp(format!("year {}: n must be positive", self.year)));
        }
        self.g.validate()?;
        validate_marginal("x", &self.x_levels, &self.x_probs)?;
        validate_marginal("z", &self.z_levels, &self.z_probs)?;
        self.k.validate(&self.x_levels, &self.z_levels)?;
        self.copula.validate()?;
        self.e_marginal.validate()?;
        if let Some(Bunching { atom, prob }) = self.bunching {
            if !(atom > 0.0 && (0.0..=1.0).contains(&prob)) {
                return Err(Error::Dgp(format!(
                    "year {}: bunching needs atom > 0 and prob in [0, 1]",
                    self.year
                )));
            }
        }
        Ok(())
    }

    /// Dummy encoding of a raw level against this year's level list.
    fn encode(levels: &[f64], raw: f64) -> Vec<f64> {
        levels[1..]
            .iter()
            .map(|&l| if raw == l { 1.0 } else { 0.0 })
            .collect()
    }
}

fn draw_level(levels: &[f64], probs: &[f64], r: &mut ChaCha12Rng) -> f64 {
    let u: f64 = r.gen();
    let mut acc = 0.0;
    for (l, p) in levels.iter().zip(probs) {
        acc += p;
        if u < acc {
            return *l;
        }
    }
    *levels.last().unwrap()
}

/// Weeks-worked levels used to split annual hours multiplicatively into
/// weekly hours and weeks; drawn uniformly, independent of everything else.
const WEEKS_LEVELS: [f64; 4] = [46.0, 48.0, 50.0, 52.0];

/// Latent draws retained alongside the observations for validation.
#[derive(Debug, Clone, Default)]
pub struct Latents {
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub bunched: Vec<bool>,
}

/// A multi-year generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub years: Vec<YearDgp>,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.years.is_empty() {
            return Err(Error::Dgp("no years specified".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for y in &self.years {
            if !seen.insert(y.year) {
                return Err(Error::Dgp(format!("duplicate year {}", y.year)));
            }
            y.validate()?;
        }
        let dx = self.years[0].dx();
        let dz = self.years[0].dz();
        if self.years.iter().any(|y| y.dx() != dx || y.dz() != dz) {
            return Err(Error::Dgp(
                "all years must share the same covariate dimensions".into(),
            ));
        }
        Ok(())
    }

    pub fn year(&self, year: i32) -> Result<&YearDgp> {
        self.years
            .iter()
            .find(|y| y.year == year)
            .ok_or(Error::UnknownYear(year))
    }

    pub fn dx(&self) -> usize {
        self.years[0].dx()
    }

    pub fn dz(&self) -> usize {
        self.years[0].dz()
    }
}

fn simulate_year(dgp: &YearDgp, seed: u64) -> (Vec<Observation>, Latents) {
    let year_tag = dgp.year as i64 as u64;
    let n = dgp.n;
    let n_chunks = n.div_ceil(exec::CHUNK);
    let chunks = exec::map_collect(n_chunks, |c| {
        let lo = c * exec::CHUNK;
        let hi = ((c + 1) * exec::CHUNK).min(n);
        let mut r = rng::stream(seed, &[year_tag, c as u64]);
        let mut obs = Vec::with_capacity(hi - lo);
        let mut lat = Latents::default();
        for _ in lo..hi {
            let x_raw = draw_level(&dgp.x_levels, &dgp.x_probs, &mut r);
            let z_raw = draw_level(&dgp.z_levels, &dgp.z_probs, &mut r);
            let u = rng::uniform_open(&mut r);
            let e = dgp.copula.draw(dgp.e_marginal, u, &mut r);
            let bunch_coin: f64 = r.gen();
            let weeks_pick = (r.gen::<f64>() * WEEKS_LEVELS.len() as f64) as usize;
            let mut hours = dgp.k.eval(x_raw, z_raw, u).max(0.0);
            let mut bunched = false;
            if hours > 0.0 {
                if let Some(Bunching { atom, prob }) = dgp.bunching {
                    if bunch_coin < prob {
                        hours = atom;
                        bunched = true;
                    }
                }
            }
            let x = YearDgp::encode(&dgp.x_levels, x_raw);
            let z = YearDgp::encode(&dgp.z_levels, z_raw);
            let o = if hours > 0.0 {
                let wage = dgp.g.eval(x_raw, e);
                let weeks = WEEKS_LEVELS[weeks_pick.min(WEEKS_LEVELS.len() - 1)];
                Observation {
                    earnings: wage * hours,
                    hours,
                    wage: Some(wage),
                    x,
                    z,
                    weekly_hours: Some(hours / weeks),
                    weeks: Some(weeks),
                    weight: 1.0,
                }
            } else {
                Observation {
                    earnings: 0.0,
                    hours: 0.0,
                    wage: None,
                    x,
                    z,
                    weekly_hours: None,
                    weeks: None,
                    weight: 1.0,
                }
            };
            obs.push(o);
            lat.u.push(u);
            lat.e.push(e);
            lat.bunched.push(bunched);
        }
        (obs, lat)
    });
    let mut obs = Vec::with_capacity(n);
    let mut lat = Latents::default();
    for (o, l) in chunks {
        obs.extend(o);
        lat.u.extend(l.u);
        lat.e.extend(l.e);
        lat.bunched.extend(l.bunched);
    }
    (obs, lat)
}

/// Simulates every year of the spec; deterministic in `seed` and invariant
/// to the number of worker threads (chunked per-row streams).
pub fn simulate(spec: &DgpSpec, seed: u64) -> Result<BTreeMap<i32, Vec<Observation>>> {
    spec.validate()?;
    let mut out = BTreeMap::new();
    for y in &spec.years {
        let (obs, _) = simulate_year(y, seed);
        out.insert(y.year, obs);
    }
    Ok(out)
}

/// Like [`simulate`], but also returns the latent draws per year.
pub fn simulate_with_latents(
    spec: &DgpSpec,
    seed: u64,
) -> Result<BTreeMap<i32, (Vec<Observation>, Latents)>> {
    spec.validate()?;
    let mut out = BTreeMap::new();
    for y in &spec.years {
        out.insert(y.year, simulate_year(y, seed));
    }
    Ok(out)
}

/// Employment rate implied by a year's structure: the probability that the
/// latent hours are positive, found by bisection cell by cell.
pub fn oracle_employment_rate(dgp: &YearDgp) -> f64 {
    let mut rate = 0.0;
    for (i, &x) in dgp.x_levels.iter().enumerate() {
        for (j, &z) in dgp.z_levels.iter().enumerate() {
            let p_cell = dgp.x_probs[i] * dgp.z_probs[j];
            let eps = 1e-9;
            let cell_rate = if dgp.k.eval(x, z, eps) > 0.0 {
                1.0
            } else if dgp.k.eval(x, z, 1.0 - eps) <= 0.0 {
                0.0
            } else {
                let mut lo = eps;
                let mut hi = 1.0 - eps;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if dgp.k.eval(x, z, mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                1.0 - 0.5 * (lo + hi)
            };
            rate += p_cell * cell_rate;
        }
    }
    rate
}

/// Monte Carlo conditional wage mean at fixed rank v.
pub fn oracle_wage_mean(dgp: &YearDgp, x_raw: f64, v: f64, draws: usize, seed: u64) -> f64 {
    let sums = exec::accumulate(draws, 1, |i, acc| {
        let mut r = rng::stream(seed, &[i as u64]);
        let e = dgp.copula.draw(dgp.e_marginal, v, &mut r);
        acc[0] += dgp.g.eval(x_raw, e);
    });
    sums[0] / draws as f64
}

/// Monte Carlo counterfactual earnings CDF on `y_grid` for the component
/// years (q, r, s, p) = (participation, hours, composition, wage structure):
/// covariates from year s, participation decided by year q's hours structure,
/// hours (and bunching) from year r, wages from year p's structure and
/// rank-conditional shock law, all at a common rank draw.
pub fn oracle_counterfactual_cdf(
    spec: &DgpSpec,
    q: i32,
    r: i32,
    s: i32,
    p: i32,
    y_grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let yq = spec.year(q)?;
    let yr = spec.year(r)?;
    let ys = spec.year(s)?;
    let yp = spec.year(p)?;
    let m = y_grid.len();
    let buckets = exec::accumulate(draws, m + 1, |i, acc| {
        let mut rr = rng::stream(seed, &[i as u64]);
        let x_raw = draw_level(&ys.x_levels, &ys.x_probs, &mut rr);
        let z_raw = draw_level(&ys.z_levels, &ys.z_probs, &mut rr);
        let u = rng::uniform_open(&mut rr);
        let e = yp.copula.draw(yp.e_marginal, u, &mut rr);
        let bunch_coin: f64 = rr.gen();
        let participates = yq.k.eval(x_raw, z_raw, u) > 0.0;
        let mut hours = yr.k.eval(x_raw, z_raw, u).max(0.0);
        if hours > 0.0 {
            if let Some(Bunching { atom, prob }) = yr.bunching {
                if bunch_coin < prob {
                    hours = atom;
                }
            }
        }
        let y = if participates {
            yp.g.eval(x_raw, e) * hours
        } else {
            0.0
        };
        let idx = y_grid.partition_point(|&g| g < y);
        acc[idx] += 1.0;
    });
    let mut cdf = Vec::with_capacity(m);
    let mut cum = 0.0;
    for k in 0..m {
        cum += buckets[k];
        cdf.push(cum / draws as f64);
    }
    Ok(cdf)
}
