//! Observation model and CSV ingestion.
//!
//! An observation is one person-year: annual earnings Y, annual hours H, the
//! hourly wage W (observed only for workers and equal to Y/H), covariates x,
//! excluded hours-shifters z, optional weekly-hours/weeks components of H and
//! a positive sampling weight. Workers are rows with H > 0; earnings are
//! identically zero for nonworkers.

use std::collections::BTreeMap;
use std::io;

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::stats::{self, Matrix};

/// Relative tolerance for the accounting identities Y = W*H and
/// H = weekly_hours * weeks.
pub const IDENTITY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub earnings: f64,
    pub hours: f64,
    /// Hourly wage; present exactly when hours > 0.
    pub wage: Option<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub weekly_hours: Option<f64>,
    pub weeks: Option<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn is_worker(&self) -> bool {
        self.hours > 0.0
    }

    /// Checks the model invariants; returns a reason string on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let finite = self.earnings.is_finite()
            && self.hours.is_finite()
            && self.weight.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.z.iter().all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value".into());
        }
        if self.earnings < 0.0 {
            return Err(format!("negative earnings {}", self.earnings));
        }
        if self.hours < 0.0 {
            return Err(format!("negative hours {}", self.hours));
        }
        if self.weight <= 0.0 {
            return Err(format!("nonpositive weight {}", self.weight));
        }
        if self.hours == 0.0 {
            if self.earnings != 0.0 {
                return Err(format!(
                    "positive earnings {} with zero hours",
                    self.earnings
                ));
            }
            if self.wage.is_some() {
                return Err("wage present with zero hours".into());
            }
        } else {
            let w = match self.wage {
                Some(w) => w,
                None => return Err("worker row without wage".into()),
            };
            if !(w > 0.0) || !w.is_finite() {
                return Err(format!("nonpositive wage {w} on worker row"));
            }
            let rel = (w * self.hours - self.earnings).abs()
                / self.earnings.abs().max(1.0);
            if rel > IDENTITY_RTOL {
                return Err(format!(
                    "earnings {} != wage*hours {} (relative gap {rel:.3e})",
                    self.earnings,
                    w * self.hours
                ));
            }
        }
        if let (Some(wh), Some(wk)) = (self.weekly_hours, self.weeks) {
            if wh <= 0.0 && self.hours > 0.0 {
                return Err("nonpositive weekly hours on worker row".into());
            }
            let rel = (wh * wk - self.hours).abs() / self.hours.abs().max(1.0);
            if rel > IDENTITY_RTOL {
                return Err(format!(
                    "hours {} != weekly_hours*weeks {} (relative gap {rel:.3e})",
                    self.hours,
                    wh * wk
                ));
            }
        }
        Ok(())
    }
}

/// One year of validated observations plus its hours-stage design matrix and
/// the trimming cap for the wage stage.
#[derive(Debug, Clone)]
pub struct YearSample {
    pub year: i32,
    pub obs: Vec<Observation>,
    pub basis_p: Matrix,
    /// Upper trimming cap for wage-stage estimation (hours above it are
    /// excluded from the wage fit).
    pub trim_cap: f64,
    pub warnings: Vec<String>,
}

/// Share of the positive-hours distribution kept below the default trim cap.
pub const DEFAULT_TRIM_QUANTILE: f64 = 0.99;

impl YearSample {
    /// Builds the design matrix and the trim cap (a weighted quantile of
    /// positive hours; `trim_quantile = 1` disables trimming).
    pub fn new(
        year: i32,
        obs: Vec<Observation>,
        spec: &BasisSpec,
        trim_quantile: f64,
    ) -> Result<YearSample> {
        if obs.is_empty() {
            return Err(Error::TooFewObservations {
                context: format!("year {year}"),
                needed: 1,
                got: 0,
            });
        }
        let dx = obs[0].x.len();
        let dz = obs[0].z.len();
        for o in &obs {
            if o.x.len() != dx || o.z.len() != dz {
                return Err(Error::Invalid(format!(
                    "year {year}: covariate vectors have inconsistent lengths"
                )));
            }
        }
        spec.validate(dx, dz)?;
        if !(0.0 < trim_quantile && trim_quantile <= 1.0) {
            return Err(Error::Invalid(format!(
                "trim quantile {trim_quantile} outside (0, 1]"
            )));
        }
        let basis_p = spec.p_matrix(&obs);
        let mut warnings = Vec::new();
        for (a, b) in basis_p.duplicate_columns() {
            let names = spec.p_names();
            warnings.push(format!(
                "year {year}: hours-basis columns {} and {} are identical",
                names[a], names[b]
            ));
        }
        let pos: Vec<f64> = obs.iter().filter(|o| o.is_worker()).map(|o| o.hours).collect();
        let pos_w: Vec<f64> = obs
            .iter()
            .filter(|o| o.is_worker())
            .map(|o| o.weight)
            .collect();
        if pos.is_empty() {
            return Err(Error::TooFewObservations {
                context: format!("year {year}: workers"),
                needed: 1,
                got: 0,
            });
        }
        let trim_cap = stats::weighted_quantiles(&pos, &pos_w, &[trim_quantile])[0];
        Ok(YearSample {
            year,
            obs,
            basis_p,
            trim_cap,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.weight).collect()
    }

    /// Weighted share of rows with positive hours.
    pub fn employment_rate(&self) -> f64 {
        let num: Vec<f64> = self
            .obs
            .iter()
            .map(|o| if o.is_worker() { o.weight } else { 0.0 })
            .collect();
        let w = self.weights();
        stats::pairwise_sum(&num) / stats::pairwise_sum(&w)
    }
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub year: String,
    pub earnings: String,
    pub hours: String,
    /// Wage column; derived as earnings/hours when absent.
    pub wage: Option<String>,
    pub x: Vec<String>,
    pub z: Vec<String>,
    pub weekly_hours: Option<String>,
    pub weeks: Option<String>,
    pub weight: Option<String>,
    /// Keep only rows whose `column` cell equals `value` (string match).
    pub group: Option<(String, String)>,
}

impl Schema {
    pub fn basic(x: Vec<String>, z: Vec<String>) -> Schema {
        Schema {
            year: "year".into(),
            earnings: "earnings".into(),
            hours: "hours".into(),
            wage: Some("wage".into()),
            x,
            z,
            weekly_hours: Some("weekly_hours".into()),
            weeks: Some("weeks".into()),
            weight: Some("weight".into()),
            group: None,
        }
    }
}

/// A rejected input row with its 1-based data line and the failed invariant.
#[derive(Debug, Clone)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

/// Ingest result: validated observations grouped by year, plus diagnostics
/// for rejected rows.
#[derive(Debug)]
pub struct IngestResult {
    pub years: BTreeMap<i32, Vec<Observation>>,
    pub rejected: Vec<RejectedRow>,
}

fn parse_cell(record: &csv::StringRecord, idx: usize, column: &str, line: usize) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>().map_err(|_| Error::NonNumeric {
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn parse_opt_cell(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    line: usize,
) -> Result<Option<f64>> {
    let raw = record.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::NonNumeric {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Reads a CSV stream into per-year observation lists.
///
/// Hard errors: missing mandatory columns, non-numeric cells, negative hours
/// or earnings. Rows violating the remaining model invariants (wage/earnings
/// inconsistency, nonpositive weights, ...) are collected into `rejected`
/// with their line numbers rather than aborting the whole file.
pub fn ingest<R: io::Read>(reader: R, schema: &Schema) -> Result<IngestResult> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let year_i = find(&schema.year)?;
    let earn_i = find(&schema.earnings)?;
    let hours_i = find(&schema.hours)?;
    let wage_i = schema.wage.as_deref().map(find).transpose()?;
    let x_i: Vec<usize> = schema.x.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let z_i: Vec<usize> = schema.z.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let wh_i = schema.weekly_hours.as_deref().map(find).transpose()?;
    let wk_i = schema.weeks.as_deref().map(find).transpose()?;
    let wt_i = schema.weight.as_deref().map(find).transpose()?;
    let grp_i = match &schema.group {
        Some((col, val)) => Some((find(col)?, val.clone())),
        None => None,
    };

    let mut years: BTreeMap<i32, Vec<Observation>> = BTreeMap::new();
    let mut rejected = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 1; // 1-based data line (after the header)
        if let Some((gi, ref gv)) = grp_i {
            if rec.get(gi).unwrap_or("").trim() != gv {
                continue;
            }
        }
        let year = parse_cell(&rec, year_i, &schema.year, line)? as i32;
        let earnings = parse_cell(&rec, earn_i, &schema.earnings, line)?;
        let hours = parse_cell(&rec, hours_i, &schema.hours, line)?;
        if earnings < 0.0 || hours < 0.0 {
            return Err(Error::Invalid(format!(
                "line {line}: negative {}",
                if earnings < 0.0 { "earnings" } else { "hours" }
            )));
        }
        let wage_cell = match wage_i {
            Some(i) => parse_opt_cell(&rec, i, schema.wage.as_deref().unwrap(), line)?,
            None => None,
        };
        let wage = if hours > 0.0 {
            Some(wage_cell.unwrap_or(earnings / hours))
        } else {
            wage_cell
        };
        let x = x_i
            .iter()
            .zip(&schema.x)
            .map(|(&i, c)| parse_cell(&rec, i, c, line))
            .collect::<Result<Vec<_>>>()?;
        let z = z_i
            .iter()
            .zip(&schema.z)
            .map(|(&i, c)| parse_cell(&rec, i, c, line))
            .collect::<Result<Vec<_>>>()?;
        let weekly_hours = match wh_i {
            Some(i) => parse_opt_cell(&rec, i, schema.weekly_hours.as_deref().unwrap(), line)?,
            None => None,
        };
        let weeks = match wk_i {
            Some(i) => parse_opt_cell(&rec, i, schema.weeks.as_deref().unwrap(), line)?,
            None => None,
        };
        let weight = match wt_i {
            Some(i) => parse_opt_cell(&rec, i, schema.weight.as_deref().unwrap(), line)?
                .unwrap_or(1.0),
            None => 1.0,
        };
        let o = Observation {
            earnings,
            hours,
            wage,
            x,
            z,
            weekly_hours,
            weeks,
            weight,
        };
        match o.validate() {
            Ok(()) => years.entry(year).or_default().push(o),
            Err(reason) => rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok(IngestResult { years, rejected })
}

/// Writes observations back out in the canonical column order. Numbers are
/// shortest-round-trip formatted, so write -> ingest -> write is a byte-level
/// fixed point.
pub fn write_csv<W: io::Write>(
    out: W,
    years: &BTreeMap<i32, Vec<Observation>>,
    dx: usize,
    dz: usize,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec![
        "year".to_string(),
        "earnings".to_string(),
        "hours".to_string(),
        "wage".to_string(),
        "weekly_hours".to_string(),
        "weeks".to_string(),
        "weight".to_string(),
    ];
    header.extend((0..dx).map(|i| format!("x{i}")));
    header.extend((0..dz).map(|i| format!("z{i}")));
    wtr.write_record(&header)?;
    let fmt = |v: f64| -> String { format!("{v}") };
    let fmt_opt = |v: Option<f64>| -> String { v.map(fmt).unwrap_or_default() };
    for (year, obs) in years {
        for o in obs {
            let mut rec = vec![
                year.to_string(),
                fmt(o.earnings),
                fmt(o.hours),
                fmt_opt(o.wage),
                fmt_opt(o.weekly_hours),
                fmt_opt(o.weeks),
                fmt(o.weight),
            ];
            rec.extend(o.x.iter().map(|&v| fmt(v)));
            rec.extend(o.z.iter().map(|&v| fmt(v)));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
