//! Regressor bases for the two estimation stages.
//!
//! The hours stage regresses on transformations of (x, z); the wage stage on
//! transformations of (x, v) where v is the estimated control function — the
//! instruments z are excluded there by construction. Column order is fixed
//! (constant, raw terms, squares, interactions) so fitted coefficient dumps
//! are reproducible across runs.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Observation;
use crate::stats::Matrix;

/// One regressor in the hours-stage basis over (x, z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PTerm {
    Const,
    X(usize),
    Z(usize),
    XSq(usize),
    ZSq(usize),
    XX(usize, usize),
    XZ(usize, usize),
    ZZ(usize, usize),
}

/// One regressor in the wage-stage basis over (x, v).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MTerm {
    Const,
    X(usize),
    V,
    XSq(usize),
    VSq,
    XX(usize, usize),
    XV(usize),
}

impl PTerm {
    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            PTerm::Const => 1.0,
            PTerm::X(i) => x[i],
            PTerm::Z(i) => z[i],
            PTerm::XSq(i) => x[i] * x[i],
            PTerm::ZSq(i) => z[i] * z[i],
            PTerm::XX(i, j) => x[i] * x[j],
            PTerm::XZ(i, j) => x[i] * z[j],
            PTerm::ZZ(i, j) => z[i] * z[j],
        }
    }
}

impl MTerm {
    pub fn eval(&self, x: &[f64], v: f64) -> f64 {
        match *self {
            MTerm::Const => 1.0,
            MTerm::X(i) => x[i],
            MTerm::V => v,
            MTerm::XSq(i) => x[i] * x[i],
            MTerm::VSq => v * v,
            MTerm::XX(i, j) => x[i] * x[j],
            MTerm::XV(i) => x[i] * v,
        }
    }
}

impl fmt::Display for PTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PTerm::Const => write!(f, "1"),
            PTerm::X(i) => write!(f, "x{i}"),
            PTerm::Z(i) => write!(f, "z{i}"),
            PTerm::XSq(i) => write!(f, "x{i}^2"),
            PTerm::ZSq(i) => write!(f, "z{i}^2"),
            PTerm::XX(i, j) => write!(f, "x{i}*x{j}"),
            PTerm::XZ(i, j) => write!(f, "x{i}*z{j}"),
            PTerm::ZZ(i, j) => write!(f, "z{i}*z{j}"),
        }
    }
}

impl fmt::Display for MTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MTerm::Const => write!(f, "1"),
            MTerm::X(i) => write!(f, "x{i}"),
            MTerm::V => write!(f, "v"),
            MTerm::XSq(i) => write!(f, "x{i}^2"),
            MTerm::VSq => write!(f, "v^2"),
            MTerm::XX(i, j) => write!(f, "x{i}*x{j}"),
            MTerm::XV(i) => write!(f, "x{i}*v"),
        }
    }
}

fn split_factors(s: &str) -> Vec<&str> {
    s.split('*').map(str::trim).collect()
}

fn parse_var(tok: &str) -> Option<(char, usize, bool)> {
    // returns (family, index, squared)
    let (body, squared) = match tok.strip_suffix("^2") {
        Some(b) => (b.trim(), true),
        None => (tok, false),
    };
    if body == "v" {
        return Some(('v', 0, squared));
    }
    let (fam, idx) = body.split_at(1);
    let idx = idx.parse::<usize>().ok()?;
    match fam {
        "x" => Some(('x', idx, squared)),
        "z" => Some(('z', idx, squared)),
        _ => None,
    }
}

impl FromStr for PTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(PTerm::Const);
        }
        let bad = || Error::Invalid(format!("cannot parse hours-basis term `{s}`"));
        let factors = split_factors(s);
        match factors.as_slice() {
            [a] => match parse_var(a).ok_or_else(bad)? {
                ('x', i, false) => Ok(PTerm::X(i)),
                ('x', i, true) => Ok(PTerm::XSq(i)),
                ('z', i, false) => Ok(PTerm::Z(i)),
                ('z', i, true) => Ok(PTerm::ZSq(i)),
                _ => Err(bad()),
            },
            [a, b] => {
                let fa = parse_var(a).ok_or_else(bad)?;
                let fb = parse_var(b).ok_or_else(bad)?;
                match (fa, fb) {
                    (('x', i, false), ('x', j, false)) => Ok(PTerm::XX(i.min(j), i.max(j))),
                    (('x', i, false), ('z', j, false)) => Ok(PTerm::XZ(i, j)),
                    (('z', j, false), ('x', i, false)) => Ok(PTerm::XZ(i, j)),
                    (('z', i, false), ('z', j, false)) => Ok(PTerm::ZZ(i.min(j), i.max(j))),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }
}

impl FromStr for MTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(MTerm::Const);
        }
        let bad = || Error::Invalid(format!("cannot parse wage-basis term `{s}`"));
        let factors = split_factors(s);
        match factors.as_slice() {
            [a] => match parse_var(a).ok_or_else(bad)? {
                ('x', i, false) => Ok(MTerm::X(i)),
                ('x', i, true) => Ok(MTerm::XSq(i)),
                ('v', _, false) => Ok(MTerm::V),
                ('v', _, true) => Ok(MTerm::VSq),
                _ => Err(bad()),
            },
            [a, b] => {
                let fa = parse_var(a).ok_or_else(bad)?;
                let fb = parse_var(b).ok_or_else(bad)?;
                match (fa, fb) {
                    (('x', i, false), ('x', j, false)) => Ok(MTerm::XX(i.min(j), i.max(j))),
                    (('x', i, false), ('v', _, false)) => Ok(MTerm::XV(i)),
                    (('v', _, false), ('x', i, false)) => Ok(MTerm::XV(i)),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }
}

/// The shared basis specification. All years entering a counterfactual must
/// be fitted under one `BasisSpec`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub p_terms: Vec<PTerm>,
    pub m_terms: Vec<MTerm>,
}

impl BasisSpec {
    /// Default wage-stage terms: constant, each x, v, v-squared, and each x*v.
    pub fn default_m_terms(dx: usize) -> Vec<MTerm> {
        let mut m = vec![MTerm::Const];
        m.extend((0..dx).map(MTerm::X));
        m.push(MTerm::V);
        m.push(MTerm::VSq);
        m.extend((0..dx).map(MTerm::XV));
        m
    }

    /// Constant plus raw x and z columns.
    pub fn linear(dx: usize, dz: usize) -> Self {
        let mut p = vec![PTerm::Const];
        p.extend((0..dx).map(PTerm::X));
        p.extend((0..dz).map(PTerm::Z));
        BasisSpec {
            p_terms: p,
            m_terms: Self::default_m_terms(dx),
        }
    }

    /// Linear terms plus every x*z product. With dummy-coded discrete
    /// covariates this spans the saturated cell design.
    pub fn interacted(dx: usize, dz: usize) -> Self {
        let mut spec = Self::linear(dx, dz);
        for i in 0..dx {
            for j in 0..dz {
                spec.p_terms.push(PTerm::XZ(i, j));
            }
        }
        spec
    }

    /// Interacted terms plus squares of each x and z column.
    pub fn quadratic(dx: usize, dz: usize) -> Self {
        let mut p = vec![PTerm::Const];
        p.extend((0..dx).map(PTerm::X));
        p.extend((0..dz).map(PTerm::Z));
        p.extend((0..dx).map(PTerm::XSq));
        p.extend((0..dz).map(PTerm::ZSq));
        let mut spec = Self::linear(dx, dz);
        spec.p_terms = p;
        for i in 0..dx {
            for j in 0..dz {
                spec.p_terms.push(PTerm::XZ(i, j));
            }
        }
        spec
    }

    pub fn from_strings(p: &[String], m: &[String]) -> Result<Self> {
        let p_terms = p.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
        let m_terms = m.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
        Ok(BasisSpec { p_terms, m_terms })
    }

    /// Structural checks: constant first in both bases, indices in range,
    /// no repeated term, and the wage basis containing v and v-squared.
    pub fn validate(&self, dx: usize, dz: usize) -> Result<()> {
        if self.p_terms.first() != Some(&PTerm::Const) {
            return Err(Error::Invalid(
                "hours basis must start with the constant term".into(),
            ));
        }
        if self.m_terms.first() != Some(&MTerm::Const) {
            return Err(Error::Invalid(
                "wage basis must start with the constant term".into(),
            ));
        }
        if !self.m_terms.contains(&MTerm::V) || !self.m_terms.contains(&MTerm::VSq) {
            return Err(Error::Invalid(
                "wage basis must include v and v^2 control-function terms".into(),
            ));
        }
        for t in &self.p_terms {
            let ok = match *t {
                PTerm::Const => true,
                PTerm::X(i) | PTerm::XSq(i) => i < dx,
                PTerm::Z(i) | PTerm::ZSq(i) => i < dz,
                PTerm::XX(i, j) => i < dx && j < dx,
                PTerm::XZ(i, j) => i < dx && j < dz,
                PTerm::ZZ(i, j) => i < dz && j < dz,
            };
            if !ok {
                return Err(Error::Invalid(format!(
                    "hours-basis term {t} indexes a missing covariate column"
                )));
            }
        }
        for t in &self.m_terms {
            let ok = match *t {
                MTerm::Const | MTerm::V | MTerm::VSq => true,
                MTerm::X(i) | MTerm::XSq(i) | MTerm::XV(i) => i < dx,
                MTerm::XX(i, j) => i < dx && j < dx,
            };
            if !ok {
                return Err(Error::Invalid(format!(
                    "wage-basis term {t} indexes a missing covariate column"
                )));
            }
        }
        for (k, t) in self.p_terms.iter().enumerate() {
            if self.p_terms[..k].contains(t) {
                return Err(Error::Invalid(format!("repeated hours-basis term {t}")));
            }
        }
        for (k, t) in self.m_terms.iter().enumerate() {
            if self.m_terms[..k].contains(t) {
                return Err(Error::Invalid(format!("repeated wage-basis term {t}")));
            }
        }
        Ok(())
    }

    pub fn p_len(&self) -> usize {
        self.p_terms.len()
    }

    pub fn m_len(&self) -> usize {
        self.m_terms.len()
    }

    pub fn p_names(&self) -> Vec<String> {
        self.p_terms.iter().map(|t| t.to_string()).collect()
    }

    pub fn m_names(&self) -> Vec<String> {
        self.m_terms.iter().map(|t| t.to_string()).collect()
    }

    /// Hours-stage design matrix over (x, z).
    pub fn p_matrix(&self, obs: &[Observation]) -> Matrix {
        let d = self.p_len();
        let mut m = Matrix::zeros(obs.len(), d);
        for (i, o) in obs.iter().enumerate() {
            let row = m.row_mut(i);
            for (k, t) in self.p_terms.iter().enumerate() {
                row[k] = t.eval(&o.x, &o.z);
            }
        }
        m
    }

    /// Wage-stage design matrix over (x, v) for given control-function values.
    pub fn m_matrix(&self, obs: &[Observation], v: &[f64]) -> Matrix {
        assert_eq!(obs.len(), v.len());
        let d = self.m_len();
        let mut m = Matrix::zeros(obs.len(), d);
        for (i, o) in obs.iter().enumerate() {
            let row = m.row_mut(i);
            for (k, t) in self.m_terms.iter().enumerate() {
                row[k] = t.eval(&o.x, v[i]);
            }
        }
        m
    }

    /// Single wage-stage design row.
    pub fn m_row(&self, x: &[f64], v: f64, out: &mut [f64]) {
        for (k, t) in self.m_terms.iter().enumerate() {
            out[k] = t.eval(x, v);
        }
    }
}
