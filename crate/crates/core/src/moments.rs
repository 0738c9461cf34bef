//! Observed-data moments: CSV loading, partialling out baseline controls,
//! and the short/medium regression summary every other module consumes.
//!
//! Variables are ordered `(Y, X, W1...)` throughout. Baseline controls `W0`
//! are removed by projection before anything else happens, so downstream
//! code never sees them.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on R² comparisons (R² values live in [0, 1]).
pub const R2_TOL: f64 = 1e-9;

/// Column-role assignment for a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub outcome: String,
    pub treatment: String,
    #[serde(default)]
    pub w0: Vec<String>,
    pub w1: Vec<String>,
}

impl Roles {
    pub fn new(outcome: &str, treatment: &str, w0: &[&str], w1: &[&str]) -> Self {
        Roles {
            outcome: outcome.to_string(),
            treatment: treatment.to_string(),
            w0: w0.iter().map(|s| s.to_string()).collect(),
            w1: w1.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// All role columns in analysis order: Y, X, W0..., W1...
    pub fn columns(&self) -> Vec<&str> {
        let mut v = vec![self.outcome.as_str(), self.treatment.as_str()];
        v.extend(self.w0.iter().map(String::as_str));
        v.extend(self.w1.iter().map(String::as_str));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.is_empty() {
            return Err(Error::NoCalibrationControls);
        }
        let cols = self.columns();
        for (i, c) in cols.iter().enumerate() {
            if cols[..i].contains(c) {
                return Err(Error::DuplicateRole(c.to_string()));
            }
        }
        Ok(())
    }
}

/// Validated observations with disjoint column roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    roles: Roles,
    y: Vec<f64>,
    x: Vec<f64>,
    w0: Vec<Vec<f64>>,
    w1: Vec<Vec<f64>>,
}

impl Dataset {
    /// Build from column vectors. `w0` and `w1` are lists of columns.
    pub fn new(
        roles: Roles,
        y: Vec<f64>,
        x: Vec<f64>,
        w0: Vec<Vec<f64>>,
        w1: Vec<Vec<f64>>,
    ) -> Result<Self> {
        roles.validate()?;
        if w0.len() != roles.w0.len() || w1.len() != roles.w1.len() {
            return Err(Error::InvalidArgument(
                "column count does not match role list".into(),
            ));
        }
        let n = y.len();
        let names = roles.columns();
        let all = std::iter::once(&y)
            .chain(std::iter::once(&x))
            .chain(w0.iter())
            .chain(w1.iter());
        for (col, name) in all.zip(&names) {
            if col.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumeric {
                    column: name.to_string(),
                    row: row + 1,
                    value: col[row].to_string(),
                });
            }
        }
        let needed = names.len() + 2;
        if n < needed {
            return Err(Error::TooFewRows {
                rows: n,
                columns: names.len(),
                needed,
            });
        }
        Ok(Dataset {
            roles,
            y,
            x,
            w0,
            w1,
        })
    }

    /// Parse RFC-4180 CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R, roles: &Roles) -> Result<Self> {
        roles.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let index_of = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let names = roles.columns();
        let idx = names
            .iter()
            .map(|n| index_of(n))
            .collect::<Result<Vec<_>>>()?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (k, &j) in idx.iter().enumerate() {
                let cell = rec.get(j).unwrap_or("").trim();
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => cols[k].push(v),
                    _ => {
                        return Err(Error::NonNumeric {
                            column: names[k].to_string(),
                            row: r + 1,
                            value: cell.to_string(),
                        })
                    }
                }
            }
        }
        let k0 = roles.w0.len();
        let mut it = cols.into_iter();
        let y = it.next().unwrap_or_default();
        let x = it.next().unwrap_or_default();
        let w0: Vec<_> = it.by_ref().take(k0).collect();
        let w1: Vec<_> = it.collect();
        Dataset::new(roles.clone(), y, x, w0, w1)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn w0(&self) -> &[Vec<f64>] {
        &self.w0
    }

    pub fn w1(&self) -> &[Vec<f64>] {
        &self.w1
    }

    /// Write the role columns back out as CSV.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.roles.columns())?;
        let cols: Vec<&Vec<f64>> = std::iter::once(&self.y)
            .chain(std::iter::once(&self.x))
            .chain(self.w0.iter())
            .chain(self.w1.iter())
            .collect();
        for i in 0..self.n() {
            wtr.write_record(cols.iter().map(|c| format!("{:?}", c[i])))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>, roles: &Roles) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    Dataset::from_csv_reader(std::io::BufReader::new(f), roles)
}

/// Divisor used for sample covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Denominator {
    #[default]
    #[serde(rename = "n-1")]
    NMinusOne,
    #[serde(rename = "n")]
    N,
}

impl Denominator {
    pub fn divisor(self, n: usize) -> f64 {
        match self {
            Denominator::NMinusOne => (n - 1) as f64,
            Denominator::N => n as f64,
        }
    }
}

impl FromStr for Denominator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "n-1" => Ok(Denominator::NMinusOne),
            "n" => Ok(Denominator::N),
            other => Err(Error::InvalidArgument(format!(
                "covariance denominator must be `n` or `n-1`, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Denominator::NMinusOne => "n-1",
            Denominator::N => "n",
        })
    }
}

/// Covariance of `(Y, X, W1...)` after partialling out `(1, W0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    names: Vec<String>,
    cov: DMatrix<f64>,
    denominator: Denominator,
}

#[derive(Serialize, Deserialize)]
struct MomentJson {
    order: Vec<String>,
    cov: Vec<Vec<f64>>,
    denominator: Denominator,
}

impl MomentMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness.
    pub fn new(names: Vec<String>, cov: DMatrix<f64>, denominator: Denominator) -> Result<Self> {
        let d = cov.nrows();
        if cov.ncols() != d || names.len() != d {
            return Err(Error::InvalidMoments(format!(
                "{} names for a {}x{} matrix",
                names.len(),
                d,
                cov.ncols()
            )));
        }
        if d < 3 {
            return Err(Error::NoCalibrationControls);
        }
        if !cov.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMoments("non-finite entry".into()));
        }
        if linalg::asymmetry(&cov) > 1e-12 {
            return Err(Error::InvalidMoments("matrix is not symmetric".into()));
        }
        let cov = linalg::symmetrize(&cov);
        linalg::require_positive_definite(&cov, "Var(Y, X, W1)")?;
        Ok(MomentMatrix {
            names,
            cov,
            denominator,
        })
    }

    /// Convenience constructor with generated names `y, x, w1_1, ...`.
    pub fn from_cov(cov: DMatrix<f64>) -> Result<Self> {
        let k = cov.nrows().saturating_sub(2);
        let mut names = vec!["y".to_string(), "x".to_string()];
        names.extend((1..=k).map(|i| format!("w1_{i}")));
        MomentMatrix::new(names, cov, Denominator::NMinusOne)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn denominator(&self) -> Denominator {
        self.denominator
    }

    pub fn dim_w1(&self) -> usize {
        self.cov.nrows() - 2
    }

    /// Multiply every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        MomentMatrix::new(self.names.clone(), &self.cov * c, self.denominator)
    }

    pub fn to_json(&self) -> String {
        let j = MomentJson {
            order: self.names.clone(),
            cov: self
                .cov
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            denominator: self.denominator,
        };
        serde_json::to_string_pretty(&j).expect("moment matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: MomentJson = serde_json::from_str(s)?;
        let d = j.cov.len();
        if j.cov.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidMoments("cov is not square".into()));
        }
        let cov = DMatrix::from_fn(d, d, |i, k| j.cov[i][k]);
        MomentMatrix::new(j.order, cov, j.denominator)
    }
}

/// Covariance of the residuals of `(Y, X, W1)` after projecting each on
/// `(1, W0)`; the plain covariance when `W0` is empty.
pub fn partial_out_baseline(data: &Dataset, denominator: Denominator) -> Result<MomentMatrix> {
    let n = data.n();
    let k0 = data.w0.len();
    let k1 = data.w1.len();
    // order: Y, X, W1..., W0...
    let cols: Vec<&[f64]> = std::iter::once(data.y.as_slice())
        .chain(std::iter::once(data.x.as_slice()))
        .chain(data.w1.iter().map(Vec::as_slice))
        .chain(data.w0.iter().map(Vec::as_slice))
        .collect();
    let p = cols.len();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for (j, c) in cols.iter().enumerate() {
        let mean = c.iter().sum::<f64>() / n as f64;
        for (i, v) in c.iter().enumerate() {
            z[(i, j)] = v - mean;
        }
    }
    let s = z.tr_mul(&z) / denominator.divisor(n);
    let a = 2 + k1;
    let s_aa = s.view((0, 0), (a, a)).into_owned();
    let cov = if k0 == 0 {
        s_aa
    } else {
        let s_00 = s.view((a, a), (k0, k0)).into_owned();
        if !linalg::is_positive_definite(&s_00) {
            return Err(Error::Singular("Var(W0)".into()));
        }
        let s_a0 = s.view((0, a), (a, k0)).into_owned();
        let proj = linalg::solve_mat(&s_00, &s_a0.transpose(), "Var(W0)")?;
        linalg::symmetrize(&(s_aa - &s_a0 * proj))
    };
    let mut names = vec![data.roles.outcome.clone(), data.roles.treatment.clone()];
    names.extend(data.roles.w1.iter().cloned());
    MomentMatrix::new(names, cov, denominator)
}

/// Point-identified regression moments. `*_med` refers to the regression of
/// Y on (1, X, W1), `*_short` to Y on (1, X); `pi1` is the coefficient of
/// X on (1, W1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub beta_short: f64,
    pub beta_med: f64,
    pub gamma_med: Vec<f64>,
    pub pi1: Vec<f64>,
    pub r2_short: f64,
    pub r2_med: f64,
    pub var_y: f64,
    pub var_x: f64,
    /// var(X^{⊥W1})
    pub v_x_perp_w1: f64,
    /// var(gamma_med' W1)
    pub v_g: f64,
    /// cov(X, gamma_med' W1)
    pub c_g: f64,
    /// var(pi1' W1)
    pub v_pi: f64,
    pub var_w1: Vec<Vec<f64>>,
}

impl RegressionSummary {
    pub fn dim_w1(&self) -> usize {
        self.pi1.len()
    }

    pub fn var_w1_matrix(&self) -> DMatrix<f64> {
        let k = self.var_w1.len();
        DMatrix::from_fn(k, k, |i, j| self.var_w1[i][j])
    }

    /// var(v' W1) for a coefficient vector v.
    pub fn quad_w1(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, vi) in v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                s += vi * self.var_w1[i][j] * vj;
            }
        }
        s
    }

    /// Relative residuals of the four internal identities (c_g, v_g,
    /// v_x_perp_w1 and r2 ordering), each scaled to the natural unit of
    /// the quantity. Used by tests and the oracle suite.
    pub fn identity_residuals(&self) -> [f64; 4] {
        let dcoef = self.beta_short - self.beta_med;
        let sxy = (self.var_x * self.var_y).sqrt();
        let cg = (self.c_g - dcoef * self.var_x).abs() / sxy.max(self.c_g.abs());
        let vg_rhs = (self.r2_med - self.r2_short) * self.var_y + self.var_x * dcoef * dcoef;
        let vg = (self.v_g - vg_rhs).abs() / self.var_y.max(self.v_g.abs());
        let vx = (self.v_x_perp_w1 - (self.var_x - self.v_pi)).abs() / self.var_x;
        let r2 = (self.r2_short - self.r2_med).max(0.0);
        [cg, vg, vx, r2]
    }
}

pub fn summarize(m: &MomentMatrix) -> Result<RegressionSummary> {
    let s = &m.cov;
    let d = s.nrows();
    let k = d - 2;
    let var_y = s[(0, 0)];
    let var_x = s[(1, 1)];
    let cov_yx = s[(0, 1)];
    let var_w1 = s.view((2, 2), (k, k)).into_owned();
    let cov_w1x: DVector<f64> = s.view((2, 1), (k, 1)).column(0).into_owned();

    let beta_short = cov_yx / var_x;
    let r2_short = cov_yx * cov_yx / (var_x * var_y);

    let pi1 = linalg::solve(&var_w1, &cov_w1x, "Var(W1)")?;

    let var_xw = s.view((1, 1), (k + 1, k + 1)).into_owned();
    let cov_xw_y: DVector<f64> = s.view((1, 0), (k + 1, 1)).column(0).into_owned();
    let coef = linalg::solve(&var_xw, &cov_xw_y, "Var(X, W1)")?;
    let beta_med = coef[0];
    let gamma: DVector<f64> = coef.rows(1, k).into_owned();
    let r2_med = coef.dot(&cov_xw_y) / var_y;

    let v_pi = pi1.dot(&cov_w1x);
    let v_g = gamma.dot(&(&var_w1 * &gamma));
    let c_g = gamma.dot(&cov_w1x);

    Ok(RegressionSummary {
        beta_short,
        beta_med,
        gamma_med: gamma.iter().copied().collect(),
        pi1: pi1.iter().copied().collect(),
        r2_short,
        r2_med,
        var_y,
        var_x,
        v_x_perp_w1: var_x - v_pi,
        v_g,
        c_g,
        v_pi,
        var_w1: var_w1
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
    })
}

/// How the analyst chooses R²_long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum R2Rule {
    Absolute(f64),
    /// k · R²_med
    Multiple(f64),
    One,
}

impl FromStr for R2Rule {
    type Err = Error;
    /// `1`, `0.9` (absolute), `1.3x` (multiple of R²_med), or `one`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("invalid R²_long rule {s:?}"));
        if s.eq_ignore_ascii_case("one") {
            Ok(R2Rule::One)
        } else if let Some(k) = s.strip_suffix(['x', 'X']) {
            let k: f64 = k.trim().parse().map_err(|_| bad())?;
            if !(k.is_finite() && k > 0.0) {
                return Err(bad());
            }
            Ok(R2Rule::Multiple(k))
        } else {
            let v: f64 = s.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok(R2Rule::Absolute(v))
        }
    }
}

impl fmt::Display for R2Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            R2Rule::Absolute(v) => write!(f, "{v}"),
            R2Rule::Multiple(k) => write!(f, "{k}x"),
            R2Rule::One => write!(f, "1"),
        }
    }
}

/// A resolved R²_long value. `degenerate` marks R²_long = R²_med (within
/// [`R2_TOL`]), where the omitted-variable bias is forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2Long {
    pub value: f64,
    pub degenerate: bool,
}

pub fn resolve_r2long(rule: R2Rule, summary: &RegressionSummary) -> Result<R2Long> {
    let value = match rule {
        R2Rule::Absolute(v) => v,
        R2Rule::Multiple(k) => k * summary.r2_med,
        R2Rule::One => 1.0,
    };
    check_r2long(value, summary)
}

pub fn check_r2long(value: f64, summary: &RegressionSummary) -> Result<R2Long> {
    if value > 1.0 + 1e-12 {
        return Err(Error::R2LongAboveOne(value));
    }
    if value < summary.r2_med - R2_TOL {
        return Err(Error::R2LongBelowMed {
            value,
            r2_med: summary.r2_med,
        });
    }
    Ok(R2Long {
        value: value.min(1.0),
        degenerate: value <= summary.r2_med + R2_TOL,
    })
}
