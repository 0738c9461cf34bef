//! Report structs. Each command assembles one of these once; the table,
//! the JSON and the data files are all rendered from it.

use rayon::prelude::*;
use regsens_core::breakdown::{
    beta_star, breakdown_report, delta_one_adjust, proportionality_diagnostic, BetaStar,
    BreakdownReport, Proportionality, SignChange,
};
use regsens_core::idset::{
    cumulative_set, idset_curve, solve_identified_set, CurvePoint, MagnitudeBound,
};
use regsens_core::moments::{
    load_dataset, partial_out_baseline, resolve_r2long, summarize, Denominator, R2Rule, Roles,
};
use regsens_core::oracle::{
    identity_suite, membership_suite, sharpness_suite, sign_bound_suite, SuiteConfig, SuiteOutcome,
};
use regsens_core::{Error, Interval, IntervalUnion, MomentMatrix, RegressionSummary, Result};
use serde::{Deserialize, Serialize};

use crate::args::InputArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// "data" or "moments"
    pub kind: String,
    pub path: String,
    pub order: Vec<String>,
    pub n: Option<usize>,
    pub denominator: Denominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub beta_short: f64,
    pub beta_med: f64,
    pub r2_short: f64,
    pub r2_med: f64,
}

impl From<&RegressionSummary> for SummaryRow {
    fn from(s: &RegressionSummary) -> Self {
        SummaryRow {
            beta_short: s.beta_short,
            beta_med: s.beta_med,
            r2_short: s.r2_short,
            r2_med: s.r2_med,
        }
    }
}

pub struct Loaded {
    pub source: Source,
    pub summary: RegressionSummary,
}

pub fn load(input: &InputArgs) -> Result<Loaded> {
    if input.r2long.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one --r2long rule is required".into(),
        ));
    }
    let (m, source) = match (&input.data, &input.moments) {
        (Some(path), _) => {
            let w0: Vec<&str> = input.w0.iter().map(String::as_str).collect();
            let w1: Vec<&str> = input.w1.iter().map(String::as_str).collect();
            let roles = Roles::new(&input.outcome, &input.treatment, &w0, &w1);
            let d = load_dataset(path, &roles)?;
            let m = partial_out_baseline(&d, input.cov_denominator)?;
            let source = Source {
                kind: "data".into(),
                path: path.display().to_string(),
                order: m.names().to_vec(),
                n: Some(d.n()),
                denominator: input.cov_denominator,
            };
            (m, source)
        }
        (None, Some(path)) => {
            let m = MomentMatrix::from_json(&std::fs::read_to_string(path)?)?;
            let source = Source {
                kind: "moments".into(),
                path: path.display().to_string(),
                order: m.names().to_vec(),
                n: None,
                denominator: m.denominator(),
            };
            (m, source)
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "one of --data or --moments is required".into(),
            ))
        }
    };
    Ok(Loaded {
        summary: summarize(&m)?,
        source,
    })
}

/// A resolved R²_long rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleValue {
    pub rule: String,
    pub r2long: f64,
    pub degenerate: bool,
}

fn resolve_rules(rules: &[R2Rule], s: &RegressionSummary) -> Result<Vec<RuleValue>> {
    rules
        .iter()
        .map(|r| {
            let v = resolve_r2long(*r, s)?;
            Ok(RuleValue {
                rule: r.to_string(),
                r2long: v.value,
                degenerate: v.degenerate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MBound {
    pub label: String,
    #[serde(with = "regsens_core::serde_ext")]
    pub value: f64,
}

fn resolve_ms(ms: &[MagnitudeBound], beta_med: f64) -> Vec<MBound> {
    ms.iter()
        .map(|m| MBound {
            label: m.to_string(),
            value: m.resolve(beta_med),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRule {
    pub rule: RuleValue,
    pub m_bounds: Vec<MBound>,
    pub report: BreakdownReport,
}

impl BreakdownRule {
    /// Sign-change result for the i-th magnitude bound.
    pub fn sign_change_for(&self, i: usize) -> Option<&SignChange> {
        let m = self.m_bounds.get(i)?.value;
        if m.is_infinite() {
            self.report.sign_change.as_ref()
        } else {
            self.report
                .sign_change_restricted
                .iter()
                .find(|r| r.m == m)
                .map(|r| &r.result)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownOutput {
    pub source: Source,
    pub summary: SummaryRow,
    pub rules: Vec<BreakdownRule>,
}

pub fn build_breakdown(
    l: &Loaded,
    rules: &[R2Rule],
    ms: &[MagnitudeBound],
) -> Result<BreakdownOutput> {
    let s = &l.summary;
    let m_bounds = resolve_ms(ms, s.beta_med);
    let finite: Vec<f64> = m_bounds
        .iter()
        .map(|m| m.value)
        .filter(|m| m.is_finite())
        .collect();
    let rules = resolve_rules(rules, s)?
        .into_par_iter()
        .map(|rule| {
            Ok(BreakdownRule {
                report: breakdown_report(s, rule.r2long, &finite)?,
                rule,
                m_bounds: m_bounds.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BreakdownOutput {
        source: l.source.clone(),
        summary: s.into(),
        rules,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsetRow {
    pub delta: f64,
    pub roots: Vec<f64>,
    pub excluded: Vec<f64>,
    pub degenerate_medium: bool,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsetRule {
    pub rule: RuleValue,
    pub sets: Vec<IdsetRow>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsetOutput {
    pub source: Source,
    pub summary: SummaryRow,
    pub b_range: (f64, f64),
    pub rules: Vec<IdsetRule>,
}

fn idset_rows(s: &RegressionSummary, deltas: &[f64], r2: f64) -> Result<Vec<IdsetRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let set = solve_identified_set(s, delta, r2)?;
            Ok(IdsetRow {
                delta,
                empty: set.empty_warning,
                roots: set.roots,
                excluded: set.excluded,
                degenerate_medium: set.degenerate_medium,
            })
        })
        .collect()
}

/// Default curve window: beta_med plus or minus five natural units.
pub fn default_b_range(s: &RegressionSummary) -> (f64, f64) {
    let w = 5.0
        * s.beta_med
            .abs()
            .max((s.beta_short - s.beta_med).abs())
            .max(1.0);
    (s.beta_med - w, s.beta_med + w)
}

pub fn build_idset(
    l: &Loaded,
    rules: &[R2Rule],
    deltas: &[f64],
    b_range: Option<(f64, f64)>,
    curve_points: usize,
) -> Result<IdsetOutput> {
    let s = &l.summary;
    if let Some(d) = deltas.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta must be finite, got {d}"
        )));
    }
    let (lo, hi) = b_range.unwrap_or_else(|| default_b_range(s));
    let rules = resolve_rules(rules, s)?
        .into_par_iter()
        .map(|rule| {
            let curve = if rule.degenerate {
                Vec::new()
            } else {
                idset_curve(s, rule.r2long, lo, hi, curve_points)?
            };
            Ok(IdsetRule {
                sets: idset_rows(s, deltas, rule.r2long)?,
                curve,
                rule,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdsetOutput {
        source: l.source.clone(),
        summary: s.into(),
        b_range: (lo, hi),
        rules,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub delta_bar: f64,
    pub m: MBound,
    pub set: IntervalUnion,
    pub hull: Option<Interval>,
    pub contains_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta_bar: f64,
    #[serde(with = "regsens_core::serde_ext")]
    pub lower: f64,
    #[serde(with = "regsens_core::serde_ext")]
    pub upper: f64,
    /// The set has more than one piece.
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRule {
    pub rule: RuleValue,
    pub rows: Vec<BoundsRow>,
    /// Hull bounds over a δ̄ grid, under the first magnitude bound.
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    pub source: Source,
    pub summary: SummaryRow,
    pub rules: Vec<BoundsRule>,
}

fn check_delta_bars(v: &[f64]) -> Result<()> {
    match v.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        Some(d) => Err(Error::InvalidArgument(format!(
            "delta-bar must be finite and >= 0, got {d}"
        ))),
        None => Ok(()),
    }
}

fn opt_m(m: f64) -> Option<f64> {
    m.is_finite().then_some(m)
}

pub fn build_bounds(
    l: &Loaded,
    rules: &[R2Rule],
    delta_bars: &[f64],
    ms: &[MagnitudeBound],
    sweep_max: Option<f64>,
    sweep_points: usize,
) -> Result<BoundsOutput> {
    check_delta_bars(delta_bars)?;
    let s = &l.summary;
    let m_bounds = resolve_ms(ms, s.beta_med);
    let top = delta_bars.iter().copied().fold(0.0, f64::max);
    let sweep_max = sweep_max.unwrap_or((2.0 * top).max(3.0));
    check_delta_bars(&[sweep_max])?;
    let n = sweep_points.max(2);
    let rules = resolve_rules(rules, s)?
        .into_par_iter()
        .map(|rule| {
            let mut rows = Vec::new();
            for &db in delta_bars {
                for m in &m_bounds {
                    let set = cumulative_set(s, db, rule.r2long, opt_m(m.value))?;
                    rows.push(BoundsRow {
                        delta_bar: db,
                        m: m.clone(),
                        hull: set.convex_hull(),
                        contains_zero: set.contains(0.0),
                        set,
                    });
                }
            }
            let m0 = m_bounds.first().map(|m| m.value).unwrap_or(f64::INFINITY);
            let sweep = (0..n)
                .into_par_iter()
                .map(|k| {
                    let db = sweep_max * k as f64 / (n - 1) as f64;
                    let set = cumulative_set(s, db, rule.r2long, opt_m(m0))?;
                    Ok(SweepPoint {
                        delta_bar: db,
                        lower: set.inf().unwrap_or(f64::NAN),
                        upper: set.sup().unwrap_or(f64::NAN),
                        gap: set.intervals().len() > 1,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BoundsRule { rule, rows, sweep })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsOutput {
        source: l.source.clone(),
        summary: s.into(),
        rules,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRow {
    pub delta_bar: f64,
    pub set: IntervalUnion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustPanel {
    pub rule: RuleValue,
    pub baseline: f64,
    /// δ = 1 closed-form adjustment; valid only under proportionality.
    pub delta_one: Option<f64>,
    pub sets: Vec<IdsetRow>,
    pub cumulative: Vec<CumulativeRow>,
    pub beta_star: Option<BetaStar>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustOutput {
    pub source: Source,
    pub summary: SummaryRow,
    pub proportionality: Option<Proportionality>,
    pub panels: Vec<AdjustPanel>,
}

pub fn build_adjust(
    l: &Loaded,
    rules: &[R2Rule],
    deltas: &[f64],
    delta_bars: &[f64],
) -> Result<AdjustOutput> {
    check_delta_bars(delta_bars)?;
    let s = &l.summary;
    let proportionality = proportionality_diagnostic(s).ok();
    let panels = resolve_rules(rules, s)?
        .into_par_iter()
        .map(|rule| {
            let mut warnings = Vec::new();
            let delta_one = match delta_one_adjust(s, rule.r2long) {
                Ok(v) => Some(v),
                Err(e) => {
                    warnings.push(format!("δ = 1 adjustment: {e}"));
                    None
                }
            };
            if let (Some(_), Some(p)) = (delta_one, proportionality) {
                if !p.proportional {
                    warnings.push(format!(
                        "gamma_med is not proportional to pi1 (relative residual {:.3e}); the δ = 1 adjustment is not valid",
                        p.rel_residual
                    ));
                }
            }
            let bs = match beta_star(s, 1.0, rule.r2long) {
                Ok(value) => Some(BetaStar {
                    value,
                    bounding_set_caveat: true,
                }),
                Err(e) => {
                    warnings.push(format!("beta*: {e}"));
                    None
                }
            };
            let cumulative = delta_bars
                .iter()
                .map(|&db| {
                    Ok(CumulativeRow {
                        delta_bar: db,
                        set: cumulative_set(s, db, rule.r2long, None)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AdjustPanel {
                baseline: s.beta_med,
                delta_one,
                sets: idset_rows(s, deltas, rule.r2long)?,
                cumulative,
                beta_star: bs,
                warnings,
                rule,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdjustOutput {
        source: l.source.clone(),
        summary: s.into(),
        proportionality,
        panels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub seed: u64,
    pub instances: usize,
    pub c3_fault: Option<f64>,
    pub suites: Vec<SuiteOutcome>,
    /// Largest explain-away / sign-change ratio seen.
    pub max_ratio: f64,
    pub passed: bool,
}

pub fn build_oracle(seed: u64, instances: usize, c3_fault: Option<f64>) -> OracleOutput {
    let cfg = SuiteConfig {
        seed,
        instances,
        c3_fault,
    };
    let membership = membership_suite(&cfg);
    let sharpness = sharpness_suite(&cfg);
    let identities = identity_suite(&cfg);
    let sign = sign_bound_suite(&cfg);
    let suites = vec![membership, sharpness, identities, sign.outcome];
    OracleOutput {
        passed: suites.iter().all(SuiteOutcome::passed),
        seed,
        instances,
        c3_fault,
        suites,
        max_ratio: sign.max_ratio,
    }
}
