//! Identified sets for the long-regression coefficient under a selection
//! ratio δ and a value of R²_long.
//!
//! Everything is expressed through the bias `B = beta_med - b`. For fixed
//! `(δ, R²_long)` the admissible biases are the real roots of the cubic
//! `f(B) = f0(B) + δ·f1(B)` minus the points where the long-regression
//! coefficient on `W1` would vanish. Conversely, each `b` pins down
//! `δ(b) = -f0(B)/f1(B)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalUnion};
use crate::moments::{check_r2long, R2Long, RegressionSummary};
use crate::poly::Poly;

/// Relative residual above which γ_med is not considered proportional to π1.
pub const PROPORTIONAL_TOL: f64 = 1e-6;

/// Relative tolerance for treating a value of f1 as a pole.
const POLE_REL_TOL: f64 = 1e-12;

/// Scale-aware tolerance used for root deduplication and exclusion.
pub fn exclusion_tol(beta_med: f64) -> f64 {
    1e-8 * (1.0 + beta_med.abs())
}

/// Exact δ or a bound on |δ|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Exact(f64),
    Bounded(f64),
}

/// Bound on |beta_long - beta_med|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeBound {
    Absolute(#[serde(with = "crate::serde_ext")] f64),
    /// p·|beta_med|
    Multiple(f64),
}

impl MagnitudeBound {
    pub fn resolve(self, beta_med: f64) -> f64 {
        match self {
            MagnitudeBound::Absolute(m) => m,
            MagnitudeBound::Multiple(p) => p * beta_med.abs(),
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, MagnitudeBound::Absolute(m) if m == f64::INFINITY)
    }
}

impl FromStr for MagnitudeBound {
    type Err = Error;
    /// `inf`, `2x` (multiple of |beta_med|), `abs:0.5`, or a bare number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("invalid magnitude bound {s:?}"));
        let nonneg = |t: &str| -> Result<f64> {
            let v: f64 = t.trim().parse().map_err(|_| bad())?;
            if v.is_nan() || v < 0.0 {
                Err(bad())
            } else {
                Ok(v)
            }
        };
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("+inf") {
            Ok(MagnitudeBound::Absolute(f64::INFINITY))
        } else if let Some(p) = s.strip_suffix(['x', 'X']) {
            let p = nonneg(p)?;
            if !p.is_finite() {
                return Err(bad());
            }
            Ok(MagnitudeBound::Multiple(p))
        } else if let Some(m) = s.strip_prefix("abs:") {
            Ok(MagnitudeBound::Absolute(nonneg(m)?))
        } else {
            Ok(MagnitudeBound::Absolute(nonneg(s)?))
        }
    }
}

impl fmt::Display for MagnitudeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MagnitudeBound::Absolute(m) if m.is_infinite() => write!(f, "inf"),
            MagnitudeBound::Absolute(m) => write!(f, "abs:{m}"),
            MagnitudeBound::Multiple(p) => write!(f, "{p}x"),
        }
    }
}

/// The analyst's sensitivity assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub delta: DeltaMode,
    pub r2long: R2Long,
    pub m_bound: Option<MagnitudeBound>,
}

impl SensitivitySpec {
    pub fn validate(&self) -> Result<()> {
        match self.delta {
            DeltaMode::Exact(d) if !d.is_finite() => Err(Error::InvalidArgument(format!(
                "delta must be finite, got {d}"
            ))),
            DeltaMode::Bounded(d) if !(d >= 0.0) => Err(Error::InvalidArgument(format!(
                "delta bound must be >= 0, got {d}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn magnitude(&self, beta_med: f64) -> f64 {
        self.m_bound.map_or(f64::INFINITY, |m| m.resolve(beta_med))
    }
}

/// `R²_long - R²_med` scaled by Var(Y).
fn excess_r2(summary: &RegressionSummary, r2long: f64) -> f64 {
    (r2long - summary.r2_med) * summary.var_y
}

/// f0 in the bias B (independent of δ and R²_long).
pub fn f0_poly(summary: &RegressionSummary) -> Poly {
    let v = summary.v_x_perp_w1;
    Poly::new(vec![
        0.0,
        -v * summary.v_g,
        -2.0 * v * summary.c_g,
        -v * summary.v_pi,
    ])
}

/// f1 in the bias B.
pub fn f1_poly(summary: &RegressionSummary, r2long: f64) -> Poly {
    let v = summary.v_x_perp_w1;
    let d = excess_r2(summary, r2long);
    Poly::new(vec![
        d * summary.c_g,
        d * summary.v_pi,
        v * summary.c_g,
        v * summary.v_pi,
    ])
}

/// Coefficients of `f(B) = c3 B³ + c2 B² + c1 B + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub delta: f64,
    pub r2long: f64,
}

impl CubicCoeffs {
    pub fn poly(&self) -> Poly {
        Poly::new(vec![self.c0, self.c1, self.c2, self.c3])
    }

    pub fn eval(&self, bias: f64) -> f64 {
        ((self.c3 * bias + self.c2) * bias + self.c1) * bias + self.c0
    }

    /// `max |c_i| · max(1, |B|)³`, the scale for residual checks.
    pub fn residual_scale(&self, bias: f64) -> f64 {
        let m = [self.c3, self.c2, self.c1, self.c0]
            .iter()
            .fold(0.0f64, |a, c| a.max(c.abs()));
        m * bias.abs().max(1.0).powi(3)
    }
}

pub fn cubic_coefficients(summary: &RegressionSummary, delta: f64, r2long: f64) -> CubicCoeffs {
    let v = summary.v_x_perp_w1;
    let d = excess_r2(summary, r2long);
    CubicCoeffs {
        c3: v * summary.v_pi * (delta - 1.0),
        c2: v * summary.c_g * (delta - 2.0),
        c1: delta * d * summary.v_pi - v * summary.v_g,
        c0: delta * d * summary.c_g,
        delta,
        r2long,
    }
}

/// Where the long coefficient on W1, `gamma_med + B·pi1`, can vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullControlInfo {
    /// Whether `gamma_med = C·pi1` for some C.
    pub proportional: bool,
    /// Var(W1)-weighted least-squares C.
    pub c_med: Option<f64>,
    /// Weighted residual norm of `gamma_med - C·pi1` over that of gamma_med.
    pub rel_residual: f64,
    /// `beta_med + C` when proportional.
    pub b_fail: Option<f64>,
}

pub fn null_control_info(summary: &RegressionSummary) -> NullControlInfo {
    if summary.v_pi <= 0.0 {
        return NullControlInfo {
            proportional: false,
            c_med: None,
            rel_residual: 1.0,
            b_fail: None,
        };
    }
    let c = summary.c_g / summary.v_pi;
    let rel_residual = if summary.dim_w1() == 1 || summary.v_g <= 0.0 {
        0.0
    } else {
        let r: Vec<f64> = summary
            .gamma_med
            .iter()
            .zip(&summary.pi1)
            .map(|(g, p)| g - c * p)
            .collect();
        (summary.quad_w1(&r).max(0.0) / summary.v_g).sqrt()
    };
    let proportional = rel_residual <= PROPORTIONAL_TOL;
    NullControlInfo {
        proportional,
        c_med: Some(c),
        rel_residual,
        b_fail: proportional.then_some(summary.beta_med + c),
    }
}

/// Value of δ at a given bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaAt {
    Finite(f64),
    /// f1 = 0 with f0 ≠ 0: no finite δ reaches this b.
    Pole,
    /// f0 = f1 = 0 outside the proportional case.
    Indeterminate,
}

impl DeltaAt {
    pub fn finite(self) -> Option<f64> {
        match self {
            DeltaAt::Finite(d) => Some(d),
            _ => None,
        }
    }

    /// |δ|, with poles at +∞.
    pub fn magnitude(self) -> f64 {
        match self {
            DeltaAt::Finite(d) => d.abs(),
            DeltaAt::Pole => f64::INFINITY,
            DeltaAt::Indeterminate => f64::NAN,
        }
    }
}

/// Evaluates δ(B) for one summary and R²_long. In the proportional case the
/// common factor `(C + B)` of f0 and f1 is cancelled analytically, so δ is
/// continuous through the null-control point (where it equals 0).
#[derive(Debug, Clone)]
pub struct DeltaCurve {
    f0: Poly,
    f1: Poly,
    v: f64,
    d: f64,
    nc: NullControlInfo,
    beta_med: f64,
}

impl DeltaCurve {
    pub fn new(summary: &RegressionSummary, r2long: f64) -> Self {
        DeltaCurve {
            f0: f0_poly(summary),
            f1: f1_poly(summary, r2long),
            v: summary.v_x_perp_w1,
            d: excess_r2(summary, r2long),
            nc: null_control_info(summary),
            beta_med: summary.beta_med,
        }
    }

    pub fn f0(&self) -> &Poly {
        &self.f0
    }

    pub fn f1(&self) -> &Poly {
        &self.f1
    }

    pub fn null_control(&self) -> &NullControlInfo {
        &self.nc
    }

    pub fn beta_med(&self) -> f64 {
        self.beta_med
    }

    pub fn at_bias(&self, bias: f64) -> DeltaAt {
        if let (true, Some(c)) = (self.nc.proportional, self.nc.c_med) {
            let den = self.d + bias * bias * self.v;
            if den > 0.0 {
                return DeltaAt::Finite(bias * self.v * (c + bias) / den);
            }
        }
        let f0 = self.f0.eval(bias);
        let f1 = self.f1.eval(bias);
        let f1_small = f1.abs() <= POLE_REL_TOL * self.f1.abs_scale(bias);
        if f1_small {
            if f0.abs() <= POLE_REL_TOL * self.f0.abs_scale(bias) {
                DeltaAt::Indeterminate
            } else {
                DeltaAt::Pole
            }
        } else {
            DeltaAt::Finite(-f0 / f1)
        }
    }

    pub fn at_b(&self, b: f64) -> DeltaAt {
        self.at_bias(self.beta_med - b)
    }

    /// Real biases where f1 vanishes and δ is infinite.
    pub fn poles(&self) -> Vec<f64> {
        if self.nc.proportional && self.d > 0.0 {
            return Vec::new();
        }
        self.f1
            .real_roots()
            .into_iter()
            .filter(|&b| matches!(self.at_bias(b), DeltaAt::Pole))
            .collect()
    }

    /// The null-control point as a bias, when it exists.
    pub fn fail_bias(&self) -> Option<f64> {
        self.nc.b_fail.map(|b| self.beta_med - b)
    }
}

/// Fixed-δ identified set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedSetPoints {
    /// Admissible coefficient values, ascending.
    pub roots: Vec<f64>,
    /// Roots removed because they make the long W1 coefficient zero.
    pub excluded: Vec<f64>,
    /// R²_long = R²_med: the set is {beta_med} whatever δ is.
    pub degenerate_medium: bool,
    /// The set is empty (the restrictions falsify the model).
    pub empty_warning: bool,
}

pub fn solve_identified_set(
    summary: &RegressionSummary,
    delta: f64,
    r2long: f64,
) -> Result<IdentifiedSetPoints> {
    if !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "delta must be finite, got {delta}"
        )));
    }
    let r2 = check_r2long(r2long, summary)?;
    if r2.degenerate {
        return Ok(IdentifiedSetPoints {
            roots: vec![summary.beta_med],
            excluded: Vec::new(),
            degenerate_medium: true,
            empty_warning: false,
        });
    }
    let cubic = cubic_coefficients(summary, delta, r2.value);
    let poly = cubic.poly();
    if poly.effective_degree(crate::poly::DEGREE_REL_TOL).is_none() {
        return Err(Error::ZeroPolynomial);
    }
    let nc = null_control_info(summary);
    let tol = exclusion_tol(summary.beta_med);
    let mut roots = Vec::new();
    let mut excluded = Vec::new();
    for bias in poly.real_roots() {
        let b = summary.beta_med - bias;
        match nc.b_fail {
            Some(bf) if (b - bf).abs() <= tol => excluded.push(bf),
            _ => roots.push(b),
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= tol);
    excluded.dedup_by(|a, b| (*a - *b).abs() <= tol);
    Ok(IdentifiedSetPoints {
        empty_warning: roots.is_empty(),
        roots,
        excluded,
        degenerate_medium: false,
    })
}

/// The δ that makes `beta_hypo` the long coefficient at this R²_long.
pub fn delta_for_beta(summary: &RegressionSummary, beta_hypo: f64, r2long: f64) -> Result<f64> {
    check_r2long(r2long, summary)?;
    let curve = DeltaCurve::new(summary, r2long);
    if let Some(bf) = curve.null_control().b_fail {
        if (beta_hypo - bf).abs() <= exclusion_tol(summary.beta_med) {
            return Err(Error::NullControlPoint(beta_hypo));
        }
    }
    match curve.at_b(beta_hypo) {
        DeltaAt::Finite(d) => Ok(d),
        DeltaAt::Pole => Err(Error::NoFiniteDelta(beta_hypo)),
        DeltaAt::Indeterminate => Err(Error::IndeterminateDelta(beta_hypo)),
    }
}

/// Keep only roots within `[beta_med - M, beta_med + M]`.
pub fn restrict_magnitude(set: &IdentifiedSetPoints, beta_med: f64, m: f64) -> IdentifiedSetPoints {
    let slack = 1e-12 * (beta_med.abs() + if m.is_finite() { m } else { 0.0 });
    let roots: Vec<f64> = set
        .roots
        .iter()
        .copied()
        .filter(|b| (b - beta_med).abs() <= m + slack)
        .collect();
    IdentifiedSetPoints {
        empty_warning: roots.is_empty(),
        roots,
        excluded: set.excluded.clone(),
        degenerate_medium: set.degenerate_medium,
    }
}

/// Union of the fixed-δ identified sets over |δ| ≤ `delta_bar`, optionally
/// intersected with `[beta_med - M, beta_med + M]`.
///
/// The null-control point is not removed from the interior of an interval;
/// check it with [`null_control_info`] if it matters.
pub fn cumulative_set(
    summary: &RegressionSummary,
    delta_bar: f64,
    r2long: f64,
    m: Option<f64>,
) -> Result<IntervalUnion> {
    if !(delta_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta bound must be >= 0, got {delta_bar}"
        )));
    }
    let m = m.unwrap_or(f64::INFINITY);
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "magnitude bound must be >= 0, got {m}"
        )));
    }
    let r2 = check_r2long(r2long, summary)?;
    if r2.degenerate || delta_bar == 0.0 {
        return Ok(IntervalUnion::point(summary.beta_med));
    }
    let curve = DeltaCurve::new(summary, r2.value);
    // cut points sit on the boundary up to rounding, so they get a little
    // slack; cell interiors are compared exactly
    let slack = 1e-9 * delta_bar.max(1.0);
    let member_with = |bias: f64, slack: f64| -> bool {
        if bias.abs() > m {
            return false;
        }
        if bias == 0.0 {
            return true;
        }
        curve.at_bias(bias).magnitude() <= delta_bar + slack
    };
    let member = |bias: f64| member_with(bias, 0.0);

    let upper = &curve.f0 + &curve.f1.scale(delta_bar);
    let lower = &curve.f0 - &curve.f1.scale(delta_bar);
    let mut cuts: Vec<f64> = upper
        .candidate_real_roots(1e-7)
        .into_iter()
        .chain(lower.candidate_real_roots(1e-7))
        .chain(curve.f1.real_roots())
        .chain(curve.fail_bias())
        .chain([0.0])
        .filter(|x| x.is_finite())
        .collect();
    if m.is_finite() {
        cuts.extend([-m, m]);
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut pieces = Vec::with_capacity(2 * cuts.len() + 1);
    let first = cuts[0];
    let probe_left = first - first.abs().max(1.0);
    if member(probe_left) && m.is_infinite() {
        pieces.push(Interval::new(f64::NEG_INFINITY, first, false, false));
    }
    for (i, &c) in cuts.iter().enumerate() {
        if member_with(c, slack) {
            pieces.push(Interval::point(c));
        }
        let next = cuts.get(i + 1).copied();
        match next {
            Some(n) => {
                if member(0.5 * (c + n)) {
                    pieces.push(Interval::new(c, n, false, false));
                }
            }
            None => {
                let probe = c + c.abs().max(1.0);
                if member(probe) && m.is_infinite() {
                    pieces.push(Interval::new(c, f64::INFINITY, false, false));
                }
            }
        }
    }
    let in_b: Vec<Interval> = pieces
        .into_iter()
        .map(|i| {
            Interval::new(
                summary.beta_med - i.hi,
                summary.beta_med - i.lo,
                i.hi_closed,
                i.lo_closed,
            )
        })
        .collect();
    Ok(IntervalUnion::from_intervals(in_b))
}

/// One sample of the (b, δ) curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b: f64,
    /// `None` at poles and at the null-control point.
    pub delta: Option<f64>,
    pub gap: bool,
}

/// δ as a function of b over `[lo, hi]`: `n_points` evenly spaced values,
/// plus beta_med, any poles and the null-control point when they fall in range.
pub fn idset_curve(
    summary: &RegressionSummary,
    r2long: f64,
    lo: f64,
    hi: f64,
    n_points: usize,
) -> Result<Vec<CurvePoint>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(
            "curve needs at least 2 points".into(),
        ));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "invalid b range [{lo}, {hi}]"
        )));
    }
    check_r2long(r2long, summary)?;
    let curve = DeltaCurve::new(summary, r2long);
    let step = (hi - lo) / (n_points - 1) as f64;
    let mut bs: Vec<f64> = (0..n_points).map(|i| lo + step * i as f64).collect();
    bs[n_points - 1] = hi;
    let extra = std::iter::once(summary.beta_med)
        .chain(curve.null_control().b_fail)
        .chain(curve.poles().into_iter().map(|p| summary.beta_med - p));
    bs.extend(extra.filter(|b| (lo..=hi).contains(b)));
    bs.sort_by(|a, b| a.total_cmp(b));
    bs.dedup();

    let tol = exclusion_tol(summary.beta_med);
    let fail = curve.null_control().b_fail;
    let point = |b: f64| -> CurvePoint {
        if b == summary.beta_med {
            return CurvePoint {
                b,
                delta: Some(0.0),
                gap: false,
            };
        }
        if fail.is_some_and(|bf| (b - bf).abs() <= tol) {
            return CurvePoint {
                b,
                delta: None,
                gap: true,
            };
        }
        let d = curve.at_b(b).finite();
        CurvePoint {
            b,
            delta: d,
            gap: d.is_none(),
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(bs.into_par_iter().map(point).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(bs.into_iter().map(point).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{summarize, MomentMatrix};
    use crate::testutil::{demo1_summary, rel_close, DEMO1_R2};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// δ(B) written from the selection-ratio definition: the W2 index
    /// coefficient over the W1 index coefficient, both regressions of X on
    /// the respective index, using γ_1L = γ_med + Bπ1 and the extra R²
    /// contributed by W2.
    fn delta_by_definition(s: &RegressionSummary, r2long: f64, b: f64) -> f64 {
        let bias = s.beta_med - b;
        let g1: Vec<f64> = s
            .gamma_med
            .iter()
            .zip(&s.pi1)
            .map(|(g, p)| g + bias * p)
            .collect();
        let var_g1 = s.quad_w1(&g1);
        let cov_x_g1: f64 = {
            // cov(X, g1'W1) = g1' Var(W1) pi1
            let mut acc = 0.0;
            for i in 0..g1.len() {
                for j in 0..g1.len() {
                    acc += g1[i] * s.var_w1[i][j] * s.pi1[j];
                }
            }
            acc
        };
        let v = s.v_x_perp_w1;
        let g2_sq = (r2long - s.r2_med) * s.var_y + bias * bias * v;
        // cov(X, g2 W2) = B·V, var(g2 W2) = g2²
        let ratio2 = bias * v / g2_sq;
        let ratio1 = cov_x_g1 / var_g1;
        ratio2 / ratio1
    }

    fn random_summary(seed: &[f64]) -> RegressionSummary {
        let d = 4;
        let a = DMatrix::from_fn(d, d, |i, j| seed[i * d + j]);
        let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.2;
        summarize(&MomentMatrix::from_cov(cov).unwrap()).unwrap()
    }

    #[test]
    fn demo1_cubic_coefficients() {
        let s = demo1_summary();
        let c = cubic_coefficients(&s, 2.0, DEMO1_R2);
        assert!((c.c3 - 0.1875).abs() < 1e-12);
        assert!(c.c2.abs() < 1e-12);
        assert!((c.c1 + 0.4375).abs() < 1e-12);
        assert!((c.c0 - 5.0 / 36.0).abs() < 1e-12);
        assert_eq!(cubic_coefficients(&s, 1.0, DEMO1_R2).c3, 0.0);
        let z = cubic_coefficients(&s, 0.0, DEMO1_R2);
        assert_eq!(z.c0, 0.0);
        assert!((z.c1 + s.v_x_perp_w1 * s.v_g).abs() < 1e-15);
    }

    #[test]
    fn coefficients_match_direct_evaluation() {
        let s = demo1_summary();
        for delta in [-3.0, 0.0, 0.5, 1.0, 2.0, 7.5] {
            let c = cubic_coefficients(&s, delta, 0.9);
            let (f0, f1) = (f0_poly(&s), f1_poly(&s, 0.9));
            for bias in [-4.1, -0.3, 0.0, 0.77, 2.9] {
                let direct = f0.eval(bias) + delta * f1.eval(bias);
                assert!((c.eval(bias) - direct).abs() <= 1e-10 * c.residual_scale(bias));
            }
        }
    }

    #[test]
    fn demo1_sets() {
        let s = demo1_summary();
        let two = solve_identified_set(&s, 2.0, DEMO1_R2).unwrap();
        assert_eq!(two.roots.len(), 2);
        assert!(two.roots[0].abs() < 1e-12);
        assert!((two.roots[1] - 1.0).abs() < 1e-12);
        assert_eq!(two.excluded.len(), 1);
        assert!((two.excluded[0] - 3.0).abs() < 1e-12);

        let one = solve_identified_set(&s, 1.0, DEMO1_R2).unwrap();
        assert_eq!(one.roots.len(), 1);
        assert!((one.roots[0] - 1.2).abs() < 1e-12);
        assert!((one.excluded[0] - 3.0).abs() < 1e-12);

        let zero = solve_identified_set(&s, 0.0, DEMO1_R2).unwrap();
        assert_eq!(zero.roots.len(), 1);
        assert!((zero.roots[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_r2_gives_beta_med() {
        let s = demo1_summary();
        let set = solve_identified_set(&s, 5.0, s.r2_med).unwrap();
        assert!(set.degenerate_medium);
        assert_eq!(set.roots, vec![s.beta_med]);
    }

    #[test]
    fn demo1_delta_for_beta() {
        let s = demo1_summary();
        assert!((delta_for_beta(&s, 0.0, DEMO1_R2).unwrap() - 2.0).abs() < 1e-12);
        assert!((delta_for_beta(&s, 1.0, DEMO1_R2).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(delta_for_beta(&s, s.beta_med, DEMO1_R2).unwrap(), 0.0);
        assert_eq!(
            delta_for_beta(&s, 3.0, DEMO1_R2),
            Err(Error::NullControlPoint(3.0))
        );
        // raw polynomial values from the hand calculation
        let (f0, f1) = (f0_poly(&s), f1_poly(&s, DEMO1_R2));
        assert!((f0.eval(4.0 / 3.0) + 2.25).abs() < 1e-12);
        assert!((f1.eval(4.0 / 3.0) - 1.125).abs() < 1e-12);
        assert!((f0.eval(1.0 / 3.0) + 0.25).abs() < 1e-12);
        assert!((f1.eval(1.0 / 3.0) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn magnitude_restriction() {
        let s = demo1_summary();
        let two = solve_identified_set(&s, 2.0, DEMO1_R2).unwrap();
        assert_eq!(restrict_magnitude(&two, s.beta_med, f64::INFINITY), two);
        let r = restrict_magnitude(&two, s.beta_med, 0.5);
        assert_eq!(r.roots.len(), 1);
        assert!((r.roots[0] - 1.0).abs() < 1e-12);
        let e = restrict_magnitude(&two, s.beta_med, 0.0);
        assert!(e.roots.is_empty() && e.empty_warning);
        // boundary kept
        let edge = restrict_magnitude(&two, s.beta_med, 1.0 / 3.0);
        assert_eq!(edge.roots.len(), 1);
    }

    #[test]
    fn magnitude_bound_parsing() {
        assert!("inf".parse::<MagnitudeBound>().unwrap().is_unbounded());
        assert_eq!(
            "2x".parse::<MagnitudeBound>().unwrap(),
            MagnitudeBound::Multiple(2.0)
        );
        assert_eq!(
            "abs:0.5".parse::<MagnitudeBound>().unwrap(),
            MagnitudeBound::Absolute(0.5)
        );
        assert!("-1x".parse::<MagnitudeBound>().is_err());
        assert_eq!(MagnitudeBound::Multiple(2.0).resolve(-4.0 / 3.0), 8.0 / 3.0);
    }

    #[test]
    fn demo1_null_control() {
        let s = demo1_summary();
        let nc = null_control_info(&s);
        assert!(nc.proportional);
        assert!((nc.c_med.unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert!((nc.b_fail.unwrap() - 3.0).abs() < 1e-12);
        // gamma_med + (beta_med - b_fail) pi1 = 0
        let b = nc.b_fail.unwrap();
        assert!((s.gamma_med[0] + (s.beta_med - b) * s.pi1[0]).abs() < 1e-12);
    }

    #[test]
    fn demo1_cumulative_against_grid() {
        let s = demo1_summary();
        let set = cumulative_set(&s, 2.0, DEMO1_R2, None).unwrap();
        assert!(set.contains(0.0) && set.contains(1.0) && set.contains(s.beta_med));
        let boundary: Vec<f64> = set
            .intervals()
            .iter()
            .flat_map(|i| [i.lo, i.hi])
            .filter(|x| x.is_finite())
            .collect();
        for k in 0..=200_000 {
            let b = -10.0 + 1e-4 * k as f64;
            // b = 3 is the null-control point, kept inside the interval
            if boundary.iter().any(|x| (x - b).abs() < 1e-6) || (b - 3.0).abs() < 1e-6 {
                continue;
            }
            let inside = b == s.beta_med || delta_by_definition(&s, DEMO1_R2, b).abs() <= 2.0;
            assert_eq!(set.contains(b), inside, "b = {b}, set = {set}");
        }
        for x in boundary {
            let d = delta_by_definition(&s, DEMO1_R2, x).abs();
            assert!((d - 2.0).abs() < 1e-8, "boundary {x}: {d}");
        }
    }

    #[test]
    fn cumulative_trivial_cases() {
        let s = demo1_summary();
        assert_eq!(
            cumulative_set(&s, 0.0, DEMO1_R2, None).unwrap(),
            IntervalUnion::point(s.beta_med)
        );
        let m = cumulative_set(&s, 2.0, DEMO1_R2, Some(0.5)).unwrap();
        let hull = m.convex_hull().unwrap();
        assert!(hull.lo >= s.beta_med - 0.5 - 1e-12 && hull.hi <= s.beta_med + 0.5 + 1e-12);
        assert!(m.contains(1.0) && !m.contains(0.0));
    }

    #[test]
    fn demo1_curve() {
        let s = demo1_summary();
        let c = idset_curve(&s, DEMO1_R2, -2.0, 3.0, 1001).unwrap();
        let at = |b: f64| c.iter().find(|p| (p.b - b).abs() < 1e-12).unwrap();
        assert_eq!(at(s.beta_med).delta, Some(0.0));
        assert!((at(1.0).delta.unwrap() - 2.0).abs() < 1e-12);
        assert!((at(0.0).delta.unwrap() - 2.0).abs() < 1e-12);
        assert!(at(3.0).gap);
        for p in c.iter().filter(|p| p.b < 0.0) {
            assert!(p.delta.unwrap() > 1.0, "{p:?}");
        }
    }

    #[test]
    fn delta_tends_to_one_far_out() {
        let s = demo1_summary();
        let curve = DeltaCurve::new(&s, DEMO1_R2);
        for b in [-1e6, 1e6] {
            assert!((curve.at_b(b).magnitude() - 1.0).abs() < 1e-3);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roots_are_certified(
            seed in prop::collection::vec(-1.0f64..1.0, 16),
            delta in -5.0f64..5.0,
            frac in 0.05f64..1.0,
        ) {
            let s = random_summary(&seed);
            prop_assume!((s.beta_short - s.beta_med).abs() > 1e-3);
            let r2 = s.r2_med + frac * (1.0 - s.r2_med);
            let set = solve_identified_set(&s, delta, r2).unwrap();
            let cubic = cubic_coefficients(&s, delta, r2);
            prop_assert!(set.roots.len() <= 3);
            for w in set.roots.windows(2) {
                prop_assert!(w[1] - w[0] > exclusion_tol(s.beta_med));
            }
            for &b in &set.roots {
                let bias = s.beta_med - b;
                prop_assert!(cubic.eval(bias).abs() <= 1e-10 * cubic.residual_scale(bias));
                if let Ok(d) = delta_for_beta(&s, b, r2) {
                    prop_assert!(rel_close(d, delta, 1e-8), "{d} vs {delta}");
                }
            }
        }

        #[test]
        fn cumulative_sets_nest(
            seed in prop::collection::vec(-1.0f64..1.0, 16),
            frac in 0.05f64..1.0,
        ) {
            let s = random_summary(&seed);
            prop_assume!((s.beta_short - s.beta_med).abs() > 1e-3);
            let r2 = s.r2_med + frac * (1.0 - s.r2_med);
            let a = cumulative_set(&s, 1.0, r2, None).unwrap();
            let b = cumulative_set(&s, 2.0, r2, None).unwrap();
            prop_assert!(a.is_subset_of(&b), "{a} not in {b}");
            prop_assert!(a.contains(s.beta_med));
        }

        #[test]
        fn cumulative_matches_grid(
            seed in prop::collection::vec(-1.0f64..1.0, 16),
            frac in 0.05f64..1.0,
            delta_bar in 0.1f64..3.0,
        ) {
            let s = random_summary(&seed);
            prop_assume!((s.beta_short - s.beta_med).abs() > 1e-3);
            let r2 = s.r2_med + frac * (1.0 - s.r2_med);
            let set = cumulative_set(&s, delta_bar, r2, None).unwrap();
            let edges: Vec<f64> = set.intervals().iter().flat_map(|i| [i.lo, i.hi]).collect();
            let span = 10.0 * (1.0 + s.beta_med.abs());
            for k in 0..2000 {
                let b = s.beta_med - span + 2.0 * span * (k as f64 + 0.5) / 2000.0;
                if edges.iter().any(|e| (e - b).abs() < 1e-6 * span) {
                    continue;
                }
                let d = delta_by_definition(&s, r2, b).abs();
                if !d.is_finite() || (d - delta_bar).abs() < 1e-9 {
                    continue;
                }
                prop_assert_eq!(set.contains(b), d <= delta_bar, "b={} d={} set={}", b, d, set);
            }
        }

        #[test]
        fn delta_one_has_at_most_two_roots(
            seed in prop::collection::vec(-1.0f64..1.0, 16),
            frac in 0.05f64..1.0,
        ) {
            let s = random_summary(&seed);
            prop_assume!(s.c_g.abs() > 1e-6);
            let r2 = s.r2_med + frac * (1.0 - s.r2_med);
            let set = solve_identified_set(&s, 1.0, r2).unwrap();
            prop_assert!(set.roots.len() <= 2);
            let curve = DeltaCurve::new(&s, r2);
            if s.v_pi > 1e-6 {
                for b in [-1e6, 1e6] {
                    prop_assert!((curve.at_b(b).magnitude() - 1.0).abs() < 1e-3);
                }
            }
        }
    }
}
