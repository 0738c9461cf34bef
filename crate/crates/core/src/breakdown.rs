//! Breakdown points, bias adjustments and related diagnostics.
//!
//! Two layers live here. The generic engine works with any set-valued map
//! `r ↦ B_I(r)` and finds exact-value and sign-change breakdown points by a
//! log-spaced scan plus bisection. The closed forms specialise to the δ
//! model, where the sign-change breakdown point is the minimum of |δ(b)| over
//! opposite-sign b, found through the critical points of δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idset::{
    self, cumulative_set, null_control_info, solve_identified_set, DeltaAt, DeltaCurve,
};
use crate::interval::{Interval, IntervalUnion};
use crate::moments::{check_r2long, RegressionSummary};
use crate::poly::Poly;

/// How the sets of a map relate as the parameter grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// Sets nest: r1 ≤ r2 implies B(r1) ⊆ B(r2).
    Relaxation,
    /// A relaxation whose sets are intervals.
    IntervalRelaxation,
    /// Sets merely change with r.
    Deviation,
}

/// A family of identified sets indexed by a sensitivity parameter r ≥ 0.
pub trait SetValuedMap: Sync {
    fn kind(&self) -> MapKind;
    fn eval(&self, r: f64) -> IntervalUnion;
}

/// `r ↦ [center - r, center + r]`.
#[derive(Debug, Clone, Copy)]
pub struct IntervalRelaxation {
    pub center: f64,
}

impl SetValuedMap for IntervalRelaxation {
    fn kind(&self) -> MapKind {
        MapKind::IntervalRelaxation
    }

    fn eval(&self, r: f64) -> IntervalUnion {
        IntervalUnion::from_interval(Interval::closed(self.center - r, self.center + r))
    }
}

/// `δ̄ ↦` the cumulative identified set over |δ| ≤ δ̄.
#[derive(Debug, Clone)]
pub struct CumulativeDeltaMap {
    pub summary: RegressionSummary,
    pub r2long: f64,
    pub m: Option<f64>,
}

impl SetValuedMap for CumulativeDeltaMap {
    fn kind(&self) -> MapKind {
        MapKind::Relaxation
    }

    fn eval(&self, r: f64) -> IntervalUnion {
        cumulative_set(&self.summary, r, self.r2long, self.m).unwrap_or_default()
    }
}

/// `δ ↦` the fixed-δ identified set (finite points).
#[derive(Debug, Clone)]
pub struct FixedDeltaMap {
    pub summary: RegressionSummary,
    pub r2long: f64,
}

impl SetValuedMap for FixedDeltaMap {
    fn kind(&self) -> MapKind {
        MapKind::Deviation
    }

    fn eval(&self, r: f64) -> IntervalUnion {
        let pts = solve_identified_set(&self.summary, r, self.r2long)
            .map(|s| s.roots)
            .unwrap_or_default();
        IntervalUnion::from_intervals(pts.into_iter().map(Interval::point).collect())
    }
}

/// Search grid for the generic engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_grid: usize,
    pub bisect_steps: usize,
    /// Half-width (relative to `1 + |baseline|`) of the window in which a
    /// sign-change witness must exist for the infimum to count as attained.
    pub witness_window: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_min: 1e-6,
            r_max: 1e3,
            n_grid: 1024,
            bisect_steps: 60,
            witness_window: 1e6,
        }
    }
}

impl GridSpec {
    fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        let n = self.n_grid.max(2);
        (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
    }
}

/// A breakdown point; `+inf` when the event never happens on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownValue {
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    pub attained: bool,
}

/// Smallest r in `[0, r_max]` with `pred(r)`, assuming the predicate is
/// monotone (false then true).
fn first_true(grid: &GridSpec, pred: impl Fn(f64) -> bool) -> Option<f64> {
    if pred(0.0) {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = None;
    for r in grid.points() {
        if pred(r) {
            hi = Some(r);
            break;
        }
        lo = r;
    }
    let mut hi = hi?;
    for _ in 0..grid.bisect_steps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `inf { r ≥ 0 : b ∈ B(r) }`.
pub fn generic_bp_exact<M: SetValuedMap + ?Sized>(
    map: &M,
    b: f64,
    grid: &GridSpec,
) -> BreakdownValue {
    match first_true(grid, |r| map.eval(r).contains(b)) {
        Some(r) => BreakdownValue {
            value: r,
            attained: true,
        },
        None => BreakdownValue {
            value: f64::INFINITY,
            attained: false,
        },
    }
}

/// `inf { r ≥ 0 : B(r)` holds a value of weakly opposite sign to the
/// baseline `}`.
pub fn generic_bp_sign<M: SetValuedMap + ?Sized>(
    map: &M,
    beta_baseline: f64,
    grid: &GridSpec,
) -> Result<BreakdownValue> {
    if beta_baseline == 0.0 || !beta_baseline.is_finite() {
        return Err(Error::ZeroBaseline);
    }
    let opposite = if beta_baseline > 0.0 {
        Interval::new(f64::NEG_INFINITY, 0.0, false, true)
    } else {
        Interval::new(0.0, f64::INFINITY, true, false)
    };
    let hits = |r: f64| !map.eval(r).intersect_interval(&opposite).is_empty();
    let Some(r) = first_true(grid, hits) else {
        return Ok(BreakdownValue {
            value: f64::INFINITY,
            attained: false,
        });
    };
    let w = grid.witness_window * (1.0 + beta_baseline.abs());
    let window = opposite.intersect(&Interval::closed(-w, w));
    let attained = !map.eval(r).intersect_interval(&window).is_empty();
    Ok(BreakdownValue { value: r, attained })
}

/// Checks `B(r_i) ⊆ B(r_{i+1})` along an increasing list of r values.
pub fn spot_check_monotone<M: SetValuedMap + ?Sized>(map: &M, rs: &[f64]) -> bool {
    let sets: Vec<IntervalUnion> = rs.iter().map(|&r| map.eval(r)).collect();
    sets.windows(2).all(|w| w[0].is_subset_of(&w[1]))
}

fn require_nondegenerate(summary: &RegressionSummary, r2long: f64) -> Result<f64> {
    let r2 = check_r2long(r2long, summary)?;
    if r2.degenerate {
        return Err(Error::Precondition(
            "R²_long must exceed R²_med for a breakdown point".into(),
        ));
    }
    Ok(r2.value)
}

/// Explain-away breakdown point: the δ that makes b = 0, signed and as a
/// magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainAway {
    pub signed: f64,
    pub magnitude: f64,
}

pub fn bp_explain_away(summary: &RegressionSummary, r2long: f64) -> Result<ExplainAway> {
    let r2 = require_nondegenerate(summary, r2long)?;
    if summary.beta_med == 0.0 {
        return Ok(ExplainAway {
            signed: 0.0,
            magnitude: 0.0,
        });
    }
    let signed = idset::delta_for_beta(summary, 0.0, r2)?;
    Ok(ExplainAway {
        signed,
        magnitude: signed.abs(),
    })
}

/// Sign-change breakdown point of the δ model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    pub attained: bool,
    /// The magnitude bound rules out every opposite-sign value.
    pub precluded: bool,
    /// Minimizing b when attained.
    pub argmin: Option<f64>,
}

/// δ(B) as a ratio `num/den` with any factor shared by f0 and f1 removed.
fn delta_ratio(curve: &DeltaCurve, summary: &RegressionSummary, r2long: f64) -> (Poly, Poly) {
    let nc = curve.null_control();
    match (nc.proportional, nc.c_med) {
        (true, Some(c)) => {
            let v = summary.v_x_perp_w1;
            let d = (r2long - summary.r2_med) * summary.var_y;
            (Poly::new(vec![0.0, v * c, v]), Poly::new(vec![d, 0.0, v]))
        }
        _ => (curve.f0().scale(-1.0), curve.f1().clone()),
    }
}

/// `inf |δ(b)|` over b of weakly opposite sign to beta_med with
/// `|b - beta_med| ≤ M`.
pub fn bp_sign_change(
    summary: &RegressionSummary,
    r2long: f64,
    m: Option<f64>,
) -> Result<SignChange> {
    let r2 = require_nondegenerate(summary, r2long)?;
    let beta = summary.beta_med;
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::ZeroBaseline);
    }
    let m = m.unwrap_or(f64::INFINITY);
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "magnitude bound must be >= 0, got {m}"
        )));
    }
    if m < beta.abs() {
        return Ok(SignChange {
            value: f64::INFINITY,
            attained: false,
            precluded: true,
            argmin: None,
        });
    }
    // t = sign(beta)·B runs over [|beta|, M]
    let s = beta.signum();
    let (t_lo, t_hi) = (beta.abs(), m);
    let in_domain = |bias: f64| {
        let t = s * bias;
        t >= t_lo * (1.0 - 1e-14) && t <= t_hi * (1.0 + 1e-14)
    };

    let curve = DeltaCurve::new(summary, r2);
    let (num, den) = delta_ratio(&curve, summary, r2);
    let crit = &(&num.derivative() * &den) - &(&num * &den.derivative());

    // (value, attained, bias)
    let mut best: (f64, bool, Option<f64>) = (f64::INFINITY, false, None);
    let mut offer = |value: f64, attained: bool, bias: Option<f64>| {
        if value.is_nan() {
            return;
        }
        let better = value < best.0
            || (value == best.0 && attained && !best.1)
            || (value <= best.0 * (1.0 + 1e-12) && attained && !best.1 && value > 0.0);
        if better {
            best = (value, attained, bias);
        }
    };

    let fail = curve.fail_bias();
    let is_fail = |bias: f64| fail.is_some_and(|f| (bias - f).abs() <= idset::exclusion_tol(beta));
    let mut candidates = vec![s * t_lo];
    if t_hi.is_finite() {
        candidates.push(s * t_hi);
    }
    candidates.extend(
        crit.candidate_real_roots(1e-6)
            .into_iter()
            .filter(|&b| in_domain(b)),
    );
    for bias in candidates {
        if is_fail(bias) {
            continue;
        }
        let g = curve.at_bias(bias).magnitude();
        offer(g, true, Some(bias));
    }
    if let Some(f) = fail {
        if in_domain(f) {
            // δ → 0 next to the excluded point but never reaches it
            offer(0.0, false, None);
        }
    }
    if t_hi.is_infinite() {
        let lim = far_limit(&num, &den);
        offer(lim, false, None);
    }
    Ok(SignChange {
        value: best.0,
        attained: best.1,
        precluded: false,
        argmin: best.2.filter(|_| best.1).map(|bias| beta - bias),
    })
}

/// `lim |num(B)/den(B)|` as |B| → ∞.
fn far_limit(num: &Poly, den: &Poly) -> f64 {
    let dn = num.effective_degree(crate::poly::DEGREE_REL_TOL);
    let dd = den.effective_degree(crate::poly::DEGREE_REL_TOL);
    match (dn, dd) {
        (None, _) => 0.0,
        (Some(_), None) => f64::INFINITY,
        (Some(a), Some(b)) if a < b => 0.0,
        (Some(a), Some(b)) if a > b => f64::INFINITY,
        (Some(a), Some(_)) => (num.coeffs()[a] / den.coeffs()[a]).abs(),
    }
}

/// The common but incorrect approximation that plugs R²_long into the
/// linearised bias formula and solves for δ. Reported only for comparison.
pub fn naive_breakdown(summary: &RegressionSummary, r2long: f64) -> Result<f64> {
    if summary.beta_med == 0.0 {
        return Ok(0.0);
    }
    let scale = summary
        .beta_short
        .abs()
        .max(summary.beta_med.abs())
        .max(f64::MIN_POSITIVE);
    if (summary.beta_short - summary.beta_med).abs() <= 1e-12 * scale {
        return Err(Error::NoSelectionOnObservables);
    }
    if (summary.r2_med - summary.r2_short).abs() <= idset_r2_tol() {
        return Err(Error::EqualR2);
    }
    if (r2long - summary.r2_med).abs() <= idset_r2_tol() {
        return Err(Error::Precondition(
            "R²_long must differ from R²_med".into(),
        ));
    }
    Ok(-summary.beta_med * (summary.r2_med - summary.r2_short)
        / ((summary.beta_med - summary.beta_short) * (r2long - summary.r2_med)))
}

fn idset_r2_tol() -> f64 {
    crate::moments::R2_TOL
}

/// The δ = 1 point estimate `beta_med + (beta_med - beta_short)·ΔR²_long/ΔR²_med`.
/// Valid only when γ_med is proportional to π1.
pub fn delta_one_adjust(summary: &RegressionSummary, r2long: f64) -> Result<f64> {
    let d_med = summary.r2_med - summary.r2_short;
    if d_med.abs() <= idset_r2_tol() {
        return Err(Error::EqualR2);
    }
    Ok(summary.beta_med
        + (summary.beta_med - summary.beta_short) * (r2long - summary.r2_med) / d_med)
}

/// Identified-set element closest to beta_med; ties go to the smaller b.
pub fn beta_star(summary: &RegressionSummary, delta: f64, r2long: f64) -> Result<f64> {
    let set = solve_identified_set(summary, delta, r2long)?;
    let mut best: Option<(f64, f64)> = None;
    for &b in &set.roots {
        let d = (summary.beta_med - b).abs();
        match best {
            Some((bd, _)) if d >= bd => {}
            _ => best = Some((d, b)),
        }
    }
    best.map(|(_, b)| b).ok_or(Error::EmptySet)
}

/// Whether γ_med is proportional to π1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportionality {
    pub proportional: bool,
    pub c_med: f64,
    pub rel_residual: f64,
}

pub fn proportionality_diagnostic(summary: &RegressionSummary) -> Result<Proportionality> {
    let nc = null_control_info(summary);
    match nc.c_med {
        Some(c) => Ok(Proportionality {
            proportional: nc.proportional,
            c_med: c,
            rel_residual: nc.rel_residual,
        }),
        None => Err(Error::ZeroPi),
    }
}

/// The naive value, labelled as not to be relied on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveValue {
    pub value: f64,
    pub authoritative: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaStar {
    pub value: f64,
    /// β* is an element of the identified set, not a bound on it.
    pub bounding_set_caveat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSignChange {
    #[serde(with = "crate::serde_ext")]
    pub m: f64,
    #[serde(flatten)]
    pub result: SignChange,
}

/// Every breakdown quantity for one R²_long, assembled once so that tables
/// and JSON carry identical numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub r2long: f64,
    pub beta_med: f64,
    pub beta_short: f64,
    pub explain_away: Option<f64>,
    pub explain_away_signed: Option<f64>,
    pub sign_change: Option<SignChange>,
    pub sign_change_restricted: Vec<RestrictedSignChange>,
    pub naive_incorrect: Option<NaiveValue>,
    pub beta_star: Option<BetaStar>,
    pub delta_one_adjustment: Option<f64>,
    pub proportionality: Option<Proportionality>,
    pub warnings: Vec<String>,
}

impl BreakdownReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub const NAIVE_NOTE: &str = "incorrect approximation; not a valid breakdown point";

/// Build the report. `ms` lists magnitude bounds (absolute, already
/// resolved) for the restricted sign-change values.
pub fn breakdown_report(
    summary: &RegressionSummary,
    r2long: f64,
    ms: &[f64],
) -> Result<BreakdownReport> {
    let r2 = check_r2long(r2long, summary)?.value;
    let mut warnings = Vec::new();
    let mut note = |what: &str, e: &Error| warnings.push(format!("{what}: {e}"));

    let ea = bp_explain_away(summary, r2)
        .map_err(|e| note("explain-away", &e))
        .ok();
    let sc = bp_sign_change(summary, r2, None)
        .map_err(|e| note("sign-change", &e))
        .ok();
    let mut restricted = Vec::new();
    for &m in ms {
        match bp_sign_change(summary, r2, Some(m)) {
            Ok(result) => restricted.push(RestrictedSignChange { m, result }),
            Err(e) => note("sign-change (restricted)", &e),
        }
    }
    let naive = naive_breakdown(summary, r2)
        .map(|value| NaiveValue {
            value,
            authoritative: false,
            note: NAIVE_NOTE.into(),
        })
        .map_err(|e| note("naive", &e))
        .ok();
    let bs = beta_star(summary, 1.0, r2)
        .map(|value| BetaStar {
            value,
            bounding_set_caveat: true,
        })
        .map_err(|e| note("beta*", &e))
        .ok();
    let p1 = delta_one_adjust(summary, r2)
        .map_err(|e| note("δ = 1 adjustment", &e))
        .ok();
    let prop = proportionality_diagnostic(summary)
        .map_err(|e| note("proportionality", &e))
        .ok();
    if let (Some(_), Some(p)) = (p1, prop) {
        if !p.proportional {
            warnings.push(format!(
                "gamma_med is not proportional to pi1 (relative residual {:.3e}); the δ = 1 adjustment is not valid",
                p.rel_residual
            ));
        }
    }
    Ok(BreakdownReport {
        r2long: r2,
        beta_med: summary.beta_med,
        beta_short: summary.beta_short,
        explain_away: ea.map(|e| e.magnitude),
        explain_away_signed: ea.map(|e| e.signed),
        sign_change: sc,
        sign_change_restricted: restricted,
        naive_incorrect: naive,
        beta_star: bs,
        delta_one_adjustment: p1,
        proportionality: prop,
        warnings,
    })
}

/// δ value at b, for callers that only need the number.
pub fn delta_at(summary: &RegressionSummary, r2long: f64, b: f64) -> Option<f64> {
    match DeltaCurve::new(summary, r2long).at_b(b) {
        DeltaAt::Finite(d) => Some(d),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{demo1_summary, DEMO1_R2};

    fn summary_with(gamma: Vec<f64>, pi: Vec<f64>) -> RegressionSummary {
        let mut s = demo1_summary();
        let k = gamma.len();
        s.var_w1 = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        s.v_pi = pi.iter().map(|p| p * p).sum();
        s.c_g = gamma.iter().zip(&pi).map(|(g, p)| g * p).sum();
        s.v_g = gamma.iter().map(|g| g * g).sum();
        s.gamma_med = gamma;
        s.pi1 = pi;
        s
    }

    #[test]
    fn interval_relaxation_breakdowns() {
        let map = IntervalRelaxation { center: 4.0 / 3.0 };
        let g = GridSpec::default();
        let e0 = generic_bp_exact(&map, 0.0, &g);
        assert!((e0.value - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(generic_bp_exact(&map, 4.0 / 3.0, &g).value, 0.0);
        let sc = generic_bp_sign(&map, 4.0 / 3.0, &g).unwrap();
        // equality holds bit for bit: same predicate path
        assert_eq!(sc.value, e0.value);
        assert!(sc.attained);
        assert_eq!(generic_bp_sign(&map, 0.0, &g), Err(Error::ZeroBaseline));
    }

    #[test]
    fn interval_relaxation_duality() {
        // rebuilding {b : bp(b) ≤ r} recovers B(r)
        let map = IntervalRelaxation { center: -0.7 };
        let g = GridSpec::default();
        let r = 1.0;
        for k in 0..=1000 {
            let b = -3.0 + 4.0 * k as f64 / 1000.0;
            let bp = generic_bp_exact(&map, b, &g).value;
            let rebuilt = bp <= r + 1e-12;
            let direct = map.eval(r).contains(b);
            if (b + 0.7).abs() - r != 0.0 && ((b + 0.7).abs() - r).abs() > 1e-9 {
                assert_eq!(rebuilt, direct, "b = {b}");
            }
        }
    }

    #[test]
    fn demo1_cumulative_map() {
        let s = demo1_summary();
        let map = CumulativeDeltaMap {
            summary: s.clone(),
            r2long: DEMO1_R2,
            m: None,
        };
        let g = GridSpec::default();
        let ex = generic_bp_exact(&map, 0.0, &g);
        assert!((ex.value - 2.0).abs() < 1e-6, "{ex:?}");
        let sc = generic_bp_sign(&map, s.beta_med, &g).unwrap();
        assert!((sc.value - 1.0).abs() < 1e-6, "{sc:?}");
        assert!(!sc.attained);
        assert!(spot_check_monotone(&map, &[0.0, 0.5, 1.0, 1.5, 2.0, 5.0]));
    }

    #[test]
    fn demo1_closed_forms() {
        let s = demo1_summary();
        let ea = bp_explain_away(&s, DEMO1_R2).unwrap();
        assert!((ea.signed - 2.0).abs() < 1e-12 && (ea.magnitude - 2.0).abs() < 1e-12);

        let sc = bp_sign_change(&s, DEMO1_R2, None).unwrap();
        assert!((sc.value - 1.0).abs() < 1e-12);
        assert!(!sc.attained && !sc.precluded);

        let scm = bp_sign_change(&s, DEMO1_R2, Some(8.0 / 3.0)).unwrap();
        assert!((scm.value - 52.0 / 33.0).abs() < 1e-12, "{scm:?}");
        assert!(scm.attained);
        assert!((scm.argmin.unwrap() + 4.0 / 3.0).abs() < 1e-12);

        let pre = bp_sign_change(&s, DEMO1_R2, Some(1.0)).unwrap();
        assert!(pre.precluded && pre.value.is_infinite());

        assert!((naive_breakdown(&s, DEMO1_R2).unwrap() - 10.0).abs() < 1e-12);
        assert!((delta_one_adjust(&s, DEMO1_R2).unwrap() - 1.2).abs() < 1e-12);
        assert_eq!(delta_one_adjust(&s, s.r2_med).unwrap(), s.beta_med);
        assert!((beta_star(&s, 2.0, DEMO1_R2).unwrap() - 1.0).abs() < 1e-12);
        assert!((beta_star(&s, 1.0, DEMO1_R2).unwrap() - 1.2).abs() < 1e-12);
        assert!((beta_star(&s, 0.0, DEMO1_R2).unwrap() - s.beta_med).abs() < 1e-12);
    }

    #[test]
    fn sign_change_monotone_in_m() {
        let s = demo1_summary();
        let mut prev = f64::INFINITY;
        for m in [
            4.0 / 3.0,
            1.5,
            2.0,
            8.0 / 3.0,
            5.0,
            50.0,
            1e4,
            f64::INFINITY,
        ] {
            let v = bp_sign_change(&s, DEMO1_R2, Some(m)).unwrap().value;
            assert!(v <= prev + 1e-12, "M = {m}: {v} > {prev}");
            prev = v;
        }
        assert_eq!(prev, bp_sign_change(&s, DEMO1_R2, None).unwrap().value);
        let at_edge = bp_sign_change(&s, DEMO1_R2, Some(4.0 / 3.0)).unwrap();
        assert!((at_edge.value - 2.0).abs() < 1e-12 && at_edge.attained);
    }

    #[test]
    fn naive_sign_mismatch() {
        // beta_short below beta_med: the naive value flips sign
        let mut s = demo1_summary();
        s.beta_short = 1.0;
        assert!(naive_breakdown(&s, DEMO1_R2).unwrap() < 0.0);
        let mut z = demo1_summary();
        z.beta_med = 0.0;
        assert_eq!(naive_breakdown(&z, DEMO1_R2).unwrap(), 0.0);
    }

    #[test]
    fn proportionality_cases() {
        let p = proportionality_diagnostic(&summary_with(vec![1.0, 2.0], vec![2.0, 4.0])).unwrap();
        assert!(p.proportional);
        assert!((p.c_med - 0.5).abs() < 1e-15);
        assert!(p.rel_residual < 1e-15);

        let q = proportionality_diagnostic(&summary_with(vec![1.0, 0.0], vec![0.0, 1.0])).unwrap();
        assert!(!q.proportional);
        assert_eq!(q.c_med, 0.0);
        assert!((q.rel_residual - 1.0).abs() < 1e-15);

        let d = proportionality_diagnostic(&demo1_summary()).unwrap();
        assert!(d.proportional && (d.c_med - 5.0 / 3.0).abs() < 1e-12 && d.rel_residual == 0.0);

        assert_eq!(
            proportionality_diagnostic(&summary_with(vec![1.0], vec![0.0])),
            Err(Error::ZeroPi)
        );
    }

    #[test]
    fn report_round_trip() {
        let s = demo1_summary();
        let r = breakdown_report(&s, DEMO1_R2, &[8.0 / 3.0, 1.0]).unwrap();
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        let json = r.to_json();
        assert!(json.contains("\"authoritative\": false"));
        assert!(json.contains("\"bounding_set_caveat\": true"));
        assert!(json.contains("\"+inf\""));
        assert_eq!(BreakdownReport::from_json(&json).unwrap(), r);
        let sc = r.sign_change.unwrap();
        assert!(sc.value <= r.explain_away.unwrap() + 1e-9);
    }

    #[test]
    fn fixed_delta_map_is_a_deviation() {
        let s = demo1_summary();
        let map = FixedDeltaMap {
            summary: s,
            r2long: DEMO1_R2,
        };
        assert_eq!(map.kind(), MapKind::Deviation);
        assert!(!spot_check_monotone(&map, &[0.0, 2.0]));
    }
}
