//! Full data-generating processes over `(Y, X, W1..., W2)`, including the
//! unobserved control `W2`.
//!
//! Used three ways: random ground-truth instances whose implied δ, R²_long
//! and long coefficient exercise the other modules; the constructive
//! extension that turns any identified-set element into a covariance matrix
//! realising it; and Gaussian sampling for finite-sample checks.
//!
//! `W2` is scalar with `Var(W2) = 1` and `Cov(W1, W2) = 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::breakdown::{bp_explain_away, bp_sign_change};
use crate::error::{Error, Result};
use crate::idset::{self, cubic_coefficients, solve_identified_set, CubicCoeffs};
use crate::linalg;
use crate::moments::{check_r2long, summarize, Dataset, MomentMatrix, RegressionSummary, Roles};

/// RNG stream tags, so different uses of one seed never share draws.
const STREAM_DGP: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_TRIPLE: u64 = 3;

/// Draws before [`random_dgp`] gives up.
pub const REJECTION_BUDGET: usize = 10_000;
/// Minimum separation, relative to the natural scale, of beta_short from
/// beta_med and of c_g from zero.
pub const SEPARATION: f64 = 0.05;

/// A complete second-moment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullDgp {
    /// Variable names in covariance order: y, x, w1_1.., w2.
    pub order: Vec<String>,
    pub cov: Vec<Vec<f64>>,
    pub beta_long: f64,
    pub gamma1_long: Vec<f64>,
    pub gamma2_long: f64,
    pub pi1: Vec<f64>,
    pub pi2: f64,
    /// var(Y^{⊥X,W})
    pub var_y_resid: f64,
    /// var(X^{⊥W})
    pub var_x_resid: f64,
    pub seed: Option<u64>,
}

fn names(k: usize) -> Vec<String> {
    let mut v = vec!["y".to_string(), "x".to_string()];
    v.extend((1..=k).map(|i| format!("w1_{i}")));
    v.push("w2".into());
    v
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn structural_cov(
    beta_long: f64,
    gamma1: &[f64],
    gamma2: f64,
    pi1: &[f64],
    pi2: f64,
    var_w1: &DMatrix<f64>,
    var_x_resid: f64,
    var_y_resid: f64,
) -> DMatrix<f64> {
    let k = gamma1.len();
    let kw = k + 1;
    let mut var_w = DMatrix::<f64>::zeros(kw, kw);
    var_w.view_mut((0, 0), (k, k)).copy_from(var_w1);
    var_w[(k, k)] = 1.0;
    let pi = DVector::from_column_slice(pi1).push(pi2);
    let gamma = DVector::from_column_slice(gamma1).push(gamma2);
    let cov_w_x = &var_w * &pi;
    let var_x = pi.dot(&cov_w_x) + var_x_resid;
    let cov_w_y = &cov_w_x * beta_long + &var_w * &gamma;
    let cov_x_y = beta_long * var_x + gamma.dot(&cov_w_x);
    let var_y = beta_long * beta_long * var_x
        + 2.0 * beta_long * gamma.dot(&cov_w_x)
        + gamma.dot(&(&var_w * &gamma))
        + var_y_resid;
    let d = kw + 2;
    let mut s = DMatrix::<f64>::zeros(d, d);
    s[(0, 0)] = var_y;
    s[(0, 1)] = cov_x_y;
    s[(1, 0)] = cov_x_y;
    s[(1, 1)] = var_x;
    for i in 0..kw {
        s[(0, 2 + i)] = cov_w_y[i];
        s[(2 + i, 0)] = cov_w_y[i];
        s[(1, 2 + i)] = cov_w_x[i];
        s[(2 + i, 1)] = cov_w_x[i];
    }
    s.view_mut((2, 2), (kw, kw)).copy_from(&var_w);
    s
}

impl FullDgp {
    /// Build from structural coefficients and noise variances.
    #[allow(clippy::too_many_arguments)]
    pub fn from_structural(
        beta_long: f64,
        gamma1_long: Vec<f64>,
        gamma2_long: f64,
        pi1: Vec<f64>,
        pi2: f64,
        var_w1: &DMatrix<f64>,
        var_x_resid: f64,
        var_y_resid: f64,
    ) -> Result<Self> {
        let k = gamma1_long.len();
        if k == 0 || pi1.len() != k || var_w1.nrows() != k || var_w1.ncols() != k {
            return Err(Error::InvalidArgument("inconsistent W1 dimensions".into()));
        }
        if !(var_x_resid > 0.0) || !(var_y_resid >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise variances must be positive".into(),
            ));
        }
        let cov = structural_cov(
            beta_long,
            &gamma1_long,
            gamma2_long,
            &pi1,
            pi2,
            var_w1,
            var_x_resid,
            var_y_resid,
        );
        let dgp = FullDgp {
            order: names(k),
            cov: to_rows(&cov),
            beta_long,
            gamma1_long,
            gamma2_long,
            pi1,
            pi2,
            var_y_resid,
            var_x_resid,
            seed: None,
        };
        dgp.validate()?;
        Ok(dgp)
    }

    /// The demonstration model with scalar W1 used throughout the tests.
    pub fn demo1() -> Self {
        FullDgp::from_structural(
            1.0,
            vec![1.0],
            0.5,
            vec![0.5],
            0.5,
            &DMatrix::from_element(1, 1, 1.0),
            0.5,
            1.0,
        )
        .expect("demo model is valid")
    }

    pub fn dim_w1(&self) -> usize {
        self.gamma1_long.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.cov.len();
        DMatrix::from_fn(d, d, |i, j| self.cov[i][j])
    }

    pub fn var_w1(&self) -> DMatrix<f64> {
        let k = self.dim_w1();
        self.cov_matrix().view((2, 2), (k, k)).into_owned()
    }

    /// Positive definiteness, nonzero control coefficients, `Cov(W1, W2) = 0`
    /// and `Var(W2) = 1`.
    pub fn validate(&self) -> Result<()> {
        let k = self.dim_w1();
        let s = self.cov_matrix();
        let d = k + 3;
        if s.nrows() != d {
            return Err(Error::InvalidArgument(
                "covariance has the wrong size".into(),
            ));
        }
        linalg::require_positive_definite(
            &s.view((1, 1), (d - 1, d - 1)).into_owned(),
            "Var(X, W1, W2)",
        )?;
        linalg::require_positive_definite(
            &s.view((0, 0), (k + 2, k + 2)).into_owned(),
            "Var(Y, X, W1)",
        )?;
        if self.gamma1_long.iter().all(|g| *g == 0.0) {
            return Err(Error::ZeroControlCoefficient("gamma1_long is zero".into()));
        }
        if self.gamma2_long == 0.0 {
            return Err(Error::ZeroControlCoefficient("gamma2_long is zero".into()));
        }
        if (0..k).any(|i| s[(2 + i, d - 1)] != 0.0) {
            return Err(Error::InvalidArgument("Cov(W1, W2) must be zero".into()));
        }
        if s[(d - 1, d - 1)] != 1.0 {
            return Err(Error::InvalidArgument("Var(W2) must be one".into()));
        }
        Ok(())
    }

    /// Largest entrywise gap, relative to the largest variance, between the
    /// stored covariance and the one implied by the structural fields.
    pub fn consistency_residual(&self) -> f64 {
        let s = self.cov_matrix();
        let rebuilt = structural_cov(
            self.beta_long,
            &self.gamma1_long,
            self.gamma2_long,
            &self.pi1,
            self.pi2,
            &self.var_w1(),
            self.var_x_resid,
            self.var_y_resid,
        );
        (s - rebuilt).amax() / self.cov_matrix().diagonal().amax()
    }

    /// Covariance of the observed variables `(Y, X, W1)`.
    pub fn observed_moments(&self) -> Result<MomentMatrix> {
        let k = self.dim_w1();
        let s = self.cov_matrix().view((0, 0), (k + 2, k + 2)).into_owned();
        MomentMatrix::new(self.order[..k + 2].to_vec(), s, Default::default())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dgp serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: FullDgp = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }
}

/// Population quantities implied by a [`FullDgp`], computed from its
/// covariance matrix alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedParams {
    pub delta_true: f64,
    pub r2_long_true: f64,
    pub beta_long: f64,
    /// beta_med - beta_long
    pub bias: f64,
    pub gamma1_long: Vec<f64>,
    pub gamma2_long: f64,
    pub pi1: Vec<f64>,
    pub pi2: f64,
    pub summary: RegressionSummary,
}

pub fn implied_params(dgp: &FullDgp) -> Result<ImpliedParams> {
    let s = dgp.cov_matrix();
    let k = dgp.dim_w1();
    let d = k + 3;
    let var_y = s[(0, 0)];
    let var_xw = s.view((1, 1), (d - 1, d - 1)).into_owned();
    let cov_xw_y: DVector<f64> = s.view((1, 0), (d - 1, 1)).column(0).into_owned();
    let coef = linalg::solve(&var_xw, &cov_xw_y, "Var(X, W1, W2)")?;
    let r2_long = coef.dot(&cov_xw_y) / var_y;
    let beta_long = coef[0];
    let g1: Vec<f64> = coef.rows(1, k).iter().copied().collect();
    let g2 = coef[k + 1];

    let var_w = s.view((2, 2), (k + 1, k + 1)).into_owned();
    let cov_w_x: DVector<f64> = s.view((2, 1), (k + 1, 1)).column(0).into_owned();
    let p = linalg::solve(&var_w, &cov_w_x, "Var(W1, W2)")?;
    let pi1: Vec<f64> = p.rows(0, k).iter().copied().collect();
    let pi2 = p[k];

    if g1.iter().all(|g| *g == 0.0) || g2 == 0.0 {
        return Err(Error::ZeroControlCoefficient(
            "a long-regression control coefficient is zero".into(),
        ));
    }
    // δ = [cov(X, g2 W2)/var(g2 W2)] / [cov(X, g1'W1)/var(g1'W1)]
    let var_w1 = s.view((2, 2), (k, k)).into_owned();
    let g1v = DVector::from_column_slice(&g1);
    let cov_x_w1: DVector<f64> = s.view((2, 1), (k, 1)).column(0).into_owned();
    let cov_x_g1 = g1v.dot(&cov_x_w1);
    let var_g1 = g1v.dot(&(&var_w1 * &g1v));
    if cov_x_g1 == 0.0 {
        return Err(Error::ZeroControlCoefficient(
            "cov(X, gamma1_long'W1) is zero".into(),
        ));
    }
    let cov_x_w2 = s[(1, d - 1)];
    let var_w2 = s[(d - 1, d - 1)];
    let ratio2 = g2 * cov_x_w2 / (g2 * g2 * var_w2);
    let delta_true = ratio2 * var_g1 / cov_x_g1;

    let summary = summarize(&dgp.observed_moments()?)?;
    Ok(ImpliedParams {
        delta_true,
        r2_long_true: r2_long,
        beta_long,
        bias: summary.beta_med - beta_long,
        gamma1_long: g1,
        gamma2_long: g2,
        pi1,
        pi2,
        summary,
    })
}

/// Relative residuals of the regression-algebra identities linking the
/// long, medium and short regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// gamma1_long = gamma_med + B·pi1
    pub gamma1: f64,
    /// pi2·gamma2_long = B·var(X^{⊥W1})
    pub pi2_gamma2: f64,
    /// cov(X, gamma_med'W1) = (beta_short - beta_med)·var(X)
    pub c_g: f64,
    /// (R²_med - R²_short)·var(Y) = var(gamma_med'W1) - var(X)(beta_short - beta_med)²
    pub v_g: f64,
    /// the cubic link between δ, R²_long and B
    pub selection_equation: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.gamma1,
            self.pi2_gamma2,
            self.c_g,
            self.v_g,
            self.selection_equation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn regression_identity_residuals(p: &ImpliedParams) -> IdentityResiduals {
    let s = &p.summary;
    let b = p.bias;
    let v = s.v_x_perp_w1;
    let sxy = (s.var_x * s.var_y).sqrt();

    let mut gmax = 0.0f64;
    let mut gscale = f64::MIN_POSITIVE;
    for i in 0..s.dim_w1() {
        let rhs = s.gamma_med[i] + b * s.pi1[i];
        gmax = gmax.max((p.gamma1_long[i] - rhs).abs());
        gscale = gscale
            .max(p.gamma1_long[i].abs())
            .max(s.gamma_med[i].abs())
            .max((b * s.pi1[i]).abs());
    }
    let pg = p.pi2 * p.gamma2_long;
    let pi2_gamma2 = (pg - b * v).abs() / sxy.max(pg.abs());

    let dcoef = s.beta_short - s.beta_med;
    let c_g = (s.c_g - dcoef * s.var_x).abs() / sxy.max(s.c_g.abs());
    let lhs = (s.r2_med - s.r2_short) * s.var_y;
    let rhs = s.v_g - s.var_x * dcoef * dcoef;
    let v_g = (lhs - rhs).abs() / s.var_y.max(s.v_g.abs());

    let g1 = &p.gamma1_long;
    let var_g1 = s.quad_w1(g1);
    let cov_x_g1: f64 = {
        let mut acc = 0.0;
        for i in 0..g1.len() {
            for j in 0..g1.len() {
                acc += g1[i] * s.var_w1[i][j] * s.pi1[j];
            }
        }
        acc
    };
    let d = p.delta_true;
    let l = (p.r2_long_true - s.r2_med) * s.var_y * d * cov_x_g1;
    let r1 = b * v * var_g1;
    let r2 = b * v * b * d * cov_x_g1;
    let scale = l.abs() + r1.abs() + r2.abs();
    let selection_equation = if scale == 0.0 {
        0.0
    } else {
        (l - (r1 - r2)).abs() / scale
    };

    IdentityResiduals {
        gamma1: gmax / gscale,
        pi2_gamma2,
        c_g,
        v_g,
        selection_equation,
    }
}

/// Gaps in the determinant identity of a constructed extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantCheck {
    /// `Var(Y) - Cov(Y,·) Var(X,W)⁻¹ Cov(·,Y)` minus `Var(Y)(1 - R²_long)`,
    /// relative to Var(Y).
    pub schur: f64,
    /// `det Σ` minus `det Var(X,W) · Var(Y)(1 - R²_long)`, relative to
    /// `det Var(X,W) · Var(Y)`.
    pub det: f64,
}

pub fn determinant_check(dgp: &FullDgp, r2long: f64) -> Result<DeterminantCheck> {
    let s = dgp.cov_matrix();
    let d = s.nrows();
    let var_y = s[(0, 0)];
    let a = s.view((1, 1), (d - 1, d - 1)).into_owned();
    let c: DVector<f64> = s.view((1, 0), (d - 1, 1)).column(0).into_owned();
    let sol = linalg::solve(&a, &c, "Var(X, W1, W2)")?;
    let schur = var_y - c.dot(&sol);
    let target = var_y * (1.0 - r2long);
    let det_a = a.determinant();
    let det = s.determinant();
    Ok(DeterminantCheck {
        schur: (schur - target).abs() / var_y,
        det: (det - det_a * target).abs() / (det_a.abs() * var_y),
    })
}

/// Build a full model whose observed block is `m` and whose implied long
/// coefficient, δ and R²_long are `(b, delta, r2long)`. Requires that `b`
/// be in the identified set for `(delta, r2long)`.
pub fn construct_extension(m: &MomentMatrix, b: f64, delta: f64, r2long: f64) -> Result<FullDgp> {
    let s = summarize(m)?;
    let r2 = check_r2long(r2long, &s)?;
    if r2.degenerate {
        return Err(Error::Precondition("R²_long must exceed R²_med".into()));
    }
    let bias = s.beta_med - b;
    let cubic = cubic_coefficients(&s, delta, r2.value);
    let res = cubic.eval(bias).abs();
    if res > 1e-8 * cubic.residual_scale(bias) {
        return Err(Error::Precondition(format!(
            "b = {b} is not in the identified set (cubic residual {res:.3e})"
        )));
    }
    if let Some(bf) = idset::null_control_info(&s).b_fail {
        if (b - bf).abs() <= idset::exclusion_tol(s.beta_med) {
            return Err(Error::NullControlPoint(b));
        }
    }
    let k = s.dim_w1();
    let v = s.v_x_perp_w1;
    let g1: Vec<f64> = s
        .gamma_med
        .iter()
        .zip(&s.pi1)
        .map(|(g, p)| g + bias * p)
        .collect();
    let g2 = ((r2.value - s.r2_med) * s.var_y + bias * bias * v).sqrt();
    let p2 = bias * v / g2;

    let d = k + 3;
    let obs = m.cov();
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    sigma.view_mut((0, 0), (k + 2, k + 2)).copy_from(obs);
    sigma[(0, d - 1)] = b * p2 + g2;
    sigma[(d - 1, 0)] = b * p2 + g2;
    sigma[(1, d - 1)] = p2;
    sigma[(d - 1, 1)] = p2;
    sigma[(d - 1, d - 1)] = 1.0;
    linalg::clip_psd(&sigma, "extended covariance")?;

    let dgp = FullDgp {
        order: names(k),
        cov: to_rows(&sigma),
        beta_long: b,
        gamma1_long: g1,
        gamma2_long: g2,
        pi1: s.pi1.clone(),
        pi2: p2,
        var_y_resid: (s.var_y * (1.0 - r2.value)).max(0.0),
        var_x_resid: v - p2 * p2,
        seed: None,
    };
    dgp.validate()?;
    Ok(dgp)
}

/// Shape of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpDims {
    pub dim_w1: usize,
    /// Draw gamma1_long as a multiple of pi1, so that gamma_med ∝ pi1.
    pub force_proportional: bool,
}

impl DgpDims {
    pub fn scalar() -> Self {
        DgpDims {
            dim_w1: 1,
            force_proportional: false,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn signed_range(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Why a draw was rejected, or `None` when it is accepted.
fn rejection(dgp: &FullDgp) -> Option<&'static str> {
    let Ok(p) = implied_params(dgp) else {
        return Some("implied parameters undefined");
    };
    let s = &p.summary;
    let coef_scale = (s.var_y / s.var_x).sqrt();
    if (s.beta_short - s.beta_med).abs() < SEPARATION * coef_scale {
        return Some("beta_short too close to beta_med");
    }
    if s.c_g.abs() < SEPARATION * (s.var_x * s.var_y).sqrt() {
        return Some("c_g too close to zero");
    }
    // conditioning guards on the implied sensitivity parameters
    if !(p.delta_true.abs() <= 20.0) {
        return Some("|delta| too large");
    }
    if p.r2_long_true - s.r2_med < 1e-3 {
        return Some("R²_long too close to R²_med");
    }
    let g_norm = s.quad_w1(&p.gamma1_long).sqrt();
    if g_norm < 1e-3 * coef_scale {
        return Some("gamma1_long nearly zero");
    }
    None
}

/// A random model, deterministic in `seed`.
///
/// Draws: Var(W1) = AAᵀ/k + diag(U[0.3, 1]) with A ~ U[-1, 1] (a U[0.5, 2]
/// variance when k = 1); pi1 ~ U[-1, 1]; |pi2| ~ U[0.1, 1]; var(X^{⊥W}) ~
/// U[0.2, 1.5]; beta_long ~ U[-2, 2]; gamma1_long ~ U[-1, 1] (or C·pi1 with
/// |C| ~ U[0.2, 2] when forced proportional); |gamma2_long| ~ U[0.2, 1.5];
/// var(Y^{⊥X,W}) ~ U[0.2, 2]. Draws with a singular covariance or a zero control coefficient, with beta_short within
/// [`SEPARATION`] of beta_med, |δ| > 20 or R²_long - R²_med < 1e-3 are
/// redrawn.
pub fn random_dgp(seed: u64, dims: DgpDims) -> Result<FullDgp> {
    if dims.dim_w1 == 0 {
        return Err(Error::NoCalibrationControls);
    }
    let k = dims.dim_w1;
    let mut rng = rng_for(seed, STREAM_DGP);
    for _ in 0..REJECTION_BUDGET {
        let var_w1 = if k == 1 {
            DMatrix::from_element(1, 1, rng.random_range(0.5..2.0))
        } else {
            let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let diag = DVector::from_fn(k, |_, _| rng.random_range(0.3..1.0));
            a.clone() * a.transpose() / k as f64 + DMatrix::from_diagonal(&diag)
        };
        let pi1: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pi2 = signed_range(&mut rng, 0.1, 1.0);
        let var_x_resid = rng.random_range(0.2..1.5);
        let beta_long = rng.random_range(-2.0..2.0);
        let gamma1: Vec<f64> = if dims.force_proportional {
            let c = signed_range(&mut rng, 0.2, 2.0);
            pi1.iter().map(|p| c * p).collect()
        } else {
            (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let gamma2 = signed_range(&mut rng, 0.2, 1.5);
        let var_y_resid = rng.random_range(0.2..2.0);
        let Ok(mut dgp) = FullDgp::from_structural(
            beta_long,
            gamma1,
            gamma2,
            pi1,
            pi2,
            &var_w1,
            var_x_resid,
            var_y_resid,
        ) else {
            continue;
        };
        if rejection(&dgp).is_none() {
            dgp.seed = Some(seed);
            return Ok(dgp);
        }
    }
    Err(Error::RejectionBudget(REJECTION_BUDGET))
}

/// `n` Gaussian draws from the model; only `(Y, X, W1)` are returned.
pub fn sample_dataset(dgp: &FullDgp, n: usize, seed: u64) -> Result<Dataset> {
    let d = dgp.cov.len();
    if n < d + 2 {
        return Err(Error::TooFewRows {
            rows: n,
            columns: d,
            needed: d + 2,
        });
    }
    let l = linalg::psd_cholesky(&dgp.cov_matrix(), "model covariance")?;
    let k = dgp.dim_w1();
    let mut rng = rng_for(seed, STREAM_SAMPLE);
    let mut cols = vec![Vec::with_capacity(n); k + 2];
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for (i, col) in cols.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += l[(i, j)] * zj;
            }
            col.push(acc);
        }
    }
    let w1_names: Vec<&str> = dgp.order[2..k + 2].iter().map(String::as_str).collect();
    let roles = Roles::new("y", "x", &[], &w1_names);
    let mut it = cols.into_iter();
    let y = it.next().unwrap_or_default();
    let x = it.next().unwrap_or_default();
    Dataset::new(roles, y, x, Vec::new(), it.collect())
}

/// Independent δ(b): the selection ratio evaluated on the extension built
/// for `b`, computed from covariance algebra rather than from the cubic.
pub fn delta_by_construction(s: &RegressionSummary, r2long: f64, b: f64) -> f64 {
    let bias = s.beta_med - b;
    let v = s.v_x_perp_w1;
    let g1: Vec<f64> = s
        .gamma_med
        .iter()
        .zip(&s.pi1)
        .map(|(g, p)| g + bias * p)
        .collect();
    let var_g1 = s.quad_w1(&g1);
    let mut cov_x_g1 = 0.0;
    for i in 0..g1.len() {
        for j in 0..g1.len() {
            cov_x_g1 += g1[i] * s.var_w1[i][j] * s.pi1[j];
        }
    }
    let g2_sq = (r2long - s.r2_med) * s.var_y + bias * bias * v;
    // g2·p2 = B·V and var(g2 W2) = g2²
    (bias * v / g2_sq) * (var_g1 / cov_x_g1)
}

/// Seed for instance `i` of a suite run with `seed` (SplitMix64 mixing).
pub fn instance_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Dimensions cycled through by the suites.
pub fn suite_dims(i: usize) -> DgpDims {
    DgpDims {
        dim_w1: 1 + i % 3,
        force_proportional: i % 5 == 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    /// Added to c3 (times the largest cubic coefficient) before root finding;
    /// used to check that the suites detect a broken solver.
    pub c3_fault: Option<f64>,
}

impl SuiteConfig {
    pub fn new(seed: u64, instances: usize) -> Self {
        SuiteConfig {
            seed,
            instances,
            c3_fault: None,
        }
    }
}

/// A failing instance, replayable from the stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteFailure {
    pub index: usize,
    pub seed: u64,
    pub detail: String,
    pub dgp: Option<FullDgp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub instances: usize,
    pub checks: usize,
    /// Largest error measure seen (suite specific).
    pub worst: f64,
    pub failures: Vec<SuiteFailure>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct InstanceResult {
    checks: usize,
    worst: f64,
    failure: Option<SuiteFailure>,
}

fn run_instances<F>(name: &str, cfg: &SuiteConfig, f: F) -> SuiteOutcome
where
    F: Fn(usize, u64) -> InstanceResult + Sync + Send,
{
    let run = |i: usize| f(i, instance_seed(cfg.seed, i));
    #[cfg(feature = "parallel")]
    let results: Vec<InstanceResult> = {
        use rayon::prelude::*;
        (0..cfg.instances).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<InstanceResult> = (0..cfg.instances).map(run).collect();
    let mut out = SuiteOutcome {
        name: name.to_string(),
        instances: cfg.instances,
        checks: 0,
        worst: 0.0,
        failures: Vec::new(),
    };
    for r in results {
        out.checks += r.checks;
        out.worst = out.worst.max(r.worst);
        out.failures.extend(r.failure);
    }
    out
}

fn fail(index: usize, seed: u64, detail: String, dgp: Option<FullDgp>) -> InstanceResult {
    InstanceResult {
        checks: 1,
        worst: f64::INFINITY,
        failure: Some(SuiteFailure {
            index,
            seed,
            detail,
            dgp,
        }),
    }
}

/// The true long coefficient lies in the identified set at the true δ and
/// R²_long.
pub fn membership_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    run_instances("membership", cfg, |i, seed| {
        let dgp = match random_dgp(seed, suite_dims(i)) {
            Ok(d) => d,
            Err(e) => return fail(i, seed, e.to_string(), None),
        };
        let p = match implied_params(&dgp) {
            Ok(p) => p,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let set = match solve_identified_set(&p.summary, p.delta_true, p.r2_long_true) {
            Ok(s) => s,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let err = set
            .roots
            .iter()
            .map(|b| (b - p.beta_long).abs() / (1.0 + p.beta_long.abs()))
            .fold(f64::INFINITY, f64::min);
        if err <= 1e-8 {
            InstanceResult {
                checks: 1,
                worst: err,
                failure: None,
            }
        } else {
            fail(
                i,
                seed,
                format!(
                    "beta_long = {} not in {:?} (gap {err:.3e})",
                    p.beta_long, set.roots
                ),
                Some(dgp),
            )
        }
    })
}

fn solve_with_fault(
    s: &RegressionSummary,
    delta: f64,
    r2long: f64,
    c3_fault: Option<f64>,
) -> Result<Vec<f64>> {
    match c3_fault {
        None => Ok(solve_identified_set(s, delta, r2long)?.roots),
        Some(eps) => {
            let c: CubicCoeffs = cubic_coefficients(s, delta, r2long);
            let scale = [c.c3, c.c2, c.c1, c.c0]
                .iter()
                .fold(0.0f64, |a, x| a.max(x.abs()));
            let faulty = CubicCoeffs {
                c3: c.c3 + eps * scale,
                ..c
            };
            Ok(faulty
                .poly()
                .real_roots()
                .into_iter()
                .map(|bias| s.beta_med - bias)
                .collect())
        }
    }
}

/// A random `(summary, δ, R²_long)` triple for the sharpness suite.
pub fn random_triple(seed: u64, i: usize) -> Result<(FullDgp, f64, f64)> {
    let dgp = random_dgp(seed, suite_dims(i))?;
    let s = summarize(&dgp.observed_moments()?)?;
    let mut rng = rng_for(seed, STREAM_TRIPLE);
    let delta = rng.random_range(-3.0..3.0);
    let r2 = s.r2_med + rng.random_range(0.05..1.0) * (1.0 - s.r2_med);
    Ok((dgp, delta, r2))
}

/// Every root at a random `(δ, R²_long)` is realised by a constructed model
/// whose implied parameters reproduce `(δ, R²_long, b)`.
pub fn sharpness_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let fault = cfg.c3_fault;
    run_instances("sharpness", cfg, move |i, seed| {
        let (dgp, delta, r2) = match random_triple(seed, i) {
            Ok(t) => t,
            Err(e) => return fail(i, seed, e.to_string(), None),
        };
        let m = match dgp.observed_moments() {
            Ok(m) => m,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let s = match summarize(&m) {
            Ok(s) => s,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let roots = match solve_with_fault(&s, delta, r2, fault) {
            Ok(r) => r,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let b_fail = idset::null_control_info(&s).b_fail;
        let tol = idset::exclusion_tol(s.beta_med);
        let mut worst = 0.0f64;
        let mut checks = 0;
        for b in roots {
            if b_fail.is_some_and(|bf| (b - bf).abs() <= tol) {
                continue;
            }
            checks += 1;
            let ext = match construct_extension(&m, b, delta, r2) {
                Ok(e) => e,
                Err(e) => {
                    return fail(
                        i,
                        seed,
                        format!("b = {b}, δ = {delta}, R² = {r2}: {e}"),
                        Some(dgp),
                    )
                }
            };
            let check = match (implied_params(&ext), determinant_check(&ext, r2)) {
                (Ok(p), Ok(det)) => {
                    let e_delta = (p.delta_true - delta).abs() / delta.abs().max(1.0);
                    let e_r2 = (p.r2_long_true - r2).abs();
                    let e_b = (p.beta_long - b).abs() / b.abs().max(1.0);
                    let e = e_delta.max(e_r2).max(e_b);
                    worst = worst.max(e);
                    if e > 1e-8 {
                        Err(format!(
                            "b = {b}: implied (δ, R², b) = ({}, {}, {}) vs ({delta}, {r2}, {b})",
                            p.delta_true, p.r2_long_true, p.beta_long
                        ))
                    } else if det.schur > 1e-9 || det.det > 1e-9 {
                        Err(format!("b = {b}: determinant identity off by {det:?}"))
                    } else {
                        Ok(())
                    }
                }
                (Err(e), _) | (_, Err(e)) => Err(format!("b = {b}: {e}")),
            };
            if let Err(detail) = check {
                return fail(i, seed, detail, Some(ext));
            }
        }
        InstanceResult {
            checks,
            worst,
            failure: None,
        }
    })
}

/// The regression-algebra identities hold on every accepted random model.
pub fn identity_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    run_instances("identities", cfg, |i, seed| {
        let dgp = match random_dgp(seed, suite_dims(i)) {
            Ok(d) => d,
            Err(e) => return fail(i, seed, e.to_string(), None),
        };
        match implied_params(&dgp) {
            Ok(p) => {
                let r = regression_identity_residuals(&p);
                let consistency = dgp.consistency_residual();
                let worst = r.max().max(consistency);
                if r.max() <= 1e-10 && consistency <= 1e-12 {
                    InstanceResult {
                        checks: 1,
                        worst,
                        failure: None,
                    }
                } else {
                    fail(
                        i,
                        seed,
                        format!("{r:?}, consistency {consistency:.3e}"),
                        Some(dgp),
                    )
                }
            }
            Err(e) => fail(i, seed, e.to_string(), Some(dgp)),
        }
    })
}

/// Result of the sign-change bound suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignBoundOutcome {
    pub outcome: SuiteOutcome,
    /// Largest explain-away / sign-change ratio seen.
    pub max_ratio: f64,
}

/// Without a magnitude bound the sign-change breakdown point never exceeds 1.
pub fn sign_bound_suite(cfg: &SuiteConfig) -> SignBoundOutcome {
    let ratios = std::sync::Mutex::new(Vec::new());
    let outcome = run_instances("sign-change bound", cfg, |i, seed| {
        let dgp = match random_dgp(seed, suite_dims(i)) {
            Ok(d) => d,
            Err(e) => return fail(i, seed, e.to_string(), None),
        };
        let p = match implied_params(&dgp) {
            Ok(p) => p,
            Err(e) => return fail(i, seed, e.to_string(), Some(dgp)),
        };
        let s = &p.summary;
        match bp_sign_change(s, p.r2_long_true, None) {
            Ok(sc) => {
                if let Ok(ea) = bp_explain_away(s, p.r2_long_true) {
                    if sc.value > 0.0 {
                        ratios
                            .lock()
                            .expect("ratio lock")
                            .push(ea.magnitude / sc.value);
                    }
                }
                if sc.value <= 1.0 + 1e-9 {
                    InstanceResult {
                        checks: 1,
                        worst: sc.value,
                        failure: None,
                    }
                } else {
                    fail(
                        i,
                        seed,
                        format!("sign-change breakdown {}", sc.value),
                        Some(dgp),
                    )
                }
            }
            Err(e) => fail(i, seed, e.to_string(), Some(dgp)),
        }
    });
    let max_ratio = ratios
        .into_inner()
        .expect("ratio lock")
        .into_iter()
        .fold(0.0, f64::max);
    SignBoundOutcome { outcome, max_ratio }
}

/// Minimum of |δ(b)| over opposite-sign b by brute force: `n` points of a
/// compactified grid over the feasible bias range, the value at the far end
/// taken as the limit, then golden-section refinement around the best grid
/// point. Independent of the critical-point method.
pub fn grid_sign_change(s: &RegressionSummary, r2long: f64, m: Option<f64>, n: usize) -> f64 {
    let beta = s.beta_med;
    let sign = beta.signum();
    let t0 = beta.abs();
    let m = m.unwrap_or(f64::INFINITY);
    if m < t0 {
        return f64::INFINITY;
    }
    let scale = 1.0 + t0;
    // u in [0, 1] → t in [t0, m]
    let t_of = |u: f64| -> f64 {
        if m.is_finite() {
            t0 + (m - t0) * u
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            t0 + scale * u / (1.0 - u)
        }
    };
    let g = |u: f64| -> f64 {
        let t = t_of(u);
        if t.is_infinite() {
            // ratio of leading coefficients
            return if s.v_pi > 0.0 { 1.0 } else { 0.0 };
        }
        let b = beta - sign * t;
        let d = delta_by_construction(s, r2long, b).abs();
        if d.is_nan() {
            // the null-control point, approached with δ → 0
            0.0
        } else {
            d
        }
    };
    let eval = |k: usize| g(k as f64 / (n - 1) as f64);
    #[cfg(feature = "parallel")]
    let vals: Vec<f64> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let vals: Vec<f64> = (0..n).map(eval).collect();
    let (k, &best) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let h = 1.0 / (n - 1) as f64;
    let (mut a, mut c) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
    a = a.max(0.0);
    c = c.min(1.0);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut refined = best;
    for _ in 0..80 {
        let x1 = c - phi * (c - a);
        let x2 = a + phi * (c - a);
        let (g1, g2) = (g(x1), g(x2));
        refined = refined.min(g1).min(g2);
        if g1 < g2 {
            c = x2;
        } else {
            a = x1;
        }
    }
    refined
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo1_implied() {
        let dgp = FullDgp::demo1();
        let p = implied_params(&dgp).unwrap();
        assert!((p.delta_true - 2.0).abs() < 1e-12);
        assert!((p.r2_long_true - 15.0 / 19.0).abs() < 1e-12);
        assert!((p.bias - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.beta_long - 1.0).abs() < 1e-12);
        assert!(regression_identity_residuals(&p).max() < 1e-12);
        let obs = dgp.observed_moments().unwrap().cov().clone();
        assert_eq!(obs[(1, 1)], 1.0);
        assert_eq!(obs[(0, 1)], 1.75);
        assert_eq!(obs[(0, 0)], 4.75);
        assert_eq!(obs[(0, 2)], 1.5);
    }

    #[test]
    fn zero_selection_on_unobservables() {
        // pi2 = 0 makes cov(X, gamma2 W2) vanish
        let dgp = FullDgp::from_structural(
            1.0,
            vec![1.0],
            0.5,
            vec![0.5],
            0.0,
            &DMatrix::from_element(1, 1, 1.0),
            0.5,
            1.0,
        )
        .unwrap();
        let p = implied_params(&dgp).unwrap();
        assert_eq!(p.delta_true, 0.0);
        assert!(regression_identity_residuals(&p).pi2_gamma2 < 1e-12);
    }

    #[test]
    fn demo1_extension() {
        let m = FullDgp::demo1().observed_moments().unwrap();
        let ext = construct_extension(&m, 1.0, 2.0, 15.0 / 19.0).unwrap();
        assert!((ext.gamma2_long - 0.5).abs() < 1e-12);
        assert!((ext.pi2 - 0.5).abs() < 1e-12);
        let orig = FullDgp::demo1().cov_matrix();
        assert!((ext.cov_matrix() - orig).amax() < 1e-12);
        let det = determinant_check(&ext, 15.0 / 19.0).unwrap();
        assert!(det.schur < 1e-12 && det.det < 1e-12);
        // the full determinant is det Var(X, W1, W2) times the Schur term
        let s = ext.cov_matrix();
        let lit = s.determinant();
        assert!((lit - 0.5 * 4.75 * (1.0 - 15.0 / 19.0)).abs() < 1e-12);
    }

    #[test]
    fn extension_edge_cases() {
        let m = FullDgp::demo1().observed_moments().unwrap();
        let s = summarize(&m).unwrap();
        let z = construct_extension(&m, s.beta_med, 0.0, 15.0 / 19.0).unwrap();
        assert_eq!(z.pi2, 0.0);
        assert!((z.gamma2_long - ((15.0 / 19.0 - s.r2_med) * s.var_y).sqrt()).abs() < 1e-12);
        // R²_long = 1 sits on the PSD boundary
        let set = solve_identified_set(&s, 2.0, 1.0).unwrap();
        for b in set.roots {
            let e = construct_extension(&m, b, 2.0, 1.0).unwrap();
            let det = determinant_check(&e, 1.0).unwrap();
            assert!(det.schur < 1e-9, "{det:?}");
            assert!(e.cov_matrix().determinant().abs() < 1e-9);
        }
        assert!(matches!(
            construct_extension(&m, 0.5, 2.0, 15.0 / 19.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn random_dgp_is_deterministic() {
        let a = random_dgp(7, DgpDims::scalar()).unwrap();
        let b = random_dgp(7, DgpDims::scalar()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_dgp(8, DgpDims::scalar()).unwrap());
        assert_eq!(FullDgp::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn forced_proportional_passes_diagnostic() {
        let dims = DgpDims {
            dim_w1: 3,
            force_proportional: true,
        };
        for seed in 0..20 {
            let d = random_dgp(seed, dims).unwrap();
            let s = summarize(&d.observed_moments().unwrap()).unwrap();
            assert!(idset::null_control_info(&s).proportional, "seed {seed}");
        }
    }

    #[test]
    fn sampling_guards_and_determinism() {
        let d = FullDgp::demo1();
        assert!(matches!(
            sample_dataset(&d, 5, 1),
            Err(Error::TooFewRows { .. })
        ));
        let a = sample_dataset(&d, 50, 1).unwrap();
        let b = sample_dataset(&d, 50, 1).unwrap();
        let c = sample_dataset(&d, 50, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn small_suites_pass() {
        let cfg = SuiteConfig::new(11, 40);
        assert!(membership_suite(&cfg).passed());
        assert!(identity_suite(&cfg).passed());
        let sh = sharpness_suite(&cfg);
        assert!(sh.passed(), "{:?}", sh.failures);
        assert!(sign_bound_suite(&cfg).outcome.passed());
    }

    #[test]
    fn faulty_solver_is_caught() {
        let cfg = SuiteConfig {
            c3_fault: Some(1e-3),
            ..SuiteConfig::new(11, 40)
        };
        assert!(!sharpness_suite(&cfg).passed());
    }

    #[test]
    fn grid_agrees_with_demo_values() {
        let s = summarize(&FullDgp::demo1().observed_moments().unwrap()).unwrap();
        let r2 = 15.0 / 19.0;
        assert!((grid_sign_change(&s, r2, None, 10_001) - 1.0).abs() < 1e-9);
        assert!((grid_sign_change(&s, r2, Some(8.0 / 3.0), 10_001) - 52.0 / 33.0).abs() < 1e-9);
    }
}
