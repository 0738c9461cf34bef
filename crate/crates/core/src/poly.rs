//! Real polynomials and their real roots.
//!
//! Real roots are peeled off one at a time: the largest-magnitude real
//! eigenvalue of the companion matrix of a rescaled, monic version of the
//! polynomial is Newton-polished, divided out, and the process repeats until
//! a quadratic remains. For cubics the closed-form discriminant decides how
//! many real roots there are.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

/// Relative threshold below which a leading coefficient is treated as zero.
pub const DEGREE_REL_TOL: f64 = 1e-12;

/// Polynomial with coefficients in ascending order of powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    /// The identity polynomial `x`.
    pub fn x() -> Self {
        Poly {
            coeffs: vec![0.0, 1.0],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Sum of |c_i x^i|; the natural scale for judging a residual `eval(x)`.
    pub fn abs_scale(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * ax + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Degree after dropping leading coefficients that are negligible
    /// relative to the lower-order ones: `|c_k| <= rel_tol * max_{j<k} |c_j|`.
    /// `None` for the zero polynomial.
    pub fn effective_degree(&self, rel_tol: f64) -> Option<usize> {
        let mut deg = self.coeffs.len().checked_sub(1)?;
        loop {
            let lead = self.coeffs[deg].abs();
            let lower = self.coeffs[..deg]
                .iter()
                .fold(0.0f64, |m, c| m.max(c.abs()));
            if lead > rel_tol * lower.max(f64::MIN_POSITIVE) {
                return Some(deg);
            }
            if deg == 0 {
                return None;
            }
            deg -= 1;
        }
    }

    /// Copy truncated to its effective degree.
    pub fn trimmed(&self, rel_tol: f64) -> Option<Poly> {
        self.effective_degree(rel_tol)
            .map(|d| Poly::new(self.coeffs[..=d].to_vec()))
    }

    /// All real roots, ascending, with multiple roots reported once.
    /// Leading coefficients below [`DEGREE_REL_TOL`] are dropped first, so
    /// the zero polynomial and nonzero constants both yield no roots.
    pub fn real_roots(&self) -> Vec<f64> {
        self.roots_impl(1e-7, false)
    }

    /// Like [`Poly::real_roots`] but also keeps near-real complex pairs
    /// (imaginary part below `imag_tol`, relative, in the rescaled variable)
    /// as their real part. Meant for candidate generation, where a spurious
    /// candidate is harmless and a missed one is not.
    pub fn candidate_real_roots(&self, imag_tol: f64) -> Vec<f64> {
        self.roots_impl(imag_tol, true)
    }

    fn roots_impl(&self, imag_tol: f64, permissive: bool) -> Vec<f64> {
        let Some(p) = self.trimmed(DEGREE_REL_TOL) else {
            return Vec::new();
        };
        let c = &p.coeffs;
        let raw = match c.len() - 1 {
            0 => Vec::new(),
            1 => vec![-c[0] / c[1]],
            2 => quadratic_roots(c[2], c[1], c[0], permissive),
            3 => {
                let permissive_tail = match cubic_real_root_count(&p) {
                    Some(1) if !permissive => Some(false),
                    Some(3) => Some(true),
                    _ => None,
                };
                match permissive_tail {
                    // one real root: the deflated quadratic is discarded
                    Some(false) => p
                        .deflation_roots(imag_tol, None)
                        .into_iter()
                        .take(1)
                        .collect(),
                    tail => p.deflation_roots(imag_tol, Some(tail.unwrap_or(permissive))),
                }
            }
            _ => p.deflation_roots(imag_tol, Some(permissive)),
        };
        p.finish(raw)
    }

    /// Peel off real roots one at a time, largest magnitude first (the
    /// companion eigenvalue that stays accurate when root magnitudes are
    /// widely spread), until a quadratic is left. `tail` says whether the
    /// final quadratic is solved permissively; `None` skips it.
    fn deflation_roots(&self, imag_tol: f64, tail: Option<bool>) -> Vec<f64> {
        let mut q = self.clone();
        let mut out = Vec::new();
        while q.coeffs.len() > 3 {
            let (ev, s) = q.companion_eigenvalues();
            let deg = q.coeffs.len() - 1;
            let real = ev
                .iter()
                .filter(|(re, im)| im.abs() <= imag_tol * (1.0 + re.abs()))
                .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
            let pick = match real {
                Some(z) => *z,
                // odd degree always has a real root
                None if deg % 2 == 1 => *ev
                    .iter()
                    .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .expect("companion matrix has eigenvalues"),
                None => return out,
            };
            let x = self.newton_polish(q.newton_polish(pick.0 * s));
            let largest = ev
                .iter()
                .all(|(re, im)| re.hypot(*im) <= pick.0.abs() * (1.0 + 1e-9));
            q = if largest {
                q.deflate_backward(x)
            } else {
                q.deflate_forward(x)
            };
            out.push(x);
        }
        if let Some(permissive) = tail {
            let c = &q.coeffs;
            match c.len() {
                3 if c[2] != 0.0 => out.extend(quadratic_roots(c[2], c[1], c[0], permissive)),
                3 | 2 if c[1] != 0.0 => out.push(-c[0] / c[1]),
                _ => {}
            }
        }
        out
    }

    /// Quotient of division by `(x - r)`, computed from the leading end.
    fn deflate_forward(&self, r: f64) -> Poly {
        let n = self.coeffs.len() - 1;
        let mut q = vec![0.0; n];
        let mut acc = 0.0;
        for i in (1..=n).rev() {
            acc = self.coeffs[i] + r * acc;
            q[i - 1] = acc;
        }
        Poly::new(q)
    }

    /// Quotient of division by `(x - r)`, computed from the constant end;
    /// stable when `r` is the largest root.
    fn deflate_backward(&self, r: f64) -> Poly {
        if r == 0.0 {
            return Poly::new(self.coeffs[1..].to_vec());
        }
        let n = self.coeffs.len() - 1;
        let mut q = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            prev = (prev - self.coeffs[i]) / r;
            q[i] = prev;
        }
        Poly::new(q)
    }

    fn finish(&self, raw: Vec<f64>) -> Vec<f64> {
        let mut roots: Vec<f64> = raw
            .into_iter()
            .filter(|x| x.is_finite())
            .map(|x| self.newton_polish(x))
            .collect();
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
        // a multiple root may survive as a close pair; merge when the
        // derivative also vanishes between them
        let d = self.derivative();
        let mut out: Vec<f64> = Vec::with_capacity(roots.len());
        for x in roots {
            if let Some(&last) = out.last() {
                let mid = 0.5 * (last + x);
                let close = (x - last).abs() <= 1e-6 * (1.0 + mid.abs());
                if close && d.eval(mid).abs() <= 1e-6 * d.abs_scale(mid) {
                    *out.last_mut().unwrap() = mid;
                    continue;
                }
            }
            out.push(x);
        }
        out
    }

    /// Rescaling factor `s` so that the monic polynomial in `z = x / s` has
    /// coefficients of magnitude at most one.
    fn root_scale(&self) -> f64 {
        let n = self.coeffs.len() - 1;
        let lead = self.coeffs[n];
        let mut s = 0.0f64;
        for (i, c) in self.coeffs[..n].iter().enumerate() {
            let r = (c / lead).abs();
            if r > 0.0 {
                s = s.max(r.powf(1.0 / (n - i) as f64));
            }
        }
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }

    /// Monic coefficients (ascending, without the leading 1) in the rescaled
    /// variable.
    fn scaled_monic(&self) -> (Vec<f64>, f64) {
        let n = self.coeffs.len() - 1;
        let lead = self.coeffs[n];
        let s = self.root_scale();
        let a = (0..n)
            .map(|i| self.coeffs[i] / lead / s.powi((n - i) as i32))
            .collect();
        (a, s)
    }

    fn companion_eigenvalues(&self) -> (Vec<(f64, f64)>, f64) {
        let n = self.coeffs.len() - 1;
        let (a, s) = self.scaled_monic();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = -a[n - 1 - j];
        }
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        let ev = m.complex_eigenvalues();
        (ev.iter().map(|z| (z.re, z.im)).collect(), s)
    }

    /// Newton iterations that only accept steps which do not increase |p|.
    pub fn newton_polish(&self, x0: f64) -> f64 {
        let d = self.derivative();
        let mut x = x0;
        let mut fx = self.eval(x);
        for _ in 0..60 {
            if fx == 0.0 {
                break;
            }
            let dx = d.eval(x);
            if dx == 0.0 || !dx.is_finite() {
                break;
            }
            let step = fx / dx;
            let xn = x - step;
            let fn_ = self.eval(xn);
            if !(fn_.abs() < fx.abs()) {
                break;
            }
            x = xn;
            fx = fn_;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        x
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64, permissive: bool) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    let tol = 8.0 * f64::EPSILON * (b * b + (4.0 * a * c).abs());
    let near = if permissive { 1e3 * tol } else { tol };
    if disc < -near {
        Vec::new()
    } else if disc <= tol {
        vec![-b / (2.0 * a)]
    } else {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            // b == 0 and c == 0
            vec![0.0]
        } else {
            vec![q / a, c / q]
        }
    }
}

/// Number of distinct real roots of a cubic from its discriminant, computed
/// on the rescaled monic form. `None` when the discriminant is zero to
/// working precision (a repeated root).
fn cubic_real_root_count(p: &Poly) -> Option<usize> {
    let (a, _) = p.scaled_monic();
    let (d, c, b) = (a[0], a[1], a[2]);
    let terms = [
        18.0 * b * c * d,
        -4.0 * b * b * b * d,
        b * b * c * c,
        -4.0 * c * c * c,
        -27.0 * d * d,
    ];
    let disc: f64 = terms.iter().sum();
    let mag: f64 = terms.iter().map(|t| t.abs()).sum();
    if disc.abs() <= 1e-10 * mag || mag == 0.0 {
        None
    } else if disc > 0.0 {
        Some(3)
    } else {
        Some(1)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + rhs.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Poly::constant(0.0);
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}
