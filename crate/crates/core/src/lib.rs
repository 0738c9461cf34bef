//! Omitted-variable-bias sensitivity analysis for linear regression.
//!
//! The pipeline is: observed data or a covariance matrix ([`moments`]) →
//! regression summary → identified sets for the coefficient on the treatment
//! under a selection ratio δ ([`idset`]) → breakdown points and bias
//! adjustments ([`breakdown`]). [`oracle`] builds full data-generating
//! processes, including the unobserved control, and is used to certify every
//! reported set element.
//!
//! ```
//! use regsens_core::{moments, idset};
//! use nalgebra::DMatrix;
//!
//! // covariance of (Y, X, W1)
//! let cov = DMatrix::from_row_slice(3, 3, &[
//!     4.75, 1.75, 1.5,
//!     1.75, 1.0, 0.5,
//!     1.5, 0.5, 1.0,
//! ]);
//! let m = moments::MomentMatrix::from_cov(cov).unwrap();
//! let s = moments::summarize(&m).unwrap();
//! let set = idset::solve_identified_set(&s, 2.0, 15.0 / 19.0).unwrap();
//! assert_eq!(set.roots.len(), 2);
//! ```

pub mod breakdown;
pub mod error;
pub mod idset;
pub mod interval;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod poly;
pub mod serde_ext;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use interval::{Interval, IntervalUnion};
pub use moments::{MomentMatrix, RegressionSummary};

/// Format with `digits` significant digits, trimming trailing zeros and
/// switching to exponent notation for very large or small magnitudes.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "+inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, x);
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{}", trim_zeros(mant), e);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new digit (9.999995 -> 10.00000); harmless
    trim_zeros(&s).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(4.0 / 3.0, 6), "1.33333");
        assert_eq!(fmt_sig(-0.0855, 6), "-0.0855");
        assert_eq!(fmt_sig(52.0 / 33.0, 6), "1.57576");
        assert_eq!(fmt_sig(2.0, 6), "2");
        assert_eq!(fmt_sig(1.0e-7, 6), "1e-7");
        assert_eq!(fmt_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(fmt_sig(f64::NEG_INFINITY, 6), "-inf");
    }
}
