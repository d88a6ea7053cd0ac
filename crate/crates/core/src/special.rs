//! Power-series special functions: `F(z) = Σ z^k/(k!)^2`, `J0` and `I0`.
//!
//! Both Bessel functions are specializations of the same series,
//! `J0(x) = F(-x²/4)` and `I0(x) = F(x²/4)`, so all three share one
//! summation routine. Partial sums are carried in double-double precision;
//! the f64 entry points round once at the end.

use crate::dd::{Dd, DD_EPS};
use crate::error::{Error, Result};

/// Arguments beyond this magnitude make `I0` overflow-prone; they are refused.
pub const I0_ARGUMENT_GUARD: f64 = 700.0;

/// Truncation tolerance used when the caller needs full double-double accuracy.
pub(crate) const DD_REL_TOL: f64 = 1e-32;

/// Truncation control for the power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Stop once the latest term is below `rel_tol * |partial sum|`.
    pub rel_tol: f64,
    /// Hard cap on the number of terms, counting the constant term.
    pub max_terms: usize,
}

impl SeriesOptions {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::Validation(format!(
                "rel_tol must be positive and finite, got {rel_tol}"
            )));
        }
        if max_terms == 0 {
            return Err(Error::Validation("max_terms must be at least 1".into()));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-15,
            max_terms: 200,
        }
    }
}

/// A series value with a bound on `|value - exact|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub abs_error: f64,
    pub terms: usize,
}

/// Double-double series result used by the determinant evaluators.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DdSeries {
    pub value: Dd,
    pub abs_error: f64,
    pub terms: usize,
    /// `Σ k |t_k|`, which bounds `|z F'(z)|`.
    pub sensitivity: f64,
}

/// Sums `F(z)` in double-double.
///
/// For `z < 0` the series alternates once `k^2 > |z|`; we stop after two
/// consecutive small terms and bound the tail by the first omitted term.
/// For `z > 0` the tail is bounded by a geometric series with the ratio of
/// the first omitted pair of terms.
pub(crate) fn hyper_f_dd(z: Dd, rel_tol: f64, max_terms: usize) -> Result<DdSeries> {
    if !z.is_finite() {
        return Err(Error::Domain("series argument must be finite".into()));
    }
    let alternating = z.hi() < 0.0;
    let az = z.abs().to_f64();
    let mut sum = Dd::ONE;
    let mut term = Dd::ONE;
    let mut abs_sum = 1.0_f64;
    let mut sensitivity = 0.0_f64;
    let mut prev_small = false;

    for k in 1..max_terms {
        let kk = (k * k) as f64;
        term = term * z / Dd::from_f64(kk);
        sum += term;
        let t = term.abs().to_f64();
        abs_sum += t;
        sensitivity += k as f64 * t;
        let s = sum.abs().to_f64();
        let small = t <= rel_tol * s;
        let k1 = ((k + 1) * (k + 1)) as f64;
        let decreasing = az < k1;
        if decreasing && small && (!alternating || prev_small) {
            let next = t * az / k1;
            let tail = if alternating {
                next
            } else {
                let q = az / (((k + 2) * (k + 2)) as f64);
                next / (1.0 - q)
            };
            let rounding = 4.0 * (k as f64 + 2.0) * DD_EPS * abs_sum;
            return Ok(DdSeries {
                value: sum,
                abs_error: tail + rounding,
                terms: k + 1,
                sensitivity: 1.01 * sensitivity,
            });
        }
        prev_small = small;
    }
    Err(Error::Convergence {
        partial: sum.to_f64(),
        terms: max_terms,
    })
}

fn round_series(s: DdSeries) -> SeriesValue {
    let value = s.value.to_f64();
    SeriesValue {
        value,
        abs_error: s.abs_error + value.abs() * f64::EPSILON * 0.5,
        terms: s.terms,
    }
}

/// `F(z) = Σ_{k≥0} z^k/(k!)^2` with its error bound.
pub fn hyper_f_series(z: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("F(z) needs finite z, got {z}")));
    }
    hyper_f_dd(Dd::from_f64(z), opts.rel_tol, opts.max_terms).map(round_series)
}

/// `F(z) = Σ_{k≥0} z^k/(k!)^2`.
pub fn hyper_f(z: f64, opts: &SeriesOptions) -> Result<f64> {
    hyper_f_series(z, opts).map(|s| s.value)
}

/// Bessel function of the first kind, order zero, as `F(-x²/4)`.
pub fn bessel_j0_series(x: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("J0 needs finite x, got {x}")));
    }
    let z = -(x * x) / 4.0;
    if !z.is_finite() {
        return Err(Error::Domain(format!("|x| = {x:e} is too large for the power series")));
    }
    squared_argument_series(z, opts)
}

/// `F(z)` for `z = ±x²/4` rounded once; the bound covers that rounding.
fn squared_argument_series(z: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    let s = hyper_f_dd(Dd::from_f64(z), opts.rel_tol, opts.max_terms)?;
    let arg = 0.5 * f64::EPSILON * s.sensitivity;
    let mut v = round_series(s);
    v.abs_error += arg;
    Ok(v)
}

pub fn bessel_j0(x: f64, opts: &SeriesOptions) -> Result<f64> {
    bessel_j0_series(x, opts).map(|s| s.value)
}

/// Modified Bessel function of the first kind, order zero, as `F(x²/4)`.
pub fn bessel_i0_series(x: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("I0 needs finite x, got {x}")));
    }
    if x.abs() > I0_ARGUMENT_GUARD {
        return Err(Error::Range(format!(
            "I0 argument {x} exceeds the overflow guard {I0_ARGUMENT_GUARD}"
        )));
    }
    squared_argument_series(x * x / 4.0, opts)
}

pub fn bessel_i0(x: f64, opts: &SeriesOptions) -> Result<f64> {
    bessel_i0_series(x, opts).map(|s| s.value)
}

/// `J0(a·b)` in double-double, with the product formed exactly.
pub(crate) fn j0_of_product_dd(a: f64, b: f64, max_terms: usize) -> Result<DdSeries> {
    let p = Dd::from_prod(a, b);
    let z = -(p.sqr().mul_f64(0.25));
    hyper_f_dd(z, DD_REL_TOL, max_terms)
}

/// `I0(a·b·scale)` in double-double.
pub(crate) fn i0_of_product_dd(a: f64, b: f64, scale: Dd, max_terms: usize) -> Result<DdSeries> {
    let p = Dd::from_prod(a, b) * scale;
    if p.abs().to_f64() > I0_ARGUMENT_GUARD {
        return Err(Error::Range(format!(
            "I0 argument {:e} exceeds the overflow guard {I0_ARGUMENT_GUARD}",
            p.to_f64()
        )));
    }
    let z = p.sqr().mul_f64(0.25);
    hyper_f_dd(z, DD_REL_TOL, max_terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SeriesOptions {
        SeriesOptions::default()
    }

    #[test]
    fn f_at_zero_is_one() {
        let s = hyper_f_series(0.0, &opts()).unwrap();
        assert_eq!(s.value, 1.0);
        assert!(s.abs_error > 0.0 && s.abs_error < 1e-15);
    }

    #[test]
    fn frozen_values() {
        // Reference values summed independently (positive / alternating partial
        // sums with explicit tail bounds).
        assert!((hyper_f(1.0, &opts()).unwrap() - 2.2795853023360673).abs() < 1e-12);
        assert!((bessel_j0(1.0, &opts()).unwrap() - 0.7651976865579666).abs() < 1e-12);
        assert!((bessel_i0(1.0, &opts()).unwrap() - 1.2660658777520084).abs() < 1e-12);
        assert_eq!(bessel_j0(0.0, &opts()).unwrap(), 1.0);
        assert_eq!(bessel_i0(0.0, &opts()).unwrap(), 1.0);
    }

    #[test]
    fn bessel_functions_are_specializations_of_f() {
        for &x in &[0.5, 1.0, 3.0] {
            assert_eq!(
                bessel_j0(x, &opts()).unwrap(),
                hyper_f(-x * x / 4.0, &opts()).unwrap()
            );
        }
        assert_eq!(bessel_i0(2.0, &opts()).unwrap(), hyper_f(1.0, &opts()).unwrap());
    }

    #[test]
    fn evenness_is_bitwise() {
        let x = 2.3;
        assert_eq!(
            bessel_j0(-x, &opts()).unwrap().to_bits(),
            bessel_j0(x, &opts()).unwrap().to_bits()
        );
        assert_eq!(
            bessel_i0(-x, &opts()).unwrap().to_bits(),
            bessel_i0(x, &opts()).unwrap().to_bits()
        );
    }

    #[test]
    fn non_finite_inputs_are_domain_errors() {
        assert!(matches!(hyper_f(f64::NAN, &opts()), Err(Error::Domain(_))));
        assert!(matches!(bessel_j0(f64::INFINITY, &opts()), Err(Error::Domain(_))));
        assert!(matches!(bessel_i0(f64::NEG_INFINITY, &opts()), Err(Error::Domain(_))));
    }

    #[test]
    fn i0_overflow_guard() {
        assert!(matches!(bessel_i0(700.5, &opts()), Err(Error::Range(_))));
        assert!(matches!(bessel_i0(-1e4, &opts()), Err(Error::Range(_))));
    }

    #[test]
    fn exhausting_max_terms_reports_partial_sum() {
        let tight = SeriesOptions::new(1e-15, 3).unwrap();
        match hyper_f(1.0, &tight) {
            Err(Error::Convergence { partial, terms }) => {
                assert_eq!(terms, 3);
                // 1 + 1 + 1/4
                assert_eq!(partial, 2.25);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn options_are_validated() {
        assert!(SeriesOptions::new(0.0, 10).is_err());
        assert!(SeriesOptions::new(1e-12, 0).is_err());
        assert!(SeriesOptions::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn large_positive_argument_still_converges_within_default_terms() {
        let v = bessel_i0(50.0, &opts()).unwrap();
        // I0(50) = 2.93255378384933e20
        assert!((v / 2.932553783849336e20 - 1.0).abs() < 1e-13);
    }
}
