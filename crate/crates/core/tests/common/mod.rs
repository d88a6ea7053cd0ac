#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// `Σ (sign·z)^k / (k!)²` in exact arithmetic, `z = x²/4`, until the terms
/// fall below `1e-40`.
fn bessel_series(x: f64, sign: i32) -> f64 {
    let q = rat(x);
    let z = &q * &q / BigRational::from_integer(BigInt::from(4));
    let z = if sign < 0 { -z } else { z };
    let tiny = rat(1e-40);
    let mut term = BigRational::one();
    let mut sum = BigRational::zero();
    let mut k = 0u64;
    loop {
        sum += &term;
        k += 1;
        let kk = BigRational::from_integer(BigInt::from(k * k));
        term = term * &z / kk;
        if (k as f64) > x.abs() && term.abs() < tiny {
            break;
        }
    }
    sum.to_f64().expect("representable")
}

/// Exact-arithmetic `J0(x)`, correctly rounded up to the truncation at `1e-40`.
pub fn j0_exact(x: f64) -> f64 {
    bessel_series(x, -1)
}

pub fn i0_exact(x: f64) -> f64 {
    bessel_series(x, 1)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}
