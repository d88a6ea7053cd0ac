//! Deterministic invariant suites behind `spherica validate`.
//!
//! Reports contain no timings or addresses, so the same seed and sample
//! count give byte-identical output on every run and thread count.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{lambda_sequence_for, powersum_convergence, spherical_convergence, t_n_map, SweepMethod};
use crate::montecarlo::{haar_unitary, mc_biinvariant_avg, mc_orbital_exp, mc_spherical_full, RngStream};
use crate::polya::{
    p_tilde, phi_omega, polya_eval, polya_schur_series, polya_taylor, second_deriv_identity, OmegaParam,
};
use crate::special::{bessel_i0, bessel_j0, hyper_f, SeriesOptions};
use crate::spherical::{
    heat_kernel, radial_laplacian, radial_laplacian_divergence, spherical_det, spherical_series, weyl_c_n,
    DiagonalPoint, SphericalOptions,
};
use crate::symfunc::{cauchy_lhs, cauchy_rhs, complete_h, enumerate_partitions, newton_h_from_p, power_p, schur, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Special,
    Symfunc,
    Spherical,
    Polya,
    Mc,
    Limits,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Special,
        Suite::Symfunc,
        Suite::Spherical,
        Suite::Polya,
        Suite::Mc,
        Suite::Limits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Special => "special",
            Suite::Symfunc => "symfunc",
            Suite::Spherical => "spherical",
            Suite::Polya => "polya",
            Suite::Mc => "mc",
            Suite::Limits => "limits",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .copied()
            .chain([Suite::All])
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width text table followed by a summary line.
    pub fn to_text(&self) -> String {
        let mut s = format!("suite={} seed={} samples={}\n", self.suite, self.seed, self.samples);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<10} {:<34} {:<4} {}",
                c.suite,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "total={} failed={}", self.checks.len(), failed);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("suite,check,passed,detail\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{},\"{}\"", c.suite, c.name, c.passed, c.detail.replace('"', "'"));
        }
        s
    }
}

struct Collector<'a> {
    suite: &'a str,
    checks: Vec<Check>,
}

impl Collector<'_> {
    fn check(&mut self, name: &str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error kind={} {e}", e.kind())));
        self.checks.push(Check {
            suite: self.suite.to_string(),
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> (bool, String) {
    let r = rel(got, want);
    (r <= tol, format!("{label} got={got:.12e} want={want:.12e} rel={r:.2e} tol={tol:.0e}"))
}

fn dp(v: &[f64]) -> Result<DiagonalPoint> {
    DiagonalPoint::new(v.to_vec())
}

fn special_suite(c: &mut Collector) {
    let o = SeriesOptions::default();
    c.check("f_at_zero", hyper_f(0.0, &o).map(|v| (v == 1.0, format!("F(0)={v}"))));
    c.check("j0_frozen", bessel_j0(1.0, &o).map(|v| within("J0(1)", v, 0.7651976865579666, 1e-13)));
    c.check("i0_frozen", bessel_i0(1.0, &o).map(|v| within("I0(1)", v, 1.2660658777520084, 1e-13)));
    c.check(
        "i0_is_f_of_quarter_square",
        (|| Ok((bessel_i0(2.0, &o)? == hyper_f(1.0, &o)?, "I0(2) == F(1)".to_string())))(),
    );
    c.check(
        "j0_even",
        (|| {
            let (a, b) = (bessel_j0(2.7, &o)?, bessel_j0(-2.7, &o)?);
            Ok((a.to_bits() == b.to_bits(), format!("J0(2.7)={a:.15e}")))
        })(),
    );
    c.check(
        "convergence_error",
        Ok(match hyper_f(1.0, &SeriesOptions { rel_tol: 1e-15, max_terms: 3 }) {
            Err(Error::Convergence { partial, terms }) => (partial == 2.25 && terms == 3, format!("partial={partial}")),
            other => (false, format!("unexpected {other:?}")),
        }),
    );
    c.check(
        "i0_guard",
        Ok(match bessel_i0(701.0, &o) {
            Err(Error::Range(_)) => (true, "range error at 701".to_string()),
            other => (false, format!("unexpected {other:?}")),
        }),
    );
}

fn symfunc_suite(c: &mut Collector) {
    let x = [0.7, 0.2, 1.3, 0.5];
    c.check(
        "newton_consistency",
        (|| {
            let p: Vec<f64> = (1..=8).map(|m| power_p(m, &x)).collect::<Result<_>>()?;
            let h = newton_h_from_p(&p);
            let worst = (0..=8).map(|m| rel(h[m], complete_h(m, &x))).fold(0.0, f64::max);
            Ok((worst <= 1e-12, format!("max rel={worst:.2e}")))
        })(),
    );
    c.check(
        "one_row_schur_is_h",
        Ok({
            let ok = (0..12).all(|m| schur(&Partition::row(m), &x).to_bits() == complete_h(m, &x).to_bits());
            (ok, "s_(m) == h_m for m < 12".to_string())
        }),
    );
    c.check(
        "too_many_rows_vanish",
        Partition::new(vec![1, 1, 1]).map(|m| {
            let v = schur(&m, &[1.0, 1.0]);
            (v == 0.0, format!("s_(1,1,1)(1,1)={v}"))
        }),
    );
    c.check(
        "cauchy_identity",
        (|| {
            let (a, b) = ([0.3, 0.2], [0.4]);
            let (l, r) = (cauchy_lhs(&a, &b, 20), cauchy_rhs(&a, &b)?);
            Ok(((l - r).abs() <= 1e-8, format!("lhs={l:.15e} rhs={r:.15e}")))
        })(),
    );
    c.check(
        "partition_counts",
        Ok({
            let (a, b) = (enumerate_partitions(5, 5).count(), enumerate_partitions(6, 6).count());
            (a == 19 && b == 30, format!("count(5,5)={a} count(6,6)={b}"))
        }),
    );
}

fn spherical_suite(c: &mut Collector) {
    let o = SphericalOptions::default();
    let so = SeriesOptions::default();
    c.check(
        "n1_det_is_j0",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 1..=30 {
                for j in 1..=30 {
                    let (a, t) = (0.1 * i as f64, 0.1 * j as f64);
                    let v = spherical_det(&dp(&[a])?, &dp(&[t])?, &o)?.value;
                    worst = worst.max(rel(v, bessel_j0(a * t, &so)?));
                }
            }
            Ok((worst <= 1e-10, format!("max rel={worst:.2e}")))
        })(),
    );
    c.check(
        "det_vs_series",
        (|| {
            let pts = [
                (vec![1.0, 2.0], vec![0.5, 1.5]),
                (vec![0.3, 2.5], vec![1.7, 0.9]),
                (vec![0.4, 1.1, 2.6], vec![0.8, 1.9, 2.4]),
            ];
            let mut worst: f64 = 0.0;
            for (x, xi) in &pts {
                let (x, xi) = (dp(x)?, dp(xi)?);
                let d = spherical_det(&x, &xi, &o)?;
                let s = spherical_series(&x, &xi, o.max_weight, &o)?;
                worst = worst.max(rel(d.value, s.value));
            }
            Ok((worst <= 1e-8, format!("max rel={worst:.2e}")))
        })(),
    );
    c.check(
        "exchange_symmetry",
        (|| {
            let (x, xi) = (dp(&[0.3, 1.7, 2.2])?, dp(&[1.1, 0.4, 2.9])?);
            let (a, b) = (spherical_det(&x, &xi, &o)?.value, spherical_det(&xi, &x, &o)?.value);
            Ok((a.to_bits() == b.to_bits(), format!("value={a:.15e}")))
        })(),
    );
    c.check(
        "heat_kernel_n1",
        heat_kernel(0.5, &DiagonalPoint::new(vec![1.0]).unwrap(), &DiagonalPoint::new(vec![1.0]).unwrap(), &o)
            .map(|v| within("H0", v, 0.4657596075936404, 1e-13)),
    );
    c.check(
        "laplacian_gaussian",
        (|| {
            let l = dp(&[1.0, 0.5])?;
            let g = |p: &[f64]| (-p.iter().map(|v| v * v).sum::<f64>()).exp();
            let exact = -11.0 * (-1.25f64).exp();
            let a = radial_laplacian(g, &l, None, &o)?;
            let b = radial_laplacian_divergence(g, &l, None, &o)?;
            let (r1, r2) = (rel(a, exact), rel(b, a));
            Ok((r1 <= 1e-6 && r2 <= 1e-4, format!("radial rel={r1:.2e} forms rel={r2:.2e}")))
        })(),
    );
    c.check(
        "weyl_constants",
        (|| {
            let (c1, c2) = (weyl_c_n(1)?, weyl_c_n(2)?);
            Ok((c1 == 2.0 * PI && c2 == 2.0 * PI * PI * PI * PI, format!("c1={c1:.15e} c2={c2:.15e}")))
        })(),
    );
}

fn polya_suite(c: &mut Collector) {
    c.check(
        "taylor_expansion",
        (|| {
            let w = OmegaParam::new(vec![1.0, 0.5], 0.3)?;
            let v = polya_taylor(&w, 0.5, 20)?;
            Ok(within("Pi(0.5)", v, polya_eval(&w, 0.5), 1e-10))
        })(),
    );
    c.check(
        "schur_product_identity",
        (|| {
            let w = OmegaParam::new(vec![0.8, 0.3], 0.5)?;
            let xi = [1.0, 0.6, 1.2];
            Ok(within("prod", polya_schur_series(&w, &xi, 30)?, phi_omega(&w, &xi), 1e-6))
        })(),
    );
    c.check(
        "second_derivative",
        (|| {
            let w = OmegaParam::new(vec![0.6, 0.1], 0.9)?;
            let (l, r) = second_deriv_identity(&w, 1e-4)?;
            Ok(within("-2Pi''(0)", l, r, 1e-5))
        })(),
    );
    c.check(
        "multiplicativity",
        (|| {
            let w = OmegaParam::new(vec![0.9, 0.1], 0.2)?;
            let ok = [(0.3, 1.1), (2.0, 0.7), (1.5, 1.5)]
                .iter()
                .all(|&(a, b)| phi_omega(&w, &[a, b]) == phi_omega(&w, &[a]) * phi_omega(&w, &[b]));
            Ok((ok, "phi(a,b) == phi(a) phi(b)".to_string()))
        })(),
    );
}

fn mc_suite(c: &mut Collector, samples: usize, seed: u64) {
    c.check(
        "haar_unitarity",
        (|| {
            let u = haar_unitary(8, &RngStream::new(seed, 0))?;
            let p = &u * u.adjoint();
            let mut worst: f64 = 0.0;
            for i in 0..8 {
                for j in 0..8 {
                    let t = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((p[(i, j)].re - t).abs().max(p[(i, j)].im.abs()));
                }
            }
            Ok((worst <= 1e-12, format!("max defect={worst:.2e}")))
        })(),
    );
    c.check(
        "spherical_n1_vs_j0",
        (|| {
            let (re, im) = mc_spherical_full(&dp(&[1.0])?, &dp(&[1.0])?, samples, seed)?;
            let j0 = bessel_j0(1.0, &SeriesOptions::default())?;
            let ok = (re.mean - j0).abs() <= 4.0 * re.std_error && im.mean.abs() <= 4.0 * im.std_error;
            Ok((ok, format!("mean={:.9e} se={:.3e} imag={:.3e}", re.mean, re.std_error, im.mean)))
        })(),
    );
    c.check(
        "orbital_n1_vs_i0",
        (|| {
            let e = mc_orbital_exp(&dp(&[1.0])?, &dp(&[2.0])?, samples, seed)?;
            let i0 = bessel_i0(2.0, &SeriesOptions::default())?;
            Ok(((e.mean - i0).abs() <= 4.0 * e.std_error, format!("mean={:.9e} se={:.3e}", e.mean, e.std_error)))
        })(),
    );
    c.check(
        "biinvariant_y_zero",
        (|| {
            let w = OmegaParam::new(vec![4.0], 0.0)?;
            let e = mc_biinvariant_avg(&w, &dp(&[1.0])?, &dp(&[0.0])?, 8, samples, seed)?;
            Ok((e.mean == 0.5 && e.std_error == 0.0, format!("mean={}", e.mean)))
        })(),
    );
}

fn limits_suite(c: &mut Collector) {
    c.check(
        "powersum_gaussian",
        (|| {
            let w = OmegaParam::new(vec![], 1.0)?;
            let r = powersum_convergence(&w, 2, &[10, 100, 1000])?;
            let worst = r.rows.iter().map(|row| rel(row.value, 1.0 / row.n as f64)).fold(0.0, f64::max);
            Ok((worst <= 1e-12, format!("max rel vs 1/n={worst:.2e}")))
        })(),
    );
    c.check(
        "round_trip_p1",
        (|| {
            let w = OmegaParam::new(vec![0.6, 0.2], 0.7)?;
            let back = t_n_map(&lambda_sequence_for(&w, 50)?, 50)?;
            Ok(within("p1", p_tilde(&back, 1)?, p_tilde(&w, 1)?, 1e-13))
        })(),
    );
    c.check(
        "single_atom_sweep",
        (|| {
            let w = OmegaParam::new(vec![1.0], 0.0)?;
            let r = spherical_convergence(&w, &[1.0], &[25, 50, 100, 200], SweepMethod::Series, &SphericalOptions::default())?;
            let e = r.errors();
            let ok = e.windows(2).all(|p| p[1] < p[0]) && e[3] <= 0.02;
            Ok((ok, format!("errors={:.4e},{:.4e},{:.4e},{:.4e}", e[0], e[1], e[2], e[3])))
        })(),
    );
}

/// Runs one suite, or all of them in a fixed order.
pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> ValidationReport {
    let list: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut checks = Vec::new();
    for s in list {
        let mut c = Collector {
            suite: s.name(),
            checks: Vec::new(),
        };
        match s {
            Suite::Special => special_suite(&mut c),
            Suite::Symfunc => symfunc_suite(&mut c),
            Suite::Spherical => spherical_suite(&mut c),
            Suite::Polya => polya_suite(&mut c),
            Suite::Mc => mc_suite(&mut c, samples, seed),
            Suite::Limits => limits_suite(&mut c),
            Suite::All => unreachable!("expanded above"),
        }
        checks.extend(c.checks);
    }
    ValidationReport {
        suite: suite.name().to_string(),
        seed,
        samples,
        checks,
    }
}
