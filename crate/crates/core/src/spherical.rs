//! Finite-`n` analysis on complex `n x n` matrices: spherical functions in
//! determinant and Schur-series form, the orbital integral, the heat kernel,
//! the radial Laplacian and the Weyl integration constants.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dd::{Dd, DD_EPS};
use crate::error::{Error, Result};
use crate::linalg::det_dd;
use crate::quad::{integrate_piecewise, QuadOptions};
use crate::special::{i0_of_product_dd, j0_of_product_dd, DdSeries, SeriesOptions};
use crate::symfunc::{complete_h_table_of_dd, PartitionsOfWeight};

/// Singular values `(λ_1, ..., λ_n)` of a matrix, stored in canonical form:
/// absolute values sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiagonalPoint(Vec<f64>);

impl DiagonalPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("a diagonal point needs at least one entry".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("entries must be finite, got {v}")));
        }
        let mut v: Vec<f64> = values.into_iter().map(f64::abs).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(DiagonalPoint(v))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Number of nonzero entries.
    pub fn rank(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    /// Smallest `|λ_i² - λ_j²|` relative to `max λ²`; `+∞` when `n = 1`.
    pub fn relative_gap(&self) -> f64 {
        let n = self.0.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let top = self.0[0] * self.0[0];
        if top == 0.0 {
            return 0.0;
        }
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                gap = gap.min(Dd::diff_of_squares(self.0[i], self.0[j]).abs().to_f64());
            }
        }
        gap / top
    }

    /// The same point padded with zeros to dimension `n`.
    pub fn padded(&self, n: usize) -> Result<Self> {
        if n < self.dim() {
            return Err(Error::Shape(format!(
                "cannot pad a point of dimension {} down to {n}",
                self.dim()
            )));
        }
        let mut v = self.0.clone();
        v.resize(n, 0.0);
        Ok(DiagonalPoint(v))
    }
}

impl TryFrom<Vec<f64>> for DiagonalPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DiagonalPoint::new(v)
    }
}

impl From<DiagonalPoint> for Vec<f64> {
    fn from(p: DiagonalPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalOptions {
    /// Controls the Bessel series behind each determinant entry.
    pub series: SeriesOptions,
    /// Relative gap below which determinant formulas are refused.
    pub degeneracy_tol: f64,
    /// Relative tail bound the Schur series must certify.
    pub rel_tol: f64,
    /// Largest partition weight summed by the Schur series.
    pub max_weight: usize,
}

impl Default for SphericalOptions {
    fn default() -> Self {
        Self {
            series: SeriesOptions::default(),
            degeneracy_tol: 1e-6,
            rel_tol: 1e-12,
            max_weight: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalPath {
    Determinant,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub abs_error: f64,
    pub terms_used: usize,
    pub path: EvalPath,
}

fn same_dim(a: &DiagonalPoint, b: &DiagonalPoint) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.dim())
}

/// Orders an argument pair canonically so that symmetric formulas give
/// bitwise identical results under exchange.
fn canonical_pair<'a>(a: &'a DiagonalPoint, b: &'a DiagonalPoint) -> (&'a DiagonalPoint, &'a DiagonalPoint) {
    let ord = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal);
    if ord == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

fn check_gap(p: &DiagonalPoint, tol: f64, what: &str) -> Result<()> {
    let g = p.relative_gap();
    if g < tol {
        return Err(Error::Degeneracy(format!(
            "{what} has squared entries closer than {tol:e} (relative gap {g:e})"
        )));
    }
    Ok(())
}

/// Determinant of a matrix of series-valued entries, with an error bound that
/// includes the propagated entry errors.
fn series_determinant(entries: Vec<DdSeries>, n: usize) -> (Dd, f64, usize) {
    let terms = entries.iter().map(|e| e.terms).max().unwrap_or(0);
    let e_max = entries.iter().map(|e| e.abs_error).fold(0.0, f64::max);
    let min_row = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| entries[i * n + j].value.to_f64().powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let det = det_dd(entries.into_iter().map(|e| e.value).collect(), n);
    let nf = n as f64;
    let propagated = if min_row > 0.0 {
        nf * nf.sqrt() * e_max * det.hadamard / min_row
    } else {
        0.0
    };
    (det.value, det.abs_error + propagated, terms)
}

fn finish(value: Dd, rel_extra: f64, abs_err: f64, terms: usize, path: EvalPath) -> Result<EvalResult> {
    let v = value.to_f64();
    if !v.is_finite() {
        return Err(Error::Range("result is not representable as a double".into()));
    }
    Ok(EvalResult {
        value: v,
        abs_error: abs_err + v.abs() * (rel_extra + 0.5 * f64::EPSILON),
        terms_used: terms,
        path,
    })
}

/// `φ_x(ξ) = (δ!)² (-4)^{n(n-1)/2} det(J0(x_j ξ_k)) / (D(x) D(ξ))` with
/// `D(λ) = ∏_{i<j} (λ_i² - λ_j²)`.
pub fn spherical_det(x: &DiagonalPoint, xi: &DiagonalPoint, opts: &SphericalOptions) -> Result<EvalResult> {
    let n = same_dim(x, xi)?;
    check_gap(x, opts.degeneracy_tol, "x")?;
    check_gap(xi, opts.degeneracy_tol, "xi")?;
    let (a, b) = canonical_pair(x, xi);
    let (av, bv) = (a.values(), b.values());

    let mut entries = Vec::with_capacity(n * n);
    for &ai in av {
        for &bj in bv {
            entries.push(j0_of_product_dd(ai, bj, opts.series.max_terms)?);
        }
    }
    let (det, det_err, terms) = series_determinant(entries, n);

    // (δ!)² (-4)^{n(n-1)/2} = ∏_{i<j} -4 (j-i)²
    let mut pref = Dd::ONE;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (j - i) as f64;
            let num = Dd::from_f64(-4.0 * d * d);
            pref *= num / (Dd::diff_of_squares(av[i], av[j]) * Dd::diff_of_squares(bv[i], bv[j]));
        }
    }
    let value = det * pref;
    let rel = 4.0 * (n * n) as f64 * DD_EPS;
    finish(value, rel, det_err * pref.abs().to_f64(), terms, EvalPath::Determinant)
}

/// `𝓘(λ, θ) = ∏_{i<j} 4(j-i)² / ((λ_i²-λ_j²)(θ_i²-θ_j²)) · det(I0(λ_i θ_j))`.
pub fn orbital_integral(lambda: &DiagonalPoint, theta: &DiagonalPoint, opts: &SphericalOptions) -> Result<EvalResult> {
    let n = same_dim(lambda, theta)?;
    check_gap(lambda, opts.degeneracy_tol, "lambda")?;
    check_gap(theta, opts.degeneracy_tol, "theta")?;
    let (a, b) = canonical_pair(lambda, theta);
    let (av, bv) = (a.values(), b.values());

    let mut entries = Vec::with_capacity(n * n);
    for &ai in av {
        for &bj in bv {
            entries.push(i0_of_product_dd(ai, bj, Dd::ONE, opts.series.max_terms)?);
        }
    }
    let (det, det_err, terms) = series_determinant(entries, n);
    let mut pref = Dd::ONE;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (j - i) as f64;
            pref *= Dd::from_f64(4.0 * d * d)
                / (Dd::diff_of_squares(av[i], av[j]) * Dd::diff_of_squares(bv[i], bv[j]));
        }
    }
    let value = det * pref;
    let rel = 4.0 * (n * n) as f64 * DD_EPS;
    finish(value, rel, det_err * pref.abs().to_f64(), terms, EvalPath::Determinant)
}

/// `H0(t, λ, θ) = e^{-(‖λ‖²+‖θ‖²)/4t} det(I0(λ_i θ_j / 2t)) / (n! (2t)^n D(λ) D(θ))`.
pub fn heat_kernel(t: f64, lambda: &DiagonalPoint, theta: &DiagonalPoint, opts: &SphericalOptions) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let n = same_dim(lambda, theta)?;
    check_gap(lambda, opts.degeneracy_tol, "lambda")?;
    check_gap(theta, opts.degeneracy_tol, "theta")?;
    let (a, b) = canonical_pair(lambda, theta);
    let (av, bv) = (a.values(), b.values());

    // Rows and columns are scaled by exp(-λ_i²/4t), exp(-θ_j²/4t) so that
    // every entry stays below 1.
    let scale = Dd::ONE / Dd::from_f64(2.0 * t);
    let rows: Vec<f64> = av.iter().map(|v| (-v * v / (4.0 * t)).exp()).collect();
    let cols: Vec<f64> = bv.iter().map(|v| (-v * v / (4.0 * t)).exp()).collect();
    let mut entries = Vec::with_capacity(n * n);
    for (i, &ai) in av.iter().enumerate() {
        for (j, &bj) in bv.iter().enumerate() {
            let mut e = i0_of_product_dd(ai, bj, scale, opts.series.max_terms)?;
            e.value = e.value.mul_f64(rows[i]).mul_f64(cols[j]);
            e.abs_error *= rows[i] * cols[j];
            entries.push(e);
        }
    }
    let (det, _, _) = series_determinant(entries, n);
    let mut pref = Dd::ONE;
    for k in 1..=n {
        pref = pref / Dd::from_f64(2.0 * t * k as f64);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            pref = pref / (Dd::diff_of_squares(av[i], av[j]) * Dd::diff_of_squares(bv[i], bv[j]));
        }
    }
    let v = (det * pref).to_f64();
    if !v.is_finite() {
        return Err(Error::Range("heat kernel value is not representable".into()));
    }
    Ok(v.max(0.0))
}

/// Rigorous bound on the weight-`w` shell of the scaled Schur series:
/// `coef ≤ exp(-2r [lnΓ(n-r+w/r+1) - lnΓ(n-r+1)])` and
/// `Σ_{|m|=w} s_m(Λ̂) s_m(Ξ̂) = h_w(Λ̂ ⊗ Ξ̂) ≤ min(C(w+N-1, N-1), (ΣΛ̂ ΣΞ̂)^w)`.
struct ShellBound {
    r: f64,
    base: f64,
    ln_gamma0: f64,
    ln_q: f64,
    ln_sum: f64,
    big_n: f64,
}

impl ShellBound {
    fn ln_shell(&self, w: usize) -> f64 {
        let wf = w as f64;
        let coef = -2.0 * self.r * (ln_gamma(self.base + wf / self.r + 1.0) - self.ln_gamma0);
        let ln_binom = ln_gamma(wf + self.big_n) - ln_gamma(wf + 1.0) - ln_gamma(self.big_n);
        coef + wf * self.ln_q + ln_binom.min(wf * self.ln_sum)
    }

    /// Bound on `Σ_{w > last} shell(w)`. The log-bound is concave in `w`, so
    /// once the ratio of consecutive shells drops below 1 a geometric
    /// remainder is valid.
    fn tail_after(&self, last: usize) -> f64 {
        let mut total = 0.0;
        let mut w = last + 1;
        let mut lb = self.ln_shell(w);
        for _ in 0..100_000 {
            let next = self.ln_shell(w + 1);
            let rho = (next - lb).exp();
            if rho < 0.5 {
                return total + lb.exp() / (1.0 - rho);
            }
            total += lb.exp();
            lb = next;
            w += 1;
        }
        f64::INFINITY
    }
}

/// Schur value from a table of `h`, with an error bound for the table's
/// relative error `h_rel` and the elimination.
fn schur_with_error(parts: &[usize], h: &[Dd], h_rel: f64) -> (Dd, f64) {
    let l = parts.len();
    match l {
        0 => return (Dd::ONE, 0.0),
        1 => {
            let v = h[parts[0]];
            return (v, v.abs().to_f64() * h_rel);
        }
        _ => {}
    }
    let mut a = Vec::with_capacity(l * l);
    let mut row_l1 = 1.0;
    for (i, &mi) in parts.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..l {
            let idx = mi as isize - i as isize + j as isize;
            let e = if idx < 0 { Dd::ZERO } else { h[idx as usize] };
            s += e.abs().to_f64();
            a.push(e);
        }
        row_l1 *= s;
    }
    let d = det_dd(a, l);
    (d.value, d.abs_error + 1.01 * l as f64 * h_rel * row_l1)
}

/// `Σ_m (δ!/(m+δ)!)² s_m(Λ) s_m(sign·Ξ)` for `Λ = a²`, `Ξ = b²/4`.
fn schur_series(
    a: &DiagonalPoint,
    b: &DiagonalPoint,
    sign: f64,
    max_weight: usize,
    opts: &SphericalOptions,
) -> Result<EvalResult> {
    let n = same_dim(a, b)?;
    let lam: Vec<Dd> = a.values().iter().filter(|v| **v != 0.0).map(|&v| Dd::from_prod(v, v)).collect();
    let xi: Vec<Dd> = b
        .values()
        .iter()
        .filter(|v| **v != 0.0)
        .map(|&v| Dd::from_prod(v, v).mul_f64(0.25))
        .collect();
    let rows = lam.len().min(xi.len());
    if rows == 0 {
        return Ok(EvalResult {
            value: 1.0,
            abs_error: 0.0,
            terms_used: 1,
            path: EvalPath::Series,
        });
    }
    let (c_lam, c_xi) = (lam[0], xi[0]);
    let qd = c_lam * c_xi;
    let q = qd.to_f64();
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Range(format!("argument scale {q:e} is out of range")));
    }
    let lam_hat: Vec<Dd> = lam.iter().map(|&v| v / c_lam).collect();
    let xi_hat: Vec<Dd> = xi.iter().map(|&v| v / c_xi).collect();

    let hmax = max_weight + rows;
    let h_lam = complete_h_table_of_dd(hmax, &lam_hat);
    let h_xi = complete_h_table_of_dd(hmax, &xi_hat);
    let big_n = lam.len() * xi.len();
    let h_rel = 2.0 * (hmax + lam.len().max(xi.len())) as f64 * DD_EPS;

    // t[i][l] = ∏_{j=1}^{l} q / (n - i + j)², row i counted from 1
    let mut coef = vec![vec![Dd::ONE; max_weight + 1]; rows];
    for (i, row) in coef.iter_mut().enumerate() {
        for l in 1..=max_weight {
            let d = (n - (i + 1) + l) as f64;
            row[l] = row[l - 1] * qd / Dd::from_f64(d * d);
        }
    }
    if coef.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Range("series coefficients overflow".into()));
    }

    let bound = ShellBound {
        r: rows as f64,
        base: (n - rows) as f64,
        ln_gamma0: ln_gamma((n - rows) as f64 + 1.0),
        ln_q: q.ln(),
        ln_sum: (lam_hat.iter().map(|v| v.to_f64()).sum::<f64>() * xi_hat.iter().map(|v| v.to_f64()).sum::<f64>()).ln(),
        big_n: big_n as f64,
    };

    let mut sum = Dd::ZERO;
    let mut rounding = 0.0;
    let mut abs_total = 0.0;
    let mut terms = 0;
    let mut tail = f64::INFINITY;
    for w in 0..=max_weight {
        let shell_sign = if sign < 0.0 && w % 2 == 1 { -1.0 } else { 1.0 };
        for m in PartitionsOfWeight::new(w, rows) {
            let parts = m.parts();
            let c: Dd = parts.iter().enumerate().map(|(i, &l)| coef[i][l]).product();
            let (sl, el) = schur_with_error(parts, &h_lam, h_rel);
            let (sx, ex) = schur_with_error(parts, &h_xi, h_rel);
            let term = c * sl * sx;
            let cf = c.to_f64();
            let (slf, sxf) = (sl.abs().to_f64(), sx.abs().to_f64());
            rounding += cf * (el * sxf + ex * slf + el * ex);
            abs_total += term.abs().to_f64();
            sum += if shell_sign < 0.0 { -term } else { term };
            terms += 1;
        }
        tail = bound.tail_after(w);
        let s = sum.abs().to_f64();
        if tail <= 1e-22 * s.max(1e-12) {
            break;
        }
    }
    let s = sum.abs().to_f64();
    if tail > opts.rel_tol * s.max(1e-3) {
        return Err(Error::Convergence {
            partial: sum.to_f64(),
            terms,
        });
    }
    let rounding = rounding + 4.0 * (terms as f64 + (rows * rows * rows) as f64) * DD_EPS * abs_total;
    finish(sum, 0.0, tail + rounding, terms, EvalPath::Series)
}

/// `φ_x(ξ) = Σ_{|m| ≤ W} (δ!/(m+δ)!)² s_m(Λ) s_m(Ξ)` with `Λ = x²`,
/// `Ξ = -ξ²/4`. Regular at repeated entries.
pub fn spherical_series(
    x: &DiagonalPoint,
    xi: &DiagonalPoint,
    max_weight: usize,
    opts: &SphericalOptions,
) -> Result<EvalResult> {
    same_dim(x, xi)?;
    let (a, b) = canonical_pair(x, xi);
    schur_series(a, b, -1.0, max_weight, opts)
}

/// Determinant form when the arguments are well separated, series otherwise.
pub fn spherical_auto(x: &DiagonalPoint, xi: &DiagonalPoint, opts: &SphericalOptions) -> Result<EvalResult> {
    same_dim(x, xi)?;
    if x.relative_gap() >= opts.degeneracy_tol && xi.relative_gap() >= opts.degeneracy_tol {
        spherical_det(x, xi, opts)
    } else {
        spherical_series(x, xi, opts.max_weight, opts)
    }
}

/// Series form of the orbital integral, `Σ (δ!/(m+δ)!)² s_m(λ²) s_m(θ²/4)`.
pub fn orbital_integral_series(
    lambda: &DiagonalPoint,
    theta: &DiagonalPoint,
    max_weight: usize,
    opts: &SphericalOptions,
) -> Result<EvalResult> {
    same_dim(lambda, theta)?;
    let (a, b) = canonical_pair(lambda, theta);
    schur_series(a, b, 1.0, max_weight, opts)
}

pub fn orbital_auto(lambda: &DiagonalPoint, theta: &DiagonalPoint, opts: &SphericalOptions) -> Result<EvalResult> {
    same_dim(lambda, theta)?;
    if lambda.relative_gap() >= opts.degeneracy_tol && theta.relative_gap() >= opts.degeneracy_tol {
        orbital_integral(lambda, theta, opts)
    } else {
        orbital_integral_series(lambda, theta, opts.max_weight, opts)
    }
}

fn default_step(lambda: &[f64]) -> f64 {
    1e-4 * (1.0 + lambda.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn check_radial(lambda: &DiagonalPoint, opts: &SphericalOptions) -> Result<()> {
    if lambda.values().iter().any(|v| *v == 0.0) {
        return Err(Error::Degeneracy("radial Laplacian is singular at λ_i = 0".into()));
    }
    check_gap(lambda, opts.degeneracy_tol, "lambda")
}

/// Central first and second differences of `f` along each coordinate.
fn partials<F: Fn(&[f64]) -> f64>(f: &F, p: &[f64], h: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let f0 = f(p);
    let mut d1 = Vec::with_capacity(p.len());
    let mut d2 = Vec::with_capacity(p.len());
    let mut q = p.to_vec();
    for i in 0..p.len() {
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        d1.push((fp - fm) / (2.0 * h));
        d2.push((fp - 2.0 * f0 + fm) / (h * h));
    }
    (f0, d1, d2)
}

/// Radial part of the Laplacian,
/// `LF = Σ (∂_i² + λ_i⁻¹ ∂_i) F + 2 Σ_{i<j} [(∂_i-∂_j)F/(λ_i-λ_j) + (∂_i+∂_j)F/(λ_i+λ_j)]`,
/// by central differences. `fd_step` defaults to `1e-4 (1 + ‖λ‖)`.
pub fn radial_laplacian<F: Fn(&[f64]) -> f64>(
    f: F,
    lambda: &DiagonalPoint,
    fd_step: Option<f64>,
    opts: &SphericalOptions,
) -> Result<f64> {
    check_radial(lambda, opts)?;
    let l = lambda.values();
    let h = fd_step.unwrap_or_else(|| default_step(l));
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let (_, d1, d2) = partials(&f, l, h);
    let n = l.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += d2[i] + d1[i] / l[i];
        for j in (i + 1)..n {
            acc += 2.0 * (d1[i] - d1[j]) / (l[i] - l[j]);
            acc += 2.0 * (d1[i] + d1[j]) / (l[i] + l[j]);
        }
    }
    Ok(acc)
}

/// `D(λ) = ∏_{i<j} (λ_i² - λ_j²)`.
pub fn vandermonde_sq(lambda: &[f64]) -> f64 {
    let mut d = 1.0;
    for i in 0..lambda.len() {
        for j in (i + 1)..lambda.len() {
            d *= lambda[i] * lambda[i] - lambda[j] * lambda[j];
        }
    }
    d
}

/// The same operator written as `D⁻¹ Σ (∂_i² + λ_i⁻¹ ∂_i)(D F)`.
pub fn radial_laplacian_divergence<F: Fn(&[f64]) -> f64>(
    f: F,
    lambda: &DiagonalPoint,
    fd_step: Option<f64>,
    opts: &SphericalOptions,
) -> Result<f64> {
    check_radial(lambda, opts)?;
    let l = lambda.values();
    let h = fd_step.unwrap_or_else(|| default_step(l));
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let g = |p: &[f64]| vandermonde_sq(p) * f(p);
    let (_, d1, d2) = partials(&g, l, h);
    let acc: f64 = (0..l.len()).map(|i| d2[i] + d1[i] / l[i]).sum();
    Ok(acc / vandermonde_sq(l))
}

/// `ln c_n` for `c_n = 2^n π^{n²} / (n! (∏_{j<n} j!)²)`.
pub fn weyl_ln_c_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let nf = n as f64;
    let mut s = nf * 2f64.ln() + nf * nf * PI.ln() - ln_gamma(nf + 1.0);
    for j in 1..n {
        s -= 2.0 * ln_gamma(j as f64 + 1.0);
    }
    Ok(s)
}

/// Weyl integration constant `c_n`. Small `n` use a direct product so that
/// `c_1 = 2π` and `c_2 = 2π⁴` come out exactly.
pub fn weyl_c_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let v = if n <= 10 {
        let mut den = 1.0;
        let mut fact = 1.0;
        for j in 1..n {
            fact *= j as f64;
            den *= fact * fact;
        }
        den *= fact * n as f64;
        let mut acc = 2f64.powi(n as i32) / den;
        for _ in 0..n * n {
            acc *= PI;
        }
        acc
    } else {
        weyl_ln_c_n(n)?.exp()
    };
    if !v.is_finite() || v == 0.0 {
        return Err(Error::Range(format!("c_{n} is outside the double range")));
    }
    Ok(v)
}

fn check_mn(m: usize, n: usize) -> Result<()> {
    if m == 0 || n < 2 * m {
        return Err(Error::Domain(format!("need n >= 2m >= 2, got m={m}, n={n}")));
    }
    Ok(())
}

/// Unnormalized weight
/// `|∏_{i<j} sin²(θ_i+θ_j) sin²(θ_i-θ_j) ∏_i sin 2θ_i sin^{2(n-2m)} θ_i|`.
pub fn weyl_weight_mn(m: usize, n: usize, theta: &[f64]) -> Result<f64> {
    check_mn(m, n)?;
    if theta.len() != m {
        return Err(Error::Shape(format!("expected {m} angles, got {}", theta.len())));
    }
    Ok(weight_unchecked(n - 2 * m, theta))
}

fn weight_unchecked(k: usize, theta: &[f64]) -> f64 {
    let mut w = 1.0;
    for (i, &a) in theta.iter().enumerate() {
        let s = a.sin();
        w *= (2.0 * a).sin() * s.powi(2 * k as i32);
        for &b in &theta[i + 1..] {
            let p = (a + b).sin() * (a - b).sin();
            w *= p * p;
        }
    }
    w.abs()
}

fn norm_cache() -> &'static RwLock<HashMap<(usize, usize), f64>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Integrates over `[0, π]^d` by nested adaptive quadrature split at `π/2`.
fn nested_integral(d: usize, f: &dyn Fn(&[f64]) -> f64, rel_tol: f64) -> Result<f64> {
    fn level(prefix: &[f64], left: usize, f: &dyn Fn(&[f64]) -> f64, rel_tol: f64) -> Result<f64> {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let opts = QuadOptions {
            abs_tol: 1e-300,
            ..QuadOptions::rel(rel_tol)
        };
        let r = integrate_piecewise(
            |t| {
                let mut p = prefix.to_vec();
                p.push(t);
                if left == 1 {
                    f(&p)
                } else {
                    match level(&p, left - 1, f, rel_tol * 0.1) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                }
            },
            &[0.0, FRAC_PI_2, PI],
            &opts,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(r?.value)
    }
    level(&[], d, f, rel_tol)
}

/// Normalizing constant `c_{m,n}` making `D_{m,n}` a probability density on
/// `[0, π]^m`. Computed once per `(m, n)`; supported for `m ≤ 3`.
pub fn weyl_norm_mn(m: usize, n: usize) -> Result<f64> {
    check_mn(m, n)?;
    if m > 3 {
        return Err(Error::Domain(format!(
            "quadrature normalization is available for m <= 3, got m={m}"
        )));
    }
    if let Some(v) = norm_cache().read().ok().and_then(|c| c.get(&(m, n)).copied()) {
        return Ok(v);
    }
    let k = n - 2 * m;
    let tol = match m {
        1 => 1e-13,
        2 => 1e-10,
        _ => 1e-8,
    };
    let z = nested_integral(m, &|t: &[f64]| weight_unchecked(k, t), tol)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!("normalization integral is {z}")));
    }
    let c = 1.0 / z;
    if let Ok(mut cache) = norm_cache().write() {
        cache.insert((m, n), c);
    }
    Ok(c)
}

/// Normalized density `D_{m,n}(θ) = c_{m,n} · weight(θ)`.
pub fn weyl_density_mn(m: usize, n: usize, theta: &[f64]) -> Result<f64> {
    let w = weyl_weight_mn(m, n, theta)?;
    Ok(weyl_norm_mn(m, n)? * w)
}

/// `∫_{[0,π]^m} f · D_{m,n} dθ` by nested quadrature.
pub fn weyl_expectation<F: Fn(&[f64]) -> f64>(m: usize, n: usize, f: F) -> Result<f64> {
    let c = weyl_norm_mn(m, n)?;
    let k = n - 2 * m;
    let tol = if m == 1 { 1e-12 } else { 1e-9 };
    let v = nested_integral(m, &|t: &[f64]| f(t) * weight_unchecked(k, t), tol)?;
    Ok(c * v)
}
