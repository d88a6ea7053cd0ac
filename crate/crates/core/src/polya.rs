//! The parameter space `Ω`: modified Pólya functions `Π(ω, λ)`, moments,
//! the tilde morphism `p̃, h̃, s̃`, the limit spherical functions `φ_ω` and
//! finite mixtures of them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::symfunc::{
    complete_h_table_dd, enumerate_partitions, jacobi_trudi_dd, newton_h_from_p_dd, power_p, Partition,
};

#[derive(Deserialize)]
struct RawOmega {
    #[serde(default)]
    alpha: Vec<f64>,
    #[serde(default)]
    gamma: f64,
}

/// `ω = (α, γ)`: atoms `α_1 ≥ α_2 ≥ ... > 0` and Gaussian mass `γ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOmega")]
pub struct OmegaParam {
    alpha: Vec<f64>,
    gamma: f64,
}

impl TryFrom<RawOmega> for OmegaParam {
    type Error = Error;
    fn try_from(r: RawOmega) -> Result<Self> {
        OmegaParam::new(r.alpha, r.gamma)
    }
}

impl OmegaParam {
    /// Validates and canonicalizes: atoms sorted descending, zeros dropped.
    pub fn new(mut alpha: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Validation(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::Validation(format!("alpha entries must be finite and >= 0, got {a}")));
        }
        alpha.retain(|a| *a != 0.0);
        alpha.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { alpha, gamma })
    }

    /// `ω = (∅, 0)`, for which `Π ≡ 1`.
    pub fn trivial() -> Self {
        Self {
            alpha: Vec::new(),
            gamma: 0.0,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn max_alpha(&self) -> f64 {
        self.alpha.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub omega: OmegaParam,
}

#[derive(Deserialize)]
struct RawMixture {
    components: Vec<MixtureComponent>,
}

/// A finitely supported probability measure on `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureParam {
    components: Vec<MixtureComponent>,
}

impl TryFrom<RawMixture> for MixtureParam {
    type Error = Error;
    fn try_from(r: RawMixture) -> Result<Self> {
        MixtureParam::new(r.components)
    }
}

impl MixtureParam {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation("a mixture needs at least one component".into()));
        }
        if let Some(c) = components.iter().find(|c| !(c.weight.is_finite() && c.weight > 0.0)) {
            return Err(Error::Validation(format!("weights must be positive, got {}", c.weight)));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }
}

/// `Π(ω, λ) = e^{-γλ²/4} ∏_j 1/(1 + α_j λ²/4)`.
pub fn polya_eval(omega: &OmegaParam, lambda: f64) -> f64 {
    let q = lambda * lambda / 4.0;
    omega
        .alpha
        .iter()
        .fold((-omega.gamma * q).exp(), |v, a| v / (1.0 + a * q))
}

/// `p̃_1 = γ + Σ α_j`, `p̃_m = Σ α_j^m` for `m ≥ 2`.
pub fn p_tilde(omega: &OmegaParam, m: usize) -> Result<f64> {
    let p = power_p(m, &omega.alpha)?;
    Ok(if m == 1 { omega.gamma + p } else { p })
}

/// Moments of `σ_ω`: `M_0 = γ + p_1(α)`, `M_m = p_{m+1}(α)`.
pub fn sigma_moment(omega: &OmegaParam, m: usize) -> f64 {
    if m == 0 {
        omega.gamma + omega.alpha.iter().fold(0.0, |a, b| a + b)
    } else {
        power_p(m + 1, &omega.alpha).expect("m + 1 >= 1")
    }
}

/// Coefficients `(c_1, c_3, ..., c_{2·order-1})` of `Π'/Π = Σ c_{2m-1} λ^{2m-1}`.
pub fn log_deriv_coeffs(omega: &OmegaParam, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(order);
    out.push(-p_tilde(omega, 1)? / 2.0);
    for m in 2..=order {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let pm = power_p(m, &omega.alpha)?;
        out.push(sign * pm / 2f64.powi(2 * m as i32 - 1));
    }
    Ok(out)
}

fn p_tilde_all(omega: &OmegaParam, max_m: usize) -> Vec<f64> {
    (1..=max_m).map(|m| p_tilde(omega, m).expect("m >= 1")).collect()
}

pub(crate) fn h_tilde_dd(omega: &OmegaParam, max_m: usize) -> Vec<Dd> {
    newton_h_from_p_dd(&p_tilde_all(omega, max_m))
}

/// `(h̃_0, ..., h̃_M)`, the Taylor coefficients of `Π(ω, λ)` in `-λ²/4`.
pub fn h_tilde(omega: &OmegaParam, max_m: usize) -> Vec<f64> {
    h_tilde_dd(omega, max_m).into_iter().map(|v| v.to_f64().max(0.0)).collect()
}

/// `s̃_m(ω)`, the Jacobi–Trudi determinant over `h̃`.
pub fn s_tilde(omega: &OmegaParam, m: &Partition) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let h = h_tilde_dd(omega, m.parts()[0] + m.len());
    jacobi_trudi_dd(m.parts(), &h).to_f64().max(0.0)
}

/// `φ_ω(ξ) = ∏_j Π(ω, ξ_j)`.
pub fn phi_omega(omega: &OmegaParam, xi: &[f64]) -> f64 {
    xi.iter().fold(1.0, |acc, &x| acc * polya_eval(omega, x))
}

/// `φ_ω` at a general square complex matrix, through its singular values.
pub fn phi_omega_matrix(omega: &OmegaParam, x: &DMatrix<Complex64>) -> Result<f64> {
    if !x.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", x.nrows(), x.ncols())));
    }
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("matrix entries must be finite".into()));
    }
    if x.is_empty() {
        return Ok(1.0);
    }
    let sv = x.clone().singular_values();
    Ok(phi_omega(omega, sv.as_slice()))
}

/// `Σ_i w_i φ_{ω_i}(ξ)`.
pub fn mixture_eval(mu: &MixtureParam, xi: &[f64]) -> f64 {
    mu.components.iter().map(|c| c.weight * phi_omega(&c.omega, xi)).sum()
}

/// `(-2 Π''(ω, 0), p̃_1(ω))` with the second derivative by a central difference.
pub fn second_deriv_identity(omega: &OmegaParam, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let d2 = (polya_eval(omega, h) - 2.0 * polya_eval(omega, 0.0) + polya_eval(omega, -h)) / (h * h);
    Ok((-2.0 * d2, p_tilde(omega, 1)?))
}

fn check_radius(omega: &OmegaParam, t: f64) -> Result<()> {
    // the series in u = -λ²/4 converges for α_max |u| < 1
    if omega.max_alpha() * t >= 1.0 {
        return Err(Error::Domain(format!(
            "outside the convergence radius: max α · λ²/4 = {}",
            omega.max_alpha() * t
        )));
    }
    Ok(())
}

/// Truncated Taylor series `Σ_{m ≤ M} h̃_m(ω) (-λ²/4)^m`.
pub fn polya_taylor(omega: &OmegaParam, lambda: f64, max_m: usize) -> Result<f64> {
    let t = lambda * lambda / 4.0;
    check_radius(omega, t)?;
    let h = h_tilde_dd(omega, max_m);
    let mut pow = Dd::ONE;
    let mut sum = Dd::ZERO;
    for hm in h {
        sum += hm * pow;
        pow = pow.mul_f64(-t);
    }
    Ok(sum.to_f64())
}

/// Truncated expansion `Σ_{|m| ≤ W} s̃_m(ω) s_m(-ξ_1²/4, ..., -ξ_k²/4)`,
/// converging to `∏_j Π(ω, ξ_j)`.
pub fn polya_schur_series(omega: &OmegaParam, xi: &[f64], max_weight: usize) -> Result<f64> {
    let y: Vec<f64> = xi.iter().filter(|v| **v != 0.0).map(|v| v * v / 4.0).collect();
    let ymax = y.iter().copied().fold(0.0, f64::max);
    check_radius(omega, ymax)?;
    let rows = y.len();
    if rows == 0 {
        return Ok(1.0);
    }
    let ht = h_tilde_dd(omega, max_weight + rows);
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let hy = complete_h_table_dd(max_weight + rows, &neg);
    let sum: Dd = enumerate_partitions(max_weight, rows)
        .map(|m| jacobi_trudi_dd(m.parts(), &ht) * jacobi_trudi_dd(m.parts(), &hy))
        .sum();
    Ok(sum.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn om(a: &[f64], g: f64) -> OmegaParam {
        OmegaParam::new(a.to_vec(), g).unwrap()
    }

    #[test]
    fn canonical_form_and_validation() {
        let w = om(&[0.5, 0.0, 2.0], 1.0);
        assert_eq!(w.alpha(), &[2.0, 0.5]);
        assert!(OmegaParam::new(vec![-1.0], 0.0).is_err());
        assert!(OmegaParam::new(vec![], -1.0).is_err());
        let j: OmegaParam = serde_json::from_str(r#"{"alpha":[1,3],"gamma":0.5}"#).unwrap();
        assert_eq!(j, om(&[3.0, 1.0], 0.5));
        assert!(serde_json::from_str::<OmegaParam>(r#"{"alpha":[],"gamma":-1}"#).is_err());
    }

    #[test]
    fn polya_values() {
        assert_eq!(polya_eval(&om(&[4.0], 0.0), 1.0), 0.5);
        assert!((polya_eval(&om(&[], 1.0), 2.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(polya_eval(&om(&[1.0, 1.0], 0.5), 0.0), 1.0);
        let w = om(&[1.0, 0.3], 0.7);
        assert_eq!(polya_eval(&w, -1.3), polya_eval(&w, 1.3));
    }

    #[test]
    fn tilde_power_sums_and_moments() {
        let w = om(&[0.5, 0.25], 0.25);
        assert_eq!(p_tilde(&w, 1).unwrap(), 1.0);
        assert_eq!(p_tilde(&w, 2).unwrap(), 0.3125);
        assert_eq!(p_tilde(&om(&[], 3.0), 2).unwrap(), 0.0);
        assert!(matches!(p_tilde(&w, 0), Err(Error::Domain(_))));
        let w = om(&[1.0, 2.0], 0.5);
        assert_eq!(sigma_moment(&w, 0), 3.5);
        assert_eq!(sigma_moment(&w, 1), 5.0);
        assert_eq!(sigma_moment(&om(&[], 7.0), 2), 0.0);
    }

    #[test]
    fn log_derivative() {
        assert_eq!(log_deriv_coeffs(&om(&[4.0], 0.0), 2).unwrap(), vec![-2.0, 2.0]);
        assert_eq!(log_deriv_coeffs(&om(&[], 2.0), 3).unwrap(), vec![-1.0, 0.0, 0.0]);
        let w = om(&[1.0, 0.5], 0.3);
        let (l, h) = (0.1, 1e-5);
        let fd = (polya_eval(&w, l + h) - polya_eval(&w, l - h)) / (2.0 * h * polya_eval(&w, l));
        let c = log_deriv_coeffs(&w, 10).unwrap();
        let series: f64 = c.iter().enumerate().map(|(i, ci)| ci * l.powi(2 * i as i32 + 1)).sum();
        assert!(((fd - series) / series).abs() < 1e-6);
    }

    #[test]
    fn h_tilde_values() {
        let h = h_tilde(&om(&[0.5], 0.0), 6);
        for (m, v) in h.iter().enumerate() {
            assert!((v - 0.5f64.powi(m as i32)).abs() < 1e-16);
        }
        let h = h_tilde(&om(&[], 2.0), 3);
        assert!((h[3] - 4.0 / 3.0).abs() < 1e-15);
        let w = om(&[1.0, 0.5], 0.3);
        let t = polya_taylor(&w, 0.5, 20).unwrap();
        assert!(((t - polya_eval(&w, 0.5)) / t).abs() < 1e-10);
        assert!(matches!(polya_taylor(&om(&[4.0], 0.0), 1.5, 20), Err(Error::Domain(_))));
    }

    #[test]
    fn s_tilde_values() {
        let w = om(&[0.7, 0.2], 0.4);
        assert_eq!(s_tilde(&w, &Partition::empty()), 1.0);
        assert!((s_tilde(&w, &Partition::row(1)) - 1.3).abs() < 1e-15);
        let one_one = Partition::new(vec![1, 1]).unwrap();
        assert_eq!(s_tilde(&om(&[0.5], 0.0), &one_one), 0.0);
    }

    #[test]
    fn phi_omega_products() {
        let w = om(&[4.0], 0.0);
        assert_eq!(phi_omega(&w, &[1.0, 1.0]), 0.25);
        assert_eq!(phi_omega(&w, &[]), 1.0);
        let w = om(&[0.9, 0.1], 0.2);
        let (a, b) = (0.7, 1.9);
        assert_eq!(phi_omega(&w, &[a, b]), phi_omega(&w, &[a]) * phi_omega(&w, &[b]));
    }

    #[test]
    fn phi_omega_matrix_values() {
        let w = om(&[4.0], 0.0);
        let z = DMatrix::<Complex64>::zeros(3, 3);
        assert_eq!(phi_omega_matrix(&w, &z).unwrap(), 1.0);
        let mut d = DMatrix::<Complex64>::zeros(2, 2);
        d[(0, 0)] = Complex64::new(1.0, 0.0);
        d[(1, 1)] = Complex64::new(0.0, 2.0);
        assert!((phi_omega_matrix(&w, &d).unwrap() - 0.1).abs() < 1e-15);
        let r = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(phi_omega_matrix(&w, &r), Err(Error::Shape(_))));
    }

    #[test]
    fn mixtures() {
        let mu: MixtureParam = serde_json::from_str(
            r#"{"components":[{"weight":0.5,"omega":{"alpha":[],"gamma":1}},
                              {"weight":0.5,"omega":{"alpha":[],"gamma":4}}]}"#,
        )
        .unwrap();
        let v = mixture_eval(&mu, &[1.0]);
        assert!((v - ((-0.25f64).exp() + (-1f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v - 0.5733401121214237).abs() < 1e-15);
        assert_eq!(mixture_eval(&mu, &[0.0]), 1.0);
        let bad = serde_json::from_str::<MixtureParam>(
            r#"{"components":[{"weight":0.5,"omega":{"alpha":[],"gamma":1}}]}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn second_derivative_identity() {
        let (l, r) = second_deriv_identity(&om(&[4.0], 0.0), 1e-4).unwrap();
        assert_eq!(r, 4.0);
        assert!(((l - r) / r).abs() < 1e-6);
        let (l, r) = second_deriv_identity(&om(&[], 3.0), 1e-4).unwrap();
        assert_eq!(r, 3.0);
        assert!(((l - r) / r).abs() < 1e-6);
        let (l, r) = second_deriv_identity(&OmegaParam::trivial(), 1e-4).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn schur_expansion_reproduces_product() {
        let w = om(&[0.8, 0.3], 0.5);
        let xi = [1.0, 0.6, 1.2];
        let s = polya_schur_series(&w, &xi, 30).unwrap();
        let p = phi_omega(&w, &xi);
        assert!(((s - p) / p).abs() < 1e-6, "{s} {p}");
    }
}
