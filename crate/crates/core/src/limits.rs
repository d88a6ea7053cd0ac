//! The `n → ∞` machinery: the `T_n` map, diagonal sequences realizing a
//! target `ω`, and convergence sweeps for power sums, spherical functions
//! and the concentration of the Weyl densities.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::montecarlo::{mc_spherical, run_blocks};
use crate::polya::{p_tilde, phi_omega, OmegaParam};
use crate::spherical::{spherical_series, weyl_expectation, weyl_weight_mn, DiagonalPoint, SphericalOptions};
use crate::symfunc::Partition;

/// Largest dimension accepted by the series route of [`spherical_convergence`].
pub const N_MAX_SERIES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub value: f64,
    pub limit: f64,
    pub abs_error: f64,
    pub std_error: Option<f64>,
}

/// One row per dimension `n`, in increasing `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub target_omega: Option<OmegaParam>,
    pub limit_value: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    fn new(target_omega: Option<OmegaParam>, limit_value: f64, rows: Vec<SweepRow>) -> Self {
        Self {
            target_omega,
            limit_value,
            rows,
        }
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.abs_error).collect()
    }

    /// CSV with header `n,value,limit,abs_error,std_error`; `std_error` is
    /// empty for deterministic methods.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,value,limit,abs_error,std_error\n");
        for r in &self.rows {
            let se = r.std_error.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:e},{:e},{:e},{}", r.n, r.value, r.limit, r.abs_error, se);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::Validation("n_list must not be empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("n_list must be strictly increasing".into()));
    }
    if n_list[0] == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    Ok(())
}

/// `T_n(λ) = ω` with `α_j = (λ_j/n)²`, `γ = 0`.
pub fn t_n_map(lambda: &[f64], n: usize) -> Result<OmegaParam> {
    if lambda.len() != n {
        return Err(Error::Shape(format!("expected {n} entries, got {}", lambda.len())));
    }
    let nf = n as f64;
    OmegaParam::new(lambda.iter().map(|l| (l / nf) * (l / nf)).collect(), 0.0)
}

/// `λ^(n)` with `λ_j = n√α_j` for the atoms and the Gaussian mass spread
/// evenly over the remaining `n - k` entries.
pub fn lambda_sequence_for(omega: &OmegaParam, n: usize) -> Result<Vec<f64>> {
    let k = omega.alpha().len();
    let need = k + usize::from(omega.gamma() > 0.0);
    if n < need.max(1) {
        return Err(Error::Domain(format!("n = {n} is too small for ω, need at least {need}")));
    }
    let nf = n as f64;
    let mut out: Vec<f64> = omega.alpha().iter().map(|a| nf * a.sqrt()).collect();
    let rest = if omega.gamma() > 0.0 {
        nf * (omega.gamma() / (n - k) as f64).sqrt()
    } else {
        0.0
    };
    out.resize(n, rest);
    Ok(out)
}

/// `p_m((λ^(n))²) / n^{2m}` against `p̃_m(ω)`.
pub fn powersum_convergence(omega: &OmegaParam, m: usize, n_list: &[usize]) -> Result<SweepReport> {
    check_n_list(n_list)?;
    let limit = p_tilde(omega, m)?;
    let rows = n_list
        .iter()
        .map(|&n| {
            let lam = lambda_sequence_for(omega, n)?;
            let nd = Dd::from_f64(n as f64);
            let value = lam
                .iter()
                .map(|&l| (Dd::from_f64(l) / nd).sqr().powi(m as u32))
                .sum::<Dd>()
                .to_f64();
            Ok(SweepRow {
                n,
                value,
                limit,
                abs_error: (value - limit).abs(),
                std_error: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::new(Some(omega.clone()), limit, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Series,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `φ_n(ξ, λ^(n))` against the limit `∏_j Π(ω, ξ_j)`.
pub fn spherical_convergence(
    omega: &OmegaParam,
    xi: &[f64],
    n_list: &[usize],
    method: SweepMethod,
    opts: &SphericalOptions,
) -> Result<SweepReport> {
    check_n_list(n_list)?;
    if xi.is_empty() {
        return Err(Error::Shape("xi must not be empty".into()));
    }
    let limit = phi_omega(omega, xi);
    let xi_point = DiagonalPoint::new(xi.to_vec())?;
    if n_list[0] < xi.len() {
        return Err(Error::Domain(format!("n must be at least the length of xi ({})", xi.len())));
    }
    if method == SweepMethod::Series {
        if let Some(&n) = n_list.iter().find(|&&n| n > N_MAX_SERIES) {
            return Err(Error::Domain(format!(
                "series sweeps are limited to n <= {N_MAX_SERIES}, got {n}"
            )));
        }
    }
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let x = DiagonalPoint::new(lambda_sequence_for(omega, n)?)?;
            let xi_n = xi_point.padded(n)?;
            let (value, std_error) = match method {
                SweepMethod::Series => (spherical_series(&x, &xi_n, opts.max_weight, opts)?.value, None),
                SweepMethod::MonteCarlo { samples, seed } => {
                    let e = mc_spherical(&x, &xi_n, samples, seed)?;
                    (e.mean, Some(e.std_error))
                }
            };
            Ok(SweepRow {
                n,
                value,
                limit,
                abs_error: (value - limit).abs(),
                std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::new(Some(omega.clone()), limit, rows))
}

/// `E[f]` under `D_{m,n}` against `f(π/2, ..., π/2)`. For `m = 1` the
/// expectation is computed by quadrature; for `m ≥ 2` by self-normalized
/// Monte Carlo with uniform proposals on `[0, π]^m`, using `samples` and
/// `seed`.
pub fn weyl_concentration_sweep<F>(
    m: usize,
    n_list: &[usize],
    f: F,
    samples: usize,
    seed: u64,
) -> Result<SweepReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_n_list(n_list)?;
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < 2 * m) {
        return Err(Error::Domain(format!("need n >= 2m, got n={n}, m={m}")));
    }
    let limit = f(&vec![FRAC_PI_2; m]);
    let rows = n_list
        .iter()
        .map(|&n| {
            let (value, std_error) = if m == 1 {
                (weyl_expectation(1, n, &f)?, None)
            } else {
                let sums = run_blocks::<2, _>(samples, seed, |rng| {
                    let t: Vec<f64> = (0..m).map(|_| PI * rng.random::<f64>()).collect();
                    let w = weyl_weight_mn(m, n, &t).unwrap_or(0.0);
                    [w * f(&t), w]
                })?;
                let mw = sums.mean(1);
                if !(mw > 0.0) {
                    return Err(Error::Numerical("importance weights vanished".into()));
                }
                let r = sums.mean(0) / mw;
                let var = sums.covariance(0, 0) - 2.0 * r * sums.covariance(0, 1) + r * r * sums.covariance(1, 1);
                (r, Some((var.max(0.0) / samples as f64).sqrt() / mw))
            };
            Ok(SweepRow {
                n,
                value,
                limit,
                abs_error: (value - limit).abs(),
                std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::new(None, limit, rows))
}

/// `(δ!/(m+δ)!)² n^{2|m|} = ∏_{boxes} (n/(n + content))²`, which tends to 1.
pub fn coefficient_ratio(m: &Partition, n: usize) -> f64 {
    let nf = n as f64;
    let mut r = 1.0;
    for (i, &row) in m.parts().iter().enumerate() {
        for j in 0..row {
            let c = nf + j as f64 - i as f64;
            r *= (nf / c) * (nf / c);
        }
    }
    r
}
