//! Stochastic oracles: Haar-random unitaries, Monte Carlo orbital integrals,
//! an ambient finite-difference Laplacian and bi-invariant averages.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(master_seed)` and split into independent streams with
//! `set_stream(stream_id)`. Standard normals use the Box–Muller transform.
//! Samples are drawn in fixed blocks of [`BLOCK_SIZE`]; block `b` uses stream
//! `b`, and block sums are reduced in block order, so estimates do not depend
//! on the number of worker threads.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polya::{phi_omega, OmegaParam};
use crate::spherical::DiagonalPoint;

/// Number of samples drawn from each stream.
pub const BLOCK_SIZE: usize = 4096;

/// Largest `‖λ‖·‖θ‖` accepted by [`mc_orbital_exp`].
pub const ORBITAL_VARIANCE_GUARD: f64 = 10.0;

/// Identifies one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_id);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl McEstimate {
    /// An exact value reported in estimate form.
    pub fn exact(value: f64, n_samples: usize, master_seed: u64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_samples,
            master_seed,
        }
    }
}

/// A pair of standard normals by Box–Muller.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// Standard complex normal, `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let (a, b) = normal_pair(rng);
    Complex64::new(a / SQRT_2, b / SQRT_2)
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    // filled column by column
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// QR of a Ginibre matrix with the phases of `diag(R)` moved into `Q`.
fn phase_corrected_q(g: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let k = g.ncols();
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        let d = r[(j, j)];
        let a = d.norm();
        let phase = if a > 0.0 { d / a } else { Complex64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    q
}

/// Haar-distributed `n x n` unitary drawn from `rng`.
pub fn haar_unitary_from<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    phase_corrected_q(ginibre(n, n, rng))
}

/// First `k` columns of a Haar unitary, as an `n x k` isometry.
pub fn haar_columns<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<Complex64> {
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    phase_corrected_q(ginibre(n, k, rng))
}

/// Haar-distributed `n x n` unitary, a pure function of the stream.
pub fn haar_unitary(n: usize, stream: &RngStream) -> Result<DMatrix<Complex64>> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    Ok(haar_unitary_from(n, &mut stream.rng()))
}

/// Per-component sums of pilot-shifted samples and their cross products.
#[derive(Debug, Clone)]
pub struct BlockSums<const K: usize> {
    pub count: usize,
    pub shift: [f64; K],
    pub sum: [f64; K],
    pub cross: [[f64; K]; K],
}

impl<const K: usize> BlockSums<K> {
    pub fn mean(&self, k: usize) -> f64 {
        self.shift[k] + self.sum[k] / self.count as f64
    }

    /// Sample covariance of components `a` and `b`.
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let c = (self.cross[a][b] - self.sum[a] * self.sum[b] / n) / (n - 1.0);
        if a == b {
            c.max(0.0)
        } else {
            c
        }
    }

    pub fn estimate(&self, k: usize, master_seed: u64) -> McEstimate {
        McEstimate {
            mean: self.mean(k),
            std_error: (self.covariance(k, k) / self.count as f64).sqrt(),
            n_samples: self.count,
            master_seed,
        }
    }
}

/// Runs `n_samples` draws of `f` in fixed blocks on the rayon pool.
///
/// Each component is shifted by the first sample of stream 0 before
/// accumulation, which keeps the variance formula stable and makes
/// constant integrands report an exact zero error.
pub fn run_blocks<const K: usize, F>(n_samples: usize, master_seed: u64, f: F) -> Result<BlockSums<K>>
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
{
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be at least 1".into()));
    }
    let shift = f(&mut RngStream::new(master_seed, 0).rng());
    let blocks = n_samples.div_ceil(BLOCK_SIZE);
    let partial: Vec<([f64; K], [[f64; K]; K])> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(master_seed, b as u64).rng();
            let len = BLOCK_SIZE.min(n_samples - b * BLOCK_SIZE);
            let mut s = [0.0; K];
            let mut c = [[0.0; K]; K];
            for _ in 0..len {
                let y = f(&mut rng);
                let mut d = [0.0; K];
                for k in 0..K {
                    d[k] = y[k] - shift[k];
                    s[k] += d[k];
                }
                for a in 0..K {
                    for bb in 0..K {
                        c[a][bb] += d[a] * d[bb];
                    }
                }
            }
            (s, c)
        })
        .collect();
    let mut sum = [0.0; K];
    let mut cross = [[0.0; K]; K];
    for (s, c) in &partial {
        for a in 0..K {
            sum[a] += s[a];
            for b in 0..K {
                cross[a][b] += c[a][b];
            }
        }
    }
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Monte Carlo sum is not finite".into()));
    }
    Ok(BlockSums {
        count: n_samples,
        shift,
        sum,
        cross,
    })
}

fn same_dim(a: &DiagonalPoint, b: &DiagonalPoint) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    Ok(a.dim())
}

/// Samples `Re tr(diag(b) U diag(a) V*)` with `U, V` Haar, drawing only the
/// columns of `U` and `V` that meet nonzero entries.
fn trace_sampler<'a>(a: &'a DiagonalPoint, b: &'a DiagonalPoint) -> impl Fn(&mut ChaCha8Rng) -> f64 + Sync + 'a {
    let n = a.dim();
    let (ka, kb) = (a.rank(), b.rank());
    let k = ka.min(kb);
    move |rng: &mut ChaCha8Rng| {
        // U^T is Haar when U is, so the thin side can always be sampled as columns.
        let u = haar_columns(n, k, rng);
        let v = haar_columns(n, k, rng);
        let (rows_w, cols_w) = if ka <= kb { (b, a) } else { (a, b) };
        let mut t = 0.0;
        for c in 0..k {
            for r in 0..rows_w.rank() {
                let w = rows_w.values()[r] * cols_w.values()[c];
                t += w * (u[(r, c)] * v[(r, c)].conj()).re;
            }
        }
        t
    }
}

/// Real and imaginary parts of `E[exp(i Re tr(ξ U x V*))]`.
pub fn mc_spherical_full(
    x: &DiagonalPoint,
    xi: &DiagonalPoint,
    n_samples: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    same_dim(x, xi)?;
    if n_samples < 100 {
        return Err(Error::Validation(format!("need at least 100 samples, got {n_samples}")));
    }
    if x.rank() == 0 || xi.rank() == 0 {
        return Ok((McEstimate::exact(1.0, n_samples, seed), McEstimate::exact(0.0, n_samples, seed)));
    }
    let tr = trace_sampler(x, xi);
    let sums = run_blocks::<2, _>(n_samples, seed, |rng| {
        let (s, c) = tr(rng).sin_cos();
        [c, s]
    })?;
    Ok((sums.estimate(0, seed), sums.estimate(1, seed)))
}

/// Monte Carlo estimate of the spherical function `φ_x(ξ)`.
pub fn mc_spherical(x: &DiagonalPoint, xi: &DiagonalPoint, n_samples: usize, seed: u64) -> Result<McEstimate> {
    mc_spherical_full(x, xi, n_samples, seed).map(|r| r.0)
}

/// Monte Carlo estimate of `𝓘(λ, θ) = E[exp(Re tr(λ U θ V*))]`.
pub fn mc_orbital_exp(lambda: &DiagonalPoint, theta: &DiagonalPoint, n_samples: usize, seed: u64) -> Result<McEstimate> {
    same_dim(lambda, theta)?;
    if n_samples < 100 {
        return Err(Error::Validation(format!("need at least 100 samples, got {n_samples}")));
    }
    let size = (lambda.norm_sq() * theta.norm_sq()).sqrt();
    if size > ORBITAL_VARIANCE_GUARD {
        return Err(Error::Range(format!(
            "‖λ‖·‖θ‖ = {size} exceeds the variance guard {ORBITAL_VARIANCE_GUARD}"
        )));
    }
    if lambda.rank() == 0 || theta.rank() == 0 {
        return Ok(McEstimate::exact(1.0, n_samples, seed));
    }
    let tr = trace_sampler(lambda, theta);
    let sums = run_blocks::<1, _>(n_samples, seed, |rng| [tr(rng).exp()])?;
    Ok(sums.estimate(0, seed))
}

/// Flat Laplacian on the `2n²` real coordinates `(Re x_jk, Im x_jk)` by
/// central second differences of step `h`.
pub fn ambient_laplacian_fd<F: Fn(&DMatrix<Complex64>) -> f64>(f: F, x: &DMatrix<Complex64>, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let f0 = f(x);
    let mut y = x.clone();
    let mut acc = 0.0;
    for idx in 0..x.len() {
        for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
            y[idx] = x[idx] + dir;
            let fp = f(&y);
            y[idx] = x[idx] - dir;
            let fm = f(&y);
            y[idx] = x[idx];
            acc += (fp - 2.0 * f0 + fm) / (h * h);
        }
    }
    Ok(acc)
}

/// Monte Carlo estimate of `∫∫ φ_ω(x + k_1 y k_2*) dk_1 dk_2` over `U(n)²`,
/// with `x`, `y` embedded as zero-padded `n x n` diagonals.
///
/// `x + k_1 y k_2*` has rank at most `2m`; its nonzero singular values are
/// those of `R_A S R_B*`, where `A = [E, k_1 E']`, `B = [E, k_2 E']` are
/// `n x 2m` with QR factors `R_A`, `R_B` and `S = diag(x, y)`.
pub fn mc_biinvariant_avg(
    omega: &OmegaParam,
    x: &DiagonalPoint,
    y: &DiagonalPoint,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let m = same_dim(x, y)?;
    if n < 2 * m {
        return Err(Error::Domain(format!("need n >= 2m, got n={n}, m={m}")));
    }
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be at least 1".into()));
    }
    let (kx, ky) = (x.rank(), y.rank());
    if ky == 0 {
        return Ok(McEstimate::exact(phi_omega(omega, x.values()), n_samples, seed));
    }
    if kx == 0 {
        // unitary invariance: singular values of k1 y k2* are those of y
        return Ok(McEstimate::exact(phi_omega(omega, y.values()), n_samples, seed));
    }
    let width = kx + ky;
    let sums = run_blocks::<1, _>(n_samples, seed, |rng| {
        let k1 = haar_columns(n, ky, rng);
        let k2 = haar_columns(n, ky, rng);
        let frame = |k: &DMatrix<Complex64>| {
            let mut a = DMatrix::<Complex64>::zeros(n, width);
            for j in 0..kx {
                a[(j, j)] = Complex64::new(1.0, 0.0);
            }
            a.view_mut((0, kx), (n, ky)).copy_from(k);
            a.qr().r()
        };
        let (ra, rb) = (frame(&k1), frame(&k2));
        let mut s = DMatrix::<Complex64>::zeros(width, width);
        for j in 0..kx {
            s[(j, j)] = Complex64::new(x.values()[j], 0.0);
        }
        for j in 0..ky {
            s[(kx + j, kx + j)] = Complex64::new(y.values()[j], 0.0);
        }
        let core = ra * s * rb.adjoint();
        let sv = core.singular_values();
        [phi_omega(omega, sv.as_slice())]
    })?;
    Ok(sums.estimate(0, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{bessel_i0, bessel_j0, SeriesOptions};

    fn dp(v: &[f64]) -> DiagonalPoint {
        DiagonalPoint::new(v.to_vec()).unwrap()
    }

    fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
        let n = u.nrows();
        let p = u * u.adjoint();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn stream_and_normal_fixtures() {
        use rand::RngCore;
        assert_eq!(RngStream::new(0, 0).rng().next_u64(), 0xb585f767a79a3b6c);
        let (x, y) = normal_pair(&mut RngStream::new(0, 0).rng());
        assert_eq!((x.to_bits(), y.to_bits()), (0xbff89193cdcc1332, 0x3fd55ec39a6a7e3b));
        let (z, w) = normal_pair(&mut RngStream::new(42, 3).rng());
        assert_eq!((z.to_bits(), w.to_bits()), (0xbfe95a196c2c27a1, 0xbfe0a2565f15b849));
    }

    #[test]
    fn haar_matrices_are_unitary_and_reproducible() {
        for seed in [0, 1, 99] {
            let u = haar_unitary(8, &RngStream::new(seed, 3)).unwrap();
            assert!(unitarity_defect(&u) <= 1e-12);
            let v = haar_unitary(8, &RngStream::new(seed, 3)).unwrap();
            assert_eq!(u, v);
        }
        let a = haar_unitary(4, &RngStream::new(5, 0)).unwrap();
        let b = haar_unitary(4, &RngStream::new(5, 1)).unwrap();
        assert_ne!(a, b);
        assert!(haar_unitary(0, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn haar_entry_second_moment() {
        let s = run_blocks::<1, _>(100_000, 11, |rng| [haar_unitary_from(4, rng)[(0, 0)].norm_sqr()]).unwrap();
        let e = s.estimate(0, 11);
        assert!((e.mean - 0.25).abs() <= 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn constant_integrands_are_exact() {
        let e = mc_spherical(&DiagonalPoint::zeros(3).unwrap(), &dp(&[1.0, 2.0, 3.0]), 1000, 4).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        let s = run_blocks::<1, _>(5000, 1, |_| [0.75]).unwrap();
        assert_eq!((s.mean(0), s.estimate(0, 1).std_error), (0.75, 0.0));
    }

    #[test]
    fn n1_spherical_is_j0() {
        let (re, im) = mc_spherical_full(&dp(&[1.0]), &dp(&[1.0]), 100_000, 2).unwrap();
        let j0 = bessel_j0(1.0, &SeriesOptions::default()).unwrap();
        assert!((re.mean - j0).abs() <= 4.0 * re.std_error);
        assert!(im.mean.abs() <= 4.0 * im.std_error);
    }

    #[test]
    fn n1_orbital_is_i0() {
        let e = mc_orbital_exp(&dp(&[1.0]), &dp(&[2.0]), 100_000, 3).unwrap();
        let i0 = bessel_i0(2.0, &SeriesOptions::default()).unwrap();
        assert!((e.mean - i0).abs() <= 4.0 * e.std_error);
        let e = mc_orbital_exp(&dp(&[1.0]), &dp(&[0.0]), 200, 3).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(matches!(
            mc_orbital_exp(&dp(&[4.0]), &dp(&[3.0]), 200, 3),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn ambient_laplacian_examples() {
        let x = DMatrix::from_fn(2, 2, |i, j| Complex64::new(0.3 * i as f64 - 0.2, 0.1 * j as f64 + 0.4));
        let norm = |m: &DMatrix<Complex64>| m.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((ambient_laplacian_fd(norm, &x, 1e-3).unwrap() - 16.0).abs() < 1e-6);
        assert_eq!(ambient_laplacian_fd(|_: &DMatrix<Complex64>| 2.0, &x, 1e-3).unwrap(), 0.0);
        let mut d = DMatrix::<Complex64>::zeros(2, 2);
        d[(0, 0)] = Complex64::new(1.0, 0.0);
        d[(1, 1)] = Complex64::new(0.5, 0.0);
        let v = ambient_laplacian_fd(|m: &DMatrix<Complex64>| (-norm(m)).exp(), &d, 1e-4).unwrap();
        let exact = -11.0 * (-1.25f64).exp();
        assert!(((v - exact) / exact).abs() < 1e-4);
    }

    #[test]
    fn biinvariant_trivial_cases() {
        let w = OmegaParam::new(vec![4.0], 0.0).unwrap();
        let e = mc_biinvariant_avg(&w, &dp(&[1.0]), &dp(&[0.0]), 4, 50, 0).unwrap();
        assert_eq!((e.mean, e.std_error), (0.5, 0.0));
        let e = mc_biinvariant_avg(&w, &dp(&[0.0]), &dp(&[0.0]), 4, 50, 0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(matches!(
            mc_biinvariant_avg(&w, &dp(&[1.0, 1.0]), &dp(&[1.0, 1.0]), 3, 50, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn low_rank_route_matches_full_svd() {
        use crate::polya::phi_omega_matrix;
        let w = OmegaParam::new(vec![0.7, 0.2], 0.1).unwrap();
        let (x, y, n) = (dp(&[1.0, 0.4]), dp(&[1.5, 0.3]), 5);
        let mut rng = RngStream::new(8, 0).rng();
        let k1 = haar_unitary_from(n, &mut rng);
        let k2 = haar_unitary_from(n, &mut rng);
        let mut xm = DMatrix::<Complex64>::zeros(n, n);
        let mut ym = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..2 {
            xm[(j, j)] = Complex64::new(x.values()[j], 0.0);
            ym[(j, j)] = Complex64::new(y.values()[j], 0.0);
        }
        let full = phi_omega_matrix(&w, &(&xm + &k1 * &ym * k2.adjoint())).unwrap();

        let a = |k: &DMatrix<Complex64>| {
            let mut a = DMatrix::<Complex64>::zeros(n, 4);
            a[(0, 0)] = Complex64::new(1.0, 0.0);
            a[(1, 1)] = Complex64::new(1.0, 0.0);
            a.view_mut((0, 2), (n, 2)).copy_from(&k.columns(0, 2));
            a.qr().r()
        };
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.4, 0.0),
            Complex64::new(1.5, 0.0),
            Complex64::new(0.3, 0.0),
        ]));
        let core = a(&k1) * s * a(&k2).adjoint();
        let low = phi_omega(&w, core.singular_values().as_slice());
        assert!((full - low).abs() < 1e-12);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let (x, xi) = (dp(&[1.0, 2.0]), dp(&[0.5, 1.5]));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| mc_spherical(&x, &xi, 20_000, 9).unwrap());
        let b = four.install(|| mc_spherical(&x, &xi, 20_000, 9).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
