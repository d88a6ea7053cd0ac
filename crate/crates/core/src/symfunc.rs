//! Partitions and symmetric functions: power sums `p_m`, complete homogeneous
//! `h_m`, Schur `s_m` (Jacobi–Trudi), Newton identities and the Cauchy identity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::det_dd;

/// A weakly decreasing sequence of positive integers (trailing zeros trimmed).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation(format!(
                "partition parts must be weakly decreasing, got {parts:?}"
            )));
        }
        Ok(Partition(parts))
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    /// A one-row partition `(m)`.
    pub fn row(m: usize) -> Self {
        if m == 0 {
            Self::empty()
        } else {
            Partition(vec![m])
        }
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// `|m|`, the sum of the parts.
    pub fn weight(&self) -> usize {
        self.0.iter().sum()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Partitions of one fixed weight with at most `max_len` parts, in
/// lexicographically descending order.
#[derive(Debug, Clone)]
pub struct PartitionsOfWeight {
    max_len: usize,
    next: Option<Vec<usize>>,
}

impl PartitionsOfWeight {
    pub fn new(weight: usize, max_len: usize) -> Self {
        let next = if weight == 0 {
            Some(Vec::new())
        } else if max_len == 0 {
            None
        } else {
            Some(vec![weight])
        };
        Self { max_len, next }
    }

    fn successor(&self, p: &[usize]) -> Option<Vec<usize>> {
        for i in (0..p.len()).rev() {
            if p[i] <= 1 {
                continue;
            }
            let v = p[i] - 1;
            let mut rem: usize = p[i + 1..].iter().sum::<usize>() + 1;
            let slots = self.max_len - (i + 1);
            if rem > v * slots {
                continue;
            }
            let mut q = p[..i].to_vec();
            q.push(v);
            while rem > 0 {
                let part = rem.min(v);
                q.push(part);
                rem -= part;
            }
            return Some(q);
        }
        None
    }
}

impl Iterator for PartitionsOfWeight {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        let cur = self.next.take()?;
        self.next = self.successor(&cur);
        Some(Partition(cur))
    }
}

/// Every partition with `|m| <= max_weight` and at most `max_length` parts,
/// ordered by weight, then lexicographically descending.
#[derive(Debug, Clone)]
pub struct Partitions {
    weight: usize,
    max_weight: usize,
    max_length: usize,
    inner: PartitionsOfWeight,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        loop {
            if let Some(p) = self.inner.next() {
                return Some(p);
            }
            if self.weight >= self.max_weight {
                return None;
            }
            self.weight += 1;
            self.inner = PartitionsOfWeight::new(self.weight, self.max_length);
        }
    }
}

pub fn enumerate_partitions(max_weight: usize, max_length: usize) -> Partitions {
    Partitions {
        weight: 0,
        max_weight,
        max_length,
        inner: PartitionsOfWeight::new(0, max_length),
    }
}

/// Newton power sum `p_m(x) = Σ x_k^m`.
pub fn power_p(m: usize, x: &[f64]) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("power sums are defined for m >= 1".into()));
    }
    let e = i32::try_from(m).map_err(|_| Error::Domain(format!("exponent {m} too large")))?;
    Ok(x.iter().map(|v| v.powi(e)).fold(0.0, |a, b| a + b))
}

fn sorted_nonzero(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `(h_0, ..., h_max)` of `xs`, adding one variable at a time:
/// `h_m(x_1..x_k) = h_m(x_1..x_{k-1}) + x_k h_{m-1}(x_1..x_k)`.
pub(crate) fn complete_h_table_dd(max: usize, xs: &[f64]) -> Vec<Dd> {
    let xs: Vec<Dd> = xs.iter().map(|&x| Dd::from_f64(x)).collect();
    complete_h_table_of_dd(max, &xs)
}

pub(crate) fn complete_h_table_of_dd(max: usize, xs: &[Dd]) -> Vec<Dd> {
    let mut h = vec![Dd::ZERO; max + 1];
    h[0] = Dd::ONE;
    for &x in xs {
        for k in 1..=max {
            let add = h[k - 1] * x;
            h[k] += add;
        }
    }
    h
}

/// Jacobi–Trudi determinant `det(h_{m_i - i + j})` from a table of `h`.
pub(crate) fn jacobi_trudi_dd(parts: &[usize], h: &[Dd]) -> Dd {
    let l = parts.len();
    match l {
        0 => return Dd::ONE,
        1 => return h[parts[0]],
        _ => {}
    }
    let mut a = Vec::with_capacity(l * l);
    for (i, &mi) in parts.iter().enumerate() {
        for j in 0..l {
            let idx = mi as isize - i as isize + j as isize;
            a.push(if idx < 0 { Dd::ZERO } else { h[idx as usize] });
        }
    }
    if l == 2 {
        return a[0] * a[3] - a[1] * a[2];
    }
    det_dd(a, l).value
}

/// Complete homogeneous symmetric polynomial `h_m(x)`.
///
/// The input is sorted first, so the result is bitwise invariant under
/// permutations of `x`.
pub fn complete_h(m: usize, x: &[f64]) -> f64 {
    complete_h_table_dd(m, &sorted_nonzero(x))[m].to_f64()
}

/// Newton identities: `(h_0, ..., h_M)` from `(p_1, ..., p_M)` via
/// `m h_m = Σ_{i=1}^m p_i h_{m-i}`.
pub fn newton_h_from_p(p: &[f64]) -> Vec<f64> {
    newton_h_from_p_dd(p).into_iter().map(Dd::to_f64).collect()
}

pub(crate) fn newton_h_from_p_dd(p: &[f64]) -> Vec<Dd> {
    let big_m = p.len();
    let mut h = Vec::with_capacity(big_m + 1);
    h.push(Dd::ONE);
    for m in 1..=big_m {
        let s: Dd = (1..=m).map(|i| h[m - i].mul_f64(p[i - 1])).sum();
        h.push(s / Dd::from_f64(m as f64));
    }
    h
}

/// Schur polynomial `s_m(x)` by the Jacobi–Trudi identity.
///
/// Returns exactly 0 when `m` has more parts than `x` has nonzero entries.
pub fn schur(m: &Partition, x: &[f64]) -> f64 {
    let xs = sorted_nonzero(x);
    if m.len() > xs.len() {
        return 0.0;
    }
    if m.is_empty() {
        return 1.0;
    }
    let h = complete_h_table_dd(m.parts()[0] + m.len(), &xs);
    jacobi_trudi_dd(m.parts(), &h).to_f64()
}

/// Truncated left side of the Cauchy identity, `Σ_{|m|<=W} s_m(x) s_m(y)`.
pub fn cauchy_lhs(x: &[f64], y: &[f64], max_weight: usize) -> f64 {
    let xs = sorted_nonzero(x);
    let ys = sorted_nonzero(y);
    let rows = xs.len().min(ys.len());
    if rows == 0 {
        return 1.0;
    }
    let hx = complete_h_table_dd(max_weight + rows, &xs);
    let hy = complete_h_table_dd(max_weight + rows, &ys);
    enumerate_partitions(max_weight, rows)
        .map(|m| jacobi_trudi_dd(m.parts(), &hx) * jacobi_trudi_dd(m.parts(), &hy))
        .sum::<Dd>()
        .to_f64()
}

/// Product side of the Cauchy identity, `∏_{i,j} 1/(1 - x_i y_j)`.
pub fn cauchy_rhs(x: &[f64], y: &[f64]) -> Result<f64> {
    let mut prod = 1.0;
    for &a in x {
        for &b in y {
            let t = a * b;
            if t.abs() >= 1.0 {
                return Err(Error::Domain(format!(
                    "product form diverges: |x_i y_j| = {} >= 1",
                    t.abs()
                )));
            }
            prod /= 1.0 - t;
        }
    }
    Ok(prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn partition_canonical_form() {
        assert_eq!(part(&[3, 1, 0, 0]).parts(), &[3, 1]);
        assert!(Partition::new(vec![1, 2]).is_err());
        assert!(Partition::new(vec![2, 0, 1]).is_err());
        assert_eq!(part(&[2, 2, 1]).weight(), 5);
        assert_eq!(part(&[2, 2, 1]).to_string(), "(2,2,1)");
    }

    #[test]
    fn enumeration_order_and_counts() {
        let got: Vec<Vec<usize>> = enumerate_partitions(2, 2).map(Vec::from).collect();
        assert_eq!(got, vec![vec![], vec![1], vec![2], vec![1, 1]]);
        let got: Vec<Partition> = enumerate_partitions(0, 5).collect();
        assert_eq!(got, vec![Partition::empty()]);
        let w4: Vec<Vec<usize>> = PartitionsOfWeight::new(4, 4).map(Vec::from).collect();
        assert_eq!(
            w4,
            vec![vec![4], vec![3, 1], vec![2, 2], vec![2, 1, 1], vec![1, 1, 1, 1]]
        );
        let w5_len2: Vec<Vec<usize>> = PartitionsOfWeight::new(5, 2).map(Vec::from).collect();
        assert_eq!(w5_len2, vec![vec![5], vec![4, 1], vec![3, 2]]);
    }

    /// Partition counts from Euler's pentagonal recurrence, restricted to
    /// at most `k` parts via the standard p(n, k) recursion.
    fn count_oracle(n: usize, k: usize) -> usize {
        // p(n, k) = p(n, k-1) + p(n-k, k)
        let mut t = vec![vec![0usize; k + 1]; n + 1];
        for kk in 0..=k {
            t[0][kk] = 1;
        }
        for nn in 1..=n {
            for kk in 1..=k {
                t[nn][kk] = t[nn][kk - 1] + if nn >= kk { t[nn - kk][kk] } else { 0 };
            }
        }
        t[n][k]
    }

    #[test]
    fn enumeration_matches_counting_oracle() {
        for w in 0..=12 {
            for l in 1..=6 {
                let total: usize = (0..=w).map(|v| count_oracle(v, l)).sum();
                assert_eq!(enumerate_partitions(w, l).count(), total, "w={w} l={l}");
            }
        }
        assert_eq!(enumerate_partitions(5, 5).count(), 19);
        assert_eq!(enumerate_partitions(6, 6).count(), 30);
    }

    #[test]
    fn power_sums() {
        assert_eq!(power_p(2, &[1.0, 2.0]).unwrap(), 5.0);
        assert!((power_p(1, &[0.3, 0.3, 0.4]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(power_p(3, &[2.0]).unwrap(), 8.0);
        assert!(matches!(power_p(0, &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn complete_homogeneous() {
        assert_eq!(complete_h(0, &[3.0, -1.0]), 1.0);
        assert_eq!(complete_h(0, &[]), 1.0);
        assert_eq!(complete_h(2, &[1.0, 1.0]), 3.0);
        assert_eq!(complete_h(4, &[1.5]), 5.0625);
        assert_eq!(complete_h(3, &[1.0, 2.0]), 15.0);
        assert_eq!(complete_h(2, &[]), 0.0);
    }

    #[test]
    fn newton_identities() {
        let h = newton_h_from_p(&[2.0, 0.0, 0.0]);
        assert!((h[3] - 8.0 / 6.0).abs() < 1e-15);
        let a: f64 = 0.5;
        let h = newton_h_from_p(&[a, a * a, a.powi(3), a.powi(4)]);
        assert!((h[4] - 0.0625).abs() < 1e-16);
        assert_eq!(newton_h_from_p(&[]), vec![1.0]);
    }

    #[test]
    fn schur_values() {
        assert_eq!(schur(&part(&[3]), &[1.0, 2.0]), 15.0);
        assert_eq!(schur(&part(&[1, 1]), &[2.0, 3.0]), 6.0);
        assert_eq!(schur(&part(&[1, 1, 1]), &[1.0, 1.0]), 0.0);
        assert_eq!(schur(&Partition::empty(), &[]), 1.0);
        // s_(2,1)(x,y,z) at (1,1,1) is the dimension 8 of the adjoint rep of GL3
        assert!((schur(&part(&[2, 1]), &[1.0, 1.0, 1.0]) - 8.0).abs() < 1e-14);
        // zeros behave like absent variables
        assert_eq!(schur(&part(&[1, 1]), &[2.0, 0.0]), 0.0);
    }

    #[test]
    fn one_row_schur_is_complete_h_bitwise() {
        let x = [0.3, 1.7, 0.9, 2.2];
        for m in 0..10 {
            assert_eq!(schur(&Partition::row(m), &x).to_bits(), complete_h(m, &x).to_bits());
        }
    }

    #[test]
    fn cauchy_identity_examples() {
        assert!((cauchy_rhs(&[0.5], &[0.5]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(cauchy_lhs(&[], &[0.3], 10), 1.0);
        assert_eq!(cauchy_rhs(&[], &[0.3]).unwrap(), 1.0);
        let (x, y) = ([0.3, 0.2], [0.4]);
        let lhs = cauchy_lhs(&x, &y, 20);
        let rhs = cauchy_rhs(&x, &y).unwrap();
        // geometric tail bound max|x_i y_j|^21 / (1 - max) times number of pairs
        let q: f64 = 0.12;
        let bound = 2.0 * q.powi(21) / (1.0 - q).powi(2);
        assert!((lhs - rhs).abs() <= bound.max(1e-15));
        assert!((lhs - rhs).abs() <= 1e-8);
        assert!(matches!(cauchy_rhs(&[2.0], &[0.5]), Err(Error::Domain(_))));
    }
}
