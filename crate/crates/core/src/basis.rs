//! Polyharmonic splines, monomials and the analytic action of the supported
//! linear operators on them.

use serde::{Deserialize, Serialize};

use crate::error::BasisError;
use crate::geometry::Point;

/// Linear differential operator approximated by stencil weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorTag {
    Identity,
    Laplacian,
}

impl OperatorTag {
    /// Order of the operator; weights computed in coordinates scaled by `s`
    /// are mapped back by multiplying with `s^(-order)`.
    pub fn order(self) -> i32 {
        match self {
            OperatorTag::Identity => 0,
            OperatorTag::Laplacian => 2,
        }
    }
}

/// Polyharmonic spline `r^k` (odd `k`) or `r^k log r` (even `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhsBasis {
    k: u32,
}

impl Default for PhsBasis {
    fn default() -> Self {
        PhsBasis { k: 3 }
    }
}

impl PhsBasis {
    pub fn new(k: u32) -> Result<Self, BasisError> {
        if k == 0 {
            return Err(BasisError::InvalidExponent(k));
        }
        Ok(PhsBasis { k })
    }

    pub fn k(self) -> u32 {
        self.k
    }

    fn is_odd(self) -> bool {
        self.k % 2 == 1
    }

    pub fn eval(self, r: f64) -> Result<f64, BasisError> {
        if r < 0.0 {
            return Err(BasisError::NegativeRadius(r));
        }
        Ok(self.eval_unchecked(r))
    }

    #[inline]
    pub(crate) fn eval_unchecked(self, r: f64) -> f64 {
        let rk = r.powi(self.k as i32);
        if self.is_odd() {
            rk
        } else if r == 0.0 {
            0.0
        } else {
            rk * r.ln()
        }
    }

    /// Laplacian of `x -> phi(|x|)` in `d` dimensions, as a function of `r`.
    pub fn laplacian(self, d: usize, r: f64) -> Result<f64, BasisError> {
        if r < 0.0 {
            return Err(BasisError::NegativeRadius(r));
        }
        if r == 0.0 && self.k <= 2 {
            return Err(BasisError::SingularAtOrigin { k: self.k });
        }
        Ok(self.laplacian_unchecked(d, r))
    }

    #[inline]
    pub(crate) fn laplacian_unchecked(self, d: usize, r: f64) -> f64 {
        let k = self.k as f64;
        let d = d as f64;
        if r == 0.0 {
            return 0.0;
        }
        let rk2 = r.powi(self.k as i32 - 2);
        if self.is_odd() {
            k * (k + d - 2.0) * rk2
        } else {
            rk2 * (k * (k + d - 2.0) * r.ln() + 2.0 * k + d - 2.0)
        }
    }

    /// Applies `op` to the spline centered at distance `r`.
    pub(crate) fn apply_unchecked(self, op: OperatorTag, d: usize, r: f64) -> f64 {
        match op {
            OperatorTag::Identity => self.eval_unchecked(r),
            OperatorTag::Laplacian => self.laplacian_unchecked(d, r),
        }
    }
}

pub fn phs_eval(basis: PhsBasis, r: f64) -> Result<f64, BasisError> {
    basis.eval(r)
}

pub fn phs_laplacian(basis: PhsBasis, d: usize, r: f64) -> Result<f64, BasisError> {
    basis.laplacian(d, r)
}

/// Number of monomials of total degree at most `m` in `d` variables, `C(m+d, m)`.
pub fn monomial_count(m: u32, d: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = c * (m as u128 + i) / i;
    }
    c as usize
}

/// Exponent tuple of a monomial.
pub type MultiIndex = Vec<u32>;

/// All monomials of total degree `<= m` in `d` variables in graded
/// lexicographic order: the constant first, then degree 1, and so on; within
/// a degree, larger leading exponents come first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    m: u32,
    d: usize,
    indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(m: u32, d: usize) -> Self {
        let mut indices = Vec::with_capacity(monomial_count(m, d));
        let mut cur = vec![0u32; d];
        for deg in 0..=m {
            push_degree(&mut indices, &mut cur, 0, deg);
        }
        MonomialBasis { m, d, indices }
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, cur: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_degree(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

fn check_dims(alpha: &[u32], p: &Point) -> Result<(), BasisError> {
    if alpha.len() != p.dim() {
        return Err(BasisError::DimensionMismatch {
            expected: alpha.len(),
            got: p.dim(),
        });
    }
    Ok(())
}

/// `prod_j p_j^alpha_j`, with `0^0 = 1`.
pub fn monomial_eval(alpha: &[u32], p: &Point) -> Result<f64, BasisError> {
    check_dims(alpha, p)?;
    Ok(monomial_eval_slice(alpha, p.coords()))
}

#[inline]
pub(crate) fn monomial_eval_slice(alpha: &[u32], p: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(p)
        .map(|(&a, &x)| x.powi(a as i32))
        .product()
}

/// Applies `op` to the monomial `x^alpha` and evaluates at `p`.
pub fn monomial_apply(op: OperatorTag, alpha: &[u32], p: &Point) -> Result<f64, BasisError> {
    check_dims(alpha, p)?;
    Ok(monomial_apply_slice(op, alpha, p.coords()))
}

pub(crate) fn monomial_apply_slice(op: OperatorTag, alpha: &[u32], p: &[f64]) -> f64 {
    match op {
        OperatorTag::Identity => monomial_eval_slice(alpha, p),
        OperatorTag::Laplacian => {
            let mut total = 0.0;
            let mut reduced = alpha.to_vec();
            for j in 0..alpha.len() {
                if alpha[j] < 2 {
                    continue;
                }
                reduced[j] = alpha[j] - 2;
                total += (alpha[j] * (alpha[j] - 1)) as f64 * monomial_eval_slice(&reduced, p);
                reduced[j] = alpha[j];
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central-difference Laplacian of `f` at `x`.
    fn fd_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> f64 {
        let mut y = x.to_vec();
        let f0 = f(x);
        let mut total = 0.0;
        for j in 0..x.len() {
            y[j] = x[j] + step;
            let fp = f(&y);
            y[j] = x[j] - step;
            let fm = f(&y);
            y[j] = x[j];
            total += (fp - 2.0 * f0 + fm) / (step * step);
        }
        total
    }

    /// Fourth-order central-difference Laplacian.
    fn fd4_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> f64 {
        let mut y = x.to_vec();
        let f0 = f(x);
        let mut total = 0.0;
        for j in 0..x.len() {
            let mut at = |t: f64| {
                y[j] = x[j] + t;
                let v = f(&y);
                y[j] = x[j];
                v
            };
            let (p1, m1, p2, m2) = (at(step), at(-step), at(2.0 * step), at(-2.0 * step));
            total += (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * step * step);
        }
        total
    }

    #[test]
    fn phs_values() {
        let k3 = PhsBasis::new(3).unwrap();
        assert_eq!(phs_eval(k3, 2.0).unwrap(), 8.0);
        assert_eq!(phs_eval(k3, 0.0).unwrap(), 0.0);
        let k2 = PhsBasis::new(2).unwrap();
        assert_eq!(phs_eval(k2, 1.0).unwrap(), 0.0);
        assert_eq!(phs_eval(k2, 0.0).unwrap(), 0.0);
        assert!((phs_eval(k2, 2.0).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-15);
        assert!(matches!(phs_eval(k3, -1.0), Err(BasisError::NegativeRadius(_))));
        assert!(PhsBasis::new(0).is_err());
    }

    #[test]
    fn phs_laplacian_examples() {
        // Oracle: central differences of phi(|x|) along a generic direction.
        let k3 = PhsBasis::new(3).unwrap();
        for (d, r, expected) in [(2, 1.0, 9.0), (2, 2.0, 18.0), (3, 1.0, 12.0)] {
            let x: Vec<f64> = (0..d).map(|j| if j == 0 { r } else { 0.0 }).collect();
            let fd = fd_laplacian(|y| k3.eval_unchecked(y.iter().map(|c| c * c).sum::<f64>().sqrt()), &x, 1e-4);
            assert!((fd - expected).abs() < 1e-6 * expected.max(1.0) * 10.0, "fd {fd}");
            assert!((phs_laplacian(k3, d, r).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn phs_laplacian_at_origin() {
        assert_eq!(phs_laplacian(PhsBasis::new(3).unwrap(), 2, 0.0).unwrap(), 0.0);
        assert_eq!(phs_laplacian(PhsBasis::new(4).unwrap(), 2, 0.0).unwrap(), 0.0);
        assert!(matches!(
            phs_laplacian(PhsBasis::new(1).unwrap(), 2, 0.0),
            Err(BasisError::SingularAtOrigin { k: 1 })
        ));
        assert!(phs_laplacian(PhsBasis::new(2).unwrap(), 2, 0.0).is_err());
    }

    #[test]
    fn phs_laplacian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let k = rng.random_range(1..=7u32);
            let d = rng.random_range(1..=3usize);
            let r = rng.random_range(0.3..2.0);
            let basis = PhsBasis::new(k).unwrap();
            // Random direction so all coordinates contribute.
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
            let x: Vec<f64> = dir.iter().map(|c| c / norm * r).collect();
            let phi = |y: &[f64]| basis.eval_unchecked(y.iter().map(|c| c * c).sum::<f64>().sqrt());
            let fd = fd_laplacian(phi, &x, 1e-4 * r);
            let exact = phs_laplacian(basis, d, r).unwrap();
            let scale = exact.abs().max(r.powi(k as i32 - 2));
            assert!((fd - exact).abs() <= 1e-5 * scale, "k={k} d={d} r={r}: {fd} vs {exact}");
        }
    }

    #[test]
    fn counts() {
        assert_eq!(monomial_count(2, 2), 6);
        assert_eq!(monomial_count(4, 2), 15);
        assert_eq!(monomial_count(6, 2), 28);
        assert_eq!(monomial_count(0, 3), 1);
        for m in 0..=8 {
            for d in 1..=3 {
                assert_eq!(MonomialBasis::new(m, d).len(), monomial_count(m, d));
            }
        }
    }

    #[test]
    fn graded_lex_order() {
        let b = MonomialBasis::new(2, 2);
        assert_eq!(
            b.indices(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        for d in 1..=3 {
            let b = MonomialBasis::new(4, d);
            assert!(b.indices()[0].iter().all(|&e| e == 0));
            for (i, a) in b.indices().iter().enumerate().take(d + 1).skip(1) {
                assert_eq!(a.iter().sum::<u32>(), 1);
                assert_eq!(a[i - 1], 1);
            }
            let degrees: Vec<u32> = b.indices().iter().map(|a| a.iter().sum()).collect();
            assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
            assert!(degrees.iter().all(|&g| g <= 4));
        }
    }

    #[test]
    fn monomial_values() {
        assert_eq!(monomial_eval(&[0, 0], &[3.0, -2.0].into()).unwrap(), 1.0);
        assert_eq!(monomial_eval(&[0, 0], &[0.0, 0.0].into()).unwrap(), 1.0);
        assert_eq!(monomial_eval(&[1, 1], &[2.0, 3.0].into()).unwrap(), 6.0);
        assert_eq!(monomial_eval(&[2, 0], &[0.0, 5.0].into()).unwrap(), 0.0);
        assert!(monomial_eval(&[1, 1, 0], &[2.0, 3.0].into()).is_err());
    }

    #[test]
    fn monomial_laplacians() {
        let lap = OperatorTag::Laplacian;
        assert_eq!(monomial_apply(lap, &[2, 0], &[7.0, -1.0].into()).unwrap(), 2.0);
        assert_eq!(monomial_apply(lap, &[1, 1], &[7.0, -1.0].into()).unwrap(), 0.0);
        assert_eq!(monomial_apply(lap, &[2, 2], &[1.0, 1.0].into()).unwrap(), 4.0);
        assert_eq!(
            monomial_apply(OperatorTag::Identity, &[1, 1], &[2.0, 3.0].into()).unwrap(),
            6.0
        );
        assert!(monomial_apply(lap, &[2], &[1.0, 1.0].into()).is_err());
    }

    #[test]
    fn monomial_laplacian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=3 {
            let basis = MonomialBasis::new(6, d);
            for alpha in basis.indices() {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let fd = fd4_laplacian(|y| monomial_eval_slice(alpha, y), &x, 1e-2);
                let exact = monomial_apply_slice(OperatorTag::Laplacian, alpha, &x);
                assert!((fd - exact).abs() <= 1e-6, "alpha {alpha:?}: {fd} vs {exact}");
            }
        }
    }
}
