//! Probabilists' Hermite polynomials `h_j` and their multivariate products.

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::scalar::Real;

/// `h_j(t)` by the three-term recursion `h_{n+1} = t h_n - n h_{n-1}`.
pub fn hermite_eval<T: Real>(j: u32, t: T) -> T {
    let mut prev = T::one();
    if j == 0 {
        return prev;
    }
    let mut cur = t;
    for n in 1..j {
        let next = t * cur - T::from_u32(n).unwrap() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = h_k(t)` for `k = 0..out.len()`.
pub fn hermite_table<T: Real>(t: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() > 1 {
        out[1] = t;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = t * out[n] - T::from_usize_lossy(n) * out[n - 1];
    }
}

/// `H_α(θ) = Π_k h_{α_k}(θ_k)`.
pub fn multi_hermite_eval<T: Real>(alpha: &MultiIndex, theta: &[T]) -> Result<T> {
    if alpha.required_dims() > theta.len() {
        return Err(Error::DimensionMismatch {
            context: "multi_hermite_eval",
            expected: alpha.required_dims(),
            got: theta.len(),
        });
    }
    Ok(alpha
        .terms()
        .fold(T::one(), |acc, (d, p)| acc * hermite_eval(p, theta[d])))
}

const FACTORIALS: [u64; 21] = {
    let mut t = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        t[i] = t[i - 1] * i as u64;
        i += 1;
    }
    t
};

/// `n!` exactly, for `n ≤ 20`.
pub fn factorial_exact(n: u32) -> Option<u64> {
    FACTORIALS.get(n as usize).copied()
}

/// `n!` in floating point; overflow past the `f64` range is an error.
pub fn factorial(n: u32) -> Result<f64> {
    if let Some(f) = factorial_exact(n) {
        return Ok(f as f64);
    }
    let mut acc = FACTORIALS[20] as f64;
    for k in 21..=n {
        acc *= k as f64;
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::Overflow(format!("{n}! exceeds the floating-point range")))
    }
}

/// `α! = Π_k α_k!`, exact when it fits in 128 bits.
pub fn norm_sq_exact(alpha: &MultiIndex) -> Option<u128> {
    alpha.terms().try_fold(1u128, |acc, (_, p)| {
        factorial_exact(p).and_then(|f| acc.checked_mul(f as u128))
    })
}

/// `⟨H_α, H_α⟩ = α!`.
pub fn norm_sq<T: Real>(alpha: &MultiIndex) -> Result<T> {
    let v = match norm_sq_exact(alpha) {
        Some(e) => e as f64,
        None => {
            let mut acc = 1.0f64;
            for (_, p) in alpha.terms() {
                acc *= factorial(p)?;
            }
            acc
        }
    };
    if !v.is_finite() {
        return Err(Error::Overflow(format!("{alpha:?}! exceeds the floating-point range")));
    }
    let t = T::lit(v);
    if !t.is_finite() {
        return Err(Error::Overflow(format!("{alpha:?}! exceeds the scalar range")));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(2, 1.0), 0.0);
        assert_eq!(hermite_eval(3, 2.0), 2.0);
        assert_eq!(hermite_eval(3, 2.0f32), 2.0f32);
        let mut t = [0.0; 6];
        hermite_table(1.5, &mut t);
        for (k, v) in t.iter().enumerate() {
            assert!((v - hermite_eval::<f64>(k as u32, 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_values() {
        let a = MultiIndex::zero();
        assert_eq!(multi_hermite_eval(&a, &[0.3, 9.0]).unwrap(), 1.0);
        let a = MultiIndex::from_dense(&[1, 1]);
        assert_eq!(multi_hermite_eval(&a, &[2.0, 3.0]).unwrap(), 6.0);
        let a = MultiIndex::from_dense(&[0, 2]);
        assert_eq!(multi_hermite_eval(&a, &[5.0, 1.0]).unwrap(), 0.0);
        assert!(multi_hermite_eval(&a, &[5.0]).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(norm_sq::<f64>(&MultiIndex::zero()).unwrap(), 1.0);
        assert_eq!(norm_sq::<f64>(&MultiIndex::from_dense(&[2, 1])).unwrap(), 2.0);
        assert_eq!(norm_sq::<f64>(&MultiIndex::from_dense(&[3, 0, 2])).unwrap(), 12.0);
        assert_eq!(norm_sq_exact(&MultiIndex::from_dense(&[20, 20])), Some(2432902008176640000u128.pow(2)));
        assert!(norm_sq::<f64>(&MultiIndex::from_dense(&[171])).is_err());
        assert!(norm_sq::<f64>(&MultiIndex::from_dense(&[100, 100])).is_err());
        assert!(norm_sq::<f32>(&MultiIndex::from_dense(&[40])).is_err());
    }
}
