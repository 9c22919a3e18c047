//! Physicists' Hermite polynomials.

use crate::error::{Error, Result};

/// `H_n(x)` by the three-term recurrence `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub fn hermite_poly(n: i32, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!(
            "Hermite order must be non-negative, got {n}"
        )));
    }
    Ok(hermite(n as usize, x))
}

/// Unchecked variant of [`hermite_poly`] for hot loops.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of `H_n`, lowest power first.
pub fn hermite_coefficients(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (p, c) in cur.iter().enumerate() {
            next[p + 1] += 2.0 * c;
        }
        for (p, c) in prev.iter().enumerate() {
            next[p] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Product of polynomials given as coefficient lists (lowest power first).
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        assert_eq!(hermite_poly(0, 17.3).unwrap(), 1.0);
        assert_eq!(hermite_poly(2, 1.0).unwrap(), 2.0);
        assert_eq!(hermite_poly(3, 2.0).unwrap(), 40.0);
    }

    #[test]
    fn negative_order_rejected() {
        assert!(hermite_poly(-1, 0.5).is_err());
    }

    #[test]
    fn coefficients_match_recurrence() {
        for n in 0..=12 {
            let c = hermite_coefficients(n);
            for &x in &[-2.3, -0.4, 0.0, 0.7, 1.9] {
                let direct: f64 = c.iter().rev().fold(0.0, |acc, a| acc * x + a);
                let rec = hermite(n, x);
                assert!((direct - rec).abs() <= 1e-9 * rec.abs().max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn parity() {
        for n in 0..10 {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((hermite(n, -1.3) - s * hermite(n, 1.3)).abs() < 1e-9);
        }
    }
}
