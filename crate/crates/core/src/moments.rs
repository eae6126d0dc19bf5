//! Marchenko–Pastur moment engine.
//!
//! `M_r(c)` is the r-th moment of the limiting spectral law of `c_N S S*`
//! (unit variance, ratio `c`):
//!
//! ```text
//! M_r = Σ_{k=0}^{r-1} c^k C(r,k) C(r-1,k) / (k+1)
//! ```
//!
//! The coefficients are Narayana numbers, computed exactly in integers;
//! the polynomial has positive coefficients so floating evaluation has no
//! cancellation. Scaled moments `h_u = c^{-u} M_u` are the moments of
//! `λ / c`, and the shifted moments `a_m = Σ_u C(m,u) σ^{2(m-u)} h_u` are
//! the moments of `λ / c + σ²`.
//!
//! [`exact`] repeats the same quantities over arbitrary-precision
//! rationals.

use crate::error::{Error, Result};
use crate::model::{check_ratio, check_sigma2};

/// Largest degree served by the integer coefficient tables.
pub const MAX_DEGREE: usize = 24;

/// `C(n, k)` in `u128`; exact for every argument used here.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Narayana coefficients `C(r,k) C(r-1,k) / (k+1)`, `k = 0..r-1`.
pub fn narayana_coefficients(r: usize) -> Vec<u128> {
    if r == 0 {
        return vec![1];
    }
    let r64 = r as u64;
    (0..r64)
        .map(|k| binomial(r64, k) * binomial(r64 - 1, k) / (k as u128 + 1))
        .collect()
}

fn check_degree(r: usize) -> Result<()> {
    if r > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "moment degree {r} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    Ok(())
}

fn horner(coeffs: &[u128], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a as f64)
}

/// Raw moment `M_r(c)`.
pub fn mp_moment(r: usize, c: f64) -> Result<f64> {
    check_degree(r)?;
    check_ratio(c)?;
    Ok(horner(&narayana_coefficients(r), c))
}

/// `h_u = c^{-u} M_u(c)`.
pub fn scaled_h(u: usize, c: f64) -> Result<f64> {
    Ok(mp_moment(u, c)? / c.powi(u as i32))
}

/// `a_m = Σ_u C(m,u) σ^{2(m-u)} h_u`.
pub fn shifted_a(m: usize, c: f64, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let mut acc = 0.0;
    for u in 0..=m {
        acc += binomial(m as u64, u as u64) as f64
            * sigma2.powi((m - u) as i32)
            * scaled_h(u, c)?;
    }
    Ok(acc)
}

/// Support edges of the MP law and its atom at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
    pub atom_at_zero: f64,
}

pub fn mp_support(c: f64) -> Result<Support> {
    check_ratio(c)?;
    let r = c.sqrt();
    Ok(Support {
        lower: (1.0 - r).powi(2),
        upper: (1.0 + r).powi(2),
        atom_at_zero: (1.0 - 1.0 / c).max(0.0),
    })
}

/// Moment tables for one `(c, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub c: f64,
    pub sigma2: f64,
    pub max_degree: usize,
    /// Raw moments `M_0..=M_max`.
    pub raw: Vec<f64>,
    /// Scaled moments `h_0..=h_max`.
    pub h: Vec<f64>,
    /// Shifted moments `a_0..=a_max`.
    pub a: Vec<f64>,
}

impl MomentTable {
    pub fn new(c: f64, sigma2: f64, max_degree: usize) -> Result<Self> {
        check_degree(max_degree)?;
        check_ratio(c)?;
        check_sigma2(sigma2)?;
        let raw = (0..=max_degree)
            .map(|r| mp_moment(r, c))
            .collect::<Result<Vec<_>>>()?;
        let h = raw
            .iter()
            .enumerate()
            .map(|(u, m)| m / c.powi(u as i32))
            .collect::<Vec<_>>();
        let a = (0..=max_degree)
            .map(|m| {
                (0..=m)
                    .map(|u| {
                        binomial(m as u64, u as u64) as f64 * sigma2.powi((m - u) as i32) * h[u]
                    })
                    .sum()
            })
            .collect();
        Ok(MomentTable {
            c,
            sigma2,
            max_degree,
            raw,
            h,
            a,
        })
    }
}

/// Exact rational versions of the moment engine.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    use super::{binomial, narayana_coefficients};

    pub fn rational(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn big(v: u128) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn pow(x: &BigRational, e: usize) -> BigRational {
        (0..e).fold(BigRational::one(), |acc, _| acc * x)
    }

    pub fn mp_moment(r: usize, c: &BigRational) -> BigRational {
        narayana_coefficients(r)
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, &a| acc * c + big(a))
    }

    pub fn scaled_h(u: usize, c: &BigRational) -> BigRational {
        mp_moment(u, c) / pow(c, u)
    }

    pub fn shifted_a(m: usize, c: &BigRational, sigma2: &BigRational) -> BigRational {
        (0..=m).fold(BigRational::zero(), |acc, u| {
            acc + big(binomial(m as u64, u as u64)) * pow(sigma2, m - u) * scaled_h(u, c)
        })
    }

    /// `b* B⁻¹ b` for the stage-`m` Hankel system, by exact elimination.
    /// Returns `None` if the system is singular.
    pub fn hankel_sir_limit(m: usize, c: &BigRational, sigma2: &BigRational) -> Option<BigRational> {
        let a: Vec<BigRational> = (0..2 * m).map(|j| shifted_a(j, c, sigma2)).collect();
        let b: Vec<BigRational> = a[..m].to_vec();
        let mut rows: Vec<Vec<BigRational>> = (0..m)
            .map(|i| {
                let mut row: Vec<BigRational> = (0..m).map(|j| a[i + j + 1].clone()).collect();
                row.push(b[i].clone());
                row
            })
            .collect();
        for col in 0..m {
            let piv = (col..m).find(|&r| !rows[r][col].is_zero())?;
            rows.swap(col, piv);
            let p = rows[col][col].clone();
            for v in rows[col].iter_mut() {
                *v = &*v / &p;
            }
            for r in 0..m {
                if r != col && !rows[r][col].is_zero() {
                    let f = rows[r][col].clone();
                    for j in col..=m {
                        let delta = &f * &rows[col][j];
                        rows[r][j] -= delta;
                    }
                }
            }
        }
        Some(
            (0..m)
                .map(|i| &b[i] * &rows[i][m])
                .fold(BigRational::zero(), |acc, x| acc + x),
        )
    }
}
