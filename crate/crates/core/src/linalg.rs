//! Hermitian positive-definite solves with an explicit pivot check, and
//! the Gram matrix `S*S` through real matrix products.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

/// Smallest admissible pivot relative to the largest diagonal entry.
pub const PIVOT_TOL: f64 = 1e-12;

/// A Cholesky pivot fell below [`PIVOT_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotBreakdown {
    pub row: usize,
    /// Pivot divided by the largest diagonal entry.
    pub pivot: f64,
}

/// Lower Cholesky factor `L` with `A = L L*`.
pub fn cholesky<T>(a: &DMatrix<T>) -> Result<DMatrix<T>, PivotBreakdown>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let scale = (0..n)
        .map(|i| a[(i, i)].real().abs())
        .fold(0.0_f64, f64::max);
    let mut l = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].real();
        for k in 0..j {
            d -= l[(j, k)].modulus_squared();
        }
        let rel = if scale > 0.0 { d / scale } else { d };
        if !(rel >= PIVOT_TOL) {
            return Err(PivotBreakdown { row: j, pivot: rel });
        }
        let root = d.sqrt();
        l[(j, j)] = T::from_real(root);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conjugate();
            }
            l[(i, j)] = s.unscale(root);
        }
    }
    Ok(l)
}

/// Solve `L L* x = b` given the lower factor.
pub fn cholesky_solve_factored<T>(l: &DMatrix<T>, b: &DVector<T>) -> DVector<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)].conjugate() * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solve `A x = b` for Hermitian positive-definite `A`.
pub fn hpd_solve<T>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>, PivotBreakdown>
where
    T: ComplexField<RealField = f64> + Copy,
{
    Ok(cholesky_solve_factored(&cholesky(a)?, b))
}

/// `S*S` split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub re: DMatrix<f64>,
    /// Antisymmetric; `None` when `S` is real.
    pub im: Option<DMatrix<f64>>,
}

impl Gram {
    /// For `S = X + iY`, `S*S = XᵀX + YᵀY + i(XᵀY − (XᵀY)ᵀ)`.
    pub fn of(s: &DMatrix<Complex64>) -> Self {
        // Explicit transposes route the products through the blocked gemm.
        let x = s.map(|v| v.re);
        let xt = x.transpose();
        let is_real = s.iter().all(|v| v.im == 0.0);
        if is_real {
            return Gram {
                re: &xt * &x,
                im: None,
            };
        }
        let y = s.map(|v| v.im);
        let mut re = &xt * &x;
        re += y.transpose() * &y;
        let xy = &xt * &y;
        let im = &xy - xy.transpose();
        Gram { re, im: Some(im) }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    /// `|(S*S)_{jk}|²`.
    pub fn abs2(&self, j: usize, k: usize) -> f64 {
        let r = self.re[(j, k)];
        match &self.im {
            Some(im) => r * r + im[(j, k)] * im[(j, k)],
            None => r * r,
        }
    }

    /// `Σ_{jk} |(S*S)_{jk}|² = Tr (SS*)²`.
    pub fn frobenius_sq(&self) -> f64 {
        let mut acc = self.re.norm_squared();
        if let Some(im) = &self.im {
            acc += im.norm_squared();
        }
        acc
    }
}
