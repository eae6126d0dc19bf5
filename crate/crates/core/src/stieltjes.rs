//! Stieltjes transform of the companion MP law and circle quadrature.
//!
//! For `T = I` the companion transform `m̲(z)` solves
//! `z m̲² + (z + 1 − c) m̲ + 1 = 0`. The branch
//! `m̲ = (−(z + 1 − c) + √(z − a)·√(z − b)) / (2z)` with principal square
//! roots is analytic off `[a, b] ∪ {0}` and matches the Stieltjes branch
//! everywhere, including real `z` outside the support.
//!
//! Contour integrals use the trapezoid rule on circles, which converges
//! geometrically for integrands analytic on an annulus around the circle.
//! Every quadrature evaluates on `2n` nodes and compares with the
//! even-indexed `n`-node subsum for the error estimate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::check_ratio;
use crate::moments::mp_support;

/// Tolerance on the branch condition `Im m̲ · Im z > 0`.
pub const BRANCH_TOL: f64 = 1e-10;
/// Smallest admissible `|1 − c m̲²/(1+m̲)²|`.
pub const DERIVATIVE_TOL: f64 = 1e-12;
/// Default node count per circle (before the doubling check).
pub const DEFAULT_NODES: usize = 512;
/// Default relative tolerance of the doubling check.
pub const DEFAULT_TOL: f64 = 1e-10;

pub const INNER_SCALE: f64 = 1.25;
pub const OUTER_SCALE: f64 = 1.6;

/// `m̲(z)` for ratio `c`.
pub fn mp_stieltjes(z: Complex64, c: f64) -> Result<Complex64> {
    check_ratio(c)?;
    let s = mp_support(c)?;
    let on_band = z.re >= s.lower && z.re <= s.upper;
    if z.im.abs() <= BRANCH_TOL && (on_band || z.re.abs() <= BRANCH_TOL) {
        return Err(Error::BranchFailure { z });
    }
    let bq = z + (1.0 - c);
    let sq = (z - s.lower).sqrt() * (z - s.upper).sqrt();
    let plus = -bq + sq;
    let minus = -bq - sq;
    // Roots multiply to 1/z; take the cancellation-free expression.
    let m = if plus.norm() >= minus.norm() {
        plus / (2.0 * z)
    } else {
        2.0 / minus
    };
    if !(m.re.is_finite() && m.im.is_finite()) {
        return Err(Error::BranchFailure { z });
    }
    if z.im.abs() > BRANCH_TOL && m.im * z.im.signum() < -BRANCH_TOL {
        return Err(Error::BranchFailure { z });
    }
    Ok(m)
}

/// `m̲'(z) = m̲² / (1 − c m̲²/(1+m̲)²)`.
pub fn mp_stieltjes_derivative(z: Complex64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, c)?;
    derivative_from_value(z, m, c)
}

pub(crate) fn derivative_from_value(z: Complex64, m: Complex64, c: f64) -> Result<Complex64> {
    let q = m / (1.0 + m);
    let denominator = 1.0 - c * q * q;
    if denominator.norm() < DERIVATIVE_TOL {
        return Err(Error::SingularDerivative {
            z,
            denominator: denominator.norm(),
        });
    }
    Ok(m * m / denominator)
}

/// A positively oriented circle with `nodes` trapezoid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("contour radius must be positive, got {radius}")));
        }
        if nodes < 16 {
            return Err(Error::invalid(format!("contour needs at least 16 nodes, got {nodes}")));
        }
        Ok(ContourSpec {
            center,
            radius,
            nodes,
        })
    }

    /// Circle about the support midpoint with radius `scale` half-widths,
    /// enlarged when `c > 1` so the atom at zero is enclosed too.
    pub fn around_support(c: f64, scale: f64, nodes: usize) -> Result<Self> {
        let s = mp_support(c)?;
        let center = 0.5 * (s.lower + s.upper);
        let hw = 0.5 * (s.upper - s.lower);
        let mut radius = scale * hw;
        if c > 1.0 {
            radius = radius.max(center + (scale - 1.0) * hw);
        }
        ContourSpec::new(Complex64::new(center, 0.0), radius, nodes)
    }

    pub fn inner(c: f64) -> Result<Self> {
        Self::around_support(c, INNER_SCALE, DEFAULT_NODES)
    }

    pub fn outer(c: f64) -> Result<Self> {
        Self::around_support(c, OUTER_SCALE, DEFAULT_NODES)
    }

    /// Same circle with the radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ContourSpec::new(self.center, self.radius * factor, self.nodes)
    }

    /// Whether the closed disc encloses `[lower, upper]` and, for `c > 1`, zero.
    pub fn encloses_support(&self, c: f64) -> Result<bool> {
        let s = mp_support(c)?;
        let inside = |x: f64| (Complex64::new(x, 0.0) - self.center).norm() < self.radius;
        let mut ok = inside(s.lower) && inside(s.upper);
        if c > 1.0 {
            ok &= inside(0.0);
        }
        Ok(ok)
    }

    /// Nodes `z_j` and weights `dz_j` for the `count`-point rule.
    pub fn rule(&self, count: usize) -> Vec<(Complex64, Complex64)> {
        let h = 2.0 * PI / count as f64;
        (0..count)
            .map(|j| {
                let e = Complex64::from_polar(1.0, h * j as f64);
                (self.center + self.radius * e, Complex64::i() * self.radius * e * h)
            })
            .collect()
    }
}

/// Quadrature value with its doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: Complex64,
    pub error_estimate: f64,
    pub nodes: usize,
}

fn check_doubling(coarse: Complex64, fine: Complex64, nodes: usize, tol: f64) -> Result<Quadrature> {
    let change = (fine - coarse).norm();
    let tolerance = tol * fine.norm().max(1.0);
    if !(change <= tolerance) {
        return Err(Error::NonConvergent { change, tolerance });
    }
    Ok(Quadrature {
        value: fine,
        error_estimate: change,
        nodes,
    })
}

/// `∮ f(z) dz` over `spec`, checked against half the nodes.
pub fn contour_integrate<F>(f: F, spec: &ContourSpec, tol: f64) -> Result<Quadrature>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let n = spec.nodes * 2;
    let mut fine = Complex64::new(0.0, 0.0);
    let mut coarse = Complex64::new(0.0, 0.0);
    for (j, (z, dz)) in spec.rule(n).into_iter().enumerate() {
        let term = f(z)? * dz;
        fine += term;
        if j % 2 == 0 {
            coarse += 2.0 * term;
        }
    }
    check_doubling(coarse, fine, n, tol)
}

/// `∮∮ f(z₁, z₂) dz₁ dz₂` with `z₁` on `inner` and `z₂` on `outer`.
pub fn double_contour_integrate<F>(
    f: F,
    inner: &ContourSpec,
    outer: &ContourSpec,
    tol: f64,
) -> Result<Quadrature>
where
    F: Fn(Complex64, Complex64) -> Result<Complex64>,
{
    double_contour_integrate_mapped(Ok, |z1, _, z2, _| f(z1, z2), inner, outer, tol)
}

/// Double integral where `map` is evaluated once per node and the
/// integrand sees `(z₁, map(z₁), z₂, map(z₂))`.
pub fn double_contour_integrate_mapped<T, M, F>(
    map: M,
    f: F,
    inner: &ContourSpec,
    outer: &ContourSpec,
    tol: f64,
) -> Result<Quadrature>
where
    M: Fn(Complex64) -> Result<T>,
    F: Fn(Complex64, &T, Complex64, &T) -> Result<Complex64>,
{
    if inner.radius >= outer.radius || (inner.center - outer.center).norm() > 0.0 {
        let gap = outer.radius - inner.radius - (inner.center - outer.center).norm();
        if gap <= 0.0 {
            return Err(Error::invalid("inner and outer contours must be disjoint and nested"));
        }
    }
    let tag = |spec: &ContourSpec| -> Result<Vec<(Complex64, Complex64, T)>> {
        spec.rule(spec.nodes * 2)
            .into_iter()
            .map(|(z, dz)| Ok((z, dz, map(z)?)))
            .collect()
    };
    let ones = tag(inner)?;
    let twos = tag(outer)?;
    let mut fine = Complex64::new(0.0, 0.0);
    let mut coarse = Complex64::new(0.0, 0.0);
    for (i, (z1, dz1, t1)) in ones.iter().enumerate() {
        let mut row_fine = Complex64::new(0.0, 0.0);
        let mut row_coarse = Complex64::new(0.0, 0.0);
        for (j, (z2, dz2, t2)) in twos.iter().enumerate() {
            let term = f(*z1, t1, *z2, t2)? * dz2;
            row_fine += term;
            if j % 2 == 0 {
                row_coarse += term;
            }
        }
        fine += row_fine * dz1;
        if i % 2 == 0 {
            coarse += row_coarse * dz1 * 4.0;
        }
    }
    check_doubling(coarse, fine, inner.nodes.max(outer.nodes) * 2, tol)
}
