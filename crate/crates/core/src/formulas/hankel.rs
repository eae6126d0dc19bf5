use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::hpd_solve;
use crate::model::{check_ratio, check_sigma2};
use crate::moments::{MomentTable, MAX_DEGREE};

/// Bisection stopping width for [`mmse_limit`].
pub const MMSE_TOL: f64 = 1e-14;

/// Stage-`m` Hankel system `B d = b` of the MSW limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HankelSystem {
    pub m: usize,
    /// `(1, a₁, …, a_{m−1})`.
    pub b: Vec<f64>,
    /// `B_{ij} = a_{i+j−1}` (1-based).
    pub matrix: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    /// `b* B⁻¹ b`.
    pub sir_limit: f64,
}

pub fn hankel_system(m: usize, c: f64, sigma2: f64) -> Result<HankelSystem> {
    if m == 0 {
        return Err(Error::invalid("stage count m must be at least 1"));
    }
    if 2 * m - 1 > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "stage count {m} needs moments beyond degree {MAX_DEGREE}"
        )));
    }
    let table = MomentTable::new(c, sigma2, 2 * m - 1)?;
    let a = &table.a;
    let b = DVector::from_iterator(m, a[..m].iter().copied());
    let mat = DMatrix::from_fn(m, m, |i, j| a[i + j + 1]);
    let d = hpd_solve(&mat, &b).map_err(|e| Error::IllConditioned {
        row: e.row,
        pivot: e.pivot,
    })?;
    Ok(HankelSystem {
        m,
        b: b.iter().copied().collect(),
        matrix: (0..m).map(|i| mat.row(i).iter().copied().collect()).collect(),
        sir_limit: b.dot(&d),
        d: d.iter().copied().collect(),
    })
}

/// Large-system MMSE SIR: the positive root of `β = 1/(σ² + (1/c)/(1+β))`.
pub fn mmse_limit(c: f64, sigma2: f64) -> Result<f64> {
    check_ratio(c)?;
    check_sigma2(sigma2)?;
    if sigma2 == 0.0 && c >= 1.0 {
        return Err(Error::invalid(
            "noise-free MMSE limit is infinite unless c < 1",
        ));
    }
    let g = |beta: f64| beta * (sigma2 + 1.0 / (c * (1.0 + beta))) - 1.0;
    let mut lo = 0.0;
    let mut hi = if sigma2 > 0.0 {
        1.0 / sigma2
    } else {
        c / (1.0 - c) + 1.0
    };
    if !(g(hi) >= 0.0) {
        return Err(Error::NoConvergence(format!(
            "bisection bracket [0, {hi}] does not contain the root"
        )));
    }
    for _ in 0..400 {
        if hi - lo <= MMSE_TOL * hi.max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!(
        "bisection stalled at width {:e}",
        hi - lo
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_stage() {
        let h = hankel_system(1, 1.0, 1.0).unwrap();
        assert!((h.sir_limit - 0.5).abs() < 1e-15);
        for (c, s2) in [(0.5, 0.3), (2.0, 1.5)] {
            let h = hankel_system(1, c, s2).unwrap();
            assert!((h.sir_limit - 1.0 / (s2 + 1.0 / c)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_stage_example() {
        let h = hankel_system(2, 1.0, 1.0).unwrap();
        assert_eq!(h.b, vec![1.0, 2.0]);
        assert_eq!(h.matrix, vec![vec![2.0, 5.0], vec![5.0, 15.0]]);
        assert!((h.d[0] - 1.0).abs() < 1e-14 && (h.d[1] + 0.2).abs() < 1e-14);
        assert!((h.sir_limit - 0.6).abs() < 1e-14);
    }

    #[test]
    fn three_stage_example() {
        let h = hankel_system(3, 1.0, 1.0).unwrap();
        assert!((h.sir_limit - 8.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_below_mmse() {
        let beta = mmse_limit(1.0, 1.0).unwrap();
        assert!((beta - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        let mut prev = 0.0;
        for m in 1..=6 {
            let v = hankel_system(m, 1.0, 1.0).unwrap().sir_limit;
            assert!(v > prev && v <= beta + 1e-12, "m={m}");
            prev = v;
        }
        assert!(beta - prev < 1e-3);
    }

    #[test]
    fn hankel_positive_definite_grid() {
        for c in [0.5, 1.0, 2.0] {
            for s2 in [0.5, 1.0] {
                for m in 1..=5 {
                    let h = hankel_system(m, c, s2).unwrap();
                    let mat = DMatrix::from_fn(m, m, |i, j| h.matrix[i][j]);
                    let eig = nalgebra::SymmetricEigen::new(mat).eigenvalues;
                    assert!(eig.min() > 0.0, "c={c} s2={s2} m={m}");
                }
            }
        }
    }

    #[test]
    fn ill_conditioned_is_reported() {
        let r = hankel_system(12, 1.0, 1.0);
        assert!(matches!(r, Err(Error::IllConditioned { .. })), "{r:?}");
    }

    #[test]
    fn mmse_limit_cases() {
        let beta = mmse_limit(1e6, 1.0).unwrap();
        assert!((beta - 1.0).abs() < 1e-5);
        let beta = mmse_limit(2.0, 0.5).unwrap();
        let res = beta - 1.0 / (0.5 + 0.5 / (1.0 + beta));
        assert!(res.abs() < 1e-12);
        let beta = mmse_limit(0.5, 0.0).unwrap();
        assert!((beta - 1.0).abs() < 1e-12);
        assert!(mmse_limit(1.0, 0.0).is_err());
        assert!(mmse_limit(-1.0, 1.0).is_err());
    }
}
