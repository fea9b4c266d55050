//! Closed-form information quantities for jointly Gaussian predictions, and
//! the GP regression example where parameter information grows without bound
//! while information about a nearby prediction vanishes.
//!
//! The example uses a unit-noise Gaussian likelihood, kernel
//! `k(x, x') = exp(-(x - x')^2)` and observations at `M, 2M, ..., M^2`. The
//! label covariance is `Omega_M` with 2 on the diagonal and
//! `exp(-M^2 (i - j)^2)` off it, so BALD of the whole design is
//! `0.5 log det Omega_M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest design size accepted by the sweep; `exp(-M^2)` has long
/// underflowed by then.
pub const MAX_PATHOLOGY_M: usize = 200;

/// Relative conditioning below which [`epig_gaussian`] reports `+inf`.
pub const SINGULAR_THRESHOLD: f64 = 1e-15;

/// Mean and covariance of jointly Gaussian predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJoint {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Observation noise variance per output.
    pub noise_var: f64,
}

impl GaussianJoint {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!("{n}-vector mean with {:?} covariance", cov.shape())));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 {
            return Err(Error::InvalidArgument(format!("covariance has eigenvalue {min_eig}")));
        }
        Ok(Self { mean, cov, noise_var })
    }

    /// Mutual information between two disjoint groups of coordinates,
    /// `0.5 (log det S_aa + log det S_bb - log det S)`.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let joint: Vec<usize> = a.iter().chain(b).copied().collect();
        let sub = |ix: &[usize]| DMatrix::from_fn(ix.len(), ix.len(), |r, c| self.cov[(ix[r], ix[c])]);
        Ok(0.5 * (log_det_spd(&sub(a))? + log_det_spd(&sub(b))? - log_det_spd(&sub(&joint))?))
    }
}

/// `log det` of a symmetric positive-definite matrix via Cholesky, after
/// symmetrizing.
pub fn log_det_spd(matrix: &DMatrix<f64>) -> Result<f64> {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::Factorization("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// BALD for Gaussian predictives:
/// `0.5 (log V[y] - E_theta log V[y | theta])`, the expectation given as
/// weighted conditional variances.
pub fn bald_gaussian(marginal_var: f64, conditional: &[(f64, f64)]) -> Result<f64> {
    if !(marginal_var > 0.0) {
        return Err(Error::NonPositiveVariance(marginal_var));
    }
    if conditional.is_empty() {
        return Err(Error::Empty("conditional variances"));
    }
    let total_w: f64 = conditional.iter().map(|(_, w)| w).sum();
    let mut mean_log = 0.0;
    for &(var, w) in conditional {
        if !(var > 0.0) {
            return Err(Error::NonPositiveVariance(var));
        }
        mean_log += w * var.ln();
    }
    Ok(0.5 * (marginal_var.ln() - mean_log / total_w))
}

/// Mutual information of a bivariate Gaussian,
/// `0.5 log(v_y v_* / (v_y v_* - c^2))`; `+inf` once the covariance is
/// numerically singular.
pub fn epig_gaussian(var_y: f64, var_ystar: f64, cov: f64) -> Result<f64> {
    if !(var_y > 0.0) {
        return Err(Error::NonPositiveVariance(var_y));
    }
    if !(var_ystar > 0.0) {
        return Err(Error::NonPositiveVariance(var_ystar));
    }
    let prod = var_y * var_ystar;
    let rho2 = cov * cov / prod;
    let rel = 1.0 - rho2;
    if rel < -1e-12 {
        return Err(Error::SingularCovariance(prod - cov * cov));
    }
    if rel < SINGULAR_THRESHOLD {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * (-rho2).ln_1p())
}

/// Observation design `M, 2M, ..., M^2` with a target location `x*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathologyDesign {
    pub m: usize,
    pub x_star: f64,
}

impl PathologyDesign {
    pub fn new(m: usize, x_star: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("design needs M >= 1".into()));
        }
        if !(0.0..=1.0).contains(&x_star) {
            return Err(Error::InvalidArgument(format!("x* = {x_star} outside [0, 1]")));
        }
        Ok(Self { m, x_star })
    }

    pub fn locations(&self) -> Vec<f64> {
        (1..=self.m).map(|i| (i * self.m) as f64).collect()
    }

    /// Label covariance `Omega_M`.
    pub fn omega(&self) -> DMatrix<f64> {
        let m2 = (self.m * self.m) as f64;
        DMatrix::from_fn(self.m, self.m, |i, j| {
            if i == j {
                2.0
            } else {
                let d = i.abs_diff(j) as f64;
                (-m2 * d * d).exp()
            }
        })
    }

    /// Prior covariances between `theta(x*)` and each observation.
    pub fn cross_cov(&self) -> DVector<f64> {
        DVector::from_iterator(self.m, self.locations().into_iter().map(|x| (-(self.x_star - x).powi(2)).exp()))
    }

    /// Joint covariance of `(y_1..y_M, theta(x*))`, target last.
    pub fn joint_cov(&self) -> DMatrix<f64> {
        let m = self.m;
        let mut out = DMatrix::zeros(m + 1, m + 1);
        out.view_mut((0, 0), (m, m)).copy_from(&self.omega());
        let k = self.cross_cov();
        for i in 0..m {
            out[(i, m)] = k[i];
            out[(m, i)] = k[i];
        }
        out[(m, m)] = 1.0;
        out
    }

    /// Same marginals as [`Self::joint_cov`] with the cross-covariances zeroed.
    pub fn independent_cov(&self) -> DMatrix<f64> {
        let m = self.m;
        let mut out = self.joint_cov();
        for i in 0..m {
            out[(i, m)] = 0.0;
            out[(m, i)] = 0.0;
        }
        out
    }
}

/// `0.5 log det Omega_M`.
pub fn pathology_bald(design: &PathologyDesign) -> Result<f64> {
    Ok(0.5 * log_det_spd(&design.omega())?)
}

/// Information gained about `theta(x*)` from the whole design: half the log
/// ratio of the independent and joint covariance determinants.
///
/// Ordering the target last, both Cholesky factors share the `Omega_M`
/// block and differ only in the final pivot `1 - s`, with
/// `s = k^T Omega_M^{-1} k`. The difference is therefore
/// `-0.5 log1p(-s)`, which stays accurate when `s` is far below machine
/// epsilon.
pub fn pathology_eig_target(design: &PathologyDesign) -> Result<f64> {
    let chol = design
        .omega()
        .cholesky()
        .ok_or_else(|| Error::Factorization("Omega_M is not positive definite".into()))?;
    let k = design.cross_cov();
    let w = chol
        .l_dirty()
        .solve_lower_triangular(&k)
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let s = w.norm_squared();
    if s >= 1.0 {
        return Err(Error::Factorization(format!("joint covariance not positive definite (Schur term {s})")));
    }
    Ok(-0.5 * (-s).ln_1p())
}

/// Gershgorin interval `[min_i (a_ii - r_i), max_i (a_ii + r_i)]`, where `r_i`
/// is the absolute off-diagonal sum of row `i`. Contains every real eigenvalue.
pub fn gershgorin_bound(matrix: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("Gershgorin bound of a {:?} matrix", matrix.shape())));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, row) in matrix.row_iter().enumerate() {
        let radius: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
        let d = matrix[(i, i)];
        lo = lo.min(d - radius);
        hi = hi.max(d + radius);
    }
    Ok((lo, hi))
}

/// One row of the pathology sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathologyRow {
    pub m: usize,
    pub bald: f64,
    pub eig_target: f64,
    pub gershgorin_lo: f64,
    pub gershgorin_hi: f64,
}

/// Evaluates designs `M = 1..=m_max` at a fixed target location.
pub fn pathology_sweep(m_max: usize, x_star: f64) -> Result<Vec<PathologyRow>> {
    if m_max == 0 || m_max > MAX_PATHOLOGY_M {
        return Err(Error::InvalidArgument(format!("M_max must be in 1..={MAX_PATHOLOGY_M}, got {m_max}")));
    }
    (1..=m_max)
        .map(|m| {
            let design = PathologyDesign::new(m, x_star)?;
            let (gershgorin_lo, gershgorin_hi) = gershgorin_bound(&design.omega())?;
            Ok(PathologyRow {
                m,
                bald: pathology_bald(&design)?,
                eig_target: pathology_eig_target(&design)?,
                gershgorin_lo,
                gershgorin_hi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn bald_gaussian_examples() {
        assert_eq!(bald_gaussian(3.0, &[(3.0, 1.0), (3.0, 2.0)]).unwrap(), 0.0);
        assert_close!(bald_gaussian(2.0, &[(1.0, 1.0)]).unwrap(), 0.346574, 1e-6);
        assert_close!(bald_gaussian(4.0, &[(1.0, 0.5), (2.0, 0.5)]).unwrap(), 0.519860, 1e-6);
        assert!(matches!(bald_gaussian(0.0, &[(1.0, 1.0)]), Err(Error::NonPositiveVariance(_))));
        assert!(bald_gaussian(1.0, &[(-1.0, 1.0)]).is_err());
    }

    #[test]
    fn epig_gaussian_examples() {
        assert_eq!(epig_gaussian(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_close!(epig_gaussian(1.0, 1.0, 0.5).unwrap(), 0.143841, 1e-6);
        assert_eq!(epig_gaussian(2.0, 8.0, 4.0).unwrap(), f64::INFINITY);
        assert!(epig_gaussian(2.0, 8.0, 4.0 * (1.0 - 1e-17)).unwrap().is_infinite());
        assert!(epig_gaussian(1.0, 1.0, 0.999).unwrap().is_finite());
        assert!(matches!(epig_gaussian(1.0, 1.0, 1.5), Err(Error::SingularCovariance(_))));
    }

    #[test]
    fn pathology_bald_examples() {
        let bald = |m| pathology_bald(&PathologyDesign::new(m, 0.5).unwrap()).unwrap();
        assert_close!(bald(1), 0.5 * LN_2, 1e-15);
        assert_close!(bald(5), 2.5 * LN_2, 1e-9);
        assert!(bald(30) >= 14.0 * LN_2);
    }

    #[test]
    fn pathology_eig_examples() {
        let eig = |m, x| pathology_eig_target(&PathologyDesign::new(m, x).unwrap()).unwrap();
        let expect = 0.5 * (2.0 / (2.0 - (-2.0f64).exp())).ln();
        assert_close!(eig(1, 0.0), expect, 1e-15);
        assert_close!(eig(1, 0.0), epig_gaussian(2.0, 1.0, (-1.0f64).exp()).unwrap(), 1e-15);
        assert!(eig(10, 0.5) < 1e-30);
        assert!(eig(6, 0.5) < eig(3, 0.5));
    }

    #[test]
    fn eig_matches_dense_determinants_when_large() {
        for (m, x) in [(1, 0.3), (2, 0.0), (2, 1.0), (3, 0.9)] {
            let d = PathologyDesign::new(m, x).unwrap();
            let dense = 0.5 * (d.independent_cov().determinant().ln() - d.joint_cov().determinant().ln());
            assert_close!(pathology_eig_target(&d).unwrap(), dense, 1e-12);
        }
    }

    #[test]
    fn gershgorin_examples() {
        assert_eq!(gershgorin_bound(&DMatrix::identity(4, 4)).unwrap(), (1.0, 1.0));
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0]);
        let (lo, hi) = gershgorin_bound(&a).unwrap();
        assert_eq!((lo, hi), (1.5, 2.5));
        let eig = a.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e >= lo - 1e-12 && *e <= hi + 1e-12));

        let d = PathologyDesign::new(3, 0.5).unwrap();
        let omega = d.omega();
        let eps = (0..3)
            .map(|i| (0..3).filter(|&j| j != i).map(|j| omega[(i, j)]).sum::<f64>())
            .fold(0.0, f64::max);
        assert_eq!(gershgorin_bound(&omega).unwrap(), (2.0 - eps, 2.0 + eps));
        assert!(gershgorin_bound(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sweep_shape() {
        let rows = pathology_sweep(1, 0.5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_close!(rows[0].bald, 0.5 * LN_2, 1e-15);
        assert!(pathology_sweep(0, 0.5).is_err());
        assert!(pathology_sweep(MAX_PATHOLOGY_M + 1, 0.5).is_err());
        assert!(PathologyDesign::new(3, 1.5).is_err());
    }

    #[test]
    fn joint_mutual_information() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, 1.5]);
        let g = GaussianJoint::new(DVector::zeros(2), cov, 1.0).unwrap();
        assert_close!(g.mutual_information(&[0], &[1]).unwrap(), epig_gaussian(2.0, 1.5, 0.7).unwrap(), 1e-12);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianJoint::new(DVector::zeros(2), asym, 1.0).is_err());
    }
}
