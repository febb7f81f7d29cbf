//! Projections onto the feasible scattering-matrix sets of the three
//! surface architectures.
//!
//! * fully connected: `Θ = Θᵀ`, `ΘΘᴴ = I`
//! * group connected: block diagonal, every `N_g × N_g` block symmetric unitary
//! * single connected: diagonal with unit-modulus entries
//!
//! [`symuni`] is the Frobenius-nearest symmetric unitary matrix. It takes the
//! SVD `U S Vᴴ` of the symmetric part, keeps `U_R` on the range and replaces
//! the null-space columns of `U` with `conj(V_{N-R})`.

use std::fmt;

use nalgebra::SVD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_square, real, symmetry_residual, unitarity_residual, CMatrix};

/// Relative singular-value threshold used for the numerical rank, scaled by `N`.
pub const RANK_RTOL: f64 = 1e-12;

/// Default tolerance (Frobenius) for the feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    FullyConnected,
    GroupConnected(usize),
    SingleConnected,
}

impl Architecture {
    /// Group size this architecture uses on an `n`-element surface.
    pub fn group_size(self, n: usize) -> usize {
        match self {
            Architecture::FullyConnected => n,
            Architecture::GroupConnected(g) => g,
            Architecture::SingleConnected => 1,
        }
    }

    /// Canonical form: `GroupConnected(1)` is single connected and
    /// `GroupConnected(n)` is fully connected.
    pub fn normalized(self, n: usize) -> Self {
        match self {
            Architecture::GroupConnected(1) => Architecture::SingleConnected,
            Architecture::GroupConnected(g) if g == n => Architecture::FullyConnected,
            other => other,
        }
    }

    pub fn check(self, n: usize) -> Result<()> {
        let g = self.group_size(n);
        if g == 0 || !n.is_multiple_of(g) {
            return Err(Error::GroupSize { n, group_size: g });
        }
        Ok(())
    }

    /// Short label used in result tables: `FC`, `GC<size>`, `SC`.
    pub fn short_label(self) -> String {
        match self {
            Architecture::FullyConnected => "FC".into(),
            Architecture::GroupConnected(g) => format!("GC{g}"),
            Architecture::SingleConnected => "SC".into(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_label())
    }
}

/// Violation of the architecture constraints, each a Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖Θ − Θᵀ‖_F`
    pub symmetry: f64,
    /// `‖ΘΘᴴ − I‖_F`
    pub unitarity: f64,
    /// Norm of the entries outside the allowed block pattern.
    pub structure: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.symmetry.max(self.unitarity).max(self.structure)
    }
}

/// A surface scattering matrix tagged with the architecture it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    theta: CMatrix,
    arch: Architecture,
    degenerate: bool,
}

impl ScatteringMatrix {
    /// Wraps `theta` after verifying it lies in the architecture's set
    /// within `tol`.
    pub fn new_checked(theta: CMatrix, arch: Architecture, tol: f64) -> Result<Self> {
        let n = ensure_square(&theta)?;
        arch.check(n)?;
        let res = residuals(&theta, arch);
        if res.max().is_nan() || res.max() > tol {
            return Err(Error::Domain(format!(
                "matrix is not a feasible {arch} scattering matrix (residual {:.3e})",
                res.max()
            )));
        }
        Ok(Self {
            theta,
            arch,
            degenerate: false,
        })
    }

    /// The identity, which is feasible for every architecture.
    pub fn identity(n: usize, arch: Architecture) -> Self {
        Self {
            theta: CMatrix::identity(n, n),
            arch,
            degenerate: false,
        }
    }

    pub(crate) fn from_parts(theta: CMatrix, arch: Architecture) -> Self {
        Self {
            theta,
            arch,
            degenerate: false,
        }
    }

    pub(crate) fn mark_degenerate(mut self) -> Self {
        self.degenerate = true;
        self
    }

    pub fn theta(&self) -> &CMatrix {
        &self.theta
    }

    pub fn into_inner(self) -> CMatrix {
        self.theta
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    /// True when the passive design had no usable gradient and fell back to
    /// the identity.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn residuals(&self) -> Residuals {
        residuals(&self.theta, self.arch)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.residuals().max() <= tol
    }
}

/// Constraint residuals of `theta` with respect to `arch`.
pub fn residuals(theta: &CMatrix, arch: Architecture) -> Residuals {
    let n = theta.nrows();
    let g = arch.group_size(n).max(1);
    let mut structure = 0.0;
    for j in 0..theta.ncols() {
        for i in 0..n {
            if i / g != j / g {
                structure += theta[(i, j)].norm_sqr();
            }
        }
    }
    Residuals {
        symmetry: symmetry_residual(theta),
        unitarity: unitarity_residual(theta),
        structure: structure.sqrt(),
    }
}

/// `(Z + Zᵀ)/2`, the nearest complex-symmetric matrix.
pub fn sym(z: &CMatrix) -> Result<CMatrix> {
    ensure_square(z)?;
    Ok((z + z.transpose()).map(|x| x * 0.5))
}

struct Factors {
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
}

fn full_svd(z: &CMatrix) -> Factors {
    let svd = SVD::new(z.clone(), true, true);
    let u = svd.u.expect("left singular vectors were requested");
    let v = svd
        .v_t
        .expect("right singular vectors were requested")
        .adjoint();
    Factors {
        u,
        s: svd.singular_values.iter().copied().collect(),
        v,
    }
}

/// Nearest unitary matrix `U Vᴴ` (polar factor).
pub fn uni(z: &CMatrix) -> Result<CMatrix> {
    ensure_square(z)?;
    let f = full_svd(z);
    Ok(f.u * f.v.adjoint())
}

/// Number of singular values above `N · σ_max · RANK_RTOL`.
pub fn numerical_rank(singular_values: &[f64], n: usize) -> usize {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    let thr = n as f64 * smax * RANK_RTOL;
    singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > thr)
        .count()
}

/// Nearest symmetric unitary matrix to `z`.
///
/// The null-space part `conj(V_{N-R}) V_{N-R}ᴴ` depends only on the null
/// space, not on the basis an SVD routine happens to return, once the basis is
/// fixed by [`canonical_basis`]. For `sym(z) = 0` this gives the identity.
pub fn symuni(z: &CMatrix) -> Result<ScatteringMatrix> {
    Ok(ScatteringMatrix::from_parts(
        symuni_matrix(z)?,
        Architecture::FullyConnected,
    ))
}

pub(crate) fn symuni_matrix(z: &CMatrix) -> Result<CMatrix> {
    let x = sym(z)?;
    let n = x.nrows();
    if n == 1 {
        return Ok(CMatrix::from_element(1, 1, unit_phase(x[(0, 0)])));
    }
    let f = full_svd(&x);
    let smax = f.s.iter().copied().fold(0.0, f64::max);
    let thr = n as f64 * smax * RANK_RTOL;

    let mut out = CMatrix::zeros(n, n);
    let mut null_cols = Vec::new();
    for (i, &s) in f.s.iter().enumerate() {
        if smax > 0.0 && s > thr {
            out += f.u.column(i) * f.v.column(i).adjoint();
        } else {
            null_cols.push(i);
        }
    }
    if !null_cols.is_empty() {
        let vn = f.v.select_columns(&null_cols);
        let b = canonical_basis(&(&vn * vn.adjoint()), null_cols.len());
        out += b.conjugate() * b.adjoint();
    }
    Ok(out)
}

/// Orthonormal basis of the range of the orthogonal projector `proj`
/// (rank `r`), chosen by greedy pivoted Gram-Schmidt on its columns so the
/// result depends only on the subspace.
pub fn canonical_basis(proj: &CMatrix, r: usize) -> CMatrix {
    let n = proj.nrows();
    let mut resid = proj.clone();
    let mut basis = CMatrix::zeros(n, r);
    for j in 0..r {
        let mut best = 0;
        let mut best_norm = -1.0;
        for col in 0..n {
            let nrm = resid.column(col).norm();
            if nrm > best_norm * (1.0 + 1e-9) {
                best = col;
                best_norm = nrm;
            }
        }
        let mut b = resid.column(best).into_owned();
        // Re-orthogonalize against earlier vectors.
        for i in 0..j {
            let prev = basis.column(i);
            let coef = prev.dotc(&b);
            b -= prev * coef;
        }
        let nrm = b.norm();
        let b = b.map(|x| x / nrm);
        resid -= &b * (b.adjoint() * &resid);
        basis.set_column(j, &b);
    }
    basis
}

/// Diagonal `N_g × N_g` blocks of `z`, in order.
pub fn block_diagonalize(z: &CMatrix, group_size: usize) -> Result<Vec<CMatrix>> {
    let n = ensure_square(z)?;
    if group_size == 0 || n % group_size != 0 {
        return Err(Error::GroupSize { n, group_size });
    }
    Ok((0..n / group_size)
        .map(|g| {
            let start = g * group_size;
            z.view((start, start), (group_size, group_size))
                .into_owned()
        })
        .collect())
}

/// Group-connected projection: symmetric unitary projection of each block.
pub fn project_group(z: &CMatrix, group_size: usize) -> Result<ScatteringMatrix> {
    let n = z.nrows();
    let blocks = block_diagonalize(z, group_size)?;
    let mut theta = CMatrix::zeros(n, n);
    for (g, block) in blocks.iter().enumerate() {
        let start = g * group_size;
        theta
            .view_mut((start, start), (group_size, group_size))
            .copy_from(&symuni_matrix(block)?);
    }
    Ok(ScatteringMatrix::from_parts(
        theta,
        Architecture::GroupConnected(group_size),
    ))
}

/// Single-connected projection: unit-modulus phases of the diagonal.
pub fn project_single(z: &CMatrix) -> Result<ScatteringMatrix> {
    let n = ensure_square(z)?;
    let mut theta = CMatrix::zeros(n, n);
    for i in 0..n {
        theta[(i, i)] = unit_phase(z[(i, i)]);
    }
    Ok(ScatteringMatrix::from_parts(
        theta,
        Architecture::SingleConnected,
    ))
}

/// Projection onto the feasible set of `arch`.
pub fn project(z: &CMatrix, arch: Architecture) -> Result<ScatteringMatrix> {
    let n = ensure_square(z)?;
    arch.check(n)?;
    match arch {
        Architecture::FullyConnected => symuni(z),
        Architecture::GroupConnected(g) => project_group(z, g),
        Architecture::SingleConnected => project_single(z),
    }
}

/// `e^{j∠z}`, with `∠0 = 0`.
fn unit_phase(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        real(1.0)
    } else {
        Complex64::from_polar(1.0, z.arg())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| {
            c(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sym_examples() {
        let s =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(3.0, 0.0), c(3.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(sym(&s).unwrap(), s);
        let skew = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(-1.0), real(0.0)]);
        assert_eq!(sym(&skew).unwrap(), CMatrix::zeros(2, 2));
        let z = CMatrix::from_row_slice(2, 2, &[real(0.0), real(2.0), real(0.0), real(0.0)]);
        let expect = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        assert_eq!(sym(&z).unwrap(), expect);
    }

    #[test]
    fn non_square_inputs_are_rejected() {
        let z = CMatrix::zeros(2, 3);
        assert!(matches!(
            sym(&z),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        assert!(uni(&z).is_err());
        assert!(symuni(&z).is_err());
        assert!(project_single(&z).is_err());
    }

    #[test]
    fn uni_examples() {
        let q = uni(&random(5, 1)).unwrap();
        assert!(close(&uni(&q).unwrap(), &q, 1e-10));
        let five = CMatrix::identity(3, 3).map(|x| x * 5.0);
        assert!(close(&uni(&five).unwrap(), &CMatrix::identity(3, 3), 1e-12));
        let phi = 0.7;
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            real(3.0),
            Complex64::from_polar(2.0, phi),
        ]));
        let expect = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            real(1.0),
            Complex64::from_polar(1.0, phi),
        ]));
        assert!(close(&uni(&d).unwrap(), &expect, 1e-12));
    }

    #[test]
    fn symuni_examples() {
        let q = symuni(&random(6, 2)).unwrap().into_inner();
        assert!(close(&symuni(&q).unwrap().into_inner(), &q, 1e-9));

        let rho_i = CMatrix::identity(4, 4).map(|x| x * 2.5);
        assert!(close(
            &symuni(&rho_i).unwrap().into_inner(),
            &CMatrix::identity(4, 4),
            1e-12
        ));

        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = real(1.0);
        assert!(close(
            &symuni(&d).unwrap().into_inner(),
            &CMatrix::identity(2, 2),
            1e-12
        ));

        assert!(close(
            &symuni(&CMatrix::zeros(3, 3)).unwrap().into_inner(),
            &CMatrix::identity(3, 3),
            1e-12
        ));

        // A purely skew-symmetric input also has sym(Z) = 0.
        let skew = random(4, 3);
        let skew = &skew - skew.transpose();
        assert!(close(
            &symuni(&skew).unwrap().into_inner(),
            &CMatrix::identity(4, 4),
            1e-12
        ));
    }

    #[test]
    fn symuni_rank_deficient_is_feasible() {
        // rank-2 symmetric part on an 8x8 matrix
        let a = random(8, 4).columns(0, 2).into_owned();
        let z = &a * a.transpose();
        let th = symuni(&z).unwrap();
        assert!(th.is_feasible(1e-9), "{:?}", th.residuals());
    }

    #[test]
    fn symuni_of_scalar() {
        let z = CMatrix::from_element(1, 1, Complex64::from_polar(0.3, -1.1));
        let th = symuni(&z).unwrap().into_inner();
        assert_relative_eq!(th[(0, 0)].arg(), -1.1, epsilon = 1e-12);
        assert_relative_eq!(th[(0, 0)].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symuni_negative_scale_changes_result() {
        // Scale invariance only holds for positive factors.
        let i = CMatrix::identity(2, 2);
        let neg = symuni(&i.map(|x| -x)).unwrap().into_inner();
        assert!(close(&neg, &i.map(|x| -x), 1e-12));
    }

    #[test]
    fn block_diagonalize_examples() {
        let z = random(4, 5);
        assert_eq!(block_diagonalize(&z, 4).unwrap(), vec![z.clone()]);
        let scalars = block_diagonalize(&z, 1).unwrap();
        assert_eq!(scalars.len(), 4);
        for (i, b) in scalars.iter().enumerate() {
            assert_eq!(b[(0, 0)], z[(i, i)]);
        }
        let blocks = block_diagonalize(&z, 2).unwrap();
        for (g, b) in blocks.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(b[(i, j)], z[(2 * g + i, 2 * g + j)]);
                }
            }
        }
        assert!(matches!(
            block_diagonalize(&z, 3),
            Err(Error::GroupSize {
                n: 4,
                group_size: 3
            })
        ));
        assert!(block_diagonalize(&z, 0).is_err());
    }

    #[test]
    fn project_group_degenerate_sizes() {
        let z = random(6, 6);
        let full = project_group(&z, 6).unwrap();
        assert_eq!(full.theta(), symuni(&z).unwrap().theta());
        let single = project_group(&z, 1).unwrap();
        assert!(close(
            single.theta(),
            project_single(&z).unwrap().theta(),
            1e-12
        ));
    }

    #[test]
    fn project_group_blockwise() {
        let z = random(4, 7);
        let th = project_group(&z, 2).unwrap();
        assert!(th.is_feasible(1e-9));
        for (g, block) in block_diagonalize(&z, 2).unwrap().iter().enumerate() {
            let expect = symuni(block).unwrap().into_inner();
            let got = th.theta().view((2 * g, 2 * g), (2, 2)).into_owned();
            assert!(close(&got, &expect, 1e-12));
        }
        assert_eq!(th.theta()[(0, 2)], real(0.0));
        assert_eq!(th.theta()[(3, 1)], real(0.0));
    }

    #[test]
    fn project_single_examples() {
        let z = CMatrix::from_row_slice(2, 2, &[real(1.0), real(99.0), real(99.0), c(0.0, 1.0)]);
        let th = project_single(&z).unwrap();
        assert!(close(
            th.theta(),
            &CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), c(0.0, 1.0)]),
            1e-15
        ));
        let z = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::from_polar(4.0, 2.0),
                real(0.0),
                real(0.0),
                real(0.0),
            ],
        );
        let th = project_single(&z).unwrap();
        assert_relative_eq!(th.theta()[(0, 0)].arg(), 2.0, epsilon = 1e-12);
        assert_eq!(th.theta()[(1, 1)], real(1.0));
    }

    #[test]
    fn architecture_normalization() {
        assert_eq!(
            Architecture::GroupConnected(1).normalized(8),
            Architecture::SingleConnected
        );
        assert_eq!(
            Architecture::GroupConnected(8).normalized(8),
            Architecture::FullyConnected
        );
        assert_eq!(
            Architecture::GroupConnected(2).normalized(8),
            Architecture::GroupConnected(2)
        );
        assert!(Architecture::GroupConnected(3).check(8).is_err());
    }

    #[test]
    fn new_checked_rejects_infeasible() {
        let z = random(3, 8);
        assert!(ScatteringMatrix::new_checked(z, Architecture::FullyConnected, 1e-9).is_err());
        let ok = ScatteringMatrix::new_checked(
            CMatrix::identity(4, 4),
            Architecture::GroupConnected(2),
            1e-9,
        )
        .unwrap();
        assert_eq!(ok.arch(), Architecture::GroupConnected(2));
        // a full symmetric unitary is not block diagonal
        let full = symuni(&random(4, 9)).unwrap().into_inner();
        assert!(
            ScatteringMatrix::new_checked(full, Architecture::GroupConnected(2), 1e-9).is_err()
        );
    }

    #[test]
    fn canonical_basis_is_basis_independent() {
        let q = uni(&random(5, 10)).unwrap();
        let sub = q.columns(0, 2).into_owned();
        let rot = uni(&random(2, 11)).unwrap();
        let p1 = &sub * sub.adjoint();
        let sub2 = &sub * rot;
        let p2 = &sub2 * sub2.adjoint();
        let b1 = canonical_basis(&p1, 2);
        let b2 = canonical_basis(&p2, 2);
        assert!(close(&b1, &b2, 1e-10));
        assert!(close(
            &(b1.adjoint() * &b1),
            &CMatrix::identity(2, 2),
            1e-12
        ));
    }

    #[test]
    fn numerical_rank_threshold() {
        assert_eq!(numerical_rank(&[1.0, 0.5, 1e-14], 3), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0], 2), 0);
        assert_eq!(numerical_rank(&[2.0, 1e-9], 2), 2);
    }
}
