//! Passive beamforming: maximize the sum of effective channel gains
//! `f(Θ) = ‖Gᴴ + HᴴΘE‖_F²`.
//!
//! Two solutions of the problem relaxed to the ball `‖Θ‖_F² ≤ N` are
//! provided. [`relaxed_optimal`] vectorizes the objective to
//! `‖a + A vec(Θ)‖²` with `A = Eᵀ ⊗ Hᴴ`, `a = vec(Gᴴ)` and solves the
//! resulting trust-region problem through an eigendecomposition of `AᴴA` and
//! a bisection on the dual variable; it costs `O(N⁶)`. [`relaxed_lowcomplexity`]
//! takes one normalized gradient step from `Θ = 0`, which amounts to scaling
//! `M = H Gᴴ Eᴴ`. Either relaxed point is then projected onto the
//! architecture's feasible set by [`passive_design`].

use std::fmt;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, unvec, vec_of, CMatrix, CVector};
use crate::projections::{project, Architecture, ScatteringMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relaxation {
    /// Eigendecomposition-based optimum of the relaxed problem ("PoO" after projection).
    Optimal,
    /// Closed-form gradient step ("PoP" after projection).
    LowComplexity,
}

impl Relaxation {
    pub fn label(self) -> &'static str {
        match self {
            Relaxation::Optimal => "PoO",
            Relaxation::LowComplexity => "PoP",
        }
    }
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How a [`RelaxedSolution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolutionMethod {
    Optimal,
    LowComplexity,
    /// Iterative projected-gradient search (test oracle).
    ProjectedGradient,
}

/// Solution of the ball-relaxed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub theta: CMatrix,
    pub method: SolutionMethod,
    pub objective: f64,
    /// Set when the input carried no information to steer by (zero gradient,
    /// or `Aᴴa = 0` for the optimal solver).
    pub degenerate: bool,
}

fn check_theta(ch: &ChannelSet, theta: &CMatrix) -> Result<()> {
    let n = ch.n();
    if theta.shape() != (n, n) {
        return Err(Error::Dimension {
            context: "passive beamforming matrix",
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    Ok(())
}

/// `Σ_k ‖g_kᴴ + h_kᴴ Θ E‖²`.
pub fn sum_channel_gain(ch: &ChannelSet, theta: &CMatrix) -> Result<f64> {
    check_theta(ch, theta)?;
    Ok(frobenius_sq(&gain_residual(ch, theta)))
}

fn gain_residual(ch: &ChannelSet, theta: &CMatrix) -> CMatrix {
    ch.g.adjoint() + ch.h.adjoint() * theta * &ch.e
}

/// Gradient of [`sum_channel_gain`] with respect to `conj(Θ)`:
/// `H (Gᴴ + HᴴΘE) Eᴴ`. At `Θ = 0` this is `H Gᴴ Eᴴ`.
///
/// The real-coordinate gradient is twice this value:
/// `∂f/∂Re Θ + j ∂f/∂Im Θ = 2 H (Gᴴ + HᴴΘE) Eᴴ`.
pub fn sum_channel_gain_gradient(ch: &ChannelSet, theta: &CMatrix) -> Result<CMatrix> {
    check_theta(ch, theta)?;
    Ok(&ch.h * gain_residual(ch, theta) * ch.e.adjoint())
}

/// `M = H Gᴴ Eᴴ`, the gradient direction at the origin.
pub fn gradient_at_origin(ch: &ChannelSet) -> CMatrix {
    &ch.h * ch.g.adjoint() * ch.e.adjoint()
}

/// Vectorized form of the relaxed problem and its spectral data.
#[derive(Debug, Clone)]
pub struct VectorizedProblem {
    /// `A = Eᵀ ⊗ Hᴴ`, `KL × N²`.
    pub a_mat: CMatrix,
    /// `a = vec(Gᴴ)`, length `KL`.
    pub a_vec: CVector,
    /// Eigenvalues of `AᴴA`, descending, clamped at zero.
    pub eigvals: Vec<f64>,
    /// Matching orthonormal eigenvectors as columns.
    pub eigvecs: CMatrix,
    /// Dual variable solving the norm equation, `> max(eigvals)` unless the
    /// problem is degenerate (then it equals `max(eigvals)`).
    pub gamma_star: f64,
}

impl VectorizedProblem {
    /// Builds `A`, `a` and the eigendecomposition of `AᴴA`. `gamma_star` is
    /// filled in by [`VectorizedProblem::solve`].
    pub fn build(ch: &ChannelSet) -> Self {
        let a_mat = ch.e.transpose().kronecker(&ch.h.adjoint());
        let a_vec = vec_of(&ch.g.adjoint());
        let gram = a_mat.adjoint() * &a_mat;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigvals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let eigvecs = eig.eigenvectors.select_columns(&order);
        Self {
            a_mat,
            a_vec,
            eigvals,
            eigvecs,
            gamma_star: f64::NAN,
        }
    }

    /// Solves `max ‖a + Ax‖²` s.t. `‖x‖² ≤ radius_sq`, returning `x` and
    /// whether the degenerate branch was taken. Sets `gamma_star`.
    ///
    /// With `b = Qᴴ Aᴴ a`, the solution is `x = Σ_d q_d b_d / (γ − λ_d)` where
    /// `γ > λ_max` solves `Σ_d |b_d|² / (γ − λ_d)² = radius_sq`. The secular
    /// equation is solved in units of `λ_max`.
    pub fn solve(&mut self, radius_sq: f64) -> (CVector, bool) {
        let dim = self.eigvals.len();
        let lmax = self.eigvals.first().copied().unwrap_or(0.0);
        let rhs = self.a_mat.adjoint() * &self.a_vec;
        let b = self.eigvecs.adjoint() * rhs;

        if lmax <= 0.0 {
            // A = 0: the objective is constant, any point of the ball is optimal.
            self.gamma_star = 0.0;
            let mut x = CVector::zeros(dim);
            if dim > 0 {
                x[0] = crate::linalg::real(radius_sq.sqrt());
            }
            let x = &self.eigvecs * x;
            return (x, true);
        }

        let scale = lmax;
        let lam: Vec<f64> = self.eigvals.iter().map(|l| l / scale).collect();
        let w: Vec<f64> = b.iter().map(|z| z.norm_sqr() / (scale * scale)).collect();
        let norm_at = |g: f64| -> f64 {
            lam.iter()
                .zip(&w)
                .map(|(l, wd)| wd / ((g - l) * (g - l)))
                .sum()
        };

        let lo0 = 1.0 * (1.0 + 1e-12) + 1e-12;
        if norm_at(lo0) <= radius_sq {
            // Hard case (includes a = 0 and Aᴴa = 0): the norm equation has no
            // root above λ_max. Fill the ball along the top eigenvector.
            let top_tol = 1e-12;
            let mut coef = CVector::zeros(dim);
            let mut used = 0.0;
            for d in 0..dim {
                if lam[d] < 1.0 - top_tol {
                    coef[d] = b[d] / (scale * (1.0 - lam[d]));
                    used += coef[d].norm_sqr();
                }
            }
            coef[0] += crate::linalg::real((radius_sq - used).max(0.0).sqrt());
            self.gamma_star = lmax;
            let degenerate = w.iter().all(|&wd| wd == 0.0);
            return (&self.eigvecs * coef, degenerate);
        }

        let mut lo = lo0;
        let b_norm = w.iter().sum::<f64>().sqrt();
        let mut hi = 1.0 + b_norm / radius_sq.sqrt();
        while norm_at(hi) > radius_sq {
            hi = lo + 2.0 * (hi - lo);
        }
        let mut gamma = 0.5 * (lo + hi);
        for _ in 0..400 {
            gamma = 0.5 * (lo + hi);
            let v = norm_at(gamma);
            if (v - radius_sq).abs() <= 1e-10 {
                break;
            }
            if v > radius_sq {
                lo = gamma;
            } else {
                hi = gamma;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        self.gamma_star = gamma * scale;
        let coef = CVector::from_iterator(
            dim,
            b.iter().zip(&lam).map(|(bd, l)| bd / (scale * (gamma - l))),
        );
        let mut x = &self.eigvecs * coef;
        // Guard the boundary condition if bisection stopped on bracket width.
        let nrm_sq = x.norm_squared();
        if (nrm_sq - radius_sq).abs() > 1e-9 {
            x *= crate::linalg::real((radius_sq / nrm_sq).sqrt());
        }
        (x, false)
    }
}

/// Optimal solution of the relaxed problem, `‖vec(Θ)‖² = N`.
pub fn relaxed_optimal(ch: &ChannelSet) -> Result<RelaxedSolution> {
    let n = ch.n();
    let mut problem = VectorizedProblem::build(ch);
    let (x, degenerate) = problem.solve(n as f64);
    let theta = unvec(&x, n, n);
    let objective = sum_channel_gain(ch, &theta)?;
    Ok(RelaxedSolution {
        theta,
        method: SolutionMethod::Optimal,
        objective,
        degenerate,
    })
}

/// `Θ = √N · M / ‖M‖_F` with `M = H Gᴴ Eᴴ`; identity (flagged) when `M = 0`.
pub fn relaxed_lowcomplexity(ch: &ChannelSet) -> Result<RelaxedSolution> {
    let n = ch.n();
    let m = gradient_at_origin(ch);
    let norm = m.norm();
    let (theta, degenerate) = if norm > 0.0 {
        (m.map(|z| z * ((n as f64).sqrt() / norm)), false)
    } else {
        (CMatrix::identity(n, n), true)
    };
    let objective = sum_channel_gain(ch, &theta)?;
    Ok(RelaxedSolution {
        theta,
        method: SolutionMethod::LowComplexity,
        objective,
        degenerate,
    })
}

/// Relaxed solution followed by the architecture projection.
///
/// The low-complexity path projects `M = H Gᴴ Eᴴ` without normalizing it;
/// every projection is invariant to positive scaling.
pub fn passive_design(
    ch: &ChannelSet,
    arch: Architecture,
    relaxation: Relaxation,
) -> Result<ScatteringMatrix> {
    let n = ch.n();
    arch.check(n)?;
    let (relaxed, degenerate) = match relaxation {
        Relaxation::LowComplexity => {
            let m = gradient_at_origin(ch);
            if m.norm() == 0.0 {
                return Ok(ScatteringMatrix::identity(n, arch).mark_degenerate());
            }
            (m, false)
        }
        Relaxation::Optimal => {
            let sol = relaxed_optimal(ch)?;
            (sol.theta, sol.degenerate)
        }
    };
    let out = project(&relaxed, arch)?;
    Ok(if degenerate {
        out.mark_degenerate()
    } else {
        out
    })
}
