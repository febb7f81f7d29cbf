//! BS precoding for a fixed effective channel.
//!
//! [`fp_beamforming`] maximizes the sum rate with the fractional-programming
//! recipe (Lagrangian dual transform on the log, quadratic transform on the
//! ratio). Each iteration refreshes the SINR and quadratic auxiliaries in
//! closed form and re-solves the precoder against the power budget, so the
//! sum rate never decreases. [`rzf_beamforming`] is the regularized
//! zero-forcing baseline and also seeds the FP iterations.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, real, CMatrix};

/// Relative slack allowed on the power budget.
pub const POWER_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `L × K`, column `k` serves user `k`.
    pub w: CMatrix,
    pub power_budget: f64,
}

impl Precoder {
    pub fn power(&self) -> f64 {
        frobenius_sq(&self.w)
    }

    pub fn is_feasible(&self) -> bool {
        self.power() <= self.power_budget * (1.0 + POWER_RTOL)
    }
}

/// Solver state and diagnostics of the FP precoder.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FpState {
    /// SINR auxiliaries from the last iteration.
    pub aux_sinr: Vec<f64>,
    /// Quadratic-transform auxiliaries from the last iteration.
    pub aux_quad: Vec<Complex64>,
    /// Power-constraint multiplier of the last precoder update.
    pub dual_mu: f64,
    /// Sum rate of the initial point followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    /// `‖W‖_F²` of every iterate, aligned with `objective_trace`.
    pub power_trace: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was hit before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpOptions {
    /// Relative sum-rate change that ends the iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 200,
        }
    }
}

fn check_dims(f: &CMatrix, w: &CMatrix) -> Result<()> {
    if f.shape() != w.shape() {
        return Err(Error::Dimension {
            context: "precoder",
            expected: format!("{}x{}", f.nrows(), f.ncols()),
            found: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    Ok(())
}

/// SINR of every user: `|f_kᴴ w_k|² / (Σ_{j≠k} |f_kᴴ w_j|² + σ²)`.
pub fn sinrs(f: &CMatrix, w: &CMatrix, sigma2: f64) -> Result<Vec<f64>> {
    check_dims(f, w)?;
    let cross = f.adjoint() * w;
    Ok((0..f.ncols())
        .map(|k| {
            let signal = cross[(k, k)].norm_sqr();
            let total: f64 = cross.row(k).iter().map(|z| z.norm_sqr()).sum();
            signal / (total - signal + sigma2)
        })
        .collect())
}

pub fn sinr(f: &CMatrix, w: &CMatrix, k: usize, sigma2: f64) -> Result<f64> {
    if k >= f.ncols() {
        return Err(Error::Dimension {
            context: "user index",
            expected: format!("< {}", f.ncols()),
            found: k.to_string(),
        });
    }
    Ok(sinrs(f, w, sigma2)?[k])
}

/// `Σ_k log₂(1 + SINR_k)` in bit/s/Hz.
pub fn sum_rate(f: &CMatrix, w: &CMatrix, sigma2: f64) -> Result<f64> {
    Ok(sinrs(f, w, sigma2)?.iter().map(|s| s.ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
}

fn check_power(p_t: f64, sigma2: f64) -> Result<()> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::Domain(format!(
            "power budget must be positive, got {p_t}"
        )));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "noise power must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

/// `W = √P_t · W₀ / ‖W₀‖_F` with `W₀ = F (FᴴF + ηI)⁻¹`, `η = Kσ²/P_t`.
pub fn rzf_beamforming(f: &CMatrix, p_t: f64, sigma2: f64) -> Result<Precoder> {
    check_power(p_t, sigma2)?;
    if f.norm() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let k = f.ncols();
    let eta = k as f64 * sigma2 / p_t;
    let gram = f.adjoint() * f + CMatrix::identity(k, k).map(|z| z * eta);
    let inv = match gram.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => gram
            .try_inverse()
            .ok_or_else(|| Error::Domain("regularized Gram matrix is singular".into()))?,
    };
    let w0 = f * inv;
    let scale = (p_t / frobenius_sq(&w0)).sqrt();
    Ok(Precoder {
        w: w0.map(|z| z * scale),
        power_budget: p_t,
    })
}

/// Precoder update of one FP iteration:
/// `w_k = (B + μI)⁻¹ r_k` with `B = Σ_j |y_j|² f_j f_jᴴ`,
/// `r_k = √(1+γ_k) y_k f_k`, and the smallest `μ ≥ 0` meeting the budget.
struct PowerSolve {
    w: CMatrix,
    mu: f64,
}

fn solve_precoder(b: CMatrix, r: &CMatrix, p_t: f64) -> PowerSolve {
    let eig = SymmetricEigen::new(b);
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let u = eig.eigenvectors;
    let t = u.adjoint() * r;
    let c: Vec<f64> = (0..t.nrows())
        .map(|i| t.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let lmax = lam.iter().copied().fold(0.0, f64::max);
    let power = |mu: f64| -> f64 {
        lam.iter()
            .zip(&c)
            .map(|(l, ci)| ci / ((l + mu) * (l + mu)))
            .sum()
    };
    let build = |mu: f64| -> CMatrix {
        let mut scaled = t.clone();
        for (i, l) in lam.iter().enumerate() {
            let d = real(1.0 / (l + mu));
            scaled.row_mut(i).iter_mut().for_each(|z| *z *= d);
        }
        &u * scaled
    };

    let lmin = lam.iter().copied().fold(f64::INFINITY, f64::min);
    if lmax > 0.0 && lmin > 1e-12 * lmax && power(0.0) <= p_t {
        return PowerSolve {
            w: build(0.0),
            mu: 0.0,
        };
    }

    // power(μ) ≤ Σc / μ², so this bound is always feasible.
    let total: f64 = c.iter().sum();
    let mut hi = (total / p_t).sqrt();
    if hi.is_nan() || hi <= 0.0 {
        return PowerSolve {
            w: build(1.0),
            mu: 0.0,
        };
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let p = power(mid);
        if p > p_t {
            lo = mid;
        } else {
            hi = mid;
            if (p_t - p) <= 1e-12 * p_t {
                break;
            }
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    PowerSolve {
        w: build(hi),
        mu: hi,
    }
}

/// Fractional-programming sum-rate precoder, initialized with RZF.
///
/// Returns the best iterate; `FpState::converged` is false when `max_iter`
/// ran out first.
pub fn fp_beamforming(
    f: &CMatrix,
    p_t: f64,
    sigma2: f64,
    options: FpOptions,
) -> Result<(Precoder, FpState)> {
    let mut w = rzf_beamforming(f, p_t, sigma2)?.w;
    let k = f.ncols();
    let mut rate = sum_rate(f, &w, sigma2)?;
    let mut state = FpState {
        objective_trace: vec![rate],
        power_trace: vec![frobenius_sq(&w)],
        ..Default::default()
    };
    let mut best = (rate, w.clone());

    for iter in 1..=options.max_iter {
        let gammas = sinrs(f, &w, sigma2)?;
        let cross = f.adjoint() * &w;
        let quad: Vec<Complex64> = (0..k)
            .map(|j| {
                let denom: f64 = cross.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>() + sigma2;
                cross[(j, j)] * ((1.0 + gammas[j]).sqrt() / denom)
            })
            .collect();

        let mut b = CMatrix::zeros(f.nrows(), f.nrows());
        let mut r = CMatrix::zeros(f.nrows(), k);
        for j in 0..k {
            let fj = f.column(j);
            b += (fj * fj.adjoint()).map(|z| z * quad[j].norm_sqr());
            r.set_column(j, &(fj * (quad[j] * (1.0 + gammas[j]).sqrt())));
        }
        let solved = solve_precoder(b, &r, p_t);
        w = solved.w;

        let new_rate = sum_rate(f, &w, sigma2)?;
        state.objective_trace.push(new_rate);
        state.power_trace.push(frobenius_sq(&w));
        state.aux_sinr = gammas;
        state.aux_quad = quad;
        state.dual_mu = solved.mu;
        state.iterations = iter;
        if new_rate > best.0 {
            best = (new_rate, w.clone());
        }
        let change = (new_rate - rate).abs();
        rate = new_rate;
        if change <= options.tol * rate.abs().max(f64::MIN_POSITIVE) {
            state.converged = true;
            break;
        }
    }

    Ok((
        Precoder {
            w: best.1,
            power_budget: p_t,
        },
        state,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| {
            c(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ) * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    #[test]
    fn sinr_examples() {
        let f = random(3, 2, 1);
        assert_eq!(
            sinrs(&f, &CMatrix::zeros(3, 2), 1.0).unwrap(),
            vec![0.0, 0.0]
        );

        let f1 = random(3, 1, 2);
        let w1 = random(3, 1, 3);
        let expect = (f1.adjoint() * &w1)[(0, 0)].norm_sqr() / 0.5;
        assert_relative_eq!(
            sinr(&f1, &w1, 0, 0.5).unwrap(),
            expect,
            max_relative = 1e-14
        );

        // f1ᴴw1 = 2, f1ᴴw2 = 1, σ² = 1 → 4 / (1 + 1)
        let f = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(1.0)]);
        let w = CMatrix::from_row_slice(2, 2, &[real(2.0), real(1.0), real(0.0), real(0.0)]);
        assert_relative_eq!(sinr(&f, &w, 0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(sinr(&f, &w, 2, 1.0).is_err());
    }

    #[test]
    fn sum_rate_examples() {
        let f = random(2, 2, 4);
        assert_eq!(sum_rate(&f, &CMatrix::zeros(2, 2), 1.0).unwrap(), 0.0);
        let f = CMatrix::from_element(1, 1, real(1.0));
        let w = CMatrix::from_element(1, 1, real(3f64.sqrt()));
        assert_relative_eq!(sum_rate(&f, &w, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        // orthogonal users with unit SINR each
        let f = CMatrix::from_row_slice(2, 2, &[real(2.0), real(0.0), real(0.0), c(0.0, 1.0)]);
        let w = CMatrix::from_row_slice(2, 2, &[real(0.5), real(0.0), real(0.0), real(1.0)]);
        assert_relative_eq!(sum_rate(&f, &w, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        assert!(sum_rate(&f, &CMatrix::zeros(3, 2), 1.0).is_err());
    }

    #[test]
    fn rate_ignores_column_phase() {
        let f = random(4, 3, 5);
        let w = random(4, 3, 6);
        let base = sum_rate(&f, &w, 0.3).unwrap();
        let mut rotated = w.clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        rotated.column_mut(1).iter_mut().for_each(|z| *z *= phase);
        assert_relative_eq!(
            sum_rate(&f, &rotated, 0.3).unwrap(),
            base,
            max_relative = 1e-13
        );
    }

    #[test]
    fn rzf_power_and_directions() {
        let f = random(4, 4, 7);
        let p = rzf_beamforming(&f, 2.5, 0.1).unwrap();
        assert_relative_eq!(p.power(), 2.5, max_relative = 1e-10);

        let f1 = random(4, 1, 8);
        let p = rzf_beamforming(&f1, 3.0, 0.2).unwrap();
        let mf = f1.map(|z| z * (3.0f64.sqrt() / f1.norm()));
        assert!((p.w - mf).norm() <= 1e-12);

        let eye = CMatrix::identity(3, 3);
        let p = rzf_beamforming(&eye, 3.0, 0.7).unwrap();
        assert!((p.w - &eye).norm() <= 1e-12);

        assert!(matches!(
            rzf_beamforming(&CMatrix::zeros(3, 2), 1.0, 1.0),
            Err(Error::ZeroChannel)
        ));
        assert!(rzf_beamforming(&eye, 0.0, 1.0).is_err());
    }

    #[test]
    fn fp_single_user_is_matched_filter() {
        let f = random(4, 1, 9);
        let (p_t, s2) = (2.0, 0.05);
        let (pre, _) = fp_beamforming(&f, p_t, s2, FpOptions::default()).unwrap();
        let expect = (1.0 + p_t * f.norm_squared() / s2).log2();
        assert_relative_eq!(
            sum_rate(&f, &pre.w, s2).unwrap(),
            expect,
            max_relative = 1e-8
        );
    }

    #[test]
    fn fp_monotone_and_feasible() {
        for seed in 0..20 {
            let f = random(4, 4, 100 + seed);
            let (p_t, s2) = (10.0, 1.0);
            let (pre, state) = fp_beamforming(
                &f,
                p_t,
                s2,
                FpOptions {
                    tol: 1e-6,
                    max_iter: 300,
                },
            )
            .unwrap();
            assert!(pre.is_feasible());
            for w in state.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{:?}", state.objective_trace);
            }
            for p in &state.power_trace {
                assert!(*p <= p_t * (1.0 + POWER_RTOL));
            }
            if state.dual_mu > 0.0 {
                assert_relative_eq!(
                    state.power_trace.last().copied().unwrap(),
                    p_t,
                    max_relative = 1e-6
                );
            }
            let rzf = rzf_beamforming(&f, p_t, s2).unwrap();
            assert!(sum_rate(&f, &pre.w, s2).unwrap() >= sum_rate(&f, &rzf.w, s2).unwrap() - 1e-9);
        }
    }

    #[test]
    fn fp_reports_non_convergence() {
        let f = random(4, 4, 77);
        let (_, state) = fp_beamforming(
            &f,
            100.0,
            1.0,
            FpOptions {
                tol: 0.0,
                max_iter: 3,
            },
        )
        .unwrap();
        assert!(!state.converged);
        assert_eq!(state.iterations, 3);
        assert_eq!(state.objective_trace.len(), 4);
    }

    #[test]
    fn fp_handles_tiny_channel_scales() {
        // Path-loss sized channels: gains ~1e-10, noise 1e-11 W.
        let f = random(4, 4, 21).map(|z| z * 5e-6);
        let (p_t, s2) = (1e-9, 1e-11);
        let (pre, state) = fp_beamforming(&f, p_t, s2, FpOptions::default()).unwrap();
        assert!(pre.is_feasible());
        assert!(state
            .objective_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9));
    }
}
