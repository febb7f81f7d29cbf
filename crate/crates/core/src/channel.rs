//! Scenario parameters, Rayleigh/path-loss channel generation and the
//! effective BS-to-user channel through the surface.
//!
//! Every realization is a pure function of `(seed, trial_index)`: the
//! generator for trial `t` is seeded with `seed ^ t`, so trials can be drawn
//! in any order or concurrently and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

/// All parameters of one simulated deployment.
///
/// Field names double as keys of the scenario configuration file, which is
/// why they are short and lower-case. Absent keys fall back to
/// [`ScenarioConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub l: usize,
    /// Single-antenna users.
    pub k: usize,
    /// Surface elements.
    pub n: usize,
    /// Elements per group for the group-connected architecture.
    pub group_size: usize,
    /// BS-to-user distance in meters.
    pub d_bu: f64,
    /// BS-to-surface distance in meters.
    pub d_br: f64,
    /// Surface-to-user distance in meters.
    pub d_ru: f64,
    pub gamma_bu: f64,
    pub gamma_br: f64,
    pub gamma_ru: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub zeta0_db: f64,
    /// Per-user noise power, dBm.
    pub noise_dbm: f64,
    /// Transmit SNR `P_t / σ²`, dB.
    pub snr_db: f64,
    /// Explicit transmit power in dBm. When set it replaces the
    /// `σ² · 10^(snr_db/10)` rule.
    pub tx_power_dbm: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Largest N for which the eigendecomposition-based relaxed optimum is run.
    pub poo_max_n: usize,
    /// Relative sum-rate change that stops the FP precoder.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            l: 4,
            k: 4,
            n: 16,
            group_size: 2,
            d_bu: 150.0,
            d_br: 50.0 * 2f64.sqrt(),
            d_ru: 50.0 * 5f64.sqrt(),
            gamma_bu: 3.5,
            gamma_br: 2.0,
            gamma_ru: 2.2,
            zeta0_db: -30.0,
            noise_dbm: -80.0,
            snr_db: 20.0,
            tx_power_dbm: None,
            trials: 100,
            seed: 0,
            poo_max_n: 32,
            fp_tol: 1e-3,
            fp_max_iter: 200,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        fn positive_count(key: &'static str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::InvalidConfig {
                    key,
                    reason: "must be a positive integer".into(),
                });
            }
            Ok(())
        }
        fn positive_real(key: &'static str, v: f64) -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig {
                    key,
                    reason: format!("must be a positive finite number, got {v}"),
                });
            }
            Ok(())
        }
        fn finite(key: &'static str, v: f64) -> Result<()> {
            if !v.is_finite() {
                return Err(Error::InvalidConfig {
                    key,
                    reason: format!("must be finite, got {v}"),
                });
            }
            Ok(())
        }

        positive_count("l", self.l)?;
        positive_count("k", self.k)?;
        positive_count("n", self.n)?;
        positive_count("group_size", self.group_size)?;
        positive_count("trials", self.trials)?;
        positive_count("fp_max_iter", self.fp_max_iter)?;
        positive_real("d_bu", self.d_bu)?;
        positive_real("d_br", self.d_br)?;
        positive_real("d_ru", self.d_ru)?;
        positive_real("fp_tol", self.fp_tol)?;
        for (key, g) in [
            ("gamma_bu", self.gamma_bu),
            ("gamma_br", self.gamma_br),
            ("gamma_ru", self.gamma_ru),
        ] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidConfig {
                    key,
                    reason: format!("must be a non-negative finite number, got {g}"),
                });
            }
        }
        finite("zeta0_db", self.zeta0_db)?;
        finite("noise_dbm", self.noise_dbm)?;
        finite("snr_db", self.snr_db)?;
        if let Some(p) = self.tx_power_dbm {
            finite("tx_power_dbm", p)?;
        }
        if !self.n.is_multiple_of(self.group_size) {
            return Err(Error::GroupSize {
                n: self.n,
                group_size: self.group_size,
            });
        }
        Ok(())
    }

    /// Copy of `self` with a different surface size.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Noise power σ² in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Transmit power budget `P_t` in watts.
    pub fn transmit_power(&self) -> f64 {
        match self.tx_power_dbm {
            Some(p) => dbm_to_watts(p),
            None => self.noise_power() * 10f64.powf(self.snr_db / 10.0),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Linear large-scale power gain `ζ0 · d^(−γ)` with `ζ0` given in dB.
pub fn path_loss(d: f64, gamma: f64, zeta0_db: f64) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {d}"
        )));
    }
    Ok(10f64.powf(zeta0_db / 10.0) * d.powf(-gamma))
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `L × K`, column `k` is the BS→user `k` channel `g_k`.
    pub g: CMatrix,
    /// `N × K`, column `k` is the surface→user `k` channel `h_k`.
    pub h: CMatrix,
    /// `N × L`, BS→surface.
    pub e: CMatrix,
    /// σ², shared by all users.
    pub noise_power: f64,
}

impl ChannelSet {
    /// Builds a channel set after checking that the three matrices agree on
    /// `L`, `K` and `N`.
    pub fn new(g: CMatrix, h: CMatrix, e: CMatrix, noise_power: f64) -> Result<Self> {
        let (l, k) = g.shape();
        let n = h.nrows();
        if h.ncols() != k {
            return Err(Error::Dimension {
                context: "channel set (H columns)",
                expected: k.to_string(),
                found: h.ncols().to_string(),
            });
        }
        if e.shape() != (n, l) {
            return Err(Error::Dimension {
                context: "channel set (E shape)",
                expected: format!("{n}x{l}"),
                found: format!("{}x{}", e.nrows(), e.ncols()),
            });
        }
        Ok(Self {
            g,
            h,
            e,
            noise_power,
        })
    }

    pub fn l(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> usize {
        self.g.ncols()
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }
}

/// Draws the channel triple for trial `trial_index`.
///
/// Entries are i.i.d. `CN(0, ζ(d))` for their link, i.e. real and imaginary
/// parts are independent `N(0, ζ(d)/2)`. Matrices are filled column-major in
/// the order G, H, E, so the direct channel does not depend on `N`.
pub fn sample_channels(config: &ScenarioConfig, trial_index: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ trial_index);
    let pl_bu = path_loss(config.d_bu, config.gamma_bu, config.zeta0_db)?;
    let pl_ru = path_loss(config.d_ru, config.gamma_ru, config.zeta0_db)?;
    let pl_br = path_loss(config.d_br, config.gamma_br, config.zeta0_db)?;

    let g = gaussian_matrix(&mut rng, config.l, config.k, pl_bu);
    let h = gaussian_matrix(&mut rng, config.n, config.k, pl_ru);
    let e = gaussian_matrix(&mut rng, config.n, config.l, pl_br);
    Ok(ChannelSet {
        g,
        h,
        e,
        noise_power: config.noise_power(),
    })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMatrix {
    let scale = (variance / 2.0).sqrt();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        data.push(c(scale * re, scale * im));
    }
    CMatrix::from_vec(rows, cols, data)
}

/// Effective channel `F` (`L × K`) with columns `f_k = g_k + (h_kᴴ Θ E)ᴴ`.
pub fn effective_channel(ch: &ChannelSet, theta: &CMatrix) -> Result<CMatrix> {
    let n = ch.n();
    if theta.shape() != (n, n) {
        return Err(Error::Dimension {
            context: "effective channel (theta)",
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    Ok(&ch.g + ch.e.adjoint() * theta.adjoint() * &ch.h)
}
