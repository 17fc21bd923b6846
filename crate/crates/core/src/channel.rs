//! Spatial-frequency channel synthesis for a multi-subarray array with
//! per-path subarray visibility.
//!
//! Each subarray is treated as far-field (planar steering within the
//! subarray) while phase and gain differ per subarray through the
//! per-subarray distance and delay. The stacked channel is
//! `H ∈ C^{K·N_BS × P}`; row `k·N_BS + m·N_s + n` is antenna `n` of
//! subarray `m` for user `k`, column `p` is pilot subcarrier `p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PathGeometry, PathKind, Scenario, SPEED_OF_LIGHT};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{complex_normal, rng_from};

/// Radio parameters. TOML keys: `carrier_freq_hz`, `bandwidth_hz`,
/// `subcarriers`, `antennas_per_subarray`, `rician_factor`,
/// `antenna_gain_dbi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    pub antennas_per_subarray: usize,
    pub rician_factor: f64,
    pub antenna_gain_dbi: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 28.0e9,
            bandwidth_hz: 200.0e6,
            subcarriers: 2048,
            antennas_per_subarray: 8,
            rician_factor: 10.0,
            antenna_gain_dbi: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// G_s in linear power units.
    pub fn antenna_gain(&self) -> f64 {
        10f64.powf(self.antenna_gain_dbi / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.carrier_freq_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return bad("frequencies must be positive");
        }
        if self.bandwidth_hz >= self.carrier_freq_hz {
            return bad("bandwidth must be below the carrier frequency");
        }
        if self.subcarriers == 0 || self.antennas_per_subarray == 0 {
            return bad("subcarriers and antennas_per_subarray must be positive");
        }
        if !(self.rician_factor >= 0.0) {
            return bad("rician_factor must be non-negative");
        }
        Ok(())
    }
}

/// Comb-type pilot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotGrid {
    /// P̄, subcarrier spacing between adjacent pilots.
    pub interval: usize,
    /// P, number of pilot subcarriers.
    pub count: usize,
    /// ψ(p), baseband frequency of each pilot (Hz).
    pub offsets_hz: Vec<f64>,
}

/// Pilot spacing from the coherence bandwidth `1/τ_max`.
pub fn pilot_grid(bandwidth_hz: f64, subcarriers: usize, tau_max_s: f64) -> Result<PilotGrid> {
    if !(bandwidth_hz > 0.0 && tau_max_s > 0.0) || subcarriers == 0 {
        return Err(Error::InvalidConfig(
            "pilot grid needs positive bandwidth, subcarriers and delay spread".into(),
        ));
    }
    let spacing = bandwidth_hz / subcarriers as f64;
    let coherence = 1.0 / tau_max_s;
    // Guard the ceiling against ratios that are integers up to round-off.
    let ratio = coherence / spacing;
    let interval = ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1);
    if interval > subcarriers {
        return Err(Error::PilotInterval { interval, subcarriers });
    }
    let count = subcarriers.div_ceil(interval);
    let offsets_hz = (0..count)
        .map(|p| -bandwidth_hz / 2.0 + ((p * interval) as f64 + 1.0) * spacing)
        .collect();
    Ok(PilotGrid {
        interval,
        count,
        offsets_hz,
    })
}

/// Half-wavelength ULA response, entry n = exp(−j·n·π·cos θ).
pub fn steering(theta: f64, ns: usize) -> CVector {
    let step = -PI * theta.cos();
    CVector::from_fn(ns, |n, _| {
        if n == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, step * n as f64)
        }
    })
}

/// Free-space gain `G·λ²/(4πD)²`.
pub fn path_gain(gain: f64, wavelength: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(gain * (wavelength / (4.0 * PI * distance)).powi(2))
}

fn delay_phase(tau: f64, psi: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * tau * psi)
}

fn check_gain(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::ZeroDistance)
    }
}

/// LoS subvector of one subarray on one pilot.
pub fn los_subvector(beta: f64, tau: f64, theta: f64, psi: f64, ns: usize) -> Result<CVector> {
    check_gain(beta)?;
    Ok(steering(theta, ns) * (delay_phase(tau, psi) * beta.sqrt()))
}

/// Two-hop subvector via a scatterer.
pub fn nlos_subvector(beta1: f64, beta2: f64, tau: f64, theta: f64, psi: f64, ns: usize) -> Result<CVector> {
    check_gain(beta1)?;
    check_gain(beta2)?;
    Ok(steering(theta, ns) * (delay_phase(tau, psi) * (beta1 * beta2).sqrt()))
}

/// Stacks subvectors and zeroes the sub-blocks hidden by `mask`.
pub fn array_response(mask: &[bool], subvectors: &[CVector]) -> Result<CVector> {
    if mask.len() != subvectors.len() {
        return Err(Error::Shape(format!(
            "mask has {} entries, {} subvectors given",
            mask.len(),
            subvectors.len()
        )));
    }
    let ns = subvectors.first().map_or(0, |v| v.len());
    if subvectors.iter().any(|v| v.len() != ns) {
        return Err(Error::Shape("subvectors differ in length".into()));
    }
    let mut out = CVector::zeros(ns * mask.len());
    for (m, (&on, c)) in mask.iter().zip(subvectors).enumerate() {
        if on {
            out.rows_mut(m * ns, ns).copy_from(c);
        }
    }
    Ok(out)
}

/// Synthesized channel for all K users on all P pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub users: usize,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    /// `K·N_BS × P`.
    pub h: CMatrix,
    /// ζ_k.
    pub activity: Vec<bool>,
    /// π_k: OR of the path masks of user k.
    pub subarray_activity: Vec<Vec<bool>>,
    /// α_{k,l}, one per path, shared by all pilots and symbols.
    pub alphas: Vec<Vec<Complex64>>,
}

impl ChannelTensor {
    pub fn antennas(&self) -> usize {
        self.subarrays * self.antennas_per_subarray
    }

    pub fn pilots(&self) -> usize {
        self.h.ncols()
    }

    /// Rows `k·N_BS .. (k+1)·N_BS` of H.
    pub fn user_block(&self, k: usize) -> CMatrix {
        let n = self.antennas();
        self.h.rows(k * n, n).clone_owned()
    }

    /// Number of nonzero entries in column `p`.
    pub fn support_size(&self, p: usize) -> usize {
        self.h
            .column(p)
            .iter()
            .filter(|z| **z != Complex64::new(0.0, 0.0))
            .count()
    }
}

/// Rician mixture of the LoS path and the scattered paths for every user.
///
/// `α_{k,l}` are drawn for every user (active or not) so the draws do not
/// depend on which users are active.
pub fn assemble_channel(
    scenario: &Scenario,
    paths: &PathGeometry,
    cfg: &ChannelConfig,
    grid: &PilotGrid,
    seed: u64,
) -> Result<ChannelTensor> {
    cfg.validate()?;
    let k_total = scenario.users.len();
    let m_total = scenario.room.subarray_count();
    let ns = cfg.antennas_per_subarray;
    let n_bs = m_total * ns;
    if paths.users.len() != k_total {
        return Err(Error::Shape("path geometry does not match scenario".into()));
    }
    let lambda = cfg.wavelength();
    let gs = cfg.antenna_gain();
    let gamma = cfg.rician_factor;
    let los_w = (gamma / (gamma + 1.0)).sqrt();
    let nlos_w = (1.0 / (gamma + 1.0)).sqrt();

    let mut rng = rng_from(seed);
    let mut h = CMatrix::zeros(k_total * n_bs, grid.count);
    let mut alphas = Vec::with_capacity(k_total);
    let mut subarray_activity = Vec::with_capacity(k_total);

    for (k, user_paths) in paths.users.iter().enumerate() {
        let a: Vec<Complex64> = user_paths.iter().map(|_| complex_normal(&mut rng, 1.0)).collect();
        let mut pi = vec![false; m_total];
        for p in user_paths {
            if p.mask.len() != m_total {
                return Err(Error::Shape("path mask length differs from M".into()));
            }
            for (acc, &b) in pi.iter_mut().zip(&p.mask) {
                *acc |= b;
            }
        }
        if scenario.users[k].active {
            for (l, path) in user_paths.iter().enumerate() {
                let weight = if l == 0 { los_w } else { nlos_w };
                let coef = a[l] * weight;
                // Gains do not depend on p.
                let gains: Vec<f64> = (0..m_total)
                    .map(|m| match path.kind {
                        PathKind::LineOfSight => path_gain(gs, lambda, path.distance_m[m]),
                        PathKind::Scattered { .. } => {
                            let b1 = path_gain(1.0, lambda, path.first_hop_m)?;
                            let b2 = path_gain(gs, lambda, path.distance_m[m])?;
                            Ok(b1 * b2)
                        }
                    })
                    .collect::<Result<_>>()?;
                for (p, &psi) in grid.offsets_hz.iter().enumerate() {
                    let subs: Vec<CVector> = (0..m_total)
                        .map(|m| los_subvector(gains[m], path.delay_s[m], path.aoa_rad[m], psi, ns))
                        .collect::<Result<_>>()?;
                    let resp = array_response(&path.mask, &subs)?;
                    let mut col = h.view_mut((k * n_bs, p), (n_bs, 1));
                    col += resp * coef;
                }
            }
        }
        alphas.push(a);
        subarray_activity.push(pi);
    }

    Ok(ChannelTensor {
        users: k_total,
        subarrays: m_total,
        antennas_per_subarray: ns,
        h,
        activity: scenario.activity(),
        subarray_activity,
        alphas,
    })
}

/// Draws i.i.d. CN(0,1) α values outside the scenario pipeline.
pub fn draw_alpha<R: Rng>(rng: &mut R) -> Complex64 {
    complex_normal(rng, 1.0)
}
