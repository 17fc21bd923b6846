//! Multi-subarray localization from an estimated channel.
//!
//! LoS subarrays are picked by normalized energy, each contributes a MUSIC
//! angle and delay, and the angles (lines through the anchors) plus delay
//! differences (hyperbolas) are fused in a weighted LS solve.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SPEED_OF_LIGHT};
use crate::linalg::{hermitian_eigen, CMatrix, CVector};

/// Peak-to-median ratio under which a spectrum counts as flat.
pub const FLATNESS_RATIO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Rows weighted by `1/(v_c·τ̂)`.
    #[default]
    Range,
    Unit,
}

/// `[localization]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub enabled: bool,
    pub threshold_phi: f64,
    pub aoa_coarse_step_deg: f64,
    pub aoa_refine_levels: usize,
    /// Coarse delay step is `τ_max / delay_coarse_divisions`.
    pub delay_coarse_divisions: usize,
    pub delay_refine_levels: usize,
    pub refine_factor: usize,
    pub weighting: Weighting,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold_phi: 0.3,
            aoa_coarse_step_deg: 0.5,
            aoa_refine_levels: 2,
            delay_coarse_divisions: 4096,
            delay_refine_levels: 2,
            refine_factor: 10,
            weighting: Weighting::Range,
        }
    }
}

impl LocalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_phi > 0.0 && self.threshold_phi < 1.0) {
            return Err(Error::InvalidConfig("threshold_phi must lie in (0, 1)".into()));
        }
        if !(self.aoa_coarse_step_deg > 0.0) || self.delay_coarse_divisions == 0 || self.refine_factor < 2 {
            return Err(Error::InvalidConfig(
                "search grids must be positive and refine_factor ≥ 2".into(),
            ));
        }
        Ok(())
    }

    pub fn grids(&self, tau_max: f64) -> SubspaceGrids {
        SubspaceGrids {
            aoa_coarse_step: self.aoa_coarse_step_deg.to_radians(),
            aoa_refine_levels: self.aoa_refine_levels,
            delay_coarse_step: tau_max / self.delay_coarse_divisions as f64,
            delay_refine_levels: self.delay_refine_levels,
            refine_factor: self.refine_factor,
            tau_max,
        }
    }
}

/// Hierarchical search grids: θ ∈ (0, π), τ ∈ (0, τ_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceGrids {
    pub aoa_coarse_step: f64,
    pub aoa_refine_levels: usize,
    pub delay_coarse_step: f64,
    pub delay_refine_levels: usize,
    pub refine_factor: usize,
    pub tau_max: f64,
}

impl SubspaceGrids {
    pub fn final_aoa_step(&self) -> f64 {
        self.aoa_coarse_step / (self.refine_factor as f64).powi(self.aoa_refine_levels as i32)
    }

    pub fn final_delay_step(&self) -> f64 {
        self.delay_coarse_step / (self.refine_factor as f64).powi(self.delay_refine_levels as i32)
    }
}

/// Frobenius norm of each `N_s × P` sub-block of one user's `N_BS × P` block.
pub fn subarray_energy(h_k: &CMatrix, subarrays: usize) -> Result<Vec<f64>> {
    if subarrays == 0 || h_k.nrows() % subarrays != 0 {
        return Err(Error::Shape(format!(
            "{} rows do not split into {subarrays} subarrays",
            h_k.nrows()
        )));
    }
    let ns = h_k.nrows() / subarrays;
    Ok((0..subarrays).map(|m| h_k.rows(m * ns, ns).norm()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosSelection {
    pub energies: Vec<f64>,
    /// Ascending subarray indices.
    pub omega: Vec<usize>,
    pub threshold_phi: f64,
    /// A lone subarray passed and the runner-up was added.
    pub fixed_up: bool,
    /// All energies equal; the two largest were taken.
    pub degenerate: bool,
}

fn two_largest(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let mut out = idx[..2].to_vec();
    out.sort_unstable();
    out
}

/// Min-max normalized threshold with the lone-subarray fix-up.
pub fn select_los_subarrays(p: &[f64], phi: f64) -> Result<LosSelection> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::InvalidConfig("threshold must lie in (0, 1)".into()));
    }
    if p.len() < 2 {
        return Err(Error::Shape("at least two subarrays are needed".into()));
    }
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let base = LosSelection {
        energies: p.to_vec(),
        omega: Vec::new(),
        threshold_phi: phi,
        fixed_up: false,
        degenerate: false,
    };
    if !(max > min) {
        return Ok(LosSelection {
            omega: two_largest(p),
            degenerate: true,
            ..base
        });
    }
    let mut omega: Vec<usize> = (0..p.len()).filter(|&m| (p[m] - min) / (max - min) > phi).collect();
    let mut fixed_up = false;
    if omega.len() == 1 {
        let lone = omega[0];
        let second = (0..p.len())
            .filter(|&m| m != lone)
            .max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a)))
            .expect("at least two subarrays");
        omega.push(second);
        omega.sort_unstable();
        fixed_up = true;
    }
    Ok(LosSelection {
        omega,
        fixed_up,
        ..base
    })
}

/// Peak location and quality of one MUSIC search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPeak {
    pub value: f64,
    pub peak_to_median: f64,
    pub low_confidence: bool,
}

/// Unit-norm dominant eigenvector of `R / tr(R)`.
fn signal_vector(r: &CMatrix) -> Result<CVector> {
    let tr: f64 = (0..r.nrows()).map(|i| r[(i, i)].re).sum();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Subspace);
    }
    let normalized = r / Complex64::new(tr, 0.0);
    let (vals, vecs) = hermitian_eigen(&normalized);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Subspace);
    }
    Ok(vecs.column(vecs.ncols() - 1).clone_owned())
}

/// `1/(vᴴ U_z U_zᴴ v)` with `U_z U_zᴴ = I − u uᴴ`.
fn pseudo_spectrum(u: &CVector, v: &CVector) -> f64 {
    let proj = u.dotc(v).norm_sqr();
    let denom = (v.norm_squared() - proj).max(f64::MIN_POSITIVE);
    1.0 / denom
}

/// Maximizes `f` over the coarse grid, then refines `levels` times within
/// ±one parent step of the incumbent. `keep` rejects candidates outside the
/// search interval. Returns the peak, its value and the coarse spectrum.
fn hierarchical_max(
    f: impl Fn(f64) -> f64,
    coarse: &[f64],
    step: f64,
    levels: usize,
    factor: usize,
    keep: impl Fn(f64) -> bool,
) -> (f64, f64, Vec<f64>) {
    let values: Vec<f64> = coarse.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let (mut arg, mut val) = (coarse[best], values[best]);
    let mut step = step;
    for _ in 0..levels {
        let fine = step / factor as f64;
        let centre = arg;
        let f_i = factor as i64;
        for j in -f_i..=f_i {
            let x = centre + j as f64 * fine;
            if j == 0 || !keep(x) {
                continue;
            }
            let v = f(x);
            if v > val {
                arg = x;
                val = v;
            }
        }
        step = fine;
    }
    (arg, val, values)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn peak(value: f64, peak_val: f64, coarse_vals: &[f64]) -> SpectrumPeak {
    let med = median(coarse_vals);
    let ratio = if med > 0.0 { peak_val / med } else { f64::INFINITY };
    SpectrumPeak {
        value,
        peak_to_median: ratio,
        low_confidence: ratio < FLATNESS_RATIO,
    }
}

fn aoa_grid(step: f64) -> Vec<f64> {
    let n = (PI / step).round() as usize;
    (1..n).map(|i| i as f64 * step).filter(|&t| t < PI).collect()
}

fn delay_grid(step: f64, tau_max: f64) -> Vec<f64> {
    let n = (tau_max / step).round() as usize;
    (1..=n).map(|i| (i as f64 * step).min(tau_max)).collect()
}

/// `g(τ)`, entry p = exp(−j2πτψ_p).
pub fn delay_steering(tau: f64, offsets_hz: &[f64]) -> CVector {
    CVector::from_iterator(
        offsets_hz.len(),
        offsets_hz
            .iter()
            .map(|&psi| Complex64::from_polar(1.0, -2.0 * PI * tau * psi)),
    )
}

/// Angle spectrum of `H_km` (N_s × P) at θ.
pub struct AoaSpectrum {
    u: CVector,
}

impl AoaSpectrum {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() < 2 || h.ncols() == 0 {
            return Err(Error::Shape("angle search needs N_s ≥ 2 and P ≥ 1".into()));
        }
        let r = h * h.adjoint() / Complex64::new(h.ncols() as f64, 0.0);
        Ok(Self { u: signal_vector(&r)? })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        pseudo_spectrum(&self.u, &crate::channel::steering(theta, self.u.len()))
    }
}

/// Delay spectrum of `H_km` at τ.
pub struct DelaySpectrum {
    u: CVector,
    offsets: Vec<f64>,
}

impl DelaySpectrum {
    pub fn new(h: &CMatrix, offsets_hz: &[f64]) -> Result<Self> {
        if h.ncols() < 2 || h.ncols() != offsets_hz.len() || h.nrows() == 0 {
            return Err(Error::Shape("delay search needs P ≥ 2 matching pilot offsets".into()));
        }
        let r = h.adjoint() * h / Complex64::new(h.nrows() as f64, 0.0);
        Ok(Self {
            u: signal_vector(&r)?,
            offsets: offsets_hz.to_vec(),
        })
    }

    /// The signal eigenvector sits along `g*`, so `g*` is projected.
    pub fn eval(&self, tau: f64) -> f64 {
        let g = delay_steering(tau, &self.offsets).map(|z| z.conj());
        pseudo_spectrum(&self.u, &g)
    }
}

pub fn music_aoa(h: &CMatrix, grids: &SubspaceGrids) -> Result<SpectrumPeak> {
    let spec = AoaSpectrum::new(h)?;
    let coarse = aoa_grid(grids.aoa_coarse_step);
    let (arg, val, vals) = hierarchical_max(
        |t| spec.eval(t),
        &coarse,
        grids.aoa_coarse_step,
        grids.aoa_refine_levels,
        grids.refine_factor,
        |t| t > 0.0 && t < PI,
    );
    Ok(peak(arg, val, &vals))
}

pub fn music_delay(h: &CMatrix, grids: &SubspaceGrids, offsets_hz: &[f64]) -> Result<SpectrumPeak> {
    let spec = DelaySpectrum::new(h, offsets_hz)?;
    let coarse = delay_grid(grids.delay_coarse_step, grids.tau_max);
    let tau_max = grids.tau_max;
    let (arg, val, vals) = hierarchical_max(
        |t| spec.eval(t),
        &coarse,
        grids.delay_coarse_step,
        grids.delay_refine_levels,
        grids.refine_factor,
        |t| t > 0.0 && t <= tau_max,
    );
    Ok(peak(arg, val, &vals))
}

/// Per-subarray measurement feeding the coordinate solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorObservation {
    pub subarray: usize,
    pub x_m: f64,
    pub aoa_rad: f64,
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsSolution {
    pub position: Point,
    /// ‖Φ·[x y]ᵀ − ψ‖ (unweighted).
    pub residual: f64,
}

/// Stacks the delay-difference rows (relative to `anchor`) and the line
/// rows, then solves the weighted normal equations.
pub fn wls_locate(obs: &[AnchorObservation], anchor: usize, weighting: Weighting) -> Result<WlsSolution> {
    if obs.len() < 2 {
        return Err(Error::Unlocalizable("fewer than two anchors".into()));
    }
    let a0 = obs
        .iter()
        .find(|o| o.subarray == anchor)
        .ok_or_else(|| Error::Unlocalizable(format!("anchor {anchor} not among observations")))?;
    let mut rows: Vec<([f64; 2], f64, f64)> = Vec::with_capacity(2 * obs.len() - 1);
    let weight = |o: &AnchorObservation| match weighting {
        Weighting::Range => 1.0 / (SPEED_OF_LIGHT * o.delay_s),
        Weighting::Unit => 1.0,
    };
    for o in obs.iter().filter(|o| o.subarray != anchor) {
        let delta = 1.0 / o.aoa_rad.sin() - 1.0 / a0.aoa_rad.sin();
        rows.push(([0.0, delta], SPEED_OF_LIGHT * (o.delay_s - a0.delay_s), weight(o)));
    }
    for o in obs {
        rows.push(([1.0, 1.0 / o.aoa_rad.tan()], o.x_m, weight(o)));
    }
    if rows
        .iter()
        .any(|(r, b, w)| !(r[0].is_finite() && r[1].is_finite() && b.is_finite() && w.is_finite()))
    {
        return Err(Error::Unlocalizable("non-finite angle or delay".into()));
    }
    let mut normal = Matrix2::<f64>::zeros();
    let mut rhs = Vector2::<f64>::zeros();
    for (r, b, w) in &rows {
        let phi = Vector2::new(r[0], r[1]);
        normal += phi * phi.transpose() * *w;
        rhs += phi * (*w * b);
    }
    let scale = normal.norm();
    let det = normal.determinant();
    if !(scale > 0.0) || det.abs() <= 1e-14 * scale * scale {
        return Err(Error::Unlocalizable("singular normal matrix".into()));
    }
    let sol = normal
        .try_inverse()
        .ok_or_else(|| Error::Unlocalizable("singular normal matrix".into()))?
        * rhs;
    let residual = rows
        .iter()
        .map(|(r, b, _)| (r[0] * sol[0] + r[1] * sol[1] - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(WlsSolution {
        position: Point::new(sol[0], sol[1]),
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLocalization {
    pub user: usize,
    pub selection: LosSelection,
    pub observations: Vec<AnchorObservation>,
    pub anchor: Option<usize>,
    pub estimate: Option<Point>,
    pub low_confidence: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub users: Vec<UserLocalization>,
}

/// Everything about the array the localizer needs.
#[derive(Debug, Clone, Copy)]
pub struct ArrayLayout<'a> {
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    pub anchors_x: &'a [f64],
    pub pilot_offsets_hz: &'a [f64],
}

fn locate_user(
    h_k: &CMatrix,
    user: usize,
    layout: &ArrayLayout<'_>,
    cfg: &LocalizationConfig,
    grids: &SubspaceGrids,
) -> UserLocalization {
    let ns = layout.antennas_per_subarray;
    let mut out = UserLocalization {
        user,
        selection: LosSelection {
            energies: Vec::new(),
            omega: Vec::new(),
            threshold_phi: cfg.threshold_phi,
            fixed_up: false,
            degenerate: false,
        },
        observations: Vec::new(),
        anchor: None,
        estimate: None,
        low_confidence: false,
        error: None,
    };
    let run = |out: &mut UserLocalization| -> Result<()> {
        let energies = subarray_energy(h_k, layout.subarrays)?;
        out.selection = select_los_subarrays(&energies, cfg.threshold_phi)?;
        for &m in &out.selection.omega {
            let block = h_k.rows(m * ns, ns).clone_owned();
            let aoa = music_aoa(&block, grids)?;
            let delay = music_delay(&block, grids, layout.pilot_offsets_hz)?;
            out.low_confidence |= aoa.low_confidence || delay.low_confidence;
            out.observations.push(AnchorObservation {
                subarray: m,
                x_m: layout.anchors_x[m],
                aoa_rad: aoa.value,
                delay_s: delay.value,
            });
        }
        let anchor = out
            .selection
            .omega
            .iter()
            .copied()
            .max_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(b.cmp(&a)))
            .expect("omega holds at least two entries");
        out.anchor = Some(anchor);
        out.estimate = Some(wls_locate(&out.observations, anchor, cfg.weighting)?.position);
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.error = Some(e.to_string());
    }
    out
}

/// Localizes every detected user from the stacked estimate `K·N_BS × P`.
/// Failures are recorded per user.
pub fn mscloc(
    h_hat: &CMatrix,
    zeta_hat: &[bool],
    layout: &ArrayLayout<'_>,
    cfg: &LocalizationConfig,
    grids: &SubspaceGrids,
) -> Result<LocalizationResult> {
    cfg.validate()?;
    let n_bs = layout.subarrays * layout.antennas_per_subarray;
    if h_hat.nrows() != zeta_hat.len() * n_bs
        || h_hat.ncols() != layout.pilot_offsets_hz.len()
        || layout.anchors_x.len() != layout.subarrays
    {
        return Err(Error::Shape("channel estimate does not match the array layout".into()));
    }
    let users = zeta_hat
        .iter()
        .enumerate()
        .filter(|(_, &z)| z)
        .map(|(k, _)| locate_user(&h_hat.rows(k * n_bs, n_bs).clone_owned(), k, layout, cfg, grids))
        .collect();
    Ok(LocalizationResult { users })
}

impl LocalizationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per user; `truth` supplies true positions for the error column.
    pub fn write_csv<W: std::io::Write>(&self, w: W, truth: &[Point]) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "user", "omega", "aoa_deg", "delay_ns", "x_hat", "y_hat", "x_true", "y_true", "rmse_m",
        ])?;
        let join = |v: Vec<String>| v.join(";");
        for u in &self.users {
            let truth_pt = truth.get(u.user);
            let (xh, yh) = u
                .estimate
                .map_or((String::new(), String::new()), |p| (p.x.to_string(), p.y.to_string()));
            let rmse = match (u.estimate, truth_pt) {
                (Some(e), Some(t)) => crate::harness::metric_rmse_xy(t, &e).to_string(),
                _ => String::new(),
            };
            wr.write_record([
                u.user.to_string(),
                join(u.selection.omega.iter().map(|m| m.to_string()).collect()),
                join(
                    u.observations
                        .iter()
                        .map(|o| o.aoa_rad.to_degrees().to_string())
                        .collect(),
                ),
                join(u.observations.iter().map(|o| (o.delay_s * 1e9).to_string()).collect()),
                xh,
                yh,
                truth_pt.map_or(String::new(), |p| p.x.to_string()),
                truth_pt.map_or(String::new(), |p| p.y.to_string()),
                rmse,
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
