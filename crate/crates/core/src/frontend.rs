//! Pilots, hybrid analog combiners and the compressed measurements.
//!
//! The sensing matrix `F_p` stacks `(s_p^g)ᵀ ⊗ (W^g)ᴴ` over the G symbols.
//! Row `g·M + m` only touches antennas of subarray `m`, so `F_p` is never
//! formed unless asked for; [`SensingOperator`] applies it from the pilot
//! and combiner tables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{complex_normal, rng_from, uniform_phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotMode {
    /// Same pilot on every subcarrier.
    Mmv,
    /// Independent pilot per subcarrier.
    #[default]
    Gmmv,
}

impl std::str::FromStr for PilotMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmv" => Ok(Self::Mmv),
            "gmmv" => Ok(Self::Gmmv),
            other => Err(Error::InvalidConfig(format!("unknown pilot mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PilotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mmv => "mmv",
            Self::Gmmv => "gmmv",
        })
    }
}

/// TOML keys: `ptx_dbm`, `g_symbols`, `pilot_mode`, `noise_density_dbm_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub ptx_dbm: f64,
    pub g_symbols: usize,
    pub pilot_mode: PilotMode,
    pub noise_density_dbm_hz: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            ptx_dbm: 20.0,
            g_symbols: 50,
            pilot_mode: PilotMode::Gmmv,
            noise_density_dbm_hz: -174.0,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g_symbols == 0 {
            return Err(Error::InvalidConfig("g_symbols must be at least 1".into()));
        }
        if !self.ptx_dbm.is_finite() || !self.noise_density_dbm_hz.is_finite() {
            return Err(Error::InvalidConfig("power levels must be finite".into()));
        }
        Ok(())
    }

    pub fn ptx_watts(&self) -> f64 {
        dbm_to_watts(self.ptx_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Thermal noise power over bandwidth `fs`, in watts.
pub fn noise_power(fs: f64, density_dbm_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_hz + 10.0 * fs.log10())
}

/// Pilot symbols `s[k][p][g]`, all of modulus `sqrt(P_tx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotBook {
    pub users: usize,
    pub pilots: usize,
    pub symbols: usize,
    pub mode: PilotMode,
    pub ptx_w: f64,
    /// Index `(k·P + p)·G + g`.
    pub s: Vec<Complex64>,
}

impl PilotBook {
    #[inline]
    pub fn get(&self, k: usize, p: usize, g: usize) -> Complex64 {
        self.s[(k * self.pilots + p) * self.symbols + g]
    }

    /// `S_p`, the `G × K` pilot matrix of subcarrier `p`.
    pub fn matrix(&self, p: usize) -> CMatrix {
        CMatrix::from_fn(self.symbols, self.users, |g, k| self.get(k, p, g))
    }

    /// Multiplies every pilot by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.s.iter_mut().for_each(|z| *z *= c);
        out
    }
}

pub fn design_pilots(
    users: usize,
    pilots: usize,
    symbols: usize,
    ptx_w: f64,
    mode: PilotMode,
    seed: u64,
) -> Result<PilotBook> {
    if users == 0 || pilots == 0 || symbols == 0 {
        return Err(Error::InvalidConfig("K, P and G must be at least 1".into()));
    }
    let amp = ptx_w.sqrt();
    let mut rng = rng_from(seed);
    let mut s = vec![Complex64::new(0.0, 0.0); users * pilots * symbols];
    for k in 0..users {
        match mode {
            PilotMode::Gmmv => {
                for p in 0..pilots {
                    for g in 0..symbols {
                        s[(k * pilots + p) * symbols + g] = Complex64::from_polar(amp, uniform_phase(&mut rng));
                    }
                }
            }
            PilotMode::Mmv => {
                for g in 0..symbols {
                    let v = Complex64::from_polar(amp, uniform_phase(&mut rng));
                    for p in 0..pilots {
                        s[(k * pilots + p) * symbols + g] = v;
                    }
                }
            }
        }
    }
    Ok(PilotBook {
        users,
        pilots,
        symbols,
        mode,
        ptx_w,
        s,
    })
}

/// Block-diagonal analog combiners `W^g ∈ C^{N_BS × M}`; only the diagonal
/// blocks are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerSet {
    pub symbols: usize,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    /// Index `(g·M + m)·N_s + n`.
    pub w: Vec<Complex64>,
}

impl CombinerSet {
    #[inline]
    pub fn get(&self, g: usize, m: usize, n: usize) -> Complex64 {
        self.w[(g * self.subarrays + m) * self.antennas_per_subarray + n]
    }

    pub fn antennas(&self) -> usize {
        self.subarrays * self.antennas_per_subarray
    }

    /// Dense `W^g`.
    pub fn dense(&self, g: usize) -> CMatrix {
        let ns = self.antennas_per_subarray;
        let mut out = CMatrix::zeros(self.antennas(), self.subarrays);
        for m in 0..self.subarrays {
            for n in 0..ns {
                out[(m * ns + n, m)] = self.get(g, m, n);
            }
        }
        out
    }
}

pub fn design_combiners(symbols: usize, subarrays: usize, ns: usize, seed: u64) -> Result<CombinerSet> {
    if symbols == 0 || subarrays == 0 || ns == 0 {
        return Err(Error::InvalidConfig("G, M and N_s must be at least 1".into()));
    }
    let amp = 1.0 / (ns as f64).sqrt();
    let mut rng = rng_from(seed);
    let w = (0..symbols * subarrays * ns)
        .map(|_| Complex64::from_polar(amp, uniform_phase(&mut rng)))
        .collect();
    Ok(CombinerSet {
        symbols,
        subarrays,
        antennas_per_subarray: ns,
        w,
    })
}

/// Implicit `F_p` for all p.
#[derive(Debug, Clone, Copy)]
pub struct SensingOperator<'a> {
    pub pilots: &'a PilotBook,
    pub combiners: &'a CombinerSet,
}

impl<'a> SensingOperator<'a> {
    pub fn new(pilots: &'a PilotBook, combiners: &'a CombinerSet) -> Result<Self> {
        if pilots.symbols != combiners.symbols {
            return Err(Error::Shape(format!(
                "pilots carry {} symbols, combiners {}",
                pilots.symbols, combiners.symbols
            )));
        }
        Ok(Self { pilots, combiners })
    }

    pub fn users(&self) -> usize {
        self.pilots.users
    }
    pub fn subarrays(&self) -> usize {
        self.combiners.subarrays
    }
    pub fn antennas_per_subarray(&self) -> usize {
        self.combiners.antennas_per_subarray
    }
    pub fn symbols(&self) -> usize {
        self.pilots.symbols
    }
    pub fn pilot_count(&self) -> usize {
        self.pilots.pilots
    }
    /// GM.
    pub fn rows(&self) -> usize {
        self.symbols() * self.subarrays()
    }
    /// K·N_BS.
    pub fn cols(&self) -> usize {
        self.users() * self.combiners.antennas()
    }

    /// `F_p h`.
    pub fn apply(&self, p: usize, h: &CVector) -> CVector {
        let (k_n, m_n, ns, g_n) = (
            self.users(),
            self.subarrays(),
            self.antennas_per_subarray(),
            self.symbols(),
        );
        let n_bs = m_n * ns;
        let mut out = CVector::zeros(g_n * m_n);
        let mut z = vec![Complex64::new(0.0, 0.0); n_bs];
        for g in 0..g_n {
            z.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for k in 0..k_n {
                let s = self.pilots.get(k, p, g);
                let hk = h.rows(k * n_bs, n_bs);
                for (zi, hi) in z.iter_mut().zip(hk.iter()) {
                    *zi += s * hi;
                }
            }
            for m in 0..m_n {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..ns {
                    acc += self.combiners.get(g, m, n).conj() * z[m * ns + n];
                }
                out[g * m_n + m] = acc;
            }
        }
        out
    }

    /// `F_pᴴ r`.
    pub fn adjoint(&self, p: usize, r: &CVector) -> CVector {
        let (m_n, ns, g_n) = (self.subarrays(), self.antennas_per_subarray(), self.symbols());
        let n_bs = m_n * ns;
        let t = CMatrix::from_fn(g_n, n_bs, |g, c| {
            let (m, n) = (c / ns, c % ns);
            self.combiners.get(g, m, n) * r[g * m_n + m]
        });
        let prod = self.pilots.matrix(p).adjoint() * t;
        // prod is K × N_BS; flatten row-major.
        CVector::from_fn(self.cols(), |i, _| prod[(i / n_bs, i % n_bs)])
    }

    /// Rows `g·M + m` (g = 0..G) and columns of subarray `m` for the listed
    /// users, in the order `(user, n)`.
    pub fn partition(&self, p: usize, m: usize, users: &[usize]) -> CMatrix {
        let ns = self.antennas_per_subarray();
        CMatrix::from_fn(self.symbols(), users.len() * ns, |g, c| {
            let (i, n) = (c / ns, c % ns);
            self.pilots.get(users[i], p, g) * self.combiners.get(g, m, n).conj()
        })
    }

    /// Entries `(g·M + m)` of `v` for all g.
    pub fn partition_rows(&self, m: usize, v: &CVector) -> CVector {
        let m_n = self.subarrays();
        CVector::from_fn(self.symbols(), |g, _| v[g * m_n + m])
    }

    /// Dense columns of `F_p`.
    pub fn columns(&self, p: usize, cols: &[usize]) -> CMatrix {
        let (m_n, ns) = (self.subarrays(), self.antennas_per_subarray());
        let mut out = CMatrix::zeros(self.rows(), cols.len());
        for (j, &c) in cols.iter().enumerate() {
            let (k, rest) = (c / (m_n * ns), c % (m_n * ns));
            let (m, n) = (rest / ns, rest % ns);
            for g in 0..self.symbols() {
                out[(g * m_n + m, j)] = self.pilots.get(k, p, g) * self.combiners.get(g, m, n).conj();
            }
        }
        out
    }

    pub fn dense(&self, p: usize) -> CMatrix {
        let all: Vec<usize> = (0..self.cols()).collect();
        self.columns(p, &all)
    }
}

/// Dense `F_p` built as the stacked Kronecker products.
pub fn build_sensing_matrix(pilots: &PilotBook, combiners: &CombinerSet, p: usize) -> Result<CMatrix> {
    if pilots.symbols != combiners.symbols {
        return Err(Error::Shape("pilot and combiner symbol counts differ".into()));
    }
    if p >= pilots.pilots {
        return Err(Error::Shape(format!("pilot index {p} out of range")));
    }
    let (g_n, m_n) = (pilots.symbols, combiners.subarrays);
    let n_bs = combiners.antennas();
    let mut f = CMatrix::zeros(g_n * m_n, pilots.users * n_bs);
    for g in 0..g_n {
        let s = CMatrix::from_fn(1, pilots.users, |_, k| pilots.get(k, p, g));
        let block = s.kronecker(&combiners.dense(g).adjoint());
        f.view_mut((g * m_n, 0), (m_n, pilots.users * n_bs)).copy_from(&block);
    }
    Ok(f)
}

/// Received pilots plus everything needed to rebuild `F_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `GM × P`; column p is `y_p`.
    pub y: CMatrix,
    pub noise_var: f64,
    pub pilots: PilotBook,
    pub combiners: CombinerSet,
}

impl MeasurementSet {
    pub fn operator(&self) -> SensingOperator<'_> {
        SensingOperator {
            pilots: &self.pilots,
            combiners: &self.combiners,
        }
    }

    pub fn symbols(&self) -> usize {
        self.pilots.symbols
    }

    /// Mean received power per measurement entry.
    pub fn mean_power(&self) -> f64 {
        let n = self.y.len().max(1) as f64;
        self.y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n
    }
}

/// `y_p = F_p h_p + n_p`, noise drawn directly in the combined domain.
pub fn simulate_measurements(
    h: &CMatrix,
    pilots: PilotBook,
    combiners: CombinerSet,
    noise_var: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    let op = SensingOperator::new(&pilots, &combiners)?;
    if h.nrows() != op.cols() || h.ncols() != op.pilot_count() {
        return Err(Error::Shape(format!(
            "channel is {}×{}, operator expects {}×{}",
            h.nrows(),
            h.ncols(),
            op.cols(),
            op.pilot_count()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
    }
    let mut rng = rng_from(seed);
    let mut y = CMatrix::zeros(op.rows(), op.pilot_count());
    for p in 0..op.pilot_count() {
        let col = op.apply(p, &h.column(p).clone_owned());
        y.set_column(p, &col);
    }
    if noise_var > 0.0 {
        y.iter_mut().for_each(|v| *v += complex_normal(&mut rng, noise_var));
    }
    Ok(MeasurementSet {
        y,
        noise_var,
        pilots,
        combiners,
    })
}
