//! Binary dumps of channels, measurements and estimates.
//!
//! Matrices are written column-major as little-endian `(re, im)` f64 pairs
//! next to a JSON sidecar carrying shapes, seed and a config hash.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelTensor;
use crate::error::{Error, Result};
use crate::frontend::{CombinerSet, MeasurementSet, PilotBook, PilotMode};
use crate::linalg::CMatrix;

pub const DUMP_FORMAT_VERSION: u32 = 1;
pub const LAYOUT: &str = "column-major complex128 little-endian (re, im)";

/// Hex SHA-256 of the JSON form of `cfg`.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_complex_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(m.len() * 16);
    for z in m.iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_complex_matrix(path: &Path, rows: usize, cols: usize) -> Result<CMatrix> {
    let bytes = fs::read(path)?;
    if bytes.len() != rows * cols * 16 {
        return Err(Error::Shape(format!(
            "{} holds {} bytes, expected {rows}×{cols} complex values",
            path.display(),
            bytes.len()
        )));
    }
    let vals = bytes.chunks_exact(16).map(|c| {
        let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
        Complex64::new(re, im)
    });
    Ok(CMatrix::from_iterator(rows, cols, vals))
}

fn check_version(v: u32) -> Result<()> {
    if v != DUMP_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!("unsupported dump version {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSidecar {
    pub format_version: u32,
    pub layout: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub config_sha256: String,
    pub users: usize,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    pub activity: Vec<bool>,
    pub subarray_activity: Vec<Vec<bool>>,
    pub alphas: Vec<Vec<Complex64>>,
}

/// Writes `<stem>.bin` and `<stem>.json` under `dir`.
pub fn write_channel(dir: &Path, stem: &str, ch: &ChannelTensor, seed: u64, config_sha256: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = format!("{stem}.bin");
    write_complex_matrix(&dir.join(&file), &ch.h)?;
    let side = ChannelSidecar {
        format_version: DUMP_FORMAT_VERSION,
        layout: LAYOUT.into(),
        file,
        rows: ch.h.nrows(),
        cols: ch.h.ncols(),
        seed,
        config_sha256: config_sha256.into(),
        users: ch.users,
        subarrays: ch.subarrays,
        antennas_per_subarray: ch.antennas_per_subarray,
        activity: ch.activity.clone(),
        subarray_activity: ch.subarray_activity.clone(),
        alphas: ch.alphas.clone(),
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_channel(dir: &Path, stem: &str) -> Result<(ChannelTensor, ChannelSidecar)> {
    let side: ChannelSidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    check_version(side.format_version)?;
    let h = read_complex_matrix(&dir.join(&side.file), side.rows, side.cols)?;
    let ch = ChannelTensor {
        users: side.users,
        subarrays: side.subarrays,
        antennas_per_subarray: side.antennas_per_subarray,
        h,
        activity: side.activity.clone(),
        subarray_activity: side.subarray_activity.clone(),
        alphas: side.alphas.clone(),
    };
    Ok((ch, side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSidecar {
    pub format_version: u32,
    pub layout: String,
    pub seed: u64,
    pub config_sha256: String,
    pub noise_var: f64,
    pub users: usize,
    pub pilots: usize,
    pub symbols: usize,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    pub mode: PilotMode,
    pub ptx_w: f64,
    /// `GM × P`.
    pub y_file: String,
    /// `K·P × G`, row `k·P + p`.
    pub pilots_file: String,
    /// `G·M × N_s`, row `g·M + m`.
    pub combiners_file: String,
}

/// Writes `y.bin`, `pilots.bin`, `combiners.bin` and `measurements.json`.
pub fn write_measurements(dir: &Path, meas: &MeasurementSet, seed: u64, config_sha256: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let pb = &meas.pilots;
    let cs = &meas.combiners;
    write_complex_matrix(&dir.join("y.bin"), &meas.y)?;
    let pilots = CMatrix::from_fn(pb.users * pb.pilots, pb.symbols, |r, g| {
        pb.get(r / pb.pilots, r % pb.pilots, g)
    });
    write_complex_matrix(&dir.join("pilots.bin"), &pilots)?;
    let ns = cs.antennas_per_subarray;
    let comb = CMatrix::from_fn(cs.symbols * cs.subarrays, ns, |r, n| {
        cs.get(r / cs.subarrays, r % cs.subarrays, n)
    });
    write_complex_matrix(&dir.join("combiners.bin"), &comb)?;
    let side = MeasurementSidecar {
        format_version: DUMP_FORMAT_VERSION,
        layout: LAYOUT.into(),
        seed,
        config_sha256: config_sha256.into(),
        noise_var: meas.noise_var,
        users: pb.users,
        pilots: pb.pilots,
        symbols: pb.symbols,
        subarrays: cs.subarrays,
        antennas_per_subarray: ns,
        mode: pb.mode,
        ptx_w: pb.ptx_w,
        y_file: "y.bin".into(),
        pilots_file: "pilots.bin".into(),
        combiners_file: "combiners.bin".into(),
    };
    fs::write(dir.join("measurements.json"), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_measurements(dir: &Path) -> Result<(MeasurementSet, MeasurementSidecar)> {
    let side: MeasurementSidecar = serde_json::from_str(&fs::read_to_string(dir.join("measurements.json"))?)?;
    check_version(side.format_version)?;
    let (k, p, g, m, ns) = (
        side.users,
        side.pilots,
        side.symbols,
        side.subarrays,
        side.antennas_per_subarray,
    );
    let y = read_complex_matrix(&dir.join(&side.y_file), g * m, p)?;
    let pm = read_complex_matrix(&dir.join(&side.pilots_file), k * p, g)?;
    let cm = read_complex_matrix(&dir.join(&side.combiners_file), g * m, ns)?;
    let mut s = Vec::with_capacity(k * p * g);
    for r in 0..k * p {
        for gg in 0..g {
            s.push(pm[(r, gg)]);
        }
    }
    let mut w = Vec::with_capacity(g * m * ns);
    for r in 0..g * m {
        for n in 0..ns {
            w.push(cm[(r, n)]);
        }
    }
    let meas = MeasurementSet {
        y,
        noise_var: side.noise_var,
        pilots: PilotBook {
            users: k,
            pilots: p,
            symbols: g,
            mode: side.mode,
            ptx_w: side.ptx_w,
            s,
        },
        combiners: CombinerSet {
            symbols: g,
            subarrays: m,
            antennas_per_subarray: ns,
            w,
        },
    };
    Ok((meas, side))
}
