//! Angle and delay search on a synthetic noisy LoS block, printing the
//! coarse spectra as text and the refined estimates.
//!
//! cargo run --example music_estimation -- [theta_deg] [tau_ns] [snr_db]

use num_complex::Complex64;

use xlmimo_access::channel::{pilot_grid, steering};
use xlmimo_access::linalg::CMatrix;
use xlmimo_access::localization::{delay_steering, music_aoa, music_delay, AoaSpectrum, LocalizationConfig};
use xlmimo_access::rng::{complex_normal, rng_from};

fn main() -> xlmimo_access::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let theta = args.first().copied().unwrap_or(63.0).to_radians();
    let tau = args.get(1).copied().unwrap_or(120.0) * 1e-9;
    let snr_db = args.get(2).copied().unwrap_or(20.0);

    let tau_max = 2.0 * 50.0 / xlmimo_access::geometry::SPEED_OF_LIGHT;
    let grid = pilot_grid(200e6, 2048, tau_max)?;
    let ns = 8;
    let clean = steering(theta, ns) * delay_steering(tau, &grid.offsets_hz).transpose();
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let mut rng = rng_from(3);
    let h = CMatrix::from_fn(ns, grid.count, |n, p| {
        clean[(n, p)] + complex_normal(&mut rng, noise_var)
    }) * Complex64::new(1e-5, 0.0);

    let grids = LocalizationConfig::default().grids(tau_max);
    let spec = AoaSpectrum::new(&h)?;
    println!("angle spectrum (dB, 5° bins):");
    let vals: Vec<(f64, f64)> = (1..36)
        .map(|i| (i as f64 * 5.0, 10.0 * spec.eval((i as f64 * 5.0).to_radians()).log10()))
        .collect();
    let top = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    for (deg, db) in vals {
        let len = ((db - top + 40.0).max(0.0)) as usize;
        println!("  {deg:>5.0}° {:>7.1} {}", db, "*".repeat(len));
    }
    let a = music_aoa(&h, &grids)?;
    let d = music_delay(&h, &grids, &grid.offsets_hz)?;
    println!(
        "θ̂ = {:.4}° (true {:.4}°), peak/median {:.1}",
        a.value.to_degrees(),
        theta.to_degrees(),
        a.peak_to_median
    );
    println!(
        "τ̂ = {:.4} ns (true {:.4} ns), peak/median {:.1}, grid step {:.3} ps",
        d.value * 1e9,
        tau * 1e9,
        d.peak_to_median,
        grids.final_delay_step() * 1e12
    );
    Ok(())
}
