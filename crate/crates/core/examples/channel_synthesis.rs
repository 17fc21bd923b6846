//! Draws one scenario, prints the geometry and per-subarray channel energy.
//!
//! cargo run --example channel_synthesis -- [seed]

use xlmimo_access::channel::{assemble_channel, pilot_grid, ChannelConfig};
use xlmimo_access::geometry::{
    generate_scenario, path_parameters, rayleigh_distance, subarray_aperture, two_subarray_aperture, ScenarioConfig,
};
use xlmimo_access::localization::subarray_energy;
use xlmimo_access::rng::{derive_seed, stream};

fn main() -> xlmimo_access::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let sc_cfg = ScenarioConfig::default();
    let ch_cfg = ChannelConfig::default();
    let lambda = ch_cfg.wavelength();
    let ns = ch_cfg.antennas_per_subarray;
    println!(
        "wavelength {:.5} m, Rayleigh distance: one subarray {:.4} m, two subarrays {:.0} m",
        lambda,
        rayleigh_distance(subarray_aperture(ns, lambda), lambda),
        rayleigh_distance(two_subarray_aperture(sc_cfg.subarray_spacing_m, ns, lambda), lambda)
    );

    let scenario = generate_scenario(&sc_cfg, derive_seed(seed, stream::SCENARIO))?;
    let paths = path_parameters(&scenario);
    let grid = pilot_grid(ch_cfg.bandwidth_hz, ch_cfg.subcarriers, scenario.room.tau_max())?;
    println!(
        "room {:.0} × {:.0} m, {} scatterers, τ_max {:.1} ns, P = {} pilots every {} subcarriers",
        scenario.room.width_m,
        scenario.room.height_m,
        scenario.scatterers.len(),
        scenario.room.tau_max() * 1e9,
        grid.count,
        grid.interval
    );
    let ch = assemble_channel(&scenario, &paths, &ch_cfg, &grid, derive_seed(seed, stream::CHANNEL))?;

    for k in scenario.active_indices() {
        let u = &scenario.users[k];
        let los = &paths.users[k][0];
        println!(
            "\nuser {k} at ({:.2}, {:.2}) m, {} paths",
            u.position.x,
            u.position.y,
            paths.path_count(k)
        );
        let energy = subarray_energy(&ch.user_block(k), ch.subarrays)?;
        for m in 0..ch.subarrays {
            let bar = "#".repeat((energy[m] / energy.iter().cloned().fold(0.0, f64::max) * 40.0).round() as usize);
            println!(
                "  m={m:<2} LoS {}  θ {:>7.2}°  D {:>6.2} m  ‖H‖ {:.2e} {bar}",
                if los.mask[m] { "yes" } else { " no" },
                los.aoa_rad[m].to_degrees(),
                los.distance_m[m],
                energy[m]
            );
        }
    }
    println!(
        "\nnonzero entries per pilot column: {} of {}",
        ch.support_size(0),
        ch.h.nrows()
    );
    Ok(())
}
