//! Full chain on one full-scale trial: detection, channel estimate, LoS
//! subarray choice, angle/delay estimates and the weighted solve. Compares
//! range weighting with unit weighting.
//!
//! cargo run --release --example localize_users -- [seed]

use xlmimo_access::harness::{metric_rmse_xy, ExperimentConfig, TrialInstance};
use xlmimo_access::localization::Weighting;
use xlmimo_access::recovery::SolverKind;
use xlmimo_access::rng::trial_seed;

fn main() -> xlmimo_access::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut cfg = ExperimentConfig::full_scale();
    cfg.frontend.ptx_dbm = 30.0;
    let inst = TrialInstance::draw(&cfg, trial_seed(seed, 0, 0))?;
    let res = inst.solve(SolverKind::StrBomp)?;
    let loc = inst.localize(&cfg, &res)?;
    cfg.localization.weighting = Weighting::Unit;
    let unit = inst.localize(&cfg, &res)?;
    for (u, v) in loc.users.iter().zip(&unit.users) {
        let truth = inst.scenario.users[u.user].position;
        let tag = if inst.channel.activity[u.user] {
            ""
        } else {
            " (false alarm)"
        };
        println!("user {}{tag}: true ({:.3}, {:.3})", u.user, truth.x, truth.y);
        println!(
            "  LoS subarrays {:?} (energies ≥ φ·max, fixed up: {})",
            u.selection.omega, u.selection.fixed_up
        );
        for o in &u.observations {
            println!(
                "    m={:<2} θ̂ {:>8.4}°  τ̂ {:>9.4} ns",
                o.subarray,
                o.aoa_rad.to_degrees(),
                o.delay_s * 1e9
            );
        }
        for (name, r) in [("range-weighted", u), ("unit-weighted", v)] {
            match r.estimate {
                Some(e) => println!(
                    "  {name:<15} ({:.4}, {:.4})  RMSE {:.2} cm",
                    e.x,
                    e.y,
                    100.0 * metric_rmse_xy(&truth, &e)
                ),
                None => println!("  {name:<15} failed: {}", r.error.as_deref().unwrap_or("")),
            }
        }
    }
    Ok(())
}
