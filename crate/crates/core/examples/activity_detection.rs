//! Runs every recovery solver on one reduced-scale trial and compares the
//! detected users and subarray blocks with the truth.
//!
//! cargo run --example activity_detection -- [ptx_dbm]

use xlmimo_access::harness::{metric_nmse_db, metric_pe, ExperimentConfig, TrialInstance};
use xlmimo_access::recovery::SolverKind;

fn main() -> xlmimo_access::Result<()> {
    let mut cfg = ExperimentConfig::reduced_scale();
    if let Some(p) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        cfg.frontend.ptx_dbm = p;
    }
    let inst = TrialInstance::draw(&cfg, 42)?;
    let m_n = cfg.scenario.subarrays;
    println!(
        "P_tx = {} dBm, σ² = {:.2e} W",
        cfg.frontend.ptx_dbm, inst.measurements.noise_var
    );
    for k in inst.scenario.active_indices() {
        let vis: Vec<usize> = (0..m_n).filter(|&m| inst.channel.subarray_activity[k][m]).collect();
        println!("truth: user {k} on subarrays {vis:?}");
    }
    for kind in SolverKind::ALL {
        let res = inst.solve(kind)?;
        println!(
            "\n{} ({:?}, {} iterations, ε {:.2e})",
            kind.name(),
            res.termination,
            res.iterations,
            res.final_residual
        );
        println!(
            "  Pe {:.3}, NMSE {:.2} dB, refinement {:?}",
            metric_pe(&inst.channel.activity, &res.zeta_hat)?,
            metric_nmse_db(&inst.channel.h, &res.h_hat)?,
            res.refinement
        );
        for (k, blocks) in res.blocks_by_user(m_n) {
            let mut b = blocks.clone();
            b.sort_unstable();
            let tag = if inst.channel.activity[k] {
                ""
            } else {
                "  (false alarm)"
            };
            println!("  user {k}: {b:?}{tag}");
        }
    }
    Ok(())
}
