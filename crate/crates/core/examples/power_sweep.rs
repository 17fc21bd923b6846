//! Small transmit-power sweep at reduced scale, written to an output
//! directory (records, results.csv, SVG and .dat figures).
//!
//! cargo run --release --example power_sweep -- [out_dir] [trials]

use std::path::PathBuf;

use xlmimo_access::harness::{run_sweep, ExperimentConfig, SweepAxis};
use xlmimo_access::recovery::SolverKind;

fn main() -> xlmimo_access::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/power_sweep".into()));
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let mut cfg = ExperimentConfig::reduced_scale();
    cfg.sweep.axis = SweepAxis::Ptx;
    cfg.sweep.values = vec![0.0, 10.0, 20.0, 30.0];
    cfg.sweep.trials = trials;
    cfg.sweep.solvers = vec![
        SolverKind::StrBomp,
        SolverKind::BompSa,
        SolverKind::Bomp,
        SolverKind::OracleLsSa,
    ];
    let res = run_sweep(&cfg, Some(&out))?;
    println!(
        "{:>6} {:<13} {:>8} {:>10} {:>10}",
        "P_tx", "solver", "Pe", "NMSE dB", "RMSE cm"
    );
    for r in &res.summary.rows {
        println!(
            "{:>6} {:<13} {:>8.4} {:>10.2} {:>10.2}",
            r.value,
            r.solver.name(),
            r.pe.mean,
            r.nmse_db,
            100.0 * r.rmse.mean
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}
