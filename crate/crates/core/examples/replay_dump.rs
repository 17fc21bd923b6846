//! Writes one trial's channel and measurements to disk, reads them back and
//! reruns recovery on the reloaded measurements. The estimates match the
//! in-memory run bit for bit.
//!
//! cargo run --example replay_dump -- [dir]

use std::path::PathBuf;

use xlmimo_access::dump::{config_hash, read_channel, read_measurements, write_channel, write_measurements};
use xlmimo_access::harness::{metric_nmse_db, ExperimentConfig, TrialInstance};
use xlmimo_access::recovery::{strbomp, SolverKind};

fn main() -> xlmimo_access::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/replay".into()));
    std::fs::create_dir_all(&dir)?;
    let cfg = ExperimentConfig::reduced_scale();
    let hash = config_hash(&cfg)?;
    let inst = TrialInstance::draw(&cfg, 9)?;
    write_channel(&dir, "channel", &inst.channel, inst.seed, &hash)?;
    write_measurements(&dir, &inst.measurements, inst.seed, &hash)?;

    let (ch, side) = read_channel(&dir, "channel")?;
    let (meas, _) = read_measurements(&dir)?;
    println!(
        "reloaded channel {}×{} (seed {}, config {}…)",
        side.rows,
        side.cols,
        side.seed,
        &side.config_sha256[..12]
    );
    let direct = inst.solve(SolverKind::StrBomp)?;
    let replay = strbomp(&meas, &inst.recovery)?;
    println!("identical support: {}", direct.block_support == replay.block_support);
    println!("identical estimate: {}", direct.h_hat == replay.h_hat);
    println!("NMSE {:.2} dB", metric_nmse_db(&ch.h, &replay.h_hat)?);
    Ok(())
}
