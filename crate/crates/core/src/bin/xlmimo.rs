use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xlmimo_access::dump::{config_hash, write_channel, write_complex_matrix, write_measurements};
use xlmimo_access::frontend::PilotMode;
use xlmimo_access::harness::{
    metric_nmse_db, metric_pe, metric_rmse_xy, run_sweep, ExperimentConfig, SweepAxis, TrialInstance,
};
use xlmimo_access::recovery::SolverKind;
use xlmimo_access::rng::trial_seed;
use xlmimo_access::Result;

#[derive(Parser)]
#[command(
    name = "xlmimo",
    version,
    about = "Grant-free access simulator for subarray-based extra-large arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; built-in full-scale defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: strbomp,bomp,bomp-sa,oracle-ls,oracle-ls-sa
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<SolverKind>>,
    #[arg(long)]
    pilot_mode: Option<PilotMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One trial with per-solver metrics; writes dumps under --out.
    Simulate(Common),
    /// Monte-Carlo sweep along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Single active user end to end, printing angles, delays and position.
    LocateDemo(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::full_scale(),
    };
    if let Some(s) = c.seed {
        cfg.sweep.seed = s;
    }
    if let Some(s) = &c.solvers {
        cfg.sweep.solvers = s.clone();
    }
    if let Some(m) = c.pilot_mode {
        cfg.frontend.pilot_mode = m;
    }
    if let Some(o) = &c.out {
        cfg.sweep.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let inst = TrialInstance::draw(cfg, trial_seed(cfg.sweep.seed, 0, 0))?;
    let active = inst.scenario.active_indices();
    println!(
        "K = {}, active {:?}, M = {}, N_s = {}, P = {}, G = {}, sigma2 = {:.3e} W",
        cfg.scenario.users,
        active,
        cfg.scenario.subarrays,
        cfg.channel.antennas_per_subarray,
        inst.grid.count,
        cfg.frontend.g_symbols,
        inst.measurements.noise_var
    );
    let hash = config_hash(cfg)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scenario.json"), inst.scenario.to_json()?)?;
        write_channel(dir, "channel", &inst.channel, inst.seed, &hash)?;
        write_measurements(dir, &inst.measurements, inst.seed, &hash)?;
    }
    for &kind in &cfg.sweep.solvers {
        let res = inst.solve(kind)?;
        let pe = metric_pe(&inst.channel.activity, &res.zeta_hat)?;
        let nmse = metric_nmse_db(&inst.channel.h, &res.h_hat)?;
        let detected: Vec<usize> = (0..res.zeta_hat.len()).filter(|&k| res.zeta_hat[k]).collect();
        println!(
            "{:<13} Pe = {:.4}  NMSE = {:>8.2} dB  detected {:?}  blocks {}  stop {:?}",
            kind.name(),
            pe,
            nmse,
            detected,
            res.block_support.len(),
            res.termination
        );
        if let Some(dir) = out {
            std::fs::write(dir.join(format!("recovery_{}.json", kind.name())), res.to_json()?)?;
            write_complex_matrix(&dir.join(format!("h_hat_{}.bin", kind.name())), &res.h_hat)?;
        }
        if cfg.localization.enabled && res.estimated_active > 0 {
            let loc = inst.localize(cfg, &res)?;
            for u in &loc.users {
                let truth = inst.scenario.users[u.user].position;
                match u.estimate {
                    Some(e) => println!(
                        "    user {:>3}: ({:.3}, {:.3}) m, truth ({:.3}, {:.3}), RMSE {:.4} m",
                        u.user,
                        e.x,
                        e.y,
                        truth.x,
                        truth.y,
                        metric_rmse_xy(&truth, &e)
                    ),
                    None => println!(
                        "    user {:>3}: not localized ({})",
                        u.user,
                        u.error.as_deref().unwrap_or("?")
                    ),
                }
            }
            if let Some(dir) = out {
                std::fs::write(dir.join(format!("localization_{}.json", kind.name())), loc.to_json()?)?;
                let f = std::fs::File::create(dir.join(format!("localization_{}.csv", kind.name())))?;
                loc.write_csv(f, &inst.positions())?;
            }
        }
    }
    Ok(())
}

fn locate_demo(cfg: &ExperimentConfig) -> Result<()> {
    let mut cfg = cfg.clone();
    cfg.scenario.active_users = 1;
    cfg.validate()?;
    let inst = TrialInstance::draw(&cfg, trial_seed(cfg.sweep.seed, 0, 0))?;
    let k = inst.scenario.active_indices()[0];
    let truth = inst.scenario.users[k].position;
    let los = &inst.paths.users[k][0];
    println!(
        "user {k} at ({:.3}, {:.3}) m, LoS visible at {:?}",
        truth.x,
        truth.y,
        (0..los.mask.len()).filter(|&m| los.mask[m]).collect::<Vec<_>>()
    );
    let res = inst.solve(SolverKind::StrBomp)?;
    let loc = inst.localize(&cfg, &res)?;
    for u in &loc.users {
        println!(
            "detected user {}: LoS subarrays {:?}, anchor {:?}",
            u.user, u.selection.omega, u.anchor
        );
        for o in &u.observations {
            let m = o.subarray;
            println!(
                "  subarray {m}: theta {:.4} deg (true {:.4}), tau {:.4} ns (true {:.4})",
                o.aoa_rad.to_degrees(),
                los.aoa_rad[m].to_degrees(),
                o.delay_s * 1e9,
                los.delay_s[m] * 1e9
            );
        }
        match u.estimate {
            Some(e) => println!(
                "  estimate ({:.4}, {:.4}) m, RMSE {:.5} m",
                e.x,
                e.y,
                metric_rmse_xy(&truth, &e)
            ),
            None => println!("  not localized: {}", u.error.as_deref().unwrap_or("?")),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            simulate(&cfg, c.out.as_deref())
        }
        Command::Sweep {
            common,
            axis,
            values,
            trials,
            workers,
        } => {
            let mut cfg = load(&common)?;
            if let Some(a) = axis {
                cfg.sweep.axis = a;
            }
            if let Some(v) = values {
                cfg.sweep.values = v;
            }
            if let Some(t) = trials {
                cfg.sweep.trials = t;
            }
            if let Some(w) = workers {
                cfg.sweep.workers = w;
            }
            cfg.validate()?;
            let out = cfg.sweep.out_dir.clone();
            let res = run_sweep(&cfg, Some(&out))?;
            for r in &res.summary.rows {
                println!(
                    "{}={:<6} {:<13} Pe {:.4} ± {:.4}  NMSE {:>8.2} dB  RMSE {:.4} m",
                    res.summary.axis,
                    r.value,
                    r.solver.name(),
                    r.pe.mean,
                    r.pe.ci95,
                    r.nmse_db,
                    r.rmse.mean
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::LocateDemo(c) => locate_demo(&load(&c)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
