use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{assemble_channel, pilot_grid, ChannelTensor, PilotGrid};
use crate::error::Result;
use crate::frontend::{design_combiners, design_pilots, noise_power, simulate_measurements, MeasurementSet};
use crate::geometry::{generate_scenario, path_parameters, PathGeometry, Point, Scenario};
use crate::localization::{mscloc, ArrayLayout, LocalizationResult};
use crate::recovery::{run_solver, RecoveryConfig, RecoveryResult, SolverKind, Termination, Truth};
use crate::rng::{derive_seed, stream, trial_seed};

use super::config::ExperimentConfig;
use super::metrics::{metric_pe, metric_rmse_xy, nmse_ratio, ratio_to_db};

/// Everything drawn for one trial before any solver runs.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub seed: u64,
    pub scenario: Scenario,
    pub paths: PathGeometry,
    pub grid: PilotGrid,
    pub channel: ChannelTensor,
    pub measurements: MeasurementSet,
    pub recovery: RecoveryConfig,
}

impl TrialInstance {
    /// Builds scenario, channel and measurements from one trial seed.
    pub fn draw(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let scenario = generate_scenario(&cfg.scenario, derive_seed(seed, stream::SCENARIO))?;
        let paths = path_parameters(&scenario);
        let grid = pilot_grid(
            cfg.channel.bandwidth_hz,
            cfg.channel.subcarriers,
            scenario.room.tau_max(),
        )?;
        let channel = assemble_channel(
            &scenario,
            &paths,
            &cfg.channel,
            &grid,
            derive_seed(seed, stream::CHANNEL),
        )?;
        let pilots = design_pilots(
            cfg.scenario.users,
            grid.count,
            cfg.frontend.g_symbols,
            cfg.frontend.ptx_watts(),
            cfg.frontend.pilot_mode,
            derive_seed(seed, stream::PILOTS),
        )?;
        let combiners = design_combiners(
            cfg.frontend.g_symbols,
            cfg.scenario.subarrays,
            cfg.channel.antennas_per_subarray,
            derive_seed(seed, stream::COMBINERS),
        )?;
        let sigma2 = noise_power(cfg.channel.bandwidth_hz, cfg.frontend.noise_density_dbm_hz);
        let measurements =
            simulate_measurements(&channel.h, pilots, combiners, sigma2, derive_seed(seed, stream::NOISE))?;
        let recovery = cfg
            .recovery
            .resolve(sigma2, cfg.scenario.active_users, cfg.scenario.subarrays);
        Ok(Self {
            seed,
            scenario,
            paths,
            grid,
            channel,
            measurements,
            recovery,
        })
    }

    pub fn truth(&self) -> Truth<'_> {
        Truth {
            activity: &self.channel.activity,
            subarray_activity: &self.channel.subarray_activity,
        }
    }

    pub fn solve(&self, kind: SolverKind) -> Result<RecoveryResult> {
        run_solver(kind, &self.measurements, &self.recovery, self.truth())
    }

    pub fn localize(&self, cfg: &ExperimentConfig, result: &RecoveryResult) -> Result<LocalizationResult> {
        let layout = ArrayLayout {
            subarrays: self.channel.subarrays,
            antennas_per_subarray: self.channel.antennas_per_subarray,
            anchors_x: &self.scenario.room.subarray_centers_x,
            pilot_offsets_hz: &self.grid.offsets_hz,
        };
        let grids = cfg.localization.grids(self.scenario.room.tau_max());
        mscloc(&result.h_hat, &result.zeta_hat, &layout, &cfg.localization, &grids)
    }

    pub fn positions(&self) -> Vec<Point> {
        self.scenario.users.iter().map(|u| u.position).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRmse {
    pub user: usize,
    pub rmse_m: f64,
}

/// JSON has no infinities; non-finite values travel as strings.
mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad float `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub solver: SolverKind,
    #[serde(with = "lossless_f64")]
    pub pe: f64,
    #[serde(with = "lossless_f64")]
    pub nmse_ratio: f64,
    #[serde(with = "lossless_f64")]
    pub nmse_db: f64,
    pub estimated_active: usize,
    pub termination: Termination,
    #[serde(with = "lossless_f64")]
    pub loop_residual: f64,
    #[serde(with = "lossless_f64")]
    pub final_residual: f64,
    /// Truly active users that were detected and localized.
    pub rmse: Vec<UserRmse>,
    /// Truly active users detected but not localized.
    pub unlocalized: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub noise_var: f64,
    pub solvers: Vec<SolverRecord>,
    pub wall_time_s: f64,
}

impl TrialRecord {
    pub fn solver(&self, kind: SolverKind) -> Option<&SolverRecord> {
        self.solvers.iter().find(|s| s.solver == kind)
    }
}

fn solver_record(cfg: &ExperimentConfig, inst: &TrialInstance, kind: SolverKind) -> Result<SolverRecord> {
    let res = inst.solve(kind)?;
    let pe = metric_pe(&inst.channel.activity, &res.zeta_hat)?;
    let ratio = nmse_ratio(&inst.channel.h, &res.h_hat)?;
    let mut rmse = Vec::new();
    let mut unlocalized = 0;
    if cfg.localization.enabled && res.estimated_active > 0 {
        let loc = inst.localize(cfg, &res)?;
        for u in &loc.users {
            if !inst.channel.activity[u.user] {
                continue;
            }
            match u.estimate {
                Some(est) => rmse.push(UserRmse {
                    user: u.user,
                    rmse_m: metric_rmse_xy(&inst.scenario.users[u.user].position, &est),
                }),
                None => unlocalized += 1,
            }
        }
    }
    Ok(SolverRecord {
        solver: kind,
        pe,
        nmse_ratio: ratio,
        nmse_db: ratio_to_db(ratio),
        estimated_active: res.estimated_active,
        termination: res.termination,
        loop_residual: res.loop_residual,
        final_residual: res.final_residual,
        rmse,
        unlocalized,
        error: None,
    })
}

/// One Monte-Carlo trial at sweep point `point` of a config already set to
/// that point. Solver failures are recorded, not propagated.
pub fn run_trial(cfg: &ExperimentConfig, point: usize, value: f64, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = trial_seed(cfg.sweep.seed, point as u64, trial as u64);
    let inst = TrialInstance::draw(cfg, seed)?;
    let solvers = cfg
        .sweep
        .solvers
        .iter()
        .map(|&kind| {
            solver_record(cfg, &inst, kind).unwrap_or_else(|e| SolverRecord {
                solver: kind,
                pe: f64::NAN,
                nmse_ratio: f64::NAN,
                nmse_db: f64::NAN,
                estimated_active: 0,
                termination: Termination::EmptyInput,
                loop_residual: f64::NAN,
                final_residual: f64::NAN,
                rmse: Vec::new(),
                unlocalized: 0,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(TrialRecord {
        point,
        value,
        trial,
        seed,
        noise_var: inst.measurements.noise_var,
        solvers,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
