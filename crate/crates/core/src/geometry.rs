//! Indoor 2-D scenario: room, subarrays, users, scatterers, visibility
//! masks, and the deterministic path parameters derived from them.
//!
//! Coordinates follow the room layout used throughout the crate: the array
//! wall is the x-axis (y = 0), subarray `m` (0-based) is centered at
//! `x_m = (m + ½)·Δ`, and every angle of arrival is measured at the
//! receiving subarray from the +x axis, `θ = atan2(y_src, x_m − x_src)`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, hash_tags, rng_from, stream};

/// Propagation speed v_c (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Version tag written into scenario dumps.
pub const SCENARIO_FORMAT_VERSION: u32 = 1;

const MAX_SCENARIO_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// How path delays are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// τ = path length / v_c.
    #[default]
    Geometric,
    /// Synthetic mode: τ ~ U(0, τ_max] independently per (path, subarray).
    /// Breaks delay-difference consistency, so it is useless for TDoA.
    UniformSynthetic,
}

/// Scenario generation parameters.
///
/// TOML keys (all optional, defaults are the 10-subarray office layout):
/// `users`, `active_users`, `subarrays`, `subarray_spacing_m`,
/// `scatterer_floor_m`, `user_floor_m`, `height_ratio`, `scatterers_min`,
/// `scatterers_max`, `paths_min`, `paths_max`, `active_subarray_fraction`,
/// `delay_model = "geometric" | "uniform_synthetic"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: usize,
    pub active_users: usize,
    pub subarrays: usize,
    pub subarray_spacing_m: f64,
    pub scatterer_floor_m: f64,
    pub user_floor_m: f64,
    /// Room depth OC as a fraction of the array wall length OD.
    pub height_ratio: f64,
    pub scatterers_min: usize,
    pub scatterers_max: usize,
    pub paths_min: usize,
    pub paths_max: usize,
    /// Upper bound of visible subarrays per path is `ceil(fraction · M)`.
    pub active_subarray_fraction: f64,
    pub delay_model: DelayModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: 60,
            active_users: 6,
            subarrays: 10,
            subarray_spacing_m: 5.0,
            scatterer_floor_m: 1.0,
            user_floor_m: 3.0,
            height_ratio: 0.6,
            scatterers_min: 5,
            scatterers_max: 15,
            paths_min: 1,
            paths_max: 5,
            active_subarray_fraction: 0.8,
            delay_model: DelayModel::Geometric,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.users == 0 {
            return bad("users must be positive");
        }
        if self.active_users > self.users {
            return bad("active_users exceeds users");
        }
        if self.subarrays < 2 {
            return bad("at least two subarrays are needed for TDoA");
        }
        if !(self.subarray_spacing_m > 0.0) {
            return bad("subarray_spacing_m must be positive");
        }
        if !(self.height_ratio > 0.0) {
            return bad("height_ratio must be positive");
        }
        let height = self.height_ratio * self.subarrays as f64 * self.subarray_spacing_m;
        if !(0.0 < self.scatterer_floor_m && self.scatterer_floor_m < self.user_floor_m && self.user_floor_m < height) {
            return bad("need 0 < scatterer_floor_m < user_floor_m < room height");
        }
        if self.scatterers_min > self.scatterers_max {
            return bad("scatterers_min exceeds scatterers_max");
        }
        if self.paths_min == 0 || self.paths_min > self.paths_max {
            return bad("path count range must satisfy 1 <= paths_min <= paths_max");
        }
        if !(self.active_subarray_fraction > 0.0 && self.active_subarray_fraction <= 1.0) {
            return bad("active_subarray_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Largest number of subarrays a single path may illuminate.
    pub fn max_visible_subarrays(&self) -> usize {
        let cap = (self.active_subarray_fraction * self.subarrays as f64 - 1e-9).ceil() as usize;
        cap.clamp(2, self.subarrays)
    }
}

/// Room and array layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    /// OD, length of the array wall.
    pub width_m: f64,
    /// OC, depth of the room.
    pub height_m: f64,
    /// OA, lower bound on scatterer y.
    pub scatterer_floor_m: f64,
    /// OB, lower bound on user y.
    pub user_floor_m: f64,
    pub subarray_spacing_m: f64,
    pub subarray_centers_x: Vec<f64>,
}

impl RoomGeometry {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let width = cfg.subarrays as f64 * cfg.subarray_spacing_m;
        Self {
            width_m: width,
            height_m: cfg.height_ratio * width,
            scatterer_floor_m: cfg.scatterer_floor_m,
            user_floor_m: cfg.user_floor_m,
            subarray_spacing_m: cfg.subarray_spacing_m,
            subarray_centers_x: (0..cfg.subarrays)
                .map(|m| (m as f64 + 0.5) * cfg.subarray_spacing_m)
                .collect(),
        }
    }

    pub fn subarray_count(&self) -> usize {
        self.subarray_centers_x.len()
    }

    pub fn subarray_center(&self, m: usize) -> Point {
        Point::new(self.subarray_centers_x[m], 0.0)
    }

    /// Maximum delay spread, twice the wall length over v_c.
    pub fn tau_max(&self) -> f64 {
        2.0 * self.width_m / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub position: Point,
    pub active: bool,
}

/// Visibility and scatterer assignment of one propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    /// b_{k,l}: which subarrays see this path.
    pub mask: Vec<bool>,
    /// `None` for the line-of-sight path.
    pub scatterer: Option<usize>,
}

impl PathSpec {
    pub fn visible_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub room: RoomGeometry,
    pub users: Vec<UserPlacement>,
    pub scatterers: Vec<Point>,
    /// `paths[k][0]` is the LoS path of user k.
    pub paths: Vec<Vec<PathSpec>>,
}

impl Scenario {
    pub fn activity(&self) -> Vec<bool> {
        self.users.iter().map(|u| u.active).collect()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.users.len()).filter(|&k| self.users[k].active).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        if sc.format_version != SCENARIO_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported scenario format version {}",
                sc.format_version
            )));
        }
        Ok(sc)
    }
}

/// Draws a scenario. Deterministic in `(config, seed)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    for attempt in 0..MAX_SCENARIO_ATTEMPTS {
        let s = derive_seed(seed, hash_tags(&[stream::SCENARIO, attempt as u64]));
        let sc = draw_scenario(config, seed, s);
        let los_ok = sc
            .users
            .iter()
            .zip(&sc.paths)
            .all(|(u, p)| !u.active || p[0].visible_count() >= 2);
        if los_ok {
            return Ok(sc);
        }
    }
    Err(Error::ScenarioRetries(MAX_SCENARIO_ATTEMPTS))
}

fn draw_mask<R: Rng>(rng: &mut R, m: usize, max_visible: usize) -> Vec<bool> {
    let count = rng.gen_range(2..=max_visible);
    let mut mask = vec![false; m];
    for i in sample(rng, m, count) {
        mask[i] = true;
    }
    mask
}

fn draw_scenario(config: &ScenarioConfig, seed: u64, draw_seed: u64) -> Scenario {
    let mut rng = rng_from(draw_seed);
    let room = RoomGeometry::from_config(config);
    let m = room.subarray_count();
    let tau_max = room.tau_max();

    let n_scat = rng.gen_range(config.scatterers_min..=config.scatterers_max);
    let scatterers: Vec<Point> = (0..n_scat)
        .map(|_| {
            Point::new(
                rng.gen_range(0.0..=room.width_m),
                rng.gen_range(room.scatterer_floor_m..=room.height_m),
            )
        })
        .collect();

    let mut users: Vec<UserPlacement> = (0..config.users)
        .map(|_| UserPlacement {
            position: Point::new(
                rng.gen_range(0.0..=room.width_m),
                rng.gen_range(room.user_floor_m..=room.height_m),
            ),
            active: false,
        })
        .collect();
    for k in sample(&mut rng, config.users, config.active_users) {
        users[k].active = true;
    }

    let max_visible = config.max_visible_subarrays();
    let paths = users
        .iter()
        .map(|u| {
            let l_k = rng.gen_range(config.paths_min..=config.paths_max);
            let mut specs = vec![PathSpec {
                mask: draw_mask(&mut rng, m, max_visible),
                scatterer: None,
            }];
            // Scatterers whose two-hop path stays within the delay spread at
            // every subarray, each used at most once per user.
            let mut candidates: Vec<usize> = (0..scatterers.len())
                .filter(|&q| {
                    let d1 = u.position.distance(&scatterers[q]);
                    (0..m).all(|mm| {
                        let d2 = scatterers[q].distance(&room.subarray_center(mm));
                        (d1 + d2) / SPEED_OF_LIGHT <= tau_max
                    })
                })
                .collect();
            for _ in 1..l_k {
                if candidates.is_empty() {
                    break;
                }
                let pick = candidates.swap_remove(rng.gen_range(0..candidates.len()));
                specs.push(PathSpec {
                    mask: draw_mask(&mut rng, m, max_visible),
                    scatterer: Some(pick),
                });
            }
            specs
        })
        .collect();

    Scenario {
        format_version: SCENARIO_FORMAT_VERSION,
        seed,
        config: config.clone(),
        room,
        users,
        scatterers,
        paths,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathKind {
    LineOfSight,
    Scattered { scatterer: usize },
}

/// Per-path, per-subarray propagation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub kind: PathKind,
    pub mask: Vec<bool>,
    /// D^{(1)}: user to scatterer. Zero for LoS.
    pub first_hop_m: f64,
    /// LoS: D_{k,1,m}. NLoS: D^{(2)}_{k,l,m}, scatterer to subarray.
    pub distance_m: Vec<f64>,
    pub aoa_rad: Vec<f64>,
    pub delay_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGeometry {
    pub tau_max_s: f64,
    /// `users[k][l]`, l = 0 is LoS.
    pub users: Vec<Vec<PathParams>>,
}

impl PathGeometry {
    pub fn path_count(&self, k: usize) -> usize {
        self.users[k].len()
    }
}

/// Angle of arrival at a subarray centered at `x_m` from a source at `src`.
pub fn angle_of_arrival(src: &Point, x_m: f64) -> f64 {
    src.y.atan2(x_m - src.x)
}

/// Distances, angles and delays for every path of every user.
pub fn path_parameters(scenario: &Scenario) -> PathGeometry {
    let room = &scenario.room;
    let m = room.subarray_count();
    let tau_max = room.tau_max();
    let mut synth = match scenario.config.delay_model {
        DelayModel::UniformSynthetic => Some(rng_from(derive_seed(scenario.seed, stream::DELAYS))),
        DelayModel::Geometric => None,
    };

    let users = scenario
        .users
        .iter()
        .zip(&scenario.paths)
        .map(|(u, specs)| {
            specs
                .iter()
                .map(|spec| {
                    let (kind, src, first_hop) = match spec.scatterer {
                        None => (PathKind::LineOfSight, u.position, 0.0),
                        Some(q) => {
                            let s = scenario.scatterers[q];
                            (PathKind::Scattered { scatterer: q }, s, u.position.distance(&s))
                        }
                    };
                    let distance_m: Vec<f64> = (0..m).map(|mm| src.distance(&room.subarray_center(mm))).collect();
                    let aoa_rad = room
                        .subarray_centers_x
                        .iter()
                        .map(|&x| angle_of_arrival(&src, x))
                        .collect();
                    let delay_s = match synth.as_mut() {
                        None => distance_m.iter().map(|d| (first_hop + d) / SPEED_OF_LIGHT).collect(),
                        Some(rng) => (0..m).map(|_| tau_max * (1.0 - rng.gen::<f64>())).collect(),
                    };
                    PathParams {
                        kind,
                        mask: spec.mask.clone(),
                        first_hop_m: first_hop,
                        distance_m,
                        aoa_rad,
                        delay_s,
                    }
                })
                .collect()
        })
        .collect();

    PathGeometry {
        tau_max_s: tau_max,
        users,
    }
}

/// Far-field boundary 2A²/λ of an aperture A.
pub fn rayleigh_distance(aperture_m: f64, wavelength_m: f64) -> f64 {
    2.0 * aperture_m * aperture_m / wavelength_m
}

/// Aperture of one half-wavelength ULA subarray, N_s·λ/2.
pub fn subarray_aperture(ns: usize, wavelength_m: f64) -> f64 {
    ns as f64 * wavelength_m / 2.0
}

/// Aperture spanned by two adjacent subarrays, Δ + 2·A₁.
pub fn two_subarray_aperture(spacing_m: f64, ns: usize, wavelength_m: f64) -> f64 {
    spacing_m + 2.0 * subarray_aperture(ns, wavelength_m)
}
