//! Domain types, configuration, scenario generation and planar geometry.
//!
//! The arena is a `area_width × area_height` plane. UAVs fly at distinct
//! altitudes, so they never collide with each other; obstacles are vertical
//! cylinders and therefore show up as circles in the plane.
//!
//! Data volumes and energies are tracked as fixed-point [`Quantity`] values so
//! that bookkeeping identities (collected data, `Er = Er0 + Ec - Ed`) hold
//! exactly rather than up to rounding.

use std::f64::consts::PI;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HgamError, Result};

/// Rejection-sampling budget per placed object.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Unit vector in the same direction, or zero for a (near-)zero vector.
    pub fn unit_or_zero(self) -> Vec2 {
        let n = self.norm();
        if n < 1e-12 {
            Vec2::ZERO
        } else {
            self * (1.0 / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Fixed-point amount of data or energy, stored in nano-units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quantity(i64);

impl Quantity {
    pub const SCALE: i64 = 1_000_000_000;
    pub const ZERO: Quantity = Quantity(0);

    pub fn from_f64(v: f64) -> Self {
        Quantity((v * Self::SCALE as f64).round() as i64)
    }

    pub const fn from_raw(raw: i64) -> Self {
        Quantity(raw)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl Add for Quantity {
    type Output = Quantity;
    fn add(self, o: Quantity) -> Quantity {
        Quantity(self.0 + o.0)
    }
}

impl Sub for Quantity {
    type Output = Quantity;
    fn sub(self, o: Quantity) -> Quantity {
        Quantity(self.0 - o.0)
    }
}

impl AddAssign for Quantity {
    fn add_assign(&mut self, o: Quantity) {
        self.0 += o.0;
    }
}

impl SubAssign for Quantity {
    fn sub_assign(&mut self, o: Quantity) {
        self.0 -= o.0;
    }
}

impl Sum for Quantity {
    fn sum<I: Iterator<Item = Quantity>>(iter: I) -> Quantity {
        Quantity(iter.map(|q| q.0).sum())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// World parameters. Loaded from a flat TOML file whose keys are exactly the
/// field names below; absent keys keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub area_width: f64,
    pub area_height: f64,
    pub num_muavs: usize,
    pub num_cuavs: usize,
    pub num_pois: usize,
    pub num_obstacles: usize,
    pub obstacle_radius_min: f64,
    pub obstacle_radius_max: f64,
    pub sense_radius: f64,
    pub charge_radius: f64,
    pub view_range: f64,
    pub uav_radius: f64,
    pub poi_radius: f64,
    pub step_length: f64,
    pub collect_rate: f64,
    pub max_steps: usize,
    pub initial_energy: f64,
    pub charge_per_step: f64,
    pub e_max: f64,
    pub beta: f64,
    pub kappa: f64,
    pub num_lasers: usize,
    pub laser_warn_dist: f64,
    pub low_battery_frac: f64,
    pub w_c: f64,
    pub w_l: f64,
    pub w_e: f64,
    pub w_f: f64,
    pub w_d: f64,
    pub discovery_bonus: f64,
    pub rotation_penalty: f64,
    pub plow: f64,
    pub collision_penalty: f64,
    pub laser_penalty: f64,
    /// Widen the view range to the arena diagonal (full-visibility variant).
    pub global_view: bool,
    /// Optional cap on the distance at which UAVs count as graph neighbours.
    pub comm_radius: Option<f64>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            area_width: 16.0,
            area_height: 16.0,
            num_muavs: 2,
            num_cuavs: 1,
            num_pois: 100,
            num_obstacles: 6,
            obstacle_radius_min: 0.4,
            obstacle_radius_max: 0.8,
            sense_radius: 1.0,
            charge_radius: 1.5,
            view_range: 4.0,
            uav_radius: 0.2,
            poi_radius: 0.1,
            step_length: 0.13,
            collect_rate: 0.2,
            max_steps: 700,
            initial_energy: 50.0,
            charge_per_step: 0.5,
            e_max: 50.0,
            beta: 1.0,
            kappa: 1.0,
            num_lasers: 16,
            laser_warn_dist: 0.5,
            low_battery_frac: 0.2,
            w_c: 0.5,
            w_l: 0.02,
            w_e: 1.6,
            w_f: 0.5,
            w_d: 0.1,
            discovery_bonus: 0.1,
            rotation_penalty: 0.5,
            plow: 2.0,
            collision_penalty: 100.0,
            laser_penalty: 2.0,
            global_view: false,
            comm_radius: None,
        }
    }
}

impl WorldConfig {
    /// The reduced arena used for smoke tests and quick experiments.
    pub fn miniature() -> Self {
        WorldConfig {
            area_width: 8.0,
            area_height: 8.0,
            num_muavs: 1,
            num_cuavs: 1,
            num_pois: 20,
            num_obstacles: 2,
            max_steps: 200,
            ..WorldConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: WorldConfig =
            toml::from_str(text).map_err(|e| HgamError::config(format!("world config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HgamError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("world config serializes")
    }

    pub fn num_uavs(&self) -> usize {
        self.num_muavs + self.num_cuavs
    }

    /// View range after applying `global_view`.
    pub fn effective_view_range(&self) -> f64 {
        if self.global_view {
            self.area_width.hypot(self.area_height)
        } else {
            self.view_range
        }
    }

    pub fn energy_budget(&self) -> Quantity {
        Quantity::from_f64(self.initial_energy)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_width", self.area_width),
            ("area_height", self.area_height),
            ("sense_radius", self.sense_radius),
            ("charge_radius", self.charge_radius),
            ("view_range", self.view_range),
            ("uav_radius", self.uav_radius),
            ("poi_radius", self.poi_radius),
            ("step_length", self.step_length),
            ("initial_energy", self.initial_energy),
            ("e_max", self.e_max),
            ("obstacle_radius_min", self.obstacle_radius_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(HgamError::config(format!("{name} must be > 0 (got {v})")));
            }
        }
        let non_negative = [
            ("collect_rate", self.collect_rate),
            ("charge_per_step", self.charge_per_step),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("laser_warn_dist", self.laser_warn_dist),
            ("w_c", self.w_c),
            ("w_l", self.w_l),
            ("w_e", self.w_e),
            ("w_d", self.w_d),
            ("discovery_bonus", self.discovery_bonus),
            ("rotation_penalty", self.rotation_penalty),
            ("plow", self.plow),
            ("collision_penalty", self.collision_penalty),
            ("laser_penalty", self.laser_penalty),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HgamError::config(format!("{name} must be >= 0 (got {v})")));
            }
        }
        if self.view_range < self.sense_radius {
            return Err(HgamError::config("view_range must be >= sense_radius"));
        }
        if self.obstacle_radius_max < self.obstacle_radius_min {
            return Err(HgamError::config("obstacle_radius_max must be >= obstacle_radius_min"));
        }
        if self.max_steps == 0 {
            return Err(HgamError::config("max_steps must be >= 1"));
        }
        if self.num_muavs == 0 {
            return Err(HgamError::config("at least one MUAV is required"));
        }
        if self.num_lasers == 0 {
            return Err(HgamError::config("num_lasers must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.w_f) {
            return Err(HgamError::config("w_f must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.low_battery_frac) {
            return Err(HgamError::config("low_battery_frac must lie in [0, 1]"));
        }
        if 2.0 * self.uav_radius >= self.area_width.min(self.area_height) {
            return Err(HgamError::config("arena is too small for a UAV"));
        }
        if let Some(r) = self.comm_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(HgamError::config("comm_radius must be > 0 when set"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavKind {
    /// Mission UAV: senses and collects PoI data.
    Muav,
    /// Charging UAV: transfers energy to MUAVs.
    Cuav,
}

impl UavKind {
    pub fn index(self) -> usize {
        match self {
            UavKind::Muav => 0,
            UavKind::Cuav => 1,
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            UavKind::Muav => [1.0, 0.0],
            UavKind::Cuav => [0.0, 1.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UavKind::Muav => "muav",
            UavKind::Cuav => "cuav",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UavState {
    pub kind: UavKind,
    pub pos: Vec2,
    /// Displacement applied during the last step.
    pub velocity: Vec2,
    pub energy_remaining: Quantity,
    pub energy_charged: Quantity,
    pub energy_consumed: Quantity,
    pub alive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoiState {
    pub pos: Vec2,
    pub data_initial: Quantity,
    pub data_remaining: Quantity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Collision,
    EnergyDepleted,
    MaxSteps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Collision => "collision",
            Termination::EnergyDepleted => "energy_depleted",
            Termination::MaxSteps => "max_steps",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub config: WorldConfig,
    /// MUAVs first, then CUAVs.
    pub uavs: Vec<UavState>,
    pub pois: Vec<PoiState>,
    pub obstacles: Vec<Obstacle>,
    /// PoIs that have been inside some MUAV's sensing disk this episode.
    pub discovered: Vec<bool>,
    pub t: usize,
    pub done: bool,
    pub termination: Option<Termination>,
    pub seed: u64,
}

impl WorldState {
    pub fn muav_indices(&self) -> std::ops::Range<usize> {
        0..self.config.num_muavs
    }

    pub fn cuav_indices(&self) -> std::ops::Range<usize> {
        self.config.num_muavs..self.uavs.len()
    }

    pub fn kinds(&self) -> Vec<UavKind> {
        self.uavs.iter().map(|u| u.kind).collect()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.uavs.iter().map(|u| u.pos).collect()
    }

    pub fn total_data_initial(&self) -> Quantity {
        self.pois.iter().map(|p| p.data_initial).sum()
    }

    pub fn total_data_remaining(&self) -> Quantity {
        self.pois.iter().map(|p| p.data_remaining).sum()
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Builds a fresh episode. Pure in `(config, seed)`.
pub fn generate_scenario(config: &WorldConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h, ur) = (config.area_width, config.area_height, config.uav_radius);
    let budget = config.energy_budget();

    let mut uavs = Vec::with_capacity(config.num_uavs());
    for i in 0..config.num_uavs() {
        let kind = if i < config.num_muavs { UavKind::Muav } else { UavKind::Cuav };
        let pos = Vec2::new(uniform(&mut rng, ur, w - ur), uniform(&mut rng, ur, h - ur));
        uavs.push(UavState {
            kind,
            pos,
            velocity: Vec2::ZERO,
            energy_remaining: budget,
            energy_charged: Quantity::ZERO,
            energy_consumed: Quantity::ZERO,
            alive: true,
        });
    }

    let mut obstacles = Vec::with_capacity(config.num_obstacles);
    for _ in 0..config.num_obstacles {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let radius = uniform(&mut rng, config.obstacle_radius_min, config.obstacle_radius_max);
            if 2.0 * radius > w.min(h) {
                continue;
            }
            let center = Vec2::new(uniform(&mut rng, radius, w - radius), uniform(&mut rng, radius, h - radius));
            if uavs.iter().all(|u| u.pos.dist(center) >= radius + ur) {
                placed = Some(Obstacle { center, radius });
                break;
            }
        }
        match placed {
            Some(o) => obstacles.push(o),
            None => {
                return Err(HgamError::ScenarioInfeasible { what: "obstacle", attempts: MAX_PLACEMENT_ATTEMPTS })
            }
        }
    }

    let pois = (0..config.num_pois)
        .map(|_| {
            let pos = Vec2::new(uniform(&mut rng, 0.0, w), uniform(&mut rng, 0.0, h));
            let data = Quantity::from_f64(rng.random::<f64>());
            PoiState { pos, data_initial: data, data_remaining: data }
        })
        .collect();

    Ok(WorldState {
        config: config.clone(),
        uavs,
        pois,
        obstacles,
        discovered: vec![false; config.num_pois],
        t: 0,
        done: false,
        termination: None,
        seed,
    })
}

/// Area of the lens where two disks of equal radius `r` intersect.
pub fn circle_overlap_area(c1: Vec2, c2: Vec2, r: f64) -> f64 {
    let d = c1.dist(c2);
    if d >= 2.0 * r {
        return 0.0;
    }
    if d <= 0.0 {
        return PI * r * r;
    }
    let lens = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
    lens.clamp(0.0, PI * r * r)
}
