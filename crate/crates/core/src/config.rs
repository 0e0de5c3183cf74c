//! Scenario configuration files.
//!
//! A config is a TOML document. Every key is optional: the user's tables are
//! merged over the preset for `environment.kind`, so a file only names what it
//! changes. Unknown keys are rejected with their line number.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{Block, TrackObstacle};
use crate::cost::PenaltyMode;
use crate::dynamics::{
    DrivetrainParams, DroneParams, TrackGeometry, TrackSegment, VehicleParams, VehicleState,
};
use crate::sampler::{Algorithm, ControllerSpec};
use crate::valuefn::{CollectConfig, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}{message}", origin.as_deref().map(|p| format!("{p}: ")).unwrap_or_default())]
    Parse {
        message: String,
        origin: Option<String>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    #[default]
    Vehicle,
    Drone,
    /// Scalar contraction with a known value function.
    Oracle,
}

impl EnvKind {
    pub fn state_dim(self) -> usize {
        match self {
            EnvKind::Vehicle => VehicleState::DIM,
            EnvKind::Drone => 6,
            EnvKind::Oracle => 1,
        }
    }
}

/// Closed track: an explicit curvature table, or the built-in circuit when
/// `segments` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub segments: Vec<TrackSegment>,
    pub half_width: f64,
    pub crash_width: f64,
}

impl Default for TrackSection {
    fn default() -> Self {
        let t = TrackGeometry::synthetic_circuit();
        Self {
            segments: Vec::new(),
            half_width: t.half_width,
            crash_width: t.crash_width,
        }
    }
}

impl TrackSection {
    pub fn geometry(&self) -> Result<TrackGeometry, ConfigError> {
        let segments = if self.segments.is_empty() {
            TrackGeometry::synthetic_circuit().segments().to_vec()
        } else {
            self.segments.clone()
        };
        TrackGeometry::new(segments, self.half_width, self.crash_width)
            .map_err(|e| ConfigError::Invalid(format!("environment.vehicle.track: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub params: VehicleParams,
    pub drivetrain: DrivetrainParams,
    pub track: TrackSection,
    pub obstacles: Vec<TrackObstacle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroneSection {
    pub params: DroneParams,
    pub blocks: Vec<Block>,
    pub start: Vec<f64>,
    pub goal_x: f64,
}

impl Default for DroneSection {
    fn default() -> Self {
        Self {
            params: DroneParams::default(),
            blocks: vec![
                Block {
                    x_min: 3.0,
                    x_max: 4.0,
                    z_min: 0.9,
                    z_max: 4.0,
                },
                Block {
                    x_min: 6.5,
                    x_max: 7.5,
                    z_min: 0.8,
                    z_max: 4.0,
                },
            ],
            start: vec![0.0, 1.5, 2.0, 0.0, 0.0, 0.0],
            goal_x: 9.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub kind: EnvKind,
    /// Vehicle start speed, m/s.
    pub start_speed: f64,
    /// Per-state std of the additive plant disturbance; empty for none.
    pub disturbance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drone: Option<DroneSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    /// Diagonal state weights.
    pub weights: Vec<f64>,
    pub target: Vec<f64>,
    /// Collision weight for MPPI and CEM.
    pub collision: f64,
    /// Barrier penalty weight for the barrier variants.
    pub barrier: f64,
    pub penalty: PenaltyMode,
    pub adversarial: bool,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            weights: Vec::new(),
            target: Vec::new(),
            collision: 1000.0,
            barrier: 1000.0,
            penalty: PenaltyMode::Both,
            adversarial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierSection {
    /// Class-kappa slope `a` in `B(x') - B(x) <= -a B(x)`.
    pub decay: f64,
    /// Learned model file; trained in-process when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self {
            decay: 0.1,
            model: None,
        }
    }
}

/// Shield-MPPI settings of the data-collection policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectorSection {
    pub samples: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for CollectorSection {
    fn default() -> Self {
        Self {
            samples: 50,
            horizon: 20,
            seed: 99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub collector: CollectorSection,
    pub collect: CollectConfig,
    pub fit: TrainConfig,
}

/// Controller variant: an algorithm, optionally with resampling-based
/// rollouts. Written as e.g. `shield-mppi+rbr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variant {
    pub algorithm: Algorithm,
    pub rbr: bool,
}

impl Variant {
    pub fn new(algorithm: Algorithm, rbr: bool) -> Self {
        Self { algorithm, rbr }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.algorithm.label())?;
        if self.rbr {
            f.write_str("+rbr")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (alg, rbr) = match s.strip_suffix("+rbr") {
            Some(a) => (a, true),
            None => (s, false),
        };
        Ok(Self::new(alg.parse()?, rbr))
    }
}

impl TryFrom<String> for Variant {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    #[default]
    TargetVelocity,
    Horizon,
    Samples,
    /// Each configured variant is one value.
    Algorithm,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::TargetVelocity => "target-velocity",
            SweepParameter::Horizon => "horizon",
            SweepParameter::Samples => "samples",
            SweepParameter::Algorithm => "algorithm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub episode_steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
    /// Control updates excluded from timing.
    pub warmup_steps: usize,
    pub timing_steps: usize,
    pub histogram_bins: usize,
    pub sweep: SweepSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            episode_steps: 500,
            trials: 20,
            seed: 0,
            variants: vec![
                Variant::new(Algorithm::Mppi, false),
                Variant::new(Algorithm::ShieldMppi, false),
                Variant::new(Algorithm::NsMppi, false),
            ],
            warmup_steps: 10,
            timing_steps: 100,
            histogram_bins: 10,
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub environment: EnvironmentSection,
    pub controller: ControllerSpec,
    pub cost: CostSection,
    pub barrier: BarrierSection,
    pub training: TrainingSection,
    pub experiment: ExperimentSection,
}

impl ScenarioConfig {
    /// Rally car on the built-in circuit at 10 m/s.
    pub fn vehicle() -> Self {
        let mut weights = vec![0.0; VehicleState::DIM];
        let mut target = vec![0.0; VehicleState::DIM];
        weights[VehicleState::V_X] = 1.0;
        weights[VehicleState::E_Y] = 5.0;
        weights[VehicleState::E_PSI] = 5.0;
        target[VehicleState::V_X] = 10.0;
        Self {
            environment: EnvironmentSection {
                kind: EnvKind::Vehicle,
                start_speed: 10.0,
                disturbance: Vec::new(),
                vehicle: Some(VehicleSection::default()),
                drone: None,
            },
            controller: ControllerSpec::new(Algorithm::Mppi, 25, 100, vec![0.15, 0.4]),
            cost: CostSection {
                weights,
                target,
                ..Default::default()
            },
            barrier: BarrierSection::default(),
            training: TrainingSection {
                collector: CollectorSection::default(),
                collect: CollectConfig {
                    episodes: 100,
                    horizon: 100,
                    seed: 1,
                    ..Default::default()
                },
                fit: TrainConfig {
                    gamma: 0.99,
                    hidden: vec![16, 16],
                    learning_rate: 3e-3,
                    batch_size: 64,
                    epochs: 60,
                    target_refresh: 100,
                    final_lr_fraction: 0.1,
                    seed: 3,
                },
            },
            experiment: ExperimentSection {
                sweep: SweepSection {
                    parameter: SweepParameter::TargetVelocity,
                    values: vec![6.0, 8.0, 10.0],
                },
                ..Default::default()
            },
        }
    }

    /// Planar quadrotor through a two-block corridor.
    pub fn drone() -> Self {
        let drone = DroneSection::default();
        let hover = drone.params.hover_thrust();
        let mut controller = ControllerSpec::new(Algorithm::Mppi, 10, 100, vec![2.0, 2.0]);
        controller.temperature = 0.1;
        controller.nominal = vec![hover, hover];
        Self {
            environment: EnvironmentSection {
                kind: EnvKind::Drone,
                start_speed: drone.start[2],
                disturbance: Vec::new(),
                vehicle: None,
                drone: Some(drone.clone()),
            },
            controller,
            cost: CostSection {
                weights: vec![0.0, 2.0, 1.0, 0.5, 1.0, 0.1],
                target: drone.start.clone(),
                ..Default::default()
            },
            barrier: BarrierSection::default(),
            training: TrainingSection {
                collector: CollectorSection {
                    samples: 50,
                    horizon: 10,
                    seed: 99,
                },
                collect: CollectConfig {
                    episodes: 300,
                    horizon: 150,
                    seed: 1,
                    ..Default::default()
                },
                fit: TrainConfig {
                    gamma: 0.98,
                    hidden: vec![32, 32],
                    learning_rate: 3e-3,
                    batch_size: 64,
                    epochs: 80,
                    target_refresh: 25,
                    final_lr_fraction: 0.1,
                    seed: 3,
                },
            },
            experiment: ExperimentSection {
                episode_steps: 400,
                sweep: SweepSection {
                    parameter: SweepParameter::Horizon,
                    values: vec![6.0, 10.0, 15.0, 20.0],
                },
                ..Default::default()
            },
        }
    }

    /// The scalar system whose value function is known in closed form.
    pub fn oracle() -> Self {
        Self {
            environment: EnvironmentSection {
                kind: EnvKind::Oracle,
                ..Default::default()
            },
            controller: ControllerSpec::new(Algorithm::Mppi, 10, 100, vec![1.0]),
            cost: CostSection {
                weights: vec![1.0],
                target: vec![0.0],
                collision: 10.0,
                barrier: 10.0,
                ..Default::default()
            },
            barrier: BarrierSection::default(),
            training: TrainingSection {
                collector: CollectorSection::default(),
                collect: CollectConfig {
                    episodes: 1000,
                    horizon: 4,
                    seed: 1,
                    ..Default::default()
                },
                fit: TrainConfig {
                    gamma: 0.9,
                    hidden: vec![32, 32],
                    learning_rate: 3e-3,
                    batch_size: 64,
                    epochs: 100,
                    target_refresh: 100,
                    final_lr_fraction: 0.03,
                    seed: 7,
                },
            },
            experiment: ExperimentSection {
                episode_steps: 50,
                sweep: SweepSection {
                    parameter: SweepParameter::Samples,
                    values: vec![25.0, 50.0, 100.0, 200.0],
                },
                ..Default::default()
            },
        }
    }

    pub fn preset(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Vehicle => Self::vehicle(),
            EnvKind::Drone => Self::drone(),
            EnvKind::Oracle => Self::oracle(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, Some(&path.display().to_string()))
    }

    /// Parses `text` and merges it over the preset for its environment kind.
    pub fn parse(text: &str, origin: Option<&str>) -> Result<Self, ConfigError> {
        let parse_err = |e: toml::de::Error| ConfigError::Parse {
            message: e.to_string(),
            origin: origin.map(str::to_owned),
        };
        // the strict pass reports unknown keys and type errors with their line
        let strict: ScenarioConfig = toml::from_str(text).map_err(parse_err)?;
        let user: toml::Table = toml::from_str(text).map_err(parse_err)?;
        let mut merged = toml::Table::try_from(Self::preset(strict.environment.kind))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: ScenarioConfig = merged.try_into().map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn control_dim(&self) -> usize {
        match self.environment.kind {
            EnvKind::Vehicle | EnvKind::Drone => 2,
            EnvKind::Oracle => 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.training;
        let seeds = [
            ("controller.seed", self.controller.seed),
            ("training.collector.seed", t.collector.seed),
            ("training.collect.seed", t.collect.seed),
            ("training.fit.seed", t.fit.seed),
            ("experiment.seed", self.experiment.seed),
        ];
        // TOML integers are signed 64-bit
        if let Some((name, seed)) = seeds.iter().find(|(_, s)| *s > i64::MAX as u64) {
            return invalid(format!("{name} = {seed} exceeds {}", i64::MAX));
        }
        let env = &self.environment;
        let n = env.kind.state_dim();
        match env.kind {
            EnvKind::Vehicle => {
                let Some(v) = &env.vehicle else {
                    return invalid("kind = \"vehicle\" needs an [environment.vehicle] section");
                };
                v.params.validate().map_err(|e| {
                    ConfigError::Invalid(format!("environment.vehicle.params: {e}"))
                })?;
                v.drivetrain.validate().map_err(|e| {
                    ConfigError::Invalid(format!("environment.vehicle.drivetrain: {e}"))
                })?;
                v.track.geometry()?;
                if v.obstacles
                    .iter()
                    .any(|o| !(o.radius > 0.0 && o.s.is_finite() && o.e_y.is_finite()))
                {
                    return invalid(
                        "environment.vehicle.obstacles need a positive radius and finite center",
                    );
                }
                if !(env.start_speed.is_finite() && env.start_speed >= 0.0) {
                    return invalid(format!(
                        "environment.start_speed must be >= 0, got {}",
                        env.start_speed
                    ));
                }
            }
            EnvKind::Drone => {
                let Some(d) = &env.drone else {
                    return invalid("kind = \"drone\" needs an [environment.drone] section");
                };
                d.params
                    .validate()
                    .map_err(|e| ConfigError::Invalid(format!("environment.drone.params: {e}")))?;
                if d.start.len() != n || d.start.iter().any(|v| !v.is_finite()) {
                    return invalid(format!("environment.drone.start needs {n} finite entries"));
                }
                if !(d.goal_x > d.start[0]) {
                    return invalid("environment.drone.goal_x must lie ahead of the start");
                }
                if d.blocks
                    .iter()
                    .any(|b| !(b.x_min < b.x_max && b.z_min < b.z_max))
                {
                    return invalid(
                        "environment.drone.blocks need x_min < x_max and z_min < z_max",
                    );
                }
            }
            EnvKind::Oracle => {}
        }
        if env.vehicle.is_some() && env.kind != EnvKind::Vehicle {
            return invalid("[environment.vehicle] is only valid with kind = \"vehicle\"");
        }
        if env.drone.is_some() && env.kind != EnvKind::Drone {
            return invalid("[environment.drone] is only valid with kind = \"drone\"");
        }
        if !env.disturbance.is_empty() && env.disturbance.len() != n {
            return invalid(format!("environment.disturbance needs 0 or {n} entries"));
        }
        if env
            .disturbance
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return invalid("environment.disturbance entries must be >= 0");
        }

        self.controller
            .validate(self.control_dim())
            .map_err(|e| ConfigError::Invalid(format!("controller: {e}")))?;

        let cost = &self.cost;
        if cost.weights.len() != n || cost.target.len() != n {
            return invalid(format!(
                "cost.weights and cost.target need {n} entries each"
            ));
        }
        crate::cost::QuadraticCost::new(cost.weights.clone(), cost.target.clone())
            .map_err(|e| ConfigError::Invalid(format!("cost: {e}")))?;
        for (name, w) in [("collision", cost.collision), ("barrier", cost.barrier)] {
            if !(w.is_finite() && w > 0.0) {
                return invalid(format!("cost.{name} must be > 0, got {w}"));
            }
        }

        if !(self.barrier.decay > 0.0 && self.barrier.decay < 1.0) {
            return invalid(format!(
                "barrier.decay must be in (0, 1), got {}",
                self.barrier.decay
            ));
        }

        let t = &self.training;
        if t.collector.samples == 0 || t.collector.horizon == 0 {
            return invalid("training.collector samples and horizon must be >= 1");
        }
        if t.collect.episodes == 0 || t.collect.horizon == 0 {
            return invalid("training.collect episodes and horizon must be >= 1");
        }
        if t.collect.extra_starts.iter().any(|s| s.len() != n) {
            return invalid(format!(
                "training.collect.extra_starts entries need {n} values"
            ));
        }
        t.fit
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("training.fit: {e}")))?;

        let x = &self.experiment;
        if x.trials == 0 {
            return invalid("experiment.trials must be >= 1");
        }
        if x.variants.is_empty() {
            return invalid("experiment.variants must name at least one controller");
        }
        if x.histogram_bins < 2 {
            return invalid("experiment.histogram_bins must be >= 2");
        }
        if x.timing_steps == 0 {
            return invalid("experiment.timing_steps must be >= 1");
        }
        let sweep = &x.sweep;
        match sweep.parameter {
            SweepParameter::Algorithm => {}
            _ if sweep.values.is_empty() => {
                return invalid("experiment.sweep.values must not be empty")
            }
            SweepParameter::TargetVelocity => {
                if sweep.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return invalid("target velocities must be >= 0");
                }
            }
            SweepParameter::Horizon | SweepParameter::Samples => {
                if sweep
                    .values
                    .iter()
                    .any(|v| !(*v >= 1.0 && v.fract() == 0.0))
                {
                    return invalid("horizon and sample sweeps need positive integer values");
                }
            }
        }
        Ok(())
    }
}

/// Overlays `user` on `base`, recursing into tables; other values replace.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for kind in [EnvKind::Vehicle, EnvKind::Drone, EnvKind::Oracle] {
            ScenarioConfig::preset(kind).validate().unwrap();
        }
    }

    #[test]
    fn empty_file_is_vehicle_preset() {
        assert_eq!(
            ScenarioConfig::parse("", None).unwrap(),
            ScenarioConfig::vehicle()
        );
    }

    #[test]
    fn partial_tables_merge_over_preset() {
        let text = "[environment]\nkind = \"drone\"\n[controller]\nhorizon = 15\n[environment.drone.params]\nmass = 1.2\n";
        let cfg = ScenarioConfig::parse(text, None).unwrap();
        let preset = ScenarioConfig::drone();
        assert_eq!(cfg.controller.horizon, 15);
        assert_eq!(cfg.controller.samples, preset.controller.samples);
        assert_eq!(cfg.controller.nominal, preset.controller.nominal);
        let drone = cfg.environment.drone.unwrap();
        assert_eq!(drone.params.mass, 1.2);
        assert_eq!(drone.blocks, preset.environment.drone.unwrap().blocks);
    }

    #[test]
    fn unknown_key_names_its_line() {
        let err = ScenarioConfig::parse("[controller]\nhorizon = 5\nsamplez = 3\n", Some("x.toml"))
            .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("x.toml") && msg.contains("line 3") && msg.contains("samplez"),
            "{msg}"
        );
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[experiment]\ntrials = 0\n",
            "[barrier]\ndecay = 1.0\n",
            "[experiment]\nseed = 9223372036854775808\n",
            "[cost]\nweights = [1.0]\n",
            "[controller]\nnoise_std = [0.1]\n",
            "[environment]\nkind = \"oracle\"\n[environment.drone]\ngoal_x = 3.0\n",
            "[experiment.sweep]\nparameter = \"horizon\"\nvalues = [2.5]\n",
            "[experiment]\nvariants = [\"mppi+rbr\", \"fast\"]\n",
        ] {
            assert!(ScenarioConfig::parse(text, None).is_err(), "{text}");
        }
    }

    #[test]
    fn effective_config_round_trips() {
        for kind in [EnvKind::Vehicle, EnvKind::Drone, EnvKind::Oracle] {
            let cfg = ScenarioConfig::preset(kind);
            let once = ScenarioConfig::parse(&cfg.to_toml(), None).unwrap();
            assert_eq!(once, cfg);
            assert_eq!(once.to_toml(), cfg.to_toml());
        }
        let mut custom = ScenarioConfig::vehicle();
        custom.barrier.model = Some("net.bin".into());
        custom.experiment.variants = vec!["shield-mppi+rbr".parse().unwrap()];
        custom
            .environment
            .vehicle
            .as_mut()
            .unwrap()
            .obstacles
            .push(TrackObstacle {
                s: 30.0,
                e_y: 0.5,
                radius: 0.4,
            });
        assert_eq!(
            ScenarioConfig::parse(&custom.to_toml(), None).unwrap(),
            custom
        );
    }

    #[test]
    fn variant_strings() {
        let v: Variant = "ns-mppi+rbr".parse().unwrap();
        assert_eq!(v, Variant::new(Algorithm::NsMppi, true));
        assert_eq!(v.to_string(), "ns-mppi+rbr");
        assert!("mppi+".parse::<Variant>().is_err());
    }
}
