//! Suite and scenario files.
//!
//! Every length is given in meters (`_m` suffix) and every angle in degrees
//! (`_deg` suffix); the simulator works in millimeters and radians.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use tacman_core::articulation::{generate_playboard, PlayboardConfig};
use tacman_core::baselines::{ComplianceConfig, PreplannedConfig};
use tacman_core::controller::{misalign, ControllerConfig};
use tacman_core::metrics::SuccessCriterion;
use tacman_core::sim::{ContactPolicy, SimConfig};
use tacman_core::{Pose, Trajectory};

const MM: f64 = 1000.0;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{}", parse_message(.scenario_id, .path, .message))]
    Parse {
        scenario_id: Option<String>,
        path: String,
        message: String,
    },
    #[error("scenario {scenario_id}: {field}: {message}")]
    Invalid {
        scenario_id: String,
        field: String,
        message: String,
    },
    #[error("duplicate scenario id {0}")]
    DuplicateId(String),
}

fn parse_message(id: &Option<String>, path: &str, message: &str) -> String {
    match id {
        Some(id) => format!("scenario {id}: field {path}: {message}"),
        None => format!("field {path}: {message}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tacman,
    Preplanned,
    Compliant,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tacman, Method::Preplanned, Method::Compliant];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tacman => "tacman",
            Method::Preplanned => "preplanned",
            Method::Compliant => "compliant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Axis-angle pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub translation_m: [f64; 3],
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub angle_deg: f64,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            translation_m: [0.0; 3],
            axis: default_axis(),
            angle_deg: 0.0,
        }
    }
}

impl PoseSpec {
    pub fn is_identity(&self) -> bool {
        self.translation_m == [0.0; 3] && self.angle_deg == 0.0
    }

    pub fn to_pose(&self) -> Pose {
        Pose::from_axis_angle(&Vector3::from(self.axis), self.angle_deg.to_radians()).with_translation(Vector3::from(self.translation_m) * MM)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Prismatic {
        direction: [f64; 3],
        length_m: f64,
        #[serde(default, skip_serializing_if = "PoseSpec::is_identity")]
        handle: PoseSpec,
    },
    Revolute {
        axis_point_m: [f64; 3],
        axis_dir: [f64; 3],
        span_deg: f64,
        #[serde(default, skip_serializing_if = "PoseSpec::is_identity")]
        handle: PoseSpec,
    },
    Helical {
        axis_point_m: [f64; 3],
        axis_dir: [f64; 3],
        span_deg: f64,
        /// Axial travel per revolution.
        pitch_m: f64,
        #[serde(default, skip_serializing_if = "PoseSpec::is_identity")]
        handle: PoseSpec,
    },
    Bezier {
        control_m: Vec<[f64; 2]>,
        #[serde(default = "default_eta")]
        start: f64,
        #[serde(default, skip_serializing_if = "PoseSpec::is_identity")]
        board: PoseSpec,
    },
    /// Random board drawn by the generator.
    Playboard { order: usize, seed: u64 },
}

fn default_eta() -> f64 {
    PlayboardConfig::default().eta
}

impl TrajectorySpec {
    pub fn build(&self) -> Result<Trajectory, String> {
        let out = match self {
            TrajectorySpec::Prismatic { direction, length_m, handle } => {
                Trajectory::prismatic(handle.to_pose(), Vector3::from(*direction), length_m * MM)
            }
            TrajectorySpec::Revolute {
                axis_point_m,
                axis_dir,
                span_deg,
                handle,
            } => Trajectory::revolute(handle.to_pose(), Vector3::from(*axis_point_m) * MM, Vector3::from(*axis_dir), span_deg.to_radians()),
            TrajectorySpec::Helical {
                axis_point_m,
                axis_dir,
                span_deg,
                pitch_m,
                handle,
            } => Trajectory::helical(
                handle.to_pose(),
                Vector3::from(*axis_point_m) * MM,
                Vector3::from(*axis_dir),
                span_deg.to_radians(),
                pitch_m * MM,
            ),
            TrajectorySpec::Bezier { control_m, start, board } => {
                let control = control_m.iter().map(|c| Vector2::new(c[0], c[1]) * MM).collect();
                Trajectory::bezier(control, board.to_pose(), *start)
            }
            TrajectorySpec::Playboard { order, seed } => generate_playboard(&PlayboardConfig::with_order(*order), *seed),
        };
        out.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspSpec {
    /// Initial normal compression; defaults to the suite setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_m: Option<f64>,
    /// Gripper pose relative to the handle at its start.
    #[serde(default, skip_serializing_if = "PoseSpec::is_identity")]
    pub offset: PoseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessSpec {
    JointAngle { angle_deg: f64 },
    Extension { distance_m: f64 },
    ReachEnd,
}

impl SuccessSpec {
    pub fn criterion(&self) -> SuccessCriterion {
        match self {
            SuccessSpec::JointAngle { angle_deg } => SuccessCriterion::JointAngle(angle_deg.to_radians()),
            SuccessSpec::Extension { distance_m } => SuccessCriterion::Extension(distance_m * MM),
            SuccessSpec::ReachEnd => SuccessCriterion::ReachEnd,
        }
    }
}

/// Preliminary direction in the gripper frame, optionally rotated away from
/// its nominal value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    /// Nominal direction; defaults to the handle's initial motion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub misalign_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misalign_axis: Option<[f64; 3]>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl DirectionSpec {
    pub fn resolve(&self, nominal: Vector3<f64>) -> Vector3<f64> {
        let base = self.vector.map(Vector3::from).unwrap_or(nominal);
        if self.misalign_deg == 0.0 {
            return base;
        }
        let axis = self.misalign_axis.map(Vector3::from).unwrap_or_else(Vector3::z);
        misalign(&base, &axis, self.misalign_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_depth_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_epsilon_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_res: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_pitch_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_frames: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_frames: Option<u32>,
}

impl SimSettings {
    pub fn apply(&self, mut cfg: SimConfig) -> SimConfig {
        if let Some(v) = self.zeta_m {
            cfg.zeta = v * MM;
        }
        if let Some(v) = self.grasp_depth_m {
            cfg.grasp_depth = v * MM;
        }
        if let Some(v) = self.sim_epsilon_m {
            cfg.sim_epsilon = v * MM;
        }
        if let Some(v) = self.n_res {
            cfg.n_res = v;
        }
        if let Some(v) = self.marker_pitch_m {
            cfg.marker_pitch = v * MM;
        }
        if let Some(v) = self.observation_frames {
            cfg.observation_frames = v;
        }
        if let Some(v) = self.reference_frames {
            cfg.reference_frames = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_n_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_s_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_increment_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_violation_streak: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_points: Option<usize>,
}

impl ControllerSettings {
    pub fn apply(&self, mut cfg: ControllerConfig) -> ControllerConfig {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.delta0 {
            cfg.delta0 = v;
        }
        if let Some(v) = self.e_n_m {
            cfg.e_n = v * MM;
        }
        if let Some(v) = self.e_s_m {
            cfg.e_s = v * MM;
        }
        if let Some(v) = self.d_m {
            cfg.d = v * MM;
        }
        if let Some(v) = self.exec_increment_m {
            cfg.exec_increment = Some(v * MM);
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.fail_violation_streak {
            cfg.fail_violation_streak = v;
        }
        if let Some(v) = self.min_points {
            cfg.epsilon_policy.min_points = v;
        }
        cfg
    }

    /// Field-wise overlay: `other` wins where set.
    pub fn merged(&self, other: &ControllerSettings) -> ControllerSettings {
        ControllerSettings {
            alpha: other.alpha.or(self.alpha),
            delta0: other.delta0.or(self.delta0),
            e_n_m: other.e_n_m.or(self.e_n_m),
            e_s_m: other.e_s_m.or(self.e_s_m),
            d_m: other.d_m.or(self.d_m),
            exec_increment_m: other.exec_increment_m.or(self.exec_increment_m),
            max_iterations: other.max_iterations.or(self.max_iterations),
            fail_violation_streak: other.fail_violation_streak.or(self.fail_violation_streak),
            min_points: other.min_points.or(self.min_points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSettings {
    /// Standard deviation of model noise ξ (meters or radians).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preplanned_step_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliant_step_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_compliance_limit_m: Option<f64>,
    /// Fixed radius offset (m) replacing the random draw on revolute models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_offset_m: Option<f64>,
}

impl BaselineSettings {
    pub fn merged(&self, other: &BaselineSettings) -> BaselineSettings {
        BaselineSettings {
            xi_std: other.xi_std.or(self.xi_std),
            preplanned_step_m: other.preplanned_step_m.or(self.preplanned_step_m),
            compliant_step_m: other.compliant_step_m.or(self.compliant_step_m),
            lateral_compliance_limit_m: other.lateral_compliance_limit_m.or(self.lateral_compliance_limit_m),
            radius_offset_m: other.radius_offset_m.or(self.radius_offset_m),
        }
    }

    pub fn xi_std(&self) -> f64 {
        self.xi_std.unwrap_or(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub trajectory: TrajectorySpec,
    #[serde(default, skip_serializing_if = "is_default_grasp")]
    pub grasp: GraspSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<SuccessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preliminary_direction: Option<DirectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineSettings>,
    /// Replaces the suite master seed in this scenario's trial seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn is_default_grasp(g: &GraspSpec) -> bool {
    g == &GraspSpec::default()
}

fn default_methods() -> Vec<Method> {
    vec![Method::Tacman]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "is_default_sim")]
    pub sim: SimSettings,
    #[serde(default, skip_serializing_if = "is_default_controller")]
    pub controller: ControllerSettings,
    #[serde(default, skip_serializing_if = "is_default_baselines")]
    pub baselines: BaselineSettings,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

fn is_default_sim(s: &SimSettings) -> bool {
    s == &SimSettings::default()
}

fn is_default_controller(s: &ControllerSettings) -> bool {
    s == &ControllerSettings::default()
}

fn is_default_baselines(s: &BaselineSettings) -> bool {
    s == &BaselineSettings::default()
}

/// Everything needed to run one scenario, in simulator units.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub id: String,
    pub trajectory: Trajectory,
    pub grasp_offset: Pose,
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub preplanned: PreplannedConfig,
    pub compliance: ComplianceConfig,
    pub xi_std: f64,
    pub radius_offset_m: Option<f64>,
    pub criterion: SuccessCriterion,
    pub direction: DirectionSpec,
    pub methods: Vec<Method>,
    pub seed_base: u64,
}

impl Suite {
    pub fn empty(master_seed: u64) -> Self {
        Self {
            master_seed,
            sim: SimSettings::default(),
            controller: ControllerSettings::default(),
            baselines: BaselineSettings::default(),
            scenarios: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let suite: Suite = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SchemaError::Parse {
                scenario_id: scenario_id_at(text, &path),
                path,
                message: e.into_inner().to_string(),
            }
        })?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.id.as_str()) {
                return Err(SchemaError::DuplicateId(s.id.clone()));
            }
            self.resolve(s)?;
        }
        Ok(())
    }

    /// Applies suite defaults and scenario overrides, then validates.
    pub fn resolve(&self, s: &Scenario) -> Result<ResolvedScenario, SchemaError> {
        let invalid = |field: &str, message: String| SchemaError::Invalid {
            scenario_id: s.id.clone(),
            field: field.to_string(),
            message,
        };
        if s.id.is_empty() {
            return Err(invalid("id", "must not be empty".into()));
        }
        if s.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required".into()));
        }
        let trajectory = s.trajectory.build().map_err(|m| invalid("trajectory", m))?;
        let controller_settings = match &s.controller {
            Some(c) => self.controller.merged(c),
            None => self.controller.clone(),
        };
        let controller = controller_settings.apply(ControllerConfig::default());
        controller.validate().map_err(|e| invalid("controller", e.to_string()))?;

        let mut sim = self.sim.apply(SimConfig::default());
        if let Some(depth) = s.grasp.depth_m {
            sim.grasp_depth = depth * MM;
        }
        sim.contact = ContactPolicy {
            min_points: controller.epsilon_policy.min_points,
            ..sim.contact
        };
        sim.validate(controller.e_n).map_err(|e| invalid("sim", e.to_string()))?;

        let baselines = match &s.baselines {
            Some(b) => self.baselines.merged(b),
            None => self.baselines.clone(),
        };
        let mut preplanned = PreplannedConfig {
            deviation_bound: controller.d,
            max_iterations: controller.max_iterations,
            epsilon_policy: controller.epsilon_policy,
            ..PreplannedConfig::default()
        };
        if let Some(v) = baselines.preplanned_step_m {
            preplanned.step = v * MM;
        }
        preplanned.validate().map_err(|e| invalid("baselines", e.to_string()))?;
        let mut compliance = ComplianceConfig {
            max_iterations: controller.max_iterations,
            ..ComplianceConfig::default()
        };
        if let Some(v) = baselines.compliant_step_m {
            compliance.step = v * MM;
        }
        if let Some(v) = baselines.lateral_compliance_limit_m {
            compliance.lateral_compliance_limit = v * MM;
        }
        compliance.validate().map_err(|e| invalid("baselines", e.to_string()))?;
        if !(baselines.xi_std() >= 0.0) {
            return Err(invalid("baselines.xi_std", "must be non-negative".into()));
        }

        let criterion = s
            .success
            .as_ref()
            .map(SuccessSpec::criterion)
            .unwrap_or_else(|| SuccessCriterion::default_for(&trajectory));
        if !(criterion.expected_distance(&trajectory) > 0.0) {
            return Err(invalid("success", "expected distance must be positive".into()));
        }
        let direction = s.preliminary_direction.clone().unwrap_or_default();
        if let Some(v) = direction.vector {
            if Vector3::from(v).norm() == 0.0 {
                return Err(invalid("preliminary_direction.vector", "must be non-zero".into()));
            }
        }
        let mut methods = s.methods.clone();
        methods.sort();
        methods.dedup();
        Ok(ResolvedScenario {
            id: s.id.clone(),
            trajectory,
            grasp_offset: s.grasp.offset.to_pose(),
            sim,
            controller,
            preplanned,
            compliance,
            xi_std: baselines.xi_std(),
            radius_offset_m: baselines.radius_offset_m,
            criterion,
            direction,
            methods,
            seed_base: s.seed.unwrap_or(self.master_seed),
        })
    }
}

impl Scenario {
    /// Parses a stand-alone scenario object.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let scenario_id = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v.get("id")?.as_str().map(str::to_string));
            SchemaError::Parse {
                scenario_id,
                path,
                message: e.into_inner().to_string(),
            }
        })
    }
}

/// Scenario id owning a JSON path such as `scenarios[3].trajectory`.
fn scenario_id_at(text: &str, path: &str) -> Option<String> {
    let rest = path.strip_prefix("scenarios[")?;
    let index: usize = rest[..rest.find(']')?].parse().ok()?;
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    value.get("scenarios")?.get(index)?.get("id")?.as_str().map(str::to_string)
}
