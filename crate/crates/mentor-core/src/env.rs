//! Kinematic manipulation environment with sparse goal rewards.
//!
//! Two tasks are provided: `push_button` (move the gripper tip onto a button)
//! and `lift_object` (grasp a target object and raise it clear of its rest
//! pose). There is no physics: motion is axis-aligned translation clamped to
//! the workspace, and grasping is radius-based attachment.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// A point in workspace coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn axis_mut(&mut self, axis: Axis) -> &mut f64 {
        match axis {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
            Axis::Z => &mut self.z,
        }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl TryFrom<[f64; 3]> for Vec3 {
    type Error = String;

    fn try_from(a: [f64; 3]) -> std::result::Result<Self, String> {
        let v = Vec3::new(a[0], a[1], a[2]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite coordinate in {a:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Axis-aligned box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
            && self.min.z <= self.max.z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )
    }

    pub fn extent(&self, axis: Axis) -> f64 {
        self.max.axis(axis) - self.min.axis(axis)
    }

    /// Uniform sample; degenerate axes consume no randomness.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let mut p = self.min;
        for axis in Axis::ALL {
            let (lo, hi) = (self.min.axis(axis), self.max.axis(axis));
            *p.axis_mut(axis) = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        p
    }
}

// ---------------------------------------------------------------------------
// Scene state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Unique symbolic name, e.g. "button1" or "umbrella".
    pub id: String,
    pub position: Vec3,
    pub graspable: bool,
    /// Optional goal region for tasks defined by placement rather than a
    /// radius/height predicate. Unused by the two built-in tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_zone: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub position: Vec3,
    pub open: bool,
    /// Nearest object within the sensing radius, if any.
    pub detected: Option<String>,
    /// Object currently held. Implies `!open` and `detected == grasped`.
    pub grasped: Option<String>,
}

/// One of 8 discrete controls: a +/- delta translation per axis, or an
/// open/close of the gripper. The step length delta comes from the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    IncX,
    DecX,
    IncY,
    DecY,
    IncZ,
    DecZ,
    OpenGripper,
    CloseGripper,
}

impl Action {
    /// Fixed ordering; also the greedy tie-break order.
    pub const ALL: [Action; 8] = [
        Action::IncX,
        Action::DecX,
        Action::IncY,
        Action::DecY,
        Action::IncZ,
        Action::DecZ,
        Action::OpenGripper,
        Action::CloseGripper,
    ];

    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        Action::ALL.iter().position(|a| *a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::IncX => "+x",
            Action::DecX => "-x",
            Action::IncY => "+y",
            Action::DecY => "-y",
            Action::IncZ => "+z",
            Action::DecZ => "-z",
            Action::OpenGripper => "open",
            Action::CloseGripper => "close",
        }
    }

    pub fn from_label(s: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.label() == s)
    }

    /// Translation axis and sign for movement actions.
    pub fn translation(self) -> Option<(Axis, f64)> {
        match self {
            Action::IncX => Some((Axis::X, 1.0)),
            Action::DecX => Some((Axis::X, -1.0)),
            Action::IncY => Some((Axis::Y, 1.0)),
            Action::DecY => Some((Axis::Y, -1.0)),
            Action::IncZ => Some((Axis::Z, 1.0)),
            Action::DecZ => Some((Axis::Z, -1.0)),
            Action::OpenGripper | Action::CloseGripper => None,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The agent-visible state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub gripper: GripperState,
    pub objects: Vec<SceneObject>,
    pub step_index: u32,
}

impl Observation {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Resolve "gripper" or an object id to a position.
    pub fn position_of(&self, name: &str) -> Option<Vec3> {
        if name == "gripper" {
            Some(self.gripper.position)
        } else {
            self.object(name).map(|o| o.position)
        }
    }

    /// Nearest object to the gripper among those satisfying `pred`, with its
    /// distance. Ties go to scene order.
    pub fn nearest_object<F>(&self, pred: F) -> Option<(&SceneObject, f64)>
    where
        F: Fn(&SceneObject) -> bool,
    {
        let g = self.gripper.position;
        let mut best: Option<(&SceneObject, f64)> = None;
        for o in self.objects.iter().filter(|o| pred(o)) {
            let d = g.distance(o.position);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((o, d));
            }
        }
        best
    }
}

/// One environment step: `(before, action, after, r_env, terminal)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub before: Observation,
    pub action: Action,
    pub after: Observation,
    pub r_env: f64,
    pub terminal: bool,
}

// ---------------------------------------------------------------------------
// Task specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    PushButton,
    LiftObject,
}

impl std::fmt::Display for TaskName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskName::PushButton => f.write_str("push_button"),
            TaskName::LiftObject => f.write_str("lift_object"),
        }
    }
}

impl std::str::FromStr for TaskName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "push_button" => Ok(TaskName::PushButton),
            "lift_object" => Ok(TaskName::LiftObject),
            other => Err(format!("unknown task '{other}' (expected push_button or lift_object)")),
        }
    }
}

fn default_goal_reward() -> f64 {
    100.0
}
fn default_max_episode_length() -> u32 {
    100
}
fn default_delta() -> f64 {
    0.05
}
fn default_grasp_radius() -> f64 {
    0.08
}
fn default_press_radius() -> f64 {
    0.08
}
fn default_lift_threshold() -> f64 {
    0.25
}
fn default_sensing_radius() -> f64 {
    0.12
}
fn default_workspace() -> Aabb {
    Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0))
}

/// Everything that defines a task: geometry, spawn ranges and the goal
/// predicate parameters. Validated once at construction or load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: TaskName,
    #[serde(default = "default_goal_reward")]
    pub goal_reward: f64,
    #[serde(default = "default_max_episode_length")]
    pub max_episode_length: u32,
    /// Step length of the translation actions, meters.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_grasp_radius")]
    pub grasp_radius: f64,
    #[serde(default = "default_press_radius")]
    pub press_radius: f64,
    /// Required height gain above rest height for `lift_object`.
    #[serde(default = "default_lift_threshold")]
    pub lift_threshold: f64,
    #[serde(default = "default_sensing_radius")]
    pub sensing_radius: f64,
    #[serde(default = "default_workspace")]
    pub workspace: Aabb,
    /// Gripper start pose; defaults to the workspace center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<Vec3>,
    /// Spawn range per object id. Iterated in id order when placing objects,
    /// so layout is a pure function of the seed.
    pub spawn: BTreeMap<String, Aabb>,
    /// Target object for `lift_object`. May be omitted when the scene has a
    /// single object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl TaskSpec {
    /// Built-in `push_button` scene: two buttons on the table plane, with
    /// the gripper starting high above them so that unguided exploration
    /// rarely stumbles onto a press.
    pub fn push_button() -> TaskSpec {
        let range = Aabb::new(Vec3::new(0.15, 0.15, 0.05), Vec3::new(0.85, 0.85, 0.05));
        let mut spawn = BTreeMap::new();
        spawn.insert("button1".to_string(), range);
        spawn.insert("button2".to_string(), range);
        let spec = TaskSpec {
            name: TaskName::PushButton,
            goal_reward: default_goal_reward(),
            max_episode_length: default_max_episode_length(),
            delta: default_delta(),
            grasp_radius: default_grasp_radius(),
            press_radius: 0.06,
            lift_threshold: default_lift_threshold(),
            sensing_radius: default_sensing_radius(),
            workspace: default_workspace(),
            home: Some(Vec3::new(0.5, 0.5, 0.9)),
            spawn,
            target: None,
        };
        spec.validate().expect("built-in task is valid");
        spec
    }

    /// The built-in scene for a task name.
    pub fn built_in(name: TaskName) -> TaskSpec {
        match name {
            TaskName::PushButton => TaskSpec::push_button(),
            TaskName::LiftObject => TaskSpec::lift_object(),
        }
    }

    /// Built-in `lift_object` scene: an umbrella resting in its stand.
    pub fn lift_object() -> TaskSpec {
        let mut spawn = BTreeMap::new();
        spawn.insert(
            "umbrella".to_string(),
            Aabb::new(Vec3::new(0.2, 0.2, 0.05), Vec3::new(0.8, 0.8, 0.05)),
        );
        let spec = TaskSpec {
            name: TaskName::LiftObject,
            goal_reward: default_goal_reward(),
            max_episode_length: default_max_episode_length(),
            delta: default_delta(),
            grasp_radius: 0.10,
            press_radius: default_press_radius(),
            lift_threshold: default_lift_threshold(),
            sensing_radius: default_sensing_radius(),
            workspace: default_workspace(),
            home: None,
            spawn,
            target: Some("umbrella".to_string()),
        };
        spec.validate().expect("built-in task is valid");
        spec
    }

    pub fn by_name(name: TaskName) -> TaskSpec {
        match name {
            TaskName::PushButton => TaskSpec::push_button(),
            TaskName::LiftObject => TaskSpec::lift_object(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.goal_reward.is_finite() || self.goal_reward <= 0.0 {
            return Err(Error::invalid_config("task.goal_reward", "must be > 0"));
        }
        if self.max_episode_length == 0 {
            return Err(Error::invalid_config("task.max_episode_length", "must be > 0"));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::invalid_config("task.delta", "must be > 0"));
        }
        for (key, v) in [
            ("task.grasp_radius", self.grasp_radius),
            ("task.press_radius", self.press_radius),
            ("task.lift_threshold", self.lift_threshold),
            ("task.sensing_radius", self.sensing_radius),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid_config(key, "must be > 0"));
            }
        }
        if !self.workspace.is_valid() {
            return Err(Error::invalid_config(
                "task.workspace",
                "min must be <= max componentwise",
            ));
        }
        if self.spawn.is_empty() {
            return Err(Error::invalid_config("task.spawn", "at least one object required"));
        }
        if let Some(home) = self.home {
            if !self.workspace.contains(home) {
                return Err(Error::invalid_config(
                    "task.home",
                    "must lie inside the workspace",
                ));
            }
        }
        for (id, range) in &self.spawn {
            if !range.is_valid() {
                return Err(Error::invalid_config(
                    format!("task.spawn.{id}"),
                    "min must be <= max componentwise",
                ));
            }
            if !self.workspace.contains_box(range) {
                return Err(Error::invalid_config(
                    format!("task.spawn.{id}"),
                    "spawn range must lie inside the workspace",
                ));
            }
        }
        if self.name == TaskName::LiftObject {
            match &self.target {
                Some(t) if !self.spawn.contains_key(t) => {
                    return Err(Error::invalid_config(
                        "task.target",
                        format!("'{t}' has no spawn range"),
                    ));
                }
                None if self.spawn.len() != 1 => {
                    return Err(Error::invalid_config(
                        "task.target",
                        "required when the scene has more than one object",
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Gripper start pose: `home` if set, the workspace center otherwise.
    pub fn home_position(&self) -> Vec3 {
        self.home.unwrap_or_else(|| self.workspace.center())
    }

    /// Height an object returns to when released: the floor of its spawn
    /// range. The built-in scenes use degenerate z ranges, so this is also
    /// the height the object spawned at.
    pub fn rest_height(&self, id: &str) -> Option<f64> {
        self.spawn.get(id).map(|b| b.min.z)
    }

    /// Target object id for `lift_object`. `None` for `push_button`, where
    /// any button counts and the nearest one is the working target.
    pub fn target_id(&self) -> Option<&str> {
        match self.name {
            TaskName::PushButton => None,
            TaskName::LiftObject => self
                .target
                .as_deref()
                .or_else(|| self.spawn.keys().next().map(|s| s.as_str())),
        }
    }

    pub fn is_graspable(&self, id: &str) -> bool {
        match self.name {
            TaskName::PushButton => false,
            TaskName::LiftObject => self.target_id() == Some(id),
        }
    }

    /// The object the agent should currently care about: the nearest button
    /// for `push_button`, the lift target for `lift_object`.
    pub fn target_object<'a>(&self, obs: &'a Observation) -> Option<&'a SceneObject> {
        match self.name {
            TaskName::PushButton => obs.nearest_object(|_| true).map(|(o, _)| o),
            TaskName::LiftObject => self.target_id().and_then(|id| obs.object(id)),
        }
    }

    /// One-sentence task background for prompts.
    pub fn description(&self) -> String {
        match self.name {
            TaskName::PushButton => format!(
                "A robot gripper must push a button: the episode succeeds once the \
                 gripper tip comes within {:.3} m of any button.",
                self.press_radius
            ),
            TaskName::LiftObject => format!(
                "A robot gripper must take the {} out of its stand: approach it, \
                 grasp it, and lift it at least {:.3} m above its rest height.",
                self.target_id().unwrap_or("object"),
                self.lift_threshold
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

/// Place objects and the gripper for a new episode. Identical seeds yield
/// bitwise-identical observations.
pub fn reset(task: &TaskSpec, seed: u64) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = task
        .spawn
        .iter()
        .map(|(id, range)| SceneObject {
            id: id.clone(),
            position: range.sample(&mut rng),
            graspable: task.is_graspable(id),
            goal_zone: None,
        })
        .collect();
    Observation {
        gripper: GripperState {
            position: task.home_position(),
            open: true,
            detected: None,
            grasped: None,
        },
        objects,
        step_index: 0,
    }
}

/// Goal predicate. `push_button`: gripper within press radius of any button.
/// `lift_object`: target grasped and raised past rest height + threshold.
pub fn goal_reached(state: &Observation, task: &TaskSpec) -> bool {
    match task.name {
        TaskName::PushButton => {
            let g = state.gripper.position;
            state
                .objects
                .iter()
                .any(|o| g.distance(o.position) <= task.press_radius)
        }
        TaskName::LiftObject => {
            let Some(target) = task.target_id() else {
                return false;
            };
            if state.gripper.grasped.as_deref() != Some(target) {
                return false;
            }
            match (state.object(target), task.rest_height(target)) {
                (Some(o), Some(rest)) => o.position.z > rest + task.lift_threshold,
                _ => false,
            }
        }
    }
}

/// True once the goal is reached or the step cap is hit.
pub fn is_terminal(state: &Observation, task: &TaskSpec) -> bool {
    state.step_index >= task.max_episode_length || goal_reached(state, task)
}

/// Advance one step. Movement translates the gripper by +/- delta along one
/// axis, clamped to the workspace; a grasped object tracks the gripper.
/// CloseGripper attaches the nearest graspable object within grasp radius;
/// OpenGripper releases, dropping the object to its rest height.
pub fn step(state: &Observation, action: Action, task: &TaskSpec) -> Result<Transition> {
    if is_terminal(state, task) {
        return Err(Error::TerminalStep {
            step_index: state.step_index,
        });
    }

    let mut gripper = state.gripper.clone();
    let mut objects = state.objects.clone();

    match action {
        _ if action.translation().is_some() => {
            let (axis, sign) = action.translation().unwrap();
            *gripper.position.axis_mut(axis) += sign * task.delta;
            gripper.position = task.workspace.clamp(gripper.position);
            if let Some(held) = &gripper.grasped {
                if let Some(obj) = objects.iter_mut().find(|o| &o.id == held) {
                    obj.position = gripper.position;
                }
            }
        }
        Action::OpenGripper => {
            gripper.open = true;
            if let Some(held) = gripper.grasped.take() {
                if let Some(obj) = objects.iter_mut().find(|o| o.id == held) {
                    // Released object keeps x,y and falls back to rest height.
                    obj.position.z = task.rest_height(&held).unwrap_or(obj.position.z);
                }
            }
        }
        Action::CloseGripper => {
            gripper.open = false;
            if gripper.grasped.is_none() {
                let g = gripper.position;
                let candidate = objects
                    .iter()
                    .filter(|o| o.graspable && g.distance(o.position) <= task.grasp_radius)
                    .min_by(|a, b| {
                        g.distance(a.position)
                            .partial_cmp(&g.distance(b.position))
                            .unwrap()
                    })
                    .map(|o| o.id.clone());
                if let Some(id) = candidate {
                    if let Some(obj) = objects.iter_mut().find(|o| o.id == id) {
                        obj.position = gripper.position;
                    }
                    gripper.grasped = Some(id);
                }
            }
        }
        _ => unreachable!(),
    }

    // A held object is always the detected one; otherwise sense the nearest
    // object within range.
    gripper.detected = match &gripper.grasped {
        Some(held) => Some(held.clone()),
        None => {
            let g = gripper.position;
            objects
                .iter()
                .map(|o| (o, g.distance(o.position)))
                .filter(|(_, d)| *d <= task.sensing_radius)
                .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .map(|(o, _)| o.id.clone())
        }
    };

    let after = Observation {
        gripper,
        objects,
        step_index: state.step_index + 1,
    };
    let goal = goal_reached(&after, task);
    let r_env = if goal { task.goal_reward } else { 0.0 };
    let terminal = goal || after.step_index >= task.max_episode_length;

    Ok(Transition {
        before: state.clone(),
        action,
        after,
        r_env,
        terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs_at(task: &TaskSpec, pos: Vec3) -> Observation {
        let mut obs = reset(task, 7);
        obs.gripper.position = pos;
        obs
    }

    #[test]
    fn reset_is_deterministic() {
        let task = TaskSpec::push_button();
        assert_eq!(reset(&task, 7), reset(&task, 7));
    }

    #[test]
    fn reset_seeds_differ() {
        let task = TaskSpec::push_button();
        let a = reset(&task, 7);
        let b = reset(&task, 8);
        assert_ne!(
            a.objects[0].position, b.objects[0].position,
            "different seeds should place buttons differently"
        );
    }

    #[test]
    fn reset_home_state() {
        let task = TaskSpec::lift_object();
        let obs = reset(&task, 0);
        assert!(obs.gripper.open);
        assert_eq!(obs.gripper.grasped, None);
        assert_eq!(obs.gripper.detected, None);
        assert_eq!(obs.step_index, 0);
        assert_eq!(obs.gripper.position, task.home_position());
    }

    #[test]
    fn reset_places_objects_in_spawn_range() {
        let task = TaskSpec::push_button();
        for seed in 0..50 {
            let obs = reset(&task, seed);
            for o in &obs.objects {
                assert!(task.spawn[&o.id].contains(o.position), "seed {seed}, {}", o.id);
            }
        }
    }

    #[test]
    fn move_translates_by_delta() {
        let mut task = TaskSpec::push_button();
        task.workspace = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        let obs = obs_at(&task, Vec3::new(0.0, 0.0, 0.0));
        let t = step(&obs, Action::IncX, &task).unwrap();
        assert_eq!(t.after.gripper.position, Vec3::new(0.05, 0.0, 0.0));
        assert_eq!(t.after.step_index, obs.step_index + 1);
    }

    #[test]
    fn move_is_clamped_at_workspace_boundary() {
        let task = TaskSpec::push_button();
        let obs = obs_at(&task, Vec3::new(1.0, 0.5, 0.5));
        let t = step(&obs, Action::IncX, &task).unwrap();
        assert_eq!(t.after.gripper.position.x, 1.0);
    }

    #[test]
    fn close_near_graspable_object_grasps_it() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 3);
        let target = obs.objects[0].position;
        obs.gripper.position = Vec3::new(target.x + 0.05, target.y, target.z);
        let t = step(&obs, Action::CloseGripper, &task).unwrap();
        assert_eq!(t.after.gripper.grasped.as_deref(), Some("umbrella"));
        assert!(!t.after.gripper.open);
        assert_eq!(t.after.gripper.detected.as_deref(), Some("umbrella"));
        // Attachment: object snaps to the gripper.
        assert_eq!(t.after.object("umbrella").unwrap().position, t.after.gripper.position);
    }

    #[test]
    fn close_far_from_objects_does_not_grasp() {
        let task = TaskSpec::lift_object();
        let obs = obs_at(&task, Vec3::new(0.5, 0.5, 0.9));
        let t = step(&obs, Action::CloseGripper, &task).unwrap();
        assert_eq!(t.after.gripper.grasped, None);
        assert!(!t.after.gripper.open);
    }

    #[test]
    fn buttons_are_not_graspable() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 3);
        // Park right on a button but above press radius in z so the episode
        // does not end before we try to close.
        let b = obs.objects[0].position;
        obs.gripper.position = Vec3::new(b.x, b.y, b.z + 0.1);
        let t = step(&obs, Action::CloseGripper, &task).unwrap();
        assert_eq!(t.after.gripper.grasped, None);
    }

    #[test]
    fn grasped_object_tracks_gripper() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 3);
        obs.gripper.position = obs.objects[0].position;
        let grasped = step(&obs, Action::CloseGripper, &task).unwrap().after;
        let lifted = step(&grasped, Action::IncZ, &task).unwrap().after;
        assert_eq!(lifted.object("umbrella").unwrap().position, lifted.gripper.position);
        assert_eq!(lifted.gripper.grasped.as_deref(), Some("umbrella"));
    }

    #[test]
    fn open_releases_and_drops_to_rest_height() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 3);
        obs.gripper.position = obs.objects[0].position;
        let mut state = step(&obs, Action::CloseGripper, &task).unwrap().after;
        for _ in 0..3 {
            state = step(&state, Action::IncZ, &task).unwrap().after;
        }
        let released = step(&state, Action::OpenGripper, &task).unwrap().after;
        assert_eq!(released.gripper.grasped, None);
        assert!(released.gripper.open);
        let obj = released.object("umbrella").unwrap();
        assert_eq!(obj.position.z, task.rest_height("umbrella").unwrap());
        assert_eq!(obj.position.x, state.gripper.position.x);
        assert_eq!(obj.position.y, state.gripper.position.y);
    }

    #[test]
    fn push_button_goal_pays_sparse_reward() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 11);
        let b = obs.objects[0].position;
        // One step away: moving down lands within press radius.
        obs.gripper.position = Vec3::new(b.x, b.y, b.z + task.press_radius + 0.01);
        let t = step(&obs, Action::DecZ, &task).unwrap();
        assert_eq!(t.r_env, 100.0);
        assert!(t.terminal);
        assert!(goal_reached(&t.after, &task));
    }

    #[test]
    fn goal_lift_needs_grasp_and_height() {
        let task = TaskSpec::lift_object();
        let mut obs = reset(&task, 5);
        let rest = task.rest_height("umbrella").unwrap();
        let high = rest + task.lift_threshold + 0.01;

        // High enough but not grasped: no goal.
        obs.objects[0].position.z = high;
        obs.gripper.position = obs.objects[0].position;
        assert!(!goal_reached(&obs, &task));

        // Grasped and high enough: goal.
        obs.gripper.grasped = Some("umbrella".to_string());
        obs.gripper.detected = Some("umbrella".to_string());
        obs.gripper.open = false;
        assert!(goal_reached(&obs, &task));
    }

    #[test]
    fn push_button_goal_at_exact_center() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 5);
        obs.gripper.position = obs.objects[1].position;
        assert!(goal_reached(&obs, &task));
    }

    #[test]
    fn stepping_terminal_state_is_rejected() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 5);
        obs.step_index = task.max_episode_length;
        let err = step(&obs, Action::IncX, &task).unwrap_err();
        assert!(matches!(err, Error::TerminalStep { .. }));
    }

    #[test]
    fn detection_uses_sensing_radius() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 9);
        let b = obs.objects[0].position;
        // Hover above the button: within sensing range after one down step,
        // still outside press radius.
        obs.gripper.position = Vec3::new(b.x, b.y, b.z + task.sensing_radius + 0.04);
        let t = step(&obs, Action::DecZ, &task).unwrap();
        assert_eq!(t.after.gripper.detected.as_deref(), Some("button1"));
        assert!(!t.terminal);
    }

    #[test]
    fn episode_hits_step_cap() {
        let task = TaskSpec::push_button();
        let mut obs = reset(&task, 2);
        // Bounce in a corner far from buttons until the cap.
        obs.gripper.position = Vec3::new(0.5, 0.5, 1.0);
        let mut steps = 0;
        loop {
            let a = if steps % 2 == 0 { Action::IncZ } else { Action::DecZ };
            let t = step(&obs, a, &task).unwrap();
            steps += 1;
            obs = t.after;
            if t.terminal {
                assert_eq!(t.r_env, 0.0);
                break;
            }
        }
        assert_eq!(steps, task.max_episode_length);
        assert_eq!(obs.step_index, task.max_episode_length);
    }

    #[test]
    fn invalid_specs_are_rejected_with_key() {
        let mut task = TaskSpec::push_button();
        task.goal_reward = 0.0;
        let err = task.validate().unwrap_err().to_string();
        assert!(err.contains("task.goal_reward"), "{err}");

        let mut task = TaskSpec::push_button();
        task.spawn.insert(
            "button9".into(),
            Aabb::new(Vec3::new(0.5, 0.5, 0.5), Vec3::new(2.0, 0.6, 0.6)),
        );
        let err = task.validate().unwrap_err().to_string();
        assert!(err.contains("task.spawn.button9"), "{err}");
    }

    #[test]
    fn action_labels_round_trip() {
        for a in Action::ALL {
            assert_eq!(Action::from_label(a.label()), Some(a));
            assert_eq!(Action::from_index(a.index()), Some(a));
        }
    }
}
