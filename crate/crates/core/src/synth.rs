//! Deterministic synthetic operating-room takes with full ground truth:
//! a fixed floor plan, six scripted actors, surface-sampled point clouds,
//! per-frame scene graphs and clinical roles. Used to exercise every stage
//! of the pipeline end to end without real data.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Vector3};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baseline::{PairLogits, SCORE_ARITY};
use crate::error::{Error, Result};
use crate::geometry::{CameraCalibration, ColoredPoint, HumanPose, Joint, OrientedBox3, PartList, PointCloud};
use crate::io::layout;
use crate::labeling::InstanceLayout;
use crate::model::{Edge, EntityClass, FrameRecord, GeometryRefs, InstanceId, Node, RelationClass, SceneGraph, Split, Take};
use crate::rng::{derive_seed, seeded};
use crate::roles::RoleClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prepare,
    Anaesthesia,
    Cut,
    Drill,
    Saw,
    Hammer,
    Cement,
    Suture,
    Clean,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::Prepare,
        Phase::Anaesthesia,
        Phase::Cut,
        Phase::Drill,
        Phase::Saw,
        Phase::Hammer,
        Phase::Cement,
        Phase::Suture,
        Phase::Clean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Prepare => "prepare",
            Phase::Anaesthesia => "anaesthesia",
            Phase::Cut => "cut",
            Phase::Drill => "drill",
            Phase::Saw => "saw",
            Phase::Hammer => "hammer",
            Phase::Cement => "cement",
            Phase::Suture => "suture",
            Phase::Clean => "clean",
        }
    }

    /// The predicate the head surgeon performs with a hand-held tool.
    pub fn tool_predicate(self) -> Option<RelationClass> {
        match self {
            Phase::Cut => Some(RelationClass::Cut),
            Phase::Drill => Some(RelationClass::Drill),
            Phase::Saw => Some(RelationClass::Saw),
            Phase::Hammer => Some(RelationClass::Hammer),
            Phase::Cement => Some(RelationClass::Cement),
            Phase::Suture => Some(RelationClass::Suture),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::BadScript(format!("unknown phase {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub frames: usize,
}

pub fn default_script() -> Vec<PhaseSpan> {
    use Phase::*;
    [(Prepare, 8), (Anaesthesia, 6), (Cut, 6), (Drill, 6), (Saw, 10), (Hammer, 6), (Cement, 6), (Suture, 6), (Clean, 6)]
        .into_iter()
        .map(|(phase, frames)| PhaseSpan { phase, frames })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub take_id: String,
    pub n_frames: usize,
    pub script: Vec<PhaseSpan>,
    /// Gaussian noise on sampled point positions, meters.
    pub point_sigma: f64,
    /// Gaussian noise on detected joint positions, meters.
    pub pose_jitter: f64,
    /// Probability that a person's pose detection is missing in a frame.
    pub dropout: f64,
    /// Surface sampling density, points per square meter.
    pub density: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            take_id: "synth".into(),
            n_frames: 60,
            script: default_script(),
            point_sigma: 0.0,
            pose_jitter: 0.0,
            dropout: 0.0,
            density: 500.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::BadScript("a take needs at least one frame".into()));
        }
        if let Some(span) = self.script.iter().find(|s| s.frames == 0) {
            return Err(Error::BadScript(format!("phase {} has zero duration", span.phase)));
        }
        let total: usize = self.script.iter().map(|s| s.frames).sum();
        if total != self.n_frames {
            return Err(Error::BadScript(format!("phase durations sum to {total}, expected {}", self.n_frames)));
        }
        if self.take_id.is_empty() || self.take_id.contains(['/', '\\']) {
            return Err(Error::BadConfig(format!("invalid take id {:?}", self.take_id)));
        }
        for (name, v) in [("point_sigma", self.point_sigma), ("pose_jitter", self.pose_jitter)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::BadConfig(format!("{name} must be finite and non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::BadConfig("dropout must lie in [0, 1]".into()));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::BadConfig("density must be positive".into()));
        }
        Ok(())
    }

    pub fn phase_at(&self, frame: usize) -> Phase {
        let mut end = 0;
        for span in &self.script {
            end += span.frames;
            if frame < end {
                return span.phase;
            }
        }
        self.script.last().expect("validated script").phase
    }
}

/// Actor order; also the person id and pose index of each actor.
pub const PATIENT: usize = 0;
pub const HEAD_SURGEON: usize = 1;
pub const ASSISTANT: usize = 2;
pub const NURSE: usize = 3;
pub const ANAESTHETIST: usize = 4;
pub const BYSTANDER: usize = 5;
pub const ACTORS: usize = 6;

pub const ACTOR_ROLES: [Option<RoleClass>; ACTORS] = [
    Some(RoleClass::Patient),
    Some(RoleClass::HeadSurgeon),
    Some(RoleClass::AssistantSurgeon),
    Some(RoleClass::CirculatingNurse),
    Some(RoleClass::Anaesthetist),
    None,
];

/// Box order; also the box index in every frame.
pub const OPERATING_TABLE: usize = 0;
pub const ANESTHESIA_MACHINE: usize = 1;
pub const INSTRUMENT_TABLE: usize = 2;
pub const SECONDARY_TABLE: usize = 3;

/// Radius of the sampled body surface, a little inside the default
/// labeling capsule so every body point is claimed.
pub const BODY_RADIUS: f64 = 0.115;
const SURFACE_INSET: f64 = 0.005;
const TOOL_RADIUS: f64 = 0.03;
const TOOL_POINTS: usize = 40;
const TOOL_OFFSET: f64 = 0.17;
const CLOSE_TO: f64 = 1.5;

const BOX_COLORS: [[u8; 3]; 4] = [[90, 90, 100], [200, 200, 210], [150, 150, 160], [170, 160, 150]];
const SCRUBS: [u8; 3] = [60, 120, 90];
const SKIN: [u8; 3] = [220, 190, 170];
const STEEL: [u8; 3] = [205, 205, 205];

pub fn floor_plan() -> Vec<OrientedBox3> {
    let b = |class: &str, c: [f64; 3], h: [f64; 3], yaw: f64| {
        OrientedBox3::new(EntityClass::new(class), Point3::from(c), Vector3::from(h), yaw, 1.0).expect("constant floor plan")
    };
    vec![
        b(EntityClass::OPERATING_TABLE, [0.0, 0.0, 0.45], [1.0, 0.35, 0.45], 0.0),
        b(EntityClass::ANESTHESIA_MACHINE, [-2.4, 0.0, 0.7], [0.3, 0.3, 0.7], 0.0),
        b(EntityClass::INSTRUMENT_TABLE, [1.4, -2.0, 0.45], [0.5, 0.3, 0.45], 0.25),
        b(EntityClass::SECONDARY_TABLE, [2.6, 1.4, 0.4], [0.4, 0.4, 0.4], -0.4),
    ]
}

/// Six ceiling cameras looking down, each slightly yawed.
pub fn camera_rig() -> Vec<CameraCalibration> {
    let down = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    let spots = [(-2.5, -1.5), (0.0, -1.5), (2.5, -1.5), (-2.5, 1.5), (0.0, 1.5), (2.5, 1.5)];
    spots
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.3 * k as f64 - 0.75);
            let r = yaw.matrix() * down;
            let mut extrinsics = Matrix4::identity();
            extrinsics.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            extrinsics.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::new(x, y, 3.0));
            CameraCalibration {
                camera_id: format!("cam_{k}"),
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
                extrinsics,
                depth_scale: 0.001,
            }
        })
        .collect()
}

/// Joint offsets (forward, left, up) of an upright body.
fn standing(x: f64, y: f64, facing: f64, reaching: bool) -> [Point3<f64>; Joint::COUNT] {
    let (s, c) = facing.sin_cos();
    let at = |f: f64, l: f64, z: f64| Point3::new(x + c * f - s * l, y + s * f + c * l, z);
    let (elbow, wrist) = if reaching {
        ((0.12, 0.2, 1.2), (0.42, 0.15, 1.25))
    } else {
        ((0.0, 0.22, 1.15), (0.05, 0.22, 0.88))
    };
    [
        at(0.0, 0.0, 1.70),
        at(0.0, 0.0, 1.50),
        at(0.0, 0.2, 1.45),
        at(0.0, -0.2, 1.45),
        at(elbow.0, elbow.1, elbow.2),
        at(elbow.0, -elbow.1, elbow.2),
        at(wrist.0, wrist.1, wrist.2),
        at(wrist.0, -wrist.1, wrist.2),
        at(0.0, 0.1, 0.95),
        at(0.0, -0.1, 0.95),
        at(0.02, 0.1, 0.5),
        at(0.02, -0.1, 0.5),
        at(0.0, 0.1, 0.08),
        at(0.0, -0.1, 0.08),
    ]
}

fn lying_on_table() -> [Point3<f64>; Joint::COUNT] {
    let z = 1.04;
    [
        (-0.85, 0.0),
        (-0.65, 0.0),
        (-0.55, 0.18),
        (-0.55, -0.18),
        (-0.3, 0.22),
        (-0.3, -0.22),
        (-0.05, 0.22),
        (-0.05, -0.22),
        (0.0, 0.1),
        (0.0, -0.1),
        (0.4, 0.1),
        (0.4, -0.1),
        (0.85, 0.1),
        (0.85, -0.1),
    ]
    .map(|(x, y)| Point3::new(x, y, z))
}

/// Ground-truth poses of all actors in frame `frame` of `n_frames`.
pub fn actor_poses(frame: usize, n_frames: usize) -> Vec<HumanPose> {
    let t = if n_frames > 1 { frame as f64 / (n_frames - 1) as f64 } else { 0.0 };
    let (start, end): ((f64, f64), (f64, f64)) = ((1.6, -1.1), (2.0, 0.2));
    let nurse = (start.0 + t * (end.0 - start.0), start.1 + t * (end.1 - start.1));
    let nurse_facing = (end.1 - start.1).atan2(end.0 - start.0);
    let joints = [
        lying_on_table(),
        standing(0.5, 0.95, -FRAC_PI_2, true),
        standing(0.5, -0.95, FRAC_PI_2, true),
        standing(nurse.0, nurse.1, nurse_facing, false),
        standing(-2.2, 0.9, -FRAC_PI_2, false),
        standing(-1.0, -2.2, FRAC_PI_2, false),
    ];
    joints
        .into_iter()
        .enumerate()
        .map(|(k, j)| HumanPose::new(k as u32, j).expect("finite choreography"))
        .collect()
}

/// Center of the tool held in the head surgeon's right hand.
pub fn tool_center(surgeon: &HumanPose) -> Point3<f64> {
    let wrist = surgeon.joint(Joint::RightWrist);
    let dir = (wrist - surgeon.joint(Joint::RightElbow)).normalize();
    wrist + dir * TOOL_OFFSET
}

fn centroid_of(p: &[Point3<f64>]) -> Point3<f64> {
    Point3::from(p.iter().map(|q| q.coords).sum::<Vector3<f64>>() / p.len() as f64)
}

/// Ground-truth scene graph of one frame. Node ids are instance ids under
/// the frame's [`InstanceLayout`]; every human has a virtual instrument.
pub fn frame_graph(frame_id: u64, phase: Phase, poses: &[HumanPose], boxes: &[OrientedBox3]) -> SceneGraph {
    let layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
    let mut g = SceneGraph::new(frame_id);
    for (i, b) in boxes.iter().enumerate() {
        let id = layout.box_id(i);
        g.nodes.push(Node { id, class: b.class.clone(), instance_id: Some(id) });
    }
    for j in 0..poses.len() {
        let id = layout.pose_id(j);
        g.nodes.push(Node { id, class: EntityClass::human(), instance_id: Some(id) });
    }
    for j in 0..poses.len() {
        let id = layout.instrument_id(j);
        g.nodes.push(Node { id, class: EntityClass::instrument(), instance_id: Some(id) });
    }

    let human = |j: usize| layout.pose_id(j);
    let equipment = |i: usize| layout.box_id(i);
    g.add_edge(Edge::new(human(PATIENT), RelationClass::LyingOn, equipment(OPERATING_TABLE)));
    match phase {
        Phase::Prepare => {
            g.add_edge(Edge::new(human(NURSE), RelationClass::Prepare, equipment(INSTRUMENT_TABLE)));
        }
        Phase::Anaesthesia => {
            g.add_edge(Edge::new(human(ANAESTHETIST), RelationClass::Operate, equipment(ANESTHESIA_MACHINE)));
        }
        Phase::Clean => {
            g.add_edge(Edge::new(human(NURSE), RelationClass::Clean, equipment(SECONDARY_TABLE)));
        }
        tool_phase => {
            let pred = tool_phase.tool_predicate().expect("remaining phases use tools");
            g.add_edge(Edge::new(human(HEAD_SURGEON), pred, layout.instrument_id(HEAD_SURGEON)));
            g.add_edge(Edge::new(human(ASSISTANT), RelationClass::Assist, human(HEAD_SURGEON)));
        }
    }

    let centers: Vec<Point3<f64>> = poses.iter().map(|p| centroid_of(&p.joints)).collect();
    for a in 0..poses.len() {
        for b in a + 1..poses.len() {
            if (centers[a] - centers[b]).norm() < CLOSE_TO {
                g.add_edge(Edge::new(human(a), RelationClass::CloseTo, human(b)));
            }
        }
        for (i, bx) in boxes.iter().enumerate() {
            if bx.class.is_equipment() && (centers[a] - bx.center).norm() < CLOSE_TO {
                g.add_edge(Edge::new(human(a), RelationClass::CloseTo, equipment(i)));
            }
        }
    }
    g.sort();
    g
}

fn orthonormal_pair(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&helper).normalize();
    (u, axis.cross(&u))
}

fn count_for(area: f64, density: f64) -> usize {
    (area * density).round() as usize
}

/// Points on the six faces of `b` shrunk by the surface inset.
fn sample_box(b: &OrientedBox3, density: f64, rng: &mut impl Rng, out: &mut Vec<Point3<f64>>) {
    let h = b.half_extents.map(|v| (v - SURFACE_INSET).max(1e-3));
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let area = 4.0 * h[u] * h[v];
        for sign in [-1.0, 1.0] {
            for _ in 0..count_for(area, density) {
                let mut l = Vector3::zeros();
                l[axis] = sign * h[axis];
                l[u] = rng.random_range(-h[u]..=h[u]);
                l[v] = rng.random_range(-h[v]..=h[v]);
                out.push(b.from_local(&l));
            }
        }
    }
}

/// Points on the cylindrical surfaces of the body parts.
fn sample_body(pose: &HumanPose, parts: &PartList, density: f64, rng: &mut impl Rng, out: &mut Vec<Point3<f64>>) {
    for part in parts.iter() {
        let (a, b) = part.endpoints(pose);
        let axis = b - a;
        let len = axis.norm();
        if len == 0.0 {
            continue;
        }
        let (u, v) = orthonormal_pair(&(axis / len));
        for _ in 0..count_for(2.0 * PI * BODY_RADIUS * len, density) {
            let t: f64 = rng.random();
            let theta = rng.random_range(0.0..2.0 * PI);
            out.push(a + axis * t + (u * theta.cos() + v * theta.sin()) * BODY_RADIUS);
        }
    }
}

fn sample_ball(center: &Point3<f64>, rng: &mut impl Rng, out: &mut Vec<Point3<f64>>) {
    while out.len() < TOOL_POINTS {
        let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if d.norm_squared() <= 1.0 {
            out.push(center + d * TOOL_RADIUS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub frame_id: u64,
    pub phase: Phase,
    pub poses: Vec<HumanPose>,
    pub boxes: Vec<OrientedBox3>,
    /// World-frame cloud.
    pub cloud: PointCloud,
    /// True instance id of every cloud point.
    pub labels: Vec<InstanceId>,
    pub graph: SceneGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTake {
    pub config: ScenarioConfig,
    pub cameras: Vec<CameraCalibration>,
    pub frames: Vec<SynthFrame>,
}

impl SynthTake {
    pub fn take_id(&self) -> &str {
        &self.config.take_id
    }

    /// Clinical role of each person id.
    pub fn roles(&self) -> BTreeMap<u32, Option<RoleClass>> {
        ACTOR_ROLES.iter().enumerate().map(|(k, r)| (k as u32, *r)).collect()
    }

    /// Frames in which each person id is present (always all of them).
    pub fn tracks(&self) -> BTreeMap<u32, Vec<u64>> {
        (0..ACTORS as u32).map(|k| (k, self.frames.iter().map(|f| f.frame_id).collect())).collect()
    }

    /// Take manifest referencing the on-disk layout written by the CLI.
    pub fn take(&self) -> Take {
        let frames = self
            .frames
            .iter()
            .map(|f| FrameRecord {
                frame_id: f.frame_id,
                timestamp: f.frame_id,
                graph: f.graph.clone(),
                geometry: GeometryRefs {
                    clouds: self.cameras.iter().map(|c| layout::frame_cloud(f.frame_id, &c.camera_id)).collect(),
                    poses: Some(layout::gt_poses(f.frame_id)),
                    boxes: Some(layout::gt_boxes(f.frame_id)),
                },
            })
            .collect();
        Take { take_id: self.config.take_id.clone(), split: Split::Test, frames }
    }

    /// Splits a frame's cloud among the cameras (each point goes to the
    /// nearest camera, lowest index on ties) and expresses every part in its
    /// camera's frame. Returns clouds and matching ground-truth labels.
    pub fn camera_views(&self, frame: &SynthFrame) -> Vec<(PointCloud, Vec<InstanceId>)> {
        let mut views = vec![(PointCloud::default(), Vec::new()); self.cameras.len()];
        let origins: Vec<Point3<f64>> = self.cameras.iter().map(|c| c.camera_to_world(&Point3::origin())).collect();
        for (p, &label) in frame.cloud.iter().zip(&frame.labels) {
            let mut best = 0;
            for k in 1..origins.len() {
                if (p.position - origins[k]).norm() < (p.position - origins[best]).norm() {
                    best = k;
                }
            }
            let local = self.cameras[best].world_to_camera(&p.position);
            views[best].0.points.push(ColoredPoint { position: local, color: p.color });
            views[best].1.push(label);
        }
        views
    }
}

/// Builds a full take from the scenario. Same config, same output.
pub fn generate_take(config: &ScenarioConfig) -> Result<SynthTake> {
    config.validate()?;
    let boxes = floor_plan();
    let parts = PartList::default();
    let noise = (config.point_sigma > 0.0).then(|| Normal::new(0.0, config.point_sigma).expect("validated sigma"));
    let frames = (0..config.n_frames)
        .map(|f| {
            let frame_id = f as u64;
            let phase = config.phase_at(f);
            let poses = actor_poses(f, config.n_frames);
            let layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
            let mut rng = seeded(derive_seed(config.seed, frame_id));

            let mut points = Vec::new();
            let mut labels = Vec::new();
            let mut push = |pts: Vec<Point3<f64>>, color: [u8; 3], id: InstanceId| {
                labels.extend(std::iter::repeat_n(id, pts.len()));
                points.extend(pts.into_iter().map(|p| ColoredPoint { position: p, color }));
            };
            for (i, b) in boxes.iter().enumerate() {
                let mut pts = Vec::new();
                sample_box(b, config.density, &mut rng, &mut pts);
                push(pts, BOX_COLORS[i], layout.box_id(i));
            }
            for (j, pose) in poses.iter().enumerate() {
                let mut pts = Vec::new();
                sample_body(pose, &parts, config.density, &mut rng, &mut pts);
                push(pts, if j == PATIENT { SKIN } else { SCRUBS }, layout.pose_id(j));
            }
            if phase.tool_predicate().is_some() {
                let mut pts = Vec::new();
                sample_ball(&tool_center(&poses[HEAD_SURGEON]), &mut rng, &mut pts);
                push(pts, STEEL, layout.instrument_id(HEAD_SURGEON));
            }
            if let Some(normal) = &noise {
                for p in points.iter_mut() {
                    for c in p.position.iter_mut() {
                        *c += normal.sample(&mut rng);
                    }
                }
            }

            let graph = frame_graph(frame_id, phase, &poses, &boxes);
            SynthFrame { frame_id, phase, poses, boxes: boxes.clone(), cloud: PointCloud::new(points), labels, graph }
        })
        .collect();
    Ok(SynthTake { config: config.clone(), cameras: camera_rig(), frames })
}

/// Prediction-side errors applied on top of a take's ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    /// Gaussian noise on box centers, meters.
    pub box_jitter: f64,
    /// Fraction of candidate edges whose predicate is replaced.
    pub edge_flip_fraction: f64,
    /// Restricts flipping to one predicate class.
    pub flip_class: Option<RelationClass>,
    /// Fraction of the remaining edges removed.
    pub edge_drop_fraction: f64,
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_jitter >= 0.0 && self.box_jitter.is_finite()) {
            return Err(Error::BadConfig("box_jitter must be finite and non-negative".into()));
        }
        for (name, v) in [("edge_flip_fraction", self.edge_flip_fraction), ("edge_drop_fraction", self.edge_drop_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if let Some(c) = self.flip_class.filter(|c| is_geometric(*c)) {
            return Err(Error::BadConfig(format!("{c} edges come from geometry and cannot be flipped")));
        }
        Ok(())
    }
}

/// Predicates recovered from geometry by the baseline rather than carried
/// in upstream relation scores.
pub fn is_geometric(p: RelationClass) -> bool {
    matches!(p, RelationClass::CloseTo | RelationClass::LyingOn)
}

/// Upstream detector and relation-model outputs for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedFrame {
    pub frame_id: u64,
    pub poses: Vec<HumanPose>,
    pub boxes: Vec<OrientedBox3>,
    /// Only pairs carrying a relation are listed; absent pairs mean none.
    pub logits: Vec<PairLogits>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub frames: Vec<PredictedFrame>,
}

fn one_hot(k: usize) -> Vec<f64> {
    let mut s = vec![0.0; SCORE_ARITY];
    s[k] = 1.0;
    s
}

/// Degraded upstream predictions for a take. Poses receive the scenario's
/// jitter and dropout, boxes the configured center jitter. Non-geometric
/// ground-truth edges become one-hot relation scores, after flipping exactly
/// `round(edge_flip_fraction * n)` of the `n` candidate edges to another
/// predicate drawn uniformly and dropping `round(edge_drop_fraction * m)` of
/// the `m` remaining ones.
pub fn perturb_predictions(take: &SynthTake, cfg: &PerturbConfig, seed: u64) -> Result<PredictionBundle> {
    cfg.validate()?;
    // (frame index, edge) of every relation the upstream model reports
    let mut edges: Vec<(usize, Edge)> = Vec::new();
    for (k, f) in take.frames.iter().enumerate() {
        edges.extend(f.graph.edges.iter().filter(|e| !is_geometric(e.predicate)).map(|e| (k, *e)));
    }

    let candidates: Vec<usize> =
        (0..edges.len()).filter(|&i| cfg.flip_class.is_none_or(|c| edges[i].1.predicate == c)).collect();
    let n_flip = (cfg.edge_flip_fraction * candidates.len() as f64).round() as usize;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut chosen = index::sample(&mut rng, candidates.len(), n_flip).into_vec();
    chosen.sort_unstable();
    for c in chosen {
        let e = &mut edges[candidates[c]].1;
        let mut k = rng.random_range(0..RelationClass::COUNT - 1);
        if k >= e.predicate.index() {
            k += 1;
        }
        e.predicate = RelationClass::ALL[k];
    }
    let n_drop = (cfg.edge_drop_fraction * edges.len() as f64).round() as usize;
    let mut dropped = index::sample(&mut seeded(derive_seed(seed, 2)), edges.len(), n_drop).into_vec();
    dropped.sort_unstable();
    for i in dropped.into_iter().rev() {
        edges.remove(i);
    }

    let pose_noise = (take.config.pose_jitter > 0.0).then(|| Normal::new(0.0, take.config.pose_jitter).expect("validated"));
    let box_noise = (cfg.box_jitter > 0.0).then(|| Normal::new(0.0, cfg.box_jitter).expect("validated"));
    let mut frames = Vec::with_capacity(take.frames.len());
    for (k, f) in take.frames.iter().enumerate() {
        let mut rng = seeded(derive_seed(derive_seed(seed, 3), f.frame_id));
        let gt_layout = InstanceLayout { boxes: f.boxes.len(), poses: f.poses.len() };

        let mut kept = Vec::new();
        let mut poses = Vec::new();
        for (j, pose) in f.poses.iter().enumerate() {
            if take.config.dropout > 0.0 && rng.random::<f64>() < take.config.dropout {
                continue;
            }
            let mut p = pose.clone();
            if let Some(n) = &pose_noise {
                for c in p.joints.iter_mut().flat_map(|q| q.iter_mut()) {
                    *c += n.sample(&mut rng);
                }
            }
            kept.push(j);
            poses.push(p);
        }
        let boxes: Vec<OrientedBox3> = f
            .boxes
            .iter()
            .map(|b| {
                let mut b = b.clone();
                if let Some(n) = &box_noise {
                    for c in b.center.iter_mut() {
                        *c += n.sample(&mut rng);
                    }
                }
                b
            })
            .collect();

        // ground-truth instance ids to ids under the upstream layout
        let up_layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
        let mut remap: BTreeMap<InstanceId, InstanceId> = (0..boxes.len()).map(|i| (gt_layout.box_id(i), up_layout.box_id(i))).collect();
        for (new, &old) in kept.iter().enumerate() {
            remap.insert(gt_layout.pose_id(old), up_layout.pose_id(new));
            remap.insert(gt_layout.instrument_id(old), up_layout.instrument_id(new));
        }
        let mut pairs: BTreeMap<(InstanceId, InstanceId), usize> = BTreeMap::new();
        for (_, e) in edges.iter().filter(|(fk, _)| *fk == k) {
            if let (Some(&s), Some(&o)) = (remap.get(&e.subject), remap.get(&e.object)) {
                pairs.insert((s, o), e.predicate.index());
            }
        }
        let logits = pairs
            .into_iter()
            .map(|((subject, object), class)| PairLogits { subject, object, scores: one_hot(class) })
            .collect();
        frames.push(PredictedFrame { frame_id: f.frame_id, poses, boxes, logits });
    }
    Ok(PredictionBundle { frames })
}
