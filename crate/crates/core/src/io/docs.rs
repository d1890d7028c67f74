//! Versioned JSON documents. Every document is an object carrying
//! `"format_version": 1`; unknown keys are rejected and required keys never
//! default, including keys whose value may be `null`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix4, Point3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::baseline::PairLogits;
use crate::error::{Error, Result};
use crate::geometry::{CameraCalibration, HumanPose, Joint, OrientedBox3};
use crate::metrics::MacroReport;
use crate::model::{Edge, EntityClass, InstanceId, Node, NodeId, SceneGraph, Split};
use crate::roles::{RoleClass, RoleScoreTable};
use crate::tracking::TrackId;

pub const FORMAT_VERSION: u32 = 1;

/// A top-level file format.
pub trait Document: Serialize + DeserializeOwned {}

/// Present-but-nullable field: `null` is accepted, absence is not.
fn required<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d)
}

pub fn to_json<T: Document>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

/// Parses a document, checking the schema version before anything else.
pub fn from_json<T: Document>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::BadSchema(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| Error::BadSchema("document must be an object".into()))?;
    let version = obj.get("format_version").ok_or_else(|| Error::BadSchema("missing field `format_version`".into()))?;
    let found = version.as_u64().ok_or_else(|| Error::BadSchema("format_version must be an integer".into()))?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::BadVersion { expected: FORMAT_VERSION, found });
    }
    serde_json::from_value(value).map_err(|e| Error::BadSchema(e.to_string()))
}

pub fn write_doc<T: Document>(path: &Path, doc: &T) -> Result<()> {
    fs::write(path, to_json(doc)).map_err(|e| with_path(e, path))?;
    Ok(())
}

pub fn read_doc<T: Document>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    from_json(&text).map_err(|e| match e {
        Error::BadSchema(msg) => Error::BadSchema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDoc {
    pub format_version: u32,
    pub camera_id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-world transform, row-major.
    pub extrinsics: [f64; 16],
    pub depth_scale: f64,
}

impl Document for CalibrationDoc {}

impl From<&CameraCalibration> for CalibrationDoc {
    fn from(c: &CameraCalibration) -> Self {
        let mut extrinsics = [0.0; 16];
        for r in 0..4 {
            for k in 0..4 {
                extrinsics[4 * r + k] = c.extrinsics[(r, k)];
            }
        }
        CalibrationDoc {
            format_version: version(),
            camera_id: c.camera_id.clone(),
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            extrinsics,
            depth_scale: c.depth_scale,
        }
    }
}

impl CalibrationDoc {
    /// Structural conversion only; call [`CameraCalibration::validate`]
    /// before using the result.
    pub fn to_calibration(&self) -> CameraCalibration {
        CameraCalibration {
            camera_id: self.camera_id.clone(),
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            extrinsics: Matrix4::from_row_slice(&self.extrinsics),
            depth_scale: self.depth_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub person_id: u32,
    pub joints: BTreeMap<String, [f64; 3]>,
    #[serde(deserialize_with = "required")]
    pub confidence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub poses: Vec<PoseRecord>,
}

impl Document for PosesDoc {}

impl PosesDoc {
    pub fn new(frame_id: u64, poses: &[HumanPose]) -> Self {
        let poses = poses
            .iter()
            .map(|p| PoseRecord {
                person_id: p.person_id,
                joints: Joint::ALL.iter().map(|j| (j.name().to_string(), p.joint(*j).coords.into())).collect(),
                confidence: p.confidence.map(|c| c.to_vec()),
            })
            .collect();
        PosesDoc { format_version: version(), frame_id, poses }
    }

    pub fn to_poses(&self) -> Result<Vec<HumanPose>> {
        self.poses
            .iter()
            .map(|r| {
                if r.joints.len() != Joint::COUNT {
                    return Err(Error::BadSchema(format!(
                        "pose {} has {} joints, expected {}",
                        r.person_id,
                        r.joints.len(),
                        Joint::COUNT
                    )));
                }
                let mut joints = [Point3::origin(); Joint::COUNT];
                for (name, xyz) in &r.joints {
                    let j: Joint = name.parse()?;
                    joints[j.index()] = Point3::from(*xyz);
                }
                let mut pose = HumanPose::new(r.person_id, joints)?;
                if let Some(c) = &r.confidence {
                    let c: [f64; Joint::COUNT] = c.as_slice().try_into().map_err(|_| {
                        Error::BadSchema(format!("pose {} has {} confidences, expected {}", r.person_id, c.len(), Joint::COUNT))
                    })?;
                    pose.confidence = Some(c);
                }
                Ok(pose)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub class: String,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub yaw: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub boxes: Vec<BoxRecord>,
}

impl Document for BoxesDoc {}

impl BoxesDoc {
    pub fn new(frame_id: u64, boxes: &[OrientedBox3]) -> Self {
        let boxes = boxes
            .iter()
            .map(|b| BoxRecord {
                class: b.class.name().to_string(),
                center: b.center.coords.into(),
                half_extents: b.half_extents.into(),
                yaw: b.yaw,
                confidence: b.confidence,
            })
            .collect();
        BoxesDoc { format_version: version(), frame_id, boxes }
    }

    pub fn to_boxes(&self) -> Result<Vec<OrientedBox3>> {
        self.boxes
            .iter()
            .map(|b| {
                OrientedBox3::new(
                    EntityClass::new(b.class.clone()),
                    Point3::from(b.center),
                    Vector3::from(b.half_extents),
                    b.yaw,
                    b.confidence,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub class: String,
    #[serde(deserialize_with = "required")]
    pub instance_id: Option<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<Edge>,
}

impl Document for GraphDoc {}

impl From<&SceneGraph> for GraphDoc {
    fn from(g: &SceneGraph) -> Self {
        GraphDoc {
            format_version: version(),
            frame_id: g.frame_id,
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeRecord { id: n.id, class: n.class.name().to_string(), instance_id: n.instance_id })
                .collect(),
            edges: g.edges.clone(),
        }
    }
}

impl GraphDoc {
    pub fn to_graph(&self) -> SceneGraph {
        SceneGraph {
            frame_id: self.frame_id,
            nodes: self
                .nodes
                .iter()
                .map(|n| Node { id: n.id, class: EntityClass::new(n.class.clone()), instance_id: n.instance_id })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub sub: InstanceId,
    pub obj: InstanceId,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitsDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub pairs: Vec<PairRecord>,
}

impl Document for LogitsDoc {}

impl LogitsDoc {
    pub fn new(frame_id: u64, pairs: &[PairLogits]) -> Self {
        let pairs = pairs
            .iter()
            .map(|p| PairRecord { sub: p.subject, obj: p.object, scores: p.scores.clone() })
            .collect();
        LogitsDoc { format_version: version(), frame_id, pairs }
    }

    /// Arity and finiteness are checked by the decoder.
    pub fn to_pairs(&self) -> Vec<PairLogits> {
        self.pairs
            .iter()
            .map(|p| PairLogits { subject: p.sub, object: p.obj, scores: p.scores.clone() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleRow {
    pub track_id: TrackId,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleScoresDoc {
    pub format_version: u32,
    /// Column order of `probs`; canonical role order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<String>>,
    pub rows: Vec<RoleRow>,
}

impl Document for RoleScoresDoc {}

impl From<&RoleScoreTable> for RoleScoresDoc {
    fn from(t: &RoleScoreTable) -> Self {
        RoleScoresDoc {
            format_version: version(),
            roles: None,
            rows: t.rows.iter().map(|(&track_id, p)| RoleRow { track_id, probs: p.to_vec() }).collect(),
        }
    }
}

impl RoleScoresDoc {
    pub fn to_table(&self) -> Result<RoleScoreTable> {
        let rows: Vec<(TrackId, Vec<f64>)> = self.rows.iter().map(|r| (r.track_id, r.probs.clone())).collect();
        RoleScoreTable::from_external(self.roles.as_deref(), &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackEntry {
    pub frame_id: u64,
    pub node_id: NodeId,
    /// Index of the pose in that frame's pose file.
    pub pose_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub track_id: TrackId,
    pub entries: Vec<TrackEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksDoc {
    pub format_version: u32,
    pub tracks: Vec<TrackRecord>,
}

impl Document for TracksDoc {}

impl TracksDoc {
    pub fn new(tracks: Vec<TrackRecord>) -> Self {
        TracksDoc { format_version: version(), tracks }
    }
}

/// Per-point instance labels of one fused frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub labels: Vec<InstanceId>,
}

impl Document for LabelsDoc {}

impl LabelsDoc {
    pub fn new(frame_id: u64, labels: Vec<InstanceId>) -> Self {
        LabelsDoc { format_version: version(), frame_id, labels }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraLabels {
    pub camera_id: String,
    pub labels: Vec<InstanceId>,
}

/// Per-point labels of each camera's cloud, in camera order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraLabelsDoc {
    pub format_version: u32,
    pub frame_id: u64,
    pub cameras: Vec<CameraLabels>,
}

impl Document for CameraLabelsDoc {}

impl CameraLabelsDoc {
    pub fn new(frame_id: u64, cameras: Vec<CameraLabels>) -> Self {
        CameraLabelsDoc { format_version: version(), frame_id, cameras }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: u64,
    pub timestamp: u64,
    pub clouds: Vec<String>,
    #[serde(deserialize_with = "required")]
    pub poses: Option<String>,
    #[serde(deserialize_with = "required")]
    pub boxes: Option<String>,
    pub graph: String,
}

/// Take manifest; all paths are relative to the take directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TakeDoc {
    pub format_version: u32,
    pub take_id: String,
    pub split: Split,
    pub cameras: Vec<String>,
    pub frames: Vec<FrameEntry>,
}

impl Document for TakeDoc {}

impl TakeDoc {
    pub fn new(take_id: String, split: Split, cameras: Vec<String>, frames: Vec<FrameEntry>) -> Self {
        TakeDoc { format_version: version(), take_id, split, cameras, frames }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleAssignment {
    pub track_id: TrackId,
    #[serde(deserialize_with = "required")]
    pub role: Option<RoleClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesDoc {
    pub format_version: u32,
    pub assignments: Vec<RoleAssignment>,
}

impl Document for RolesDoc {}

impl RolesDoc {
    pub fn new(assignments: &BTreeMap<TrackId, Option<RoleClass>>) -> Self {
        RolesDoc {
            format_version: version(),
            assignments: assignments.iter().map(|(&track_id, &role)| RoleAssignment { track_id, role }).collect(),
        }
    }

    pub fn to_map(&self) -> Result<BTreeMap<TrackId, Option<RoleClass>>> {
        let mut out = BTreeMap::new();
        for a in &self.assignments {
            if out.insert(a.track_id, a.role).is_some() {
                return Err(Error::BadSchema(format!("track {} assigned twice", a.track_id)));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonRole {
    pub person_id: u32,
    #[serde(deserialize_with = "required")]
    pub role: Option<RoleClass>,
}

/// Ground-truth clinical role of every person id in a take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtRolesDoc {
    pub format_version: u32,
    pub persons: Vec<PersonRole>,
}

impl Document for GtRolesDoc {}

impl GtRolesDoc {
    pub fn new(persons: &BTreeMap<u32, Option<RoleClass>>) -> Self {
        GtRolesDoc {
            format_version: version(),
            persons: persons.iter().map(|(&person_id, &role)| PersonRole { person_id, role }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub format_version: u32,
    pub take_id: String,
    pub frames: usize,
    /// Fraction of fused points whose label matches ground truth.
    #[serde(deserialize_with = "required")]
    pub labeling_accuracy: Option<f64>,
    pub tracks: usize,
    /// Tracks whose unique role matches the role of the person they follow.
    #[serde(deserialize_with = "required")]
    pub track_roles_correct: Option<usize>,
    /// Persons with a ground-truth role.
    #[serde(deserialize_with = "required")]
    pub track_roles_expected: Option<usize>,
    pub relations: MacroReport,
    #[serde(deserialize_with = "required")]
    pub roles: Option<MacroReport>,
    #[serde(deserialize_with = "required")]
    pub pcp3d: Option<f64>,
    #[serde(deserialize_with = "required")]
    pub ap_25: Option<f64>,
    #[serde(deserialize_with = "required")]
    pub ap_50: Option<f64>,
}

impl Document for ReportDoc {}

impl ReportDoc {
    pub fn blank(take_id: String, relations: MacroReport) -> Self {
        ReportDoc {
            format_version: version(),
            take_id,
            frames: 0,
            labeling_accuracy: None,
            tracks: 0,
            track_roles_correct: None,
            track_roles_expected: None,
            relations,
            roles: None,
            pcp3d: None,
            ap_25: None,
            ap_50: None,
        }
    }
}
