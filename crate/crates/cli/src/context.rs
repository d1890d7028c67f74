//! Shared inputs of the pipeline stages: configuration, the take directory
//! and the run directory.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use or_graph_kit::baseline::PairLogits;
use or_graph_kit::geometry::{CameraCalibration, HumanPose, OrientedBox3, PointCloud};
use or_graph_kit::io::docs::{
    BoxesDoc, CalibrationDoc, Document, FrameEntry, GraphDoc, LabelsDoc, LogitsDoc, PosesDoc, TakeDoc, TracksDoc,
};
use or_graph_kit::io::{layout, read_doc, read_ply_file, RunConfig};
use or_graph_kit::model::SceneGraph;
use or_graph_kit::tracking::{Detection, Track};
use or_graph_kit::Error;
use rayon::prelude::*;

pub struct Context {
    pub config: RunConfig,
    pub take: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: RunConfig, take: Option<String>, seed: u64, out: PathBuf, jobs: Option<u32>) -> Result<Self> {
        let threads = jobs.map_or(0, |j| j as usize);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("starting worker pool")?;
        Ok(Context { config, take, seed, out, pool })
    }

    pub fn take_dir(&self) -> Result<PathBuf> {
        Ok(self.config.take_dir(self.take.as_deref())?)
    }

    /// Runs `f` on every frame in the worker pool; results come back in
    /// frame order and the first failing frame (in that order) wins.
    pub fn per_frame<T, F>(&self, frames: &[FrameEntry], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&FrameEntry) -> Result<T> + Sync,
    {
        let results: Vec<Result<T>> = self.pool.install(|| frames.par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

pub fn read<T: Document>(dir: &Path, rel: &str) -> Result<T> {
    Ok(read_doc(&dir.join(rel))?)
}

/// A take directory with its manifest and validated calibrations.
pub struct TakeInput {
    pub dir: PathBuf,
    pub manifest: TakeDoc,
    pub cameras: Vec<CameraCalibration>,
}

impl TakeInput {
    pub fn open(dir: PathBuf) -> Result<Self> {
        if !dir.is_dir() {
            bail!(Error::InvalidTake(format!("take directory {} not found", dir.display())));
        }
        let manifest: TakeDoc = read(&dir, layout::MANIFEST)?;
        if let Some(w) = manifest.frames.windows(2).find(|w| w[0].frame_id >= w[1].frame_id) {
            bail!(Error::InvalidTake(format!("frame ids not increasing: {} then {}", w[0].frame_id, w[1].frame_id)));
        }
        let mut cameras = Vec::with_capacity(manifest.cameras.len());
        for id in &manifest.cameras {
            let doc: CalibrationDoc = read(&dir, &layout::calibration(id))?;
            if &doc.camera_id != id {
                bail!(Error::BadSchema(format!("calibration file for {id} names camera {}", doc.camera_id)));
            }
            let calib = doc.to_calibration();
            calib.validate()?;
            cameras.push(calib);
        }
        Ok(TakeInput { dir, manifest, cameras })
    }

    pub fn frames(&self) -> &[FrameEntry] {
        &self.manifest.frames
    }

    /// Per-camera clouds of one frame in world coordinates, camera order.
    pub fn world_clouds(&self, frame: &FrameEntry) -> Result<Vec<PointCloud>> {
        if frame.clouds.len() != self.cameras.len() {
            bail!(Error::InvalidTake(format!(
                "frame {} lists {} clouds for {} cameras",
                frame.frame_id,
                frame.clouds.len(),
                self.cameras.len()
            )));
        }
        frame
            .clouds
            .iter()
            .zip(&self.cameras)
            .map(|(rel, cam)| {
                let mut cloud = read_ply_file(&self.dir.join(rel)).with_context(|| format!("reading {rel}"))?;
                for p in &mut cloud.points {
                    p.position = cam.camera_to_world(&p.position);
                }
                Ok(cloud)
            })
            .collect()
    }

    pub fn upstream_poses(&self, frame_id: u64) -> Result<Vec<HumanPose>> {
        let doc: PosesDoc = read(&self.dir, &layout::upstream_poses(frame_id))?;
        check_frame(frame_id, doc.frame_id)?;
        Ok(doc.to_poses()?)
    }

    pub fn upstream_boxes(&self, frame_id: u64) -> Result<Vec<OrientedBox3>> {
        let doc: BoxesDoc = read(&self.dir, &layout::upstream_boxes(frame_id))?;
        check_frame(frame_id, doc.frame_id)?;
        Ok(doc.to_boxes()?)
    }

    pub fn upstream_logits(&self, frame_id: u64) -> Result<Vec<PairLogits>> {
        let doc: LogitsDoc = read(&self.dir, &layout::upstream_logits(frame_id))?;
        check_frame(frame_id, doc.frame_id)?;
        Ok(doc.to_pairs())
    }

    pub fn gt_graph(&self, frame: &FrameEntry) -> Result<SceneGraph> {
        let doc: GraphDoc = read(&self.dir, &frame.graph)?;
        check_frame(frame.frame_id, doc.frame_id)?;
        Ok(doc.to_graph())
    }

    pub fn gt_poses(&self, frame: &FrameEntry) -> Result<Option<Vec<HumanPose>>> {
        let Some(rel) = &frame.poses else { return Ok(None) };
        let doc: PosesDoc = read(&self.dir, rel)?;
        check_frame(frame.frame_id, doc.frame_id)?;
        Ok(Some(doc.to_poses()?))
    }

    pub fn gt_boxes(&self, frame: &FrameEntry) -> Result<Option<Vec<OrientedBox3>>> {
        let Some(rel) = &frame.boxes else { return Ok(None) };
        let doc: BoxesDoc = read(&self.dir, rel)?;
        check_frame(frame.frame_id, doc.frame_id)?;
        Ok(Some(doc.to_boxes()?))
    }
}

pub fn check_frame(expected: u64, found: u64) -> Result<()> {
    if expected != found {
        bail!(Error::InvalidTake(format!("expected data for frame {expected}, file is tagged frame {found}")));
    }
    Ok(())
}

pub fn read_labels(out: &Path, frame_id: u64) -> Result<Vec<u32>> {
    let doc: LabelsDoc = read(out, &layout::point_labels(frame_id))?;
    check_frame(frame_id, doc.frame_id)?;
    Ok(doc.labels)
}

pub fn read_graphs(take: &TakeInput, out: &Path) -> Result<BTreeMap<u64, SceneGraph>> {
    take.frames()
        .iter()
        .map(|f| {
            let doc: GraphDoc = read(out, &layout::predicted_graph(f.frame_id))?;
            check_frame(f.frame_id, doc.frame_id)?;
            Ok((f.frame_id, doc.to_graph()))
        })
        .collect()
}

/// Tracks as written by the track stage, with poses reattached from the
/// upstream pose files.
pub fn read_tracks(take: &TakeInput, out: &Path) -> Result<Vec<Track>> {
    let doc: TracksDoc = read(out, layout::TRACKS)?;
    let mut poses: BTreeMap<u64, Vec<HumanPose>> = BTreeMap::new();
    let mut tracks = Vec::with_capacity(doc.tracks.len());
    for rec in &doc.tracks {
        let mut entries = BTreeMap::new();
        for e in &rec.entries {
            if let Entry::Vacant(slot) = poses.entry(e.frame_id) {
                slot.insert(take.upstream_poses(e.frame_id)?);
            }
            let pose = poses[&e.frame_id].get(e.pose_index).cloned().ok_or_else(|| {
                Error::BadSchema(format!("track {} references missing pose {} in frame {}", rec.track_id, e.pose_index, e.frame_id))
            })?;
            if entries.insert(e.frame_id, Detection { pose, node_id: e.node_id }).is_some() {
                bail!(Error::BadSchema(format!("track {} has two entries in frame {}", rec.track_id, e.frame_id)));
            }
        }
        if entries.is_empty() {
            bail!(Error::BadSchema(format!("track {} has no entries", rec.track_id)));
        }
        tracks.push(Track { track_id: rec.track_id, entries });
    }
    Ok(tracks)
}
