//! The tick loop tying rendering, selection, recording and the PTZ
//! cinematographer together.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use crate::cinema::calibration::{calibrate, canvas_to_ptz, zoom_levels, CalibrationTable, ParallaxMatcher, PtzGeometry, PtzPose};
use crate::cinema::compose::propose_canvas;
use crate::cinema::shot::{is_steady, shot_fsm_tick, ShotChange, ShotState};
use crate::detection::{activity_regions, detect, update_pool, Detection, FrameContext, SimulatedDetector};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::recorder::{MatrixState, RecordSegmentEvent, SegmentEdge, StorageLedger};
use crate::scenario::Scenario;
use crate::scene::{CameraId, CameraKind};
use crate::selection::{selection_tick, SelectionState};
use crate::video::{bgs_step, BackgroundModel, CompiledZone, ForegroundMask, Renderer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSample {
    pub level: f64,
    pub recording: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSample {
    /// Requested by selection.
    pub record: bool,
    /// Recorder channel currently capturing the camera.
    pub channel: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShotSample {
    pub canvas: Option<Rect>,
    pub pose: Option<PtzPose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineSample {
    pub t: f64,
    pub buckets: BTreeMap<String, BucketSample>,
    pub cameras: BTreeMap<CameraId, CameraSample>,
    /// Active shot per PTZ camera.
    pub shots: BTreeMap<CameraId, ShotSample>,
    /// Detections per overview camera.
    pub detections: BTreeMap<CameraId, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    RecordStart,
    RecordStop,
    ShotAdopt,
    ShotSwitch,
    /// A canvas fell outside the calibrated grid.
    CalibrationFallback,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RecordStart => SegmentEdge::Start.as_str(),
            EventKind::RecordStop => SegmentEdge::Stop.as_str(),
            EventKind::ShotAdopt => "shot_adopt",
            EventKind::ShotSwitch => "shot_switch",
            EventKind::CalibrationFallback => "calibration_fallback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            EventKind::RecordStart,
            EventKind::RecordStop,
            EventKind::ShotAdopt,
            EventKind::ShotSwitch,
            EventKind::CalibrationFallback,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub camera: CameraId,
    pub channel: Option<usize>,
    pub segment_start: Option<f64>,
    pub canvas: Option<Rect>,
    pub pose: Option<PtzPose>,
}

impl Event {
    fn from_segment(e: &RecordSegmentEvent) -> Self {
        Event {
            t: e.t,
            kind: match e.edge {
                SegmentEdge::Start => EventKind::RecordStart,
                SegmentEdge::Stop => EventKind::RecordStop,
            },
            camera: e.camera.clone(),
            channel: Some(e.channel),
            segment_start: (e.edge == SegmentEdge::Stop).then_some(e.segment_start),
            canvas: None,
            pose: None,
        }
    }

    /// The recorder event this corresponds to, if any.
    pub fn segment(&self) -> Option<RecordSegmentEvent> {
        let edge = match self.kind {
            EventKind::RecordStart => SegmentEdge::Start,
            EventKind::RecordStop => SegmentEdge::Stop,
            _ => return None,
        };
        Some(RecordSegmentEvent {
            camera: self.camera.clone(),
            channel: self.channel.unwrap_or(0),
            edge,
            t: self.t,
            segment_start: self.segment_start.unwrap_or(self.t),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<TimelineSample>,
    pub events: Vec<Event>,
    pub ledger: StorageLedger,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write every rendered frame and foreground mask as PGM here.
    pub dump_frames: Option<PathBuf>,
}

/// Cinematographer state for one PTZ camera.
struct PtzRig {
    camera: CameraId,
    overview: usize,
    table: CalibrationTable,
    detector: SimulatedDetector,
    previous: Vec<Detection>,
    history: VecDeque<Vec<Detection>>,
    shot: ShotState,
    pose: Option<PtzPose>,
}

pub fn calibration_for(scenario: &Scenario, ptz: &CameraId, grid: usize, zooms: usize) -> Result<CalibrationTable> {
    let cam = scenario.camera(ptz.as_str()).ok_or_else(|| Error::UnknownCamera(ptz.to_string()))?;
    let ov_id = cam
        .paired_overview
        .as_ref()
        .ok_or_else(|| Error::invalid("calibration", format!("`{ptz}` has no overview camera")))?;
    let ov = scenario.camera(ov_id.as_str()).ok_or_else(|| Error::UnknownCamera(ov_id.to_string()))?;
    let geometry = PtzGeometry::from_cameras(ov, cam)?;
    let mut matcher = ParallaxMatcher::default();
    calibrate(&geometry, grid, &zoom_levels(zooms, cam.ptz.zoom_max), Some(&mut matcher))
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput> {
    run_with(scenario, seed, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, seed: u64, options: &RunOptions) -> Result<RunOutput> {
    let p = &scenario.params;
    let dt = p.tick;
    let ticks = scenario.ticks();

    // PTZ heads are steered, not watched, so only the others are rendered
    let rendered: Vec<usize> = (0..scenario.cameras.len())
        .filter(|&i| scenario.cameras[i].kind != CameraKind::Ptz)
        .collect();
    let renderers: Vec<Renderer> = rendered.iter().map(|&i| Renderer::new(&scenario.cameras[i])).collect();
    let mut models = Vec::with_capacity(rendered.len());
    for r in &renderers {
        let warm = std::iter::repeat_n(r.background(), p.bgs.warmup.max(1));
        models.push(BackgroundModel::warmed_up(warm, &p.bgs)?);
    }

    let mut zones = Vec::with_capacity(scenario.zones.len());
    for z in &scenario.zones {
        let slot = rendered
            .iter()
            .position(|&i| scenario.cameras[i].id == z.camera)
            .ok_or_else(|| Error::invalid("zone", format!("`{}` is drawn on unrendered camera `{}`", z.id, z.camera)))?;
        let cam = &scenario.cameras[rendered[slot]];
        let compiled = CompiledZone::new(&z.polygon, cam.width, cam.height)
            .map_err(|e| Error::invalid("zone", format!("`{}`: {e}", z.id)))?;
        zones.push((z.id.clone(), slot, compiled));
    }

    let mut selection = SelectionState::new(scenario.buckets.clone(), scenario.zones.clone())?;
    let mut matrix = MatrixState::new(scenario.cameras.iter().map(|c| c.id.clone()).collect())?;
    let mut ledger = StorageLedger::new(p.bitrate);

    let mut rigs = Vec::new();
    for cam in scenario.cameras.iter().filter(|c| c.kind == CameraKind::Ptz) {
        let ov_id = cam.paired_overview.as_ref().expect("validated ptz pairing");
        let overview = rendered
            .iter()
            .position(|&i| scenario.cameras[i].id == *ov_id)
            .ok_or_else(|| Error::UnknownCamera(ov_id.to_string()))?;
        rigs.push(PtzRig {
            camera: cam.id.clone(),
            overview,
            table: calibration_for(scenario, &cam.id, p.calib_grid, p.calib_zooms)?,
            detector: SimulatedDetector::new(p.detector, seed, ov_id),
            previous: Vec::new(),
            history: VecDeque::new(),
            shot: ShotState::default(),
            pose: None,
        });
    }
    let window = (p.steady.window_s / dt).round() as usize + 1;

    if let Some(dir) = &options.dump_frames {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut samples = Vec::with_capacity(ticks);
    let mut events = Vec::new();
    for k in 0..ticks {
        let t = k as f64 * dt;
        let mut frames = Vec::with_capacity(rendered.len());
        let mut masks: Vec<ForegroundMask> = Vec::with_capacity(rendered.len());
        for (slot, r) in renderers.iter().enumerate() {
            let frame = r.render(&scenario.floorplan, &scenario.actors, t);
            let mask = bgs_step(&mut models[slot], &frame)?;
            if let Some(dir) = &options.dump_frames {
                let id = &scenario.cameras[rendered[slot]].id;
                frame.write_pgm(&dir.join(format!("{id}_{k:05}.pgm")))?;
                mask.write_pgm(&dir.join(format!("{id}_{k:05}_fg.pgm")))?;
            }
            frames.push(frame);
            masks.push(mask);
        }

        let mut activities = BTreeMap::new();
        for (id, slot, zone) in &zones {
            activities.insert(id.clone(), zone.activity(&masks[*slot])?);
        }
        selection_tick(&mut selection, &activities, dt);
        let requested: BTreeSet<CameraId> = selection.recording_cameras();
        let priority: BTreeMap<CameraId, f64> = requested
            .iter()
            .map(|c| (c.clone(), selection.camera_priority(c)))
            .collect();
        let seg_events = matrix.tick(&requested, &priority, t)?;
        ledger.apply(&seg_events);
        events.extend(seg_events.iter().map(Event::from_segment));

        let mut detections = BTreeMap::new();
        let mut shots = BTreeMap::new();
        for rig in rigs.iter_mut() {
            let ov = &scenario.cameras[rendered[rig.overview]];
            let mask = &masks[rig.overview];
            let dims = (ov.width, ov.height);
            let activity = activity_regions(mask, &ov.id, p.min_area);
            let pool = update_pool(&rig.previous, p.pool_margin, &activity, dims);
            let ctx = FrameContext {
                camera: ov,
                frame: &frames[rig.overview],
                floorplan: &scenario.floorplan,
                actors: &scenario.actors,
                t,
            };
            let dets = detect(&mut rig.detector, &ctx, &pool);
            detections.insert(ov.id.clone(), dets.len());
            rig.history.push_back(dets.clone());
            while rig.history.len() > window {
                rig.history.pop_front();
            }
            let proposal = if dets.is_empty() {
                None
            } else {
                Some(propose_canvas(&dets, dims, &p.compose)?)
            };
            let history: Vec<Vec<Detection>> = rig.history.iter().cloned().collect();
            let steady = history.len() == window && is_steady(&history, p.steady.eps_move, p.steady.eps_size, ov.width as f64);
            rig.previous = dets;
            if let Some(ev) = shot_fsm_tick(&mut rig.shot, proposal.as_ref(), steady, dt, &p.shot, &p.diff, ov.width as f64) {
                let lookup = canvas_to_ptz(&rig.table, &ev.canvas);
                rig.pose = Some(lookup.pose);
                if lookup.outside_grid {
                    events.push(Event {
                        t,
                        kind: EventKind::CalibrationFallback,
                        camera: rig.camera.clone(),
                        channel: None,
                        segment_start: None,
                        canvas: Some(ev.canvas.rect),
                        pose: Some(lookup.pose),
                    });
                }
                events.push(Event {
                    t,
                    kind: match ev.change {
                        ShotChange::Adopt => EventKind::ShotAdopt,
                        ShotChange::Switch => EventKind::ShotSwitch,
                    },
                    camera: rig.camera.clone(),
                    channel: None,
                    segment_start: None,
                    canvas: Some(ev.canvas.rect),
                    pose: Some(lookup.pose),
                });
            }
            shots.insert(
                rig.camera.clone(),
                ShotSample {
                    canvas: rig.shot.current.map(|c| c.rect),
                    pose: rig.pose,
                },
            );
        }

        samples.push(TimelineSample {
            t,
            buckets: selection
                .buckets
                .iter()
                .map(|(id, b)| (id.clone(), BucketSample { level: b.level, recording: b.recording }))
                .collect(),
            cameras: scenario
                .cameras
                .iter()
                .map(|c| {
                    let s = CameraSample {
                        record: selection.camera_flags.get(&c.id).copied().unwrap_or(false),
                        channel: matrix.channel_of(&c.id),
                    };
                    (c.id.clone(), s)
                })
                .collect(),
            shots,
            detections,
        });
    }

    let closing = matrix.finish(ticks as f64 * dt);
    ledger.apply(&closing);
    events.extend(closing.iter().map(Event::from_segment));
    Ok(RunOutput {
        samples,
        events,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const ONE_ROOM: &str = "\
[params]
duration = 20
[room]
id = r
polygon = 0,0 6,0 6,4 0,4
[camera]
id = c
kind = static
position = 5.9,2
yaw_deg = 180
hfov_deg = 70
resolution = 160x90
[zone]
id = z
camera = c
polygon = 0,0 160,0 160,90 0,90
weight = 5
buckets = b
[bucket]
id = b
cameras = c
";

    #[test]
    fn empty_scene_never_records() {
        let s = parse_scenario(ONE_ROOM).unwrap();
        let out = run(&s, 1).unwrap();
        assert_eq!(out.samples.len(), 200);
        assert!(out.samples.iter().all(|x| !x.buckets["b"].recording));
        assert_eq!(out.ledger.recorded_seconds(), 0.0);
        assert!(out.events.is_empty());
    }

    #[test]
    fn walking_actor_triggers_recording() {
        let text = format!("{ONE_ROOM}[actor]\nid = a\nwaypoint = 0 1,2\nwaypoint = 10 4,2\nwaypoint = 20 1,2\n");
        let s = parse_scenario(&text).unwrap();
        let out = run(&s, 1).unwrap();
        assert!(out.samples.iter().any(|x| x.buckets["b"].recording));
        let kinds: Vec<_> = out.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds.first(), Some(&EventKind::RecordStart));
        assert_eq!(kinds.last(), Some(&EventKind::RecordStop));
        assert!(out.ledger.recorded_seconds() > 0.0);
    }
}
