//! Switch matrix and multi-channel recorder model.
//!
//! Up to 20 camera inputs share 8 recorder channels. Requested cameras get a
//! free channel in order of priority; a camera that holds a channel keeps it
//! until it is no longer requested.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::scene::CameraId;

pub const MAX_INPUTS: usize = 20;
pub const CHANNELS: usize = 8;
/// Average recording bitrate, bits per second.
pub const DEFAULT_BITRATE: u64 = 102_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEdge {
    Start,
    Stop,
}

impl SegmentEdge {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentEdge::Start => "record_start",
            SegmentEdge::Stop => "record_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordSegmentEvent {
    pub camera: CameraId,
    pub channel: usize,
    pub edge: SegmentEdge,
    pub t: f64,
    /// Start time of the segment this event opens or closes.
    pub segment_start: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixState {
    inputs: Vec<CameraId>,
    channels: [Option<(CameraId, f64)>; CHANNELS],
    pending: Vec<CameraId>,
}

impl MatrixState {
    pub fn new(inputs: Vec<CameraId>) -> Result<Self> {
        if inputs.len() > MAX_INPUTS {
            return Err(Error::invalid(
                "matrix",
                format!("{} inputs exceed the {MAX_INPUTS}-input matrix", inputs.len()),
            ));
        }
        let unique: BTreeSet<&CameraId> = inputs.iter().collect();
        if unique.len() != inputs.len() {
            return Err(Error::invalid("matrix", "duplicate matrix input"));
        }
        Ok(MatrixState {
            inputs,
            channels: Default::default(),
            pending: Vec::new(),
        })
    }

    pub fn inputs(&self) -> &[CameraId] {
        &self.inputs
    }

    pub fn channels(&self) -> &[Option<(CameraId, f64)>; CHANNELS] {
        &self.channels
    }

    pub fn pending(&self) -> &[CameraId] {
        &self.pending
    }

    pub fn channel_of(&self, camera: &CameraId) -> Option<usize> {
        self.channels
            .iter()
            .position(|c| c.as_ref().is_some_and(|(id, _)| id == camera))
    }

    pub fn occupied(&self) -> usize {
        self.channels.iter().filter(|c| c.is_some()).count()
    }

    /// Closes segments of cameras no longer requested, then assigns waiting
    /// cameras to free channels by descending priority (ties by id). Cameras
    /// that do not fit stay pending; nothing is preempted.
    pub fn tick(
        &mut self,
        requested: &BTreeSet<CameraId>,
        priority: &BTreeMap<CameraId, f64>,
        t: f64,
    ) -> Result<Vec<RecordSegmentEvent>> {
        for cam in requested {
            if !self.inputs.contains(cam) {
                return Err(Error::UnknownCamera(cam.to_string()));
            }
            if !priority.contains_key(cam) {
                return Err(Error::invalid("matrix", format!("no priority for camera `{cam}`")));
            }
        }
        let mut events = Vec::new();
        for (channel, slot) in self.channels.iter_mut().enumerate() {
            if let Some((cam, start)) = slot.take_if(|(cam, _)| !requested.contains(cam)) {
                events.push(RecordSegmentEvent {
                    camera: cam,
                    channel,
                    edge: SegmentEdge::Stop,
                    t,
                    segment_start: start,
                });
            }
        }
        let mut waiting: Vec<&CameraId> = requested.iter().filter(|c| self.channel_of(c).is_none()).collect();
        waiting.sort_by(|a, b| priority[*b].total_cmp(&priority[*a]).then_with(|| a.cmp(b)));
        let mut waiting = waiting.into_iter();
        for (channel, slot) in self.channels.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let Some(cam) = waiting.next() else { break };
            *slot = Some((cam.clone(), t));
            events.push(RecordSegmentEvent {
                camera: cam.clone(),
                channel,
                edge: SegmentEdge::Start,
                t,
                segment_start: t,
            });
        }
        self.pending = waiting.cloned().collect();
        Ok(events)
    }

    /// Stops every active channel at `t`.
    pub fn finish(&mut self, t: f64) -> Vec<RecordSegmentEvent> {
        self.pending.clear();
        self.channels
            .iter_mut()
            .enumerate()
            .filter_map(|(channel, slot)| {
                slot.take().map(|(camera, start)| RecordSegmentEvent {
                    camera,
                    channel,
                    edge: SegmentEdge::Stop,
                    t,
                    segment_start: start,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSegment {
    pub camera: CameraId,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct StorageLedger {
    pub segments: Vec<RecordedSegment>,
    pub bitrate: u64,
}

impl Default for StorageLedger {
    fn default() -> Self {
        StorageLedger::new(DEFAULT_BITRATE)
    }
}

impl StorageLedger {
    pub fn new(bitrate: u64) -> Self {
        StorageLedger {
            segments: Vec::new(),
            bitrate,
        }
    }

    /// Records every closed segment among `events`.
    pub fn apply(&mut self, events: &[RecordSegmentEvent]) {
        for e in events.iter().filter(|e| e.edge == SegmentEdge::Stop) {
            if e.t > e.segment_start {
                self.segments.push(RecordedSegment {
                    camera: e.camera.clone(),
                    start: e.segment_start,
                    end: e.t,
                });
            }
        }
    }

    pub fn camera_seconds(&self) -> BTreeMap<CameraId, f64> {
        let mut out = BTreeMap::new();
        for s in &self.segments {
            *out.entry(s.camera.clone()).or_insert(0.0) += s.end - s.start;
        }
        out
    }

    pub fn recorded_seconds(&self) -> f64 {
        self.segments.iter().map(|s| s.end - s.start).sum()
    }

    pub fn bytes(&self) -> u128 {
        storage_bytes(self.recorded_seconds(), self.bitrate)
    }
}

/// Bytes written for `duration` seconds at `bitrate` bits per second, exact
/// at millisecond resolution.
pub fn storage_bytes(duration: f64, bitrate: u64) -> u128 {
    let ms = (duration.max(0.0) * 1000.0).round() as u128;
    (ms * u128::from(bitrate) + 4000) / 8000
}

/// Fraction of camera time not recorded.
pub fn savings_report(ledger: &StorageLedger, total_camera_seconds: f64) -> f64 {
    (1.0 - ledger.recorded_seconds() / total_camera_seconds).clamp(0.0, 1.0)
}
