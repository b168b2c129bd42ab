//! Run artifacts: timeline and event CSVs, metrics, report and storage
//! summaries. All numbers are written with four decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cinema::calibration::PtzPose;
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::metrics::MetricsReport;
use crate::recorder::{storage_bytes, StorageLedger};
use crate::scene::CameraId;
use crate::sim::{BucketSample, CameraSample, Event, EventKind, ShotSample, TimelineSample};

pub const TIMELINE_FILE: &str = "timeline.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const STORAGE_FILE: &str = "storage.txt";
pub const SCENARIO_FILE: &str = "scenario.txt";

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b { "1" } else { "0" }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn bad(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::invalid(
        "csv",
        format!("{}: record {row}: {}", path.display(), message.into()),
    )
}

pub fn write_timeline(path: &Path, samples: &[TimelineSample]) -> Result<()> {
    let to_err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&to_err)?;
    let Some(first) = samples.first() else {
        w.write_record(["t"]).map_err(&to_err)?;
        return w.flush().map_err(|e| Error::io(path, e));
    };
    let mut header = vec!["t".to_string()];
    for id in first.buckets.keys() {
        header.push(format!("level:{id}"));
        header.push(format!("bucket_rec:{id}"));
    }
    for id in first.cameras.keys() {
        header.push(format!("record:{id}"));
        header.push(format!("channel:{id}"));
    }
    for id in first.detections.keys() {
        header.push(format!("detections:{id}"));
    }
    for id in first.shots.keys() {
        for col in ["canvas_x", "canvas_y", "canvas_w", "canvas_h", "pan", "tilt", "zoom"] {
            header.push(format!("{col}:{id}"));
        }
    }
    w.write_record(&header).map_err(&to_err)?;
    for s in samples {
        let mut row = vec![f4(s.t)];
        for b in s.buckets.values() {
            row.push(f4(b.level));
            row.push(flag(b.recording).into());
        }
        for c in s.cameras.values() {
            row.push(flag(c.record).into());
            row.push(c.channel.map(|ch| ch.to_string()).unwrap_or_default());
        }
        for n in s.detections.values() {
            row.push(n.to_string());
        }
        for shot in s.shots.values() {
            let r = shot.canvas;
            row.extend([r.map(|r| r.x), r.map(|r| r.y), r.map(|r| r.w), r.map(|r| r.h)].map(opt4));
            let p = shot.pose;
            row.extend([p.map(|p| p.pan), p.map(|p| p.tilt), p.map(|p| p.zoom)].map(opt4));
        }
        w.write_record(&row).map_err(&to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_timeline(path: &Path) -> Result<Vec<TimelineSample>> {
    let to_err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&to_err)?;
    let header: Vec<String> = r.headers().map_err(&to_err)?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec.map_err(&to_err)?;
        let num = |i: usize| -> Result<Option<f64>> {
            let v = rec.get(i).unwrap_or("");
            if v.is_empty() {
                return Ok(None);
            }
            v.parse().map(Some).map_err(|_| bad(path, row_no + 1, format!("bad number `{v}` in `{}`", header[i])))
        };
        let mut s = TimelineSample {
            t: num(0)?.ok_or_else(|| bad(path, row_no + 1, "missing t"))?,
            buckets: BTreeMap::new(),
            cameras: BTreeMap::new(),
            shots: BTreeMap::new(),
            detections: BTreeMap::new(),
        };
        let mut poses: BTreeMap<CameraId, [Option<f64>; 7]> = BTreeMap::new();
        for (i, col) in header.iter().enumerate().skip(1) {
            let (kind, id) = col
                .split_once(':')
                .ok_or_else(|| bad(path, 0, format!("unexpected column `{col}`")))?;
            let v = num(i)?;
            match kind {
                "level" => s.buckets.entry(id.into()).or_insert(BucketSample { level: 0.0, recording: false }).level = v.unwrap_or(0.0),
                "bucket_rec" => {
                    s.buckets.entry(id.into()).or_insert(BucketSample { level: 0.0, recording: false }).recording = v == Some(1.0)
                }
                "record" => s.cameras.entry(id.into()).or_insert(CameraSample { record: false, channel: None }).record = v == Some(1.0),
                "channel" => {
                    s.cameras.entry(id.into()).or_insert(CameraSample { record: false, channel: None }).channel = v.map(|c| c as usize)
                }
                "detections" => {
                    s.detections.insert(id.into(), v.unwrap_or(0.0) as usize);
                }
                "canvas_x" | "canvas_y" | "canvas_w" | "canvas_h" | "pan" | "tilt" | "zoom" => {
                    let slot = ["canvas_x", "canvas_y", "canvas_w", "canvas_h", "pan", "tilt", "zoom"]
                        .iter()
                        .position(|k| *k == kind)
                        .expect("matched above");
                    poses.entry(id.into()).or_default()[slot] = v;
                }
                _ => return Err(bad(path, 0, format!("unexpected column `{col}`"))),
            }
        }
        for (id, v) in poses {
            let canvas = match v[..4] {
                [Some(x), Some(y), Some(w), Some(h)] => Some(Rect::new(x, y, w, h)),
                _ => None,
            };
            let pose = match v[4..] {
                [Some(pan), Some(tilt), Some(zoom)] => Some(PtzPose { pan, tilt, zoom }),
                _ => None,
            };
            s.shots.insert(id, ShotSample { canvas, pose });
        }
        out.push(s);
    }
    Ok(out)
}

const EVENT_HEADER: [&str; 12] = [
    "t", "event", "camera", "channel", "segment_start", "canvas_x", "canvas_y", "canvas_w", "canvas_h", "pan", "tilt",
    "zoom",
];

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let to_err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&to_err)?;
    w.write_record(EVENT_HEADER).map_err(&to_err)?;
    for e in events {
        let r = e.canvas;
        let p = e.pose;
        let row = [
            f4(e.t),
            e.kind.as_str().to_string(),
            e.camera.to_string(),
            e.channel.map(|c| c.to_string()).unwrap_or_default(),
            opt4(e.segment_start),
            opt4(r.map(|r| r.x)),
            opt4(r.map(|r| r.y)),
            opt4(r.map(|r| r.w)),
            opt4(r.map(|r| r.h)),
            opt4(p.map(|p| p.pan)),
            opt4(p.map(|p| p.tilt)),
            opt4(p.map(|p| p.zoom)),
        ];
        w.write_record(&row).map_err(&to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let to_err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&to_err)?;
    let mut out = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec.map_err(&to_err)?;
        if rec.len() != EVENT_HEADER.len() {
            return Err(bad(path, row_no + 1, "wrong number of fields"));
        }
        let num = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(path, row_no + 1, format!("bad number `{v}`"))),
            }
        };
        let kind = EventKind::parse(&rec[1]).ok_or_else(|| bad(path, row_no + 1, format!("unknown event `{}`", &rec[1])))?;
        let canvas = match (num(5)?, num(6)?, num(7)?, num(8)?) {
            (Some(x), Some(y), Some(w), Some(h)) => Some(Rect::new(x, y, w, h)),
            _ => None,
        };
        let pose = match (num(9)?, num(10)?, num(11)?) {
            (Some(pan), Some(tilt), Some(zoom)) => Some(PtzPose { pan, tilt, zoom }),
            _ => None,
        };
        out.push(Event {
            t: num(0)?.ok_or_else(|| bad(path, row_no + 1, "missing t"))?,
            kind,
            camera: CameraId::new(&rec[2]),
            channel: num(3)?.map(|c| c as usize),
            segment_start: num(4)?,
            canvas,
            pose,
        });
    }
    Ok(out)
}

/// Rebuilds the storage ledger from recorder events.
pub fn ledger_from_events(events: &[Event], bitrate: u64) -> StorageLedger {
    let mut ledger = StorageLedger::new(bitrate);
    let segments: Vec<_> = events.iter().filter_map(Event::segment).collect();
    ledger.apply(&segments);
    ledger
}

pub fn write_metrics(path: &Path, m: &MetricsReport) -> Result<()> {
    let to_err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&to_err)?;
    w.write_record(["scope", "samples", "tp", "fp", "fn", "tn", "accuracy", "savings", "overhead"])
        .map_err(&to_err)?;
    for (id, s) in &m.buckets {
        let row = [
            format!("bucket:{id}"),
            s.samples().to_string(),
            s.true_pos.to_string(),
            s.false_pos.to_string(),
            s.false_neg.to_string(),
            s.true_neg.to_string(),
            f4(s.accuracy()),
            String::new(),
            String::new(),
        ];
        w.write_record(&row).map_err(&to_err)?;
    }
    let row = ["global".to_string(), m.samples.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), f4(m.savings), f4(m.overhead)];
    w.write_record(&row).map_err(&to_err)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn storage_text(ledger: &StorageLedger, total_camera_seconds: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "bitrate: {} bit/s", ledger.bitrate);
    for (cam, secs) in ledger.camera_seconds() {
        let _ = writeln!(out, "{cam}: {} s, {} bytes", f4(secs), storage_bytes(secs, ledger.bitrate));
    }
    let _ = writeln!(
        out,
        "total: {} of {} camera-seconds, {} bytes",
        f4(ledger.recorded_seconds()),
        f4(total_camera_seconds),
        ledger.bytes()
    );
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
