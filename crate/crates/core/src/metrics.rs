//! Scoring a run against the expected-recording annotation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::recorder::{savings_report, StorageLedger};
use crate::scenario::Scenario;
use crate::sim::TimelineSample;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BucketScore {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl BucketScore {
    pub fn samples(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn accuracy(&self) -> f64 {
        match self.samples() {
            0 => 1.0,
            n => (self.true_pos + self.true_neg) as f64 / n as f64,
        }
    }

    fn add(&mut self, actual: bool, expected: bool) {
        match (actual, expected) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, true) => self.false_neg += 1,
            (false, false) => self.true_neg += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub sample_period: f64,
    pub samples: usize,
    pub buckets: BTreeMap<String, BucketScore>,
    pub recorded_seconds: f64,
    pub total_camera_seconds: f64,
    pub savings: f64,
    /// Recorded camera time while none of the camera's buckets was expected.
    pub fp_camera_seconds: f64,
    pub overhead: f64,
    pub bytes: u128,
}

/// True when `t` falls inside an interval, or within `lead` seconds before
/// its start.
pub fn expected_at(intervals: &[(f64, f64)], lead: f64, t: f64) -> bool {
    intervals.iter().any(|&(s, e)| t >= s - lead && t < e)
}

pub fn evaluate(samples: &[TimelineSample], scenario: &Scenario, sample_period: f64, ledger: &StorageLedger) -> MetricsReport {
    let p = &scenario.params;
    let none = Vec::new();
    let expected = |bucket: &str, t: f64| expected_at(scenario.expect.get(bucket).unwrap_or(&none), p.expect_lead, t);

    let mut buckets: BTreeMap<String, BucketScore> =
        scenario.buckets.iter().map(|b| (b.id.clone(), BucketScore::default())).collect();
    let mut n = 0;
    for k in 0.. {
        let target = k as f64 * sample_period;
        if target >= p.duration - 1e-9 {
            break;
        }
        let idx = (target / p.tick).round() as usize;
        let Some(sample) = samples.get(idx).filter(|s| (s.t - target).abs() < p.tick / 2.0) else {
            continue;
        };
        n += 1;
        for (id, score) in buckets.iter_mut() {
            let actual = sample.buckets.get(id).is_some_and(|b| b.recording);
            score.add(actual, expected(id, sample.t));
        }
    }

    let mut fp_camera_seconds = 0.0;
    for s in samples {
        for (cam, c) in &s.cameras {
            if c.channel.is_none() {
                continue;
            }
            let wanted = scenario
                .buckets
                .iter()
                .filter(|b| b.camera_ids.contains(cam))
                .any(|b| expected(&b.id, s.t));
            if !wanted {
                fp_camera_seconds += p.tick;
            }
        }
    }

    let recorded_seconds = ledger.recorded_seconds();
    let total_camera_seconds = scenario.cameras.len() as f64 * p.duration;
    MetricsReport {
        sample_period,
        samples: n,
        buckets,
        recorded_seconds,
        total_camera_seconds,
        savings: savings_report(ledger, total_camera_seconds),
        fp_camera_seconds,
        overhead: if recorded_seconds > 0.0 {
            (fp_camera_seconds / recorded_seconds).min(1.0)
        } else {
            0.0
        },
        bytes: ledger.bytes(),
    }
}

pub fn report_text(m: &MetricsReport, ledger: &StorageLedger) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples: {} every {:.4} s", m.samples, m.sample_period);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:>4} {:>4} {:>4} {:>4} {:>9}", "bucket", "TP", "FP", "FN", "TN", "accuracy");
    for (id, s) in &m.buckets {
        let _ = writeln!(
            out,
            "{:<16} {:>4} {:>4} {:>4} {:>4} {:>8.2}%",
            id,
            s.true_pos,
            s.false_pos,
            s.false_neg,
            s.true_neg,
            100.0 * s.accuracy()
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "recorded: {:.4} of {:.4} camera-seconds", m.recorded_seconds, m.total_camera_seconds);
    let _ = writeln!(out, "savings: {:.2}%", 100.0 * m.savings);
    let _ = writeln!(out, "overhead: {:.2}% ({:.4} camera-seconds)", 100.0 * m.overhead, m.fp_camera_seconds);
    let _ = writeln!(out, "storage: {} bytes at {} bit/s", m.bytes, ledger.bitrate);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recorder::RecordedSegment;
    use crate::scenario::parse_scenario;
    use crate::scene::CameraId;
    use crate::sim::{BucketSample, CameraSample};

    const TEXT: &str = "\
[params]
duration = 600
expect_lead = 0
[room]
id = r
polygon = 0,0 4,0 4,4 0,4
[camera]
id = c
kind = static
position = 3.9,2
yaw_deg = 180
hfov_deg = 70
resolution = 160x90
[bucket]
id = b
cameras = c
[expect]
bucket = b
interval = 100 300
";

    fn timeline(s: &Scenario, rec: impl Fn(f64) -> bool) -> Vec<TimelineSample> {
        (0..s.ticks())
            .map(|k| {
                let t = k as f64 * s.params.tick;
                let on = rec(t);
                TimelineSample {
                    t,
                    buckets: [("b".to_string(), BucketSample { level: 0.0, recording: on })].into(),
                    cameras: [(CameraId::new("c"), CameraSample { record: on, channel: on.then_some(0) })].into(),
                    shots: BTreeMap::new(),
                    detections: BTreeMap::new(),
                }
            })
            .collect()
    }

    fn ledger(segments: &[(f64, f64)]) -> StorageLedger {
        let mut l = StorageLedger::default();
        for &(start, end) in segments {
            l.segments.push(RecordedSegment { camera: CameraId::new("c"), start, end });
        }
        l
    }

    #[test]
    fn perfect_run() {
        let s = parse_scenario(TEXT).unwrap();
        let tl = timeline(&s, |t| (100.0..300.0).contains(&t));
        let m = evaluate(&tl, &s, 10.0, &ledger(&[(100.0, 300.0)]));
        assert_eq!(m.samples, 60);
        assert_eq!(m.buckets["b"].accuracy(), 1.0);
        assert!(m.overhead.abs() < 1e-9);
    }

    #[test]
    fn always_recording() {
        let s = parse_scenario(TEXT).unwrap();
        let tl = timeline(&s, |_| true);
        let m = evaluate(&tl, &s, 10.0, &ledger(&[(0.0, 600.0)]));
        assert_eq!(m.buckets["b"].false_neg, 0);
        assert_eq!(m.savings, 0.0);
    }

    #[test]
    fn three_false_positives_in_sixty() {
        let s = parse_scenario(TEXT).unwrap();
        // on from 70 s: samples at 70, 80, 90 are FP
        let tl = timeline(&s, |t| (70.0..300.0).contains(&t));
        let m = evaluate(&tl, &s, 10.0, &ledger(&[(70.0, 300.0)]));
        let b = m.buckets["b"];
        assert_eq!((b.false_pos, b.false_neg, b.samples()), (3, 0, 60));
        assert!((b.accuracy() - 0.95).abs() < 1e-12);
        assert!((m.overhead - 30.0 / 230.0).abs() < 1e-6);
    }

    #[test]
    fn lead_extends_expectation() {
        assert!(expected_at(&[(10.0, 20.0)], 2.0, 8.0));
        assert!(!expected_at(&[(10.0, 20.0)], 2.0, 7.9));
        assert!(!expected_at(&[(10.0, 20.0)], 2.0, 20.0));
    }
}
