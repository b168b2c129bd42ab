//! Camera selection by leaky buckets.
//!
//! Every room owns a bucket holding its integration level. Zones drawn in
//! camera images pour `weight × activity` into the buckets they are wired
//! to, a constant leak drains them, and a bucket records its cameras while
//! the level stays above its release threshold.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::scene::CameraId;

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub camera: CameraId,
    /// Pixel-space polygon in the camera's frame.
    pub polygon: Vec<(f64, f64)>,
    /// Level per second at full activity.
    pub weight: f64,
    pub bucket_ids: Vec<String>,
}

/// Threshold and drain settings shared by buckets unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketParams {
    pub theta_on: f64,
    pub theta_off: f64,
    pub leak: f64,
    pub level_max: f64,
}

impl Default for BucketParams {
    fn default() -> Self {
        BucketParams::with_theta(1.0, 0.1)
    }
}

impl BucketParams {
    /// Release at half the trigger level, cap at three times it.
    pub fn with_theta(theta_on: f64, leak: f64) -> Self {
        BucketParams {
            theta_on,
            theta_off: 0.5 * theta_on,
            leak,
            level_max: 3.0 * theta_on,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_off > 0.0
            && self.theta_off <= self.theta_on
            && self.theta_on <= self.level_max
            && self.leak >= 0.0
            && self.level_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "bucket",
                format!(
                    "need 0 < theta_off ({}) <= theta_on ({}) <= level_max ({}) and leak ({}) >= 0",
                    self.theta_off, self.theta_on, self.level_max, self.leak
                ),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub id: String,
    pub level: f64,
    pub params: BucketParams,
    pub camera_ids: Vec<CameraId>,
    pub recording: bool,
}

impl Bucket {
    pub fn new(id: &str, params: BucketParams, camera_ids: Vec<CameraId>) -> Self {
        Bucket {
            id: id.to_string(),
            level: 0.0,
            params,
            camera_ids,
            recording: false,
        }
    }
}

/// Advances one bucket by `dt` seconds and returns `(level, recording)`.
pub fn bucket_step(bucket: &mut Bucket, inflow: f64, dt: f64) -> (f64, bool) {
    let p = &bucket.params;
    bucket.level = (bucket.level + (inflow - p.leak) * dt).clamp(0.0, p.level_max);
    if bucket.level >= p.theta_on {
        bucket.recording = true;
    } else if bucket.level < p.theta_off {
        bucket.recording = false;
    }
    (bucket.level, bucket.recording)
}

/// Sum of `weight × activity` over the zones wired to `bucket_id`. Zones
/// missing from `activities` count as idle.
pub fn inflow_for_bucket(activities: &BTreeMap<String, f64>, zones: &[Zone], bucket_id: &str) -> f64 {
    zones
        .iter()
        .filter(|z| z.bucket_ids.iter().any(|b| b == bucket_id))
        .map(|z| z.weight * activities.get(&z.id).copied().unwrap_or(0.0))
        .sum()
}

/// Seconds for an empty bucket to reach `theta` at constant net inflow, or
/// `None` when the inflow does not beat the leak.
pub fn time_to_threshold(inflow: f64, leak: f64, theta: f64) -> Option<f64> {
    (inflow > leak).then(|| theta / (inflow - leak))
}

#[derive(Debug, Clone)]
pub struct SelectionState {
    pub buckets: BTreeMap<String, Bucket>,
    pub zones: Vec<Zone>,
    pub camera_flags: BTreeMap<CameraId, bool>,
}

impl SelectionState {
    pub fn new(buckets: Vec<Bucket>, zones: Vec<Zone>) -> Result<Self> {
        let buckets: BTreeMap<String, Bucket> = buckets.into_iter().map(|b| (b.id.clone(), b)).collect();
        for z in &zones {
            if !(z.weight >= 0.0) {
                return Err(Error::invalid("zone", format!("`{}` weight must be non-negative", z.id)));
            }
            if z.bucket_ids.is_empty() {
                return Err(Error::invalid("zone", format!("`{}` feeds no bucket", z.id)));
            }
            if let Some(missing) = z.bucket_ids.iter().find(|b| !buckets.contains_key(*b)) {
                return Err(Error::Dangling {
                    kind: "bucket",
                    id: missing.clone(),
                    from: format!("zone `{}`", z.id),
                });
            }
        }
        for b in buckets.values() {
            b.params.validate()?;
        }
        let camera_flags = buckets
            .values()
            .flat_map(|b| b.camera_ids.iter().cloned())
            .map(|c| (c, false))
            .collect();
        Ok(SelectionState {
            buckets,
            zones,
            camera_flags,
        })
    }

    pub fn recording_cameras(&self) -> BTreeSet<CameraId> {
        self.camera_flags
            .iter()
            .filter(|(_, &on)| on)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// Highest level among the buckets connected to `camera`.
    pub fn camera_priority(&self, camera: &CameraId) -> f64 {
        self.buckets
            .values()
            .filter(|b| b.camera_ids.contains(camera))
            .map(|b| b.level)
            .fold(0.0, f64::max)
    }
}

/// Steps every bucket and recomputes the per-camera record flags as the OR
/// of each camera's buckets.
pub fn selection_tick<'a>(state: &'a mut SelectionState, activities: &BTreeMap<String, f64>, dt: f64) -> &'a BTreeMap<CameraId, bool> {
    for bucket in state.buckets.values_mut() {
        let inflow = inflow_for_bucket(activities, &state.zones, &bucket.id);
        bucket_step(bucket, inflow, dt);
    }
    for flag in state.camera_flags.values_mut() {
        *flag = false;
    }
    for bucket in state.buckets.values().filter(|b| b.recording) {
        for cam in &bucket.camera_ids {
            state.camera_flags.insert(cam.clone(), true);
        }
    }
    &state.camera_flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bucket(leak: f64) -> Bucket {
        Bucket::new("b", BucketParams::with_theta(1.0, leak), vec![CameraId::new("c")])
    }

    fn zone(id: &str, cam: &str, weight: f64, buckets: &[&str]) -> Zone {
        Zone {
            id: id.into(),
            camera: CameraId::new(cam),
            polygon: vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)],
            weight,
            bucket_ids: buckets.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn empty_bucket_stays_empty() {
        let mut b = bucket(0.1);
        assert_eq!(bucket_step(&mut b, 0.0, 0.1), (0.0, false));
    }

    #[test]
    fn hysteresis_holds_recording_above_release() {
        let mut b = bucket(0.1);
        b.level = 1.0;
        b.recording = true;
        let (level, rec) = bucket_step(&mut b, 0.0, 0.1);
        assert!(level < 1.0 && level >= 0.5);
        assert!(rec);
    }

    #[test]
    fn level_is_capped() {
        let mut b = bucket(0.0);
        bucket_step(&mut b, 100.0, 1.0);
        assert_eq!(b.level, 3.0);
    }

    #[test]
    fn releases_below_theta_off() {
        let mut b = bucket(1.0);
        b.level = 0.55;
        b.recording = true;
        let (level, rec) = bucket_step(&mut b, 0.0, 0.1);
        assert!((level - 0.45).abs() < 1e-12);
        assert!(!rec);
    }

    #[test]
    fn inflow_examples() {
        let zones = vec![zone("z1", "c1", 2.0, &["b"]), zone("z2", "c2", 5.0, &["other"])];
        let mut act = BTreeMap::new();
        assert_eq!(inflow_for_bucket(&act, &zones, "b"), 0.0);
        act.insert("z1".to_string(), 0.5);
        act.insert("z2".to_string(), 1.0);
        assert_eq!(inflow_for_bucket(&act, &zones, "b"), 1.0);
    }

    #[test]
    fn threshold_time_examples() {
        assert_eq!(time_to_threshold(1.0, 0.0, 5.0), Some(5.0));
        assert_eq!(time_to_threshold(0.3, 0.3, 5.0), None);
        assert!((time_to_threshold(0.8, 0.3, 2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_time_matches_fine_simulation() {
        let mut b = Bucket::new("b", BucketParams { theta_on: 2.0, theta_off: 1.0, leak: 0.3, level_max: 6.0 }, vec![]);
        let dt = 0.01;
        let mut k = 0u32;
        while !b.recording {
            k += 1;
            bucket_step(&mut b, 0.8, dt);
        }
        assert!((f64::from(k) * dt - 4.0).abs() <= dt);
    }

    #[test]
    fn tick_flags_follow_wiring() {
        let c = |s: &str| CameraId::new(s);
        let buckets = vec![
            Bucket::new("A", BucketParams::default(), vec![c("c1"), c("c2")]),
            Bucket::new("B", BucketParams::default(), vec![c("c2"), c("c3")]),
        ];
        let mut st = SelectionState::new(buckets, vec![zone("z", "c1", 1.0, &["A"])]).unwrap();
        let none = BTreeMap::new();
        assert!(selection_tick(&mut st, &none, 0.1).values().all(|&f| !f));

        st.buckets.get_mut("A").unwrap().level = 2.0;
        st.buckets.get_mut("A").unwrap().recording = true;
        selection_tick(&mut st, &none, 0.1);
        let on: Vec<_> = st.recording_cameras().into_iter().collect();
        assert_eq!(on, vec![c("c1"), c("c2")]);

        // shared camera c2 stays on when only B records
        st.buckets.get_mut("A").unwrap().level = 0.0;
        st.buckets.get_mut("B").unwrap().level = 2.0;
        st.buckets.get_mut("B").unwrap().recording = true;
        selection_tick(&mut st, &none, 0.1);
        let on: Vec<_> = st.recording_cameras().into_iter().collect();
        assert_eq!(on, vec![c("c2"), c("c3")]);
    }

    #[test]
    fn dangling_bucket_reference() {
        let err = SelectionState::new(vec![bucket(0.1)], vec![zone("z", "c", 1.0, &["nope"])]).unwrap_err();
        assert!(matches!(err, Error::Dangling { kind: "bucket", .. }));
    }

    #[test]
    fn bad_thresholds_rejected() {
        let p = BucketParams { theta_on: 1.0, theta_off: 2.0, leak: 0.1, level_max: 3.0 };
        assert!(p.validate().is_err());
    }
}
