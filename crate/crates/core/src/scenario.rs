//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [params]
//! duration = 600
//!
//! [room]
//! id = living
//! polygon = 2,0 8,0 8,5 2,5
//!
//! [walls]
//! wall = 2,0 2,8
//! door = 2,1.5 2,2.5
//!
//! [camera]
//! id = living_ov
//! kind = overview
//! position = 7.9,2.5
//! yaw_deg = 180
//! hfov_deg = 60
//! resolution = 640x360
//!
//! [actor]
//! id = alice
//! waypoint = 0 1,1
//! waypoint = 10 5,2 90
//!
//! [zone]
//! id = living_all
//! camera = living_ov
//! floor = 2,0 8,0 8,5 2,5
//! weight = 15
//! buckets = living
//!
//! [bucket]
//! id = living
//! cameras = living_ov living_ptz
//!
//! [expect]
//! bucket = living
//! interval = 50 250
//! ```
//!
//! Every section but `[params]` and `[walls]` describes one entity and may
//! repeat. Waypoints read `t x,y [facing_deg]`. A zone gives either a pixel
//! `polygon` or a `floor` polygon in meters, which is projected into the
//! camera as a prism from the floor to head height.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::cinema::shot::SteadyParams;
use crate::cinema::{ComposeParams, DiffParams, ShotParams};
use crate::detection::SimDetectorParams;
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Segment, Vec2};
use crate::recorder::{DEFAULT_BITRATE, MAX_INPUTS};
use crate::scene::{Actor, CameraConfig, CameraKind, Floorplan, PtzLimits, Room, Waypoint};
use crate::selection::{Bucket, BucketParams, Zone};
use crate::video::BgsParams;

/// Top of the prism a `floor` zone is extruded to, meters.
pub const FLOOR_ZONE_HEIGHT: f64 = 1.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub sample_period: f64,
    /// Lead added before each expected interval when scoring.
    pub expect_lead: f64,
    pub bgs: BgsParams,
    pub min_area: usize,
    pub pool_margin: f64,
    pub detector: SimDetectorParams,
    pub compose: ComposeParams,
    pub diff: DiffParams,
    pub shot: ShotParams,
    pub steady: SteadyParams,
    pub theta_on: f64,
    pub theta_off: Option<f64>,
    pub leak: f64,
    pub level_max: Option<f64>,
    pub bitrate: u64,
    pub calib_grid: usize,
    pub calib_zooms: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            duration: 600.0,
            tick: 0.1,
            seed: 0,
            sample_period: 10.0,
            expect_lead: 2.0,
            bgs: BgsParams::default(),
            min_area: 64,
            pool_margin: 0.25,
            detector: SimDetectorParams::default(),
            compose: ComposeParams::default(),
            diff: DiffParams::default(),
            shot: ShotParams::default(),
            steady: SteadyParams::default(),
            theta_on: 1.0,
            theta_off: None,
            leak: 0.1,
            level_max: None,
            bitrate: DEFAULT_BITRATE,
            calib_grid: 5,
            calib_zooms: 3,
        }
    }
}

impl Params {
    /// Bucket thresholds with per-bucket overrides applied on top of the
    /// scenario-wide values.
    fn bucket(&self, theta_on: Option<f64>, theta_off: Option<f64>, leak: Option<f64>, level_max: Option<f64>) -> BucketParams {
        let theta = theta_on.unwrap_or(self.theta_on);
        let mut p = BucketParams::with_theta(theta, leak.unwrap_or(self.leak));
        if let Some(off) = theta_off.or(self.theta_off) {
            p.theta_off = off;
        }
        if let Some(max) = level_max.or(self.level_max) {
            p.level_max = max;
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: Params,
    pub floorplan: Floorplan,
    pub cameras: Vec<CameraConfig>,
    pub actors: Vec<Actor>,
    pub zones: Vec<Zone>,
    pub buckets: Vec<Bucket>,
    /// Per bucket, sorted disjoint `(start, end)` intervals in which
    /// recording should be on.
    pub expect: BTreeMap<String, Vec<(f64, f64)>>,
}

impl Scenario {
    pub fn camera(&self, id: &str) -> Option<&CameraConfig> {
        self.cameras.iter().find(|c| c.id.as_str() == id)
    }

    pub fn ticks(&self) -> usize {
        (self.params.duration / self.params.tick).round() as usize
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Block {
    kind: String,
    line: usize,
    entries: Vec<Entry>,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl Block {
    fn all<'a, 'k>(&'a self, key: &'k str) -> impl Iterator<Item = &'a Entry> + use<'a, 'k> {
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.all(key).last()
    }

    fn required(&self, key: &str) -> Result<&Entry> {
        self.get(key)
            .ok_or_else(|| perr(self.line, format!("[{}] is missing `{key}`", self.kind)))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(perr(e.line, format!("unknown key `{}` in [{}]", e.key, self.kind))),
            None => Ok(()),
        }
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|e| e.number()).transpose()
    }
}

impl Entry {
    fn number(&self) -> Result<f64> {
        parse_f64(&self.value, self.line)
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| perr(line, format!("expected a number, got `{s}`")))
}

fn parse_point(s: &str, line: usize) -> Result<Vec2> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| perr(line, format!("expected `x,y`, got `{s}`")))?;
    Ok(Vec2::new(parse_f64(x, line)?, parse_f64(y, line)?))
}

fn parse_points(s: &str, line: usize) -> Result<Vec<Vec2>> {
    s.split_whitespace().map(|p| parse_point(p, line)).collect()
}

fn parse_pair(s: &str, line: usize) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split([',', ' ']).filter(|p| !p.is_empty()).collect();
    match parts[..] {
        [a, b] => Ok((parse_f64(a, line)?, parse_f64(b, line)?)),
        _ => Err(perr(line, format!("expected two numbers, got `{s}`"))),
    }
}

fn parse_list(s: &str) -> Vec<String> {
    s.split([',', ' ']).filter(|p| !p.is_empty()).map(str::to_string).collect()
}

fn split_blocks(text: &str) -> Result<Vec<Block>> {
    let mut blocks: Vec<Block> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(kind) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            blocks.push(Block {
                kind: kind.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, format!("expected `key = value`, got `{content}`")))?;
        let block = blocks
            .last_mut()
            .ok_or_else(|| perr(line, "key outside of any section"))?;
        block.entries.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(blocks)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let blocks = split_blocks(text)?;
    let mut params = Params::default();
    let mut rooms = Vec::new();
    let (mut walls, mut doors) = (Vec::new(), Vec::new());
    let mut cameras: Vec<(CameraConfig, usize)> = Vec::new();
    let mut actors = Vec::new();
    let mut zone_blocks = Vec::new();
    let mut buckets = Vec::new();
    let mut expect: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut expect_lines = BTreeMap::new();

    for b in &blocks {
        match b.kind.as_str() {
            "params" => parse_params(b, &mut params)?,
            "room" => {
                b.check_keys(&["id", "polygon"])?;
                let id = b.required("id")?.value.clone();
                let poly = b.required("polygon")?;
                if rooms.iter().any(|r: &Room| r.id == id) {
                    return Err(perr(b.line, format!("duplicate room id `{id}`")));
                }
                rooms.push(Room {
                    id,
                    polygon: parse_points(&poly.value, poly.line)?,
                });
            }
            "walls" => {
                b.check_keys(&["wall", "door"])?;
                for e in &b.entries {
                    let pts = parse_points(&e.value, e.line)?;
                    let [a, c] = pts[..] else {
                        return Err(perr(e.line, "a wall or door needs two end points"));
                    };
                    let seg = Segment::new(a, c);
                    if e.key == "wall" { walls.push(seg) } else { doors.push(seg) }
                }
            }
            "camera" => {
                let cam = parse_camera(b, &cameras)?;
                if cameras.iter().any(|(c, _)| c.id == cam.id) {
                    return Err(perr(b.line, format!("duplicate camera id `{}`", cam.id)));
                }
                cameras.push((cam, b.line));
            }
            "actor" => {
                let actor = parse_actor(b)?;
                if actors.iter().any(|a: &Actor| a.id == actor.id) {
                    return Err(perr(b.line, format!("duplicate actor id `{}`", actor.id)));
                }
                actors.push(actor);
            }
            "zone" => zone_blocks.push(b),
            "bucket" => {
                b.check_keys(&["id", "cameras", "theta_on", "theta_off", "leak", "level_max"])?;
                let id = b.required("id")?.value.clone();
                if buckets.iter().any(|x: &Bucket| x.id == id) {
                    return Err(perr(b.line, format!("duplicate bucket id `{id}`")));
                }
                let p = params_for_bucket(b, &params)?;
                p.validate().map_err(|e| perr(b.line, e.to_string()))?;
                let cams = b.get("cameras").map(|e| parse_list(&e.value)).unwrap_or_default();
                buckets.push(Bucket::new(&id, p, cams.iter().map(|c| c.as_str().into()).collect()));
            }
            "expect" => {
                b.check_keys(&["bucket", "interval"])?;
                let bucket = b.required("bucket")?.value.clone();
                expect_lines.insert(bucket.clone(), b.line);
                let list = expect.entry(bucket).or_default();
                for e in b.all("interval") {
                    let (s, t) = parse_pair(&e.value, e.line)?;
                    if !(t > s) || list.last().is_some_and(|&(_, prev)| s < prev) {
                        return Err(perr(e.line, "intervals must be non-empty, sorted and disjoint"));
                    }
                    list.push((s, t));
                }
            }
            other => return Err(perr(b.line, format!("unknown section [{other}]"))),
        }
    }

    if !(params.duration > 0.0) || !(params.tick > 0.0) || !(params.sample_period > 0.0) {
        return Err(perr(1, "duration, tick and sample_period must be positive"));
    }
    validate_params(&params)?;
    let floorplan = Floorplan::new(rooms, walls, doors)?;

    // references between cameras
    let ids: BTreeSet<String> = cameras.iter().map(|(c, _)| c.id.to_string()).collect();
    for (cam, _) in &cameras {
        if let Some(ov) = &cam.paired_overview {
            let target = cameras.iter().find(|(c, _)| c.id == *ov).ok_or_else(|| Error::Dangling {
                kind: "camera",
                id: ov.to_string(),
                from: format!("camera `{}`", cam.id),
            })?;
            if target.0.kind != CameraKind::Overview {
                return Err(perr(target.1, format!("`{ov}` is paired with a ptz but is not an overview camera")));
            }
        }
        cam.validate()?;
    }
    if cameras.len() > MAX_INPUTS {
        return Err(Error::invalid("scenario", format!("{} cameras exceed the matrix inputs", cameras.len())));
    }
    let cameras: Vec<CameraConfig> = cameras.into_iter().map(|(c, _)| c).collect();

    let mut zones = Vec::new();
    for b in zone_blocks {
        let zone = parse_zone(b, &cameras)?;
        if zones.iter().any(|z: &Zone| z.id == zone.id) {
            return Err(perr(b.line, format!("duplicate zone id `{}`", zone.id)));
        }
        if let Some(missing) = zone.bucket_ids.iter().find(|id| !buckets.iter().any(|x| &x.id == *id)) {
            return Err(Error::Dangling {
                kind: "bucket",
                id: missing.clone(),
                from: format!("zone `{}`", zone.id),
            });
        }
        zones.push(zone);
    }
    for b in &buckets {
        if let Some(missing) = b.camera_ids.iter().find(|c| !ids.contains(c.as_str())) {
            return Err(Error::Dangling {
                kind: "camera",
                id: missing.to_string(),
                from: format!("bucket `{}`", b.id),
            });
        }
    }
    for bucket in expect.keys() {
        if !buckets.iter().any(|b| &b.id == bucket) {
            return Err(Error::Dangling {
                kind: "bucket",
                id: bucket.clone(),
                from: format!("[expect] at line {}", expect_lines[bucket]),
            });
        }
    }

    Ok(Scenario {
        params,
        floorplan,
        cameras,
        actors,
        zones,
        buckets,
        expect,
    })
}

fn params_for_bucket(b: &Block, params: &Params) -> Result<BucketParams> {
    Ok(params.bucket(b.num("theta_on")?, b.num("theta_off")?, b.num("leak")?, b.num("level_max")?))
}

fn parse_params(b: &Block, p: &mut Params) -> Result<()> {
    for e in &b.entries {
        let line = e.line;
        let int = || -> Result<usize> {
            e.value
                .parse()
                .map_err(|_| perr(line, format!("expected a non-negative integer, got `{}`", e.value)))
        };
        match e.key.as_str() {
            "duration" => p.duration = e.number()?,
            "tick" => p.tick = e.number()?,
            "seed" => p.seed = e.value.parse().map_err(|_| perr(line, "seed must be an unsigned integer"))?,
            "sample_period" => p.sample_period = e.number()?,
            "expect_lead" => p.expect_lead = e.number()?,
            "bgs_alpha" => p.bgs.alpha = e.number()?,
            "bgs_tau" => p.bgs.tau = e.number()?,
            "bgs_warmup" => p.bgs.warmup = int()?,
            "min_area" => p.min_area = int()?,
            "pool_margin" => p.pool_margin = e.number()?,
            "jitter" => p.detector.jitter = e.number()?,
            "p_miss" => p.detector.p_miss = e.number()?,
            "gaze_threshold" => p.detector.gaze_threshold = e.number()?,
            "frontal_cone_deg" => p.detector.frontal_cone = e.number()?.to_radians(),
            "width_margin" => p.compose.width_margin = e.number()?,
            "eye_line" => p.compose.eye_line = e.number()?,
            "single_height_factor" => p.compose.single_height_factor = e.number()?,
            "min_margin" => p.compose.min_margin = e.number()?,
            "iou_min" => p.diff.iou_min = e.number()?,
            "center_shift_max" => p.diff.center_shift_max = e.number()?,
            "size_ratio" => p.diff.size_ratio = parse_pair(&e.value, line)?,
            "min_shot_s" => p.shot.min_shot_s = e.number()?,
            "hold_s" => p.shot.hold_s = e.number()?,
            "steady_window_s" => p.steady.window_s = e.number()?,
            "eps_move" => p.steady.eps_move = e.number()?,
            "eps_size" => p.steady.eps_size = e.number()?,
            "theta_on" => p.theta_on = e.number()?,
            "theta_off" => p.theta_off = Some(e.number()?),
            "leak" => p.leak = e.number()?,
            "level_max" => p.level_max = Some(e.number()?),
            "bitrate" => p.bitrate = e.value.parse().map_err(|_| perr(line, "bitrate must be an integer"))?,
            "calib_grid" => p.calib_grid = int()?,
            "calib_zooms" => p.calib_zooms = int()?,
            other => return Err(perr(line, format!("unknown parameter `{other}`"))),
        }
    }
    Ok(())
}

fn validate_params(p: &Params) -> Result<()> {
    p.bgs.validate()?;
    p.compose.validate()?;
    p.diff.validate()?;
    if !(0.0..=1.0).contains(&p.detector.p_miss) || !(p.detector.jitter >= 0.0) {
        return Err(Error::invalid("detector", "need 0 <= p_miss <= 1 and jitter >= 0"));
    }
    if !(p.pool_margin >= 0.0) {
        return Err(Error::invalid("pool", "margin must be non-negative"));
    }
    if !(p.shot.min_shot_s >= 0.0 && p.shot.hold_s >= 0.0 && p.steady.window_s > 0.0) {
        return Err(Error::invalid("shot", "durations must be non-negative"));
    }
    if p.calib_grid < 2 || p.calib_zooms < 2 {
        return Err(Error::invalid("calibration", "need calib_grid >= 2 and calib_zooms >= 2"));
    }
    if !(p.expect_lead >= 0.0) {
        return Err(Error::invalid("expect", "lead must be non-negative"));
    }
    Ok(())
}

fn parse_camera(b: &Block, known: &[(CameraConfig, usize)]) -> Result<CameraConfig> {
    b.check_keys(&[
        "id", "kind", "position", "height", "yaw_deg", "hfov_deg", "resolution", "overview", "pan_limits",
        "tilt_limits", "zoom_max",
    ])?;
    let id = b.required("id")?.value.clone();
    let kind_entry = b.required("kind")?;
    let kind = CameraKind::parse(&kind_entry.value)
        .ok_or_else(|| perr(kind_entry.line, format!("unknown camera kind `{}`", kind_entry.value)))?;
    let overview = b.get("overview").map(|e| e.value.as_str());
    // a ptz without its own pose sits on its overview camera
    let base = overview.and_then(|ov| known.iter().find(|(c, _)| c.id.as_str() == ov)).map(|(c, _)| c);
    let position = match (b.get("position"), base) {
        (Some(e), _) => parse_point(&e.value, e.line)?,
        (None, Some(c)) if kind == CameraKind::Ptz => c.position,
        _ => return Err(perr(b.line, "[camera] is missing `position`")),
    };
    let yaw = match (b.num("yaw_deg")?, base) {
        (Some(y), _) => y.to_radians(),
        (None, Some(c)) if kind == CameraKind::Ptz => c.yaw,
        _ => return Err(perr(b.line, "[camera] is missing `yaw_deg`")),
    };
    let hfov = match (b.num("hfov_deg")?, base) {
        (Some(h), _) => h.to_radians(),
        (None, Some(c)) if kind == CameraKind::Ptz => c.hfov,
        _ => return Err(perr(b.line, "[camera] is missing `hfov_deg`")),
    };
    let (width, height) = match (b.get("resolution"), base) {
        (Some(e), _) => {
            let (w, h) = e
                .value
                .split_once('x')
                .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)))
                .ok_or_else(|| perr(e.line, format!("expected `WxH`, got `{}`", e.value)))?;
            (w, h)
        }
        (None, Some(c)) if kind == CameraKind::Ptz => (c.width, c.height),
        _ => return Err(perr(b.line, "[camera] is missing `resolution`")),
    };
    let mut cam = CameraConfig::new(&id, kind, position, yaw, hfov, width, height);
    if let Some(h) = b.num("height")? {
        cam.mount_height = h;
    } else if let (Some(c), CameraKind::Ptz) = (base, kind) {
        cam.mount_height = c.mount_height;
    }
    cam.paired_overview = overview.map(Into::into);
    let mut limits = PtzLimits::default();
    if let Some(e) = b.get("pan_limits") {
        limits.pan = parse_pair(&e.value, e.line)?;
    }
    if let Some(e) = b.get("tilt_limits") {
        limits.tilt = parse_pair(&e.value, e.line)?;
    }
    if let Some(z) = b.num("zoom_max")? {
        limits.zoom_max = z;
    }
    cam.ptz = limits;
    Ok(cam)
}

fn parse_actor(b: &Block) -> Result<Actor> {
    b.check_keys(&["id", "body_height", "body_width", "eye", "waypoint"])?;
    let id = b.required("id")?.value.clone();
    let mut waypoints = Vec::new();
    for e in b.all("waypoint") {
        let parts: Vec<&str> = e.value.split_whitespace().collect();
        let (t, pos, facing) = match parts[..] {
            [t, p] => (t, p, None),
            [t, p, f] => (t, p, Some(f)),
            _ => return Err(perr(e.line, "waypoint reads `t x,y [facing_deg]`")),
        };
        waypoints.push(Waypoint {
            t: parse_f64(t, e.line)?,
            position: parse_point(pos, e.line)?,
            facing: facing.map(|f| parse_f64(f, e.line).map(f64::to_radians)).transpose()?,
        });
    }
    let mut actor = Actor::new(
        &id,
        b.num("body_height")?.unwrap_or(1.75),
        b.num("body_width")?.unwrap_or(0.5),
        waypoints,
    )
    .map_err(|e| perr(b.line, e.to_string()))?;
    if let Some(eye) = b.num("eye")? {
        actor.eye_height_fraction = eye;
        actor.validate().map_err(|e| perr(b.line, e.to_string()))?;
    }
    Ok(actor)
}

fn parse_zone(b: &Block, cameras: &[CameraConfig]) -> Result<Zone> {
    b.check_keys(&["id", "camera", "polygon", "floor", "weight", "buckets"])?;
    let id = b.required("id")?.value.clone();
    let cam_id = &b.required("camera")?.value;
    let camera = cameras
        .iter()
        .find(|c| c.id.as_str() == cam_id)
        .ok_or_else(|| Error::Dangling {
            kind: "camera",
            id: cam_id.clone(),
            from: format!("zone `{id}`"),
        })?;
    let polygon = match (b.get("polygon"), b.get("floor")) {
        (Some(e), None) => parse_points(&e.value, e.line)?.into_iter().map(|v| (v.x, v.y)).collect(),
        (None, Some(e)) => {
            let mut pts = Vec::new();
            for v in parse_points(&e.value, e.line)? {
                for h in [0.0, FLOOR_ZONE_HEIGHT] {
                    pts.push(camera.project_point(v, h).ok_or_else(|| {
                        perr(e.line, format!("floor point {},{} cannot be projected into `{cam_id}`", v.x, v.y))
                    })?);
                }
            }
            convex_hull(&pts)
        }
        _ => return Err(perr(b.line, "a zone needs exactly one of `polygon` or `floor`")),
    };
    if polygon.len() < 3 {
        return Err(perr(b.line, format!("zone `{id}` polygon needs at least 3 vertices")));
    }
    Ok(Zone {
        id,
        camera: camera.id.clone(),
        polygon,
        weight: b.num("weight")?.unwrap_or(1.0),
        bucket_ids: b.get("buckets").map(|e| parse_list(&e.value)).unwrap_or_default(),
    })
}
