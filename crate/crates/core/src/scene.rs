//! The simulated world: floorplan, cameras, actors and their projection into
//! camera image planes.
//!
//! Floorplan coordinates follow top-view drawing conventions: `x` to the
//! right, `y` down the page. Bearings (`atan2(dy, dx)`) therefore grow
//! clockwise when seen from above, which is also the direction in which the
//! image column `u` grows.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{is_convex, point_in_polygon, wrap_angle, Rect, Segment, Vec2};

/// Minimum ground distance (meters) for a non-degenerate projection.
pub const MIN_PROJECTION_DISTANCE: f64 = 0.2;
/// Default camera mount height in meters.
pub const DEFAULT_MOUNT_HEIGHT: f64 = 1.6;
/// Fraction of the full-body box height kept for the upper-body box.
pub const UPPER_BODY_FRACTION: f64 = 0.4;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CameraId(Arc<str>);

impl CameraId {
    pub fn new(id: &str) -> Self {
        CameraId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for CameraId {
    fn from(s: &str) -> Self {
        CameraId::new(s)
    }
}

#[derive(Debug, Clone)]
pub struct Room {
    pub id: String,
    pub polygon: Vec<Vec2>,
}

impl Room {
    pub fn contains(&self, p: Vec2) -> bool {
        let poly: Vec<(f64, f64)> = self.polygon.iter().map(|v| (v.x, v.y)).collect();
        point_in_polygon((p.x, p.y), &poly)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Floorplan {
    pub rooms: Vec<Room>,
    pub walls: Vec<Segment>,
    pub doors: Vec<Segment>,
}

impl Floorplan {
    pub fn new(rooms: Vec<Room>, walls: Vec<Segment>, doors: Vec<Segment>) -> Result<Self> {
        for room in &rooms {
            if !room.polygon.iter().all(|v| v.is_finite()) || !is_convex(&room.polygon) {
                return Err(Error::invalid(
                    "room",
                    format!("`{}` must be a convex, non-self-intersecting polygon", room.id),
                ));
            }
        }
        for (i, w) in walls.iter().enumerate() {
            if !(w.length() > 0.0) {
                return Err(Error::invalid("wall", format!("wall #{i} has zero length")));
            }
        }
        for (i, d) in doors.iter().enumerate() {
            let on_wall = walls
                .iter()
                .any(|w| w.distance_to(d.a) < 1e-6 && w.distance_to(d.b) < 1e-6);
            if !on_wall {
                return Err(Error::invalid(
                    "door",
                    format!("door #{i} does not lie on any wall"),
                ));
            }
        }
        Ok(Floorplan { rooms, walls, doors })
    }

    pub fn room_at(&self, p: Vec2) -> Option<&Room> {
        self.rooms.iter().find(|r| r.contains(p))
    }

    /// True if the open segment `from → to` crosses a wall outside every door
    /// gap.
    pub fn blocked(&self, from: Vec2, to: Vec2) -> bool {
        let sight = Segment::new(from, to);
        const EPS: f64 = 1e-9;
        self.walls.iter().any(|wall| match sight.crossing(wall) {
            Some((s, _)) if s > EPS && s < 1.0 - EPS => {
                let hit = from.lerp(to, s);
                !self.doors.iter().any(|d| d.distance_to(hit) < 1e-6)
            }
            _ => false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraKind {
    Static,
    Overview,
    Ptz,
}

impl CameraKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static" => Some(CameraKind::Static),
            "overview" => Some(CameraKind::Overview),
            "ptz" => Some(CameraKind::Ptz),
            _ => None,
        }
    }
}

/// Mechanical limits of a PTZ head, in degrees and magnification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtzLimits {
    pub pan: (f64, f64),
    pub tilt: (f64, f64),
    pub zoom_max: f64,
}

impl Default for PtzLimits {
    fn default() -> Self {
        PtzLimits {
            pan: (-170.0, 170.0),
            tilt: (-90.0, 90.0),
            zoom_max: 8.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CameraConfig {
    pub id: CameraId,
    pub kind: CameraKind,
    pub position: Vec2,
    pub mount_height: f64,
    /// Viewing direction on the ground plane, radians.
    pub yaw: f64,
    /// Horizontal field of view, radians in `(0, π)`.
    pub hfov: f64,
    pub width: usize,
    pub height: usize,
    pub paired_overview: Option<CameraId>,
    pub ptz: PtzLimits,
}

impl CameraConfig {
    pub fn new(id: &str, kind: CameraKind, position: Vec2, yaw: f64, hfov: f64, width: usize, height: usize) -> Self {
        CameraConfig {
            id: CameraId::new(id),
            kind,
            position,
            mount_height: DEFAULT_MOUNT_HEIGHT,
            yaw,
            hfov,
            width,
            height,
            paired_overview: None,
            ptz: PtzLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", format!("`{}` has an empty resolution", self.id)));
        }
        if !(self.hfov > 0.0 && self.hfov < std::f64::consts::PI) {
            return Err(Error::invalid("camera", format!("`{}` hfov must lie in (0, π)", self.id)));
        }
        if !self.position.is_finite() || !self.yaw.is_finite() || !self.mount_height.is_finite() {
            return Err(Error::invalid("camera", format!("`{}` has non-finite pose", self.id)));
        }
        match (self.kind, &self.paired_overview) {
            (CameraKind::Ptz, None) => Err(Error::invalid(
                "camera",
                format!("ptz camera `{}` needs a paired overview camera", self.id),
            )),
            (CameraKind::Static | CameraKind::Overview, Some(_)) => Err(Error::invalid(
                "camera",
                format!("only ptz cameras may reference an overview (`{}`)", self.id),
            )),
            _ => Ok(()),
        }
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov / 2.0).tan()
    }

    /// Signed angle between the viewing direction and `point`.
    pub fn bearing_offset(&self, point: Vec2) -> f64 {
        wrap_angle((point - self.position).angle() - self.yaw)
    }

    pub fn in_fov(&self, point: Vec2) -> bool {
        self.bearing_offset(point).abs() <= self.hfov / 2.0
    }

    /// Pixel coordinates of a world point at `height` above `ground`, or
    /// `None` when it sits at or behind the image plane's side limit.
    pub fn project_point(&self, ground: Vec2, height: f64) -> Option<(f64, f64)> {
        let d = self.position.distance(ground);
        let off = self.bearing_offset(ground);
        if d < MIN_PROJECTION_DISTANCE || off.abs() >= 89.0_f64.to_radians() {
            return None;
        }
        let f = self.focal();
        let u = self.width as f64 / 2.0 + f * off.tan();
        let v = self.height as f64 / 2.0 - f * (height - self.mount_height) / d;
        Some((u, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec2,
    /// Facing direction (radians) while holding position from this waypoint.
    pub facing: Option<f64>,
}

impl Waypoint {
    pub fn new(t: f64, position: Vec2) -> Self {
        Waypoint {
            t,
            position,
            facing: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub id: String,
    pub body_height: f64,
    pub body_width: f64,
    pub eye_height_fraction: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Actor {
    pub fn new(id: &str, body_height: f64, body_width: f64, waypoints: Vec<Waypoint>) -> Result<Self> {
        let actor = Actor {
            id: id.to_string(),
            body_height,
            body_width,
            eye_height_fraction: 0.93,
            waypoints,
        };
        actor.validate()?;
        Ok(actor)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.body_height > 0.0 && self.body_width > 0.0) {
            return Err(Error::invalid("actor", format!("`{}` body dimensions must be positive", self.id)));
        }
        if !(self.eye_height_fraction > 0.0 && self.eye_height_fraction <= 1.0) {
            return Err(Error::invalid("actor", format!("`{}` eye height fraction must be in (0, 1]", self.id)));
        }
        if self.waypoints.is_empty() {
            return Err(Error::invalid("actor", format!("`{}` has no waypoints", self.id)));
        }
        if self.waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid(
                "actor",
                format!("`{}` waypoint times must be strictly increasing", self.id),
            ));
        }
        Ok(())
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.waypoints[0].t, self.waypoints[self.waypoints.len() - 1].t)
    }

    pub fn present_at(&self, t: f64) -> bool {
        let (a, b) = self.time_range();
        t >= a && t <= b
    }

    /// Index `i` of the segment `waypoints[i] → waypoints[i + 1]` containing `t`.
    fn segment_index(&self, t: f64) -> usize {
        let idx = self.waypoints.partition_point(|w| w.t <= t);
        idx.saturating_sub(1).min(self.waypoints.len().saturating_sub(2))
    }

    /// Heading on the ground plane at `t`: the facing of the current segment
    /// if set, else the direction of travel, else the last (or next) non-zero
    /// direction of travel.
    pub fn heading_at(&self, t: f64) -> Option<f64> {
        let wps = &self.waypoints;
        if wps.len() < 2 {
            return wps[0].facing;
        }
        let i = self.segment_index(t);
        if let Some(f) = wps[i].facing {
            return Some(f);
        }
        let dir = |k: usize| {
            let d = wps[k + 1].position - wps[k].position;
            (d.norm() > 1e-9).then(|| d.angle())
        };
        (0..=i)
            .rev()
            .find_map(|k| wps[k].facing.or_else(|| dir(k)))
            .or_else(|| (i + 1..wps.len() - 1).find_map(dir))
    }

    /// Largest segment speed in m/s.
    pub fn max_speed(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position) / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }
}

/// Piecewise-linear trajectory playback.
pub fn actor_position(actor: &Actor, t: f64) -> Result<Vec2> {
    let (start, end) = actor.time_range();
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange {
            actor: actor.id.clone(),
            t,
            start,
            end,
        });
    }
    let wps = &actor.waypoints;
    if wps.len() == 1 {
        return Ok(wps[0].position);
    }
    let i = actor.segment_index(t);
    let (a, b) = (&wps[i], &wps[i + 1]);
    if t == a.t {
        return Ok(a.position);
    }
    if t == b.t {
        return Ok(b.position);
    }
    let s = (t - a.t) / (b.t - a.t);
    Ok(a.position.lerp(b.position, s))
}

/// Line of sight from the camera's ground position, restricted to its
/// horizontal field of view.
pub fn visible(floorplan: &Floorplan, camera: &CameraConfig, point: Vec2) -> bool {
    camera.in_fov(point) && !floorplan.blocked(camera.position, point)
}

/// A pixel-space box in one camera's image; may extend past the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBox {
    pub camera: CameraId,
    pub rect: Rect,
}

impl ImageBox {
    pub fn new(camera: CameraId, rect: Rect) -> Self {
        ImageBox { camera, rect }
    }

    /// Top 40% of a full-body box.
    pub fn upper_body(&self) -> ImageBox {
        let r = self.rect;
        ImageBox::new(self.camera.clone(), Rect::new(r.x, r.y, r.w, r.h * UPPER_BODY_FRACTION))
    }

    pub fn clipped(&self, width: usize, height: usize) -> Option<ImageBox> {
        self.rect
            .clip(width as f64, height as f64)
            .map(|r| ImageBox::new(self.camera.clone(), r))
    }
}

/// Full-body box of `actor` at time `t`, or `None` if the actor is absent,
/// hidden, or too close to the camera.
pub fn project(floorplan: &Floorplan, camera: &CameraConfig, actor: &Actor, t: f64) -> Option<ImageBox> {
    let p = actor_position(actor, t).ok()?;
    if !visible(floorplan, camera, p) {
        return None;
    }
    let d = camera.position.distance(p);
    if d < MIN_PROJECTION_DISTANCE {
        return None;
    }
    let f = camera.focal();
    let u = camera.width as f64 / 2.0 + f * camera.bearing_offset(p).tan();
    let half_h = camera.height as f64 / 2.0;
    let v_head = half_h - f * (actor.body_height - camera.mount_height) / d;
    let v_feet = half_h + f * camera.mount_height / d;
    let w = f * actor.body_width / d;
    Some(ImageBox::new(
        camera.id.clone(),
        Rect::new(u - w / 2.0, v_head, w, v_feet - v_head),
    ))
}
