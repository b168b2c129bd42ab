//! PTZ calibration table: overview-frame footprints sampled over a grid of
//! aim points and zoom levels, and the canvas to pose lookup built on it.
//!
//! Camera frame convention: x right, y up, z forward. A pose `(pan, tilt)`
//! points the PTZ along `(cos t sin p, sin t, cos t cos p)`, i.e. the rotation
//! `Ry(pan) · Rx(tilt)` applied to the forward axis.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::scene::{CameraConfig, CameraKind, PtzLimits};

use super::compose::Canvas;

/// PTZ image aspect, height over width.
const PTZ_ASPECT_INV: f64 = 9.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtzPose {
    /// Degrees.
    pub pan: f64,
    /// Degrees.
    pub tilt: f64,
    pub zoom: f64,
}

/// Simulated overview/PTZ pair used to build the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtzGeometry {
    pub width: usize,
    pub height: usize,
    /// Overview horizontal field of view, radians.
    pub overview_hfov: f64,
    /// PTZ horizontal field of view at zoom 1, radians.
    pub ptz_hfov: f64,
    /// PTZ center in the overview camera frame, meters.
    pub offset: [f64; 3],
    /// Scene depth assumed when correcting parallax, meters.
    pub depth: f64,
    pub limits: PtzLimits,
}

impl PtzGeometry {
    /// PTZ at the overview's optical center with the same field of view.
    pub fn colocated(width: usize, height: usize, hfov: f64) -> Self {
        PtzGeometry {
            width,
            height,
            overview_hfov: hfov,
            ptz_hfov: hfov,
            offset: [0.0; 3],
            depth: 4.0,
            limits: PtzLimits::default(),
        }
    }

    /// Geometry of a scenario PTZ relative to its paired overview camera.
    /// Pan zero is taken to be the overview's viewing direction.
    pub fn from_cameras(overview: &CameraConfig, ptz: &CameraConfig) -> Result<Self> {
        if ptz.kind != CameraKind::Ptz || ptz.paired_overview.as_ref() != Some(&overview.id) {
            return Err(Error::invalid(
                "ptz geometry",
                format!("`{}` is not a ptz paired with `{}`", ptz.id, overview.id),
            ));
        }
        let d = ptz.position - overview.position;
        let (s, c) = overview.yaw.sin_cos();
        Ok(PtzGeometry {
            width: overview.width,
            height: overview.height,
            overview_hfov: overview.hfov,
            ptz_hfov: ptz.hfov,
            offset: [-s * d.x + c * d.y, ptz.mount_height - overview.mount_height, c * d.x + s * d.y],
            depth: 4.0,
            limits: ptz.ptz,
        })
    }

    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.overview_hfov / 2.0).tan()
    }

    fn is_colocated(&self) -> bool {
        self.offset == [0.0; 3]
    }

    /// Overview pixel hit by the ray `dir` leaving the PTZ, taken at the
    /// nominal depth when the PTZ is offset.
    fn project_ray(&self, dir: [f64; 3]) -> (f64, f64) {
        let [ox, oy, oz] = self.offset;
        let (x, y, z) = if self.is_colocated() {
            (dir[0], dir[1], dir[2])
        } else {
            let s = (self.depth - oz) / dir[2];
            (ox + s * dir[0], oy + s * dir[1], self.depth)
        };
        let f = self.focal();
        (self.width as f64 / 2.0 + f * x / z, self.height as f64 / 2.0 - f * y / z)
    }

    fn rotate(pose: &PtzPose, v: [f64; 3]) -> [f64; 3] {
        let (sp, cp) = pose.pan.to_radians().sin_cos();
        let (st, ct) = pose.tilt.to_radians().sin_cos();
        let [x, y, z] = v;
        let (y1, z1) = (y * ct + z * st, -y * st + z * ct);
        [x * cp + z1 * sp, y1, -x * sp + z1 * cp]
    }

    /// Overview pixel at the center of the PTZ image.
    pub fn aim_pixel(&self, pose: &PtzPose) -> (f64, f64) {
        self.project_ray(Self::rotate(pose, [0.0, 0.0, 1.0]))
    }

    /// Pose whose optical axis passes through overview pixel `(u, v)`,
    /// ignoring any offset between the two cameras.
    pub fn rough_pose(&self, u: f64, v: f64, zoom: f64) -> PtzPose {
        let f = self.focal();
        let pan = ((u - self.width as f64 / 2.0) / f).atan();
        let tilt = ((self.height as f64 / 2.0 - v) * pan.cos() / f).atan();
        PtzPose {
            pan: pan.to_degrees(),
            tilt: tilt.to_degrees(),
            zoom,
        }
    }

    /// Overview-frame rectangle covered by the PTZ at `pose`, centered at the
    /// aim pixel and sized by where the image's edge midpoints land.
    pub fn footprint(&self, pose: &PtzPose) -> Rect {
        let tx = (self.ptz_hfov / 2.0).tan() / pose.zoom;
        let ty = tx * PTZ_ASPECT_INV;
        let at = |x: f64, y: f64| self.project_ray(Self::rotate(pose, [x, y, 1.0]));
        let (cu, cv) = self.aim_pixel(pose);
        let w = at(tx, 0.0).0 - at(-tx, 0.0).0;
        let h = at(0.0, -ty).1 - at(0.0, ty).1;
        Rect::from_center(cu, cv, w, h)
    }

    fn check_pose(&self, pose: &PtzPose) -> Result<()> {
        let l = &self.limits;
        if pose.pan < l.pan.0 || pose.pan > l.pan.1 || pose.tilt < l.tilt.0 || pose.tilt > l.tilt.1 {
            return Err(Error::PoseOutOfRange {
                pan: pose.pan,
                tilt: pose.tilt,
            });
        }
        if !(pose.zoom >= 1.0 && pose.zoom <= l.zoom_max) {
            return Err(Error::invalid("ptz pose", format!("zoom {} outside [1, {}]", pose.zoom, l.zoom_max)));
        }
        Ok(())
    }
}

/// Fine-alignment stage: the `(Δpan, Δtilt)` in degrees that moves the rough
/// pose onto `target`.
pub trait ResidualMatcher {
    fn residual(&mut self, geometry: &PtzGeometry, target: (f64, f64), rough: &PtzPose) -> (f64, f64);
}

impl<F> ResidualMatcher for F
where
    F: FnMut(&PtzGeometry, (f64, f64), &PtzPose) -> (f64, f64),
{
    fn residual(&mut self, geometry: &PtzGeometry, target: (f64, f64), rough: &PtzPose) -> (f64, f64) {
        self(geometry, target, rough)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroResidual;

impl ResidualMatcher for ZeroResidual {
    fn residual(&mut self, _: &PtzGeometry, _: (f64, f64), _: &PtzPose) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// Removes the parallax caused by the PTZ offset by iterating on the aim
/// pixel of the simulated geometry.
#[derive(Debug, Clone, Copy)]
pub struct ParallaxMatcher {
    pub iterations: usize,
}

impl Default for ParallaxMatcher {
    fn default() -> Self {
        ParallaxMatcher { iterations: 20 }
    }
}

impl ResidualMatcher for ParallaxMatcher {
    fn residual(&mut self, geometry: &PtzGeometry, target: (f64, f64), rough: &PtzPose) -> (f64, f64) {
        let mut q = target;
        let mut pose = *rough;
        for _ in 0..self.iterations {
            pose = geometry.rough_pose(q.0, q.1, rough.zoom);
            let (u, v) = geometry.aim_pixel(&pose);
            let (eu, ev) = (target.0 - u, target.1 - v);
            if eu.hypot(ev) < 1e-9 {
                break;
            }
            q = (q.0 + eu, q.1 + ev);
        }
        (pose.pan - rough.pan, pose.tilt - rough.tilt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalSample {
    pub gx: usize,
    pub gy: usize,
    pub zi: usize,
    /// Overview-frame footprint of `pose`.
    pub rect: Rect,
    pub pose: PtzPose,
    /// `(Δpan, Δtilt)` in degrees.
    pub residual: (f64, f64),
}

/// Samples over `grid × grid` aim points spread evenly across the overview
/// frame, edges included, times the zoom levels. Stored zoom-major, then by
/// row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub width: usize,
    pub height: usize,
    pub grid: usize,
    pub zooms: Vec<f64>,
    pub samples: Vec<CalSample>,
}

/// `count` zoom levels spaced evenly from 1 to `zoom_max`.
pub fn zoom_levels(count: usize, zoom_max: f64) -> Vec<f64> {
    let n = count.max(2);
    (0..n).map(|i| 1.0 + (zoom_max - 1.0) * i as f64 / (n - 1) as f64).collect()
}

pub fn calibrate(
    geometry: &PtzGeometry,
    grid: usize,
    zooms: &[f64],
    matcher: Option<&mut dyn ResidualMatcher>,
) -> Result<CalibrationTable> {
    if grid < 2 || zooms.len() < 2 {
        return Err(Error::invalid("calibration", "need at least a 2×2 grid and 2 zoom levels"));
    }
    if zooms.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("calibration", "zoom levels must increase strictly"));
    }
    let mut zero = ZeroResidual;
    let matcher = matcher.unwrap_or(&mut zero);
    let (w, h) = (geometry.width as f64, geometry.height as f64);
    let mut samples = Vec::with_capacity(grid * grid * zooms.len());
    for (zi, &zoom) in zooms.iter().enumerate() {
        for gy in 0..grid {
            for gx in 0..grid {
                let target = (gx as f64 * w / (grid - 1) as f64, gy as f64 * h / (grid - 1) as f64);
                let pose = geometry.rough_pose(target.0, target.1, zoom);
                geometry.check_pose(&pose)?;
                let residual = matcher.residual(geometry, target, &pose);
                samples.push(CalSample {
                    gx,
                    gy,
                    zi,
                    rect: geometry.footprint(&pose),
                    pose,
                    residual,
                });
            }
        }
    }
    Ok(CalibrationTable {
        width: geometry.width,
        height: geometry.height,
        grid,
        zooms: zooms.to_vec(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseLookup {
    pub pose: PtzPose,
    /// The canvas center lay outside the calibrated grid and the nearest
    /// sample was used instead.
    pub outside_grid: bool,
}

impl CalibrationTable {
    pub fn sample(&self, gx: usize, gy: usize, zi: usize) -> &CalSample {
        &self.samples[(zi * self.grid + gy) * self.grid + gx]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# frame {} {}", self.width, self.height);
        let _ = writeln!(out, "# grid {}", self.grid);
        let zooms: Vec<String> = self.zooms.iter().map(|z| format!("{z:.4}")).collect();
        let _ = writeln!(out, "# zooms {}", zooms.join(" "));
        for s in &self.samples {
            let r = s.rect;
            let _ = writeln!(
                out,
                "{} {} {} {:.4} {:.4} {:.4} {:.4} {:.4} {:.4} {:.4} {:.4} {:.4}",
                s.gx, s.gy, s.zi, r.x, r.y, r.w, r.h, s.pose.pan, s.pose.tilt, s.pose.zoom, s.residual.0, s.residual.1
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let (mut dims, mut grid, mut zooms) = (None, None, None);
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if let Some(header) = raw.strip_prefix('#') {
                let mut it = header.split_whitespace();
                match it.next() {
                    Some("frame") => {
                        let v: Vec<usize> = it.map(str::parse).collect::<Result<_, _>>().map_err(|_| err(line, "bad frame size"))?;
                        let [w, h] = v[..] else { return Err(err(line, "frame needs width and height")) };
                        dims = Some((w, h));
                    }
                    Some("grid") => grid = Some(it.next().and_then(|g| g.parse().ok()).ok_or_else(|| err(line, "bad grid size"))?),
                    Some("zooms") => {
                        zooms = Some(it.map(str::parse).collect::<Result<Vec<f64>, _>>().map_err(|_| err(line, "bad zoom level"))?)
                    }
                    _ => {}
                }
                continue;
            }
            let f: Vec<f64> = raw
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| err(line, "non-numeric field"))?;
            if f.len() != 12 {
                return Err(err(line, "expected 12 fields"));
            }
            samples.push(CalSample {
                gx: f[0] as usize,
                gy: f[1] as usize,
                zi: f[2] as usize,
                rect: Rect::new(f[3], f[4], f[5], f[6]),
                pose: PtzPose {
                    pan: f[7],
                    tilt: f[8],
                    zoom: f[9],
                },
                residual: (f[10], f[11]),
            });
        }
        let ((width, height), grid, zooms) = match (dims, grid, zooms) {
            (Some(d), Some(g), Some(z)) => (d, g, z),
            _ => return Err(err(1, "missing frame, grid or zooms header")),
        };
        if grid < 2 || zooms.len() < 2 || samples.len() != grid * grid * zooms.len() {
            return Err(err(text.lines().count(), "sample count does not match the grid"));
        }
        for (k, s) in samples.iter().enumerate() {
            let expect = (k % grid, (k / grid) % grid, k / (grid * grid));
            if (s.gx, s.gy, s.zi) != expect {
                return Err(err(k + 4, "samples out of order"));
            }
        }
        Ok(CalibrationTable {
            width,
            height,
            grid,
            zooms,
            samples,
        })
    }
}

/// PTZ pose that frames `canvas`: pan and tilt (plus residuals) bilinear over
/// the grid cell around the canvas center, zoom interpolated between levels
/// linearly in inverse footprint width.
pub fn canvas_to_ptz(table: &CalibrationTable, canvas: &Canvas) -> PoseLookup {
    let (w, h) = (table.width as f64, table.height as f64);
    let (cx, cy) = canvas.rect.center();
    let cells = (table.grid - 1) as f64;
    let outside_grid = !(-1e-9..=w + 1e-9).contains(&cx) || !(-1e-9..=h + 1e-9).contains(&cy);
    let (fx, fy) = if outside_grid {
        ((cx / w * cells).clamp(0.0, cells).round(), (cy / h * cells).clamp(0.0, cells).round())
    } else {
        ((cx / w * cells).clamp(0.0, cells), (cy / h * cells).clamp(0.0, cells))
    };
    let i0 = (fx.floor() as usize).min(table.grid - 2);
    let j0 = (fy.floor() as usize).min(table.grid - 2);
    let (a, b) = (fx - i0 as f64, fy - j0 as f64);
    let lerp2 = |zi: usize, get: &dyn Fn(&CalSample) -> f64| {
        let s = |di: usize, dj: usize| get(table.sample(i0 + di, j0 + dj, zi));
        (1.0 - a) * (1.0 - b) * s(0, 0) + a * (1.0 - b) * s(1, 0) + (1.0 - a) * b * s(0, 1) + a * b * s(1, 1)
    };
    let pan = lerp2(0, &|s| s.pose.pan + s.residual.0);
    let tilt = lerp2(0, &|s| s.pose.tilt + s.residual.1);

    let inv = 1.0 / canvas.rect.w;
    let levels: Vec<f64> = (0..table.zooms.len()).map(|zi| 1.0 / lerp2(zi, &|s| s.rect.w)).collect();
    let zooms = &table.zooms;
    let zoom = if inv <= levels[0] {
        zooms[0]
    } else if inv >= levels[levels.len() - 1] {
        zooms[zooms.len() - 1]
    } else {
        let k = levels.windows(2).position(|l| inv < l[1]).unwrap_or(levels.len() - 2);
        let t = (inv - levels[k]) / (levels[k + 1] - levels[k]);
        zooms[k] + t * (zooms[k + 1] - zooms[k])
    };
    PoseLookup {
        pose: PtzPose { pan, tilt, zoom },
        outside_grid,
    }
}
