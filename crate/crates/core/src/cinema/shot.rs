//! Shot steadiness, shot difference and the shot-switching state machine.

use crate::detection::Detection;
use crate::error::{Error, Result};

use super::compose::Canvas;

/// Slack for comparing accumulated tick durations against thresholds.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffParams {
    pub iou_min: f64,
    /// Center shift limit as a fraction of the frame width.
    pub center_shift_max: f64,
    /// Accepted range of proposed width over current width.
    pub size_ratio: (f64, f64),
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams {
            iou_min: 0.7,
            center_shift_max: 0.10,
            size_ratio: (0.8, 1.25),
        }
    }
}

impl DiffParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_ratio;
        if !(0.0..=1.0).contains(&self.iou_min) || !(self.center_shift_max >= 0.0) || !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return Err(Error::invalid("diff", "inconsistent shot difference bounds"));
        }
        Ok(())
    }
}

/// True when `proposed` is considerably different from `current` in
/// position or size.
pub fn differs(current: &Canvas, proposed: &Canvas, params: &DiffParams, frame_width: f64) -> bool {
    let (a, b) = (current.rect, proposed.rect);
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let shift = (bx - ax).hypot(by - ay);
    let ratio = b.w / a.w;
    a.iou(&b) < params.iou_min
        || shift > params.center_shift_max * frame_width
        || ratio < params.size_ratio.0
        || ratio > params.size_ratio.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyParams {
    /// History length in seconds.
    pub window_s: f64,
    /// Center motion limit as a fraction of the frame width.
    pub eps_move: f64,
    /// Relative height change limit.
    pub eps_size: f64,
}

impl Default for SteadyParams {
    fn default() -> Self {
        SteadyParams {
            window_s: 1.5,
            eps_move: 0.01,
            eps_size: 0.05,
        }
    }
}

/// True when, across the whole window, the same people are present and
/// each moved less than `eps_move · frame_width` and changed height by less
/// than `eps_size` relative to the first frame of the window.
pub fn is_steady(history: &[Vec<Detection>], eps_move: f64, eps_size: f64, frame_width: f64) -> bool {
    let Some((first, rest)) = history.split_first() else {
        return false;
    };
    if rest.is_empty() {
        return false;
    }
    let limit = eps_move * frame_width;
    rest.iter().all(|frame| {
        frame.len() == first.len()
            && match_to(first, frame).is_some_and(|pairs| {
                pairs.into_iter().all(|(a, b)| {
                    let (ax, ay) = a.bbox.rect.center();
                    let (bx, by) = b.bbox.rect.center();
                    let size = (b.bbox.rect.h - a.bbox.rect.h).abs() / a.bbox.rect.h;
                    (bx - ax).hypot(by - ay) < limit && size < eps_size
                })
            })
    })
}

/// Pairs every detection of `reference` with one in `frame`: by actor when
/// both carry one, otherwise greedily by nearest center.
fn match_to<'a>(reference: &'a [Detection], frame: &'a [Detection]) -> Option<Vec<(&'a Detection, &'a Detection)>> {
    let mut used = vec![false; frame.len()];
    let mut pairs = Vec::with_capacity(reference.len());
    for r in reference {
        let by_actor = r.actor.as_ref().and_then(|id| {
            frame
                .iter()
                .enumerate()
                .find(|(i, d)| !used[*i] && d.actor.as_ref() == Some(id))
                .map(|(i, _)| i)
        });
        let idx = by_actor.or_else(|| {
            let (rx, ry) = r.bbox.rect.center();
            frame
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|(_, a), (_, b)| {
                    let da = { let (x, y) = a.bbox.rect.center(); (x - rx).hypot(y - ry) };
                    let db = { let (x, y) = b.bbox.rect.center(); (x - rx).hypot(y - ry) };
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)
        })?;
        used[idx] = true;
        pairs.push((r, &frame[idx]));
    }
    Some(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotParams {
    pub min_shot_s: f64,
    pub hold_s: f64,
}

impl Default for ShotParams {
    fn default() -> Self {
        ShotParams {
            min_shot_s: 6.0,
            hold_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotChange {
    /// First shot taken while no shot was active.
    Adopt,
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotEvent {
    pub change: ShotChange,
    pub canvas: Canvas,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotState {
    pub current: Option<Canvas>,
    pub current_age: f64,
    pub pending: Option<Canvas>,
    pub pending_age: f64,
}

/// Advances the shot state by one tick.
///
/// A different, steady proposal becomes pending; it keeps its age while
/// later proposals stay close to it and resets when they drift. The switch
/// happens once the current shot is at least `min_shot_s` old and the
/// pending one has been held for `hold_s`.
pub fn shot_fsm_tick(
    state: &mut ShotState,
    proposal: Option<&Canvas>,
    steady: bool,
    dt: f64,
    params: &ShotParams,
    diff: &DiffParams,
    frame_width: f64,
) -> Option<ShotEvent> {
    let Some(current) = state.current else {
        let adopted = proposal.filter(|_| steady)?;
        *state = ShotState {
            current: Some(*adopted),
            ..ShotState::default()
        };
        return Some(ShotEvent {
            change: ShotChange::Adopt,
            canvas: *adopted,
        });
    };
    state.current_age += dt;
    let candidate = proposal.filter(|p| steady && differs(&current, p, diff, frame_width));
    match (candidate, state.pending) {
        (None, _) => {
            state.pending = None;
            state.pending_age = 0.0;
        }
        (Some(p), Some(old)) if !differs(&old, p, diff, frame_width) => {
            state.pending = Some(*p);
            state.pending_age += dt;
        }
        (Some(p), _) => {
            state.pending = Some(*p);
            state.pending_age = 0.0;
        }
    }
    let ready = state.current_age + TIME_EPS >= params.min_shot_s && state.pending_age + TIME_EPS >= params.hold_s;
    match state.pending {
        Some(next) if ready => {
            *state = ShotState {
                current: Some(next),
                ..ShotState::default()
            };
            Some(ShotEvent {
                change: ShotChange::Switch,
                canvas: next,
            })
        }
        _ => None,
    }
}
