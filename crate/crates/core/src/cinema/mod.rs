//! Virtual cinematographer: canvas composition, shot switching and the
//! canvas to PTZ mapping.

pub mod calibration;
pub mod compose;
pub mod shot;

pub use calibration::{calibrate, canvas_to_ptz, CalibrationTable, PtzGeometry, PtzPose};
pub use compose::{compose, propose_canvas, Canvas, ComposeParams, ASPECT};
pub use shot::{differs, is_steady, shot_fsm_tick, DiffParams, ShotParams, ShotState};
