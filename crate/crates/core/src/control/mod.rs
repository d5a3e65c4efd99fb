//! Direction-proportional control of a virtual elbow.

mod arm;
mod calibration;
mod direction;
mod dp;

pub use arm::{arm_update, arm_update_with_speed, ArmState, ANGLE_MAX_DEG, ANGLE_MIN_DEG, MAX_SPEED_DEG_S};
pub use calibration::{calibrate, percentile, proportional_map, Calibration, EFFORT_PERCENTILE, REST_PERCENTILE};
pub use direction::Direction;
pub use dp::{ControlCommand, Debouncer, DpController, DEBOUNCE_STEPS, HISTORY_STEPS};
