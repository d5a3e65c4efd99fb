use serde::{Deserialize, Serialize};

use super::dp::ControlCommand;

/// Angular speed at full magnitude and unit gain.
pub const MAX_SPEED_DEG_S: f64 = 60.0;
pub const ANGLE_MIN_DEG: f64 = 0.0;
pub const ANGLE_MAX_DEG: f64 = 150.0;

/// Virtual elbow.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    pub elbow_angle_deg: f64,
    pub angular_velocity_deg_s: f64,
}

impl ArmState {
    pub fn at(angle_deg: f64) -> Self {
        Self { elbow_angle_deg: angle_deg.clamp(ANGLE_MIN_DEG, ANGLE_MAX_DEG), angular_velocity_deg_s: 0.0 }
    }
}

/// Integrates `cmd` over `dt_s` at the default speed.
pub fn arm_update(state: ArmState, cmd: &ControlCommand, dt_s: f64) -> ArmState {
    arm_update_with_speed(state, cmd, dt_s, MAX_SPEED_DEG_S)
}

/// `angle += k · magnitude · sign(direction) · dt`, clamped to the elbow range.
pub fn arm_update_with_speed(state: ArmState, cmd: &ControlCommand, dt_s: f64, k_deg_s: f64) -> ArmState {
    let velocity = k_deg_s * cmd.magnitude * cmd.direction.sign();
    if velocity == 0.0 {
        return ArmState { elbow_angle_deg: state.elbow_angle_deg, angular_velocity_deg_s: 0.0 };
    }
    let angle = (state.elbow_angle_deg + velocity * dt_s).clamp(ANGLE_MIN_DEG, ANGLE_MAX_DEG);
    ArmState { elbow_angle_deg: angle, angular_velocity_deg_s: velocity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Direction;

    fn cmd(direction: Direction, magnitude: f64) -> ControlCommand {
        ControlCommand { direction, magnitude, t: 0 }
    }

    #[test]
    fn examples() {
        assert_eq!(arm_update(ArmState::at(90.0), &cmd(Direction::Rest, 0.0), 3.0).elbow_angle_deg, 90.0);
        assert!((arm_update(ArmState::at(90.0), &cmd(Direction::Flex, 1.0), 0.1).elbow_angle_deg - 96.0).abs() < 1e-12);
        assert_eq!(arm_update(ArmState::at(149.0), &cmd(Direction::Flex, 1.0), 0.5).elbow_angle_deg, 150.0);
        assert_eq!(arm_update(ArmState::at(1.0), &cmd(Direction::Extend, 1.0), 0.5).elbow_angle_deg, 0.0);
    }

    #[test]
    fn gain_scales_speed() {
        let s = arm_update_with_speed(ArmState::at(0.0), &cmd(Direction::Flex, 1.0), 1.0, 30.0);
        assert_eq!(s.elbow_angle_deg, 30.0);
        assert_eq!(s.angular_velocity_deg_s, 30.0);
    }
}
