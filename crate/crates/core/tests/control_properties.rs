use bmui_core::control::{
    arm_update, arm_update_with_speed, proportional_map, ArmState, Calibration, ControlCommand, Debouncer, Direction,
    DpController, ANGLE_MAX_DEG, ANGLE_MIN_DEG, DEBOUNCE_STEPS,
};
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = Direction> {
    prop::sample::select(Direction::ALL.to_vec())
}

fn command() -> impl Strategy<Value = ControlCommand> {
    (direction(), 0.0..=1.0f64).prop_map(|(direction, m)| ControlCommand {
        direction,
        magnitude: if direction == Direction::Rest { 0.0 } else { m },
        t: 0,
    })
}

proptest! {
    #[test]
    fn angle_stays_in_range(
        start in ANGLE_MIN_DEG..=ANGLE_MAX_DEG,
        cmds in prop::collection::vec((command(), 0.0..2.0f64), 1..200),
        k in 0.0..500.0f64,
    ) {
        let mut s = ArmState::at(start);
        for (c, dt) in &cmds {
            s = arm_update_with_speed(s, c, *dt, k);
            prop_assert!((ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&s.elbow_angle_deg));
        }
    }

    #[test]
    fn magnitude_is_monotone(lo in 0.0..10.0f64, span in 1e-3..10.0f64, a in -5.0..25.0f64, b in -5.0..25.0f64) {
        let c = Calibration { channel_index: 0, env_min: lo, env_max: lo + span };
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        let (mx, my) = (proportional_map(x, &c), proportional_map(y, &c));
        prop_assert!(mx <= my);
        prop_assert!((0.0..=1.0).contains(&mx) && (0.0..=1.0).contains(&my));
        let mut ctl = DpController::<f64>::new(c, 1).unwrap();
        ctl.set_threshold_fraction((a.abs() / 30.0).min(0.9)).unwrap();
        prop_assert!(ctl.magnitude(x) <= ctl.magnitude(y));
    }

    #[test]
    fn short_runs_never_switch(raw in prop::collection::vec(direction(), 1..300)) {
        let mut d = Debouncer::new(DEBOUNCE_STEPS);
        let mut prev = d.current();
        let mut run_len = 0usize;
        let mut run_dir = None;
        for &r in &raw {
            run_len = if Some(r) == run_dir { run_len + 1 } else { 1 };
            run_dir = Some(r);
            let out = d.update(r);
            if out != prev {
                prop_assert_eq!(out, r);
                prop_assert!(run_len >= DEBOUNCE_STEPS, "switched to {:?} after a run of {}", r, run_len);
            }
            prev = out;
        }
    }

    #[test]
    fn all_rest_holds_the_arm(start in ANGLE_MIN_DEG..=ANGLE_MAX_DEG, n in 1usize..500, dt in 0.0..1.0f64, env in prop::collection::vec(0.0..10.0f64, 20)) {
        let calib = Calibration { channel_index: 0, env_min: 0.5, env_max: 2.0 };
        let mut ctl = DpController::<f64>::new(calib, 1).unwrap();
        let mut s = ArmState::at(start);
        for i in 0..n {
            let cmd = ctl
                .step_with(&[env[i % env.len()]], |_| Ok(Direction::Rest))
                .unwrap_or_else(|_| ControlCommand::rest(i as u64));
            prop_assert_eq!(cmd.magnitude, 0.0);
            s = arm_update(s, &cmd, dt);
            prop_assert_eq!(s.elbow_angle_deg, ArmState::at(start).elbow_angle_deg);
        }
    }
}
