use approx::assert_abs_diff_eq;

use super::*;

fn rcfg() -> RewardConfig {
    RewardConfig::default()
}

#[test]
fn phase1_reward_examples() {
    let c = rcfg();
    assert_abs_diff_eq!(phase1_reward(1.0, 0.0, 0.0, &c), -1.0, epsilon = 1e-15);
    // -(1+1+1) - 0.3*(1+1+1)
    assert_abs_diff_eq!(phase1_reward(1.0, 1.0, 1.0, &c), -3.9, epsilon = 1e-15);
    assert_eq!(phase1_reward(0.0, 0.0, 0.0, &c), 0.0);
    // Sign of the rates must not matter.
    assert_eq!(
        phase1_reward(-0.4, 0.2, -0.7, &c),
        phase1_reward(0.4, 0.2, 0.7, &c)
    );
}

#[test]
fn phase2_reward_examples() {
    let c = rcfg();
    // -0.01 - 0.3*0.01 - 0.05*0.01
    assert_abs_diff_eq!(phase2_reward(0.1, 0.1, 0.0, 0.0, &c), -0.0135, epsilon = 1e-15);
    assert_eq!(phase2_reward(0.0, 0.0, 0.0, 0.0, &c), 0.0);
    // The e_alpha * q cross term is signed: opposing signs reward the
    // error-reducing pitch rate.
    assert!(phase2_reward(0.1, -0.1, 0.0, 0.0, &c) > phase2_reward(0.1, 0.1, 0.0, 0.0, &c));
}

#[test]
fn blend_gate_values_and_monotonicity() {
    let c = rcfg();
    assert_abs_diff_eq!(blend(c.omega_th, &c), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(blend(0.87, &c), 1.0 / (1.0 + 7.0_f64.exp()), epsilon = 1e-15);
    assert!(blend(0.0, &c) > 0.8);
    assert!(blend(3.0, &c) < 1e-10);
    let mut prev = f64::INFINITY;
    for i in 0..100 {
        let b = blend(i as f64 * 0.05, &c);
        assert!(b < prev);
        prev = b;
    }
}

#[test]
fn potential_examples() {
    let c = rcfg();
    assert_eq!(potential(0.0, &[0.0; 3], &c), 0.0);
    assert_abs_diff_eq!(potential(0.1, &[1.0, 0.0, 0.0], &c), -0.31, epsilon = 1e-15);
    assert!(potential(0.2, &[0.5, 0.5, 0.5], &c) < potential(0.1, &[0.5, 0.5, 0.5], &c));
}

#[test]
fn action_scaling_endpoints_and_clipping() {
    let lo = EnvAction([-1.0, -1.0, -1.0]).to_deflections();
    assert_eq!(lo, [ELEVATOR_LIMITS.0, AILERON_LIMITS.0, RUDDER_LIMITS.0]);
    let hi = EnvAction([1.0, 1.0, 1.0]).to_deflections();
    assert_eq!(hi, [ELEVATOR_LIMITS.1, AILERON_LIMITS.1, RUDDER_LIMITS.1]);
    let mid = EnvAction([0.0, 0.0, 0.0]).to_deflections();
    assert_abs_diff_eq!(mid[0], (ELEVATOR_LIMITS.0 + ELEVATOR_LIMITS.1) / 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(mid[1], 0.0, epsilon = 1e-15);
    // Out-of-range actions clip before scaling.
    assert_eq!(EnvAction([5.0, -3.0, 2.0]).to_deflections(), hi_lo_hi());
}

fn hi_lo_hi() -> [f64; 3] {
    [ELEVATOR_LIMITS.1, AILERON_LIMITS.0, RUDDER_LIMITS.1]
}

#[test]
fn observation_clips_to_ranges() {
    let state = AircraftState {
        v: 5000.0,
        alpha: 2.0,
        beta: -4.0,
        p: 100.0,
        q: 0.1,
        r: -0.2,
        mu: 0.3,
        gamma: -3.0,
        chi: 0.0,
        h: 0.0,
    };
    let obs = Observation::from_state(&state, &[0.3, 0.0, 0.0]);
    assert!(obs.in_ranges());
    assert_eq!(obs.0[0], 2000.0);
    assert_eq!(obs.0[1], ALPHA_MAX);
    assert_eq!(obs.0[3], 10.0 * std::f64::consts::PI);
    assert_eq!(obs.0[4], 0.1);
    assert_eq!(obs.0[8], 0.3);
}

#[test]
fn reset_respects_bounds_and_is_seed_deterministic() {
    let mut env = FlightEnv::with_surrogate(EnvConfig::default(), 7);
    let b = env.config.bounds;
    for _ in 0..200 {
        env.reset();
        let s = *env.state().unwrap();
        let t = env.targets().unwrap();
        assert!(s.v >= b.v.0 && s.v <= b.v.1);
        assert!(s.alpha >= b.alpha.0 && s.alpha <= b.alpha.1);
        assert!(s.beta >= b.beta.0 && s.beta <= b.beta.1);
        assert!(s.p >= b.p.0 && s.p <= b.p.1);
        assert!(s.q >= b.q.0 && s.q <= b.q.1);
        assert!(s.r >= b.r.0 && s.r <= b.r.1);
        assert!(s.mu >= b.mu.0 && s.mu <= b.mu.1);
        assert!(s.gamma >= b.gamma.0 && s.gamma <= b.gamma.1);
        assert_eq!(s.chi, 0.0);
        assert_eq!(s.h, 0.0);
        assert!(t[0] >= b.alpha_d.0 && t[0] <= b.alpha_d.1);
        assert_eq!(t[1], 0.0);
        assert_eq!(t[2], 0.0);
    }

    let mut a = FlightEnv::with_surrogate(EnvConfig::default(), 42);
    let mut b2 = FlightEnv::with_surrogate(EnvConfig::default(), 42);
    for _ in 0..5 {
        assert_eq!(a.reset(), b2.reset());
        let act = EnvAction([0.1, -0.2, 0.05]);
        for _ in 0..20 {
            let oa = a.step(&act).unwrap();
            let ob = b2.step(&act).unwrap();
            assert_eq!(oa.observation, ob.observation);
            assert_eq!(oa.reward, ob.reward);
            if oa.done.is_some() {
                break;
            }
        }
    }
}

#[test]
fn step_reward_matches_recomputed_components() {
    let mut env = FlightEnv::with_surrogate(EnvConfig::default(), 11);
    env.reset();
    let c = env.config.reward;
    let mut sigma_prev = {
        let s = env.state().unwrap();
        let t = env.targets().unwrap();
        potential(s.alpha - t[0], &[s.p, s.q, s.r], &c)
    };
    let act = EnvAction([0.2, 0.0, -0.1]);
    for _ in 0..50 {
        let out = env.step(&act).unwrap();
        let s = out.state;
        let t = env.targets().unwrap();
        let e_alpha = s.alpha - t[0];
        let omega = [s.p, s.q, s.r];
        let sigma = potential(e_alpha, &omega, &c);
        assert_abs_diff_eq!(out.breakdown.pbrs, c.gamma * sigma - sigma_prev, epsilon = 1e-12);
        let b = out.breakdown;
        assert_abs_diff_eq!(
            b.total,
            b.r_raw + b.bonuses + b.action_penalty + b.pbrs + b.terminal,
            epsilon = 1e-12
        );
        let eps = blend((omega[0].powi(2) + omega[1].powi(2) + omega[2].powi(2)).sqrt(), &c);
        assert_abs_diff_eq!(
            b.r_raw,
            (1.0 - eps) * phase1_reward(s.p, s.q, s.r, &c)
                + eps * phase2_reward(e_alpha, s.q, s.p, s.r, &c),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            b.action_penalty,
            -(0.04 + 0.0 + 0.01),
            epsilon = 1e-12
        );
        sigma_prev = sigma;
        if out.done.is_some() {
            break;
        }
    }
}

#[test]
fn termination_reasons() {
    let cfg = EnvConfig::default();
    let base = AircraftState {
        v: 300.0,
        alpha: 0.3,
        beta: 0.0,
        p: 0.0,
        q: 0.0,
        r: 0.0,
        mu: 0.0,
        gamma: 0.0,
        chi: 0.0,
        h: 0.0,
    };
    assert_eq!(check_termination(&base, 0, &cfg), None);

    let mut s = base;
    s.alpha = 1.6;
    assert_eq!(check_termination(&s, 0, &cfg), Some(DoneReason::AlphaEnvelope));
    s = base;
    s.beta = 1.6;
    assert_eq!(check_termination(&s, 0, &cfg), Some(DoneReason::BetaEnvelope));
    s = base;
    s.v = 30.0;
    assert_eq!(check_termination(&s, 0, &cfg), Some(DoneReason::SpeedEnvelope));
    s = base;
    s.r = 32.0;
    assert_eq!(check_termination(&s, 0, &cfg), Some(DoneReason::RateEnvelope));
    s = base;
    s.p = f64::NAN;
    assert_eq!(check_termination(&s, 0, &cfg), Some(DoneReason::Singularity));
    assert_eq!(
        check_termination(&base, cfg.step_limit, &cfg),
        Some(DoneReason::StepLimit)
    );
    assert!(!DoneReason::StepLimit.is_envelope_exit());
    assert!(DoneReason::RateEnvelope.is_envelope_exit());
}

#[test]
fn envelope_exit_carries_terminal_penalty_step_limit_does_not() {
    // A fast steep dive accelerates past the speed envelope quickly.
    let mut cfg = EnvConfig::default();
    cfg.v_envelope = (50.0, 260.0);
    cfg.bounds.v = (250.0, 255.0);
    cfg.bounds.alpha = (0.0, 0.05);
    cfg.bounds.gamma = (-1.0, -0.9);
    let mut env = FlightEnv::with_surrogate(cfg, 3);
    env.reset();
    let act = EnvAction([1.0, 0.0, 0.0]);
    let mut exited = false;
    for _ in 0..5000 {
        let out = env.step(&act).unwrap();
        if let Some(reason) = out.done {
            if reason.is_envelope_exit() {
                assert_eq!(out.breakdown.terminal, env.config.reward.terminal_penalty);
                exited = true;
            }
            break;
        }
    }
    assert!(exited, "expected an envelope exit in the dive");

    // A short step limit ends the episode with no terminal penalty.
    let mut cfg = EnvConfig::default();
    cfg.step_limit = 3;
    cfg.bounds.p = (0.0, 0.01);
    cfg.bounds.q = (0.0, 0.01);
    cfg.bounds.r = (0.0, 0.01);
    cfg.bounds.alpha = (0.2, 0.3);
    cfg.bounds.mu = (0.0, 0.01);
    cfg.bounds.gamma = (0.0, 0.01);
    cfg.bounds.v = (300.0, 400.0);
    let mut env = FlightEnv::with_surrogate(cfg, 5);
    env.reset();
    let idle = EnvAction([0.0, 0.0, 0.0]);
    let mut last = None;
    for _ in 0..3 {
        last = Some(env.step(&idle).unwrap());
    }
    let out = last.unwrap();
    assert_eq!(out.done, Some(DoneReason::StepLimit));
    assert_eq!(out.breakdown.terminal, 0.0);
    assert!(matches!(env.step(&idle), Err(EnvError::EpisodeDone)));
}

#[test]
fn step_before_reset_errors() {
    let mut env = FlightEnv::with_surrogate(EnvConfig::default(), 1);
    assert!(matches!(env.step(&EnvAction([0.0; 3])), Err(EnvError::NotReset)));
}

#[test]
fn attitude_bonuses_awarded_inside_tolerance() {
    // Start essentially on target with negligible rates: all three bonuses.
    let mut cfg = EnvConfig::default();
    cfg.bounds.alpha = (0.25, 0.2501);
    cfg.bounds.alpha_d = (0.25, 0.2501);
    cfg.bounds.beta = (0.0, 1e-6);
    cfg.bounds.p = (0.0, 1e-6);
    cfg.bounds.q = (0.0, 1e-6);
    cfg.bounds.r = (0.0, 1e-6);
    cfg.bounds.mu = (0.0, 1e-6);
    cfg.bounds.gamma = (0.0, 1e-6);
    cfg.bounds.v = (350.0, 350.1);
    let mut env = FlightEnv::with_surrogate(cfg, 9);
    env.reset();
    let out = env.step(&EnvAction([0.0; 3])).unwrap();
    let c = env.config.reward;
    assert_eq!(out.breakdown.bonuses, c.bonus_alpha + c.bonus_beta + c.bonus_mu);
}
