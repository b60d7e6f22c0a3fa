//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Vector3};
use pointgo_core::batch::{run_matrix, BenchMatrix};
use pointgo_core::control::{
    cartesian_command, png_rotation_goal, ControlSystem, GainConfig, JoystickSample, Mode, ModeState,
};
use pointgo_core::frames::{build_control_frame, build_frame3, solve_theta_align, upright_theta_align};
use pointgo_core::kinematics::{ee_pose, forward_kinematics, jacobian, resolve_twist, KinematicChain, Twist};
use pointgo_core::metrics::{count_mode_switches, detect_pauses, MetricsConfig};
use pointgo_core::session::{replay_session, Session, SessionHeader, SessionRecord, SessionWriter};
use pointgo_core::sim::{run_episode, EpisodeSpec, ScenarioKind, ScriptedAgent, TaskScenario, World, DEFAULT_DT};
use rand::Rng;
use serde::Deserialize;

use common::{angle, arm_perturbed_q, home_q, near_home_q, orthonormality_defect, press, random_q, rng, world};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn deg(x: f64) -> f64 {
    x.to_degrees()
}

// ---------------------------------------------------------------- frames

fn frame_suite() -> Outcome {
    let chain = KinematicChain::gen3();
    let mut r = rng(11);
    let start = Instant::now();
    let (mut worst_align, mut worst_ortho, mut nonzero_z3) = (0.0_f64, 0.0_f64, 0usize);
    let mut degenerate = 0;
    for _ in 0..1000 {
        let q = random_q(&chain, &mut r);
        let r1 = ee_pose(&chain, &q).unwrap().orientation;
        let prev = r.gen_range(-PI..PI);
        let sol = solve_theta_align(&r1, prev).unwrap();
        let f2 = build_control_frame(&r1, sol.theta).unwrap();
        let f3 = build_frame3(&f2, None);
        if f3.degenerate {
            degenerate += 1;
            continue;
        }
        worst_align = worst_align.max(f2.x2.z.abs());
        if f3.z3.z != 0.0 {
            nonzero_z3 += 1;
        }
        let m = r1.matrix();
        worst_ortho = worst_ortho
            .max(orthonormality_defect([m.column(0).into(), m.column(1).into(), m.column(2).into()]))
            .max(orthonormality_defect([f2.x2, f2.y2, f2.z2]))
            .max(orthonormality_defect([f3.x3, f3.y3, f3.z3]));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_align < 1e-3 && nonzero_z3 == 0 && worst_ortho < 1e-9 && elapsed < Duration::from_secs(5) && degenerate == 0,
        format!(
            "max |x2·z_b| {worst_align:.1e}, z3·z_b ≠ 0 in {nonzero_z3}, orthonormality {worst_ortho:.1e}, \
             {degenerate} degenerate, {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- kinematics

fn jacobian_vs_fd() -> Outcome {
    let chain = KinematicChain::gen3();
    let mut r = rng(12);
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let q = random_q(&chain, &mut r);
        let j = jacobian(&chain, &q).unwrap();
        for k in 0..chain.dof() {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[k] += h;
            qm[k] -= h;
            let (pp, pm) = (ee_pose(&chain, &qp).unwrap(), ee_pose(&chain, &qm).unwrap());
            let v = (pp.position - pm.position) / (2.0 * h);
            // Skew part of the relative rotation; acos of the trace loses precision this small.
            let d = (pp.orientation * pm.orientation.inverse()).into_inner();
            let w = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]) / (4.0 * h);
            for i in 0..3 {
                worst = worst.max((j[(i, k)] - v[i]).abs()).max((j[(i + 3, k)] - w[i]).abs());
            }
        }
    }
    outcome(worst < 1e-6, format!("max |J − J_fd| {worst:.1e} over 100 configurations"))
}

fn resolve_twist_residual() -> Outcome {
    // DLS leaves λ²‖t‖/σ_min² of the twist unresolved, so full rank means
    // σ_min ≥ 0.1 and the twists are fine-motion commands of norm 0.01.
    let chain = KinematicChain::gen3();
    let mut r = rng(13);
    let (mut worst, mut poses, mut bound_violations) = (0.0_f64, 0, 0);
    while poses < 100 {
        let q = random_q(&chain, &mut r);
        let sigma_min = jacobian(&chain, &q).unwrap().svd(false, false).singular_values.min();
        if sigma_min < 0.1 {
            continue;
        }
        poses += 1;
        let dir = nalgebra::Vector6::from_fn(|_, _| r.gen_range(-1.0..1.0)).normalize();
        let t = Twist::from_vector(&(dir * 0.01));
        let res = resolve_twist(&chain, &q, &t, 1e-3).unwrap();
        worst = worst.max(res.residual);
        // Full-scale twist, compared against the analytic bias bound.
        let big = Twist::from_vector(&(dir * 0.2));
        let res = resolve_twist(&chain, &q, &big, 1e-3).unwrap();
        if res.scale == 1.0 && res.residual > 1e-6 * 0.2 / (sigma_min * sigma_min) * (1.0 + 1e-6) {
            bound_violations += 1;
        }
    }
    outcome(
        worst < 1e-6 && bound_violations == 0,
        format!("max residual {worst:.1e} (‖t‖ = 0.01, σ_min ≥ 0.1); λ²‖t‖/σ² bound violated {bound_violations}×"),
    )
}

#[derive(Deserialize)]
struct FkCase {
    q: Vec<f64>,
    links: Vec<[[f64; 4]; 4]>,
    ee: [[f64; 4]; 4],
}

#[derive(Deserialize)]
struct FkFixture {
    cases: Vec<FkCase>,
}

fn fk_oracle() -> Outcome {
    let fixture: FkFixture = serde_json::from_str(include_str!("fixtures/fk_oracle.json")).unwrap();
    let chain = KinematicChain::gen3();
    let mut worst = 0.0_f64;
    let diff = |pose: &pointgo_core::kinematics::Pose, m: &[[f64; 4]; 4]| {
        let r = pose.orientation.matrix();
        let mut d = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((r[(i, j)] - m[i][j]).abs());
            }
            d = d.max((pose.position[i] - m[i][3]).abs());
        }
        d
    };
    for case in &fixture.cases {
        let fk = forward_kinematics(&chain, &case.q).unwrap();
        for (pose, m) in fk.links.iter().zip(&case.links) {
            worst = worst.max(diff(pose, m));
        }
        worst = worst.max(diff(&fk.ee, &case.ee));
    }
    outcome(
        worst < 1e-12,
        format!("{} fixture configurations, max deviation {worst:.1e}", fixture.cases.len()),
    )
}

// ---------------------------------------------------------------- theta_align

fn theta_grid_oracle() -> Outcome {
    const N: usize = 1_000_000;
    let mut r = rng(14);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let r1 = Rotation3::from_scaled_axis(Vector3::from_fn(|_, _| r.gen_range(-PI..PI)));
        let m = r1.matrix();
        let (a, b) = (m[(2, 0)], m[(2, 1)]);
        // Scan [−π, π) for the smallest |x2·z_b|.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..N {
            let th = -PI + 2.0 * PI * i as f64 / N as f64;
            let v = (th.cos() * a + th.sin() * b).abs();
            if v < best.0 {
                best = (v, th);
            }
        }
        let sol = solve_theta_align(&r1, 0.0).unwrap();
        // Roots repeat every π.
        let d = (sol.theta - best.1).rem_euclid(PI);
        worst = worst.max(d.min(PI - d));
    }
    outcome(worst < 1e-5, format!("max distance to grid minimum {worst:.1e} rad"))
}

fn theta_continuity() -> Outcome {
    let mut r = rng(15);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let mut rot = Rotation3::from_scaled_axis(Vector3::from_fn(|_, _| r.gen_range(-PI..PI)));
        let omega = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        let mut theta = upright_theta_align(&rot).unwrap().theta;
        for _ in 0..1000 {
            rot = Rotation3::from_scaled_axis(omega * 0.01) * rot;
            let next = solve_theta_align(&rot, theta).unwrap().theta;
            worst = worst.max((next - theta).abs());
            theta = next;
        }
    }
    outcome(
        worst <= FRAC_PI_2,
        format!("largest step {:.2}° over 10 paths × 10 s at 10 ms", deg(worst)),
    )
}

// ---------------------------------------------------------------- sweep

fn azimuth(v: &Vector3<f64>) -> f64 {
    v.y.atan2(v.x)
}

fn sweep_suite() -> Outcome {
    let gains = GainConfig::default();
    let mut r = rng(16);
    let (mut wrist, mut elev, mut rate_err, mut lateral_err) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut wrong_sign = 0;
    for _ in 0..20 {
        let mut w = world(ControlSystem::PointAndGo, near_home_q(&mut r));
        let u_lr = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let sweep = JoystickSample::axes(0.0, u_lr, 0.0);
        let (p_w0, el0) = (w.wrist_center(), w.frame2().z2.z);
        let f3 = w.frame3();
        let toward = f3.y3.cross(&f3.z3) * u_lr;
        let (p_ee0, az0) = (w.ee_pose().position, azimuth(&f3.z3));
        let lever = {
            let d = p_ee0 - p_w0;
            Vector3::new(d.x, d.y, 0.0).norm()
        };
        let mut lateral_done = false;
        let mut unwrapped = 0.0;
        let mut last = az0;
        for _ in 0..200 {
            w.step(&sweep).unwrap();
            let z3 = w.frame3().z3;
            let az = azimuth(&z3);
            unwrapped += (az - last + PI).rem_euclid(2.0 * PI) - PI;
            last = az;
            wrist = wrist.max((w.wrist_center() - p_w0).norm());
            elev = elev.max((w.frame2().z2.z - el0).abs());
            if !lateral_done && unwrapped.abs() >= 0.05 {
                let moved = (w.ee_pose().position - p_ee0).norm();
                let expected = lever * unwrapped.abs();
                lateral_err = lateral_err.max((moved / expected - 1.0).abs());
                lateral_done = true;
                if (w.frame3().z3 - f3.z3).dot(&toward) <= 0.0 {
                    wrong_sign += 1;
                }
            }
        }
        let rate = unwrapped.abs() / w.time();
        rate_err = rate_err.max((rate / gains.k_s - 1.0).abs());
    }
    outcome(
        wrist < 1e-3 && elev < 1e-3 && rate_err < 0.05 && lateral_err < 0.05 && wrong_sign == 0,
        format!(
            "wrist drift {:.2} mm, z2·z_b drift {elev:.1e}, azimuth rate error {:.2}%, \
             lateral error {:.2}% at 0.05 rad, sign errors {wrong_sign}",
            wrist * 1e3,
            rate_err * 100.0,
            lateral_err * 100.0
        ),
    )
}

// ---------------------------------------------------------------- rotation

/// Enters rotation mode; returns the captured home orientation.
fn enter_rotation(w: &mut World) -> Rotation3<f64> {
    w.step(&press()).unwrap();
    assert_eq!(w.mode(), Mode::Rotation);
    w.mode_state().home.as_ref().unwrap().pose.orientation
}

/// Time after which `err` stays within `tol`, given samples every `dt` from t = dt.
fn settle_time(errs: &[f64], tol: f64, dt: f64) -> f64 {
    errs.iter().rposition(|e| *e > tol).map_or(0.0, |i| (i + 1) as f64 * dt)
}

fn rotation_step_and_return() -> Outcome {
    let gains = GainConfig::default();
    let tol = 2.0_f64.to_radians();
    let inputs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let mut r = rng(17);
    let (mut worst_step, mut worst_return) = (0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let q0 = arm_perturbed_q(&mut r);
        for (fb, lr) in inputs {
            let mut w = world(ControlSystem::PointAndGo, q0.clone());
            let home_r = enter_rotation(&mut w);
            let home = w.mode_state().home.clone().unwrap();
            let u = JoystickSample::axes(fb, lr, 0.0);
            let goal = png_rotation_goal(&u, &home, gains.alpha);
            let mut errs = Vec::new();
            for _ in 0..300 {
                w.step(&u).unwrap();
                errs.push(angle(&w.ee_pose().orientation, &goal));
            }
            worst_step = worst_step.max(settle_time(&errs, tol, w.dt()));
            errs.clear();
            for _ in 0..300 {
                w.step(&JoystickSample::default()).unwrap();
                errs.push(angle(&w.ee_pose().orientation, &home_r));
            }
            worst_return = worst_return.max(settle_time(&errs, tol, w.dt()));
        }
    }
    outcome(
        worst_step <= 2.0 && worst_return <= 2.0,
        format!("2° settling: step {worst_step:.2} s, return to home {worst_return:.2} s"),
    )
}

fn rotation_envelope() -> Outcome {
    let alpha = GainConfig::default().alpha;
    let mut r = rng(18);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let mut w = world(ControlSystem::PointAndGo, near_home_q(&mut r));
        let home = enter_rotation(&mut w);
        let mut ticks = 0;
        while ticks < 400 {
            let u = JoystickSample::axes(r.gen_range(-1.2..1.2), r.gen_range(-1.2..1.2), 0.0);
            for _ in 0..r.gen_range(10..60) {
                w.step(&u).unwrap();
                worst = worst.max(angle(&w.ee_pose().orientation, &home));
                ticks += 1;
            }
        }
    }
    outcome(
        worst <= alpha + 2.0_f64.to_radians(),
        format!("max distance from home {:.2}° (α = {:.0}°)", deg(worst), deg(alpha)),
    )
}

fn rotation_exit_latch() -> Outcome {
    let mut r = rng(19);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let mut w = world(ControlSystem::PointAndGo, near_home_q(&mut r));
        enter_rotation(&mut w);
        let u = JoystickSample::axes(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        for _ in 0..r.gen_range(20..150) {
            w.step(&u).unwrap();
        }
        let latched = w.ee_pose().orientation;
        w.step(&press()).unwrap();
        assert_eq!(w.mode(), Mode::Translation);
        for _ in 0..200 {
            w.step(&JoystickSample::default()).unwrap();
            worst = worst.max(angle(&w.ee_pose().orientation, &latched));
        }
    }
    outcome(worst <= 1e-6, format!("max drift 2 s after exit {worst:.1e} rad"))
}

// ---------------------------------------------------------------- consistency

fn consistency() -> Outcome {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    let mut r = rng(20);
    let pitch = JoystickSample::axes(1.0, 0.0, 0.0);
    let (mut png_worst, mut cart_axes) = (0.0_f64, Vec::new());
    for _ in 0..100 {
        let pose = ee_pose(&chain, &random_q(&chain, &mut r)).unwrap();
        let st = ModeState::new(ControlSystem::PointAndGo, &pose.orientation, 0.0).unwrap();
        let (rot, _) = st.switch_mode(&pose, 0.0).unwrap();
        let home = rot.home.as_ref().unwrap();
        let goal = png_rotation_goal(&pitch, home, gains.alpha);
        let axis = (goal * pose.orientation.inverse()).scaled_axis().normalize();
        png_worst = png_worst.max(axis.z.abs());
        let w = cartesian_command(&pitch, Mode::Rotation, &pose.orientation, &gains).angular;
        cart_axes.push(w.normalize());
    }
    let mut spread = 0.0_f64;
    for (i, a) in cart_axes.iter().enumerate() {
        for b in &cart_axes[i + 1..] {
            spread = spread.max(a.angle(b));
        }
    }
    let zs = cart_axes.iter().map(|a| a.z);
    let range = zs.clone().fold(f64::MIN, f64::max) - zs.fold(f64::MAX, f64::min);
    outcome(
        png_worst < 1e-3 && spread >= FRAC_PI_2,
        format!(
            "png max |axis·z_b| {png_worst:.1e}; cartesian spread {:.0}°, axis·z_b range {range:.2}",
            deg(spread)
        ),
    )
}

// ---------------------------------------------------------------- mode switches

const SEEDS: u64 = 5;

fn agent_switches(system: ControlSystem, kind: ScenarioKind) -> Vec<(bool, usize)> {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    (0..SEEDS)
        .map(|seed| {
            let spec = EpisodeSpec {
                system,
                scenario: TaskScenario::builtin(kind),
                seed,
                dt: DEFAULT_DT,
            };
            let mut agent = ScriptedAgent::new(system, &spec.scenario, &gains);
            let m = run_episode(&chain, &gains, &spec, &mut agent, &MetricsConfig::default())
                .unwrap()
                .metrics;
            (m.success, m.mode_switches)
        })
        .collect()
}

fn structural_switch_bound() -> Outcome {
    let gains = GainConfig::default();
    let png_goal = agent_switches(ControlSystem::PointAndGo, ScenarioKind::Goalpost);
    let png_ok = png_goal.iter().all(|&(s, n)| s && n == 0);

    let mut r = rng(21);
    let mut max_w = 0.0_f64;
    for _ in 0..1000 {
        let u = JoystickSample::axes(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let r1 = Rotation3::from_scaled_axis(Vector3::from_fn(|_, _| r.gen_range(-PI..PI)));
        max_w = max_w.max(cartesian_command(&u, Mode::Translation, &r1, &gains).angular.norm());
    }
    let mut w = world(ControlSystem::Cartesian, home_q());
    for _ in 0..200 {
        let u = JoystickSample::axes(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        max_w = max_w.max(w.step(&u).unwrap().twist.angular.norm());
    }

    let cart_goal = agent_switches(ControlSystem::Cartesian, ScenarioKind::Goalpost);
    let cart_ok = cart_goal.iter().all(|&(_, n)| n >= 1);
    let mut ordered = true;
    let mut table = Vec::new();
    for kind in ScenarioKind::ALL {
        let png = agent_switches(ControlSystem::PointAndGo, kind);
        let cart = if kind == ScenarioKind::Goalpost {
            cart_goal.clone()
        } else {
            agent_switches(ControlSystem::Cartesian, kind)
        };
        ordered &= png.iter().zip(&cart).all(|(p, c)| p.1 <= c.1);
        let mean = |v: &[(bool, usize)]| v.iter().map(|x| x.1 as f64).sum::<f64>() / v.len() as f64;
        table.push(format!("{kind} {:.1}/{:.1}", mean(&png), mean(&cart)));
    }
    outcome(
        png_ok && max_w < 1e-9 && cart_ok && ordered,
        format!(
            "goalpost png 0 switches: {png_ok}; cartesian translation |ω| max {max_w:.1e}; \
             cartesian goalpost ≥ 1: {cart_ok}; png/cartesian mean switches {}",
            table.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- metrics

#[derive(Deserialize)]
struct PauseLabel {
    name: String,
    expected: usize,
    segments: Vec<([f64; 3], f64)>,
}

#[derive(Deserialize)]
struct ButtonLabel {
    name: String,
    expected: usize,
    pressed: Vec<u8>,
}

#[derive(Deserialize)]
struct Labels {
    dt: f64,
    epsilon: f64,
    tau: f64,
    pauses: Vec<PauseLabel>,
    buttons: Vec<ButtonLabel>,
}

fn expand(segments: &[([f64; 3], f64)], dt: f64) -> Vec<[f64; 3]> {
    segments
        .iter()
        .flat_map(|(axes, secs)| std::iter::repeat_n(*axes, (secs / dt).round() as usize))
        .collect()
}

fn metrics_fixtures() -> Outcome {
    let labels: Labels = serde_json::from_str(include_str!("fixtures/metrics_labels.json")).unwrap();
    let mut wrong = Vec::new();
    for case in &labels.pauses {
        let got = detect_pauses(&expand(&case.segments, labels.dt), labels.dt, labels.epsilon, labels.tau);
        if got != case.expected {
            wrong.push(format!("{} {got}≠{}", case.name, case.expected));
        }
    }
    for case in &labels.buttons {
        let mut w = world(ControlSystem::Cartesian, home_q());
        for &p in &case.pressed {
            w.step(&if p == 1 { press() } else { JoystickSample::default() }).unwrap();
        }
        let got = count_mode_switches(&w.events().mode_switches).unwrap();
        if got != case.expected {
            wrong.push(format!("{} {got}≠{}", case.name, case.expected));
        }
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{} pause and {} button fixtures; mismatches: [{}]",
            labels.pauses.len(),
            labels.buttons.len(),
            wrong.join(", ")
        ),
    )
}

/// Idle valleys, each falling then rising in magnitude, between active stretches.
/// Starts and ends active, so no valley touches an end of the log.
fn valley_log(r: &mut impl Rng, eps_max: f64) -> Vec<[f64; 3]> {
    let mut log = Vec::new();
    for _ in 0..r.gen_range(2..8) {
        push_active(&mut log, r, eps_max);
        let n = r.gen_range(1..150);
        let depth: f64 = r.gen_range(0.0..eps_max);
        let mid = r.gen_range(0..n);
        for i in 0..n {
            let t = if i <= mid {
                (mid - i) as f64 / (mid.max(1)) as f64
            } else {
                (i - mid) as f64 / ((n - mid).max(1)) as f64
            };
            let m = depth + (eps_max - depth) * t * 0.999;
            let s = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            log.push([s * m, m * r.gen_range(-1.0..1.0), 0.0]);
        }
    }
    push_active(&mut log, r, eps_max);
    log
}

fn push_active(log: &mut Vec<[f64; 3]>, r: &mut impl Rng, eps_max: f64) {
    for _ in 0..r.gen_range(1..80) {
        log.push([r.gen_range(eps_max..1.0), r.gen_range(-1.0..1.0), 0.0]);
    }
}

fn metrics_monotonicity() -> Outcome {
    let mut r = rng(22);
    let dt = 0.01;
    let (mut tau_bad, mut eps_bad) = (0, 0);
    for _ in 0..300 {
        // Arbitrary logs: pauses never increase as tau grows.
        let log: Vec<[f64; 3]> = (0..r.gen_range(10..600))
            .map(|_| {
                let mut u = [0.0; 3];
                if r.gen_bool(0.4) {
                    u[r.gen_range(0..3)] = r.gen_range(-1.0..1.0);
                } else {
                    u[0] = r.gen_range(-0.08..0.08);
                }
                u
            })
            .collect();
        let counts: Vec<usize> = (1..40).map(|k| detect_pauses(&log, dt, 0.05, k as f64 * 0.05)).collect();
        tau_bad += counts.windows(2).filter(|w| w[1] > w[0]).count();

        let log = valley_log(&mut r, 0.2);
        let counts: Vec<usize> = (1..40).map(|k| detect_pauses(&log, dt, k as f64 * 0.005, 0.3)).collect();
        eps_bad += counts.windows(2).filter(|w| w[1] < w[0]).count();
    }
    outcome(
        tau_bad == 0 && eps_bad == 0,
        format!(
            "τ violations {tau_bad} on arbitrary logs; ε violations {eps_bad} on logs with single-valley idle stretches"
        ),
    )
}

fn record_replay() -> Outcome {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    let cfg = MetricsConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut checked = 0;
    let mut mismatched = Vec::new();
    for kind in ScenarioKind::ALL {
        for system in ControlSystem::ALL {
            let scenario = TaskScenario::builtin(kind);
            let path = dir.path().join(format!("{kind}-{system}.ndjson"));
            let header = SessionHeader::new(system, &scenario, &chain, &gains, DEFAULT_DT, cfg);
            let mut writer = SessionWriter::create(&path, header).unwrap();
            for (episode, seed) in [(0u32, 3u64), (1, 8)] {
                let spec = EpisodeSpec {
                    system,
                    scenario: scenario.clone(),
                    seed,
                    dt: DEFAULT_DT,
                };
                let mut agent = ScriptedAgent::new(system, &scenario, &gains);
                let ep = run_episode(&chain, &gains, &spec, &mut agent, &cfg).unwrap();
                writer
                    .write(&SessionRecord::EpisodeStart {
                        episode,
                        seed,
                        q0: ep.q0.clone(),
                        system: None,
                        scenario: None,
                    })
                    .unwrap();
                for (tick, sample) in ep.inputs.iter().enumerate() {
                    writer
                        .write(&SessionRecord::Input {
                            episode,
                            tick: tick as u64,
                            sample: *sample,
                        })
                        .unwrap();
                }
                writer
                    .write(&SessionRecord::EpisodeEnd {
                        episode,
                        metrics: ep.metrics,
                    })
                    .unwrap();
            }
            drop(writer);
            for o in replay_session(&Session::from_file(&path).unwrap()).unwrap() {
                checked += 1;
                if !o.matches() {
                    mismatched.push(format!("{kind}/{system}/{}", o.episode));
                }
            }
        }
    }
    outcome(
        mismatched.is_empty() && checked == 18,
        format!("{checked} episodes replayed; mismatches: [{}]", mismatched.join(", ")),
    )
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Outcome {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    let matrix = BenchMatrix {
        trials: 2,
        base_seed: 77,
        ..BenchMatrix::default()
    };
    let render = || {
        let report = run_matrix(&chain, &gains, &matrix).unwrap();
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        (report.to_json().unwrap(), csv)
    };
    let (a, b) = (render(), render());
    outcome(
        a == b,
        format!("{} JSON bytes, {} CSV bytes, identical: {}", a.0.len(), a.1.len(), a == b),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 17] = [
        ("frames: settled states", frame_suite),
        ("kinematics: jacobian vs finite differences", jacobian_vs_fd),
        ("kinematics: resolve_twist residual", resolve_twist_residual),
        ("kinematics: FK vs oracle fixture", fk_oracle),
        ("theta_align: grid-scan oracle", theta_grid_oracle),
        ("theta_align: continuity along paths", theta_continuity),
        ("sweep: wrist, elevation, rate, lateral", sweep_suite),
        ("rotation: step and neutral settling", rotation_step_and_return),
        ("rotation: envelope", rotation_envelope),
        ("rotation: exit latches orientation", rotation_exit_latch),
        ("consistency: pitch axis", consistency),
        ("mode switches: structural bound", structural_switch_bound),
        ("metrics: hand-labeled fixtures", metrics_fixtures),
        ("metrics: monotonicity", metrics_monotonicity),
        ("metrics: record, replay, identical", record_replay),
        ("determinism: fixed-seed bench", determinism),
        ("runtime", || outcome(true, "")),
    ];
    let mut failed = 0;
    for (name, check) in &criteria[..criteria.len() - 1] {
        let t = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {} [{:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    let total = start.elapsed();
    let in_budget = total < Duration::from_secs(120);
    failed += usize::from(!in_budget);
    println!(
        "{} runtime: whole acceptance run {:.1} s (budget 120 s)",
        if in_budget { "PASS" } else { "FAIL" },
        total.as_secs_f64()
    );
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
