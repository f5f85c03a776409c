use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::world::{add, bearing, heading, norm, scale, sub, PRE_DOCK};
use super::{Field, Kind, Outcome, Physics, Scenario};

pub const HEATMAP_GRID: usize = 10;
pub const HEATMAP_ANGLES: usize = 12;
/// Initial ball speed in heat-map mode (m/s).
const HEATMAP_SPEED: f64 = 1.0;
/// Attacker ball speeds are drawn from this range (m/s).
const BALL_SPEED: (f64, f64) = (0.0, 1.0);
/// Deflector pass speed on arrival at the receiving spot (m/s).
const PASS_ARRIVAL: (f64, f64) = (0.8, 2.0);

fn uniform_in(rng: &mut ChaCha8Rng, field: &Field, margin: f64) -> [f64; 2] {
    [
        rng.gen_range(-field.half_length + margin..field.half_length - margin),
        rng.gen_range(-field.half_width + margin..field.half_width - margin),
    ]
}

fn inside(field: &Field, p: [f64; 2], margin: f64) -> bool {
    p[0].abs() <= field.half_length - margin && p[1].abs() <= field.half_width - margin
}

fn base(kind: Kind, seed: u64) -> Scenario {
    Scenario {
        kind,
        seed,
        ball: [0.0, 0.0],
        ball_vel: [0.0, 0.0],
        robot: [0.0, 0.0],
        robot_ang: 0.0,
        target: [0.0, 0.0],
        target_ang: 0.0,
        physics: Physics::default(),
        field: Field::default(),
    }
}

fn one(kind: Kind, rng: &mut ChaCha8Rng) -> Scenario {
    let mut sc = base(kind, rng.next_u64());
    let field = sc.field;
    let friction = sc.physics.friction;
    match kind {
        Kind::Attacker => {
            sc.ball = uniform_in(rng, &field, 0.5);
            let speed = rng.gen_range(BALL_SPEED.0..BALL_SPEED.1);
            sc.ball_vel = scale(heading(rng.gen_range(-PI..PI)), speed);
            sc.robot = uniform_in(rng, &field, 0.3);
            sc.robot_ang = rng.gen_range(-PI..PI);
        }
        Kind::Deflector => loop {
            let recv = [rng.gen_range(1.5..3.5), rng.gen_range(-2.0..2.0)];
            let face = bearing(recv, [field.half_length, 0.0]);
            let dist = rng.gen_range(2.0..3.5);
            let from = face + rng.gen_range(-FRAC_PI_4..FRAC_PI_4);
            let ball = add(recv, scale(heading(from), dist));
            let robot = add(recv, scale(heading(rng.gen_range(-PI..PI)), rng.gen_range(0.5..1.5)));
            let arrival: f64 = rng.gen_range(PASS_ARRIVAL.0..PASS_ARRIVAL.1);
            let robot_ang = rng.gen_range(-PI..PI);
            if !inside(&field, ball, 0.1) || !inside(&field, robot, 0.1) {
                continue;
            }
            let speed = (arrival * arrival + 2.0 * friction * dist).sqrt();
            sc.target = recv;
            sc.ball = ball;
            sc.ball_vel = scale(heading(from + PI), speed);
            sc.robot = robot;
            sc.robot_ang = robot_ang;
            break;
        },
        Kind::Docker => loop {
            let dock = uniform_in(rng, &field, 0.5);
            let ang = rng.gen_range(-PI..PI);
            let pre = sub(dock, scale(heading(ang), PRE_DOCK));
            let robot = add(dock, scale(heading(rng.gen_range(-PI..PI)), rng.gen_range(1.0..4.0)));
            let robot_ang = rng.gen_range(-PI..PI);
            if !inside(&field, pre, 0.2) || !inside(&field, robot, 0.2) || norm(sub(robot, pre)) < 0.3 {
                continue;
            }
            sc.target = dock;
            sc.target_ang = ang;
            sc.robot = robot;
            sc.robot_ang = robot_ang;
            break;
        },
    }
    sc
}

/// `n` scenarios drawn uniformly over the field, deterministic in `seed`.
pub fn gen_scenarios(seed: u64, n: usize, kind: Kind) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| one(kind, &mut rng)).collect()
}

/// Attacker heat-map suite: the robot starts at the origin facing the goal;
/// the ball starts on a 10×10 grid and rolls in one of 12 evenly spaced
/// directions.
pub fn heatmap_scenarios() -> Vec<Scenario> {
    let field = Field::default();
    let mut out = Vec::with_capacity(HEATMAP_GRID * HEATMAP_GRID * HEATMAP_ANGLES);
    let span = |half: f64, i: usize| -half * 0.8 + 1.6 * half * (i as f64 + 0.5) / HEATMAP_GRID as f64;
    for i in 0..HEATMAP_GRID {
        for j in 0..HEATMAP_GRID {
            for k in 0..HEATMAP_ANGLES {
                let mut sc = base(Kind::Attacker, out.len() as u64);
                sc.ball = [span(field.half_length, i), span(field.half_width, j)];
                let ang = 2.0 * PI * k as f64 / HEATMAP_ANGLES as f64;
                sc.ball_vel = scale(heading(ang), HEATMAP_SPEED);
                out.push(sc);
            }
        }
    }
    out
}

/// `x,y,angle,success` rows, one per scenario: the ball's start and heading,
/// or the robot's pose for the docker.
pub fn heatmap_csv(scenarios: &[Scenario], outcomes: &[Outcome]) -> String {
    let mut s = String::from("x,y,angle,success\n");
    for (sc, o) in scenarios.iter().zip(outcomes) {
        let (at, ang) = match sc.kind {
            Kind::Docker => (sc.robot, sc.robot_ang),
            _ => (sc.ball, sc.ball_vel[1].atan2(sc.ball_vel[0])),
        };
        s.push_str(&format!("{},{},{},{}\n", at[0], at[1], ang, u8::from(o.success)));
    }
    s
}
