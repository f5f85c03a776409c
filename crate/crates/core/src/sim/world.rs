//! Point-mass physics for one robot and one ball on a rectangular field.

use indexmap::IndexMap;

use super::{Kind, Scenario, Termination};
use crate::dsl::{angle_mod, Value};
use crate::interp::World;

pub type V2 = [f64; 2];

pub fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(a: V2, k: f64) -> V2 {
    [a[0] * k, a[1] * k]
}

pub fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: V2) -> f64 {
    a[0].hypot(a[1])
}

pub fn unit(a: V2) -> V2 {
    let n = norm(a);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        scale(a, 1.0 / n)
    }
}

pub fn heading(a: f64) -> V2 {
    [a.cos(), a.sin()]
}

pub fn bearing(from: V2, to: V2) -> f64 {
    let d = sub(to, from);
    d[1].atan2(d[0])
}

pub fn clamp_norm(a: V2, max: f64) -> V2 {
    let n = norm(a);
    if n > max {
        scale(a, max / n)
    } else {
        a
    }
}

pub const ROBOT_RADIUS: f64 = 0.09;
pub const BALL_RADIUS: f64 = 0.0215;
/// Extra reach of the kicker beyond body contact.
pub const KICK_REACH: f64 = 0.02;
/// Half-angle of the kicker's cone around the robot heading.
pub const KICK_CONE: f64 = 1.3;
const RESTITUTION: f64 = 0.3;
/// Docking tolerance on position (m) and heading (rad).
pub const DOCK_POS_TOL: f64 = 0.05;
pub const DOCK_ANG_TOL: f64 = 0.2;
/// Distance of the pre-dock point in front of the charger.
pub const PRE_DOCK: f64 = 0.6;

/// Motion command: world-frame velocity, angular rate, and kicker arming.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub vel: V2,
    pub omega: f64,
    pub kick: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub sc: Scenario,
    pub ball: V2,
    pub ball_vel: V2,
    pub robot: V2,
    pub robot_ang: f64,
    pub kicked: bool,
    pub steps: u64,
    pub done: Option<Termination>,
}

impl SimWorld {
    pub fn new(sc: &Scenario) -> Self {
        SimWorld {
            sc: sc.clone(),
            ball: sc.ball,
            ball_vel: sc.ball_vel,
            robot: sc.robot,
            robot_ang: sc.robot_ang,
            kicked: false,
            steps: 0,
            done: None,
        }
    }

    pub fn goal(&self) -> V2 {
        [self.sc.field.half_length, 0.0]
    }

    pub fn pre_dock(&self) -> V2 {
        sub(self.sc.target, scale(heading(self.sc.target_ang), PRE_DOCK))
    }

    /// Where the deflector's centre should stand so the pass meets its kicker.
    pub fn setup_loc(&self) -> V2 {
        let face = unit(sub(self.goal(), self.sc.target));
        sub(self.sc.target, scale(face, ROBOT_RADIUS + BALL_RADIUS))
    }

    pub fn docked(&self) -> bool {
        norm(sub(self.sc.target, self.robot)) < DOCK_POS_TOL
            && angle_mod(self.sc.target_ang - self.robot_ang).abs() < DOCK_ANG_TOL
    }

    fn has_ball(&self) -> bool {
        self.sc.kind != Kind::Docker
    }

    fn ins(&self) -> IndexMap<String, Value> {
        let v = |a: V2| Value::Vec2(a[0], a[1]);
        let n = Value::Num;
        let mut m = IndexMap::new();
        match self.sc.kind {
            Kind::Attacker => {
                m.insert("ballLoc".into(), v(self.ball));
                m.insert("ballVel".into(), v(self.ball_vel));
                m.insert("robotLoc".into(), v(self.robot));
                m.insert("robotAng".into(), n(self.robot_ang));
                m.insert("targetAng".into(), n(bearing(self.ball, self.goal())));
                m.insert("kicked".into(), n(f64::from(u8::from(self.kicked))));
            }
            Kind::Deflector => {
                m.insert("ballLoc".into(), v(self.ball));
                m.insert("ballVel".into(), v(self.ball_vel));
                m.insert("robotLoc".into(), v(self.robot));
                m.insert("robotAng".into(), n(self.robot_ang));
                m.insert("setupLoc".into(), v(self.setup_loc()));
                m.insert("targetAng".into(), n(bearing(self.sc.target, self.goal())));
                m.insert("kicked".into(), n(f64::from(u8::from(self.kicked))));
            }
            Kind::Docker => {
                let pre = self.pre_dock();
                m.insert("robotLoc".into(), v(self.robot));
                m.insert("robotAng".into(), n(self.robot_ang));
                m.insert("preDockLoc".into(), v(pre));
                m.insert("dockLoc".into(), v(self.sc.target));
                m.insert("dockAng".into(), n(self.sc.target_ang));
                m.insert("dist1".into(), n(norm(sub(pre, self.robot))));
                m.insert("err1".into(), n(angle_mod(bearing(self.robot, pre) - self.robot_ang)));
                m.insert("dist2".into(), n(norm(sub(self.sc.target, self.robot))));
                m.insert("err2".into(), n(angle_mod(self.sc.target_ang - self.robot_ang)));
            }
        }
        m
    }

    /// Advances the ball alone (the robot holds still), used once the state
    /// machine has finished.
    pub fn coast(&mut self, max_steps: u64) {
        while self.done.is_none() && self.steps < max_steps {
            if !self.has_ball() || norm(self.ball_vel) == 0.0 {
                break;
            }
            self.act(&Command::default());
        }
        if self.done.is_none() {
            self.done = Some(Termination::Timeout);
        }
    }

    fn step_ball(&mut self) {
        let p = &self.sc.physics;
        let f = &self.sc.field;
        let speed = norm(self.ball_vel);
        if speed > 0.0 {
            self.ball = add(self.ball, scale(self.ball_vel, p.dt));
            let slowed = (speed - p.friction * p.dt).max(0.0);
            self.ball_vel = scale(self.ball_vel, slowed / speed);
        }
        if self.ball[0] >= f.half_length {
            let scored = self.kicked && self.ball[1].abs() <= f.goal_half_width;
            self.done = Some(match (scored, self.sc.kind) {
                (true, Kind::Attacker) => Termination::GoalScored,
                (true, _) => Termination::Deflected,
                (false, _) => Termination::OutOfBounds,
            });
        } else if self.ball[0] <= -f.half_length || self.ball[1].abs() >= f.half_width {
            self.done = Some(Termination::OutOfBounds);
        }
    }

    /// Arms the kicker or resolves contact between the robot body and the ball.
    fn contact(&mut self, kick: bool) {
        let rel = sub(self.ball, self.robot);
        let d = norm(rel);
        let off = angle_mod(bearing(self.robot, self.ball) - self.robot_ang).abs();
        if kick && d <= ROBOT_RADIUS + BALL_RADIUS + KICK_REACH && off <= KICK_CONE {
            self.ball_vel = scale(heading(self.robot_ang), self.sc.physics.kick_speed);
            self.kicked = true;
            return;
        }
        let touch = ROBOT_RADIUS + BALL_RADIUS;
        if d < touch {
            let n = if d == 0.0 { heading(self.robot_ang) } else { scale(rel, 1.0 / d) };
            self.ball = add(self.robot, scale(n, touch));
            let vn = dot(self.ball_vel, n);
            if vn < 0.0 {
                self.ball_vel = sub(self.ball_vel, scale(n, (1.0 + RESTITUTION) * vn));
            }
        }
    }
}

impl World<Command> for SimWorld {
    fn sense(&mut self, _: u64) -> Option<IndexMap<String, Value>> {
        if self.done.is_some() {
            return None;
        }
        Some(self.ins())
    }

    fn act(&mut self, cmd: &Command) {
        let p = self.sc.physics;
        let f = self.sc.field;
        let vel = clamp_norm(cmd.vel, p.max_speed);
        let omega = cmd.omega.clamp(-p.max_ang_rate, p.max_ang_rate);
        self.robot = add(self.robot, scale(vel, p.dt));
        self.robot[0] = self.robot[0].clamp(-f.half_length, f.half_length);
        self.robot[1] = self.robot[1].clamp(-f.half_width, f.half_width);
        self.robot_ang = angle_mod(self.robot_ang + omega * p.dt);
        if self.has_ball() {
            self.step_ball();
            if self.done.is_none() {
                self.contact(cmd.kick);
            }
        }
        self.steps += 1;
    }
}
