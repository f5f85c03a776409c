//! Proportional controllers run by each state. They read the same inputs the
//! transition function sees, plus the scenario's fixed geometry.

use indexmap::IndexMap;

use super::world::{add, bearing, clamp_norm, heading, norm, scale, sub, unit, Command, V2};
use super::{Kind, Scenario};
use crate::dsl::{angle_mod, Value};
use crate::interp::Emission;

const POS_GAIN: f64 = 3.0;
const ANG_GAIN: f64 = 6.0;
/// Distance between robot and ball centres when lined up for a kick.
pub const STANDOFF: f64 = 0.15;
const KICK_APPROACH_SPEED: f64 = 0.6;
const TURN_RATE: f64 = 1.5;
const DRIVE_GAIN: f64 = 2.0;
const STEER_GAIN: f64 = 4.0;

fn vec(ins: &IndexMap<String, Value>, k: &str) -> V2 {
    match ins.get(k) {
        Some(Value::Vec2(x, y)) => [*x, *y],
        _ => [0.0, 0.0],
    }
}

fn num(ins: &IndexMap<String, Value>, k: &str) -> f64 {
    ins.get(k).and_then(Value::as_num).unwrap_or(0.0)
}

pub struct Controllers {
    pub sc: Scenario,
}

impl Controllers {
    fn goal(&self) -> V2 {
        [self.sc.field.half_length, 0.0]
    }

    /// Where a decelerating ball will be after `t` seconds.
    fn predict(&self, ball: V2, vel: V2, t: f64) -> V2 {
        let speed = norm(vel);
        if speed == 0.0 {
            return ball;
        }
        let a = self.sc.physics.friction;
        let t = if a > 0.0 { t.min(speed / a) } else { t };
        add(ball, scale(unit(vel), speed * t - 0.5 * a * t * t))
    }

    fn drive_to(&self, robot: V2, target: V2, feed: V2) -> V2 {
        clamp_norm(add(scale(sub(target, robot), POS_GAIN), feed), self.sc.physics.max_speed)
    }

    fn face(&self, robot_ang: f64, ang: f64) -> f64 {
        ANG_GAIN * angle_mod(ang - robot_ang)
    }

    fn attacker(&self, state: &str, ins: &IndexMap<String, Value>) -> Command {
        let (ball, vel, robot, ang) = (vec(ins, "ballLoc"), vec(ins, "ballVel"), vec(ins, "robotLoc"), num(ins, "robotAng"));
        let lookahead = match state {
            "GOTO" => 0.0,
            "INTERCEPT" => norm(sub(ball, robot)) / self.sc.physics.max_speed.max(0.1),
            "CATCH" => 0.5 * norm(sub(ball, robot)) / self.sc.physics.max_speed.max(0.1),
            "KICK" => {
                let u = unit(sub(self.goal(), ball));
                let target = sub(ball, scale(u, 0.05));
                return Command {
                    vel: clamp_norm(scale(sub(target, robot), POS_GAIN), KICK_APPROACH_SPEED),
                    omega: self.face(ang, bearing(ball, self.goal())),
                    kick: true,
                };
            }
            _ => return Command::default(),
        };
        let p = self.predict(ball, vel, lookahead.min(2.0));
        let u = unit(sub(self.goal(), p));
        let target = sub(p, scale(u, STANDOFF));
        let feed = if state == "GOTO" { [0.0, 0.0] } else { vel };
        Command { vel: self.drive_to(robot, target, feed), omega: self.face(ang, bearing(p, self.goal())), kick: false }
    }

    fn deflector(&self, state: &str, ins: &IndexMap<String, Value>) -> Command {
        let (robot, ang) = (vec(ins, "robotLoc"), num(ins, "robotAng"));
        match state {
            "SETUP" | "WAIT" | "KICK" => Command {
                vel: self.drive_to(robot, vec(ins, "setupLoc"), [0.0, 0.0]),
                omega: self.face(ang, num(ins, "targetAng")),
                kick: state == "KICK",
            },
            _ => Command::default(),
        }
    }

    fn docker(&self, state: &str, ins: &IndexMap<String, Value>) -> Command {
        let (robot, ang) = (vec(ins, "robotLoc"), num(ins, "robotAng"));
        let forward = |target: V2| {
            let err = angle_mod(bearing(robot, target) - ang);
            let dist = norm(sub(target, robot));
            let v = (DRIVE_GAIN * dist).min(self.sc.physics.max_speed) * err.cos().max(0.0);
            Command { vel: scale(heading(ang), v), omega: STEER_GAIN * err, kick: false }
        };
        let turn = |w: f64| Command { vel: [0.0, 0.0], omega: w, kick: false };
        match state {
            "S1_LEFT" | "S2_LEFT" => turn(TURN_RATE),
            "S1_RIGHT" | "S2_RIGHT" => turn(-TURN_RATE),
            "S1_FORWARD" => forward(vec(ins, "preDockLoc")),
            "S2_FORWARD" => forward(vec(ins, "dockLoc")),
            _ => Command::default(),
        }
    }
}

impl Emission for Controllers {
    type Output = Command;

    fn emit(
        &self,
        state: &str,
        ins: &IndexMap<String, Value>,
        vars: &IndexMap<String, Value>,
    ) -> (Command, IndexMap<String, Value>) {
        let cmd = match self.sc.kind {
            Kind::Attacker => self.attacker(state, ins),
            Kind::Deflector => self.deflector(state, ins),
            Kind::Docker => self.docker(state, ins),
        };
        (cmd, vars.clone())
    }
}
