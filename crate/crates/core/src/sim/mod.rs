//! Desk-scale 2D simulators for the attacker, deflector and docker state
//! machines, scenario generators, and success-rate evaluation.

mod control;
mod scenarios;
mod search;
pub mod world;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use control::{Controllers, STANDOFF};
pub use scenarios::{gen_scenarios, heatmap_csv, heatmap_scenarios, HEATMAP_ANGLES, HEATMAP_GRID};
pub use search::{
    exhaustive_search, experiment_suites, first_disagreement, improvement_experiment, label_failures, slice_params,
    ExperimentError, GridSearch, Improvement, MAX_GRID_POINTS,
};
pub use world::{Command, SimWorld};

use crate::dsl::{parse_params, parse_rsm, DslError, ParamMap, Trace, TransitionFn, Type};
use crate::interp::{Rsm, StepError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Attacker,
    Deflector,
    Docker,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Attacker, Kind::Deflector, Kind::Docker];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Attacker => "attacker",
            Kind::Deflector => "deflector",
            Kind::Docker => "docker",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn source(self) -> &'static str {
        match self {
            Kind::Attacker => include_str!("../../fixtures/sim/attacker.rsm"),
            Kind::Deflector => include_str!("../../fixtures/sim/deflector.rsm"),
            Kind::Docker => include_str!("../../fixtures/sim/docker.rsm"),
        }
    }

    pub fn rsm(self) -> TransitionFn {
        parse_rsm(self.source()).expect("bundled state machine parses")
    }

    /// Deliberately detuned starting parameters.
    pub fn baseline(self) -> ParamMap {
        let src = match self {
            Kind::Attacker => include_str!("../../fixtures/sim/attacker.baseline.json"),
            Kind::Deflector => include_str!("../../fixtures/sim/deflector.baseline.json"),
            Kind::Docker => include_str!("../../fixtures/sim/docker.baseline.json"),
        };
        parse_params(src, &self.rsm()).expect("bundled params parse")
    }

    /// Parameters a careful operator would pick; used to label corrections.
    pub fn reference(self) -> ParamMap {
        let src = match self {
            Kind::Attacker => include_str!("../../fixtures/sim/attacker.reference.json"),
            Kind::Deflector => include_str!("../../fixtures/sim/deflector.reference.json"),
            Kind::Docker => include_str!("../../fixtures/sim/docker.reference.json"),
        };
        parse_params(src, &self.rsm()).expect("bundled params parse")
    }

    pub fn default_max_steps(self) -> u64 {
        match self {
            Kind::Attacker => 1200,
            Kind::Deflector => 600,
            Kind::Docker => 1200,
        }
    }

    fn inputs(self) -> &'static [(&'static str, Type)] {
        match self {
            Kind::Attacker => &[
                ("ballLoc", Type::Vec2),
                ("ballVel", Type::Vec2),
                ("robotLoc", Type::Vec2),
                ("robotAng", Type::Num),
                ("targetAng", Type::Num),
                ("kicked", Type::Num),
            ],
            Kind::Deflector => &[
                ("ballLoc", Type::Vec2),
                ("ballVel", Type::Vec2),
                ("robotLoc", Type::Vec2),
                ("robotAng", Type::Num),
                ("setupLoc", Type::Vec2),
                ("targetAng", Type::Num),
                ("kicked", Type::Num),
            ],
            Kind::Docker => &[
                ("robotLoc", Type::Vec2),
                ("robotAng", Type::Num),
                ("preDockLoc", Type::Vec2),
                ("dockLoc", Type::Vec2),
                ("dockAng", Type::Num),
                ("dist1", Type::Num),
                ("err1", Type::Num),
                ("dist2", Type::Num),
                ("err2", Type::Num),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Physics {
    /// Timestep (s).
    pub dt: f64,
    /// Ball deceleration from rolling friction (m/s²).
    pub friction: f64,
    /// Robot speed limit (m/s).
    pub max_speed: f64,
    /// Robot turn-rate limit (rad/s).
    pub max_ang_rate: f64,
    /// Ball speed right after a kick (m/s).
    pub kick_speed: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics { dt: 1.0 / 60.0, friction: 0.3, max_speed: 2.0, max_ang_rate: 4.0, kick_speed: 4.0 }
    }
}

/// Field centred on the origin; the goal is on the `+x` end line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Field {
    pub half_length: f64,
    pub half_width: f64,
    pub goal_half_width: f64,
}

impl Default for Field {
    fn default() -> Self {
        Field { half_length: 4.5, half_width: 3.0, goal_half_width: 0.5 }
    }
}

impl Field {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0].abs() <= self.half_length && p[1].abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    pub ball: [f64; 2],
    pub ball_vel: [f64; 2],
    pub robot: [f64; 2],
    pub robot_ang: f64,
    /// Receiving spot for the deflector, charger position for the docker.
    #[serde(default)]
    pub target: [f64; 2],
    /// Charger heading for the docker: the heading the robot must have when docked.
    #[serde(default)]
    pub target_ang: f64,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub field: Field,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let p = &self.physics;
        let bad = |m: &str| Err(SimError::InvalidScenario(m.into()));
        if !(p.dt > 0.0 && p.dt.is_finite()) {
            return bad("timestep must be positive");
        }
        if !(p.friction >= 0.0) || !(p.max_speed >= 0.0) || !(p.max_ang_rate >= 0.0) || !(p.kick_speed >= 0.0) {
            return bad("physics constants must be nonnegative");
        }
        let pts = [self.ball, self.robot, self.target];
        if pts.iter().flatten().chain(&self.ball_vel).any(|x| !x.is_finite()) {
            return bad("positions and velocities must be finite");
        }
        if !pts.iter().all(|q| self.field.contains(*q)) {
            return bad("positions must lie within the field");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    GoalScored,
    Deflected,
    Docked,
    Timeout,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub success: bool,
    pub reason: Termination,
    pub trace: Trace,
    /// Physics steps taken, including any after the machine finished.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{source} (world: {world})")]
    Step { source: StepError, world: String },
    #[error("state machine inputs do not match the {kind} simulator: {detail}")]
    SignatureMismatch { kind: &'static str, detail: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no scenarios to evaluate")]
    EmptyScenarioSet,
    #[error("grid has {0} points, more than the limit")]
    GridTooLarge(u128),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Step { source, .. } => source.source.kind(),
            SimError::SignatureMismatch { .. } => "SignatureMismatch",
            SimError::InvalidScenario(_) => "InvalidScenario",
            SimError::EmptyScenarioSet => "EmptyScenarioSet",
            SimError::GridTooLarge(_) => "GridTooLarge",
            SimError::Dsl(e) => e.kind(),
        }
    }
}

fn check_signature(f: &TransitionFn, kind: Kind) -> Result<(), SimError> {
    let want = kind.inputs();
    let same = f.inputs.len() == want.len() && want.iter().all(|(n, t)| f.inputs.get(*n) == Some(t));
    if same {
        return Ok(());
    }
    let expected: Vec<String> = want.iter().map(|(n, t)| format!("{n}: {t}")).collect();
    Err(SimError::SignatureMismatch { kind: kind.name(), detail: format!("expected inputs {{{}}}", expected.join(", ")) })
}

/// Runs the state machine closed-loop against the scenario's world.
pub fn simulate(f: &TransitionFn, params: &ParamMap, sc: &Scenario, max_steps: u64) -> Result<Outcome, SimError> {
    check_signature(f, sc.kind)?;
    sc.validate()?;
    let mut world = SimWorld::new(sc);
    let rsm = Rsm::new(f.clone(), Controllers { sc: sc.clone() }, params.clone());
    let trace = rsm
        .run(&mut world, max_steps)
        .map_err(|source| SimError::Step { source, world: format!("{world:?}") })?;
    let finished = trace.elements().last().is_some_and(|e| e.state == f.end);
    if sc.kind == Kind::Docker {
        world.done = Some(if finished && world.docked() { Termination::Docked } else { Termination::Timeout });
    } else {
        world.coast(max_steps);
    }
    let reason = world.done.unwrap_or(Termination::Timeout);
    let success = matches!(reason, Termination::GoalScored | Termination::Deflected | Termination::Docked);
    Ok(Outcome { success, reason, trace, steps: world.steps })
}

/// Fraction of scenarios that succeed, with the per-scenario outcomes in
/// input order.
pub fn success_rate(
    f: &TransitionFn,
    params: &ParamMap,
    scenarios: &[Scenario],
    max_steps: u64,
) -> Result<(f64, Vec<Outcome>), SimError> {
    if scenarios.is_empty() {
        return Err(SimError::EmptyScenarioSet);
    }
    let outcomes = scenarios
        .par_iter()
        .map(|sc| simulate(f, params, sc, max_steps))
        .collect::<Result<Vec<_>, _>>()?;
    let wins = outcomes.iter().filter(|o| o.success).count();
    Ok((wins as f64 / outcomes.len() as f64, outcomes))
}


#[cfg(test)]
mod tests;
