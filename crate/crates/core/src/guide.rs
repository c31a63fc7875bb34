//! The guide's follow / await-grab / escort state machine.
//!
//! While following, the guide tracks its persona's anchor next to the user.
//! A navigation request suspends following and makes the guide grabbable;
//! grabbing it either teleports both avatars to the target or starts a
//! walking escort along a planned path. Releasing drops the escort and the
//! guide goes back to following.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioEvent, AudioKind, STRIDE_LENGTH};
use crate::pathfinding::{follow_anchor, plan_cells, step_towards, PathFollower};
use crate::persona::{FootstepProfile, Persona, Tracking};
use crate::scene::{Cell, Pose, Scene, Vec3};

/// Guide walking speed in m/s. The escorted user moves at the same speed.
pub const GUIDE_WALK_SPEED: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    Walk,
    Teleport,
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TravelMode::Walk => "walk",
            TravelMode::Teleport => "teleport",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuideState {
    Following,
    AwaitingGrab { target: String, mode: TravelMode },
    Escorting { target: String, mode: TravelMode, route: PathFollower },
}

impl GuideState {
    pub fn name(&self) -> &'static str {
        match self {
            GuideState::Following => "following",
            GuideState::AwaitingGrab { .. } => "awaiting_grab",
            GuideState::Escorting { .. } => "escorting",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            GuideState::Following => None,
            GuideState::AwaitingGrab { target, .. } | GuideState::Escorting { target, .. } => Some(target),
        }
    }

    /// The grab collider is active only while waiting to be grabbed.
    pub fn grabbable(&self) -> bool {
        matches!(self, GuideState::AwaitingGrab { .. })
    }

    pub fn grabbed(&self) -> bool {
        matches!(self, GuideState::Escorting { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuideCommand {
    RequestNavigation { target: String, mode: TravelMode },
    Grab,
    Release,
    CancelNavigation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuideError {
    #[error("the guide is not offering itself to be grabbed")]
    NotGrabbable,
    #[error("unknown navigation target `{0}`")]
    UnknownTarget(String),
    #[error("no walkable path to `{0}`")]
    Unreachable(String),
    #[error("already escorting to `{0}`")]
    AlreadyEscorting(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuideOutput {
    pub events: Vec<AudioEvent>,
    pub guide_pose: Pose,
    pub user_pose: Pose,
    /// Both avatars were relocated instantly this transition.
    pub teleported: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub walk_speed: f64,
    pub stride: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { walk_speed: GUIDE_WALK_SPEED, stride: STRIDE_LENGTH }
    }
}

/// The guide: FSM state, pose, and footstep cadence progress.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideAgent {
    state: GuideState,
    pose: Pose,
    stride_progress: f64,
    motion: MotionConfig,
}

impl GuideAgent {
    /// A guide that joins the user at its persona anchor, following.
    pub fn join(user: &Pose, persona: &Persona, motion: MotionConfig) -> Self {
        let pose = Pose::new(follow_anchor(user, &persona.placement), user.yaw);
        Self { state: GuideState::Following, pose, stride_progress: 0.0, motion }
    }

    pub fn at(pose: Pose, motion: MotionConfig) -> Self {
        Self { state: GuideState::Following, pose, stride_progress: 0.0, motion }
    }

    pub fn state(&self) -> &GuideState {
        &self.state
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn is_grabbable(&self) -> bool {
        self.state.grabbable()
    }

    pub fn is_grabbed(&self) -> bool {
        self.state.grabbed()
    }

    fn output(&self, user: Pose, events: Vec<AudioEvent>) -> GuideOutput {
        GuideOutput { events, guide_pose: self.pose, user_pose: user, teleported: false }
    }

    /// Applies one command. On error the state is unchanged, except for
    /// `Unreachable`, after which the guide is back to following.
    pub fn apply_command(
        &mut self,
        cmd: &GuideCommand,
        scene: &Scene,
        user: Pose,
        now: f64,
    ) -> Result<GuideOutput, GuideError> {
        match (cmd, &self.state) {
            (GuideCommand::RequestNavigation { target, .. }, _) if scene.object(target).is_none() => {
                Err(GuideError::UnknownTarget(target.clone()))
            }
            (GuideCommand::RequestNavigation { .. }, GuideState::Escorting { target, .. }) => {
                Err(GuideError::AlreadyEscorting(target.clone()))
            }
            (GuideCommand::RequestNavigation { target, mode }, _) => {
                // last request wins while waiting
                self.state = GuideState::AwaitingGrab { target: target.clone(), mode: *mode };
                Ok(self.output(user, Vec::new()))
            }
            (GuideCommand::Grab, GuideState::AwaitingGrab { target, mode }) => {
                let (target, mode) = (target.clone(), *mode);
                let obj = scene.object(&target).ok_or_else(|| GuideError::UnknownTarget(target.clone()))?;
                let haptic = AudioEvent::new(now, AudioKind::HapticGrab, self.pose.position);
                match mode {
                    TravelMode::Teleport => {
                        let yaw = Pose::yaw_towards(obj.anchor, obj.position).unwrap_or(user.yaw);
                        let arrived = Pose::new(obj.anchor, yaw);
                        self.pose = arrived;
                        self.state = GuideState::Following;
                        self.stride_progress = 0.0;
                        let events = vec![
                            haptic,
                            AudioEvent::new(now, AudioKind::Teleport, obj.anchor),
                            AudioEvent::new(now, AudioKind::Arrival, obj.anchor),
                        ];
                        Ok(GuideOutput { events, guide_pose: arrived, user_pose: arrived, teleported: true })
                    }
                    TravelMode::Walk => {
                        let grid = &scene.grid;
                        let goal = grid.cell_of(obj.anchor);
                        let start = [self.pose.position, user.position]
                            .into_iter()
                            .map(|p| grid.cell_of(p))
                            .find(|&c| grid.is_walkable(c));
                        let path = start.and_then(|s: Cell| plan_cells(grid, s, goal).ok());
                        match path {
                            Some(path) => {
                                let route = PathFollower::with_lead_in(grid.cell_center(path.start), &path);
                                self.state = GuideState::Escorting { target, mode, route };
                                Ok(self.output(user, vec![haptic]))
                            }
                            None => {
                                self.state = GuideState::Following;
                                Err(GuideError::Unreachable(target))
                            }
                        }
                    }
                }
            }
            (GuideCommand::Grab, _) => Err(GuideError::NotGrabbable),
            (GuideCommand::Release | GuideCommand::CancelNavigation, GuideState::Following) => {
                Ok(self.output(user, Vec::new()))
            }
            (GuideCommand::Release, GuideState::AwaitingGrab { .. }) => Ok(self.output(user, Vec::new())),
            (GuideCommand::Release | GuideCommand::CancelNavigation, _) => {
                self.state = GuideState::Following;
                Ok(self.output(user, Vec::new()))
            }
        }
    }

    fn footsteps(&mut self, moved: f64, profile: FootstepProfile, now: f64) -> Vec<AudioEvent> {
        let mut events = Vec::new();
        self.stride_progress += moved;
        while self.stride_progress >= self.motion.stride - 1e-9 {
            self.stride_progress = (self.stride_progress - self.motion.stride).max(0.0);
            if profile != FootstepProfile::None {
                events.push(AudioEvent::new(now, AudioKind::GuideFootstep { profile }, self.pose.position));
            }
        }
        events
    }

    /// Advances the guide by `dt`. `now` is the time at the end of the step.
    pub fn tick(&mut self, scene: &Scene, user: Pose, persona: &Persona, dt: f64, now: f64) -> GuideOutput {
        match &mut self.state {
            GuideState::Following => {
                let anchor = follow_anchor(&user, &persona.placement);
                let moved = match persona.placement.tracking {
                    Tracking::Attached => {
                        let moved = self.pose.position.distance(anchor);
                        self.pose = Pose::new(anchor, user.yaw);
                        moved
                    }
                    Tracking::Walk => {
                        let step = step_towards(self.pose, anchor, self.motion.walk_speed, dt);
                        self.pose = step.pose;
                        step.distance_moved
                    }
                };
                let events = self.footsteps(moved, persona.footstep_profile, now);
                self.output(user, events)
            }
            GuideState::AwaitingGrab { .. } => self.output(user, Vec::new()),
            GuideState::Escorting { target, route, .. } => {
                let previous = self.pose;
                let step = route.advance(previous, self.motion.walk_speed, dt);
                let target = target.clone();
                self.pose = step.pose;
                let mut user_pose = Pose::new(previous.position, step.pose.yaw);
                let mut events = self.footsteps(step.distance_moved, persona.footstep_profile, now);
                if step.arrived {
                    if let Some(obj) = scene.object(&target) {
                        if let Some(yaw) = Pose::yaw_towards(user_pose.position, obj.position) {
                            user_pose = Pose::new(user_pose.position, yaw);
                        }
                    }
                    events.push(AudioEvent::new(now, AudioKind::Arrival, self.pose.position));
                    self.state = GuideState::Following;
                }
                self.output(user_pose, events)
            }
        }
    }

    /// Places the guide somewhere directly, e.g. when a session restarts following.
    pub fn set_pose(&mut self, pose: Pose) {
        self.pose = pose;
    }

    pub fn escort_destination(&self) -> Option<Vec3> {
        match &self.state {
            GuideState::Escorting { route, .. } => route.destination(),
            _ => None,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::persona::PersonaRegistry;
    use crate::scene::fixtures::town;

    fn human() -> Persona {
        PersonaRegistry::with_builtins().get("human").unwrap().clone()
    }

    fn nav(target: &str, mode: TravelMode) -> GuideCommand {
        GuideCommand::RequestNavigation { target: target.into(), mode }
    }

    #[test]
    fn request_then_grab_walk_escorts() {
        let scene = town();
        let user = scene.spawn;
        let mut g = GuideAgent::join(&user, &human(), MotionConfig::default());
        g.apply_command(&nav("sideways_building", TravelMode::Walk), &scene, user, 0.0).unwrap();
        assert!(g.is_grabbable());
        assert_eq!(g.state().name(), "awaiting_grab");
        let out = g.apply_command(&GuideCommand::Grab, &scene, user, 0.0).unwrap();
        assert!(g.is_grabbed() && !g.is_grabbable());
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.events[0].kind, AudioKind::HapticGrab);
        assert_eq!(out.user_pose, user);
    }

    #[test]
    fn release_before_arrival_has_no_arrival() {
        let scene = town();
        let user = scene.spawn;
        let p = human();
        let mut g = GuideAgent::join(&user, &p, MotionConfig::default());
        g.apply_command(&nav("landmark", TravelMode::Walk), &scene, user, 0.0).unwrap();
        g.apply_command(&GuideCommand::Grab, &scene, user, 0.0).unwrap();
        let mut u = user;
        let mut arrivals = 0;
        for i in 0..30 {
            let out = g.tick(&scene, u, &p, 1.0 / 30.0, i as f64 / 30.0);
            u = out.user_pose;
            arrivals += out.events.iter().filter(|e| e.kind == AudioKind::Arrival).count();
        }
        g.apply_command(&GuideCommand::Release, &scene, u, 1.0).unwrap();
        assert_eq!(g.state(), &GuideState::Following);
        assert_eq!(arrivals, 0);
    }

    #[test]
    fn grab_outside_awaiting_is_rejected() {
        let scene = town();
        let mut g = GuideAgent::join(&scene.spawn, &human(), MotionConfig::default());
        let before = g.clone();
        assert_eq!(g.apply_command(&GuideCommand::Grab, &scene, scene.spawn, 0.0), Err(GuideError::NotGrabbable));
        assert_eq!(g, before);
        assert_eq!(
            g.apply_command(&nav("fountain", TravelMode::Walk), &scene, scene.spawn, 0.0),
            Err(GuideError::UnknownTarget("fountain".into()))
        );
    }

    #[test]
    fn teleport_relocates_both() {
        let scene = town();
        let mut g = GuideAgent::join(&scene.spawn, &human(), MotionConfig::default());
        g.apply_command(&nav("red_car", TravelMode::Teleport), &scene, scene.spawn, 2.0).unwrap();
        let out = g.apply_command(&GuideCommand::Grab, &scene, scene.spawn, 2.0).unwrap();
        let kinds: Vec<_> = out.events.iter().map(|e| e.kind.name()).collect();
        assert_eq!(kinds, ["haptic_grab", "teleport", "arrival"]);
        let anchor = scene.object("red_car").unwrap().anchor;
        assert_eq!(out.user_pose.position, anchor);
        assert_eq!(out.guide_pose.position, anchor);
        assert!(out.teleported);
        assert_eq!(g.state(), &GuideState::Following);
    }

    #[test]
    fn new_request_replaces_pending_and_cancel_returns() {
        let scene = town();
        let mut g = GuideAgent::join(&scene.spawn, &human(), MotionConfig::default());
        g.apply_command(&nav("red_car", TravelMode::Walk), &scene, scene.spawn, 0.0).unwrap();
        g.apply_command(&nav("landmark", TravelMode::Teleport), &scene, scene.spawn, 0.0).unwrap();
        assert_eq!(g.state(), &GuideState::AwaitingGrab { target: "landmark".into(), mode: TravelMode::Teleport });
        g.apply_command(&GuideCommand::CancelNavigation, &scene, scene.spawn, 0.0).unwrap();
        assert_eq!(g.state(), &GuideState::Following);
    }

    #[test]
    fn following_fixed_point_is_silent() {
        let scene = town();
        let p = human();
        let mut g = GuideAgent::join(&scene.spawn, &p, MotionConfig::default());
        let before = g.pose();
        let out = g.tick(&scene, scene.spawn, &p, 1.0 / 30.0, 1.0 / 30.0);
        assert!(out.events.is_empty());
        assert_eq!(out.guide_pose.position, before.position);
    }

    #[test]
    fn awaiting_holds_position() {
        let scene = town();
        let p = human();
        let mut g = GuideAgent::join(&scene.spawn, &p, MotionConfig::default());
        g.apply_command(&nav("red_car", TravelMode::Walk), &scene, scene.spawn, 0.0).unwrap();
        let before = g.pose();
        let walked = Pose::new(Vec3::new(-3.0, 0.0, 0.5), 0.0);
        let out = g.tick(&scene, walked, &p, 1.0, 1.0);
        assert_eq!(out.guide_pose, before);
        assert!(out.events.is_empty());
    }

    #[test]
    fn arrival_within_one_tick() {
        // a straight 1 m corridor: guide on a cell center, target anchor one cell away
        let grid = crate::scene::WalkGrid::open(Vec3::ZERO, 1.0, 3, 1).unwrap();
        let obj = crate::scene::fixtures::object("post", Vec3::new(2.5, 0.0, 0.5), Vec3::new(1.5, 0.0, 0.5));
        let scene = Scene::new("corridor", vec![obj], grid, Pose::new(Vec3::new(0.5, 0.0, 0.5), 0.0)).unwrap();
        let p = human();
        let mut g = GuideAgent::at(Pose::new(Vec3::new(0.5, 0.0, 0.5), 0.0), MotionConfig::default());
        let user = scene.spawn;
        g.apply_command(&nav("post", TravelMode::Walk), &scene, user, 0.0).unwrap();
        g.apply_command(&GuideCommand::Grab, &scene, user, 0.0).unwrap();
        let out = g.tick(&scene, user, &p, 1.0, 1.0);
        assert_eq!(out.events.iter().filter(|e| e.kind == AudioKind::Arrival).count(), 1);
        assert_eq!(g.state(), &GuideState::Following);
        // user trails at the guide's previous position
        assert_eq!(out.user_pose.position, Vec3::new(0.5, 0.0, 0.5));
    }

    #[test]
    fn scripted_escort_displacement_matches_path_length() {
        let scene = town();
        let p = human();
        let grid = &scene.grid;
        let start = grid.cell_center(grid.cell_of(scene.spawn.position));
        let mut g = GuideAgent::at(Pose::new(start, 0.0), MotionConfig::default());
        let user = scene.spawn;
        g.apply_command(&nav("landmark", TravelMode::Walk), &scene, user, 0.0).unwrap();
        g.apply_command(&GuideCommand::Grab, &scene, user, 0.0).unwrap();
        let path = plan_cells(grid, grid.cell_of(start), grid.cell_of(scene.object("landmark").unwrap().anchor)).unwrap();
        let expected = path.length(grid.cell_size);
        let dt = 1.0 / 30.0;

        // summed advance() outputs over the same 30 s schedule
        let mut follower = PathFollower::with_lead_in(start, &path);
        let mut pose = Pose::new(start, 0.0);
        let mut walked = 0.0;
        for _ in 0..(30 * 30) {
            let step = follower.advance(pose, GUIDE_WALK_SPEED, dt);
            pose = step.pose;
            walked += step.distance_moved;
            if step.arrived {
                break;
            }
        }
        assert!((walked - expected).abs() < 1e-3, "{walked} vs {expected}");

        let mut u = user;
        let mut arrivals = 0;
        let mut footsteps = 0;
        for i in 0..(30 * 30) {
            let out = g.tick(&scene, u, &p, dt, (i + 1) as f64 * dt);
            u = out.user_pose;
            arrivals += out.events.iter().filter(|e| e.kind == AudioKind::Arrival).count();
            footsteps += out.events.iter().filter(|e| matches!(e.kind, AudioKind::GuideFootstep { .. })).count();
            assert!(grid.is_walkable_point(out.guide_pose.position));
            assert!(grid.is_walkable_point(u.position));
            if g.state() == &GuideState::Following {
                break;
            }
        }
        assert_eq!(arrivals, 1);
        assert_eq!(g.pose(), pose);
        assert_eq!(footsteps, (expected / STRIDE_LENGTH + 1e-9).floor() as usize);
    }

    #[test]
    fn invisible_guide_is_silent_footed() {
        let scene = town();
        let reg = PersonaRegistry::with_builtins();
        let inv = reg.get("invisible").unwrap();
        let robot = reg.get("robot").unwrap();
        let far = Pose::new(Vec3::new(0.5, 0.0, 10.5), 0.0);
        let mut a = GuideAgent::at(scene.spawn, MotionConfig::default());
        let mut b = a.clone();
        let mut steps_inv = 0;
        let mut steps_robot = Vec::new();
        for i in 0..300 {
            steps_inv += a.tick(&scene, far, inv, 1.0 / 30.0, i as f64).events.len();
            steps_robot.extend(b.tick(&scene, far, robot, 1.0 / 30.0, i as f64).events);
        }
        assert_eq!(steps_inv, 0);
        assert!(!steps_robot.is_empty());
        assert!(steps_robot
            .iter()
            .all(|e| e.kind == AudioKind::GuideFootstep { profile: FootstepProfile::MetalSteps }));
    }

    #[test]
    fn bird_rides_on_shoulder() {
        let scene = town();
        let reg = PersonaRegistry::with_builtins();
        let bird = reg.get("bird").unwrap();
        let mut g = GuideAgent::join(&scene.spawn, bird, MotionConfig::default());
        let moved = Pose::new(Vec3::new(3.0, 0.0, -2.0), 1.0);
        g.tick(&scene, moved, bird, 1.0 / 30.0, 0.0);
        assert!(g.pose().position.distance(follow_anchor(&moved, &bird.placement)) < 1e-12);
    }
}
