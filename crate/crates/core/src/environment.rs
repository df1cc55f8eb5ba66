//! The tracking world: pursuer and target motion, sensing, filter updates and
//! the shared reward.
//!
//! One call to [`Environment::step`] runs, in order: pursuer motion, target
//! motion, one filter prediction for every target, sensing and correction in
//! ascending `(agent, target)` order, the reward, and finally the per-pursuer
//! feature sets built from one-step-ahead copies of the corrected beliefs.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::Matrix4;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action::ActionPrimitive;
use crate::belief::{init_belief, make_double_integrator, FilterBank, FilterParams, RangeBearingMeasurement};
use crate::encoding::{encode_observation, FeatureSet};
use crate::geometry::{global_to_local_polar, step_unicycle, wrap, Pose2, TargetPhase};
use crate::stream::SeededStream;
use crate::trace::TraceRecord;
use crate::{Error, Result};

/// Map area per pursuer, m^2. Four pursuers share 2500 m^2.
pub const AREA_PER_AGENT: f64 = 2500.0 / 4.0;
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Square-map area that keeps pursuer density at [`AREA_PER_AGENT`].
pub fn map_area_for(n_agents: usize) -> Result<f64> {
    if n_agents == 0 {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    Ok(AREA_PER_AGENT * n_agents as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub n_agents: usize,
    pub m_targets: usize,
    /// Side of the square map in meters.
    pub map_side: f64,
    pub horizon: usize,
    pub dt: f64,
    pub sensing_radius: f64,
    pub fov_half_angle: f64,
    pub v_max: f64,
    /// Process noise intensity of the true target motion.
    pub target_noise: f64,
    /// Extra velocity noise after a wall bounce; invisible to the filter.
    pub wall_noise_std: f64,
    pub agent_min_separation: f64,
    pub target_spawn_min: f64,
    pub target_spawn_max: f64,
    pub filter: FilterParams,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_agents: 1,
            m_targets: 1,
            map_side: AREA_PER_AGENT.sqrt(),
            horizon: 200,
            dt: 0.5,
            sensing_radius: 10.0,
            fov_half_angle: FRAC_PI_4,
            v_max: 2.0,
            target_noise: 0.01,
            wall_noise_std: 0.5,
            agent_min_separation: 1.0,
            target_spawn_min: 5.0,
            target_spawn_max: 10.0,
            filter: FilterParams::default(),
            seed: 0,
        }
    }
}

impl WorldConfig {
    /// Copy of `self` resized to `n` pursuers and `m` targets on a
    /// density-preserving map.
    pub fn for_task(&self, n: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one target".into()));
        }
        Ok(Self { n_agents: n, m_targets: m, map_side: map_area_for(n)?.sqrt(), ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("map_side", self.map_side),
            ("dt", self.dt),
            ("sensing_radius", self.sensing_radius),
            ("v_max", self.v_max),
            ("filter.sigma_range", self.filter.sigma_range),
            ("filter.sigma_bearing", self.filter.sigma_bearing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("target_noise", self.target_noise),
            ("wall_noise_std", self.wall_noise_std),
            ("filter.q", self.filter.q),
            ("agent_min_separation", self.agent_min_separation),
            ("target_spawn_min", self.target_spawn_min),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_agents == 0 || self.m_targets == 0 || self.horizon == 0 {
            return Err(Error::InvalidArgument("agent, target and horizon counts must be positive".into()));
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle <= PI) {
            return Err(Error::InvalidArgument("fov_half_angle must lie in (0, pi]".into()));
        }
        if self.target_spawn_max < self.target_spawn_min {
            return Err(Error::InvalidArgument("target_spawn_max below target_spawn_min".into()));
        }
        if self.filter.init_cov_diag.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("initial covariance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub step: usize,
    pub agents: Vec<Pose2>,
    /// Velocity commanded by each pursuer's previous action.
    pub agent_velocities: Vec<[f64; 2]>,
    pub targets: Vec<TargetPhase>,
    pub bank: FilterBank,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    /// One feature set per pursuer, each with one element per target.
    pub features: Vec<FeatureSet>,
    /// Shared by every pursuer.
    pub reward: f64,
    pub done: bool,
    /// `observed[i][j]`: target `j` was inside pursuer `i`'s sensing sector.
    pub observed: Vec<Vec<bool>>,
}

/// Sensing sector test against a point in the global frame.
pub fn in_fov(agent: &Pose2, point: [f64; 2], cfg: &WorldConfig) -> bool {
    let (r, b) = global_to_local_polar(agent, point);
    r <= cfg.sensing_radius && b.abs() <= cfg.fov_half_angle
}

/// `-(1/m) sum_j log det(cov_j)`.
pub fn reward(bank: &FilterBank) -> Result<f64> {
    if bank.is_empty() {
        return Err(Error::InvalidArgument("empty filter bank".into()));
    }
    let logdets = bank.logdets()?;
    Ok(-logdets.iter().sum::<f64>() / logdets.len() as f64)
}

/// Lower Cholesky factor of the per-axis (position, velocity) block of the
/// double-integrator process noise.
fn axis_noise_factor(dt: f64, q: f64) -> [[f64; 2]; 2] {
    if q == 0.0 {
        return [[0.0; 2]; 2];
    }
    let l00 = (q * dt.powi(3) / 3.0).sqrt();
    let l10 = q * dt * dt / 2.0 / l00;
    let l11 = (q * dt - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}

/// Advances one target: noisy double integrator, wall reflection with extra
/// velocity noise, then a speed clamp.
pub fn target_step(
    t: &TargetPhase,
    cfg: &WorldConfig,
    transition: &Matrix4<f64>,
    stream: &mut SeededStream,
) -> TargetPhase {
    let l = axis_noise_factor(cfg.dt, cfg.target_noise);
    let mut s = (transition * nalgebra::Vector4::from(t.as_array())).into();
    let s: &mut [f64; 4] = &mut s;
    for axis in 0..2 {
        let e0: f64 = StandardNormal.sample(stream);
        let e1: f64 = StandardNormal.sample(stream);
        s[axis] += l[0][0] * e0;
        s[axis + 2] += l[1][0] * e0 + l[1][1] * e1;
    }
    let side = cfg.map_side;
    let mut bounced = false;
    for axis in 0..2 {
        let p = &mut s[axis];
        if *p < 0.0 {
            *p = -*p;
            s[axis + 2] = -s[axis + 2];
            bounced = true;
        } else if *p > side {
            *p = 2.0 * side - *p;
            s[axis + 2] = -s[axis + 2];
            bounced = true;
        }
        // a reflection can only overshoot after an implausibly large step
        s[axis] = s[axis].clamp(0.0, side);
    }
    if bounced && cfg.wall_noise_std > 0.0 {
        for axis in 2..4 {
            let e: f64 = StandardNormal.sample(stream);
            s[axis] += cfg.wall_noise_std * e;
        }
    }
    let mut out = TargetPhase::from_array(*s);
    let speed = out.speed();
    if speed > cfg.v_max {
        let k = cfg.v_max / speed;
        out.vx *= k;
        out.vy *= k;
    }
    out
}

struct Streams {
    targets: Vec<SeededStream>,
    sensors: Vec<SeededStream>,
}

/// A single episode of the tracking world. Owns its random streams, so runs
/// with the same config and seed are bit-identical.
pub struct Environment {
    cfg: WorldConfig,
    state: WorldState,
    streams: Streams,
}

const INIT_STREAM: u64 = 0;
const TARGET_STREAM: u64 = 1;
const SENSOR_STREAM: u64 = 2;

impl Environment {
    /// Draws initial positions and beliefs and returns the first observation.
    pub fn reset(cfg: &WorldConfig, stream: &SeededStream) -> Result<(Self, StepResult)> {
        cfg.validate()?;
        let mut init = stream.derive(INIT_STREAM);
        let side = cfg.map_side;

        let mut agents: Vec<Pose2> = Vec::with_capacity(cfg.n_agents);
        for _ in 0..cfg.n_agents {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let x = init.gen_range(0.0..=side);
                let y = init.gen_range(0.0..=side);
                let clear = agents
                    .iter()
                    .all(|a| (a.x - x).hypot(a.y - y) >= cfg.agent_min_separation);
                if clear {
                    placed = Some((x, y));
                    break;
                }
            }
            let (x, y) = placed.ok_or_else(|| {
                Error::Infeasible(format!(
                    "could not place {} agents {} m apart on a {side:.1} m map",
                    cfg.n_agents, cfg.agent_min_separation
                ))
            })?;
            let heading = wrap(init.gen_range(-PI..PI));
            agents.push(Pose2::new(x, y, heading));
        }

        let mut targets = Vec::with_capacity(cfg.m_targets);
        for _ in 0..cfg.m_targets {
            let anchor = agents[init.gen_range(0..agents.len())];
            let d = init.gen_range(cfg.target_spawn_min..=cfg.target_spawn_max);
            let dir = init.gen_range(-PI..PI);
            targets.push(TargetPhase::at_rest(
                (anchor.x + d * dir.cos()).clamp(0.0, side),
                (anchor.y + d * dir.sin()).clamp(0.0, side),
            ));
        }
        let beliefs = targets.iter().map(|t| init_belief(t, &cfg.filter, &mut init)).collect();

        let state = WorldState {
            step: 0,
            agent_velocities: vec![[0.0; 2]; agents.len()],
            agents,
            targets,
            bank: FilterBank::new(beliefs, cfg.dt, &cfg.filter),
            done: false,
        };
        let env = Self::from_state(cfg.clone(), state, stream);
        let observed = env.fov_matrix();
        let first = StepResult {
            features: env.features(&observed)?,
            reward: reward(&env.state.bank)?,
            done: false,
            observed,
        };
        Ok((env, first))
    }

    /// Wraps an explicit state, e.g. a hand-built scenario.
    pub fn from_state(cfg: WorldConfig, state: WorldState, stream: &SeededStream) -> Self {
        let t = stream.derive(TARGET_STREAM);
        let s = stream.derive(SENSOR_STREAM);
        let streams = Streams {
            targets: (0..state.targets.len() as u64).map(|j| t.derive(j)).collect(),
            sensors: (0..state.agents.len() as u64).map(|i| s.derive(i)).collect(),
        };
        Self { cfg, state, streams }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn n_agents(&self) -> usize {
        self.state.agents.len()
    }

    pub fn m_targets(&self) -> usize {
        self.state.targets.len()
    }

    fn fov_matrix(&self) -> Vec<Vec<bool>> {
        self.state
            .agents
            .iter()
            .map(|a| self.state.targets.iter().map(|t| in_fov(a, t.position(), &self.cfg)).collect())
            .collect()
    }

    /// Measures every target inside a sensing sector and corrects the shared
    /// bank, in ascending `(agent, target)` order. Returns the observed flags.
    pub fn sense_and_update(&mut self) -> Vec<Vec<bool>> {
        let observed = self.fov_matrix();
        let (sr, sb) = (self.cfg.filter.sigma_range, self.cfg.filter.sigma_bearing);
        for (i, row) in observed.iter().enumerate() {
            let pose = self.state.agents[i];
            for (j, _) in row.iter().enumerate().filter(|(_, &seen)| seen) {
                let (r, b) = global_to_local_polar(&pose, self.state.targets[j].position());
                let rng = &mut self.streams.sensors[i];
                let nr: f64 = StandardNormal.sample(rng);
                let nb: f64 = StandardNormal.sample(rng);
                let z = RangeBearingMeasurement {
                    range: (r + sr * nr).max(0.0),
                    bearing: wrap(b + sb * nb),
                    source_pose: pose,
                };
                if let Err(e) = self.state.bank.update(j, &z) {
                    log::debug!("skipping update of target {j} by agent {i}: {e}");
                }
            }
        }
        observed
    }

    fn features(&self, observed: &[Vec<bool>]) -> Result<Vec<FeatureSet>> {
        let ahead = self.state.bank.predicted();
        let logdets = ahead.iter().map(|b| b.logdet()).collect::<Result<Vec<_>>>()?;
        self.state
            .agents
            .iter()
            .zip(&self.state.agent_velocities)
            .zip(observed)
            .map(|((a, v), obs)| encode_observation(a, *v, &ahead, &logdets, obs))
            .collect()
    }

    /// Advances the world by one synchronised step.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        if self.state.done {
            return Err(Error::EpisodeDone(self.state.step));
        }
        if actions.len() != self.n_agents() {
            return Err(Error::InvalidArgument(format!(
                "expected {} actions, got {}",
                self.n_agents(),
                actions.len()
            )));
        }
        let prims = actions
            .iter()
            .map(|&a| ActionPrimitive::from_index(a))
            .collect::<Result<Vec<_>>>()?;

        let side = self.cfg.map_side;
        for ((pose, vel), a) in self
            .state
            .agents
            .iter_mut()
            .zip(self.state.agent_velocities.iter_mut())
            .zip(&prims)
        {
            let mut next = step_unicycle(*pose, *a, self.cfg.dt)?;
            next.x = next.x.clamp(0.0, side);
            next.y = next.y.clamp(0.0, side);
            let (s, c) = next.heading.sin_cos();
            *vel = [a.linear_speed * c, a.linear_speed * s];
            *pose = next;
        }

        let (transition, _) = make_double_integrator(self.cfg.dt, 0.0);
        for (t, rng) in self.state.targets.iter_mut().zip(self.streams.targets.iter_mut()) {
            *t = target_step(t, &self.cfg, &transition, rng);
        }

        self.state.bank.predict_all();
        let observed = self.sense_and_update();
        let reward = reward(&self.state.bank)?;
        let features = self.features(&observed)?;

        self.state.step += 1;
        self.state.done = self.state.step >= self.cfg.horizon;
        Ok(StepResult { features, reward, done: self.state.done, observed })
    }

    /// Snapshot of the current state for the episode trace.
    pub fn trace_record(&self, actions: &[usize], result: &StepResult) -> Result<TraceRecord> {
        let s = &self.state;
        Ok(TraceRecord {
            step: s.step,
            agents: s.agents.clone(),
            targets: s.targets.clone(),
            belief_means: s.bank.beliefs.iter().map(|b| [b.mean[0], b.mean[1], b.mean[2], b.mean[3]]).collect(),
            belief_logdets: s.bank.logdets()?,
            observed: result.observed.clone(),
            actions: actions.to_vec(),
            reward: result.reward,
        })
    }
}
