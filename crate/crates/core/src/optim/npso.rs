//! Particle swarm over network weights.
//!
//! ```text
//! V(i,k)     = w V(i,k-1) + c1 U1 (theta_l(i) - theta(i,k-1)) + c2 U2 (theta_g - theta(i,k-1))
//! theta(i,k) = theta(i,k-1) + V(i,k)
//! ```
//!
//! `U1`, `U2` are one uniform scalar each per particle and iteration,
//! broadcast over all coordinates (optionally one draw per coordinate).
//! Local and global bests change only on strict improvement. The swarm starts
//! with zero velocities, zero local/global bests at infinite loss, and
//! Gaussian positions. There is no velocity clamping.

use serde::{Deserialize, Serialize};

use super::{initialize_population, InitMethod, PopulationMethod};
use crate::base::{uniform_samples, ParameterVector, Purpose, RngStream, Scorer};
use crate::error::{Error, Result};

pub const DEFAULT_ACCELERATION: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpsoConfig {
    pub inertia: f64,
    pub init_std: f64,
    #[serde(default = "default_acceleration")]
    pub cognitive: f64,
    #[serde(default = "default_acceleration")]
    pub social: f64,
    pub population: usize,
    pub max_iterations: usize,
    /// Draw `U1`, `U2` per coordinate instead of per particle.
    #[serde(default)]
    pub per_coordinate: bool,
}

fn default_acceleration() -> f64 {
    DEFAULT_ACCELERATION
}

impl NpsoConfig {
    pub fn new(inertia: f64, init_std: f64, population: usize, max_iterations: usize) -> Self {
        Self {
            inertia,
            init_std,
            cognitive: DEFAULT_ACCELERATION,
            social: DEFAULT_ACCELERATION,
            population,
            max_iterations,
            per_coordinate: false,
        }
    }

    /// Whether the acceleration constants differ from `c1 = c2 = 2`.
    pub fn overrides_accelerations(&self) -> bool {
        self.cognitive != DEFAULT_ACCELERATION || self.social != DEFAULT_ACCELERATION
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.init_std > 0.0) || !self.inertia.is_finite() {
            return Err(Error::config("swarm needs a finite inertia and init std > 0"));
        }
        if self.population == 0 || self.max_iterations == 0 {
            return Err(Error::config("swarm needs population and iterations >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: ParameterVector,
    pub velocity: Vec<f64>,
    pub local_best: ParameterVector,
    pub local_best_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: ParameterVector,
    pub global_best_loss: f64,
}

impl SwarmState {
    pub fn initialize(cfg: &NpsoConfig, dim: usize, seed: u64) -> Self {
        let positions = initialize_population(InitMethod::Gaussian(cfg.init_std), cfg.population, dim, seed);
        Self {
            particles: positions
                .into_iter()
                .map(|position| Particle {
                    position,
                    velocity: vec![0.0; dim],
                    local_best: ParameterVector::zeros(dim),
                    local_best_loss: f64::INFINITY,
                })
                .collect(),
            global_best: ParameterVector::zeros(dim),
            global_best_loss: f64::INFINITY,
        }
    }
}

/// Velocity rule for one particle. `u1` / `u2` hold either one scalar
/// (broadcast) or one value per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn velocity_update(
    velocity: &[f64],
    position: &[f64],
    local_best: &[f64],
    global_best: &[f64],
    inertia: f64,
    cognitive: f64,
    social: f64,
    u1: &[f64],
    u2: &[f64],
) -> Vec<f64> {
    let pick = |u: &[f64], j: usize| if u.len() == 1 { u[0] } else { u[j] };
    (0..velocity.len())
        .map(|j| {
            inertia * velocity[j]
                + cognitive * pick(u1, j) * (local_best[j] - position[j])
                + social * pick(u2, j) * (global_best[j] - position[j])
        })
        .collect()
}

fn uniforms(seed: u64, i: usize, k: u64, purpose: Purpose, n: usize) -> Vec<f64> {
    uniform_samples(RngStream::new(seed, i as u64, k, purpose), n)
}

/// One swarm iteration. Moves every particle with the previous iteration's
/// bests, scores all of them (exactly `population` passes), then updates
/// local and global bests in particle order.
pub fn npso_step(state: &SwarmState, k: u64, cfg: &NpsoConfig, scorer: &Scorer<'_>, seed: u64) -> Result<(SwarmState, Vec<f64>)> {
    cfg.validate()?;
    let dim = state.global_best.len();
    if dim != scorer.dim() || state.particles.len() != cfg.population {
        return Err(Error::DimensionMismatch {
            expected: scorer.dim(),
            got: dim,
        });
    }
    let draws = if cfg.per_coordinate { dim } else { 1 };
    let mut next = state.clone();
    for (i, p) in next.particles.iter_mut().enumerate() {
        let u1 = uniforms(seed, i, k, Purpose::SwarmCognitive, draws);
        let u2 = uniforms(seed, i, k, Purpose::SwarmSocial, draws);
        p.velocity = velocity_update(
            &p.velocity,
            &p.position,
            &p.local_best,
            &state.global_best,
            cfg.inertia,
            cfg.cognitive,
            cfg.social,
            &u1,
            &u2,
        );
        for (x, v) in p.position.iter_mut().zip(&p.velocity) {
            *x += v;
        }
    }
    let positions: Vec<ParameterVector> = next.particles.iter().map(|p| p.position.clone()).collect();
    let losses = scorer.score_all(&positions)?;
    for (p, &loss) in next.particles.iter_mut().zip(&losses) {
        if loss < p.local_best_loss {
            p.local_best = p.position.clone();
            p.local_best_loss = loss;
            if p.local_best_loss < next.global_best_loss {
                next.global_best = p.local_best.clone();
                next.global_best_loss = p.local_best_loss;
            }
        }
    }
    Ok((next, losses))
}

pub struct SwarmOptimizer {
    pub cfg: NpsoConfig,
}

impl SwarmOptimizer {
    pub fn new(cfg: NpsoConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.overrides_accelerations() {
            log::warn!(
                "swarm accelerations overridden to c1 = {}, c2 = {} (defaults are 2, 2)",
                cfg.cognitive,
                cfg.social
            );
        }
        Ok(Self { cfg })
    }
}

impl PopulationMethod for SwarmOptimizer {
    type State = SwarmState;

    fn iterations(&self) -> usize {
        self.cfg.max_iterations
    }

    fn population(&self) -> usize {
        self.cfg.population
    }

    fn initialize(&self, dim: usize, seed: u64) -> SwarmState {
        SwarmState::initialize(&self.cfg, dim, seed)
    }

    fn step(&self, state: &SwarmState, k: u64, scorer: &Scorer<'_>, seed: u64) -> Result<(SwarmState, Vec<f64>)> {
        npso_step(state, k, &self.cfg, scorer, seed)
    }

    fn best(&self, state: &SwarmState) -> ParameterVector {
        state.global_best.clone()
    }

    fn best_loss(&self, state: &SwarmState) -> Option<f64> {
        Some(state.global_best_loss)
    }
}
