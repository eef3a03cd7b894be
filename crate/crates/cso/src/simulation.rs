//! The stochastic observation channel `Y(x) = y(x) + eps(x)` with Gaussian
//! noise, budget accounting, trajectory recording, and reproducible
//! key-derived random streams.
//!
//! Streams are keyed, not positioned: forking derives a child key by
//! hashing, so replications can run in any order on any number of workers
//! and still see identical draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::objectives::Objective;

/// Gaussian observation noise. Stored as a standard deviation; config
/// surfaces accept the variance `sigma^2` and convert once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn from_sigma2(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma^2 must be finite and >= 0, got {sigma2}")));
        }
        Ok(NoiseModel { sigma: sigma2.sqrt() })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `sigma = 0` means observations are exact.
    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }
}

/// A reproducible random stream identified by a 256-bit key.
///
/// Identical (master seed, fork path) always yields identical draws,
/// independent of execution order; draws within one stream are sequential.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_master_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"cso-master");
        h.update(seed.to_le_bytes());
        let key: [u8; 32] = h.finalize().into();
        RngStream { key, rng: ChaCha8Rng::from_seed(key) }
    }

    /// Child stream for a labeled coordinate (e.g. an experiment cell).
    pub fn fork_label(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"/");
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        RngStream { key, rng: ChaCha8Rng::from_seed(key) }
    }

    /// Child stream for a numeric coordinate (e.g. a replication id).
    pub fn fork(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"#");
        h.update(index.to_le_bytes());
        let key: [u8; 32] = h.finalize().into();
        RngStream { key, rng: ChaCha8Rng::from_seed(key) }
    }

    /// Standard normal draw.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Ordered record of simulated solutions and their observed values,
/// stored flat to avoid per-observation allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Trajectory { dim, xs: Vec::new(), ys: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Trajectory { dim, xs: Vec::with_capacity(dim * n), ys: Vec::with_capacity(n) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    /// The `t`-th simulated solution (0-based).
    pub fn point(&self, t: usize) -> &[f64] {
        &self.xs[t * self.dim..(t + 1) * self.dim]
    }

    /// The `t`-th observed value (0-based).
    pub fn value(&self, t: usize) -> f64 {
        self.ys[t]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.xs.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Whether `x` was visited, compared bit-for-bit.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.points().any(|p| p == x)
    }
}

/// The only channel by which optimizers see a problem: objective plus
/// Gaussian noise plus a hard observation budget.
#[derive(Debug)]
pub struct SimulationOracle<'a> {
    objective: &'a Objective,
    noise: NoiseModel,
    budget: usize,
    spent: usize,
    log: Trajectory,
}

impl<'a> SimulationOracle<'a> {
    pub fn new(objective: &'a Objective, noise: NoiseModel, budget: usize) -> Self {
        let dim = objective.dim();
        SimulationOracle {
            objective,
            noise,
            budget,
            spent: 0,
            log: Trajectory::with_capacity(dim, budget),
        }
    }

    pub fn objective(&self) -> &Objective {
        self.objective
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    /// `n - spent`.
    pub fn remaining(&self) -> usize {
        self.budget - self.spent
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// One noisy observation at `x`. Consumes one unit of budget and
    /// appends `(x, Y(x))` to the log.
    pub fn observe(&mut self, x: &[f64], rng: &mut RngStream) -> Result<f64> {
        if self.spent >= self.budget {
            return Err(Error::BudgetExhausted { budget: self.budget });
        }
        if x.len() != self.objective.dim() {
            return Err(Error::DimensionMismatch(x.len(), self.objective.dim()));
        }
        for &v in x {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfDomain(format!("coordinate {v} not in [0,1]")));
            }
        }
        let mean = self.objective.eval_slice(x);
        let value = if self.noise.is_deterministic() {
            mean
        } else {
            mean + self.noise.sigma() * rng.next_normal()
        };
        self.spent += 1;
        self.log.push(x, value);
        Ok(value)
    }

    pub fn log(&self) -> &Trajectory {
        &self.log
    }

    pub fn into_log(self) -> Trajectory {
        self.log
    }
}

/// Convenience: observe at a [`Point`].
pub fn observe_point(oracle: &mut SimulationOracle, x: &Point, rng: &mut RngStream) -> Result<f64> {
    oracle.observe(x.coords(), rng)
}
