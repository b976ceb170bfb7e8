//! The streaming Markov simulator.
//!
//! The state is the vector of OU values `Y^{η_i}(t)`, all driven by one
//! Brownian motion. Two updates are available:
//!
//! - exact: `y_i' = e^{-η_i Δt} y_i + ξ_i`, where `ξ` is drawn from the joint
//!   law of the shared-noise increments,
//!   `Cov(ξ_i, ξ_j) = (1 - e^{-(η_i+η_j)Δt})/(η_i+η_j)`;
//! - Euler: `y_i' = y_i + ΔB - η_i y_i Δt` with one `ΔB ~ N(0, Δt)` for all nodes.
//!
//! The output is `V^π(t) = Σ c_i y_i(t)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, LowerFactor};
use crate::partition::GeometricPartition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Exact,
    Euler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Euler => "euler",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Self::Exact),
            "euler" => Ok(Self::Euler),
            other => Err(Error::Parse(format!("unknown scheme '{other}' (exact|euler)"))),
        }
    }
}

/// Current time, OU values and generator: the whole memory of a simulation.
#[derive(Debug, Clone)]
pub struct MarkovState {
    t: f64,
    y: Vec<f64>,
    rng: ChaCha8Rng,
}

impl MarkovState {
    /// State at `t = 0` with values `y0`, generator seeded by `(seed, stream)`.
    pub fn new(y0: Vec<f64>, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { t: 0.0, y: y0, rng }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of stored OU values and bytes of generator state.
    pub fn footprint(&self) -> (usize, usize) {
        (self.y.capacity(), std::mem::size_of::<ChaCha8Rng>())
    }

    fn fill_normals(&mut self, z: &mut [f64]) {
        for v in z {
            *v = self.rng.sample(StandardNormal);
        }
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// `y0 = None` starts from the zero vector, i.e. `V(0) = 0`.
pub fn init_state(
    partition: &GeometricPartition,
    y0: Option<&[f64]>,
    seed: u64,
) -> Result<MarkovState> {
    init_state_stream(partition, y0, seed, 0)
}

pub fn init_state_stream(
    partition: &GeometricPartition,
    y0: Option<&[f64]>,
    seed: u64,
    stream: u64,
) -> Result<MarkovState> {
    let n = partition.len();
    let y = match y0 {
        None => vec![0.0; n],
        Some(v) if v.len() == n => v.to_vec(),
        Some(v) => return Err(Error::Dimension { expected: n, got: v.len() }),
    };
    Ok(MarkovState::new(y, seed, stream))
}

/// Per-`Δt` decay factors and the Cholesky factor of the increment covariance.
#[derive(Debug, Clone)]
pub struct StepKernel {
    dt: f64,
    decay: Vec<f64>,
    noise: LowerFactor,
}

impl StepKernel {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn noise_factor(&self) -> &LowerFactor {
        &self.noise
    }

    pub fn len(&self) -> usize {
        self.decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay.is_empty()
    }
}

/// `(1 - e^{-(x+y)t})/(x+y)`, the covariance of two OU processes started at
/// zero, with the `x + y → 0` limit `t`.
pub fn ou_covariance(x: f64, y: f64, t: f64) -> f64 {
    let s = x + y;
    if s * t < 1e-300 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

pub fn precompute_step_kernel(partition: &GeometricPartition, dt: f64) -> Result<StepKernel> {
    step_kernel_for_nodes(partition.nodes(), dt)
}

pub fn step_kernel_for_nodes(nodes: &[f64], dt: f64) -> Result<StepKernel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let n = nodes.len();
    let decay: Vec<f64> = nodes.iter().map(|&eta| (-eta * dt).exp()).collect();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let c = ou_covariance(nodes[i], nodes[j], dt);
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }
    let noise = cholesky_with_jitter(&cov, n)?;
    Ok(StepKernel { dt, decay, noise })
}

/// One exact step with externally supplied standard normals `z`.
pub fn step_exact_with_noise(state: &mut MarkovState, kernel: &StepKernel, z: &[f64]) {
    let l = &kernel.noise;
    for (i, (y, d)) in state.y.iter_mut().zip(&kernel.decay).enumerate() {
        let xi: f64 = (0..=i).map(|j| l.get(i, j) * z[j]).sum();
        *y = d * *y + xi;
    }
    state.t += kernel.dt;
}

/// One exact step; draws the normals from the state's generator.
pub fn step_exact(state: &mut MarkovState, kernel: &StepKernel) -> Result<()> {
    if state.len() != kernel.len() {
        return Err(Error::Dimension { expected: kernel.len(), got: state.len() });
    }
    let mut z = vec![0.0; kernel.len()];
    state.fill_normals(&mut z);
    step_exact_with_noise(state, kernel, &z);
    Ok(())
}

fn euler_guard(nodes: &[f64], dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let product = nodes.iter().fold(0.0f64, |m, &eta| m.max(eta)) * dt;
    if product >= 1.0 {
        return Err(Error::Stability { product });
    }
    Ok(())
}

/// One Euler step with a given Brownian increment `db`.
pub fn step_euler_with_increment(
    state: &mut MarkovState,
    nodes: &[f64],
    dt: f64,
    db: f64,
) -> Result<()> {
    euler_guard(nodes, dt)?;
    if state.len() != nodes.len() {
        return Err(Error::Dimension { expected: nodes.len(), got: state.len() });
    }
    euler_update(state, nodes, dt, db);
    Ok(())
}

fn euler_update(state: &mut MarkovState, nodes: &[f64], dt: f64, db: f64) {
    for (y, &eta) in state.y.iter_mut().zip(nodes) {
        *y += db - eta * *y * dt;
    }
    state.t += dt;
}

/// One Euler step; `ΔB = √Δt · z` with `z` from the state's generator.
pub fn step_euler(state: &mut MarkovState, nodes: &[f64], dt: f64) -> Result<()> {
    let db = dt.sqrt() * state.normal();
    step_euler_with_increment(state, nodes, dt, db)
}

/// `V^π = Σ c_i y_i`.
pub fn read_output(state: &MarkovState, partition: &GeometricPartition) -> f64 {
    dot(partition.weights(), &state.y)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Owns a state and advances it with a fixed scheme and step.
#[derive(Debug)]
pub struct Simulator<'a> {
    partition: &'a GeometricPartition,
    scheme: Scheme,
    dt: f64,
    kernel: Option<StepKernel>,
    state: MarkovState,
    noise: Vec<f64>,
    steps: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        partition: &'a GeometricPartition,
        scheme: Scheme,
        dt: f64,
        state: MarkovState,
    ) -> Result<Self> {
        if state.len() != partition.len() {
            return Err(Error::Dimension { expected: partition.len(), got: state.len() });
        }
        let kernel = match scheme {
            Scheme::Exact => Some(precompute_step_kernel(partition, dt)?),
            Scheme::Euler => {
                euler_guard(partition.nodes(), dt)?;
                None
            }
        };
        Ok(Self::assemble(partition, scheme, dt, kernel, state))
    }

    /// Reuses a kernel built for the same partition and `dt`.
    pub fn with_kernel(
        partition: &'a GeometricPartition,
        kernel: StepKernel,
        state: MarkovState,
    ) -> Result<Self> {
        if state.len() != partition.len() || kernel.len() != partition.len() {
            return Err(Error::Dimension { expected: partition.len(), got: state.len() });
        }
        let dt = kernel.dt;
        Ok(Self::assemble(partition, Scheme::Exact, dt, Some(kernel), state))
    }

    fn assemble(
        partition: &'a GeometricPartition,
        scheme: Scheme,
        dt: f64,
        kernel: Option<StepKernel>,
        state: MarkovState,
    ) -> Self {
        let noise = match scheme {
            Scheme::Exact => vec![0.0; partition.len()],
            Scheme::Euler => Vec::new(),
        };
        Self { partition, scheme, dt, kernel, state, noise, steps: 0 }
    }

    pub fn step(&mut self) {
        match &self.kernel {
            Some(kernel) => {
                self.state.fill_normals(&mut self.noise);
                step_exact_with_noise(&mut self.state, kernel, &self.noise);
            }
            None => {
                let db = self.dt.sqrt() * self.state.normal();
                euler_update(&mut self.state, self.partition.nodes(), self.dt, db);
            }
        }
        self.steps += 1;
    }

    pub fn output(&self) -> f64 {
        read_output(&self.state, self.partition)
    }

    /// Steps taken since construction.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn state(&self) -> &MarkovState {
        &self.state
    }

    pub fn into_state(self) -> MarkovState {
        self.state
    }
}

/// Number of `dt` steps covering `[0, horizon]`; `dt` must divide the horizon.
pub fn step_count(horizon: f64, dt: f64) -> Result<u64> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be >= 0, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::Parameter(format!("dt = {dt} does not divide T = {horizon}")));
    }
    Ok(n as u64)
}

/// Ratio `spacing / dt`, required to be a positive integer.
pub fn output_every(spacing: f64, dt: f64) -> Result<usize> {
    let k = (spacing / dt).round();
    if !(k >= 1.0) || (k * dt - spacing).abs() > 1e-9 * spacing {
        return Err(Error::Parameter(format!(
            "dt = {dt} does not divide the output spacing {spacing}"
        )));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Generator stream, distinguishing replicas sharing a seed.
    pub stream: u64,
    /// Record every k-th step.
    pub output_every: usize,
    pub y0: Option<Vec<f64>>,
}

impl PathConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            scheme: Scheme::Exact,
            seed: 0,
            stream: 0,
            output_every: 1,
            y0: None,
        }
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn output_every(mut self, every: usize) -> Self {
        self.output_every = every;
        self
    }

    pub fn y0(mut self, y0: Vec<f64>) -> Self {
        self.y0 = Some(y0);
        self
    }
}

/// Times and values of `V^π` on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    /// Size of the OU bank that produced the path.
    pub nodes: usize,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Streams `[0, T]` and records `V^π` every `output_every` steps, always
/// including `t = 0` and `t = T`.
pub fn simulate_path(partition: &GeometricPartition, config: &PathConfig) -> Result<PathSample> {
    let steps = step_count(config.horizon, config.dt)?;
    if config.output_every == 0 {
        return Err(Error::Parameter("output_every must be at least 1".into()));
    }
    let state = init_state_stream(partition, config.y0.as_deref(), config.seed, config.stream)?;
    let mut sim = Simulator::new(partition, config.scheme, config.dt, state)?;
    let every = config.output_every as u64;
    let capacity = (steps / every + 2) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut values = Vec::with_capacity(capacity);
    times.push(0.0);
    values.push(sim.output());
    for k in 1..=steps {
        sim.step();
        if k % every == 0 || k == steps {
            times.push(k as f64 * config.dt);
            values.push(sim.output());
        }
    }
    Ok(PathSample {
        times,
        values,
        scheme: config.scheme,
        seed: config.seed,
        nodes: partition.len(),
    })
}
