//! Time averages `(1/t)∫₀ᵗ φ(V(s)/a) ds` and their Gaussian limits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::engine::{init_state_stream, precompute_step_kernel, step_count, PathSample, Scheme, Simulator};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::kernel::{check_admissibility, l2_norm, SpectralMeasure, DEFAULT_ADMISSIBILITY_P};
use crate::partition::GeometricPartition;
use crate::quad::GaussHermite;

/// Number of log-spaced times at which running averages are kept.
pub const DEFAULT_CHECKPOINTS: usize = 32;

/// Test functions with known Gaussian expectations.
#[derive(Clone, Copy)]
pub enum Phi {
    Square,
    Abs,
    PositiveIndicator,
    Cos,
    /// `1{x > c}`
    Threshold(f64),
    /// User function; its target comes from Gauss-Hermite quadrature when
    /// that converges.
    Custom { name: &'static str, f: fn(f64) -> f64 },
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Phi::Square => x * x,
            Phi::Abs => x.abs(),
            Phi::PositiveIndicator => f64::from(u8::from(x > 0.0)),
            Phi::Cos => x.cos(),
            Phi::Threshold(c) => f64::from(u8::from(x > c)),
            Phi::Custom { f, .. } => f(x),
        }
    }
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Phi({self})")
    }
}

impl PartialEq for Phi {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Square => f.write_str("square"),
            Phi::Abs => f.write_str("abs"),
            Phi::PositiveIndicator => f.write_str("positive_indicator"),
            Phi::Cos => f.write_str("cos"),
            Phi::Threshold(c) => write!(f, "threshold:{c}"),
            Phi::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for Phi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "square" => Ok(Phi::Square),
            "abs" => Ok(Phi::Abs),
            "positive_indicator" | "indicator" => Ok(Phi::PositiveIndicator),
            "cos" => Ok(Phi::Cos),
            _ => {
                if let Some(c) = s.strip_prefix("threshold:").or_else(|| s.strip_prefix("threshold(").and_then(|r| r.strip_suffix(')'))) {
                    let c: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad threshold level in {s:?}")))?;
                    if !c.is_finite() {
                        return Err(Error::Parameter(format!("threshold level must be finite, got {c}")));
                    }
                    Ok(Phi::Threshold(c))
                } else {
                    Err(Error::Parameter(format!(
                        "unknown test function {s:?}; expected square, abs, positive_indicator, cos or threshold:C"
                    )))
                }
            }
        }
    }
}

/// `E[φ(N)]` for a standard normal `N`.
pub fn gaussian_expectation(phi: &Phi) -> Result<f64> {
    Ok(match *phi {
        Phi::Square => 1.0,
        Phi::Abs => (2.0 / std::f64::consts::PI).sqrt(),
        Phi::PositiveIndicator => 0.5,
        Phi::Cos => (-0.5f64).exp(),
        Phi::Threshold(c) => 0.5 * libm::erfc(c / std::f64::consts::SQRT_2),
        Phi::Custom { name, f } => {
            let a = GaussHermite::new(80).expectation(f);
            let b = GaussHermite::new(120).expectation(f);
            if (a - b).abs() > 1e-10 * b.abs().max(1.0) {
                return Err(Error::Numerical(format!(
                    "Gauss-Hermite estimate of E[{name}(N)] is not stable: {a} vs {b}"
                )));
            }
            b
        }
    })
}

/// Streaming trapezoidal average of `φ(v/a)` with snapshots at fixed times.
#[derive(Debug, Clone)]
struct RunningAverage {
    phi: Phi,
    inv_a: f64,
    t0: f64,
    last: Option<(f64, f64)>,
    integral: f64,
    checkpoints: Vec<f64>,
    next: usize,
    snapshots: Vec<f64>,
}

impl RunningAverage {
    fn new(phi: Phi, a: f64, t0: f64, checkpoints: Vec<f64>) -> Self {
        Self {
            phi,
            inv_a: 1.0 / a,
            t0,
            last: None,
            integral: 0.0,
            snapshots: Vec::with_capacity(checkpoints.len()),
            checkpoints,
            next: 0,
        }
    }

    fn push(&mut self, t: f64, v: f64) {
        let y = self.phi.eval(v * self.inv_a);
        if let Some((tp, yp)) = self.last {
            self.integral += 0.5 * (t - tp) * (y + yp);
        }
        self.last = Some((t, y));
        while self.next < self.checkpoints.len() && t >= self.checkpoints[self.next] {
            self.snapshots.push(self.current());
            self.next += 1;
        }
    }

    fn current(&self) -> f64 {
        match self.last {
            Some((t, _)) if t > self.t0 => self.integral / (t - self.t0),
            Some((_, y)) => y,
            None => f64::NAN,
        }
    }
}

/// `count` log-spaced times from `first` to `horizon`, the last one exact.
fn log_checkpoints(first: f64, horizon: f64, count: usize) -> Vec<f64> {
    if count <= 1 || first >= horizon {
        return vec![horizon];
    }
    let ratio = (horizon / first).ln() / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count - 1).map(|k| first * (ratio * k as f64).exp()).collect();
    out.push(horizon);
    out
}

/// Running averages of one or more replicas and their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicResult {
    pub horizon: f64,
    pub dt: f64,
    pub phi: String,
    /// Normalization `a` applied to `V` before `φ`.
    pub normalization: f64,
    pub checkpoints: Vec<f64>,
    /// `running_average[r][k]` for replica `r` at `checkpoints[k]`.
    pub running_average: Vec<Vec<f64>>,
    pub finals: Vec<f64>,
    pub estimate: f64,
    /// Sample standard deviation of the finals over `√replicas`; needs two replicas.
    pub stderr: Option<f64>,
    pub target: Option<f64>,
}

impl ErgodicResult {
    fn assemble(
        horizon: f64,
        dt: f64,
        phi: &Phi,
        normalization: f64,
        checkpoints: Vec<f64>,
        running_average: Vec<Vec<f64>>,
    ) -> Self {
        let finals: Vec<f64> = running_average
            .iter()
            .map(|r| *r.last().expect("at least one checkpoint"))
            .collect();
        let n = finals.len() as f64;
        let estimate = finals.iter().sum::<f64>() / n;
        let stderr = (finals.len() >= 2).then(|| {
            let var = finals.iter().map(|x| (x - estimate).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Self {
            horizon,
            dt,
            phi: phi.to_string(),
            normalization,
            checkpoints,
            running_average,
            finals,
            estimate,
            stderr,
            target: gaussian_expectation(phi).ok(),
        }
    }

    pub fn replicas(&self) -> usize {
        self.finals.len()
    }

    /// `(estimate - target) / stderr`.
    pub fn z_score(&self) -> Option<f64> {
        match (self.target, self.stderr) {
            (Some(target), Some(se)) if se > 0.0 => Some((self.estimate - target) / se),
            _ => None,
        }
    }

    /// Root-mean-square gap between the running averages and the target,
    /// per checkpoint.
    pub fn deviation(&self) -> Option<Vec<f64>> {
        let target = self.target?;
        let r = self.replicas() as f64;
        Some(
            (0..self.checkpoints.len())
                .map(|k| {
                    let ss: f64 = self.running_average.iter().map(|ra| (ra[k] - target).powi(2)).sum();
                    (ss / r).sqrt()
                })
                .collect(),
        )
    }

    /// One `t,running_average` block per replica, then the summary block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (r, ra) in self.running_average.iter().enumerate() {
            writeln!(out, "# replica={r}")?;
            writeln!(out, "t,running_average")?;
            for (t, v) in self.checkpoints.iter().zip(ra) {
                writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
            }
        }
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "NA".into());
        writeln!(out, "# summary phi={} a={}", self.phi, fmt_f64(self.normalization))?;
        writeln!(out, "estimate,stderr,target,z_score")?;
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(self.estimate),
            opt(self.stderr),
            opt(self.target),
            opt(self.z_score())
        )?;
        Ok(())
    }
}

/// Trapezoidal running average of `φ(V/a)` along a recorded path.
pub fn time_average(path: &PathSample, phi: &Phi, a: f64) -> Result<ErgodicResult> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("normalization must be positive and finite, got {a}")));
    }
    if path.len() < 2 {
        return Err(Error::Parameter("time average needs at least two path points".into()));
    }
    let t0 = path.times[0];
    let horizon = *path.times.last().expect("non-empty");
    let checkpoints = log_checkpoints(path.times[1], horizon, DEFAULT_CHECKPOINTS);
    let mut avg = RunningAverage::new(*phi, a, t0, checkpoints.clone());
    for (&t, &v) in path.times.iter().zip(&path.values) {
        avg.push(t, v);
    }
    let dt = path.times[1] - t0;
    Ok(ErgodicResult::assemble(horizon - t0, dt, phi, a, checkpoints, vec![avg.snapshots]))
}

/// Setup of an ergodic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicConfig {
    pub measure: SpectralMeasure,
    pub phi: Phi,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub y0: Option<Vec<f64>>,
    pub checkpoints: usize,
}

impl ErgodicConfig {
    pub fn new(measure: SpectralMeasure, phi: Phi, horizon: f64, dt: f64) -> Self {
        Self {
            measure,
            phi,
            horizon,
            dt,
            replicas: 8,
            seed: 0,
            scheme: Scheme::Exact,
            y0: None,
            checkpoints: DEFAULT_CHECKPOINTS,
        }
    }

    pub fn replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn y0(mut self, y0: Vec<f64>) -> Self {
        self.y0 = Some(y0);
        self
    }
}

/// Runs `replicas` independent paths of the OU bank representing an atomic
/// measure and averages `φ(V/a)` along each, with `a = ‖h‖₂`.
///
/// Replica `r` uses generator stream `r` of `seed`, so the result does not
/// depend on how replicas are scheduled.
pub fn ergodic_experiment(config: &ErgodicConfig) -> Result<ErgodicResult> {
    let a = match l2_norm(&config.measure) {
        Ok(a) => a,
        Err(Error::NotSquareIntegrable(_)) => {
            let report = check_admissibility(&config.measure, DEFAULT_ADMISSIBILITY_P)?;
            return Err(Error::NotSquareIntegrable(format!(
                "the kernel of {} is not in L2(0, ∞), so time averages have no Gaussian limit; {}",
                config.measure,
                report.explain()
            )));
        }
        Err(e) => return Err(e),
    };
    if config.replicas == 0 {
        return Err(Error::Parameter("at least one replica is required".into()));
    }
    if config.checkpoints == 0 {
        return Err(Error::Parameter("at least one checkpoint is required".into()));
    }
    let steps = step_count(config.horizon, config.dt)?;
    let partition = GeometricPartition::from_atoms(&config.measure)?;
    let kernel = match config.scheme {
        Scheme::Exact => Some(precompute_step_kernel(&partition, config.dt)?),
        Scheme::Euler => None,
    };
    let checkpoints = log_checkpoints(config.dt, config.horizon, config.checkpoints);

    let run = |replica: usize| -> Result<Vec<f64>> {
        let state = init_state_stream(&partition, config.y0.as_deref(), config.seed, replica as u64)?;
        let mut sim = match &kernel {
            Some(k) => Simulator::with_kernel(&partition, k.clone(), state)?,
            None => Simulator::new(&partition, config.scheme, config.dt, state)?,
        };
        let mut avg = RunningAverage::new(config.phi, a, 0.0, checkpoints.clone());
        avg.push(0.0, sim.output());
        for k in 1..=steps {
            sim.step();
            let t = if k == steps { config.horizon } else { k as f64 * config.dt };
            avg.push(t, sim.output());
        }
        Ok(avg.snapshots)
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..config.replicas).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Vec<f64>>> = (0..config.replicas).map(run).collect();

    let running = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ErgodicResult::assemble(config.horizon, config.dt, &config.phi, a, checkpoints, running))
}
