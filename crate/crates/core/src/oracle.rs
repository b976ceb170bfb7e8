//! Reference covariances, the certified L2 error and the Cholesky sampler.
//!
//! Everything here is deterministic: the error of a partition is computed
//! from `E[(V - V^π)²] = E[V²] - 2 E[V V^π] + E[(V^π)²]` using closed forms
//! and quadrature, never by simulation.

use std::io::Write;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::ou_covariance;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::kernel::{HurstKernelParams, SpectralMeasure};
use crate::linalg::{cholesky_with_jitter, LowerFactor};
use crate::partition::{GeometricPartition, NodeRule};
use crate::quad::GaussLegendre;
use crate::special::{gamma_p, recip_gamma};

/// Squared errors more negative than this are reported, not clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// `E[W_s W_t] = (s^{2H} + t^{2H} - |t-s|^{2H})/2` (unit normalization).
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Parameter(format!("Hurst exponent must lie in (0, 1), got {hurst}")));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("times must be >= 0, got ({s}, {t})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2)))
}

/// `E[V(t)²] = t^{2α-1} / ((2α-1) Γ(α)²)`.
pub fn memory_variance(params: &HurstKernelParams, t: f64) -> f64 {
    let a = params.alpha();
    let g = recip_gamma(a);
    t.powf(2.0 * a - 1.0) / (2.0 * a - 1.0) * g * g
}

/// `E[V(s)V(t)] = ∫₀^{s∧t} h(t-u) h(s-u) du` for the power kernel.
///
/// With `d = |t-s|` and `v = (s∧t) - u` the integrand is
/// `v^{α-1} (d+v)^{α-1} / Γ(α)²`. It is integrated on dyadic panels
/// `[m/2^{k+1}, m/2^k]` shrinking toward the singularity at 0, each with
/// Gauss-Legendre, until the remaining piece `[0, δ]` can be taken from its
/// leading-order expansion (exact when `d = 0`).
pub fn memory_covariance_exact(params: &HurstKernelParams, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite()) {
        return Err(Error::Domain(format!("times must be finite and >= 0, got ({s}, {t})")));
    }
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    let a = params.alpha();
    let d = hi - lo;
    let integrand = |v: f64| (v.ln() * (a - 1.0) + (d + v).ln() * (a - 1.0)).exp();

    let fine = GaussLegendre::new(16);
    let coarse = GaussLegendre::new(10);
    let (mut sum_fine, mut sum_coarse) = (0.0, 0.0);
    let mut upper = lo;
    const MAX_PANELS: usize = 2000;
    for _ in 0..MAX_PANELS {
        let delta = 0.5 * upper;
        sum_fine += fine.integrate(integrand, delta, upper);
        sum_coarse += coarse.integrate(integrand, delta, upper);
        upper = delta;
        if let Some(tail) = singular_tail(a, d, upper) {
            let total = sum_fine + tail;
            let g = recip_gamma(a);
            if (sum_fine - sum_coarse).abs() > 1e-9 * total.abs() {
                return Err(Error::Numerical(format!(
                    "memory covariance quadrature did not converge at (s={s}, t={t}): \
                     16-point {sum_fine} vs 10-point {sum_coarse}"
                )));
            }
            return Ok(total * g * g);
        }
    }
    Err(Error::Numerical(format!(
        "memory covariance quadrature needed more than {MAX_PANELS} panels at (s={s}, t={t})"
    )))
}

/// `∫₀^δ v^{α-1}(d+v)^{α-1} dv` once `δ` is negligible against `d` (or `d = 0`).
fn singular_tail(a: f64, d: f64, delta: f64) -> Option<f64> {
    if d == 0.0 {
        Some(delta.powf(2.0 * a - 1.0) / (2.0 * a - 1.0))
    } else if delta <= 1e-7 * d {
        let x = delta / d;
        Some(d.powf(a - 1.0) * delta.powf(a) / a * (1.0 + (a - 1.0) * a / (a + 1.0) * x))
    } else {
        None
    }
}

/// `E[V^π(s) V^π(t)] = Σ_ij c_i c_j e^{-η_i (t-s)} (1 - e^{-(η_i+η_j)s})/(η_i+η_j)`,
/// `s ≤ t` (arguments are ordered internally).
pub fn approx_covariance_closed_form(partition: &GeometricPartition, s: f64, t: f64) -> f64 {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo <= 0.0 {
        return 0.0;
    }
    let nodes = partition.nodes();
    let weights = partition.weights();
    let mut sum = 0.0;
    for (&xi, &ci) in nodes.iter().zip(weights) {
        let lag = (-xi * (hi - lo)).exp();
        let inner: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(&xj, &cj)| cj * ou_covariance(xi, xj, lo))
            .sum();
        sum += ci * lag * inner;
    }
    sum
}

/// `E[V(t) V^π(t)] = Σ c_i ∫₀ᵗ h(v) e^{-η_i v} dv = Σ c_i P(α, η_i t) η_i^{-α}`.
pub fn cross_covariance_exact(
    params: &HurstKernelParams,
    partition: &GeometricPartition,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = params.alpha();
    partition
        .nodes()
        .iter()
        .zip(partition.weights())
        .map(|(&eta, &c)| Ok(c * gamma_p(a, eta * t)? * eta.powf(-a)))
        .sum()
}

/// Exact covariance terms of the reference process at one time.
fn reference_terms(
    measure: &SpectralMeasure,
    partition: &GeometricPartition,
    t: f64,
) -> Result<(f64, f64)> {
    match measure {
        SpectralMeasure::PowerLaw { alpha } => {
            let params = HurstKernelParams::from_alpha(*alpha)?;
            Ok((memory_variance(&params, t), cross_covariance_exact(&params, partition, t)?))
        }
        SpectralMeasure::Atomic(atoms) => {
            let mut exact = 0.0;
            for a in atoms {
                for b in atoms {
                    exact += a.mass * b.mass * ou_covariance(a.location, b.location, t);
                }
            }
            let mut cross = 0.0;
            for (&eta, &c) in partition.nodes().iter().zip(partition.weights()) {
                for a in atoms {
                    cross += c * a.mass * ou_covariance(eta, a.location, t);
                }
            }
            Ok((exact, cross))
        }
    }
}

/// `E[V(t)²]` for any supported reference measure.
pub fn reference_variance(measure: &SpectralMeasure, t: f64) -> Result<f64> {
    match measure {
        SpectralMeasure::PowerLaw { alpha } => {
            Ok(memory_variance(&HurstKernelParams::from_alpha(*alpha)?, t))
        }
        SpectralMeasure::Atomic(_) => {
            let exact = GeometricPartition::from_atoms(measure)?;
            Ok(approx_covariance_closed_form(&exact, t, t))
        }
    }
}

/// `‖V(t) - V^π(t)‖²_{L²}` before taking the root; small negative rounding
/// residue is clamped to zero.
pub fn l2_error_squared(
    measure: &SpectralMeasure,
    partition: &GeometricPartition,
    t: f64,
) -> Result<f64> {
    let raw = l2_error_squared_raw(measure, partition, t)?;
    if raw < -NEGATIVE_CLAMP {
        return Err(Error::Numerical(format!(
            "squared L2 error {raw:e} at t={t} is negative beyond rounding"
        )));
    }
    Ok(raw.max(0.0))
}

/// Squared error without clamping.
pub fn l2_error_squared_raw(
    measure: &SpectralMeasure,
    partition: &GeometricPartition,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("grid times must be positive, got {t}")));
    }
    let (exact, cross) = reference_terms(measure, partition, t)?;
    Ok(exact - 2.0 * cross + approx_covariance_closed_form(partition, t, t))
}

/// `points` equally spaced times `kT/points`, `k = 1..=points`.
pub fn default_grid(horizon: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| horizon * k as f64 / points as f64).collect()
}

/// Per-time L2 errors of a partition and their supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub eps_target: Option<f64>,
    pub nodes: usize,
    pub ratio: Option<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub node_rule: NodeRule,
    pub grid: Vec<f64>,
    pub l2_error: Vec<f64>,
    pub sup_l2_error: f64,
    /// `√E[V(T)²]` at the last grid time.
    pub scale: f64,
    pub runtime: Option<Duration>,
}

impl ErrorReport {
    /// Sup error divided by the standard deviation of `V` at the horizon.
    pub fn relative_sup_error(&self) -> f64 {
        self.sup_l2_error / self.scale
    }

    /// `t,l2_error` rows followed by `#`-prefixed summary lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,l2_error")?;
        for (t, e) in self.grid.iter().zip(&self.l2_error) {
            writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*e))?;
        }
        if let Some(eps) = self.eps_target {
            writeln!(out, "# eps_target={eps}")?;
        }
        writeln!(out, "# nodes={}", self.nodes)?;
        if let Some(r) = self.ratio {
            writeln!(out, "# ratio={}", fmt_f64(r))?;
        }
        writeln!(out, "# x_min={}", fmt_f64(self.x_min))?;
        writeln!(out, "# x_max={}", fmt_f64(self.x_max))?;
        writeln!(out, "# node_rule={}", self.node_rule)?;
        writeln!(out, "# sup_l2_error={}", fmt_f64(self.sup_l2_error))?;
        writeln!(out, "# scale={}", fmt_f64(self.scale))?;
        writeln!(out, "# relative_sup_error={}", fmt_f64(self.relative_sup_error()))?;
        if let Some(rt) = self.runtime {
            writeln!(out, "# runtime_s={}", rt.as_secs_f64())?;
        }
        Ok(())
    }
}

/// Certified `sup_{t ∈ grid} ‖V(t) - V^π(t)‖_{L²}`.
pub fn sup_l2_error(
    measure: &SpectralMeasure,
    partition: &GeometricPartition,
    grid: &[f64],
) -> Result<ErrorReport> {
    let last = *grid
        .last()
        .ok_or_else(|| Error::Parameter("error grid is empty".into()))?;
    let l2_error = grid
        .iter()
        .map(|&t| l2_error_squared(measure, partition, t).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let sup = l2_error.iter().copied().fold(0.0, f64::max);
    Ok(ErrorReport {
        eps_target: None,
        nodes: partition.len(),
        ratio: partition.ratio(),
        x_min: partition.x_min(),
        x_max: partition.x_max(),
        node_rule: partition.node_rule(),
        grid: grid.to_vec(),
        l2_error,
        sup_l2_error: sup,
        scale: reference_variance(measure, last)?.sqrt(),
        runtime: None,
    })
}

/// Best partition found with a fixed number of cells.
#[derive(Debug, Clone)]
pub struct TunedPartition {
    pub partition: GeometricPartition,
    pub report: ErrorReport,
}

impl TunedPartition {
    /// The `c_α` that gives this ratio at precision `eps`.
    pub fn equivalent_c_alpha(&self, eps: f64) -> Option<f64> {
        self.partition.ratio().map(|r| (r - 1.0) / eps.sqrt())
    }
}

/// Searches the compact endpoints (hence the ratio, hence `c_α`) and the
/// node rule for the `cells`-node geometric partition with the smallest
/// relative sup error on `(0, horizon]`.
///
/// The squared error `∫₀ᵗ (h - h^π)²` is nondecreasing in `t`, so the search
/// scores candidates at the horizon and the final report covers the grid.
pub fn tune_partition(
    alpha: f64,
    cells: usize,
    horizon: f64,
    grid_points: usize,
) -> Result<TunedPartition> {
    let measure = SpectralMeasure::power_law(alpha)?;
    if cells == 0 {
        return Err(Error::Parameter("target node count must be positive".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let scale = reference_variance(&measure, horizon)?.sqrt();
    let score = |lmin: f64, lmax: f64, rule: NodeRule| -> f64 {
        if lmax <= lmin {
            return f64::INFINITY;
        }
        GeometricPartition::with_count(alpha, lmin.exp(), lmax.exp(), cells, rule)
            .and_then(|p| l2_error_squared(&measure, &p, horizon))
            .map(|e2| e2.sqrt() / scale)
            .unwrap_or(f64::INFINITY)
    };

    let mut best: Option<(f64, f64, f64, NodeRule)> = None;
    for rule in NodeRule::GEOMETRIC {
        let mut local = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=24 {
            for j in 0..=24 {
                let (lmin, lmax) = (-48.0 + 2.0 * i as f64, 2.0 * j as f64);
                let e = score(lmin, lmax, rule);
                if e < local.0 {
                    local = (e, lmin, lmax);
                }
            }
        }
        // Compass search from the best grid point.
        let (mut e, mut lmin, mut lmax) = local;
        let mut step = 1.0;
        while step > 1e-4 {
            let mut moved = false;
            for (dmin, dmax) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let cand = score(lmin + dmin, lmax + dmax, rule);
                if cand < e {
                    e = cand;
                    lmin += dmin;
                    lmax += dmax;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        log::debug!("tuning {rule}: relative error {e:e} on [{}, {}]", lmin.exp(), lmax.exp());
        if best.is_none_or(|b| e < b.0) {
            best = Some((e, lmin, lmax, rule));
        }
    }
    let (_, lmin, lmax, rule) = best.expect("at least one node rule");
    let partition = GeometricPartition::with_count(alpha, lmin.exp(), lmax.exp(), cells, rule)?;
    let report = sup_l2_error(&measure, &partition, &default_grid(horizon, grid_points))?;
    Ok(TunedPartition { partition, report })
}

/// Which process a covariance grid describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceSource {
    FbmExact,
    MemoryExact,
    ApproxClosed,
}

/// Symmetric covariance matrix on a time grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    pub times: Vec<f64>,
    pub matrix: Vec<f64>,
    pub source: CovarianceSource,
}

impl CovarianceGrid {
    fn build<F: FnMut(f64, f64) -> Result<f64>>(
        times: &[f64],
        source: CovarianceSource,
        mut cov: F,
    ) -> Result<Self> {
        let n = times.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let c = cov(times[i], times[j])?;
                matrix[i * n + j] = c;
                matrix[j * n + i] = c;
            }
        }
        Ok(Self { times: times.to_vec(), matrix, source })
    }

    pub fn fbm_exact(hurst: f64, times: &[f64]) -> Result<Self> {
        Self::build(times, CovarianceSource::FbmExact, |s, t| fbm_covariance(hurst, s, t))
    }

    pub fn memory_exact(params: &HurstKernelParams, times: &[f64]) -> Result<Self> {
        Self::build(times, CovarianceSource::MemoryExact, |s, t| {
            memory_covariance_exact(params, s, t)
        })
    }

    pub fn approx_closed(partition: &GeometricPartition, times: &[f64]) -> Result<Self> {
        Self::build(times, CovarianceSource::ApproxClosed, |s, t| {
            Ok(approx_covariance_closed_form(partition, s, t))
        })
    }

    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }

    /// Factorizes the matrix; fails if it is not positive semi-definite.
    pub fn factor(&self) -> Result<LowerFactor> {
        cholesky_with_jitter(&self.matrix, self.dim())
    }

    /// Square CSV matrix preceded by a header row of times.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = self.times.iter().map(|t| fmt_f64(*t)).collect();
        writeln!(out, "{}", header.join(","))?;
        let n = self.dim();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| fmt_f64(self.get(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Exact Gaussian sampler on a grid: `L z` with `L Lᵀ = Σ`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    factor: LowerFactor,
}

impl CholeskySampler {
    pub fn new(cov: &CovarianceGrid) -> Result<Self> {
        Ok(Self { factor: cov.factor()? })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.factor.dim();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; n];
        self.factor.mul_into(&z, &mut out);
        out
    }
}

pub fn cholesky_gaussian_vector(cov: &CovarianceGrid, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(CholeskySampler::new(cov)?.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{build_geometric_partition, PartitionBuilder};

    fn params(alpha: f64) -> HurstKernelParams {
        HurstKernelParams::from_alpha(alpha).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn fbm_covariance_examples() {
        assert!((fbm_covariance(0.5, 1.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(0.3, 2.0, 2.0).unwrap() - 2f64.powf(0.6)).abs() < 1e-15);
        assert!((fbm_covariance(0.3, 2.0, 2.0).unwrap() - 1.515_717).abs() < 1e-6);
        assert!((fbm_covariance(0.3, 1.0, 2.0).unwrap() - 0.757_858).abs() < 1e-6);
        assert!(fbm_covariance(1.0, 1.0, 2.0).is_err());
        assert!(fbm_covariance(0.3, -1.0, 2.0).is_err());
    }

    #[test]
    fn memory_covariance_diagonal_matches_closed_form() {
        for &a in &[0.6, 0.75, 0.9] {
            for &t in &[0.1, 1.0, 10.0] {
                let q = memory_covariance_exact(&params(a), t, t).unwrap();
                assert!(rel(q, memory_variance(&params(a), t)) < 1e-8, "a={a} t={t}");
            }
        }
        assert!((memory_variance(&params(0.75), 1.0) - 1.331_87).abs() < 1e-5);
    }

    #[test]
    fn memory_covariance_off_diagonal_reference_values() {
        // mpmath tanh-sinh quadrature, cross-checked against the 2F1 closed form.
        let cases = [
            (0.75, 0.5, 1.0, 0.578_229_309_982_714_3),
            (0.6, 1.0, 2.0, 0.670_256_896_128_717_2),
            (0.9, 0.3, 0.31, 0.409_160_495_992_496_4),
            (0.75, 2.0, 10.0, 0.866_215_155_479_881_7),
            (0.55, 1e-3, 1.0, 0.015_588_845_238_498_804),
        ];
        for (a, s, t, expected) in cases {
            let v = memory_covariance_exact(&params(a), s, t).unwrap();
            assert!(rel(v, expected) < 1e-8, "a={a} s={s} t={t}: {v}");
            assert_eq!(v, memory_covariance_exact(&params(a), t, s).unwrap());
        }
    }

    #[test]
    fn memory_covariance_edge_cases() {
        assert_eq!(memory_covariance_exact(&params(0.75), 0.0, 3.0).unwrap(), 0.0);
        // α → 1 recovers Brownian motion.
        let near_one = params(1.0 - 1e-9);
        let v = memory_covariance_exact(&near_one, 0.7, 2.0).unwrap();
        assert!((v - 0.7).abs() < 1e-7);
        assert!(memory_covariance_exact(&params(0.75), -1.0, 1.0).is_err());
    }

    #[test]
    fn approx_covariance_single_node() {
        let m = SpectralMeasure::atomic([(1.0, 1.0)]).unwrap();
        let p = GeometricPartition::from_atoms(&m).unwrap();
        let v = approx_covariance_closed_form(&p, 1.0, 1.0);
        assert!((v - 0.432_332_358_381_694).abs() < 1e-15);
        assert_eq!(approx_covariance_closed_form(&p, 0.0, 1.0), 0.0);
        // cross-time: e^{-(t-s)} (1 - e^{-2s})/2
        let c = approx_covariance_closed_form(&p, 0.5, 1.0);
        assert!((c - (-0.5f64).exp() * (1.0 - (-1.0f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cross_covariance_examples() {
        let m = SpectralMeasure::atomic([(1.0, 1.0)]).unwrap();
        let unit = GeometricPartition::from_atoms(&m).unwrap();
        let v = cross_covariance_exact(&params(0.75), &unit, 1.0).unwrap();
        let oracle = statrs::function::gamma::gamma_lr(0.75, 1.0);
        assert!(rel(v, oracle) < 1e-12);
        assert!((v - 0.739_980).abs() < 1e-6);
        let far = cross_covariance_exact(&params(0.75), &unit, 1e4).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
        assert_eq!(cross_covariance_exact(&params(0.75), &unit, 0.0).unwrap(), 0.0);
        let tiny = cross_covariance_exact(&params(0.75), &unit, 1e-12).unwrap();
        assert!(tiny < 1e-8);
    }

    #[test]
    fn cross_covariance_matches_direct_quadrature() {
        let a = 0.7;
        let p = build_geometric_partition(
            &SpectralMeasure::power_law(a).unwrap(),
            0.3,
            1.0,
            NodeRule::Barycenter,
        )
        .unwrap();
        let t: f64 = 0.8;
        // ∫₀ᵗ h(v) h^π(v) dv with v = w^{1/α} removing the singularity.
        let rule = GaussLegendre::new(40);
        let direct = rule.integrate_composite(
            |w| {
                let v = w.powf(1.0 / a);
                p.approx_kernel(v) / a * recip_gamma(a)
            },
            0.0,
            t.powf(a),
            64,
        );
        let closed = cross_covariance_exact(&params(a), &p, t).unwrap();
        assert!(rel(closed, direct) < 1e-10, "{closed} vs {direct}");
    }

    #[test]
    fn exact_representation_has_zero_error() {
        let m = SpectralMeasure::atomic([(2.0, 1.0)]).unwrap();
        let p = GeometricPartition::from_atoms(&m).unwrap();
        let r = sup_l2_error(&m, &p, &default_grid(1.0, 64)).unwrap();
        assert!(r.sup_l2_error < 1e-10);
        assert!(r.l2_error.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn report_sup_is_grid_max_and_errors_grow_with_time() {
        let m = SpectralMeasure::power_law(0.75).unwrap();
        let p = build_geometric_partition(&m, 0.05, 1.0, NodeRule::Barycenter).unwrap();
        let r = sup_l2_error(&m, &p, &default_grid(1.0, 64)).unwrap();
        let max = r.l2_error.iter().copied().fold(0.0, f64::max);
        assert_eq!(r.sup_l2_error, max);
        assert!(r.l2_error.windows(2).all(|w| w[1] >= w[0]));
        assert!((r.scale - memory_variance(&params(0.75), 1.0).sqrt()).abs() < 1e-15);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,l2_error\n"));
        assert!(text.contains("# sup_l2_error="));
    }

    #[test]
    fn squared_error_nonnegative_before_clamp() {
        let m = SpectralMeasure::power_law(0.75).unwrap();
        for eps in [1e-1, 1e-2, 1e-3] {
            for rule in NodeRule::GEOMETRIC {
                let p = build_geometric_partition(&m, eps, 1.0, rule).unwrap();
                for t in default_grid(1.0, 16) {
                    assert!(l2_error_squared_raw(&m, &p, t).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn refinement_reduces_certified_error() {
        let m = SpectralMeasure::power_law(0.75).unwrap();
        let grid = default_grid(1.0, 64);
        let errors: Vec<f64> = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
            .iter()
            .map(|&eps| {
                let p = PartitionBuilder::new(eps).build(&m).unwrap();
                sup_l2_error(&m, &p, &grid).unwrap().sup_l2_error
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn approximate_variance_converges_to_exact() {
        let m = SpectralMeasure::power_law(0.75).unwrap();
        let exact = memory_variance(&params(0.75), 1.0);
        let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let p = PartitionBuilder::new(eps).build(&m).unwrap();
                (approx_covariance_closed_form(&p, 1.0, 1.0) - exact).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn covariance_grids_are_symmetric_psd() {
        let times: Vec<f64> = (0..12).map(|k| 0.1 + k as f64 * 0.25).collect();
        let grids = [
            CovarianceGrid::fbm_exact(0.3, &times).unwrap(),
            CovarianceGrid::memory_exact(&params(0.8), &times).unwrap(),
            CovarianceGrid::approx_closed(
                &build_geometric_partition(
                    &SpectralMeasure::power_law(0.8).unwrap(),
                    0.1,
                    1.0,
                    NodeRule::Barycenter,
                )
                .unwrap(),
                &times,
            )
            .unwrap(),
        ];
        for g in &grids {
            for i in 0..g.dim() {
                assert!(g.get(i, i) >= 0.0);
                for j in 0..g.dim() {
                    assert_eq!(g.get(i, j), g.get(j, i));
                }
            }
            assert!(g.factor().is_ok());
        }
        let mut buf = Vec::new();
        grids[0].write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 13);
    }

    #[test]
    fn cholesky_sampler_scalar_case() {
        let cov = CovarianceGrid {
            times: vec![1.0],
            matrix: vec![4.0],
            source: CovarianceSource::FbmExact,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: f64 = rng.sample(StandardNormal);
        let x = cholesky_gaussian_vector(&cov, 5).unwrap();
        assert!((x[0] - 2.0 * z).abs() < 1e-15);
        let bad = CovarianceGrid {
            times: vec![1.0, 2.0],
            matrix: vec![1.0, 2.0, 2.0, 1.0],
            source: CovarianceSource::FbmExact,
        };
        assert!(cholesky_gaussian_vector(&bad, 0).is_err());
    }
}
