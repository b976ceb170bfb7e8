//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function wraps a plain Rust function that returns
//! `fbmk::Result`, so the logic is testable on the host.

use fbmk::kernel::SpectralMeasure;
use fbmk::oracle::{default_grid, sup_l2_error};
use fbmk::{simulate_path, GeometricPartition, NodeRule, PartitionBuilder, PathConfig, Scheme};
use wasm_bindgen::prelude::*;

/// Upper bound on steps per call, to keep the page responsive.
pub const MAX_STEPS: f64 = 2e6;

/// A simulated path.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Path {
    times: Vec<f64>,
    values: Vec<f64>,
    nodes: usize,
}

#[wasm_bindgen]
impl Path {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

/// `h` and its finite-node approximation on log-spaced lags.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct KernelCurve {
    lags: Vec<f64>,
    exact: Vec<f64>,
    approx: Vec<f64>,
    nodes: usize,
}

#[wasm_bindgen]
impl KernelCurve {
    #[wasm_bindgen(getter)]
    pub fn lags(&self) -> Vec<f64> {
        self.lags.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn approx(&self) -> Vec<f64> {
        self.approx.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

/// Certified L2 error on a grid.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    times: Vec<f64>,
    errors: Vec<f64>,
    sup: f64,
    relative: f64,
    nodes: usize,
}

#[wasm_bindgen]
impl ErrorProfile {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn errors(&self) -> Vec<f64> {
        self.errors.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sup(&self) -> f64 {
        self.sup
    }

    #[wasm_bindgen(getter)]
    pub fn relative(&self) -> f64 {
        self.relative
    }

    #[wasm_bindgen(getter)]
    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

fn build(measure: &str, eps: f64, node_rule: &str) -> fbmk::Result<(SpectralMeasure, GeometricPartition)> {
    let measure: SpectralMeasure = measure.parse()?;
    let rule: NodeRule = node_rule.parse()?;
    let partition = PartitionBuilder::new(eps).node_rule(rule).max_nodes(20_000).build(&measure)?;
    Ok((measure, partition))
}

pub fn simulate_inner(
    measure: &str,
    eps: f64,
    horizon: f64,
    dt: f64,
    scheme: &str,
    seed: u64,
) -> fbmk::Result<Path> {
    let (_, partition) = build(measure, eps, "barycenter")?;
    let scheme: Scheme = scheme.parse()?;
    if horizon / dt > MAX_STEPS {
        return Err(fbmk::Error::Parameter(format!("at most {MAX_STEPS} steps per call")));
    }
    // Thin the output to about 2000 points for plotting.
    let steps = (horizon / dt).round().max(1.0) as usize;
    let every = steps.div_ceil(2000).max(1);
    let config = PathConfig::new(horizon, dt).scheme(scheme).seed(seed).output_every(every);
    let path = simulate_path(&partition, &config)?;
    Ok(Path { times: path.times, values: path.values, nodes: partition.len() })
}

pub fn kernel_curve_inner(
    measure: &str,
    eps: f64,
    node_rule: &str,
    lag_min: f64,
    lag_max: f64,
    points: usize,
) -> fbmk::Result<KernelCurve> {
    let (measure, partition) = build(measure, eps, node_rule)?;
    if !(lag_min > 0.0 && lag_max > lag_min) || points < 2 {
        return Err(fbmk::Error::Parameter("need 0 < lag_min < lag_max and at least 2 points".into()));
    }
    let step = (lag_max / lag_min).ln() / (points - 1) as f64;
    let lags: Vec<f64> = (0..points).map(|k| lag_min * (step * k as f64).exp()).collect();
    let exact = lags.iter().map(|&u| measure.kernel(u)).collect::<fbmk::Result<Vec<_>>>()?;
    let approx = lags.iter().map(|&u| partition.approx_kernel(u)).collect();
    Ok(KernelCurve { lags, exact, approx, nodes: partition.len() })
}

pub fn error_profile_inner(
    measure: &str,
    eps: f64,
    node_rule: &str,
    horizon: f64,
    grid_points: usize,
) -> fbmk::Result<ErrorProfile> {
    let (measure, partition) = build(measure, eps, node_rule)?;
    let report = sup_l2_error(&measure, &partition, &default_grid(horizon, grid_points.max(1)))?;
    Ok(ErrorProfile {
        relative: report.relative_sup_error(),
        sup: report.sup_l2_error,
        times: report.grid,
        errors: report.l2_error,
        nodes: partition.len(),
    })
}

fn js<T>(r: fbmk::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Simulates `V^π` on `[0, horizon]`; the seed is a JS number truncated to an integer.
#[wasm_bindgen]
pub fn simulate(
    measure: &str,
    eps: f64,
    horizon: f64,
    dt: f64,
    scheme: &str,
    seed: f64,
) -> Result<Path, JsError> {
    js(simulate_inner(measure, eps, horizon, dt, scheme, seed as u64))
}

#[wasm_bindgen]
pub fn kernel_curve(
    measure: &str,
    eps: f64,
    node_rule: &str,
    lag_min: f64,
    lag_max: f64,
    points: usize,
) -> Result<KernelCurve, JsError> {
    js(kernel_curve_inner(measure, eps, node_rule, lag_min, lag_max, points))
}

#[wasm_bindgen]
pub fn error_profile(
    measure: &str,
    eps: f64,
    node_rule: &str,
    horizon: f64,
    grid_points: usize,
) -> Result<ErrorProfile, JsError> {
    js(error_profile_inner(measure, eps, node_rule, horizon, grid_points))
}
