//! Acceptance criteria. Each prints one PASS/FAIL line; the process exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use fbmk::engine::{init_state, step_euler_with_increment, Simulator};
use fbmk::ergodic::{ergodic_experiment, ErgodicConfig, Phi};
use fbmk::kernel::{kernel_from_measure, power_kernel_eval, HurstKernelParams, SpectralMeasure};
use fbmk::oracle::{
    approx_covariance_closed_form, default_grid, fbm_covariance, memory_covariance_exact,
    sup_l2_error, tune_partition,
};
use fbmk::partition::{compact_bounds, GeometricPartition, NodeRule, PartitionBuilder};
use fbmk::{simulate_path, PathConfig, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, notes: Vec::new() }
    }
}

fn run(id: usize, name: &str, limit: Option<Duration>, f: fn() -> Result<Outcome, String>) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (pass, detail, notes) = match result {
        Ok(o) => (o.pass, o.detail, o.notes),
        Err(e) => (false, format!("error: {e}"), Vec::new()),
    };
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let budget = limit.map(|l| format!(" / {} s", l.as_secs())).unwrap_or_default();
    let ok = pass && in_time;
    for note in notes {
        println!("    {note}");
    }
    println!(
        "{} [{id}] {name}: {detail} (runtime {:.3} s{budget}{})",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

/// `|lhs - rhs|` relative to the magnitude of the terms that were combined.
fn rel_err(lhs: f64, rhs: f64, magnitude: f64) -> f64 {
    (lhs - rhs).abs() / magnitude.max(f64::MIN_POSITIVE)
}

fn fbm_identities() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
    let (mut worst_inc, mut worst_shift, mut worst_scale) = (0.0f64, 0.0f64, 0.0f64);
    let cov = |h, s, t| fbm_covariance(h, s, t).map_err(|e| e.to_string());
    for _ in 0..1000 {
        let s: f64 = rng.random_range(0.0..10.0);
        let t: f64 = rng.random_range(0.0..10.0);
        let a: f64 = rng.random_range(0.05..20.0);
        let h: f64 = rng.random_range(0.01..0.99);
        // E[(W_t - W_s)²] = |t - s|^{2H}
        let (ctt, css, cst) = (cov(h, t, t)?, cov(h, s, s)?, cov(h, s, t)?);
        let lhs = ctt - 2.0 * cst + css;
        let rhs = (t - s).abs().powf(2.0 * h);
        worst_inc = worst_inc.max(rel_err(lhs, rhs, ctt + css + 2.0 * cst.abs() + rhs));
        // Increments after a shift have the law of the process.
        let inc = cov(h, s + a, t + a)? - cov(h, s + a, a)? - cov(h, a, t + a)? + cov(h, a, a)?;
        let mag = cov(h, s + a, t + a)?.abs() + cov(h, s + a, a)?.abs() + cov(h, a, t + a)?.abs() + cov(h, a, a)?;
        worst_shift = worst_shift.max(rel_err(inc, cst, mag + cst.abs()));
        // Cov(W_{as}, W_{at}) = a^{2H} Cov(W_s, W_t)
        let lhs = cov(h, a * s, a * t)?;
        let rhs = a.powf(2.0 * h) * cst;
        let mag = 0.5 * a.powf(2.0 * h) * (s.powf(2.0 * h) + t.powf(2.0 * h) + (t - s).abs().powf(2.0 * h));
        worst_scale = worst_scale.max(rel_err(lhs, rhs, mag));
    }
    let worst = worst_inc.max(worst_shift).max(worst_scale);
    Ok(Outcome::new(
        worst <= 1e-12,
        format!(
            "1000 tuples, max relative deviation: increments {worst_inc:.2e}, shifted increments {worst_shift:.2e}, scaling {worst_scale:.2e} (tol 1e-12)"
        ),
    ))
}

fn spectral_representation() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for alpha in [0.55, 0.6, 0.75, 0.9, 0.95] {
        let m = SpectralMeasure::power_law(alpha).map_err(|e| e.to_string())?;
        let p = HurstKernelParams::from_alpha(alpha).map_err(|e| e.to_string())?;
        for k in 0..50 {
            let u = 1e-3 * 1e4f64.powf(k as f64 / 49.0);
            let direct = power_kernel_eval(&p, u).map_err(|e| e.to_string())?;
            let laplace = kernel_from_measure(&m, u).map_err(|e| e.to_string())?;
            worst = worst.max((laplace - direct).abs() / direct);
        }
    }
    Ok(Outcome::new(
        worst <= 1e-6,
        format!("5 exponents x 50 lags, max relative deviation {worst:.2e} (tol 1e-6)"),
    ))
}

fn certified_convergence() -> Result<Outcome, String> {
    let m = SpectralMeasure::power_law(0.75).map_err(|e| e.to_string())?;
    let grid = default_grid(1.0, 64);
    let mut rows = Vec::new();
    for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let p = PartitionBuilder::new(eps).build(&m).map_err(|e| e.to_string())?;
        let r = sup_l2_error(&m, &p, &grid).map_err(|e| e.to_string())?;
        rows.push((eps, p.len(), r.sup_l2_error, r.relative_sup_error()));
    }
    let decreasing = rows.windows(2).all(|w| w[1].2 < w[0].2);
    // Least-squares slope of ln(N / ln(1/ε)) against ln(1/ε).
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(eps, n, _, _)| ((1.0 / eps).ln(), (n as f64 / (1.0 / eps).ln()).ln()))
        .collect();
    let slope = ls_slope(&pts);
    let mut out = Outcome::new(
        decreasing && (slope - 0.5).abs() <= 0.1,
        format!("sup error strictly decreasing: {decreasing}; slope of N/log(1/eps) vs 1/eps {slope:.3} (target 0.5 +- 0.1)"),
    );
    out.notes.push("eps        N     sup_l2_error   relative".into());
    for (eps, n, e, r) in rows {
        out.notes.push(format!("{eps:<10} {n:<5} {e:.6e}   {r:.6e}"));
    }
    Ok(out)
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn forty_points() -> Result<Outcome, String> {
    let tuned = tune_partition(0.75, 40, 1.0, 64).map_err(|e| e.to_string())?;
    let params = HurstKernelParams::from_alpha(0.75).map_err(|e| e.to_string())?;
    let scale = memory_covariance_exact(&params, 1.0, 1.0).map_err(|e| e.to_string())?.sqrt();
    let relative = tuned.report.sup_l2_error / scale;
    let p = &tuned.partition;
    let mut out = Outcome::new(
        tuned.report.nodes == 40 && relative <= 1e-2,
        format!("relative sup error {relative:.4e} with 40 nodes (tol 1e-2)"),
    );
    out.notes.push(format!(
        "tuned: node rule {}, x_min {:.4e}, x_max {:.4e}, ratio {:.6}, equivalent c_alpha at eps=1e-2 {:.3}",
        p.node_rule(),
        p.x_min(),
        p.x_max(),
        p.ratio().unwrap_or(f64::NAN),
        tuned.equivalent_c_alpha(1e-2).unwrap_or(f64::NAN)
    ));
    out.notes.push(format!(
        "distinction (relative <= 1e-3): {}",
        if relative <= 1e-3 { "reached" } else { "not reached" }
    ));
    Ok(out)
}

fn engine_law() -> Result<Outcome, String> {
    let m = SpectralMeasure::atomic([(1.0, 1.0), (3.0, 0.5)]).map_err(|e| e.to_string())?;
    let p = GeometricPartition::from_atoms(&m).map_err(|e| e.to_string())?;
    let dt = 2f64.powi(-8);
    let replicas = 10_000;
    // indices into the recorded grid (every 32 steps: t = k/8)
    let pairs = [(2usize, 2usize), (2, 4), (4, 8), (6, 8), (8, 8)];
    let mut sums = vec![(0.0f64, 0.0f64); pairs.len()];
    for r in 0..replicas {
        let cfg = PathConfig::new(1.0, dt).seed(99).stream(r as u64).output_every(32);
        let path = simulate_path(&p, &cfg).map_err(|e| e.to_string())?;
        for (acc, &(i, j)) in sums.iter_mut().zip(&pairs) {
            let x = path.values[i] * path.values[j];
            acc.0 += x;
            acc.1 += x * x;
        }
    }
    let n = replicas as f64;
    let mut worst = 0.0f64;
    let mut out = Outcome::new(true, String::new());
    for (&(i, j), &(s1, s2)) in pairs.iter().zip(&sums) {
        let (s, t) = (i as f64 / 8.0, j as f64 / 8.0);
        let mean = s1 / n;
        let se = ((s2 / n - mean * mean) / (n - 1.0)).sqrt();
        let exact = approx_covariance_closed_form(&p, s, t);
        let z = (mean - exact) / se;
        worst = worst.max(z.abs());
        out.notes.push(format!("Cov(V({s}), V({t})): empirical {mean:.5} closed form {exact:.5} z {z:+.2}"));
    }
    out.pass = worst <= 3.0;
    out.detail = format!("{replicas} replicas, 5 pairs, max |z| {worst:.2} (tol 3)");
    Ok(out)
}

/// Output variance of the Euler recursion at T = 1 for one node at η = 1.
///
/// The recursion is linear and time-invariant, so `V(T) = Σ_k g_{n-k} ΔB_k`
/// with `g` the response of the implementation to a unit increment, and
/// `Var V(T) = Δt Σ g_j²` exactly.
fn euler_variance(dt: f64) -> Result<f64, String> {
    let m = SpectralMeasure::atomic([(1.0, 1.0)]).map_err(|e| e.to_string())?;
    let p = GeometricPartition::from_atoms(&m).map_err(|e| e.to_string())?;
    let steps = (1.0 / dt).round() as usize;
    let mut state = init_state(&p, None, 0).map_err(|e| e.to_string())?;
    let mut sum = 0.0;
    for k in 0..steps {
        let db = if k == 0 { 1.0 } else { 0.0 };
        step_euler_with_increment(&mut state, p.nodes(), dt, db).map_err(|e| e.to_string())?;
        let g = state.values()[0] * p.weights()[0];
        sum += g * g;
    }
    Ok(dt * sum)
}

fn euler_weak_order() -> Result<Outcome, String> {
    let exact = (1.0 - (-2.0f64).exp()) / 2.0;
    let mut pts = Vec::new();
    let mut out = Outcome::new(true, String::new());
    for k in 4..=10 {
        let dt = 2f64.powi(-k);
        let err = (euler_variance(dt)? - exact).abs();
        out.notes.push(format!("dt 2^-{k}: |Var - (1 - e^-2)/2| = {err:.4e}"));
        pts.push((dt.ln(), err.ln()));
    }
    let slope = ls_slope(&pts);
    out.pass = (slope - 1.0).abs() <= 0.2;
    out.detail = format!("log-log slope {slope:.3} (target 1 +- 0.2)");
    Ok(out)
}

fn ergodic_desk_scale() -> Result<Outcome, String> {
    let m = SpectralMeasure::atomic([(1.0, 1.0)]).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut out = Outcome::new(true, String::new());
    for phi in [Phi::Square, Phi::PositiveIndicator, Phi::Abs] {
        let mut finals = Vec::new();
        for y0 in [0.0, 5.0] {
            let cfg = ErgodicConfig::new(m.clone(), phi, 1e4, 0.05).replicas(8).seed(7).y0(vec![y0]);
            let r = ergodic_experiment(&cfg).map_err(|e| e.to_string())?;
            let z = r.z_score().ok_or("no z-score")?;
            worst = worst.max(z.abs());
            out.notes.push(format!(
                "phi {phi}, y0 [{y0}]: estimate {:.5} +- {:.5}, target {:.5}, z {z:+.2}",
                r.estimate,
                r.stderr.unwrap_or(f64::NAN),
                r.target.unwrap_or(f64::NAN)
            ));
            finals.push((r.estimate, r.stderr.unwrap_or(f64::NAN)));
        }
        let gap = (finals[0].0 - finals[1].0).abs() / (finals[0].1.powi(2) + finals[1].1.powi(2)).sqrt();
        worst_gap = worst_gap.max(gap);
    }
    out.pass = worst <= 3.0 && worst_gap <= 3.0;
    out.detail = format!(
        "T 1e4, dt 0.05, 8 replicas: max |z| {worst:.2} (tol 3); start points 0 vs 5 differ by at most {worst_gap:.2} combined stderr"
    );
    Ok(out)
}

fn memory_contract() -> Result<Outcome, String> {
    let (lo, hi) = compact_bounds(1e-2, 0.75);
    let p = GeometricPartition::with_count(0.75, lo, hi, 64, NodeRule::Barycenter).map_err(|e| e.to_string())?;
    let state = init_state(&p, None, 1).map_err(|e| e.to_string())?;
    let before = state.footprint();
    let mut sim = Simulator::new(&p, Scheme::Exact, 1e-3, state).map_err(|e| e.to_string())?;
    let mut acc = 0.0;
    for _ in 0..1_000_000 {
        sim.step();
        acc += sim.output();
    }
    let steps = sim.steps();
    let state = sim.into_state();
    let after = state.footprint();
    let rng_bytes = std::mem::size_of::<ChaCha8Rng>();
    let pass = steps == 1_000_000
        && state.len() == 64
        && before == (64, rng_bytes)
        && after == before
        && acc.is_finite();
    Ok(Outcome::new(
        pass,
        format!(
            "{steps} exact steps with N 64: state holds {} values (capacity {}), generator {} bytes, unchanged from start: {}",
            state.len(),
            after.0,
            after.1,
            after == before
        ),
    ))
}

fn main() {
    // Only `--list`/filters from the test runner reach us; ignore them.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let s = Duration::from_secs;
    let results = [
        run(1, "fBm identity suite", Some(s(1)), fbm_identities),
        run(2, "spectral representation", Some(s(5)), spectral_representation),
        run(3, "certified error convergence", Some(s(60)), certified_convergence),
        run(4, "forty-point demonstration", Some(s(120)), forty_points),
        run(5, "engine law correctness", Some(s(60)), engine_law),
        run(6, "Euler weak order", Some(s(30)), euler_weak_order),
        run(7, "ergodic theorem at desk scale", Some(s(30)), ergodic_desk_scale),
        run(8, "memory contract", None, memory_contract),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
