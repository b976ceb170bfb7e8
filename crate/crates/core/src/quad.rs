//! Gauss-Legendre and Gauss-Hermite rules, and a composite Gauss-Legendre
//! integrator with panel doubling.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// An `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ₐᵇ f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule over `panels` equal sub-intervals of [a, b].
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite 16-point Gauss-Legendre, doubling the panel count until the
/// relative change drops below `rel_tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_DOUBLINGS: usize = 14;
    let rule = GaussLegendre::new(16);
    let mut panels = 4;
    let mut previous = rule.integrate_composite(&mut f, a, b, panels);
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let current = rule.integrate_composite(&mut f, a, b, panels);
        if !current.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite quadrature value on [{a}, {b}]"
            )));
        }
        if (current - previous).abs() <= rel_tol * current.abs() {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::Numerical(format!(
        "composite Gauss-Legendre on [{a}, {b}] did not reach relative tolerance {rel_tol} \
         with {panels} panels (last estimate {previous})"
    )))
}

/// An `n`-point Gauss-Hermite rule for the weight `e^{-x²}`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                // Orthonormal Hermite recurrence.
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// E[f(N)] for a standard normal N.
    pub fn expectation<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let sqrt2 = std::f64::consts::SQRT_2;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(sqrt2 * x))
            .sum::<f64>()
            / PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // Exact up to degree 15 with 8 nodes.
        let v = rule.integrate(|x| x.powi(14), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-15);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        assert!((rule.integrate(|x| x.exp(), 0.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_converges_on_smooth_integrand() {
        let v = integrate_adaptive(|x| (-x * x).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_reports_failure() {
        // Oscillates too fast to resolve with the doubling budget.
        let err = integrate_adaptive(|x| (1e9 * x).sin() + 1e-300, 0.0, 1.0, 1e-14);
        assert!(err.is_err());
    }

    #[test]
    fn hermite_rule_moments() {
        let rule = GaussHermite::new(40);
        assert!((rule.expectation(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((rule.expectation(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((rule.expectation(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((rule.expectation(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
    }
}
