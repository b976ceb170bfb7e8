//! Geometric partitions of the spectral axis.
//!
//! The compact `K(ε) = [ε^{1/(1-α)}, (1/ε)^{2/(2α+3)}]` is cut into cells with
//! edges `x_min·r^k`, `r = 1 + c_α √ε`. Each cell contributes one OU node
//! `η_i` with weight `c_i = μ(cell_i)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::{power_density_constant, SpectralMeasure};

/// Where a cell places its node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeRule {
    /// μ-weighted mean of the cell, `∫ x μ(dx) / μ(cell)`.
    #[default]
    Barycenter,
    /// `√(lo·hi)`.
    GeometricMidpoint,
    LeftEdge,
    /// Atomic measures: the atoms themselves.
    Atoms,
}

impl NodeRule {
    pub const GEOMETRIC: [NodeRule; 3] =
        [NodeRule::Barycenter, NodeRule::GeometricMidpoint, NodeRule::LeftEdge];
}

impl fmt::Display for NodeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Barycenter => "barycenter",
            Self::GeometricMidpoint => "geometric_midpoint",
            Self::LeftEdge => "left_edge",
            Self::Atoms => "exact",
        })
    }
}

impl FromStr for NodeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "barycenter" => Ok(Self::Barycenter),
            "geometric_midpoint" | "geometric-midpoint" | "midpoint" => {
                Ok(Self::GeometricMidpoint)
            }
            "left_edge" | "left-edge" => Ok(Self::LeftEdge),
            "exact" | "atoms" => Ok(Self::Atoms),
            other => Err(Error::Parse(format!("unknown node rule '{other}'"))),
        }
    }
}

/// Nodes `η_i`, weights `c_i` and the cells they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPartition {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cells: Vec<(f64, f64)>,
    ratio: Option<f64>,
    x_min: f64,
    x_max: f64,
    node_rule: NodeRule,
}

impl GeometricPartition {
    /// Partition whose nodes and weights are the atoms of the measure.
    pub fn from_atoms(measure: &SpectralMeasure) -> Result<Self> {
        match measure {
            SpectralMeasure::Atomic(atoms) => Ok(Self {
                nodes: atoms.iter().map(|a| a.location).collect(),
                weights: atoms.iter().map(|a| a.mass).collect(),
                cells: atoms.iter().map(|a| (a.location, a.location)).collect(),
                ratio: None,
                x_min: atoms[0].location,
                x_max: atoms[atoms.len() - 1].location,
                node_rule: NodeRule::Atoms,
            }),
            SpectralMeasure::PowerLaw { .. } => Err(Error::UnsupportedVariant(
                "exact nodes need an atomic measure".into(),
            )),
        }
    }

    /// Exactly `n` geometric cells spanning `[x_min, x_max]`.
    pub fn with_count(
        alpha: f64,
        x_min: f64,
        x_max: f64,
        n: usize,
        node_rule: NodeRule,
    ) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min) {
            return Err(Error::Parameter(format!(
                "need 0 < x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n == 0 {
            return Err(Error::Parameter("partition needs at least one cell".into()));
        }
        let ratio = (x_max / x_min).powf(1.0 / n as f64);
        Self::geometric(alpha, x_min, ratio, n, node_rule)
    }

    fn geometric(
        alpha: f64,
        x_min: f64,
        ratio: f64,
        n: usize,
        node_rule: NodeRule,
    ) -> Result<Self> {
        let measure = SpectralMeasure::power_law(alpha)?;
        let edges: Vec<f64> = (0..=n).map(|k| x_min * ratio.powi(k as i32)).collect();
        let cells = weighted_cells(&measure, &edges, node_rule)?;
        let x_max = edges[n];
        let (cells, (nodes, weights)): (Vec<_>, (Vec<_>, Vec<_>)) =
            cells.into_iter().map(|(cell, eta, c)| (cell, (eta, c))).unzip();
        if nodes.is_empty() {
            return Err(Error::Numerical("every cell of the partition has zero mass".into()));
        }
        Ok(Self {
            nodes,
            weights,
            cells,
            ratio: Some(ratio),
            x_min,
            x_max,
            node_rule,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cells(&self) -> &[(f64, f64)] {
        &self.cells
    }

    /// Geometric ratio `r`; `None` for atomic partitions.
    pub fn ratio(&self) -> Option<f64> {
        self.ratio
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn node_rule(&self) -> NodeRule {
        self.node_rule
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ c_i e^{-η_i u}`, the kernel represented by the partition.
    pub fn approx_kernel(&self, u: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&eta, &c)| c * (-eta * u).exp())
            .sum()
    }

    /// CSV with columns `index,eta,c,cell_lo,cell_hi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,eta,c,cell_lo,cell_hi")?;
        for (i, ((eta, c), (lo, hi))) in self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.cells)
            .enumerate()
        {
            writeln!(out, "{i},{eta:.16e},{c:.16e},{lo:.16e},{hi:.16e}")?;
        }
        Ok(())
    }
}

/// Lower edge `ε^{1/(1-α)}` and target upper edge `(1/ε)^{2/(2α+3)}` of `K(ε)`.
pub fn compact_bounds(eps: f64, alpha: f64) -> (f64, f64) {
    (eps.powf(1.0 / (1.0 - alpha)), (1.0 / eps).powf(2.0 / (2.0 * alpha + 3.0)))
}

/// `r(ε) = 1 + c_α √ε`.
pub fn geometric_ratio(eps: f64, c_alpha: f64) -> f64 {
    1.0 + c_alpha * eps.sqrt()
}

fn cell_count(x_min: f64, x_max: f64, ratio: f64) -> f64 {
    let span = (x_max / x_min).ln() / ratio.ln();
    // Guard against rounding pushing an exact integer span up by one.
    (span * (1.0 - 1e-12)).ceil().max(1.0)
}

fn check_builder_inputs(eps: f64, alpha: f64, c_alpha: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (1/2, 1), got {alpha}")));
    }
    if !(c_alpha > 0.0 && c_alpha.is_finite()) {
        return Err(Error::Parameter(format!("c_alpha must be positive, got {c_alpha}")));
    }
    Ok(())
}

/// Number of cells the default builder produces, without building.
pub fn partition_cardinality(eps: f64, alpha: f64, c_alpha: f64) -> Result<usize> {
    check_builder_inputs(eps, alpha, c_alpha)?;
    let (x_min, x_max) = compact_bounds(eps, alpha);
    Ok(cell_count(x_min, x_max, geometric_ratio(eps, c_alpha)) as usize)
}

/// Builds partitions from a target precision. Atomic measures bypass the
/// geometric construction and map to their atoms.
#[derive(Debug, Clone)]
pub struct PartitionBuilder {
    eps: f64,
    c_alpha: f64,
    node_rule: NodeRule,
    x_min: Option<f64>,
    x_max: Option<f64>,
    max_nodes: usize,
}

pub const DEFAULT_MAX_NODES: usize = 1_000_000;

impl PartitionBuilder {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            c_alpha: 1.0,
            node_rule: NodeRule::default(),
            x_min: None,
            x_max: None,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    pub fn c_alpha(mut self, c_alpha: f64) -> Self {
        self.c_alpha = c_alpha;
        self
    }

    pub fn node_rule(mut self, node_rule: NodeRule) -> Self {
        self.node_rule = node_rule;
        self
    }

    /// Overrides the lower end of the compact.
    pub fn x_min(mut self, x_min: f64) -> Self {
        self.x_min = Some(x_min);
        self
    }

    /// Overrides the (target) upper end of the compact.
    pub fn x_max(mut self, x_max: f64) -> Self {
        self.x_max = Some(x_max);
        self
    }

    pub fn max_nodes(mut self, max_nodes: usize) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    pub fn build(&self, measure: &SpectralMeasure) -> Result<GeometricPartition> {
        let alpha = match measure {
            SpectralMeasure::Atomic(_) => return GeometricPartition::from_atoms(measure),
            SpectralMeasure::PowerLaw { alpha } => *alpha,
        };
        if self.node_rule == NodeRule::Atoms {
            return Err(Error::UnsupportedVariant(
                "exact nodes need an atomic measure".into(),
            ));
        }
        check_builder_inputs(self.eps, alpha, self.c_alpha)?;
        let (lo, hi) = compact_bounds(self.eps, alpha);
        let x_min = self.x_min.unwrap_or(lo);
        let x_max = self.x_max.unwrap_or(hi);
        if !(x_min > 0.0 && x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::Parameter(format!("invalid compact [{x_min}, {x_max}]")));
        }
        let ratio = geometric_ratio(self.eps, self.c_alpha);
        let n = if x_max > x_min { cell_count(x_min, x_max, ratio) } else { 1.0 };
        if n > self.max_nodes as f64 {
            return Err(Error::Capacity { needed: n.min(usize::MAX as f64) as usize, cap: self.max_nodes });
        }
        GeometricPartition::geometric(alpha, x_min, ratio, n as usize, self.node_rule)
    }
}

/// Builds a partition from `eps`, `c_alpha` and a node rule with default
/// endpoints and cap.
pub fn build_geometric_partition(
    measure: &SpectralMeasure,
    eps: f64,
    c_alpha: f64,
    node_rule: NodeRule,
) -> Result<GeometricPartition> {
    PartitionBuilder::new(eps)
        .c_alpha(c_alpha)
        .node_rule(node_rule)
        .build(measure)
}

/// Nodes and weights for the cells delimited by `edges`.
///
/// Power law: `c_i = μ(cell_i)` in closed form. Atomic: the atoms themselves,
/// edges ignored. Cells whose mass underflows to zero are dropped.
pub fn compute_weights(
    measure: &SpectralMeasure,
    edges: &[f64],
    node_rule: NodeRule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let SpectralMeasure::Atomic(atoms) = measure {
        return Ok((
            atoms.iter().map(|a| a.location).collect(),
            atoms.iter().map(|a| a.mass).collect(),
        ));
    }
    Ok(weighted_cells(measure, edges, node_rule)?
        .into_iter()
        .map(|(_, eta, c)| (eta, c))
        .unzip())
}

type WeightedCell = ((f64, f64), f64, f64);

fn weighted_cells(
    measure: &SpectralMeasure,
    edges: &[f64],
    node_rule: NodeRule,
) -> Result<Vec<WeightedCell>> {
    let alpha = match measure {
        SpectralMeasure::PowerLaw { alpha } => *alpha,
        SpectralMeasure::Atomic(_) => {
            return Err(Error::UnsupportedVariant("cells need a power-law measure".into()))
        }
    };
    if edges.len() < 2 {
        return Err(Error::Parameter("need at least two edges".into()));
    }
    if !(edges[0] > 0.0) {
        return Err(Error::Parameter(format!("edges must be positive, got {}", edges[0])));
    }
    if let Some(w) = edges.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter(format!(
            "degenerate cell [{}, {}]: edges must be strictly increasing",
            w[0], w[1]
        )));
    }
    let density = power_density_constant(alpha);
    let beta = 1.0 - alpha;
    let mut cells = Vec::with_capacity(edges.len() - 1);
    let mut dropped = 0usize;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let log_ratio = (hi / lo).ln();
        // ∫_lo^hi x^{-α} dx = lo^β (r^β - 1)/β
        let mass = density * lo.powf(beta) * (beta * log_ratio).exp_m1() / beta;
        if !(mass > 0.0) {
            dropped += 1;
            continue;
        }
        let eta = match node_rule {
            NodeRule::Barycenter => {
                // ∫ x^{1-α} / ∫ x^{-α} over the cell
                lo * (beta / (1.0 + beta)) * ((1.0 + beta) * log_ratio).exp_m1()
                    / (beta * log_ratio).exp_m1()
            }
            NodeRule::GeometricMidpoint => (lo * hi).sqrt(),
            NodeRule::LeftEdge => lo,
            NodeRule::Atoms => {
                return Err(Error::UnsupportedVariant(
                    "exact nodes need an atomic measure".into(),
                ))
            }
        };
        cells.push(((lo, hi), eta, mass));
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} partition cells with zero mass");
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_adaptive;

    fn power(alpha: f64) -> SpectralMeasure {
        SpectralMeasure::power_law(alpha).unwrap()
    }

    #[test]
    fn builder_example_alpha_075_eps_001() {
        let p = build_geometric_partition(&power(0.75), 0.01, 1.0, NodeRule::Barycenter).unwrap();
        assert!((p.x_min() - 1e-8).abs() < 1e-20);
        assert!((p.ratio().unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(p.len(), 215);
        assert!(p.x_max() >= 100f64.powf(2.0 / 4.5));
        assert!(p.x_max() / p.ratio().unwrap() < 100f64.powf(2.0 / 4.5));
        assert_eq!(partition_cardinality(0.01, 0.75, 1.0).unwrap(), 215);
    }

    #[test]
    fn degenerate_eps_gives_single_cell() {
        let p = build_geometric_partition(&power(0.75), 0.999, 1.0, NodeRule::Barycenter).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn geometric_midpoint_of_unit_cell() {
        let (nodes, _) =
            compute_weights(&power(0.6), &[1.0, 2.0], NodeRule::GeometricMidpoint).unwrap();
        assert!((nodes[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cell_mass_closed_form_and_quadrature() {
        let m = power(0.75);
        let (_, c) = compute_weights(&m, &[1.0, 2.0], NodeRule::Barycenter).unwrap();
        let expected = (0.75 * std::f64::consts::PI).sin() / (std::f64::consts::PI * 0.25)
            * (2f64.powf(0.25) - 1.0);
        assert!((c[0] - expected).abs() < 1e-14);
        assert!((c[0] - 0.170_35).abs() < 1e-5);
        let quad = integrate_adaptive(
            |x| crate::kernel::spectral_density(&m, x).unwrap(),
            1.0,
            2.0,
            1e-14,
        )
        .unwrap();
        assert!((c[0] - quad).abs() < 1e-13);
    }

    #[test]
    fn atoms_map_to_themselves() {
        let m = SpectralMeasure::atomic([(1.0, 2.0)]).unwrap();
        let (nodes, weights) = compute_weights(&m, &[5.0, 9.0], NodeRule::Barycenter).unwrap();
        assert_eq!(nodes, vec![1.0]);
        assert_eq!(weights, vec![2.0]);
        let p = PartitionBuilder::new(0.1).build(&m).unwrap();
        assert_eq!(p.node_rule(), NodeRule::Atoms);
        assert_eq!(p.nodes(), &[1.0]);
    }

    #[test]
    fn zero_width_cell_rejected() {
        assert!(matches!(
            compute_weights(&power(0.75), &[2.0, 2.0], NodeRule::Barycenter),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn capacity_cap_enforced() {
        let err = PartitionBuilder::new(1e-6).max_nodes(100).build(&power(0.75));
        assert!(matches!(err, Err(Error::Capacity { cap: 100, .. })));
    }

    #[test]
    fn exact_rule_needs_atoms() {
        let err = PartitionBuilder::new(0.1).node_rule(NodeRule::Atoms).build(&power(0.75));
        assert!(err.is_err());
        assert!(GeometricPartition::from_atoms(&power(0.75)).is_err());
    }

    #[test]
    fn partition_invariants() {
        for rule in NodeRule::GEOMETRIC {
            let p = build_geometric_partition(&power(0.65), 0.02, 1.3, rule).unwrap();
            let r = p.ratio().unwrap();
            assert_eq!(p.nodes().len(), p.weights().len());
            assert!(p.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(p.weights().iter().all(|&c| c > 0.0));
            assert!(p.x_min() <= p.nodes()[0] && *p.nodes().last().unwrap() <= p.x_max());
            for (k, (lo, hi)) in p.cells().iter().enumerate() {
                assert!(((hi / lo) - r).abs() < 1e-12);
                assert!(*lo <= p.nodes()[k] && p.nodes()[k] <= *hi);
            }
        }
    }

    #[test]
    fn mass_consistency() {
        let alpha = 0.75;
        let p = build_geometric_partition(&power(alpha), 1e-3, 1.0, NodeRule::Barycenter).unwrap();
        let closed = power_density_constant(alpha) / (1.0 - alpha)
            * (p.x_max().powf(1.0 - alpha) - p.x_min().powf(1.0 - alpha));
        assert!((p.total_mass() - closed).abs() < 1e-10 * closed);
    }

    #[test]
    fn barycenter_matches_first_moment() {
        let alpha = 0.7;
        let m = power(alpha);
        let p = build_geometric_partition(&m, 0.05, 1.0, NodeRule::Barycenter).unwrap();
        for ((&eta, &c), &(lo, hi)) in p.nodes().iter().zip(p.weights()).zip(p.cells()) {
            let moment = power_density_constant(alpha) / (2.0 - alpha)
                * (hi.powf(2.0 - alpha) - lo.powf(2.0 - alpha));
            assert!((c * eta - moment).abs() < 1e-10 * moment);
        }
    }

    #[test]
    fn cardinality_increases_as_eps_halves() {
        let mut eps = 0.1;
        while eps > 1e-6 {
            let n = partition_cardinality(eps, 0.75, 1.0).unwrap();
            let n_half = partition_cardinality(eps / 2.0, 0.75, 1.0).unwrap();
            assert!(n_half > n, "eps={eps}");
            eps /= 3.0;
        }
    }

    #[test]
    fn csv_has_expected_columns() {
        let p = build_geometric_partition(&power(0.75), 0.5, 1.0, NodeRule::Barycenter).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "index,eta,c,cell_lo,cell_hi");
        assert_eq!(lines.count(), p.len());
    }
}
