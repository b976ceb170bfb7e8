//! Kernels, spectral measures and their admissibility.
//!
//! The power kernel `h(u) = u^{α-1}/Γ(α)` is the Laplace transform of the
//! density `w(x) = x^{-α} sin(πα)/π` on `(0, ∞)`, since
//! `∫₀^∞ e^{-ux} x^{-α} dx = Γ(1-α) u^{α-1}` and `Γ(α)Γ(1-α) = π/sin(πα)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::integrate_adaptive;
use crate::special::recip_gamma;

/// Hurst exponent `H` and the kernel exponent `α = H + 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstKernelParams {
    hurst: f64,
    alpha: f64,
}

impl HurstKernelParams {
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { hurst: alpha - 0.5, alpha })
    }

    pub fn from_hurst(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 0.5) {
            return Err(Error::Parameter(format!(
                "Hurst exponent must lie in (0, 1/2) for the spectral representation, got {hurst}"
            )));
        }
        Ok(Self { hurst, alpha: hurst + 0.5 })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn measure(&self) -> SpectralMeasure {
        SpectralMeasure::PowerLaw { alpha: self.alpha }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (1/2, 1), got {alpha}")))
    }
}

/// `h(u) = u^{α-1}/Γ(α)` for `u > 0`.
pub fn power_kernel_eval(params: &HurstKernelParams, u: f64) -> Result<f64> {
    check_alpha(params.alpha)?;
    if !(u > 0.0) {
        return Err(Error::Domain(format!("kernel argument must be positive, got {u}")));
    }
    Ok(u.powf(params.alpha - 1.0) * recip_gamma(params.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A positive measure `μ` on `(0, ∞)` whose Laplace transform is the kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralMeasure {
    /// Density `x^{-α} sin(πα)/π`.
    PowerLaw { alpha: f64 },
    /// Finitely many atoms, locations strictly increasing.
    Atomic(Vec<Atom>),
}

impl SpectralMeasure {
    pub fn power_law(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::PowerLaw { alpha })
    }

    pub fn atomic(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(location, mass)| Atom { location, mass })
            .collect();
        if atoms.is_empty() {
            return Err(Error::Parameter("atomic measure needs at least one atom".into()));
        }
        for (k, atom) in atoms.iter().enumerate() {
            if !(atom.location > 0.0 && atom.location.is_finite()) {
                return Err(Error::Parameter(format!(
                    "atom location must be positive and finite, got {}",
                    atom.location
                )));
            }
            if !(atom.mass > 0.0 && atom.mass.is_finite()) {
                return Err(Error::Parameter(format!(
                    "atom mass must be positive and finite, got {}",
                    atom.mass
                )));
            }
            if k > 0 && atom.location <= atoms[k - 1].location {
                return Err(Error::Parameter(
                    "atom locations must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self::Atomic(atoms))
    }

    /// Kernel value `h(u) = ∫ e^{-ux} μ(dx)`.
    pub fn kernel(&self, u: f64) -> Result<f64> {
        kernel_from_measure(self, u)
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::PowerLaw { alpha } => Some(*alpha),
            Self::Atomic(_) => None,
        }
    }
}

impl fmt::Display for SpectralMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { alpha } => write!(f, "power:{alpha}"),
            Self::Atomic(atoms) => {
                write!(f, "atoms:")?;
                for (k, a) in atoms.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}*{}", a.location, a.mass)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `power:ALPHA` or `atoms:x1*m1,x2*m2,...`.
impl FromStr for SpectralMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("measure '{s}' lacks a ':'")))?;
        match kind.trim() {
            "power" => {
                let alpha = parse_f64(body)?;
                Self::power_law(alpha)
            }
            "atoms" => {
                let atoms = body
                    .split(',')
                    .map(|pair| {
                        let (x, m) = pair.split_once('*').ok_or_else(|| {
                            Error::Parse(format!("atom '{pair}' is not of the form x*m"))
                        })?;
                        Ok((parse_f64(x)?, parse_f64(m)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::atomic(atoms)
            }
            other => Err(Error::Parse(format!(
                "unknown measure kind '{other}' (expected 'power' or 'atoms')"
            ))),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

/// Normalizing constant `sin(πα)/π` of the power-law density.
pub(crate) fn power_density_constant(alpha: f64) -> f64 {
    (PI * alpha).sin() / PI
}

/// Power-law density `x^{-α} sin(πα)/π`.
pub fn spectral_density(measure: &SpectralMeasure, x: f64) -> Result<f64> {
    match measure {
        SpectralMeasure::PowerLaw { alpha } => {
            if !(x > 0.0) {
                return Err(Error::Domain(format!("density argument must be positive, got {x}")));
            }
            Ok(x.powf(-alpha) * power_density_constant(*alpha))
        }
        SpectralMeasure::Atomic(_) => Err(Error::UnsupportedVariant(
            "an atomic measure has no density".into(),
        )),
    }
}

/// `h(u) = ∫ e^{-ux} μ(dx)`.
///
/// Atomic measures are summed exactly. For the power law the integral is
/// taken in `s = ln x`, where the integrand `e^{-u e^s} e^{(1-α)s}` is smooth
/// and decays double-exponentially on the right. The left tail
/// `s < ln(δ/u)` is summed from the exponential series.
pub fn kernel_from_measure(measure: &SpectralMeasure, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("kernel argument must be positive, got {u}")));
    }
    match measure {
        SpectralMeasure::Atomic(atoms) => Ok(atoms
            .iter()
            .map(|a| a.mass * (-a.location * u).exp())
            .sum()),
        SpectralMeasure::PowerLaw { alpha } => {
            let alpha = *alpha;
            check_alpha(alpha)?;
            const LEFT: f64 = 1e-2;
            const RIGHT: f64 = 45.0;
            let beta = 1.0 - alpha;
            let s_lo = (LEFT / u).ln();
            let s_hi = (RIGHT / u).ln();

            // ∫_{-∞}^{s_lo} e^{-u e^s} e^{βs} ds = (δ/u)^β Σ_k (-δ)^k / (k! (k+β))
            let mut tail = 0.0;
            let mut coeff = 1.0;
            for k in 0..40 {
                let term = coeff / (k as f64 + beta);
                tail += term;
                if term.abs() < 1e-18 * tail.abs() {
                    break;
                }
                coeff *= -LEFT / (k as f64 + 1.0);
            }
            tail *= (LEFT / u).powf(beta);

            let body = integrate_adaptive(
                |s| (-u * s.exp() + beta * s).exp(),
                s_lo,
                s_hi,
                1e-9,
            )?;
            Ok(power_density_constant(alpha) * (tail + body))
        }
    }
}

/// `a = ‖h‖_{L²(0,∞)} = (∬ μ(dx)μ(dy)/(x+y))^{1/2}`.
pub fn l2_norm(measure: &SpectralMeasure) -> Result<f64> {
    match measure {
        SpectralMeasure::Atomic(atoms) => {
            let mut sum = 0.0;
            for a in atoms {
                for b in atoms {
                    sum += a.mass * b.mass / (a.location + b.location);
                }
            }
            Ok(sum.sqrt())
        }
        SpectralMeasure::PowerLaw { alpha } => Err(Error::NotSquareIntegrable(format!(
            "the double integral of x^-{alpha} y^-{alpha}/(x+y) diverges for every alpha in (1/2, 1)"
        ))),
    }
}

/// Outcome of the integrability checks on a spectral measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    /// `∫ (1 ∧ x^{-1/2}) μ(dx) < ∞`
    pub condition_10: bool,
    /// `∫ sup(x^{-p/2}, x^{-1/2}) μ(dx) < ∞`
    pub condition_prop2: bool,
    pub p: f64,
    /// `∬ μ(dx)μ(dy)/(x+y) < ∞`
    pub l2_norm_finite: bool,
}

impl AdmissibilityReport {
    /// Human-readable summary, used when a command refuses a measure.
    pub fn explain(&self) -> String {
        let mark = |b: bool| if b { "holds" } else { "fails" };
        format!(
            "integrability of (1 ∧ x^-1/2) {}; moment condition sup(x^-p/2, x^-1/2) with p={} {}; \
             square integrability of h on (0, ∞) {}",
            mark(self.condition_10),
            self.p,
            mark(self.condition_prop2),
            mark(self.l2_norm_finite)
        )
    }
}

/// Default exponent for the moment condition.
pub const DEFAULT_ADMISSIBILITY_P: f64 = 2.0;

/// Evaluates the integrability conditions: by direct sums for atomic measures,
/// by the exponent criteria at 0 and ∞ for the power law.
pub fn check_admissibility(measure: &SpectralMeasure, p: f64) -> Result<AdmissibilityReport> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("exponent p must exceed 1, got {p}")));
    }
    match measure {
        SpectralMeasure::Atomic(atoms) => {
            let c10: f64 = atoms
                .iter()
                .map(|a| a.mass * 1f64.min(a.location.powf(-0.5)))
                .sum();
            let cp: f64 = atoms
                .iter()
                .map(|a| a.mass * a.location.powf(-p / 2.0).max(a.location.powf(-0.5)))
                .sum();
            let l2 = l2_norm(measure)?;
            Ok(AdmissibilityReport {
                condition_10: c10.is_finite(),
                condition_prop2: cp.is_finite(),
                p,
                l2_norm_finite: l2.is_finite(),
            })
        }
        SpectralMeasure::PowerLaw { alpha } => {
            let alpha = *alpha;
            // Near 0: ∫₀¹ x^{-α} dx < ∞ iff α < 1; at ∞: ∫₁^∞ x^{-α-1/2} dx < ∞ iff α > 1/2.
            let condition_10 = alpha > 0.5 && alpha < 1.0;
            // Near 0 the supremum is x^{-p/2}: finite iff α + p/2 < 1.
            let condition_prop2 = alpha + p / 2.0 < 1.0 && alpha > 0.5;
            Ok(AdmissibilityReport {
                condition_10,
                condition_prop2,
                p,
                l2_norm_finite: false,
            })
        }
    }
}
