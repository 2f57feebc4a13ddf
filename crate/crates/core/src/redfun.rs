//! Reduced functions `h(ρ)`: concurrence, von Neumann entropy (base 2), and
//! the q- and α-families. Every evaluation goes through the clipped spectrum.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qstate::{random_pure_with, DensityMatrix, SystemLayout};
use crate::PURITY_TOL;

/// Eigenvalues at or below this count as zero in `Tr ρ^α`.
pub const ALPHA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ReducedFunction {
    /// `√(2(1 − Tr ρ²))`
    Concurrence,
    /// `−Tr ρ log₂ ρ`
    Entropy,
    /// `1 − Tr ρ^q`, q > 1
    QFamily(f64),
    /// `Tr ρ^α − 1`, 0 < α < 1
    AlphaFamily(f64),
}

impl ReducedFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReducedFunction::QFamily(q) if !(q > 1.0 && q.is_finite()) => {
                Err(Error::InvalidParameter(alloc::format!("q must exceed 1, got {q}")))
            }
            ReducedFunction::AlphaFamily(a) if !(a > 0.0 && a < 1.0) => {
                Err(Error::InvalidParameter(alloc::format!("alpha must lie in (0, 1), got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// Value on a clipped, normalised spectrum. Exactly zero when the
    /// spectrum is pure within [`PURITY_TOL`].
    pub fn of_spectrum(&self, spectrum: &[f64]) -> f64 {
        let purity: f64 = spectrum.iter().map(|l| l * l).sum();
        if purity >= 1.0 - PURITY_TOL {
            return 0.0;
        }
        let v = match *self {
            ReducedFunction::Concurrence => libm::sqrt(2.0 * (1.0 - purity).max(0.0)),
            ReducedFunction::Entropy => -spectrum.iter().filter(|l| **l > 0.0).map(|l| l * libm::log2(*l)).sum::<f64>(),
            ReducedFunction::QFamily(q) => 1.0 - spectrum.iter().map(|l| libm::pow(*l, q)).sum::<f64>(),
            ReducedFunction::AlphaFamily(a) => {
                // λ^α amplifies roundoff-level eigenvalues of rank-deficient marginals
                spectrum.iter().filter(|l| **l > ALPHA_FLOOR).map(|l| libm::pow(*l, a)).sum::<f64>() - 1.0
            }
        };
        v.max(0.0)
    }

    pub fn evaluate(&self, dm: &DensityMatrix) -> Result<f64> {
        self.validate()?;
        Ok(self.of_spectrum(&dm.spectrum()?))
    }

    pub fn is_known_subadditive(&self) -> bool {
        matches!(self, ReducedFunction::Concurrence | ReducedFunction::Entropy)
    }
}

impl fmt::Display for ReducedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReducedFunction::Concurrence => f.write_str("concurrence"),
            ReducedFunction::Entropy => f.write_str("entropy"),
            ReducedFunction::QFamily(q) => write!(f, "q:{q}"),
            ReducedFunction::AlphaFamily(a) => write!(f, "alpha:{a}"),
        }
    }
}

impl FromStr for ReducedFunction {
    type Err = Error;

    /// `concurrence | entropy | q:<value> | alpha:<value>`
    fn from_str(s: &str) -> Result<Self> {
        let h = match s.trim() {
            "concurrence" => ReducedFunction::Concurrence,
            "entropy" => ReducedFunction::Entropy,
            other => {
                let (name, value) = other
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown reduced function `{other}`")))?;
                let v: f64 =
                    value.parse().map_err(|_| Error::InvalidParameter(alloc::format!("bad number `{value}`")))?;
                match name {
                    "q" => ReducedFunction::QFamily(v),
                    "alpha" => ReducedFunction::AlphaFamily(v),
                    _ => return Err(Error::InvalidParameter(alloc::format!("unknown reduced function `{name}`"))),
                }
            }
        };
        h.validate()?;
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Property {
    Concave,
    Subadditive,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Concave => "concave",
            Property::Subadditive => "subadditive",
        })
    }
}

/// Where the worst trial came from.
#[derive(Debug, Clone)]
pub struct SampleWitness {
    pub trial: usize,
    /// Concave: mixture weights. Subadditive: empty.
    pub weights: Vec<f64>,
    /// Concave: the mixed components. Subadditive: `ρ_AB`, `ρ_A`, `ρ_B`.
    pub matrices: Vec<DensityMatrix>,
}

#[derive(Debug, Clone)]
pub struct SampleReport {
    pub property: Property,
    pub trials: usize,
    pub passed: bool,
    /// Largest observed violation (`> 0` means the inequality failed by that
    /// much; negative values are slack).
    pub worst_margin: f64,
    pub witness: Option<SampleWitness>,
}

/// Allowed slack before a sample counts as a violation.
pub const SAMPLE_TOL: f64 = 1e-9;

/// Monte-Carlo check of concavity (random mixtures) or subadditivity
/// (marginals of random tripartite pure states).
pub fn sample_check(h: ReducedFunction, property: Property, trials: usize, seed: u64) -> Result<SampleReport> {
    h.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for trial in 0..trials {
        let (margin, w) = match property {
            Property::Concave => concave_trial(h, &mut rng)?,
            Property::Subadditive => subadditive_trial(h, &mut rng)?,
        };
        if margin > worst {
            worst = margin;
            witness = Some(SampleWitness { trial, ..w });
        }
    }
    Ok(SampleReport { property, trials, passed: worst <= SAMPLE_TOL, worst_margin: worst, witness })
}

fn random_mixed(d: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    // rank-one with some probability, otherwise a marginal of d ⊗ e
    let e = rng.random_range(1..=d);
    if e == 1 {
        let layout = SystemLayout::new([("S", d)])?;
        return Ok(DensityMatrix::from_pure(&random_pure_with(&layout, rng)));
    }
    let layout = SystemLayout::new([("S", d), ("E", e)])?;
    random_pure_with(&layout, rng).reduced_density(&[0])
}

fn concave_trial(h: ReducedFunction, rng: &mut ChaCha8Rng) -> Result<(f64, SampleWitness)> {
    let d = rng.random_range(2..=4);
    let m = rng.random_range(2..=4);
    let comps: Vec<DensityMatrix> = (0..m).map(|_| random_mixed(d, rng)).collect::<Result<_>>()?;
    let mut weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut mix = crate::linalg::CMatrix::zeros(d);
    let mut avg = 0.0;
    for (w, c) in weights.iter().zip(&comps) {
        let mut part = c.matrix().clone();
        part.scale(*w);
        mix.add_assign(&part);
        avg += w * h.evaluate(c)?;
    }
    let mixed = DensityMatrix::new(comps[0].layout().clone(), mix)?;
    let margin = avg - h.evaluate(&mixed)?;
    Ok((margin, SampleWitness { trial: 0, weights, matrices: comps }))
}

fn subadditive_trial(h: ReducedFunction, rng: &mut ChaCha8Rng) -> Result<(f64, SampleWitness)> {
    let da = rng.random_range(2..=3);
    let db = rng.random_range(2..=3);
    let de = rng.random_range(2..=4);
    let layout = SystemLayout::new([("A", da), ("B", db), ("E", de)])?;
    let psi = random_pure_with(&layout, rng);
    let ab = psi.reduced_density(&[0, 1])?;
    let a = psi.reduced_density(&[0])?;
    let b = psi.reduced_density(&[1])?;
    let margin = h.evaluate(&ab)? - h.evaluate(&a)? - h.evaluate(&b)?;
    Ok((margin, SampleWitness { trial: 0, weights: Vec::new(), matrices: alloc::vec![ab, a, b] }))
}

/// `h(ρ ⊗ σ) − h(ρ) − h(σ)`; positive means subadditivity fails on this
/// product.
pub fn product_margin(h: ReducedFunction, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(h.evaluate(&rho.kron(sigma)?)? - h.evaluate(rho)? - h.evaluate(sigma)?)
}
