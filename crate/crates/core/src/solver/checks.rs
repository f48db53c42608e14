use std::fmt;

use crate::chain::{ChainKind, SkeletonChain};
use crate::linalg::{self, Complex, LinalgError, Matrix, DEFAULT_RANK_TOL};
use crate::signal::Signal;

use super::SolveError;

/// Eigenvalues with `|Re λ| ≤ margin` make the stability verdict
/// indeterminate.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;

/// Orthonormal basis of `ker Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceBasis {
    pub vectors: Vec<Vec<f64>>,
}

impl NullspaceBasis {
    /// For square `b`: left singular vectors whose singular values fall at or below
    /// `tol·σ_max` (all of them when `b = 0`).
    pub fn of_adjoint(b: &Matrix, tol: f64) -> Result<Self, LinalgError> {
        let dec = linalg::svd(b)?;
        let sigma_max = dec.singular_values.first().copied().unwrap_or(0.0);
        let cutoff = tol * sigma_max;
        let vectors: Vec<Vec<f64>> = dec
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| sigma_max == 0.0 || s <= cutoff)
            .map(|(j, _)| (0..b.rows()).map(|i| dec.u.get(i, j)).collect())
            .collect();
        Ok(NullspaceBasis { vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub verdict: Consistency,
    /// `max_ψ |⟨x₀ + f(0), ψ⟩|`, zero when the null space is trivial.
    pub defect: f64,
    pub basis: NullspaceBasis,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.verdict == Consistency::Consistent
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.verdict, self.basis.dim()) {
            (Consistency::Consistent, 0) => write!(f, "consistent (trivial: ker B* = 0)"),
            (Consistency::Consistent, _) => write!(f, "consistent defect={:?}", self.defect),
            (Consistency::Inconsistent, _) => write!(f, "inconsistent defect={:?}", self.defect),
        }
    }
}

/// Classical solvability test: `x₀ + f(0)` must be orthogonal to `ker Bᵀ`.
pub fn check_classical_consistency(
    b: &Matrix,
    x0: &[f64],
    f: &Signal,
    tol: f64,
) -> Result<ConsistencyReport, SolveError> {
    b.check_finite()?;
    if !b.is_square() {
        return Err(SolveError::Dimension {
            what: "operator columns",
            expected: b.rows(),
            got: b.cols(),
        });
    }
    if x0.len() != b.rows() {
        return Err(SolveError::Dimension {
            what: "x0",
            expected: b.rows(),
            got: x0.len(),
        });
    }
    if f.dim() != b.rows() {
        return Err(SolveError::Dimension {
            what: "forcing",
            expected: b.rows(),
            got: f.dim(),
        });
    }
    if let Some(k) = x0.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite { row: k, col: 0 }.into());
    }

    let basis = NullspaceBasis::of_adjoint(b, DEFAULT_RANK_TOL)?;
    let v: Vec<f64> = x0.iter().zip(f.value(0.0)).map(|(a, b)| a + b).collect();
    let defect = basis
        .vectors
        .iter()
        .map(|psi| psi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let verdict = if defect <= tol {
        Consistency::Consistent
    } else {
        Consistency::Inconsistent
    };
    Ok(ConsistencyReport {
        verdict,
        defect,
        basis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Indeterminate,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Stability,
    /// Eigenvalues of the terminal iterate `Bᵖ`.
    pub spectrum: Vec<Complex<f64>>,
    /// `max Re λ` over the spectrum of `Bᵖ`.
    pub abscissa: f64,
    /// `max Re(1/λ)`: the decay rate of the reduced flow `x_p′ = (Bᵖ)⁻¹x_p`.
    pub propagation_abscissa: f64,
}

pub fn check_stability(chain: &SkeletonChain) -> Result<StabilityReport, SolveError> {
    check_stability_with_margin(chain, DEFAULT_STABILITY_MARGIN)
}

/// Stable iff every eigenvalue of `Bᵖ` has real part below `−margin`;
/// unstable if any exceeds `+margin`. `Re λ < 0 ⇔ Re(1/λ) < 0`, so the verdict
/// applies equally to the propagation matrix `(Bᵖ)⁻¹`.
pub fn check_stability_with_margin(
    chain: &SkeletonChain,
    margin: f64,
) -> Result<StabilityReport, SolveError> {
    if chain.kind() != ChainKind::Regular {
        return Err(SolveError::WrongChainKind {
            expected: ChainKind::Regular,
            got: chain.kind(),
        });
    }
    let spectrum = linalg::eigenvalues(chain.terminal())?;
    let abscissa = linalg::spectral_abscissa(&spectrum);
    let propagation_abscissa = spectrum
        .iter()
        .map(|z| z.inv().re)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if spectrum.iter().any(|z| z.re > margin) {
        Stability::Unstable
    } else if spectrum.iter().all(|z| z.re < -margin) {
        Stability::Stable
    } else {
        Stability::Indeterminate
    };
    Ok(StabilityReport {
        verdict,
        spectrum,
        abscissa,
        propagation_abscissa,
    })
}
