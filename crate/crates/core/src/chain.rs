//! Attached skeleton chains.
//!
//! Starting from `B⁰ = B`, each iterate is factored as `Bⁱ⁻¹ = A₂ᵢ₋₁·A₂ᵢ`
//! and the factors are multiplied in swapped order to give
//! `Bⁱ = A₂ᵢ·A₂ᵢ₋₁`. The dimension drops at every singular nonzero iterate,
//! so the chain stops after at most `n` levels, either at an invertible
//! iterate (regular chain) or at the zero matrix (degenerate chain).

use std::fmt;

use thiserror::Error;

use crate::linalg::{self, Complex, LinalgError, Matrix, ToleranceWarning};

/// Nonzero eigenvalues of consecutive iterates must agree to this relative
/// level in [`verify_chain`].
pub const SPECTRAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("operator must be a non-empty square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("malformed chain: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainKind {
    /// The terminal iterate is invertible.
    Regular,
    /// The terminal iterate is the zero matrix.
    Degenerate,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::Regular => "regular",
            ChainKind::Degenerate => "degenerate",
        })
    }
}

/// One factor-and-swap step of the chain.
#[derive(Debug, Clone)]
pub struct ChainLevel {
    /// `A₂ᵢ₋₁ : Xᵢ → Xᵢ₋₁`, shape `rᵢ₋₁ × rᵢ`.
    pub a_odd: Matrix,
    /// `A₂ᵢ : Xᵢ₋₁ → Xᵢ`, shape `rᵢ × rᵢ₋₁`.
    pub a_even: Matrix,
    /// `Bⁱ = A₂ᵢ·A₂ᵢ₋₁`, shape `rᵢ × rᵢ`.
    pub b_next: Matrix,
}

#[derive(Debug, Clone)]
pub struct SkeletonChain {
    b0: Matrix,
    levels: Vec<ChainLevel>,
    kind: ChainKind,
    dims: Vec<usize>,
    tol: f64,
    warnings: Vec<(usize, ToleranceWarning)>,
}

fn zero_threshold(b0: &Matrix, tol: f64) -> f64 {
    tol * (1.0 + b0.max_norm())
}

/// Builds the attached skeleton chain of a square matrix.
///
/// An iterate counts as zero when its max-norm is at most
/// `tol·(1 + ‖B‖_max)` and as invertible when its smallest singular value
/// exceeds `tol·σ_max`. Otherwise it is factored and the chain continues.
pub fn build_chain(b: &Matrix, tol: f64) -> Result<SkeletonChain, ChainError> {
    if !b.is_square() || b.rows() == 0 {
        return Err(ChainError::NotSquare {
            rows: b.rows(),
            cols: b.cols(),
        });
    }
    b.check_finite()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LinalgError::BadTolerance(tol).into());
    }

    let zero = zero_threshold(b, tol);
    let mut levels = Vec::new();
    let mut dims = vec![b.rows()];
    let mut warnings = Vec::new();
    let mut current = b.clone();

    let kind = loop {
        if current.max_norm() <= zero {
            break ChainKind::Degenerate;
        }
        let fact = linalg::full_rank_factorize(&current, tol)?;
        if let Some(w) = fact.warning {
            warnings.push((levels.len(), w));
        }
        if fact.rank == current.rows() {
            break ChainKind::Regular;
        }
        let b_next = &fact.right * &fact.left;
        dims.push(fact.rank);
        levels.push(ChainLevel {
            a_odd: fact.left,
            a_even: fact.right,
            b_next: b_next.clone(),
        });
        current = b_next;
    };

    Ok(SkeletonChain {
        b0: b.clone(),
        levels,
        kind,
        dims,
        tol,
        warnings,
    })
}

impl SkeletonChain {
    /// Assembles a chain from explicit levels, e.g. with a different choice
    /// of skeleton factors. Only shapes are validated here; use
    /// [`verify_chain`] for the algebraic conditions. The kind is read off the
    /// terminal iterate: zero at tolerance gives `Degenerate`, anything else
    /// `Regular`.
    pub fn from_parts(b0: Matrix, levels: Vec<ChainLevel>, tol: f64) -> Result<Self, ChainError> {
        if !b0.is_square() || b0.rows() == 0 {
            return Err(ChainError::NotSquare {
                rows: b0.rows(),
                cols: b0.cols(),
            });
        }
        let mut dims = vec![b0.rows()];
        for (i, level) in levels.iter().enumerate() {
            let prev = *dims.last().unwrap();
            let r = level.b_next.rows();
            let shapes = [
                (level.a_odd.rows(), level.a_odd.cols(), prev, r),
                (level.a_even.rows(), level.a_even.cols(), r, prev),
                (level.b_next.rows(), level.b_next.cols(), r, r),
            ];
            if shapes.iter().any(|&(a, b, c, d)| (a, b) != (c, d)) {
                return Err(ChainError::Malformed(format!(
                    "level {} has inconsistent factor shapes",
                    i + 1
                )));
            }
            dims.push(r);
        }
        let terminal = levels.last().map_or(&b0, |l| &l.b_next);
        let kind = if terminal.max_norm() <= zero_threshold(&b0, tol) {
            ChainKind::Degenerate
        } else {
            ChainKind::Regular
        };
        Ok(SkeletonChain {
            b0,
            levels,
            kind,
            dims,
            tol,
            warnings: Vec::new(),
        })
    }

    pub fn b0(&self) -> &Matrix {
        &self.b0
    }

    pub fn levels(&self) -> &[ChainLevel] {
        &self.levels
    }

    /// Chain length `p`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    /// `[r₀ = n, r₁, …, r_p]`
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terminal_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Tolerance warnings raised while factoring, keyed by the index of the
    /// iterate that was factored.
    pub fn warnings(&self) -> &[(usize, ToleranceWarning)] {
        &self.warnings
    }

    /// The iterate `Bⁱ`, `i = 0..=p`.
    pub fn iterate(&self, i: usize) -> &Matrix {
        if i == 0 {
            &self.b0
        } else {
            &self.levels[i - 1].b_next
        }
    }

    /// The terminal iterate `B^p`.
    pub fn terminal(&self) -> &Matrix {
        self.iterate(self.len())
    }

    /// Partial products `Mᵢ = A₂ᵢ·…·A₂` for `i = 0..=p`, with `M₀ = I`.
    pub fn partial_projectors(&self) -> Vec<Matrix> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut m = Matrix::identity(self.b0.rows());
        out.push(m.clone());
        for level in &self.levels {
            m = &level.a_even * &m;
            out.push(m.clone());
        }
        out
    }

    /// The regularizing map `M = A₂ₚ·…·A₂ : X₀ → Xₚ` (identity when `p = 0`).
    pub fn projector(&self) -> Matrix {
        self.partial_projectors().pop().unwrap()
    }
}

/// Free-function form of [`SkeletonChain::projector`].
pub fn build_projector(chain: &SkeletonChain) -> Matrix {
    chain.projector()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheck {
    pub name: &'static str,
    /// 1-based level, or `None` for whole-chain checks.
    pub level: Option<usize>,
    pub passed: bool,
    pub residual: f64,
    pub threshold: f64,
}

impl fmt::Display for ChainCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level {
            Some(l) => write!(f, "level {l} {}: ", self.name)?,
            None => write!(f, "{}: ", self.name)?,
        }
        write!(
            f,
            "{} residual={:e} threshold={:e}",
            if self.passed { "pass" } else { "FAIL" },
            self.residual,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ChainReport {
    pub checks: Vec<ChainCheck>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ChainCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str, level: Option<usize>) -> Option<&ChainCheck> {
        self.checks
            .iter()
            .find(|c| c.name == name && c.level == level)
    }
}

fn residual_of(a: &Matrix, b: &Matrix) -> f64 {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return f64::INFINITY;
    }
    (a - b).max_norm()
}

fn product_or_inf(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    (a.cols() == b.rows()).then(|| a * b)
}

/// Largest distance in a greedy nearest-neighbour matching between the `k`
/// largest-magnitude eigenvalues of `prev` and of `next`.
///
/// With `k` equal to the number of nonzero eigenvalues this measures how far
/// the two nonzero spectra are apart; `A·C` and `C·A` share them exactly.
pub fn nonzero_spectrum_gap(prev: &Matrix, next: &Matrix, k: usize) -> Result<f64, LinalgError> {
    let top = |m: &Matrix| -> Result<Vec<Complex<f64>>, LinalgError> {
        let mut ev = linalg::eigenvalues(m)?;
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        ev.truncate(k);
        Ok(ev)
    };
    let a = top(prev)?;
    let mut b = top(next)?;
    if a.len() != b.len() {
        return Ok(f64::INFINITY);
    }
    let mut gap = 0.0f64;
    for z in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("equal lengths");
        gap = gap.max(d);
        b.swap_remove(idx);
    }
    Ok(gap)
}

/// Checks every structural and algebraic property of a chain and reports one
/// verdict per check. Never fails; problems are verdicts.
pub fn verify_chain(chain: &SkeletonChain, tol: f64) -> ChainReport {
    let mut checks = Vec::new();
    let p = chain.len();
    let zero = zero_threshold(chain.b0(), chain.tol());
    let nonzero_count = match chain.kind() {
        ChainKind::Regular => chain.terminal_dim(),
        ChainKind::Degenerate => 0,
    };

    for (idx, level) in chain.levels().iter().enumerate() {
        let l = Some(idx + 1);
        let prev = chain.iterate(idx);
        let scale = 1.0 + prev.max_norm();
        let threshold = tol * scale;

        let cond1 = product_or_inf(&level.a_odd, &level.a_even)
            .map_or(f64::INFINITY, |m| residual_of(&m, prev));
        checks.push(ChainCheck {
            name: "condition-1",
            level: l,
            passed: cond1 <= threshold,
            residual: cond1,
            threshold,
        });

        let perm = product_or_inf(&level.a_even, &level.a_odd)
            .map_or(f64::INFINITY, |m| residual_of(&m, &level.b_next));
        checks.push(ChainCheck {
            name: "permutation",
            level: l,
            passed: perm <= threshold,
            residual: perm,
            threshold,
        });

        let (r_prev, r) = (chain.dims()[idx], chain.dims()[idx + 1]);
        checks.push(ChainCheck {
            name: "rank-drop",
            level: l,
            passed: r < r_prev,
            residual: r as f64,
            threshold: r_prev as f64,
        });

        let full = |m: &Matrix| linalg::rank_of(m, chain.tol()).is_ok_and(|k| k == r);
        let full_rank = r == 0 || (full(&level.a_odd) && full(&level.a_even));
        checks.push(ChainCheck {
            name: "factor-rank",
            level: l,
            passed: full_rank,
            residual: r as f64,
            threshold: r as f64,
        });

        let spec_threshold = SPECTRAL_TOL * scale;
        let gap = nonzero_spectrum_gap(prev, &level.b_next, nonzero_count).unwrap_or(f64::INFINITY);
        checks.push(ChainCheck {
            name: "spectrum",
            level: l,
            passed: gap <= spec_threshold,
            residual: gap,
            threshold: spec_threshold,
        });
    }

    for i in 0..p {
        let it = chain.iterate(i);
        let norm = it.max_norm();
        let rank = linalg::rank_of(it, chain.tol()).unwrap_or(it.rows());
        checks.push(ChainCheck {
            name: "interior-singular-nonzero",
            level: Some(i),
            passed: norm > zero && rank < it.rows(),
            residual: norm,
            threshold: zero,
        });
    }

    let terminal = chain.terminal();
    let is_zero = terminal.max_norm() <= zero;
    let is_invertible = terminal.rows() > 0
        && linalg::rank_of(terminal, chain.tol()).is_ok_and(|k| k == terminal.rows());
    let dichotomy = match chain.kind() {
        ChainKind::Regular => is_invertible && !is_zero,
        ChainKind::Degenerate => is_zero && !is_invertible,
    };
    checks.push(ChainCheck {
        name: "terminal-dichotomy",
        level: None,
        passed: dichotomy,
        residual: terminal.max_norm(),
        threshold: zero,
    });

    ChainReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn invertible_operator_is_its_own_chain() {
        let chain = build_chain(&Matrix::diagonal(&[2.0, 3.0]), 1e-10).unwrap();
        assert_eq!(chain.len(), 0);
        assert_eq!(chain.kind(), ChainKind::Regular);
        assert_eq!(chain.dims(), &[2]);
        assert_eq!(chain.projector(), Matrix::identity(2));
        assert!(verify_chain(&chain, 1e-10).passed());
    }

    #[test]
    fn shift_matrix_gives_degenerate_chain() {
        let chain = build_chain(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), 1e-10).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.kind(), ChainKind::Degenerate);
        assert_eq!(chain.dims(), &[2, 1]);
        let level = &chain.levels()[0];
        assert!((&level.a_odd - &m(&[&[1.0], &[0.0]])).max_norm() < 1e-15);
        assert!((&level.a_even - &m(&[&[0.0, 1.0]])).max_norm() < 1e-15);
        assert!(level.b_next.max_norm() < 1e-15);
        assert!((&chain.projector() - &m(&[&[0.0, 1.0]])).max_norm() < 1e-15);

        let report = verify_chain(&chain, 1e-10);
        assert!(report.passed(), "{report:?}");
        let spec = report.find("spectrum", Some(1)).unwrap();
        assert_eq!(spec.residual, 0.0);
    }

    #[test]
    fn projection_matrix_gives_regular_chain() {
        let chain = build_chain(&m(&[&[1.0, 0.0], &[0.0, 0.0]]), 1e-10).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.kind(), ChainKind::Regular);
        assert_eq!(chain.dims(), &[2, 1]);
        assert!((chain.terminal().get(0, 0) - 1.0).abs() < 1e-15);
        assert!((&chain.projector() - &m(&[&[1.0, 0.0]])).max_norm() < 1e-15);
        assert!(verify_chain(&chain, 1e-10).passed());
    }

    #[test]
    fn zero_operator_terminates_immediately() {
        let chain = build_chain(&Matrix::zeros(3, 3), 1e-10).unwrap();
        assert_eq!(chain.len(), 0);
        assert_eq!(chain.kind(), ChainKind::Degenerate);
        assert_eq!(chain.projector(), Matrix::identity(3));
    }

    #[test]
    fn tampered_chain_fails_condition_one() {
        let chain = build_chain(&m(&[&[1.0, 0.0], &[0.0, 0.0]]), 1e-10).unwrap();
        let mut levels = chain.levels().to_vec();
        let v = levels[0].a_even.get(0, 0);
        levels[0].a_even.set(0, 0, v + 1.0);
        let tampered = SkeletonChain::from_parts(chain.b0().clone(), levels, 1e-10).unwrap();
        let report = verify_chain(&tampered, 1e-10);
        assert!(!report.passed());
        assert!(!report.find("condition-1", Some(1)).unwrap().passed);
    }

    #[test]
    fn from_parts_rejects_bad_shapes() {
        let level = ChainLevel {
            a_odd: Matrix::zeros(2, 1),
            a_even: Matrix::zeros(2, 2),
            b_next: Matrix::zeros(1, 1),
        };
        assert!(matches!(
            SkeletonChain::from_parts(Matrix::identity(2), vec![level], 1e-10),
            Err(ChainError::Malformed(_))
        ));
    }

    #[test]
    fn rejects_non_square_and_empty() {
        assert!(build_chain(&Matrix::zeros(2, 3), 1e-10).is_err());
        assert!(build_chain(&Matrix::zeros(0, 0), 1e-10).is_err());
    }

    #[test]
    fn jordan_block_of_size_three() {
        let n = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        let chain = build_chain(&n, 1e-10).unwrap();
        assert_eq!(chain.kind(), ChainKind::Degenerate);
        assert_eq!(chain.dims(), &[3, 2, 1]);
        assert!(verify_chain(&chain, 1e-10).passed());
    }
}
