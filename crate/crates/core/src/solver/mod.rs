//! Solvers for `B·x′ = x + f(t)` with a singular `B`.
//!
//! A regular chain reduces the equation to the classical problem
//! `Bᵖ·x_p′ = x_p + M·f` on `X_p`, which is integrated numerically; a
//! degenerate chain gives the solution in closed form. In both cases the
//! full state is rebuilt level by level,
//!
//! ```text
//! xᵢ = −Mᵢ·f + A₂ᵢ₊₁·x′ᵢ₊₁,   i = p−1, …, 0,   Mᵢ = A₂ᵢ·…·A₂,
//! ```
//!
//! using exact derivatives of the top level, never differences of samples.

mod checks;
mod degenerate;
mod regular;

use thiserror::Error;

use crate::chain::{ChainError, ChainKind, SkeletonChain};
use crate::linalg::{LinalgError, Matrix};
use crate::signal::{Signal, SignalError};

pub use checks::{
    check_classical_consistency, check_stability, check_stability_with_margin, Consistency,
    ConsistencyReport, NullspaceBasis, Stability, StabilityReport, DEFAULT_STABILITY_MARGIN,
};
pub use degenerate::{
    nilpotency_index, solve_degenerate, solve_degenerate_with, solve_nilpotent_iteration,
};
pub use regular::{solve_regular, solve_regular_with, DEFAULT_INTEGRATION_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("chain does not belong to this problem: {0}")]
    ChainMismatch(String),
    #[error("chain is {got}, this solver needs a {expected} chain")]
    WrongChainKind { expected: ChainKind, got: ChainKind },
    #[error("{what} has dimension {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("integration error estimate {estimate:e} exceeds tolerance {tol:e}; reduce the step")]
    StepTooCoarse { estimate: f64, tol: f64 },
    #[error("B^{power} is not zero at tolerance (max entry {norm:e})")]
    NotNilpotent { power: usize, norm: f64 },
    #[error("initial hyperplane condition violated: |M x(0) - c0| = {defect:e}")]
    HyperplaneDefect { defect: f64 },
    #[error("post-verification failed: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Uniform sample grid on `[0, t_end]`; the last interval is shortened when
/// `step` does not divide `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, step: f64) -> Result<Self, SolveError> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(SolveError::InvalidGrid(format!(
                "t_end must be positive, got {t_end}"
            )));
        }
        if !(step.is_finite() && step > 0.0 && step <= t_end) {
            return Err(SolveError::InvalidGrid(format!(
                "step must lie in (0, t_end], got {step}"
            )));
        }
        Ok(TimeGrid { t_end, step })
    }

    pub fn times(&self) -> Vec<f64> {
        let ratio = self.t_end / self.step;
        let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let mut times: Vec<f64> = (0..n).map(|k| k as f64 * self.step).collect();
        times.push(self.t_end);
        times
    }
}

/// Inputs of the regularized problem `B·x′ = x + f`, `M·x(0) = c₀`.
#[derive(Debug, Clone)]
pub struct RegularizedIVP {
    pub b: Matrix,
    pub f: Signal,
    /// Initial data on `X_p`, in the coordinates of the chain's `M`.
    pub c0: Vec<f64>,
    pub grid: TimeGrid,
    /// Integration tolerance for the top-level step-doubling estimate.
    pub tol: f64,
}

impl RegularizedIVP {
    pub fn new(b: Matrix, f: Signal, c0: Vec<f64>, grid: TimeGrid) -> Self {
        RegularizedIVP {
            b,
            f,
            c0,
            grid,
            tol: DEFAULT_INTEGRATION_TOL,
        }
    }
}

/// Inputs of `B·x′ = x + f` with nilpotent `B`; no initial data is needed.
#[derive(Debug, Clone)]
pub struct DegenerateProblem {
    pub b: Matrix,
    pub f: Signal,
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `x(tₖ)`
    pub states: Vec<Vec<f64>>,
    /// `x′(tₖ)` from the analytic representation, when available.
    pub derivatives: Option<Vec<Vec<f64>>>,
    /// `level_states[i-1][k] = xᵢ(tₖ)` for `i = 1..=p`.
    pub level_states: Option<Vec<Vec<Vec<f64>>>>,
    /// `max_k ‖B·x′(tₖ) − x(tₖ) − f(tₖ)‖∞`
    pub residual_max: f64,
    /// `‖M·x(0) − c₀‖∞` for regularized solves.
    pub hyperplane_defect: Option<f64>,
    /// Relative step-doubling error estimate of the top-level integration.
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn check_chain_matches(b: &Matrix, chain: &SkeletonChain) -> Result<(), SolveError> {
    if chain.b0() != b {
        return Err(SolveError::ChainMismatch(
            "chain was built from a different operator".into(),
        ));
    }
    Ok(())
}

fn residual_at(b: &Matrix, x: &[f64], dx: &[f64], f: &[f64]) -> f64 {
    b.mul_vec(dx)
        .iter()
        .zip(x)
        .zip(f)
        .fold(0.0, |acc, ((bd, xi), fi)| acc.max((bd - xi - fi).abs()))
}

/// `max_k ‖B·x′(tₖ) − x(tₖ) − f(tₖ)‖∞` over the trajectory.
///
/// Uses the trajectory's analytic derivatives when present; otherwise falls
/// back to second-order differences of the samples.
pub fn residual_norm(b: &Matrix, traj: &Trajectory, f: &Signal) -> f64 {
    let n = traj.len();
    let mut worst = 0.0f64;
    for k in 0..n {
        let fk = f.value(traj.times[k]);
        let dx = match &traj.derivatives {
            Some(d) => d[k].clone(),
            None => finite_difference(traj, k),
        };
        worst = worst.max(residual_at(b, &traj.states[k], &dx, &fk));
    }
    worst
}

fn finite_difference(traj: &Trajectory, k: usize) -> Vec<f64> {
    let n = traj.len();
    if n < 2 {
        return vec![0.0; traj.dim()];
    }
    let (i, j) = match k {
        0 => (0, 1),
        k if k == n - 1 => (n - 2, n - 1),
        k => (k - 1, k + 1),
    };
    let h = traj.times[j] - traj.times[i];
    traj.states[j]
        .iter()
        .zip(&traj.states[i])
        .map(|(a, b)| (a - b) / h)
        .collect()
}

/// Rebuilds the full state from the top level of a chain.
pub(crate) struct Reconstructor<'a> {
    chain: &'a SkeletonChain,
    partial: Vec<Matrix>,
}

pub(crate) struct Reconstructed {
    pub x: Vec<f64>,
    pub dx: Vec<f64>,
    /// `x₁ … x_p`
    pub levels: Vec<Vec<f64>>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(chain: &'a SkeletonChain) -> Self {
        Reconstructor {
            chain,
            partial: chain.partial_projectors(),
        }
    }

    /// `Mᵢ` for `i = 0..=p`.
    pub fn partial(&self, i: usize) -> &Matrix {
        &self.partial[i]
    }

    /// `top[k] = x_p^{(k)}` for `k = 0..=p+1`, `fjet[k] = f^{(k)}` for
    /// `k = 0..=p`.
    pub fn rebuild(&self, top: Vec<Vec<f64>>, fjet: &[Vec<f64>]) -> Reconstructed {
        let p = self.chain.len();
        debug_assert_eq!(top.len(), p + 2);
        let mut levels = vec![Vec::new(); p];
        if p > 0 {
            levels[p - 1] = top[0].clone();
        }
        let mut d = top;
        for i in (0..p).rev() {
            let a_odd = &self.chain.levels()[i].a_odd;
            let mi = &self.partial[i];
            d = (0..=i + 1)
                .map(|k| {
                    let up = a_odd.mul_vec(&d[k + 1]);
                    mi.mul_vec(&fjet[k])
                        .iter()
                        .zip(&up)
                        .map(|(g, u)| u - g)
                        .collect()
                })
                .collect();
            if i > 0 {
                levels[i - 1] = d[0].clone();
            }
        }
        let mut it = d.into_iter();
        let x = it.next().unwrap();
        let dx = it.next().unwrap();
        Reconstructed { x, dx, levels }
    }
}

pub(crate) struct Assembled {
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    pub levels: Vec<Vec<Vec<f64>>>,
    pub residual_max: f64,
}

/// Collects per-sample reconstructions into trajectory columns and the
/// residual of the original equation.
pub(crate) fn assemble(
    b: &Matrix,
    times: &[f64],
    samples: impl Iterator<Item = (Reconstructed, Vec<f64>)>,
    p: usize,
) -> Assembled {
    let mut out = Assembled {
        states: Vec::with_capacity(times.len()),
        derivatives: Vec::with_capacity(times.len()),
        levels: vec![Vec::with_capacity(times.len()); p],
        residual_max: 0.0,
    };
    for (r, f0) in samples {
        out.residual_max = out.residual_max.max(residual_at(b, &r.x, &r.dx, &f0));
        for (slot, lv) in out.levels.iter_mut().zip(r.levels) {
            slot.push(lv);
        }
        out.states.push(r.x);
        out.derivatives.push(r.dx);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = TimeGrid::new(1.0, 0.25).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = TimeGrid::new(1.0, 0.3).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        let g = TimeGrid::new(2.0, 1e-3).unwrap();
        assert_eq!(g.times().len(), 2001);
        assert!(TimeGrid::new(1.0, 2.0).is_err());
        assert!(TimeGrid::new(0.0, 0.1).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
    }

    #[test]
    fn residual_flags_corrupted_state() {
        let b = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let f = crate::signal::parse_signal("t ; t^2", 2).unwrap();
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let chain = crate::chain::build_chain(&b, 1e-10).unwrap();
        let prob = DegenerateProblem {
            b: b.clone(),
            f: f.clone(),
            grid,
        };
        let mut traj = solve_degenerate(&prob, &chain).unwrap();
        assert!(residual_norm(&b, &traj, &f) <= 1e-12);
        traj.states[1] = vec![0.0, 0.0];
        assert!(residual_norm(&b, &traj, &f) > 0.1);
    }

    #[test]
    fn finite_difference_fallback() {
        let b = Matrix::from_rows(&[[1.0]]).unwrap();
        let f = Signal::zero(1);
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let traj = Trajectory {
            states: times.iter().map(|t| vec![t.exp()]).collect(),
            times,
            derivatives: None,
            level_states: None,
            residual_max: 0.0,
            hyperplane_defect: None,
            error_estimate: None,
        };
        // one-sided differences at the ends are first order
        assert!(residual_norm(&b, &traj, &f) < 2e-3);
    }
}
