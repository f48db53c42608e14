use crate::chain::{ChainKind, SkeletonChain};
use crate::linalg::{Matrix, DEFAULT_RANK_TOL};
use crate::signal::{Forcing, Signal, SignalJet};

use super::{
    assemble, check_chain_matches, inf_norm, DegenerateProblem, Reconstructor, SolveError,
    TimeGrid, Trajectory,
};

/// Closed-form solution for a degenerate chain: `x_p = −M·f`, then the
/// level-by-level reconstruction down to `x₀`.
pub fn solve_degenerate(
    prob: &DegenerateProblem,
    chain: &SkeletonChain,
) -> Result<Trajectory, SolveError> {
    check_chain_matches(&prob.b, chain)?;
    if prob.f.dim() != prob.b.rows() {
        return Err(SolveError::Dimension {
            what: "forcing",
            expected: prob.b.rows(),
            got: prob.f.dim(),
        });
    }
    let jet = SignalJet::new(&prob.f, chain.len() + 1)?;
    solve_degenerate_with(chain, &jet, &prob.grid)
}

/// [`solve_degenerate`] for any [`Forcing`] able to supply derivatives up to
/// order `p + 1`.
pub fn solve_degenerate_with(
    chain: &SkeletonChain,
    forcing: &dyn Forcing,
    grid: &TimeGrid,
) -> Result<Trajectory, SolveError> {
    if chain.kind() != ChainKind::Degenerate {
        return Err(SolveError::WrongChainKind {
            expected: ChainKind::Degenerate,
            got: chain.kind(),
        });
    }
    let n = chain.b0().rows();
    if forcing.dim() != n {
        return Err(SolveError::Dimension {
            what: "forcing",
            expected: n,
            got: forcing.dim(),
        });
    }
    let p = chain.len();
    let rec = Reconstructor::new(chain);
    let mp = rec.partial(p);
    let times = grid.times();

    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        let fjet = forcing.jet(t, p + 1)?;
        let top: Vec<Vec<f64>> = fjet
            .iter()
            .map(|fk| mp.mul_vec(fk).into_iter().map(|v| -v).collect())
            .collect();
        let f0 = fjet[0].clone();
        samples.push((rec.rebuild(top, &fjet[..=p]), f0));
    }
    let out = assemble(chain.b0(), &times, samples.into_iter(), p);

    Ok(Trajectory {
        times,
        states: out.states,
        derivatives: Some(out.derivatives),
        level_states: (p > 0).then_some(out.levels),
        residual_max: out.residual_max,
        hyperplane_defect: None,
        error_estimate: None,
    })
}

/// Smallest `k ≤ n` with `Bᵏ = 0` at tolerance, if any.
pub fn nilpotency_index(b: &Matrix, tol: f64) -> Option<usize> {
    if !b.is_square() {
        return None;
    }
    let scale = 1.0 + b.max_norm();
    let mut power = Matrix::identity(b.rows());
    for k in 1..=b.rows() {
        power = &power * b;
        if power.max_norm() <= tol * scale.powi(k as i32) {
            return Some(k);
        }
    }
    None
}

/// Symbolic iteration `u₀ = 0`, `uₙ = −f + B·u′ₙ₋₁` for `n = 1..=p`.
///
/// Requires `Bᵖ = 0`; `u_p` then solves the equation exactly. The result is
/// checked against the unrolled form `−Σ_{k<p} Bᵏ·f^{(k)}` on the grid.
pub fn solve_nilpotent_iteration(
    b: &Matrix,
    f: &Signal,
    p: usize,
    grid: &TimeGrid,
) -> Result<Trajectory, SolveError> {
    if !b.is_square() {
        return Err(SolveError::Dimension {
            what: "operator columns",
            expected: b.rows(),
            got: b.cols(),
        });
    }
    b.check_finite()?;
    if f.dim() != b.rows() {
        return Err(SolveError::Dimension {
            what: "forcing",
            expected: b.rows(),
            got: f.dim(),
        });
    }
    let bp = b.pow(p);
    let scale = (1.0 + b.max_norm()).powi(p as i32);
    if p == 0 || bp.max_norm() > DEFAULT_RANK_TOL * scale {
        return Err(SolveError::NotNilpotent {
            power: p,
            norm: bp.max_norm(),
        });
    }
    if p > f.order_cap() {
        return Err(crate::signal::SignalError::OrderCapExceeded {
            order: p,
            cap: f.order_cap(),
        }
        .into());
    }

    let minus_f = f.scale(-1.0);
    let mut u = Signal::zero(b.rows());
    for _ in 0..p {
        u = minus_f.add(&u.differentiate().apply(b));
    }
    let du = u.differentiate();

    let times = grid.times();
    let unrolled: Vec<Signal> = {
        let derivs = f.derivatives(p.saturating_sub(1))?;
        let mut bk = Matrix::identity(b.rows());
        let mut terms = Vec::with_capacity(p);
        for d in derivs {
            terms.push(d.apply(&bk).scale(-1.0));
            bk = &bk * b;
        }
        terms
    };

    let mut states = Vec::with_capacity(times.len());
    let mut derivatives = Vec::with_capacity(times.len());
    let mut residual_max = 0.0f64;
    for &t in &times {
        let x = u.value(t);
        let mut closed = vec![0.0; b.rows()];
        for s in &unrolled {
            for (c, v) in closed.iter_mut().zip(s.value(t)) {
                *c += v;
            }
        }
        let gap = x
            .iter()
            .zip(&closed)
            .fold(0.0f64, |acc, (a, c)| acc.max((a - c).abs()));
        if gap > 1e-9 * (1.0 + inf_norm(&x)) {
            return Err(SolveError::VerificationFailed(format!(
                "iterate differs from the unrolled sum by {gap:e} at t = {t}"
            )));
        }
        let dx = du.value(t);
        let fx = f.value(t);
        let bdx = b.mul_vec(&dx);
        for i in 0..x.len() {
            residual_max = residual_max.max((bdx[i] - x[i] - fx[i]).abs());
        }
        states.push(x);
        derivatives.push(dx);
    }

    Ok(Trajectory {
        times,
        states,
        derivatives: Some(derivatives),
        level_states: None,
        residual_max,
        hyperplane_defect: None,
        error_estimate: None,
    })
}
