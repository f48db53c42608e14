use crate::chain::{ChainKind, SkeletonChain};
use crate::linalg::{self, Matrix};
use crate::signal::{Forcing, SignalJet};

use super::{
    assemble, check_chain_matches, inf_norm, Reconstructor, RegularizedIVP, SolveError, TimeGrid,
    Trajectory,
};

/// Default bound on the relative step-doubling error estimate.
pub const DEFAULT_INTEGRATION_TOL: f64 = 1e-8;

/// Solves the regularized problem for a regular chain.
///
/// The top level `x_p` is integrated with classical fourth-order Runge–Kutta
/// at the grid step and at half the grid step; the half-step solution is
/// kept and the difference of the two (divided by 15) is the error estimate.
pub fn solve_regular(
    ivp: &RegularizedIVP,
    chain: &SkeletonChain,
) -> Result<Trajectory, SolveError> {
    check_chain_matches(&ivp.b, chain)?;
    if ivp.f.dim() != ivp.b.rows() {
        return Err(SolveError::Dimension {
            what: "forcing",
            expected: ivp.b.rows(),
            got: ivp.f.dim(),
        });
    }
    let jet = SignalJet::new(&ivp.f, chain.len())?;
    solve_regular_with(chain, &jet, &ivp.c0, &ivp.grid, ivp.tol)
}

/// [`solve_regular`] for any [`Forcing`] able to supply derivatives up to
/// order `p`.
pub fn solve_regular_with(
    chain: &SkeletonChain,
    forcing: &dyn Forcing,
    c0: &[f64],
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory, SolveError> {
    if chain.kind() != ChainKind::Regular {
        return Err(SolveError::WrongChainKind {
            expected: ChainKind::Regular,
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
    if c0.len() != chain.terminal_dim() {
        return Err(SolveError::Dimension {
            what: "c0",
            expected: chain.terminal_dim(),
            got: c0.len(),
        });
    }
    if let Some(k) = c0.iter().position(|v| !v.is_finite()) {
        return Err(linalg::LinalgError::NonFinite { row: k, col: 0 }.into());
    }

    let p = chain.len();
    let propagator = linalg::inverse(chain.terminal())?;
    let rec = Reconstructor::new(chain);
    let mp = rec.partial(p);
    let times = grid.times();

    let top = TopLevel {
        propagator: &propagator,
        projector: mp,
        forcing,
    };
    let coarse = top.integrate(&times, c0, 1)?;
    let fine = top.integrate(&times, c0, 2)?;
    let estimate = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| {
            let diff = c
                .iter()
                .zip(f)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            diff / 15.0 / (1.0 + inf_norm(f))
        })
        .fold(0.0, f64::max);
    if estimate.is_nan() || estimate > tol {
        return Err(SolveError::StepTooCoarse { estimate, tol });
    }

    let mut samples = Vec::with_capacity(times.len());
    for (&t, xp) in times.iter().zip(fine) {
        let fjet = forcing.jet(t, p)?;
        let mut derivs = Vec::with_capacity(p + 2);
        derivs.push(xp);
        for fk in fjet.iter().take(p + 1) {
            let prev = derivs.last().unwrap();
            let g = mp.mul_vec(fk);
            let sum: Vec<f64> = prev.iter().zip(&g).map(|(a, b)| a + b).collect();
            derivs.push(propagator.mul_vec(&sum));
        }
        let f0 = fjet[0].clone();
        samples.push((rec.rebuild(derivs, &fjet), f0));
    }
    let out = assemble(chain.b0(), &times, samples.into_iter(), p);

    let m = chain.projector();
    let mx0 = m.mul_vec(&out.states[0]);
    let defect = mx0
        .iter()
        .zip(c0)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    if defect > 1e-6 * (1.0 + inf_norm(&out.states[0])) {
        return Err(SolveError::HyperplaneDefect { defect });
    }

    Ok(Trajectory {
        times,
        states: out.states,
        derivatives: Some(out.derivatives),
        level_states: (p > 0).then_some(out.levels),
        residual_max: out.residual_max,
        hyperplane_defect: Some(defect),
        error_estimate: Some(estimate),
    })
}

/// `x_p′ = (Bᵖ)⁻¹·(x_p + M·f(t))`
struct TopLevel<'a> {
    propagator: &'a Matrix,
    projector: &'a Matrix,
    forcing: &'a dyn Forcing,
}

impl TopLevel<'_> {
    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, SolveError> {
        let f = self.forcing.jet(t, 0)?.swap_remove(0);
        let g = self.projector.mul_vec(&f);
        let sum: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + b).collect();
        Ok(self.propagator.mul_vec(&sum))
    }

    fn rk4_step(&self, t: f64, h: f64, y: &[f64]) -> Result<Vec<f64>, SolveError> {
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        let k1 = self.rhs(t, y)?;
        let k2 = self.rhs(t + h / 2.0, &axpy(y, h / 2.0, &k1))?;
        let k3 = self.rhs(t + h / 2.0, &axpy(y, h / 2.0, &k2))?;
        let k4 = self.rhs(t + h, &axpy(y, h, &k3))?;
        Ok((0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    /// Values on `times`, taking `substeps` equal RK4 steps per interval.
    fn integrate(
        &self,
        times: &[f64],
        y0: &[f64],
        substeps: usize,
    ) -> Result<Vec<Vec<f64>>, SolveError> {
        let mut out = Vec::with_capacity(times.len());
        let mut y = y0.to_vec();
        out.push(y.clone());
        for w in times.windows(2) {
            let h = (w[1] - w[0]) / substeps as f64;
            for s in 0..substeps {
                y = self.rk4_step(w[0] + s as f64 * h, h, &y)?;
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}
