//! Test problems with known solutions.
//!
//! `B = S·diag(C, N)·S⁻¹` with `C` invertible and `N` nilpotent decouples
//! `B·x′ = x + f` into `C·y′ = y + g₁` and `N·z′ = z + g₂`, where
//! `(g₁, g₂) = S⁻¹f` and `x = S·(y, z)`. The nilpotent block has the finite
//! solution `z = −Σ Nᵏ·g₂^{(k)}`. The core block is solved in closed form by
//! modal decomposition when `C` has real, well separated eigenvalues, and by
//! Richardson-extrapolated RK4 at step `1e-4` otherwise.
//!
//! None of this goes through the skeleton chain, so it is an independent
//! reference for the chain-based solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, Complex, LinalgError, Matrix};
use crate::signal::{Signal, SignalTerm, Trig};

/// Largest problem size accepted by [`random_spec`].
pub const MAX_SYNTH_DIM: usize = 12;

/// Step of the reference integrator used when `C` is not diagonalizable.
pub const REFERENCE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    SpecInvalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Invertible `c×c` block.
    pub core: Matrix,
    /// Nilpotent `q×q` block.
    pub nilpotent: Matrix,
    /// Invertible `(c+q)×(c+q)` similarity.
    pub similarity: Matrix,
    pub f: Signal,
    /// `y(0)` for the core block.
    pub c0_core: Vec<f64>,
}

impl SynthSpec {
    pub fn core_dim(&self) -> usize {
        self.core.rows()
    }

    pub fn nilpotent_dim(&self) -> usize {
        self.nilpotent.rows()
    }

    pub fn dim(&self) -> usize {
        self.similarity.rows()
    }
}

/// A synthesized operator together with its reference solution.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub b: Matrix,
    pub analytic: AnalyticSolution,
}

#[derive(Debug, Clone)]
struct Mode {
    rate: f64,
    homogeneous: f64,
    forcing: Vec<SignalTerm>,
}

#[derive(Debug, Clone)]
enum CoreSolution {
    Empty,
    Modal {
        eigvecs: Matrix,
        modes: Vec<Mode>,
    },
    Reference {
        propagator: Matrix,
        forcing: Signal,
        y0: Vec<f64>,
    },
}

/// Reference solution `x(t)` of a synthesized problem.
#[derive(Debug, Clone)]
pub struct AnalyticSolution {
    similarity: Matrix,
    core: CoreSolution,
    nilpotent: Signal,
}

fn spec_error(msg: impl Into<String>) -> SynthError {
    SynthError::SpecInvalid(msg.into())
}

/// Builds `B` and the reference solution.
pub fn synthesize(spec: &SynthSpec) -> Result<Synthesized, SynthError> {
    let c = spec.core_dim();
    let q = spec.nilpotent_dim();
    let n = c + q;
    if !spec.core.is_square() || !spec.nilpotent.is_square() {
        return Err(spec_error("core and nilpotent blocks must be square"));
    }
    if n == 0 {
        return Err(spec_error("problem dimension must be positive"));
    }
    if (spec.similarity.rows(), spec.similarity.cols()) != (n, n) {
        return Err(spec_error(format!("similarity must be {n}x{n}")));
    }
    if spec.f.dim() != n {
        return Err(spec_error(format!("forcing must have dimension {n}")));
    }
    if spec.c0_core.len() != c {
        return Err(spec_error(format!("c0_core must have dimension {c}")));
    }
    if c > 0 && linalg::rank_of(&spec.core, linalg::DEFAULT_RANK_TOL)? < c {
        return Err(spec_error("core block is singular"));
    }
    if q > 0 {
        let scale = (1.0 + spec.nilpotent.max_norm()).powi(q as i32);
        if spec.nilpotent.pow(q).max_norm() > linalg::DEFAULT_RANK_TOL * scale {
            return Err(spec_error("nilpotent block does not satisfy N^q = 0"));
        }
    }
    let s_inv =
        linalg::inverse(&spec.similarity).map_err(|_| spec_error("similarity is singular"))?;

    let b = &(&spec.similarity * &Matrix::block_diag(&spec.core, &spec.nilpotent)) * &s_inv;
    let g = spec.f.apply(&s_inv);
    let g1 = Signal::new(g.components()[..c].to_vec());
    let g2 = Signal::new(g.components()[c..].to_vec());

    let mut nilpotent = Signal::zero(q);
    let mut nk = Matrix::identity(q);
    let mut gk = g2;
    for _ in 0..q {
        nilpotent = nilpotent.add(&gk.apply(&nk).scale(-1.0));
        nk = &nk * &spec.nilpotent;
        gk = gk.differentiate();
    }

    let core = if c == 0 {
        CoreSolution::Empty
    } else {
        match modal_decomposition(&spec.core)? {
            Some((eigvecs, eigvals)) => {
                let p_inv = linalg::inverse(&eigvecs)?;
                let d_inv = Matrix::diagonal(&eigvals.iter().map(|d| 1.0 / d).collect::<Vec<_>>());
                let h = g1.apply(&(&d_inv * &p_inv));
                let w0 = p_inv.mul_vec(&spec.c0_core);
                let modes = eigvals
                    .iter()
                    .zip(w0)
                    .zip(h.components())
                    .map(|((d, w), terms)| {
                        let rate = 1.0 / d;
                        let particular0: f64 = terms.iter().map(|t| particular(t, rate, 0.0)).sum();
                        Mode {
                            rate,
                            homogeneous: w - particular0,
                            forcing: terms.clone(),
                        }
                    })
                    .collect();
                CoreSolution::Modal { eigvecs, modes }
            }
            None => CoreSolution::Reference {
                propagator: linalg::inverse(&spec.core)?,
                forcing: g1,
                y0: spec.c0_core.clone(),
            },
        }
    };

    Ok(Synthesized {
        b,
        analytic: AnalyticSolution {
            similarity: spec.similarity.clone(),
            core,
            nilpotent,
        },
    })
}

/// Eigenvectors and eigenvalues of `c` when all eigenvalues are real and
/// well separated and the eigenvector matrix is reasonably conditioned.
fn modal_decomposition(c: &Matrix) -> Result<Option<(Matrix, Vec<f64>)>, SynthError> {
    let n = c.rows();
    let spectrum = linalg::eigenvalues(c)?;
    let scale = 1.0 + spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if spectrum.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return Ok(None);
    }
    let mut eig: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    eig.sort_by(f64::total_cmp);
    if eig.windows(2).any(|w| w[1] - w[0] <= 1e-6 * scale) {
        return Ok(None);
    }
    let mut vecs = Matrix::zeros(n, n);
    for (j, &lambda) in eig.iter().enumerate() {
        let shifted = c - &Matrix::identity(n).scale(lambda);
        let dec = linalg::svd(&shifted)?;
        for i in 0..n {
            vecs.set(i, j, dec.v_t.get(n - 1, i));
        }
    }
    let sv = linalg::svd(&vecs)?.singular_values;
    if sv[n - 1] <= 1e-8 * sv[0] {
        return Ok(None);
    }
    let check = &(c * &vecs) - &(&vecs * &Matrix::diagonal(&eig));
    if check.max_norm() > 1e-10 * scale {
        return Ok(None);
    }
    Ok(Some((vecs, eig)))
}

/// Particular solution of `w′ = rate·w + term` evaluated at `t`.
///
/// The term is written as the real or imaginary part of
/// `coef·tᵏ·e^{s·t}`, `s = a + iω`; the particular solution is then
/// `e^{s·t}·Σⱼ (−1)ʲ·k!/(k−j)!·t^{k−j}/(s−rate)^{j+1}`, or
/// `e^{s·t}·t^{k+1}/(k+1)` at resonance.
fn particular(term: &SignalTerm, rate: f64, t: f64) -> f64 {
    let (omega, take_imag) = match term.trig {
        Trig::None => (0.0, false),
        Trig::Cos(w) => (w, false),
        Trig::Sin(w) => (w, true),
    };
    let s = Complex::new(term.exp_rate, omega);
    let sigma = s - rate;
    let k = term.power as i32;
    let q = if sigma.norm() < 1e-12 {
        Complex::new(t.powi(k + 1) / (k + 1) as f64, 0.0)
    } else {
        let mut acc = Complex::new(0.0, 0.0);
        let mut falling = 1.0;
        let mut denom = sigma;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += Complex::new(sign * falling * t.powi(k - j), 0.0) / denom;
            falling *= (k - j) as f64;
            denom *= sigma;
        }
        acc
    };
    let v = (s * t).exp() * q * term.coef;
    if take_imag {
        v.im
    } else {
        v.re
    }
}

impl AnalyticSolution {
    /// Whether the core block is solved in closed form rather than by
    /// reference integration.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.core, CoreSolution::Reference { .. })
    }

    pub fn dim(&self) -> usize {
        self.similarity.rows()
    }

    fn combine(&self, y: &[f64], t: f64) -> Vec<f64> {
        let mut w = y.to_vec();
        w.extend(self.nilpotent.value(t));
        self.similarity.mul_vec(&w)
    }

    /// `x(t)`
    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.sample(&[t]).pop().unwrap()
    }

    /// `x` at each of the non-decreasing, non-negative `times`.
    pub fn sample(&self, times: &[f64]) -> Vec<Vec<f64>> {
        match &self.core {
            CoreSolution::Empty => times.iter().map(|&t| self.combine(&[], t)).collect(),
            CoreSolution::Modal { eigvecs, modes } => times
                .iter()
                .map(|&t| {
                    let w: Vec<f64> = modes
                        .iter()
                        .map(|m| {
                            m.homogeneous * (m.rate * t).exp()
                                + m.forcing
                                    .iter()
                                    .map(|term| particular(term, m.rate, t))
                                    .sum::<f64>()
                        })
                        .collect();
                    self.combine(&eigvecs.mul_vec(&w), t)
                })
                .collect(),
            CoreSolution::Reference {
                propagator,
                forcing,
                y0,
            } => {
                let rhs = |t: f64, y: &[f64]| -> Vec<f64> {
                    let g = forcing.value(t);
                    let s: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + b).collect();
                    propagator.mul_vec(&s)
                };
                let mut coarse = y0.clone();
                let mut fine = y0.clone();
                let mut t_prev = 0.0;
                let mut out = Vec::with_capacity(times.len());
                for &t in times {
                    let span = t - t_prev;
                    if span > 0.0 {
                        let steps = (span / REFERENCE_STEP).ceil() as usize;
                        let h = span / steps as f64;
                        for k in 0..steps {
                            let tk = t_prev + k as f64 * h;
                            coarse = rk4(&rhs, tk, h, &coarse);
                            fine = rk4(&rhs, tk, h / 2.0, &fine);
                            fine = rk4(&rhs, tk + h / 2.0, h / 2.0, &fine);
                        }
                    }
                    t_prev = t;
                    let y: Vec<f64> = fine
                        .iter()
                        .zip(&coarse)
                        .map(|(f, c)| (16.0 * f - c) / 15.0)
                        .collect();
                    out.push(self.combine(&y, t));
                }
                out
            }
        }
    }
}

fn rk4(rhs: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, h: f64, y: &[f64]) -> Vec<f64> {
    let step = |base: &[f64], s: f64, k: &[f64]| -> Vec<f64> {
        base.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let k1 = rhs(t, y);
    let k2 = rhs(t + h / 2.0, &step(y, h / 2.0, &k1));
    let k3 = rhs(t + h / 2.0, &step(y, h / 2.0, &k2));
    let k4 = rhs(t + h, &step(y, h, &k3));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Where the eigenvalues of the core block are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumPlacement {
    /// Eigenvalues `±[0.5, 2]` with random signs.
    #[default]
    Mixed,
    /// Eigenvalues in `[−0.8, −0.25]`.
    Stable,
    /// As `Mixed`, with at least one positive eigenvalue.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SynthOptions {
    /// Fixed core dimension; random in `0..=n` when `None`.
    pub core_dim: Option<usize>,
    pub spectrum: SpectrumPlacement,
    /// Use `f = 0` when set.
    pub homogeneous: bool,
}

/// Deterministic random spec of size `n` with default options.
pub fn random_spec(seed: u64, n: usize) -> Result<SynthSpec, SynthError> {
    random_spec_with(seed, n, &SynthOptions::default())
}

pub fn random_spec_with(seed: u64, n: usize, opts: &SynthOptions) -> Result<SynthSpec, SynthError> {
    if n == 0 || n > MAX_SYNTH_DIM {
        return Err(spec_error(format!(
            "size must be in 1..={MAX_SYNTH_DIM}, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = match opts.core_dim {
        Some(c) if c > n => return Err(spec_error(format!("core dimension {c} exceeds {n}"))),
        Some(c) => c,
        None => n - rng.random_range(0..=n),
    };
    let q = n - c;

    let eig: Vec<f64> = (0..c)
        .map(|j| match opts.spectrum {
            SpectrumPlacement::Stable => -rng.random_range(0.25..0.8),
            SpectrumPlacement::Unstable if j == 0 => rng.random_range(0.5..2.0),
            _ => {
                let mag = rng.random_range(0.5..2.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect();
    let core = if c == 0 {
        Matrix::zeros(0, 0)
    } else {
        let p = well_conditioned(&mut rng, c, 4.0);
        &(&p * &Matrix::diagonal(&eig)) * &linalg::inverse(&p)?
    };

    let mut nilpotent = Matrix::zeros(q, q);
    for i in 0..q {
        for j in i + 1..q {
            let v = if j == i + 1 {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    let mag = rng.random_range(0.5..1.5);
                    if rng.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                }
            } else {
                rng.random_range(-0.5..0.5)
            };
            nilpotent.set(i, j, v);
        }
    }

    let similarity = well_conditioned(&mut rng, n, 10.0);
    let rates: Vec<f64> = eig.iter().map(|d| 1.0 / d).collect();
    let f = if opts.homogeneous {
        Signal::zero(n)
    } else {
        Signal::new((0..n).map(|_| random_component(&mut rng, &rates)).collect())
    };
    let c0_core = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();

    Ok(SynthSpec {
        core,
        nilpotent,
        similarity,
        f,
        c0_core,
    })
}

fn random_component(rng: &mut ChaCha8Rng, rates: &[f64]) -> Vec<SignalTerm> {
    let count = rng.random_range(1..=3);
    (0..count)
        .map(|_| {
            let coef = rng.random_range(-1.0..1.0);
            let power = rng.random_range(0..=2);
            let exp_rate = if rng.random_bool(0.5) {
                0.0
            } else {
                // stay clear of resonance with the core modes
                loop {
                    let a: f64 = rng.random_range(-1.0..0.5);
                    if rates.iter().all(|r| (a - r).abs() > 0.1) {
                        break a;
                    }
                }
            };
            let trig = match rng.random_range(0..3) {
                0 => Trig::None,
                1 => Trig::Sin(rng.random_range(0.5..2.0)),
                _ => Trig::Cos(rng.random_range(0.5..2.0)),
            };
            SignalTerm {
                coef,
                power,
                exp_rate,
                trig,
            }
        })
        .collect()
}

/// `U·Σ·Vᵀ` with random orthogonal factors and singular values log-uniform in
/// `[1, cond]`.
fn well_conditioned(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> Matrix {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, n);
    let sigma: Vec<f64> = (0..n)
        .map(|_| cond.powf(rng.random_range(0.0..1.0)))
        .collect();
    &(&u * &Matrix::diagonal(&sigma)) * &v.transpose()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let prev = cols[k].clone();
                for (x, p) in cols[j].iter_mut().zip(prev) {
                    *x -= dot * p;
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-3 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            return Matrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::parse_signal;

    #[test]
    fn scalar_core_with_zero_block() {
        let spec = SynthSpec {
            core: Matrix::from_rows(&[[-1.0]]).unwrap(),
            nilpotent: Matrix::zeros(1, 1),
            similarity: Matrix::identity(2),
            f: Signal::zero(2),
            c0_core: vec![2.0],
        };
        let s = synthesize(&spec).unwrap();
        assert_eq!(s.b, Matrix::diagonal(&[-1.0, 0.0]));
        assert!(s.analytic.is_closed_form());
        for t in [0.0, 0.5, 3.0] {
            let x = s.analytic.eval(t);
            assert!((x[0] - 2.0 * (-t).exp()).abs() < 1e-14);
            assert_eq!(x[1], 0.0);
        }
    }

    #[test]
    fn pure_shift_block() {
        let spec = SynthSpec {
            core: Matrix::zeros(0, 0),
            nilpotent: Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap(),
            similarity: Matrix::identity(2),
            f: parse_signal("t ; t^2", 2).unwrap(),
            c0_core: vec![],
        };
        let s = synthesize(&spec).unwrap();
        let x = s.analytic.eval(2.0);
        assert!((x[0] + 6.0).abs() < 1e-14 && (x[1] + 4.0).abs() < 1e-14);
    }

    #[test]
    fn invertible_only() {
        let spec = SynthSpec {
            core: Matrix::diagonal(&[2.0, -1.0]),
            nilpotent: Matrix::zeros(0, 0),
            similarity: Matrix::identity(2),
            f: Signal::zero(2),
            c0_core: vec![1.0, 1.0],
        };
        let s = synthesize(&spec).unwrap();
        let x = s.analytic.eval(1.0);
        assert!((x[0] - 0.5f64.exp()).abs() < 1e-14);
        assert!((x[1] - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn forced_modes_match_scalar_formulas() {
        // y' = -y + cos(2t) + t with y(0) = 1, solved by hand:
        // y = (cos 2t + 2 sin 2t)/5 + t - 1 + (1 - 1/5 + 1) e^{-t}
        let spec = SynthSpec {
            core: Matrix::from_rows(&[[-1.0]]).unwrap(),
            nilpotent: Matrix::zeros(0, 0),
            similarity: Matrix::identity(1),
            f: parse_signal("-1*cos(2*t) - t", 1).unwrap(),
            c0_core: vec![1.0],
        };
        let s = synthesize(&spec).unwrap();
        for t in [0.0, 0.3, 1.7] {
            let t: f64 = t;
            let expected =
                ((2.0 * t).cos() + 2.0 * (2.0 * t).sin()) / 5.0 + t - 1.0 + 1.8 * (-t).exp();
            assert!((s.analytic.eval(t)[0] - expected).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn resonant_forcing() {
        // y' = y + e^t, y(0) = 0  =>  y = t e^t
        let spec = SynthSpec {
            core: Matrix::from_rows(&[[1.0]]).unwrap(),
            nilpotent: Matrix::zeros(0, 0),
            similarity: Matrix::identity(1),
            f: parse_signal("exp(t)", 1).unwrap(),
            c0_core: vec![0.0],
        };
        let s = synthesize(&spec).unwrap();
        let t = 1.3f64;
        assert!((s.analytic.eval(t)[0] - t * t.exp()).abs() < 1e-13);
    }

    #[test]
    fn jordan_core_falls_back_to_reference_integration() {
        // C = [[1,1],[0,1]], y' = C⁻¹y = [[1,-1],[0,1]] y
        // y2 = e^t y2(0), y1 = e^t (y1(0) - t y2(0))
        let spec = SynthSpec {
            core: Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap(),
            nilpotent: Matrix::zeros(0, 0),
            similarity: Matrix::identity(2),
            f: Signal::zero(2),
            c0_core: vec![1.0, 1.0],
        };
        let s = synthesize(&spec).unwrap();
        assert!(!s.analytic.is_closed_form());
        let xs = s.analytic.sample(&[0.0, 0.5, 1.0]);
        for (t, x) in [0.0f64, 0.5, 1.0].iter().zip(&xs) {
            assert!((x[0] - t.exp() * (1.0 - t)).abs() < 1e-12);
            assert!((x[1] - t.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SynthSpec {
            core: Matrix::zeros(1, 1),
            nilpotent: Matrix::zeros(0, 0),
            similarity: Matrix::identity(1),
            f: Signal::zero(1),
            c0_core: vec![0.0],
        };
        assert!(matches!(synthesize(&base), Err(SynthError::SpecInvalid(_))));
        let mut s = base.clone();
        s.core = Matrix::identity(1);
        s.nilpotent = Matrix::identity(1);
        s.similarity = Matrix::identity(2);
        s.f = Signal::zero(2);
        assert!(synthesize(&s).is_err());
    }

    #[test]
    fn random_specs_are_deterministic() {
        let a = random_spec(1, 4).unwrap();
        let b = random_spec(1, 4).unwrap();
        assert_eq!(a.similarity, b.similarity);
        assert_eq!(a.core, b.core);
        assert_eq!(a.f, b.f);
        assert!(random_spec(1, 0).is_err());
        assert!(random_spec(1, 13).is_err());
    }

    #[test]
    fn similarity_condition_is_capped() {
        for seed in 0..20 {
            let spec = random_spec(seed, 6).unwrap();
            let sv = linalg::svd(&spec.similarity).unwrap().singular_values;
            assert!(sv[0] / sv[sv.len() - 1] <= 1e3);
        }
    }
}
