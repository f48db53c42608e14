//! Vector-valued forcing signals closed under differentiation.
//!
//! Every component is a finite sum of terms
//! `coef · tᵏ · e^{a·t} · {1 | sin(ωt) | cos(ωt)}`. The derivative of such a
//! term is again a sum of at most three terms of the same shape, so
//! derivatives of any order are exact.

mod parse;

use std::fmt;

use thiserror::Error;

use crate::linalg::Matrix;

pub use parse::{parse_signal, ParseError};

/// Default cap on derivative orders accepted by [`Signal::eval`].
pub const DEFAULT_ORDER_CAP: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("derivative order {order} exceeds the cap of {cap}")]
    OrderCapExceeded { order: usize, cap: usize },
    #[error("signal has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trig {
    None,
    Sin(f64),
    Cos(f64),
}

/// `coef · t^power · e^{exp_rate·t} · trig(ωt)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTerm {
    pub coef: f64,
    pub power: u32,
    pub exp_rate: f64,
    pub trig: Trig,
}

impl SignalTerm {
    pub fn constant(c: f64) -> Self {
        SignalTerm {
            coef: c,
            power: 0,
            exp_rate: 0.0,
            trig: Trig::None,
        }
    }

    pub fn monomial(coef: f64, power: u32) -> Self {
        SignalTerm {
            power,
            ..SignalTerm::constant(coef)
        }
    }

    pub fn with_exp(mut self, rate: f64) -> Self {
        self.exp_rate = rate;
        self
    }

    pub fn with_trig(mut self, trig: Trig) -> Self {
        self.trig = trig;
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.coef;
        if self.power > 0 {
            v *= t.powi(self.power as i32);
        }
        if self.exp_rate != 0.0 {
            v *= (self.exp_rate * t).exp();
        }
        match self.trig {
            Trig::None => v,
            Trig::Sin(w) => v * (w * t).sin(),
            Trig::Cos(w) => v * (w * t).cos(),
        }
    }

    /// Canonical form: `ω > 0`, `sin(0)` dropped, `cos(0)` folded to 1,
    /// negative zero rates cleared. Returns `None` for a vanishing term.
    fn normalized(mut self) -> Option<Self> {
        self.exp_rate += 0.0;
        self.trig = match self.trig {
            Trig::Sin(0.0) => return None,
            Trig::Sin(w) if w < 0.0 => {
                self.coef = -self.coef;
                Trig::Sin(-w)
            }
            Trig::Cos(0.0) => Trig::None,
            Trig::Cos(w) if w < 0.0 => Trig::Cos(-w),
            other => other,
        };
        (self.coef != 0.0).then_some(self)
    }

    fn same_shape(&self, other: &SignalTerm) -> bool {
        let trig_eq = match (self.trig, other.trig) {
            (Trig::None, Trig::None) => true,
            (Trig::Sin(a), Trig::Sin(b)) | (Trig::Cos(a), Trig::Cos(b)) => a == b,
            _ => false,
        };
        self.power == other.power && self.exp_rate == other.exp_rate && trig_eq
    }

    fn derivative_into(&self, out: &mut Vec<SignalTerm>) {
        if self.power > 0 {
            out.push(SignalTerm {
                coef: self.coef * self.power as f64,
                power: self.power - 1,
                ..*self
            });
        }
        if self.exp_rate != 0.0 {
            out.push(SignalTerm {
                coef: self.coef * self.exp_rate,
                ..*self
            });
        }
        match self.trig {
            Trig::None => {}
            Trig::Sin(w) => out.push(SignalTerm {
                coef: self.coef * w,
                trig: Trig::Cos(w),
                ..*self
            }),
            Trig::Cos(w) => out.push(SignalTerm {
                coef: -self.coef * w,
                trig: Trig::Sin(w),
                ..*self
            }),
        }
    }
}

fn merge_into(component: &mut Vec<SignalTerm>, term: SignalTerm) {
    let Some(term) = term.normalized() else {
        return;
    };
    if let Some(pos) = component.iter().position(|t| t.same_shape(&term)) {
        component[pos].coef += term.coef;
        if component[pos].coef == 0.0 {
            component.remove(pos);
        }
    } else {
        component.push(term);
    }
}

fn merged(terms: impl IntoIterator<Item = SignalTerm>) -> Vec<SignalTerm> {
    let mut out = Vec::new();
    for t in terms {
        merge_into(&mut out, t);
    }
    out
}

/// A vector signal `f : ℝ → ℝⁿ` whose components are exp-poly-trig sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    components: Vec<Vec<SignalTerm>>,
    order_cap: usize,
}

impl Signal {
    pub fn new(components: Vec<Vec<SignalTerm>>) -> Self {
        Signal {
            components: components.into_iter().map(merged).collect(),
            order_cap: DEFAULT_ORDER_CAP,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Signal::new(vec![Vec::new(); dim])
    }

    pub fn with_order_cap(mut self, cap: usize) -> Self {
        self.order_cap = cap;
        self
    }

    pub fn order_cap(&self) -> usize {
        self.order_cap
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<SignalTerm>] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_empty())
    }

    /// `f(t)`
    pub fn value(&self, t: f64) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().map(|term| term.eval(t)).sum())
            .collect()
    }

    /// Exact `order`-th derivative of the signal at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<Vec<f64>, SignalError> {
        Ok(self.derivative(order)?.value(t))
    }

    pub fn differentiate(&self) -> Signal {
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut raw = Vec::with_capacity(3 * c.len());
                for term in c {
                    term.derivative_into(&mut raw);
                }
                merged(raw)
            })
            .collect();
        Signal {
            components,
            order_cap: self.order_cap,
        }
    }

    /// The `order`-th derivative as a signal.
    pub fn derivative(&self, order: usize) -> Result<Signal, SignalError> {
        if order > self.order_cap {
            return Err(SignalError::OrderCapExceeded {
                order,
                cap: self.order_cap,
            });
        }
        let mut s = self.clone();
        for _ in 0..order {
            s = s.differentiate();
        }
        Ok(s)
    }

    /// `f, f′, …, f^{(max_order)}` as signals.
    pub fn derivatives(&self, max_order: usize) -> Result<Vec<Signal>, SignalError> {
        if max_order > self.order_cap {
            return Err(SignalError::OrderCapExceeded {
                order: max_order,
                cap: self.order_cap,
            });
        }
        let mut out = Vec::with_capacity(max_order + 1);
        out.push(self.clone());
        for k in 0..max_order {
            let next = out[k].differentiate();
            out.push(next);
        }
        Ok(out)
    }

    /// `m · f(t)` as a signal. Panics if `m.cols() != self.dim()`.
    pub fn apply(&self, m: &Matrix) -> Signal {
        assert_eq!(
            m.cols(),
            self.dim(),
            "apply: matrix/signal dimension mismatch"
        );
        let components = (0..m.rows())
            .map(|i| {
                let row = m.row(i);
                merged(self.components.iter().zip(row).flat_map(|(c, &w)| {
                    c.iter().map(move |t| SignalTerm {
                        coef: t.coef * w,
                        ..*t
                    })
                }))
            })
            .collect();
        Signal {
            components,
            order_cap: self.order_cap,
        }
    }

    pub fn add(&self, other: &Signal) -> Signal {
        assert_eq!(self.dim(), other.dim(), "add: dimension mismatch");
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| merged(a.iter().chain(b).copied()))
            .collect();
        Signal {
            components,
            order_cap: self.order_cap.min(other.order_cap),
        }
    }

    pub fn scale(&self, s: f64) -> Signal {
        self.apply(&Matrix::identity(self.dim()).scale(s))
    }
}

/// Source of forcing values and exact derivatives.
///
/// [`Signal`] implements it for the built-in term class. Callers with a
/// forcing outside that class can implement it directly, supplying their own
/// derivative evaluator to the solvers.
pub trait Forcing {
    fn dim(&self) -> usize;

    /// `[f(t), f′(t), …, f^{(max_order)}(t)]`
    fn jet(&self, t: f64, max_order: usize) -> Result<Vec<Vec<f64>>, SignalError>;
}

impl Forcing for Signal {
    fn dim(&self) -> usize {
        Signal::dim(self)
    }

    fn jet(&self, t: f64, max_order: usize) -> Result<Vec<Vec<f64>>, SignalError> {
        Ok(self
            .derivatives(max_order)?
            .iter()
            .map(|s| s.value(t))
            .collect())
    }
}

/// Precomputed derivative table of a [`Signal`], for repeated evaluation on a
/// time grid.
#[derive(Debug, Clone)]
pub struct SignalJet {
    table: Vec<Signal>,
}

impl SignalJet {
    pub fn new(signal: &Signal, max_order: usize) -> Result<Self, SignalError> {
        Ok(SignalJet {
            table: signal.derivatives(max_order)?,
        })
    }

    pub fn max_order(&self) -> usize {
        self.table.len() - 1
    }
}

impl Forcing for SignalJet {
    fn dim(&self) -> usize {
        self.table[0].dim()
    }

    fn jet(&self, t: f64, max_order: usize) -> Result<Vec<Vec<f64>>, SignalError> {
        if max_order > self.max_order() {
            return Err(SignalError::OrderCapExceeded {
                order: max_order,
                cap: self.max_order(),
            });
        }
        Ok(self.table[..=max_order]
            .iter()
            .map(|s| s.value(t))
            .collect())
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub(crate) fn format_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, term: &SignalTerm, magnitude: f64) -> fmt::Result {
    let mut factors = Vec::new();
    match term.power {
        0 => {}
        1 => factors.push("t".to_string()),
        k => factors.push(format!("t^{k}")),
    }
    if term.exp_rate != 0.0 {
        factors.push(format!("exp({}*t)", format_number(term.exp_rate)));
    }
    match term.trig {
        Trig::None => {}
        Trig::Sin(w) => factors.push(format!("sin({}*t)", format_number(w))),
        Trig::Cos(w) => factors.push(format!("cos({}*t)", format_number(w))),
    }
    if factors.is_empty() {
        write!(f, "{}", format_number(magnitude))
    } else if magnitude == 1.0 {
        write!(f, "{}", factors.join("*"))
    } else {
        write!(f, "{}*{}", format_number(magnitude), factors.join("*"))
    }
}

/// Prints in the grammar accepted by [`parse_signal`], components separated
/// by `;`.
impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            fmt_component(f, c)?;
        }
        Ok(())
    }
}

fn fmt_component(f: &mut fmt::Formatter<'_>, terms: &[SignalTerm]) -> fmt::Result {
    if terms.is_empty() {
        return f.write_str("0");
    }
    for (j, term) in terms.iter().enumerate() {
        let negative = term.coef < 0.0;
        match (j, negative) {
            (0, true) => f.write_str("-")?,
            (0, false) => {}
            (_, true) => f.write_str(" - ")?,
            (_, false) => f.write_str(" + ")?,
        }
        write_term(f, term, term.coef.abs())?;
    }
    Ok(())
}

impl Signal {
    /// Each component printed on its own, e.g. for a per-component file
    /// format.
    pub fn component_strings(&self) -> Vec<String> {
        struct C<'a>(&'a [SignalTerm]);
        impl fmt::Display for C<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt_component(f, self.0)
            }
        }
        self.components.iter().map(|c| C(c).to_string()).collect()
    }
}
