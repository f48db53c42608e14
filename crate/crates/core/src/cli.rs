//! Subcommand implementations behind the `skeleton-dae` binary.
//!
//! Commands return their text output instead of printing, so they can be
//! driven from tests. Failures carry the exit-code class: input problems
//! exit with 2, numerical failures with 3.

use std::fmt::Write as _;

use crate::chain::{build_chain, verify_chain, ChainError, ChainKind, SkeletonChain};
use crate::linalg::{Complex, LinalgError, DEFAULT_RANK_TOL};
use crate::oracle::{self, SynthError};
use crate::problem::{ProblemError, ProblemFile};
use crate::solver::{
    check_classical_consistency, check_stability, solve_degenerate, solve_regular,
    DegenerateProblem, RegularizedIVP, SolveError, TimeGrid,
};

/// Time span and step written by `synth`.
pub const SYNTH_T_END: f64 = 2.0;
pub const SYNTH_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Linalg(LinalgError::NoConvergence(_)) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Dimension { .. }
            | SolveError::ChainMismatch(_)
            | SolveError::InvalidGrid(_)
            | SolveError::Signal(_)
            | SolveError::Linalg(LinalgError::NonFinite { .. }) => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::SpecInvalid(_) => CliError::Input(e.to_string()),
            SynthError::Linalg(_) => CliError::Numeric(e.to_string()),
        }
    }
}

/// Command-line values that take precedence over the problem file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub step: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    fn tol(&self, p: &ProblemFile) -> f64 {
        self.tol.or(p.tol).unwrap_or(DEFAULT_RANK_TOL)
    }

    fn grid(&self, p: &ProblemFile) -> Result<TimeGrid, CliError> {
        let t_end = self
            .t_end
            .or(p.t_end)
            .ok_or_else(|| CliError::Input("t_end missing (file field or --t-end)".into()))?;
        let step = self
            .step
            .or(p.step)
            .ok_or_else(|| CliError::Input("step missing (file field or --step)".into()))?;
        Ok(TimeGrid::new(t_end, step)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub stdout: String,
    pub warnings: Vec<String>,
}

fn format_complex(z: &Complex<f64>) -> String {
    if z.im == 0.0 {
        format!("{:?}", z.re)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{:?}{sign}{:?}i", z.re, z.im.abs())
    }
}

fn chain_headline(chain: &SkeletonChain) -> String {
    let dims: Vec<String> = chain.dims().iter().map(usize::to_string).collect();
    format!(
        "p={} kind={} dims=[{}]",
        chain.len(),
        chain.kind(),
        dims.join(",")
    )
}

fn chain_warnings(chain: &SkeletonChain) -> Vec<String> {
    chain
        .warnings()
        .iter()
        .map(|(i, w)| format!("iterate {i}: {w}"))
        .collect()
}

/// `chain <file>`
pub fn cmd_chain(problem: &ProblemFile, ov: &Overrides) -> Result<CommandOutput, CliError> {
    let b = problem.matrix()?;
    let chain = build_chain(&b, ov.tol(problem))?;
    let mut out = chain_headline(&chain);
    let stability = match chain.kind() {
        ChainKind::Regular => Some(check_stability(&chain)?),
        ChainKind::Degenerate => None,
    };
    if let Some(s) = &stability {
        write!(out, " stability={}", s.verdict).unwrap();
    }
    out.push('\n');

    let report = verify_chain(&chain, chain.tol());
    for level in 1..=chain.len() {
        let c1 = report.find("condition-1", Some(level)).unwrap();
        let perm = report.find("permutation", Some(level)).unwrap();
        writeln!(
            out,
            "level {level}: condition-1 residual={:e} permutation residual={:e}",
            c1.residual, perm.residual
        )
        .unwrap();
    }
    let spectrum = match &stability {
        Some(s) => s.spectrum.clone(),
        None => crate::linalg::eigenvalues(chain.terminal()).map_err(ChainError::from)?,
    };
    let spectrum: Vec<String> = spectrum.iter().map(format_complex).collect();
    writeln!(out, "terminal spectrum: [{}]", spectrum.join(", ")).unwrap();
    if let Some(s) = &stability {
        writeln!(out, "spectral abscissa: {:e}", s.abscissa).unwrap();
    }
    Ok(CommandOutput {
        stdout: out,
        warnings: chain_warnings(&chain),
    })
}

/// Result of `solve`: the summary plus the CSV body.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub output: CommandOutput,
    pub csv: String,
}

/// `solve <file> --out <csv>`
pub fn cmd_solve(problem: &ProblemFile, ov: &Overrides) -> Result<SolveOutput, CliError> {
    let b = problem.matrix()?;
    let f = problem.signal()?;
    let grid = ov.grid(problem)?;
    let chain = build_chain(&b, ov.tol(problem))?;
    let mut warnings = chain_warnings(&chain);

    let (traj, summary) = match chain.kind() {
        ChainKind::Regular => {
            let c0 = problem.c0.clone().ok_or_else(|| {
                CliError::Input(format!(
                    "regular chain: c0 with {} entries is required",
                    chain.terminal_dim()
                ))
            })?;
            if let Some(recorded) = problem.recorded_projector()? {
                let m = chain.projector();
                let same = (recorded.rows(), recorded.cols()) == (m.rows(), m.cols())
                    && (&recorded - &m).max_norm() <= 1e-9 * (1.0 + m.max_norm());
                if !same {
                    warnings.push(
                        "recorded m differs from this chain's projector; c0 coordinates may not match"
                            .into(),
                    );
                }
            }
            let ivp = RegularizedIVP::new(b, f, c0, grid);
            let traj = solve_regular(&ivp, &chain)?;
            let summary = format!(
                "{} residual_max={:e} hyperplane_defect={:e}",
                chain_headline(&chain),
                traj.residual_max,
                traj.hyperplane_defect.unwrap_or(0.0)
            );
            (traj, summary)
        }
        ChainKind::Degenerate => {
            if problem.c0.is_some() {
                warnings.push(
                    "degenerate chain: the solution is unique without initial data; c0 ignored"
                        .into(),
                );
            }
            let traj = solve_degenerate(&DegenerateProblem { b, f, grid }, &chain)?;
            let summary = format!(
                "{} residual_max={:e}",
                chain_headline(&chain),
                traj.residual_max
            );
            (traj, summary)
        }
    };

    Ok(SolveOutput {
        output: CommandOutput {
            stdout: summary + "\n",
            warnings,
        },
        csv: trajectory_csv(&traj.times, &traj.states),
    })
}

/// `check <file>`
pub fn cmd_check(problem: &ProblemFile, ov: &Overrides) -> Result<CommandOutput, CliError> {
    let b = problem.matrix()?;
    let f = problem.signal()?;
    let x0 = problem
        .x0
        .as_ref()
        .ok_or_else(|| CliError::Input("check needs x0".into()))?;
    let tol = ov.tol(problem);
    let f0 = f.value(0.0);
    let scale = 1.0 + x0.iter().chain(&f0).fold(0.0f64, |acc, v| acc.max(v.abs()));
    let consistency = check_classical_consistency(&b, x0, &f, tol * scale)?;

    let mut out = String::new();
    writeln!(out, "{consistency}").unwrap();
    writeln!(out, "nullity={}", consistency.basis.dim()).unwrap();

    let chain = build_chain(&b, tol)?;
    writeln!(out, "chain: {}", chain_headline(&chain)).unwrap();
    let report = verify_chain(&chain, tol);
    for check in &report.checks {
        writeln!(out, "verify {check}").unwrap();
    }
    writeln!(
        out,
        "verify: {}",
        if report.passed() {
            "all checks passed"
        } else {
            "FAILED"
        }
    )
    .unwrap();
    Ok(CommandOutput {
        stdout: out,
        warnings: chain_warnings(&chain),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub problem_json: String,
    pub reference_csv: String,
}

/// `synth --seed <k> --n <n>`: a random problem and its reference solution on
/// `[0, SYNTH_T_END]` with step `SYNTH_STEP`.
pub fn cmd_synth(seed: u64, n: usize) -> Result<SynthOutput, CliError> {
    let spec = oracle::random_spec(seed, n)?;
    let synth = oracle::synthesize(&spec)?;
    let chain = build_chain(&synth.b, DEFAULT_RANK_TOL)?;
    let grid = TimeGrid::new(SYNTH_T_END, SYNTH_STEP)?;
    let times = grid.times();
    let reference = synth.analytic.sample(&times);

    let (c0, m) = match chain.kind() {
        ChainKind::Regular => {
            let m = chain.projector();
            (Some(m.mul_vec(&reference[0])), Some(m.to_rows()))
        }
        ChainKind::Degenerate => (None, None),
    };
    let problem = ProblemFile {
        b: synth.b.to_rows(),
        f: spec.f.component_strings(),
        c0,
        x0: Some(reference[0].clone()),
        t_end: Some(SYNTH_T_END),
        step: Some(SYNTH_STEP),
        tol: Some(DEFAULT_RANK_TOL),
        m,
    };
    Ok(SynthOutput {
        problem_json: problem.to_json(),
        reference_csv: trajectory_csv(&times, &reference),
    })
}

/// CSV with header `t,x_1,…,x_n` and 17 significant digits per value.
pub fn trajectory_csv(times: &[f64], states: &[Vec<f64>]) -> String {
    let n = states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",x_{i}").unwrap();
    }
    out.push('\n');
    for (t, x) in times.iter().zip(states) {
        write!(out, "{t:.16e}").unwrap();
        for v in x {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses CSV written by [`trajectory_csv`] into `(times, states)`.
pub fn read_trajectory_csv(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Input("empty CSV".into()))?;
    let width = header.split(',').count();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, line) in lines.enumerate() {
        let values = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("CSV row {}: {e}", i + 1)))?;
        if values.len() != width {
            return Err(CliError::Input(format!(
                "CSV row {} has {} fields",
                i + 1,
                values.len()
            )));
        }
        times.push(values[0]);
        states.push(values[1..].to_vec());
    }
    Ok((times, states))
}
