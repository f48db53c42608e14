use proptest::prelude::*;

use skeleton_dae::chain::{build_chain, verify_chain, ChainKind, ChainLevel, SkeletonChain};
use skeleton_dae::linalg::{eigenvalues, full_rank_factorize, rank_of, solve_linear, svd, Matrix};
use skeleton_dae::oracle::{random_spec_with, synthesize, SynthOptions};
use skeleton_dae::signal::{parse_signal, Signal, SignalTerm, Trig};
use skeleton_dae::solver::{solve_regular, RegularizedIVP, TimeGrid};

fn matrix(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap())
    })
}

/// `X·Y` with inner dimension `r`, so rank at most `r`.
fn low_rank(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n)
        .prop_flat_map(|n| (Just(n), 0..=n))
        .prop_flat_map(|(n, r)| {
            (
                prop::collection::vec(-1.0f64..1.0, n * r),
                prop::collection::vec(-1.0f64..1.0, r * n),
            )
                .prop_map(move |(x, y)| {
                    let x = Matrix::new(n, r, x).unwrap();
                    let y = Matrix::new(r, n, y).unwrap();
                    &x * &y
                })
        })
}

fn term() -> impl Strategy<Value = SignalTerm> {
    (
        -2.0f64..2.0,
        0u32..4,
        prop_oneof![Just(0.0), -1.5f64..1.0],
        prop_oneof![
            Just(Trig::None),
            (0.25f64..3.0).prop_map(Trig::Sin),
            (0.25f64..3.0).prop_map(Trig::Cos)
        ],
    )
        .prop_map(|(coef, power, exp_rate, trig)| SignalTerm {
            coef,
            power,
            exp_rate,
            trig,
        })
}

fn signal(dim: usize) -> impl Strategy<Value = Signal> {
    prop::collection::vec(prop::collection::vec(term(), 0..4), dim).prop_map(Signal::new)
}

/// Rank by Gaussian elimination with complete pivoting.
fn elimination_rank(m: &Matrix, tol: f64) -> usize {
    let mut a = m.to_rows();
    let (rows, cols) = (m.rows(), m.cols());
    let scale = m.max_norm();
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..rows {
            for j in k..cols {
                if a[i][j].abs() > best {
                    (pi, pj, best) = (i, j, a[i][j].abs());
                }
            }
        }
        if best <= tol * scale {
            break;
        }
        a.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        for i in k + 1..rows {
            let l = a[i][k] / a[k][k];
            for j in k..cols {
                a[i][j] -= l * a[k][j];
            }
        }
        rank += 1;
    }
    rank
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn svd_reconstructs(m in matrix(7)) {
        let d = svd(&m).unwrap();
        let rec = &(&d.u * &Matrix::diagonal(&d.singular_values)) * &d.v_t;
        prop_assert!((&rec - &m).max_norm() <= 1e-13 * (1.0 + m.max_norm()));
        prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let utu = &d.u.transpose() * &d.u;
        prop_assert!((&utu - &Matrix::identity(m.cols())).max_norm() < 1e-13);
    }

    #[test]
    fn factors_have_full_rank(m in low_rank(7)) {
        let f = full_rank_factorize(&m, 1e-10).unwrap();
        prop_assert_eq!(f.rank, elimination_rank(&m, 1e-9));
        prop_assert!((&(&f.left * &f.right) - &m).max_norm() <= 1e-12 * (1.0 + m.max_norm()));
        if f.rank > 0 {
            prop_assert_eq!(rank_of(&f.left, 1e-10).unwrap(), f.rank);
            prop_assert_eq!(rank_of(&f.right, 1e-10).unwrap(), f.rank);
        }
    }

    #[test]
    fn transpose_has_same_spectrum(m in matrix(6)) {
        let mut a: Vec<(f64, f64)> = eigenvalues(&m).unwrap().iter().map(|z| (z.re, z.im)).collect();
        let mut b: Vec<(f64, f64)> = eigenvalues(&m.transpose()).unwrap().iter().map(|z| (z.re, z.im)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // simple eigenvalues of a random matrix are well separated almost surely
        let scale = 1.0 + m.max_norm();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.0 - y.0).abs() + (x.1 - y.1).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn solve_linear_round_trip(m in matrix(6), seed in prop::collection::vec(-1.0f64..1.0, 6)) {
        let n = m.rows();
        let a = &m + &Matrix::identity(n).scale(5.0);
        let x: Vec<f64> = seed[..n].to_vec();
        let b = a.mul_vec(&x);
        let sol = solve_linear(&a, &b).unwrap();
        for (u, v) in sol.solution.iter().zip(&x) {
            prop_assert!((u - v).abs() <= 1e-10 * sol.condition);
        }
    }

    #[test]
    fn chains_terminate_and_verify(m in low_rank(6)) {
        let chain = build_chain(&m, 1e-10).unwrap();
        prop_assert!(chain.len() <= m.rows());
        prop_assert!(chain.dims().windows(2).all(|w| w[1] < w[0]));
        let report = verify_chain(&chain, 1e-10);
        prop_assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
        // classification is stable under rebuilding
        let again = build_chain(&m, 1e-10).unwrap();
        prop_assert_eq!(again.kind(), chain.kind());
        prop_assert_eq!(again.dims(), chain.dims());
    }

    #[test]
    fn derivative_matches_finite_difference(s in signal(2), t in -1.0f64..1.0) {
        let d = s.differentiate();
        let h = 1e-5;
        let (fp, fm) = (s.value(t + h), s.value(t - h));
        for (i, exact) in d.value(t).iter().enumerate() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
        }
    }

    #[test]
    fn printed_signals_parse_back(s in signal(3), t in -1.0f64..1.0) {
        let text = s.to_string();
        let back = parse_signal(&text, 3).unwrap();
        for (a, b) in s.value(t).iter().zip(back.value(t)) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()), "{}", text);
        }
    }
}

#[test]
fn solution_independent_of_factor_choice() {
    // B = diag(T, 0) with two different skeleton factorizations of B
    let t = Matrix::from_rows(&[[-1.0, 0.5], [0.0, -2.0]]).unwrap();
    let b = Matrix::block_diag(&t, &Matrix::zeros(1, 1));
    let f = parse_signal("sin(t) ; 1 ; t", 3).unwrap();
    let grid = TimeGrid::new(1.0, 1e-2).unwrap();

    let built = build_chain(&b, 1e-10).unwrap();
    let g = Matrix::from_rows(&[[2.0, 1.0], [0.0, 0.5]]).unwrap();
    let g_inv = Matrix::from_rows(&[[0.5, -1.0], [0.0, 2.0]]).unwrap();
    let a_odd = &Matrix::from_fn(3, 2, |i, j| if i < 2 { t.get(i, j) } else { 0.0 }) * &g_inv;
    let a_even = &g * &Matrix::from_fn(2, 3, |i, j| if i == j { 1.0 } else { 0.0 });
    let b_next = &a_even * &a_odd;
    let custom = SkeletonChain::from_parts(
        b.clone(),
        vec![ChainLevel {
            a_odd,
            a_even,
            b_next,
        }],
        1e-10,
    )
    .unwrap();
    assert!(verify_chain(&custom, 1e-10).passed());

    // the same classical initial state expressed in each chain's coordinates
    let x0 = [0.3, -0.7, 0.0];
    let solve = |chain: &SkeletonChain| {
        let c0 = chain.projector().mul_vec(&x0);
        let ivp = RegularizedIVP::new(b.clone(), f.clone(), c0, grid);
        solve_regular(&ivp, chain).unwrap()
    };
    let (a, c) = (solve(&built), solve(&custom));
    for (x, y) in a.states.iter().zip(&c.states) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }
}

#[test]
fn homogeneous_solution_is_linear_in_c0() {
    let opts = SynthOptions {
        core_dim: Some(2),
        homogeneous: true,
        ..SynthOptions::default()
    };
    let synth = synthesize(&random_spec_with(77, 5, &opts).unwrap()).unwrap();
    let chain = build_chain(&synth.b, 1e-10).unwrap();
    assert_eq!(chain.kind(), ChainKind::Regular);
    let grid = TimeGrid::new(1.0, 1e-2).unwrap();
    let run = |c0: Vec<f64>| {
        solve_regular(
            &RegularizedIVP::new(synth.b.clone(), Signal::zero(5), c0, grid),
            &chain,
        )
        .unwrap()
        .states
    };
    let (c1, c2) = (vec![1.0, -0.5], vec![0.25, 2.0]);
    let combo: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    let (x1, x2, x3) = (run(c1), run(c2), run(combo));
    for k in 0..x1.len() {
        for i in 0..5 {
            let expect = 2.0 * x1[k][i] - 3.0 * x2[k][i];
            assert!((x3[k][i] - expect).abs() < 1e-11 * (1.0 + expect.abs()));
        }
    }
}
