use std::ffi::{c_char, CString};
use std::ptr;

use skeleton_dae_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { skd_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn chain(b: &[f64], n: usize) -> *mut SkdChain {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { skd_chain_build(b.as_ptr(), n, 1e-10, &mut out) },
        SkdStatus::Ok
    );
    out
}

fn signal(text: &str, dim: usize) -> *mut SkdSignal {
    let text = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { skd_signal_parse(text.as_ptr(), dim, &mut out) },
        SkdStatus::Ok
    );
    out
}

#[test]
fn degenerate_shift_operator_round_trip() {
    let c = chain(&[0.0, 1.0, 0.0, 0.0], 2);
    let f = signal("t ; t^2", 2);
    unsafe {
        let mut p = 99;
        let mut kind = SkdChainKind::Regular;
        assert_eq!(skd_chain_info(c, &mut p, &mut kind), SkdStatus::Ok);
        assert_eq!((p, kind), (1, SkdChainKind::Degenerate));

        let mut dims = [0usize; 4];
        let mut len = 0;
        assert_eq!(
            skd_chain_dims(c, dims.as_mut_ptr(), dims.len(), &mut len),
            SkdStatus::Ok
        );
        assert_eq!(&dims[..len], &[2, 1]);

        let mut traj = ptr::null_mut();
        assert_eq!(
            skd_solve(c, f, ptr::null(), 0, 2.0, 0.5, &mut traj),
            SkdStatus::Ok
        );
        let (mut points, mut dim, mut res) = (0, 0, f64::NAN);
        assert_eq!(
            skd_trajectory_info(traj, &mut points, &mut dim, &mut res),
            SkdStatus::Ok
        );
        assert_eq!((points, dim), (5, 2));
        assert!(res <= 1e-12);

        let mut times = vec![0.0; points];
        let mut states = vec![0.0; points * dim];
        assert_eq!(
            skd_trajectory_times(traj, times.as_mut_ptr(), times.len(), ptr::null_mut()),
            SkdStatus::Ok
        );
        assert_eq!(
            skd_trajectory_states(traj, states.as_mut_ptr(), states.len(), ptr::null_mut()),
            SkdStatus::Ok
        );
        for (k, t) in times.iter().enumerate() {
            assert!((states[2 * k] + 3.0 * t).abs() < 1e-14);
            assert!((states[2 * k + 1] + t * t).abs() < 1e-14);
        }

        let mut verdict = SkdStability::Stable;
        assert_eq!(
            skd_chain_stability(c, &mut verdict, ptr::null_mut()),
            SkdStatus::WrongChainKind
        );
        assert!(last_error().contains("regular"), "{}", last_error());

        skd_trajectory_free(traj);
        skd_signal_free(f);
        skd_chain_free(c);
    }
}

#[test]
fn regular_exponential_growth() {
    let c = chain(&[1.0, 0.0, 0.0, 0.0], 2);
    let f = signal("0 ; 0", 2);
    unsafe {
        let mut m = [0.0; 2];
        let mut len = 0;
        assert_eq!(
            skd_chain_projector(c, m.as_mut_ptr(), 2, &mut len),
            SkdStatus::Ok
        );
        assert_eq!(len, 2);
        assert!((m[0].abs() - 1.0).abs() < 1e-14 && m[1] == 0.0);

        let c0 = [m[0]];
        let mut traj = ptr::null_mut();
        assert_eq!(
            skd_solve(c, f, c0.as_ptr(), 1, 1.0, 1e-3, &mut traj),
            SkdStatus::Ok
        );
        let mut states = vec![0.0; 2002];
        assert_eq!(
            skd_trajectory_states(traj, states.as_mut_ptr(), states.len(), &mut len),
            SkdStatus::Ok
        );
        assert_eq!(len, 2002);
        assert!((states[2000] - std::f64::consts::E).abs() < 1e-9);

        let mut verdict = SkdStability::Stable;
        let mut abscissa = 0.0;
        assert_eq!(
            skd_chain_stability(c, &mut verdict, &mut abscissa),
            SkdStatus::Ok
        );
        assert_eq!(verdict, SkdStability::Unstable);
        assert!((abscissa - 1.0).abs() < 1e-12);

        skd_trajectory_free(traj);
        skd_signal_free(f);
        skd_chain_free(c);
    }
}

#[test]
fn consistency_check() {
    let f = signal("0 ; 0", 2);
    let b = [0.0, 1.0, 0.0, 0.0];
    unsafe {
        let (mut ok, mut defect) = (-1, f64::NAN);
        let x0 = [0.0, 1.0];
        assert_eq!(
            skd_check_consistency(b.as_ptr(), 2, x0.as_ptr(), f, 1e-12, &mut ok, &mut defect),
            SkdStatus::Ok
        );
        assert_eq!(ok, 0);
        assert!((defect - 1.0).abs() <= 1e-12);

        let x0 = [4.0, 0.0];
        assert_eq!(
            skd_check_consistency(b.as_ptr(), 2, x0.as_ptr(), f, 1e-12, &mut ok, &mut defect),
            SkdStatus::Ok
        );
        assert_eq!(ok, 1);
        skd_signal_free(f);
    }
}

#[test]
fn error_statuses() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(
            skd_chain_build(ptr::null(), 2, 1e-10, &mut c),
            SkdStatus::NullPointer
        );
        assert!(c.is_null());
        let nan = [f64::NAN];
        assert_eq!(
            skd_chain_build(nan.as_ptr(), 1, 1e-10, &mut c),
            SkdStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        assert_eq!(
            skd_chain_build(nan.as_ptr(), 0, 1e-10, &mut c),
            SkdStatus::InvalidArgument
        );

        let text = CString::new("t +").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(
            skd_signal_parse(text.as_ptr(), 1, &mut s),
            SkdStatus::ParseError
        );
        assert!(s.is_null());

        let c = chain(&[1.0, 0.0, 0.0, 0.0], 2);
        let f = signal("0 ; 0", 2);
        let mut t = ptr::null_mut();
        assert_eq!(
            skd_solve(c, f, ptr::null(), 0, 1.0, 0.1, &mut t),
            SkdStatus::InvalidArgument
        );
        let c0 = [1.0];
        assert_eq!(
            skd_solve(c, f, c0.as_ptr(), 1, -1.0, 0.1, &mut t),
            SkdStatus::InvalidArgument
        );

        let mut small = [0usize; 1];
        let mut len = 0;
        assert_eq!(
            skd_chain_dims(c, small.as_mut_ptr(), 1, &mut len),
            SkdStatus::BufferTooSmall
        );
        assert_eq!(len, 2);

        let mut vals = [0.0; 2];
        assert_eq!(
            skd_signal_eval(f, 0.0, 1, vals.as_mut_ptr(), 2),
            SkdStatus::Ok
        );
        assert_eq!(
            skd_signal_eval(f, 0.0, 1000, vals.as_mut_ptr(), 2),
            SkdStatus::InvalidArgument
        );

        // success clears the message
        assert_eq!(
            skd_chain_info(c, ptr::null_mut(), ptr::null_mut()),
            SkdStatus::Ok
        );
        assert_eq!(last_error(), "");

        skd_signal_free(f);
        skd_chain_free(c);
        skd_chain_free(ptr::null_mut());
    }
}

#[test]
fn signal_eval_derivatives() {
    let f = signal("sin(2*t) ; t^3", 2);
    let mut v = [0.0; 2];
    unsafe {
        assert_eq!(skd_signal_eval(f, 0.5, 2, v.as_mut_ptr(), 2), SkdStatus::Ok);
        skd_signal_free(f);
    }
    assert!((v[0] + 4.0 * 1f64.sin()).abs() < 1e-14);
    assert!((v[1] - 3.0).abs() < 1e-14);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/skeleton_dae.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "skd_chain_build",
        "skd_solve",
        "skd_trajectory_states",
        "skd_check_consistency",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"skeleton_dae.h\"\nint main(void) { SkdChain *c = 0; return (int)skd_chain_build(0, 0, 1e-10, &c); }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(e) => eprintln!("no C compiler available ({e}); syntax check skipped"),
    }
}
