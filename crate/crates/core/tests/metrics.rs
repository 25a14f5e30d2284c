use turbostop::decoder::{log1p_exp_neg, CorrectionLut, MaxStar};
use turbostop::metrics::{ber_given_llr, epsilon, epsilon_with, InvLn2};
use turbostop::rules::RuleSpec;
use turbostop::sim::{SimConfig, Simulator};

#[test]
fn lut_error_bound() {
    let lut = CorrectionLut::default();
    assert_eq!(lut.len(), 128);
    let worst = (0..=80_000)
        .map(|i| i as f64 * 1e-4)
        .map(|x| (lut.lookup(x) - log1p_exp_neg(x)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.032, "{worst}");
    assert!(worst > 0.0);
}

#[test]
fn correction_approximates_conditional_error_probability() {
    for i in 0..=18_000 {
        let x = 2.0 + i as f64 * 1e-3;
        for l in [x, -x] {
            let p = ber_given_llr(l);
            let gap = (p - log1p_exp_neg(l)).abs() / p;
            assert!(gap <= 0.10, "|L|={x}: {gap}");
            if x >= 5.0 {
                assert!(gap <= 0.01, "|L|={x}: {gap}");
            }
        }
    }
}

#[test]
fn lut_epsilon_tracks_exact() {
    let lut = MaxStar::Lut(CorrectionLut::default());
    let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 9.0).collect();
    let a = epsilon(&v);
    let b = epsilon_with(&v, &lut, InvLn2::Exact);
    assert!((a - b).abs() < 0.032 / std::f64::consts::LN_2);
}

#[test]
fn epsilon_estimates_first_iteration_ber() {
    let cfg = SimConfig::from_json(
        r#"{
            "interleaver": {"size": 2048, "seed": 1},
            "channel": {"kind": "awgn", "ebno_db": [2.0]},
            "decoder": {"max_iterations": 1},
            "rules": [{"kind": "fixed", "iterations": 1}],
            "sim": {"num_frames": 40, "master_seed": 5}
        }"#,
    )
    .unwrap();
    let sim = Simulator::new(cfg).unwrap();
    let rule = RuleSpec::Fixed { iterations: 1 };
    let (mut errors, mut eps) = (0u64, 0.0);
    for f in 0..40 {
        let r = sim.run_frame(2.0, f, &rule).unwrap();
        errors += r.bit_errors;
        eps += r.per_iteration[0].epsilon;
    }
    let ber = errors as f64 / (40.0 * 2048.0);
    let eps = eps / 40.0;
    assert!(ber > 0.0);
    let ratio = eps / ber;
    assert!((0.1..=10.0).contains(&ratio), "eps {eps} ber {ber}");
}
