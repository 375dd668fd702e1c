use admissible_core::infotheory::{
    bootstrap_pvalue, cmi_pvalue, entropy_difference_cmi, estimate_cmi, exact_cmi, CmiConfig,
    DiscreteJoint,
};
use admissible_core::synth::{gen_xor, gen_xor_null};
use admissible_core::table::{Column, Table};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NONE: [&str; 0] = [];

fn random_joint(dims: (usize, usize, usize), rng: &mut ChaCha8Rng) -> DiscreteJoint {
    let cells = dims.0 * dims.1 * dims.2;
    let weights = (0..cells)
        .map(|c| {
            // occasional exact zeros exercise the 0 log 0 convention
            if c > 0 && rng.random::<f64>() < 0.1 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    DiscreteJoint::from_weights(dims, weights).unwrap()
}

#[test]
fn oracles_agree_on_random_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let dims = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
        let j = random_joint(dims, &mut rng);
        assert!((exact_cmi(&j) - entropy_difference_cmi(&j)).abs() <= 1e-12);
        assert!(exact_cmi(&j) >= 0.0);
    }
}

#[test]
fn constant_x_and_deterministic_y_give_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = random_joint((3, 1, 3), &mut rng);
    assert!(entropy_difference_cmi(&base).abs() < 1e-12);

    // Y = S mod 2
    let mut pmf = vec![0.0; 2 * 2 * 3];
    for x in 0..2 {
        for s in 0..3 {
            pmf[((s % 2) * 2 + x) * 3 + s] = 1.0 / 6.0;
        }
    }
    let j = DiscreteJoint::from_weights((2, 2, 3), pmf).unwrap();
    assert!(exact_cmi(&j).abs() < 1e-12);
}

#[test]
fn x_determined_by_s_carries_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut pmf = vec![0.0; 3 * 3 * 3];
        for y in 0..3 {
            for s in 0..3 {
                let x = (s * 2 + 1) % 3;
                pmf[(y * 3 + x) * 3 + s] = rng.random::<f64>();
            }
        }
        let j = DiscreteJoint::from_weights((3, 3, 3), pmf).unwrap();
        assert!(exact_cmi(&j) < 1e-12);
    }
}

#[test]
fn xor_estimate_is_near_one_bit() {
    let t = gen_xor(500, 1).unwrap();
    let est = estimate_cmi(&t, "Y", &["X"], &["S"], &CmiConfig::default()).unwrap();
    assert!((est.value_bits - 0.994).abs() <= 0.1, "{}", est.value_bits);
    assert_eq!(est.n_used, 500);
    assert!(est.pvalue.is_none());
}

#[test]
fn independent_target_estimate_is_near_zero() {
    let t = gen_xor_null(500, 1).unwrap();
    let est = estimate_cmi(&t, "Y", &["X"], &["S"], &CmiConfig::default()).unwrap();
    assert!(est.value_bits.abs() <= 0.05, "{}", est.value_bits);
}

#[test]
fn xor_bootstrap_pvalues() {
    let cfg = CmiConfig::default();
    let signal = cmi_pvalue(&gen_xor(500, 2).unwrap(), "Y", &["X"], &["S"], &cfg, 200, 7).unwrap();
    assert!(signal.pvalue.unwrap() < 0.01);
    assert_eq!(signal.null_samples.as_ref().unwrap().len(), 200);
    let null = cmi_pvalue(&gen_xor_null(500, 2).unwrap(), "Y", &["X"], &["S"], &cfg, 200, 7).unwrap();
    assert!(null.pvalue.unwrap() > 0.1, "{:?}", null.pvalue);
}

#[test]
fn pvalue_is_consistent_with_null_samples() {
    let t = gen_xor_null(200, 5).unwrap();
    let est = cmi_pvalue(&t, "Y", &["X"], &["S"], &CmiConfig::default(), 19, 3).unwrap();
    let null = est.null_samples.unwrap();
    let exceed = null.iter().filter(|&&v| v >= est.value_bits).count();
    assert_eq!(est.pvalue.unwrap(), (1 + exceed) as f64 / 20.0);
}

#[test]
fn pvalue_formula_floor() {
    assert_eq!(bootstrap_pvalue(1.0, &[0.0; 19]), 1.0 / 20.0);
    assert_eq!(bootstrap_pvalue(0.0, &[0.0; 19]), 1.0);
}

#[test]
fn bootstrap_is_reproducible_and_seed_sensitive() {
    let t = gen_xor_null(200, 5).unwrap();
    let cfg = CmiConfig::default();
    let a = cmi_pvalue(&t, "Y", &["X"], &["S"], &cfg, 19, 11).unwrap();
    let b = cmi_pvalue(&t, "Y", &["X"], &["S"], &cfg, 19, 11).unwrap();
    let c = cmi_pvalue(&t, "Y", &["X"], &["S"], &cfg, 19, 12).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_ne!(a.null_samples, c.null_samples);
}

#[test]
fn bootstrap_rejects_too_few_replicates() {
    let t = gen_xor(100, 5).unwrap();
    assert!(cmi_pvalue(&t, "Y", &["X"], &["S"], &CmiConfig::default(), 18, 1).is_err());
}

#[test]
fn sampled_estimates_track_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = CmiConfig::default();
    for draw in 0..3 {
        let j = random_joint((2, 3, 3), &mut rng);
        let t = j.sample(5000, draw).unwrap();
        let est = estimate_cmi(&t, "Y", &["X"], &["S"], &cfg).unwrap();
        let exact = exact_cmi(&j);
        assert!((est.value_bits - exact).abs() <= 0.05, "{} vs {exact}", est.value_bits);
    }
}

#[test]
fn empty_conditioning_set_gives_mutual_information() {
    // X copies Y on 90% of rows: I(Y; X) = 1 - H(0.1)
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4000;
    let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let x: Vec<bool> = y.iter().map(|&b| if rng.random::<f64>() < 0.1 { !b } else { b }).collect();
    let lab = |v: &[bool]| -> Vec<Option<&str>> {
        v.iter().map(|&b| Some(if b { "1" } else { "0" })).collect()
    };
    let t = Table::new("mi", vec![Column::from_labels("Y", &lab(&y)), Column::from_labels("X", &lab(&x))]).unwrap();
    let est = estimate_cmi(&t, "Y", &["X"], &NONE, &CmiConfig::default()).unwrap();
    let h = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
    assert!((est.value_bits - (1.0 - h)).abs() < 0.03, "{}", est.value_bits);
}

#[test]
fn cross_fitting_removes_in_sample_optimism() {
    let t = gen_xor_null(400, 8).unwrap();
    let cfg = CmiConfig {
        cross_fit_folds: 5,
        ..CmiConfig::default()
    };
    let est = estimate_cmi(&t, "Y", &["X"], &["S"], &cfg).unwrap();
    assert!(est.value_bits.abs() < 0.05, "{}", est.value_bits);
    let xor = estimate_cmi(&gen_xor(400, 8).unwrap(), "Y", &["X"], &["S"], &cfg).unwrap();
    assert!(xor.value_bits > 0.9, "{}", xor.value_bits);
}

#[test]
fn role_overlaps_are_errors() {
    let t = gen_xor(50, 1).unwrap();
    let cfg = CmiConfig::default();
    assert!(estimate_cmi(&t, "Y", &["X"], &["X"], &cfg).is_err());
    assert!(estimate_cmi(&t, "Y", &["Y"], &["S"], &cfg).is_err());
    assert!(estimate_cmi(&t, "Y", &["X"], &["Y"], &cfg).is_err());
    assert!(estimate_cmi(&t, "Y", &NONE, &["S"], &cfg).is_err());
    let bad = CmiConfig { clip: 0.5, ..cfg };
    assert!(estimate_cmi(&t, "Y", &["X"], &["S"], &bad).is_err());
}

#[test]
fn estimate_json_shape() {
    let t = gen_xor(100, 1).unwrap();
    let est = cmi_pvalue(&t, "Y", &["X"], &["S"], &CmiConfig::default(), 19, 1).unwrap();
    let v = serde_json::to_value(&est).unwrap();
    for key in ["value_bits", "pvalue", "B", "n_used", "config"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let plain = serde_json::to_value(estimate_cmi(&t, "Y", &["X"], &["S"], &CmiConfig::default()).unwrap()).unwrap();
    assert!(plain.get("pvalue").is_none() && plain.get("B").is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_identity_holds(weights in prop::collection::vec(0.0f64..1.0, 27), ny in 1usize..=3, nx in 1usize..=3, ns in 1usize..=3) {
        let cells = ny * nx * ns;
        let w: Vec<f64> = weights[..cells].to_vec();
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let j = DiscreteJoint::from_weights((ny, nx, ns), w).unwrap();
        prop_assert!((exact_cmi(&j) - entropy_difference_cmi(&j)).abs() <= 1e-12);
    }
}
