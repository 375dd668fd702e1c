use admissible_core::infogram::{
    core_infogram, fair_infogram, is_admissible, select_admissible, Infogram, InfogramConfig,
};
use admissible_core::synth::{gen_correlated, read_monk};
use admissible_core::table::{Column, Table, TaskSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|j| format!("{prefix}{j}")).collect()
}

fn bits(v: &[u32]) -> Vec<Option<String>> {
    v.iter().map(|b| Some(b.to_string())).collect()
}

/// Discrete design: Y depends on A (strongly) and B (weakly); C is noise.
fn discrete_design(n: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b, mut c, mut y) = (vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let va = rng.random_range(0..3u32);
        let vb = rng.random_range(0..2u32);
        let vc = rng.random_range(0..3u32);
        let p = [0.1, 0.5, 0.9][va as usize] + if vb == 1 { 0.05 } else { -0.05 };
        a.push(va);
        b.push(vb);
        c.push(vc);
        y.push((rng.random::<f64>() < p) as u32);
    }
    Table::new(
        "discrete",
        vec![
            Column::from_labels("A", &bits(&a)),
            Column::from_labels("B", &bits(&b)),
            Column::from_labels("C", &bits(&c)),
            Column::from_labels("Y", &bits(&y)),
        ],
    )
    .unwrap()
}

#[test]
fn correlated_design_finds_core_and_flags_proxy() {
    let t = gen_correlated(500, 50, 2023).unwrap();
    let spec = TaskSpec::new("Y", names("X", 1..=50));
    let ig = core_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    let mut by_relevance: Vec<_> = ig.points.iter().collect();
    by_relevance.sort_by(|a, b| b.relevance.total_cmp(&a.relevance));
    let mut top: Vec<&str> = by_relevance[..3].iter().map(|p| p.feature.as_str()).collect();
    top.sort_unstable();
    assert_eq!(top, ["X1", "X2", "X50"]);
    assert!(ig.point("X1").unwrap().admissible);
    assert!(ig.point("X2").unwrap().admissible);
    let proxy = ig.point("X50").unwrap();
    assert!(!proxy.admissible && proxy.net_info < 0.1, "{proxy:?}");
    let selected = select_admissible(&ig);
    assert!(selected[0] == "X1" || selected[0] == "X2");
    assert!(!selected.contains(&"X50".to_string()));
}

#[test]
fn duplicated_feature_has_no_net_information() {
    let t = discrete_design(3000, 1);
    let copy = t.column("A").unwrap().clone().with_name("A_copy");
    let t = t.with_column(copy).unwrap();
    let spec = TaskSpec::new("Y", vec!["A".into(), "A_copy".into(), "C".into()]);
    let ig = core_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    for f in ["A", "A_copy"] {
        assert!(ig.point(f).unwrap().raw_net_info_bits.abs() < 0.02, "{:?}", ig.point(f));
    }
}

#[test]
fn informative_feature_admissible_noise_in_l_zone() {
    let t = discrete_design(5000, 2);
    let spec = TaskSpec::new("Y", vec!["A".into(), "B".into(), "C".into()]);
    let ig = core_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    assert!(ig.point("A").unwrap().admissible);
    assert!(!ig.point("C").unwrap().admissible);
    assert_eq!(ig.point("A").unwrap().net_info, 1.0);
    assert_eq!(ig.point("A").unwrap().relevance, 1.0);
}

/// Exact net information of each feature in the discrete design, from the
/// generating law.
fn discrete_design_exact() -> [f64; 3] {
    use admissible_core::infotheory::{exact_cmi, DiscreteJoint};
    // joint over (Y, A, B, C); the "S" slot of the oracle collects the
    // remaining features as one variable.
    let p_y = |a: usize, b: usize, y: usize| {
        let p = [0.1, 0.5, 0.9][a] + if b == 1 { 0.05 } else { -0.05 };
        if y == 1 { p } else { 1.0 - p }
    };
    let mass = 1.0 / 18.0;
    let oracle = |dims: (usize, usize, usize), cell: &dyn Fn(usize, usize, usize) -> (usize, usize)| {
        let mut pmf = vec![0.0; dims.0 * dims.1 * dims.2];
        for a in 0..3 {
            for b in 0..2 {
                for c in 0..3 {
                    for y in 0..2 {
                        let (x, s) = cell(a, b, c);
                        pmf[(y * dims.1 + x) * dims.2 + s] += mass * p_y(a, b, y);
                    }
                }
            }
        }
        exact_cmi(&DiscreteJoint::from_weights(dims, pmf).unwrap())
    };
    [
        oracle((2, 3, 6), &|a, b, c| (a, b * 3 + c)),
        oracle((2, 2, 9), &|a, b, c| (b, a * 3 + c)),
        oracle((2, 3, 6), &|a, b, c| (c, a * 2 + b)),
    ]
}

#[test]
fn net_information_sign_pattern_matches_oracle() {
    let exact = discrete_design_exact();
    assert!(exact[0] > 0.3 && exact[1] > 0.01 && exact[2] < 1e-12);
    let t = discrete_design(5000, 3);
    let spec = TaskSpec::new("Y", vec!["A".into(), "B".into(), "C".into()]);
    let ig = core_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    for (f, e) in ["A", "B", "C"].iter().zip(exact) {
        let raw = ig.point(f).unwrap().raw_net_info_bits;
        assert!((raw - e).abs() <= 0.05, "{f}: {raw} vs {e}");
    }
}

fn fair_design(n: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut z, mut noise, mut proxy, mut y) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let vs = rng.random_range(0..2u32);
        let vz = rng.random_range(0..2u32);
        let p = 0.15 + 0.35 * vs as f64 + 0.35 * vz as f64;
        s.push(vs);
        z.push(vz);
        noise.push(rng.random_range(0..3u32));
        proxy.push(if rng.random::<f64>() < 0.9 { vs } else { 1 - vs });
        y.push((rng.random::<f64>() < p) as u32);
    }
    Table::new(
        "fair",
        vec![
            Column::from_labels("S", &bits(&s)),
            Column::from_labels("S_copy", &bits(&s)),
            Column::from_labels("proxy", &bits(&proxy)),
            Column::from_labels("Z", &bits(&z)),
            Column::from_labels("noise", &bits(&noise)),
            Column::from_labels("Y", &bits(&y)),
        ],
    )
    .unwrap()
}

#[test]
fn fair_mode_separates_proxies_from_admissible_features() {
    let t = fair_design(4000, 5);
    let spec = TaskSpec::new("Y", vec!["S_copy".into(), "proxy".into(), "Z".into(), "noise".into()])
        .with_protected(vec!["S".into()]);
    let ig = fair_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    assert_eq!(ig.protected.as_deref(), Some(&["S".to_string()][..]));

    let copy = ig.point("S_copy").unwrap();
    assert!(copy.relevance > 0.5 && copy.net_info < 0.1 && !copy.admissible, "{copy:?}");
    let proxy = ig.point("proxy").unwrap();
    assert!(proxy.net_info < 0.1 && !proxy.admissible, "{proxy:?}");
    let noise = ig.point("noise").unwrap();
    assert!(noise.net_info < 0.1 && noise.relevance < 0.1, "{noise:?}");
    assert_eq!(select_admissible(&ig), ["Z"]);
}

#[test]
fn irrelevant_protected_attribute_reproduces_core_decisions() {
    let t = discrete_design(4000, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let noise: Vec<u32> = (0..4000).map(|_| rng.random_range(0..2)).collect();
    let t = t.with_column(Column::from_labels("G", &bits(&noise))).unwrap();
    let features: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
    let core = core_infogram(&t, &TaskSpec::new("Y", features.clone()), &InfogramConfig::default()).unwrap();
    let fair = fair_infogram(
        &t,
        &TaskSpec::new("Y", features).with_protected(vec!["G".into()]),
        &InfogramConfig::default(),
    )
    .unwrap();
    assert_eq!(select_admissible(&core), select_admissible(&fair));
}

#[test]
fn prescreen_keeps_the_most_relevant() {
    let t = discrete_design(2000, 7);
    let spec = TaskSpec::new("Y", vec!["A".into(), "B".into(), "C".into()]);
    let cfg = InfogramConfig {
        top_k_prescreen: 2,
        ..InfogramConfig::default()
    };
    let ig = core_infogram(&t, &spec, &cfg).unwrap();
    assert_eq!(ig.points.len(), 2);
    assert_eq!(ig.pruned.len(), 1);
    assert!(ig.point("A").is_some());
}

#[test]
fn argument_errors() {
    let t = discrete_design(200, 8);
    let cfg = InfogramConfig::default();
    assert!(core_infogram(&t, &TaskSpec::new("Y", vec!["A".into()]), &cfg).is_err());
    assert!(fair_infogram(&t, &TaskSpec::new("Y", vec!["A".into(), "B".into()]), &cfg).is_err());
    let overlap = TaskSpec::new("Y", vec!["A".into(), "B".into()]).with_protected(vec!["A".into()]);
    assert!(fair_infogram(&t, &overlap, &cfg).is_err());
    let bad = InfogramConfig { threshold_x: 1.0, ..cfg };
    assert!(core_infogram(&t, &TaskSpec::new("Y", vec!["A".into(), "B".into()]), &bad).is_err());
}

#[test]
fn json_schema_and_round_trip() {
    let t = discrete_design(300, 9);
    let spec = TaskSpec::new("Y", vec!["A".into(), "B".into()]);
    let ig = core_infogram(&t, &spec, &InfogramConfig::default()).unwrap();
    let v = serde_json::to_value(&ig).unwrap();
    assert_eq!(v["mode"], "core");
    for key in ["feature", "relevance", "net_info", "raw_relevance", "raw_net_info_bits", "admissible"] {
        assert!(v["points"][0].get(key).is_some(), "missing {key}");
    }
    let back: Infogram = serde_json::from_value(v).unwrap();
    assert_eq!(back, ig);
}

proptest! {
    #[test]
    fn raising_threshold_y_never_adds_features(
        coords in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20),
        tx in 0.01f64..0.99, ty in 0.01f64..0.99, bump in 0.0f64..0.5,
    ) {
        let t = discrete_design(60, 1);
        let spec = TaskSpec::new("Y", vec!["A".into(), "B".into()]);
        let cfg = InfogramConfig { cmi_cfg: admissible_core::infotheory::CmiConfig {
            learner_params: admissible_core::learner::BoostParams { n_rounds: 1, ..Default::default() },
            ..Default::default()
        }, ..Default::default() };
        let mut ig = core_infogram(&t, &spec, &cfg).unwrap();
        ig.points = coords.iter().enumerate().map(|(i, &(r, c))| admissible_core::infogram::InfogramPoint {
            feature: format!("F{i}"), relevance: r, net_info: c, raw_relevance: r, raw_net_info_bits: c,
            admissible: is_admissible(r, c, tx, ty),
        }).collect();
        let low: std::collections::HashSet<String> = select_admissible(&ig.reflagged(tx, ty)).into_iter().collect();
        let high = select_admissible(&ig.reflagged(tx, (ty + bump).min(0.99)));
        prop_assert!(high.iter().all(|f| low.contains(f)));
    }
}

/// All 432 attribute combinations labelled by `(a1 == a2) or (a5 == 1)`.
fn monk1_rule_table() -> Table {
    let mut text = String::new();
    for a1 in 1..=3 {
        for a2 in 1..=3 {
            for a3 in 1..=2 {
                for a4 in 1..=3 {
                    for a5 in 1..=4 {
                        for a6 in 1..=2 {
                            let y = (a1 == a2 || a5 == 1) as u32;
                            text.push_str(&format!("{y} {a1} {a2} {a3} {a4} {a5} {a6} row\n"));
                        }
                    }
                }
            }
        }
    }
    read_monk(&text).unwrap()
}

#[test]
fn monk1_rule_excludes_unused_attributes() {
    let t = monk1_rule_table();
    let ig = core_infogram(&t, &TaskSpec::new("y", names("X", 1..=6)), &InfogramConfig::default()).unwrap();
    let selected = select_admissible(&ig);
    for unused in ["X3", "X4", "X6"] {
        let p = ig.point(unused).unwrap();
        assert!(!p.admissible && p.net_info < 0.1, "{p:?}");
    }
    assert!(selected.contains(&"X2".to_string()) && selected.contains(&"X5".to_string()), "{selected:?}");
    // X1 carries the same information as X2 once X2 is known
    assert!(ig.point("X1").unwrap().net_info > 0.5);
}
