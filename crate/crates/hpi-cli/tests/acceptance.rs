//! Release gate: one test per acceptance criterion, each printing a
//! `[PASS]` line (visible with `--nocapture`) and enforcing its own
//! runtime budget. Tolerances are pinned in the asserts.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use hpi::rng::stream;
use hpi::{
    binary_switch_space, config, discrete_derivative, enumerate_coalitions, faithfulness, fsii,
    moebius_transform, monotonicity_violations, shapley_values, shapley_values_marginal, Atom,
    Coalition, ConfigSpace, Configuration, GameSpec, GameValues, HyperparameterDomain,
    MissingPolicy, OptimizerSpec, PerturbedOracle, Player, ProductIndicatorOracle,
    RandomKAdditiveOracle, SamplingPlan, SearchPlan, TabularOracle,
};

/// Two players: a binary switch and a knob with `m + 1` settings; score is
/// the number of coordinates matching the optimum `(1, m)`.
fn switch_knob_space(m: i64) -> (ConfigSpace, Configuration, Configuration) {
    let players = vec![
        Player::new("switch", HyperparameterDomain::discrete([0i64, 1])),
        Player::new(
            "knob",
            HyperparameterDomain::discrete((0..=m).map(Atom::Int).collect::<Vec<_>>()),
        ),
    ];
    let baseline = config![0, 0];
    let optimum = config![1, m];
    (
        ConfigSpace::new(players, baseline.clone()).unwrap(),
        baseline,
        optimum,
    )
}

fn indicator_oracle(space: &ConfigSpace, optimum: &Configuration) -> hpi::IndicatorSumOracle {
    hpi::IndicatorSumOracle::new(space.clone(), optimum.clone()).unwrap()
}

#[test]
fn criterion_1_two_player_indices_exact() {
    let start = Instant::now();
    for m in [2i64, 5, 9] {
        let (space, baseline, optimum) = switch_knob_space(m);
        let oracle = indicator_oracle(&space, &optimum);
        let pair = Coalition::full(2).unwrap();

        // Tunability from the all-zero baseline: each player adds one unit,
        // no interaction.
        let tun = GameSpec::tunability(space.clone(), baseline.clone(), SearchPlan::ExactEnumeration)
            .unwrap()
            .evaluate(&oracle)
            .unwrap();
        let sv = shapley_values(&tun);
        assert!((sv.singleton_scores()[0] - 1.0).abs() <= 1e-12);
        assert!((sv.singleton_scores()[1] - 1.0).abs() <= 1e-12);
        let inter = fsii(&tun, 2).unwrap();
        assert!(inter.get(pair).unwrap().abs() <= 1e-12);

        // Tunability from the optimum: nothing left to gain anywhere.
        let flat = GameSpec::tunability(space.clone(), optimum.clone(), SearchPlan::ExactEnumeration)
            .unwrap()
            .evaluate(&oracle)
            .unwrap();
        for v in shapley_values(&flat).singleton_scores() {
            assert!(v.abs() <= 1e-12);
        }
        assert!(fsii(&flat, 2).unwrap().get(pair).unwrap().abs() <= 1e-12);

        // Sensitivity is baseline-independent here: variance of each
        // indicator under uniform sampling.
        let expected_knob = m as f64 / ((m + 1) as f64 * (m + 1) as f64);
        for base in [&baseline, &optimum] {
            let sens =
                GameSpec::sensitivity(space.clone(), base.clone(), SamplingPlan::ExactEnumeration)
                    .unwrap()
                    .evaluate(&oracle)
                    .unwrap();
            let sv = shapley_values(&sens);
            assert!((sv.singleton_scores()[0] - 0.25).abs() <= 1e-12);
            assert!((sv.singleton_scores()[1] - expected_knob).abs() <= 1e-12);
            assert!(fsii(&sens, 2).unwrap().get(pair).unwrap().abs() <= 1e-12);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1s");
    println!("[PASS] criterion 1: two-player tunability and sensitivity indices, m in {{2, 5, 9}} ({elapsed:?})");
}

#[test]
fn criterion_2_golden_tables_and_monotonicity() {
    let start = Instant::now();
    let m = 9i64;
    let (space, baseline, optimum) = switch_knob_space(m);
    let oracle = indicator_oracle(&space, &optimum);

    let tun = GameSpec::tunability(space.clone(), baseline.clone(), SearchPlan::ExactEnumeration)
        .unwrap()
        .evaluate(&oracle)
        .unwrap();
    for (got, want) in tun.values().iter().zip([0.0, 1.0, 1.0, 2.0]) {
        assert!((got - want).abs() <= 1e-12);
    }

    let flat = GameSpec::tunability(space.clone(), optimum.clone(), SearchPlan::ExactEnumeration)
        .unwrap()
        .evaluate(&oracle)
        .unwrap();
    for (got, want) in flat.values().iter().zip([2.0, 2.0, 2.0, 2.0]) {
        assert!((got - want).abs() <= 1e-12);
    }

    let q = m as f64 / ((m + 1) as f64 * (m + 1) as f64);
    let sens = GameSpec::sensitivity(space.clone(), baseline, SamplingPlan::ExactEnumeration)
        .unwrap()
        .evaluate(&oracle)
        .unwrap();
    for (got, want) in sens.values().iter().zip([0.0, 0.25, q, 0.25 + q]) {
        assert!((got - want).abs() <= 1e-12);
    }

    // Two binary switches scored by the full-match indicator: adding the
    // second switch to {1} lowers the variance, so sensitivity is not
    // monotone and the checker has to say where.
    let two = binary_switch_space(2).unwrap();
    let all_match = ProductIndicatorOracle::new(two.clone(), config![1, 1]).unwrap();
    let nonmono = GameSpec::sensitivity(two, config![1, 1], SamplingPlan::ExactEnumeration)
        .unwrap()
        .evaluate(&all_match)
        .unwrap();
    for (got, want) in nonmono.values().iter().zip([0.0, 0.25, 0.25, 0.1875]) {
        assert!((got - want).abs() <= 1e-12);
    }
    let violations = monotonicity_violations(&nonmono);
    let singleton_over_pair = violations.iter().any(|(small, big)| {
        small.mask() == 0b01 && big.mask() == 0b11
    });
    assert!(
        singleton_over_pair,
        "expected v({{0}}) > v({{0,1}}) among {violations:?}"
    );
    let elapsed = start.elapsed();
    println!("[PASS] criterion 2: golden game tables and the non-monotone sensitivity witness ({elapsed:?})");
}

/// All configurations of a discrete space, in odometer order.
fn all_configs(space: &ConfigSpace) -> Vec<Configuration> {
    let domains: Vec<&[Atom]> = space
        .players()
        .iter()
        .map(|p| match &p.domain {
            HyperparameterDomain::Discrete { values } => values.as_slice(),
            HyperparameterDomain::Continuous { .. } => unreachable!("discrete spaces only"),
        })
        .collect();
    let mut out = vec![Vec::new()];
    for domain in domains {
        let mut next = Vec::with_capacity(out.len() * domain.len());
        for prefix in &out {
            for atom in domain {
                let mut row = prefix.clone();
                row.push(atom.clone());
                next.push(row);
            }
        }
        out = next;
    }
    out.into_iter().map(Configuration::new).collect()
}

#[test]
fn criterion_3_tunability_attributions_nonnegative() {
    let start = Instant::now();
    for i in 0..200u64 {
        let mut rng = stream(1000 + i, &[]);
        let n = 1 + (rng.random::<u64>() % 6) as usize;
        let players: Vec<Player> = (0..n)
            .map(|p| {
                let size = 2 + (rng.random::<u64>() % 3) as usize;
                let values: Vec<Atom> = (0..size as i64).map(Atom::Int).collect();
                Player::new(format!("p{p}"), HyperparameterDomain::discrete(values))
            })
            .collect();
        let space = ConfigSpace::new(
            players,
            (0..n).map(|_| Atom::Int(0)).collect::<Configuration>(),
        )
        .unwrap();
        let rows: Vec<(Configuration, f64)> = all_configs(&space)
            .into_iter()
            .map(|c| (c, rng.random::<f64>()))
            .collect();
        let baseline = rows[(rng.random::<u64>() as usize) % rows.len()].0.clone();
        let oracle = TabularOracle::from_rows(space.clone(), rows, MissingPolicy::Error, None)
            .unwrap();
        let game = GameSpec::tunability(space, baseline, SearchPlan::ExactEnumeration)
            .unwrap()
            .evaluate(&oracle)
            .unwrap();
        for v in shapley_values(&game).singleton_scores() {
            assert!(v >= -1e-12, "negative tunability attribution {v}");
        }
        for (i, v) in moebius_transform(&game).singleton_scores().iter().enumerate() {
            assert!(*v >= -1e-12, "negative singleton interaction {v} for player {i}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    println!("[PASS] criterion 3: tunability attributions nonnegative over 200 random spaces ({elapsed:?})");
}

#[test]
fn criterion_4_perturbation_bounds() {
    let start = Instant::now();
    for i in 0..100u64 {
        let mut rng = stream(4000 + i, &[]);
        let n = 3 + (rng.random::<u64>() % 6) as usize; // 3..=8
        let space = binary_switch_space(n).unwrap();
        let oracle = RandomKAdditiveOracle::new(space.clone(), n, &mut rng).unwrap();
        let baseline: Configuration = (0..n).map(|_| Atom::Int(0)).collect();
        let target: Configuration = (0..n).map(|_| Atom::Int(1)).collect();
        let spec = GameSpec::ablation(space.clone(), baseline, target).unwrap();
        let base_game = spec.evaluate(&oracle).unwrap();

        for eps in [0.01f64, 0.1] {
            let noisy = PerturbedOracle::new(oracle.clone(), eps, 99 + i).unwrap();
            let pert_game = spec.evaluate(&noisy).unwrap();

            // Per-player attributions move at most 2 epsilon.
            let sv0 = shapley_values(&base_game);
            let sv1 = shapley_values(&pert_game);
            for (a, b) in sv0.singleton_scores().iter().zip(sv1.singleton_scores()) {
                assert!(
                    (a - b).abs() <= 2.0 * eps + 1e-12,
                    "attribution moved {} > 2*{eps}",
                    (a - b).abs()
                );
            }

            // Discrete derivatives of order k move at most 2^k epsilon,
            // since they sum 2^k single evaluations.
            let empty = Coalition::empty(n).unwrap();
            for s in enumerate_coalitions(n).unwrap() {
                if s.is_empty() {
                    continue;
                }
                let d0 = discrete_derivative(&base_game, s, empty).unwrap();
                let d1 = discrete_derivative(&pert_game, s, empty).unwrap();
                let bound = (1u64 << s.len()) as f64 * eps + 1e-9;
                assert!(
                    (d0 - d1).abs() <= bound,
                    "order-{} derivative moved {} > {bound}",
                    s.len(),
                    (d0 - d1).abs()
                );
            }

            // The same budget carries over to order-k interaction scores.
            for k in 1..=n.min(3) {
                let f0 = fsii(&base_game, k).unwrap();
                let f1 = fsii(&pert_game, k).unwrap();
                let bound = (1u64 << k) as f64 * eps + 1e-9;
                for (c, v0) in f0.iter() {
                    let v1 = f1.get(c).unwrap();
                    assert!(
                        (v0 - v1).abs() <= bound,
                        "order-{k} score for {c} moved {} > {bound}",
                        (v0 - v1).abs()
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    println!("[PASS] criterion 4: perturbation moves attributions by at most 2eps and order-k scores by 2^k eps ({elapsed:?})");
}

fn random_game(i: u64) -> GameValues {
    let mut rng = stream(5000 + i, &[]);
    let n = 2 + (rng.random::<u64>() % 7) as usize; // 2..=8
    let values: Vec<f64> = (0..1usize << n)
        .map(|_| rng.random_range(-10.0..10.0))
        .collect();
    GameValues::from_table(values).unwrap()
}

#[test]
fn criterion_5_index_identities() {
    let start = Instant::now();
    for i in 0..100u64 {
        let game = random_game(i);
        let n = game.n();

        let sv = shapley_values(&game);
        let sv_marginal = shapley_values_marginal(&game);
        let mi = moebius_transform(&game);

        // Order-1 least-squares fit is the Shapley value.
        let f1 = fsii(&game, 1).unwrap();
        for (a, b) in f1.singleton_scores().iter().zip(sv.singleton_scores()) {
            assert!((a - b).abs() <= 1e-9);
        }

        // Full-order fit is the interaction decomposition itself.
        let fn_ = fsii(&game, n).unwrap();
        for (c, v) in fn_.iter() {
            assert!((v - mi.get(c).unwrap()).abs() <= 1e-9);
        }

        // Both attribution routes agree.
        for (a, b) in sv
            .singleton_scores()
            .iter()
            .zip(sv_marginal.singleton_scores())
        {
            assert!((a - b).abs() <= 1e-10);
        }

        // The interaction decomposition reconstructs the table.
        let rebuilt = hpi::reconstruct_table(&mi);
        for (a, b) in rebuilt.iter().zip(game.values()) {
            assert!((a - b).abs() <= 1e-12);
        }

        // Attributions split the full gain.
        let total: f64 = sv.singleton_scores().iter().sum();
        assert!((total - (game.grand_value() - game.empty_value())).abs() <= 1e-10);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60s");
    println!("[PASS] criterion 5: index identities on 100 random games ({elapsed:?})");
}

#[test]
fn criterion_6_faithfulness_curve() {
    let start = Instant::now();
    let mut case = 0u64;
    for n in 4..=8usize {
        for k_star in 1..=3usize {
            case += 1;
            let mut rng = stream(6000 + case, &[]);
            let space = binary_switch_space(n).unwrap();
            let oracle = RandomKAdditiveOracle::new(space.clone(), k_star, &mut rng).unwrap();
            let baseline: Configuration = (0..n).map(|_| Atom::Int(0)).collect();
            let target: Configuration = (0..n).map(|_| Atom::Int(1)).collect();
            let game = GameSpec::ablation(space, baseline, target)
                .unwrap()
                .evaluate(&oracle)
                .unwrap();

            let mut previous = f64::NEG_INFINITY;
            for k in 1..=n {
                let fit = faithfulness(&game, &fsii(&game, k).unwrap()).unwrap();
                assert!(
                    fit.r_squared >= previous - 1e-9,
                    "r_squared fell from {previous} to {} at order {k}",
                    fit.r_squared
                );
                previous = fit.r_squared;
                if k == k_star {
                    assert!(
                        (fit.r_squared - 1.0).abs() <= 1e-9,
                        "order {k_star} should explain a {k_star}-additive game, got {}",
                        fit.r_squared
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    println!("[PASS] criterion 6: faithfulness curve is non-decreasing and saturates at the generating order ({elapsed:?})");
}

#[test]
fn criterion_7_optimizer_bias_signatures() {
    let start = Instant::now();

    // (a) A perfect optimizer leaves no gap anywhere.
    let (space, baseline, optimum) = switch_knob_space(9);
    let oracle = indicator_oracle(&space, &optimum);
    let perfect = GameSpec::optimizer_bias(
        space.clone(),
        baseline.clone(),
        OptimizerSpec::VirtualBest {
            members: vec![OptimizerSpec::ExactMaximizer],
        },
        SearchPlan::ExactEnumeration,
    )
    .unwrap()
    .evaluate(&oracle)
    .unwrap();
    for v in perfect.values() {
        assert!(v.abs() <= 1e-12);
    }
    for v in moebius_transform(&perfect).iter().map(|(_, v)| v) {
        assert!(v.abs() <= 1e-12);
    }
    for v in shapley_values(&perfect).singleton_scores() {
        assert!(v.abs() <= 1e-12);
    }

    // (b) The coordinate-wise tuner cannot climb a score that rewards only
    // the joint move, and the gap shows up as a negative interaction.
    let two = binary_switch_space(2).unwrap();
    let valley = ProductIndicatorOracle::new(two.clone(), config![1, 1]).unwrap();
    let tuner_game = GameSpec::optimizer_bias(
        two.clone(),
        config![0, 0],
        OptimizerSpec::IndependentTuner {
            per_player_budget: 64,
            seed: 3,
        },
        SearchPlan::ExactEnumeration,
    )
    .unwrap()
    .evaluate(&valley)
    .unwrap();
    assert!((tuner_game.grand_value() - (-1.0)).abs() <= 1e-12);
    let pair = fsii(&tuner_game, 2)
        .unwrap()
        .get(Coalition::full(2).unwrap())
        .unwrap();
    assert!(pair < 0.0, "expected a negative pair interaction, got {pair}");

    // (c) Freezing one player of a separable score puts the whole gap on
    // that player.
    let frozen = 1usize;
    let blinded_game = GameSpec::optimizer_bias(
        space,
        baseline,
        OptimizerSpec::Blinded {
            inner: Box::new(OptimizerSpec::ExactMaximizer),
            frozen_players: vec![frozen],
        },
        SearchPlan::ExactEnumeration,
    )
    .unwrap()
    .evaluate(&oracle)
    .unwrap();
    let sv = shapley_values(&blinded_game);
    assert!(sv.singleton_scores()[frozen] < 0.0);
    for (i, v) in sv.singleton_scores().iter().enumerate() {
        if i != frozen {
            assert!(v.abs() <= 1e-9, "player {i} should be clean, got {v}");
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10s");
    println!("[PASS] criterion 7: optimizer-bias signatures (perfect, coordinate-wise, blinded) ({elapsed:?})");
}

#[test]
fn criterion_8_shared_batch_matches_exact() {
    let start = Instant::now();
    // Four six-valued knobs: 1,296 configurations, random scores.
    let players: Vec<Player> = (0..4)
        .map(|i| {
            Player::new(
                format!("p{i}"),
                HyperparameterDomain::discrete((0..6i64).map(Atom::Int).collect::<Vec<_>>()),
            )
        })
        .collect();
    let space = ConfigSpace::new(players, config![0, 0, 0, 0]).unwrap();
    let mut rng = stream(31337, &[]);
    let rows: Vec<(Configuration, f64)> = all_configs(&space)
        .into_iter()
        .map(|c| (c, rng.random::<f64>()))
        .collect();
    assert_eq!(rows.len(), 1296);
    let oracle =
        TabularOracle::from_rows(space.clone(), rows, MissingPolicy::Error, None).unwrap();

    let exact = GameSpec::tunability(
        space.clone(),
        config![0, 0, 0, 0],
        SearchPlan::ExactEnumeration,
    )
    .unwrap()
    .evaluate(&oracle)
    .unwrap();
    // 10,000 shared draws hit each coalition's best grid point many times
    // over in expectation, so the sampled maximum is the true maximum.
    let sampled = GameSpec::tunability(
        space,
        config![0, 0, 0, 0],
        SearchPlan::RandomSearch {
            budget: 10_000,
            seed: 0,
        },
    )
    .unwrap()
    .evaluate(&oracle)
    .unwrap();

    for (a, b) in exact.values().iter().zip(sampled.values()) {
        assert_eq!(a, b, "sampled maximum missed the true maximum");
    }
    let sv_exact = shapley_values(&exact);
    let sv_sampled = shapley_values(&sampled);
    for (a, b) in sv_exact
        .singleton_scores()
        .iter()
        .zip(sv_sampled.singleton_scores())
    {
        assert!((a - b).abs() <= 1e-12);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5s");
    println!("[PASS] criterion 8: budget-10,000 shared batch reproduces exact tunability on 1,296 configurations ({elapsed:?})");
}

#[test]
fn criterion_9_jobs_do_not_change_bytes() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let space_path = dir.path().join("space.json");
    std::fs::write(
        &space_path,
        r#"{
            "players": [
                {"name": "a", "domain": {"kind": "discrete", "values": [0, 1]}},
                {"name": "b", "domain": {"kind": "discrete", "values": [0, 1]}},
                {"name": "c", "domain": {"kind": "discrete", "values": [0, 1]}},
                {"name": "d", "domain": {"kind": "discrete", "values": [0, 1]}},
                {"name": "e", "domain": {"kind": "discrete", "values": [0, 1]}}
            ],
            "default": [0, 0, 0, 0, 0]
        }"#,
    )
    .unwrap();

    // Two manifests: a sampled search game and a sampled expectation game,
    // each fanning out into every artifact kind.
    let manifests = [
        (
            "tunability.json",
            r#"{
                "space": "space.json",
                "oracle": {"kind": "k-additive", "k": 3, "seed": 17},
                "game": {"kind": "tunability", "mode": "rs:5000"},
                "indices": [
                    {"kind": "sv"},
                    {"kind": "moebius", "upset_csv": true},
                    {"kind": "fsii", "order": 2, "dot": true, "threshold": 0.05}
                ],
                "faithfulness_max_order": 3,
                "out_dir": "unused",
                "seed": 7
            }"#,
        ),
        (
            "sensitivity.json",
            r#"{
                "space": "space.json",
                "oracle": {"kind": "k-additive", "k": 2, "seed": 23},
                "game": {"kind": "sensitivity", "mode": "mc:4000"},
                "indices": [{"kind": "fsii", "order": 2, "upset_csv": true}],
                "out_dir": "unused",
                "seed": 11
            }"#,
        ),
    ];

    for (name, manifest) in manifests {
        let manifest_path = dir.path().join(name);
        std::fs::write(&manifest_path, manifest).unwrap();
        let mut outputs: Vec<std::collections::BTreeMap<String, Vec<u8>>> = Vec::new();
        for jobs in ["1", "8"] {
            let out_dir = dir.path().join(format!("{name}-j{jobs}"));
            let status = Command::new(env!("CARGO_BIN_EXE_hpi"))
                .args([
                    "run",
                    "--manifest",
                    manifest_path.to_str().unwrap(),
                    "--jobs",
                    jobs,
                    "--out",
                    out_dir.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success());
            outputs.push(read_dir_bytes(&out_dir));
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(
            outputs[0].keys().collect::<Vec<_>>(),
            outputs[1].keys().collect::<Vec<_>>()
        );
        for (file, bytes) in &outputs[0] {
            assert_eq!(
                bytes, &outputs[1][file],
                "{file} differs between --jobs 1 and --jobs 8"
            );
        }
    }
    let elapsed = start.elapsed();
    println!("[PASS] criterion 9: manifest outputs byte-identical at --jobs 1 and --jobs 8 ({elapsed:?})");
}

fn read_dir_bytes(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            )
        })
        .collect()
}
