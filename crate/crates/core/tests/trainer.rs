use hedon_core::dataset::{build_graph, split_dataset, AttributeBlock, AttributeLayout, Dataset};
use hedon_core::geo::DetourRoadModel;
use hedon_core::model::{instance_loss_and_grad, GradientShard, Instance, ModelParams, NeighborTerm, NeighborValue, VarKey};
use hedon_core::synth::{generate_city, BoundingBox, SynthConfig};
use hedon_core::trainer::*;
use hedon_core::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn layout() -> AttributeLayout {
    AttributeLayout {
        blocks: vec![AttributeBlock {
            name: "type".into(),
            values: vec!["a".into()],
        }],
    }
}

fn small_problem(seed: u64, unknown: UnknownBlocks) -> TrainingProblem {
    let city = generate_city(&SynthConfig {
        n_blocks: 150,
        n_facilities: 300,
        bbox: BoundingBox::square_km(31.2, 121.5, 8.0),
        residential_extent: 1.0,
        seed,
        ..Default::default()
    })
    .unwrap();
    let graph = build_graph(&city.pois, 1.0, &DetourRoadModel::default()).unwrap();
    let dataset = Dataset::new(city.pois).unwrap();
    let split = split_dataset(&dataset.priced_block_ids(), seed).unwrap();
    TrainingProblem::compile(&dataset, &graph, &split, unknown).unwrap()
}

/// Bit patterns of the loss and every touched gradient entry.
fn bits(shard: &GradientShard) -> (u64, Vec<(VarKey, u64)>) {
    (shard.loss().to_bits(), shard.iter().map(|(k, g)| (k, g.to_bits())).collect())
}

fn config(max_epochs: usize) -> TrainingConfig {
    TrainingConfig {
        max_epochs,
        ..Default::default()
    }
}

#[test]
fn update_arithmetic_and_projection() {
    let mut params = ModelParams::initialize(layout(), ["p".to_string(), "q".to_string()], 0.0);
    params.prices.values_mut().copy_from_slice(&[10.0, 1.0]);
    params.theta = vec![0.5, -0.5];
    let mut g = GradientShard::new(2, 2);
    g.add(VarKey::Price(0), 2.0);
    g.add(VarKey::Price(1), 5.0);
    g.add(VarKey::Theta(1), -4.0);
    let steps = StepSizes {
        theta: 0.25,
        phi: 1.0,
        prices: 1.0,
    };
    let out = apply_update(&params, &g, &steps);
    assert_eq!(out.prices.values(), &[8.0, 0.0]);
    assert_eq!(out.theta, vec![0.5, 0.5]);

    let out = apply_update(&params, &GradientShard::new(2, 2), &steps);
    assert_eq!(out, params);
}

#[test]
fn empty_map_has_zero_loss() {
    let params = ModelParams::initialize(layout(), Vec::<String>::new(), 1.0);
    let shards = map_phase(&[], &params, 3).unwrap();
    assert_eq!(shards.len(), 3);
    let total = reduce_phase(&shards).unwrap();
    assert_eq!(total.loss(), 0.0);
    assert_eq!(total.iter().count(), 0);
    assert!(reduce_phase(&[]).is_none());
}

#[test]
fn shared_facility_receives_summed_gradient() {
    // Price 10 for facility `f` (index 0); theta zero so S = 0.5.
    let params = ModelParams::initialize(layout(), ["f".to_string()], 10.0);
    let term = |value, d: f64| NeighborTerm {
        value,
        distances: [d, 1.3 * d],
    };
    let a = Instance {
        id: "a".into(),
        target: Some(8.0),
        slots: vec![0],
        neighbors: vec![term(NeighborValue::Learnable(0), 0.4)],
    };
    let b = Instance {
        id: "b".into(),
        target: Some(9.0),
        slots: vec![0],
        neighbors: vec![term(NeighborValue::Learnable(0), 0.3), term(NeighborValue::Fixed(20.0), 0.3)],
    };
    // a: prediction 5, residual factor 2(5 - 8) = -6, d/du = -6 * 0.5 * 1 = -3.
    // b: prediction 7.5, factor -3, d/du = -3 * 0.5 * 0.5 = -0.75.
    let shards = map_phase(&[a.clone(), b.clone()], &params, 1).unwrap();
    let total = reduce_phase(&shards).unwrap();
    assert_eq!(total.get(VarKey::Price(0)), Some(-3.75));
    assert_eq!(total.loss(), 9.0 + 2.25);

    let (_, ga) = instance_loss_and_grad(&a, &params).unwrap();
    let (_, gb) = instance_loss_and_grad(&b, &params).unwrap();
    assert_eq!(ga.get(VarKey::Price(0)).unwrap() + gb.get(VarKey::Price(0)).unwrap(), -3.75);

    // One update moves the price by the combined gradient.
    let steps = StepSizes {
        theta: 0.0,
        phi: 0.0,
        prices: 0.1,
    };
    let out = apply_update(&params, &total, &steps);
    assert_eq!(out.prices.value(0), 10.0 + 0.375);
}

#[test]
fn shard_counts_and_orders_agree_bitwise() {
    let problem = small_problem(3, UnknownBlocks::Learn);
    let mut params = problem.initial.clone();
    params.phi = [-0.7, -0.2];
    params.theta.iter_mut().enumerate().for_each(|(i, t)| *t = 0.1 * i as f64 - 0.3);
    let reference = bits(&reduce_phase(&map_phase(&problem.train, &params, 1).unwrap()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in [2, 8, 13] {
        let mut shards = map_phase(&problem.train, &params, k).unwrap();
        assert_eq!(shards.len(), k);
        assert_eq!(bits(&reduce_phase(&shards).unwrap()), reference);
        for _ in 0..5 {
            shards.shuffle(&mut rng);
            assert_eq!(bits(&reduce_phase(&shards).unwrap()), reference);
        }
    }
    let mut shuffled = problem.train.clone();
    shuffled.shuffle(&mut rng);
    assert_eq!(bits(&reduce_phase(&map_phase(&shuffled, &params, 4).unwrap()).unwrap()), reference);
}

#[test]
fn threshold_above_initial_loss_stops_after_one_epoch() {
    let problem = small_problem(1, UnknownBlocks::Learn);
    let cfg = TrainingConfig {
        convergence_threshold: f64::MAX,
        ..config(50)
    };
    let out = train(&problem, &cfg, |_| {}).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert_eq!(out.final_params.prices, problem.initial.prices);
    assert_eq!(out.final_params.theta, problem.initial.theta);
}

#[test]
fn plain_descent_is_monotone_with_small_rates() {
    let problem = small_problem(2, UnknownBlocks::Learn);
    let cfg = TrainingConfig {
        optimizer: Optimizer::Descent,
        learning_rates: LearningRates {
            theta: 0.5,
            phi: 0.5,
            prices: 10.0,
        },
        ..config(80)
    };
    let mut losses = Vec::new();
    train(&problem, &cfg, |r| losses.push(r.loss)).unwrap();
    assert_eq!(losses.len(), 80);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
    assert!(losses[79] < 0.5 * losses[0]);
}

#[test]
fn training_is_bit_reproducible_and_shard_independent() {
    let problem = small_problem(5, UnknownBlocks::Learn);
    let a = train(&problem, &config(60), |_| {}).unwrap();
    let b = train(&problem, &config(60), |_| {}).unwrap();
    assert_eq!(a.final_params, b.final_params);
    assert_eq!(a.best, b.best);
    let c = train(&problem, &TrainingConfig { shard_count: 1, ..config(60) }, |_| {}).unwrap();
    assert_eq!(a.final_params.prices, c.final_params.prices);
    assert_eq!(a.final_params.theta, c.final_params.theta);
    let losses = |o: &TrainingOutcome| o.reports.iter().map(|r| r.loss).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&c));
}

#[test]
fn best_snapshot_has_lowest_validation_error() {
    let problem = small_problem(6, UnknownBlocks::Learn);
    let out = train(&problem, &config(40), |_| {}).unwrap();
    let best = problem.validation_mae(&out.best).unwrap();
    for r in &out.reports {
        assert!(best <= r.validation_mae.unwrap());
    }
    assert!(best <= problem.validation_mae(&out.final_params).unwrap());
    assert_eq!(out.best.meta.epoch, Some(out.best_epoch));
    assert_eq!(out.final_params.meta.epoch, Some(40));
}

#[test]
fn oversized_rates_trip_the_divergence_guard() {
    let problem = small_problem(7, UnknownBlocks::Learn);
    let cfg = TrainingConfig {
        optimizer: Optimizer::Descent,
        learning_rates: LearningRates {
            theta: 1e3,
            phi: 1e3,
            prices: 1e5,
        },
        ..config(50)
    };
    match train(&problem, &cfg, |_| {}) {
        Err(Error::Diverged { loss, initial, .. }) => assert!(loss > 10.0 * initial),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    assert!(TrainingConfig::default().validate().is_ok());
    let bad = [
        TrainingConfig { max_epochs: 0, ..Default::default() },
        TrainingConfig { shard_count: 0, ..Default::default() },
        TrainingConfig { convergence_threshold: -1.0, ..Default::default() },
        TrainingConfig { convergence_threshold: f64::NAN, ..Default::default() },
        TrainingConfig { radius_km: 0.0, ..Default::default() },
        TrainingConfig {
            learning_rates: LearningRates { theta: 0.0, phi: 1.0, prices: 1.0 },
            ..Default::default()
        },
        TrainingConfig {
            learning_rates: LearningRates { theta: 1.0, phi: f64::INFINITY, prices: 1.0 },
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
    }
    let json = serde_json::to_string(&TrainingConfig::default()).unwrap();
    let back: TrainingConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, TrainingConfig::default());
    assert_eq!(back.digest(), TrainingConfig::default().digest());
    assert_ne!(config(7).digest(), config(8).digest());
    assert!(serde_json::from_str::<TrainingConfig>(r#"{"learning_rate": 1}"#).is_err());
}

#[test]
fn only_training_prices_are_fixed() {
    let learn = small_problem(8, UnknownBlocks::Learn);
    for id in learn.known.keys() {
        assert!(!learn.initial.prices.contains(id));
    }
    let held_out: Vec<&String> = learn.validation.iter().chain(&learn.test).map(|i| &i.id).collect();
    assert!(held_out.iter().any(|id| learn.initial.prices.contains(id)));
    assert!(learn.initial.prices.iter().all(|(_, p)| p == learn.city_mean));

    let exclude = small_problem(8, UnknownBlocks::Exclude);
    assert!(exclude.initial.prices.iter().all(|(id, _)| id.starts_with('f')));
    assert!(exclude.initial.prices.len() < learn.initial.prices.len());
    let out = train(&exclude, &config(20), |_| {}).unwrap();
    assert!(out.reports.last().unwrap().loss < out.reports[0].loss);
}

#[test]
fn empty_training_split_is_rejected() {
    let city = generate_city(&SynthConfig {
        n_blocks: 20,
        n_facilities: 20,
        bbox: BoundingBox::square_km(31.2, 121.5, 3.0),
        residential_extent: 1.0,
        ..Default::default()
    })
    .unwrap();
    let graph = build_graph(&city.pois, 1.0, &DetourRoadModel::default()).unwrap();
    let dataset = Dataset::new(city.pois).unwrap();
    let mut split = split_dataset(&dataset.priced_block_ids(), 0).unwrap();
    split.train.clear();
    assert!(TrainingProblem::compile(&dataset, &graph, &split, UnknownBlocks::Learn).is_err());
}
