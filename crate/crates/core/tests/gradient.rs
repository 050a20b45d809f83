use hedon_core::dataset::{AttributeBlock, AttributeLayout};
use hedon_core::model::{forward, instance_loss, instance_loss_and_grad, Instance, ModelParams, NeighborTerm, NeighborValue, VarKey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BLOCKS: [usize; 3] = [2, 4, 3];

fn layout() -> AttributeLayout {
    AttributeLayout {
        blocks: BLOCKS
            .iter()
            .enumerate()
            .map(|(b, &n)| AttributeBlock {
                name: format!("a{b}"),
                values: (0..n).map(|i| format!("v{i}")).collect(),
            })
            .collect(),
    }
}

/// Random instance with `k` neighbors over a table of `k` learnable prices.
fn random_case(rng: &mut ChaCha8Rng, k: usize) -> (Instance, ModelParams) {
    let layout = layout();
    let ids: Vec<String> = (0..k).map(|j| format!("p{j}")).collect();
    let mut params = ModelParams::initialize(layout.clone(), ids, 0.0);
    for v in params.prices.values_mut() {
        *v = rng.random_range(1.0..100.0);
    }
    for t in &mut params.theta {
        *t = rng.random_range(-1.5..1.5);
    }
    params.phi = [rng.random_range(-3.0..1.0), rng.random_range(-3.0..1.0)];
    let mut offset = 0;
    let slots = BLOCKS
        .iter()
        .map(|&n| {
            let s = offset + rng.random_range(0..=n);
            offset += n + 1;
            s
        })
        .collect();
    let neighbors = (0..k)
        .map(|j| {
            let e = rng.random_range(0.01..1.0);
            NeighborTerm {
                value: if rng.random_bool(0.3) {
                    NeighborValue::Fixed(rng.random_range(1.0..100.0))
                } else {
                    NeighborValue::Learnable(j)
                },
                distances: [e, e * rng.random_range(1.0..2.0)],
            }
        })
        .collect();
    let inst = Instance {
        id: "b".into(),
        target: Some(rng.random_range(1.0..100.0)),
        slots,
        neighbors,
    };
    (inst, params)
}

fn central_difference(inst: &Instance, params: &ModelParams, key: VarKey, h: f64) -> f64 {
    let v = params.get(key);
    let mut p = params.clone();
    p.set(key, v + h);
    let up = instance_loss(inst, &p).unwrap();
    p.set(key, v - h);
    let down = instance_loss(inst, &p).unwrap();
    (up - down) / (2.0 * h)
}

/// Richardson-extrapolated central difference, fourth order in the step.
fn numeric_derivative(inst: &Instance, params: &ModelParams, key: VarKey) -> f64 {
    let h = 1e-3 * params.get(key).abs().max(1.0);
    let coarse = central_difference(inst, params, key, h);
    let fine = central_difference(inst, params, key, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Largest relative discrepancy between analytic and numeric derivatives
/// over every variable, touched or not.
fn worst_relative_error(inst: &Instance, params: &ModelParams) -> f64 {
    let (loss, grad) = instance_loss_and_grad(inst, params).unwrap();
    assert_eq!(loss, instance_loss(inst, params).unwrap());
    let keys = (0..params.theta.len())
        .map(VarKey::Theta)
        .chain((0..2).map(VarKey::Phi))
        .chain((0..params.prices.len()).map(VarKey::Price));
    let scale = grad.iter().map(|(_, g)| g.abs()).fold(0.0, f64::max);
    keys.map(|key| {
        let a = grad.get(key).unwrap_or(0.0);
        let n = numeric_derivative(inst, params, key);
        (a - n).abs() / a.abs().max(n.abs()).max(1e-7 * scale).max(1e-12)
    })
    .fold(0.0, f64::max)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..250 {
        let k = 1 + i % 50;
        let (inst, params) = random_case(&mut rng, k);
        let err = worst_relative_error(&inst, &params);
        assert!(err < 1e-5, "instance {i} (k={k}): relative error {err:e}");
    }
}

#[test]
fn untouched_variables_have_no_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut inst, params) = random_case(&mut rng, 6);
    for t in &mut inst.neighbors {
        t.value = NeighborValue::Fixed(10.0);
    }
    let (_, grad) = instance_loss_and_grad(&inst, &params).unwrap();
    assert!(grad.iter().all(|(k, _)| !matches!(k, VarKey::Price(_))));
    let touched_theta: Vec<usize> = grad
        .iter()
        .filter_map(|(k, _)| match k {
            VarKey::Theta(i) => Some(i),
            _ => None,
        })
        .collect();
    assert_eq!(touched_theta, inst.slots);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_bounded_by_neighbor_values(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, params) = random_case(&mut rng, k);
        let tr = forward(&inst, &params);
        let w: Vec<f64> = inst
            .neighbors
            .iter()
            .map(|t| match t.value {
                NeighborValue::Fixed(h) => h,
                NeighborValue::Learnable(j) => params.prices.value(j),
            })
            .collect();
        let max = w.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(tr.s > 0.0 && tr.s < 1.0);
        prop_assert!((tr.f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(tr.prediction >= 0.0 && tr.prediction <= max);
    }

    #[test]
    fn gradient_check_holds_for_random_draws(seed in any::<u64>(), k in 1usize..=50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, params) = random_case(&mut rng, k);
        prop_assert!(worst_relative_error(&inst, &params) < 1e-5);
    }
}
