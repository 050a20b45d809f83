//! Full-batch training: a sharded map of per-instance gradients, an exact
//! keyed reduce over shared variables, and one update per epoch.
//!
//! Only training-split prices are fixed during training. Every facility and
//! every block whose price is held out (validation, test, or simply unknown)
//! is a learnable entry of the price table.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetSplit, Graph, NeighborSet};
use crate::error::{Error, Result};
use crate::model::{accumulate_curvature, accumulate_gradient, forward, GradientShard, Instance, ModelParams, VarKey, DISTANCE_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRates {
    pub theta: f64,
    pub phi: f64,
    pub prices: f64,
}

impl Default for LearningRates {
    /// Tuned for the default preconditioner on the synthetic suite.
    fn default() -> Self {
        Self {
            theta: 3.0,
            phi: 3.0,
            prices: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub radius_km: f64,
    /// Interpreted according to `preconditioner`.
    pub learning_rates: LearningRates,
    pub max_epochs: usize,
    /// Stop once the total loss falls below this value.
    pub convergence_threshold: f64,
    pub shard_count: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub preconditioner: Preconditioner,
    pub unknown_blocks: UnknownBlocks,
}

/// Treatment of neighbor blocks without a training price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownBlocks {
    /// Learnable entries of the price table, like facilities.
    Learn,
    /// Dropped from neighbor sets.
    Exclude,
}

/// How successive updates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// One literal `v <- v - rate * g` step per epoch.
    Descent,
    /// Nesterov extrapolation between epochs, reset whenever the gradient
    /// points against the last step or the loss goes up.
    Accelerated,
}

/// Per-variable scaling of the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// One step size per group: rates act on the loss divided by `n * P^2`
    /// (n training instances, P the mean training price) with prices
    /// measured in units of P.
    None,
    /// Rates divide the Gauss-Newton diagonal of the loss, recomputed every
    /// epoch; a rate of 1 is a Newton step on each variable in isolation.
    Diagonal,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            radius_km: 1.0,
            learning_rates: LearningRates::default(),
            max_epochs: 10_000,
            convergence_threshold: 0.0,
            shard_count: 4,
            seed: 0,
            optimizer: Optimizer::Accelerated,
            preconditioner: Preconditioner::None,
            unknown_blocks: UnknownBlocks::Learn,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.learning_rates;
        if !(r.theta > 0.0 && r.phi > 0.0 && r.prices > 0.0) || ![r.theta, r.phi, r.prices].iter().all(|v| v.is_finite()) {
            return Err(Error::config("learning rates must be positive and finite"));
        }
        if !(self.radius_km.is_finite() && self.radius_km > 0.0) {
            return Err(Error::config("radius_km must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.convergence_threshold.is_nan() || self.convergence_threshold < 0.0 {
            return Err(Error::config("convergence_threshold must be nonnegative"));
        }
        if self.shard_count == 0 {
            return Err(Error::config("shard_count must be at least 1"));
        }
        Ok(())
    }

    /// Stable digest of the configuration, recorded in snapshots.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    /// Gradient norms of the theta, phi and price groups.
    pub grad_norms: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_mae: Option<f64>,
    pub seconds: f64,
}

/// Per-group step sizes applied literally: `v <- v - rate * g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub theta: f64,
    pub phi: f64,
    pub prices: f64,
}

impl StepSizes {
    fn for_key(&self, key: VarKey) -> f64 {
        match key {
            VarKey::Theta(_) => self.theta,
            VarKey::Phi(_) => self.phi,
            VarKey::Price(_) => self.prices,
        }
    }
}

/// Splits `instances` into `shard_count` contiguous shards and sums each
/// shard's gradients in parallel.
pub fn map_phase(instances: &[Instance], params: &ModelParams, shard_count: usize) -> Result<Vec<GradientShard>> {
    let shard_count = shard_count.max(1);
    let n = instances.len();
    let bounds: Vec<(usize, usize)> = (0..shard_count)
        .map(|s| (s * n / shard_count, (s + 1) * n / shard_count))
        .collect();
    bounds
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut shard = GradientShard::new(params.theta.len(), params.prices.len());
            for inst in &instances[lo..hi] {
                accumulate_gradient(inst, params, &mut shard)?;
            }
            Ok(shard)
        })
        .collect()
}

/// Merges shards in list order. Sums are exact, so the result does not
/// depend on the order or on how instances were grouped.
pub fn reduce_phase(shards: &[GradientShard]) -> Option<GradientShard> {
    let (first, rest) = shards.split_first()?;
    let mut total = first.clone();
    for s in rest {
        total.merge(s);
    }
    Some(total)
}

/// `v <- v - rate * g` for every touched variable; prices are clamped at zero.
pub fn apply_update(params: &ModelParams, total: &GradientShard, steps: &StepSizes) -> ModelParams {
    let mut out = params.clone();
    for (key, g) in total.iter() {
        let v = params.get(key) - steps.for_key(key) * g;
        out.set(key, clamp(key, v));
    }
    out
}

fn clamp(key: VarKey, v: f64) -> f64 {
    match key {
        VarKey::Price(_) => v.max(0.0),
        _ => v,
    }
}

/// Instances compiled from a dataset, graph and split.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub initial: ModelParams,
    pub train: Vec<Instance>,
    pub validation: Vec<Instance>,
    pub test: Vec<Instance>,
    /// Training-split prices: the only fixed neighbor values.
    pub known: HashMap<String, f64>,
    pub city_mean: f64,
    /// Held-out blocks without neighbors and their prices; they are
    /// predicted by the citywide mean.
    pub uncovered_validation: Vec<(String, f64)>,
    pub uncovered_test: Vec<(String, f64)>,
}

impl TrainingProblem {
    pub fn compile(dataset: &Dataset, graph: &Graph, split: &DatasetSplit, unknown_blocks: UnknownBlocks) -> Result<Self> {
        let mut known = HashMap::new();
        for id in &split.train {
            let h = dataset
                .get(id)
                .and_then(|p| p.known_price)
                .ok_or_else(|| Error::validation(format!("training block `{id}` has no price")))?;
            known.insert(id.clone(), h);
        }
        if known.is_empty() {
            return Err(Error::validation("training split is empty"));
        }
        let city_mean = crate::exact::exact_sum(&split.train.iter().map(|id| known[id]).collect::<Vec<_>>()) / known.len() as f64;

        let learnable = dataset
            .pois
            .iter()
            .filter(|p| !known.contains_key(&p.id) && (unknown_blocks == UnknownBlocks::Learn || !p.is_block()))
            .map(|p| p.id.clone());
        let mut initial = ModelParams::initialize(dataset.layout.clone(), learnable, city_mean);
        initial.meta.radius_km = Some(graph.radius_km);
        initial.meta.split = Some(split.fingerprint());

        let compile = |ids: &[String], skip_uncovered: &mut Vec<(String, f64)>| -> Result<Vec<Instance>> {
            let mut out = Vec::with_capacity(ids.len());
            for id in ids {
                let poi = dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
                let nbrs = graph.get(id).map(|n| match unknown_blocks {
                    UnknownBlocks::Learn => Cow::Borrowed(n),
                    UnknownBlocks::Exclude => Cow::Owned(without_unknown_blocks(n, dataset, &known)),
                });
                match nbrs {
                    Some(nbrs) if !nbrs.is_empty() => {
                        let x = dataset.encode(poi)?;
                        out.push(Instance::compile(&x, &nbrs, &initial, &known, poi.known_price)?);
                    }
                    _ => skip_uncovered.push((id.clone(), poi.known_price.unwrap_or(f64::NAN))),
                }
            }
            Ok(out)
        };
        let mut uncovered_train = Vec::new();
        let mut uncovered_validation = Vec::new();
        let mut uncovered_test = Vec::new();
        let train = compile(&split.train, &mut uncovered_train)?;
        let validation = compile(&split.validation, &mut uncovered_validation)?;
        let test = compile(&split.test, &mut uncovered_test)?;
        if train.is_empty() {
            return Err(Error::validation("no training block has a neighbor within the radius"));
        }
        if !uncovered_train.is_empty() {
            log::warn!("{} training blocks have no neighbors and are skipped", uncovered_train.len());
        }
        Ok(Self {
            initial,
            train,
            validation,
            test,
            known,
            city_mean,
            uncovered_validation,
            uncovered_test,
        })
    }

    /// Effective per-group steps for the configured rates.
    pub fn step_sizes(&self, rates: &LearningRates) -> StepSizes {
        let n = self.train.len() as f64;
        let p = self.city_mean.max(f64::MIN_POSITIVE);
        StepSizes {
            theta: rates.theta / (n * p * p),
            phi: rates.phi / (n * p * p),
            prices: rates.prices / n,
        }
    }

    /// Mean absolute error on the validation blocks, uncovered ones predicted
    /// by the citywide mean. `None` without validation blocks.
    pub fn validation_mae(&self, params: &ModelParams) -> Option<f64> {
        let n = self.validation.len() + self.uncovered_validation.len();
        if n == 0 {
            return None;
        }
        let covered: f64 = self
            .validation
            .iter()
            .map(|i| (forward(i, params).prediction - i.target.unwrap_or(0.0)).abs())
            .sum();
        let uncovered: f64 = self.uncovered_validation.iter().map(|(_, h)| (h - self.city_mean).abs()).sum();
        Some((covered + uncovered) / n as f64)
    }
}

/// Step sizes for one epoch.
enum Steps<'a> {
    Uniform(StepSizes),
    Diagonal {
        rates: LearningRates,
        curvature: &'a GradientShard,
        floors: [f64; 3],
    },
}

impl Steps<'_> {
    fn diagonal(rates: LearningRates, curvature: &GradientShard) -> Steps<'_> {
        let mut max = [0.0f64; 3];
        for (key, c) in curvature.iter() {
            max[group(key)] = max[group(key)].max(c);
        }
        Steps::Diagonal {
            rates,
            curvature,
            floors: max.map(|m| (m * 1e-12).max(f64::MIN_POSITIVE)),
        }
    }

    fn for_key(&self, key: VarKey) -> f64 {
        match self {
            Steps::Uniform(s) => s.for_key(key),
            Steps::Diagonal { rates, curvature, floors } => {
                let c = curvature.get(key).unwrap_or(0.0).max(floors[group(key)]);
                let rate = match key {
                    VarKey::Theta(_) => rates.theta,
                    VarKey::Phi(_) => rates.phi,
                    VarKey::Price(_) => rates.prices,
                };
                rate / c
            }
        }
    }
}

fn group(key: VarKey) -> usize {
    match key {
        VarKey::Theta(_) => 0,
        VarKey::Phi(_) => 1,
        VarKey::Price(_) => 2,
    }
}

/// Gauss-Newton diagonal of the total loss, sharded like the gradient.
pub fn curvature_phase(instances: &[Instance], params: &ModelParams, shard_count: usize) -> GradientShard {
    let shard_count = shard_count.max(1);
    let n = instances.len();
    let shards: Vec<GradientShard> = (0..shard_count)
        .into_par_iter()
        .map(|s| {
            let mut shard = GradientShard::new(params.theta.len(), params.prices.len());
            for inst in &instances[s * n / shard_count..(s + 1) * n / shard_count] {
                accumulate_curvature(inst, params, &mut shard);
            }
            shard
        })
        .collect();
    reduce_phase(&shards).expect("at least one shard")
}

fn descend(params: &ModelParams, total: &GradientShard, steps: &Steps) -> ModelParams {
    let mut out = params.clone();
    for (key, g) in total.iter() {
        out.set(key, clamp(key, params.get(key) - steps.for_key(key) * g));
    }
    out
}

/// `x + mu (x - prev)` over every variable, prices clamped at zero.
fn extrapolate(x: &ModelParams, prev: &ModelParams, mu: f64) -> ModelParams {
    let mut out = x.clone();
    let ext = |a: f64, b: f64| a + mu * (a - b);
    for (o, (a, b)) in out.theta.iter_mut().zip(x.theta.iter().zip(&prev.theta)) {
        *o = ext(*a, *b);
    }
    for r in 0..DISTANCE_TYPES {
        out.phi[r] = ext(x.phi[r], prev.phi[r]);
    }
    for (o, (a, b)) in out.prices.values_mut().iter_mut().zip(x.prices.values().iter().zip(prev.prices.values())) {
        *o = ext(*a, *b).max(0.0);
    }
    out
}

/// `g . (next - x)` over the touched variables.
fn directional(total: &GradientShard, x: &ModelParams, next: &ModelParams) -> f64 {
    total.iter().map(|(k, g)| g * (next.get(k) - x.get(k))).sum()
}

fn without_unknown_blocks(n: &NeighborSet, dataset: &Dataset, known: &HashMap<String, f64>) -> NeighborSet {
    let keep: Vec<usize> = (0..n.len())
        .filter(|&j| {
            let id = &n.neighbor_ids[j];
            known.contains_key(id) || dataset.get(id).is_some_and(|p| !p.is_block())
        })
        .collect();
    NeighborSet {
        center_id: n.center_id.clone(),
        neighbor_ids: keep.iter().map(|&j| n.neighbor_ids[j].clone()).collect(),
        distances: [0, 1].map(|r| keep.iter().map(|&j| n.distances[r][j]).collect()),
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub final_params: ModelParams,
    /// Parameters with the lowest validation MAE (lowest training loss when
    /// there is no validation data).
    pub best: ModelParams,
    pub best_epoch: usize,
    pub reports: Vec<EpochReport>,
}

struct Best {
    score: f64,
    epoch: usize,
    params: ModelParams,
}

fn consider(best: &mut Option<Best>, score: f64, epoch: usize, params: &ModelParams) {
    if best.as_ref().is_none_or(|b| score < b.score) {
        let mut params = params.clone();
        params.meta.epoch = Some(epoch);
        *best = Some(Best { score, epoch, params });
    }
}

/// Runs map, reduce and update until the loss drops below the threshold or
/// `max_epochs` is reached. `on_epoch` sees every report as it is produced.
///
/// Epoch `e` evaluates the loss and gradient at the current point and then
/// updates it; the best snapshot is chosen among the evaluated points and
/// the final parameters.
pub fn train(
    problem: &TrainingProblem,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainingOutcome> {
    config.validate()?;
    let uniform = problem.step_sizes(&config.learning_rates);
    let mut x = problem.initial.clone();
    x.meta.seed = Some(config.seed);
    x.meta.config_digest = Some(config.digest());
    // Point where the gradient is evaluated; equals `x` for plain descent.
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut previous_loss = f64::INFINITY;

    let mut reports = Vec::new();
    let mut initial_loss = None;
    let mut best = None;
    let mut pending = false;
    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let shards = map_phase(&problem.train, &y, config.shard_count)?;
        let total = reduce_phase(&shards).expect("at least one shard");
        let loss = total.loss();
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("total loss at epoch {epoch}")));
        }
        let initial = *initial_loss.get_or_insert(loss);
        if initial > 0.0 && loss > 10.0 * initial {
            return Err(Error::Diverged { epoch, loss, initial });
        }
        let validation_mae = problem.validation_mae(&y);
        consider(&mut best, validation_mae.unwrap_or(loss), epoch - 1, &y);
        let report = EpochReport {
            epoch,
            loss,
            grad_norms: total.group_norms(),
            validation_mae,
            seconds: 0.0,
        };

        let converged = loss < config.convergence_threshold;
        pending = !converged;
        if !converged {
            let curvature;
            let steps = match config.preconditioner {
                Preconditioner::None => Steps::Uniform(uniform),
                Preconditioner::Diagonal => {
                    curvature = curvature_phase(&problem.train, &y, config.shard_count);
                    Steps::diagonal(config.learning_rates, &curvature)
                }
            };
            let next = descend(&y, &total, &steps);
            match config.optimizer {
                Optimizer::Descent => {
                    x = next;
                    y = x.clone();
                }
                Optimizer::Accelerated => {
                    if loss > previous_loss || directional(&total, &x, &next) > 0.0 {
                        t = 1.0;
                        x = next;
                        y = x.clone();
                    } else {
                        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
                        y = extrapolate(&next, &x, (t - 1.0) / t_next);
                        x = next;
                        t = t_next;
                    }
                }
            }
            previous_loss = loss;
        }
        let report = EpochReport {
            seconds: start.elapsed().as_secs_f64(),
            ..report
        };
        log::debug!("epoch {epoch}: loss {loss:.6e}");
        on_epoch(&report);
        reports.push(report);
        if converged {
            break;
        }
    }
    let last_epoch = reports.len();
    if pending {
        let score = match problem.validation_mae(&x) {
            Some(m) => m,
            None => {
                let shards = map_phase(&problem.train, &x, config.shard_count)?;
                reduce_phase(&shards).expect("at least one shard").loss()
            }
        };
        consider(&mut best, score, last_epoch, &x);
    } else {
        x = y;
    }
    x.meta.epoch = Some(last_epoch);
    let best = best.expect("at least one epoch ran");
    Ok(TrainingOutcome {
        final_params: x,
        best: best.params,
        best_epoch: best.epoch,
        reports,
    })
}

/// Predictions for `instances` under `params`, keyed by block id.
pub fn predict_all(instances: &[Instance], params: &ModelParams) -> BTreeMap<String, f64> {
    instances
        .par_iter()
        .map(|i| (i.id.clone(), forward(i, params).prediction))
        .collect()
}
