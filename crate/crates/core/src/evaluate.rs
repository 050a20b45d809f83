//! Test-split scoring shared by the model and the baselines.

use std::collections::{BTreeMap, HashMap};

use crate::baselines::BaselinePredictor;
use crate::dataset::{Dataset, Graph, NeighborSet};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{forward, Instance, ModelParams};
use crate::trainer::TrainingProblem;

/// Predictions and truth for every scored block, with fallback flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredBlocks {
    /// id -> (truth, prediction, fallback)
    pub rows: BTreeMap<String, (f64, f64, bool)>,
}

impl ScoredBlocks {
    pub fn report(&self, method: &str) -> Result<EvalReport> {
        let truth: Vec<f64> = self.rows.values().map(|r| r.0).collect();
        let pred: Vec<f64> = self.rows.values().map(|r| r.1).collect();
        let mut report = EvalReport::compute(method, &truth, &pred)?;
        report.fallbacks = self.rows.values().filter(|r| r.2).count();
        Ok(report)
    }
}

/// Model predictions on the test split; blocks without neighbors get the
/// citywide mean.
pub fn score_model(problem: &TrainingProblem, params: &ModelParams) -> Result<ScoredBlocks> {
    let mut rows = BTreeMap::new();
    for inst in &problem.test {
        let h = inst.target.ok_or_else(|| Error::validation(format!("test block `{}` has no price", inst.id)))?;
        rows.insert(inst.id.clone(), (h, forward(inst, params).prediction, false));
    }
    for (id, h) in &problem.uncovered_test {
        rows.insert(id.clone(), (*h, problem.city_mean, true));
    }
    Ok(ScoredBlocks { rows })
}

pub fn evaluate_model(method: &str, problem: &TrainingProblem, params: &ModelParams) -> Result<EvalReport> {
    score_model(problem, params)?.report(method)
}

/// `nbrs` restricted to neighbors with a known price or a price table entry.
pub fn resolvable_neighbors(nbrs: &NeighborSet, params: &ModelParams, known: &HashMap<String, f64>) -> NeighborSet {
    let keep: Vec<usize> = (0..nbrs.len())
        .filter(|&j| {
            let id = &nbrs.neighbor_ids[j];
            known.contains_key(id) || params.prices.contains(id)
        })
        .collect();
    NeighborSet {
        center_id: nbrs.center_id.clone(),
        neighbor_ids: keep.iter().map(|&j| nbrs.neighbor_ids[j].clone()).collect(),
        distances: [0, 1].map(|r| keep.iter().map(|&j| nbrs.distances[r][j]).collect()),
    }
}

/// Predictions of a stored snapshot on `test_ids`, with `known` as the only
/// fixed prices. Neighbors the snapshot cannot price are dropped, and blocks
/// left without neighbors get `city_mean`.
pub fn score_snapshot(
    params: &ModelParams,
    dataset: &Dataset,
    graph: &Graph,
    known: &HashMap<String, f64>,
    test_ids: &[String],
    city_mean: f64,
) -> Result<ScoredBlocks> {
    let mut rows = BTreeMap::new();
    for id in test_ids {
        let block = dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        let h = block
            .known_price
            .ok_or_else(|| Error::validation(format!("test block `{id}` has no price")))?;
        let nbrs = graph.get(id).map(|n| resolvable_neighbors(n, params, known));
        let row = match nbrs {
            Some(n) if !n.is_empty() => {
                let inst = Instance::compile(&dataset.encode(block)?, &n, params, known, Some(h))?;
                (h, forward(&inst, params).prediction, false)
            }
            _ => (h, city_mean, true),
        };
        rows.insert(id.clone(), row);
    }
    Ok(ScoredBlocks { rows })
}

/// Baseline predictions on `test_ids` using only `known` prices.
pub fn score_baseline(
    predictor: &BaselinePredictor,
    dataset: &Dataset,
    graph: &Graph,
    known: &HashMap<String, f64>,
    test_ids: &[String],
) -> Result<ScoredBlocks> {
    let mut rows = BTreeMap::new();
    for id in test_ids {
        let block = dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        let h = block
            .known_price
            .ok_or_else(|| Error::validation(format!("test block `{id}` has no price")))?;
        let p = predictor.predict(block, graph.get(id), dataset, known)?;
        rows.insert(id.clone(), (h, p.price, p.fallback));
    }
    Ok(ScoredBlocks { rows })
}

pub fn evaluate_baseline(
    predictor: &BaselinePredictor,
    dataset: &Dataset,
    graph: &Graph,
    known: &HashMap<String, f64>,
    test_ids: &[String],
) -> Result<EvalReport> {
    score_baseline(predictor, dataset, graph, known, test_ids)?.report(predictor.kind().as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_graph, split_dataset};
    use crate::geo::DetourRoadModel;
    use crate::synth::{generate_city, BoundingBox, SynthConfig};
    use crate::trainer::{train, TrainingConfig, UnknownBlocks};

    #[test]
    fn snapshot_scoring_matches_problem_scoring() {
        let city = generate_city(&SynthConfig {
            n_blocks: 120,
            n_facilities: 200,
            bbox: BoundingBox::square_km(31.2, 121.5, 8.0),
            residential_extent: 1.0,
            known_fraction: 0.7,
            ..Default::default()
        })
        .unwrap();
        let graph = build_graph(&city.pois, 0.8, &DetourRoadModel::default()).unwrap();
        let dataset = Dataset::new(city.pois).unwrap();
        let split = split_dataset(&dataset.priced_block_ids(), 3).unwrap();
        for mode in [UnknownBlocks::Learn, UnknownBlocks::Exclude] {
            let problem = TrainingProblem::compile(&dataset, &graph, &split, mode).unwrap();
            let cfg = TrainingConfig {
                max_epochs: 15,
                unknown_blocks: mode,
                ..Default::default()
            };
            let params = train(&problem, &cfg, |_| {}).unwrap().best;
            let a = score_model(&problem, &params).unwrap();
            let b = score_snapshot(&params, &dataset, &graph, &problem.known, &split.test, problem.city_mean).unwrap();
            assert_eq!(a, b);
        }
    }
}
