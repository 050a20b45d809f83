//! Loading and assembling the inputs shared by several commands.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use hedon_core::dataset::{build_graph, read_graph, split_dataset, Dataset, DatasetSplit, Graph};
use hedon_core::exact::exact_sum;
use hedon_core::geo::DetourRoadModel;
use hedon_core::model::{load_params, ModelParams};
use hedon_core::trainer::TrainingConfig;
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::CommonArgs;

pub fn read_json<T: DeserializeOwned>(run: &mut Run, path: &Path) -> CliResult<T> {
    let path = run.input(path)?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn load_dataset(run: &mut Run, path: &Path) -> CliResult<Dataset> {
    let path = run.input(path)?;
    let dataset = Dataset::load(&path)?;
    log::info!("loaded {} POIs from {}", dataset.pois.len(), path.display());
    Ok(dataset)
}

pub fn load_snapshot(run: &mut Run, path: &Path) -> CliResult<ModelParams> {
    let path = run.input(path)?;
    Ok(load_params(&path)?)
}

pub fn road_model(detour_factor: f64) -> CliResult<DetourRoadModel> {
    Ok(DetourRoadModel::new(detour_factor)?)
}

/// Training configuration from `--config` (or defaults) with flags applied.
pub fn training_config(run: &mut Run, common: &CommonArgs) -> CliResult<TrainingConfig> {
    let mut config: TrainingConfig = match &common.config {
        Some(path) => read_json(run, path)?,
        None => TrainingConfig::default(),
    };
    if let Some(r) = common.radius_km {
        config.radius_km = r;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(k) = common.shards {
        config.shard_count = k;
    }
    Ok(config)
}

/// Reads `graph_path` if given (its radius must equal `radius_km`), otherwise
/// builds the graph.
pub fn graph_for(
    run: &mut Run,
    dataset: &Dataset,
    graph_path: Option<&Path>,
    radius_km: f64,
    detour_factor: f64,
) -> CliResult<Graph> {
    match graph_path {
        Some(path) => {
            let path = run.input(path)?;
            let graph = read_graph(&path)?;
            if graph.radius_km != radius_km {
                return Err(CliError::usage(format!(
                    "{} was built with radius {} km, but radius {} km was requested",
                    path.display(),
                    graph.radius_km,
                    radius_km
                )));
            }
            Ok(graph)
        }
        None => {
            let graph = build_graph(&dataset.pois, radius_km, &road_model(detour_factor)?)?;
            log::info!(
                "built graph at {radius_km} km: mean degree {:.1}, {} isolated blocks",
                graph.mean_degree(),
                graph.isolated.len()
            );
            Ok(graph)
        }
    }
}

/// The seeded partition of priced blocks together with the training prices,
/// the only prices any model or baseline may read.
#[derive(Debug, Clone)]
pub struct Partition {
    pub split: DatasetSplit,
    pub known: HashMap<String, f64>,
    pub city_mean: f64,
}

impl Partition {
    pub fn new(dataset: &Dataset, seed: u64) -> CliResult<Self> {
        let split = split_dataset(&dataset.priced_block_ids(), seed)?;
        let prices = dataset.known_prices();
        let train: Vec<f64> = split.train.iter().map(|id| prices[id]).collect();
        if train.is_empty() {
            return Err(CliError::usage("the training split is empty"));
        }
        let known = split.train.iter().map(|id| (id.clone(), prices[id])).collect();
        Ok(Self {
            known,
            city_mean: exact_sum(&train) / train.len() as f64,
            split,
        })
    }
}
