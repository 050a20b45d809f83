//! `predict`: prices of existing or ad-hoc blocks with a per-neighbor
//! breakdown of the prediction.

use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use hedon_core::dataset::{load_pois, Dataset, Neighborhoods, PoiRecord};
use hedon_core::evaluate::resolvable_neighbors;
use hedon_core::geo::{DetourRoadModel, RoadModel};
use hedon_core::model::{forward, Instance, ModelParams, NeighborValue};

use crate::context::{load_dataset, load_snapshot, road_model};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::CommonArgs;

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub pois: PathBuf,
    /// Residential block ids from the POI file, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub block: Vec<String>,
    /// Extra blocks in POI line format (JSON per line); they need not be in
    /// the POI file.
    #[arg(long)]
    pub adhoc: Option<PathBuf>,
    /// Contributions listed per block.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Defaults to the factor recorded in the snapshot.
    #[arg(long)]
    pub detour_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// No priceable neighbor within the radius.
    Uncoverable,
}

/// One neighbor's share of a prediction: `prediction = scale * sum(term)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub id: String,
    /// `block` or the facility category.
    pub kind: String,
    pub value: f64,
    /// Known price (true) or learned price (false).
    pub fixed: bool,
    pub weight: f64,
    pub term: f64,
    pub euclidean_km: f64,
    pub trajectory_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPrediction {
    pub id: String,
    pub status: Status,
    pub prediction: Option<f64>,
    pub scale: Option<f64>,
    pub neighbors: usize,
    /// Neighbors with neither a known nor a learned price.
    pub unpriced_neighbors: usize,
    pub top: Vec<Contribution>,
}

pub struct Predictor<'a> {
    pub params: &'a ModelParams,
    pub dataset: &'a Dataset,
    pub known: HashMap<String, f64>,
    pub radius_km: f64,
    pub road: &'a dyn RoadModel,
    index: Neighborhoods<'a>,
}

impl<'a> Predictor<'a> {
    /// Every priced block of `dataset` is a fixed neighbor value; everything
    /// else is read from the snapshot's price table.
    pub fn new(params: &'a ModelParams, dataset: &'a Dataset, radius_km: f64, road: &'a dyn RoadModel) -> CliResult<Self> {
        Ok(Self {
            params,
            dataset,
            known: dataset.known_prices(),
            radius_km,
            road,
            index: Neighborhoods::new(&dataset.pois, radius_km)?,
        })
    }

    pub fn predict(&self, block: &PoiRecord, top: usize) -> CliResult<BlockPrediction> {
        if !block.is_block() {
            return Err(CliError::usage(format!("`{}` is not a residential block", block.id)));
        }
        let own = self.dataset.pois.iter().position(|p| p.id == block.id);
        let found = self.index.around(&block.id, block.location, self.radius_km, own, self.road)?;
        let all = found.as_ref().map_or(0, |n| n.len());
        let nbrs = found.map(|n| resolvable_neighbors(&n, self.params, &self.known));
        let Some(nbrs) = nbrs.filter(|n| !n.is_empty()) else {
            return Ok(BlockPrediction {
                id: block.id.clone(),
                status: Status::Uncoverable,
                prediction: None,
                scale: None,
                neighbors: 0,
                unpriced_neighbors: all,
                top: Vec::new(),
            });
        };
        let x = self.params.layout.encode(&block.attributes)?;
        let inst = Instance::compile(&x, &nbrs, self.params, &self.known, None)?;
        let tr = forward(&inst, self.params);
        let mut terms: Vec<Contribution> = (0..nbrs.len())
            .map(|j| {
                let id = &nbrs.neighbor_ids[j];
                let kind = match self.dataset.get(id).and_then(|p| p.category) {
                    Some(c) => c.to_string(),
                    None => "block".to_string(),
                };
                Contribution {
                    id: id.clone(),
                    kind,
                    value: tr.w[j],
                    fixed: matches!(inst.neighbors[j].value, NeighborValue::Fixed(_)),
                    weight: tr.f[j],
                    term: tr.f[j] * tr.w[j],
                    euclidean_km: nbrs.distances[0][j],
                    trajectory_km: nbrs.distances[1][j],
                }
            })
            .collect();
        terms.sort_by(|a, b| b.term.total_cmp(&a.term).then_with(|| a.id.cmp(&b.id)));
        terms.truncate(top);
        Ok(BlockPrediction {
            id: block.id.clone(),
            status: Status::Ok,
            prediction: Some(tr.prediction),
            scale: Some(tr.s),
            neighbors: nbrs.len(),
            unpriced_neighbors: all - nbrs.len(),
            top: terms,
        })
    }
}

pub fn render(predictions: &[BlockPrediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        match (p.status, p.prediction, p.scale) {
            (Status::Ok, Some(h), Some(s)) => {
                out += &format!("{}  predicted {:.2}  S={:.4}  neighbors={}\n", p.id, h, s, p.neighbors);
                out += &format!(
                    "    {:<16} {:<16} {:>12} {:>8} {:>12} {:>8}\n",
                    "neighbor", "kind", "value", "F_j", "F_j*w_j", "km"
                );
                for c in &p.top {
                    out += &format!(
                        "    {:<16} {:<16} {:>12.2} {:>8.4} {:>12.2} {:>8.3}\n",
                        c.id,
                        c.kind,
                        c.value,
                        c.weight,
                        c.term,
                        c.euclidean_km
                    );
                }
            }
            _ => out += &format!("{}  uncoverable: no priced neighbor within the radius\n", p.id),
        }
    }
    out
}

pub fn run(common: &CommonArgs, args: &PredictArgs, run: &mut Run) -> CliResult<()> {
    if args.block.is_empty() && args.adhoc.is_none() {
        return Err(CliError::usage("nothing to predict: pass --block and/or --adhoc"));
    }
    let params = load_snapshot(run, &args.model)?;
    let radius_km = common
        .radius_km
        .or(params.meta.radius_km)
        .ok_or_else(|| CliError::usage("the snapshot records no radius; pass --radius-km"))?;
    let factor = args
        .detour_factor
        .or(params.meta.detour_factor)
        .unwrap_or(DetourRoadModel::DEFAULT_FACTOR);
    let dataset = load_dataset(run, &args.pois)?;
    let road = road_model(factor)?;
    let predictor = Predictor::new(&params, &dataset, radius_km, &road)?;

    let mut blocks: Vec<PoiRecord> = Vec::new();
    for id in &args.block {
        let poi = dataset.get(id).ok_or_else(|| hedon_core::Error::UnknownId(id.clone()))?;
        blocks.push(poi.clone());
    }
    if let Some(path) = &args.adhoc {
        let path = run.input(path)?;
        blocks.extend(load_pois(&path)?);
    }
    let predictions = blocks
        .iter()
        .map(|b| predictor.predict(b, args.top))
        .collect::<CliResult<Vec<_>>>()?;
    run.write_json("predictions.json", &predictions)?;
    run.write_text("predictions.txt", &render(&predictions))?;
    Ok(())
}
