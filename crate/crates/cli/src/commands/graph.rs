//! `build-graph`: neighbor sets of every residential block.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use hedon_core::dataset::{write_graph, Dataset, Graph};
use hedon_core::geo::DetourRoadModel;

use crate::context::{graph_for, load_dataset, training_config};
use crate::error::CliResult;
use crate::manifest::Run;
use crate::CommonArgs;

pub const GRAPH_FILE: &str = "graph.jsonl";

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    /// POI file (one JSON record per line).
    #[arg(long)]
    pub pois: PathBuf,
    /// Ratio of road distance to straight-line distance.
    #[arg(long, default_value_t = DetourRoadModel::DEFAULT_FACTOR)]
    pub detour_factor: f64,
}

/// Neighbor-count diagnostics of one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub radius_km: f64,
    pub blocks: usize,
    pub isolated: usize,
    pub mean_degree: f64,
    pub min_degree: usize,
    pub max_degree: usize,
    pub mean_block_neighbors: f64,
    pub mean_facility_neighbors: f64,
}

impl DegreeStats {
    pub fn of(graph: &Graph, dataset: &Dataset) -> Self {
        let blocks = graph.sets.len() + graph.isolated.len();
        let degrees: Vec<usize> = graph
            .sets
            .values()
            .map(|s| s.len())
            .chain(graph.isolated.iter().map(|_| 0))
            .collect();
        let block_nbrs: usize = graph
            .sets
            .values()
            .flat_map(|s| &s.neighbor_ids)
            .filter(|id| dataset.get(id).is_some_and(|p| p.is_block()))
            .count();
        let total: usize = degrees.iter().sum();
        let per = |n: usize| if blocks == 0 { 0.0 } else { n as f64 / blocks as f64 };
        Self {
            radius_km: graph.radius_km,
            blocks,
            isolated: graph.isolated.len(),
            mean_degree: per(total),
            min_degree: degrees.iter().copied().min().unwrap_or(0),
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            mean_block_neighbors: per(block_nbrs),
            mean_facility_neighbors: per(total - block_nbrs),
        }
    }

    pub fn render(stats: &[DegreeStats]) -> String {
        let mut out = format!(
            "{:>9}  {:>7}  {:>8}  {:>8}  {:>5}  {:>6}  {:>10}  {:>10}\n",
            "radius_km", "blocks", "isolated", "mean", "min", "max", "blocks/nb", "fac/nb"
        );
        for s in stats {
            out += &format!(
                "{:>9.2}  {:>7}  {:>8}  {:>8.1}  {:>5}  {:>6}  {:>10.1}  {:>10.1}\n",
                s.radius_km,
                s.blocks,
                s.isolated,
                s.mean_degree,
                s.min_degree,
                s.max_degree,
                s.mean_block_neighbors,
                s.mean_facility_neighbors
            );
        }
        out
    }
}

pub fn run(common: &CommonArgs, args: &BuildGraphArgs, run: &mut Run) -> CliResult<()> {
    let config = training_config(run, common)?;
    run.config(&config);
    let dataset = load_dataset(run, &args.pois)?;
    let graph = graph_for(run, &dataset, None, config.radius_km, args.detour_factor)?;
    write_graph(run.output_path(GRAPH_FILE)?, &graph)?;
    let stats = DegreeStats::of(&graph, &dataset);
    run.write_json("degrees.json", &stats)?;
    run.write_text("degrees.txt", &DegreeStats::render(&[stats]))?;
    Ok(())
}
