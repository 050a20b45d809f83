//! `evaluate`: test-split scores of a snapshot and/or baselines.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hedon_core::baselines::{BaselineKind, BaselinePredictor};
use hedon_core::evaluate::{score_baseline, score_snapshot, ScoredBlocks};
use hedon_core::geo::DetourRoadModel;
use hedon_core::metrics::render_eval_table;
use hedon_core::Error;

use crate::context::{graph_for, load_dataset, load_snapshot, training_config, Partition};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::CommonArgs;

pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pois: PathBuf,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Model snapshot to score.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Baselines to score: citywide_avg, macro_avg, micro_avg,
    /// linear_regression, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub baseline: Vec<String>,
    #[arg(long, default_value_t = DetourRoadModel::DEFAULT_FACTOR)]
    pub detour_factor: f64,
    /// Price unit shown in the text table.
    #[arg(long, default_value = "CNY/m²")]
    pub unit: String,
}

#[derive(Debug, Serialize)]
struct Row {
    truth: f64,
    prediction: f64,
    fallback: bool,
}

fn rows(scored: &ScoredBlocks) -> BTreeMap<&str, Row> {
    scored
        .rows
        .iter()
        .map(|(id, &(truth, prediction, fallback))| (id.as_str(), Row { truth, prediction, fallback }))
        .collect()
}

pub fn parse_baselines(names: &[String]) -> CliResult<Vec<BaselineKind>> {
    let mut kinds = Vec::new();
    for name in names {
        let parsed = if name == "all" {
            BaselineKind::ALL.to_vec()
        } else {
            vec![name.parse().map_err(|e: Error| CliError::usage(e.to_string()))?]
        };
        for k in parsed {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
    }
    Ok(kinds)
}

pub fn run(common: &CommonArgs, args: &EvaluateArgs, run: &mut Run) -> CliResult<()> {
    let baselines = parse_baselines(&args.baseline)?;
    if args.model.is_none() && baselines.is_empty() {
        return Err(CliError::usage("nothing to evaluate: pass --model and/or --baseline"));
    }
    let mut config = training_config(run, common)?;
    let snapshot = match &args.model {
        Some(path) => Some(load_snapshot(run, path)?),
        None => None,
    };
    if let Some(meta) = snapshot.as_ref().map(|s| &s.meta) {
        if common.seed.is_none() {
            config.seed = meta.seed.unwrap_or(config.seed);
        }
        if common.radius_km.is_none() {
            config.radius_km = meta.radius_km.unwrap_or(config.radius_km);
        }
    }
    run.config(&config);
    run.seed(config.seed);

    let dataset = load_dataset(run, &args.pois)?;
    let graph = graph_for(run, &dataset, args.graph.as_deref(), config.radius_km, args.detour_factor)?;
    let part = Partition::new(&dataset, config.seed)?;
    let fingerprint = part.split.fingerprint();

    let mut reports = Vec::new();
    let mut predictions = BTreeMap::new();
    if let Some(params) = &snapshot {
        if let Some(trained) = &params.meta.split {
            if *trained != fingerprint {
                return Err(Error::validation(format!(
                    "split mismatch: the snapshot was trained on split {trained}, but seed {} gives split {fingerprint}",
                    config.seed
                ))
                .into());
            }
        }
        let scored = score_snapshot(params, &dataset, &graph, &part.known, &part.split.test, part.city_mean)?;
        reports.push(scored.report("model")?);
        predictions.insert("model".to_string(), scored);
    }
    for kind in baselines {
        let predictor = BaselinePredictor::fit(kind, &dataset, &graph, &part.known)?;
        let scored = score_baseline(&predictor, &dataset, &graph, &part.known, &part.split.test)?;
        reports.push(scored.report(kind.as_str())?);
        predictions.insert(kind.to_string(), scored);
    }
    for r in &reports {
        log::info!("{}: MAE {:.2} RMSE {:.2} R2 {:.4} ({} blocks)", r.method, r.mae, r.rmse, r.r2, r.m);
    }
    run.write_json(EVAL_FILE, &reports)?;
    run.write_text("eval.txt", &render_eval_table(&reports, &args.unit))?;
    let by_method: BTreeMap<&str, BTreeMap<&str, Row>> = predictions.iter().map(|(m, s)| (m.as_str(), rows(s))).collect();
    run.write_json("test_predictions.json", &by_method)?;
    Ok(())
}
