//! `train`: full-batch training with the best validation snapshot kept.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use hedon_core::dataset::{split_dataset, Dataset, Graph};
use hedon_core::geo::DetourRoadModel;
use hedon_core::model::save_params;
use hedon_core::trainer::{train, TrainingConfig, TrainingOutcome, TrainingProblem};

use crate::context::{graph_for, load_dataset, training_config};
use crate::error::{CliError, CliResult};
use crate::manifest::{JsonLines, Run};
use crate::CommonArgs;

pub const MODEL_FILE: &str = "model.json";
pub const FINAL_FILE: &str = "final.json";
pub const EPOCH_LOG: &str = "epochs.jsonl";

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pois: PathBuf,
    /// Prebuilt graph; built on the fly when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = DetourRoadModel::DEFAULT_FACTOR)]
    pub detour_factor: f64,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Not supported; present so the request fails with a clear message.
    #[arg(long, value_name = "DIR")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub radius_km: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_validation_mae: Option<f64>,
    pub train_instances: usize,
    pub validation_instances: usize,
    pub test_instances: usize,
    pub uncovered_validation: usize,
    pub uncovered_test: usize,
    pub learnable_prices: usize,
    pub city_mean: f64,
}

impl TrainSummary {
    pub fn new(problem: &TrainingProblem, config: &TrainingConfig, outcome: &TrainingOutcome) -> Self {
        Self {
            radius_km: config.radius_km,
            epochs_run: outcome.reports.len(),
            best_epoch: outcome.best_epoch,
            initial_loss: outcome.reports.first().map_or(f64::NAN, |r| r.loss),
            final_loss: outcome.reports.last().map_or(f64::NAN, |r| r.loss),
            best_validation_mae: problem.validation_mae(&outcome.best),
            train_instances: problem.train.len(),
            validation_instances: problem.validation.len(),
            test_instances: problem.test.len(),
            uncovered_validation: problem.uncovered_validation.len(),
            uncovered_test: problem.uncovered_test.len(),
            learnable_prices: problem.initial.prices.len(),
            city_mean: problem.city_mean,
        }
    }

    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        format!(
            "radius_km             {}\nepochs run            {}\nbest epoch            {}\ninitial loss          {:.6e}\nfinal loss            {:.6e}\nbest validation MAE   {}\ntraining instances    {}\nvalidation instances  {} (+{} uncovered)\ntest instances        {} (+{} uncovered)\nlearnable prices      {}\ncitywide mean         {:.2}\n",
            self.radius_km,
            self.epochs_run,
            self.best_epoch,
            self.initial_loss,
            self.final_loss,
            opt(self.best_validation_mae),
            self.train_instances,
            self.validation_instances,
            self.uncovered_validation,
            self.test_instances,
            self.uncovered_test,
            self.learnable_prices,
            self.city_mean
        )
    }
}

/// Compiles the training problem for `config` (split seeded by `config.seed`).
pub fn problem_for(dataset: &Dataset, graph: &Graph, config: &TrainingConfig) -> CliResult<TrainingProblem> {
    let split = split_dataset(&dataset.priced_block_ids(), config.seed)?;
    Ok(TrainingProblem::compile(dataset, graph, &split, config.unknown_blocks)?)
}

/// Trains while streaming epoch reports to `log`.
pub fn train_logged(
    problem: &TrainingProblem,
    config: &TrainingConfig,
    detour_factor: f64,
    log: &mut JsonLines,
) -> CliResult<TrainingOutcome> {
    let mut write_error = None;
    let mut outcome = train(problem, config, |report| {
        if write_error.is_none() {
            write_error = log.write(report).err();
        }
        if report.epoch % 100 == 0 {
            log::info!("epoch {}: loss {:.6e}", report.epoch, report.loss);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    outcome.best.meta.detour_factor = Some(detour_factor);
    outcome.final_params.meta.detour_factor = Some(detour_factor);
    Ok(outcome)
}

pub fn run(common: &CommonArgs, args: &TrainArgs, run: &mut Run) -> CliResult<()> {
    if let Some(dir) = &args.resume {
        return Err(CliError::usage(format!(
            "cannot resume from {}: interrupted runs cannot be resumed; start a fresh `train` run",
            dir.display()
        )));
    }
    let mut config = training_config(run, common)?;
    if let Some(n) = args.max_epochs {
        config.max_epochs = n;
    }
    config.validate()?;
    run.config(&config);
    run.seed(config.seed);

    let dataset = load_dataset(run, &args.pois)?;
    let graph = graph_for(run, &dataset, args.graph.as_deref(), config.radius_km, args.detour_factor)?;
    let problem = problem_for(&dataset, &graph, &config)?;
    let split = split_dataset(&dataset.priced_block_ids(), config.seed)?;
    run.write_json("split.json", &split)?;

    let mut log = run.json_lines(EPOCH_LOG)?;
    let outcome = train_logged(&problem, &config, args.detour_factor, &mut log)?;
    save_params(run.output_path(MODEL_FILE)?, &outcome.best)?;
    save_params(run.output_path(FINAL_FILE)?, &outcome.final_params)?;

    let summary = TrainSummary::new(&problem, &config, &outcome);
    run.write_json("summary.json", &summary)?;
    run.write_text("summary.txt", &summary.render())?;
    log::info!(
        "best epoch {} of {}; validation MAE {:?}",
        summary.best_epoch,
        summary.epochs_run,
        summary.best_validation_mae
    );
    Ok(())
}
