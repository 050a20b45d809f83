//! `sweep`: one model per influencing radius, compared on validation MAE.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use hedon_core::dataset::build_graph;
use hedon_core::evaluate::evaluate_model;
use hedon_core::geo::DetourRoadModel;
use hedon_core::model::save_params;
use hedon_core::trainer::TrainingConfig;

use super::graph::DegreeStats;
use super::train::{problem_for, train_logged, EPOCH_LOG, MODEL_FILE};
use crate::context::{load_dataset, road_model, training_config};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::CommonArgs;

pub const CURVE_FILE: &str = "curve.json";

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub pois: PathBuf,
    /// Radii in kilometers, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,3,5")]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = DetourRoadModel::DEFAULT_FACTOR)]
    pub detour_factor: f64,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub radius_km: f64,
    pub mean_degree: f64,
    pub best_epoch: usize,
    pub validation_mae: f64,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Radius with the lowest validation MAE; ties go to the smaller radius.
    pub selected_radius_km: f64,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        let best = points
            .iter()
            .min_by(|a, b| a.validation_mae.total_cmp(&b.validation_mae).then(a.radius_km.total_cmp(&b.radius_km)))
            .map_or(f64::NAN, |p| p.radius_km);
        Self {
            selected_radius_km: best,
            points,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:>9}  {:>8}  {:>10}  {:>14}  {:>12}  {:>12}  {:>8}\n",
            "radius_km", "degree", "best_epoch", "validation_MAE", "test_MAE", "test_RMSE", "test_R2"
        );
        for p in &self.points {
            let mark = if p.radius_km == self.selected_radius_km { "  *" } else { "" };
            out += &format!(
                "{:>9.2}  {:>8.1}  {:>10}  {:>14.2}  {:>12.2}  {:>12.2}  {:>8.4}{mark}\n",
                p.radius_km, p.mean_degree, p.best_epoch, p.validation_mae, p.mae, p.rmse, p.r2
            );
        }
        out += &format!("selected radius: {} km\n", self.selected_radius_km);
        out
    }
}

fn check_radii(radii: &[f64]) -> CliResult<()> {
    if radii.len() < 2 {
        return Err(CliError::usage("a sweep needs at least two radii"));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(CliError::usage(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

pub fn run(common: &CommonArgs, args: &SweepArgs, run: &mut Run) -> CliResult<()> {
    check_radii(&args.radii)?;
    let mut base = training_config(run, common)?;
    if let Some(n) = args.max_epochs {
        base.max_epochs = n;
    }
    base.validate()?;
    run.config(&(&base, &args.radii));
    run.seed(base.seed);
    let dataset = load_dataset(run, &args.pois)?;
    let road = road_model(args.detour_factor)?;

    let mut points = Vec::new();
    let mut degrees = Vec::new();
    for &radius_km in &args.radii {
        let config = TrainingConfig { radius_km, ..base.clone() };
        let graph = build_graph(&dataset.pois, radius_km, &road)?;
        degrees.push(DegreeStats::of(&graph, &dataset));
        let problem = problem_for(&dataset, &graph, &config)?;
        let dir = format!("r{radius_km}");
        let mut log = run.json_lines(&format!("{dir}/{EPOCH_LOG}"))?;
        let outcome = train_logged(&problem, &config, args.detour_factor, &mut log)?;
        save_params(run.output_path(&format!("{dir}/{MODEL_FILE}"))?, &outcome.best)?;
        let test = evaluate_model("model", &problem, &outcome.best)?;
        let validation_mae = problem
            .validation_mae(&outcome.best)
            .ok_or_else(|| CliError::usage("the validation split is empty"))?;
        log::info!("radius {radius_km} km: validation MAE {validation_mae:.2}, test MAE {:.2}", test.mae);
        run.write_json(&format!("{dir}/eval.json"), &[&test])?;
        points.push(CurvePoint {
            radius_km,
            mean_degree: graph.mean_degree(),
            best_epoch: outcome.best_epoch,
            validation_mae,
            mae: test.mae,
            rmse: test.rmse,
            r2: test.r2,
            fallbacks: test.fallbacks,
        });
    }
    let mut sorted = degrees.clone();
    sorted.sort_by(|a, b| a.radius_km.total_cmp(&b.radius_km));
    if sorted.windows(2).any(|w| w[1].mean_degree < w[0].mean_degree) {
        log::warn!("mean neighbor count decreases with radius");
    }
    run.write_json("neighbors.json", &degrees)?;
    run.write_text("neighbors.txt", &DegreeStats::render(&degrees))?;
    let curve = Curve::new(points);
    run.write_json(CURVE_FILE, &curve)?;
    run.write_text("curve.txt", &curve.render())?;
    log::info!("selected radius {} km", curve.selected_radius_km);
    Ok(())
}
