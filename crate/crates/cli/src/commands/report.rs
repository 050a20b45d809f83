//! `report`: attribute and distance preferences, facility premiums and
//! per-category rankings of a snapshot.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use hedon_core::exact::exact_sum;
use hedon_core::metrics::{
    attribute_preferences, distance_preferences, facility_premiums, group_thousands, pearson, render_premium_table,
    spearman, PremiumTable,
};
use hedon_core::model::ModelParams;

use crate::context::{load_dataset, load_snapshot};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::CommonArgs;

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub pois: PathBuf,
    /// Planted snapshot to compare against.
    #[arg(long)]
    pub planted: Option<PathBuf>,
    /// Facilities listed per category in the text report.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, default_value = "CNY/m²")]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeShare {
    pub attribute: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelWeight {
    pub level: String,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceShares {
    pub euclidean: f64,
    pub trajectory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedComparison {
    /// Spearman correlation of category premiums, planted vs learned.
    pub premium_rank_correlation: f64,
    /// Pearson correlation of individual facility prices.
    pub facility_price_correlation: f64,
    pub facilities_compared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub attribute_preferences: Vec<AttributeShare>,
    pub attribute_levels: Vec<LevelWeight>,
    pub distance_preferences: DistanceShares,
    pub phi: [f64; 2],
    pub premiums: PremiumTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted: Option<PlantedComparison>,
}

pub fn build_report(params: &ModelParams, premiums: PremiumTable) -> Report {
    let [euclidean, trajectory] = distance_preferences(&params.phi);
    Report {
        attribute_preferences: attribute_preferences(params)
            .into_iter()
            .map(|(attribute, share)| AttributeShare { attribute, share })
            .collect(),
        attribute_levels: params
            .theta
            .iter()
            .enumerate()
            .map(|(slot, &theta)| LevelWeight {
                level: params.layout.slot_label(slot),
                theta,
            })
            .collect(),
        distance_preferences: DistanceShares { euclidean, trajectory },
        phi: params.phi,
        premiums,
        planted: None,
    }
}

pub fn compare(learned: &PremiumTable, planted: &PremiumTable, planted_params: &ModelParams, params: &ModelParams) -> CliResult<PlantedComparison> {
    let pairs: Vec<(f64, f64)> = planted
        .categories
        .iter()
        .filter_map(|p| {
            learned
                .categories
                .iter()
                .find(|l| l.category == p.category)
                .map(|l| (p.premium, l.premium))
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (pa, pb): (Vec<f64>, Vec<f64>) = learned
        .rankings
        .values()
        .flatten()
        .filter_map(|f| planted_params.prices.get(&f.id).zip(params.prices.get(&f.id)))
        .unzip();
    Ok(PlantedComparison {
        premium_rank_correlation: spearman(&a, &b)?,
        facility_price_correlation: pearson(&pa, &pb)?,
        facilities_compared: pa.len(),
    })
}

pub fn render(report: &Report, top: usize, unit: &str) -> String {
    let mut out = String::from("Attribute preferences\n");
    for a in &report.attribute_preferences {
        out += &format!("  {:<16} {:>7.2}%\n", a.attribute, 100.0 * a.share);
    }
    out += "\nAttribute levels (theta)\n";
    for l in &report.attribute_levels {
        out += &format!("  {:<28} {:>9.4}\n", l.level, l.theta);
    }
    out += &format!(
        "\nDistance preferences\n  euclidean        {:>7.2}%\n  trajectory       {:>7.2}%\n  phi              ({:.4}, {:.4})\n\n",
        100.0 * report.distance_preferences.euclidean,
        100.0 * report.distance_preferences.trajectory,
        report.phi[0],
        report.phi[1]
    );
    out += &render_premium_table(&report.premiums, unit);
    for (category, list) in &report.premiums.rankings {
        out += &format!("\nTop {category}\n");
        for (i, f) in list.iter().take(top).enumerate() {
            out += &format!("  {:>3}. {:<16} {:>12} {unit}\n", i + 1, f.id, group_thousands(f.price));
        }
    }
    if let Some(p) = &report.planted {
        out += &format!(
            "\nAgainst planted parameters\n  premium rank correlation   {:.4}\n  facility price correlation {:.4} over {} facilities\n",
            p.premium_rank_correlation, p.facility_price_correlation, p.facilities_compared
        );
    }
    out
}

pub fn run(_common: &CommonArgs, args: &ReportArgs, run: &mut Run) -> CliResult<()> {
    let params = load_snapshot(run, &args.model)?;
    let dataset = load_dataset(run, &args.pois)?;
    let prices: Vec<f64> = dataset.pois.iter().filter_map(|p| p.known_price).collect();
    if prices.is_empty() {
        return Err(CliError::usage("the POI file has no priced block"));
    }
    let city_mean = exact_sum(&prices) / prices.len() as f64;
    let premiums = facility_premiums(&params, &dataset.pois, city_mean);
    let mut report = build_report(&params, premiums);
    if let Some(path) = &args.planted {
        let planted = load_snapshot(run, path)?;
        let planted_premiums = facility_premiums(&planted, &dataset.pois, city_mean);
        report.planted = Some(compare(&report.premiums, &planted_premiums, &planted, &params)?);
    }
    run.write_json("report.json", &report)?;
    run.write_text("report.txt", &render(&report, args.top, &args.unit))?;
    Ok(())
}
