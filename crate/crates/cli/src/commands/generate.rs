//! `generate`: a synthetic city with planted parameters.

use serde::Serialize;

use hedon_core::dataset::write_pois;
use hedon_core::model::save_params;
use hedon_core::synth::{generate_city, SynthConfig};

use crate::context::read_json;
use crate::error::CliResult;
use crate::manifest::Run;
use crate::CommonArgs;

pub const POIS_FILE: &str = "pois.jsonl";
pub const PLANTED_FILE: &str = "planted.json";
pub const TRUTH_FILE: &str = "true_prices.json";

#[derive(Debug, Serialize)]
struct Summary {
    blocks: usize,
    facilities: usize,
    priced_blocks: usize,
    mean_known_price: f64,
    seed: u64,
}

pub fn run(common: &CommonArgs, run: &mut Run) -> CliResult<()> {
    let mut config: SynthConfig = match &common.config {
        Some(path) => read_json(run, path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(r) = common.radius_km {
        config.radius_km = r;
    }
    run.config(&config);
    run.seed(config.seed);
    let city = generate_city(&config)?;

    write_pois(run.output_path(POIS_FILE)?, &city.pois)?;
    save_params(run.output_path(PLANTED_FILE)?, &city.planted)?;
    run.write_json(TRUTH_FILE, &city.true_prices)?;

    let known: Vec<f64> = city.pois.iter().filter_map(|p| p.known_price).collect();
    let summary = Summary {
        blocks: city.pois.iter().filter(|p| p.is_block()).count(),
        facilities: city.pois.iter().filter(|p| !p.is_block()).count(),
        priced_blocks: known.len(),
        mean_known_price: known.iter().sum::<f64>() / known.len().max(1) as f64,
        seed: config.seed,
    };
    run.write_json("summary.json", &summary)?;
    run.write_text(
        "summary.txt",
        &format!(
            "blocks          {}\nfacilities      {}\npriced blocks   {}\nmean price      {:.1}\nseed            {}\n",
            summary.blocks, summary.facilities, summary.priced_blocks, summary.mean_known_price, summary.seed
        ),
    )?;
    log::info!("generated {} POIs into {}", city.pois.len(), run.out_dir().display());
    Ok(())
}
