//! Synthetic cities with planted ground truth.
//!
//! Facility prices are drawn per category, block attributes uniformly, and
//! every block's true price is the fixed point of the pricing model under the
//! planted parameters. Because neighboring blocks price each other, the true
//! prices solve `h = diag(S) (F_bb h + F_bf u)`, which is a contraction
//! (`S < 1`, rows of `F` sum to at most one) and is iterated to convergence.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_graph, AttributeLayout, FacilityCategory, PoiKind, PoiRecord};
use crate::error::{Error, Result};
use crate::geo::{haversine_km, DetourRoadModel, GeoPoint, EARTH_RADIUS_KM};
use crate::metrics::pearson;
use crate::model::{distance_weights, sigmoid, ModelParams, PriceTable, SnapshotMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    /// Square of `side_km` centered on `(lat, lon)`.
    pub fn square_km(lat: f64, lon: f64, side_km: f64) -> Self {
        let km_per_deg = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let half_lat = side_km / 2.0 / km_per_deg;
        let half_lon = half_lat / lat.to_radians().cos();
        Self {
            min_lat: lat - half_lat,
            min_lon: lon - half_lon,
            max_lat: lat + half_lat,
            max_lon: lon + half_lon,
        }
    }

    /// Concentric box scaled by `fraction` along each side.
    pub fn shrink(&self, fraction: f64) -> Self {
        let (clat, clon) = ((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0);
        let (hlat, hlon) = ((self.max_lat - self.min_lat) / 2.0 * fraction, (self.max_lon - self.min_lon) / 2.0 * fraction);
        Self {
            min_lat: clat - hlat,
            min_lon: clon - hlon,
            max_lat: clat + hlat,
            max_lon: clon + hlon,
        }
    }

    /// Approximate area in km² (equirectangular at the center latitude).
    pub fn area_km2(&self) -> f64 {
        let km_per_deg = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let clat = ((self.min_lat + self.max_lat) / 2.0).to_radians();
        (self.max_lat - self.min_lat) * km_per_deg * (self.max_lon - self.min_lon) * km_per_deg * clat.cos()
    }

    fn validate(&self) -> Result<()> {
        let ok = GeoPoint::new(self.min_lat, self.min_lon).is_ok()
            && GeoPoint::new(self.max_lat, self.max_lon).is_ok()
            && self.max_lat > self.min_lat
            && self.max_lon > self.min_lon;
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("degenerate bounding box {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> GeoPoint {
        let lat = rng.random_range(self.min_lat..self.max_lat);
        let lon = rng.random_range(self.min_lon..self.max_lon);
        GeoPoint::new(lat, lon).expect("inside a validated box")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRange {
    pub min: f64,
    pub max: f64,
}

/// One categorical attribute and the planted weight of each of its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    pub levels: BTreeMap<String, f64>,
}

/// Observation noise: standard deviation `absolute + relative * mean true price`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_blocks: usize,
    pub n_facilities: usize,
    pub bbox: BoundingBox,
    /// Residential blocks occupy this centered fraction of each bbox side;
    /// facilities cover the whole box.
    pub residential_extent: f64,
    pub radius_km: f64,
    pub detour_factor: f64,
    pub attributes: Vec<AttributeSpec>,
    pub true_phi: [f64; 2],
    pub facility_prices: BTreeMap<FacilityCategory, PriceRange>,
    /// Facility prices are scaled by `1 + center_premium * (1 - r / r_max)`,
    /// with `r` the distance to the bbox center and `r_max` the
    /// half-diagonal of the residential box (clamped at zero beyond it).
    pub center_premium: f64,
    pub noise: NoiseSpec,
    pub known_fraction: f64,
    pub seed: u64,
}

fn levels(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Facility price ranges, loosely shaped like observed category premiums.
pub fn default_facility_prices() -> BTreeMap<FacilityCategory, PriceRange> {
    use FacilityCategory::*;
    [
        (Governmental, 56_000.0, 68_000.0),
        (Educational, 58_000.0, 72_000.0),
        (Financial, 56_000.0, 70_000.0),
        (Recreational, 52_000.0, 64_000.0),
        (Medical, 54_000.0, 66_000.0),
        (Commercial, 48_000.0, 60_000.0),
        (Transportation, 56_000.0, 70_000.0),
        (Scenic, 60_000.0, 76_000.0),
        (Wasteyard, 30_000.0, 42_000.0),
        (Cemetery, 34_000.0, 46_000.0),
    ]
    .into_iter()
    .map(|(c, min, max)| (c, PriceRange { min, max }))
    .collect()
}

pub fn default_attributes() -> Vec<AttributeSpec> {
    vec![
        AttributeSpec {
            name: "type".into(),
            levels: levels(&[("apartment", 0.2), ("house", 1.4)]),
        },
        AttributeSpec {
            name: "district".into(),
            levels: levels(&[("d1", 0.9), ("d2", 0.4), ("d3", -0.1), ("d4", -0.6)]),
        },
        AttributeSpec {
            name: "developer".into(),
            levels: levels(&[("dev_a", 0.3), ("dev_b", 0.0), ("dev_c", -0.3)]),
        },
        AttributeSpec {
            name: "age".into(),
            levels: levels(&[("new", 0.25), ("mid", 0.0), ("old", -0.25)]),
        },
        AttributeSpec {
            name: "other".into(),
            levels: levels(&[("x", 0.05), ("y", -0.05)]),
        },
    ]
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_blocks: 2000,
            n_facilities: 5000,
            bbox: BoundingBox::square_km(39.9, 116.4, 60.0),
            residential_extent: 0.2,
            radius_km: 1.0,
            detour_factor: DetourRoadModel::DEFAULT_FACTOR,
            attributes: default_attributes(),
            true_phi: [-1.5, -1.0],
            facility_prices: default_facility_prices(),
            center_premium: 1.0,
            noise: NoiseSpec::default(),
            known_fraction: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_facilities == 0 {
            return Err(Error::validation("n_blocks and n_facilities must be positive"));
        }
        self.bbox.validate()?;
        if !(self.residential_extent > 0.0 && self.residential_extent <= 1.0) {
            return Err(Error::validation("residential_extent must be in (0, 1]"));
        }
        if !(self.radius_km.is_finite() && self.radius_km > 0.0) {
            return Err(Error::validation("radius_km must be positive"));
        }
        DetourRoadModel::new(self.detour_factor)?;
        if !(self.noise.absolute >= 0.0 && self.noise.relative >= 0.0) {
            return Err(Error::validation("noise must be nonnegative"));
        }
        if !(self.known_fraction > 0.0 && self.known_fraction <= 1.0) {
            return Err(Error::validation("known_fraction must be in (0, 1]"));
        }
        if self.attributes.is_empty() || self.attributes.iter().any(|a| a.levels.is_empty()) {
            return Err(Error::validation("every attribute needs at least one level"));
        }
        if self.facility_prices.is_empty() {
            return Err(Error::validation("facility_prices must name at least one category"));
        }
        for (c, r) in &self.facility_prices {
            if !(r.min > 0.0 && r.max >= r.min && r.max.is_finite()) {
                return Err(Error::validation(format!("bad price range for {c}")));
            }
        }
        if !(self.center_premium.is_finite() && self.center_premium >= 0.0) {
            return Err(Error::validation("center_premium must be nonnegative"));
        }
        if !self.true_phi.iter().all(|p| p.is_finite()) {
            return Err(Error::validation("true_phi must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub pois: Vec<PoiRecord>,
    /// Planted parameters; the price table holds facilities and unpriced blocks.
    pub planted: ModelParams,
    /// Noise-free price of every block that has at least one neighbor.
    pub true_prices: BTreeMap<String, f64>,
}

pub fn generate_city(config: &SynthConfig) -> Result<SyntheticCity> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let categories: Vec<(FacilityCategory, PriceRange)> = config.facility_prices.iter().map(|(c, r)| (*c, *r)).collect();

    let residential = config.bbox.shrink(config.residential_extent);
    let center = GeoPoint::new(
        (config.bbox.min_lat + config.bbox.max_lat) / 2.0,
        (config.bbox.min_lon + config.bbox.max_lon) / 2.0,
    )?;
    let r_max = haversine_km(
        center,
        GeoPoint::new(residential.max_lat, residential.max_lon)?,
    );
    let mut pois = Vec::with_capacity(config.n_blocks + config.n_facilities);
    let bw = digits(config.n_blocks);
    for i in 0..config.n_blocks {
        let location = residential.sample(&mut rng);
        let attributes = config
            .attributes
            .iter()
            .map(|a| {
                let k = rng.random_range(0..a.levels.len());
                (a.name.clone(), a.levels.keys().nth(k).expect("level").clone())
            })
            .collect();
        pois.push(PoiRecord {
            id: format!("b{i:0bw$}"),
            kind: PoiKind::ResidentialBlock,
            category: None,
            location,
            known_price: None,
            attributes,
        });
    }
    let fw = digits(config.n_facilities);
    let mut facility_price = HashMap::new();
    for i in 0..config.n_facilities {
        let (category, range) = categories[rng.random_range(0..categories.len())];
        let location = config.bbox.sample(&mut rng);
        let base = if range.max > range.min {
            rng.random_range(range.min..range.max)
        } else {
            range.min
        };
        let closeness = (1.0 - haversine_km(center, location) / r_max).max(0.0);
        let price = base * (1.0 + config.center_premium * closeness);
        let id = format!("f{i:0fw$}");
        facility_price.insert(id.clone(), price);
        pois.push(PoiRecord {
            id,
            kind: PoiKind::Facility,
            category: Some(category),
            location,
            known_price: None,
            attributes: Default::default(),
        });
    }

    let layout = AttributeLayout::infer(&pois)?;
    let mut theta = vec![0.0; layout.width()];
    for (b, spec) in layout.blocks.iter().zip(layout_specs(&layout, &config.attributes)) {
        let offset = layout.offset(layout.blocks.iter().position(|x| x.name == b.name).expect("block"));
        for (i, v) in b.values.iter().enumerate() {
            theta[offset + i] = spec.levels[v];
        }
    }

    let road = DetourRoadModel::new(config.detour_factor)?;
    let graph = build_graph(&pois, config.radius_km, &road)?;
    let true_prices = solve_block_prices(&pois, &graph, &layout, &theta, &config.true_phi, &facility_price)?;

    // Which blocks keep their price.
    let mut coverable: Vec<usize> = (0..config.n_blocks).filter(|&i| true_prices.contains_key(&pois[i].id)).collect();
    coverable.shuffle(&mut rng);
    let n_known = ((config.known_fraction * coverable.len() as f64).round() as usize).min(coverable.len());
    let mean_true = if true_prices.is_empty() {
        0.0
    } else {
        true_prices.values().sum::<f64>() / true_prices.len() as f64
    };
    let sd = config.noise.absolute + config.noise.relative * mean_true;
    let normal = Normal::new(0.0, sd.max(0.0)).map_err(|e| Error::validation(e.to_string()))?;
    let mut known_idx = coverable[..n_known].to_vec();
    known_idx.sort_unstable();
    for &i in &known_idx {
        let h = true_prices[&pois[i].id];
        let noisy = if sd > 0.0 { h + normal.sample(&mut rng) } else { h };
        pois[i].known_price = Some(noisy.max(1.0));
    }

    let mut table: BTreeMap<String, f64> = facility_price.into_iter().collect();
    for &i in &coverable[n_known..] {
        let id = &pois[i].id;
        table.insert(id.clone(), true_prices[id]);
    }
    let planted = ModelParams {
        layout,
        theta,
        phi: config.true_phi,
        prices: PriceTable::from_map(table),
        meta: SnapshotMeta {
            radius_km: Some(config.radius_km),
            detour_factor: Some(config.detour_factor),
            seed: Some(config.seed),
            ..Default::default()
        },
    };
    Ok(SyntheticCity {
        pois,
        planted,
        true_prices,
    })
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

fn layout_specs<'a>(layout: &AttributeLayout, specs: &'a [AttributeSpec]) -> Vec<&'a AttributeSpec> {
    layout
        .blocks
        .iter()
        .map(|b| specs.iter().find(|s| s.name == b.name).expect("layout built from these specs"))
        .collect()
}

fn solve_block_prices(
    pois: &[PoiRecord],
    graph: &crate::dataset::Graph,
    layout: &AttributeLayout,
    theta: &[f64],
    phi: &[f64; 2],
    facility_price: &HashMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    struct Row {
        scale: f64,
        fixed: f64,
        blocks: Vec<(usize, f64)>,
    }
    let ids: Vec<&str> = graph.sets.keys().map(String::as_str).collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let by_id: HashMap<&str, &PoiRecord> = pois.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut rows = Vec::with_capacity(ids.len());
    for set in graph.sets.values() {
        let block = by_id[set.center_id.as_str()];
        let x = layout.encode(&block.attributes)?;
        let scale = sigmoid(x.slots.iter().map(|&s| theta[s]).sum());
        let f = distance_weights(&[set.euclidean(), set.trajectory()], phi);
        let mut fixed = 0.0;
        let mut blocks = Vec::new();
        for (id, fj) in set.neighbor_ids.iter().zip(f) {
            if let Some(u) = facility_price.get(id) {
                fixed += fj * u;
            } else {
                blocks.push((pos[id.as_str()], fj));
            }
        }
        rows.push(Row { scale, fixed, blocks });
    }
    let mut h = vec![0.0; rows.len()];
    let mut next = vec![0.0; rows.len()];
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let v = r.scale * (r.fixed + r.blocks.iter().map(|&(j, f)| f * h[j]).sum::<f64>());
            delta = delta.max((v - h[i]).abs() / v.abs().max(1e-300));
            next[i] = v;
        }
        std::mem::swap(&mut h, &mut next);
        if delta < 1e-15 {
            return Ok(ids.iter().map(|s| s.to_string()).zip(h).collect());
        }
    }
    Err(Error::validation("block price fixed point did not converge"))
}

/// How well learned parameters recover planted ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub compared: usize,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
    /// Pearson correlation of planted vs learned prices (NaN when undefined).
    pub price_correlation: f64,
    /// Cosine similarity of theta after removing each attribute block's mean.
    pub theta_cosine: f64,
    pub phi_cosine: f64,
    pub relative_errors: BTreeMap<String, f64>,
}

/// Compares every price in the planted table.
pub fn plant_report(planted: &ModelParams, learned: &ModelParams) -> Result<RecoveryReport> {
    let ids: Vec<String> = planted.prices.iter().map(|(id, _)| id.to_string()).collect();
    plant_report_for(planted, learned, &ids)
}

/// Compares the prices of `ids` only.
pub fn plant_report_for(planted: &ModelParams, learned: &ModelParams, ids: &[String]) -> Result<RecoveryReport> {
    if planted.layout != learned.layout {
        return Err(Error::validation("planted and learned attribute layouts differ"));
    }
    let mut a = Vec::with_capacity(ids.len());
    let mut b = Vec::with_capacity(ids.len());
    let mut relative_errors = BTreeMap::new();
    for id in ids {
        let p = planted.prices.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        let l = learned.prices.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        relative_errors.insert(id.clone(), (l - p).abs() / p.abs().max(f64::MIN_POSITIVE));
        a.push(p);
        b.push(l);
    }
    let n = relative_errors.len();
    let errs: Vec<f64> = relative_errors.values().copied().collect();
    let price_correlation = if a == b && n > 0 {
        1.0
    } else {
        pearson(&a, &b).unwrap_or(f64::NAN)
    };
    Ok(RecoveryReport {
        compared: n,
        mean_relative_error: if n > 0 { errs.iter().sum::<f64>() / n as f64 } else { 0.0 },
        max_relative_error: errs.iter().copied().fold(0.0, f64::max),
        price_correlation,
        theta_cosine: cosine(&centered_theta(planted), &centered_theta(learned)),
        phi_cosine: cosine(&planted.phi, &learned.phi),
        relative_errors,
    })
}

fn centered_theta(p: &ModelParams) -> Vec<f64> {
    let mut out = p.theta.clone();
    for r in p.layout.ranges() {
        // The last slot of each block is the never-active unseen slot.
        let seen = r.start..r.end - 1;
        if seen.is_empty() {
            continue;
        }
        let mean = out[seen.clone()].iter().sum::<f64>() / seen.len() as f64;
        out[seen].iter_mut().for_each(|v| *v -= mean);
    }
    out
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        1.0
    } else if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, Instance};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_blocks: 150,
            n_facilities: 300,
            bbox: BoundingBox::square_km(31.2, 121.5, 8.0),
            residential_extent: 1.0,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_prices_match_forward_model() {
        let city = generate_city(&SynthConfig { known_fraction: 0.6, ..small(4) }).unwrap();
        let known: HashMap<String, f64> =
            city.pois.iter().filter_map(|p| p.known_price.map(|h| (p.id.clone(), h))).collect();
        let graph = build_graph(&city.pois, 1.0, &DetourRoadModel::default()).unwrap();
        let mut checked = 0;
        for p in city.pois.iter().filter(|p| p.known_price.is_some()) {
            let x = city.planted.layout.encode(&p.attributes).unwrap();
            let inst = Instance::compile(&x, &graph.sets[&p.id], &city.planted, &known, p.known_price).unwrap();
            let h = p.known_price.unwrap();
            let pred = forward(&inst, &city.planted).prediction;
            assert!((pred - h).abs() <= 1e-9 * h, "{}: {pred} vs {h}", p.id);
            checked += 1;
        }
        assert!(checked > 50);
        // every unpriced coverable block is a planted variable
        let unpriced = city.pois.iter().filter(|p| p.is_block() && p.known_price.is_none()).count();
        assert_eq!(city.planted.prices.len(), 300 + unpriced - graph.isolated.len());
    }

    #[test]
    fn same_seed_same_city() {
        let a = generate_city(&small(9)).unwrap();
        let b = generate_city(&small(9)).unwrap();
        assert_eq!(a.pois, b.pois);
        assert_eq!(a.planted, b.planted);
        let c = generate_city(&small(10)).unwrap();
        assert_ne!(a.pois, c.pois);
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_city(&SynthConfig { n_blocks: 0, ..small(0) }).is_err());
        let flat = BoundingBox {
            min_lat: 10.0,
            min_lon: 10.0,
            max_lat: 10.0,
            max_lon: 10.5,
        };
        assert!(generate_city(&SynthConfig { bbox: flat, ..small(0) }).is_err());
        assert!(generate_city(&SynthConfig { known_fraction: 0.0, ..small(0) }).is_err());
    }

    #[test]
    fn facility_density_matches_expectation() {
        let cfg = SynthConfig {
            n_blocks: 2000,
            n_facilities: 8000,
            bbox: BoundingBox::square_km(39.9, 116.4, 30.0),
            residential_extent: 1.0,
            seed: 2,
            ..Default::default()
        };
        let city = generate_city(&cfg).unwrap();
        let graph = build_graph(&city.pois, 1.0, &DetourRoadModel::default()).unwrap();
        let facilities: usize = graph
            .sets
            .values()
            .map(|s| s.neighbor_ids.iter().filter(|id| id.starts_with('f')).count())
            .sum();
        let per_block = facilities as f64 / cfg.n_blocks as f64;
        let expected = cfg.n_facilities as f64 * std::f64::consts::PI / cfg.bbox.area_km2();
        assert!((per_block / expected - 1.0).abs() < 0.2, "{per_block} vs {expected}");
    }

    #[test]
    fn recovery_report_cases() {
        let city = generate_city(&small(1)).unwrap();
        let same = plant_report(&city.planted, &city.planted).unwrap();
        assert_eq!(same.max_relative_error, 0.0);
        assert_eq!(same.price_correlation, 1.0);
        assert!((same.theta_cosine - 1.0).abs() < 1e-12);
        assert!((same.phi_cosine - 1.0).abs() < 1e-12);

        let mut doubled = city.planted.clone();
        doubled.prices.values_mut().iter_mut().for_each(|v| *v *= 2.0);
        let r = plant_report(&city.planted, &doubled).unwrap();
        assert!(r.relative_errors.values().all(|e| (e - 1.0).abs() < 1e-12));

        let mut missing = city.planted.clone();
        missing.prices = PriceTable::default();
        assert!(matches!(plant_report(&city.planted, &missing), Err(Error::UnknownId(_))));
    }

    #[test]
    fn random_prices_are_uncorrelated() {
        // Null distribution of the correlation for 100 unrelated prices.
        let city = generate_city(&small(3)).unwrap();
        let ids: Vec<String> = city.planted.prices.iter().map(|(id, _)| id.to_string()).take(100).collect();
        let mut within = 0;
        let mut sum = 0.0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut learned = city.planted.clone();
            learned.prices.values_mut().iter_mut().for_each(|v| *v = rng.random_range(1.0..1e5));
            let r = plant_report_for(&city.planted, &learned, &ids).unwrap().price_correlation;
            sum += r;
            if r.abs() <= 0.25 {
                within += 1;
            }
        }
        assert!(within >= 190, "{within}/200 within 0.25");
        assert!((sum / 200.0).abs() < 0.05);
    }
}
