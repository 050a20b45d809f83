//! Great-circle distances, road-distance models and a uniform grid index for
//! radius queries over points of interest.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = Error;
    fn try_from(r: RawPoint) -> Result<Self> {
        GeoPoint::new(r.lat, r.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint {
            lat: p.lat,
            lon: p.lon,
        }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::validation(format!("latitude {lat} outside [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::validation(format!("longitude {lon} outside [-180, 180]")));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance in kilometers.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = (dlat * 0.5).sin();
    let s_lon = (dlon * 0.5).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Supplies travel distances between two points. Implementations must never
/// return less than the great-circle distance.
pub trait RoadModel: Send + Sync {
    fn trajectory_km(&self, a: GeoPoint, b: GeoPoint) -> f64;
}

/// Road distance as a constant multiple of the straight-line distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetourRoadModel {
    factor: f64,
}

impl DetourRoadModel {
    pub const DEFAULT_FACTOR: f64 = 1.3;

    pub fn new(factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 1.0 {
            return Err(Error::config(format!("detour factor must be >= 1, got {factor}")));
        }
        Ok(Self { factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

impl Default for DetourRoadModel {
    fn default() -> Self {
        Self {
            factor: Self::DEFAULT_FACTOR,
        }
    }
}

impl RoadModel for DetourRoadModel {
    fn trajectory_km(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        self.factor * haversine_km(a, b)
    }
}

pub fn trajectory_km(a: GeoPoint, b: GeoPoint, road_model: &dyn RoadModel) -> f64 {
    road_model.trajectory_km(a, b)
}

/// The two distance types used as edge weights: straight line and route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub euclidean_km: f64,
    pub trajectory_km: f64,
}

impl DistancePair {
    pub fn new(euclidean_km: f64, trajectory_km: f64) -> Result<Self> {
        if !euclidean_km.is_finite() || !trajectory_km.is_finite() || euclidean_km < 0.0 {
            return Err(Error::validation(format!(
                "distances must be finite and nonnegative, got ({euclidean_km}, {trajectory_km})"
            )));
        }
        if trajectory_km < euclidean_km {
            return Err(Error::validation(format!(
                "trajectory distance {trajectory_km} shorter than straight line {euclidean_km}"
            )));
        }
        Ok(Self {
            euclidean_km,
            trajectory_km,
        })
    }

    pub fn measure(a: GeoPoint, b: GeoPoint, road_model: &dyn RoadModel) -> Result<Self> {
        let e = haversine_km(a, b);
        // Clamp guards models whose rounding lands a hair under the chord.
        let t = road_model.trajectory_km(a, b).max(e);
        Self::new(e, t)
    }
}

/// One radius-query result: position of the POI in the index and its distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub distance_km: f64,
}

/// Uniform lat/lon grid whose cells are at least `max_radius_km` wide, so a
/// query never needs more than the 3x3 block of cells around its center.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    ids: Vec<String>,
    points: Vec<GeoPoint>,
    max_radius_km: f64,
    min_lat: f64,
    min_lon: f64,
    cell_lat: f64,
    cell_lon: f64,
    rows: usize,
    cols: usize,
    cells: Vec<Vec<usize>>,
}

impl SpatialIndex {
    pub fn build<I, S>(entries: I, max_radius_km: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (S, GeoPoint)>,
        S: Into<String>,
    {
        if !(max_radius_km.is_finite() && max_radius_km > 0.0) {
            return Err(Error::config(format!("index radius must be positive, got {max_radius_km}")));
        }
        let (ids, points): (Vec<String>, Vec<GeoPoint>) =
            entries.into_iter().map(|(id, p)| (id.into(), p)).unzip();

        let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &points {
            min_lat = min_lat.min(p.lat);
            max_lat = max_lat.max(p.lat);
            min_lon = min_lon.min(p.lon);
            max_lon = max_lon.max(p.lon);
        }
        if points.is_empty() {
            (min_lat, max_lat, min_lon, max_lon) = (0.0, 0.0, 0.0, 0.0);
        }

        let cell_lat = max_radius_km / KM_PER_DEGREE;
        let extreme_lat = min_lat.abs().max(max_lat.abs()) + cell_lat;
        let cell_lon = lon_half_width(max_radius_km, extreme_lat);
        let rows = (((max_lat - min_lat) / cell_lat).floor() as usize) + 1;
        let cols = (((max_lon - min_lon) / cell_lon).floor() as usize) + 1;

        let mut index = Self {
            ids,
            points,
            max_radius_km,
            min_lat,
            min_lon,
            cell_lat,
            cell_lon,
            rows,
            cols,
            cells: vec![Vec::new(); rows * cols],
        };
        for i in 0..index.points.len() {
            let (r, c) = index.cell_of(index.points[i]);
            let slot = r * index.cols + c;
            index.cells[slot].push(i);
        }
        Ok(index)
    }

    fn cell_of(&self, p: GeoPoint) -> (usize, usize) {
        let r = ((p.lat - self.min_lat) / self.cell_lat).floor().clamp(0.0, (self.rows - 1) as f64);
        let c = ((p.lon - self.min_lon) / self.cell_lon).floor().clamp(0.0, (self.cols - 1) as f64);
        (r as usize, c as usize)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_radius_km(&self) -> f64 {
        self.max_radius_km
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn point(&self, index: usize) -> GeoPoint {
        self.points[index]
    }

    /// All indexed POIs within `radius_km` of `center` (inclusive), sorted by
    /// ascending distance then id. `exclude` drops the center's own entry.
    pub fn radius_query(&self, center: GeoPoint, radius_km: f64, exclude: Option<usize>) -> Result<Vec<Hit>> {
        if !(radius_km.is_finite() && radius_km > 0.0) {
            return Err(Error::config(format!("query radius must be positive, got {radius_km}")));
        }
        if radius_km > self.max_radius_km {
            return Err(Error::config(format!(
                "query radius {radius_km} km exceeds index tier {} km",
                self.max_radius_km
            )));
        }
        let mut hits = Vec::new();
        if self.points.is_empty() {
            return Ok(hits);
        }
        let dlat = radius_km / KM_PER_DEGREE;
        let dlon = lon_half_width(radius_km, center.lat.abs() + dlat);
        let pad = 1e-9;
        let row_range = self.span(center.lat - dlat - pad, center.lat + dlat + pad, self.min_lat, self.cell_lat, self.rows);
        let col_range = self.span(center.lon - dlon - pad, center.lon + dlon + pad, self.min_lon, self.cell_lon, self.cols);
        let (Some((r0, r1)), Some((c0, c1))) = (row_range, col_range) else {
            return Ok(hits);
        };
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &i in &self.cells[r * self.cols + c] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = haversine_km(center, self.points[i]);
                    if d <= radius_km {
                        hits.push(Hit { index: i, distance_km: d });
                    }
                }
            }
        }
        self.sort_hits(&mut hits);
        Ok(hits)
    }

    /// Reference implementation: check every indexed point.
    pub fn linear_scan(&self, center: GeoPoint, radius_km: f64, exclude: Option<usize>) -> Vec<Hit> {
        let mut hits: Vec<Hit> = (0..self.points.len())
            .filter(|&i| Some(i) != exclude)
            .map(|i| Hit {
                index: i,
                distance_km: haversine_km(center, self.points[i]),
            })
            .filter(|h| h.distance_km <= radius_km)
            .collect();
        self.sort_hits(&mut hits);
        hits
    }

    fn sort_hits(&self, hits: &mut [Hit]) {
        hits.sort_by(|a, b| {
            a.distance_km
                .partial_cmp(&b.distance_km)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.ids[a.index].cmp(&self.ids[b.index]))
        });
    }

    fn span(&self, lo: f64, hi: f64, origin: f64, cell: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / cell).floor();
        let b = ((hi - origin) / cell).floor();
        if b < 0.0 || a > (n - 1) as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, b.min((n - 1) as f64) as usize))
    }
}

/// Longitude half-width (degrees) of a circle of `radius_km` at latitude `abs_lat`.
fn lon_half_width(radius_km: f64, abs_lat: f64) -> f64 {
    let ang = radius_km / EARTH_RADIUS_KM;
    let cos_lat = abs_lat.min(90.0).to_radians().cos();
    let s = ang.sin() / cos_lat;
    if !s.is_finite() || s >= 1.0 || abs_lat >= 89.0 {
        360.0
    } else {
        s.asin().to_degrees()
    }
}
