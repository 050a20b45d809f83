//! The POI graph: one neighbor set per residential block, holding every POI
//! within the influence radius and the two distance rows to each of them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PoiRecord;
use crate::error::{Error, Result};
use crate::geo::{DistancePair, GeoPoint, RoadModel, SpatialIndex};

pub const GRAPH_FORMAT: &str = "hedon-graph/1";

/// Neighbors of one residential block. Columns are residential blocks first,
/// then facilities, each group ascending by straight-line distance with id
/// tiebreak. `distances[0]` is the euclidean row, `distances[1]` the
/// trajectory row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    #[serde(rename = "center")]
    pub center_id: String,
    #[serde(rename = "neighbors")]
    pub neighbor_ids: Vec<String>,
    pub distances: [Vec<f64>; 2],
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.neighbor_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbor_ids.is_empty()
    }

    pub fn euclidean(&self) -> &[f64] {
        &self.distances[0]
    }

    pub fn trajectory(&self) -> &[f64] {
        &self.distances[1]
    }

    pub fn validate(&self, radius_km: f64) -> Result<()> {
        let k = self.neighbor_ids.len();
        let bad = |m: String| Err(Error::validation(format!("neighbor set `{}`: {m}", self.center_id)));
        if k == 0 {
            return bad("no neighbors".into());
        }
        if self.distances[0].len() != k || self.distances[1].len() != k {
            return bad(format!("distance rows do not have {k} columns"));
        }
        for j in 0..k {
            let (e, t) = (self.distances[0][j], self.distances[1][j]);
            if !e.is_finite() || !t.is_finite() || e < 0.0 {
                return bad(format!("non-finite or negative distance in column {j}"));
            }
            if t < e {
                return bad(format!("trajectory shorter than euclidean in column {j}"));
            }
            if e > radius_km {
                return bad(format!("column {j} at {e} km outside radius {radius_km} km"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub radius_km: f64,
    pub sets: BTreeMap<String, NeighborSet>,
    /// Residential blocks with nothing inside the radius.
    pub isolated: Vec<String>,
}

impl Graph {
    pub fn get(&self, block_id: &str) -> Option<&NeighborSet> {
        self.sets.get(block_id)
    }

    pub fn mean_degree(&self) -> f64 {
        let n = self.sets.len() + self.isolated.len();
        if n == 0 {
            return 0.0;
        }
        self.sets.values().map(NeighborSet::len).sum::<usize>() as f64 / n as f64
    }
}

/// Spatial index over a POI collection, reusable for ad-hoc neighborhoods.
pub struct Neighborhoods<'a> {
    pois: &'a [PoiRecord],
    index: SpatialIndex,
}

impl<'a> Neighborhoods<'a> {
    pub fn new(pois: &'a [PoiRecord], radius_km: f64) -> Result<Self> {
        let index = SpatialIndex::build(pois.iter().map(|p| (p.id.as_str(), p.location)), radius_km)?;
        Ok(Self { pois, index })
    }

    /// Neighbor set around `center`, or `None` when nothing is in range.
    pub fn around(
        &self,
        center_id: &str,
        center: GeoPoint,
        radius_km: f64,
        exclude: Option<usize>,
        road: &dyn RoadModel,
    ) -> Result<Option<NeighborSet>> {
        let hits = self.index.radius_query(center, radius_km, exclude)?;
        if hits.is_empty() {
            return Ok(None);
        }
        // Hits arrive sorted by (distance, id); a stable partition keeps that
        // order inside each group.
        let (blocks, facilities): (Vec<_>, Vec<_>) = hits.into_iter().partition(|h| self.pois[h.index].is_block());
        let k = blocks.len() + facilities.len();
        let mut set = NeighborSet {
            center_id: center_id.to_string(),
            neighbor_ids: Vec::with_capacity(k),
            distances: [Vec::with_capacity(k), Vec::with_capacity(k)],
        };
        for h in blocks.into_iter().chain(facilities) {
            let other = &self.pois[h.index];
            let pair = DistancePair::measure(center, other.location, road)?;
            set.neighbor_ids.push(other.id.clone());
            set.distances[0].push(h.distance_km);
            set.distances[1].push(pair.trajectory_km.max(h.distance_km));
        }
        Ok(Some(set))
    }
}

pub fn build_graph(pois: &[PoiRecord], radius_km: f64, road: &dyn RoadModel) -> Result<Graph> {
    if !(radius_km.is_finite() && radius_km > 0.0) {
        return Err(Error::config(format!("radius must be positive, got {radius_km}")));
    }
    let hoods = Neighborhoods::new(pois, radius_km)?;
    let centers: Vec<usize> = (0..pois.len()).filter(|&i| pois[i].is_block()).collect();
    let results: Vec<(usize, Option<NeighborSet>)> = centers
        .par_iter()
        .map(|&i| {
            let p = &pois[i];
            hoods.around(&p.id, p.location, radius_km, Some(i), road).map(|s| (i, s))
        })
        .collect::<Result<_>>()?;

    let mut sets = BTreeMap::new();
    let mut isolated = Vec::new();
    for (i, set) in results {
        match set {
            Some(s) => {
                sets.insert(pois[i].id.clone(), s);
            }
            None => isolated.push(pois[i].id.clone()),
        }
    }
    isolated.sort();
    if !isolated.is_empty() {
        log::warn!("{} residential blocks have no neighbor within {radius_km} km", isolated.len());
    }
    Ok(Graph {
        radius_km,
        sets,
        isolated,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphHeader {
    format: String,
    radius_km: f64,
    isolated: Vec<String>,
}

/// Writes the graph cache: a header line, then one neighbor set per line.
pub fn write_graph(path: impl AsRef<Path>, graph: &Graph) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = GraphHeader {
        format: GRAPH_FORMAT.into(),
        radius_km: graph.radius_km,
        isolated: graph.isolated.clone(),
    };
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", serde_json::to_string(&header).expect("header")).map_err(io)?;
    for set in graph.sets.values() {
        writeln!(w, "{}", serde_json::to_string(set).expect("neighbor set")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header: GraphHeader = match lines.next() {
        Some((_, l)) => {
            let l = l.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| parse_err(1, e.to_string()))?
        }
        None => return Err(parse_err(1, "missing graph header".into())),
    };
    if header.format != GRAPH_FORMAT {
        return Err(parse_err(1, format!("unsupported graph format `{}`", header.format)));
    }
    let mut sets = BTreeMap::new();
    for (n, l) in lines {
        let l = l.map_err(|e| Error::io(path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        let set: NeighborSet = serde_json::from_str(&l).map_err(|e| parse_err(n + 1, e.to_string()))?;
        set.validate(header.radius_km).map_err(|e| parse_err(n + 1, e.to_string()))?;
        if sets.contains_key(&set.center_id) {
            return Err(Error::DuplicateId(set.center_id));
        }
        sets.insert(set.center_id.clone(), set);
    }
    Ok(Graph {
        radius_km: header.radius_km,
        sets,
        isolated: header.isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FacilityCategory, PoiKind};
    use crate::geo::{haversine_km, DetourRoadModel, EARTH_RADIUS_KM};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poi(id: &str, block: bool, lat: f64, lon: f64) -> PoiRecord {
        PoiRecord {
            id: id.into(),
            kind: if block { PoiKind::ResidentialBlock } else { PoiKind::Facility },
            category: (!block).then_some(FacilityCategory::Scenic),
            location: GeoPoint::new(lat, lon).unwrap(),
            known_price: block.then_some(100.0),
            attributes: if block {
                [("type".to_string(), "house".to_string())].into()
            } else {
                Default::default()
            },
        }
    }

    fn deg(km: f64) -> f64 {
        km / (EARTH_RADIUS_KM * std::f64::consts::PI / 180.0)
    }

    #[test]
    fn two_blocks_see_each_other() {
        let pois = vec![poi("a", true, 0.0, 0.0), poi("b", true, deg(0.3), 0.0)];
        let g = build_graph(&pois, 0.5, &DetourRoadModel::default()).unwrap();
        assert_eq!(g.get("a").unwrap().neighbor_ids, ["b"]);
        assert_eq!(g.get("b").unwrap().neighbor_ids, ["a"]);
        assert!(g.isolated.is_empty());
        let d = &g.get("a").unwrap().distances;
        assert!((d[0][0] - 0.3).abs() < 1e-9);
        assert!((d[1][0] - 0.39).abs() < 1e-9);
    }

    #[test]
    fn isolated_blocks_reported() {
        let pois = vec![poi("a", true, 0.0, 0.0), poi("far", true, 1.0, 1.0), poi("f", false, 0.0, deg(0.1))];
        let g = build_graph(&pois, 0.5, &DetourRoadModel::default()).unwrap();
        assert_eq!(g.isolated, ["far"]);
        assert_eq!(g.sets.len(), 1);
    }

    fn random_city(n: usize, seed: u64) -> Vec<PoiRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let block = rng.random_bool(0.3);
                poi(&format!("p{i:04}"), block, rng.random_range(0.0..deg(4.0)), rng.random_range(0.0..deg(4.0)))
            })
            .collect()
    }

    #[test]
    fn graph_equals_all_pairs_construction() {
        let pois = random_city(500, 11);
        let road = DetourRoadModel::default();
        let radius = 0.6;
        let g = build_graph(&pois, radius, &road).unwrap();
        for (i, c) in pois.iter().enumerate().filter(|(_, p)| p.is_block()) {
            let mut near: Vec<(bool, f64, &str)> = pois
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| (!p.is_block(), haversine_km(c.location, p.location), p.id.as_str()))
                .filter(|t| t.1 <= radius)
                .collect();
            near.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()).then(a.2.cmp(b.2)));
            let expected: Vec<&str> = near.iter().map(|t| t.2).collect();
            match g.get(&c.id) {
                Some(set) => {
                    assert_eq!(set.neighbor_ids, expected);
                    set.validate(radius).unwrap();
                }
                None => {
                    assert!(expected.is_empty());
                    assert!(g.isolated.contains(&c.id));
                }
            }
        }
    }

    #[test]
    fn undirected_and_monotone_in_radius() {
        let pois = random_city(400, 5);
        let road = DetourRoadModel::default();
        let small = build_graph(&pois, 0.5, &road).unwrap();
        let large = build_graph(&pois, 1.0, &road).unwrap();
        assert!(large.mean_degree() >= small.mean_degree());
        for set in large.sets.values() {
            for id in &set.neighbor_ids {
                if let Some(other) = large.get(id) {
                    assert!(other.neighbor_ids.contains(&set.center_id));
                }
            }
        }
    }

    #[test]
    fn cache_round_trip_and_validation() {
        let pois = random_city(200, 1);
        let g = build_graph(&pois, 0.8, &DetourRoadModel::default()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_graph(f.path(), &g).unwrap();
        assert_eq!(read_graph(f.path()).unwrap(), g);

        let bad = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            bad.path(),
            "{\"format\":\"hedon-graph/1\",\"radius_km\":1.0,\"isolated\":[]}\n{\"center\":\"a\",\"neighbors\":[\"b\"],\"distances\":[[0.5],[0.4]]}\n",
        )
        .unwrap();
        assert!(matches!(read_graph(bad.path()), Err(Error::Parse { line: 2, .. })));
    }
}
