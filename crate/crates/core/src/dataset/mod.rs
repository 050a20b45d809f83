//! POI records, attribute encoding and line-delimited JSON ingestion.

mod graph;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

pub use graph::{build_graph, read_graph, write_graph, Graph, NeighborSet, Neighborhoods};
pub use split::{split_dataset, DatasetSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiKind {
    ResidentialBlock,
    Facility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityCategory {
    Governmental,
    Educational,
    Financial,
    Recreational,
    Medical,
    Commercial,
    Transportation,
    Scenic,
    Wasteyard,
    Cemetery,
}

impl FacilityCategory {
    pub const ALL: [FacilityCategory; 10] = [
        FacilityCategory::Governmental,
        FacilityCategory::Educational,
        FacilityCategory::Financial,
        FacilityCategory::Recreational,
        FacilityCategory::Medical,
        FacilityCategory::Commercial,
        FacilityCategory::Transportation,
        FacilityCategory::Scenic,
        FacilityCategory::Wasteyard,
        FacilityCategory::Cemetery,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FacilityCategory::Governmental => "governmental",
            FacilityCategory::Educational => "educational",
            FacilityCategory::Financial => "financial",
            FacilityCategory::Recreational => "recreational",
            FacilityCategory::Medical => "medical",
            FacilityCategory::Commercial => "commercial",
            FacilityCategory::Transportation => "transportation",
            FacilityCategory::Scenic => "scenic",
            FacilityCategory::Wasteyard => "wasteyard",
            FacilityCategory::Cemetery => "cemetery",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for FacilityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One point of interest: a residential block or a public facility.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub id: String,
    pub kind: PoiKind,
    pub category: Option<FacilityCategory>,
    pub location: GeoPoint,
    pub known_price: Option<f64>,
    pub attributes: BTreeMap<String, String>,
}

impl PoiRecord {
    pub fn is_block(&self) -> bool {
        self.kind == PoiKind::ResidentialBlock
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("empty id"));
        }
        if let Some(p) = self.known_price {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::validation(format!(
                    "record `{}`: field `price` must be finite and > 0, got {p}",
                    self.id
                )));
            }
        }
        match self.kind {
            PoiKind::Facility => {
                if self.category.is_none() {
                    return Err(Error::validation(format!("facility `{}`: missing field `category`", self.id)));
                }
                if !self.attributes.is_empty() {
                    return Err(Error::validation(format!("facility `{}`: field `attributes` not allowed", self.id)));
                }
            }
            PoiKind::ResidentialBlock => {
                if self.category.is_some() {
                    return Err(Error::validation(format!(
                        "residential block `{}`: field `category` not allowed",
                        self.id
                    )));
                }
                if self.attributes.is_empty() {
                    return Err(Error::validation(format!(
                        "residential block `{}`: missing field `attributes`",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Wire form of a POI line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoiLine {
    id: String,
    kind: PoiKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<FacilityCategory>,
    lat: f64,
    lon: f64,
    price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<BTreeMap<String, String>>,
}

impl TryFrom<PoiLine> for PoiRecord {
    type Error = Error;
    fn try_from(l: PoiLine) -> Result<Self> {
        let location = GeoPoint::new(l.lat, l.lon)
            .map_err(|e| Error::validation(format!("record `{}`: {e}", l.id)))?;
        let rec = PoiRecord {
            id: l.id,
            kind: l.kind,
            category: l.category,
            location,
            known_price: l.price,
            attributes: l.attributes.unwrap_or_default(),
        };
        rec.validate()?;
        Ok(rec)
    }
}

impl From<&PoiRecord> for PoiLine {
    fn from(r: &PoiRecord) -> Self {
        PoiLine {
            id: r.id.clone(),
            kind: r.kind,
            category: r.category,
            lat: r.location.lat(),
            lon: r.location.lon(),
            price: r.known_price,
            attributes: r.is_block().then(|| r.attributes.clone()),
        }
    }
}

pub fn parse_poi_line(line: &str) -> std::result::Result<PoiRecord, String> {
    let raw: PoiLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    PoiRecord::try_from(raw).map_err(|e| e.to_string())
}

pub fn load_pois(path: impl AsRef<Path>) -> Result<Vec<PoiRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_poi_line(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_pois(path: impl AsRef<Path>, pois: &[PoiRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pois {
        let line = serde_json::to_string(&PoiLine::from(p)).expect("POI serialization");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Attribute blocks listed first, in this order, when present.
pub const CANONICAL_ATTRIBUTES: [&str; 5] = ["type", "district", "developer", "age", "other"];

/// Reserved per-block slot for values not seen when the layout was built.
pub const UNSEEN: &str = "<unseen>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeBlock {
    pub name: String,
    /// Known values; the block's last slot (after these) is the unseen slot.
    pub values: Vec<String>,
}

impl AttributeBlock {
    pub fn width(&self) -> usize {
        self.values.len() + 1
    }
}

/// One-hot layout: concatenated blocks, each with its vocabulary plus an
/// unseen slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttributeLayout {
    pub blocks: Vec<AttributeBlock>,
}

/// Encoded attributes: the active slot of each block, in block order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeVector {
    pub slots: Vec<usize>,
}

impl AttributeLayout {
    pub fn infer<'a>(pois: impl IntoIterator<Item = &'a PoiRecord>) -> Result<Self> {
        let mut vocab: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut keyset: Option<(String, Vec<&str>)> = None;
        for p in pois.into_iter().filter(|p| p.is_block()) {
            let keys: Vec<&str> = p.attributes.keys().map(String::as_str).collect();
            match &keyset {
                None => keyset = Some((p.id.clone(), keys)),
                Some((first, k)) if *k != keys => {
                    return Err(Error::validation(format!(
                        "residential block `{}` has attribute keys {keys:?}, but `{first}` has {k:?}",
                        p.id
                    )))
                }
                _ => {}
            }
            for (k, v) in &p.attributes {
                vocab.entry(k).or_default().insert(v);
            }
        }
        let mut names: Vec<&str> = CANONICAL_ATTRIBUTES
            .iter()
            .copied()
            .filter(|n| vocab.contains_key(n))
            .collect();
        names.extend(vocab.keys().copied().filter(|k| !CANONICAL_ATTRIBUTES.contains(k)));
        let blocks = names
            .into_iter()
            .map(|n| AttributeBlock {
                name: n.to_string(),
                values: vocab[n].iter().map(|v| v.to_string()).collect(),
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(AttributeBlock::width).sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(AttributeBlock::width).sum()
    }

    /// Slot range of each block.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn encode(&self, attrs: &BTreeMap<String, String>) -> Result<AttributeVector> {
        if attrs.len() != self.blocks.len() {
            let extra: Vec<&String> = attrs
                .keys()
                .filter(|k| !self.blocks.iter().any(|b| &b.name == *k))
                .collect();
            if !extra.is_empty() {
                return Err(Error::validation(format!("attributes {extra:?} not in layout")));
            }
        }
        let mut slots = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for b in &self.blocks {
            let v = attrs
                .get(&b.name)
                .ok_or_else(|| Error::validation(format!("missing attribute `{}`", b.name)))?;
            let local = b.values.binary_search(v).unwrap_or(b.values.len());
            slots.push(offset + local);
            offset += b.width();
        }
        Ok(AttributeVector { slots })
    }

    /// Human-readable label of a slot, `block=value`.
    pub fn slot_label(&self, slot: usize) -> String {
        let mut start = 0;
        for b in &self.blocks {
            if slot < start + b.width() {
                let local = slot - start;
                let v = b.values.get(local).map(String::as_str).unwrap_or(UNSEEN);
                return format!("{}={}", b.name, v);
            }
            start += b.width();
        }
        format!("slot{slot}")
    }
}

/// Validated POI collection with an id lookup and the inferred attribute layout.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pois: Vec<PoiRecord>,
    pub layout: AttributeLayout,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(pois: Vec<PoiRecord>) -> Result<Self> {
        let layout = AttributeLayout::infer(&pois)?;
        Self::with_layout(pois, layout)
    }

    pub fn with_layout(pois: Vec<PoiRecord>, layout: AttributeLayout) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(pois.len());
        for (i, p) in pois.iter().enumerate() {
            p.validate()?;
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self { pois, layout, by_id })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(load_pois(path)?)
    }

    pub fn get(&self, id: &str) -> Option<&PoiRecord> {
        self.by_id.get(id).map(|&i| &self.pois[i])
    }

    /// Sorted ids of residential blocks carrying a known price.
    pub fn priced_block_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .pois
            .iter()
            .filter(|p| p.is_block() && p.known_price.is_some())
            .map(|p| p.id.clone())
            .collect();
        ids.sort();
        ids
    }

    pub fn known_prices(&self) -> HashMap<String, f64> {
        self.pois
            .iter()
            .filter_map(|p| p.known_price.map(|h| (p.id.clone(), h)))
            .collect()
    }

    pub fn encode(&self, block: &PoiRecord) -> Result<AttributeVector> {
        self.layout.encode(&block.attributes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    const FACILITY: &str = r#"{"id":"f1","kind":"facility","category":"medical","lat":39.9,"lon":116.4,"price":null}"#;

    #[test]
    fn empty_file_loads_nothing() {
        let f = write_tmp(&[]);
        assert!(load_pois(f.path()).unwrap().is_empty());
    }

    #[test]
    fn single_facility() {
        let f = write_tmp(&[FACILITY]);
        let pois = load_pois(f.path()).unwrap();
        assert_eq!(pois.len(), 1);
        assert_eq!(pois[0].category, Some(FacilityCategory::Medical));
    }

    #[test]
    fn negative_price_names_record() {
        let f = write_tmp(&[
            FACILITY,
            r#"{"id":"b7","kind":"residential_block","lat":39.9,"lon":116.4,"price":-3,"attributes":{"type":"house"}}"#,
        ]);
        let err = load_pois(f.path()).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
        assert!(err.contains("b7"), "{err}");
    }

    #[test]
    fn schema_and_duplicate_errors() {
        let f = write_tmp(&[FACILITY, FACILITY]);
        assert!(matches!(load_pois(f.path()), Err(Error::DuplicateId(id)) if id == "f1"));

        let f = write_tmp(&[r#"{"id":"f1","kind":"facility","lat":1,"lon":1,"price":null}"#]);
        assert!(load_pois(f.path()).unwrap_err().to_string().contains("category"));

        let f = write_tmp(&[r#"{"id":"f1","kind":"facility","category":"medical","lat":1,"lon":1,"price":null,"extra":1}"#]);
        assert!(load_pois(f.path()).unwrap_err().to_string().contains("extra"));

        let f = write_tmp(&["{not json"]);
        assert!(matches!(load_pois(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_load() {
        let f = write_tmp(&[
            FACILITY,
            r#"{"id":"b1","kind":"residential_block","lat":39.91,"lon":116.41,"price":52000.5,"attributes":{"district":"hd","type":"apartment"}}"#,
        ]);
        let pois = load_pois(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_pois(out.path(), &pois).unwrap();
        assert_eq!(load_pois(out.path()).unwrap(), pois);
    }

    fn block(id: &str, attrs: &[(&str, &str)]) -> PoiRecord {
        PoiRecord {
            id: id.into(),
            kind: PoiKind::ResidentialBlock,
            category: None,
            location: GeoPoint::new(0.0, 0.0).unwrap(),
            known_price: Some(1.0),
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn layout_orders_canonical_blocks_and_reserves_unseen() {
        let pois = vec![
            block("a", &[("zoning", "r1"), ("type", "house"), ("district", "x")]),
            block("b", &[("zoning", "r2"), ("type", "apartment"), ("district", "x")]),
        ];
        let layout = AttributeLayout::infer(&pois).unwrap();
        let names: Vec<&str> = layout.blocks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["type", "district", "zoning"]);
        assert_eq!(layout.width(), 3 + 2 + 3);
        let x = layout.encode(&pois[0].attributes).unwrap();
        assert_eq!(x.slots, vec![1, 3, 5]);
        let mut novel = pois[1].attributes.clone();
        novel.insert("district".into(), "brand-new".into());
        assert_eq!(layout.encode(&novel).unwrap().slots, vec![0, 4, 6]);
        assert_eq!(layout.slot_label(4), format!("district={UNSEEN}"));
    }

    #[test]
    fn inconsistent_attribute_keys_rejected() {
        let pois = vec![block("a", &[("type", "house")]), block("b", &[("district", "x")])];
        assert!(AttributeLayout::infer(&pois).is_err());
    }
}
