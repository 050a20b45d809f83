//! Versioned JSON snapshot of a parameter set.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{ModelParams, PriceTable, DISTANCE_TYPES};
use crate::dataset::AttributeLayout;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Provenance carried alongside the parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detour_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fingerprint of the train/validation/test partition used in training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaDoc {
    layout: AttributeLayout,
    values: Vec<f64>,
}

struct PricesRef<'a>(&'a PriceTable);

impl Serialize for PricesRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (id, v) in self.0.iter() {
            m.serialize_entry(id, &v)?;
        }
        m.end()
    }
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    version: u32,
    theta: ThetaDoc,
    phi: [f64; DISTANCE_TYPES],
    prices: PricesRef<'a>,
    meta: &'a SnapshotMeta,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotIn {
    version: u32,
    theta: ThetaDoc,
    phi: [f64; DISTANCE_TYPES],
    prices: BTreeMap<String, f64>,
    meta: SnapshotMeta,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

pub fn to_json(params: &ModelParams) -> String {
    let doc = SnapshotOut {
        version: SNAPSHOT_VERSION,
        theta: ThetaDoc {
            layout: params.layout.clone(),
            values: params.theta.clone(),
        },
        phi: params.phi,
        prices: PricesRef(&params.prices),
        meta: &params.meta,
    };
    serde_json::to_string(&doc).expect("snapshot serialization")
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let doc: SnapshotIn = match serde_json::from_str(text) {
        Ok(d) => d,
        Err(e) => {
            if let Ok(VersionProbe { version }) = serde_json::from_str(text) {
                if version != SNAPSHOT_VERSION {
                    return Err(Error::VersionMismatch {
                        expected: SNAPSHOT_VERSION,
                        found: version,
                    });
                }
            }
            return Err(Error::Corrupt(e.to_string()));
        }
    };
    if doc.version != SNAPSHOT_VERSION {
        return Err(Error::VersionMismatch {
            expected: SNAPSHOT_VERSION,
            found: doc.version,
        });
    }
    if doc.theta.values.len() != doc.theta.layout.width() {
        return Err(Error::Corrupt(format!(
            "theta has {} values, layout needs {}",
            doc.theta.values.len(),
            doc.theta.layout.width()
        )));
    }
    let params = ModelParams {
        layout: doc.theta.layout,
        theta: doc.theta.values,
        phi: doc.phi,
        prices: PriceTable::from_map(doc.prices),
        meta: doc.meta,
    };
    if !params.is_finite() {
        return Err(Error::Corrupt("non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_params(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_json(params).as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(file), &mut text).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
