//! Comparison predictors: citywide average, unweighted and
//! inverse-distance-weighted neighbor averages, and linear regression.
//!
//! Every baseline sees the same training prices as the model and nothing else.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FacilityCategory, Graph, NeighborSet, PoiRecord};
use crate::error::{Error, Result};
use crate::exact::exact_sum;

/// Distance floor for inverse-distance weights, in km.
pub const MICRO_DISTANCE_FLOOR_KM: f64 = 0.01;
/// Ridge damping for the regression normal equations.
pub const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    CitywideAvg,
    MacroAvg,
    MicroAvg,
    LinearRegression,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::CitywideAvg,
        BaselineKind::MacroAvg,
        BaselineKind::MicroAvg,
        BaselineKind::LinearRegression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::CitywideAvg => "citywide_avg",
            BaselineKind::MacroAvg => "macro_avg",
            BaselineKind::MicroAvg => "micro_avg",
            BaselineKind::LinearRegression => "linear_regression",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown baseline `{s}`")))
    }
}

/// A predicted price and whether it came from the citywide fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub price: f64,
    pub fallback: bool,
}

pub fn fit_citywide(train_prices: &[f64]) -> Result<f64> {
    if train_prices.is_empty() {
        return Err(Error::validation("cannot average an empty set of prices"));
    }
    Ok(exact_sum(train_prices) / train_prices.len() as f64)
}

fn priced_neighbors<'a>(nbrs: Option<&'a NeighborSet>, known: &'a HashMap<String, f64>) -> impl Iterator<Item = (f64, f64)> + 'a {
    nbrs.into_iter().flat_map(move |n| {
        n.neighbor_ids
            .iter()
            .zip(n.euclidean())
            .filter_map(move |(id, &d)| known.get(id).map(|&h| (h, d)))
    })
}

/// Unweighted mean of the priced neighbors.
pub fn predict_macro_avg(nbrs: Option<&NeighborSet>, known: &HashMap<String, f64>, city_mean: f64) -> Prediction {
    let prices: Vec<f64> = priced_neighbors(nbrs, known).map(|(h, _)| h).collect();
    if prices.is_empty() {
        return Prediction {
            price: city_mean,
            fallback: true,
        };
    }
    Prediction {
        price: exact_sum(&prices) / prices.len() as f64,
        fallback: false,
    }
}

/// Mean of the priced neighbors weighted by `1 / max(d, 0.01 km)`.
pub fn predict_micro_avg(nbrs: Option<&NeighborSet>, known: &HashMap<String, f64>, city_mean: f64) -> Prediction {
    let (mut num, mut den) = (Vec::new(), Vec::new());
    for (h, d) in priced_neighbors(nbrs, known) {
        let w = 1.0 / d.max(MICRO_DISTANCE_FLOOR_KM);
        num.push(w * h);
        den.push(w);
    }
    if den.is_empty() {
        return Prediction {
            price: city_mean,
            fallback: true,
        };
    }
    Prediction {
        price: exact_sum(&num) / exact_sum(&den),
        fallback: false,
    }
}

/// Least squares on standardized features, `(Z^T Z + ridge I) b = Z^T y`,
/// with an unpenalized intercept. Weights are reported in the original feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], ridge: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n != targets.len() {
            return Err(Error::validation("regression needs one target per non-empty feature row"));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::validation("ragged feature rows"));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
        let scales: Vec<f64> = (0..p)
            .map(|j| {
                let sd = (x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let z = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - means[j]) / scales[j]);
        let y_mean = targets.iter().sum::<f64>() / n as f64;
        let y = DVector::from_iterator(n, targets.iter().map(|t| t - y_mean));

        let mut a = z.transpose() * &z;
        for j in 0..p {
            a[(j, j)] += ridge;
        }
        let b = z.transpose() * y;
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("normal equations over {p} features are not positive definite")))?;
        let beta = chol.solve(&b);
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite regression weights".into()));
        }
        let weights: Vec<f64> = (0..p).map(|j| beta[j] / scales[j]).collect();
        let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
        Ok(Self { weights, intercept })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Regression features of one block: attribute one-hots, per-category
/// facility counts, per-category mean euclidean distance (the radius when a
/// category is absent) and the mean priced-neighbor price (the citywide mean
/// when there is none).
pub fn block_features(
    block: &PoiRecord,
    nbrs: Option<&NeighborSet>,
    dataset: &Dataset,
    known: &HashMap<String, f64>,
    radius_km: f64,
    city_mean: f64,
) -> Result<Vec<f64>> {
    let width = dataset.layout.width();
    let n_cat = FacilityCategory::ALL.len();
    let mut f = vec![0.0; width + 2 * n_cat + 1];
    for s in dataset.encode(block)?.slots {
        f[s] = 1.0;
    }
    let mut dist_sum = vec![0.0; n_cat];
    if let Some(n) = nbrs {
        for (id, &d) in n.neighbor_ids.iter().zip(n.euclidean()) {
            if let Some(c) = dataset.get(id).and_then(|p| p.category) {
                f[width + c.index()] += 1.0;
                dist_sum[c.index()] += d;
            }
        }
    }
    for c in 0..n_cat {
        let count = f[width + c];
        f[width + n_cat + c] = if count > 0.0 { dist_sum[c] / count } else { radius_km };
    }
    f[width + 2 * n_cat] = predict_macro_avg(nbrs, known, city_mean).price;
    Ok(f)
}

pub fn feature_names(dataset: &Dataset) -> Vec<String> {
    let mut names: Vec<String> = (0..dataset.layout.width()).map(|s| dataset.layout.slot_label(s)).collect();
    names.extend(FacilityCategory::ALL.iter().map(|c| format!("count:{c}")));
    names.extend(FacilityCategory::ALL.iter().map(|c| format!("mean_km:{c}")));
    names.push("neighbor_mean_price".into());
    names
}

/// A fitted baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselinePredictor {
    CitywideAvg { mean: f64 },
    MacroAvg { city_mean: f64 },
    MicroAvg { city_mean: f64 },
    LinearRegression { city_mean: f64, radius_km: f64, model: LinearModel },
}

impl BaselinePredictor {
    /// Fits `kind` on the training blocks whose prices are in `known`.
    pub fn fit(kind: BaselineKind, dataset: &Dataset, graph: &Graph, known: &HashMap<String, f64>) -> Result<Self> {
        let mut ids: Vec<&String> = known.keys().collect();
        ids.sort();
        let prices: Vec<f64> = ids.iter().map(|id| known[*id]).collect();
        let city_mean = fit_citywide(&prices)?;
        Ok(match kind {
            BaselineKind::CitywideAvg => Self::CitywideAvg { mean: city_mean },
            BaselineKind::MacroAvg => Self::MacroAvg { city_mean },
            BaselineKind::MicroAvg => Self::MicroAvg { city_mean },
            BaselineKind::LinearRegression => {
                let rows = ids
                    .iter()
                    .map(|id| {
                        let block = dataset.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
                        block_features(block, graph.get(id), dataset, known, graph.radius_km, city_mean)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::LinearRegression {
                    city_mean,
                    radius_km: graph.radius_km,
                    model: LinearModel::fit(&rows, &prices, RIDGE)?,
                }
            }
        })
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Self::CitywideAvg { .. } => BaselineKind::CitywideAvg,
            Self::MacroAvg { .. } => BaselineKind::MacroAvg,
            Self::MicroAvg { .. } => BaselineKind::MicroAvg,
            Self::LinearRegression { .. } => BaselineKind::LinearRegression,
        }
    }

    pub fn predict(
        &self,
        block: &PoiRecord,
        nbrs: Option<&NeighborSet>,
        dataset: &Dataset,
        known: &HashMap<String, f64>,
    ) -> Result<Prediction> {
        Ok(match self {
            Self::CitywideAvg { mean } => Prediction {
                price: *mean,
                fallback: false,
            },
            Self::MacroAvg { city_mean } => predict_macro_avg(nbrs, known, *city_mean),
            Self::MicroAvg { city_mean } => predict_micro_avg(nbrs, known, *city_mean),
            Self::LinearRegression {
                city_mean,
                radius_km,
                model,
            } => {
                let f = block_features(block, nbrs, dataset, known, *radius_km, *city_mean)?;
                Prediction {
                    price: model.predict(&f),
                    fallback: false,
                }
            }
        })
    }
}
