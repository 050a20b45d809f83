//! Regression metrics and interpretability tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{FacilityCategory, PoiRecord};
use crate::error::{Error, Result};
use crate::model::ModelParams;

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} truths vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::validation("metrics need at least one value"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    Ok(truth.iter().zip(pred).map(|(h, p)| (h - p).abs()).sum::<f64>() / truth.len() as f64)
}

/// Root of the mean squared error.
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mse = truth.iter().zip(pred).map(|(h, p)| (h - p) * (h - p)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt())
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|h| (h - mean) * (h - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::validation("R^2 undefined for a constant truth vector"));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(h, p)| (h - p) * (h - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::validation("correlation undefined for a constant vector"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pearson(&ranks(a), &ranks(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Test instances scored.
    pub m: usize,
    /// Test blocks that had no neighbor in range and fell back to the citywide mean.
    #[serde(default)]
    pub fallbacks: usize,
}

impl EvalReport {
    pub fn compute(method: impl Into<String>, truth: &[f64], pred: &[f64]) -> Result<Self> {
        Ok(Self {
            method: method.into(),
            mae: mae(truth, pred)?,
            rmse: rmse(truth, pred)?,
            r2: r2(truth, pred)?,
            m: truth.len(),
            fallbacks: 0,
        })
    }
}

/// Rounded magnitude with comma thousands separators; the sign is dropped.
pub fn group_thousands(v: f64) -> String {
    let n = v.round().abs() as u64;
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Plain-text table with one row per method: MAE, RMSE, R².
pub fn render_eval_table(reports: &[EvalReport], unit: &str) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>20}  {:>20}  {:>8}  {:>6}", "Method", "MAE", "RMSE", "R2", "m");
    let _ = writeln!(out, "{}", "-".repeat(width + 62));
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>20}  {:>20}  {:>8.4}  {:>6}",
            r.method,
            format!("{} {unit}", group_thousands(r.mae)),
            format!("{} {unit}", group_thousands(r.rmse)),
            r.r2,
            r.m
        );
    }
    out
}

/// Normalized attribute importance: per-block L1 mass of theta, scaled to sum
/// to one. All-zero theta gives a uniform distribution.
pub fn attribute_preferences(params: &ModelParams) -> Vec<(String, f64)> {
    let ranges = params.layout.ranges();
    let mass: Vec<f64> = ranges
        .iter()
        .map(|r| params.theta[r.clone()].iter().map(|t| t.abs()).sum())
        .collect();
    let total: f64 = mass.iter().sum();
    let n = mass.len() as f64;
    params
        .layout
        .blocks
        .iter()
        .zip(mass)
        .map(|(b, m)| (b.name.clone(), if total > 0.0 { m / total } else { 1.0 / n }))
        .collect()
}

/// L1-normalized `|phi|`: (euclidean, trajectory). Zero phi gives (0.5, 0.5).
pub fn distance_preferences(phi: &[f64; 2]) -> [f64; 2] {
    let total = phi[0].abs() + phi[1].abs();
    if total == 0.0 {
        [0.5, 0.5]
    } else {
        [phi[0].abs() / total, phi[1].abs() / total]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPremium {
    pub category: FacilityCategory,
    pub count: usize,
    pub mean_price: f64,
    /// Mean learned price minus the citywide mean.
    pub premium: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFacility {
    pub id: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumTable {
    pub city_mean: f64,
    pub categories: Vec<CategoryPremium>,
    /// Facilities of each category, most valuable first.
    pub rankings: BTreeMap<FacilityCategory, Vec<RankedFacility>>,
}

pub fn facility_premiums(params: &ModelParams, pois: &[PoiRecord], city_mean: f64) -> PremiumTable {
    let mut rankings: BTreeMap<FacilityCategory, Vec<RankedFacility>> = BTreeMap::new();
    for p in pois {
        if let (Some(cat), Some(price)) = (p.category, params.prices.get(&p.id)) {
            rankings.entry(cat).or_default().push(RankedFacility { id: p.id.clone(), price });
        }
    }
    for list in rankings.values_mut() {
        list.sort_by(|a, b| b.price.total_cmp(&a.price).then_with(|| a.id.cmp(&b.id)));
    }
    let categories = rankings
        .iter()
        .map(|(&category, list)| {
            let mean_price = list.iter().map(|f| f.price).sum::<f64>() / list.len() as f64;
            CategoryPremium {
                category,
                count: list.len(),
                mean_price,
                premium: mean_price - city_mean,
            }
        })
        .collect();
    PremiumTable {
        city_mean,
        categories,
        rankings,
    }
}

/// `(66,125)+6,082 CNY/m²` style: base in parentheses, signed offset.
pub fn format_premium(base: f64, offset: f64, unit: &str) -> String {
    let sign = if offset.round() < 0.0 { '-' } else { '+' };
    format!("({}){sign}{} {unit}", group_thousands(base), group_thousands(offset))
}

pub fn render_premium_table(table: &PremiumTable, unit: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16}  {:>7}  {:>34}", "Facility", "Count", "Average virtual price");
    let _ = writeln!(out, "{}", "-".repeat(61));
    for c in &table.categories {
        let _ = writeln!(
            out,
            "{:<16}  {:>7}  {:>34}",
            c.category.as_str(),
            c.count,
            format_premium(table.city_mean, c.premium, unit)
        );
    }
    out
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}
