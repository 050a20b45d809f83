//! The pricing model.
//!
//! A residential block's price is predicted from the values `w` of its `k`
//! neighbors (other residential blocks followed by public facilities):
//!
//! ```text
//! F = softmax(phi^T D)              D: 2 x k distances (euclidean, trajectory)
//! S = sigmoid(theta^T x)            x: one-hot attributes of the block
//! h_hat = S * (w . F)
//! ```
//!
//! and trained on the squared error `(h - h_hat)^2`. Neighbor values are
//! either fixed (blocks with a known price) or learnable entries of the
//! price table (facilities and blocks whose price is unknown).

mod shard;
mod snapshot;

use std::collections::{BTreeMap, HashMap};

use crate::dataset::{AttributeLayout, AttributeVector, NeighborSet};
use crate::error::{Error, Result};

pub use shard::{GradientShard, VarKey};
pub use snapshot::{load_params, save_params, SnapshotMeta, SNAPSHOT_VERSION};

/// Number of distance types (rows of D).
pub const DISTANCE_TYPES: usize = 2;

/// Learnable prices, indexed in sorted-id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceTable {
    ids: Vec<String>,
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl PriceTable {
    pub fn from_map(entries: BTreeMap<String, f64>) -> Self {
        let (ids, values): (Vec<String>, Vec<f64>) = entries.into_iter().unzip();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self { ids, values, index }
    }

    /// Every id at the same initial value.
    pub fn uniform<I: IntoIterator<Item = String>>(ids: I, value: f64) -> Self {
        Self::from_map(ids.into_iter().map(|id| (id, value)).collect())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.index_of(id).map(|i| self.values[i])
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.ids.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }
}

/// All learnable state: attribute weights, distance weights and prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layout: AttributeLayout,
    pub theta: Vec<f64>,
    pub phi: [f64; DISTANCE_TYPES],
    pub prices: PriceTable,
    pub meta: SnapshotMeta,
}

impl ModelParams {
    /// Symmetric start: zero weights (S = 0.5, uniform F) and every price at
    /// `initial_price`.
    pub fn initialize<I: IntoIterator<Item = String>>(layout: AttributeLayout, price_ids: I, initial_price: f64) -> Self {
        let width = layout.width();
        Self {
            layout,
            theta: vec![0.0; width],
            phi: [0.0; DISTANCE_TYPES],
            prices: PriceTable::uniform(price_ids, initial_price),
            meta: SnapshotMeta::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.phi).chain(self.prices.values()).all(|v| v.is_finite())
    }

    pub fn get(&self, key: VarKey) -> f64 {
        match key {
            VarKey::Theta(i) => self.theta[i],
            VarKey::Phi(i) => self.phi[i],
            VarKey::Price(i) => self.prices.value(i),
        }
    }

    pub fn set(&mut self, key: VarKey, v: f64) {
        match key {
            VarKey::Theta(i) => self.theta[i] = v,
            VarKey::Phi(i) => self.phi[i] = v,
            VarKey::Price(i) => self.prices.values_mut()[i] = v,
        }
    }
}

/// Where a neighbor's value comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborValue {
    /// Known price, held fixed.
    Fixed(f64),
    /// Index into the price table.
    Learnable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborTerm {
    pub value: NeighborValue,
    pub distances: [f64; DISTANCE_TYPES],
}

/// A residential block resolved against a parameter set: the unit of work
/// for prediction and gradient computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub target: Option<f64>,
    pub slots: Vec<usize>,
    pub neighbors: Vec<NeighborTerm>,
}

/// Neighbor values in column order plus which of them are learnable.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledValues {
    pub w: Vec<f64>,
    pub learnable: Vec<bool>,
}

fn resolve(id: &str, params: &ModelParams, known: &HashMap<String, f64>) -> Result<NeighborValue> {
    if let Some(&h) = known.get(id) {
        Ok(NeighborValue::Fixed(h))
    } else if let Some(i) = params.prices.index_of(id) {
        Ok(NeighborValue::Learnable(i))
    } else {
        Err(Error::UnknownId(id.to_string()))
    }
}

/// Neighbor value vector: known prices are fixed, everything else is read
/// from the price table.
pub fn assemble_w(nbrs: &NeighborSet, params: &ModelParams, known_prices: &HashMap<String, f64>) -> Result<AssembledValues> {
    let mut out = AssembledValues {
        w: Vec::with_capacity(nbrs.len()),
        learnable: Vec::with_capacity(nbrs.len()),
    };
    for id in &nbrs.neighbor_ids {
        match resolve(id, params, known_prices)? {
            NeighborValue::Fixed(h) => {
                out.w.push(h);
                out.learnable.push(false);
            }
            NeighborValue::Learnable(i) => {
                out.w.push(params.prices.value(i));
                out.learnable.push(true);
            }
        }
    }
    Ok(out)
}

impl Instance {
    pub fn compile(
        x: &AttributeVector,
        nbrs: &NeighborSet,
        params: &ModelParams,
        known_prices: &HashMap<String, f64>,
        target: Option<f64>,
    ) -> Result<Self> {
        if nbrs.is_empty() {
            return Err(Error::validation(format!("block `{}` has no neighbors", nbrs.center_id)));
        }
        check_layout(x, &params.theta)?;
        let neighbors = nbrs
            .neighbor_ids
            .iter()
            .enumerate()
            .map(|(j, id)| {
                Ok(NeighborTerm {
                    value: resolve(id, params, known_prices)?,
                    distances: [nbrs.distances[0][j], nbrs.distances[1][j]],
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            id: nbrs.center_id.clone(),
            target,
            slots: x.slots.clone(),
            neighbors,
        })
    }

    fn value(&self, j: usize, params: &ModelParams) -> f64 {
        match self.neighbors[j].value {
            NeighborValue::Fixed(h) => h,
            NeighborValue::Learnable(i) => params.prices.value(i),
        }
    }
}

fn check_layout(x: &AttributeVector, theta: &[f64]) -> Result<()> {
    match x.slots.iter().find(|&&s| s >= theta.len()) {
        Some(s) => Err(Error::validation(format!(
            "attribute slot {s} outside theta of width {}",
            theta.len()
        ))),
        None => Ok(()),
    }
}

/// Softmax over the column scores `phi^T D[:, j]`, max-shifted for stability.
/// `rows` holds the `t` distance rows, each of length `k >= 1`.
pub fn distance_weights(rows: &[&[f64]], phi: &[f64]) -> Vec<f64> {
    assert_eq!(rows.len(), phi.len(), "one weight per distance row");
    let k = rows.first().map_or(0, |r| r.len());
    let scores: Vec<f64> = (0..k).map(|j| rows.iter().zip(phi).map(|(r, p)| p * r[j]).sum()).collect();
    softmax(&scores)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut f: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = f.iter().sum();
    f.iter_mut().for_each(|v| *v /= z);
    f
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `S = sigmoid(theta^T x)` for a one-hot attribute vector.
pub fn attribute_scale(x: &AttributeVector, theta: &[f64]) -> Result<f64> {
    check_layout(x, theta)?;
    Ok(sigmoid(x.slots.iter().map(|&s| theta[s]).sum()))
}

/// Intermediates of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub w: Vec<f64>,
    pub f: Vec<f64>,
    pub s: f64,
    /// `w . F`
    pub pooled: f64,
    pub prediction: f64,
}

pub fn forward(inst: &Instance, params: &ModelParams) -> ForwardTrace {
    let k = inst.neighbors.len();
    let w: Vec<f64> = (0..k).map(|j| inst.value(j, params)).collect();
    let scores: Vec<f64> = inst
        .neighbors
        .iter()
        .map(|n| n.distances.iter().zip(&params.phi).map(|(d, p)| d * p).sum())
        .collect();
    let f = softmax(&scores);
    let s = sigmoid(inst.slots.iter().map(|&i| params.theta[i]).sum());
    let pooled = w.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
    ForwardTrace {
        w,
        f,
        s,
        pooled,
        prediction: s * pooled,
    }
}

/// Adds this instance's squared-error gradient to `shard` and returns its loss.
pub fn accumulate_gradient(inst: &Instance, params: &ModelParams, shard: &mut GradientShard) -> Result<f64> {
    let h = inst
        .target
        .ok_or_else(|| Error::validation(format!("block `{}` has no known price", inst.id)))?;
    let tr = forward(inst, params);
    let resid = tr.prediction - h;
    let loss = resid * resid;
    let e = 2.0 * resid;

    let g_theta = e * tr.s * (1.0 - tr.s) * tr.pooled;
    let mut d_mean = [0.0; DISTANCE_TYPES];
    for (n, fj) in inst.neighbors.iter().zip(&tr.f) {
        for r in 0..DISTANCE_TYPES {
            d_mean[r] += fj * n.distances[r];
        }
    }
    let mut g_phi = [0.0; DISTANCE_TYPES];
    for (j, n) in inst.neighbors.iter().enumerate() {
        let wf = tr.w[j] * tr.f[j];
        for r in 0..DISTANCE_TYPES {
            g_phi[r] += wf * (n.distances[r] - d_mean[r]);
        }
    }
    let es = e * tr.s;

    if !(loss.is_finite() && g_theta.is_finite() && g_phi.iter().all(|g| g.is_finite())) {
        return Err(Error::NonFinite(inst.id.clone()));
    }
    for &slot in &inst.slots {
        shard.add(VarKey::Theta(slot), g_theta);
    }
    for (r, g) in g_phi.iter().enumerate() {
        shard.add(VarKey::Phi(r), es * g);
    }
    for (n, fj) in inst.neighbors.iter().zip(&tr.f) {
        if let NeighborValue::Learnable(i) = n.value {
            shard.add(VarKey::Price(i), es * fj);
        }
    }
    shard.add_loss(loss);
    Ok(loss)
}

/// Adds the Gauss-Newton diagonal `2 (d h_hat / d v)^2` of this instance to
/// `shard` for every variable it touches.
pub fn accumulate_curvature(inst: &Instance, params: &ModelParams, shard: &mut GradientShard) {
    let tr = forward(inst, params);
    let d_theta = tr.s * (1.0 - tr.s) * tr.pooled;
    let mut d_mean = [0.0; DISTANCE_TYPES];
    for (n, fj) in inst.neighbors.iter().zip(&tr.f) {
        for r in 0..DISTANCE_TYPES {
            d_mean[r] += fj * n.distances[r];
        }
    }
    let mut d_phi = [0.0; DISTANCE_TYPES];
    for (j, n) in inst.neighbors.iter().enumerate() {
        for r in 0..DISTANCE_TYPES {
            d_phi[r] += tr.w[j] * tr.f[j] * (n.distances[r] - d_mean[r]);
        }
    }
    for &slot in &inst.slots {
        shard.add(VarKey::Theta(slot), 2.0 * d_theta * d_theta);
    }
    for (r, d) in d_phi.iter().enumerate() {
        let d = tr.s * d;
        shard.add(VarKey::Phi(r), 2.0 * d * d);
    }
    for (n, fj) in inst.neighbors.iter().zip(&tr.f) {
        if let NeighborValue::Learnable(i) = n.value {
            let d = tr.s * fj;
            shard.add(VarKey::Price(i), 2.0 * d * d);
        }
    }
    shard.add_loss(0.0);
}

/// Squared-error loss of one instance and its gradient over every variable
/// it touches.
pub fn instance_loss_and_grad(inst: &Instance, params: &ModelParams) -> Result<(f64, GradientShard)> {
    let mut shard = GradientShard::new(params.theta.len(), params.prices.len());
    let loss = accumulate_gradient(inst, params, &mut shard)?;
    Ok((loss, shard))
}

/// Loss only; used by finite-difference checks and line probes.
pub fn instance_loss(inst: &Instance, params: &ModelParams) -> Result<f64> {
    let h = inst
        .target
        .ok_or_else(|| Error::validation(format!("block `{}` has no known price", inst.id)))?;
    let r = forward(inst, params).prediction - h;
    Ok(r * r)
}
