use crate::exact::ExactSum;

use super::DISTANCE_TYPES;

/// Identifies one learnable scalar. The derived order (theta slots, then
/// phi, then prices by table index) is the canonical reduction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKey {
    Theta(usize),
    Phi(usize),
    Price(usize),
}

/// Keyed gradient sums for a set of instances, plus their summed loss.
///
/// Accumulators are exact, so two shards covering the same instances in any
/// grouping produce bit-identical values.
#[derive(Debug, Clone)]
pub struct GradientShard {
    theta: Vec<ExactSum>,
    theta_touched: Vec<bool>,
    phi: [ExactSum; DISTANCE_TYPES],
    prices: Vec<ExactSum>,
    price_touched: Vec<bool>,
    loss: ExactSum,
    instances: usize,
}

impl GradientShard {
    pub fn new(theta_len: usize, price_len: usize) -> Self {
        Self {
            theta: vec![ExactSum::new(); theta_len],
            theta_touched: vec![false; theta_len],
            phi: Default::default(),
            prices: vec![ExactSum::new(); price_len],
            price_touched: vec![false; price_len],
            loss: ExactSum::new(),
            instances: 0,
        }
    }

    pub fn add(&mut self, key: VarKey, g: f64) {
        match key {
            VarKey::Theta(i) => {
                self.theta[i].add(g);
                self.theta_touched[i] = true;
            }
            VarKey::Phi(r) => self.phi[r].add(g),
            VarKey::Price(i) => {
                self.prices[i].add(g);
                self.price_touched[i] = true;
            }
        }
    }

    pub(crate) fn add_loss(&mut self, loss: f64) {
        self.loss.add(loss);
        self.instances += 1;
    }

    pub fn loss(&self) -> f64 {
        self.loss.value()
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn theta_len(&self) -> usize {
        self.theta.len()
    }

    pub fn price_len(&self) -> usize {
        self.prices.len()
    }

    /// Gradient of a touched variable; `None` if no instance referenced it.
    pub fn get(&self, key: VarKey) -> Option<f64> {
        match key {
            VarKey::Theta(i) => self.theta_touched[i].then(|| self.theta[i].value()),
            VarKey::Phi(r) => (self.instances > 0).then(|| self.phi[r].value()),
            VarKey::Price(i) => self.price_touched[i].then(|| self.prices[i].value()),
        }
    }

    /// Touched variables and their gradients, in canonical key order.
    pub fn iter(&self) -> impl Iterator<Item = (VarKey, f64)> + '_ {
        let theta = (0..self.theta.len())
            .filter(|&i| self.theta_touched[i])
            .map(|i| (VarKey::Theta(i), self.theta[i].value()));
        let phi = (0..DISTANCE_TYPES)
            .filter(|_| self.instances > 0)
            .map(|r| (VarKey::Phi(r), self.phi[r].value()));
        let prices = (0..self.prices.len())
            .filter(|&i| self.price_touched[i])
            .map(|i| (VarKey::Price(i), self.prices[i].value()));
        theta.chain(phi).chain(prices)
    }

    /// Folds `other` into `self` variable by variable.
    pub fn merge(&mut self, other: &GradientShard) {
        assert_eq!(self.theta.len(), other.theta.len(), "theta layouts differ");
        assert_eq!(self.prices.len(), other.prices.len(), "price tables differ");
        for i in 0..self.theta.len() {
            if other.theta_touched[i] {
                self.theta[i].merge(&other.theta[i]);
                self.theta_touched[i] = true;
            }
        }
        for r in 0..DISTANCE_TYPES {
            self.phi[r].merge(&other.phi[r]);
        }
        for i in 0..self.prices.len() {
            if other.price_touched[i] {
                self.prices[i].merge(&other.prices[i]);
                self.price_touched[i] = true;
            }
        }
        self.loss.merge(&other.loss);
        self.instances += other.instances;
    }

    /// Euclidean norms of the theta, phi and price gradient groups.
    pub fn group_norms(&self) -> [f64; 3] {
        let mut sq = [0.0; 3];
        for (k, g) in self.iter() {
            let slot = match k {
                VarKey::Theta(_) => 0,
                VarKey::Phi(_) => 1,
                VarKey::Price(_) => 2,
            };
            sq[slot] += g * g;
        }
        sq.map(f64::sqrt)
    }
}
