//! Order-independent floating-point summation.
//!
//! [`ExactSum`] keeps the running total as a list of non-overlapping partials
//! (Shewchuk's grow-expansion), so the represented value is the exact real sum
//! of every term added. [`ExactSum::value`] rounds that exact sum once, which
//! makes the result independent of the order and grouping of the additions.
//! The trainer relies on this for bit-identical reductions across shard
//! counts.

use smallvec::SmallVec;

#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    // Increasing magnitude, pairwise non-overlapping.
    partials: SmallVec<[f64; 4]>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds the exact value held by `other`.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The exact sum, correctly rounded to the nearest `f64`.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push the
        // tail past the halfway point.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn catastrophic_cancellation() {
        assert_eq!(exact_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(&[0.1; 10]), 1.0);
        assert_eq!(exact_sum(&[]), 0.0);
    }

    #[test]
    fn half_even_tail() {
        // 1 + 2^-53 + 2^-106: the tiny term breaks the tie upward.
        let t = 2f64.powi(-53);
        assert_eq!(exact_sum(&[1.0, t, t * t]), 1.0 + 2.0 * t);
        assert_eq!(exact_sum(&[1.0, t]), 1.0);
    }

    proptest! {
        #[test]
        fn grouping_does_not_change_the_result(
            xs in prop::collection::vec(-1e6f64..1e6, 0..200),
            cut in 0usize..200,
        ) {
            let whole = exact_sum(&xs);
            let cut = cut.min(xs.len());
            let mut a: ExactSum = xs[..cut].iter().copied().collect();
            let b: ExactSum = xs[cut..].iter().rev().copied().collect();
            a.merge(&b);
            prop_assert_eq!(a.value().to_bits(), whole.to_bits());
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert_eq!(exact_sum(&rev).to_bits(), whole.to_bits());
        }
    }
}
