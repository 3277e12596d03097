//! Two-sided envelope arithmetic.
//!
//! Green functions and capacities are often known only up to a multiplicative
//! constant; every quantity derived from them is carried as an interval.
//! Arithmetic rounds outward by one ulp per operation so that a verdict based
//! on interval endpoints is conservative.

use serde::{Deserialize, Serialize};

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Interval {
    /// Degenerate interval containing a single point.
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Does this interval contain the whole of `other`?
    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn add(&self, rhs: &Interval) -> Interval {
        Interval::new(down(self.lo + rhs.lo), up(self.hi + rhs.hi))
    }

    pub fn scale(&self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(down(self.lo * c), up(self.hi * c))
        } else {
            Interval::new(down(self.hi * c), up(self.lo * c))
        }
    }

    /// Product of two nonnegative intervals.
    pub fn mul_nonneg(&self, rhs: &Interval) -> Interval {
        debug_assert!(self.lo >= 0.0 && rhs.lo >= 0.0);
        Interval::new(down(self.lo * rhs.lo), up(self.hi * rhs.hi))
    }

    /// Quotient of a nonnegative interval by a strictly positive one.
    pub fn div_pos(&self, rhs: &Interval) -> Interval {
        debug_assert!(self.lo >= 0.0 && rhs.lo > 0.0);
        Interval::new(down(self.lo / rhs.hi), up(self.hi / rhs.lo))
    }

    pub fn recip_pos(&self) -> Interval {
        debug_assert!(self.lo > 0.0);
        Interval::new(down(1.0 / self.hi), up(1.0 / self.lo))
    }

    pub fn clamp_to(&self, lo: f64, hi: f64) -> Interval {
        Interval::new(self.lo.clamp(lo, hi), self.hi.clamp(lo, hi))
    }

    /// Smallest interval containing both.
    pub fn hull(&self, rhs: &Interval) -> Interval {
        Interval::new(self.lo.min(rhs.lo), self.hi.max(rhs.hi))
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_ops_stay_tight() {
        let a = Interval::point(2.0);
        let b = Interval::point(3.0);
        let p = a.mul_nonneg(&b);
        assert!(p.contains(6.0));
        assert!(p.width() < 1e-14);
    }

    #[test]
    fn division_is_outward() {
        let num = Interval::new(1.0, 2.0);
        let den = Interval::new(4.0, 5.0);
        let q = num.div_pos(&den);
        assert!(q.lo <= 0.2 && q.hi >= 0.5);
    }

    proptest! {
        // Interval ops must enclose the corresponding pointwise results.
        #[test]
        fn containment_under_arithmetic(
            a in 1e-8f64..1e8, b in 1e-8f64..1e8,
            wa in 0.0f64..0.5, wb in 0.0f64..0.5,
        ) {
            let ia = Interval::new(a, a * (1.0 + wa));
            let ib = Interval::new(b, b * (1.0 + wb));
            for &x in &[ia.lo, ia.hi, ia.mid()] {
                for &y in &[ib.lo, ib.hi, ib.mid()] {
                    prop_assert!(ia.add(&ib).contains(x + y));
                    prop_assert!(ia.mul_nonneg(&ib).contains(x * y));
                    prop_assert!(ia.div_pos(&ib).contains(x / y));
                }
            }
        }
    }
}
