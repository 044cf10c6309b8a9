//! Compensated (double-double) accumulation for box sums.
//!
//! Prefix tables store cumulative sums whose magnitude is the whole-domain
//! integral, while a queried box may carry a far smaller integral; the
//! inclusion-exclusion then cancels almost everything.  Storing each table
//! entry as an unevaluated sum `hi + lo` keeps the absolute error of a box
//! sum near `1e-30` instead of `ulp(total)`, so small boxes survive the
//! cancellation.

/// Unevaluated sum of two doubles with `|lo| <= ulp(hi)` after every op.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn from_product(a: f64, b: f64) -> Dd {
        let p = a * b;
        let e = a.mul_add(b, -p);
        Dd { hi: p, lo: e }
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul_f64(self, x: f64) -> Dd {
        let p = Dd::from_product(self.hi, x);
        let e = p.lo + self.lo * x;
        let (hi, lo) = quick_two_sum(p.hi, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_survives() {
        // 1e16 + 1 - 1e16 loses the 1 in plain f64 once more terms pile on.
        let big = Dd::from_f64(1e16);
        let s = big.add(Dd::from_f64(1.0)).add(Dd::from_f64(1e-3));
        let diff = s.sub(big);
        assert_eq!(diff.to_f64(), 1.001);
    }

    #[test]
    fn product_is_exact() {
        let p = Dd::from_product(1.0000000000000002, 3.000000000000001);
        let exact_hi = 1.0000000000000002f64 * 3.000000000000001f64;
        assert_eq!(p.hi, exact_hi);
    }
}
