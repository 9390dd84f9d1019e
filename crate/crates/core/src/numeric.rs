//! Numeric primitives: compensated summation, a double-double log-factorial
//! table, and exact floor/ceil of float-times-integer products.

/// Error-free transform: `(s, e)` with `s = fl(a + b)` and `a + b = s + e`
/// exactly (Knuth two-sum; no magnitude precondition).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let ap = s - b;
    let bp = s - ap;
    (s, (a - ap) + (b - bp))
}

/// A real held as an unevaluated `hi + lo` pair, accurate to roughly 2^-105
/// relative. Log-factorials reach ~1e6 where a single f64 only resolves
/// ~1e-10 absolute; the pair keeps the cancellation in pmf exponents exact
/// until the final rounding.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    /// Accumulates a plain f64 term.
    #[inline]
    pub(crate) fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        Dd { hi: s, lo: self.lo + e }.renorm()
    }

    #[inline]
    pub(crate) fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        Dd { hi: s, lo: e + self.lo + other.lo }.renorm()
    }

    #[inline]
    pub(crate) fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    #[inline]
    fn renorm(self) -> Dd {
        let (hi, lo) = two_sum(self.hi, self.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }

    /// Total order on the (hi, lo) representation; used to pick a
    /// combination order that is invariant under operand swaps.
    #[inline]
    pub(crate) fn canonical_le(self, other: Dd) -> bool {
        match self.hi.total_cmp(&other.hi) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.lo.total_cmp(&other.lo).is_le(),
        }
    }
}

/// Table of `ln(j!)` for `j = 0..=max`, accumulated as `Dd` partial sums.
/// Each entry's error is only the inherited rounding of the individual
/// `ln(j)` inputs, and differences of entries cancel the shared prefix, so
/// beta-binomial log-probabilities built from table differences stay within
/// ~1e-12 even at indices of 1e5.
pub(crate) struct LogFactorial {
    sums: Vec<Dd>,
}

impl LogFactorial {
    pub(crate) fn new() -> Self {
        LogFactorial { sums: vec![Dd::ZERO] }
    }

    pub(crate) fn with_max(max: u64) -> Self {
        let mut table = Self::new();
        table.ensure(max);
        table
    }

    /// Grows the table so `lf(max)` is available.
    pub(crate) fn ensure(&mut self, max: u64) {
        let want = max as usize + 1;
        self.sums.reserve(want.saturating_sub(self.sums.len()));
        while self.sums.len() < want {
            let j = self.sums.len() as f64;
            let last = *self.sums.last().expect("table starts nonempty");
            self.sums.push(last.add_f64(j.ln()));
        }
    }

    /// `ln(j!)` as a double-double; the table must already cover `j`.
    #[inline]
    pub(crate) fn lf_dd(&self, j: u64) -> Dd {
        self.sums[j as usize]
    }

    /// `ln C(n, k)`.
    #[inline]
    pub(crate) fn lchoose(&self, n: u64, k: u64) -> f64 {
        debug_assert!(k <= n);
        self.lf_dd(n).sub(self.lf_dd(k)).sub(self.lf_dd(n - k)).value()
    }
}

/// Compensated (Kahan) accumulator for sums of many f64 terms.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// `floor(a * b)` of the exact real product, not of its f64 rounding.
///
/// `fma` recovers the rounding residue (`a*b = p + e` exactly), which
/// decides the boundary case where `p` lands on an integer only because the
/// true product sits within half an ulp of it. Requires `|a * b| < 2^53` and
/// finite inputs, which every caller (quantile ranks, urn counts) satisfies.
pub(crate) fn exact_prod_floor(a: f64, b: f64) -> f64 {
    let p = a * b;
    let e = a.mul_add(b, -p);
    let f = p.floor();
    // If p is not an integer, e (at most half an ulp of p) cannot push the
    // true product across either neighbouring integer.
    if p == f && e < 0.0 {
        f - 1.0
    } else {
        f
    }
}

/// `ceil(a * b)` of the exact real product; mirror of [`exact_prod_floor`].
pub(crate) fn exact_prod_ceil(a: f64, b: f64) -> f64 {
    let p = a * b;
    let e = a.mul_add(b, -p);
    let c = p.ceil();
    if p == c && e > 0.0 {
        c + 1.0
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_floor(a: f64, b: f64) -> f64 {
        let p = BigRational::from_float(a).unwrap() * BigRational::from_float(b).unwrap();
        p.floor().to_integer().to_f64().unwrap()
    }

    fn exact_ceil(a: f64, b: f64) -> f64 {
        let p = BigRational::from_float(a).unwrap() * BigRational::from_float(b).unwrap();
        p.ceil().to_integer().to_f64().unwrap()
    }

    #[test]
    fn prod_floor_ceil_match_rational_oracle_on_boundary_cases() {
        // Products that sit exactly on or within one ulp of an integer.
        let cases: &[(f64, f64)] = &[
            (0.1, 2.0),
            (0.1, 860.0),
            (0.2, 11.0),
            (0.45, 5.0),
            (0.5, 2.0),
            (0.5, 11.0),
            (0.3, 10.0),
            (0.7, 10.0),
            (1.0 / 3.0, 3.0),
            (0.9999999999999999, 1000.0),
            (5e-324, 1.0),
        ];
        for &(a, b) in cases {
            assert_eq!(exact_prod_floor(a, b), exact_floor(a, b), "floor({a} * {b})");
            assert_eq!(exact_prod_ceil(a, b), exact_ceil(a, b), "ceil({a} * {b})");
        }
    }

    #[test]
    fn prod_floor_ceil_match_rational_oracle_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..20_000 {
            let a: f64 = rng.random();
            let b = rng.random_range(1..=1_000_000) as f64;
            assert_eq!(exact_prod_floor(a, b), exact_floor(a, b), "floor({a} * {b})");
            assert_eq!(exact_prod_ceil(a, b), exact_ceil(a, b), "ceil({a} * {b})");
        }
    }

    #[test]
    fn log_factorial_matches_exact_rational_logs() {
        // ln(j!) against ln of the exact integer factorial, evaluated by
        // scaling into f64 range: ln(j!) = ln(f / 2^k) + k ln 2.
        let table = LogFactorial::with_max(400);
        let mut fact = BigInt::from(1);
        for j in 1..=400u64 {
            fact *= j;
            let shift = (fact.bits() as i64 - 53).max(0) as usize;
            let shifted = &fact >> shift;
            let approx = shifted.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2;
            let got = table.lf_dd(j).value();
            assert!(
                (got - approx).abs() <= 1e-12 * approx.abs().max(1.0),
                "lf({j}): got {got}, want {approx}"
            );
        }
    }

    #[test]
    fn lchoose_matches_exact_binomials() {
        let table = LogFactorial::with_max(64);
        for n in [5u64, 10, 30, 64] {
            for k in 0..=n {
                let exact = {
                    let mut c = BigInt::from(1);
                    for i in 0..k {
                        c = c * (n - i) / (i + 1);
                    }
                    c.to_f64().unwrap().ln()
                };
                let got = table.lchoose(n, k);
                assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "lchoose({n},{k})");
            }
        }
    }

    #[test]
    fn kahan_sum_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1.0);
        for _ in 0..1_000_000 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn dd_difference_cancels_exactly() {
        // (big + tiny) - big must recover tiny, which plain f64 loses.
        let big = Dd::ZERO.add_f64(1.0e6);
        let with_tiny = big.add_f64(3.0e-12);
        assert_eq!(with_tiny.sub(big).value(), 3.0e-12);
    }
}
