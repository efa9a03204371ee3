//! Exact dyadic integers and annulus point counts.
//!
//! Counts such as `N_m = floor(2^m * eps_m)` reach thousands of bits for large
//! `m`. They are always of the form `mant * 2^exp` with a 64-bit mantissa, so
//! [`Dyadic`] stores them exactly and compares them without big integers.

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Nonnegative dyadic rational `mant * 2^exp`, kept normalized (odd mantissa or zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    mant: u64,
    exp: i64,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { mant: 0, exp: 0 };

    pub fn new(mant: u64, exp: i64) -> Self {
        if mant == 0 {
            return Self::ZERO;
        }
        let tz = mant.trailing_zeros();
        Dyadic {
            mant: mant >> tz,
            exp: exp + tz as i64,
        }
    }

    pub fn from_u64(n: u64) -> Self {
        Self::new(n, 0)
    }

    /// Exact value of a finite nonnegative float.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !(x.is_finite() && x >= 0.0) {
            return None;
        }
        if x == 0.0 {
            return Some(Self::ZERO);
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        Some(Self::new(mant, exp))
    }

    pub fn mantissa(&self) -> u64 {
        self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0
    }

    pub fn is_integer(&self) -> bool {
        self.mant == 0 || self.exp >= 0
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: i64) -> Self {
        if self.mant == 0 {
            *self
        } else {
            Dyadic {
                mant: self.mant,
                exp: self.exp + k,
            }
        }
    }

    /// Integer part.
    pub fn floor(&self) -> Self {
        if self.exp >= 0 || self.mant == 0 {
            return *self;
        }
        let s = -self.exp;
        if s >= 64 {
            Self::ZERO
        } else {
            Self::new(self.mant >> s, 0)
        }
    }

    pub fn ln(&self) -> f64 {
        if self.mant == 0 {
            f64::NEG_INFINITY
        } else {
            (self.mant as f64).ln() + self.exp as f64 * LN_2
        }
    }

    /// Nearest float; `inf` when out of range.
    pub fn to_f64(&self) -> f64 {
        if self.mant == 0 {
            return 0.0;
        }
        let e = self.exp.clamp(-2000, 2000) as i32;
        let m = self.mant as f64;
        // split the scaling to avoid spurious overflow of the power itself
        m * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    pub fn to_u64(&self) -> Option<u64> {
        if !self.is_integer() {
            return None;
        }
        if self.mant == 0 {
            return Some(0);
        }
        let bl = 64 - self.mant.leading_zeros() as i64;
        if bl + self.exp > 64 {
            None
        } else {
            Some(self.mant << self.exp)
        }
    }

    /// Exact integer value; `None` for non-integers.
    pub fn to_biguint(&self) -> Option<BigUint> {
        if !self.is_integer() {
            return None;
        }
        Some(BigUint::from(self.mant) << (self.exp.max(0) as usize))
    }

    fn top_bit(&self) -> i64 {
        63 - self.mant.leading_zeros() as i64 + self.exp
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.mant == 0, other.mant == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let (ta, tb) = (self.top_bit(), other.top_bit());
        if ta != tb {
            return ta.cmp(&tb);
        }
        let e = self.exp.min(other.exp);
        let a = (self.mant as u128) << (self.exp - e);
        let b = (other.mant as u128) << (other.exp - e);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of points on an annulus level.
///
/// Constructions produce exact counts; formula profiles at levels where the
/// count exceeds `2^53` carry only its logarithm, since rounding to an integer
/// is below float resolution there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Count {
    Exact { value: Dyadic },
    Approx { ln: f64 },
}

impl Count {
    pub fn exact(n: u64) -> Self {
        Count::Exact {
            value: Dyadic::from_u64(n),
        }
    }

    pub fn from_dyadic(d: Dyadic) -> Self {
        Count::Exact { value: d }
    }

    /// `2^m`.
    pub fn pow2(m: u32) -> Self {
        Count::Exact {
            value: Dyadic::new(1, m as i64),
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            Count::Exact { value } => value.ln(),
            Count::Approx { ln } => *ln,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Count::Exact { value } => value.is_zero(),
            Count::Approx { .. } => false,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Count::Exact { value } => value.to_u64(),
            Count::Approx { .. } => None,
        }
    }

    pub fn as_dyadic(&self) -> Option<Dyadic> {
        match self {
            Count::Exact { value } => Some(*value),
            Count::Approx { .. } => None,
        }
    }

    /// `N * 2^-m`, in log domain.
    pub fn ln_density(&self, m: u32) -> f64 {
        self.ln() - m as f64 * LN_2
    }

    /// `N * 2^-m` as a float (exact for exact counts within range).
    pub fn density(&self, m: u32) -> f64 {
        match self {
            Count::Exact { value } => value.shl(-(m as i64)).to_f64(),
            Count::Approx { ln } => (ln - m as f64 * LN_2).exp(),
        }
    }

    /// At least 6 points, as required for trimmed-mean spacing.
    pub fn at_least(&self, k: u64) -> bool {
        match self {
            Count::Exact { value } => *value >= Dyadic::from_u64(k),
            Count::Approx { ln } => *ln >= (k as f64).ln(),
        }
    }
}
