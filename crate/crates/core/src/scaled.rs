//! Nonnegative reals carried as a mantissa and a base-2 exponent so that
//! products over large models do not leave the range of `f64`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A nonnegative value `mantissa * 2^exponent`.
///
/// Normalized values have `mantissa` in `[0.5, 1)`; zero is stored as
/// `(0.0, 0)` and infinity as `(+inf, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub mantissa: f64,
    pub exponent: i64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mantissa: 0.0, exponent: 0 };
    pub const ONE: Scaled = Scaled { mantissa: 0.5, exponent: 1 };
    pub const INFINITY: Scaled = Scaled { mantissa: f64::INFINITY, exponent: 0 };

    pub fn new(mantissa: f64, exponent: i64) -> Scaled {
        debug_assert!(mantissa >= 0.0 && !mantissa.is_nan());
        if mantissa == 0.0 {
            return Scaled::ZERO;
        }
        if mantissa.is_infinite() {
            return Scaled::INFINITY;
        }
        let (m, e) = libm::frexp(mantissa);
        Scaled { mantissa: m, exponent: exponent + e as i64 }
    }

    pub fn from_f64(value: f64) -> Scaled {
        Scaled::new(value, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn is_infinite(&self) -> bool {
        self.mantissa.is_infinite()
    }

    /// Nearest `f64`; saturates to `0` or `+inf` outside the double range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() || self.is_infinite() {
            return self.mantissa;
        }
        ldexp(self.mantissa, self.exponent)
    }

    /// Base-2 logarithm; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        if self.is_infinite() {
            return f64::INFINITY;
        }
        self.mantissa.log2() + self.exponent as f64
    }

    pub fn mul(self, other: Scaled) -> Scaled {
        if self.is_infinite() || other.is_infinite() {
            return if self.is_zero() || other.is_zero() { Scaled::ZERO } else { Scaled::INFINITY };
        }
        Scaled::new(self.mantissa * other.mantissa, self.exponent + other.exponent)
    }

    pub fn mul_f64(self, factor: f64) -> Scaled {
        self.mul(Scaled::from_f64(factor))
    }

    /// `self / other` as a plain double; `0/0` is treated as `1`.
    pub fn ratio(&self, other: &Scaled) -> f64 {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return 1.0,
            (false, true) => return f64::INFINITY,
            (true, false) => return 0.0,
            _ => {}
        }
        if self.is_infinite() {
            return if other.is_infinite() { 1.0 } else { f64::INFINITY };
        }
        if other.is_infinite() {
            return 0.0;
        }
        ldexp(self.mantissa / other.mantissa, self.exponent - other.exponent)
    }

    /// True when `|self - other| <= tol * max(self, other)`.
    pub fn approx_eq(&self, other: &Scaled, tol: f64) -> bool {
        if self.is_zero() && other.is_zero() {
            return true;
        }
        if self.is_infinite() || other.is_infinite() {
            return self.is_infinite() && other.is_infinite();
        }
        let r = self.ratio(other);
        let (lo, hi) = if r <= 1.0 { (r, 1.0) } else { (1.0, r) };
        (hi - lo) <= tol * hi
    }

    pub fn max(self, other: Scaled) -> Scaled {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Scaled) -> Scaled {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for Scaled {
    fn partial_cmp(&self, other: &Scaled) -> Option<Ordering> {
        let rank = |s: &Scaled| -> u8 {
            if s.is_zero() {
                0
            } else if s.is_infinite() {
                2
            } else {
                1
            }
        };
        match rank(self).cmp(&rank(other)) {
            Ordering::Equal if rank(self) == 1 => Some(
                self.exponent
                    .cmp(&other.exponent)
                    .then(self.mantissa.partial_cmp(&other.mantissa)?),
            ),
            ord => Some(ord),
        }
    }
}

impl fmt::Display for Scaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if v != 0.0 && v.is_finite() || self.is_zero() || self.is_infinite() {
            write!(f, "{v:e}")
        } else {
            write!(f, "{}*2^{}", self.mantissa, self.exponent)
        }
    }
}

/// `x * 2^e` with saturation, for exponents beyond the `i32` range too.
pub fn ldexp(x: f64, e: i64) -> f64 {
    let e = e.clamp(-4000, 4000) as i32;
    libm::ldexp(x, e)
}

/// Scales `table` in place so its largest entry lies in `[0.5, 1)` and
/// returns the exponent that was removed. All-zero tables are left alone.
pub fn normalize_table(table: &mut [f64]) -> i64 {
    let max = table.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    let (_, e) = libm::frexp(max);
    if e != 0 {
        for v in table.iter_mut() {
            *v = libm::ldexp(*v, -e);
        }
    }
    e as i64
}

/// Neumaier-compensated accumulator over scaled terms that keeps one
/// running exponent and rescales when a larger term arrives.
#[derive(Clone, Debug, Default)]
pub struct ScaledSum {
    sum: f64,
    comp: f64,
    exponent: i64,
}

impl ScaledSum {
    pub fn new() -> ScaledSum {
        ScaledSum::default()
    }

    pub fn add(&mut self, term: Scaled) {
        if term.is_zero() {
            return;
        }
        if self.sum == 0.0 && self.comp == 0.0 {
            self.exponent = term.exponent;
        } else if term.exponent > self.exponent + 64 {
            let shift = self.exponent - term.exponent;
            self.sum = ldexp(self.sum, shift);
            self.comp = ldexp(self.comp, shift);
            self.exponent = term.exponent;
        }
        let x = ldexp(term.mantissa, term.exponent - self.exponent);
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> Scaled {
        Scaled::new((self.sum + self.comp).max(0.0), self.exponent)
    }
}


/// Serde helpers for extended reals: `+inf` is written as the string `"inf"`
/// because JSON has no infinity.
pub mod extended {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(E::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(from_repr::<D::Error>)
                .collect()
        }
    }
}
