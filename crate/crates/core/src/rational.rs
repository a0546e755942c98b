//! Text form of exact payoffs: integers, `a/b`, or finite decimals.

use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

use crate::env::Payoff;
use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<Payoff> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if t.contains('/') {
        let r = Payoff::from_str(t).map_err(|_| bad())?;
        return Ok(r);
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let num: i64 = frac.parse().map_err(|_| bad())?;
        let magnitude = Payoff::from_integer(int_part.abs()) + Payoff::new(num, den);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    t.parse::<i64>().map(Payoff::from_integer).map_err(|_| bad())
}

pub fn format(value: Payoff) -> String {
    if value.is_integer() {
        value.to_integer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: Payoff) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

pub fn serialize<S: Serializer>(value: &Payoff, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_integer() {
        s.serialize_i64(value.to_integer())
    } else {
        s.serialize_str(&format(*value))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Payoff, D::Error> {
    struct RatioVisitor;

    impl Visitor<'_> for RatioVisitor {
        type Value = Payoff;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("an integer, a decimal, or a fraction string like \"3/2\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Payoff, E> {
            Ok(Payoff::from_integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Payoff, E> {
            i64::try_from(v).map(Payoff::from_integer).map_err(E::custom)
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Payoff, E> {
            parse(&v.to_string()).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Payoff, E> {
            parse(v).map_err(E::custom)
        }
    }

    d.deserialize_any(RatioVisitor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_forms() {
        assert_eq!(parse("4").unwrap(), Payoff::from_integer(4));
        assert_eq!(parse("3/2").unwrap(), Payoff::new(3, 2));
        assert_eq!(parse("0.25").unwrap(), Payoff::new(1, 4));
        assert_eq!(parse("-1.5").unwrap(), Payoff::new(-3, 2));
        assert_eq!(parse("-0.5").unwrap(), Payoff::new(-1, 2));
        assert!(parse("x").is_err());
        assert!(parse("1.").is_err());
    }

    proptest! {
        #[test]
        fn format_then_parse(n in -10_000i64..10_000, d in 1i64..500) {
            let v = Payoff::new(n, d);
            prop_assert_eq!(parse(&format(v)).unwrap(), v);
        }
    }
}
