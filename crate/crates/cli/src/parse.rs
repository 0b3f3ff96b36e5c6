use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;

/// A list of return times, written `a:b` (inclusive), `a:b:step` or
/// `a,b,c`. In config files a TOML array of integers is also accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NList(pub Vec<u32>);

impl FromStr for NList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad integer {t:?} in n-list {s:?}"))
        };
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let (lo, hi, step) = match parts.as_slice() {
                [a, b] => (num(a)?, num(b)?, 1),
                [a, b, c] => (num(a)?, num(b)?, num(c)?),
                _ => return Err(format!("n-list {s:?} must be a:b or a:b:step")),
            };
            if step == 0 || lo > hi {
                return Err(format!("empty or invalid range {s:?}"));
            }
            (lo..=hi).step_by(step as usize).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err("n-list is empty".into());
        }
        Ok(NList(values))
    }
}

impl<'de> Deserialize<'de> for NList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<u32>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) if !v.is_empty() => Ok(NList(v)),
            Raw::List(_) => Err(serde::de::Error::custom("n_list is empty")),
        }
    }
}

/// Parses `2`, `-0.5`, `0.3+0.4i`, `0.3-0.4i`, `2i` or `-i`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse {s:?} as a complex number");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}
