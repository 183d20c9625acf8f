//! Candidate depot slots: a Cartesian grid over `a, e, i, Ω, ω, θ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elements::KeplerianElements;
use crate::error::{Error, Result};

/// Values for one element: `min:increment:max` (inclusive), an explicit list,
/// or a single value.
#[derive(Debug, Clone, PartialEq)]
pub enum Range {
    Step { min: f64, inc: f64, max: f64 },
    List(Vec<f64>),
}

impl Range {
    pub fn single(v: f64) -> Self {
        Range::List(vec![v])
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Range::List(v) => v.clone(),
            Range::Step { min, inc, max } => {
                // Count from the rational quotient so the max is not lost to rounding.
                let span = (max - min) / inc;
                let n = (span + 1e-9).floor() as usize + 1;
                (0..n).map(|k| min + k as f64 * inc).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing used to widen refinement bounds; zero for single values.
    pub fn increment(&self) -> f64 {
        match self {
            Range::Step { inc, .. } => *inc,
            Range::List(v) if v.len() > 1 => {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
            }
            Range::List(_) => 0.0,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        let v = self.values();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (!v.is_empty()).then_some((lo, hi))
    }
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{t}` in range `{s}`")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            3 => {
                let (min, inc, max) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
                if !(inc > 0.0) || max < min {
                    return Err(Error::InvalidParameter(format!("range `{s}` needs inc > 0 and max ≥ min")));
                }
                Ok(Range::Step { min, inc, max })
            }
            1 => {
                let body = s.trim_start_matches('[').trim_end_matches(']');
                let vals = body
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(num)
                    .collect::<Result<Vec<_>>>()?;
                Ok(Range::List(vals))
            }
            _ => Err(Error::InvalidParameter(format!("cannot parse range `{s}`"))),
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Step { min, inc, max } => write!(f, "{min}:{inc}:{max}"),
            Range::List(v) if v.len() == 1 => write!(f, "{}", v[0]),
            Range::List(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", s.join(","))
            }
        }
    }
}

impl Serialize for Range {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Range {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            List(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(Range::single(v)),
            Raw::List(v) => Ok(Range::List(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Grid over the six elements; `a` in DU, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a_du: Range,
    pub e: Range,
    pub i_deg: Range,
    pub raan_deg: Range,
    #[serde(default = "zero_range")]
    pub argp_deg: Range,
    #[serde(default = "zero_range")]
    pub ta_deg: Range,
}

fn zero_range() -> Range {
    Range::single(0.0)
}

impl GridSpec {
    pub fn slot_count(&self) -> usize {
        self.axes().iter().map(|(_, r)| r.len()).product()
    }

    fn axes(&self) -> [(&'static str, &Range); 6] {
        [
            ("a", &self.a_du),
            ("e", &self.e),
            ("i", &self.i_deg),
            ("raan", &self.raan_deg),
            ("argp", &self.argp_deg),
            ("ta", &self.ta_deg),
        ]
    }
}

/// One candidate facility orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub idx: usize,
    /// `a` in DU.
    pub elements: KeplerianElements,
}

/// Row-major enumeration (last axis fastest): `a, e, i, Ω, ω, θ`.
pub fn generate_slots(spec: &GridSpec) -> Result<Vec<Slot>> {
    let mut axes = Vec::with_capacity(6);
    for (name, range) in spec.axes() {
        let v = range.values();
        if v.is_empty() {
            return Err(Error::EmptyRange(name));
        }
        axes.push(v);
    }
    let mut slots = Vec::with_capacity(spec.slot_count());
    for &a in &axes[0] {
        for &e in &axes[1] {
            for &i in &axes[2] {
                for &raan in &axes[3] {
                    for &argp in &axes[4] {
                        for &ta in &axes[5] {
                            let elements = KeplerianElements::from_degrees(a, e, i, raan, argp, ta)?;
                            slots.push(Slot { idx: slots.len(), elements });
                        }
                    }
                }
            }
        }
    }
    Ok(slots)
}

/// `slot_idx,a_du,e,i_deg,raan_deg,argp_deg`
pub fn write_grid_csv<W: std::io::Write>(out: W, slots: &[Slot]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["slot_idx", "a_du", "e", "i_deg", "raan_deg", "argp_deg"])?;
    for s in slots {
        let k = &s.elements;
        wtr.write_record([
            s.idx.to_string(),
            k.a.to_string(),
            k.e.to_string(),
            k.i.to_degrees().to_string(),
            k.raan.to_degrees().to_string(),
            k.argp.to_degrees().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
