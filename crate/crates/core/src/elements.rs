//! Orbital element sets, canonical units, and the two-body auxiliaries shared
//! by the Q-law dynamics and the launch model.
//!
//! All propagation runs in canonical units where the gravitational parameter is
//! one. The modified equinoctial set used here keeps the semimajor axis in
//! place of the semi-parameter.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Classical elements. Distances are in whatever unit the caller works in
/// (DU inside the library), angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub ta: f64,
}

impl KeplerianElements {
    /// Builds a validated element set; angles are wrapped into `[0, 2π)`.
    pub fn new(a: f64, e: f64, i: f64, raan: f64, argp: f64, ta: f64) -> Result<Self> {
        let kep = Self {
            a,
            e,
            i,
            raan: wrap_two_pi(raan),
            argp: wrap_two_pi(argp),
            ta: wrap_two_pi(ta),
        };
        kep.validate()?;
        Ok(kep)
    }

    /// Degrees-based constructor, the form every table and input file uses.
    pub fn from_degrees(a: f64, e: f64, i_deg: f64, raan_deg: f64, argp_deg: f64, ta_deg: f64) -> Result<Self> {
        Self::new(
            a,
            e,
            i_deg.to_radians(),
            raan_deg.to_radians(),
            argp_deg.to_radians(),
            ta_deg.to_radians(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.e, self.i, self.raan, self.argp, self.ta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidElements("non-finite element".into()));
        }
        if self.a <= 0.0 {
            return Err(Error::InvalidElements(format!("a = {} must be positive", self.a)));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Error::InvalidElements(format!("e = {} outside [0, 1)", self.e)));
        }
        if !(0.0..=PI).contains(&self.i) {
            return Err(Error::InvalidElements(format!("i = {} outside [0, π]", self.i)));
        }
        Ok(())
    }

    pub fn periapsis(&self) -> f64 {
        self.a * (1.0 - self.e)
    }

    pub fn apoapsis(&self) -> f64 {
        self.a * (1.0 + self.e)
    }

    /// Same orbit with the semimajor axis rescaled by `factor` (unit change).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { a: self.a * factor, ..*self }
    }
}

/// Modified equinoctial elements with the semimajor axis in place of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeeAState {
    pub a: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub k: f64,
    pub l: f64,
}

impl MeeAState {
    pub fn ecc(&self) -> f64 {
        self.f.hypot(self.g)
    }

    /// The five slow elements `[a, f, g, h, k]`.
    pub fn slow(&self) -> [f64; 5] {
        [self.a, self.f, self.g, self.h, self.k]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        Self { a: x[0], f: x[1], g: x[2], h: x[3], k: x[4], l: x[5] }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.f, self.g, self.h, self.k, self.l]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidElements("non-finite equinoctial state".into()));
        }
        if self.a <= 0.0 {
            return Err(Error::InvalidElements(format!("a = {} must be positive", self.a)));
        }
        if self.f * self.f + self.g * self.g >= 1.0 {
            return Err(Error::InvalidElements(format!(
                "f² + g² = {} is not elliptic",
                self.f * self.f + self.g * self.g
            )));
        }
        Ok(())
    }
}

/// Two-body quantities that appear throughout the Gauss equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Auxiliaries {
    /// Semi-parameter.
    pub p: f64,
    pub w: f64,
    /// Orbital radius.
    pub r: f64,
    pub s2: f64,
    /// Specific angular momentum `sqrt(μ p)`.
    pub h_am: f64,
}

pub fn kep_to_mee(kep: &KeplerianElements) -> Result<MeeAState> {
    kep.validate()?;
    if kep.i >= PI {
        return Err(Error::Singular("i = π is singular for equinoctial elements".into()));
    }
    let lon_peri = kep.raan + kep.argp;
    let t = (kep.i / 2.0).tan();
    Ok(MeeAState {
        a: kep.a,
        f: kep.e * lon_peri.cos(),
        g: kep.e * lon_peri.sin(),
        h: t * kep.raan.cos(),
        k: t * kep.raan.sin(),
        l: wrap_two_pi(lon_peri + kep.ta),
    })
}

pub fn mee_to_kep(mee: &MeeAState) -> Result<KeplerianElements> {
    mee.validate()?;
    let e = mee.ecc();
    let tan_half = mee.h.hypot(mee.k);
    let i = 2.0 * tan_half.atan();
    let raan = if tan_half > 0.0 { mee.k.atan2(mee.h) } else { 0.0 };
    let lon_peri = if e > 0.0 { mee.g.atan2(mee.f) } else { 0.0 };
    Ok(KeplerianElements {
        a: mee.a,
        e,
        i,
        raan: wrap_two_pi(raan),
        argp: wrap_two_pi(lon_peri - raan),
        ta: wrap_two_pi(mee.l - lon_peri),
    })
}

/// Auxiliary quantities for gravitational parameter `mu`. Outside the
/// elliptic domain every field is NaN, which the propagator reports.
pub fn auxiliaries(mee: &MeeAState, mu: f64) -> Auxiliaries {
    let p = mee.a * (1.0 - mee.f * mee.f - mee.g * mee.g);
    let w = 1.0 + mee.f * mee.l.cos() + mee.g * mee.l.sin();
    if !(w > 0.0 && p > 0.0) {
        return Auxiliaries { p: f64::NAN, w: f64::NAN, r: f64::NAN, s2: f64::NAN, h_am: f64::NAN };
    }
    Auxiliaries {
        p,
        w,
        r: p / w,
        s2: 1.0 + mee.h * mee.h + mee.k * mee.k,
        h_am: (mu * p).sqrt(),
    }
}

/// Canonical unit system: one distance unit in km and the physical μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub du_km: f64,
    pub mu_km3_s2: f64,
}

pub const MU_EARTH_KM3_S2: f64 = 398_600.4418;

impl UnitSystem {
    pub fn new(du_km: f64, mu_km3_s2: f64) -> Result<Self> {
        if !(du_km > 0.0 && mu_km3_s2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "unit system needs positive DU and μ, got {du_km} km and {mu_km3_s2}"
            )));
        }
        Ok(Self { du_km, mu_km3_s2 })
    }

    pub fn earth(du_km: f64) -> Self {
        Self { du_km, mu_km3_s2: MU_EARTH_KM3_S2 }
    }

    /// Time unit in seconds.
    pub fn tu_s(&self) -> f64 {
        (self.du_km.powi(3) / self.mu_km3_s2).sqrt()
    }

    pub fn km_to_du(&self, km: f64) -> f64 {
        km / self.du_km
    }

    pub fn du_to_km(&self, du: f64) -> f64 {
        du * self.du_km
    }

    pub fn s_to_tu(&self, s: f64) -> f64 {
        s / self.tu_s()
    }

    pub fn tu_to_s(&self, tu: f64) -> f64 {
        tu * self.tu_s()
    }

    pub fn tu_to_days(&self, tu: f64) -> f64 {
        self.tu_to_s(tu) / 86_400.0
    }

    pub fn days_to_tu(&self, days: f64) -> f64 {
        self.s_to_tu(days * 86_400.0)
    }

    /// Acceleration unit DU/TU² expressed in m/s².
    pub fn accel_unit_m_s2(&self) -> f64 {
        self.du_km * 1_000.0 / self.tu_s().powi(2)
    }

    /// Velocity unit DU/TU expressed in m/s.
    pub fn velocity_unit_m_s(&self) -> f64 {
        self.du_km * 1_000.0 / self.tu_s()
    }

    /// Converts elements with `a` in km into elements with `a` in DU.
    pub fn kep_km_to_du(&self, kep: &KeplerianElements) -> KeplerianElements {
        kep.scaled(1.0 / self.du_km)
    }

    pub fn kep_du_to_km(&self, kep: &KeplerianElements) -> KeplerianElements {
        kep.scaled(self.du_km)
    }
}

/// One client satellite as read from a constellation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub sat_id: String,
    /// Elements with `a` in km.
    pub elements_km: KeplerianElements,
}

#[derive(Debug, Deserialize, Serialize)]
struct ConstellationRow {
    sat_id: String,
    a_km: f64,
    e: f64,
    i_deg: f64,
    raan_deg: f64,
    argp_deg: f64,
}

/// Reads `sat_id,a_km,e,i_deg,raan_deg,argp_deg` rows. True anomaly is zero.
pub fn read_constellation<R: std::io::Read>(reader: R) -> Result<Vec<Satellite>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["sat_id", "a_km", "e", "i_deg", "raan_deg", "argp_deg"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Other(format!(
            "constellation header must be `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ConstellationRow = row?;
        let elements_km =
            KeplerianElements::from_degrees(row.a_km, row.e, row.i_deg, row.raan_deg, row.argp_deg, 0.0)
                .map_err(|e| Error::InvalidElements(format!("satellite {}: {e}", row.sat_id)))?;
        out.push(Satellite { sat_id: row.sat_id, elements_km });
    }
    Ok(out)
}

pub fn load_constellation(path: &Path) -> Result<Vec<Satellite>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Other(format!("cannot open constellation {}: {e}", path.display())))?;
    read_constellation(file)
}
