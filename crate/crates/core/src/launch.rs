//! Launch and insertion cost of a depot: a coplanar Hohmann transfer from the
//! launch vehicle parking orbit, first burn by the launcher, second by the
//! depot. The cheaper of the two Hohmann variants (arrive at perigee or at
//! apogee) sets the mass ratio.

use serde::{Deserialize, Serialize};

use crate::elements::KeplerianElements;
use crate::error::{Error, Result};
use crate::qlaw::G0;

/// Mean equatorial Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6378.137;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchParams {
    /// Parking orbit radius, km.
    pub r0_km: f64,
    pub isp_l_s: f64,
    pub isp_d_s: f64,
    pub m_l_max_kg: f64,
    pub mu_km3_s2: f64,
}

impl LaunchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0_km > EARTH_RADIUS_KM) {
            return Err(Error::InvalidParameter(format!(
                "parking radius {} km must exceed the Earth radius",
                self.r0_km
            )));
        }
        if !(self.isp_l_s > 0.0 && self.isp_d_s > 0.0 && self.m_l_max_kg > 0.0 && self.mu_km3_s2 > 0.0) {
            return Err(Error::InvalidParameter(format!("launch parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionBranch {
    PerigeeBurn,
    ApogeeBurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassRatios {
    pub z: f64,
    pub z_d: f64,
    pub z_l: f64,
    pub branch: InsertionBranch,
}

/// Burn magnitudes in km/s for both insertion variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HohmannDvs {
    pub dv_p1: f64,
    pub dv_p2: f64,
    pub dv_a1: f64,
    pub dv_a2: f64,
}

/// Hohmann burns from a circular orbit of radius `r0_km` to the slot `(a_km, e)`.
pub fn hohmann_dvs(r0_km: f64, a_km: f64, e: f64, mu: f64) -> Result<HohmannDvs> {
    if !(0.0..1.0).contains(&e) || !(a_km > 0.0) {
        return Err(Error::InvalidElements(format!("slot a = {a_km} km, e = {e} is not elliptic")));
    }
    let rp = a_km * (1.0 - e);
    let ra = a_km * (1.0 + e);
    if rp < r0_km {
        return Err(Error::Inadmissible { rp_km: rp, r0_km });
    }
    let v0 = (mu / r0_km).sqrt();
    let leg = |r_far: f64| {
        let first = (mu * (2.0 / r0_km - 2.0 / (r0_km + r_far))).sqrt() - v0;
        let second = (mu * (2.0 / r_far - 1.0 / a_km)).sqrt() - (mu * (2.0 / r_far - 2.0 / (r0_km + r_far))).sqrt();
        (first, second)
    };
    let (dv_p1, dv_p2) = leg(rp);
    let (dv_a1, dv_a2) = leg(ra);
    Ok(HohmannDvs { dv_p1, dv_p2, dv_a1, dv_a2 })
}

/// Mass ratios for a slot with `a` in km; independent of any mass.
pub fn mass_ratio(a_km: f64, e: f64, lp: &LaunchParams) -> Result<MassRatios> {
    let dvs = hohmann_dvs(lp.r0_km, a_km, e, lp.mu_km3_s2)?;
    let ratio = |dv_km_s: f64, isp: f64| (dv_km_s * 1_000.0 / (G0 * isp)).exp();
    let (zl_p, zd_p) = (ratio(dvs.dv_p1, lp.isp_l_s), ratio(dvs.dv_p2, lp.isp_d_s));
    let (zl_a, zd_a) = (ratio(dvs.dv_a1, lp.isp_l_s), ratio(dvs.dv_a2, lp.isp_d_s));
    let z_p = zd_p * zl_p;
    let z_a = zd_a * zl_a;
    Ok(if z_p <= z_a {
        MassRatios { z: z_p, z_d: zd_p, z_l: zl_p, branch: InsertionBranch::PerigeeBurn }
    } else {
        MassRatios { z: z_a, z_d: zd_a, z_l: zl_a, branch: InsertionBranch::ApogeeBurn }
    })
}

/// Mass ratios of an orbit given with `a` in DU; `None` when its perigee is
/// below the parking orbit.
pub fn slot_mass_ratio(kep: &KeplerianElements, du_km: f64, lp: &LaunchParams) -> Option<MassRatios> {
    mass_ratio(kep.a * du_km, kep.e, lp).ok()
}

/// Equivalent mass in the parking orbit.
pub fn emleo(post_insertion_mass_kg: f64, ratios: &MassRatios) -> f64 {
    post_insertion_mass_kg * ratios.z
}

/// One row of the Z contour export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZContourRow {
    pub a_du: f64,
    pub e: f64,
    pub z: Option<f64>,
    pub z_d: Option<f64>,
    pub feasible: bool,
}

/// Mass ratios over an `(a, e)` grid (`a` in DU); inadmissible points are kept
/// with `feasible = false`.
pub fn z_contour(a_du: &[f64], e: &[f64], du_km: f64, lp: &LaunchParams) -> Vec<ZContourRow> {
    let mut rows = Vec::with_capacity(a_du.len() * e.len());
    for &a in a_du {
        for &ecc in e {
            let row = match mass_ratio(a * du_km, ecc, lp) {
                Ok(r) => ZContourRow { a_du: a, e: ecc, z: Some(r.z), z_d: Some(r.z_d), feasible: true },
                Err(_) => ZContourRow { a_du: a, e: ecc, z: None, z_d: None, feasible: false },
            };
            rows.push(row);
        }
    }
    rows
}

pub fn write_z_contour_csv<W: std::io::Write>(out: W, rows: &[ZContourRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["a_du", "e", "z", "z_d", "feasible"])?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        wtr.write_record([r.a_du.to_string(), r.e.to_string(), opt(r.z), opt(r.z_d), r.feasible.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::MU_EARTH_KM3_S2;

    fn gps_lp() -> LaunchParams {
        LaunchParams { r0_km: 6578.0, isp_l_s: 457.0, isp_d_s: 320.0, m_l_max_kg: 12_950.0, mu_km3_s2: MU_EARTH_KM3_S2 }
    }

    #[test]
    fn parking_orbit_slot_is_free() {
        let d = hohmann_dvs(6578.0, 6578.0, 0.0, MU_EARTH_KM3_S2).unwrap();
        for v in [d.dv_p1, d.dv_p2, d.dv_a1, d.dv_a2] {
            assert!(v.abs() < 1e-12);
        }
        let z = mass_ratio(6578.0, 0.0, &gps_lp()).unwrap();
        assert!((z.z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gps_altitude_burns() {
        let d = hohmann_dvs(6578.0, 26560.0, 0.0, MU_EARTH_KM3_S2).unwrap();
        assert!((d.dv_p1 - 2.071).abs() < 5e-4, "{}", d.dv_p1);
        assert!((d.dv_p2 - 1.433).abs() < 5e-4, "{}", d.dv_p2);
        let z = mass_ratio(26560.0, 0.0, &gps_lp()).unwrap();
        assert!((z.z - 2.51).abs() < 5e-3, "{}", z.z);
        assert!((emleo(1000.0, &z) - 2506.0).abs() < 5.0);
    }

    #[test]
    fn eccentricity_trend_between_branches() {
        let mut prev: Option<HohmannDvs> = None;
        for step in 0..6 {
            let e = 0.05 * step as f64;
            let d = hohmann_dvs(6578.0, 26560.0, e, MU_EARTH_KM3_S2).unwrap();
            if let Some(p) = prev {
                assert!(d.dv_p2 > p.dv_p2);
                assert!(d.dv_a2 < p.dv_a2);
            }
            prev = Some(d);
        }
    }

    #[test]
    fn low_perigee_rejected() {
        let err = mass_ratio(8000.0, 0.5, &gps_lp()).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { .. }));
    }

    #[test]
    fn z_grows_with_altitude() {
        let lp = gps_lp();
        let mut last = 0.0;
        for n in 0..40 {
            let a = 6578.0 + 1000.0 * n as f64;
            let z = mass_ratio(a, 0.0, &lp).unwrap();
            assert!(z.z >= last);
            assert!(z.z >= 1.0 && z.z_d >= 1.0 && z.z_l >= 1.0);
            assert!((z.z - z.z_d * z.z_l).abs() < 1e-12);
            last = z.z;
        }
    }

    #[test]
    fn emleo_linear() {
        let z = mass_ratio(20000.0, 0.1, &gps_lp()).unwrap();
        assert_eq!(emleo(2000.0, &z), 2.0 * emleo(1000.0, &z));
        let unit = MassRatios { z: 1.0, z_d: 1.0, z_l: 1.0, branch: InsertionBranch::PerigeeBurn };
        assert_eq!(emleo(1000.0, &unit), 1000.0);
    }
}
