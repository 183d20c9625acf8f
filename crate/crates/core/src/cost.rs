//! Allocation cost matrix: round-trip servicer propellant between every client
//! and every candidate slot.
//!
//! A round trip is outbound (slot → client, carrying the payload) followed by
//! inbound (client → slot, empty). The servicer must return at its dry mass, so
//! the inbound leg is sized first and the outbound leg is sized on top of it.
//! Each leg is a fixed point on the leg propellant: the propellant that a
//! transfer starting at `base + Δm` consumes must equal `Δm`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elements::{KeplerianElements, UnitSystem};
use crate::error::{Error, Result};
use crate::qlaw::{propagate_transfer, QlawParams, Spacecraft};
use crate::slots::Slot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServicerParams {
    pub thrust_n: f64,
    pub isp_s: f64,
    pub dry_kg: f64,
    pub payload_kg: f64,
}

impl ServicerParams {
    pub fn mdot_kg_s(&self) -> f64 {
        self.spacecraft(self.dry_kg).mdot_kg_s()
    }

    fn spacecraft(&self, mass_kg: f64) -> Spacecraft {
        Spacecraft { thrust_n: self.thrust_n, isp_s: self.isp_s, mass_kg }
    }
}

/// Fixed-point settings for sizing each leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSettings {
    pub tol_kg: f64,
    pub max_iter: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { tol_kg: 0.1, max_iter: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTripCost {
    /// Outbound plus inbound propellant, kg.
    pub dm_total: f64,
    pub dm_out: f64,
    pub dm_in: f64,
    pub tof_out_days: f64,
    pub tof_in_days: f64,
    pub feasible: bool,
}

impl RoundTripCost {
    pub fn infeasible() -> Self {
        Self {
            dm_total: f64::NAN,
            dm_out: f64::NAN,
            dm_in: f64::NAN,
            tof_out_days: f64::NAN,
            tof_in_days: f64::NAN,
            feasible: false,
        }
    }
}

/// Converged leg: propellant consumed and time of flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub dm_kg: f64,
    pub tof_days: f64,
    /// Start mass the leg was solved at, kg.
    pub start_mass_kg: f64,
    /// Propellant allowance above the base mass at which it was solved, kg.
    pub offset_kg: f64,
}

/// Solves one leg; `None` when the transfer times out, fails, or the fixed
/// point does not settle.
///
/// The fixed point `Δm = g(base + Δm)` is found as a root of
/// `h(Δm) = g(base + Δm) - Δm`. The first step assumes ΔV does not depend on
/// mass; later steps are secant steps, falling back to false position once a
/// sign change is bracketed. Plain substitution alone oscillates wherever the
/// propellant falls with start mass faster than one kilogram per kilogram,
/// which the Q-law does for some geometries.
pub fn solve_leg(
    from: &KeplerianElements,
    to: &KeplerianElements,
    base_mass_kg: f64,
    servicer: &ServicerParams,
    qlaw: &QlawParams,
    units: &UnitSystem,
    fp: &FixedPointSettings,
) -> Option<Leg> {
    solve_leg_from(from, to, base_mass_kg, 0.0, servicer, qlaw, units, fp)
}

/// [`solve_leg`] with the search started at propellant guess `x0`.
#[allow(clippy::too_many_arguments)]
pub fn solve_leg_from(
    from: &KeplerianElements,
    to: &KeplerianElements,
    base_mass_kg: f64,
    x0: f64,
    servicer: &ServicerParams,
    qlaw: &QlawParams,
    units: &UnitSystem,
    fp: &FixedPointSettings,
) -> Option<Leg> {
    let eval = |x: f64| -> Option<(f64, f64)> {
        let sc = servicer.spacecraft(base_mass_kg + x);
        let res = propagate_transfer(from, to, &sc, qlaw, units).ok()?;
        res.converged.then_some((res.dm_kg, res.tof_days))
    };
    let mut x = x0.max(0.0);
    let mut prev: Option<(f64, f64)> = None;
    // Closest points with h > 0 and h < 0.
    let mut above: Option<(f64, f64)> = None;
    let mut below: Option<(f64, f64)> = None;
    for _ in 0..fp.max_iter {
        let (dm, tof) = eval(x)?;
        let h = dm - x;
        if h.abs() < fp.tol_kg {
            return Some(Leg { dm_kg: dm, tof_days: tof, start_mass_kg: base_mass_kg + x, offset_kg: x });
        }
        if h > 0.0 {
            if above.is_none_or(|(ax, _)| x > ax) {
                above = Some((x, h));
            }
        } else if below.is_none_or(|(bx, _)| x < bx) {
            below = Some((x, h));
        }
        let mut next = match prev {
            Some((px, ph)) if ph != h => x - h * (x - px) / (h - ph),
            _ => rocket_scaled(dm, base_mass_kg + x, base_mass_kg),
        };
        if let (Some((ax, ah)), Some((bx, bh))) = (above, below) {
            let (l, u) = (ax.min(bx), ax.max(bx));
            if !(next > l && next < u) {
                next = ax - ah * (bx - ax) / (bh - ah);
            }
        }
        if !next.is_finite() || next < 0.0 {
            next = rocket_scaled(dm, base_mass_kg + x, base_mass_kg);
        }
        prev = Some((x, h));
        x = next;
    }
    None
}

/// Fixed point under a mass-independent ΔV: propellant then scales with start
/// mass, `dm = k (base + x)`, so `x = base k / (1 - k)`.
fn rocket_scaled(dm: f64, start_mass: f64, base: f64) -> f64 {
    let k = dm / start_mass;
    if k < 1.0 {
        base * k / (1.0 - k)
    } else {
        dm
    }
}

/// Round-trip propellant between a slot and a client (`a` in DU for both).
pub fn round_trip_cost(
    client: &KeplerianElements,
    slot: &KeplerianElements,
    servicer: &ServicerParams,
    qlaw: &QlawParams,
    units: &UnitSystem,
    fp: &FixedPointSettings,
) -> RoundTripCost {
    match round_trip_legs(client, slot, servicer, qlaw, units, fp, LegGuess::default()) {
        Some((outbound, inbound)) => RoundTripCost {
            dm_total: outbound.dm_kg + inbound.dm_kg,
            dm_out: outbound.dm_kg,
            dm_in: inbound.dm_kg,
            tof_out_days: outbound.tof_days,
            tof_in_days: inbound.tof_days,
            feasible: true,
        },
        None => RoundTripCost::infeasible(),
    }
}

/// Starting propellant guesses for the two legs of a round trip.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LegGuess {
    pub outbound_kg: f64,
    pub inbound_kg: f64,
}

/// `(outbound, inbound)` legs of a round trip, or `None` if either fails.
pub fn round_trip_legs(
    client: &KeplerianElements,
    slot: &KeplerianElements,
    servicer: &ServicerParams,
    qlaw: &QlawParams,
    units: &UnitSystem,
    fp: &FixedPointSettings,
    guess: LegGuess,
) -> Option<(Leg, Leg)> {
    let inbound = solve_leg_from(client, slot, servicer.dry_kg, guess.inbound_kg, servicer, qlaw, units, fp)?;
    let out_base = servicer.dry_kg + inbound.dm_kg + servicer.payload_kg;
    let outbound = solve_leg_from(slot, client, out_base, guess.outbound_kg, servicer, qlaw, units, fp)?;
    Some((outbound, inbound))
}

impl LegGuess {
    /// Guesses that reproduce a solved round trip exactly.
    pub fn from_legs(outbound: &Leg, inbound: &Leg) -> Self {
        Self { outbound_kg: outbound.offset_kg, inbound_kg: inbound.offset_kg }
    }
}

/// Everything the matrix depends on; its serialization is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRequest {
    /// Client elements, `a` in DU.
    pub clients: Vec<KeplerianElements>,
    pub slots: Vec<Slot>,
    /// Slots flagged `false` are not evaluated and come back infeasible.
    pub admissible: Vec<bool>,
    pub servicer: ServicerParams,
    pub qlaw: QlawParams,
    pub units: UnitSystem,
    pub fixed_point: FixedPointSettings,
}

impl CostRequest {
    pub fn new(
        clients: Vec<KeplerianElements>,
        slots: Vec<Slot>,
        servicer: ServicerParams,
        qlaw: QlawParams,
        units: UnitSystem,
    ) -> Self {
        let admissible = vec![true; slots.len()];
        Self { clients, slots, admissible, servicer, qlaw, units, fixed_point: FixedPointSettings::default() }
    }

    pub fn content_hash(&self) -> String {
        hash_json(&(COST_MODEL_VERSION, self))
    }
}

/// Bumped whenever the propagation or fixed-point procedure changes, so that
/// cached matrices from older builds are not reused.
pub const COST_MODEL_VERSION: u32 = 4;

/// SHA-256 of the canonical (key-sorted) JSON form of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable input");
    let mut hasher = Sha256::new();
    hasher.update(v.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub n_clients: usize,
    pub n_slots: usize,
    /// Client-major: entry `(i, j)` at `i * n_slots + j`.
    pub entries: Vec<RoundTripCost>,
    pub scenario_hash: String,
}

impl CostMatrix {
    pub fn get(&self, client: usize, slot: usize) -> &RoundTripCost {
        &self.entries[client * self.n_slots + slot]
    }

    pub fn feasible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.feasible).count()
    }

    /// `client_idx,slot_idx,ctilde_kg,tof_out_days,tof_in_days,feasible`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["client_idx", "slot_idx", "ctilde_kg", "tof_out_days", "tof_in_days", "feasible"])?;
        for i in 0..self.n_clients {
            for j in 0..self.n_slots {
                let e = self.get(i, j);
                let num = |v: f64| if e.feasible { v.to_string() } else { String::new() };
                wtr.write_record([
                    i.to_string(),
                    j.to_string(),
                    num(e.dm_total),
                    num(e.tof_out_days),
                    num(e.tof_in_days),
                    e.feasible.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV form back. Leg propellants are rebuilt from the times of
    /// flight with the servicer mass flow.
    pub fn read_csv<R: std::io::Read>(
        input: R,
        n_clients: usize,
        n_slots: usize,
        mdot_kg_s: f64,
        scenario_hash: String,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            client_idx: usize,
            slot_idx: usize,
            ctilde_kg: Option<f64>,
            tof_out_days: Option<f64>,
            tof_in_days: Option<f64>,
            feasible: bool,
        }
        let mut entries = vec![None; n_clients * n_slots];
        let mut rdr = csv::Reader::from_reader(input);
        for row in rdr.deserialize() {
            let r: Row = row?;
            if r.client_idx >= n_clients || r.slot_idx >= n_slots {
                return Err(Error::Other(format!("cost row ({}, {}) out of range", r.client_idx, r.slot_idx)));
            }
            let entry = if r.feasible {
                let missing = || Error::Other(format!("feasible row ({}, {}) missing values", r.client_idx, r.slot_idx));
                let total = r.ctilde_kg.ok_or_else(missing)?;
                let tof_out = r.tof_out_days.ok_or_else(missing)?;
                let tof_in = r.tof_in_days.ok_or_else(missing)?;
                RoundTripCost {
                    dm_total: total,
                    dm_out: mdot_kg_s * tof_out * 86_400.0,
                    dm_in: mdot_kg_s * tof_in * 86_400.0,
                    tof_out_days: tof_out,
                    tof_in_days: tof_in,
                    feasible: true,
                }
            } else {
                RoundTripCost::infeasible()
            };
            entries[r.client_idx * n_slots + r.slot_idx] = Some(entry);
        }
        let entries = entries
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Other("cost file is missing entries".into()))?;
        Ok(Self { n_clients, n_slots, entries, scenario_hash })
    }
}

/// Evaluates every client × slot pair on `workers` threads. Output order and
/// values do not depend on the worker count.
pub fn build_cost_matrix(req: &CostRequest, workers: usize) -> Result<CostMatrix> {
    if req.clients.is_empty() || req.slots.is_empty() {
        return Err(Error::InvalidParameter("cost matrix needs at least one client and one slot".into()));
    }
    if req.admissible.len() != req.slots.len() {
        return Err(Error::InvalidParameter("admissibility mask does not match the slot list".into()));
    }
    req.qlaw.validate()?;
    let n_slots = req.slots.len();
    let pairs: Vec<(usize, usize)> =
        (0..req.clients.len()).flat_map(|i| (0..n_slots).map(move |j| (i, j))).collect();
    let eval = |&(i, j): &(usize, usize)| {
        if !req.admissible[j] {
            return RoundTripCost::infeasible();
        }
        round_trip_cost(
            &req.clients[i],
            &req.slots[j].elements,
            &req.servicer,
            &req.qlaw,
            &req.units,
            &req.fixed_point,
        )
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Other(format!("thread pool: {e}")))?;
    let entries: Vec<RoundTripCost> = pool.install(|| pairs.par_iter().map(eval).collect());
    Ok(CostMatrix { n_clients: req.clients.len(), n_slots, entries, scenario_hash: req.content_hash() })
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    scenario_hash: String,
    n_clients: usize,
    n_slots: usize,
    servicer: ServicerParams,
    qlaw: QlawParams,
    units: UnitSystem,
    fixed_point: FixedPointSettings,
}

/// One CSV + JSON sidecar per input hash inside a directory.
#[derive(Debug, Clone)]
pub struct CostCache {
    dir: PathBuf,
}

impl CostCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn csv_path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("costmatrix_{hash}.csv"))
    }

    pub fn sidecar_path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("costmatrix_{hash}.json"))
    }

    /// Returns the cached matrix, or `None` when absent or unreadable.
    pub fn load(&self, req: &CostRequest) -> Option<CostMatrix> {
        let hash = req.content_hash();
        let (csv_path, side_path) = (self.csv_path(&hash), self.sidecar_path(&hash));
        if !csv_path.exists() || !side_path.exists() {
            return None;
        }
        let attempt = || -> Result<CostMatrix> {
            let side: Sidecar = serde_json::from_str(&fs::read_to_string(&side_path)?)?;
            if side.scenario_hash != hash || side.n_clients != req.clients.len() || side.n_slots != req.slots.len() {
                return Err(Error::Other("sidecar does not match the request".into()));
            }
            CostMatrix::read_csv(
                fs::File::open(&csv_path)?,
                side.n_clients,
                side.n_slots,
                req.servicer.mdot_kg_s(),
                hash.clone(),
            )
        };
        match attempt() {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("cost cache {} unreadable ({e}); recomputing", csv_path.display());
                None
            }
        }
    }

    pub fn store(&self, req: &CostRequest, matrix: &CostMatrix) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.csv_path(&matrix.scenario_hash);
        matrix.write_csv(fs::File::create(&path)?)?;
        let side = Sidecar {
            scenario_hash: matrix.scenario_hash.clone(),
            n_clients: matrix.n_clients,
            n_slots: matrix.n_slots,
            servicer: req.servicer,
            qlaw: req.qlaw,
            units: req.units,
            fixed_point: req.fixed_point,
        };
        fs::write(self.sidecar_path(&matrix.scenario_hash), serde_json::to_string_pretty(&side)? + "\n")?;
        Ok(path)
    }

    /// Cache lookup, falling back to computing and storing the matrix.
    /// The boolean is `true` on a cache hit.
    pub fn get_or_build(&self, req: &CostRequest, workers: usize) -> Result<(CostMatrix, bool)> {
        if let Some(m) = self.load(req) {
            info!("cache hit {}", m.scenario_hash);
            return Ok((m, true));
        }
        let m = build_cost_matrix(req, workers)?;
        self.store(req, &m)?;
        info!("cache store {}", m.scenario_hash);
        Ok((m, false))
    }
}

pub fn cache_dir_for(output: &Path) -> PathBuf {
    output.join("cache")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn servicer() -> ServicerParams {
        ServicerParams { thrust_n: 1.74, isp_s: 1790.0, dry_kg: 500.0, payload_kg: 100.0 }
    }

    #[test]
    fn same_orbit_costs_nothing() {
        let units = UnitSystem::earth(26560.0);
        let k = KeplerianElements::from_degrees(1.0, 0.01, 55.0, 20.0, 0.0, 0.0).unwrap();
        let c = round_trip_cost(&k, &k, &servicer(), &QlawParams::default(), &units, &FixedPointSettings::default());
        assert!(c.feasible);
        assert_eq!((c.dm_out, c.dm_in, c.dm_total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn leg_propellant_matches_mass_flow() {
        let units = UnitSystem::earth(26560.0);
        let slot = KeplerianElements::from_degrees(0.95, 0.0, 55.0, 20.0, 0.0, 0.0).unwrap();
        let client = KeplerianElements::from_degrees(1.0, 0.0, 55.0, 20.0, 0.0, 0.0).unwrap();
        let c = round_trip_cost(&client, &slot, &servicer(), &QlawParams::default(), &units, &FixedPointSettings::default());
        assert!(c.feasible);
        assert_eq!(c.dm_total, c.dm_out + c.dm_in);
        let mdot = servicer().mdot_kg_s();
        assert!((c.dm_out - mdot * c.tof_out_days * 86_400.0).abs() / c.dm_out < 1e-3);
        assert!((c.dm_in - mdot * c.tof_in_days * 86_400.0).abs() / c.dm_in < 1e-3);
    }

    #[test]
    fn solved_leg_reproduces_on_resimulation() {
        use crate::qlaw::propagate_transfer;
        let units = UnitSystem::earth(26560.0);
        let fp = FixedPointSettings::default();
        let q = QlawParams::default();
        let from = KeplerianElements::from_degrees(1.0, 0.0, 55.0, 20.0, 0.0, 0.0).unwrap();
        let to = KeplerianElements::from_degrees(0.9, 0.05, 53.0, 25.0, 0.0, 0.0).unwrap();
        let s = servicer();
        let leg = solve_leg(&from, &to, s.dry_kg, &s, &q, &units, &fp).unwrap();
        assert!((leg.start_mass_kg - s.dry_kg - leg.dm_kg).abs() < fp.tol_kg);
        let again = propagate_transfer(&from, &to, &s.spacecraft(leg.start_mass_kg), &q, &units).unwrap();
        assert!((again.dm_kg - leg.dm_kg).abs() < fp.tol_kg);
    }

    #[test]
    fn timeout_marks_infeasible() {
        let units = UnitSystem::earth(26560.0);
        let mut q = QlawParams::default();
        q.max_tof_days = 0.5;
        let slot = KeplerianElements::from_degrees(0.5, 0.4, 50.0, 0.0, 0.0, 0.0).unwrap();
        let client = KeplerianElements::from_degrees(1.0, 0.0, 55.0, 180.0, 0.0, 0.0).unwrap();
        let c = round_trip_cost(&client, &slot, &servicer(), &q, &units, &FixedPointSettings::default());
        assert!(!c.feasible);
    }

    #[test]
    fn hash_ignores_nothing_that_matters() {
        let units = UnitSystem::earth(26560.0);
        let k = KeplerianElements::from_degrees(1.0, 0.0, 55.0, 0.0, 0.0, 0.0).unwrap();
        let slots = vec![Slot { idx: 0, elements: k }];
        let a = CostRequest::new(vec![k], slots.clone(), servicer(), QlawParams::default(), units);
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.qlaw.dt_frac = 0.02;
        assert_ne!(a.content_hash(), b.content_hash());
        let mut c = a.clone();
        c.servicer.dry_kg = 1000.0;
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
