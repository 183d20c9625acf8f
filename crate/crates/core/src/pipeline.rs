//! End-to-end helpers shared by the command line and the Python bindings:
//! scenario → slots and mass ratios → cost matrix → facility location → refinement.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{CostCache, CostMatrix, CostRequest};
use crate::elements::{KeplerianElements, Satellite};
use crate::error::{Error, Result};
use crate::launch::{slot_mass_ratio, MassRatios};
use crate::oflp::{build_model, solve_with, Multipliers, OflpModel, OflpSolution, SolveStatus};
use crate::refine::{refine, RefineBounds, RefineContext, RefineProblem, RefineReport};
use crate::scenario::Scenario;
use crate::slots::{generate_slots, Slot};

/// A scenario with clients, slots and mass ratios loaded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub scenario_hash: String,
    pub satellites: Vec<Satellite>,
    /// Client elements with `a` in DU.
    pub clients: Vec<KeplerianElements>,
    pub slots: Vec<Slot>,
    /// `None` for slots below the parking orbit.
    pub ratios: Vec<Option<MassRatios>>,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    let units = scenario.unit_system()?;
    let satellites = scenario.clients()?;
    if satellites.is_empty() {
        return Err(Error::InvalidParameter("scenario has no clients".into()));
    }
    let clients = satellites.iter().map(|s| units.kep_km_to_du(&s.elements_km)).collect();
    let slots = generate_slots(&scenario.grid)?;
    let lp = scenario.launch_params();
    let ratios = slots.iter().map(|s| slot_mass_ratio(&s.elements, units.du_km, &lp)).collect();
    Ok(Prepared {
        scenario_hash: scenario.scenario_hash()?,
        scenario: scenario.clone(),
        satellites,
        clients,
        slots,
        ratios,
    })
}

impl Prepared {
    pub fn cost_request(&self) -> Result<CostRequest> {
        let s = &self.scenario;
        let mut req = CostRequest::new(
            self.clients.clone(),
            self.slots.clone(),
            s.servicer,
            s.qlaw_params()?,
            s.unit_system()?,
        );
        req.admissible = self.ratios.iter().map(Option::is_some).collect();
        req.fixed_point = s.fixed_point();
        Ok(req)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.scenario.output_dir.clone()
    }

    pub fn cache(&self) -> CostCache {
        CostCache::new(self.output_dir().join("cache"))
    }

    /// Cost matrix through the cache; the flag is `true` on a cache hit.
    pub fn cost_matrix(&self, workers: usize) -> Result<(CostMatrix, bool)> {
        self.cache().get_or_build(&self.cost_request()?, workers)
    }

    pub fn model(&self, cost: &CostMatrix, multipliers: Multipliers) -> Result<OflpModel> {
        build_model(
            cost,
            &self.ratios,
            &self.scenario.architecture(self.clients.len()),
            self.scenario.launch.m_l_max_kg,
            multipliers,
        )
    }

    pub fn solve(&self, model: &OflpModel) -> OflpSolution {
        solve_with(model, &self.scenario.solve_options())
    }

    /// Names clients listed in an unservable-client error.
    pub fn describe_error(&self, err: &Error) -> String {
        match err {
            Error::UnservableClients(idx) => {
                let names: Vec<&str> = idx.iter().map(|&i| self.satellites[i].sat_id.as_str()).collect();
                format!("no feasible slot for client(s): {}", names.join(", "))
            }
            other => other.to_string(),
        }
    }

    pub fn solution_document(&self, cost: &CostMatrix, solution: &OflpSolution) -> SolutionDocument {
        let facilities = solution
            .wet_mass
            .iter()
            .map(|&(j, wet)| {
                let k = &self.slots[j].elements;
                let clients = solution.clients_of(j);
                FacilityRecord {
                    slot_idx: j,
                    a_du: k.a,
                    e: k.e,
                    i_deg: k.i.to_degrees(),
                    raan_deg: k.raan.to_degrees(),
                    argp_deg: k.argp.to_degrees(),
                    wet_mass_kg: wet,
                    n_clients: clients.len(),
                    sat_ids: clients.iter().map(|&i| self.satellites[i].sat_id.clone()).collect(),
                    client_idx: clients,
                }
            })
            .collect();
        let assignment = solution
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| Assignment { client_idx: i, sat_id: self.satellites[i].sat_id.clone(), slot_idx: j })
            .collect();
        SolutionDocument {
            scenario: self.scenario.name.clone(),
            scenario_hash: self.scenario_hash.clone(),
            cost_hash: cost.scenario_hash.clone(),
            status: solution.status,
            objective_kg: solution.objective,
            bound_kg: solution.bound,
            gap: solution.gap,
            nodes: solution.nodes,
            wall_time_s: solution.wall_time_s,
            multipliers: self.scenario.multipliers,
            multiplier_note: MULTIPLIER_NOTE.to_string(),
            n_facilities: solution.open_slots.len(),
            facilities,
            assignment,
        }
    }

    /// Refines every facility of a solution with its allocation held fixed.
    pub fn refine_solution(&self, doc: &SolutionDocument, seed: u64, workers: usize) -> Result<Vec<FacilityRefinement>> {
        if doc.scenario_hash != self.scenario_hash {
            return Err(Error::InvalidParameter(format!(
                "solution belongs to scenario {} but this scenario hashes to {}",
                doc.scenario_hash, self.scenario_hash
            )));
        }
        let s = &self.scenario;
        let ctx = RefineContext {
            clients: self.clients.clone(),
            servicer: s.servicer,
            qlaw: s.qlaw_params()?,
            units: s.unit_system()?,
            launch: s.launch_params(),
            arch: s.architecture(self.clients.len()),
            multipliers: s.multipliers,
            fixed_point: s.fixed_point(),
        };
        let bounds = RefineBounds::from_grid(&s.grid)?;
        let mut de = s.refine;
        de.seed = seed;
        doc.facilities
            .iter()
            .map(|f| {
                let slot = self
                    .slots
                    .get(f.slot_idx)
                    .ok_or_else(|| Error::InvalidParameter(format!("slot {} not in grid", f.slot_idx)))?;
                let prob =
                    RefineProblem { allocation: f.client_idx.clone(), bounds, de, slot: slot.elements };
                let report = refine(&prob, &ctx, workers)?;
                Ok(FacilityRefinement { slot_idx: f.slot_idx, report })
            })
            .collect()
    }
}

pub const MULTIPLIER_NOTE: &str =
    "lambda scales facility cost m_d_dry*Z; rho scales allocation cost D*(ctilde+m_s_L)*Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityRecord {
    pub slot_idx: usize,
    pub a_du: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub wet_mass_kg: f64,
    pub n_clients: usize,
    pub client_idx: Vec<usize>,
    pub sat_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub client_idx: usize,
    pub sat_id: String,
    pub slot_idx: usize,
}

/// Solution file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub scenario: String,
    pub scenario_hash: String,
    pub cost_hash: String,
    pub status: SolveStatus,
    pub objective_kg: f64,
    pub bound_kg: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time_s: f64,
    pub multipliers: Multipliers,
    pub multiplier_note: String,
    pub n_facilities: usize,
    pub facilities: Vec<FacilityRecord>,
    pub assignment: Vec<Assignment>,
}

impl SolutionDocument {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacilityRefinement {
    pub slot_idx: usize,
    pub report: RefineReport,
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(rename = "D")]
    pub demand: f64,
    pub m_s_dry: f64,
    pub m_d_dry: f64,
    pub lambda: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub status: String,
    pub objective_kg: Option<f64>,
    pub n_facilities: Option<usize>,
}

pub const SWEEP_AXES: [&str; 5] = ["D", "m_s_dry", "m_d_dry", "lambda", "rho"];

/// Cartesian product of the sweep lists named in `over` (others stay at the
/// scenario value), in the order `D, m_s_dry, m_d_dry, lambda, rho`.
pub fn sweep_points(scenario: &Scenario, over: &[String]) -> Result<Vec<SweepPoint>> {
    for name in over {
        if !SWEEP_AXES.contains(&name.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unknown sweep axis `{name}` (expected one of {})",
                SWEEP_AXES.join(", ")
            )));
        }
    }
    let sw = &scenario.sweep;
    let axis = |name: &str, list: &Vec<f64>, base: f64| -> Result<Vec<f64>> {
        if !over.iter().any(|o| o == name) {
            return Ok(vec![base]);
        }
        if list.is_empty() {
            return Err(Error::InvalidParameter(format!("scenario has no [sweep] values for `{name}`")));
        }
        Ok(list.clone())
    };
    let d = axis("D", &sw.demand, scenario.demand)?;
    let ms = axis("m_s_dry", &sw.m_s_dry, scenario.servicer.dry_kg)?;
    let md = axis("m_d_dry", &sw.m_d_dry, scenario.depot.dry_kg)?;
    let la = axis("lambda", &sw.lambda, scenario.multipliers.lambda)?;
    let rh = axis("rho", &sw.rho, scenario.multipliers.rho)?;
    let mut out = Vec::new();
    for &demand in &d {
        for &m_s_dry in &ms {
            for &m_d_dry in &md {
                for &lambda in &la {
                    for &rho in &rh {
                        out.push(SweepPoint { demand, m_s_dry, m_d_dry, lambda, rho });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Solves every sweep point. Cost matrices are shared between points with the
/// same servicer mass and come from the cache when available.
pub fn run_sweep(scenario: &Scenario, over: &[String], workers: usize) -> Result<Vec<SweepRow>> {
    let points = sweep_points(scenario, over)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut current: Option<(f64, Prepared, CostMatrix)> = None;
    for p in points {
        let mut scn = scenario.clone();
        scn.demand = p.demand;
        scn.servicer.dry_kg = p.m_s_dry;
        scn.depot.dry_kg = p.m_d_dry;
        scn.multipliers = Multipliers { lambda: p.lambda, rho: p.rho };
        if current.as_ref().is_none_or(|(m, _, _)| *m != p.m_s_dry) {
            let prep = prepare(&scn)?;
            let (cost, _) = prep.cost_matrix(workers)?;
            current = Some((p.m_s_dry, prep, cost));
        }
        let (_, prep, cost) = current.as_mut().expect("set above");
        prep.scenario = scn;
        let row = match prep.model(cost, p_multipliers(&p)) {
            Ok(model) => {
                let sol = prep.solve(&model);
                let solved = sol.status != SolveStatus::Infeasible;
                SweepRow {
                    point: p,
                    status: format!("{:?}", sol.status).to_lowercase(),
                    objective_kg: solved.then_some(sol.objective),
                    n_facilities: solved.then_some(sol.open_slots.len()),
                }
            }
            Err(Error::UnservableClients(_)) => {
                SweepRow { point: p, status: "infeasible".into(), objective_kg: None, n_facilities: None }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn p_multipliers(p: &SweepPoint) -> Multipliers {
    Multipliers { lambda: p.lambda, rho: p.rho }
}

pub fn write_sweep_csv<W: std::io::Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["D", "m_s_dry", "m_d_dry", "lambda", "rho", "status", "objective_kg", "n_facilities"])?;
    for r in rows {
        let p = r.point;
        wtr.write_record([
            p.demand.to_string(),
            p.m_s_dry.to_string(),
            p.m_d_dry.to_string(),
            p.lambda.to_string(),
            p.rho.to_string(),
            r.status.clone(),
            r.objective_kg.map(|v| v.to_string()).unwrap_or_default(),
            r.n_facilities.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
