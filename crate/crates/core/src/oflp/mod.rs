//! Orbital facility location: a binary program choosing which slots to open
//! (`Y`) and which open slot serves each client (`X`), minimizing total EMLEO
//! under a per-depot launch-mass limit.
//!
//! Each client is served by exactly one open slot and `X_ij ≤ Y_j` for every
//! pair. How many clients one depot can host is limited only by its wet mass.

mod brute;
pub mod lp;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::launch::MassRatios;
use lp::{solve_lp, Cmp, LinearProgram, LpStatus};

pub use brute::brute_force;

/// Depot and servicer masses that enter the program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub m_d_dry_kg: f64,
    /// Payload delivered per trip, kg.
    pub m_s_payload_kg: f64,
    /// Trips per client over the depot lifetime.
    pub demand: Vec<f64>,
}

/// Scalar weights on facility cost (`lambda`) and allocation cost (`rho`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Multipliers {
    pub lambda: f64,
    pub rho: f64,
}

impl Default for Multipliers {
    fn default() -> Self {
        Self { lambda: 1.0, rho: 1.0 }
    }
}

/// Objective and wet-mass coefficient of one allowed pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocTerm {
    pub cost: f64,
    pub wet: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OflpModel {
    /// Slot count.
    pub n: usize,
    /// Client count.
    pub k: usize,
    pub facility_cost: Vec<f64>,
    pub facility_wet: Vec<f64>,
    /// Client-major `k × n`; `None` marks a frozen pair.
    pub alloc: Vec<Option<AllocTerm>>,
    pub m_l_max: f64,
    /// Slots that may be opened at all.
    pub available: Vec<bool>,
}

impl OflpModel {
    /// Builds a model from raw coefficients, freezing pairs that can never fit
    /// under `m_l_max` and closing slots whose empty depot already exceeds it.
    pub fn from_parts(
        facility_cost: Vec<f64>,
        facility_wet: Vec<f64>,
        alloc: Vec<Option<AllocTerm>>,
        m_l_max: f64,
    ) -> Result<Self> {
        let n = facility_cost.len();
        if n == 0 || facility_wet.len() != n || alloc.len() % n != 0 {
            return Err(Error::InvalidParameter("inconsistent model dimensions".into()));
        }
        let k = alloc.len() / n;
        let all_terms = facility_cost.iter().chain(&facility_wet).copied().chain(
            alloc.iter().flatten().flat_map(|t| [t.cost, t.wet]),
        );
        for v in all_terms {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("model coefficient {v} must be finite and ≥ 0")));
            }
        }
        let available: Vec<bool> = facility_wet.iter().map(|&w| w <= m_l_max).collect();
        let mut alloc = alloc;
        for i in 0..k {
            for j in 0..n {
                let slot = &mut alloc[i * n + j];
                if let Some(t) = slot {
                    if !available[j] || facility_wet[j] + t.wet > m_l_max {
                        *slot = None;
                    }
                }
            }
        }
        Ok(Self { n, k, facility_cost, facility_wet, alloc, m_l_max, available })
    }

    pub fn term(&self, client: usize, slot: usize) -> Option<&AllocTerm> {
        self.alloc[client * self.n + slot].as_ref()
    }

    /// Clients with no allowed pair.
    pub fn unservable_clients(&self) -> Vec<usize> {
        (0..self.k).filter(|&i| (0..self.n).all(|j| self.term(i, j).is_none())).collect()
    }

    pub fn variable_count(&self) -> usize {
        self.available.iter().filter(|&&a| a).count() + self.alloc.iter().filter(|t| t.is_some()).count()
    }

    /// Objective of an assignment with the open set taken as the used slots.
    /// Summation order is fixed so equal solutions give bit-equal values.
    pub fn objective_of(&self, assignment: &[usize]) -> Option<f64> {
        let open = used_slots(self.n, assignment);
        let mut total = 0.0;
        for &j in &open {
            total += self.facility_cost[j];
        }
        for (i, &j) in assignment.iter().enumerate() {
            total += self.term(i, j)?.cost;
        }
        Some(total)
    }

    /// Wet mass of every used slot, in slot order.
    pub fn wet_masses(&self, assignment: &[usize]) -> Vec<(usize, f64)> {
        used_slots(self.n, assignment)
            .into_iter()
            .map(|j| {
                let mut w = self.facility_wet[j];
                for (i, &s) in assignment.iter().enumerate() {
                    if s == j {
                        w += self.term(i, j).map_or(f64::NAN, |t| t.wet);
                    }
                }
                (j, w)
            })
            .collect()
    }

    /// Checks one-slot-per-client, allowed pairs and the wet-mass limit.
    pub fn is_feasible(&self, assignment: &[usize]) -> bool {
        assignment.len() == self.k
            && assignment.iter().enumerate().all(|(i, &j)| j < self.n && self.term(i, j).is_some())
            && self.wet_masses(assignment).iter().all(|&(_, w)| w <= self.m_l_max * (1.0 + 1e-12))
    }

    /// CPLEX LP text form of the model.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::from("\\ orbital facility location\nMinimize\n obj:");
        let mut terms = Vec::new();
        for j in (0..self.n).filter(|&j| self.available[j]) {
            terms.push(format!("{} y{j}", self.facility_cost[j]));
        }
        for i in 0..self.k {
            for j in 0..self.n {
                if let Some(t) = self.term(i, j) {
                    terms.push(format!("{} x{i}_{j}", t.cost));
                }
            }
        }
        push_terms(&mut s, &terms);
        s.push_str("Subject To\n");
        for i in 0..self.k {
            let t: Vec<String> =
                (0..self.n).filter(|&j| self.term(i, j).is_some()).map(|j| format!("1 x{i}_{j}")).collect();
            let _ = write!(s, " assign_{i}:");
            push_terms_no_nl(&mut s, &t);
            s.push_str(" = 1\n");
        }
        for i in 0..self.k {
            for j in 0..self.n {
                if self.term(i, j).is_some() {
                    let _ = writeln!(s, " link_{i}_{j}: x{i}_{j} - y{j} <= 0");
                }
            }
        }
        for j in (0..self.n).filter(|&j| self.available[j]) {
            let mut t = vec![format!("{} y{j}", self.facility_wet[j])];
            for i in 0..self.k {
                if let Some(a) = self.term(i, j) {
                    t.push(format!("{} x{i}_{j}", a.wet));
                }
            }
            let _ = write!(s, " wet_{j}:");
            push_terms_no_nl(&mut s, &t);
            let _ = writeln!(s, " <= {}", self.m_l_max);
        }
        s.push_str("Binary\n");
        let mut names: Vec<String> = (0..self.n).filter(|&j| self.available[j]).map(|j| format!("y{j}")).collect();
        for i in 0..self.k {
            for j in 0..self.n {
                if self.term(i, j).is_some() {
                    names.push(format!("x{i}_{j}"));
                }
            }
        }
        for chunk in names.chunks(10) {
            let _ = writeln!(s, " {}", chunk.join(" "));
        }
        s.push_str("End\n");
        s
    }
}

fn push_terms_no_nl(s: &mut String, terms: &[String]) {
    for (n, t) in terms.iter().enumerate() {
        if n > 0 && n % 6 == 0 {
            s.push_str("\n   ");
        }
        if n > 0 {
            s.push_str(" +");
        }
        s.push(' ');
        s.push_str(t);
    }
}

fn push_terms(s: &mut String, terms: &[String]) {
    push_terms_no_nl(s, terms);
    s.push('\n');
}

fn used_slots(n: usize, assignment: &[usize]) -> Vec<usize> {
    let mut used = vec![false; n];
    for &j in assignment {
        if j < n {
            used[j] = true;
        }
    }
    (0..n).filter(|&j| used[j]).collect()
}

/// Builds the program from the cost matrix and per-slot mass ratios
/// (`None` for slots that cannot be reached from the parking orbit).
pub fn build_model(
    cost: &CostMatrix,
    ratios: &[Option<MassRatios>],
    arch: &Architecture,
    m_l_max: f64,
    mult: Multipliers,
) -> Result<OflpModel> {
    if ratios.len() != cost.n_slots {
        return Err(Error::InvalidParameter(format!(
            "{} mass ratios for {} slots",
            ratios.len(),
            cost.n_slots
        )));
    }
    if arch.demand.len() != cost.n_clients {
        return Err(Error::InvalidParameter(format!(
            "{} demands for {} clients",
            arch.demand.len(),
            cost.n_clients
        )));
    }
    if !(mult.lambda >= 0.0 && mult.rho >= 0.0) {
        return Err(Error::InvalidParameter("multipliers must be non-negative".into()));
    }
    let (n, k) = (cost.n_slots, cost.n_clients);
    let mut facility_cost = vec![0.0; n];
    let mut facility_wet = vec![0.0; n];
    for (j, r) in ratios.iter().enumerate() {
        if let Some(r) = r {
            facility_cost[j] = mult.lambda * arch.m_d_dry_kg * r.z;
            facility_wet[j] = arch.m_d_dry_kg * r.z_d;
        }
    }
    let mut alloc = vec![None; k * n];
    for i in 0..k {
        for j in 0..n {
            let e = cost.get(i, j);
            if let (true, Some(r)) = (e.feasible, &ratios[j]) {
                let mass = arch.demand[i] * (e.dm_total + arch.m_s_payload_kg);
                alloc[i * n + j] = Some(AllocTerm { cost: mult.rho * mass * r.z, wet: mass * r.z_d });
            }
        }
    }
    let mut model = OflpModel::from_parts(facility_cost, facility_wet, alloc, m_l_max)?;
    for (j, r) in ratios.iter().enumerate() {
        if r.is_none() {
            model.available[j] = false;
        }
    }
    let bad = model.unservable_clients();
    if !bad.is_empty() {
        return Err(Error::UnservableClients(bad));
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Budget exhausted; the incumbent is returned with its gap.
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OflpSolution {
    pub status: SolveStatus,
    pub open_slots: Vec<usize>,
    /// Slot index serving each client.
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    /// `(slot, wet mass kg)` for every open slot.
    pub wet_mass: Vec<(usize, f64)>,
    pub nodes: usize,
    pub wall_time_s: f64,
}

impl OflpSolution {
    pub fn from_assignment(model: &OflpModel, assignment: Vec<usize>, status: SolveStatus) -> Self {
        let objective = model.objective_of(&assignment).unwrap_or(f64::NAN);
        Self {
            status,
            open_slots: used_slots(model.n, &assignment),
            wet_mass: model.wet_masses(&assignment),
            assignment,
            objective,
            bound: objective,
            gap: 0.0,
            nodes: 0,
            wall_time_s: 0.0,
        }
    }

    pub fn infeasible(nodes: usize, wall_time_s: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            open_slots: vec![],
            assignment: vec![],
            objective: f64::NAN,
            bound: f64::NAN,
            gap: f64::NAN,
            wet_mass: vec![],
            nodes,
            wall_time_s,
        }
    }

    /// Clients served by `slot`.
    pub fn clients_of(&self, slot: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &j)| j == slot).map(|(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { node_limit: 1_000_000, time_limit: None }
    }
}

const INT_TOL: f64 = 1e-6;
const PRUNE_REL: f64 = 1e-10;

#[derive(Clone)]
struct Node {
    y_fix: Vec<Option<bool>>,
    x_fix: Vec<Option<bool>>,
    bound: f64,
    id: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smaller bound first, then older node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

struct NodeLp {
    lp: LinearProgram,
    constant: f64,
    y_var: Vec<Option<usize>>,
    x_var: Vec<Option<usize>>,
    assigned: Vec<Option<usize>>,
}

fn node_lp(model: &OflpModel, node: &Node) -> Option<NodeLp> {
    let (n, k) = (model.n, model.k);
    let mut assigned = vec![None; k];
    for i in 0..k {
        for j in 0..n {
            if node.x_fix[i * n + j] == Some(true) {
                assigned[i] = Some(j);
            }
        }
    }
    let open_fixed = |j: usize| node.y_fix[j] == Some(true);
    let closed = |j: usize| !model.available[j] || node.y_fix[j] == Some(false);

    let mut cost = Vec::new();
    let mut y_var = vec![None; n];
    for j in 0..n {
        if !closed(j) && !open_fixed(j) {
            y_var[j] = Some(cost.len());
            cost.push(model.facility_cost[j]);
        }
    }
    let mut x_var = vec![None; k * n];
    for i in 0..k {
        if assigned[i].is_some() {
            continue;
        }
        for j in 0..n {
            if let Some(t) = model.term(i, j) {
                if !closed(j) && node.x_fix[i * n + j] != Some(false) {
                    x_var[i * n + j] = Some(cost.len());
                    cost.push(t.cost);
                }
            }
        }
    }
    let mut constant = 0.0;
    let mut wet_const = vec![0.0; n];
    for j in 0..n {
        if open_fixed(j) {
            constant += model.facility_cost[j];
            wet_const[j] += model.facility_wet[j];
        }
    }
    for (i, a) in assigned.iter().enumerate() {
        if let Some(j) = *a {
            let t = model.term(i, j)?;
            constant += t.cost;
            wet_const[j] += t.wet;
        }
    }

    let mut lp = LinearProgram::new(cost);
    for i in 0..k {
        if assigned[i].is_some() {
            continue;
        }
        let row: Vec<(usize, f64)> = (0..n).filter_map(|j| x_var[i * n + j].map(|v| (v, 1.0))).collect();
        if row.is_empty() {
            return None;
        }
        lp.add_row(row, Cmp::Eq, 1.0);
    }
    for j in 0..n {
        if let Some(yv) = y_var[j] {
            for i in 0..k {
                if let Some(xv) = x_var[i * n + j] {
                    lp.add_row(vec![(xv, 1.0), (yv, -1.0)], Cmp::Le, 0.0);
                }
            }
            lp.add_row(vec![(yv, 1.0)], Cmp::Le, 1.0);
        }
    }
    for j in 0..n {
        if closed(j) {
            continue;
        }
        let mut row = Vec::new();
        if let Some(yv) = y_var[j] {
            row.push((yv, model.facility_wet[j]));
        }
        for i in 0..k {
            if let Some(xv) = x_var[i * n + j] {
                row.push((xv, model.term(i, j)?.wet));
            }
        }
        let rhs = model.m_l_max - wet_const[j];
        if rhs < -1e-9 * model.m_l_max.max(1.0) {
            return None;
        }
        let worst: f64 = row.iter().map(|&(_, w)| w).sum();
        if !row.is_empty() && worst > rhs {
            lp.add_row(row, Cmp::Le, rhs.max(0.0));
        }
    }
    Some(NodeLp { lp, constant, y_var, x_var, assigned })
}

/// Greedy completion: every client goes to the cheapest open slot with room,
/// opening the cheapest extra slot when none has room.
fn repair(model: &OflpModel, open_hint: &[bool], fixed: &[Option<usize>]) -> Option<Vec<usize>> {
    let (n, k) = (model.n, model.k);
    let mut open: Vec<bool> = (0..n).map(|j| open_hint[j] && model.available[j]).collect();
    let mut load: Vec<f64> = model.facility_wet.clone();
    let mut assignment = vec![usize::MAX; k];
    for (i, f) in fixed.iter().enumerate() {
        if let Some(j) = *f {
            open[j] = true;
            load[j] += model.term(i, j)?.wet;
            assignment[i] = j;
        }
    }
    let fits = |load: &[f64], i: usize, j: usize| {
        model.term(i, j).is_some_and(|t| load[j] + t.wet <= model.m_l_max)
    };
    for i in 0..k {
        if assignment[i] != usize::MAX {
            continue;
        }
        let pick = (0..n)
            .filter(|&j| open[j] && fits(&load, i, j))
            .min_by(|&a, &b| model.term(i, a).unwrap().cost.total_cmp(&model.term(i, b).unwrap().cost))
            .or_else(|| {
                (0..n).filter(|&j| !open[j] && model.available[j] && fits(&load, i, j)).min_by(|&a, &b| {
                    let ca = model.facility_cost[a] + model.term(i, a).unwrap().cost;
                    let cb = model.facility_cost[b] + model.term(i, b).unwrap().cost;
                    ca.total_cmp(&cb)
                })
            })?;
        open[pick] = true;
        load[pick] += model.term(i, pick)?.wet;
        assignment[i] = pick;
    }
    Some(assignment)
}

/// Exact branch-and-bound with LP-relaxation bounds.
pub fn solve(model: &OflpModel) -> OflpSolution {
    solve_with(model, &SolveOptions::default())
}

pub fn solve_with(model: &OflpModel, opts: &SolveOptions) -> OflpSolution {
    let start = Instant::now();
    let (n, k) = (model.n, model.k);
    if !model.unservable_clients().is_empty() {
        return OflpSolution::infeasible(0, start.elapsed().as_secs_f64());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let consider = |cand: Vec<usize>, best: &mut Option<(f64, Vec<usize>)>| {
        if !model.is_feasible(&cand) {
            return;
        }
        let obj = model.objective_of(&cand).unwrap();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            *best = Some((obj, cand));
        }
    };
    if let Some(a) = repair(model, &vec![false; n], &vec![None; k]) {
        consider(a, &mut best);
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node { y_fix: vec![None; n], x_fix: vec![None; k * n], bound: f64::NEG_INFINITY, id: next_id });
    next_id += 1;
    let mut nodes = 0usize;
    let mut exhausted = false;
    let prune = |bound: f64, best: &Option<(f64, Vec<usize>)>| {
        best.as_ref().is_some_and(|(b, _)| bound >= b - PRUNE_REL * b.abs().max(1.0))
    };

    while let Some(node) = heap.pop() {
        if prune(node.bound, &best) {
            continue;
        }
        if nodes >= opts.node_limit || opts.time_limit.is_some_and(|t| start.elapsed() > t) {
            heap.push(node);
            exhausted = true;
            break;
        }
        nodes += 1;
        let Some(nlp) = node_lp(model, &node) else { continue };
        let sol = solve_lp(&nlp.lp);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                log::warn!("node LP ended with {:?}; node dropped", sol.status);
                continue;
            }
        }
        let bound = nlp.constant + sol.objective;
        if prune(bound, &best) {
            continue;
        }

        let y_val = |j: usize| match (node.y_fix[j], nlp.y_var[j]) {
            (Some(true), _) => 1.0,
            (_, Some(v)) => sol.x[v],
            _ => 0.0,
        };
        let open_hint: Vec<bool> = (0..n).map(|j| y_val(j) > 0.5).collect();
        if let Some(a) = repair(model, &open_hint, &nlp.assigned) {
            consider(a, &mut best);
        }

        let frac = |v: f64| (v - v.round()).abs();
        let branch_y = (0..n)
            .filter(|&j| nlp.y_var[j].is_some() && frac(y_val(j)) > INT_TOL)
            .max_by(|&a, &b| {
                let fa = 0.5 - (y_val(a) - 0.5).abs();
                let fb = 0.5 - (y_val(b) - 0.5).abs();
                fa.total_cmp(&fb)
                    .then(model.facility_cost[a].total_cmp(&model.facility_cost[b]))
                    .then(b.cmp(&a))
            });
        if let Some(j) = branch_y {
            for val in [true, false] {
                let mut child = node.clone();
                child.y_fix[j] = Some(val);
                child.bound = bound;
                child.id = next_id;
                next_id += 1;
                heap.push(child);
            }
            continue;
        }
        let x_val = |p: usize| nlp.x_var[p].map_or(0.0, |v| sol.x[v]);
        let branch_x = (0..k * n)
            .filter(|&p| nlp.x_var[p].is_some() && frac(x_val(p)) > INT_TOL)
            .max_by(|&a, &b| {
                let fa = 0.5 - (x_val(a) - 0.5).abs();
                let fb = 0.5 - (x_val(b) - 0.5).abs();
                fa.total_cmp(&fb).then(b.cmp(&a))
            });
        if let Some(p) = branch_x {
            let j = p % n;
            for val in [true, false] {
                let mut child = node.clone();
                child.x_fix[p] = Some(val);
                if val {
                    child.y_fix[j] = Some(true);
                }
                child.bound = bound;
                child.id = next_id;
                next_id += 1;
                heap.push(child);
            }
            continue;
        }
        // Integral relaxation.
        let mut assignment = vec![usize::MAX; k];
        for i in 0..k {
            assignment[i] = match nlp.assigned[i] {
                Some(j) => j,
                None => (0..n).find(|&j| x_val(i * n + j) > 0.5).unwrap_or(usize::MAX),
            };
        }
        consider(assignment, &mut best);
    }

    let wall = start.elapsed().as_secs_f64();
    let Some((obj, assignment)) = best else {
        return OflpSolution::infeasible(nodes, wall);
    };
    let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let (status, bound) = if exhausted && open_bound < obj - PRUNE_REL * obj.abs().max(1.0) {
        (SolveStatus::Feasible, open_bound)
    } else {
        (SolveStatus::Optimal, obj)
    };
    let mut out = OflpSolution::from_assignment(model, assignment, status);
    out.bound = bound;
    out.gap = if status == SolveStatus::Optimal { 0.0 } else { ((obj - bound) / obj.abs().max(1e-300)).max(0.0) };
    out.nodes = nodes;
    out.wall_time_s = wall;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(f: &[f64], c: &[&[f64]], wet_f: &[f64], wet_c: f64, m_l_max: f64) -> OflpModel {
        let alloc = c
            .iter()
            .flat_map(|row| row.iter().map(|&v| Some(AllocTerm { cost: v, wet: wet_c })))
            .collect();
        OflpModel::from_parts(f.to_vec(), wet_f.to_vec(), alloc, m_l_max).unwrap()
    }

    #[test]
    fn single_client_picks_cheap_slot() {
        let m = model(&[10.0, 100.0], &[&[1.0, 1.0]], &[0.0, 0.0], 0.0, f64::MAX);
        let s = solve(&m);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.open_slots, vec![0]);
        assert_eq!(s.objective, 11.0);
    }

    #[test]
    fn shared_slot_versus_capacity() {
        let m = model(&[10.0, 12.0], &[&[1.0, 5.0], &[4.0, 2.0]], &[0.0, 0.0], 1.0, f64::MAX);
        let s = solve(&m);
        assert_eq!((s.open_slots.clone(), s.objective), (vec![0], 15.0));

        let m = model(&[10.0, 12.0], &[&[1.0, 5.0], &[4.0, 2.0]], &[0.0, 0.0], 1.0, 1.5);
        let s = solve(&m);
        assert_eq!((s.open_slots.clone(), s.objective), (vec![0, 1], 25.0));
        assert!(s.wet_mass.iter().all(|&(_, w)| w <= 1.5));
    }

    #[test]
    fn unservable_client_reported() {
        let alloc = vec![Some(AllocTerm { cost: 1.0, wet: 1.0 }), None, None, None];
        let m = OflpModel::from_parts(vec![1.0, 1.0], vec![0.0, 0.0], alloc, 10.0).unwrap();
        assert_eq!(m.unservable_clients(), vec![1]);
        assert_eq!(solve(&m).status, SolveStatus::Infeasible);
    }

    #[test]
    fn oversized_pairs_are_frozen() {
        let m = model(&[1.0, 1.0], &[&[1.0, 1.0]], &[5.0, 20.0], 6.0, 10.0);
        assert!(m.term(0, 0).is_none());
        assert!(m.term(0, 1).is_none());
        assert!(!m.available[1]);
    }

    #[test]
    fn lp_export_lists_every_variable() {
        let m = model(&[10.0, 12.0], &[&[1.0, 5.0], &[4.0, 2.0]], &[3.0, 3.0], 1.0, 100.0);
        let s = m.to_lp_string();
        for v in ["y0", "y1", "x0_0", "x0_1", "x1_0", "x1_1", "assign_1:", "wet_1:", "Binary", "End"] {
            assert!(s.contains(v), "{v} missing:\n{s}");
        }
    }
}
