//! Exhaustive reference solver for small instances.

use std::time::Instant;

use super::{OflpModel, OflpSolution, SolveStatus};
use crate::error::{Error, Result};

pub const MAX_SLOTS: usize = 12;
pub const MAX_CLIENTS: usize = 8;

/// Enumerates every client → slot map. Facility costs are non-negative, so for
/// any map the best open set is exactly the set of used slots, which makes
/// this equivalent to enumerating all open sets with their best assignments.
/// Branches are cut only when their partial cost already exceeds the best.
pub fn brute_force(model: &OflpModel) -> Result<OflpSolution> {
    if model.n > MAX_SLOTS || model.k > MAX_CLIENTS {
        return Err(Error::InvalidParameter(format!(
            "brute force limited to {MAX_SLOTS} slots and {MAX_CLIENTS} clients, got {} and {}",
            model.n, model.k
        )));
    }
    let start = Instant::now();
    let mut search = Search {
        model,
        assignment: vec![0; model.k],
        load: vec![0.0; model.n],
        users: vec![0; model.n],
        best: None,
        leaves: 0,
    };
    search.descend(0, 0.0);
    let wall = start.elapsed().as_secs_f64();
    let Some((_, assignment)) = search.best else {
        return Ok(OflpSolution::infeasible(search.leaves, wall));
    };
    let mut sol = OflpSolution::from_assignment(model, assignment, SolveStatus::Optimal);
    sol.nodes = search.leaves;
    sol.wall_time_s = wall;
    Ok(sol)
}

struct Search<'a> {
    model: &'a OflpModel,
    assignment: Vec<usize>,
    load: Vec<f64>,
    users: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    leaves: usize,
}

impl Search<'_> {
    fn descend(&mut self, client: usize, partial: f64) {
        let m = self.model;
        if let Some((b, _)) = &self.best {
            if partial > *b {
                return;
            }
        }
        if client == m.k {
            self.leaves += 1;
            let obj = m.objective_of(&self.assignment).expect("assignment uses allowed pairs");
            if self.best.as_ref().is_none_or(|(b, _)| obj < *b) {
                self.best = Some((obj, self.assignment.clone()));
            }
            return;
        }
        for j in 0..m.n {
            let Some(t) = m.term(client, j) else { continue };
            let opening = self.users[j] == 0;
            let base = if opening { m.facility_wet[j] } else { self.load[j] };
            if base + t.wet > m.m_l_max {
                continue;
            }
            let prev_load = self.load[j];
            self.load[j] = base + t.wet;
            self.users[j] += 1;
            self.assignment[client] = j;
            let step = t.cost + if opening { m.facility_cost[j] } else { 0.0 };
            self.descend(client + 1, partial + step);
            self.users[j] -= 1;
            self.load[j] = prev_load;
        }
    }
}
