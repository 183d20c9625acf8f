//! Continuous refinement of one open depot over `[a, e, i, Ω]` with its
//! client allocation held fixed, by differential evolution (DE/rand/1/bin).

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{round_trip_legs, FixedPointSettings, LegGuess, ServicerParams};
use crate::elements::{KeplerianElements, UnitSystem};
use crate::error::{Error, Result};
use crate::launch::{slot_mass_ratio, LaunchParams};
use crate::oflp::{Architecture, Multipliers};
use crate::qlaw::QlawParams;
use crate::slots::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeSettings {
    pub population: usize,
    pub f: f64,
    pub cr: f64,
    pub generations: usize,
    /// Stop after this many generations without improvement.
    pub stagnation: usize,
    pub seed: u64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self { population: 50, f: 0.9, cr: 0.9, generations: 60, stagnation: 15, seed: 1 }
    }
}

impl DeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidParameter("DE population must be at least 4".into()));
        }
        if !(self.f > 0.0 && self.f <= 2.0) || !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::InvalidParameter(format!("DE settings out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Best objective after each generation (generation 0 is the initial population).
#[derive(Debug, Clone, PartialEq)]
pub struct DeGeneration {
    pub gen: usize,
    pub best_f: f64,
    pub best_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub history: Vec<DeGeneration>,
    pub evaluations: usize,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Other(format!("thread pool: {e}")))
}

/// Minimizes `f` over the box `[lo, hi]`, starting from a population that
/// contains `seed_x`. All random draws happen on the calling thread before a
/// generation is evaluated, so the result does not depend on `workers`.
pub fn differential_evolution<F>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    seed_x: &[f64],
    de: &DeSettings,
    workers: usize,
) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    de.validate()?;
    let dim = lo.len();
    if hi.len() != dim || seed_x.len() != dim {
        return Err(Error::InvalidParameter("bounds and seed dimensions differ".into()));
    }
    if (0..dim).any(|d| !(lo[d] <= seed_x[d] && seed_x[d] <= hi[d])) {
        return Err(Error::InvalidParameter(format!("seed {seed_x:?} outside bounds")));
    }
    let pool = pool(workers)?;
    let eval_all = |xs: &[Vec<f64>]| -> Vec<f64> { pool.install(|| xs.par_iter().map(|x| f(x)).collect()) };

    let mut rng = ChaCha8Rng::seed_from_u64(de.seed);
    let np = de.population;
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(np);
    pop.push(seed_x.to_vec());
    for _ in 1..np {
        pop.push((0..dim).map(|d| sample(&mut rng, lo[d], hi[d])).collect());
    }
    let mut fit = eval_all(&pop);
    let mut evaluations = np;

    let argmin = |fit: &[f64]| (0..fit.len()).fold(0, |b, i| if fit[i] < fit[b] { i } else { b });
    let b0 = argmin(&fit);
    let mut best_x = pop[b0].clone();
    let mut best_f = fit[b0];
    let mut history = vec![DeGeneration { gen: 0, best_f, best_x: best_x.clone() }];
    let mut stagnant = 0;

    for gen in 1..=de.generations {
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let (r1, r2, r3) = distinct_three(&mut rng, np, i);
            let jrand = rng.random_range(0..dim.max(1));
            let mut trial = pop[i].clone();
            for d in 0..dim {
                if d == jrand || rng.random::<f64>() < de.cr {
                    let mut v = pop[r1][d] + de.f * (pop[r2][d] - pop[r3][d]);
                    // Out-of-box components land halfway between the base and the bound.
                    if v < lo[d] {
                        v = 0.5 * (pop[r1][d] + lo[d]);
                    } else if v > hi[d] {
                        v = 0.5 * (pop[r1][d] + hi[d]);
                    }
                    trial[d] = v.clamp(lo[d], hi[d]);
                }
            }
            trials.push(trial);
        }
        let trial_fit = eval_all(&trials);
        evaluations += np;
        for (i, (t, tf)) in trials.into_iter().zip(trial_fit).enumerate() {
            if tf <= fit[i] {
                pop[i] = t;
                fit[i] = tf;
            }
        }
        let b = argmin(&fit);
        if fit[b] < best_f {
            best_f = fit[b];
            best_x = pop[b].clone();
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        history.push(DeGeneration { gen, best_f, best_x: best_x.clone() });
        if stagnant >= de.stagnation {
            break;
        }
    }
    Ok(DeResult { best_x, best_f, history, evaluations })
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn distinct_three(rng: &mut ChaCha8Rng, np: usize, skip: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let r = rng.random_range(0..np);
        if !taken.contains(&r) {
            return r;
        }
    };
    let r1 = pick(&[skip]);
    let r2 = pick(&[skip, r1]);
    let r3 = pick(&[skip, r1, r2]);
    (r1, r2, r3)
}

/// Everything needed to price a depot location for a fixed client set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineContext {
    /// All client elements, `a` in DU.
    pub clients: Vec<KeplerianElements>,
    pub servicer: ServicerParams,
    pub qlaw: QlawParams,
    pub units: UnitSystem,
    pub launch: LaunchParams,
    pub arch: Architecture,
    pub multipliers: Multipliers,
    pub fixed_point: FixedPointSettings,
}

/// Box over `[a (DU), e, i (rad), Ω (rad)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineBounds {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl RefineBounds {
    /// Grid extent widened by one grid increment per element.
    pub fn from_grid(grid: &GridSpec) -> Result<Self> {
        let ranges = [&grid.a_du, &grid.e, &grid.i_deg, &grid.raan_deg];
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for (d, r) in ranges.iter().enumerate() {
            let (l, h) = r.bounds().ok_or(Error::EmptyRange(["a", "e", "i", "raan"][d]))?;
            let inc = r.increment();
            lo[d] = l - inc;
            hi[d] = h + inc;
        }
        for d in [2, 3] {
            lo[d] = lo[d].to_radians();
            hi[d] = hi[d].to_radians();
        }
        lo[0] = lo[0].max(1e-3);
        lo[1] = lo[1].max(0.0);
        hi[1] = hi[1].min(0.95);
        lo[2] = lo[2].max(0.0);
        hi[2] = hi[2].min(std::f64::consts::PI - 1e-6);
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: &[f64; 4]) -> bool {
        (0..4).all(|d| self.lo[d] <= x[d] && x[d] <= self.hi[d])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineProblem {
    /// Clients served by this depot (indices into `RefineContext::clients`).
    pub allocation: Vec<usize>,
    pub bounds: RefineBounds,
    pub de: DeSettings,
    /// OFLP slot of the depot; supplies the starting point and the fixed `ω`, `θ`.
    pub slot: KeplerianElements,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub emleo_kg: f64,
    pub wet_kg: f64,
    pub feasible: bool,
}

fn location(x: &[f64], slot: &KeplerianElements) -> Option<KeplerianElements> {
    KeplerianElements::new(x[0], x[1], x[2], x[3], slot.argp, slot.ta).ok()
}

/// Prices the depot at `x = [a, e, i, Ω]` with fresh transfers to every
/// allocated client. Summation order matches the facility location model so
/// the slot itself reproduces its model contribution bit for bit.
pub fn refine_objective(x: &[f64; 4], prob: &RefineProblem, ctx: &RefineContext) -> Evaluation {
    evaluate(x, prob, ctx, &[]).0
}

/// Objective with per-client leg guesses (missing entries start from zero),
/// also returning the solved legs as guesses for later calls.
fn evaluate(x: &[f64; 4], prob: &RefineProblem, ctx: &RefineContext, guesses: &[LegGuess]) -> (Evaluation, Vec<LegGuess>) {
    let bad = (Evaluation { emleo_kg: f64::INFINITY, wet_kg: f64::INFINITY, feasible: false }, Vec::new());
    let Some(kep) = location(x, &prob.slot) else { return bad };
    let Some(ratios) = slot_mass_ratio(&kep, ctx.units.du_km, &ctx.launch) else { return bad };
    let mut emleo = ctx.multipliers.lambda * ctx.arch.m_d_dry_kg * ratios.z;
    let mut wet = ctx.arch.m_d_dry_kg * ratios.z_d;
    let mut solved = Vec::with_capacity(prob.allocation.len());
    for (n, &i) in prob.allocation.iter().enumerate() {
        let guess = guesses.get(n).copied().unwrap_or_default();
        let Some((out, inb)) =
            round_trip_legs(&ctx.clients[i], &kep, &ctx.servicer, &ctx.qlaw, &ctx.units, &ctx.fixed_point, guess)
        else {
            return bad;
        };
        solved.push(LegGuess::from_legs(&out, &inb));
        let mass = ctx.arch.demand[i] * (out.dm_kg + inb.dm_kg + ctx.arch.m_s_payload_kg);
        emleo += ctx.multipliers.rho * mass * ratios.z;
        wet += mass * ratios.z_d;
    }
    (Evaluation { emleo_kg: emleo, wet_kg: wet, feasible: wet <= ctx.launch.m_l_max_kg }, solved)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRow {
    pub gen: usize,
    pub best_emleo_kg: f64,
    pub best_a: f64,
    pub best_e: f64,
    pub best_i: f64,
    pub best_raan: f64,
    pub wet_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub seed_x: [f64; 4],
    pub seed: Evaluation,
    pub best_x: [f64; 4],
    pub best: Evaluation,
    pub rows: Vec<RefineRow>,
    pub evaluations: usize,
}

impl RefineReport {
    pub fn refined_elements(&self, slot: &KeplerianElements) -> Option<KeplerianElements> {
        location(&self.best_x, slot)
    }

    /// Fractional wet-mass reduction relative to the seed.
    pub fn wet_reduction(&self) -> f64 {
        (self.seed.wet_kg - self.best.wet_kg) / self.seed.wet_kg
    }

    /// `gen,best_emleo_kg,best_a,best_e,best_i,best_raan,wet_kg`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Refines one depot. The seed slot must be feasible; infeasible candidates
/// are scored at ten times the seed objective. Each candidate's leg searches
/// start from the seed's solved propellant, which leaves the seed's own value
/// unchanged and saves propagations near it.
pub fn refine(prob: &RefineProblem, ctx: &RefineContext, workers: usize) -> Result<RefineReport> {
    let seed_x = [prob.slot.a, prob.slot.e, prob.slot.i, prob.slot.raan];
    if !prob.bounds.contains(&seed_x) {
        return Err(Error::InvalidParameter(format!("slot {seed_x:?} lies outside the refinement bounds")));
    }
    let (seed, guesses) = evaluate(&seed_x, prob, ctx, &[]);
    if !seed.feasible {
        return Err(Error::Infeasible("refinement seed slot is infeasible".into()));
    }
    let penalty = seed.emleo_kg * 10.0;
    let score = |x: &[f64]| {
        let e = evaluate(&[x[0], x[1], x[2], x[3]], prob, ctx, &guesses).0;
        if e.feasible {
            e.emleo_kg
        } else {
            penalty
        }
    };
    let de = differential_evolution(score, &prob.bounds.lo, &prob.bounds.hi, &seed_x, &prob.de, workers)?;
    let to_arr = |x: &[f64]| [x[0], x[1], x[2], x[3]];
    let mut rows = Vec::with_capacity(de.history.len());
    let mut last: Option<([f64; 4], Evaluation)> = None;
    for g in &de.history {
        let x = to_arr(&g.best_x);
        let ev = match last {
            Some((lx, le)) if lx == x => le,
            _ => evaluate(&x, prob, ctx, &guesses).0,
        };
        last = Some((x, ev));
        rows.push(RefineRow {
            gen: g.gen,
            best_emleo_kg: g.best_f,
            best_a: x[0],
            best_e: x[1],
            best_i: x[2].to_degrees(),
            best_raan: x[3].to_degrees(),
            wet_kg: ev.wet_kg,
        });
    }
    let best_x = to_arr(&de.best_x);
    let best = last.map(|(_, e)| e).unwrap_or(seed);
    Ok(RefineReport { seed_x, seed, best_x, best, rows, evaluations: de.evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_stationary_seed_stays() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2);
        let de = DeSettings { generations: 30, ..Default::default() };
        let r = differential_evolution(f, &[-1.0, -1.0], &[1.0, 1.0], &[0.3, -0.1], &de, 1).unwrap();
        assert_eq!(r.best_f, 0.0);
        assert_eq!(r.best_x, vec![0.3, -0.1]);
    }

    #[test]
    fn finds_quadratic_minimum_from_offset_seed() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2);
        let de = DeSettings { generations: 200, stagnation: 200, ..Default::default() };
        let r = differential_evolution(f, &[-1.0, -1.0], &[1.0, 1.0], &[0.9, 0.9], &de, 1).unwrap();
        assert!(r.best_f < 1e-6, "{}", r.best_f);
        assert!(r.history.windows(2).all(|w| w[1].best_f <= w[0].best_f));
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1];
        let de = DeSettings { generations: 20, seed: 9, ..Default::default() };
        let a = differential_evolution(f, &[-2.0, -2.0], &[2.0, 2.0], &[1.0, 1.0], &de, 1).unwrap();
        let b = differential_evolution(f, &[-2.0, -2.0], &[2.0, 2.0], &[1.0, 1.0], &de, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_axis_is_held() {
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) + x[1];
        let de = DeSettings { generations: 10, ..Default::default() };
        let r = differential_evolution(f, &[0.0, 0.7], &[1.0, 0.7], &[0.2, 0.7], &de, 1).unwrap();
        assert_eq!(r.best_x[1], 0.7);
    }
}
