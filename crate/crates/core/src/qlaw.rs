//! Q-law Lyapunov guidance and a fixed-step low-thrust propagator.
//!
//! Everything in this module runs in canonical units (μ = 1). The state is the
//! equinoctial set with semimajor axis, `[a, f, g, h, k, L]`, and the thrust
//! acceleration is resolved in the radial / transverse / normal frame.
//!
//! Thrust direction convention: the in-plane angle `alpha` is measured from the
//! transverse direction, so the unit thrust vector is
//! `(F_r, F_θ, F_n) = (sin α cos β, cos α cos β, sin β)`. With that convention
//! the rate of Q is `D1 cos β cos α + D2 cos β sin α + D3 sin β`, where `D1`
//! collects the transverse column of the rate matrix and `D2` the radial one.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::elements::{auxiliaries, kep_to_mee, wrap_two_pi, KeplerianElements, MeeAState, UnitSystem};
use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const G0: f64 = 9.806_65;

/// Column order of the rate matrix.
const COL_R: usize = 0;
const COL_T: usize = 1;
const COL_N: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QlawParams {
    /// Weights on `[a, f, g, h, k]`.
    pub weights: [f64; 5],
    /// Periapsis penalty weight.
    pub w_p: f64,
    pub sigma: f64,
    pub nu: f64,
    pub zeta: f64,
    pub k_rp: f64,
    /// Minimum periapsis radius, DU.
    pub r_p_min: f64,
    /// Convergence tolerances: relative on `a`, absolute on `f, g, h, k`.
    pub tol: [f64; 5],
    pub max_tof_days: f64,
    /// Integration step as a fraction of the osculating period.
    pub dt_frac: f64,
}

impl QlawParams {
    /// Weights and scaling from the reference parameter table; `r_p_min` in DU.
    pub fn with_min_periapsis(r_p_min: f64) -> Self {
        Self {
            weights: [1.0; 5],
            w_p: 1.0,
            sigma: 3.0,
            nu: 4.0,
            zeta: 2.0,
            k_rp: 1.0,
            r_p_min,
            tol: [1e-3; 5],
            max_tof_days: 300.0,
            dt_frac: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.weights.iter().any(|w| !(*w >= 0.0)) || !(self.w_p >= 0.0) {
            return bad(format!("weights must be non-negative: {:?}, W_p = {}", self.weights, self.w_p));
        }
        if !(self.sigma > 0.0 && self.zeta > 0.0 && self.nu >= 1.0) {
            return bad(format!(
                "scaling needs σ > 0, ζ > 0, ν ≥ 1 (got {}, {}, {})",
                self.sigma, self.zeta, self.nu
            ));
        }
        if !(self.r_p_min > 0.0) {
            return bad(format!("r_p_min = {} must be positive", self.r_p_min));
        }
        if !(self.max_tof_days > 0.0) {
            return bad(format!("max_tof = {} days must be positive", self.max_tof_days));
        }
        if !(self.dt_frac > 0.0 && self.dt_frac <= 0.05) {
            return bad(format!("dt_frac = {} outside (0, 0.05]", self.dt_frac));
        }
        if self.tol.iter().any(|t| !(*t > 0.0)) {
            return bad(format!("tolerances must be positive: {:?}", self.tol));
        }
        Ok(())
    }
}

impl Default for QlawParams {
    /// Reference parameters with `r_p_min = 6878 km` expressed in a 26560 km DU.
    fn default() -> Self {
        Self::with_min_periapsis(6878.0 / 26560.0)
    }
}

/// Servicer propulsion and mass in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacecraft {
    pub thrust_n: f64,
    pub isp_s: f64,
    pub mass_kg: f64,
}

impl Spacecraft {
    pub fn new(thrust_n: f64, isp_s: f64, mass_kg: f64) -> Result<Self> {
        let sc = Self { thrust_n, isp_s, mass_kg };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thrust_n > 0.0 && self.isp_s > 0.0 && self.mass_kg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spacecraft needs positive thrust, isp and mass: {self:?}"
            )));
        }
        Ok(())
    }

    /// Propellant mass flow, kg/s.
    pub fn mdot_kg_s(&self) -> f64 {
        self.thrust_n / (G0 * self.isp_s)
    }

    /// Thrust acceleration in DU/TU² at the current mass.
    pub fn accel_canonical(&self, units: &UnitSystem) -> f64 {
        self.thrust_n / self.mass_kg / units.accel_unit_m_s2()
    }

    pub fn with_mass(&self, mass_kg: f64) -> Self {
        Self { mass_kg, ..*self }
    }
}

/// Target values of the five slow elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowTarget(pub [f64; 5]);

impl SlowTarget {
    pub fn from_kep(kep: &KeplerianElements) -> Result<Self> {
        Ok(Self(kep_to_mee(kep)?.slow()))
    }
}

/// 6×3 rate matrix (rows `a, f, g, h, k, L`; columns `r, θ, n`) and drift.
pub type RateMatrix = [[f64; 3]; 6];

/// Gauss variational equations for the semimajor-axis equinoctial set.
pub fn vop_matrices(mee: &MeeAState) -> (RateMatrix, [f64; 6]) {
    let aux = auxiliaries(mee, 1.0);
    let (sl, cl) = mee.l.sin_cos();
    let (a, f, g, h, k) = (mee.a, mee.f, mee.g, mee.h, mee.k);
    let sp = aux.p.sqrt();
    let w = aux.w;
    // e sin θ written in equinoctial variables
    let e_sin_ta = f * sl - g * cl;
    let hk = h * sl - k * cl;

    let b = [
        [2.0 * a * a / aux.h_am * e_sin_ta, 2.0 * a * a * aux.p / (aux.h_am * aux.r), 0.0],
        [sp * sl, sp / w * ((w + 1.0) * cl + f), -sp * g / w * hk],
        [-sp * cl, sp / w * ((w + 1.0) * sl + g), sp * f / w * hk],
        [0.0, 0.0, sp * aux.s2 / (2.0 * w) * cl],
        [0.0, 0.0, sp * aux.s2 / (2.0 * w) * sl],
        [0.0, 0.0, sp / w * hk],
    ];
    let d = [0.0, 0.0, 0.0, 0.0, 0.0, aux.p.sqrt() * (w / aux.p).powi(2)];
    (b, d)
}

/// State derivative for a thrust acceleration vector `(F_r, F_θ, F_n)`.
pub fn state_derivative(mee: &MeeAState, accel_rtn: [f64; 3]) -> [f64; 6] {
    let (b, d) = vop_matrices(mee);
    let mut out = d;
    for (row, o) in b.iter().zip(out.iter_mut()) {
        *o += row[0] * accel_rtn[0] + row[1] * accel_rtn[1] + row[2] * accel_rtn[2];
    }
    out
}

/// Maximum rates of the five slow elements over thrust direction and anomaly.
pub fn max_rates(mee: &MeeAState, accel: f64) -> Result<[f64; 5]> {
    Ok(max_rates_with_gradient(&mee.slow(), accel)?.0)
}

/// `(rates, ∂rate_n/∂x_m)` with `x = [a, f, g, h, k]`.
fn max_rates_with_gradient(x: &[f64; 5], accel: f64) -> Result<([f64; 5], [[f64; 5]; 5])> {
    if !(accel > 0.0) {
        return Err(Error::InvalidParameter(format!("thrust acceleration {accel} must be positive")));
    }
    let [a, f, g, h, k] = *x;
    let e2 = f * f + g * g;
    if e2 >= 1.0 {
        return Err(Error::InvalidElements(format!("f² + g² = {e2} is not elliptic")));
    }
    let e = e2.sqrt();
    let (de_df, de_dg) = if e > 0.0 { (f / e, g / e) } else { (0.0, 0.0) };

    let p = a * (1.0 - e2);
    let sp = p.sqrt();
    let dsp = [(1.0 - e2) / (2.0 * sp), -a * f / sp, -a * g / sp, 0.0, 0.0];

    let ratio = ((1.0 + e) / (1.0 - e)).sqrt();
    let dratio_de = 1.0 / (ratio * (1.0 - e) * (1.0 - e));
    let a15 = a * a.sqrt();
    let a_xx = 2.0 * accel * a15 * ratio;
    let d_a_xx = [
        1.5 * a_xx / a,
        2.0 * accel * a15 * dratio_de * de_df,
        2.0 * accel * a15 * dratio_de * de_dg,
        0.0,
        0.0,
    ];

    let fg_xx = 2.0 * accel * sp;
    let d_fg_xx = dsp.map(|d| 2.0 * accel * d);

    let s2 = 1.0 + h * h + k * k;
    let ds2 = [0.0, 0.0, 0.0, 2.0 * h, 2.0 * k];

    let root_g = (1.0 - g * g).sqrt();
    let root_f = (1.0 - f * f).sqrt();
    let den_h = root_g + f;
    let den_k = root_f + g;
    if den_h <= 0.0 || den_k <= 0.0 {
        return Err(Error::Singular(format!(
            "inclination-rate denominator non-positive (f = {f}, g = {g})"
        )));
    }
    let dden_h = [0.0, 1.0, -g / root_g, 0.0, 0.0];
    let dden_k = [0.0, -f / root_f, 1.0, 0.0, 0.0];

    let half = 0.5 * accel;
    let h_xx = half * sp * s2 / den_h;
    let k_xx = half * sp * s2 / den_k;
    let mut d_h_xx = [0.0; 5];
    let mut d_k_xx = [0.0; 5];
    for m in 0..5 {
        d_h_xx[m] = half * ((dsp[m] * s2 + sp * ds2[m]) / den_h - sp * s2 * dden_h[m] / (den_h * den_h));
        d_k_xx[m] = half * ((dsp[m] * s2 + sp * ds2[m]) / den_k - sp * s2 * dden_k[m] / (den_k * den_k));
    }

    Ok((
        [a_xx, fg_xx, fg_xx, h_xx, k_xx],
        [d_a_xx, d_fg_xx, d_fg_xx, d_h_xx, d_k_xx],
    ))
}

/// `x^y` with the integer and square-root exponents of the reference
/// parameters taken on fast paths.
fn pow(x: f64, y: f64) -> f64 {
    if y == 0.5 {
        x.sqrt()
    } else if y.fract() == 0.0 && y.abs() <= 16.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// Lyapunov function value.
pub fn lyapunov_q(mee: &MeeAState, target: &SlowTarget, params: &QlawParams, accel: f64) -> Result<f64> {
    Ok(q_and_gradient(&mee.slow(), target, params, accel)?.0)
}

/// Q together with its analytic gradient over `[a, f, g, h, k]`.
pub fn q_and_gradient(
    x: &[f64; 5],
    target: &SlowTarget,
    params: &QlawParams,
    accel: f64,
) -> Result<(f64, [f64; 5])> {
    let (xx, dxx) = max_rates_with_gradient(x, accel)?;
    let [a, f, g, _, _] = *x;
    let a_t = target.0[0];

    // scaling on a
    let sig_at = params.sigma * a_t;
    let u = (a - a_t).abs() / sig_at;
    let u_nu1 = pow(u, params.nu - 1.0);
    let base = 1.0 + u_nu1 * u;
    let s_a = pow(base, 1.0 / params.zeta);
    let ds_a_da = if u > 0.0 {
        (1.0 / params.zeta) * (s_a / base) * params.nu * u_nu1 * (a - a_t).signum() / sig_at
    } else {
        0.0
    };

    let mut sum = 0.0;
    let mut dsum = [0.0; 5];
    for n in 0..5 {
        let w = params.weights[n];
        if w == 0.0 {
            continue;
        }
        let (s, ds_da) = if n == 0 { (s_a, ds_a_da) } else { (1.0, 0.0) };
        let delta = x[n] - target.0[n];
        let inv = 1.0 / xx[n];
        let ratio2 = delta * delta * inv * inv;
        sum += s * w * ratio2;
        for m in 0..5 {
            let mut d = -2.0 * s * ratio2 * dxx[n][m] * inv;
            if m == n {
                d += 2.0 * s * delta * inv * inv;
            }
            if m == 0 {
                d += ds_da * ratio2;
            }
            dsum[m] += w * d;
        }
    }

    // periapsis barrier
    let e = (f * f + g * g).sqrt();
    let r_p = a * (1.0 - e);
    let pen = (params.k_rp * (1.0 - r_p / params.r_p_min)).exp();
    let (de_df, de_dg) = if e > 0.0 { (f / e, g / e) } else { (0.0, 0.0) };
    let drp = [1.0 - e, -a * de_df, -a * de_dg, 0.0, 0.0];
    let dpen_factor = -pen * params.k_rp / params.r_p_min;

    let outer = 1.0 + params.w_p * pen;
    let q = outer * sum;
    let mut grad = [0.0; 5];
    for m in 0..5 {
        grad[m] = params.w_p * dpen_factor * drp[m] * sum + outer * dsum[m];
    }
    Ok((q, grad))
}

/// Result of the steering law at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub alpha: f64,
    pub beta: f64,
    /// Rate of Q per unit thrust acceleration along the chosen direction.
    pub qdot: f64,
    pub d: [f64; 3],
    pub q: f64,
}

impl Control {
    /// Unit thrust direction as `(F_r, F_θ, F_n)`.
    pub fn direction(&self) -> [f64; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        [sa * cb, ca * cb, sb]
    }
}

/// Evaluates Q̇ coefficients at `(alpha, beta)`.
pub fn qdot_at(d: &[f64; 3], alpha: f64, beta: f64) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    d[0] * cb * ca + d[1] * cb * sa + d[2] * sb
}

/// `(Q, d)` where `d` holds the Q̇ coefficients on `(cosβ cosα, cosβ sinα, sinβ)`.
fn qdot_coefficients(mee: &MeeAState, target: &SlowTarget, params: &QlawParams, accel: f64) -> Result<(f64, [f64; 3])> {
    let (q, grad) = q_and_gradient(&mee.slow(), target, params, accel)?;
    let (b, _) = vop_matrices(mee);
    let mut d = [0.0; 3];
    for (n, gq) in grad.iter().enumerate() {
        d[0] += gq * b[n][COL_T];
        d[1] += gq * b[n][COL_R];
        d[2] += gq * b[n][COL_N];
    }
    Ok((q, d))
}

/// Thrust unit vector `(F_r, F_θ, F_n)` minimising Q̇ and the minimum Q̇;
/// the same direction [`control_angles`] describes, without the angles.
fn steering_direction(d: &[f64; 3]) -> ([f64; 3], f64) {
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if norm == 0.0 {
        return ([0.0, 1.0, 0.0], 0.0);
    }
    ([-d[1] / norm, -d[0] / norm, -d[2] / norm], -norm)
}

/// Steering angles that minimise Q̇ at `mee`.
pub fn control_angles(mee: &MeeAState, target: &SlowTarget, params: &QlawParams, accel: f64) -> Result<Control> {
    let (q, d) = qdot_coefficients(mee, target, params, accel)?;
    if d == [0.0; 3] {
        return Ok(Control { alpha: 0.0, beta: 0.0, qdot: 0.0, d, q });
    }
    let alpha = (-d[1]).atan2(-d[0]);
    let beta = (-d[2] / d[0].hypot(d[1])).atan();
    Ok(Control { alpha, beta, qdot: qdot_at(&d, alpha, beta), d, q })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub tof_days: f64,
    pub dm_kg: f64,
    pub converged: bool,
    /// Q sampled once per revolution plus the first and last values.
    pub q_history: Vec<f64>,
    pub steps: usize,
    /// Control updates with a non-zero gradient where Q̇ was not negative.
    pub descent_violations: usize,
    pub final_state: MeeAState,
    pub final_mass_kg: f64,
}

impl TransferResult {
    pub fn q_start(&self) -> f64 {
        self.q_history.first().copied().unwrap_or(0.0)
    }

    pub fn q_final(&self) -> f64 {
        self.q_history.last().copied().unwrap_or(0.0)
    }
}

/// One sample of a transfer trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_days: f64,
    pub a: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub mass_kg: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn is_converged(x: &[f64; 6], target: &SlowTarget, params: &QlawParams) -> bool {
    (0..5).all(|n| {
        if params.weights[n] == 0.0 {
            return true;
        }
        let err = (x[n] - target.0[n]).abs();
        let err = if n == 0 { err / target.0[0] } else { err };
        err < params.tol[n]
    })
}

fn check_state(x: &[f64; 6], mass: f64) -> Result<()> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Propagation(format!("non-finite state {x:?}")));
    }
    if x[0] <= 0.0 || x[1] * x[1] + x[2] * x[2] >= 1.0 {
        return Err(Error::Propagation(format!("state left the elliptic domain: {x:?}")));
    }
    if !(mass > 0.0) {
        return Err(Error::Propagation(format!("mass depleted ({mass} kg)")));
    }
    Ok(())
}

/// Classical RK4 step with the steering direction held over the step.
/// `accel_of(tau)` gives the thrust acceleration magnitude at time `tau` into the step.
fn rk4_step(x: &[f64; 6], dir: [f64; 3], dt: f64, accel_of: impl Fn(f64) -> f64) -> [f64; 6] {
    let rhs = |state: &[f64; 6], tau: f64| {
        let acc = accel_of(tau);
        state_derivative(&MeeAState::from_array(*state), dir.map(|c| c * acc))
    };
    let axpy = |x: &[f64; 6], k: &[f64; 6], s: f64| {
        let mut y = *x;
        for i in 0..6 {
            y[i] += s * k[i];
        }
        y
    };
    let k1 = rhs(x, 0.0);
    let k2 = rhs(&axpy(x, &k1, 0.5 * dt), 0.5 * dt);
    let k3 = rhs(&axpy(x, &k2, 0.5 * dt), 0.5 * dt);
    let k4 = rhs(&axpy(x, &k3, dt), dt);
    let mut y = *x;
    for i in 0..6 {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    y
}

/// Propagates a thrust-always-on Q-law transfer between two element sets
/// (`a` in DU). Returns an unconverged result, not an error, on timeout.
pub fn propagate_transfer(
    start: &KeplerianElements,
    target: &KeplerianElements,
    sc: &Spacecraft,
    params: &QlawParams,
    units: &UnitSystem,
) -> Result<TransferResult> {
    run_transfer(start, target, sc, params, units, None)
}

/// Same as [`propagate_transfer`] and also records one trace row per step.
pub fn propagate_transfer_traced(
    start: &KeplerianElements,
    target: &KeplerianElements,
    sc: &Spacecraft,
    params: &QlawParams,
    units: &UnitSystem,
) -> Result<(TransferResult, Vec<TraceRow>)> {
    let mut trace = Vec::new();
    let res = run_transfer(start, target, sc, params, units, Some(&mut trace))?;
    Ok((res, trace))
}

fn run_transfer(
    start: &KeplerianElements,
    target: &KeplerianElements,
    sc: &Spacecraft,
    params: &QlawParams,
    units: &UnitSystem,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<TransferResult> {
    params.validate()?;
    sc.validate()?;
    let tgt = SlowTarget::from_kep(target)?;
    let mut x = kep_to_mee(start)?.to_array();

    let tu_s = units.tu_s();
    let accel_unit = units.accel_unit_m_s2();
    let mdot = sc.mdot_kg_s();
    let mdot_tu = mdot * tu_s;
    let m0 = sc.mass_kg;
    let max_tof = units.days_to_tu(params.max_tof_days);
    let samples_per_rev = (1.0 / params.dt_frac).ceil() as usize;

    let accel_at = |t: f64| sc.thrust_n / (m0 - mdot_tu * t) / accel_unit;

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut violations = 0usize;
    let mut q_history = Vec::new();
    let mut converged = is_converged(&x, &tgt, params);

    let record = |trace: &mut Option<&mut Vec<TraceRow>>, t: f64, x: &[f64; 6], q: f64| {
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                t_days: units.tu_to_days(t),
                a: x[0],
                f: x[1],
                g: x[2],
                h: x[3],
                k: x[4],
                l: x[5],
                mass_kg: m0 - mdot_tu * t,
                q,
            });
        }
    };

    let q0 = lyapunov_q(&MeeAState::from_array(x), &tgt, params, accel_at(0.0))?;
    q_history.push(q0);
    record(&mut trace, 0.0, &x, q0);

    while !converged && t < max_tof {
        let mee = MeeAState::from_array(x);
        let acc = accel_at(t);
        let (_, d) = qdot_coefficients(&mee, &tgt, params, acc)?;
        let (dir, qdot) = steering_direction(&d);
        if d != [0.0; 3] && !(qdot < 0.0) {
            violations += 1;
        }

        let period = TAU * x[0] * x[0].sqrt();
        let mut dt = params.dt_frac * period;
        if t + dt > max_tof {
            dt = max_tof - t;
        }
        let t0 = t;
        let accel_from = |tau: f64| accel_at(t0 + tau);
        let mut next = rk4_step(&x, dir, dt, accel_from);
        let mut step_len = dt;

        if is_converged(&next, &tgt, params) {
            // locate the crossing inside the step so tof varies continuously
            let (mut lo, mut hi) = (0.0, dt);
            let mut best = next;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                let trial = rk4_step(&x, dir, mid, accel_from);
                if is_converged(&trial, &tgt, params) {
                    hi = mid;
                    best = trial;
                } else {
                    lo = mid;
                }
            }
            next = best;
            step_len = hi;
            converged = true;
        }

        t += step_len;
        next[5] = wrap_two_pi(next[5]);
        check_state(&next, m0 - mdot_tu * t)?;
        x = next;
        steps += 1;

        let sample = converged || t >= max_tof || steps % samples_per_rev == 0;
        if sample || trace.is_some() {
            let q = lyapunov_q(&MeeAState::from_array(x), &tgt, params, accel_at(t))?;
            if sample {
                q_history.push(q);
            }
            record(&mut trace, t, &x, q);
        }
    }

    let tof_s = units.tu_to_s(t);
    let dm = mdot * tof_s;
    Ok(TransferResult {
        tof_days: tof_s / 86_400.0,
        dm_kg: dm,
        converged,
        q_history,
        steps,
        descent_violations: violations,
        final_state: MeeAState::from_array(x),
        final_mass_kg: m0 - dm,
    })
}
