//! Scenario files: one TOML document describing units, clients, the slot grid,
//! vehicles, Q-law settings, solver and refinement settings, and sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{hash_json, FixedPointSettings, ServicerParams};
use crate::elements::{load_constellation, Satellite, UnitSystem, MU_EARTH_KM3_S2};
use crate::error::{Error, Result};
use crate::launch::LaunchParams;
use crate::oflp::{Architecture, Multipliers, SolveOptions};
use crate::qlaw::QlawParams;
use crate::refine::DeSettings;
use crate::slots::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub du_km: f64,
    #[serde(default = "earth_mu")]
    pub mu_km3_s2: f64,
}

fn earth_mu() -> f64 {
    MU_EARTH_KM3_S2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSection {
    /// CSV path, relative to the scenario file.
    pub file: PathBuf,
    /// Optional subset of row indices.
    #[serde(default)]
    pub select: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepotSection {
    pub dry_kg: f64,
    pub isp_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchSection {
    pub r0_km: f64,
    pub isp_s: f64,
    pub m_l_max_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QlawSection {
    pub weights: [f64; 5],
    pub w_p: f64,
    pub sigma: f64,
    pub nu: f64,
    pub zeta: f64,
    pub k_rp: f64,
    pub r_p_min_km: f64,
    pub tol: [f64; 5],
    pub max_tof_days: f64,
    pub dt_frac: f64,
    pub fixed_point_tol_kg: f64,
    pub fixed_point_max_iter: usize,
}

impl Default for QlawSection {
    fn default() -> Self {
        let q = QlawParams::with_min_periapsis(1.0);
        let fp = FixedPointSettings::default();
        Self {
            weights: q.weights,
            w_p: q.w_p,
            sigma: q.sigma,
            nu: q.nu,
            zeta: q.zeta,
            k_rp: q.k_rp,
            r_p_min_km: 6878.0,
            tol: q.tol,
            max_tof_days: q.max_tof_days,
            dt_frac: q.dt_frac,
            fixed_point_tol_kg: fp.tol_kg,
            fixed_point_max_iter: fp.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub node_limit: usize,
    pub time_limit_s: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { node_limit: SolveOptions::default().node_limit, time_limit_s: None }
    }
}

/// Value lists for parameter sweeps; empty lists fall back to the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(rename = "D")]
    pub demand: Vec<f64>,
    pub m_s_dry: Vec<f64>,
    pub m_d_dry: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub units: UnitsSection,
    pub constellation: ConstellationSection,
    pub grid: GridSpec,
    pub servicer: ServicerParams,
    pub depot: DepotSection,
    pub launch: LaunchSection,
    #[serde(default)]
    pub qlaw: QlawSection,
    /// Trips per client, `D`.
    #[serde(default = "one")]
    pub demand: f64,
    #[serde(default)]
    pub multipliers: Multipliers,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub refine: DeSettings,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Directory of the scenario file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Scenario {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text)?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Other(format!("cannot read scenario {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        self.unit_system()?;
        self.qlaw_params()?.validate()?;
        self.launch_params().validate()?;
        self.refine.validate()?;
        let s = &self.servicer;
        if !(s.thrust_n > 0.0 && s.isp_s > 0.0 && s.dry_kg > 0.0 && s.payload_kg >= 0.0) {
            return Err(Error::InvalidParameter(format!("servicer parameters out of range: {s:?}")));
        }
        if !(self.depot.dry_kg >= 0.0) || !(self.demand > 0.0) {
            return Err(Error::InvalidParameter("depot dry mass and demand must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn unit_system(&self) -> Result<UnitSystem> {
        UnitSystem::new(self.units.du_km, self.units.mu_km3_s2)
    }

    pub fn qlaw_params(&self) -> Result<QlawParams> {
        let q = &self.qlaw;
        Ok(QlawParams {
            weights: q.weights,
            w_p: q.w_p,
            sigma: q.sigma,
            nu: q.nu,
            zeta: q.zeta,
            k_rp: q.k_rp,
            r_p_min: self.unit_system()?.km_to_du(q.r_p_min_km),
            tol: q.tol,
            max_tof_days: q.max_tof_days,
            dt_frac: q.dt_frac,
        })
    }

    pub fn fixed_point(&self) -> FixedPointSettings {
        FixedPointSettings { tol_kg: self.qlaw.fixed_point_tol_kg, max_iter: self.qlaw.fixed_point_max_iter }
    }

    pub fn launch_params(&self) -> LaunchParams {
        LaunchParams {
            r0_km: self.launch.r0_km,
            isp_l_s: self.launch.isp_s,
            isp_d_s: self.depot.isp_s,
            m_l_max_kg: self.launch.m_l_max_kg,
            mu_km3_s2: self.units.mu_km3_s2,
        }
    }

    pub fn architecture(&self, n_clients: usize) -> Architecture {
        Architecture {
            m_d_dry_kg: self.depot.dry_kg,
            m_s_payload_kg: self.servicer.payload_kg,
            demand: vec![self.demand; n_clients],
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            node_limit: self.solver.node_limit,
            time_limit: self.solver.time_limit_s.map(std::time::Duration::from_secs_f64),
        }
    }

    pub fn constellation_path(&self) -> PathBuf {
        self.base_dir.join(&self.constellation.file)
    }

    pub fn clients(&self) -> Result<Vec<Satellite>> {
        let all = load_constellation(&self.constellation_path())?;
        match &self.constellation.select {
            None => Ok(all),
            Some(idx) => idx
                .iter()
                .map(|&i| {
                    all.get(i)
                        .cloned()
                        .ok_or_else(|| Error::InvalidParameter(format!("client index {i} not in constellation")))
                })
                .collect(),
        }
    }

    /// Content hash over every field plus the client elements; independent
    /// of key order, file location, output directory and worker count.
    pub fn scenario_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            scenario: &'a Scenario,
            clients: Vec<Satellite>,
        }
        let mut copy = self.clone();
        copy.constellation.file = PathBuf::new();
        copy.output_dir = PathBuf::new();
        copy.workers = 1;
        Ok(hash_json(&Hashed { scenario: &copy, clients: self.clients()? }))
    }
}
