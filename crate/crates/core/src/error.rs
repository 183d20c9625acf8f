use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),
    #[error("singular state: {0}")]
    Singular(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("slot inadmissible: perigee radius {rp_km:.3} km below parking orbit {r0_km:.3} km")]
    Inadmissible { rp_km: f64, r0_km: f64 },
    #[error("empty range for {0}")]
    EmptyRange(&'static str),
    #[error("model infeasible: {0}")]
    Infeasible(String),
    #[error("clients without any feasible slot: {0:?}")]
    UnservableClients(Vec<usize>),
    #[error("state invariant violated during propagation: {0}")]
    Propagation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
