//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("no fixed point found near U = -1 (last iterate U = {last_u}, residual = {residual:e})")]
    NoRootNearMinusOne { last_u: f64, residual: f64 },

    #[error("asymptotic matrix is not hyperbolic: eigenvalue with |Re| = {0:e}")]
    NotHyperbolic(f64),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("Newton iteration diverged (final residual = {residual:e})")]
    NewtonDiverged { residual: f64 },

    #[error("mesh too coarse: residual stagnated at {residual:e}")]
    MeshTooCoarse { residual: f64 },

    #[error("frame is rank deficient (smallest singular value = {0:e})")]
    RankDeficient(f64),

    #[error("linear transport blew up at xi = {xi}")]
    IntegratorBlowup { xi: f64 },

    #[error("Lagrangian residual {residual:e} exceeds tolerance at xi = {xi}")]
    LagrangianDrift { xi: f64, residual: f64 },

    #[error("reference-plane cutoff condition violated at xi = {xi} (det = {det:e})")]
    CutoffViolation { xi: f64, det: f64 },

    #[error("could not separate crossing candidates near xi = {xi}")]
    UnresolvedCrossing { xi: f64 },

    #[error("degenerate crossing at xi = {xi} (smallest form eigenvalue = {eigenvalue:e})")]
    DegenerateCrossing { xi: f64, eigenvalue: f64 },

    #[error("criterion margin {0:e} is below the marginal threshold (saddle-node regime)")]
    MarginalCase(f64),

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("no eigenfunction correlates with the wave derivative (best overlap = {best})")]
    TranslationNotFound { best: f64 },

    #[error("time step {dt} exceeds the explicit-reaction stability bound {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("simulation blow-up: sup|U| = {sup_u} at t = {t}")]
    Blowup { t: f64, sup_u: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
