//! Fire-sale contagion on bipartite bank–asset networks.
//!
//! Banks hold overlapping portfolios of assets. When a bank becomes
//! insolvent its whole portfolio is liquidated, the liquidation depresses
//! prices through a market-impact function, and the resulting losses can
//! push other leveraged banks under. This crate provides:
//!
//! * [`network`]: random bipartite ensembles (Poisson and degree-regular banks).
//! * [`balance`]: balance sheets, market state and the impact function.
//! * [`cascade`]: the shock / liquidate / reprice dynamics.
//! * [`montecarlo`]: seeded ensembles and parameter sweeps.
//! * [`stability`]: the exact stability matrix of a given system, the
//!   degree-typed branching matrix, its Perron root and phase boundaries.

pub mod balance;
pub mod cascade;
mod error;
pub mod montecarlo;
pub mod network;
pub mod seed;
pub mod stability;

pub use balance::{calibrate_alpha, BalanceSheet, FinancialSystem, ImpactFunction, MarketState};
pub use cascade::{run_cascade, CascadeResult, Shock, ShockKind};
pub use error::{Error, Result};
pub use montecarlo::{
    estimate_transition, run_ensemble, sweep, EnsembleStats, ExperimentConfig, ShockSpec,
    SweepAxis, SweepRow,
};
pub use network::{BipartiteNetwork, DegreeStats};
pub use stability::{
    branching_matrix, closed_form_xi1, largest_eigenvalue, phase_boundary, stability_matrix_exact,
    BranchingMatrix, BranchingParams, DegreeLaw, MonteCarloParams, PhaseAxis, SquareMatrix,
    StabilityMatrixExact,
};

/// Market-impact strength for which a 10% liquidation moves the price down by 10%.
pub const DEFAULT_ALPHA: f64 = 1.0536;
/// Default leverage `A / E` of every bank.
pub const DEFAULT_LEVERAGE: f64 = 20.0;
/// Default devaluation applied to the shocked asset.
pub const DEFAULT_ASSET_SHOCK: f64 = 0.35;
/// Fraction of failed banks at or above which a cascade counts as global.
pub const DEFAULT_GLOBAL_THRESHOLD: f64 = 0.05;
