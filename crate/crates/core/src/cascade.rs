//! Shock, liquidate, reprice: the fire-sale dynamics.
//!
//! A run starts from a fresh [`FinancialSystem`]. The shock either devalues
//! one asset by an exogenous factor or forces one bank into default. Then,
//! step after step, every insolvent bank that has not yet sold dumps its
//! whole portfolio; the volumes are summed per asset, the liquidated
//! fractions grow, all touched assets are repriced at once, and holders of
//! those assets are re-checked. The run stops at the first step that
//! produces no new failure.

use serde::{Deserialize, Serialize};

use crate::balance::{exceeds_equity, FinancialSystem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    Asset,
    Bank,
}

impl ShockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShockKind::Asset => "asset",
            ShockKind::Bank => "bank",
        }
    }
}

impl std::str::FromStr for ShockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asset" => Ok(ShockKind::Asset),
            "bank" => Ok(ShockKind::Bank),
            other => Err(Error::param(
                "shock.kind",
                format!("expected `asset` or `bank`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shock {
    /// Multiplies the asset's price by `1 - magnitude`, `magnitude` in (0, 1].
    AssetDevaluation { asset: usize, magnitude: f64 },
    /// Forces the bank into default; it sells everything in the first step.
    BankFailure { bank: usize },
}

impl Shock {
    pub fn kind(&self) -> ShockKind {
        match self {
            Shock::AssetDevaluation { .. } => ShockKind::Asset,
            Shock::BankFailure { .. } => ShockKind::Bank,
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Shock::AssetDevaluation { asset, .. } => asset,
            Shock::BankFailure { bank } => bank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub shock: Shock,
    /// Every failed bank, sorted.
    pub failed: Vec<usize>,
    /// Failure generations; entry 0 holds the banks down right after the shock.
    pub failures_by_step: Vec<Vec<usize>>,
    pub n_steps: usize,
    pub failed_fraction: f64,
    pub threshold: f64,
    pub is_global: bool,
    pub final_prices: Vec<f64>,
}

impl FinancialSystem {
    /// True when the bank's loss at current prices exceeds its initial equity.
    fn violates_solvency(&self, bank: usize) -> bool {
        let sheet = &self.sheets[bank];
        if sheet.holdings.is_empty() {
            return false;
        }
        exceeds_equity(self.loss(bank), sheet)
    }

    /// Evaluates `A_i^0 - sum_j Q_ij p_j^t <= E_i^0` at current prices. This
    /// is the balance-sheet test only; a bank forced down by a
    /// [`Shock::BankFailure`] may still pass it.
    pub fn is_solvent(&self, bank: usize) -> Result<bool> {
        self.check_bank(bank)?;
        Ok(!self.violates_solvency(bank))
    }

    /// Applies the initial shock and returns the banks that are insolvent
    /// immediately afterwards (sorted).
    pub fn apply_shock(&mut self, shock: Shock) -> Result<Vec<usize>> {
        if self.shocked {
            return Err(Error::AlreadyShocked);
        }
        match shock {
            Shock::AssetDevaluation { asset, magnitude } => {
                self.check_asset(asset)?;
                if !(magnitude > 0.0 && magnitude <= 1.0) {
                    return Err(Error::param(
                        "shock.magnitude",
                        format!("must lie in (0, 1], got {magnitude}"),
                    ));
                }
                self.shocked = true;
                self.market.shock_factor[asset] = 1.0 - magnitude;
                self.reprice(asset);
                let mut failed = Vec::new();
                for &bank in self.network.holders(asset) {
                    if self.solvent[bank] && self.violates_solvency(bank) {
                        self.solvent[bank] = false;
                        failed.push(bank);
                    }
                }
                Ok(failed)
            }
            Shock::BankFailure { bank } => {
                self.check_bank(bank)?;
                self.shocked = true;
                self.solvent[bank] = false;
                Ok(vec![bank])
            }
        }
    }

    /// One round of fire sales. Returns the banks that became insolvent in
    /// this round (sorted); empty means the cascade has reached its fixed point.
    pub fn step(&mut self) -> Vec<usize> {
        let sellers: Vec<usize> = (0..self.n_banks())
            .filter(|&b| !self.solvent[b] && !self.liquidated[b])
            .collect();
        if sellers.is_empty() {
            return Vec::new();
        }

        // Per-asset volumes are summed before any price moves.
        let mut volume: Vec<(usize, f64)> = sellers
            .iter()
            .flat_map(|&b| self.sheets[b].holdings.iter().map(|h| (h.asset, h.shares)))
            .collect();
        volume.sort_by_key(|&(a, _)| a);
        let mut touched = Vec::new();
        for chunk in volume.chunk_by(|x, y| x.0 == y.0) {
            let asset = chunk[0].0;
            let shares: f64 = chunk.iter().map(|&(_, q)| q).sum();
            let x = &mut self.market.liquidated_fraction[asset];
            *x = (*x + shares / self.market.total_shares[asset]).min(1.0);
            self.reprice(asset);
            touched.push(asset);
        }
        for &b in &sellers {
            self.liquidated[b] = true;
        }

        let mut newly: Vec<usize> = touched
            .iter()
            .flat_map(|&a| self.network.holders(a).iter().copied())
            .filter(|&b| self.solvent[b])
            .collect();
        newly.sort_unstable();
        newly.dedup();
        newly.retain(|&b| self.violates_solvency(b));
        for &b in &newly {
            self.solvent[b] = false;
        }
        newly
    }
}

/// Shocks a fresh system and iterates [`FinancialSystem::step`] to the fixed
/// point. A cascade is global when the failed fraction is at least
/// `global_threshold`.
pub fn run_cascade(
    sys: &mut FinancialSystem,
    shock: Shock,
    global_threshold: f64,
) -> Result<CascadeResult> {
    if !(0.0..=1.0).contains(&global_threshold) {
        return Err(Error::param(
            "global_threshold",
            format!("must lie in [0, 1], got {global_threshold}"),
        ));
    }
    let initial = sys.apply_shock(shock)?;
    let mut failures_by_step = Vec::new();
    if !initial.is_empty() {
        failures_by_step.push(initial);
        loop {
            let newly = sys.step();
            if newly.is_empty() {
                break;
            }
            failures_by_step.push(newly);
        }
    }
    let mut failed: Vec<usize> = failures_by_step.iter().flatten().copied().collect();
    failed.sort_unstable();
    let failed_fraction = failed.len() as f64 / sys.n_banks() as f64;
    Ok(CascadeResult {
        shock,
        n_steps: failures_by_step.len(),
        failed,
        failures_by_step,
        failed_fraction,
        threshold: global_threshold,
        is_global: failed_fraction >= global_threshold,
        final_prices: sys.market.prices.clone(),
    })
}
