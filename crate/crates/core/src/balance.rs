//! Balance sheets, market state and the market-impact function.
//!
//! Currency is expressed in units of a bank's initial risky portfolio,
//! `A0 = 1`. Cash is a quarter of that (an 80/20 risky/cash split) and
//! equity is `A0 / leverage`; liabilities close the identity
//! `E0 = A0 + C - L`. Prices start at 1 unless a loaded system says
//! otherwise.

use serde::{Deserialize, Serialize};

use crate::network::BipartiteNetwork;
use crate::{Error, Result};

/// Initial risky portfolio of every bank built by [`FinancialSystem::uniform`].
pub const UNIT_PORTFOLIO: f64 = 1.0;
/// Cash held alongside the unit portfolio (20% of total assets).
pub const CASH_PER_UNIT_PORTFOLIO: f64 = 0.25;

/// Losses within this relative margin of equity are treated as equal to it,
/// so that boundary cases such as `0.35 / 7 == 1 / 20` do not flip on
/// rounding.
pub const SOLVENCY_RTOL: f64 = 1e-12;

/// `f(x) = exp(-alpha x)`: price multiplier after liquidating a fraction `x`
/// of an asset's shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactFunction {
    alpha: f64,
}

impl ImpactFunction {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be finite and > 0, got {alpha}"),
            ));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn factor(&self, liquidated: f64) -> f64 {
        (-self.alpha * liquidated).exp()
    }
}

/// Impact strength such that liquidating `at_liquidated` of an asset drops
/// its price by the fraction `drop`: `alpha = -ln(1 - drop) / at_liquidated`.
pub fn calibrate_alpha(drop: f64, at_liquidated: f64) -> Result<f64> {
    if !(drop > 0.0 && drop < 1.0) {
        return Err(Error::param(
            "drop",
            format!("must lie in (0, 1), got {drop}"),
        ));
    }
    if !(at_liquidated > 0.0 && at_liquidated <= 1.0) {
        return Err(Error::param(
            "at_liquidated",
            format!("must lie in (0, 1], got {at_liquidated}"),
        ));
    }
    Ok(-(-drop).ln_1p() / at_liquidated)
}

/// Whether a mark-to-market `loss` wipes out the bank's initial equity.
pub(crate) fn exceeds_equity(loss: f64, sheet: &BalanceSheet) -> bool {
    loss - sheet.initial_equity
        > SOLVENCY_RTOL * (sheet.initial_risky_assets + sheet.initial_equity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holding {
    pub asset: usize,
    pub shares: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSheet {
    /// Sorted by asset; one entry per link of the bank.
    pub holdings: Vec<Holding>,
    pub cash: f64,
    pub liabilities: f64,
    pub initial_equity: f64,
    pub initial_risky_assets: f64,
    /// `A0 / E0`; recorded as 1 for banks without risky assets.
    pub leverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub initial_prices: Vec<f64>,
    pub prices: Vec<f64>,
    /// Exogenous multiplier applied by an asset shock (1 when unshocked).
    pub shock_factor: Vec<f64>,
    /// Cumulative fraction `x_j` of each asset's shares sold in fire sales.
    pub liquidated_fraction: Vec<f64>,
    /// Shares of each asset held across all banks at t = 0.
    pub total_shares: Vec<f64>,
}

impl MarketState {
    fn new(initial_prices: Vec<f64>, total_shares: Vec<f64>) -> Self {
        let m = initial_prices.len();
        Self {
            prices: initial_prices.clone(),
            initial_prices,
            shock_factor: vec![1.0; m],
            liquidated_fraction: vec![0.0; m],
            total_shares,
        }
    }
}

/// A network with balance sheets and market state attached. Mutated in
/// place by the cascade; clone it to run the same system again.
#[derive(Debug, Clone)]
pub struct FinancialSystem {
    pub(crate) network: BipartiteNetwork,
    pub(crate) sheets: Vec<BalanceSheet>,
    pub(crate) market: MarketState,
    pub(crate) impact: ImpactFunction,
    pub(crate) solvent: Vec<bool>,
    pub(crate) liquidated: Vec<bool>,
    pub(crate) shocked: bool,
}

impl FinancialSystem {
    /// Homogeneous balance sheets: each bank splits a unit portfolio evenly
    /// over its `k_i` assets (so `Q_ij = 1 / k_i` shares at unit price),
    /// holds cash `0.25`, equity `1 / leverage`, and liabilities closing the
    /// balance sheet. Banks without assets hold only cash and can never fail.
    pub fn uniform(network: BipartiteNetwork, leverage: f64, alpha: f64) -> Result<Self> {
        if !(leverage.is_finite() && leverage > 0.0) {
            return Err(Error::param(
                "leverage",
                format!("must be finite and > 0, got {leverage}"),
            ));
        }
        let impact = ImpactFunction::new(alpha)?;
        let sheets = (0..network.n_banks())
            .map(|bank| {
                let portfolio = network.portfolio(bank);
                if portfolio.is_empty() {
                    return BalanceSheet {
                        holdings: Vec::new(),
                        cash: CASH_PER_UNIT_PORTFOLIO,
                        liabilities: 0.0,
                        initial_equity: CASH_PER_UNIT_PORTFOLIO,
                        initial_risky_assets: 0.0,
                        leverage: 1.0,
                    };
                }
                let shares = UNIT_PORTFOLIO / portfolio.len() as f64;
                let equity = UNIT_PORTFOLIO / leverage;
                BalanceSheet {
                    holdings: portfolio
                        .iter()
                        .map(|&asset| Holding { asset, shares })
                        .collect(),
                    cash: CASH_PER_UNIT_PORTFOLIO,
                    liabilities: UNIT_PORTFOLIO + CASH_PER_UNIT_PORTFOLIO - equity,
                    initial_equity: equity,
                    initial_risky_assets: UNIT_PORTFOLIO,
                    leverage,
                }
            })
            .collect();
        let prices = vec![1.0; network.n_assets()];
        Ok(Self::assemble(network, sheets, prices, impact))
    }

    fn assemble(
        network: BipartiteNetwork,
        sheets: Vec<BalanceSheet>,
        initial_prices: Vec<f64>,
        impact: ImpactFunction,
    ) -> Self {
        let mut total_shares = vec![0.0; network.n_assets()];
        for sheet in &sheets {
            for h in &sheet.holdings {
                total_shares[h.asset] += h.shares;
            }
        }
        let n = network.n_banks();
        Self {
            network,
            sheets,
            market: MarketState::new(initial_prices, total_shares),
            impact,
            solvent: vec![true; n],
            liquidated: vec![false; n],
            shocked: false,
        }
    }

    pub fn network(&self) -> &BipartiteNetwork {
        &self.network
    }

    pub fn sheets(&self) -> &[BalanceSheet] {
        &self.sheets
    }

    pub fn sheet(&self, bank: usize) -> &BalanceSheet {
        &self.sheets[bank]
    }

    pub fn market(&self) -> &MarketState {
        &self.market
    }

    pub fn impact(&self) -> ImpactFunction {
        self.impact
    }

    pub fn n_banks(&self) -> usize {
        self.network.n_banks()
    }

    pub fn n_assets(&self) -> usize {
        self.network.n_assets()
    }

    pub fn solvent_flags(&self) -> &[bool] {
        &self.solvent
    }

    pub(crate) fn check_bank(&self, bank: usize) -> Result<()> {
        if bank < self.n_banks() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "bank",
                index: bank,
                len: self.n_banks(),
            })
        }
    }

    pub(crate) fn check_asset(&self, asset: usize) -> Result<()> {
        if asset < self.n_assets() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "asset",
                index: asset,
                len: self.n_assets(),
            })
        }
    }

    /// `A_i^t = sum_j Q_ij p_j^t` at current prices.
    pub fn portfolio_value(&self, bank: usize) -> Result<f64> {
        self.check_bank(bank)?;
        Ok(self.sheets[bank]
            .holdings
            .iter()
            .map(|h| h.shares * self.market.prices[h.asset])
            .sum())
    }

    /// Mark-to-market loss `sum_j Q_ij (p_j^0 - p_j^t)` relative to the
    /// initial portfolio.
    pub(crate) fn loss(&self, bank: usize) -> f64 {
        let m = &self.market;
        self.sheets[bank]
            .holdings
            .iter()
            .map(|h| h.shares * (m.initial_prices[h.asset] - m.prices[h.asset]))
            .sum()
    }

    /// Recomputes `p_j = p_j^0 * shock_j * f(x_j)`.
    pub(crate) fn reprice(&mut self, asset: usize) {
        let m = &mut self.market;
        m.prices[asset] = m.initial_prices[asset]
            * m.shock_factor[asset]
            * self.impact.factor(m.liquidated_fraction[asset]);
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: SystemJson = serde_json::from_str(s)?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> SystemJson {
        SystemJson {
            n_banks: self.n_banks(),
            n_assets: self.n_assets(),
            links: Some(self.network.links().map(|(b, a)| [b, a]).collect()),
            alpha: Some(self.impact.alpha()),
            banks: self
                .sheets
                .iter()
                .map(|s| BankJson {
                    cash: s.cash,
                    liabilities: s.liabilities,
                    holdings: s.holdings.clone(),
                    equity: Some(s.initial_equity),
                    leverage: Some(s.leverage),
                })
                .collect(),
            assets: self
                .market
                .initial_prices
                .iter()
                .map(|&price| AssetJson { price })
                .collect(),
        }
    }
}

/// On-disk form of a full system. `links` may be omitted, in which case it is
/// taken from the holdings; `equity` and `leverage` are optional and, when
/// present, must agree with the recomputed values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    pub n_banks: usize,
    pub n_assets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub banks: Vec<BankJson>,
    pub assets: Vec<AssetJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankJson {
    pub cash: f64,
    pub liabilities: f64,
    pub holdings: Vec<Holding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leverage: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetJson {
    pub price: f64,
}

impl TryFrom<SystemJson> for FinancialSystem {
    type Error = Error;

    fn try_from(raw: SystemJson) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSystem(msg);
        if raw.banks.len() != raw.n_banks {
            return Err(bad(format!(
                "{} bank entries for n_banks = {}",
                raw.banks.len(),
                raw.n_banks
            )));
        }
        if raw.assets.len() != raw.n_assets {
            return Err(bad(format!(
                "{} asset entries for n_assets = {}",
                raw.assets.len(),
                raw.n_assets
            )));
        }
        let impact = ImpactFunction::new(raw.alpha.unwrap_or(crate::DEFAULT_ALPHA))?;
        let prices: Vec<f64> = raw.assets.iter().map(|a| a.price).collect();
        if let Some(j) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(bad(format!("asset {j}: price must be finite and > 0")));
        }

        let holding_links: Vec<(usize, usize)> = raw
            .banks
            .iter()
            .enumerate()
            .flat_map(|(b, bank)| bank.holdings.iter().map(move |h| (b, h.asset)))
            .collect();
        let network = BipartiteNetwork::from_links(raw.n_banks, raw.n_assets, &holding_links)?;
        if let Some(links) = &raw.links {
            let listed: Vec<_> = links.iter().map(|l| (l[0], l[1])).collect();
            let listed = BipartiteNetwork::from_links(raw.n_banks, raw.n_assets, &listed)?;
            if listed != network {
                return Err(bad("links do not match the banks' holdings".into()));
            }
        }

        let mut sheets = Vec::with_capacity(raw.n_banks);
        for (b, bank) in raw.banks.into_iter().enumerate() {
            let mut holdings = bank.holdings;
            holdings.sort_by_key(|h| h.asset);
            if let Some(h) = holdings
                .iter()
                .find(|h| !(h.shares.is_finite() && h.shares > 0.0))
            {
                return Err(bad(format!(
                    "bank {b}: shares of asset {} must be > 0",
                    h.asset
                )));
            }
            if !(bank.cash.is_finite() && bank.cash >= 0.0) {
                return Err(bad(format!("bank {b}: cash must be finite and >= 0")));
            }
            if !bank.liabilities.is_finite() || bank.liabilities < 0.0 {
                return Err(bad(format!(
                    "bank {b}: liabilities must be finite and >= 0"
                )));
            }
            let risky: f64 = holdings.iter().map(|h| h.shares * prices[h.asset]).sum();
            let mut equity = risky + bank.cash - bank.liabilities;
            if equity <= 0.0 {
                return Err(bad(format!(
                    "bank {b}: initial equity {equity} must be > 0"
                )));
            }
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
            // Stated values that agree with the recomputed ones are kept
            // verbatim so that a saved system reloads bit for bit.
            if let Some(e) = bank.equity {
                if !close(e, equity) {
                    return Err(bad(format!(
                        "bank {b}: stated equity {e} != assets + cash - liabilities = {equity}"
                    )));
                }
                equity = e;
            }
            let mut leverage = if risky > 0.0 { risky / equity } else { 1.0 };
            if let Some(l) = bank.leverage {
                if !close(l, leverage) {
                    return Err(bad(format!(
                        "bank {b}: stated leverage {l} != risky assets / equity = {leverage}"
                    )));
                }
                leverage = l;
            }
            sheets.push(BalanceSheet {
                holdings,
                cash: bank.cash,
                liabilities: bank.liabilities,
                initial_equity: equity,
                initial_risky_assets: risky,
                leverage,
            });
        }
        Ok(Self::assemble(network, sheets, prices, impact))
    }
}
