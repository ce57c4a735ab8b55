//! Bipartite bank–asset networks.
//!
//! Banks and assets are indexed `0..n_banks` and `0..n_assets`. Links are
//! stored twice: each bank's portfolio (sorted asset indices) and each
//! asset's holders (sorted bank indices). Degree-0 nodes are legal.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// Resampling budget per bank for the degree-regular generator.
const REGULAR_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteNetwork {
    n_banks: usize,
    n_assets: usize,
    bank_portfolios: Vec<Vec<usize>>,
    asset_holders: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub mean_bank_degree: f64,
    pub mean_asset_degree: f64,
    /// `n = N / M`
    pub crowding: f64,
    /// Mean degree of the bank projection, `mu_a * mu_b`.
    pub projected_mean_degree: f64,
}

/// On-disk form: `{ "n_banks", "n_assets", "links": [[bank, asset], ...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    pub n_banks: usize,
    pub n_assets: usize,
    pub links: Vec<[usize; 2]>,
}

impl BipartiteNetwork {
    /// Builds a network from an explicit link list, rejecting duplicates and
    /// out-of-range indices.
    pub fn from_links(n_banks: usize, n_assets: usize, links: &[(usize, usize)]) -> Result<Self> {
        let mut bank_portfolios = vec![Vec::new(); n_banks];
        for &(bank, asset) in links {
            if bank >= n_banks {
                return Err(Error::InvalidNetwork(format!(
                    "bank index {bank} out of range (n_banks = {n_banks})"
                )));
            }
            if asset >= n_assets {
                return Err(Error::InvalidNetwork(format!(
                    "asset index {asset} out of range (n_assets = {n_assets})"
                )));
            }
            bank_portfolios[bank].push(asset);
        }
        for (bank, portfolio) in bank_portfolios.iter_mut().enumerate() {
            portfolio.sort_unstable();
            if let Some(w) = portfolio.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate link ({bank}, {})",
                    w[0]
                )));
            }
        }
        Ok(Self::from_portfolios(n_assets, bank_portfolios))
    }

    /// Assumes every portfolio is sorted, duplicate-free and in range.
    fn from_portfolios(n_assets: usize, bank_portfolios: Vec<Vec<usize>>) -> Self {
        let mut asset_holders = vec![Vec::new(); n_assets];
        for (bank, portfolio) in bank_portfolios.iter().enumerate() {
            for &asset in portfolio {
                asset_holders[asset].push(bank);
            }
        }
        Self {
            n_banks: bank_portfolios.len(),
            n_assets,
            bank_portfolios,
            asset_holders,
        }
    }

    /// Bipartite Erdős–Rényi ensemble: every bank–asset pair is linked
    /// independently with probability `mean_bank_degree / n_assets`.
    ///
    /// Each bank draws its degree from `Binomial(M, p)` and then a uniform
    /// subset of that size, which is the same law as `M` independent coin
    /// flips but costs O(degree) instead of O(M).
    pub fn poisson(
        n_banks: usize,
        n_assets: usize,
        mean_bank_degree: f64,
        seed: u64,
    ) -> Result<Self> {
        check_sizes(n_banks, n_assets)?;
        if !mean_bank_degree.is_finite() || mean_bank_degree < 0.0 {
            return Err(Error::param(
                "mean_bank_degree",
                format!("must be a finite value >= 0, got {mean_bank_degree}"),
            ));
        }
        let p = mean_bank_degree / n_assets as f64;
        if p > 1.0 {
            return Err(Error::param(
                "mean_bank_degree",
                format!("link probability {p} = mu_b / M exceeds 1"),
            ));
        }
        let mut rng = seed::rng(seed);
        let degree_law = Binomial::new(n_assets as u64, p)
            .map_err(|e| Error::param("mean_bank_degree", e.to_string()))?;
        let portfolios = (0..n_banks)
            .map(|_| {
                let k = degree_law.sample(&mut rng) as usize;
                let mut assets = index::sample(&mut rng, n_assets, k).into_vec();
                assets.sort_unstable();
                assets
            })
            .collect();
        Ok(Self::from_portfolios(n_assets, portfolios))
    }

    /// Every bank holds exactly `bank_degree` distinct assets. Each bank's
    /// stubs are matched to uniformly random assets; a bank whose draw hits
    /// the same asset twice is redrawn, up to a fixed attempt budget.
    /// Asset degrees come out approximately Poisson with mean `kN/M`.
    pub fn regular(n_banks: usize, n_assets: usize, bank_degree: usize, seed: u64) -> Result<Self> {
        check_sizes(n_banks, n_assets)?;
        let fail = Error::RegularGraph {
            degree: bank_degree,
            n_assets,
            attempts: REGULAR_MAX_ATTEMPTS,
        };
        if bank_degree > n_assets {
            return Err(fail);
        }
        let mut rng = seed::rng(seed);
        let mut portfolios = Vec::with_capacity(n_banks);
        let mut stubs = Vec::with_capacity(bank_degree);
        for _ in 0..n_banks {
            let mut matched = false;
            for _ in 0..REGULAR_MAX_ATTEMPTS {
                stubs.clear();
                stubs.extend((0..bank_degree).map(|_| rng.random_range(0..n_assets)));
                stubs.sort_unstable();
                if stubs.windows(2).all(|w| w[0] != w[1]) {
                    matched = true;
                    break;
                }
            }
            if !matched {
                return Err(fail);
            }
            portfolios.push(stubs.clone());
        }
        Ok(Self::from_portfolios(n_assets, portfolios))
    }

    pub fn n_banks(&self) -> usize {
        self.n_banks
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    /// Sorted asset indices held by `bank`.
    pub fn portfolio(&self, bank: usize) -> &[usize] {
        &self.bank_portfolios[bank]
    }

    /// Sorted bank indices holding `asset`.
    pub fn holders(&self, asset: usize) -> &[usize] {
        &self.asset_holders[asset]
    }

    pub fn bank_degree(&self, bank: usize) -> usize {
        self.bank_portfolios[bank].len()
    }

    pub fn asset_degree(&self, asset: usize) -> usize {
        self.asset_holders[asset].len()
    }

    pub fn n_links(&self) -> usize {
        self.bank_portfolios.iter().map(Vec::len).sum()
    }

    /// Links in (bank, asset) lexicographic order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bank_portfolios
            .iter()
            .enumerate()
            .flat_map(|(b, p)| p.iter().map(move |&a| (b, a)))
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let links = self.n_links() as f64;
        let mean_bank_degree = links / self.n_banks as f64;
        let mean_asset_degree = links / self.n_assets as f64;
        DegreeStats {
            mean_bank_degree,
            mean_asset_degree,
            crowding: self.n_banks as f64 / self.n_assets as f64,
            projected_mean_degree: mean_bank_degree * mean_asset_degree,
        }
    }

    pub fn to_json(&self) -> NetworkJson {
        NetworkJson {
            n_banks: self.n_banks,
            n_assets: self.n_assets,
            links: self.links().map(|(b, a)| [b, a]).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(s)?;
        Self::try_from(raw)
    }
}

impl TryFrom<NetworkJson> for BipartiteNetwork {
    type Error = Error;

    fn try_from(raw: NetworkJson) -> Result<Self> {
        check_sizes(raw.n_banks, raw.n_assets).map_err(|e| Error::InvalidNetwork(e.to_string()))?;
        let links: Vec<_> = raw.links.iter().map(|l| (l[0], l[1])).collect();
        Self::from_links(raw.n_banks, raw.n_assets, &links)
    }
}

fn check_sizes(n_banks: usize, n_assets: usize) -> Result<()> {
    if n_banks == 0 {
        return Err(Error::param("n_banks", "must be at least 1"));
    }
    if n_assets == 0 {
        return Err(Error::param("n_assets", "must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Four banks, three assets, six links: the textbook picture.
    fn figure_one() -> BipartiteNetwork {
        BipartiteNetwork::from_links(4, 3, &[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2)])
            .unwrap()
    }

    #[test]
    fn figure_one_degrees() {
        let s = figure_one().degree_stats();
        assert_eq!(s.mean_bank_degree, 1.5);
        assert_eq!(s.mean_asset_degree, 2.0);
        assert!((s.crowding - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.projected_mean_degree, 3.0);
    }

    #[test]
    fn empty_network_stats() {
        let net = BipartiteNetwork::poisson(100, 100, 0.0, 1).unwrap();
        assert_eq!(net.n_links(), 0);
        let s = net.degree_stats();
        assert_eq!(s.mean_bank_degree, 0.0);
        assert_eq!(s.mean_asset_degree, 0.0);
        assert_eq!(s.crowding, 1.0);
        assert_eq!(s.projected_mean_degree, 0.0);
    }

    #[test]
    fn holders_are_the_transpose() {
        let net = BipartiteNetwork::poisson(300, 200, 4.0, 11).unwrap();
        let mut from_holders: Vec<_> = (0..net.n_assets())
            .flat_map(|a| net.holders(a).iter().map(move |&b| (b, a)))
            .collect();
        from_holders.sort_unstable();
        let from_portfolios: Vec<_> = net.links().collect();
        assert_eq!(from_holders, from_portfolios);
    }

    #[test]
    fn rejects_duplicates_and_bad_indices() {
        assert!(matches!(
            BipartiteNetwork::from_links(2, 2, &[(0, 1), (0, 1)]),
            Err(Error::InvalidNetwork(_))
        ));
        assert!(BipartiteNetwork::from_links(2, 2, &[(2, 0)]).is_err());
        assert!(BipartiteNetwork::from_links(2, 2, &[(0, 2)]).is_err());
    }

    #[test]
    fn poisson_rejects_probability_above_one() {
        assert!(BipartiteNetwork::poisson(10, 5, 5.0, 0).is_ok());
        assert!(matches!(
            BipartiteNetwork::poisson(10, 5, 5.5, 0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(BipartiteNetwork::poisson(10, 5, -1.0, 0).is_err());
        assert!(BipartiteNetwork::poisson(0, 5, 1.0, 0).is_err());
    }

    #[test]
    fn poisson_is_seed_deterministic() {
        let a = BipartiteNetwork::poisson(500, 400, 3.0, 99).unwrap();
        let b = BipartiteNetwork::poisson(500, 400, 3.0, 99).unwrap();
        let c = BipartiteNetwork::poisson(500, 400, 3.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_mean_degree_within_three_standard_errors() {
        // Total links over 50 seeds ~ Binomial(50 * N * M, mu_b / M).
        let (n, m, mu) = (2000usize, 2000usize, 5.0);
        let seeds = 50u64;
        let total: usize = (0..seeds)
            .map(|s| BipartiteNetwork::poisson(n, m, mu, s).unwrap().n_links())
            .sum();
        let mean = total as f64 / (seeds as f64 * n as f64);
        let p = mu / m as f64;
        let var_total = seeds as f64 * (n * m) as f64 * p * (1.0 - p);
        let se_mean = var_total.sqrt() / (seeds as f64 * n as f64);
        assert!(
            (mean - mu).abs() < 3.0 * se_mean,
            "mean {mean}, se {se_mean}"
        );
    }

    #[test]
    fn poisson_projected_degree_near_mu_b_squared() {
        let net = BipartiteNetwork::poisson(2000, 2000, 2.0, 5).unwrap();
        let s = net.degree_stats();
        // mu_b has sd sqrt(2/2000) ~ 0.032, so mu_b^2 has sd ~ 0.13.
        assert!((s.projected_mean_degree - 4.0).abs() < 0.4, "{s:?}");
    }

    #[test]
    fn poisson_degree_histogram_fits_poisson() {
        // Chi-square goodness of fit of pooled bank degrees against Poisson(mu_b).
        let mu = 3.0;
        let mut counts = [0usize; 9]; // 0..=7 and a ">= 8" bin
        let mut total = 0usize;
        for s in 0..20 {
            let net = BipartiteNetwork::poisson(1000, 1000, mu, 1000 + s).unwrap();
            for b in 0..net.n_banks() {
                counts[net.bank_degree(b).min(8)] += 1;
                total += 1;
            }
        }
        let mut pmf = [0.0f64; 9];
        let mut term = (-mu).exp();
        for (k, slot) in pmf.iter_mut().enumerate().take(8) {
            *slot = term;
            term *= mu / (k + 1) as f64;
        }
        pmf[8] = 1.0 - pmf[..8].iter().sum::<f64>();
        let chi2: f64 = counts
            .iter()
            .zip(pmf)
            .map(|(&o, p)| {
                let e = p * total as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 8 degrees of freedom; the 0.999 quantile is 26.12.
        assert!(chi2 < 26.12, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn regular_degree_one_is_a_matching_per_bank() {
        let net = BipartiteNetwork::regular(10, 10, 1, 3).unwrap();
        assert!((0..10).all(|b| net.bank_degree(b) == 1));
        assert_eq!(net.n_links(), 10);
    }

    #[test]
    fn regular_complete_when_degree_equals_assets() {
        let net = BipartiteNetwork::regular(6, 3, 3, 4).unwrap();
        assert!((0..6).all(|b| net.bank_degree(b) == 3));
        assert!((0..3).all(|a| net.asset_degree(a) == 6));
    }

    #[test]
    fn regular_asset_degrees_average_k_n() {
        let net = BipartiteNetwork::regular(1000, 1000, 5, 8).unwrap();
        let degrees: Vec<usize> = (0..1000).map(|a| net.asset_degree(a)).collect();
        let mean = degrees.iter().sum::<usize>() as f64 / 1000.0;
        assert_eq!(mean, 5.0);
        // Asset degrees are ~ Binomial(5000, 1/1000): variance close to 5.
        let var = degrees
            .iter()
            .map(|&d| (d as f64 - mean).powi(2))
            .sum::<f64>()
            / 999.0;
        assert!((var - 5.0).abs() < 1.0, "variance {var}");
        assert!((0..1000).all(|b| net.bank_degree(b) == 5));
    }

    #[test]
    fn regular_fails_when_degree_exceeds_assets() {
        assert!(matches!(
            BipartiteNetwork::regular(5, 3, 4, 0),
            Err(Error::RegularGraph { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let net = figure_one();
        let s = serde_json::to_string(&net.to_json()).unwrap();
        assert_eq!(BipartiteNetwork::from_json_str(&s).unwrap(), net);
        let dup = r#"{"n_banks":2,"n_assets":1,"links":[[0,0],[0,0]]}"#;
        assert!(BipartiteNetwork::from_json_str(dup).is_err());
        let zero = r#"{"n_banks":0,"n_assets":1,"links":[]}"#;
        assert!(BipartiteNetwork::from_json_str(zero).is_err());
    }
}
