//! Stability of the banking system as a branching process of failures.
//!
//! Two views are provided. For a concrete system, [`stability_matrix_exact`]
//! records which banks fail outright when a single other bank liquidates
//! at initial prices. For the random ensemble, banks are typed by degree
//! and [`branching_matrix`] gives the expected number of degree-`h`
//! failures directly caused by one degree-`k` failure:
//!
//! ```text
//! N_hk = P_b(h) * h (k - 1) / (mu_b^2 n) * sum_ℓ P_a(ℓ) ℓ (ℓ - 1) F(h, k, ℓ)
//! ```
//!
//! with Poisson bank and asset degrees (`mu_a = mu_b n`). The cascade is
//! supercritical when the Perron root `xi_1` of `N` exceeds 1.

mod eigen;
pub mod gamma;
pub mod kernel;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::balance::{exceeds_equity, FinancialSystem};
use crate::{Error, Result};

pub use eigen::{largest_eigenvalue, SquareMatrix};
pub use kernel::{estimate_f, fails, sample_size_biased_degree, DegreeLaw, FailureKernel};

use kernel::poisson_pmf;

/// Truncation of the asset-degree sum: stop once past the mean and the next
/// weight `ℓ(ℓ-1) P_a(ℓ)` is below this fraction of the running sum.
pub const ELL_SUM_RTOL: f64 = 1e-12;
/// Relative tolerance used for `xi_1`.
pub const EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMatrixExact {
    /// `entries[i][j] = 1` when bank `j`'s liquidation alone sinks bank `i`.
    pub entries: SquareMatrix,
    pub spectral_radius: f64,
}

/// Exact one-step stability matrix of a system at its initial prices.
pub fn stability_matrix_exact(sys: &FinancialSystem) -> Result<StabilityMatrixExact> {
    let n = sys.n_banks();
    let net = sys.network();
    let market = sys.market();
    let impact = sys.impact();
    let mut entries = SquareMatrix::zeros(n);
    let mut loss = vec![0.0; n];
    let mut hit = Vec::new();
    for j in 0..n {
        for h in &sys.sheet(j).holdings {
            let a = h.asset;
            let drop = -impact.factor(h.shares / market.total_shares[a]) + 1.0;
            for &i in net.holders(a) {
                if i == j {
                    continue;
                }
                let q = sys
                    .sheet(i)
                    .holdings
                    .iter()
                    .find(|x| x.asset == a)
                    .map_or(0.0, |x| x.shares);
                if loss[i] == 0.0 {
                    hit.push(i);
                }
                loss[i] += q * market.initial_prices[a] * drop;
            }
        }
        for &i in &hit {
            if exceeds_equity(loss[i], sys.sheet(i)) {
                entries.set(i, j, 1.0);
            }
            loss[i] = 0.0;
        }
        hit.clear();
    }
    let spectral_radius = largest_eigenvalue(&entries, EIGEN_TOL)?;
    Ok(StabilityMatrixExact {
        entries,
        spectral_radius,
    })
}

/// Ensemble parameters of the branching matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingParams {
    pub mu_b: f64,
    /// Crowding `N / M`.
    pub n: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl BranchingParams {
    fn validate(&self) -> Result<()> {
        let pos = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        pos("mu_b", self.mu_b)?;
        pos("n", self.n)?;
        pos("lambda", self.lambda)?;
        pos("alpha", self.alpha)
    }
}

/// Truncation and sampling controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloParams {
    /// Largest bank degree kept as a type.
    pub k_max: usize,
    /// Sample paths of co-holder degrees.
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        Self {
            k_max: 200,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchingMatrix {
    /// `entries[h-1][k-1] = N_hk` for degree types `1..=k_max`.
    pub entries: SquareMatrix,
    pub law: DegreeLaw,
    pub params: BranchingParams,
    pub k_max: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Largest asset degree included in the `ℓ` sum.
    pub ell_max: usize,
    pub spectral_radius: f64,
}

impl BranchingMatrix {
    pub fn get(&self, h: usize, k: usize) -> f64 {
        self.entries.get(h - 1, k - 1)
    }

    /// Nonzero entries as `h,k,value` lines; absent entries are zero.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "h,k,value")?;
        for h in 1..=self.k_max {
            for k in 1..=self.k_max {
                let v = self.get(h, k);
                if v != 0.0 {
                    writeln!(out, "{h},{k},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Asset-degree weights `ℓ(ℓ-1) P_a(ℓ)` for `ℓ = 2..=ell_max`.
fn asset_weights(mu_a: f64) -> Vec<f64> {
    let mut weights = Vec::new();
    let mut total = 0.0;
    for ell in 2usize.. {
        let w = (ell * (ell - 1)) as f64 * poisson_pmf(mu_a, ell);
        if ell as f64 > mu_a + 2.0 && w < ELL_SUM_RTOL * total {
            break;
        }
        total += w;
        weights.push(w);
    }
    weights
}

/// Largest asset degree the `ℓ` sum reaches at mean asset degree `mu_a`.
pub fn ell_cutoff(mu_a: f64) -> usize {
    asset_weights(mu_a).len() + 1
}

/// Branching matrices for one bank-degree law, sharing a single sampled
/// [`FailureKernel`] across crowding, leverage and impact values.
#[derive(Debug, Clone)]
pub struct BranchingModel {
    kernel: FailureKernel,
    mc: MonteCarloParams,
}

impl BranchingModel {
    /// The kernel covers asset degrees needed for crowding up to `max_crowding`.
    pub fn new(law: DegreeLaw, max_crowding: f64, mc: MonteCarloParams) -> Result<Self> {
        if mc.k_max == 0 {
            return Err(Error::param("k_max", "must be >= 1"));
        }
        if !(max_crowding.is_finite() && max_crowding > 0.0) {
            return Err(Error::param(
                "n",
                format!("must be finite and > 0, got {max_crowding}"),
            ));
        }
        let ell_max = ell_cutoff(law.mean() * max_crowding);
        let kernel = FailureKernel::new(law, ell_max, mc.samples, mc.seed)?;
        Ok(Self { kernel, mc })
    }

    pub fn law(&self) -> DegreeLaw {
        self.kernel.law()
    }

    pub fn matrix(&self, n: f64, lambda: f64, alpha: f64) -> Result<BranchingMatrix> {
        let law = self.kernel.law();
        let mu_b = law.mean();
        let params = BranchingParams {
            mu_b,
            n,
            lambda,
            alpha,
        };
        params.validate()?;
        let weights = asset_weights(mu_b * n);
        let ell_max = weights.len() + 1;
        if ell_max > self.kernel.max_asset_degree() {
            return Err(Error::param(
                "n",
                format!("crowding {n} needs asset degrees beyond the sampled kernel ({ell_max})"),
            ));
        }
        let k_max = self.mc.k_max;
        let norm = mu_b * mu_b * n;
        let mut entries = SquareMatrix::zeros(k_max);
        for h in 1..=k_max {
            if h as f64 >= lambda {
                break;
            }
            let ph = law.pmf(h);
            if ph == 0.0 {
                continue;
            }
            for k in 2..=k_max {
                let mut acc = 0.0;
                for (i, &w) in weights.iter().enumerate() {
                    let f = self.kernel.failure_probability(h, k, i + 2, lambda, alpha);
                    // F is nonincreasing in ℓ: nothing further contributes.
                    if f == 0.0 {
                        break;
                    }
                    acc += w * f;
                }
                // F is nonincreasing in k too, so once the two-holder case
                // cannot fail no larger k can.
                if acc == 0.0 {
                    break;
                }
                entries.set(h - 1, k - 1, ph * (h * (k - 1)) as f64 / norm * acc);
            }
        }
        let spectral_radius = largest_eigenvalue(&entries, EIGEN_TOL)?;
        Ok(BranchingMatrix {
            entries,
            law,
            params,
            k_max,
            mc_samples: self.mc.samples,
            seed: self.mc.seed,
            ell_max,
            spectral_radius,
        })
    }

    pub fn xi1(&self, n: f64, lambda: f64, alpha: f64) -> Result<f64> {
        Ok(self.matrix(n, lambda, alpha)?.spectral_radius)
    }
}

/// Degree-typed branching matrix for Poisson bank degrees.
pub fn branching_matrix(params: BranchingParams, mc: MonteCarloParams) -> Result<BranchingMatrix> {
    params.validate()?;
    BranchingModel::new(DegreeLaw::Poisson { mean: params.mu_b }, params.n, mc)?.matrix(
        params.n,
        params.lambda,
        params.alpha,
    )
}

/// Closed-form Perron root for banks that all have degree `k`:
///
/// ```text
/// xi_1 = (k - 1) mu_b n Q(ℓ* - 1, mu_b n),   ℓ* = 1 / ln(λ / (λ - k))
/// ```
///
/// with `Q` the regularized upper incomplete gamma function. Returns 0 for
/// `k = 1`, for `k >= λ` (such banks never fail through one asset) and when
/// `ℓ* <= 1`, where no asset is shared by few enough banks.
pub fn closed_form_xi1(k: usize, mu_b: f64, n: f64, lambda: f64) -> f64 {
    regular_closed_form(k, mu_b, n, lambda, 1.0)
}

/// Same as [`closed_form_xi1`] with the cutoff degree scaled to `α ℓ*`,
/// which is where `(1/k)(1 - e^{-α/ℓ}) = 1/λ` for exponential impact.
pub fn closed_form_xi1_alpha(k: usize, mu_b: f64, n: f64, lambda: f64, alpha: f64) -> f64 {
    regular_closed_form(k, mu_b, n, lambda, alpha)
}

fn regular_closed_form(k: usize, mu_b: f64, n: f64, lambda: f64, scale: f64) -> f64 {
    if k <= 1 || k as f64 >= lambda {
        return 0.0;
    }
    let ell_star = scale / (lambda / (lambda - k as f64)).ln();
    let s = ell_star - 1.0;
    if s <= 0.0 {
        return 0.0;
    }
    let z = mu_b * n;
    (k - 1) as f64 * z * gamma::gamma_q(s, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAxis {
    MeanBankDegree,
    Crowding,
    Leverage,
}

impl PhaseAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseAxis::MeanBankDegree => "mu_b",
            PhaseAxis::Crowding => "n",
            PhaseAxis::Leverage => "lambda",
        }
    }

    pub fn with(self, p: BranchingParams, v: f64) -> BranchingParams {
        match self {
            PhaseAxis::MeanBankDegree => BranchingParams { mu_b: v, ..p },
            PhaseAxis::Crowding => BranchingParams { n: v, ..p },
            PhaseAxis::Leverage => BranchingParams { lambda: v, ..p },
        }
    }
}

impl std::str::FromStr for PhaseAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu_b" | "mean_bank_degree" => Ok(PhaseAxis::MeanBankDegree),
            "n" | "crowding" => Ok(PhaseAxis::Crowding),
            "lambda" | "leverage" => Ok(PhaseAxis::Leverage),
            other => Err(Error::param(
                "axis",
                format!("expected mu_b, n or lambda; got `{other}`"),
            )),
        }
    }
}

/// `xi_1` as a function of one axis. Along `n` and `λ` a single kernel is
/// sampled up front; along `mu_b` every evaluation samples its own kernel
/// from the same seed.
pub struct XiCurve {
    base: BranchingParams,
    axis: PhaseAxis,
    mc: MonteCarloParams,
    model: Option<BranchingModel>,
}

impl XiCurve {
    pub fn new(
        base: BranchingParams,
        axis: PhaseAxis,
        max_value: f64,
        mc: MonteCarloParams,
    ) -> Result<Self> {
        let model = match axis {
            PhaseAxis::MeanBankDegree => None,
            PhaseAxis::Crowding => Some(BranchingModel::new(
                DegreeLaw::Poisson { mean: base.mu_b },
                max_value.max(base.n),
                mc,
            )?),
            PhaseAxis::Leverage => Some(BranchingModel::new(
                DegreeLaw::Poisson { mean: base.mu_b },
                base.n,
                mc,
            )?),
        };
        Ok(Self {
            base,
            axis,
            mc,
            model,
        })
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        let p = self.axis.with(self.base, v);
        match &self.model {
            Some(model) => model.xi1(p.n, p.lambda, p.alpha),
            None => Ok(branching_matrix(p, self.mc)?.spectral_radius),
        }
    }
}

/// Bisects `xi_1(axis) = 1` between `lo` and `hi` down to width `tol`.
pub fn phase_boundary(
    base: BranchingParams,
    axis: PhaseAxis,
    lo: f64,
    hi: f64,
    tol: f64,
    mc: MonteCarloParams,
) -> Result<f64> {
    if !(lo < hi && tol > 0.0) {
        return Err(Error::param(
            "range",
            format!("need lo < hi and tol > 0, got [{lo}, {hi}], {tol}"),
        ));
    }
    let curve = XiCurve::new(base, axis, hi, mc)?;
    bisect_unit_crossing(|v| curve.eval(v), lo, hi, tol)
}

/// Bisection on `g(v) - 1` for a bracketing interval.
pub fn bisect_unit_crossing<G>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let xi_lo = g(lo)?;
    let xi_hi = g(hi)?;
    let lo_above = xi_lo > 1.0;
    if lo_above == (xi_hi > 1.0) {
        return Err(Error::NoBracket {
            lo,
            hi,
            xi_lo,
            xi_hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (g(mid)? > 1.0) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BipartiteNetwork;
    use crate::DEFAULT_ALPHA;

    fn params(mu_b: f64, lambda: f64) -> BranchingParams {
        BranchingParams {
            mu_b,
            n: 1.0,
            lambda,
            alpha: DEFAULT_ALPHA,
        }
    }

    fn quick() -> MonteCarloParams {
        MonteCarloParams {
            k_max: 60,
            samples: 2000,
            seed: 1,
        }
    }

    #[test]
    fn exact_matrix_two_banks_one_asset() {
        let net = BipartiteNetwork::from_links(2, 1, &[(0, 0), (1, 0)]).unwrap();
        let sys = FinancialSystem::uniform(net, 20.0, DEFAULT_ALPHA).unwrap();
        let b = stability_matrix_exact(&sys).unwrap();
        assert_eq!(
            b.entries,
            SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
        );
        assert!((b.spectral_radius - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_matrix_disjoint_portfolios() {
        let net = BipartiteNetwork::from_links(3, 3, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        let sys = FinancialSystem::uniform(net, 20.0, DEFAULT_ALPHA).unwrap();
        let b = stability_matrix_exact(&sys).unwrap();
        assert!(b.entries.is_zero());
        assert_eq!(b.spectral_radius, 0.0);
    }

    #[test]
    fn exact_matrix_vanishes_without_leverage() {
        let net = BipartiteNetwork::poisson(60, 30, 2.0, 4).unwrap();
        for lambda in [0.5, 1.0] {
            let sys = FinancialSystem::uniform(net.clone(), lambda, 5.0).unwrap();
            assert!(stability_matrix_exact(&sys).unwrap().entries.is_zero());
        }
    }

    #[test]
    fn exact_matrix_diagonal_is_zero() {
        let net = BipartiteNetwork::poisson(80, 40, 1.5, 6).unwrap();
        let sys = FinancialSystem::uniform(net, 30.0, DEFAULT_ALPHA).unwrap();
        let b = stability_matrix_exact(&sys).unwrap();
        assert!((0..80).all(|i| b.entries.get(i, i) == 0.0));
        assert!(!b.entries.is_zero());
    }

    #[test]
    fn branching_matrix_zero_without_leverage() {
        let m = branching_matrix(params(4.0, 1.0), quick()).unwrap();
        assert!(m.entries.is_zero());
        assert_eq!(m.spectral_radius, 0.0);
    }

    #[test]
    fn branching_matrix_structural_zeros() {
        let m = branching_matrix(params(5.0, 20.0), quick()).unwrap();
        for h in 1..=60 {
            assert_eq!(m.get(h, 1), 0.0, "column k = 1");
            if h >= 20 {
                assert!((1..=60).all(|k| m.get(h, k) == 0.0), "row {h}");
            }
        }
        assert!(m.spectral_radius > 0.0);
    }

    #[test]
    fn branching_matrix_rejects_bad_params() {
        assert!(branching_matrix(params(0.0, 20.0), quick()).is_err());
        assert!(branching_matrix(
            BranchingParams {
                n: 0.0,
                ..params(2.0, 20.0)
            },
            quick()
        )
        .is_err());
        let mc = MonteCarloParams {
            k_max: 0,
            ..quick()
        };
        assert!(branching_matrix(params(2.0, 20.0), mc).is_err());
    }

    #[test]
    fn model_refuses_crowding_beyond_its_kernel() {
        let model = BranchingModel::new(DegreeLaw::Poisson { mean: 3.0 }, 1.0, quick()).unwrap();
        assert!(model.matrix(1.0, 20.0, DEFAULT_ALPHA).is_ok());
        assert!(model.matrix(4.0, 20.0, DEFAULT_ALPHA).is_err());
    }

    #[test]
    fn closed_form_trivial_cases() {
        assert_eq!(closed_form_xi1(1, 1.0, 1.0, 20.0), 0.0);
        assert_eq!(closed_form_xi1(20, 20.0, 1.0, 20.0), 0.0);
        assert_eq!(closed_form_xi1(25, 25.0, 1.0, 20.0), 0.0);
        assert!(closed_form_xi1(5, 5.0, 1.0, 20.0) > 0.0);
    }

    #[test]
    fn matrix_csv_lists_nonzero_entries() {
        let m = branching_matrix(params(3.0, 20.0), quick()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let nonzero = (1..=60)
            .flat_map(|h| (1..=60).map(move |k| (h, k)))
            .filter(|&(h, k)| m.get(h, k) != 0.0)
            .count();
        assert_eq!(text.lines().count(), nonzero + 1);
    }

    #[test]
    fn no_bracket_is_reported() {
        let err = phase_boundary(
            params(5.0, 20.0),
            PhaseAxis::Leverage,
            1.0,
            3.0,
            0.01,
            quick(),
        );
        assert!(matches!(err, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn bisection_finds_known_root() {
        let root = bisect_unit_crossing(|x| Ok(x * x), 0.0, 3.0, 1e-9).unwrap();
        assert!((root - 1.0).abs() < 1e-9);
        let falling = bisect_unit_crossing(|x| Ok(4.0 - x), 0.0, 10.0, 1e-9).unwrap();
        assert!((falling - 3.0).abs() < 1e-9);
    }
}
