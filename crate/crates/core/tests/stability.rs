use firesale::stability::gamma::{gamma_p, gamma_q};
use firesale::stability::{closed_form_xi1_alpha, FailureKernel};
use firesale::*;
use statrs::function::gamma::{gamma_lr, gamma_ur};

#[test]
fn incomplete_gamma_matches_reference() {
    for &s in &[0.1, 0.5, 1.0, 1.7, 2.662, 5.0, 12.5, 40.0] {
        for &z in &[0.01, 0.3, 1.0, 2.5, 5.0, 9.0, 20.0, 60.0] {
            let (q, p) = (gamma_q(s, z), gamma_p(s, z));
            assert!((q - gamma_ur(s, z)).abs() < 1e-12, "Q({s}, {z}) = {q}");
            assert!((p - gamma_lr(s, z)).abs() < 1e-12, "P({s}, {z}) = {p}");
        }
    }
}

#[test]
fn closed_form_against_reference_q() {
    let (k, mu_b, n, lambda) = (5usize, 5.0, 1.0, 20.0);
    let ell_star = 1.0 / (lambda / (lambda - k as f64)).ln();
    let expect = (k - 1) as f64 * mu_b * n * gamma_ur(ell_star - 1.0, mu_b * n);
    assert!((closed_form_xi1(k, mu_b, n, lambda) - expect).abs() < 1e-12);
    let expect_alpha =
        (k - 1) as f64 * mu_b * n * gamma_ur(DEFAULT_ALPHA * ell_star - 1.0, mu_b * n);
    assert!(
        (closed_form_xi1_alpha(k, mu_b, n, lambda, DEFAULT_ALPHA) - expect_alpha).abs() < 1e-12
    );
}

#[test]
fn failure_probability_is_monotone() {
    let law = DegreeLaw::Poisson { mean: 4.0 };
    let kernel = FailureKernel::new(law, 25, 4000, 3).unwrap();
    let lambda = 20.0;
    for k in [1, 2, 5, 9] {
        for ell in 2..=25 {
            for h in 1..19 {
                let f = kernel.failure_probability(h, k, ell, lambda, DEFAULT_ALPHA);
                assert!((0.0..=1.0).contains(&f));
                assert!(
                    kernel.failure_probability(h + 1, k, ell, lambda, DEFAULT_ALPHA) <= f,
                    "h {h} k {k} ell {ell}"
                );
                if ell < 25 {
                    assert!(kernel.failure_probability(h, k, ell + 1, lambda, DEFAULT_ALPHA) <= f);
                }
                assert!(kernel.failure_probability(h, k, ell, lambda, 1.5 * DEFAULT_ALPHA) >= f);
            }
        }
    }
}

#[test]
fn two_boundaries_along_mean_degree() {
    let base = BranchingParams {
        mu_b: 1.0,
        n: 1.0,
        lambda: 20.0,
        alpha: DEFAULT_ALPHA,
    };
    let mc = MonteCarloParams {
        samples: 4000,
        ..Default::default()
    };
    let lower = phase_boundary(base, PhaseAxis::MeanBankDegree, 0.5, 2.0, 0.01, mc).unwrap();
    let upper = phase_boundary(base, PhaseAxis::MeanBankDegree, 4.0, 12.0, 0.01, mc).unwrap();
    assert!((1.0..1.5).contains(&lower), "{lower}");
    assert!((6.0..8.0).contains(&upper), "{upper}");
    let inside = branching_matrix(BranchingParams { mu_b: 3.0, ..base }, mc).unwrap();
    assert!(inside.spectral_radius > 1.0);
}

#[test]
fn leverage_below_one_is_stable() {
    for mu_b in [1.0, 3.0, 8.0] {
        let p = BranchingParams {
            mu_b,
            n: 1.0,
            lambda: 1.0,
            alpha: DEFAULT_ALPHA,
        };
        let m = branching_matrix(
            p,
            MonteCarloParams {
                samples: 500,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.spectral_radius, 0.0);
        assert!(m.entries.is_zero());
    }
}

#[test]
fn crowding_shifts_window_left() {
    let mc = MonteCarloParams {
        samples: 4000,
        ..Default::default()
    };
    let base = BranchingParams {
        mu_b: 1.0,
        n: 1.0,
        lambda: 20.0,
        alpha: DEFAULT_ALPHA,
    };
    let at = |n| {
        phase_boundary(
            BranchingParams { n, ..base },
            PhaseAxis::MeanBankDegree,
            0.2,
            2.0,
            0.01,
            mc,
        )
        .unwrap()
    };
    assert!(at(2.0) < at(1.0));
}

#[test]
fn exact_matrix_of_a_realised_system() {
    // Two banks on one asset, λ = 20: each failure alone moves x to 1/2.
    let net = BipartiteNetwork::from_links(2, 1, &[(0, 0), (1, 0)]).unwrap();
    let sys = FinancialSystem::uniform(net, 20.0, DEFAULT_ALPHA).unwrap();
    let exact = stability_matrix_exact(&sys).unwrap();
    assert_eq!(exact.spectral_radius, 1.0);
}
