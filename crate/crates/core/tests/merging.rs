//! Distributional and merging invariants of the regression and selection
//! families: the exact null law of the F statistic, L1 decay of the EB
//! posterior against the prior-oracle comparator, and the boundary-hit
//! frequency of the inclusion-probability fit.

use eblab_core::gaussian::{eb_case2, hierarchical_case1_posterior, posterior_fixed, GaussianData};
use eblab_core::gprior::{
    g_hat, oracle_g, posterior_beta_given_g, simulate_regression, DesignKind,
};
use eblab_core::metrics::{l1_distance, tv_distance};
use eblab_core::modelselect::eb_model_posterior;
use eblab_core::rng::RngStream;
use eblab_core::special::f_cdf;

#[test]
fn f_statistic_null_law_is_exact() {
    // Under beta0 = 0 with Gaussian errors, F_n ~ F(k, n-1-k) for any fixed
    // full-rank design; Kolmogorov distance of 1e4 simulated statistics
    // against the CDF stays below 0.02.
    let (n, k, reps) = (40usize, 2usize, 10_000usize);
    let mut rng = RngStream::new(606, 0);
    let mut fs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let d = simulate_regression(n, k, 0.0, &[0.0, 0.0], 1.0, DesignKind::IidNormal, None, &mut rng)
            .unwrap();
        fs.push(d.ols().unwrap().f_n);
    }
    fs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d2 = (n - 1 - k) as u32;
    let mut ks: f64 = 0.0;
    for (i, f) in fs.iter().enumerate() {
        let cdf = f_cdf(*f, k as u32, d2).unwrap();
        ks = ks.max((cdf - i as f64 / reps as f64).abs());
        ks = ks.max((cdf - (i + 1) as f64 / reps as f64).abs());
    }
    assert!(ks < 0.02, "Kolmogorov distance {ks}");
}

#[test]
fn case2_misspecified_prior_mean_merges_with_regular_posteriors() {
    // With the prior mean away from the truth, the fitted prior variance
    // stays off the boundary eventually and the EB posterior merges with any
    // regular comparator, the hierarchical one included.
    let (theta0, m, sigma2) = (0.0, 1.0, 1.0);
    let n_grid = [50usize, 400, 3200];
    let reps = 300usize;
    let mut med_fixed = Vec::new();
    let mut med_hier = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let mut rng = RngStream::new(609, i as u64);
        let mut tv_fixed = Vec::with_capacity(reps);
        let mut tv_hier = Vec::with_capacity(reps);
        for _ in 0..reps {
            let data = GaussianData::simulate(n, theta0, sigma2, &mut rng);
            let eb = eb_case2(&data, m, sigma2).unwrap();
            let fixed = posterior_fixed(&data, m, 1.0, sigma2).unwrap();
            let hier = hierarchical_case1_posterior(&data, m, 0.5, 1.0, sigma2).unwrap();
            tv_fixed.push(tv_distance(&eb.posterior, &fixed).unwrap().value);
            tv_hier.push(tv_distance(&eb.posterior, &hier).unwrap().value);
        }
        tv_fixed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        tv_hier.sort_by(|a, b| a.partial_cmp(b).unwrap());
        med_fixed.push(tv_fixed[reps / 2]);
        med_hier.push(tv_hier[reps / 2]);
    }
    println!("case2 TV vs fixed: {med_fixed:?}");
    println!("case2 TV vs hierarchical: {med_hier:?}");
    for meds in [&med_fixed, &med_hier] {
        for w in meds.windows(2) {
            assert!(w[1] < w[0], "medians not decreasing: {meds:?}");
        }
        assert!(meds[2] < 0.05, "median TV at n = 3200: {}", meds[2]);
    }
}

#[test]
fn gprior_l1_against_oracle_comparator_decays() {
    // With beta0 != 0 the fitted g tracks the prior-oracle value
    // beta0'(Xc'Xc)beta0 / (k sigma0^2); the L1 distance between the EB
    // posterior and the posterior at the oracle value dies out along the
    // n grid (first-coordinate marginals).
    let n_grid = [100usize, 400, 1600];
    let reps = 150usize;
    let beta0 = [0.8];
    let mut medians = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let mut rng = RngStream::new(607, i as u64);
        let mut l1s = Vec::with_capacity(reps);
        for _ in 0..reps {
            let d =
                simulate_regression(n, 1, 0.2, &beta0, 1.0, DesignKind::IidNormal, None, &mut rng)
                    .unwrap();
            let ols = d.ols().unwrap();
            let gh = g_hat(&ols);
            let g0 = oracle_g(&d, &beta0, 1.0).unwrap();
            let eb = posterior_beta_given_g(&d, &ols, gh).unwrap().first_marginal();
            let reference = posterior_beta_given_g(&d, &ols, g0).unwrap().first_marginal();
            l1s.push(l1_distance(&eb, &reference).unwrap().value);
        }
        l1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(l1s[reps / 2]);
    }
    println!("gprior oracle-comparator L1 medians: {medians:?}");
    for w in medians.windows(2) {
        assert!(w[1] < w[0], "medians not decreasing: {medians:?}");
    }
    assert!(medians[2] < 0.05, "median L1 at n = 1600: {}", medians[2]);
}

#[test]
fn inclusion_probability_boundary_frequency() {
    // beta0 = 0, m = 8, n = 50, g = n: the boundary fit p_hat = 0 occurs in
    // at least 20% of replications, and a boundary fit puts all posterior
    // mass on the null model.
    let reps = 400usize;
    let mut rng = RngStream::new(608, 0);
    let mut zero = 0usize;
    let mut checked_mass = false;
    for _ in 0..reps {
        let d = simulate_regression(50, 8, 0.0, &[0.0; 8], 1.0, DesignKind::IidNormal, None, &mut rng)
            .unwrap();
        let post = eb_model_posterior(&d, 50.0).unwrap();
        if post.p_hat == 0.0 {
            zero += 1;
            assert!(post.degenerate);
            if !checked_mass {
                assert!((post.posterior_probs[0] - 1.0).abs() < 1e-12);
                assert!(post.posterior_probs[1..].iter().all(|p| *p == 0.0));
                checked_mass = true;
            }
        }
    }
    let freq = zero as f64 / reps as f64;
    println!("p_hat = 0 frequency: {freq}");
    assert!(freq >= 0.2, "boundary frequency {freq}");
    assert!(checked_mass);
}
