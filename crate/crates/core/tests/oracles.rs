//! Independent oracle cross-checks for the closed-form posteriors and
//! marginals: a long Gibbs run against the g-prior Student posterior, and
//! nested quadrature over (alpha, sigma2) with the coefficient block
//! integrated in closed form against the per-model marginals.

use eblab_core::dpmix::mc_se;
use eblab_core::gprior::{
    g_hat, log_marginal_g, posterior_beta_given_g, simulate_regression, DesignKind,
};
use eblab_core::linalg::{chol_solve, cholesky, dot, Matrix};
use eblab_core::modelselect::{per_model_log_marginal, ModelIndex, SelectionPrecompute};
use eblab_core::posterior::PosteriorRep;
use eblab_core::quad::{integrate, QuadSpec};
use eblab_core::rng::RngStream;
use eblab_core::special::{student_t_pdf, student_t_quantile};
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Full-conditional Gibbs sampler over (alpha, beta, sigma2) under the
/// g-prior, the independent route to the marginal Student posterior of beta.
fn gibbs_beta_samples(
    data: &eblab_core::gprior::RegressionData,
    g: f64,
    draws: usize,
    burn: usize,
    rng: &mut RngStream,
) -> Vec<f64> {
    let n = data.n;
    let k = data.k;
    let ols = data.ols().unwrap();
    let xtx = data.xc.gram();
    let l = cholesky(&xtx).unwrap();
    let shrink = g / (1.0 + g);
    // Cholesky of (Xc'Xc)^-1 scale for beta draws: solve L z = e.
    let mut beta: Vec<f64> = ols.beta_hat.iter().map(|b| shrink * b).collect();
    let mut alpha = ols.alpha_hat;
    let mut out = Vec::with_capacity(draws);
    let ybar = ols.alpha_hat;

    for it in 0..draws + burn {
        // sigma2 | alpha, beta ~ InvGamma((n + k)/2, [SSR + beta'X'X beta / g] / 2).
        let fit = data.xc.mul_vec(&beta);
        let ssr: f64 = data
            .y
            .iter()
            .zip(&fit)
            .map(|(y, f)| (y - alpha - f) * (y - alpha - f))
            .sum();
        let qf = eblab_core::linalg::quad_form(&xtx, &beta);
        let shape = (n + k) as f64 / 2.0;
        let rate = (ssr + qf / g) / 2.0;
        let gamma = Gamma::new(shape, 1.0 / rate).unwrap();
        let sigma2 = 1.0 / gamma.sample(rng);

        // alpha | sigma2 ~ N(ybar, sigma2 / n)  (centered design).
        alpha = ybar
            + (sigma2 / n as f64).sqrt()
                * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);

        // beta | sigma2 ~ N(shrink beta_hat, sigma2 shrink (Xc'Xc)^-1).
        let z: Vec<f64> = (0..k)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        // Solve L' w = z to get w with covariance (Xc'Xc)^-1.
        let mut w = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in i + 1..k {
                s -= l.at(j, i) * w[j];
            }
            w[i] = s / l.at(i, i);
        }
        for i in 0..k {
            beta[i] = shrink * ols.beta_hat[i] + (sigma2 * shrink).sqrt() * w[i];
        }
        if it >= burn {
            out.push(beta[0]);
        }
    }
    out
}

#[test]
fn gprior_posterior_matches_gibbs_oracle() {
    let mut rng = RngStream::new(4242, 0);
    let data =
        simulate_regression(30, 1, 0.4, &[0.9], 1.0, DesignKind::IidNormal, None, &mut rng)
            .unwrap();
    let ols = data.ols().unwrap();
    let g = 8.0;
    let (loc, scale, df) = match posterior_beta_given_g(&data, &ols, g).unwrap() {
        PosteriorRep::ScaledStudentCf { location, scale, df } => {
            (location[0], scale.at(0, 0).sqrt(), df)
        }
        other => panic!("unexpected {other:?}"),
    };

    let samples = gibbs_beta_samples(&data, g, 100_000, 2_000, &mut rng);
    let nmc = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / nmc;
    let (se_mean, tau) = mc_se(&samples);
    assert!(
        (mean - loc).abs() <= 4.0 * se_mean,
        "mean {mean} vs location {loc} (se {se_mean}, tau {tau})"
    );

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_eff = nmc / tau;
    for p in [0.1, 0.5, 0.9] {
        let emp = sorted[((sorted.len() - 1) as f64 * p) as usize];
        let exact = loc + scale * student_t_quantile(p, df).unwrap();
        // Asymptotic quantile SE: sqrt(p(1-p)/n_eff) / f(q).
        let dens = student_t_pdf(exact, loc, scale, df);
        let se = (p * (1.0 - p) / n_eff).sqrt() / dens;
        assert!(
            (emp - exact).abs() <= 4.0 * se,
            "quantile {p}: {emp} vs {exact} (se {se})"
        );
    }
}

/// Nested quadrature for the submodel marginal with the coefficient block
/// integrated in closed form: m = int int (2 pi s2)^(-n/2) (1+g)^(-k/2)
/// exp(-[r'r - (g/(1+g)) r'P r]/(2 s2)) / s2 d alpha d s2, with r = y - alpha.
fn quadrature_log_marginal(
    y: &[f64],
    xcols: &Matrix,
    g: f64,
    shift: f64,
) -> f64 {
    let n = y.len();
    let k = xcols.cols;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let s2_center = (tss / n as f64).max(1e-12);

    let proj_quad = |r: &[f64]| -> f64 {
        if k == 0 {
            return 0.0;
        }
        let xtr = xcols.tr_mul_vec(r);
        let l = cholesky(&xcols.gram()).unwrap();
        let sol = chol_solve(&l, &xtr);
        dot(&xtr, &sol)
    };

    let log_inner = |alpha: f64, s2: f64| -> f64 {
        let r: Vec<f64> = y.iter().map(|v| v - alpha).collect();
        let rr: f64 = r.iter().map(|v| v * v).sum();
        let quad = proj_quad(&r);
        -0.5 * n as f64 * (2.0 * std::f64::consts::PI * s2).ln()
            - 0.5 * k as f64 * (1.0 + g).ln()
            - (rr - g / (1.0 + g) * quad) / (2.0 * s2)
            - s2.ln()
    };

    let spec = QuadSpec { abs_tol: 1e-13, rel_tol: 1e-11, max_subdivisions: 30_000 };
    let a_half = 12.0 * (s2_center / n as f64).sqrt();
    // Outer integral over u = ln sigma2 (Jacobian e^u).
    let outer = integrate(
        |u: f64| {
            let s2 = u.exp();
            let inner = integrate(
                |alpha: f64| (log_inner(alpha, s2) - shift).exp(),
                ybar - a_half,
                ybar + a_half,
                &spec,
            )
            .map(|r| r.value)
            .unwrap_or(0.0);
            inner * s2
        },
        (s2_center / 200.0).ln(),
        (s2_center * 200.0).ln(),
        &QuadSpec { abs_tol: 1e-12, rel_tol: 1e-9, max_subdivisions: 2_000 },
    )
    .unwrap();
    outer.value.ln() + shift
}

#[test]
fn selection_marginals_match_nested_quadrature() {
    let mut rng = RngStream::new(777, 0);
    let data = simulate_regression(
        30,
        3,
        0.2,
        &[0.8, 0.0, -0.5],
        1.0,
        DesignKind::IidNormal,
        None,
        &mut rng,
    )
    .unwrap();
    let pre = SelectionPrecompute::new(&data).unwrap();
    let g = data.n as f64;
    for gamma in 0u32..8 {
        let closed = per_model_log_marginal(&pre, ModelIndex::new(gamma), g).unwrap();
        let cols: Vec<usize> = (0..3).filter(|j| gamma >> j & 1 == 1).collect();
        let mut sub = Matrix::zeros(30, cols.len());
        for (jj, &j) in cols.iter().enumerate() {
            for i in 0..30 {
                *sub.at_mut(i, jj) = data.xc.at(i, j);
            }
        }
        let direct = quadrature_log_marginal(&data.y, &sub, g, closed);
        assert!(
            (closed - direct).abs() <= 1e-6,
            "gamma {gamma:03b}: closed {closed} vs quadrature {direct}"
        );
    }
}

#[test]
fn g_marginal_matches_nested_quadrature_small_fixture() {
    let mut rng = RngStream::new(778, 0);
    let data =
        simulate_regression(10, 1, -0.3, &[0.7], 0.8, DesignKind::IidNormal, None, &mut rng)
            .unwrap();
    let ols = data.ols().unwrap();
    for g in [0.5, g_hat(&ols).max(0.3), 5.0] {
        let closed = log_marginal_g(&data, &ols, g).unwrap();
        let direct = quadrature_log_marginal(&data.y, &data.xc, g, closed);
        assert!(
            (closed - direct).abs() <= 1e-6,
            "g = {g}: closed {closed} vs quadrature {direct}"
        );
    }
}
