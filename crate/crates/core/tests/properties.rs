//! Cross-module invariants: metric symmetry and bounds, the standard
//! Hellinger/TV sandwich, dual-route agreement between closed forms and
//! quadrature, and the degeneracy bookkeeping of EB results.

use eblab_core::metrics::{
    hellinger, kl_div, kolmogorov_on_functional, l1_distance, tv_distance,
    tv_distance_quadrature, Functional,
};
use eblab_core::model::{EbResult, HyperParam};
use eblab_core::posterior::PosteriorRep;
use eblab_core::rng::RngStream;
use proptest::prelude::*;
use rand::RngExt;

fn gauss(mu: f64, var: f64) -> PosteriorRep {
    PosteriorRep::gaussian(mu, var)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_symmetry(m1 in -3.0..3.0f64, v1 in 0.2..4.0f64, m2 in -3.0..3.0f64, v2 in 0.2..4.0f64) {
        let p = gauss(m1, v1);
        let q = gauss(m2, v2);
        let tol = 1e-7;
        prop_assert!((tv_distance(&p, &q).unwrap().value - tv_distance(&q, &p).unwrap().value).abs() < tol);
        prop_assert!((l1_distance(&p, &q).unwrap().value - l1_distance(&q, &p).unwrap().value).abs() < tol);
        prop_assert!((hellinger(&p, &q).unwrap().value - hellinger(&q, &p).unwrap().value).abs() < tol);
        let ka = kolmogorov_on_functional(&p, &q, Functional::Identity).unwrap().value;
        let kb = kolmogorov_on_functional(&q, &p, Functional::Identity).unwrap().value;
        prop_assert!((ka - kb).abs() < tol);
    }

    #[test]
    fn codomains_respected(m1 in -4.0..4.0f64, v1 in 0.1..5.0f64, m2 in -4.0..4.0f64, v2 in 0.1..5.0f64) {
        let p = gauss(m1, v1);
        let q = gauss(m2, v2);
        let tv = tv_distance(&p, &q).unwrap().value;
        let l1 = l1_distance(&p, &q).unwrap().value;
        let h = hellinger(&p, &q).unwrap().value;
        let kl = kl_div(&p, &q).unwrap().value;
        let ks = kolmogorov_on_functional(&p, &q, Functional::Identity).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!((0.0..=2.0).contains(&l1));
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!(kl >= 0.0);
        prop_assert!((0.0..=1.0).contains(&ks));
        // L1 = 2 TV on absolutely continuous pairs.
        prop_assert!((l1 - 2.0 * tv).abs() < 1e-9);
    }

    #[test]
    fn hellinger_tv_sandwich(m1 in -3.0..3.0f64, v1 in 0.2..4.0f64, m2 in -3.0..3.0f64, v2 in 0.2..4.0f64) {
        // h^2 <= TV <= h sqrt(2).
        let p = gauss(m1, v1);
        let q = gauss(m2, v2);
        let tv = tv_distance(&p, &q).unwrap().value;
        let h = hellinger(&p, &q).unwrap().value;
        prop_assert!(h * h <= tv + 1e-7, "h^2 = {} > tv = {}", h * h, tv);
        prop_assert!(tv <= h * 2.0f64.sqrt() + 1e-7, "tv = {} > h sqrt2 = {}", tv, h * 2.0f64.sqrt());
    }
}

#[test]
fn tv_triangle_inequality_on_random_triples() {
    let mut rng = RngStream::new(314159, 0);
    for i in 0..1000 {
        let mut draw = || {
            let mu = rng.random_range(-2.0..2.0);
            let var = rng.random_range(0.3..3.0);
            gauss(mu, var)
        };
        let (p, q, r) = (draw(), draw(), draw());
        let pq = tv_distance(&p, &q).unwrap().value;
        let qr = tv_distance(&q, &r).unwrap().value;
        let pr = tv_distance(&p, &r).unwrap().value;
        assert!(pr <= pq + qr + 1e-6, "triple {i}: {pr} > {pq} + {qr}");
    }
}

#[test]
fn quadrature_tv_matches_closed_form_on_equal_variance_pairs() {
    let mut rng = RngStream::new(2718, 0);
    for _ in 0..50 {
        let mu1 = rng.random_range(-3.0..3.0);
        let mu2 = rng.random_range(-3.0..3.0);
        let var = rng.random_range(0.2..4.0);
        let p = gauss(mu1, var);
        let q = gauss(mu2, var);
        let closed = tv_distance(&p, &q).unwrap();
        let quad = tv_distance_quadrature(&p, &q).unwrap();
        assert!(
            (closed.value - quad.value).abs() <= 1e-8,
            "closed {} vs quadrature {}",
            closed.value,
            quad.value
        );
    }
}

#[test]
fn degenerate_flag_tracks_point_mass_and_boundary() {
    let point = EbResult::new(
        HyperParam::interior(vec![0.3]),
        -1.0,
        PosteriorRep::point_mass_1d(0.3),
    );
    assert!(point.degenerate);

    let boundary = EbResult::new(
        HyperParam { values: vec![0.0], boundary_flags: vec![true] },
        -1.0,
        PosteriorRep::gaussian(0.0, 1.0),
    );
    assert!(boundary.degenerate);

    let regular = EbResult::new(
        HyperParam::interior(vec![0.3]),
        -1.0,
        PosteriorRep::gaussian(0.3, 0.5),
    );
    assert!(!regular.degenerate);
}

#[test]
fn rng_streams_reproduce_draw_sequences() {
    use rand::Rng;
    for stream in [0u64, 1, 17, 1 << 40] {
        let mut a = RngStream::new(99, stream);
        let mut b = RngStream::new(99, stream);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }
}
