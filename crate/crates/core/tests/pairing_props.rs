use azpair::measure::default_beta;
use azpair::pairing::{pairing_via_preimages, pairing_via_theorem1, PairingConfig};
use azpair::poly::Poly;
use azpair::rational::parse_rational;
use proptest::prelude::*;

const CHEB: f64 = 0.3230659472;

fn b_levels(d: usize) -> u32 {
    let mut n = 1;
    while n < 10 && d.pow(n + 1) <= 8192 {
        n += 1;
    }
    n
}

fn check_agreement(phi: &Poly) {
    let config = PairingConfig::default();
    let a = pairing_via_theorem1(phi, &config).unwrap_or_else(|e| panic!("{phi}: {e}"));
    let beta = a.beta.clone().unwrap_or_else(|| default_beta(phi).unwrap());
    let b = pairing_via_preimages(phi, &beta, b_levels(phi.degree())).unwrap_or_else(|e| panic!("{phi}: {e}"));
    let bn = b.estimates.last().unwrap().1;
    let budget = 3.0 * (a.error_radius + config.stall_tol);
    assert!((a.value - bn).abs() <= budget, "{phi}: A = {} +/- {}, B = {bn} (beta {beta})", a.value, a.error_radius);
}

#[test]
fn estimators_agree_on_named_maps() {
    for s in ["x^2", "x^2 - 1", "x^2 - 2", "x^2 + 1", "x^2 + 5", "x^3 - x"] {
        check_agreement(&Poly::parse(s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn estimators_agree_on_random_monic(tail in prop::collection::vec(-6i64..=6, 2..=3)) {
        let mut cs = tail;
        cs.push(1);
        check_agreement(&Poly::from_i64(&cs));
    }

    #[test]
    fn report_is_consistent(tail in prop::collection::vec(-9i64..=9, 2..=3)) {
        let mut cs = tail;
        cs.push(1);
        let phi = Poly::from_i64(&cs);
        let r = pairing_via_theorem1(&phi, &PairingConfig::default()).unwrap();
        let rebuilt = r.h_phi_zero.value - r.per_place.iter().map(|c| c.contribution).sum::<f64>();
        prop_assert!((r.value - rebuilt).abs() <= 1e-12);
        prop_assert!(r.error_radius >= r.h_phi_zero.error_radius);
        let mut places: Vec<_> = r.per_place.iter().map(|c| c.place).collect();
        let sorted = { let mut s = places.clone(); s.sort(); s };
        prop_assert_eq!(&places, &sorted);
        places.dedup();
        prop_assert_eq!(places.len(), r.per_place.len());
    }
}

#[test]
fn power_maps_pair_to_zero() {
    for d in 2..=3 {
        let r = pairing_via_theorem1(&Poly::power_map(d), &PairingConfig::default()).unwrap();
        assert!(r.value.abs() <= 1e-8, "x^{d}: {}", r.value);
    }
}

#[test]
fn preimage_estimator_for_chebyshev() {
    let b = pairing_via_preimages(&Poly::parse("x^2 - 2").unwrap(), &parse_rational("3").unwrap(), 10).unwrap();
    let b10 = b.estimates.last().unwrap().1;
    assert!((b10 - CHEB).abs() <= 0.02, "{b10}");
}
