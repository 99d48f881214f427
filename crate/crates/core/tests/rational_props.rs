use azpair::rational::{log_abs, support_primes, valuation, ExactRational, Place, Prime};
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

fn nonzero_rational() -> impl Strategy<Value = ExactRational> {
    (-100_000i64..=100_000, 1i64..=100_000)
        .prop_filter("nonzero", |(a, _)| *a != 0)
        .prop_map(|(a, b)| BigRational::new(a.into(), b.into()))
}

fn small_prime() -> impl Strategy<Value = Prime> {
    prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 97, 101]).prop_map(|p| Prime::new(p).unwrap())
}

proptest! {
    #[test]
    fn valuation_is_additive(q in nonzero_rational(), r in nonzero_rational(), p in small_prime()) {
        prop_assert_eq!(valuation(&(&q * &r), p).unwrap(), valuation(&q, p).unwrap() + valuation(&r, p).unwrap());
    }

    #[test]
    fn ultrametric(q in nonzero_rational(), r in nonzero_rational(), p in small_prime()) {
        let s = &q + &r;
        prop_assume!(!s.is_zero());
        let (vq, vr, vs) = (valuation(&q, p).unwrap(), valuation(&r, p).unwrap(), valuation(&s, p).unwrap());
        prop_assert!(vs >= vq.min(vr));
        if vq != vr {
            prop_assert_eq!(vs, vq.min(vr));
        }
    }

    #[test]
    fn product_formula(q in nonzero_rational()) {
        let mut total = log_abs(&q, Place::Archimedean).unwrap();
        for p in support_primes(std::slice::from_ref(&q)) {
            total += log_abs(&q, Place::Finite(p)).unwrap();
        }
        prop_assert!(total.abs() < 1e-12, "{}", total);
    }
}
