use azpair::poly::Poly;
use azpair::rational::ExactRational;
use azpair::roots::complex_roots;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn small_map() -> impl Strategy<Value = Poly> {
    (2usize..=3, prop::collection::vec((-5i64..=5, 1i64..=4), 4))
        .prop_map(|(d, cs)| {
            let mut c: Vec<ExactRational> = cs[..d].iter().map(|&(a, b)| BigRational::new(a.into(), b.into())).collect();
            let (a, b) = cs[d];
            let lead = if a == 0 { 1 } else { a };
            c.push(BigRational::new(lead.into(), b.into()));
            Poly::new(c)
        })
}

fn rational() -> impl Strategy<Value = ExactRational> {
    (-20i64..=20, 1i64..=20).prop_map(|(a, b)| BigRational::new(a.into(), b.into()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn iterate_composes(phi in small_map(), m in 0u32..=2, n in 0u32..=2) {
        let d = phi.degree();
        let whole = phi.iterate(m + n).unwrap();
        prop_assert_eq!(whole.degree(), d.pow(m + n));
        prop_assert_eq!(&whole, &phi.iterate(m).unwrap().compose(&phi.iterate(n).unwrap()));
        // iterate(iterate(phi, m), n) is phi^(mn)
        if m > 0 {
            prop_assert_eq!(phi.iterate(m).unwrap().iterate(n).unwrap(), phi.iterate(m * n).unwrap());
        }
    }

    #[test]
    fn eval_of_iterate(phi in small_map(), x in rational(), n in 0u32..=3) {
        let mut y = x.clone();
        for _ in 0..n {
            y = phi.eval(&y);
        }
        prop_assert_eq!(phi.iterate(n).unwrap().eval(&x), y);
    }

    #[test]
    fn primitive_round_trip(phi in small_map(), k in rational()) {
        prop_assume!(k != ExactRational::from_integer(0.into()));
        let f = phi.scale(&k);
        let prim = f.to_primitive().unwrap();
        prop_assert!(prim.leading() > &0.into());
        prop_assert_eq!(prim.reconstruct(), f);
    }

    #[test]
    fn roots_reconstruct_monic_integer(tail in prop::collection::vec(-9i64..=9, 1..=12)) {
        let mut cs = tail;
        cs.push(1);
        let f = Poly::from_i64(&cs);
        let clusters = complex_roots(&f, 1e-14).unwrap();
        let mut prod = vec![Complex64::new(1.0, 0.0)];
        for c in &clusters {
            for _ in 0..c.multiplicity {
                let mut next = vec![Complex64::new(0.0, 0.0); prod.len() + 1];
                for (i, a) in prod.iter().enumerate() {
                    next[i + 1] += a;
                    next[i] -= a * c.center;
                }
                prod = next;
            }
        }
        prop_assert_eq!(prod.len(), cs.len());
        let norm = cs.iter().map(|&c| (c as f64).abs()).fold(1.0, f64::max);
        for (got, &want) in prod.iter().zip(&cs) {
            prop_assert!((got - Complex64::new(want as f64, 0.0)).norm() <= 1e-6 * norm, "{:?} vs {}", got, want);
        }
    }
}
