use proptest::prelude::*;
use sqsieve_core::arith::{factorize, gcd, jacobi};
use sqsieve_core::energy::{energy, EnergyKind, Method};
use sqsieve_core::expsum::{gauss_sum_closed, gauss_sum_direct};
use sqsieve_core::record::{decode, encode, Format, ResultRecord};
use sqsieve_core::sieve::{dirichlet_approx, satisfies_approximation, Rational};
use sqsieve_core::sqrt::sqrt_mod_all;

proptest! {
    #[test]
    fn roots_square_back(r in 1u64..5_000_000, m in any::<u64>()) {
        let f = factorize(r).unwrap();
        let set = sqrt_mod_all(m, &f);
        let m = m % r;
        for &k in &set.roots {
            prop_assert_eq!((k as u128 * k as u128 % r as u128) as u64, m);
        }
        prop_assert!(set.roots.windows(2).all(|w| w[0] < w[1]));
        if gcd(m, r) == 1 && r % 2 == 1 && r > 1 {
            let expected_solvable = f.factors().iter().all(|&(p, _)| jacobi(m as i64, p).unwrap() == 1);
            prop_assert_eq!(!set.is_empty(), expected_solvable);
        }
    }

    #[test]
    fn energy_paths_agree(r in 1u64..40, range in 1u64..6, j in 1i64..40, h in 0i64..4) {
        let range = range.min(r);
        prop_assume!(gcd(j as u64 % r, r) == 1 || r == 1);
        let f = factorize(r).unwrap();
        for kind in [EnergyKind::E2, EnergyKind::E4, EnergyKind::F2] {
            let a = energy(kind, range, j, h, &f, Method::Convolution).unwrap();
            let b = energy(kind, range, j, h, &f, Method::Brute).unwrap();
            prop_assert_eq!(a.energy, b.energy);
        }
    }

    #[test]
    fn gauss_forms_agree(q in (0u64..400).prop_map(|x| 2 * x + 1), a in -1000i64..1000, b in -1000i64..1000) {
        let d = gauss_sum_direct(q, a, b).unwrap().value;
        let c = gauss_sum_closed(q, a, b).unwrap().value;
        prop_assert!((d - c).norm() < 1e-8);
    }

    #[test]
    fn approximation_holds(p in 0i128..1_000_000, q in 1i128..1_000_000, tau in 1u64..10_000) {
        let x = Rational::new(p, q);
        let a = dirichlet_approx(x, tau).unwrap();
        prop_assert!(a.r >= 1 && a.r <= tau);
        prop_assert!(satisfies_approximation(x, tau, &a));
    }

    #[test]
    fn records_round_trip(x in any::<f64>(), i in any::<i64>(), t in "[ -~]{0,12}", flag in any::<bool>()) {
        let recs = vec![ResultRecord::new("prop").param("i", i).param("t", t.as_str()).output("x", x).output("flag", flag)];
        for format in [Format::Csv, Format::Json] {
            let text = encode(&recs, format).unwrap();
            prop_assert_eq!(&decode(&text, format).unwrap(), &recs);
        }
    }
}
