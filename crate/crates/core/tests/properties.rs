use jacobi_core::model_file::{model_to_toml, parse_model};
use jacobi_core::solutions::{first_kind, second_kind, wronskian, wronskian_constancy};
use jacobi_core::spectral::finite_section_eigs;
use jacobi_core::{CoefficientModel, Diagonal, LogComplex, OffDiagonal};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn sub_family() -> impl Strategy<Value = CoefficientModel> {
    (0.5..3.0f64, 1.5..3.0f64, 0.0..2.0f64, -2.0..2.0f64, 0.5..1.0f64).prop_map(|(gamma, p, shift, delta, q)| {
        CoefficientModel::family(
            "random-sub",
            OffDiagonal::Power { gamma, p, shift },
            Diagonal::Power { delta, q: q * p },
        )
        .unwrap()
    })
}

fn small_family() -> impl Strategy<Value = CoefficientModel> {
    (0.2..3.0f64, 0.0..2.0f64, 0.5..2.0f64, -3.0..3.0f64, 0.0..1.5f64).prop_map(|(gamma, p, shift, delta, q)| {
        CoefficientModel::family("small", OffDiagonal::Power { gamma, p, shift }, Diagonal::Power { delta, q }).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn log_complex_arithmetic(a in complex(), b in complex(), s in -700.0..700.0f64) {
        prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
        let (la, lb) = (LogComplex::from_complex(a), LogComplex::from_complex(b));
        prop_assert!(close((la * lb).to_complex(), a * b, 1e-13));
        prop_assert!(close((la / lb).to_complex(), a / b, 1e-13));
        prop_assert!(close(la.recip().to_complex(), 1.0 / a, 1e-13));
        let sum = la.add(lb).to_complex();
        prop_assert!((sum - (a + b)).norm() <= 1e-13 * (a.norm() + b.norm()));
        let big = la.scale_ln(s).scale_ln(800.0);
        prop_assert!(close(big.scale_ln(-800.0 - s).to_complex(), a, 1e-12));
        prop_assert!(close(la.conj().to_complex(), a.conj(), 1e-15));
    }

    #[test]
    fn polynomial_pair_wronskian(m in sub_family(), re in -5.0..5.0f64, im in -5.0..5.0f64) {
        let z = Complex64::new(re, im);
        let p = first_kind(&m, z, 121).unwrap();
        let q = second_kind(&m, z, 121).unwrap();
        prop_assert!((wronskian(&m, &p, &q, 0).unwrap() - 1.0).norm() < 1e-12);
        prop_assert!(wronskian_constancy(&m, &p, &q, 120).unwrap() < 1e-10);
    }

    #[test]
    fn sections_interlace(m in small_family(), n in 2usize..14) {
        let a = finite_section_eigs(&m, n, n, Some(53)).unwrap();
        let b = finite_section_eigs(&m, n + 1, n + 1, Some(53)).unwrap();
        prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
        let slack = 1e-10 * b.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        for k in 0..n {
            prop_assert!(b[k] <= a[k] + slack && a[k] <= b[k + 1] + slack, "k = {k}: {a:?} vs {b:?}");
        }
        let trace: f64 = (0..n).map(|k| m.eval_b(k).unwrap()).sum();
        prop_assert!((a.iter().sum::<f64>() - trace).abs() <= 1e-9 * a.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
    }

    #[test]
    fn two_by_two_closed_form(m in small_family(), wide in any::<bool>()) {
        let (b0, b1, a0) = (m.eval_b(0).unwrap(), m.eval_b(1).unwrap(), m.eval_a(0).unwrap());
        let c = ((b0 - b1).powi(2) / 4.0 + a0 * a0).sqrt();
        let e = finite_section_eigs(&m, 2, 2, Some(if wide { 192 } else { 53 })).unwrap();
        let scale = c + (b0 + b1).abs();
        prop_assert!((e[0] - ((b0 + b1) / 2.0 - c)).abs() <= 1e-13 * scale);
        prop_assert!((e[1] - ((b0 + b1) / 2.0 + c)).abs() <= 1e-13 * scale);
    }

    #[test]
    fn model_text_round_trip(gamma in 1e-3..1e3f64, p in -3.0..6.0f64, shift in 0.0..4.0f64, beta in -5.0..5.0f64) {
        let m = CoefficientModel::family("rt", OffDiagonal::Power { gamma, p, shift }, Diagonal::ConstBeta { beta }).unwrap();
        prop_assert_eq!(parse_model(&model_to_toml(&m)).unwrap(), m);
    }

    #[test]
    fn model_parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_model(&text);
    }

    #[test]
    fn model_parser_on_near_miss_documents(
        family in prop::sample::select(vec!["power", "geometric", "stretched", "parity", "zero", "const_beta", "bogus"]),
        key in prop::sample::select(vec!["gamma", "p", "x", "q", "c1", "c2", "shift", "beta", "delta"]),
        value in prop::sample::select(vec!["1.0", "-1.0", "0.0", "nan", "inf", "1e308", "\"x\"", "[1.0]"]),
        table in any::<bool>(),
    ) {
        let mut doc = format!("schema = 1\nname = \"f\"\n[a]\nfamily = \"{family}\"\n{key} = {value}\n");
        if table {
            doc.push_str("[table]\na = [1.0, 0.0]\nb = [0.0]\n");
        }
        let _ = parse_model(&doc);
    }
}
