use jacobi_cli::config::parse_config_file;
use jacobi_cli::parse::{parse_complex, parse_grid};
use jacobi_cli::run::fmt_f64;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn complex_round_trip(re in finite(), im in finite()) {
        let sign = if im.is_sign_negative() { "-" } else { "+" };
        let text = format!("{}{sign}{}i", fmt_f64(re), fmt_f64(im.abs()));
        let z = parse_complex(&text).unwrap();
        prop_assert_eq!(z.re.to_bits(), re.to_bits());
        prop_assert_eq!(z.im.abs().to_bits(), im.abs().to_bits());
    }

    #[test]
    fn real_round_trip(x in finite()) {
        prop_assert_eq!(parse_complex(&fmt_f64(x)).unwrap().re.to_bits(), x.to_bits());
    }

    #[test]
    fn grid_round_trip(lo in -1e3..1e3f64, width in 1e-3..1e3f64, k in 1usize..5000) {
        let step = width / k as f64;
        let g = parse_grid(&format!("{}:{}:{}", fmt_f64(lo), fmt_f64(lo + width), fmt_f64(step))).unwrap();
        prop_assert!(g.len() == k + 1 || g.len() == k, "{} vs {k}", g.len());
        prop_assert!(*g.points().last().unwrap() <= g.hi + 1e-9 * g.hi.abs().max(1.0));
    }

    #[test]
    fn parsers_never_panic(s in "\\PC{0,64}") {
        let _ = parse_complex(&s);
        let _ = parse_grid(&s);
        let _ = parse_config_file(&s);
    }

    #[test]
    fn numeric_text_never_panics(s in "[-+0-9.eEij: ]{0,24}") {
        let _ = parse_complex(&s);
        let _ = parse_grid(&s);
    }
}
